//! Monte Carlo estimators of detection information, false-alarm and
//! detection probabilities, and the Kondo DI of a detector's confusion table.
//!
//! Entropies and DI are reported in bits.

use serde::{Deserialize, Serialize};

use crate::channel::{
    posterior_from_log_upsilon, ChannelEvaluator, ChannelMode, DEFAULT_OVERSAMPLE,
};
use crate::detectors::{Detector, DetectorId, NpConfig, Observation};
use crate::error::{Error, Result};
use crate::rng::{Lane, StreamKey};
use crate::sigmodel::{sinc_correlate, synthesize_with_state, ScenarioConfig, TargetState};
use crate::specialfns::{binary_entropy_bits, marcum_q1};
use crate::stats::{par_map_indexed, MeanEstimate};

/// Smallest trial count accepted by the expectation estimators.
pub const MIN_TRIALS: usize = 1000;

/// Trial count and channel evaluation options for one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub trials: usize,
    pub mode: ChannelMode,
    pub oversample: usize,
    /// Grid-point index mixed into every substream key.
    pub grid_index: u64,
}

impl McSettings {
    pub fn new(trials: usize, mode: ChannelMode) -> Self {
        Self {
            trials,
            mode,
            oversample: DEFAULT_OVERSAMPLE,
            grid_index: 0,
        }
    }

    pub fn with_grid_index(mut self, grid_index: u64) -> Self {
        self.grid_index = grid_index;
        self
    }

    pub fn with_oversample(mut self, oversample: usize) -> Self {
        self.oversample = oversample;
        self
    }

    fn check(&self, min_trials: usize) -> Result<()> {
        if self.trials < min_trials {
            return Err(Error::validation(
                "trials",
                format!("must be ≥ {min_trials}, got {}", self.trials),
            ));
        }
        if self.oversample == 0 {
            return Err(Error::validation("oversample", "must be ≥ 1"));
        }
        Ok(())
    }
}

/// A DI value with its Monte Carlo standard error. `trials` is 0 for
/// closed-form values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DIEstimate {
    pub value_bits: f64,
    pub std_error_bits: f64,
    pub trials: usize,
}

/// Monte Carlo P_FA and P_D with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfaPd {
    pub p_fa: f64,
    pub p_fa_stderr: f64,
    pub p_d: f64,
    pub p_d_stderr: f64,
    pub trials: usize,
}

/// Counts of (true state, declared state); `n01` is true 0 declared 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub n00: u64,
    pub n01: u64,
    pub n10: u64,
    pub n11: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, truth: TargetState, declared: TargetState) {
        match (truth, declared) {
            (TargetState::Absent, TargetState::Absent) => self.n00 += 1,
            (TargetState::Absent, TargetState::Present) => self.n01 += 1,
            (TargetState::Present, TargetState::Absent) => self.n10 += 1,
            (TargetState::Present, TargetState::Present) => self.n11 += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.n00 + self.n01 + self.n10 + self.n11
    }

    pub fn absent_trials(&self) -> u64 {
        self.n00 + self.n01
    }

    pub fn present_trials(&self) -> u64 {
        self.n10 + self.n11
    }

    /// `n01 / (n00 + n01)`, or `None` without absent trials.
    pub fn p_fa(&self) -> Option<f64> {
        let n = self.absent_trials();
        (n > 0).then(|| self.n01 as f64 / n as f64)
    }

    /// `n11 / (n10 + n11)`, or `None` without present trials.
    pub fn p_d(&self) -> Option<f64> {
        let n = self.present_trials();
        (n > 0).then(|| self.n11 as f64 / n as f64)
    }

    /// Empirical frequency of the present state.
    pub fn empirical_prior(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| self.present_trials() as f64 / n as f64)
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            n00: self.n00 + o.n00,
            n01: self.n01 + o.n01,
            n10: self.n10 + o.n10,
            n11: self.n11 + o.n11,
        }
    }
}

fn check_prior(prior_present: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&prior_present) {
        return Err(Error::domain(format!(
            "prior_present must lie in [0, 1], got {prior_present}"
        )));
    }
    Ok(())
}

/// Draws ln Υ(1,y) for one snapshot of the given state. Trial `t` of the
/// absent hypothesis uses stream `2t`, of the present hypothesis `2t + 1`.
fn draw_log_upsilon(
    evaluator: &ChannelEvaluator,
    key: StreamKey,
    trial: usize,
    state: TargetState,
) -> f64 {
    let stream = 2 * trial as u64 + state.index() as u64;
    let mut rng = key.substream(stream, Lane::Scenario);
    let snap = synthesize_with_state(evaluator.config(), state, &mut rng);
    evaluator.statistic(&snap).log_upsilon.ln()
}

/// ln Υ(1,y) samples under each hypothesis. They do not depend on the prior,
/// so one draw serves every prior on a grid with common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticSamples {
    absent: Vec<f64>,
    present: Vec<f64>,
}

impl StatisticSamples {
    /// `settings.trials` snapshots under each hypothesis.
    pub fn draw(config: &ScenarioConfig, settings: &McSettings) -> Result<Self> {
        Self::draw_states(config, settings, true)
    }

    /// Noise-only snapshots only; P_D and DI are then unavailable.
    pub fn draw_absent(config: &ScenarioConfig, settings: &McSettings) -> Result<Self> {
        Self::draw_states(config, settings, false)
    }

    fn draw_states(config: &ScenarioConfig, settings: &McSettings, present: bool) -> Result<Self> {
        settings.check(1)?;
        let evaluator = ChannelEvaluator::new(config, settings.mode, settings.oversample)?;
        let key = StreamKey::new(config.seed, settings.grid_index);
        let absent = par_map_indexed(settings.trials, |t| {
            draw_log_upsilon(&evaluator, key, t, TargetState::Absent)
        });
        let present = if present {
            par_map_indexed(settings.trials, |t| {
                draw_log_upsilon(&evaluator, key, t, TargetState::Present)
            })
        } else {
            Vec::new()
        };
        Ok(Self { absent, present })
    }

    pub fn from_parts(absent: Vec<f64>, present: Vec<f64>) -> Self {
        Self { absent, present }
    }

    pub fn absent(&self) -> &[f64] {
        &self.absent
    }

    pub fn present(&self) -> &[f64] {
        &self.present
    }

    fn mean_posterior(samples: &[f64], prior_present: f64) -> MeanEstimate {
        let p: Vec<f64> = samples
            .iter()
            .map(|l| posterior_from_log_upsilon(*l, prior_present).p_present)
            .collect();
        MeanEstimate::from_samples(&p)
    }

    /// P_FA = E₀[P(1|y)] over the noise-only draws.
    pub fn pfa(&self, prior_present: f64) -> MeanEstimate {
        Self::mean_posterior(&self.absent, prior_present)
    }

    /// P_FA = E₀[P(1|y)] and P_D = E₁[P(1|y)].
    pub fn pfa_pd(&self, prior_present: f64) -> PfaPd {
        let fa = self.pfa(prior_present);
        let d = Self::mean_posterior(&self.present, prior_present);
        PfaPd {
            p_fa: fa.mean,
            p_fa_stderr: fa.std_error,
            p_d: d.mean,
            p_d_stderr: d.std_error,
            trials: self.absent.len(),
        }
    }

    /// I(V;Y) = H(V) − [π(0)E₀ + π(1)E₁] H_b(P(1|y)), stratified by state.
    pub fn di(&self, prior_present: f64) -> DIEstimate {
        let cond = |samples: &[f64]| {
            let h: Vec<f64> = samples
                .iter()
                .map(|l| {
                    binary_entropy_bits(posterior_from_log_upsilon(*l, prior_present).p_present)
                })
                .collect();
            MeanEstimate::from_samples(&h)
        };
        let h0 = cond(&self.absent);
        let h1 = cond(&self.present);
        let p1 = prior_present;
        let p0 = 1.0 - prior_present;
        DIEstimate {
            value_bits: binary_entropy_bits(p1) - (p0 * h0.mean + p1 * h1.mean),
            std_error_bits: ((p0 * h0.std_error).powi(2) + (p1 * h1.std_error).powi(2)).sqrt(),
            trials: self.absent.len() + self.present.len(),
        }
    }

    /// π(1) with P_FA(π(1)) = `target_pfa` on these draws, by bisection.
    pub fn invert_prior(&self, target_pfa: f64, tolerance: f64) -> Result<f64> {
        if !(tolerance > 0.0) {
            return Err(Error::domain(format!(
                "tolerance must be positive, got {tolerance}"
            )));
        }
        if !(0.0..=1.0).contains(&target_pfa) {
            return Err(Error::domain(format!(
                "target P_FA {target_pfa} outside the achievable range [0, 1]"
            )));
        }
        if target_pfa == 0.0 || target_pfa == 1.0 {
            return Ok(target_pfa);
        }
        if self.absent.is_empty() {
            return Err(Error::domain("no noise-only draws to invert"));
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.pfa(mid).mean < target_pfa {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let prior = 0.5 * (lo + hi);
        let achieved = self.pfa(prior).mean;
        if (achieved - target_pfa).abs() > tolerance {
            return Err(Error::domain(format!(
                "bisection reached P_FA {achieved}, not within {tolerance} of {target_pfa}"
            )));
        }
        Ok(prior)
    }
}

/// I(V;Y) = H(V) − E_y[H_b(P(1|y))] with v drawn from the prior per trial.
pub fn di_monte_carlo(
    config: &ScenarioConfig,
    trials: usize,
    mode: ChannelMode,
) -> Result<DIEstimate> {
    di_monte_carlo_with(config, &McSettings::new(trials, mode))
}

pub fn di_monte_carlo_with(config: &ScenarioConfig, settings: &McSettings) -> Result<DIEstimate> {
    settings.check(MIN_TRIALS)?;
    let evaluator = ChannelEvaluator::new(config, settings.mode, settings.oversample)?;
    let key = StreamKey::new(config.seed, settings.grid_index);
    let prior = config.prior_present;
    let h = par_map_indexed(settings.trials, |t| {
        let mut rng = key.substream(t as u64, Lane::Scenario);
        let state = TargetState::from_present(rng.uniform() < prior);
        let snap = synthesize_with_state(config, state, &mut rng);
        let l = evaluator.statistic(&snap).log_upsilon.ln();
        binary_entropy_bits(posterior_from_log_upsilon(l, prior).p_present)
    });
    let cond = MeanEstimate::from_samples(&h);
    Ok(DIEstimate {
        value_bits: binary_entropy_bits(prior) - cond.mean,
        std_error_bits: cond.std_error,
        trials: settings.trials,
    })
}

/// Monte Carlo averages of P(1|y) over noise-only and target-present snapshots.
pub fn theoretical_pfa_pd(
    config: &ScenarioConfig,
    trials: usize,
    mode: ChannelMode,
) -> Result<PfaPd> {
    let settings = McSettings::new(trials, mode);
    settings.check(MIN_TRIALS)?;
    Ok(StatisticSamples::draw(config, &settings)?.pfa_pd(config.prior_present))
}

/// π(1) whose theoretical P_FA equals `target_pfa`, reusing the same
/// noise-only draws at every bisection step.
pub fn invert_prior_from_pfa(
    template: &ScenarioConfig,
    target_pfa: f64,
    trials: usize,
    tolerance: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&target_pfa) {
        return Err(Error::domain(format!(
            "target P_FA {target_pfa} outside the achievable range [0, 1]"
        )));
    }
    if target_pfa == 0.0 || target_pfa == 1.0 {
        return Ok(target_pfa);
    }
    let settings = McSettings::new(trials, ChannelMode::FullInterval);
    settings.check(MIN_TRIALS)?;
    StatisticSamples::draw_absent(template, &settings)?.invert_prior(target_pfa, tolerance)
}

/// Mutual information of the 2×2 (state, decision) law in bits:
/// `H(V) − [𝒫·H_b(A) + (1−𝒫)·H_b(D)]`.
pub fn kondo_from_rates(prior_present: f64, p_d: f64, p_fa: f64) -> f64 {
    let p1 = prior_present;
    let p0 = 1.0 - prior_present;
    let declared = p1 * p_d + p0 * p_fa;
    let a = if declared > 0.0 {
        p1 * p_d / declared
    } else {
        0.0
    };
    let d = if declared < 1.0 {
        p0 * (1.0 - p_fa) / (1.0 - declared)
    } else {
        0.0
    };
    binary_entropy_bits(p1)
        - (declared * binary_entropy_bits(a) + (1.0 - declared) * binary_entropy_bits(d))
}

/// `H_b'(p) = log₂((1−p)/p)`.
fn entropy_slope(p: f64) -> f64 {
    ((1.0 - p) / p).log2()
}

/// Kondo DI of a confusion table, with a delta-method standard error from
/// the binomial variances of P_D and P_FA.
pub fn kondo_di(counts: &ConfusionCounts, prior_present: f64) -> Result<DIEstimate> {
    check_prior(prior_present)?;
    if counts.total() == 0 {
        return Err(Error::domain("confusion table is empty"));
    }
    let rate = |r: Option<f64>, weight: f64, what: &str| match r {
        Some(r) => Ok(r),
        None if weight == 0.0 => Ok(0.0),
        None => Err(Error::domain(format!(
            "no {what} trials to estimate the rate from"
        ))),
    };
    let p_d = rate(counts.p_d(), prior_present, "target-present")?;
    let p_fa = rate(counts.p_fa(), 1.0 - prior_present, "noise-only")?;
    let value = kondo_from_rates(prior_present, p_d, p_fa);

    let declared = prior_present * p_d + (1.0 - prior_present) * p_fa;
    let term = |weight: f64, p: f64, n: u64| {
        let var = if n > 0 { p * (1.0 - p) / n as f64 } else { 0.0 };
        if var == 0.0 {
            0.0
        } else {
            let grad = weight * (entropy_slope(declared) - entropy_slope(p));
            grad * grad * var
        }
    };
    let var = term(prior_present, p_d, counts.present_trials())
        + term(1.0 - prior_present, p_fa, counts.absent_trials());
    Ok(DIEstimate {
        value_bits: value,
        std_error_bits: var.sqrt(),
        trials: counts.total() as usize,
    })
}

/// One operating point of the matched-position Neyman–Pearson detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NpPoint {
    pub p_fa: f64,
    pub p_d: f64,
    pub di_bits: f64,
}

/// 30 log-spaced false-alarm levels from 1e-4 to 0.5.
pub fn default_pfa_grid() -> Vec<f64> {
    let (lo, hi) = (1e-4f64.ln(), 0.5f64.ln());
    (0..30)
        .map(|i| (lo + (hi - lo) * i as f64 / 29.0).exp())
        .collect()
}

fn check_pfa_grid(pfa_grid: &[f64]) -> Result<()> {
    if pfa_grid.is_empty() {
        return Err(Error::validation("pfa_grid", "must be nonempty"));
    }
    for &p in pfa_grid {
        NpConfig::new(p)?;
    }
    Ok(())
}

/// `P_D = Q₁(√(2ρ²), √(−2 ln P_FA))` and the Kondo DI at every grid level.
pub fn np_theoretical_curve(
    config: &ScenarioConfig,
    prior_present: f64,
    pfa_grid: &[f64],
) -> Result<Vec<NpPoint>> {
    check_prior(prior_present)?;
    check_pfa_grid(pfa_grid)?;
    let a = (2.0 * config.rho2()).sqrt();
    pfa_grid
        .iter()
        .map(|&p_fa| {
            let p_d = marcum_q1(a, (-2.0 * p_fa.ln()).sqrt())?;
            Ok(NpPoint {
                p_fa,
                p_d,
                di_bits: kondo_from_rates(prior_present, p_d, p_fa),
            })
        })
        .collect()
}

/// Best Kondo DI of the NP detector over the false-alarm grid (closed form).
pub fn np_theoretical_di(
    config: &ScenarioConfig,
    prior_present: f64,
    pfa_grid: &[f64],
) -> Result<DIEstimate> {
    let best = np_theoretical_curve(config, prior_present, pfa_grid)?
        .into_iter()
        .map(|p| p.di_bits)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DIEstimate {
        value_bits: best,
        std_error_bits: 0.0,
        trials: 0,
    })
}

/// Empirical NP operating points: matched-filter envelopes at x₀ drawn once
/// per hypothesis and thresholded at every grid level.
pub fn np_empirical_sweep(
    config: &ScenarioConfig,
    settings: &McSettings,
    prior_present: f64,
    pfa_grid: &[f64],
) -> Result<Vec<(NpPoint, ConfusionCounts)>> {
    settings.check(1)?;
    check_prior(prior_present)?;
    check_pfa_grid(pfa_grid)?;
    config.validate()?;
    let key = StreamKey::new(config.seed, settings.grid_index);
    let envelopes = |state: TargetState| {
        par_map_indexed(settings.trials, |t| {
            let mut rng = key.substream(2 * t as u64 + state.index() as u64, Lane::Scenario);
            let snap = synthesize_with_state(config, state, &mut rng);
            sinc_correlate(&snap.samples, snap.first_index(), config.true_position).norm()
        })
    };
    let e0 = envelopes(TargetState::Absent);
    let e1 = envelopes(TargetState::Present);
    pfa_grid
        .iter()
        .map(|&target| {
            let th = crate::detectors::np_threshold(config, &NpConfig::new(target)?)?;
            let n01 = e0.iter().filter(|e| **e > th).count() as u64;
            let n11 = e1.iter().filter(|e| **e > th).count() as u64;
            let counts = ConfusionCounts {
                n00: e0.len() as u64 - n01,
                n01,
                n10: e1.len() as u64 - n11,
                n11,
            };
            let p_fa = counts.p_fa().unwrap_or(0.0);
            let p_d = counts.p_d().unwrap_or(0.0);
            Ok((
                NpPoint {
                    p_fa,
                    p_d,
                    di_bits: kondo_from_rates(prior_present, p_d, p_fa),
                },
                counts,
            ))
        })
        .collect()
}

/// Runs every detector on the same trials (state drawn from the prior) and
/// tallies one confusion table per detector.
pub fn detector_confusion(
    config: &ScenarioConfig,
    settings: &McSettings,
    detectors: &[&dyn Detector],
) -> Result<Vec<ConfusionCounts>> {
    settings.check(1)?;
    for d in detectors {
        match d.id() {
            DetectorId::Np if settings.mode != ChannelMode::MatchedPosition => {
                return Err(Error::domain(
                    "the NP detector is only defined at the matched position",
                ))
            }
            DetectorId::Typical => {
                return Err(Error::domain(
                    "the typical-set decoder operates on m-snapshot sequences",
                ))
            }
            _ => {}
        }
    }
    let evaluator = ChannelEvaluator::new(config, settings.mode, settings.oversample)?;
    let key = StreamKey::new(config.seed, settings.grid_index);
    let prior = config.prior_present;
    let per_trial = par_map_indexed(settings.trials, |t| {
        let mut rng = key.substream(t as u64, Lane::Scenario);
        let state = TargetState::from_present(rng.uniform() < prior);
        let snap = synthesize_with_state(config, state, &mut rng);
        let l = evaluator.statistic(&snap).log_upsilon.ln();
        let obs = Observation {
            snapshot: &snap,
            config,
            posterior: posterior_from_log_upsilon(l, prior),
        };
        let decisions: Vec<TargetState> = detectors
            .iter()
            .enumerate()
            .map(|(i, d)| {
                // One decision stream per (trial, detector slot).
                let mut drng = StreamKey::new(config.seed ^ i as u64, settings.grid_index)
                    .substream(t as u64, Lane::Decision);
                d.decide(&obs, &mut drng).declared_state
            })
            .collect();
        (state, decisions)
    });
    let mut tables = vec![ConfusionCounts::default(); detectors.len()];
    for (state, decisions) in per_trial {
        for (table, d) in tables.iter_mut().zip(decisions) {
            table.record(state, d);
        }
    }
    Ok(tables)
}
