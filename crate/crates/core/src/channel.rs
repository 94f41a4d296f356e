//! The equivalent detection channel in log domain: the detection statistic
//! Υ(1,y), the posterior P(v|y), and the perfectly matched special case.
//!
//! Υ(0,y) = 1 identically, so only ln Υ(1,y) is ever stored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigmodel::{sinc_correlate, MatchedFilterBank, ScenarioConfig, Snapshot};
use crate::specialfns::{ln_i0, log_sum_exp_raw, softplus, LogValue};

/// Default number of delay-grid points per unit of normalized delay.
pub const DEFAULT_OVERSAMPLE: usize = 8;

/// Which form of the channel the receiver evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    /// Delay unknown and averaged over the whole observation interval.
    #[default]
    FullInterval,
    /// Matched filter evaluated at the true delay only.
    MatchedPosition,
}

impl std::str::FromStr for ChannelMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full-interval" | "full" => Ok(ChannelMode::FullInterval),
            "matched-position" | "matched" => Ok(ChannelMode::MatchedPosition),
            other => Err(format!(
                "unknown channel mode {other:?} (expected full-interval or matched-position)"
            )),
        }
    }
}

impl std::fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelMode::FullInterval => "full-interval",
            ChannelMode::MatchedPosition => "matched-position",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionStatistic {
    /// ln Υ(1, y).
    pub log_upsilon: LogValue,
    /// Number of delay points the average was taken over.
    pub grid_points: usize,
}

impl DetectionStatistic {
    /// ln Υ(v, y) for either state.
    #[inline]
    pub fn log_upsilon_for(&self, present: bool) -> f64 {
        if present {
            self.log_upsilon.ln()
        } else {
            0.0
        }
    }
}

/// `(P(0|y), P(1|y))`, with the log-odds kept for log-domain consumers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorPair {
    pub p_absent: f64,
    pub p_present: f64,
    log_odds: f64,
}

impl PosteriorPair {
    /// Posterior from `ln[P(1|y)/P(0|y)]`; ±∞ give the degenerate posteriors.
    pub fn from_log_odds(log_odds: f64) -> Self {
        let p_present = if log_odds >= 0.0 {
            1.0 / (1.0 + (-log_odds).exp())
        } else {
            let e = log_odds.exp();
            e / (1.0 + e)
        };
        Self {
            p_absent: 1.0 - p_present,
            p_present,
            log_odds,
        }
    }

    /// Posterior with the given probability of presence.
    pub fn from_present(p_present: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_present) {
            return Err(Error::domain(format!(
                "posterior probability must lie in [0, 1], got {p_present}"
            )));
        }
        Ok(Self {
            p_absent: 1.0 - p_present,
            p_present,
            log_odds: p_present.ln() - (1.0 - p_present).ln(),
        })
    }

    pub fn log_odds(&self) -> f64 {
        self.log_odds
    }

    /// ln P(1|y), accurate even when P(1|y) rounds to 0 or 1.
    pub fn ln_present(&self) -> f64 {
        -softplus(-self.log_odds)
    }

    /// ln P(0|y).
    pub fn ln_absent(&self) -> f64 {
        -softplus(self.log_odds)
    }

    pub fn ln_prob(&self, present: bool) -> f64 {
        if present {
            self.ln_present()
        } else {
            self.ln_absent()
        }
    }
}

/// Bessel argument 2ρ²|uᴴ(x)y|/α, written as 2ρ|uᴴ(x)y|/√N₀ so ρ² = 0 is regular.
#[inline]
fn bessel_scale(config: &ScenarioConfig) -> f64 {
    2.0 * config.rho2().sqrt() / config.noise_power.sqrt()
}

fn check_snapshot(snapshot: &Snapshot, config: &ScenarioConfig) -> Result<()> {
    if snapshot.len() != config.tb {
        return Err(Error::domain(format!(
            "snapshot has {} samples but tb = {}",
            snapshot.len(),
            config.tb
        )));
    }
    Ok(())
}

/// ln Υ(1,y) = −ρ² + ln[(1/G) Σ_g I₀(2ρ²|uᴴ(x_g)y|/α)] over the rectangle-rule
/// grid of `G = tb·oversample` delays, with matched-filter outputs from direct
/// sinc sums.
pub fn detection_statistic(
    snapshot: &Snapshot,
    config: &ScenarioConfig,
    oversample: usize,
) -> Result<DetectionStatistic> {
    check_snapshot(snapshot, config)?;
    if oversample == 0 {
        return Err(Error::validation("oversample", "must be ≥ 1"));
    }
    let scale = bessel_scale(config);
    let g_len = config.tb * oversample;
    let start = config.interval_start();
    let logs: Vec<f64> = (0..g_len)
        .map(|g| {
            let x = start + g as f64 / oversample as f64;
            let mf = sinc_correlate(&snapshot.samples, snapshot.first_index(), x);
            ln_i0(scale * mf.norm())
        })
        .collect();
    Ok(assemble(config.rho2(), &logs))
}

fn assemble(rho2: f64, log_bessel: &[f64]) -> DetectionStatistic {
    let g = log_bessel.len();
    DetectionStatistic {
        log_upsilon: LogValue(-rho2 + log_sum_exp_raw(log_bessel) - (g as f64).ln()),
        grid_points: g,
    }
}

/// P(1|y) = π(1)Υ / (π(0) + π(1)Υ), formed from the log-odds
/// `ln π(1) − ln π(0) + ln Υ(1,y)`.
pub fn posterior(stat: &DetectionStatistic, prior_present: f64) -> Result<PosteriorPair> {
    if !(0.0..=1.0).contains(&prior_present) {
        return Err(Error::domain(format!(
            "prior_present must lie in [0, 1], got {prior_present}"
        )));
    }
    Ok(posterior_from_log_upsilon(
        stat.log_upsilon.ln(),
        prior_present,
    ))
}

#[inline]
pub(crate) fn posterior_from_log_upsilon(log_upsilon: f64, prior_present: f64) -> PosteriorPair {
    if prior_present <= 0.0 {
        return PosteriorPair::from_log_odds(f64::NEG_INFINITY);
    }
    if prior_present >= 1.0 {
        return PosteriorPair::from_log_odds(f64::INFINITY);
    }
    let log_prior_odds = prior_present.ln() - (1.0 - prior_present).ln();
    PosteriorPair::from_log_odds(log_prior_odds + log_upsilon)
}

/// ln Υ(1,y,x₀) = −ρ² + ln I₀(2ρ²|uᴴ(x₀)y|/α) with the filter placed at the true delay.
pub fn special_case_statistic(
    snapshot: &Snapshot,
    config: &ScenarioConfig,
) -> Result<DetectionStatistic> {
    check_snapshot(snapshot, config)?;
    let mf = sinc_correlate(
        &snapshot.samples,
        snapshot.first_index(),
        config.true_position,
    );
    Ok(DetectionStatistic {
        log_upsilon: LogValue(-config.rho2() + ln_i0(bessel_scale(config) * mf.norm())),
        grid_points: 1,
    })
}

/// Reusable evaluator for one scenario: owns the FFT filter bank so Monte
/// Carlo loops pay the planning cost once.
#[derive(Debug)]
pub struct ChannelEvaluator {
    config: ScenarioConfig,
    mode: ChannelMode,
    bank: Option<MatchedFilterBank>,
}

impl ChannelEvaluator {
    pub fn new(config: &ScenarioConfig, mode: ChannelMode, oversample: usize) -> Result<Self> {
        config.validate()?;
        let bank = match mode {
            ChannelMode::FullInterval => Some(MatchedFilterBank::new(config.tb, oversample)?),
            ChannelMode::MatchedPosition => None,
        };
        Ok(Self {
            config: config.clone(),
            mode,
            bank,
        })
    }

    pub fn mode(&self) -> ChannelMode {
        self.mode
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn statistic(&self, snapshot: &Snapshot) -> DetectionStatistic {
        match &self.bank {
            None => special_case_statistic(snapshot, &self.config)
                .expect("snapshot built from this evaluator's config"),
            Some(bank) => {
                let mut field = Vec::with_capacity(bank.grid_len());
                bank.evaluate(&snapshot.samples, &mut field);
                let scale = bessel_scale(&self.config);
                let logs: Vec<f64> = field.iter().map(|z| ln_i0(scale * z.norm())).collect();
                assemble(self.config.rho2(), &logs)
            }
        }
    }
}
