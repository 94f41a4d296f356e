//! The m-snapshot extension: typicality tests, conditional typical-set
//! cardinalities, failed-decision probability and empirical DI.
//!
//! Densities of y are taken relative to the noise-only law p(y|0), which
//! cancels from every comparison once the reference entropies use the same
//! base. Per snapshot
//!
//! - `ln p̃(y)   = ln(π(0) + π(1)·Υ(1,y))`
//! - `ln p̃(v,y) = ln π(v) + v·ln Υ(1,y)`
//!
//! The slack ε is in bits; nat-valued references are converted before
//! comparison.

use std::f64::consts::LN_2;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{posterior_from_log_upsilon, ChannelEvaluator, ChannelMode, PosteriorPair};
use crate::detectors::typical_set_decide;
use crate::error::{Error, Result};
use crate::metrics::McSettings;
use crate::rng::{Lane, StreamKey, Substream};
use crate::sigmodel::{synthesize_with_state, ScenarioConfig, Snapshot, TargetState};
use crate::specialfns::binary_entropy_bits;
use crate::stats::{par_map_indexed, MeanEstimate};

/// Largest m for which the 2^m candidate sequences are enumerated.
pub const MAX_ENUMERATION_M: usize = 24;

/// Smallest trial count accepted by [`estimate_reference_entropies`].
pub const MIN_REFERENCE_TRIALS: usize = 10_000;

/// Single-snapshot entropies the typicality tests compare against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntropies {
    pub config_hash: String,
    #[serde(rename = "H_V")]
    pub h_v_bits: f64,
    #[serde(rename = "h_Y")]
    pub h_y_nats: f64,
    #[serde(rename = "h_VY")]
    pub h_vy_nats: f64,
    #[serde(rename = "H_V_given_Y")]
    pub h_v_given_y_bits: f64,
    pub h_y_stderr: f64,
    pub h_vy_stderr: f64,
    pub h_v_given_y_stderr: f64,
    /// Per-trial mean of `h_VY − h_Y − H(V|Y)·ln 2`, zero in expectation.
    pub chain_rule_residual_nats: f64,
    pub chain_rule_stderr_nats: f64,
    pub prior_present: f64,
    pub trials: usize,
    pub seed: u64,
}

impl ReferenceEntropies {
    /// I(V;Y) = H(V) − H(V|Y) in bits.
    pub fn di_bits(&self) -> f64 {
        self.h_v_bits - self.h_v_given_y_bits
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prior_present) {
            return Err(Error::validation("prior_present", "must lie in [0, 1]"));
        }
        if !(self.h_v_bits >= 0.0 && self.h_v_bits <= 1.0) {
            return Err(Error::validation("H_V", "must lie in [0, 1] bits"));
        }
        let slack = 3.0 * self.h_v_given_y_stderr + 1e-12;
        if !(self.h_v_given_y_bits <= self.h_v_bits + slack) {
            return Err(Error::validation("H_V_given_Y", "must not exceed H_V"));
        }
        Ok(())
    }
}

/// m, ε (bits) and the references for one extension experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalityConfig {
    pub m: usize,
    pub epsilon: f64,
    pub reference: ReferenceEntropies,
}

impl TypicalityConfig {
    pub fn new(m: usize, epsilon: f64, reference: ReferenceEntropies) -> Result<Self> {
        let cfg = Self {
            m,
            epsilon,
            reference,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::validation("m", "must be ≥ 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::validation("epsilon", "must be positive"));
        }
        self.reference.validate()
    }
}

/// `(ln π(v), ln p̃(y), ln p̃(v,y))` of one snapshot, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolLogProbs {
    pub ln_prior: f64,
    pub ln_y: f64,
    pub ln_vy: f64,
}

fn ln_prior_of(present: bool, prior_present: f64) -> f64 {
    if present {
        prior_present.ln()
    } else {
        (1.0 - prior_present).ln()
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

impl SymbolLogProbs {
    pub fn new(present: bool, log_upsilon: f64, prior_present: f64) -> Self {
        let ln_prior = ln_prior_of(present, prior_present);
        let ln_y = log_add_exp((1.0 - prior_present).ln(), prior_present.ln() + log_upsilon);
        let ln_vy = if present {
            ln_prior + log_upsilon
        } else {
            ln_prior
        };
        Self {
            ln_prior,
            ln_y,
            ln_vy,
        }
    }
}

/// One draw of (V^m, Y^m) from the joint law.
#[derive(Debug, Clone)]
pub struct ExtendedTrial {
    pub states: Vec<TargetState>,
    pub snapshots: Vec<Snapshot>,
    /// ln Υ(1, yᵢ) per snapshot.
    pub log_upsilons: Vec<f64>,
    pub per_symbol_log_probs: Vec<SymbolLogProbs>,
}

impl ExtendedTrial {
    pub fn m(&self) -> usize {
        self.states.len()
    }

    pub fn posteriors(&self, prior_present: f64) -> Vec<PosteriorPair> {
        self.log_upsilons
            .iter()
            .map(|l| posterior_from_log_upsilon(*l, prior_present))
            .collect()
    }

    fn draw(evaluator: &ChannelEvaluator, m: usize, rng: &mut Substream) -> Self {
        let config = evaluator.config();
        let prior = config.prior_present;
        let mut states = Vec::with_capacity(m);
        let mut snapshots = Vec::with_capacity(m);
        let mut log_upsilons = Vec::with_capacity(m);
        let mut per_symbol = Vec::with_capacity(m);
        for _ in 0..m {
            let state = TargetState::from_present(rng.uniform() < prior);
            let snap = synthesize_with_state(config, state, rng);
            let l = evaluator.statistic(&snap).log_upsilon.ln();
            states.push(state);
            snapshots.push(snap);
            log_upsilons.push(l);
            per_symbol.push(SymbolLogProbs::new(state.is_present(), l, prior));
        }
        Self {
            states,
            snapshots,
            log_upsilons,
            per_symbol_log_probs: per_symbol,
        }
    }
}

/// Draws trial `trial` of an extension experiment.
pub fn draw_extended_trial(
    config: &ScenarioConfig,
    settings: &McSettings,
    m: usize,
    trial: u64,
) -> Result<ExtendedTrial> {
    if m == 0 {
        return Err(Error::validation("m", "must be ≥ 1"));
    }
    let evaluator = ChannelEvaluator::new(config, settings.mode, settings.oversample)?;
    let mut rng = StreamKey::new(config.seed, settings.grid_index).substream(trial, Lane::Scenario);
    Ok(ExtendedTrial::draw(&evaluator, m, &mut rng))
}

#[derive(Serialize)]
struct ReferenceKey<'a> {
    config: &'a ScenarioConfig,
    mode: ChannelMode,
    oversample: usize,
    grid_index: u64,
    trials: usize,
}

/// Hex SHA-256 of the canonical JSON of everything the references depend on.
pub fn reference_config_hash(config: &ScenarioConfig, settings: &McSettings) -> String {
    let key = ReferenceKey {
        config,
        mode: settings.mode,
        oversample: settings.oversample,
        grid_index: settings.grid_index,
        trials: settings.trials,
    };
    let bytes = serde_json::to_vec(&key).expect("reference key serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Monte Carlo estimates of H(V), h̃(Y), h̃(V,Y) and H(V|Y) with v drawn
/// from the prior.
pub fn estimate_reference_entropies(
    config: &ScenarioConfig,
    settings: &McSettings,
) -> Result<ReferenceEntropies> {
    if settings.trials < MIN_REFERENCE_TRIALS {
        return Err(Error::validation(
            "trials",
            format!("must be ≥ {MIN_REFERENCE_TRIALS}, got {}", settings.trials),
        ));
    }
    let evaluator = ChannelEvaluator::new(config, settings.mode, settings.oversample)?;
    let key = StreamKey::new(config.seed, settings.grid_index);
    let prior = config.prior_present;
    let rows = par_map_indexed(settings.trials, |t| {
        let mut rng = key.substream(t as u64, Lane::Scenario);
        let state = TargetState::from_present(rng.uniform() < prior);
        let snap = synthesize_with_state(config, state, &mut rng);
        let l = evaluator.statistic(&snap).log_upsilon.ln();
        let s = SymbolLogProbs::new(state.is_present(), l, prior);
        let h_cond = binary_entropy_bits(posterior_from_log_upsilon(l, prior).p_present);
        [
            -s.ln_y,
            -s.ln_vy,
            h_cond,
            (s.ln_y - s.ln_vy) - h_cond * LN_2,
        ]
    });
    let column =
        |i: usize| MeanEstimate::from_samples(&rows.iter().map(|r| r[i]).collect::<Vec<_>>());
    let (hy, hvy, hc, chain) = (column(0), column(1), column(2), column(3));
    Ok(ReferenceEntropies {
        config_hash: reference_config_hash(config, settings),
        h_v_bits: binary_entropy_bits(prior),
        h_y_nats: hy.mean,
        h_vy_nats: hvy.mean,
        h_v_given_y_bits: hc.mean,
        h_y_stderr: hy.std_error,
        h_vy_stderr: hvy.std_error,
        h_v_given_y_stderr: hc.std_error,
        chain_rule_residual_nats: chain.mean,
        chain_rule_stderr_nats: chain.std_error,
        prior_present: prior,
        trials: settings.trials,
        seed: config.seed,
    })
}

/// On-disk store of reference entropies, one JSON file per config hash.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, config_hash: &str) -> PathBuf {
        self.dir.join(format!("reference-{config_hash}.json"))
    }

    pub fn load(&self, config_hash: &str) -> Result<Option<ReferenceEntropies>> {
        let path = self.path_for(config_hash);
        match fs::read(&path) {
            Ok(bytes) => {
                let r: ReferenceEntropies = serde_json::from_slice(&bytes)?;
                Ok((r.config_hash == config_hash).then_some(r))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(Error::Io { path, source }),
        }
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place.
    pub fn store(&self, reference: &ReferenceEntropies) -> Result<()> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Error::Io { path, source }
        };
        fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        let path = self.path_for(&reference.config_hash);
        let tmp = self.dir.join(format!(
            ".reference-{}.{}.tmp",
            reference.config_hash,
            std::process::id()
        ));
        let bytes = serde_json::to_vec_pretty(reference)?;
        let mut file = fs::File::create(&tmp).map_err(io(&tmp))?;
        file.write_all(&bytes).map_err(io(&tmp))?;
        file.sync_all().map_err(io(&tmp))?;
        fs::rename(&tmp, &path).map_err(io(&path))
    }

    pub fn load_or_estimate(
        &self,
        config: &ScenarioConfig,
        settings: &McSettings,
    ) -> Result<ReferenceEntropies> {
        let hash = reference_config_hash(config, settings);
        if let Some(r) = self.load(&hash)? {
            return Ok(r);
        }
        let r = estimate_reference_entropies(config, settings)?;
        self.store(&r)?;
        Ok(r)
    }
}

/// `|−(1/m)·log₂ π(v^m) − H(V)| < ε`; sequences of probability zero are
/// never typical.
pub fn is_typical_state_seq(
    states: &[TargetState],
    prior_present: f64,
    epsilon: f64,
    h_v_bits: f64,
) -> bool {
    if states.is_empty() {
        return false;
    }
    let total: f64 = states
        .iter()
        .map(|s| ln_prior_of(s.is_present(), prior_present))
        .sum();
    if total == f64::NEG_INFINITY {
        return false;
    }
    (-total / (states.len() as f64 * LN_2) - h_v_bits).abs() < epsilon
}

fn within(sum_nats: f64, m: usize, reference_nats: f64, epsilon_bits: f64) -> bool {
    let sample_bits = -sum_nats / (m as f64 * LN_2);
    (sample_bits - reference_nats / LN_2).abs() < epsilon_bits
}

fn y_condition(log_upsilons: &[f64], cfg: &TypicalityConfig) -> bool {
    let prior = cfg.reference.prior_present;
    let sum: f64 = log_upsilons
        .iter()
        .map(|l| SymbolLogProbs::new(false, *l, prior).ln_y)
        .sum();
    within(sum, log_upsilons.len(), cfg.reference.h_y_nats, cfg.epsilon)
}

/// The three typicality conditions for a candidate `states` against the
/// snapshots summarized by `log_upsilons`.
pub fn is_jointly_typical_with(
    states: &[TargetState],
    log_upsilons: &[f64],
    cfg: &TypicalityConfig,
) -> bool {
    let m = states.len();
    if m == 0 || m != log_upsilons.len() {
        return false;
    }
    let r = &cfg.reference;
    let symbols: Vec<SymbolLogProbs> = states
        .iter()
        .zip(log_upsilons)
        .map(|(s, l)| SymbolLogProbs::new(s.is_present(), *l, r.prior_present))
        .collect();
    let ln_vy: f64 = symbols.iter().map(|s| s.ln_vy).sum();
    is_typical_state_seq(states, r.prior_present, cfg.epsilon, r.h_v_bits)
        && y_condition(log_upsilons, cfg)
        && ln_vy > f64::NEG_INFINITY
        && within(ln_vy, m, r.h_vy_nats, cfg.epsilon)
}

/// Whether the drawn pair (V^m, Y^m) is jointly typical.
pub fn is_jointly_typical(trial: &ExtendedTrial, cfg: &TypicalityConfig) -> bool {
    let m = trial.m();
    if m == 0 {
        return false;
    }
    let r = &cfg.reference;
    let sum = |f: fn(&SymbolLogProbs) -> f64| trial.per_symbol_log_probs.iter().map(f).sum::<f64>();
    let ln_prior = sum(|s| s.ln_prior);
    let ln_y = sum(|s| s.ln_y);
    let ln_vy = sum(|s| s.ln_vy);
    ln_prior > f64::NEG_INFINITY
        && within(ln_prior, m, r.h_v_bits * LN_2, cfg.epsilon)
        && within(ln_y, m, r.h_y_nats, cfg.epsilon)
        && within(ln_vy, m, r.h_vy_nats, cfg.epsilon)
}

/// Subset sizes and Σ ln Υ over the chosen indices for every mask of `ls`.
fn subset_table(ls: &[f64]) -> Vec<(u32, f64)> {
    let mut table = vec![(0u32, 0.0f64); 1 << ls.len()];
    for mask in 1..table.len() {
        let low = mask.trailing_zeros() as usize;
        let (k, s) = table[mask & (mask - 1)];
        table[mask] = (k + 1, s + ls[low]);
    }
    table
}

/// Number of state sequences v^m jointly typical with the trial's y^m.
pub fn count_conditional_typical(trial: &ExtendedTrial, cfg: &TypicalityConfig) -> Result<u64> {
    count_conditional_typical_for(&trial.log_upsilons, cfg)
}

/// As [`count_conditional_typical`], from the per-snapshot ln Υ(1, yᵢ).
pub fn count_conditional_typical_for(log_upsilons: &[f64], cfg: &TypicalityConfig) -> Result<u64> {
    let m = log_upsilons.len();
    if m > MAX_ENUMERATION_M {
        return Err(Error::Capacity(format!(
            "conditional typical-set enumeration is limited to m ≤ {MAX_ENUMERATION_M}, got {m}"
        )));
    }
    if m == 0 || !y_condition(log_upsilons, cfg) {
        return Ok(0);
    }
    let r = &cfg.reference;
    let (ln_p1, ln_p0) = (r.prior_present.ln(), (1.0 - r.prior_present).ln());
    // ln π(v^m) for k ones; written to avoid 0·(−∞).
    let ln_prior_k: Vec<f64> = (0..=m)
        .map(|k| {
            let ones = if k == 0 { 0.0 } else { k as f64 * ln_p1 };
            let zeros = if k == m { 0.0 } else { (m - k) as f64 * ln_p0 };
            ones + zeros
        })
        .collect();
    let v_ok: Vec<bool> = ln_prior_k
        .iter()
        .map(|lp| *lp > f64::NEG_INFINITY && within(*lp, m, r.h_v_bits * LN_2, cfg.epsilon))
        .collect();

    let split = m / 2;
    let low = subset_table(&log_upsilons[..split]);
    let high = subset_table(&log_upsilons[split..]);
    let counts = par_map_indexed(high.len(), |h| {
        let (kh, sh) = high[h];
        low.iter()
            .filter(|(kl, sl)| {
                let k = (kh + kl) as usize;
                v_ok[k] && within(ln_prior_k[k] + sh + sl, m, r.h_vy_nats, cfg.epsilon)
            })
            .count() as u64
    });
    Ok(counts.into_iter().sum())
}

/// ‖A_ε^(m)(V)‖ by grouping sequences with the same number of ones.
pub fn count_typical_state_seqs(
    m: usize,
    prior_present: f64,
    epsilon: f64,
    h_v_bits: f64,
) -> Result<u128> {
    if m == 0 || m > 127 {
        return Err(Error::Capacity(format!(
            "typical-set size supported for 1 ≤ m ≤ 127, got {m}"
        )));
    }
    let mut binom: u128 = 1;
    let mut total: u128 = 0;
    for k in 0..=m {
        let mut seq = vec![TargetState::Absent; m];
        seq[..k].fill(TargetState::Present);
        if is_typical_state_seq(&seq, prior_present, epsilon, h_v_bits) {
            total += binom;
        }
        binom = binom * (m - k) as u128 / (k + 1) as u128;
    }
    Ok(total)
}

/// Failed-decision rate and empirical entropy/DI of the extended SAP decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedOutcome {
    pub m: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub failures: usize,
    pub p_f: f64,
    pub p_f_stderr: f64,
    /// Mean of `(1/m)·log₂ ‖A_ε^(m)(V|yᵐ)‖` over successful trials.
    pub empirical_entropy_bits: Option<f64>,
    pub empirical_entropy_stderr: Option<f64>,
    /// `H(V)` minus the empirical entropy.
    pub empirical_di_bits: Option<f64>,
}

/// Per trial: draw (V^m, Y^m), decode with the extended SAP rule, declare a
/// failure if either the true or the decoded pair is not jointly typical,
/// and on success record the per-symbol log-cardinality of the conditional
/// typical set.
pub fn run_extended_detection(
    config: &ScenarioConfig,
    cfg: &TypicalityConfig,
    settings: &McSettings,
) -> Result<ExtendedOutcome> {
    cfg.validate()?;
    if cfg.m > MAX_ENUMERATION_M {
        return Err(Error::Capacity(format!(
            "extended detection is limited to m ≤ {MAX_ENUMERATION_M}, got {}",
            cfg.m
        )));
    }
    if settings.trials == 0 {
        return Err(Error::validation("trials", "must be ≥ 1"));
    }
    if (config.prior_present - cfg.reference.prior_present).abs() > 0.0 {
        return Err(Error::validation(
            "prior_present",
            "scenario and reference entropies use different priors",
        ));
    }
    let evaluator = ChannelEvaluator::new(config, settings.mode, settings.oversample)?;
    let key = StreamKey::new(config.seed, settings.grid_index);
    let m = cfg.m;
    let per_trial: Vec<Result<Option<f64>>> = par_map_indexed(settings.trials, |t| {
        let mut rng = key.substream(t as u64, Lane::Scenario);
        let trial = ExtendedTrial::draw(&evaluator, m, &mut rng);
        let posteriors = trial.posteriors(config.prior_present);
        let decoded: Vec<TargetState> =
            typical_set_decide(&posteriors, &mut key.substream(t as u64, Lane::Decision))
                .into_iter()
                .map(|d| d.declared_state)
                .collect();
        if !is_jointly_typical(&trial, cfg)
            || !is_jointly_typical_with(&decoded, &trial.log_upsilons, cfg)
        {
            return Ok(None);
        }
        let count = count_conditional_typical(&trial, cfg)?;
        Ok(Some((count as f64).log2() / m as f64))
    });
    let mut entropies = Vec::new();
    let mut failures = 0usize;
    for r in per_trial {
        match r? {
            Some(h) => entropies.push(h),
            None => failures += 1,
        }
    }
    let n = settings.trials as f64;
    let p_f = failures as f64 / n;
    let (entropy, entropy_se) = if entropies.is_empty() {
        (None, None)
    } else {
        let e = MeanEstimate::from_samples(&entropies);
        (Some(e.mean), Some(e.std_error))
    };
    Ok(ExtendedOutcome {
        m,
        epsilon: cfg.epsilon,
        trials: settings.trials,
        failures,
        p_f,
        p_f_stderr: (p_f * (1.0 - p_f) / n).sqrt(),
        empirical_entropy_bits: entropy,
        empirical_entropy_stderr: entropy_se,
        empirical_di_bits: entropy.map(|h| cfg.reference.h_v_bits - h),
    })
}

/// Both sides of the extended Fano inequality
/// `H(V^m, E | Y^m) ≤ 1 + (1 − P_f)·m·H^(m) + P_f·m·(H(V) + ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoCheck {
    /// `m·H(V|Y) + H_b(P_f)`.
    pub lhs: f64,
    pub rhs: f64,
    /// Combined standard error of `rhs − lhs`.
    pub std_error: f64,
    pub holds: bool,
    pub outcome: ExtendedOutcome,
}

/// Evaluates the extended Fano inequality on one extension run and accepts
/// it within three combined standard errors.
pub fn extended_fano_check(
    config: &ScenarioConfig,
    cfg: &TypicalityConfig,
    settings: &McSettings,
) -> Result<FanoCheck> {
    let outcome = run_extended_detection(config, cfg, settings)?;
    Ok(fano_from_outcome(cfg, outcome))
}

pub fn fano_from_outcome(cfg: &TypicalityConfig, outcome: ExtendedOutcome) -> FanoCheck {
    let m = cfg.m as f64;
    let r = &cfg.reference;
    let p_f = outcome.p_f;
    let h_m = outcome.empirical_entropy_bits.unwrap_or(0.0);
    let h_m_se = outcome.empirical_entropy_stderr.unwrap_or(0.0);
    let lhs = m * r.h_v_given_y_bits + binary_entropy_bits(p_f);
    let rhs = 1.0 + (1.0 - p_f) * m * h_m + p_f * m * (r.h_v_bits + cfg.epsilon);
    let pf_slope = if p_f > 0.0 && p_f < 1.0 {
        m * (r.h_v_bits + cfg.epsilon) - m * h_m - ((1.0 - p_f) / p_f).log2()
    } else {
        0.0
    };
    let var = (m * r.h_v_given_y_stderr).powi(2)
        + ((1.0 - p_f) * m * h_m_se).powi(2)
        + (pf_slope * outcome.p_f_stderr).powi(2);
    let std_error = var.sqrt();
    FanoCheck {
        lhs,
        rhs,
        std_error,
        holds: lhs <= rhs + 3.0 * std_error,
        outcome,
    }
}
