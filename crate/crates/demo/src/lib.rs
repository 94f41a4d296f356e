//! Browser bindings: P_FA/P_D and DI curves over the prior, and the
//! Neyman-Pearson ROC. Every curve is returned as one flat `Float64Array`.

use detinfo::channel::ChannelMode;
use detinfo::metrics::{default_pfa_grid, np_theoretical_curve, McSettings, StatisticSamples};
use detinfo::sigmodel::ScenarioConfig;
use wasm_bindgen::prelude::*;

/// Upper limit on trials per call, to keep the page responsive.
pub const MAX_TRIALS: usize = 50_000;

const PRIOR_STEPS: usize = 20;

/// π(1) = 0, 0.05, …, 1.
pub fn priors() -> Vec<f64> {
    (0..=PRIOR_STEPS)
        .map(|i| i as f64 / PRIOR_STEPS as f64)
        .collect()
}

fn check_trials(trials: usize) -> Result<(), String> {
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must lie in 1..={MAX_TRIALS}, got {trials}"));
    }
    Ok(())
}

fn samples(
    tb: usize,
    snr_db: f64,
    trials: usize,
    seed: u32,
    mode: ChannelMode,
) -> Result<StatisticSamples, String> {
    check_trials(trials)?;
    let config = ScenarioConfig {
        tb,
        snr_db,
        seed: seed as u64,
        ..ScenarioConfig::default()
    };
    StatisticSamples::draw(&config, &McSettings::new(trials, mode)).map_err(|e| e.to_string())
}

/// P_FA at every prior followed by P_D at every prior (full interval).
pub fn pfa_pd_over_prior(
    tb: usize,
    snr_db: f64,
    trials: usize,
    seed: u32,
) -> Result<Vec<f64>, String> {
    let s = samples(tb, snr_db, trials, seed, ChannelMode::FullInterval)?;
    let rates: Vec<_> = priors().into_iter().map(|p| s.pfa_pd(p)).collect();
    Ok(rates
        .iter()
        .map(|r| r.p_fa)
        .chain(rates.iter().map(|r| r.p_d))
        .collect())
}

/// DI in bits at every prior followed by its standard errors (matched
/// position, tb = 32).
pub fn di_over_prior(snr_db: f64, trials: usize, seed: u32) -> Result<Vec<f64>, String> {
    let s = samples(32, snr_db, trials, seed, ChannelMode::MatchedPosition)?;
    let di: Vec<_> = priors().into_iter().map(|p| s.di(p)).collect();
    Ok(di
        .iter()
        .map(|d| d.value_bits)
        .chain(di.iter().map(|d| d.std_error_bits))
        .collect())
}

/// False-alarm levels followed by the closed-form P_D at each.
pub fn roc(snr_db: f64) -> Result<Vec<f64>, String> {
    let config = ScenarioConfig {
        snr_db,
        ..ScenarioConfig::default()
    };
    let grid = default_pfa_grid();
    let points = np_theoretical_curve(&config, 0.5, &grid).map_err(|e| e.to_string())?;
    Ok(grid
        .into_iter()
        .chain(points.iter().map(|p| p.p_d))
        .collect())
}

#[wasm_bindgen]
pub fn prior_grid() -> Vec<f64> {
    priors()
}

#[wasm_bindgen]
pub fn pfa_curve(tb: usize, snr_db: f64, trials: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    pfa_pd_over_prior(tb, snr_db, trials, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn di_curve(snr_db: f64, trials: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    di_over_prior(snr_db, trials, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn np_roc(snr_db: f64) -> Result<Vec<f64>, JsError> {
    roc(snr_db).map_err(|e| JsError::new(&e))
}
