//! Executes an experiment spec over its parameter grid.

use std::path::PathBuf;

use detinfo::channel::ChannelMode;
use detinfo::detectors::{Detector, MapDetector, NpConfig, SapDetector};
use detinfo::metrics::{
    detector_confusion, kondo_di, np_empirical_sweep, np_theoretical_curve, McSettings,
    StatisticSamples,
};
use detinfo::sigmodel::{ScenarioConfig, TargetState};
use detinfo::specialfns::binary_entropy;
use detinfo::stats::MeanEstimate;
use detinfo::typicality::{
    fano_from_outcome, run_extended_detection, ReferenceCache, TypicalityConfig,
};

use crate::error::{HarnessError, Result};
use crate::output::{ResultRow, ResultTable};
use crate::spec::{ExperimentKind, ExperimentSpec};

/// Grid indices at or above this offset key the extension runs, keeping
/// them disjoint from the reference-entropy draws of the same point.
const EXTENSION_GRID_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub cache_dir: PathBuf,
    /// Omit the timestamp comment from CSV output.
    pub deterministic: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            cache_dir: PathBuf::from("cache"),
            deterministic: false,
        }
    }
}

/// One (tb, SNR) cell of the grid; all priors of a group share draws.
struct Group {
    index: u64,
    tb: usize,
    snr_db: f64,
}

fn groups(spec: &ExperimentSpec) -> Vec<Group> {
    let s = &spec.sweep;
    let mut out = Vec::with_capacity(s.tb.len() * s.snr_db.len());
    for &tb in &s.tb {
        for &snr_db in &s.snr_db {
            out.push(Group {
                index: out.len() as u64,
                tb,
                snr_db,
            });
        }
    }
    out
}

struct Ctx<'a> {
    spec: &'a ExperimentSpec,
    opts: &'a RunOptions,
    mode: ChannelMode,
}

impl Ctx<'_> {
    fn config(&self, g: &Group, prior_present: f64) -> ScenarioConfig {
        ScenarioConfig {
            tb: g.tb,
            snr_db: g.snr_db,
            prior_present,
            true_state: TargetState::Present,
            true_position: self.spec.true_position,
            seed: self.spec.seed,
            ..ScenarioConfig::default()
        }
    }

    fn settings(&self, grid_index: u64) -> McSettings {
        McSettings::new(self.spec.trials, self.mode)
            .with_oversample(self.spec.oversample)
            .with_grid_index(grid_index)
    }

    fn tail(&self, row: ResultRow, trials: usize) -> ResultRow {
        row.with("mode", self.mode.to_string())
            .with("trials", trials)
            .with("seed", self.spec.seed)
    }
}

/// Runs `spec` and, when `spec.out_path` is set, writes the table there
/// atomically.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<ResultTable> {
    let table = compute(spec, opts)?;
    if let Some(path) = &spec.out_path {
        table.write_atomic(path, spec.format, opts.deterministic)?;
    }
    Ok(table)
}

/// Runs `spec` without writing anything.
pub fn compute(spec: &ExperimentSpec, opts: &RunOptions) -> Result<ResultTable> {
    spec.validate()?;
    let mode = spec.channel_mode();
    if spec.kind == ExperimentKind::Roc && mode != ChannelMode::MatchedPosition {
        return Err(HarnessError::validation(
            "mode",
            "the NP detector is only defined at the matched position",
        ));
    }
    let ctx = Ctx { spec, opts, mode };
    let mut table = ResultTable::new(spec.kind);
    for g in groups(spec) {
        match spec.kind {
            ExperimentKind::Fig3 => fig3(&ctx, &g, &mut table)?,
            ExperimentKind::Fig4 | ExperimentKind::FalseAlarmTheorem => {
                false_alarm(&ctx, &g, &mut table)?
            }
            ExperimentKind::Fig5 => fig5(&ctx, &g, &mut table)?,
            ExperimentKind::Fig6 => fig6(&ctx, &g, &mut table)?,
            ExperimentKind::DetectionTheorem => detection_theorem(&ctx, &g, &mut table)?,
            ExperimentKind::Roc => roc(&ctx, &g, &mut table)?,
            ExperimentKind::Entropies => entropies(&ctx, &g, &mut table)?,
            ExperimentKind::Custom => custom(&ctx, &g, &mut table)?,
        }
    }
    Ok(table)
}

fn fig3(ctx: &Ctx<'_>, g: &Group, table: &mut ResultTable) -> Result<()> {
    let samples = StatisticSamples::draw(&ctx.config(g, 0.5), &ctx.settings(g.index))?;
    for &prior in &ctx.spec.sweep.prior_present {
        let r = samples.pfa_pd(prior);
        let row = ResultRow::new()
            .with("tb", g.tb)
            .with("snr_db", g.snr_db)
            .with("prior_present", prior)
            .with("p_fa", r.p_fa)
            .with("p_fa_stderr", r.p_fa_stderr)
            .with("p_d", r.p_d)
            .with("p_d_stderr", r.p_d_stderr);
        table.push(ctx.tail(row, ctx.spec.trials));
    }
    Ok(())
}

fn false_alarm(ctx: &Ctx<'_>, g: &Group, table: &mut ResultTable) -> Result<()> {
    let samples = StatisticSamples::draw_absent(&ctx.config(g, 0.5), &ctx.settings(g.index))?;
    let ln_u = MeanEstimate::from_samples(samples.absent());
    let n = samples.absent().len();
    let sd = ln_u.std_error * (n as f64).sqrt();
    let sd_stderr = if n > 1 {
        sd / (2.0 * (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    for &prior in &ctx.spec.sweep.prior_present {
        let fa = samples.pfa(prior);
        let deviation = (fa.mean - prior).abs();
        let row = match ctx.spec.kind {
            ExperimentKind::Fig4 => ResultRow::new()
                .with("tb", g.tb)
                .with("prior_present", prior)
                .with("p_fa", fa.mean)
                .with("p_fa_stderr", fa.std_error)
                .with("pfa_deviation", deviation)
                .with("snr_db", g.snr_db),
            _ => ResultRow::new()
                .with("tb", g.tb)
                .with("snr_db", g.snr_db)
                .with("prior_present", prior)
                .with("p_fa", fa.mean)
                .with("p_fa_stderr", fa.std_error)
                .with("pfa_deviation", deviation)
                .with("log_upsilon_mean", ln_u.mean)
                .with("log_upsilon_mean_stderr", ln_u.std_error)
                .with("log_upsilon_std", sd)
                .with("log_upsilon_std_stderr", sd_stderr),
        };
        table.push(ctx.tail(row, ctx.spec.trials));
    }
    Ok(())
}

fn fig5(ctx: &Ctx<'_>, g: &Group, table: &mut ResultTable) -> Result<()> {
    let settings = ctx.settings(g.index);
    let samples = StatisticSamples::draw(&ctx.config(g, 0.5), &settings)?;
    let pfa_grid = detinfo::metrics::default_pfa_grid();
    for &prior in &ctx.spec.sweep.prior_present {
        let config = ctx.config(g, prior);
        let theory = samples.di(prior);
        let detectors: [&dyn Detector; 2] = [&MapDetector, &SapDetector];
        let counts = detector_confusion(&config, &settings, &detectors)?;
        let map = kondo_di(&counts[0], prior)?;
        let sap = kondo_di(&counts[1], prior)?;

        let (np_di, np_se, np_pfa) = if ctx.mode == ChannelMode::MatchedPosition {
            let mut best = (f64::NEG_INFINITY, 0.0, f64::NAN);
            for (point, c) in np_empirical_sweep(&config, &settings, prior, &pfa_grid)? {
                let k = kondo_di(&c, prior)?;
                if k.value_bits > best.0 {
                    best = (k.value_bits, k.std_error_bits, point.p_fa);
                }
            }
            (Some(best.0), Some(best.1), Some(best.2))
        } else {
            (None, None, None)
        };
        let np_closed = if ctx.mode == ChannelMode::MatchedPosition {
            Some(
                np_theoretical_curve(&config, prior, &pfa_grid)?
                    .into_iter()
                    .map(|p| p.di_bits)
                    .fold(f64::NEG_INFINITY, f64::max),
            )
        } else {
            None
        };
        let row = ResultRow::new()
            .with("snr_db", g.snr_db)
            .with("tb", g.tb)
            .with("prior_present", prior)
            .with("di_theoretical", theory.value_bits)
            .with("di_theoretical_stderr", theory.std_error_bits)
            .with("di_map", map.value_bits)
            .with("di_map_stderr", map.std_error_bits)
            .with("di_sap", sap.value_bits)
            .with("di_sap_stderr", sap.std_error_bits)
            .with("di_np", np_di)
            .with("di_np_stderr", np_se)
            .with("np_best_pfa", np_pfa)
            .with("di_np_closed_form", np_closed);
        table.push(ctx.tail(row, ctx.spec.trials));
    }
    Ok(())
}

fn fig6(ctx: &Ctx<'_>, g: &Group, table: &mut ResultTable) -> Result<()> {
    let samples = StatisticSamples::draw(&ctx.config(g, 0.5), &ctx.settings(g.index))?;
    let priors = &ctx.spec.sweep.prior_present;
    let dis: Vec<_> = priors.iter().map(|&p| samples.di(p)).collect();
    let peak = dis.iter().map(|d| d.value_bits).fold(0.0f64, f64::max);
    for (&prior, di) in priors.iter().zip(&dis) {
        let h_v = binary_entropy(prior)?;
        let by = |scale: f64| {
            if scale > 0.0 {
                (di.value_bits / scale, di.std_error_bits / scale)
            } else {
                (0.0, 0.0)
            }
        };
        let (norm_hv, norm_hv_se) = by(h_v);
        let (norm_max, norm_max_se) = by(peak);
        let row = ResultRow::new()
            .with("snr_db", g.snr_db)
            .with("tb", g.tb)
            .with("prior_present", prior)
            .with("h_v", h_v)
            .with("di_theoretical", di.value_bits)
            .with("di_theoretical_stderr", di.std_error_bits)
            .with("di_norm_hv", norm_hv)
            .with("di_norm_hv_stderr", norm_hv_se)
            .with("di_norm_max", norm_max)
            .with("di_norm_max_stderr", norm_max_se);
        table.push(ctx.tail(row, ctx.spec.trials));
    }
    Ok(())
}

fn reference_settings(ctx: &Ctx<'_>, grid_index: u64) -> McSettings {
    McSettings::new(ctx.spec.reference_trials, ctx.mode)
        .with_oversample(ctx.spec.oversample)
        .with_grid_index(grid_index)
}

/// Priors of a group get consecutive reference grid indices.
fn prior_index(g: &Group, spec: &ExperimentSpec, i: usize) -> u64 {
    g.index * spec.sweep.prior_present.len() as u64 + i as u64
}

fn detection_theorem(ctx: &Ctx<'_>, g: &Group, table: &mut ResultTable) -> Result<()> {
    let cache = ReferenceCache::new(&ctx.opts.cache_dir);
    let s = &ctx.spec.sweep;
    for (pi, &prior) in s.prior_present.iter().enumerate() {
        let config = ctx.config(g, prior);
        let point = prior_index(g, ctx.spec, pi);
        let reference = cache.load_or_estimate(&config, &reference_settings(ctx, point))?;
        for (mi, &m) in s.m.iter().enumerate() {
            for (ei, &epsilon) in s.epsilon.iter().enumerate() {
                let tcfg = TypicalityConfig::new(m, epsilon, reference.clone())?;
                let ext_index = EXTENSION_GRID_OFFSET
                    + (point * s.m.len() as u64 + mi as u64) * s.epsilon.len() as u64
                    + ei as u64;
                let outcome = run_extended_detection(&config, &tcfg, &ctx.settings(ext_index))?;
                let fano = fano_from_outcome(&tcfg, outcome);
                let row = ResultRow::new()
                    .with("tb", g.tb)
                    .with("snr_db", g.snr_db)
                    .with("prior_present", prior)
                    .with("m", m)
                    .with("epsilon", epsilon)
                    .with("p_f", outcome.p_f)
                    .with("p_f_stderr", outcome.p_f_stderr)
                    .with("failures", outcome.failures)
                    .with("empirical_entropy", outcome.empirical_entropy_bits)
                    .with("empirical_entropy_stderr", outcome.empirical_entropy_stderr)
                    .with("empirical_di", outcome.empirical_di_bits)
                    .with("empirical_di_stderr", outcome.empirical_entropy_stderr)
                    .with("h_v", reference.h_v_bits)
                    .with("di_reference", reference.di_bits())
                    .with("di_reference_stderr", reference.h_v_given_y_stderr)
                    .with("fano_lhs", fano.lhs)
                    .with("fano_rhs", fano.rhs)
                    .with("fano_margin", fano.rhs - fano.lhs)
                    .with("fano_margin_stderr", fano.std_error)
                    .with("fano_holds", fano.holds)
                    .with("reference_trials", reference.trials);
                table.push(ctx.tail(row, ctx.spec.trials));
            }
        }
    }
    Ok(())
}

fn roc(ctx: &Ctx<'_>, g: &Group, table: &mut ResultTable) -> Result<()> {
    let settings = ctx.settings(g.index);
    let pfa_grid = &ctx.spec.sweep.pfa;
    for &prior in &ctx.spec.sweep.prior_present {
        let config = ctx.config(g, prior);
        let closed = np_theoretical_curve(&config, prior, pfa_grid)?;
        let empirical = np_empirical_sweep(&config, &settings, prior, pfa_grid)?;
        for ((&target, c), (point, counts)) in pfa_grid.iter().zip(&closed).zip(&empirical) {
            NpConfig::new(target)?;
            let k = kondo_di(counts, prior)?;
            let se = |p: f64, n: u64| (p * (1.0 - p) / n as f64).sqrt();
            let row = ResultRow::new()
                .with("tb", g.tb)
                .with("snr_db", g.snr_db)
                .with("prior_present", prior)
                .with("target_pfa", target)
                .with("p_fa", point.p_fa)
                .with("p_fa_stderr", se(point.p_fa, counts.absent_trials()))
                .with("p_d", point.p_d)
                .with("p_d_stderr", se(point.p_d, counts.present_trials()))
                .with("p_d_closed_form", c.p_d)
                .with("di_np", k.value_bits)
                .with("di_np_stderr", k.std_error_bits)
                .with("di_np_closed_form", c.di_bits);
            table.push(ctx.tail(row, ctx.spec.trials));
        }
    }
    Ok(())
}

fn entropies(ctx: &Ctx<'_>, g: &Group, table: &mut ResultTable) -> Result<()> {
    let cache = ReferenceCache::new(&ctx.opts.cache_dir);
    for (pi, &prior) in ctx.spec.sweep.prior_present.iter().enumerate() {
        let config = ctx.config(g, prior);
        let point = prior_index(g, ctx.spec, pi);
        let r = cache.load_or_estimate(&config, &reference_settings(ctx, point))?;
        let row = ResultRow::new()
            .with("tb", g.tb)
            .with("snr_db", g.snr_db)
            .with("prior_present", prior)
            .with("h_v", r.h_v_bits)
            .with("h_y", r.h_y_nats)
            .with("h_y_stderr", r.h_y_stderr)
            .with("h_vy", r.h_vy_nats)
            .with("h_vy_stderr", r.h_vy_stderr)
            .with("h_v_given_y", r.h_v_given_y_bits)
            .with("h_v_given_y_stderr", r.h_v_given_y_stderr)
            .with("di_reference", r.di_bits())
            .with("di_reference_stderr", r.h_v_given_y_stderr)
            .with("chain_rule_residual", r.chain_rule_residual_nats)
            .with("chain_rule_residual_stderr", r.chain_rule_stderr_nats);
        table.push(ctx.tail(row, r.trials));
    }
    Ok(())
}

fn custom(ctx: &Ctx<'_>, g: &Group, table: &mut ResultTable) -> Result<()> {
    let settings = ctx.settings(g.index);
    let samples = StatisticSamples::draw(&ctx.config(g, 0.5), &settings)?;
    for &prior in &ctx.spec.sweep.prior_present {
        let config = ctx.config(g, prior);
        let rates = samples.pfa_pd(prior);
        let theory = samples.di(prior);
        let detectors: [&dyn Detector; 2] = [&MapDetector, &SapDetector];
        let counts = detector_confusion(&config, &settings, &detectors)?;
        let map = kondo_di(&counts[0], prior)?;
        let sap = kondo_di(&counts[1], prior)?;
        let row = ResultRow::new()
            .with("tb", g.tb)
            .with("snr_db", g.snr_db)
            .with("prior_present", prior)
            .with("p_fa", rates.p_fa)
            .with("p_fa_stderr", rates.p_fa_stderr)
            .with("p_d", rates.p_d)
            .with("p_d_stderr", rates.p_d_stderr)
            .with("di_theoretical", theory.value_bits)
            .with("di_theoretical_stderr", theory.std_error_bits)
            .with("di_map", map.value_bits)
            .with("di_map_stderr", map.std_error_bits)
            .with("di_sap", sap.value_bits)
            .with("di_sap_stderr", sap.std_error_bits);
        table.push(ctx.tail(row, ctx.spec.trials));
    }
    Ok(())
}
