//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use detinfo::channel::ChannelMode;

use crate::error::{HarnessError, Result};
use crate::run::{compute, run_experiment, RunOptions};
use crate::spec::{ExperimentKind, ExperimentSpec, OutputFormat};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "RADAR_DI_THREADS";

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\ntarget: ",
    env!("DETINFO_BUILD_TARGET"),
    "\nprofile: ",
    env!("DETINFO_BUILD_PROFILE"),
    "\nrustc: ",
    env!("DETINFO_BUILD_RUSTC"),
);

/// Monte Carlo experiments on detection information for a single point
/// target in complex Gaussian noise.
#[derive(Debug, Parser)]
#[command(name = "detinfo", version, long_version = LONG_VERSION, propagate_version = true)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Monte Carlo trials per grid point (at least 100).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Base seed; every trial draws from a substream keyed by (seed, grid point, trial).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, replaced atomically. Standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format: csv or json (JSON lines).
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// Delay-grid points per sample for the full-interval statistic.
    #[arg(long, global = true)]
    oversample: Option<usize>,
    /// Worker threads. Falls back to RADAR_DI_THREADS, then to the core count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Omit the timestamp comment so reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Directory of cached reference entropies.
    #[arg(long, global = true, default_value = "cache")]
    cache_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// P_FA and P_D against SNR, tb=32, priors 0.2/0.5/0.8. The SNR axis
    /// defaults to -10..15 dB in 1 dB steps.
    Fig3(SweepArgs),
    /// P_FA against the prior for tb 64/512/2048 at 0 and 5 dB.
    Fig4(SweepArgs),
    /// Theoretical DI against the Kondo DI of MAP, SAP and NP over SNR
    /// (matched position, prior 0.5).
    Fig5(SweepArgs),
    /// DI against the prior at 5 dB, raw and normalized by H(V) and by its maximum.
    Fig6(SweepArgs),
    /// |P_FA - prior| and the spread of ln Υ(1,y) under noise over tb and SNR.
    Falsealarm(SweepArgs),
    /// Extended SAP decoding over m-snapshot sequences: failure rate,
    /// empirical DI and the extended Fano bound.
    Dettheorem(SweepArgs),
    /// Neyman-Pearson operating points, empirical and closed form.
    Roc(SweepArgs),
    /// Reference entropies H(V), h(Y), h(V,Y), H(V|Y) and the chain-rule residual.
    Entropies(SweepArgs),
    /// Arbitrary grid, usually from a JSON spec file (--spec).
    Custom(SweepArgs),
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// JSON experiment spec to start from instead of the preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Time-bandwidth products, comma separated.
    #[arg(long, value_delimiter = ',')]
    tb: Option<Vec<usize>>,
    /// SNR values in dB, comma separated; "-inf" means zero SNR.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    /// Prior probabilities of target presence, comma separated.
    #[arg(long = "prior", value_delimiter = ',')]
    prior_present: Option<Vec<f64>>,
    /// Extension lengths m (dettheorem), comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Typicality tolerances in bits (dettheorem), comma separated.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// Target false-alarm levels (roc), comma separated.
    #[arg(long, value_delimiter = ',')]
    pfa: Option<Vec<f64>>,
    /// Channel: full-interval or matched-position.
    #[arg(long)]
    mode: Option<ChannelMode>,
    /// Trials behind the cached reference entropies (at least 10000).
    #[arg(long)]
    reference_trials: Option<usize>,
    /// Target delay x0 in samples.
    #[arg(long, allow_hyphen_values = true)]
    position: Option<f64>,
    /// Print the resolved experiment spec as JSON and exit.
    #[arg(long)]
    print_spec: bool,
}

impl Command {
    fn split(&self) -> (ExperimentKind, &SweepArgs) {
        match self {
            Command::Fig3(a) => (ExperimentKind::Fig3, a),
            Command::Fig4(a) => (ExperimentKind::Fig4, a),
            Command::Fig5(a) => (ExperimentKind::Fig5, a),
            Command::Fig6(a) => (ExperimentKind::Fig6, a),
            Command::Falsealarm(a) => (ExperimentKind::FalseAlarmTheorem, a),
            Command::Dettheorem(a) => (ExperimentKind::DetectionTheorem, a),
            Command::Roc(a) => (ExperimentKind::Roc, a),
            Command::Entropies(a) => (ExperimentKind::Entropies, a),
            Command::Custom(a) => (ExperimentKind::Custom, a),
        }
    }
}

fn resolve_spec(
    kind: ExperimentKind,
    sweep: &SweepArgs,
    global: &GlobalArgs,
) -> Result<ExperimentSpec> {
    let mut spec = match &sweep.spec {
        Some(path) => {
            let spec = ExperimentSpec::from_path(path)?;
            if kind != ExperimentKind::Custom && spec.kind != kind {
                return Err(HarnessError::validation(
                    "kind",
                    format!("spec file is a {} experiment, not {kind}", spec.kind),
                ));
            }
            spec
        }
        None => ExperimentSpec::preset(kind),
    };
    let s = &mut spec.sweep;
    if let Some(v) = &sweep.tb {
        s.tb = v.clone();
    }
    if let Some(v) = &sweep.snr_db {
        s.snr_db = v.clone();
    }
    if let Some(v) = &sweep.prior_present {
        s.prior_present = v.clone();
    }
    if let Some(v) = &sweep.m {
        s.m = v.clone();
    }
    if let Some(v) = &sweep.epsilon {
        s.epsilon = v.clone();
    }
    if let Some(v) = &sweep.pfa {
        s.pfa = v.clone();
    }
    if let Some(v) = sweep.mode {
        spec.mode = Some(v);
    }
    if let Some(v) = sweep.reference_trials {
        spec.reference_trials = v;
    }
    if let Some(v) = sweep.position {
        spec.true_position = v;
    }
    if let Some(v) = global.trials {
        spec.trials = v;
    }
    if let Some(v) = global.seed {
        spec.seed = v;
    }
    if let Some(v) = &global.out {
        spec.out_path = Some(v.clone());
    }
    if let Some(v) = global.format {
        spec.format = v;
    }
    if let Some(v) = global.oversample {
        spec.oversample = v;
    }
    spec.validate()?;
    Ok(spec)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map(Some).map_err(|_| {
            HarnessError::validation("threads", format!("{THREADS_ENV}={v:?} is not a count"))
        }),
        _ => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (kind, sweep) = cli.command.split();
    let spec = resolve_spec(kind, sweep, &cli.global)?;
    if sweep.print_spec {
        let text = serde_json::to_string_pretty(&spec)?;
        println!("{text}");
        return Ok(());
    }
    let opts = RunOptions {
        cache_dir: cli.global.cache_dir.clone(),
        deterministic: cli.global.deterministic,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.global.threads)? {
        if n == 0 {
            return Err(HarnessError::validation("threads", "must be ≥ 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| {
        if spec.out_path.is_some() {
            run_experiment(&spec, &opts).map(drop)
        } else {
            let table = compute(&spec, &opts)?;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write_to(&mut lock, spec.format, opts.deterministic)?;
            lock.flush().map_err(HarnessError::io("<stdout>"))
        }
    })
}

/// Parses `argv` (program name first) and runs the experiment. Returns the
/// process exit code: 0 on success, 1 for usage or validation errors, 2
/// for runtime failures.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_preset() {
        let cli = Cli::try_parse_from([
            "detinfo", "fig4", "--snr-db", "-5,0", "--tb", "64,512", "--trials", "300", "--seed",
            "7",
        ])
        .unwrap();
        let (kind, sweep) = cli.command.split();
        let spec = resolve_spec(kind, sweep, &cli.global).unwrap();
        assert_eq!(spec.sweep.snr_db, vec![-5.0, 0.0]);
        assert_eq!(spec.sweep.tb, vec![64, 512]);
        assert_eq!(spec.trials, 300);
        assert_eq!(spec.seed, 7);
    }

    #[test]
    fn zero_snr_and_global_flag_before_subcommand() {
        let cli = Cli::try_parse_from(["detinfo", "--trials", "150", "fig3", "--snr-db", "-inf"])
            .unwrap();
        let (kind, sweep) = cli.command.split();
        let spec = resolve_spec(kind, sweep, &cli.global).unwrap();
        assert_eq!(spec.sweep.snr_db, vec![f64::NEG_INFINITY]);
        assert_eq!(spec.trials, 150);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(cli_main(["detinfo", "--help"]), 0);
        assert_eq!(cli_main(["detinfo", "--version"]), 0);
        assert_eq!(cli_main(["detinfo", "bogus"]), 1);
        assert_eq!(cli_main(["detinfo", "fig3", "--bogus"]), 1);
        assert_eq!(cli_main(["detinfo", "fig3", "--trials", "5"]), 1);
        assert_eq!(cli_main(["detinfo", "custom"]), 1);
    }
}
