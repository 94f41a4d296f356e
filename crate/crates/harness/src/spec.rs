//! Versioned JSON experiment specifications and the built-in presets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use detinfo::channel::{ChannelMode, DEFAULT_OVERSAMPLE};
use detinfo::sigmodel::serde_db;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const MIN_TRIALS: usize = 100;
pub const DEFAULT_TRIALS: usize = 2000;
pub const DEFAULT_REFERENCE_TRIALS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    FalseAlarmTheorem,
    DetectionTheorem,
    Roc,
    Entropies,
    Custom,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Fig3,
        ExperimentKind::Fig4,
        ExperimentKind::Fig5,
        ExperimentKind::Fig6,
        ExperimentKind::FalseAlarmTheorem,
        ExperimentKind::DetectionTheorem,
        ExperimentKind::Roc,
        ExperimentKind::Entropies,
        ExperimentKind::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Fig3 => "fig3",
            ExperimentKind::Fig4 => "fig4",
            ExperimentKind::Fig5 => "fig5",
            ExperimentKind::Fig6 => "fig6",
            ExperimentKind::FalseAlarmTheorem => "false-alarm-theorem",
            ExperimentKind::DetectionTheorem => "detection-theorem",
            ExperimentKind::Roc => "roc",
            ExperimentKind::Entropies => "entropies",
            ExperimentKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown experiment kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" | "jsonl" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

/// Parameter grid. Only the axes a kind uses need to be filled.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub tb: Vec<usize>,
    #[serde(default, with = "serde_db::vec")]
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub prior_present: Vec<f64>,
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
    /// Target false-alarm levels for the NP sweeps.
    #[serde(default)]
    pub pfa: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub sweep: Sweep,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default)]
    pub mode: Option<ChannelMode>,
    /// Trials behind the cached reference entropies (typicality kinds).
    #[serde(default = "default_reference_trials")]
    pub reference_trials: usize,
    /// Delay x₀ of the target.
    #[serde(default)]
    pub true_position: f64,
}

fn default_oversample() -> usize {
    DEFAULT_OVERSAMPLE
}

fn default_reference_trials() -> usize {
    DEFAULT_REFERENCE_TRIALS
}

/// `start, start + step, …` up to `stop` inclusive, rounded to kill drift.
pub fn linspace_step(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n)
        .map(|i| ((start + step * i as f64) * 1e9).round() / 1e9)
        .collect()
}

impl ExperimentSpec {
    fn base(kind: ExperimentKind, sweep: Sweep) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            sweep,
            trials: DEFAULT_TRIALS,
            seed: 0,
            out_path: None,
            format: OutputFormat::Csv,
            oversample: DEFAULT_OVERSAMPLE,
            mode: None,
            reference_trials: DEFAULT_REFERENCE_TRIALS,
            true_position: 0.0,
        }
    }

    /// Figure and theorem settings; `custom` starts from an empty grid.
    pub fn preset(kind: ExperimentKind) -> Self {
        let priors_coarse = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        let sweep = match kind {
            ExperimentKind::Fig3 => Sweep {
                tb: vec![32],
                snr_db: linspace_step(-10.0, 15.0, 1.0),
                prior_present: vec![0.2, 0.5, 0.8],
                ..Default::default()
            },
            ExperimentKind::Fig4 => Sweep {
                tb: vec![64, 512, 2048],
                snr_db: vec![0.0, 5.0],
                prior_present: linspace_step(0.0, 1.0, 0.05),
                ..Default::default()
            },
            ExperimentKind::Fig5 => Sweep {
                tb: vec![32],
                snr_db: linspace_step(-10.0, 15.0, 1.0),
                prior_present: vec![0.5],
                ..Default::default()
            },
            ExperimentKind::Fig6 => Sweep {
                tb: vec![32],
                snr_db: vec![5.0],
                prior_present: linspace_step(0.0, 1.0, 0.05),
                ..Default::default()
            },
            ExperimentKind::FalseAlarmTheorem => Sweep {
                tb: vec![64, 128, 256, 512, 1024, 2048],
                snr_db: vec![0.0, 5.0],
                prior_present: priors_coarse,
                ..Default::default()
            },
            ExperimentKind::DetectionTheorem => Sweep {
                tb: vec![32],
                snr_db: vec![5.0],
                prior_present: vec![0.5],
                m: vec![4, 8, 16],
                epsilon: vec![0.1],
                ..Default::default()
            },
            ExperimentKind::Roc => Sweep {
                tb: vec![32],
                snr_db: vec![0.0, 5.0, 10.0],
                prior_present: vec![0.5],
                pfa: detinfo::metrics::default_pfa_grid(),
                ..Default::default()
            },
            ExperimentKind::Entropies => Sweep {
                tb: vec![32],
                snr_db: vec![5.0],
                prior_present: vec![0.5],
                ..Default::default()
            },
            ExperimentKind::Custom => Sweep::default(),
        };
        let mut spec = Self::base(kind, sweep);
        if kind == ExperimentKind::DetectionTheorem {
            spec.trials = 500;
        }
        spec
    }

    /// Channel mode for this spec: the explicit one, else the kind's default.
    pub fn channel_mode(&self) -> ChannelMode {
        self.mode.unwrap_or(match self.kind {
            ExperimentKind::Fig5 | ExperimentKind::Fig6 | ExperimentKind::Roc => {
                ChannelMode::MatchedPosition
            }
            _ => ChannelMode::FullInterval,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = HarnessError::validation;
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        if self.trials < MIN_TRIALS {
            return Err(bad(
                "trials",
                format!("must be ≥ {MIN_TRIALS}, got {}", self.trials),
            ));
        }
        if self.oversample == 0 {
            return Err(bad("oversample", "must be ≥ 1".into()));
        }
        let s = &self.sweep;
        let needs_m = self.kind == ExperimentKind::DetectionTheorem;
        let needs_pfa = self.kind == ExperimentKind::Roc;
        if s.tb.is_empty()
            || s.snr_db.is_empty()
            || s.prior_present.is_empty()
            || (needs_m && (s.m.is_empty() || s.epsilon.is_empty()))
            || (needs_pfa && s.pfa.is_empty())
        {
            return Err(bad(
                "sweep",
                format!(
                    "empty parameter grid for {} (needs {})",
                    self.kind,
                    self.required_axes()
                ),
            ));
        }
        if let Some(tb) = s.tb.iter().find(|tb| **tb < 2) {
            return Err(bad("sweep", format!("tb must be ≥ 2, got {tb}")));
        }
        if let Some(p) = s.prior_present.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(bad(
                "sweep",
                format!("prior_present must lie in [0, 1], got {p}"),
            ));
        }
        if let Some(x) = s.snr_db.iter().find(|x| x.is_nan() || **x == f64::INFINITY) {
            return Err(bad(
                "sweep",
                format!("snr_db must be finite or -inf, got {x}"),
            ));
        }
        if let Some(e) = s.epsilon.iter().find(|e| !(**e > 0.0)) {
            return Err(bad("sweep", format!("epsilon must be positive, got {e}")));
        }
        if let Some(m) = s.m.iter().find(|m| **m == 0) {
            return Err(bad("sweep", format!("m must be ≥ 1, got {m}")));
        }
        if let Some(p) = s.pfa.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(bad(
                "sweep",
                format!("pfa levels must lie in (0, 1), got {p}"),
            ));
        }
        Ok(())
    }

    fn required_axes(&self) -> &'static str {
        match self.kind {
            ExperimentKind::DetectionTheorem => "tb, snr_db, prior_present, m, epsilon",
            ExperimentKind::Roc => "tb, snr_db, prior_present, pfa",
            _ => "tb, snr_db, prior_present",
        }
    }
}
