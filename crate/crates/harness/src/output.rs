//! Result tables and their CSV / JSON-lines serialization.

use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{Map, Value};
use tempfile::NamedTempFile;

use crate::error::{HarnessError, Result};
use crate::spec::{ExperimentKind, OutputFormat};

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    UInt(u64),
    Float(f64),
    Bool(bool),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::UInt(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::UInt(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::UInt(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::UInt(v) => Value::from(*v),
            Cell::Float(v) if v.is_nan() => Value::Null,
            Cell::Float(v) if v.is_infinite() => Value::from(format_float(*v)),
            Cell::Float(v) => Value::from(*v),
            Cell::Bool(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Missing => Value::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::UInt(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }
}

/// One record per grid point, as (column, value) pairs in schema order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultRow {
    cells: Vec<(&'static str, Cell)>,
}

impl ResultRow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, column: &'static str, value: impl Into<Cell>) -> Self {
        self.cells.push((column, value.into()));
        self
    }

    pub fn columns(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.cells.iter().map(|(c, _)| *c)
    }

    pub fn get(&self, column: &str) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|(c, _)| *c == column)
            .map(|(_, v)| v)
    }

    /// Numeric value of a column; `None` if absent, missing or textual.
    pub fn float(&self, column: &str) -> Option<f64> {
        self.get(column).and_then(Cell::as_f64)
    }

    pub fn cells(&self) -> &[(&'static str, Cell)] {
        &self.cells
    }
}

const TAIL: [&str; 3] = ["mode", "trials", "seed"];

/// Column set of each experiment kind.
pub fn schema(kind: ExperimentKind) -> Vec<&'static str> {
    let body: &[&str] = match kind {
        ExperimentKind::Fig3 => &[
            "tb",
            "snr_db",
            "prior_present",
            "p_fa",
            "p_fa_stderr",
            "p_d",
            "p_d_stderr",
        ],
        ExperimentKind::Fig4 => &[
            "tb",
            "prior_present",
            "p_fa",
            "p_fa_stderr",
            "pfa_deviation",
            "snr_db",
        ],
        ExperimentKind::Fig5 => &[
            "snr_db",
            "tb",
            "prior_present",
            "di_theoretical",
            "di_theoretical_stderr",
            "di_map",
            "di_map_stderr",
            "di_sap",
            "di_sap_stderr",
            "di_np",
            "di_np_stderr",
            "np_best_pfa",
            "di_np_closed_form",
        ],
        ExperimentKind::Fig6 => &[
            "snr_db",
            "tb",
            "prior_present",
            "h_v",
            "di_theoretical",
            "di_theoretical_stderr",
            "di_norm_hv",
            "di_norm_hv_stderr",
            "di_norm_max",
            "di_norm_max_stderr",
        ],
        ExperimentKind::FalseAlarmTheorem => &[
            "tb",
            "snr_db",
            "prior_present",
            "p_fa",
            "p_fa_stderr",
            "pfa_deviation",
            "log_upsilon_mean",
            "log_upsilon_mean_stderr",
            "log_upsilon_std",
            "log_upsilon_std_stderr",
        ],
        ExperimentKind::DetectionTheorem => &[
            "tb",
            "snr_db",
            "prior_present",
            "m",
            "epsilon",
            "p_f",
            "p_f_stderr",
            "failures",
            "empirical_entropy",
            "empirical_entropy_stderr",
            "empirical_di",
            "empirical_di_stderr",
            "h_v",
            "di_reference",
            "di_reference_stderr",
            "fano_lhs",
            "fano_rhs",
            "fano_margin",
            "fano_margin_stderr",
            "fano_holds",
            "reference_trials",
        ],
        ExperimentKind::Roc => &[
            "tb",
            "snr_db",
            "prior_present",
            "target_pfa",
            "p_fa",
            "p_fa_stderr",
            "p_d",
            "p_d_stderr",
            "p_d_closed_form",
            "di_np",
            "di_np_stderr",
            "di_np_closed_form",
        ],
        ExperimentKind::Entropies => &[
            "tb",
            "snr_db",
            "prior_present",
            "h_v",
            "h_y",
            "h_y_stderr",
            "h_vy",
            "h_vy_stderr",
            "h_v_given_y",
            "h_v_given_y_stderr",
            "di_reference",
            "di_reference_stderr",
            "chain_rule_residual",
            "chain_rule_residual_stderr",
        ],
        ExperimentKind::Custom => &[
            "tb",
            "snr_db",
            "prior_present",
            "p_fa",
            "p_fa_stderr",
            "p_d",
            "p_d_stderr",
            "di_theoretical",
            "di_theoretical_stderr",
            "di_map",
            "di_map_stderr",
            "di_sap",
            "di_sap_stderr",
        ],
    };
    body.iter().chain(TAIL.iter()).copied().collect()
}

/// Rows of one experiment, all following `schema(kind)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub kind: ExperimentKind,
    pub columns: Vec<&'static str>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            columns: schema(kind),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ResultRow) {
        debug_assert!(
            row.columns().eq(self.columns.iter().copied()),
            "row columns {:?} do not follow the {} schema",
            row.columns().collect::<Vec<_>>(),
            self.kind
        );
        self.rows.push(row);
    }

    /// Values of one column across rows.
    pub fn column(&self, name: &str) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.float(name)).collect()
    }

    /// Serializes the table. A `# generated <unix seconds>` comment line
    /// precedes CSV output unless `deterministic` is set.
    pub fn write_to<W: Write>(
        &self,
        mut w: W,
        format: OutputFormat,
        deterministic: bool,
    ) -> Result<()> {
        let io = |e: std::io::Error| HarnessError::Io {
            path: "<output>".into(),
            source: e,
        };
        match format {
            OutputFormat::Csv => {
                if !deterministic {
                    let secs = SystemTime::now()
                        .duration_since(UNIX_EPOCH)
                        .map_or(0, |d| d.as_secs());
                    writeln!(w, "# generated {secs}").map_err(io)?;
                }
                let mut csv = csv::Writer::from_writer(&mut w);
                csv.write_record(&self.columns)?;
                for row in &self.rows {
                    csv.write_record(row.cells.iter().map(|(_, c)| c.to_csv()))?;
                }
                csv.flush().map_err(io)?;
            }
            OutputFormat::Json => {
                for row in &self.rows {
                    let obj: Map<String, Value> = row
                        .cells
                        .iter()
                        .map(|(c, v)| ((*c).to_owned(), v.to_json()))
                        .collect();
                    serde_json::to_writer(&mut w, &Value::Object(obj))?;
                    writeln!(w).map_err(io)?;
                }
            }
        }
        w.flush().map_err(io)
    }

    pub fn to_string(&self, format: OutputFormat, deterministic: bool) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf, format, deterministic)?;
        Ok(String::from_utf8(buf).expect("output is UTF-8"))
    }

    /// Writes to a temporary file next to `path` and renames it into place,
    /// so `path` never holds a partial table.
    pub fn write_atomic(
        &self,
        path: &Path,
        format: OutputFormat,
        deterministic: bool,
    ) -> Result<()> {
        let parent = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(parent).map_err(HarnessError::io(parent))?;
        self.write_to(tmp.as_file_mut(), format, deterministic)
            .map_err(|e| match e {
                HarnessError::Io { source, .. } => HarnessError::Io {
                    path: path.to_path_buf(),
                    source,
                },
                other => other,
            })?;
        tmp.as_file().sync_all().map_err(HarnessError::io(path))?;
        tmp.persist(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            source: e.error,
        })?;
        Ok(())
    }
}
