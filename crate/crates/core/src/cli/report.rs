//! Machine-readable report and plot-data emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimators::Flag;
use crate::onesample::InferenceResult;
use crate::simulation::{ReplicationRecord, SimSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    /// Full effective configuration after defaults are applied.
    pub config: Value,
    /// Wall-clock times; only present when requested, since they break byte-identical output.
    pub timestamps: Option<Timestamps>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedResult {
    pub name: String,
    pub result: InferenceResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: Meta,
    pub results: Vec<NamedResult>,
    pub tables: Vec<Table>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub simulations: Vec<SimSummary>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(command: &str, seed: Option<u64>, config: Value) -> Self {
        Report {
            meta: Meta {
                version: crate::VERSION.to_string(),
                command: command.to_string(),
                seed,
                config,
                timestamps: None,
            },
            results: Vec::new(),
            tables: Vec::new(),
            simulations: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Report> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("invalid report: {e}")))
    }

    pub fn add_result(&mut self, name: &str, result: InferenceResult) {
        for flag in &result.flags {
            self.warnings.push(format!("{name}: {}", flag_note(*flag)));
        }
        self.results.push(NamedResult {
            name: name.to_string(),
            result,
        });
    }

    /// One warning line per label with flagged or failed replications.
    pub fn add_simulation_warnings(&mut self, label: &str, summary: &SimSummary) {
        for point in &summary.points {
            let at = format!("{label}, delta {}", point.delta);
            if point.flagged > 0 {
                self.warnings.push(format!(
                    "{at}: {} of {} replications flagged by the primary test",
                    point.flagged, point.replications
                ));
            }
            for (msg, count) in &point.error_messages {
                self.warnings.push(format!("{at}: {count} replications failed: {msg}"));
            }
        }
    }
}

pub fn flag_note(flag: Flag) -> &'static str {
    match flag {
        Flag::ZetaNFloored => "variance of the norm estimate hit its positivity floor",
        Flag::ZetaStarFloored => "null variance of the norm estimate hit its positivity floor",
        Flag::Nu4Floored => "fourth-moment estimate raised to sigma^4",
        Flag::ZetaEpsFloored => "variance of the error-variance estimate hit its positivity floor",
        Flag::SigmaEtaFloored => "variance of the signal-strength estimate hit its positivity floor",
        Flag::SigmaRhoFloored => "variance of the explained-fraction estimate hit its positivity floor",
        Flag::SigmaRhoConventionalFloored => {
            "variance of the conventional explained-fraction estimate hit its positivity floor"
        }
        Flag::SigmaDiffFloored => "variance of the difference estimate hit its positivity floor",
        Flag::SigmaThetaFloored => "variance of the angle estimate hit its positivity floor",
        Flag::SigmaThetaConventionalFloored => "variance of the conventional angle estimate hit its positivity floor",
        Flag::IntervalClamped => "confidence interval clamped to the parameter range",
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// QQ coordinates: sorted p-values against uniform plotting positions `(i − ½)/m`.
pub fn qq_rows(label: &str, test: &str, delta: f64, p_values: &[f64], out: &mut String) {
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    for (i, p) in sorted.iter().enumerate() {
        let expected = (i as f64 + 0.5) / m;
        let _ = writeln!(out, "{label},{test},{delta},{},{expected},{p}", i + 1);
    }
}

pub const QQ_HEADER: &str = "cell,test,delta,rank,expected,observed\n";
pub const POWER_HEADER: &str = "cell,test,delta,replications,rejection_rate,one_sided_rejection_rate\n";

/// QQ rows grouped by grid point and test; `pick` names the p-values of one record.
pub fn qq_from_records<F>(label: &str, records: &[ReplicationRecord], pick: F, out: &mut String)
where
    F: Fn(&ReplicationRecord) -> Vec<(String, f64)>,
{
    // Keyed by grid position, then test name, so rows follow the grid order.
    let mut groups: BTreeMap<(usize, String), (f64, Vec<f64>)> = BTreeMap::new();
    let mut grid: Vec<u64> = Vec::new();
    for r in records {
        let pos = match grid.iter().position(|d| *d == r.delta.to_bits()) {
            Some(i) => i,
            None => {
                grid.push(r.delta.to_bits());
                grid.len() - 1
            }
        };
        for (test, p) in pick(r) {
            groups.entry((pos, test)).or_insert((r.delta, Vec::new())).1.push(p);
        }
    }
    for ((_, test), (delta, p)) in &groups {
        qq_rows(label, test, *delta, p, out);
    }
}

pub fn power_rows(label: &str, test: &str, summary: &SimSummary, out: &mut String) {
    for point in &summary.points {
        if let Some(s) = &point.primary {
            let one = s.one_sided_rejection_rate.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{label},{test},{},{},{},{one}",
                point.delta, s.count, s.rejection_rate
            );
        }
    }
}
