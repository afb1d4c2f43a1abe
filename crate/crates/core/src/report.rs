//! Solve reports and their on-disk form.
//!
//! A report directory holds `report.json`, `solution_core.csv` (the solution
//! on its core interval in line coordinates), `solution.csv` (the solution
//! sampled over the probe window in the problem's coordinates), `plot.csv`
//! (`x, value, residual`) and, when the negative half-line extension
//! applies, `solution_negative.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classes::ClassCertificate;
use crate::construction::{CandidateCertificate, SewingSummary};
use crate::contraction::{BoundCheck, Constants};
use crate::error::{Error, Result, Stage};
use crate::funcrep::{GridFunction, Interval};
use crate::problem::Form;

pub const REPORT_FILE: &str = "report.json";
pub const CORE_CSV: &str = "solution_core.csv";
pub const SOLUTION_CSV: &str = "solution.csv";
pub const PLOT_CSV: &str = "plot.csv";
pub const NEGATIVE_CSV: &str = "solution_negative.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Contraction,
    ConstructLeft,
    ConstructRight,
    VerifyOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCertificate {
    pub role: String,
    pub certificate: ClassCertificate,
}

/// Negative half-line extension `h(x) = -g(-x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegationRecord {
    pub applied: bool,
    pub note: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<Interval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_mult: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_mult_relative: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub name: Option<String>,
    pub form: Form,
    pub route: Route,
    pub stages: Vec<Stage>,
    pub exponents: Vec<f64>,
    /// Coefficients `alpha_k` of `sum_k alpha_k f^k = F` in line coordinates
    /// after normalization.
    pub coefficients: Vec<f64>,
    /// The line target was divided by this factor during normalization.
    pub normalization: f64,
    pub interval: Interval,
    pub line_interval: Interval,
    pub line_target: String,
    pub constants: Option<Constants>,
    pub stability_constant: Option<f64>,
    pub iterations: Option<usize>,
    pub iterate_gap_trace: Vec<f64>,
    pub gap_ratios: Vec<f64>,
    pub probe_window: Interval,
    pub probes: usize,
    pub residual_poly: f64,
    pub residual_mult: Option<f64>,
    pub residual_mult_relative: Option<f64>,
    pub negation: Option<NegationRecord>,
    pub certificates: Vec<NamedCertificate>,
    pub sewing: Option<SewingSummary>,
    pub candidate: Option<CandidateCertificate>,
    pub warnings: Vec<String>,
}

/// Result of re-verifying a stored solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub route: Route,
    pub probes: usize,
    pub residual_poly: f64,
    pub residual_mult: Option<f64>,
    pub recorded_residual_poly: Option<f64>,
    pub recorded_residual_mult: Option<f64>,
    /// Largest difference between recomputed and recorded residuals.
    pub reproduction_gap: Option<f64>,
}

/// Optional bound-check record for paired solves.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub epsilon: f64,
    pub c: f64,
    pub d: f64,
    pub constants: Constants,
    pub check: BoundCheck,
}

/// Plot rows `x, value, residual`.
pub fn plot_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::with_capacity(rows.len() * 64);
    out.push_str("x,value,residual\n");
    for (x, v, r) in rows {
        let _ = writeln!(out, "{x},{v},{r}");
    }
    out
}

/// Files written for one solve.
#[derive(Debug, Clone, Default)]
pub struct ReportFiles {
    pub core: Option<GridFunction>,
    pub solution: Option<GridFunction>,
    pub plot: Vec<(f64, f64, f64)>,
    pub negative: Option<GridFunction>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the report and its CSV files into `dir`, returning the paths.
pub fn write_report(report: &SolveReport, files: &ReportFiles, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::schema("report", e.to_string()))?;
    let p = dir.join(REPORT_FILE);
    write_file(&p, &(json + "\n"))?;
    written.push(p);
    let csvs = [
        (CORE_CSV, files.core.as_ref()),
        (SOLUTION_CSV, files.solution.as_ref()),
        (NEGATIVE_CSV, files.negative.as_ref()),
    ];
    for (name, g) in csvs {
        if let Some(g) = g {
            let p = dir.join(name);
            write_file(&p, &g.to_csv())?;
            written.push(p);
        }
    }
    if !files.plot.is_empty() {
        let p = dir.join(PLOT_CSV);
        write_file(&p, &plot_csv(&files.plot))?;
        written.push(p);
    }
    Ok(written)
}
