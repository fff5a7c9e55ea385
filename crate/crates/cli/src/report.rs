//! Per-cluster run summary and its text rendering.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use epmotion::C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no {SUMMARY_FILE} in {0}; run `epmotion run` first")]
    Missing(PathBuf),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum ClusterStatus {
    Completed,
    Halted { delta: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub id: String,
    /// Crossing `λ` this cluster started from; absent for direct EP starts.
    pub lambda_in: Option<f64>,
    pub multiplicity: usize,
    pub ep_count: usize,
    pub signs: Vec<i8>,
    pub delta_final: f64,
    pub lambda_final: C64,
    pub max_residual: f64,
    pub max_lambda_dot_spread: f64,
    pub max_oracle_discrepancy: Option<f64>,
    #[serde(flatten)]
    pub status: ClusterStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    pub grid: u64,
    pub tolerance: f64,
    pub clusters: Vec<ClusterSummary>,
    /// Multiplets whose cluster resolution failed, with the error text.
    pub unresolved: Vec<(f64, String)>,
}

impl RunSummary {
    pub fn load(dir: &Path) -> Result<Self, ReportError> {
        let path = dir.join(SUMMARY_FILE);
        if !path.is_file() {
            return Err(ReportError::Missing(dir.to_path_buf()));
        }
        let text = std::fs::read_to_string(&path).map_err(|source| ReportError::Io { path: path.clone(), source })?;
        serde_json::from_str(&text).map_err(|source| ReportError::Parse { path, source })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model: {}   G = {}   tol = {:e}", self.model, self.grid, self.tolerance);
        let _ = writeln!(
            out,
            "{:<5} {:>9} {:>2} {:>2} {:<10} {:>7} {:>26} {:>10} {:>10} {:>10}  status",
            "id", "λ_in", "k", "M", "signs", "δ_end", "λ(δ_end)", "residual", "spread", "oracle"
        );
        for c in &self.clusters {
            let lambda_in = c.lambda_in.map(|l| format!("{l:.6}")).unwrap_or_else(|| "direct".into());
            let signs: String = c.signs.iter().map(|s| if *s > 0 { '+' } else { '-' }).collect();
            let oracle = c.max_oracle_discrepancy.map(|d| format!("{d:.2e}")).unwrap_or_else(|| "-".into());
            let status = match &c.status {
                ClusterStatus::Completed => "ok".to_string(),
                ClusterStatus::Halted { delta, reason } => format!("HALTED at δ = {delta:.6}: {reason}"),
            };
            let lambda = format!("{:+.8}{:+.8}i", c.lambda_final.re, c.lambda_final.im);
            let _ = writeln!(
                out,
                "{:<5} {:>9} {:>2} {:>2} {:<10} {:>7.4} {:>26} {:>10.2e} {:>10.2e} {:>10}  {status}",
                c.id,
                lambda_in,
                c.multiplicity,
                c.ep_count,
                signs,
                c.delta_final,
                lambda,
                c.max_residual,
                c.max_lambda_dot_spread,
                oracle
            );
        }
        for (lambda, err) in &self.unresolved {
            let first = err.lines().next().unwrap_or_default();
            let _ = writeln!(out, "unresolved multiplet at λ = {lambda:.6}: {first}");
        }
        out
    }
}
