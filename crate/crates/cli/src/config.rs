//! Run configuration: a JSON file, then command-line overrides on top.

use std::path::{Path, PathBuf};

use epmotion::eom::{DEFAULT_CHECK_EVERY, DEFAULT_TOLERANCE};
use epmotion::ics::{DEFAULT_LAMBDA_RANGE, DEFAULT_SCAN_POINTS};
use epmotion::model::FamilyRegistry;
use epmotion::{HamiltonianFamily, Integrator, C64};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::sync::Arc;
use thiserror::Error;

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "EPMOTION_OUT";
pub const DEFAULT_OUTPUT_DIR: &str = "epmotion-out";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("delta_start and delta_end are both {0}")]
    EmptyRange(f64),
    #[error("grid must be at least 1")]
    ZeroGrid,
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("scan range [{0}, {1}] is empty")]
    ScanRange(f64, f64),
    #[error(transparent)]
    Model(#[from] epmotion::model::ModelError),
}

/// Family name plus its parameters, e.g.
/// `{"family": "toy", "n": 19, "omega": 1.0, "parity": "odd"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: String,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let mut params = Map::new();
        params.insert("n".into(), Value::from(7));
        params.insert("omega".into(), Value::from(1.0));
        params.insert("parity".into(), Value::from("odd"));
        ModelConfig { family: "toy".into(), params }
    }
}

impl ModelConfig {
    pub fn build(&self, registry: &FamilyRegistry) -> Result<Arc<dyn HamiltonianFamily>, ConfigError> {
        Ok(registry.build(&self.family, &Value::Object(self.params.clone()))?)
    }

    /// Short label such as `toy n=19 omega=1 parity=odd`.
    pub fn label(&self) -> String {
        let mut label = self.family.clone();
        for (k, v) in &self.params {
            let v = v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
            label.push_str(&format!(" {k}={v}"));
        }
        label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub delta_start: f64,
    pub delta_end: f64,
    pub grid: u64,
    pub tolerance: f64,
    pub scan_range: (f64, f64),
    pub scan_points: usize,
    pub output_dir: Option<PathBuf>,
    /// Consistency check cadence in steps.
    pub sample_every: u64,
    pub integrator: Integrator,
    pub checkpoints: Vec<f64>,
    /// Start from the EP located near this `λ` at `delta_start` instead of
    /// from crossings.
    pub seed_ep: Option<C64>,
    /// Plot `λ(δ)` with `Im λ ≥ 0` by conjugating lower-half-plane points.
    pub positive_imaginary: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            delta_start: 0.0,
            delta_end: 1.0,
            grid: 100_000,
            tolerance: DEFAULT_TOLERANCE,
            scan_range: DEFAULT_LAMBDA_RANGE,
            scan_points: DEFAULT_SCAN_POINTS,
            output_dir: None,
            sample_every: DEFAULT_CHECK_EVERY,
            integrator: Integrator::Euler,
            checkpoints: vec![0.25, 0.5, 0.75, 1.0],
            seed_ep: None,
            positive_imaginary: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.delta_start == self.delta_end {
            return Err(ConfigError::EmptyRange(self.delta_start));
        }
        if self.grid == 0 {
            return Err(ConfigError::ZeroGrid);
        }
        if !(self.tolerance > 0.0) {
            return Err(ConfigError::Tolerance(self.tolerance));
        }
        let (lo, hi) = self.scan_range;
        if !(lo < hi) {
            return Err(ConfigError::ScanRange(lo, hi));
        }
        Ok(())
    }

    /// Flag, then config file, then `EPMOTION_OUT`, then `epmotion-out`.
    pub fn resolve_output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    pub fn step(&self) -> f64 {
        (self.delta_end - self.delta_start) / self.grid as f64
    }
}

/// Command-line overrides; every field left unset keeps the configured value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Registered family name.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub parity: Option<String>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long = "start-delta", allow_negative_numbers = true)]
    pub delta_start: Option<f64>,
    #[arg(long = "end-delta", allow_negative_numbers = true)]
    pub delta_end: Option<f64>,
    #[arg(long)]
    pub grid: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "scan-min", allow_negative_numbers = true)]
    pub scan_min: Option<f64>,
    #[arg(long = "scan-max", allow_negative_numbers = true)]
    pub scan_max: Option<f64>,
    #[arg(long = "scan-points")]
    pub scan_points: Option<usize>,
    #[arg(long = "sample-every")]
    pub sample_every: Option<u64>,
    /// `euler` or `rk4`.
    #[arg(long)]
    pub integrator: Option<Integrator>,
    /// Comma-separated `δ` values for oracle validation.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub checkpoints: Option<Vec<f64>>,
    /// Output directory; falls back to the config, then `EPMOTION_OUT`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Loads the config file (or defaults) and applies the flags.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(family) = &self.model {
            if *family != cfg.model.family {
                cfg.model = ModelConfig { family: family.clone(), params: Map::new() };
                if family == "toy" {
                    cfg.model.params = ModelConfig::default().params;
                }
            }
        }
        if let Some(n) = self.n {
            cfg.model.params.insert("n".into(), Value::from(n));
        }
        if let Some(parity) = &self.parity {
            cfg.model.params.insert("parity".into(), Value::from(parity.to_ascii_lowercase()));
        }
        if let Some(omega) = self.omega {
            cfg.model.params.insert("omega".into(), Value::from(omega));
        }
        macro_rules! set {
            ($($field:ident <- $flag:ident),*) => {$(
                if let Some(v) = self.$flag.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        set!(delta_start <- delta_start, delta_end <- delta_end, grid <- grid, tolerance <- tol,
             scan_points <- scan_points, sample_every <- sample_every, integrator <- integrator,
             checkpoints <- checkpoints);
        if let Some(lo) = self.scan_min {
            cfg.scan_range.0 = lo;
        }
        if let Some(hi) = self.scan_max {
            cfg.scan_range.1 = hi;
        }
        if self.out.is_some() {
            cfg.output_dir = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_roundtrip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn flat_toy_model_fields() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"model": {"family": "toy", "n": 19, "omega": 1.0, "parity": "even"}}"#).unwrap();
        assert_eq!(cfg.model.params["n"], Value::from(19));
        let family = cfg.model.build(&FamilyRegistry::default()).unwrap();
        assert_eq!(family.dim(), 20);
    }

    #[test]
    fn invariants_rejected() {
        let bad = |f: fn(&mut RunConfig)| {
            let mut cfg = RunConfig::default();
            f(&mut cfg);
            cfg.validate().is_err()
        };
        assert!(bad(|c| c.delta_end = c.delta_start));
        assert!(bad(|c| c.grid = 0));
        assert!(bad(|c| c.tolerance = 0.0));
        assert!(bad(|c| c.tolerance = f64::NAN));
    }

    #[test]
    fn flags_override_file_values() {
        let o = Overrides { n: Some(1), parity: Some("Even".into()), grid: Some(10), ..Default::default() };
        let cfg = o.resolve().unwrap();
        assert_eq!(cfg.grid, 10);
        assert_eq!(cfg.model.params["parity"], Value::from("even"));
        assert_eq!(cfg.model.label(), "toy n=1 omega=1.0 parity=even");
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"grdi": 5}"#).is_err());
    }
}
