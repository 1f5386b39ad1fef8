//! Experiment harness: sweeps over algorithms and initial step sizes on a
//! shared sample stream, running-ML baselines, regret traces, the quadratic
//! step-size diagnostic and the comparison against the best fixed step size.
//!
//! All floats written to CSV use 17 significant digits so that traces
//! round-trip exactly.

mod config;
mod experiments;
mod regret;
mod runner;
mod trace;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

pub use config::{parse_config, ConfigOverrides};
pub use experiments::{
    compare_best_fixed, quadratic_diagnostic, run, sweep, trace_file_name, write_comparison, write_quadratic_csv, CompareEntry,
    CompareReport, QuadraticConfig, QuadraticRow, RunSummary, COMPARE_FACTOR, QUADRATIC_HEADER,
};
pub use regret::{regret_difference, Baseline};
pub use runner::{simulate, start, OnlineRun, Trace};
pub use trace::{write_theta_csv, write_trace_csv, TraceRecord, TRACE_HEADER};

use crate::adaptive::{HessianMode, LlrSchedules};
use crate::error::{LlrError, Result};
use crate::models::{ModelKind, ParamVector};

/// `v` in scientific notation with 17 significant digits.
///
/// ```
/// assert_eq!(llr::harness::fmt_f64(0.1), "1.0000000000000001e-1");
/// assert_eq!(llr::harness::fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
/// ```
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Initial step sizes swept by default.
pub const DEFAULT_ETA_GRID: [f64; 6] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];

/// Default memory length of the discounted variant.
pub const DEFAULT_TAU: f64 = 100.0;

/// Algorithms the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Sg,
    Svrg,
    SgSg,
    SgAg,
    SvrgAg,
    GenSg,
    /// SG/AG with the memory-discounted tangent.
    Memory,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] =
        [Algorithm::Sg, Algorithm::Svrg, Algorithm::SgSg, Algorithm::SgAg, Algorithm::SvrgAg, Algorithm::GenSg, Algorithm::Memory];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sg => "sg",
            Self::Svrg => "svrg",
            Self::SgSg => "sg-sg",
            Self::SgAg => "sg-ag",
            Self::SvrgAg => "svrg-ag",
            Self::GenSg => "gen-sg",
            Self::Memory => "memory",
        }
    }

    /// Whether the step size is learned.
    pub fn is_adaptive(self) -> bool {
        !matches!(self, Self::Sg | Self::Svrg)
    }

    /// The adaptive counterpart of a base algorithm.
    pub fn adaptive_counterpart(self) -> Self {
        match self {
            Self::Sg => Self::SgAg,
            Self::Svrg => Self::SvrgAg,
            other => other,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = LlrError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['/', '_'], "-");
        Self::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| LlrError::Config(format!("unknown algorithm '{s}'")))
    }
}

pub fn parse_hessian(s: &str) -> Result<HessianMode> {
    match s.trim().to_ascii_lowercase().as_str() {
        "free" => Ok(HessianMode::Free),
        "exact" => Ok(HessianMode::Exact),
        other => Err(LlrError::Config(format!("hessian mode must be 'free' or 'exact', got '{other}'"))),
    }
}

/// Model from its name; `alpha` is only read for the quadratic.
pub fn parse_model(name: &str, alpha: Option<f64>) -> Result<ModelKind> {
    match name.trim().to_ascii_lowercase().as_str() {
        "gaussian" => Ok(ModelKind::gaussian()),
        "bernoulli" => Ok(ModelKind::bernoulli()),
        "regression" => Ok(ModelKind::regression()),
        "quadratic" => Ok(ModelKind::quadratic(alpha.unwrap_or(1e8))),
        other => Err(LlrError::Config(format!("unknown model '{other}'"))),
    }
}

/// Per-run settings shared by every run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub hessian: HessianMode,
    pub tau: f64,
    pub svrg_refresh: Option<usize>,
    pub schedules: LlrSchedules,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { hessian: HessianMode::Free, tau: DEFAULT_TAU, svrg_refresh: None, schedules: LlrSchedules::default() }
    }
}

/// A sweep over `algorithms × eta_grid` on one sample stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub algorithms: Vec<Algorithm>,
    pub eta_grid: Vec<f64>,
    pub horizon: usize,
    pub seed: u64,
    pub hessian: HessianMode,
    pub tau: f64,
    /// Starting point; the model default when absent.
    pub theta0: Option<ParamVector>,
    pub svrg_refresh: Option<usize>,
    pub out_dir: PathBuf,
    /// Also write the full parameter vector of every row.
    pub full_theta: bool,
}

impl ExperimentConfig {
    pub fn new(model: ModelKind) -> Self {
        Self {
            horizon: model.default_horizon(),
            model,
            algorithms: vec![Algorithm::Sg],
            eta_grid: DEFAULT_ETA_GRID.to_vec(),
            seed: 1,
            hessian: HessianMode::Free,
            tau: DEFAULT_TAU,
            theta0: None,
            svrg_refresh: None,
            out_dir: PathBuf::from("out"),
            full_theta: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(LlrError::Config("no algorithm selected".into()));
        }
        if self.eta_grid.is_empty() {
            return Err(LlrError::Config("initial step-size grid is empty".into()));
        }
        if let Some(bad) = self.eta_grid.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(LlrError::Config(format!("initial step sizes must be positive, got {bad}")));
        }
        if self.horizon == 0 {
            return Err(LlrError::Config("number of steps must be at least 1".into()));
        }
        if self.tau.is_nan() || self.tau <= 0.0 {
            return Err(LlrError::Config(format!("memory length must be positive, got {}", self.tau)));
        }
        if self.svrg_refresh == Some(0) {
            return Err(LlrError::Config("refresh period must be at least 1".into()));
        }
        if let Some(theta0) = &self.theta0 {
            if theta0.len() != self.model.dim() {
                return Err(LlrError::DimensionMismatch { expected: self.model.dim(), got: theta0.len() });
            }
        }
        Ok(())
    }

    pub fn theta0(&self) -> ParamVector {
        self.theta0.clone().unwrap_or_else(|| self.model.default_theta0())
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings { hessian: self.hessian, tau: self.tau, svrg_refresh: self.svrg_refresh, ..RunSettings::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("SG/AG".parse::<Algorithm>().unwrap(), Algorithm::SgAg);
        assert!("adam".parse::<Algorithm>().is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.0, -1.5, 1e-300, 123456.789, f64::MAX, std::f64::consts::PI] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::new(ModelKind::gaussian());
        assert!(c.validate().is_ok());
        assert_eq!(c.horizon, 2500);
        assert_eq!(ExperimentConfig::new(ModelKind::regression()).horizon, 7500);
        c.eta_grid.clear();
        assert!(c.validate().is_err());
        c.eta_grid = vec![0.1, 0.0];
        assert!(c.validate().is_err());
        c.eta_grid = vec![0.1];
        c.horizon = 0;
        assert!(c.validate().is_err());
        c.horizon = 10;
        c.theta0 = Some(ParamVector::zeros(3));
        assert!(c.validate().is_err());
    }

    #[test]
    fn parsers() {
        assert_eq!(parse_hessian("Exact").unwrap(), HessianMode::Exact);
        assert!(parse_hessian("approx").is_err());
        assert_eq!(parse_model("quadratic", Some(2.0)).unwrap(), ModelKind::quadratic(2.0));
        assert!(parse_model("poisson", None).is_err());
    }
}
