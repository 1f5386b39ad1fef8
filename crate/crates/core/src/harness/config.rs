//! Flat `key = value` configuration files.
//!
//! Keys mirror the command-line flags: `model`, `alpha`, `algo`, `eta0`,
//! `steps`, `seed`, `hessian`, `tau`, `out`, `theta0`, `refresh`,
//! `full_theta`. List keys (`algo`, `eta0`) take comma-separated values and
//! accumulate over repeated lines. Blank lines and `#` comments are ignored.

use std::path::PathBuf;

use crate::adaptive::HessianMode;
use crate::error::{LlrError, Result};
use crate::models::ParamVector;

use super::{parse_hessian, parse_model, Algorithm, ExperimentConfig};

/// Every setting is optional so that a file and the command line can be
/// layered with [`ConfigOverrides::merge`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub model: Option<String>,
    pub alpha: Option<f64>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub eta_grid: Option<Vec<f64>>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub hessian: Option<HessianMode>,
    pub tau: Option<f64>,
    pub out_dir: Option<PathBuf>,
    /// Fills every coordinate of the starting point.
    pub theta0: Option<f64>,
    pub svrg_refresh: Option<usize>,
    pub full_theta: Option<bool>,
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| LlrError::Config(format!("invalid value '{value}' for '{key}'")))
}

fn list<T>(value: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect()
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(LlrError::Config(format!("invalid value '{value}' for '{key}'"))),
    }
}

/// Parses a configuration file.
///
/// ```
/// let c = llr::harness::parse_config("model = bernoulli\neta0 = 1e-3, 0.1\n# comment\nsteps = 10").unwrap();
/// assert_eq!(c.eta_grid, Some(vec![1e-3, 0.1]));
/// assert_eq!(c.build().unwrap().horizon, 10);
/// ```
pub fn parse_config(text: &str) -> Result<ConfigOverrides> {
    let mut c = ConfigOverrides::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| LlrError::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        c.set(key.trim(), value.trim())?;
    }
    Ok(c)
}

impl ConfigOverrides {
    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.to_ascii_lowercase().replace('-', "_").as_str() {
            "model" => self.model = Some(value.to_string()),
            "alpha" => self.alpha = Some(number(key, value)?),
            "algo" | "algorithm" | "algorithms" => {
                self.algorithms.get_or_insert_with(Vec::new).extend(list(value, str::parse::<Algorithm>)?)
            }
            "eta0" => self.eta_grid.get_or_insert_with(Vec::new).extend(list(value, |s| number::<f64>(key, s))?),
            "steps" => self.steps = Some(number(key, value)?),
            "seed" => self.seed = Some(number(key, value)?),
            "hessian" => self.hessian = Some(parse_hessian(value)?),
            "tau" => self.tau = Some(number(key, value)?),
            "out" => self.out_dir = Some(PathBuf::from(value)),
            "theta0" => self.theta0 = Some(number(key, value)?),
            "refresh" => self.svrg_refresh = Some(number(key, value)?),
            "full_theta" => self.full_theta = Some(boolean(key, value)?),
            other => return Err(LlrError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Fields set in `over` replace those of `self`.
    pub fn merge(self, over: ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            model: over.model.or(self.model),
            alpha: over.alpha.or(self.alpha),
            algorithms: over.algorithms.or(self.algorithms),
            eta_grid: over.eta_grid.or(self.eta_grid),
            steps: over.steps.or(self.steps),
            seed: over.seed.or(self.seed),
            hessian: over.hessian.or(self.hessian),
            tau: over.tau.or(self.tau),
            out_dir: over.out_dir.or(self.out_dir),
            theta0: over.theta0.or(self.theta0),
            svrg_refresh: over.svrg_refresh.or(self.svrg_refresh),
            full_theta: over.full_theta.or(self.full_theta),
        }
    }

    /// A validated experiment; unset fields take the defaults of
    /// [`ExperimentConfig::new`] for the chosen model (Gaussian if none).
    pub fn build(&self) -> Result<ExperimentConfig> {
        let model = parse_model(self.model.as_deref().unwrap_or("gaussian"), self.alpha)?;
        let dim = model.dim();
        let mut c = ExperimentConfig::new(model);
        if let Some(a) = &self.algorithms {
            c.algorithms = a.clone();
        }
        if let Some(g) = &self.eta_grid {
            c.eta_grid = g.clone();
        }
        if let Some(s) = self.steps {
            c.horizon = s;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(h) = self.hessian {
            c.hessian = h;
        }
        if let Some(t) = self.tau {
            c.tau = t;
        }
        if let Some(o) = &self.out_dir {
            c.out_dir = o.clone();
        }
        c.theta0 = self.theta0.map(|v| ParamVector::from_element(dim, v));
        c.svrg_refresh = self.svrg_refresh;
        c.full_theta = self.full_theta.unwrap_or(false);
        c.validate()?;
        Ok(c)
    }
}
