use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{LlrError, Result};
use crate::models::{quadratic_stream, LossStream, ParamVector};

use super::regret::Baseline;
use super::runner::{start, simulate, Trace};
use super::trace::{write_theta_csv, write_trace_csv};
use super::{fmt_f64, fmt_opt, Algorithm, ExperimentConfig, RunSettings};

/// `{model}_{algorithm}_eta{η₀}.csv`.
pub fn trace_file_name(model: &str, algorithm: Algorithm, eta0: f64) -> String {
    format!("{model}_{algorithm}_eta{eta0:e}.csv")
}

/// Runs every `(algorithm, η₀)` of the config on one shared stream.
///
/// Traces come back in config order: algorithms outer, step sizes inner.
pub fn sweep(config: &ExperimentConfig) -> Result<(LossStream, Baseline, Vec<Trace>)> {
    config.validate()?;
    let stream = LossStream::generate(config.model.clone(), config.seed, config.horizon)?;
    let baseline = Baseline::compute(&stream)?;
    let settings = config.settings();
    let theta0 = config.theta0();
    let cells: Vec<(Algorithm, f64)> =
        config.algorithms.iter().flat_map(|a| config.eta_grid.iter().map(move |e| (*a, *e))).collect();
    let traces = cells
        .par_iter()
        .map(|(a, e)| simulate(&stream, &baseline, *a, *e, theta0.clone(), &settings))
        .collect::<Result<Vec<_>>>()?;
    Ok((stream, baseline, traces))
}

/// A trace written by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub eta0: f64,
    pub path: PathBuf,
    pub final_regret: f64,
    pub diverged_at: Option<usize>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// [`sweep`], then one trace file per run in `config.out_dir` (plus a
/// `.theta.csv` companion when `full_theta` is set).
pub fn run(config: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    let (stream, _, traces) = sweep(config)?;
    fs::create_dir_all(&config.out_dir)?;
    let model = stream.kind().name();
    traces
        .par_iter()
        .map(|trace| {
            let name = trace_file_name(model, trace.algorithm, trace.eta0);
            let path = config.out_dir.join(&name);
            let mut w = create(&path)?;
            write_trace_csv(trace, &mut w)?;
            w.flush()?;
            if config.full_theta {
                let mut w = create(&path.with_extension("theta.csv"))?;
                write_theta_csv(trace, &mut w)?;
                w.flush()?;
            }
            Ok(RunSummary {
                algorithm: trace.algorithm,
                eta0: trace.eta0,
                path,
                final_regret: trace.final_regret(),
                diverged_at: trace.diverged_at,
            })
        })
        .collect()
}

pub const QUADRATIC_HEADER: [&str; 6] = ["t", "eta", "ratio", "log10_ratio", "theta", "diverged"];

/// Step-size diagnostic on `ℓ(θ) = −αθ²/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConfig {
    pub alpha: f64,
    pub algorithm: Algorithm,
    pub eta0: f64,
    pub theta0: f64,
    pub steps: usize,
    pub settings: RunSettings,
}

impl QuadraticConfig {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, algorithm: Algorithm::SgAg, eta0: 1e-3, theta0: 1.0, steps: 5000, settings: RunSettings::default() }
    }
}

/// `η_t/(2f(t))` at time `t`; the stability edge of SG on the quadratic is
/// a ratio of `1/α`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticRow {
    pub t: usize,
    pub eta: Option<f64>,
    pub ratio: Option<f64>,
    pub theta: Option<f64>,
    pub diverged: bool,
}

impl QuadraticRow {
    pub fn log10_ratio(&self) -> Option<f64> {
        self.ratio.map(f64::log10)
    }
}

pub fn quadratic_diagnostic(config: &QuadraticConfig) -> Result<Vec<QuadraticRow>> {
    if config.steps == 0 {
        return Err(LlrError::Config("number of steps must be at least 1".into()));
    }
    let stream = quadratic_stream(config.alpha, config.steps)?;
    let mut run = start(config.algorithm, ParamVector::from_element(1, config.theta0), config.eta0, &config.settings)?;
    let rate = &config.settings.schedules.rate;
    let mut rows = Vec::with_capacity(config.steps);
    for t in 0..config.steps {
        if run.diverged_at().is_some() {
            rows.push(QuadraticRow { t, eta: None, ratio: None, theta: None, diverged: true });
            continue;
        }
        let eta = run.eta();
        rows.push(QuadraticRow { t, eta: Some(eta), ratio: Some(eta / (2.0 * rate.eval(t))), theta: Some(run.theta()[0]), diverged: false });
        run.step(&stream)?;
    }
    Ok(rows)
}

pub fn write_quadratic_csv<W: Write>(rows: &[QuadraticRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(QUADRATIC_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            fmt_opt(r.eta),
            fmt_opt(r.ratio),
            fmt_opt(r.log10_ratio()),
            fmt_opt(r.theta),
            u8::from(r.diverged).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Factor between the grid winner and the adaptive starting points.
pub const COMPARE_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareEntry {
    pub role: &'static str,
    pub algorithm: Algorithm,
    pub eta0: f64,
    pub final_regret: f64,
    pub diverged: bool,
}

impl CompareEntry {
    fn of(role: &'static str, trace: &Trace) -> Self {
        Self {
            role,
            algorithm: trace.algorithm,
            eta0: trace.eta0,
            final_regret: trace.final_regret(),
            diverged: trace.diverged_at.is_some(),
        }
    }
}

/// Grid search for the best fixed step size of a base algorithm, paired with
/// its adaptive counterpart started `COMPARE_FACTOR` below and above it.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub model: &'static str,
    pub grid: Vec<CompareEntry>,
    pub winner: CompareEntry,
    pub low: CompareEntry,
    pub high: CompareEntry,
    /// Traces of the winner, the low start and the high start.
    pub traces: [Trace; 3],
}

/// Uses the first algorithm of the config as the base; it must be SG or SVRG.
pub fn compare_best_fixed(config: &ExperimentConfig) -> Result<CompareReport> {
    let base = *config.algorithms.first().ok_or_else(|| LlrError::Config("no algorithm selected".into()))?;
    if base.is_adaptive() {
        return Err(LlrError::Config(format!("comparison needs a fixed-step base algorithm, got {base}")));
    }
    let grid_config = ExperimentConfig { algorithms: vec![base], ..config.clone() };
    let (stream, baseline, traces) = sweep(&grid_config)?;
    let best = traces
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.final_regret().total_cmp(&b.final_regret()))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let grid = traces.iter().map(|t| CompareEntry::of("grid", t)).collect();
    let winner_trace = traces[best].clone();
    let winner = CompareEntry::of("winner", &winner_trace);
    let settings = config.settings();
    let llr = base.adaptive_counterpart();
    let theta0 = config.theta0();
    let (low_trace, high_trace) = rayon::join(
        || simulate(&stream, &baseline, llr, winner.eta0 / COMPARE_FACTOR, theta0.clone(), &settings),
        || simulate(&stream, &baseline, llr, winner.eta0 * COMPARE_FACTOR, theta0.clone(), &settings),
    );
    let (low_trace, high_trace) = (low_trace?, high_trace?);
    Ok(CompareReport {
        model: stream.kind().name(),
        grid,
        winner,
        low: CompareEntry::of("low", &low_trace),
        high: CompareEntry::of("high", &high_trace),
        traces: [winner_trace, low_trace, high_trace],
    })
}

/// Writes `compare_{model}_{base}.csv` and the three paired traces, returning
/// the summary path.
pub fn write_comparison(report: &CompareReport, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let base = report.winner.algorithm;
    let path = dir.join(format!("compare_{}_{base}.csv", report.model));
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["role", "algorithm", "eta0", "final_regret", "diverged"])?;
    for e in report.grid.iter().chain([&report.winner, &report.low, &report.high]) {
        w.write_record([e.role, e.algorithm.name(), &fmt_f64(e.eta0), &fmt_f64(e.final_regret), if e.diverged { "1" } else { "0" }])?;
    }
    w.flush()?;
    for (role, trace) in ["winner", "low", "high"].iter().zip(&report.traces) {
        let name = format!("compare_{role}_{}", trace_file_name(report.model, trace.algorithm, trace.eta0));
        let mut out = create(&dir.join(name))?;
        write_trace_csv(trace, &mut out)?;
        out.flush()?;
    }
    Ok(path)
}
