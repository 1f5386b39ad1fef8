use std::io::Write;

use crate::error::Result;

use super::runner::Trace;
use super::{fmt_f64, fmt_opt};

pub const TRACE_HEADER: [&str; 7] = ["t", "theta", "eta", "loss", "ml_loss", "regret_diff", "diverged"];

/// One CSV row. Fields that do not exist after a divergence are `None` and
/// written as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    /// `θ_t`, or the first entry of `θ_tᵀM` for the regression model.
    pub theta: Option<f64>,
    pub eta: Option<f64>,
    pub loss: Option<f64>,
    pub ml_loss: f64,
    pub regret_diff: Option<f64>,
    pub diverged: bool,
}

pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.t.to_string(),
            fmt_opt(r.theta),
            fmt_opt(r.eta),
            fmt_opt(r.loss),
            fmt_f64(r.ml_loss),
            fmt_opt(r.regret_diff),
            u8::from(r.diverged).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Full parameter vectors: `t,theta_0,…,theta_{n−1}`, non-diverged rows only.
pub fn write_theta_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = trace.trajectory.thetas.first().map_or(0, |v| v.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|i| format!("theta_{i}")));
    w.write_record(&header)?;
    for (t, theta) in trace.trajectory.thetas.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(theta.iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
