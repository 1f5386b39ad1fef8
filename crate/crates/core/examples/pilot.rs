//! Prints the quantities behind the frozen thresholds of the acceptance
//! suite for a given seed.
//!
//! ```text
//! cargo run --release -p llr --example pilot -- [seed]
//! ```

use llr::harness::{quadratic_diagnostic, sweep, Algorithm, ExperimentConfig, QuadraticConfig, Trace};
use llr::models::ModelKind;

fn tail_slope(trace: &Trace, window: usize) -> f64 {
    let n = trace.records.len();
    match (trace.records[n - 1].regret_diff, trace.records[n - 1 - window].regret_diff) {
        (Some(end), Some(start)) => (end - start) / window as f64,
        _ => f64::INFINITY,
    }
}

fn main() {
    let seed: u64 = std::env::args().nth(1).map_or(1, |s| s.parse().expect("seed"));
    for model in [ModelKind::gaussian(), ModelKind::bernoulli(), ModelKind::regression()] {
        let mut c = ExperimentConfig::new(model.clone());
        c.seed = seed;
        c.algorithms = vec![Algorithm::Sg, Algorithm::Svrg, Algorithm::SgAg, Algorithm::SvrgAg, Algorithm::SgSg, Algorithm::Memory];
        let (stream, baseline, traces) = sweep(&c).expect("sweep");
        let ml_final = baseline.thetas.last().unwrap();
        println!("== {} seed {seed} (ML final {:.4})", model.name(), stream.report_theta(ml_final));
        for tr in &traces {
            let gap = tr.final_theta().map_or(f64::NAN, |th| (stream.report_theta(th) - stream.report_theta(ml_final)).abs());
            println!(
                "{:>8} eta0 {:>7.0e}  R_T {:>12.4}  slope500 {:>10.3e}  |theta-ML| {:>9.4}  eta_T {:>9.3e}  div {:?}",
                tr.algorithm.name(),
                tr.eta0,
                tr.final_regret(),
                tail_slope(tr, 500),
                gap,
                tr.trajectory.etas.last().copied().unwrap_or(f64::NAN),
                tr.diverged_at
            );
        }
    }
    for eta0 in [1e-9, 1e-8, 1e-7, 1e-6, 1e-4, 1e-2, 1.0] {
        let mut q = QuadraticConfig::new(1e8);
        q.eta0 = eta0;
        let rows = quadratic_diagnostic(&q).expect("quadratic");
        let tail = &rows[3750..];
        let (lo, hi) = tail
            .iter()
            .filter_map(|r| r.ratio)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)));
        let first_div = rows.iter().position(|r| r.diverged);
        println!("quadratic eta0 {eta0:e}: tail ratio in [{lo:.3e}, {hi:.3e}] final theta {:?} diverged {first_div:?}", rows.last().unwrap().theta);
    }
}
