//! Ground-truth derivatives used to certify the online approximations.
//!
//! * [`replay_t`] recomputes `T_t(η)`, the iterate after `t` fixed-η SG steps.
//! * [`exact_a`] runs the exact recursion for `A_t(η) = ∂T_t(η)/∂log η`
//!   alongside the replay.
//! * [`fd_hypergrad`] estimates `A_t(η)` by central differences in `log η`.
//! * [`pathwise_h`] differentiates the iterate along a realized sequence of
//!   step sizes, the quantity the adaptive algorithms track online.
//! * [`pathwise_h_discounted`] does the same in the discounted direction by
//!   summing per-coordinate sensitivities, an `O(t²)` route independent of
//!   the one-pass recursion.
//!
//! All oracles use exact Hessian-vector products.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{LlrError, Result};
use crate::kernel::{ascend, finite, tangent};
use crate::models::{LossStream, ModelKind, ParamVector};
use crate::schedules::RateSchedule;

/// Iterates `(θ_t)` and step sizes `(η_t)` recorded by a run, both indexed by
/// the state time: `etas[t]` is the step size held before iteration `t`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub thetas: Vec<ParamVector>,
    pub etas: Vec<f64>,
}

impl Trajectory {
    pub fn push(&mut self, theta: ParamVector, eta: f64) {
        self.thetas.push(theta);
        self.etas.push(eta);
    }

    /// Step size used by iteration `s` to produce `θ_{s+1}`.
    pub fn applied_step_sizes(&self) -> &[f64] {
        self.etas.get(1..).unwrap_or(&[])
    }
}

/// Oracle output: the iterate, a tangent vector at it, and whether the
/// replay hit a non-finite value (in which case both stop at the last finite
/// iteration).
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub theta: ParamVector,
    pub value: ParamVector,
    pub diverged: bool,
}

fn check_horizon(stream: &LossStream, t: usize) -> Result<()> {
    if t > stream.horizon() {
        return Err(LlrError::TimeOutOfRange { t, horizon: stream.horizon() });
    }
    Ok(())
}

/// `T_t(η)`: `t` steps of `θ ← θ + (η/f(s))·∂ℓ_s(θ)` from `θ₀`.
pub fn replay_t(eta: f64, stream: &LossStream, schedule: &RateSchedule, theta0: &ParamVector, t: usize) -> Result<(ParamVector, bool)> {
    check_horizon(stream, t)?;
    stream.check_dim(theta0)?;
    let mut theta = theta0.clone();
    for s in 0..t {
        let g = stream.grad_unchecked(s, &theta);
        let next = ascend(&theta, &g, eta / schedule.eval(s));
        if !finite(&next) {
            return Ok((theta, true));
        }
        theta = next;
    }
    Ok((theta, false))
}

/// `A_t(η)` from `A₀ = 0`,
/// `A_{s+1} = A_s + (η/f(s))·∂ℓ_s(θ_s) + (η/f(s))·∂²ℓ_s(θ_s)·A_s`.
pub fn exact_a(eta: f64, stream: &LossStream, schedule: &RateSchedule, theta0: &ParamVector, t: usize) -> Result<Tangent> {
    check_horizon(stream, t)?;
    stream.check_dim(theta0)?;
    let mut theta = theta0.clone();
    let mut a = ParamVector::zeros(theta0.len());
    for s in 0..t {
        let k = eta / schedule.eval(s);
        let g = stream.grad_unchecked(s, &theta);
        let ha = stream.hessian_vec_unchecked(s, &theta, &a);
        let next_a = &a + (&g + ha) * k;
        let next_theta = &theta + g * k;
        if !(finite(&next_a) && finite(&next_theta)) {
            return Ok(Tangent { theta, value: a, diverged: true });
        }
        theta = next_theta;
        a = next_a;
    }
    Ok(Tangent { theta, value: a, diverged: false })
}

/// Central difference of [`replay_t`] in `log η` with half-width `eps`.
pub fn fd_hypergrad(eta: f64, stream: &LossStream, schedule: &RateSchedule, theta0: &ParamVector, t: usize, eps: f64) -> Result<Tangent> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(LlrError::InvalidParameter(format!("finite-difference width {eps} outside [1e-7, 1e-3]")));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(LlrError::InvalidParameter(format!("step size must be positive, got {eta}")));
    }
    let log_eta = eta.ln();
    let (plus, dp) = replay_t((log_eta + eps).exp(), stream, schedule, theta0, t)?;
    let (minus, dm) = replay_t((log_eta - eps).exp(), stream, schedule, theta0, t)?;
    let (theta, d0) = replay_t(eta, stream, schedule, theta0, t)?;
    let value = (plus - minus) / (2.0 * eps);
    let diverged = dp || dm || d0 || !finite(&value);
    Ok(Tangent { theta, value, diverged })
}

/// Pathwise derivative `𝓗_t` along the all-ones direction in log-step-size
/// space. `steps[s]` is the step size applied at iteration `s`.
pub fn pathwise_h(steps: &[f64], stream: &LossStream, schedule: &RateSchedule, theta0: &ParamVector, t: usize) -> Result<Tangent> {
    pathwise_h_scaled(steps, 1.0, stream, schedule, theta0, t)
}

/// [`pathwise_h`] along the direction `c·e`.
pub fn pathwise_h_scaled(
    steps: &[f64],
    scale: f64,
    stream: &LossStream,
    schedule: &RateSchedule,
    theta0: &ParamVector,
    t: usize,
) -> Result<Tangent> {
    check_horizon(stream, t)?;
    stream.check_dim(theta0)?;
    if steps.len() < t {
        return Err(LlrError::InvalidParameter(format!("need {t} step sizes, got {}", steps.len())));
    }
    let mut theta = theta0.clone();
    let mut h = ParamVector::zeros(theta0.len());
    for (s, &eta) in steps.iter().enumerate().take(t) {
        let k = eta / schedule.eval(s);
        let g = stream.grad_unchecked(s, &theta);
        let hv = stream.hessian_vec_unchecked(s, &theta, &h);
        let next_h = if scale == 1.0 { tangent(&h, &hv, &g, k) } else { &h + hv * k + &g * (k * scale) };
        let next_theta = ascend(&theta, &g, k);
        if !(finite(&next_h) && finite(&next_theta)) {
            return Ok(Tangent { theta, value: h, diverged: true });
        }
        theta = next_theta;
        h = next_h;
    }
    Ok(Tangent { theta, value: h, diverged: false })
}

/// Discounted pathwise derivative `𝓗_t = Σ_{s<t} γ^{t−s}·∂θ_t/∂log η_(s)`,
/// where `η_(s)` is the step size of iteration `s`.
///
/// Each coordinate sensitivity is propagated separately through the
/// Jacobians `I + k_s ∂²ℓ_s`, then the discounted sum is formed at the end.
pub fn pathwise_h_discounted(
    steps: &[f64],
    gamma: f64,
    stream: &LossStream,
    schedule: &RateSchedule,
    theta0: &ParamVector,
    t: usize,
) -> Result<Tangent> {
    check_horizon(stream, t)?;
    stream.check_dim(theta0)?;
    if steps.len() < t {
        return Err(LlrError::InvalidParameter(format!("need {t} step sizes, got {}", steps.len())));
    }
    let mut theta = theta0.clone();
    let mut sens: Vec<ParamVector> = Vec::with_capacity(t);
    let mut diverged = false;
    for (s, &eta) in steps.iter().enumerate().take(t) {
        let k = eta / schedule.eval(s);
        let g = stream.grad_unchecked(s, &theta);
        let next = ascend(&theta, &g, k);
        if !finite(&next) {
            diverged = true;
            break;
        }
        for v in sens.iter_mut() {
            let hv = stream.hessian_vec_unchecked(s, &theta, v);
            *v += hv * k;
        }
        sens.push(&g * k);
        theta = next;
    }
    let done = sens.len();
    let mut value = ParamVector::zeros(theta0.len());
    for (s, v) in sens.iter().enumerate() {
        value += v * gamma.powi((done - s) as i32);
    }
    diverged |= !finite(&value);
    Ok(Tangent { theta, value, diverged })
}

/// `‖a − b‖ / ‖a‖`, `0` when both vanish.
pub fn relative_error(reference: &ParamVector, other: &ParamVector) -> f64 {
    let diff = (reference - other).norm();
    let scale = reference.norm();
    if diff == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::INFINITY
    } else {
        diff / scale
    }
}

/// One cell of a certification sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CertRow {
    pub model: &'static str,
    pub eta: f64,
    pub t: usize,
    pub norm_a: f64,
    pub rel_err_fd: f64,
    pub rel_err_pathwise: f64,
    pub diverged: bool,
}

/// Grid of a certification sweep.
#[derive(Debug, Clone)]
pub struct CertifyConfig {
    pub models: Vec<ModelKind>,
    pub etas: Vec<f64>,
    pub times: Vec<usize>,
    pub eps: f64,
    pub seed: u64,
    pub schedule: RateSchedule,
}

/// Times are capped here to keep the quadratic-cost sweep short.
pub const MAX_CERTIFY_TIME: usize = 2000;

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            models: vec![ModelKind::gaussian(), ModelKind::bernoulli(), ModelKind::regression(), ModelKind::quadratic(1.0)],
            etas: vec![1e-3, 1e-1, 1.0],
            times: vec![10, 100, 1000],
            eps: 1e-5,
            seed: 1,
            schedule: RateSchedule::SqrtLog,
        }
    }
}

/// Compares [`exact_a`] against [`fd_hypergrad`] and [`pathwise_h`] with a
/// constant sequence on every `(model, η, t)` cell.
pub fn certify(config: &CertifyConfig) -> Result<Vec<CertRow>> {
    if let Some(&t) = config.times.iter().find(|&&t| t > MAX_CERTIFY_TIME) {
        return Err(LlrError::InvalidParameter(format!("certification time {t} exceeds cap {MAX_CERTIFY_TIME}")));
    }
    let horizon = config.times.iter().copied().max().unwrap_or(0).max(1);
    let streams = config
        .models
        .iter()
        .map(|kind| LossStream::generate(kind.clone(), config.seed, horizon))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, f64, usize)> = (0..streams.len())
        .flat_map(|m| config.etas.iter().flat_map(move |&eta| config.times.iter().map(move |&t| (m, eta, t))))
        .collect();
    cells
        .par_iter()
        .map(|&(m, eta, t)| {
            let stream = &streams[m];
            let theta0 = stream.kind().default_theta0();
            let exact = exact_a(eta, stream, &config.schedule, &theta0, t)?;
            let fd = fd_hypergrad(eta, stream, &config.schedule, &theta0, t, config.eps)?;
            let path = pathwise_h(&vec![eta; t], stream, &config.schedule, &theta0, t)?;
            Ok(CertRow {
                model: stream.kind().name(),
                eta,
                t,
                norm_a: exact.value.norm(),
                rel_err_fd: relative_error(&exact.value, &fd.value),
                rel_err_pathwise: relative_error(&exact.value, &path.value),
                diverged: exact.diverged || fd.diverged,
            })
        })
        .collect()
}

pub fn write_certification_csv<W: Write>(rows: &[CertRow], out: W) -> Result<()> {
    use crate::harness::fmt_f64;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "eta", "t", "norm_exact_a", "rel_err_fd", "rel_err_pathwise", "diverged"])?;
    for r in rows {
        w.write_record([
            r.model.to_string(),
            fmt_f64(r.eta),
            r.t.to_string(),
            fmt_f64(r.norm_a),
            fmt_f64(r.rel_err_fd),
            fmt_f64(r.rel_err_pathwise),
            u8::from(r.diverged).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{quadratic_stream, Sample};
    use crate::schedules::rate_f;
    use approx::assert_relative_eq;

    fn pv(x: f64) -> ParamVector {
        ParamVector::from_element(1, x)
    }

    fn gaussian_two() -> LossStream {
        let probe = LossStream::generate(ModelKind::gaussian(), 1, 200).unwrap();
        let x0 = match probe.sample(0).unwrap() {
            Sample::Scalar(x) => x,
            _ => unreachable!(),
        };
        LossStream::generate(ModelKind::Gaussian { mean: 5.0 + (2.0 - x0), sd: 2.0 }, 1, 200).unwrap()
    }

    #[test]
    fn zero_time_is_independent_of_eta() {
        let s = gaussian_two();
        let f = RateSchedule::SqrtLog;
        for eta in [1e-3, 1.0, 50.0] {
            assert_eq!(replay_t(eta, &s, &f, &pv(0.4), 0).unwrap().0[0], 0.4);
            assert_eq!(exact_a(eta, &s, &f, &pv(0.4), 0).unwrap().value[0], 0.0);
            assert_eq!(fd_hypergrad(eta, &s, &f, &pv(0.4), 0, 1e-5).unwrap().value[0], 0.0);
        }
    }

    #[test]
    fn one_step_values() {
        let s = gaussian_two();
        let f = RateSchedule::SqrtLog;
        let th = replay_t(1.0, &s, &f, &pv(0.0), 1).unwrap().0;
        assert_relative_eq!(th[0], 2.0 / (2f64.sqrt() * 3f64.ln()), epsilon = 1e-15);
        assert_relative_eq!(th[0], 1.287_34, epsilon = 1e-4);
        let a = exact_a(1.0, &s, &f, &pv(0.0), 1).unwrap();
        assert_relative_eq!(a.value[0], 2.0 / rate_f(0), epsilon = 1e-12);
    }

    #[test]
    fn fd_matches_exact_with_richardson_behavior() {
        let s = gaussian_two();
        let f = RateSchedule::SqrtLog;
        let theta0 = pv(0.0);
        let exact = exact_a(0.5, &s, &f, &theta0, 100).unwrap().value;
        let e1 = relative_error(&exact, &fd_hypergrad(0.5, &s, &f, &theta0, 100, 1e-3).unwrap().value);
        let e2 = relative_error(&exact, &fd_hypergrad(0.5, &s, &f, &theta0, 100, 5e-4).unwrap().value);
        let e_small = relative_error(&exact, &fd_hypergrad(0.5, &s, &f, &theta0, 100, 1e-5).unwrap().value);
        assert!(e_small <= 1e-5, "{e_small}");
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn quadratic_fd_certification() {
        let q = quadratic_stream(1.0, 200).unwrap();
        let f = RateSchedule::constant(4.0).unwrap();
        let exact = exact_a(0.7, &q, &f, &pv(1.0), 50).unwrap().value;
        let fd = fd_hypergrad(0.7, &q, &f, &pv(1.0), 50, 1e-5).unwrap().value;
        assert!(relative_error(&exact, &fd) <= 1e-6);
    }

    #[test]
    fn constant_sequence_pathwise_equals_exact() {
        let s = LossStream::generate(ModelKind::bernoulli(), 4, 300).unwrap();
        let f = RateSchedule::SqrtLog;
        let a = exact_a(0.3, &s, &f, &pv(2.0), 300).unwrap();
        let h = pathwise_h(&[0.3; 300], &s, &f, &pv(2.0), 300).unwrap();
        assert_eq!(a.theta, h.theta);
        assert!(relative_error(&a.value, &h.value) <= 1e-12);
    }

    #[test]
    fn direction_scaling_is_linear() {
        let s = LossStream::generate(ModelKind::bernoulli(), 4, 150).unwrap();
        let f = RateSchedule::SqrtLog;
        let steps: Vec<f64> = (0..150).map(|i| 0.2 + 0.01 * (i % 7) as f64).collect();
        let one = pathwise_h(&steps, &s, &f, &pv(2.0), 150).unwrap().value;
        let two = pathwise_h_scaled(&steps, 2.0, &s, &f, &pv(2.0), 150).unwrap().value;
        assert_relative_eq!(two[0], 2.0 * one[0], max_relative = 1e-12);
    }

    #[test]
    fn discounted_oracle_reduces_to_pathwise_at_unit_gamma() {
        let s = LossStream::generate(ModelKind::bernoulli(), 6, 120).unwrap();
        let f = RateSchedule::SqrtLog;
        let steps: Vec<f64> = (0..120).map(|i| 0.5 * (1.0 + 0.3 * ((i as f64) * 0.1).sin())).collect();
        for t in [1, 10, 120] {
            let a = pathwise_h(&steps, &s, &f, &pv(2.0), t).unwrap().value;
            let b = pathwise_h_discounted(&steps, 1.0, &s, &f, &pv(2.0), t).unwrap().value;
            assert!(relative_error(&a, &b) <= 1e-12, "t={t}");
        }
    }

    #[test]
    fn replay_reports_divergence() {
        let q = quadratic_stream(1e8, 500).unwrap();
        let (theta, diverged) = replay_t(1.0, &q, &RateSchedule::SqrtLog, &pv(1.0), 500).unwrap();
        assert!(diverged);
        assert!(theta[0].is_finite());
        assert!(fd_hypergrad(1.0, &q, &RateSchedule::SqrtLog, &pv(1.0), 500, 1e-5).unwrap().diverged);
    }

    #[test]
    fn argument_checks() {
        let s = gaussian_two();
        let f = RateSchedule::SqrtLog;
        assert!(fd_hypergrad(1.0, &s, &f, &pv(0.0), 10, 1e-2).is_err());
        assert!(fd_hypergrad(1.0, &s, &f, &pv(0.0), 10, 1e-9).is_err());
        assert!(replay_t(1.0, &s, &f, &pv(0.0), 201).is_err());
        assert!(pathwise_h(&[1.0; 3], &s, &f, &pv(0.0), 5).is_err());
        let cfg = CertifyConfig { times: vec![5000], ..CertifyConfig::default() };
        assert!(certify(&cfg).is_err());
    }

    #[test]
    fn trajectory_step_sizes() {
        let mut tr = Trajectory::default();
        assert!(tr.applied_step_sizes().is_empty());
        tr.push(pv(0.0), 1.0);
        tr.push(pv(1.0), 2.0);
        assert_eq!(tr.applied_step_sizes(), &[2.0]);
    }
}
