//! Step-size adaptive algorithms.
//!
//! Each algorithm runs a gradient ascent on `log η` driven by
//! `λ_t = ∂_θℓ_t(θ_t)·h_t`, where `h_t` tracks the derivative of the iterate
//! with respect to `log η` along the realized trajectory. The update order is
//! always: step size first, then the new `η_{t+1}` feeds both the tangent
//! update and the parameter update of the same iteration.
//!
//! * [`sgsg_step`]: plain ascent on `log η` with rate `1/μ_t`.
//! * [`sgag_step`]: the ascent is normalized by a running RMS of `λ`.
//! * [`svrgag_step`]: the normalized ascent wrapped around online SVRG.
//! * [`gensg_step`]: ascent on the hyperparameter of an arbitrary update map.
//!
//! The tangent `h` can be advanced with the single-gradient finite-difference
//! surrogate, with the exact Hessian-vector product, or with either of those
//! under an exponential memory discount (see [`TangentUpdate`]).

use crate::error::{LlrError, Result};
use crate::kernel::{ascend, finite, tangent};
use crate::models::{LossStream, ParamVector};
use crate::optim::svrg_direction;
use crate::schedules::RateSchedule;

/// How curvature enters the tangent update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HessianMode {
    /// `∂²ℓ(θ)·h ≈ ∂ℓ(θ+h) − ∂ℓ(θ)`, one gradient evaluation.
    #[default]
    Free,
    /// Exact Hessian-vector product from the model.
    Exact,
}

/// Memory discount `γ = exp(−1/τ)` applied to the pathwise derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Memory {
    tau: f64,
    gamma: f64,
}

impl Memory {
    pub fn from_tau(tau: f64) -> Result<Self> {
        Ok(Self { tau, gamma: gamma_from_tau(tau)? })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `exp(−1/τ)`; `τ = ∞` gives `1`.
pub fn gamma_from_tau(tau: f64) -> Result<f64> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(LlrError::InvalidParameter(format!("memory length must be positive, got {tau}")));
    }
    Ok((-1.0 / tau).exp())
}

/// Strategy for advancing `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TangentUpdate {
    Plain(HessianMode),
    Discounted { memory: Memory, hessian: HessianMode },
}

impl Default for TangentUpdate {
    fn default() -> Self {
        Self::Plain(HessianMode::Free)
    }
}

impl From<HessianMode> for TangentUpdate {
    fn from(mode: HessianMode) -> Self {
        Self::Plain(mode)
    }
}

/// Rates of an adaptive run: `f(t)` divides the parameter step and `μ_t`
/// the step-size step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LlrSchedules {
    pub rate: RateSchedule,
    pub hyper: RateSchedule,
}

/// `(θ_t, log η_t, h_t, n_t, d_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrState {
    pub theta: ParamVector,
    pub log_eta: f64,
    /// Online estimate of `∂θ_t/∂log η`.
    pub h: ParamVector,
    /// RMS of past `λ`, used by the normalized variants.
    pub n: f64,
    /// Normalizer of `n`; stays in `[0, 1]`.
    pub d: f64,
    pub t: usize,
    pub diverged_at: Option<usize>,
}

impl LlrState {
    pub fn new(theta0: ParamVector, eta0: f64) -> Result<Self> {
        check_initial_eta(eta0)?;
        let dim = theta0.len();
        Ok(Self { theta: theta0, log_eta: eta0.ln(), h: ParamVector::zeros(dim), n: 0.0, d: 0.0, t: 0, diverged_at: None })
    }

    pub fn eta(&self) -> f64 {
        self.log_eta.exp()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    fn frozen(&self) -> Self {
        Self { diverged_at: Some(self.t), ..self.clone() }
    }
}

fn check_initial_eta(eta0: f64) -> Result<()> {
    if eta0.is_finite() && eta0 > 0.0 {
        Ok(())
    } else {
        Err(LlrError::InvalidParameter(format!("initial step size must be finite and positive, got {eta0}")))
    }
}

fn check_state(stream: &LossStream, t: usize, theta: &ParamVector, h: &ParamVector) -> Result<()> {
    stream.check_time(t)?;
    stream.check_dim(theta)?;
    stream.check_dim(h)
}

/// `h + (η_next/f(t))·∂ℓ_t(θ + h)`.
pub fn h_update_hessian_free(state: &LlrState, stream: &LossStream, schedule: &RateSchedule, eta_next: f64) -> Result<ParamVector> {
    check_state(stream, state.t, &state.theta, &state.h)?;
    let k = eta_next / schedule.eval(state.t);
    Ok(free_tangent(stream, state.t, &state.theta, &state.h, k))
}

/// `h + (η_next/f(t))·∂ℓ_t(θ) + (η_next/f(t))·∂²ℓ_t(θ)·h`.
pub fn h_update_exact(state: &LlrState, stream: &LossStream, schedule: &RateSchedule, eta_next: f64) -> Result<ParamVector> {
    check_state(stream, state.t, &state.theta, &state.h)?;
    let k = eta_next / schedule.eval(state.t);
    let g = stream.grad_unchecked(state.t, &state.theta);
    Ok(exact_tangent(stream, state.t, &state.theta, &state.h, &g, k))
}

/// Discounted pathwise derivative: `γ·(h_update_exact)` or, with
/// [`HessianMode::Free`], `γ·(h_update_hessian_free)`.
pub fn memory_h_update(
    memory: &Memory,
    hessian: HessianMode,
    state: &LlrState,
    stream: &LossStream,
    schedule: &RateSchedule,
    eta_next: f64,
) -> Result<ParamVector> {
    let inner = match hessian {
        HessianMode::Free => h_update_hessian_free(state, stream, schedule, eta_next)?,
        HessianMode::Exact => h_update_exact(state, stream, schedule, eta_next)?,
    };
    Ok(inner * memory.gamma())
}

fn free_tangent(stream: &LossStream, t: usize, theta: &ParamVector, h: &ParamVector, k: f64) -> ParamVector {
    let shifted = theta + h;
    ascend(h, &stream.grad_unchecked(t, &shifted), k)
}

fn exact_tangent(stream: &LossStream, t: usize, theta: &ParamVector, h: &ParamVector, g: &ParamVector, k: f64) -> ParamVector {
    let hv = stream.hessian_vec_unchecked(t, theta, h);
    tangent(h, &hv, g, k)
}

/// Advances `h` with step `k = η_{t+1}/f(t)` under the chosen strategy.
fn advance_tangent(
    strategy: TangentUpdate,
    stream: &LossStream,
    t: usize,
    theta: &ParamVector,
    h: &ParamVector,
    g: &ParamVector,
    k: f64,
) -> ParamVector {
    let (mode, gamma) = match strategy {
        TangentUpdate::Plain(mode) => (mode, None),
        TangentUpdate::Discounted { memory, hessian } => (hessian, Some(memory.gamma())),
    };
    let next = match mode {
        HessianMode::Free => free_tangent(stream, t, theta, h, k),
        HessianMode::Exact => exact_tangent(stream, t, theta, h, g, k),
    };
    match gamma {
        Some(gamma) => next * gamma,
        None => next,
    }
}

/// Shared tail of SG/SG and SG/AG once `log η_{t+1}` is known.
#[allow(clippy::too_many_arguments)]
fn finish_sg_step(
    state: &LlrState,
    stream: &LossStream,
    schedules: &LlrSchedules,
    strategy: TangentUpdate,
    g: &ParamVector,
    log_eta: f64,
    n: f64,
    d: f64,
) -> LlrState {
    let t = state.t;
    let eta = log_eta.exp();
    let k = eta / schedules.rate.eval(t);
    let h = advance_tangent(strategy, stream, t, &state.theta, &state.h, g, k);
    let theta = ascend(&state.theta, g, k);
    if !(eta.is_finite() && log_eta.is_finite() && n.is_finite() && finite(&h) && finite(&theta)) {
        return state.frozen();
    }
    LlrState { theta, log_eta, h, n, d, t: t + 1, diverged_at: None }
}

/// One SG/SG iteration: `log η += λ/μ_t`, then `h` and `θ` with the new `η`.
pub fn sgsg_step(state: &LlrState, stream: &LossStream, schedules: &LlrSchedules, strategy: TangentUpdate) -> Result<LlrState> {
    if state.diverged() {
        return Ok(state.clone());
    }
    check_state(stream, state.t, &state.theta, &state.h)?;
    let g = stream.grad_unchecked(state.t, &state.theta);
    let lambda = g.dot(&state.h);
    let alpha = 1.0 / schedules.hyper.eval(state.t);
    let log_eta = state.log_eta + alpha * lambda;
    Ok(finish_sg_step(state, stream, schedules, strategy, &g, log_eta, state.n, state.d))
}

/// Running-RMS normalization of `λ_t`.
///
/// Returns `(d_{t+1}, n_{t+1}, Δ log η)`. The increment is zero when
/// `n_{t+1} = 0`, which resolves the `0/0` of the first iteration.
pub fn normalized_increment(mu: f64, lambda: f64, n: f64, d: f64) -> (f64, f64, f64) {
    let inv = 1.0 / mu;
    let d_next = (1.0 - inv) * d + inv;
    let n_sq = ((1.0 - inv) * n * n + inv * lambda * lambda) / d_next;
    let n_next = n_sq.sqrt();
    let delta = if n_next == 0.0 { 0.0 } else { inv * (lambda / n_next) };
    (d_next, n_next, delta)
}

/// One SG/AG iteration.
pub fn sgag_step(state: &LlrState, stream: &LossStream, schedules: &LlrSchedules, strategy: TangentUpdate) -> Result<LlrState> {
    if state.diverged() {
        return Ok(state.clone());
    }
    check_state(stream, state.t, &state.theta, &state.h)?;
    let g = stream.grad_unchecked(state.t, &state.theta);
    let lambda = g.dot(&state.h);
    let (d, n, delta) = normalized_increment(schedules.hyper.eval(state.t), lambda, state.n, state.d);
    if n.is_nan() {
        return Ok(state.frozen());
    }
    Ok(finish_sg_step(state, stream, schedules, strategy, &g, state.log_eta + delta, n, d))
}

/// SVRG/AG state. The step size is kept as `η` itself because the update is
/// multiplicative: `η_{t+1} = η_t·exp(Δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrgLlrState {
    pub theta: ParamVector,
    pub eta: f64,
    pub h: ParamVector,
    pub n: f64,
    pub d: f64,
    pub base: ParamVector,
    pub base_sum: ParamVector,
    pub t: usize,
    pub diverged_at: Option<usize>,
}

impl SvrgLlrState {
    pub fn new(theta0: ParamVector, eta0: f64) -> Result<Self> {
        check_initial_eta(eta0)?;
        let dim = theta0.len();
        Ok(Self {
            theta: theta0,
            eta: eta0,
            h: ParamVector::zeros(dim),
            n: 0.0,
            d: 0.0,
            base: ParamVector::zeros(dim),
            base_sum: ParamVector::zeros(dim),
            t: 0,
            diverged_at: None,
        })
    }

    pub fn log_eta(&self) -> f64 {
        self.eta.ln()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// One SVRG/AG iteration. No `f(t)` divisor enters the SVRG updates.
pub fn svrgag_step(state: &SvrgLlrState, stream: &LossStream, schedules: &LlrSchedules, strategy: TangentUpdate) -> Result<SvrgLlrState> {
    if state.diverged() {
        return Ok(state.clone());
    }
    let t = state.t;
    check_state(stream, t, &state.theta, &state.h)?;
    stream.check_dim(&state.base)?;
    let g = stream.grad_unchecked(t, &state.theta);
    let lambda = g.dot(&state.h);
    let (d, n, delta) = normalized_increment(schedules.hyper.eval(t), lambda, state.n, state.d);
    let eta = state.eta * delta.exp();
    let (dir, base_sum) = svrg_direction(stream, t, &state.theta, &state.base, &state.base_sum);

    // dθ_{t+1}/dlog η = J·h + η_{t+1}·dir, with J·h either exact or the
    // single-gradient surrogate.
    let (mode, gamma) = match strategy {
        TangentUpdate::Plain(mode) => (mode, None),
        TangentUpdate::Discounted { memory, hessian } => (hessian, Some(memory.gamma())),
    };
    let h = match mode {
        HessianMode::Free => {
            let shifted = &state.theta + &state.h;
            let (dir_shifted, _) = svrg_direction(stream, t, &shifted, &state.base, &state.base_sum);
            ascend(&state.h, &dir_shifted, eta)
        }
        HessianMode::Exact => {
            let hv = stream.hessian_vec_unchecked(t, &state.theta, &state.h);
            tangent(&state.h, &hv, &dir, eta)
        }
    };
    let h = match gamma {
        Some(gamma) => h * gamma,
        None => h,
    };
    let theta = ascend(&state.theta, &dir, eta);

    if !(n.is_finite() && eta.is_finite() && finite(&h) && finite(&theta) && finite(&base_sum)) {
        return Ok(SvrgLlrState { diverged_at: Some(t), ..state.clone() });
    }
    Ok(SvrgLlrState { theta, eta, h, n, d, base: state.base.clone(), base_sum, t: t + 1, diverged_at: None })
}

/// One iteration `θ_{t+1} = F_t(θ_t, η)` of an arbitrary algorithm, with its
/// partial derivatives.
///
/// The partials default to central finite differences of [`UpdateMap::apply`].
pub trait UpdateMap {
    fn apply(&self, stream: &LossStream, t: usize, theta: &ParamVector, eta: f64) -> ParamVector;

    /// `∂_θF·v`.
    fn partial_theta(&self, stream: &LossStream, t: usize, theta: &ParamVector, eta: f64, v: &ParamVector) -> ParamVector {
        fd_partial_theta(self, stream, t, theta, eta, v)
    }

    /// `∂_ηF`.
    fn partial_eta(&self, stream: &LossStream, t: usize, theta: &ParamVector, eta: f64) -> ParamVector {
        fd_partial_eta(self, stream, t, theta, eta)
    }

    /// `∂_ηF·scale`. Exact maps override this to control rounding.
    fn partial_eta_scaled(&self, stream: &LossStream, t: usize, theta: &ParamVector, eta: f64, scale: f64) -> ParamVector {
        self.partial_eta(stream, t, theta, eta) * scale
    }
}

const FD_REL_STEP: f64 = 1e-6;

fn fd_partial_theta<M: UpdateMap + ?Sized>(map: &M, stream: &LossStream, t: usize, theta: &ParamVector, eta: f64, v: &ParamVector) -> ParamVector {
    let vn = v.norm();
    if vn == 0.0 {
        return ParamVector::zeros(v.len());
    }
    let eps = FD_REL_STEP * (1.0 + theta.norm()) / vn;
    let plus = map.apply(stream, t, &(theta + v * eps), eta);
    let minus = map.apply(stream, t, &(theta - v * eps), eta);
    (plus - minus) / (2.0 * eps)
}

fn fd_partial_eta<M: UpdateMap + ?Sized>(map: &M, stream: &LossStream, t: usize, theta: &ParamVector, eta: f64) -> ParamVector {
    let eps = FD_REL_STEP * eta.abs().max(f64::MIN_POSITIVE.sqrt());
    let plus = map.apply(stream, t, theta, eta + eps);
    let minus = map.apply(stream, t, theta, eta - eps);
    (plus - minus) / (2.0 * eps)
}

/// Scheduled SG as an update map, with exact partials
/// `∂_θF·v = v + (η/f)∂²ℓ·v` and `∂_ηF = ∂ℓ/f`.
#[derive(Debug, Clone, Default)]
pub struct SgMap {
    pub schedule: RateSchedule,
}

impl UpdateMap for SgMap {
    fn apply(&self, stream: &LossStream, t: usize, theta: &ParamVector, eta: f64) -> ParamVector {
        let g = stream.grad_unchecked(t, theta);
        ascend(theta, &g, eta / self.schedule.eval(t))
    }

    fn partial_theta(&self, stream: &LossStream, t: usize, theta: &ParamVector, eta: f64, v: &ParamVector) -> ParamVector {
        let hv = stream.hessian_vec_unchecked(t, theta, v);
        ascend(v, &hv, eta / self.schedule.eval(t))
    }

    fn partial_eta(&self, stream: &LossStream, t: usize, theta: &ParamVector, _eta: f64) -> ParamVector {
        stream.grad_unchecked(t, theta) / self.schedule.eval(t)
    }

    fn partial_eta_scaled(&self, stream: &LossStream, t: usize, theta: &ParamVector, _eta: f64, scale: f64) -> ParamVector {
        stream.grad_unchecked(t, theta) * (scale / self.schedule.eval(t))
    }
}

/// Forces the finite-difference partials of the wrapped map.
#[derive(Debug, Clone, Default)]
pub struct FdPartials<M>(pub M);

impl<M: UpdateMap> UpdateMap for FdPartials<M> {
    fn apply(&self, stream: &LossStream, t: usize, theta: &ParamVector, eta: f64) -> ParamVector {
        self.0.apply(stream, t, theta, eta)
    }
}

/// Coordinate on which the hyper-ascent operates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HyperSpace {
    /// Ascent on `log η`; `∂η/∂e = η`.
    #[default]
    Log,
    /// Ascent on `η`; `∂η/∂e = 1`.
    Linear,
}

/// Step size of the hyper-ascent.
#[derive(Debug, Clone, PartialEq)]
pub enum HyperRate {
    Constant(f64),
    /// `1/μ_t` for the given schedule.
    Inverse(RateSchedule),
}

impl HyperRate {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Self::Constant(alpha) => *alpha,
            Self::Inverse(mu) => 1.0 / mu.eval(t),
        }
    }
}

impl Default for HyperRate {
    fn default() -> Self {
        Self::Inverse(RateSchedule::SqrtLog)
    }
}

/// GEN/SG state. `hyper` is `log η` or `η` depending on [`HyperSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenState {
    pub theta: ParamVector,
    pub hyper: f64,
    pub h: ParamVector,
    pub t: usize,
    pub diverged_at: Option<usize>,
}

impl GenState {
    pub fn new(theta0: ParamVector, eta0: f64, space: HyperSpace) -> Result<Self> {
        check_initial_eta(eta0)?;
        let hyper = match space {
            HyperSpace::Log => eta0.ln(),
            HyperSpace::Linear => eta0,
        };
        let dim = theta0.len();
        Ok(Self { theta: theta0, hyper, h: ParamVector::zeros(dim), t: 0, diverged_at: None })
    }

    pub fn eta(&self, space: HyperSpace) -> f64 {
        match space {
            HyperSpace::Log => self.hyper.exp(),
            HyperSpace::Linear => self.hyper,
        }
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// One GEN/SG iteration:
/// `e' = e + α_t·⟨∂ℓ_t(θ), h⟩`, `h' = ∂_θF(θ, η')·h + ∂_ηF(θ, η')·∂η'/∂e`,
/// `θ' = F(θ, η')`.
///
/// The partials are evaluated at the new step size `η'`, the one that
/// actually produces `θ'`.
pub fn gensg_step<M: UpdateMap + ?Sized>(
    state: &GenState,
    map: &M,
    stream: &LossStream,
    rate: &HyperRate,
    space: HyperSpace,
) -> Result<GenState> {
    if state.diverged() {
        return Ok(state.clone());
    }
    let t = state.t;
    check_state(stream, t, &state.theta, &state.h)?;
    let g = stream.grad_unchecked(t, &state.theta);
    let lambda = g.dot(&state.h);
    let hyper = state.hyper + rate.at(t) * lambda;
    let next = GenState { hyper, ..state.clone() };
    let eta = next.eta(space);
    let direction = match space {
        HyperSpace::Log => eta,
        HyperSpace::Linear => 1.0,
    };
    let h = map.partial_theta(stream, t, &state.theta, eta, &state.h) + map.partial_eta_scaled(stream, t, &state.theta, eta, direction);
    let theta = map.apply(stream, t, &state.theta, eta);
    if !(hyper.is_finite() && eta.is_finite() && finite(&h) && finite(&theta)) {
        return Ok(GenState { diverged_at: Some(t), ..state.clone() });
    }
    Ok(GenState { theta, hyper, h, t: t + 1, diverged_at: None })
}
