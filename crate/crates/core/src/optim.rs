//! Base optimizers with a fixed step size: scheduled SG and online SVRG.
//!
//! Both are pure state transitions. A step that would produce a non-finite
//! value leaves the state untouched and records the divergence time instead;
//! every later step is a no-op.

use crate::error::{LlrError, Result};
use crate::kernel::{ascend, finite};
use crate::models::{LossStream, ParamVector};
use crate::schedules::RateSchedule;

fn check_step_size(eta: f64) -> Result<()> {
    if eta.is_finite() && eta >= 0.0 {
        Ok(())
    } else {
        Err(LlrError::InvalidParameter(format!("step size must be finite and non-negative, got {eta}")))
    }
}

/// State of stochastic gradient ascent `θ_{t+1} = θ_t + (η/f(t))·∂ℓ_t(θ_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgState {
    pub theta: ParamVector,
    pub eta: f64,
    pub t: usize,
    pub diverged_at: Option<usize>,
}

impl SgState {
    pub fn new(theta0: ParamVector, eta: f64) -> Result<Self> {
        check_step_size(eta)?;
        Ok(Self { theta: theta0, eta, t: 0, diverged_at: None })
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

pub fn sg_step(state: &SgState, stream: &LossStream, schedule: &RateSchedule) -> Result<SgState> {
    if state.diverged() {
        return Ok(state.clone());
    }
    let t = state.t;
    let g = stream.grad(t, &state.theta)?;
    let theta = ascend(&state.theta, &g, state.eta / schedule.eval(t));
    if !finite(&theta) {
        return Ok(SgState { diverged_at: Some(t), ..state.clone() });
    }
    Ok(SgState { theta, eta: state.eta, t: t + 1, diverged_at: None })
}

/// State of online SVRG.
///
/// `base_sum` holds `Σ_{s<t} ∂ℓ_s(θᵇ)`. The base point starts at the origin
/// and is never moved unless `refresh_every` is set, in which case it jumps
/// to the current iterate every `k` steps and `base_sum` is rebuilt by replay.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrgState {
    pub theta: ParamVector,
    pub base: ParamVector,
    pub base_sum: ParamVector,
    pub eta: f64,
    pub t: usize,
    pub refresh_every: Option<usize>,
    pub diverged_at: Option<usize>,
}

impl SvrgState {
    pub fn new(theta0: ParamVector, eta: f64) -> Result<Self> {
        check_step_size(eta)?;
        let dim = theta0.len();
        Ok(Self {
            theta: theta0,
            base: ParamVector::zeros(dim),
            base_sum: ParamVector::zeros(dim),
            eta,
            t: 0,
            refresh_every: None,
            diverged_at: None,
        })
    }

    pub fn with_refresh(mut self, every: usize) -> Result<Self> {
        if every == 0 {
            return Err(LlrError::InvalidParameter("refresh period must be at least 1".into()));
        }
        self.refresh_every = Some(every);
        Ok(self)
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// The variance-reduced direction `∂ℓ_t(θ) − ∂ℓ_t(θᵇ) + sᵇ_{t+1}/(t+1)`,
/// returned with the updated base sum.
pub(crate) fn svrg_direction(
    stream: &LossStream,
    t: usize,
    at: &ParamVector,
    base: &ParamVector,
    base_sum: &ParamVector,
) -> (ParamVector, ParamVector) {
    let g_base = stream.grad_unchecked(t, base);
    let sum = base_sum + &g_base;
    let dir = stream.grad_unchecked(t, at) - g_base + &sum / (t + 1) as f64;
    (dir, sum)
}

/// `Σ_{s≤t} ∂ℓ_s(base)`, rebuilt from scratch.
pub(crate) fn base_gradient_sum(stream: &LossStream, base: &ParamVector, t: usize) -> ParamVector {
    (0..=t).fold(ParamVector::zeros(base.len()), |acc, s| acc + stream.grad_unchecked(s, base))
}

pub fn svrg_step(state: &SvrgState, stream: &LossStream) -> Result<SvrgState> {
    if state.diverged() {
        return Ok(state.clone());
    }
    let t = state.t;
    stream.check_time(t)?;
    stream.check_dim(&state.theta)?;
    stream.check_dim(&state.base)?;
    let (dir, mut base_sum) = svrg_direction(stream, t, &state.theta, &state.base, &state.base_sum);
    let theta = ascend(&state.theta, &dir, state.eta);
    if !(finite(&theta) && finite(&base_sum)) {
        return Ok(SvrgState { diverged_at: Some(t), ..state.clone() });
    }
    let mut base = state.base.clone();
    if let Some(every) = state.refresh_every {
        if (t + 1).is_multiple_of(every) {
            base = theta.clone();
            base_sum = base_gradient_sum(stream, &base, t);
        }
    }
    Ok(SvrgState { theta, base, base_sum, t: t + 1, ..state.clone() })
}
