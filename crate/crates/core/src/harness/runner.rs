use crate::adaptive::{
    gensg_step, sgag_step, sgsg_step, svrgag_step, FdPartials, GenState, HessianMode, HyperRate, HyperSpace, LlrSchedules, LlrState,
    Memory, SgMap, SvrgLlrState, TangentUpdate, UpdateMap,
};
use crate::error::Result;
use crate::models::{LossStream, ParamVector};
use crate::optim::{sg_step, svrg_step, SgState, SvrgState};
use crate::oracles::Trajectory;

use super::regret::Baseline;
use super::trace::TraceRecord;
use super::{Algorithm, RunSettings};

/// A running optimizer, advanced one sample at a time.
pub trait OnlineRun: Send {
    /// Number of completed iterations.
    fn t(&self) -> usize;
    fn theta(&self) -> &ParamVector;
    /// Step size held at the current time.
    fn eta(&self) -> f64;
    fn diverged_at(&self) -> Option<usize>;
    /// Consume sample `t()`. A no-op once diverged.
    fn step(&mut self, stream: &LossStream) -> Result<()>;
}

struct SgRun {
    state: SgState,
    settings: RunSettings,
}

impl OnlineRun for SgRun {
    fn t(&self) -> usize {
        self.state.t
    }
    fn theta(&self) -> &ParamVector {
        &self.state.theta
    }
    fn eta(&self) -> f64 {
        self.state.eta
    }
    fn diverged_at(&self) -> Option<usize> {
        self.state.diverged_at
    }
    fn step(&mut self, stream: &LossStream) -> Result<()> {
        self.state = sg_step(&self.state, stream, &self.settings.schedules.rate)?;
        Ok(())
    }
}

struct SvrgRun {
    state: SvrgState,
}

impl OnlineRun for SvrgRun {
    fn t(&self) -> usize {
        self.state.t
    }
    fn theta(&self) -> &ParamVector {
        &self.state.theta
    }
    fn eta(&self) -> f64 {
        self.state.eta
    }
    fn diverged_at(&self) -> Option<usize> {
        self.state.diverged_at
    }
    fn step(&mut self, stream: &LossStream) -> Result<()> {
        self.state = svrg_step(&self.state, stream)?;
        Ok(())
    }
}

type LlrStepFn = fn(&LlrState, &LossStream, &LlrSchedules, TangentUpdate) -> Result<LlrState>;

struct LlrRun {
    state: LlrState,
    schedules: LlrSchedules,
    strategy: TangentUpdate,
    step_fn: LlrStepFn,
}

impl OnlineRun for LlrRun {
    fn t(&self) -> usize {
        self.state.t
    }
    fn theta(&self) -> &ParamVector {
        &self.state.theta
    }
    fn eta(&self) -> f64 {
        self.state.eta()
    }
    fn diverged_at(&self) -> Option<usize> {
        self.state.diverged_at
    }
    fn step(&mut self, stream: &LossStream) -> Result<()> {
        self.state = (self.step_fn)(&self.state, stream, &self.schedules, self.strategy)?;
        Ok(())
    }
}

struct SvrgLlrRun {
    state: SvrgLlrState,
    schedules: LlrSchedules,
    strategy: TangentUpdate,
}

impl OnlineRun for SvrgLlrRun {
    fn t(&self) -> usize {
        self.state.t
    }
    fn theta(&self) -> &ParamVector {
        &self.state.theta
    }
    fn eta(&self) -> f64 {
        self.state.eta
    }
    fn diverged_at(&self) -> Option<usize> {
        self.state.diverged_at
    }
    fn step(&mut self, stream: &LossStream) -> Result<()> {
        self.state = svrgag_step(&self.state, stream, &self.schedules, self.strategy)?;
        Ok(())
    }
}

struct GenRun {
    state: GenState,
    map: Box<dyn UpdateMap + Send>,
    rate: HyperRate,
}

impl OnlineRun for GenRun {
    fn t(&self) -> usize {
        self.state.t
    }
    fn theta(&self) -> &ParamVector {
        &self.state.theta
    }
    fn eta(&self) -> f64 {
        self.state.eta(HyperSpace::Log)
    }
    fn diverged_at(&self) -> Option<usize> {
        self.state.diverged_at
    }
    fn step(&mut self, stream: &LossStream) -> Result<()> {
        self.state = gensg_step(&self.state, self.map.as_ref(), stream, &self.rate, HyperSpace::Log)?;
        Ok(())
    }
}

/// A fresh run of `algorithm` from `(theta0, eta0)`.
///
/// GEN/SG wraps scheduled SG; its partials are exact in exact-Hessian mode
/// and finite differences otherwise.
pub fn start(algorithm: Algorithm, theta0: ParamVector, eta0: f64, settings: &RunSettings) -> Result<Box<dyn OnlineRun>> {
    let plain = TangentUpdate::Plain(settings.hessian);
    let schedules = settings.schedules.clone();
    let run: Box<dyn OnlineRun> = match algorithm {
        Algorithm::Sg => Box::new(SgRun { state: SgState::new(theta0, eta0)?, settings: settings.clone() }),
        Algorithm::Svrg => {
            let mut state = SvrgState::new(theta0, eta0)?;
            if let Some(k) = settings.svrg_refresh {
                state = state.with_refresh(k)?;
            }
            Box::new(SvrgRun { state })
        }
        Algorithm::SgSg => Box::new(LlrRun { state: LlrState::new(theta0, eta0)?, schedules, strategy: plain, step_fn: sgsg_step }),
        Algorithm::SgAg => Box::new(LlrRun { state: LlrState::new(theta0, eta0)?, schedules, strategy: plain, step_fn: sgag_step }),
        Algorithm::Memory => {
            let strategy = TangentUpdate::Discounted { memory: Memory::from_tau(settings.tau)?, hessian: settings.hessian };
            Box::new(LlrRun { state: LlrState::new(theta0, eta0)?, schedules, strategy, step_fn: sgag_step })
        }
        Algorithm::SvrgAg => Box::new(SvrgLlrRun { state: SvrgLlrState::new(theta0, eta0)?, schedules, strategy: plain }),
        Algorithm::GenSg => {
            let map = SgMap { schedule: schedules.rate.clone() };
            let map: Box<dyn UpdateMap + Send> = match settings.hessian {
                HessianMode::Exact => Box::new(map),
                HessianMode::Free => Box::new(FdPartials(map)),
            };
            Box::new(GenRun { state: GenState::new(theta0, eta0, HyperSpace::Log)?, map, rate: HyperRate::Inverse(schedules.hyper) })
        }
    };
    Ok(run)
}

/// One run's output: CSV rows and the realized trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub eta0: f64,
    pub records: Vec<TraceRecord>,
    /// `θ_t, η_t` for every non-diverged row.
    pub trajectory: Trajectory,
    pub diverged_at: Option<usize>,
}

impl Trace {
    /// `R_{T−1}`, or `+∞` for a run that diverged.
    pub fn final_regret(&self) -> f64 {
        match (self.diverged_at, self.records.last().and_then(|r| r.regret_diff)) {
            (None, Some(r)) => r,
            _ => f64::INFINITY,
        }
    }

    pub fn final_theta(&self) -> Option<&ParamVector> {
        self.trajectory.thetas.last()
    }
}

/// Runs `algorithm` over the whole stream and records one row per sample.
///
/// Row `t` holds `θ_t`, `η_t`, `ℓ_t(θ_t)` and the regret difference up to
/// and including `t`. Rows from the divergence time on keep only the
/// baseline column.
pub fn simulate(
    stream: &LossStream,
    baseline: &Baseline,
    algorithm: Algorithm,
    eta0: f64,
    theta0: ParamVector,
    settings: &RunSettings,
) -> Result<Trace> {
    stream.check_dim(&theta0)?;
    let horizon = stream.horizon();
    let mut run = start(algorithm, theta0, eta0, settings)?;
    let mut records = Vec::with_capacity(horizon);
    let mut trajectory = Trajectory::default();
    let mut regret = 0.0;
    for t in 0..horizon {
        let ml_loss = baseline.losses[t];
        if run.diverged_at().is_some() {
            records.push(TraceRecord { t, theta: None, eta: None, loss: None, ml_loss, regret_diff: None, diverged: true });
            continue;
        }
        let theta = run.theta();
        let loss = stream.loss(t, theta)?;
        regret += ml_loss - loss;
        records.push(TraceRecord {
            t,
            theta: Some(stream.report_theta(theta)),
            eta: Some(run.eta()),
            loss: Some(loss),
            ml_loss,
            regret_diff: Some(regret),
            diverged: false,
        });
        trajectory.push(theta.clone(), run.eta());
        run.step(stream)?;
    }
    Ok(Trace { algorithm, eta0, records, trajectory, diverged_at: run.diverged_at() })
}
