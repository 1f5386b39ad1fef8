//! Online step-size adaptation for stochastic gradient algorithms.
//!
//! The crate provides base optimizers (scheduled SG and online SVRG), variants
//! that learn their own step size by gradient ascent on `log η` along the
//! realized trajectory, exact derivative oracles used to certify those
//! approximations, and an experiment harness that writes CSV traces.
//!
//! ```
//! use llr::adaptive::{sgag_step, LlrSchedules, LlrState, TangentUpdate};
//! use llr::models::{LossStream, ModelKind};
//!
//! let stream = LossStream::generate(ModelKind::gaussian(), 1, 200).unwrap();
//! let mut state = LlrState::new(ModelKind::gaussian().default_theta0(), 1e-3).unwrap();
//! let schedules = LlrSchedules::default();
//! for _ in 0..200 {
//!     state = sgag_step(&state, &stream, &schedules, TangentUpdate::default()).unwrap();
//! }
//! assert!(state.eta() > 1e-3);
//! ```

pub mod adaptive;
pub mod error;
pub mod harness;
mod kernel;
pub mod models;
pub mod optim;
pub mod oracles;
pub mod schedules;

pub use error::{LlrError, Result};
pub use models::{LossStream, ModelKind, ParamVector};
pub use schedules::RateSchedule;
