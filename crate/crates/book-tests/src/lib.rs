//! Compiles every code listing of the guide in `book/` as a doctest, so the
//! book cannot drift from the library. One module per chapter keeps failures
//! attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/schedules.md")]
pub mod schedules {}
#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}
#[doc = include_str!("../../../book/src/optimizers.md")]
pub mod optimizers {}
#[doc = include_str!("../../../book/src/adaptive.md")]
pub mod adaptive {}
#[doc = include_str!("../../../book/src/generic.md")]
pub mod generic {}
#[doc = include_str!("../../../book/src/oracles.md")]
pub mod oracles {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("../../../book/src/quadratic.md")]
pub mod quadratic {}
