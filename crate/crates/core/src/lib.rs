//! Release-phase core of robust prehensile throwing.
//!
//! - [`ballistics`]: projectile flowmap, its gradient and backward reachable
//!   tube membership.
//! - [`tube`]: the pullback tube acceleration program, solved exactly by
//!   [`qp`].
//! - [`sim`]: closed-loop release-window simulation with actuation noise.
//! - [`experiments`]: condition mesh, batch Monte-Carlo runs and statistics.
//! - [`latency`]: timing harness for the tube program.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ballistics;
pub mod bounds;
pub mod error;
pub mod experiments;
pub mod latency;
pub mod qp;
pub mod sim;
pub mod tube;

pub use ballistics::{Ballistics, FlightState, TargetSpec};
pub use bounds::{Box2, Interval};
pub use error::{Error, Result};
pub use sim::{Controller, ReleaseTrace, SimConfig};
pub use tube::{EeMeasurement, TubeBounds, TubeProblem, TubeSolution, TubeSolver};
