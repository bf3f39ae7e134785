//! Aspiration-based perturbed learning automata (APLA) on finite
//! strategic-form games.
//!
//! - [`game`]: games, best responses, pure Nash equilibria, coordination and
//!   payoff-dominance checks.
//! - [`dynamics`]: the per-step learning rule and the step-size check.
//! - [`simulate`]: long runs, neighbourhood occupation, parameter sweeps.
//! - [`chain`]: empirical transition matrix between equilibrium states and
//!   its stationary distribution.
//! - [`cli`]: the `apla` command-line tool.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod rng;
pub mod simulate;

pub use chain::{EmpiricalChain, StationaryResult};
pub use dynamics::{AgentState, SimConfig, SystemState};
pub use error::{Error, Result};
pub use game::{Game, GameClassReport, JointAction};
pub use simulate::{OccupationStats, PureStrategyState, Trajectory};
