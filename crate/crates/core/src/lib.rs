//! Laboratory for two-player general-sum repeated stochastic games.
//!
//! The crate models episodic stochastic games, computes joint-plan target
//! solutions and zero-sum security profiles, drives a set of leader,
//! follower and preventative expert strategies with multi-armed-bandit
//! expert algorithms, and evaluates agents in round-robin tournaments.
//!
//! All numeric machinery is generic over the scalar type (`f32`/`f64`) via
//! [`scalar::Real`]; the concrete aliases below fix `f64`, which is what the
//! CLI and the bundled games use.

pub mod bandit;
pub mod error;
pub mod experts;
pub mod games;
pub mod harness;
pub mod opponents;
pub mod planning;
pub mod rsg;
pub mod scalar;

pub use error::{GabeError, Result};
pub use scalar::{real, Real};

/// Working scalar of the bundled games and the CLI.
pub type Payoff = f64;

/// `f64` microgrid game.
pub type Microgrid = games::MicrogridGame<Payoff>;
/// `f64` maze dilemma game.
pub type GridPd = games::GridPdGame<Payoff>;
/// `f64` block selection game.
pub type Blocks = games::BlockGame<Payoff>;
