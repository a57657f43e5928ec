//! The evaluation games, plus a general tabular game for fixtures.

mod blocks;
mod gridpd;
mod microgrid;
mod tabular;

pub use blocks::{
    block_payoff, block_step, default_blocks_json, search_block_sets, spne_payoffs, Block,
    BlockConfig, BlockGame, BlockSetCandidate, BlockState, Color, SearchLimits, Shape,
};
pub use gridpd::{
    default_gridpd_json, gridpd_step, shortest_path, GridPdConfig, GridPdGame, GridPdState, Move,
};
pub use microgrid::{
    default_microgrid_json, microgrid_step, MicrogridConfig, MicrogridGame, MicrogridState, Task,
    TaskAttempt,
};
pub use tabular::{stage_game, TabularRsg};

use crate::error::{GabeError, Result};
use crate::rsg::Rsg;
use crate::scalar::Real;
use std::sync::Arc;

/// Builds one of the named evaluation games from its JSON config text.
///
/// `name` is one of `microgrid`, `gridpd`, `blocks`.
pub fn game_from_config<R: Real>(name: &str, json: &str) -> Result<Arc<dyn Rsg<R>>> {
    match name {
        "microgrid" => Ok(Arc::new(MicrogridGame::from_json(json)?)),
        "gridpd" => Ok(Arc::new(GridPdGame::from_json(json)?)),
        "blocks" => Ok(Arc::new(BlockGame::from_json(json)?)),
        other => Err(GabeError::Config(format!(
            "unknown game `{other}`; known games: microgrid, gridpd, blocks"
        ))),
    }
}

/// Names of the bundled evaluation games.
pub const GAME_NAMES: [&str; 3] = ["microgrid", "gridpd", "blocks"];
