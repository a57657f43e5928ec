//! Prisoner's dilemma in maze form.
//!
//! Each player tries to walk to the other player's start cell. Every
//! attempted directional move costs one point (also when it bounces off a
//! wall); reaching the associate's start pays the score reward once. The
//! round ends when both players have scored.

use serde::Deserialize;

use crate::error::{GabeError, Result};
use crate::rsg::{ActionIndex, JointAction, Player, RewardPair, Rsg, StateId};
use crate::scalar::{real, Real};

/// One grid move. `Stay` is free; directional moves cost `move_cost`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::Up, Move::Down, Move::Left, Move::Right, Move::Stay];

    pub fn from_index(a: ActionIndex) -> Move {
        Move::ALL[a]
    }

    fn delta(self) -> (i16, i16) {
        match self {
            Move::Up => (0, -1),
            Move::Down => (0, 1),
            Move::Left => (-1, 0),
            Move::Right => (1, 0),
            Move::Stay => (0, 0),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Move::Up => "up",
            Move::Down => "down",
            Move::Left => "left",
            Move::Right => "right",
            Move::Stay => "stay",
        }
    }
}

type Cell = (u8, u8);

#[derive(Debug, Clone)]
pub struct GridPdConfig<R> {
    /// `floor[y][x]` is true for walkable cells.
    pub floor: Vec<Vec<bool>>,
    pub start_p1: Cell,
    pub start_p2: Cell,
    pub score_reward: R,
    pub move_cost: R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPdState {
    pub pos_p1: Cell,
    pub pos_p2: Cell,
    pub scored_p1: bool,
    pub scored_p2: bool,
}

pub struct GridPdGame<R> {
    config: GridPdConfig<R>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridPdJson {
    maze: Vec<String>,
    #[serde(default = "default_score_reward")]
    score_reward: f64,
    #[serde(default = "default_move_cost")]
    move_cost: f64,
}

fn default_score_reward() -> f64 {
    30.0
}

fn default_move_cost() -> f64 {
    1.0
}

impl<R: Real> GridPdGame<R> {
    pub fn from_json(json: &str) -> Result<Self> {
        let raw: GridPdJson =
            serde_json::from_str(json).map_err(|e| GabeError::Config(format!("gridpd config: {e}")))?;
        Self::from_maze(&raw.maze, real(raw.score_reward), real(raw.move_cost))
    }

    /// Parses a maze of `#` (wall), `.` (floor), `1` and `2` (start cells).
    pub fn from_maze(maze: &[String], score_reward: R, move_cost: R) -> Result<Self> {
        if maze.is_empty() {
            return Err(GabeError::Config("maze: empty".into()));
        }
        let width = maze[0].len();
        if maze.iter().any(|row| row.len() != width) {
            return Err(GabeError::Config("maze: rows differ in length".into()));
        }
        if width > 250 || maze.len() > 250 {
            return Err(GabeError::Config("maze: larger than 250x250".into()));
        }
        let mut floor = vec![vec![false; width]; maze.len()];
        let mut start_p1 = None;
        let mut start_p2 = None;
        for (y, row) in maze.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                match c {
                    '#' => {}
                    '.' => floor[y][x] = true,
                    '1' => {
                        floor[y][x] = true;
                        if start_p1.replace((x as u8, y as u8)).is_some() {
                            return Err(GabeError::Config("maze: multiple `1` cells".into()));
                        }
                    }
                    '2' => {
                        floor[y][x] = true;
                        if start_p2.replace((x as u8, y as u8)).is_some() {
                            return Err(GabeError::Config("maze: multiple `2` cells".into()));
                        }
                    }
                    other => {
                        return Err(GabeError::Config(format!(
                            "maze: unexpected character `{other}` at row {y}"
                        )))
                    }
                }
            }
        }
        let start_p1 =
            start_p1.ok_or_else(|| GabeError::Config("maze: missing `1` start cell".into()))?;
        let start_p2 =
            start_p2.ok_or_else(|| GabeError::Config("maze: missing `2` start cell".into()))?;
        let config = GridPdConfig {
            floor,
            start_p1,
            start_p2,
            score_reward,
            move_cost,
        };
        if shortest_path(&config, start_p1, start_p2).is_none() {
            return Err(GabeError::Config(
                "maze: start cells are not mutually reachable".into(),
            ));
        }
        Ok(GridPdGame { config })
    }

    pub fn config(&self) -> &GridPdConfig<R> {
        &self.config
    }

    pub fn initial_state(&self) -> GridPdState {
        GridPdState {
            pos_p1: self.config.start_p1,
            pos_p2: self.config.start_p2,
            scored_p1: false,
            scored_p2: false,
        }
    }

    fn encode(&self, st: &GridPdState) -> StateId {
        StateId::new(vec![
            st.pos_p1.0,
            st.pos_p1.1,
            st.pos_p2.0,
            st.pos_p2.1,
            st.scored_p1 as u8 | ((st.scored_p2 as u8) << 1),
        ])
    }

    pub fn decode(&self, id: &StateId) -> GridPdState {
        let b = id.bytes();
        GridPdState {
            pos_p1: (b[0], b[1]),
            pos_p2: (b[2], b[3]),
            scored_p1: b[4] & 1 != 0,
            scored_p2: b[4] & 2 != 0,
        }
    }
}

fn walkable<R>(config: &GridPdConfig<R>, x: i16, y: i16) -> bool {
    y >= 0
        && (y as usize) < config.floor.len()
        && x >= 0
        && (x as usize) < config.floor[0].len()
        && config.floor[y as usize][x as usize]
}

/// Breadth-first shortest path length between two cells, if connected.
pub fn shortest_path<R>(config: &GridPdConfig<R>, from: Cell, to: Cell) -> Option<usize> {
    use std::collections::VecDeque;
    let mut dist = vec![vec![usize::MAX; config.floor[0].len()]; config.floor.len()];
    dist[from.1 as usize][from.0 as usize] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some((x, y)) = queue.pop_front() {
        let d = dist[y as usize][x as usize];
        if (x, y) == to {
            return Some(d);
        }
        for mv in [Move::Up, Move::Down, Move::Left, Move::Right] {
            let (dx, dy) = mv.delta();
            let (nx, ny) = (x as i16 + dx, y as i16 + dy);
            if walkable(config, nx, ny) && dist[ny as usize][nx as usize] == usize::MAX {
                dist[ny as usize][nx as usize] = d + 1;
                queue.push_back((nx as u8, ny as u8));
            }
        }
    }
    None
}

/// Advances the maze world by one joint move.
///
/// Each attempted directional move costs `move_cost` whether or not it
/// succeeds; a blocked move leaves the position unchanged. Players may share
/// a cell. A player first entering the associate's start cell earns
/// `score_reward` and is marked scored.
pub fn gridpd_step<R: Real>(
    config: &GridPdConfig<R>,
    state: &GridPdState,
    moves: (Move, Move),
) -> (GridPdState, RewardPair<R>) {
    let advance = |pos: Cell, mv: Move| -> (Cell, R) {
        match mv {
            Move::Stay => (pos, R::zero()),
            dir => {
                let (dx, dy) = dir.delta();
                let (nx, ny) = (pos.0 as i16 + dx, pos.1 as i16 + dy);
                let next = if walkable(config, nx, ny) {
                    (nx as u8, ny as u8)
                } else {
                    pos
                };
                (next, -config.move_cost)
            }
        }
    };
    let (next1, mut r1) = advance(state.pos_p1, moves.0);
    let (next2, mut r2) = advance(state.pos_p2, moves.1);

    let mut scored1 = state.scored_p1;
    if !scored1 && next1 == config.start_p2 && next1 != state.pos_p1 {
        scored1 = true;
        r1 = r1 + config.score_reward;
    }
    let mut scored2 = state.scored_p2;
    if !scored2 && next2 == config.start_p1 && next2 != state.pos_p2 {
        scored2 = true;
        r2 = r2 + config.score_reward;
    }
    (
        GridPdState {
            pos_p1: next1,
            pos_p2: next2,
            scored_p1: scored1,
            scored_p2: scored2,
        },
        RewardPair::new(r1, r2),
    )
}

impl<R: Real> Rsg<R> for GridPdGame<R> {
    fn name(&self) -> &str {
        "gridpd"
    }

    fn start_state(&self) -> StateId {
        self.encode(&self.initial_state())
    }

    fn is_goal(&self, state: &StateId) -> bool {
        state.bytes()[4] == 3
    }

    fn num_actions(&self, state: &StateId, _player: Player) -> usize {
        if self.is_goal(state) {
            1
        } else {
            5
        }
    }

    fn transition(&self, state: &StateId, action: JointAction) -> Vec<(StateId, R)> {
        if self.is_goal(state) {
            return vec![(state.clone(), R::one())];
        }
        let st = self.decode(state);
        let (next, _) = gridpd_step(
            &self.config,
            &st,
            (Move::from_index(action.p1), Move::from_index(action.p2)),
        );
        vec![(self.encode(&next), R::one())]
    }

    fn rewards(&self, state: &StateId, action: JointAction) -> RewardPair<R> {
        if self.is_goal(state) {
            return RewardPair::zero();
        }
        let st = self.decode(state);
        let (_, rewards) = gridpd_step(
            &self.config,
            &st,
            (Move::from_index(action.p1), Move::from_index(action.p2)),
        );
        rewards
    }

    fn describe_action(&self, state: &StateId, _player: Player, action: ActionIndex) -> String {
        if self.is_goal(state) {
            String::new()
        } else {
            Move::from_index(action).label().to_string()
        }
    }

    fn describe_state(&self, state: &StateId) -> String {
        let st = self.decode(state);
        format!(
            "p1@({},{}){} p2@({},{}){}",
            st.pos_p1.0,
            st.pos_p1.1,
            if st.scored_p1 { "*" } else { "" },
            st.pos_p2.0,
            st.pos_p2.1,
            if st.scored_p2 { "*" } else { "" },
        )
    }
}

/// The bundled default maze: two alcoves joined by a shared corridor.
pub fn default_gridpd_json() -> &'static str {
    include_str!("../../data/gridpd.json")
}
