//! Turn-taking block selection game.
//!
//! Players alternate picking blocks until each holds `picks_per_player`. A
//! hand forming a valid set (all one color, all one shape, or pairwise
//! distinct in both color and shape) scores the sum of its numbers;
//! any other hand scores the sum divided by four.

use std::collections::HashMap;

use serde::Deserialize;

use crate::error::{GabeError, Result};
use crate::rsg::{ActionIndex, JointAction, Player, RewardPair, Rsg, StateId};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape {
    Square,
    Triangle,
    Circle,
}

impl Shape {
    fn label(self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::Triangle => "triangle",
            Shape::Circle => "circle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    Red,
    Blue,
    Yellow,
}

impl Color {
    fn label(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Yellow => "yellow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block<R> {
    pub shape: Shape,
    pub color: Color,
    pub number: R,
}

#[derive(Debug, Clone)]
pub struct BlockConfig<R> {
    pub blocks: Vec<Block<R>>,
    pub picks_per_player: usize,
    /// Fixed for a whole match: the oldest player always goes first.
    pub first_mover: Player,
}

/// Who holds each block: 0 free, 1 player one, 2 player two.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockState {
    pub taken: Vec<u8>,
}

impl BlockState {
    pub fn hand(&self, player: Player) -> Vec<usize> {
        let owner = player.index() as u8 + 1;
        self.taken
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == owner)
            .map(|(i, _)| i)
            .collect()
    }

    fn picks_made(&self) -> usize {
        self.taken.iter().filter(|&&t| t != 0).count()
    }
}

pub struct BlockGame<R> {
    config: BlockConfig<R>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockJson {
    shape: String,
    color: String,
    number: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlocksJson {
    blocks: Vec<BlockJson>,
    #[serde(default = "default_picks")]
    picks_per_player: usize,
    #[serde(default = "default_first_mover")]
    first_mover: String,
}

fn default_picks() -> usize {
    3
}

fn default_first_mover() -> String {
    "p1".into()
}

impl<R: Real> BlockGame<R> {
    pub fn new(config: BlockConfig<R>) -> Result<Self> {
        if config.blocks.len() < 2 * config.picks_per_player {
            return Err(GabeError::Config(format!(
                "blocks: need at least {} blocks for {} picks per player",
                2 * config.picks_per_player,
                config.picks_per_player
            )));
        }
        if config.blocks.len() > 32 {
            return Err(GabeError::Config("blocks: at most 32 blocks".into()));
        }
        if config.blocks.iter().any(|b| b.number <= R::zero()) {
            return Err(GabeError::Config("blocks: numbers must be positive".into()));
        }
        Ok(BlockGame { config })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let raw: BlocksJson =
            serde_json::from_str(json).map_err(|e| GabeError::Config(format!("blocks config: {e}")))?;
        let blocks = raw
            .blocks
            .into_iter()
            .map(|b| {
                let shape = match b.shape.as_str() {
                    "square" => Shape::Square,
                    "triangle" => Shape::Triangle,
                    "circle" => Shape::Circle,
                    other => {
                        return Err(GabeError::Config(format!(
                            "blocks: unknown shape `{other}`"
                        )))
                    }
                };
                let color = match b.color.as_str() {
                    "red" => Color::Red,
                    "blue" => Color::Blue,
                    "yellow" => Color::Yellow,
                    other => {
                        return Err(GabeError::Config(format!(
                            "blocks: unknown color `{other}`"
                        )))
                    }
                };
                Ok(Block {
                    shape,
                    color,
                    number: real(b.number),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let first_mover = match raw.first_mover.as_str() {
            "p1" => Player::P1,
            "p2" => Player::P2,
            other => {
                return Err(GabeError::Config(format!(
                    "first_mover: expected `p1` or `p2`, got `{other}`"
                )))
            }
        };
        Self::new(BlockConfig {
            blocks,
            picks_per_player: raw.picks_per_player,
            first_mover,
        })
    }

    pub fn config(&self) -> &BlockConfig<R> {
        &self.config
    }

    pub fn initial_state(&self) -> BlockState {
        BlockState {
            taken: vec![0; self.config.blocks.len()],
        }
    }

    /// Whose turn it is; alternation starts at `first_mover`.
    pub fn mover(&self, state: &BlockState) -> Player {
        if state.picks_made() % 2 == 0 {
            self.config.first_mover
        } else {
            self.config.first_mover.other()
        }
    }

    pub fn is_terminal(&self, state: &BlockState) -> bool {
        state.picks_made() >= 2 * self.config.picks_per_player
    }

    fn remaining(&self, state: &BlockState) -> Vec<usize> {
        state
            .taken
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == 0)
            .map(|(i, _)| i)
            .collect()
    }

    fn encode(&self, state: &BlockState) -> StateId {
        StateId::new(state.taken.clone())
    }

    pub fn decode(&self, id: &StateId) -> BlockState {
        BlockState {
            taken: id.bytes().to_vec(),
        }
    }

}

/// Scores a complete hand: a valid set earns the sum of the numbers,
/// anything else a quarter of it.
pub fn block_payoff<R: Real>(hand: &[Block<R>], picks_per_player: usize) -> Result<R> {
    if hand.len() != picks_per_player {
        return Err(GabeError::Precondition(format!(
            "hand has {} blocks, expected {picks_per_player}",
            hand.len()
        )));
    }
    let sum: R = hand.iter().map(|b| b.number).sum();
    if hand_is_valid_set(hand) {
        Ok(sum)
    } else {
        Ok(sum / real::<R>(4.0))
    }
}

fn hand_is_valid_set<R: Copy>(hand: &[Block<R>]) -> bool {
    let same_color = hand.windows(2).all(|w| w[0].color == w[1].color);
    let same_shape = hand.windows(2).all(|w| w[0].shape == w[1].shape);
    let all_distinct = hand.iter().enumerate().all(|(i, a)| {
        hand[i + 1..]
            .iter()
            .all(|b| a.color != b.color && a.shape != b.shape)
    });
    same_color || same_shape || all_distinct
}

/// The mover takes the block at `block_index`; the non-mover waits.
///
/// Intermediate picks score zero; the final pick pays both hands' values.
pub fn block_step<R: Real>(
    config: &BlockConfig<R>,
    state: &BlockState,
    block_index: usize,
) -> Result<(BlockState, RewardPair<R>)> {
    if block_index >= state.taken.len() {
        return Err(GabeError::Precondition(format!(
            "block index {block_index} out of range"
        )));
    }
    if state.taken[block_index] != 0 {
        return Err(GabeError::Precondition(format!(
            "block {block_index} is already taken"
        )));
    }
    let picks = state.picks_made();
    if picks >= 2 * config.picks_per_player {
        return Err(GabeError::Precondition("round already over".into()));
    }
    let mover = if picks % 2 == 0 {
        config.first_mover
    } else {
        config.first_mover.other()
    };
    let mut next = state.clone();
    next.taken[block_index] = mover.index() as u8 + 1;

    if next.picks_made() == 2 * config.picks_per_player {
        let hand = |player: Player| -> Vec<Block<R>> {
            next.hand(player)
                .into_iter()
                .map(|i| config.blocks[i])
                .collect()
        };
        let r1 = block_payoff(&hand(Player::P1), config.picks_per_player)?;
        let r2 = block_payoff(&hand(Player::P2), config.picks_per_player)?;
        Ok((next, RewardPair::new(r1, r2)))
    } else {
        Ok((next, RewardPair::zero()))
    }
}

impl<R: Real> Rsg<R> for BlockGame<R> {
    fn name(&self) -> &str {
        "blocks"
    }

    fn start_state(&self) -> StateId {
        self.encode(&self.initial_state())
    }

    fn is_goal(&self, state: &StateId) -> bool {
        self.is_terminal(&self.decode(state))
    }

    fn num_actions(&self, state: &StateId, player: Player) -> usize {
        let st = self.decode(state);
        if self.is_terminal(&st) {
            return 1;
        }
        if self.mover(&st) == player {
            self.remaining(&st).len()
        } else {
            1
        }
    }

    fn transition(&self, state: &StateId, action: JointAction) -> Vec<(StateId, R)> {
        if self.is_goal(state) {
            return vec![(state.clone(), R::one())];
        }
        let st = self.decode(state);
        let mover = self.mover(&st);
        let pick = self.remaining(&st)[action.of(mover)];
        let (next, _) = block_step(&self.config, &st, pick).expect("engine pick is legal");
        vec![(self.encode(&next), R::one())]
    }

    fn rewards(&self, state: &StateId, action: JointAction) -> RewardPair<R> {
        if self.is_goal(state) {
            return RewardPair::zero();
        }
        let st = self.decode(state);
        let mover = self.mover(&st);
        let pick = self.remaining(&st)[action.of(mover)];
        let (_, rewards) = block_step(&self.config, &st, pick).expect("engine pick is legal");
        rewards
    }

    fn describe_action(&self, state: &StateId, player: Player, action: ActionIndex) -> String {
        let st = self.decode(state);
        if self.is_terminal(&st) || self.mover(&st) != player {
            return String::new();
        }
        let b = self.config.blocks[self.remaining(&st)[action]];
        format!(
            "{}-{}-{}",
            b.shape.label(),
            b.color.label(),
            b.number.to_f64_lossy()
        )
    }

    fn describe_state(&self, state: &StateId) -> String {
        let st = self.decode(state);
        let fmt = |p: Player| -> String {
            st.hand(p)
                .iter()
                .map(|&i| self.config.blocks[i].number.to_f64_lossy().to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!("p1[{}] p2[{}]", fmt(Player::P1), fmt(Player::P2))
    }
}

// --- Subgame-perfect analysis and constraint search -------------------------

/// All payoff vectors attainable under subgame-perfect play, across every
/// tie-breaking of indifferent movers.
///
/// At a mover node, a continuation value `v` of action `a` survives iff each
/// rival action admits some equilibrium continuation the mover likes no
/// better, so the returned set is exact without enumerating strategy
/// combinations.
pub fn spne_payoffs<R: Real>(config: &BlockConfig<R>) -> Vec<(R, R)> {
    fn go<R: Real>(
        config: &BlockConfig<R>,
        state: &BlockState,
        memo: &mut HashMap<Vec<u8>, Vec<(R, R)>>,
    ) -> Vec<(R, R)> {
        if let Some(v) = memo.get(&state.taken) {
            return v.clone();
        }
        let picks = state.picks_made();
        let mover = if picks % 2 == 0 {
            config.first_mover
        } else {
            config.first_mover.other()
        };
        let remaining: Vec<usize> = state
            .taken
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == 0)
            .map(|(i, _)| i)
            .collect();

        let mut child_sets = Vec::new();
        for &pick in &remaining {
            let (next, rewards) = block_step(config, state, pick).expect("legal pick");
            let set = if next.picks_made() == 2 * config.picks_per_player {
                vec![(rewards.p1, rewards.p2)]
            } else {
                go(config, &next, memo)
            };
            child_sets.push(set);
        }
        // The most a rival action is guaranteed to pay the mover is the
        // minimum over its equilibrium continuations; any value at least
        // that high survives.
        let own = |v: &(R, R)| -> R {
            match mover {
                Player::P1 => v.0,
                Player::P2 => v.1,
            }
        };
        let mins: Vec<R> = child_sets
            .iter()
            .map(|set| {
                set.iter()
                    .map(own)
                    .fold(R::infinity(), |a, b| if b < a { b } else { a })
            })
            .collect();
        let mut result: Vec<(R, R)> = Vec::new();
        for (i, set) in child_sets.iter().enumerate() {
            let rival_best = mins
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &m)| m)
                .fold(R::neg_infinity(), |a, b| if b > a { b } else { a });
            for v in set {
                if own(v) >= rival_best && !result.contains(v) {
                    result.push(*v);
                }
            }
        }
        result.sort_by(|a, b| a.partial_cmp(b).unwrap());
        memo.insert(state.taken.clone(), result.clone());
        result
    }

    let game = BlockGame {
        config: config.clone(),
    };
    let mut memo = HashMap::new();
    go(config, &game.initial_state(), &mut memo)
}

/// A block set found by the constraint search, with integer numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSetCandidate {
    pub blocks: Vec<(Shape, Color, i64)>,
}

impl BlockSetCandidate {
    pub fn to_config<R: Real>(&self, first_mover: Player) -> BlockConfig<R> {
        BlockConfig {
            blocks: self
                .blocks
                .iter()
                .map(|&(shape, color, n)| Block {
                    shape,
                    color,
                    number: real(n as f64),
                })
                .collect(),
            picks_per_player: 3,
            first_mover,
        }
    }

    pub fn describe(&self) -> String {
        self.blocks
            .iter()
            .map(|(s, c, n)| format!("{}-{}-{}", s.label(), c.label(), n))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Bounds for the block-set constraint search.
#[derive(Debug, Clone)]
pub struct SearchLimits {
    /// Stop after this many solutions.
    pub max_solutions: usize,
    /// Also search two-circle compositions (slower).
    pub wide: bool,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_solutions: 8,
            wide: false,
        }
    }
}

/// Searches six-block sets meeting all three published constraints:
/// square numbers sum to 40, squares and triangles together average 25 per
/// alternation side (triangle sum 10), and subgame-perfect play pays
/// exactly (18, 18).
///
/// Three squares are forced (the square hand must be a valid set worth 40).
/// Hands partition the six blocks and each payoff is a hand sum or a quarter
/// of one, so (18, 18) forces the block total into {36, 90, 144}; with a
/// square sum of 40 alone exceeding 36, any remaining mass beyond the
/// triangles must come from circles summing 40 or 94. In particular the
/// all-triangle composition (total 50) admits no solution.
pub fn search_block_sets(limits: &SearchLimits) -> Vec<BlockSetCandidate> {
    let mut found = Vec::new();

    // Composition: 3 squares (sum 40), 2 triangles (sum 10), 1 circle.
    // A circle of 94 hands the first mover at least (94 + 2)/4 > 18 by
    // grabbing it, so only a circle of 40 can work.
    'outer: for squares in partitions(40, 3) {
        for triangles in partitions(10, 2) {
            for candidate in color_assignments(&squares, &triangles, &[40]) {
                if check_candidate(&candidate) {
                    found.push(candidate);
                    if found.len() >= limits.max_solutions {
                        break 'outer;
                    }
                }
            }
        }
    }

    if limits.wide && found.len() < limits.max_solutions {
        // Composition: 3 squares, 1 triangle (number 10), 2 circles
        // summing 40 or 94.
        'wide: for squares in partitions(40, 3) {
            for circle_sum in [40i64, 94] {
                for circles in partitions(circle_sum, 2) {
                    for candidate in color_assignments_two_circles(&squares, 10, &circles) {
                        if check_candidate(&candidate) {
                            found.push(candidate);
                            if found.len() >= limits.max_solutions {
                                break 'wide;
                            }
                        }
                    }
                }
            }
        }
    }

    found
}

/// Verifies the remaining constraints on a fully colored candidate: no valid
/// hand may beat the 40-point square hand (the highest sustainable target
/// must be the squares), and subgame-perfect play must pay exactly (18, 18).
fn check_candidate(candidate: &BlockSetCandidate) -> bool {
    let blocks = &candidate.blocks;
    // Max valid hand value must be exactly 40 (the square hand).
    let n = blocks.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let hand = [blocks[i], blocks[j], blocks[k]];
                let same_color = hand[0].1 == hand[1].1 && hand[1].1 == hand[2].1;
                let same_shape = hand[0].0 == hand[1].0 && hand[1].0 == hand[2].0;
                let distinct = hand[0].0 != hand[1].0
                    && hand[1].0 != hand[2].0
                    && hand[0].0 != hand[2].0
                    && hand[0].1 != hand[1].1
                    && hand[1].1 != hand[2].1
                    && hand[0].1 != hand[2].1;
                if (same_color || same_shape || distinct) && hand.iter().map(|b| b.2).sum::<i64>() > 40
                {
                    return false;
                }
            }
        }
    }
    let config = candidate.to_config::<f64>(Player::P1);
    let spne = spne_payoffs(&config);
    spne == vec![(18.0, 18.0)]
}

/// Sorted descending partitions of `total` into exactly `parts` positive
/// integers.
fn partitions(total: i64, parts: usize) -> Vec<Vec<i64>> {
    fn go(total: i64, parts: usize, max: i64, acc: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if parts == 1 {
            if total >= 1 && total <= max {
                acc.push(total);
                out.push(acc.clone());
                acc.pop();
            }
            return;
        }
        let lo = (total + parts as i64 - 1) / parts as i64;
        for first in (lo..=max.min(total - (parts as i64 - 1))).rev() {
            acc.push(first);
            go(total - first, parts - 1, first, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    go(total, parts, total, &mut Vec::new(), &mut out);
    out
}

/// All canonical colorings of 3 squares + 2 triangles + circles.
///
/// Colors only matter up to permutation, so the circle is pinned to red and
/// the first distinct colors encountered among the rest map to blue then
/// yellow.
fn color_assignments(
    squares: &[i64],
    triangles: &[i64],
    circles: &[i64],
) -> Vec<BlockSetCandidate> {
    let n = squares.len() + triangles.len();
    let mut out = Vec::new();
    for mask in 0..3usize.pow(n as u32) {
        let mut colors = Vec::with_capacity(n);
        let mut m = mask;
        for _ in 0..n {
            colors.push(m % 3);
            m /= 3;
        }
        if canonical_colors(&colors) != colors {
            continue; // keep only the canonical representative
        }
        let palette = [Color::Red, Color::Blue, Color::Yellow];
        let mut blocks = Vec::new();
        for (i, &nsq) in squares.iter().enumerate() {
            blocks.push((Shape::Square, palette[colors[i]], nsq));
        }
        for (i, &ntr) in triangles.iter().enumerate() {
            blocks.push((Shape::Triangle, palette[colors[squares.len() + i]], ntr));
        }
        for &nc in circles {
            blocks.push((Shape::Circle, Color::Red, nc));
        }
        out.push(BlockSetCandidate { blocks });
    }
    out
}

fn color_assignments_two_circles(
    squares: &[i64],
    triangle: i64,
    circles: &[i64],
) -> Vec<BlockSetCandidate> {
    color_assignments(squares, &[triangle], circles)
}

/// Renames colors so the first occurrence order is 0, 1, 2. Color 0 is
/// reserved for the circle (red), so renaming starts at the circle's class:
/// classes equal to "0" stay 0 only if they first appear as 0.
fn canonical_colors(colors: &[usize]) -> Vec<usize> {
    let mut map: [Option<usize>; 3] = [Some(0), None, None];
    // Index 0 is pinned (the circle's color class). Other classes are
    // renamed in order of first appearance among 1, 2.
    let mut next = 1;
    let mut out = Vec::with_capacity(colors.len());
    for &c in colors {
        let mapped = match map[c] {
            Some(v) => v,
            None => {
                let v = next;
                map[c] = Some(v);
                next += 1;
                v
            }
        };
        out.push(mapped);
    }
    out
}

/// The bundled default block set (first solution of the constraint search).
pub fn default_blocks_json() -> &'static str {
    include_str!("../../data/blocks.json")
}
