//! Two-player episodic repeated stochastic games and the round engine.
//!
//! A game is a set of states with per-state simultaneous joint actions, a
//! known transition model and a known pair of reward functions. Play proceeds
//! in rounds (episodes): each round starts at the start state and ends at a
//! goal state, or is truncated at a move cap.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GabeError, Result};
use crate::scalar::Real;

/// Seat of one of the two players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    P1,
    P2,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::P1 => Player::P2,
            Player::P2 => Player::P1,
        }
    }

    /// 0 for P1, 1 for P2; handy for indexing per-seat arrays.
    pub fn index(self) -> usize {
        match self {
            Player::P1 => 0,
            Player::P2 => 1,
        }
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Player::P1 => write!(f, "p1"),
            Player::P2 => write!(f, "p2"),
        }
    }
}

/// Index into a state's per-player action list.
pub type ActionIndex = usize;

/// Canonical encoding of a game state. Two states with identical game
/// content encode to equal identifiers; games own the encoding scheme.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(Arc<[u8]>);

impl StateId {
    pub fn new(bytes: Vec<u8>) -> Self {
        StateId(bytes.into())
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }
}

impl std::fmt::Debug for StateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "s[")?;
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "]")
    }
}

/// A pair of simultaneous action choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JointAction {
    pub p1: ActionIndex,
    pub p2: ActionIndex,
}

impl JointAction {
    pub fn new(p1: ActionIndex, p2: ActionIndex) -> Self {
        JointAction { p1, p2 }
    }

    pub fn of(self, player: Player) -> ActionIndex {
        match player {
            Player::P1 => self.p1,
            Player::P2 => self.p2,
        }
    }
}

/// Finite rewards handed to both players after a joint action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardPair<R> {
    pub p1: R,
    pub p2: R,
}

impl<R: Real> RewardPair<R> {
    pub fn new(p1: R, p2: R) -> Self {
        RewardPair { p1, p2 }
    }

    pub fn zero() -> Self {
        RewardPair {
            p1: R::zero(),
            p2: R::zero(),
        }
    }

    pub fn of(self, player: Player) -> R {
        match player {
            Player::P1 => self.p1,
            Player::P2 => self.p2,
        }
    }
}

/// One resolved move: where we were, what was played, what it paid, where we
/// landed.
#[derive(Debug, Clone)]
pub struct MoveRecord<R> {
    pub state: StateId,
    pub action: JointAction,
    pub rewards: RewardPair<R>,
    pub next: StateId,
}

/// Full record of one round.
#[derive(Debug, Clone)]
pub struct RoundRecord<R> {
    pub moves: Vec<MoveRecord<R>>,
    pub totals: RewardPair<R>,
    /// True when the round hit the move cap without reaching a goal state.
    pub truncated: bool,
}

/// A two-player episodic repeated stochastic game with known model.
///
/// Both players observe each other's actions; transition and reward models
/// are known to both. Action sets are indexed `0..num_actions` per state and
/// player; goal states have exactly one (no-op) action so planners stay
/// total.
pub trait Rsg<R: Real>: Send + Sync {
    /// Short machine-friendly name, used in output file names.
    fn name(&self) -> &str;

    fn start_state(&self) -> StateId;

    fn is_goal(&self, state: &StateId) -> bool;

    fn num_actions(&self, state: &StateId, player: Player) -> usize;

    /// Distribution over successor states; probabilities sum to 1 (±1e-9).
    fn transition(&self, state: &StateId, action: JointAction) -> Vec<(StateId, R)>;

    fn rewards(&self, state: &StateId, action: JointAction) -> RewardPair<R>;

    /// Human-readable action label (used in plan descriptions).
    fn describe_action(&self, _state: &StateId, _player: Player, action: ActionIndex) -> String {
        format!("a{action}")
    }

    fn describe_state(&self, state: &StateId) -> String {
        format!("{state:?}")
    }
}

/// Per-round strategy contract shared by agents and experts.
///
/// `begin_round` is called before the first move of every round with the
/// 0-based round index; `observe` after every resolved move of the round
/// (both players' moves are visible); `end_round` with the callee's own
/// round total.
pub trait Agent<R: Real> {
    fn name(&self) -> String;

    fn begin_round(&mut self, round: usize);

    fn act(&mut self, state: &StateId, rng: &mut ChaCha8Rng) -> ActionIndex;

    fn observe(&mut self, mv: &MoveRecord<R>);

    fn end_round(&mut self, own_total: R);
}

/// Plays one round between two agents.
///
/// Both actions are collected before the transition is sampled, so the engine
/// is uniform for simultaneous and turn-taking games. The round ends when a
/// goal state is reached or after `move_cap` moves (`truncated` set). Both
/// agents see every move and receive an end-of-round call with their total.
pub fn run_round<R: Real>(
    game: &dyn Rsg<R>,
    agent_p1: &mut dyn Agent<R>,
    agent_p2: &mut dyn Agent<R>,
    rng: &mut ChaCha8Rng,
    move_cap: usize,
) -> Result<RoundRecord<R>> {
    assert!(move_cap >= 1, "move_cap must be at least 1");
    let mut state = game.start_state();
    let mut moves = Vec::new();
    let mut total1 = R::zero();
    let mut total2 = R::zero();
    let mut truncated = true;

    for _ in 0..move_cap {
        let n1 = game.num_actions(&state, Player::P1);
        let n2 = game.num_actions(&state, Player::P2);
        let a1 = agent_p1.act(&state, rng);
        if a1 >= n1 {
            return Err(GabeError::ContractViolation {
                agent: agent_p1.name(),
                action: a1,
                available: n1,
            });
        }
        let a2 = agent_p2.act(&state, rng);
        if a2 >= n2 {
            return Err(GabeError::ContractViolation {
                agent: agent_p2.name(),
                action: a2,
                available: n2,
            });
        }
        let action = JointAction::new(a1, a2);
        let rewards = game.rewards(&state, action);
        let next = sample_transition(game, &state, action, rng);

        total1 = total1 + rewards.p1;
        total2 = total2 + rewards.p2;
        let mv = MoveRecord {
            state: state.clone(),
            action,
            rewards,
            next: next.clone(),
        };
        agent_p1.observe(&mv);
        agent_p2.observe(&mv);
        moves.push(mv);

        if game.is_goal(&next) {
            truncated = false;
            break;
        }
        state = next;
    }

    agent_p1.end_round(total1);
    agent_p2.end_round(total2);
    Ok(RoundRecord {
        moves,
        totals: RewardPair::new(total1, total2),
        truncated,
    })
}

fn sample_transition<R: Real>(
    game: &dyn Rsg<R>,
    state: &StateId,
    action: JointAction,
    rng: &mut ChaCha8Rng,
) -> StateId {
    let dist = game.transition(state, action);
    debug_assert!(!dist.is_empty(), "empty transition distribution");
    if dist.len() == 1 {
        return dist.into_iter().next().unwrap().0;
    }
    let u: f64 = rng.gen::<f64>();
    let mut acc = 0.0;
    for (s, p) in &dist {
        acc += p.to_f64_lossy();
        if u < acc {
            return s.clone();
        }
    }
    // Rounding left a sliver of probability mass; take the last entry.
    dist.into_iter().last().unwrap().0
}

/// Default move cap used when none is configured: ten times the state count.
pub fn default_move_cap(num_states: usize) -> usize {
    10 * num_states.max(1)
}

/// All states reachable from the start state under some joint-action
/// sequence, in breadth-first order (start state first).
///
/// Fails with a resource-limit error when more than `bound` states are
/// discovered.
pub fn enumerate_states<R: Real>(game: &dyn Rsg<R>, bound: usize) -> Result<Vec<StateId>> {
    let start = game.start_state();
    let mut order = vec![start.clone()];
    let mut seen: HashMap<StateId, usize> = HashMap::new();
    seen.insert(start.clone(), 0);
    let mut queue = VecDeque::new();
    queue.push_back(start);

    while let Some(state) = queue.pop_front() {
        if game.is_goal(&state) {
            continue;
        }
        let n1 = game.num_actions(&state, Player::P1);
        let n2 = game.num_actions(&state, Player::P2);
        debug_assert!(n1 > 0 && n2 > 0, "non-goal state with empty action set");
        for a1 in 0..n1 {
            for a2 in 0..n2 {
                for (next, _p) in game.transition(&state, JointAction::new(a1, a2)) {
                    if !seen.contains_key(&next) {
                        if order.len() >= bound {
                            return Err(GabeError::ResourceLimit(format!(
                                "game `{}` has more than {bound} reachable states",
                                game.name()
                            )));
                        }
                        seen.insert(next.clone(), order.len());
                        order.push(next.clone());
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    Ok(order)
}

/// Default bound for state enumeration.
pub const DEFAULT_STATE_BOUND: usize = 1_000_000;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::TabularRsg;
    use rand::SeedableRng;

    /// Agent that always plays a fixed action index.
    struct Fixed(usize);

    impl<R: Real> Agent<R> for Fixed {
        fn name(&self) -> String {
            format!("fixed({})", self.0)
        }
        fn begin_round(&mut self, _round: usize) {}
        fn act(&mut self, _state: &StateId, _rng: &mut ChaCha8Rng) -> ActionIndex {
            self.0
        }
        fn observe(&mut self, _mv: &MoveRecord<R>) {}
        fn end_round(&mut self, _own_total: R) {}
    }

    fn one_step_game() -> TabularRsg<f64> {
        // Single decision state; every joint action jumps to the goal with
        // reward (1, 2).
        let mut g = TabularRsg::new("one-step", 2);
        let s0 = g.add_state("s0", 2, 2, false);
        let goal = g.add_state("goal", 1, 1, true);
        for a1 in 0..2 {
            for a2 in 0..2 {
                g.set_outcome(s0, a1, a2, (1.0, 2.0), vec![(goal, 1.0)]);
            }
        }
        g.set_start(s0);
        g
    }

    fn stay_game() -> TabularRsg<f64> {
        // One action per player that loops forever; a second that exits.
        let mut g = TabularRsg::new("stay", 2);
        let s0 = g.add_state("s0", 2, 2, false);
        let goal = g.add_state("goal", 1, 1, true);
        for a1 in 0..2 {
            for a2 in 0..2 {
                let exits = a1 == 1 && a2 == 1;
                let target = if exits { goal } else { s0 };
                g.set_outcome(s0, a1, a2, (0.0, 0.0), vec![(target, 1.0)]);
            }
        }
        g.set_start(s0);
        g
    }

    #[test]
    fn single_step_round() {
        let g = one_step_game();
        let mut a = Fixed(0);
        let mut b = Fixed(1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rec = run_round(&g, &mut a, &mut b, &mut rng, 10).unwrap();
        assert_eq!(rec.moves.len(), 1);
        assert_eq!(rec.totals.p1, 1.0);
        assert_eq!(rec.totals.p2, 2.0);
        assert!(!rec.truncated);
    }

    #[test]
    fn move_cap_truncates() {
        let g = stay_game();
        let mut a = Fixed(0);
        let mut b = Fixed(0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rec = run_round(&g, &mut a, &mut b, &mut rng, 10).unwrap();
        assert!(rec.truncated);
        assert_eq!(rec.moves.len(), 10);
    }

    #[test]
    fn rounds_are_deterministic_under_a_seed() {
        // A stochastic transition plus a fixed seed must reproduce bit-equal
        // records.
        let mut g: TabularRsg<f64> = TabularRsg::new("coin", 2);
        let s0 = g.add_state("s0", 1, 1, false);
        let g1 = g.add_state("g1", 1, 1, true);
        let g2 = g.add_state("g2", 1, 1, true);
        g.set_outcome(s0, 0, 0, (1.0, 1.0), vec![(g1, 0.5), (g2, 0.5)]);
        g.set_start(s0);

        let run = |seed: u64| {
            let mut a = Fixed(0);
            let mut b = Fixed(0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            run_round(&g, &mut a, &mut b, &mut rng, 5).unwrap()
        };
        let r1 = run(42);
        let r2 = run(42);
        assert_eq!(r1.moves.len(), r2.moves.len());
        assert_eq!(r1.moves[0].next, r2.moves[0].next);
    }

    #[test]
    fn out_of_range_action_names_the_agent() {
        let g = one_step_game();
        let mut a = Fixed(5);
        let mut b = Fixed(0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let err = run_round(&g, &mut a, &mut b, &mut rng, 10).unwrap_err();
        match err {
            GabeError::ContractViolation { agent, .. } => assert_eq!(agent, "fixed(5)"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn totals_match_move_sums_exactly() {
        let g = one_step_game();
        let mut a = Fixed(1);
        let mut b = Fixed(1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rec = run_round(&g, &mut a, &mut b, &mut rng, 10).unwrap();
        let sum1: f64 = rec.moves.iter().map(|m| m.rewards.p1).sum();
        let sum2: f64 = rec.moves.iter().map(|m| m.rewards.p2).sum();
        assert_eq!(rec.totals.p1, sum1);
        assert_eq!(rec.totals.p2, sum2);
    }

    #[test]
    fn enumerate_single_step() {
        let g = one_step_game();
        let states = enumerate_states(&g, DEFAULT_STATE_BOUND).unwrap();
        assert_eq!(states.len(), 2);
        assert_eq!(states[0], g.start_state());
    }

    #[test]
    fn enumeration_bound_is_enforced() {
        let g = one_step_game();
        let err = enumerate_states(&g, 1).unwrap_err();
        assert!(matches!(err, GabeError::ResourceLimit(_)));
    }
}
