//! Explicit tabular games, built programmatically.
//!
//! Used for small fixture games in tests and for embedding normal-form stage
//! games as episodic RSGs.

use crate::rsg::{ActionIndex, JointAction, Player, RewardPair, Rsg, StateId};
use crate::scalar::Real;

struct TabState<R> {
    label: String,
    n1: usize,
    n2: usize,
    goal: bool,
    // Indexed a1 * n2 + a2; None for unset outcomes.
    rewards: Vec<Option<(R, R)>>,
    transitions: Vec<Vec<(usize, R)>>,
}

/// A finite two-player game given by explicit tables.
pub struct TabularRsg<R> {
    name: String,
    states: Vec<TabState<R>>,
    start: usize,
}

impl<R: Real> TabularRsg<R> {
    pub fn new(name: &str, _hint_states: usize) -> Self {
        TabularRsg {
            name: name.to_string(),
            states: Vec::new(),
            start: 0,
        }
    }

    /// Adds a state and returns its handle.
    pub fn add_state(&mut self, label: &str, n1: usize, n2: usize, goal: bool) -> usize {
        let idx = self.states.len();
        self.states.push(TabState {
            label: label.to_string(),
            n1,
            n2,
            goal,
            rewards: vec![None; n1 * n2],
            transitions: vec![Vec::new(); n1 * n2],
        });
        idx
    }

    pub fn set_start(&mut self, state: usize) {
        self.start = state;
    }

    /// Sets reward pair and successor distribution for one joint action.
    pub fn set_outcome(
        &mut self,
        state: usize,
        a1: ActionIndex,
        a2: ActionIndex,
        rewards: (f64, f64),
        next: Vec<(usize, f64)>,
    ) {
        let st = &mut self.states[state];
        let idx = a1 * st.n2 + a2;
        st.rewards[idx] = Some((R::from_f64_lossy(rewards.0), R::from_f64_lossy(rewards.1)));
        st.transitions[idx] = next
            .into_iter()
            .map(|(s, p)| (s, R::from_f64_lossy(p)))
            .collect();
    }

    fn id(&self, state: usize) -> StateId {
        StateId::new(vec![state as u8, (state >> 8) as u8])
    }

    fn decode(&self, id: &StateId) -> usize {
        let b = id.bytes();
        b[0] as usize | ((b[1] as usize) << 8)
    }
}

impl<R: Real> Rsg<R> for TabularRsg<R> {
    fn name(&self) -> &str {
        &self.name
    }

    fn start_state(&self) -> StateId {
        self.id(self.start)
    }

    fn is_goal(&self, state: &StateId) -> bool {
        self.states[self.decode(state)].goal
    }

    fn num_actions(&self, state: &StateId, player: Player) -> usize {
        let st = &self.states[self.decode(state)];
        match player {
            Player::P1 => st.n1,
            Player::P2 => st.n2,
        }
    }

    fn transition(&self, state: &StateId, action: JointAction) -> Vec<(StateId, R)> {
        let s = self.decode(state);
        let st = &self.states[s];
        if st.goal {
            return vec![(state.clone(), R::one())];
        }
        let idx = action.p1 * st.n2 + action.p2;
        let dist = &st.transitions[idx];
        assert!(
            !dist.is_empty(),
            "no outcome set for state `{}` action ({}, {})",
            st.label,
            action.p1,
            action.p2
        );
        dist.iter().map(|&(s, p)| (self.id(s), p)).collect()
    }

    fn rewards(&self, state: &StateId, action: JointAction) -> RewardPair<R> {
        let st = &self.states[self.decode(state)];
        if st.goal {
            return RewardPair::zero();
        }
        let idx = action.p1 * st.n2 + action.p2;
        let (r1, r2) = st.rewards[idx].expect("outcome not set");
        RewardPair::new(r1, r2)
    }

    fn describe_state(&self, state: &StateId) -> String {
        self.states[self.decode(state)].label.clone()
    }
}

/// Embeds a normal-form stage game as an episodic RSG: each round consists of
/// `moves_per_round` plays of the same payoff bimatrix, then ends.
///
/// `payoffs[a1][a2]` is the reward pair for the joint action `(a1, a2)`.
pub fn stage_game<R: Real>(
    name: &str,
    payoffs: &[Vec<(f64, f64)>],
    moves_per_round: usize,
) -> TabularRsg<R> {
    assert!(moves_per_round >= 1);
    let n1 = payoffs.len();
    let n2 = payoffs[0].len();
    let mut g = TabularRsg::new(name, moves_per_round + 1);
    let stages: Vec<usize> = (0..moves_per_round)
        .map(|m| g.add_state(&format!("m{m}"), n1, n2, false))
        .collect();
    let goal = g.add_state("goal", 1, 1, true);
    for (m, &s) in stages.iter().enumerate() {
        let next = if m + 1 < moves_per_round {
            stages[m + 1]
        } else {
            goal
        };
        for (a1, row) in payoffs.iter().enumerate() {
            for (a2, &pair) in row.iter().enumerate() {
                g.set_outcome(s, a1, a2, pair, vec![(next, 1.0)]);
            }
        }
    }
    g.set_start(stages[0]);
    g
}
