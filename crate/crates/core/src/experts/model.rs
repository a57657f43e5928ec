//! Opponent models and action-value tables shared by the experts.

use crate::rsg::{JointAction, Player, RewardPair};
use crate::scalar::{real, Real};

use crate::planning::CompiledGame;

/// Per-state empirical frequencies of one player's actions.
#[derive(Debug, Clone)]
pub struct FictitiousModel {
    counts: Vec<Vec<u64>>,
}

impl FictitiousModel {
    pub fn new<R: Real>(compiled: &CompiledGame<R>, modeled: Player) -> Self {
        FictitiousModel {
            counts: (0..compiled.num_states())
                .map(|s| vec![0; compiled.num_actions_of(s, modeled)])
                .collect(),
        }
    }

    pub fn observe(&mut self, state: usize, action: usize) {
        self.counts[state][action] += 1;
    }

    pub fn visits(&self, state: usize) -> u64 {
        self.counts[state].iter().sum()
    }

    /// Normalized frequencies; a never-visited state predicts uniformly.
    pub fn predict<R: Real>(&self, state: usize) -> Vec<R> {
        let total: u64 = self.counts[state].iter().sum();
        let n = self.counts[state].len();
        if total == 0 {
            return vec![R::one() / real::<R>(n as f64); n];
        }
        self.counts[state]
            .iter()
            .map(|&c| real::<R>(c as f64 / total as f64))
            .collect()
    }
}

/// Both players' joint-action values, learned on-policy from observed play.
#[derive(Debug, Clone)]
pub struct QTablePair<R> {
    /// Indexed `[state][a1 * n2 + a2]`, both initialized to zero.
    pub q1: Vec<Vec<R>>,
    pub q2: Vec<Vec<R>>,
    pub learning_rate: R,
}

impl<R: Real> QTablePair<R> {
    pub fn new(compiled: &CompiledGame<R>, learning_rate: R) -> Self {
        let zeros: Vec<Vec<R>> = compiled
            .rewards
            .iter()
            .map(|row| vec![R::zero(); row.len()])
            .collect();
        QTablePair {
            q1: zeros.clone(),
            q2: zeros,
            learning_rate,
        }
    }

    /// One on-policy temporal-difference step for both players,
    /// undiscounted within the episode. `next` is the successor state and
    /// joint action; `None` marks the episode end (zero continuation).
    pub fn sarsa_update(
        &mut self,
        state: usize,
        joint: usize,
        rewards: RewardPair<R>,
        next: Option<(usize, usize)>,
    ) {
        let eta = self.learning_rate;
        let (next1, next2) = match next {
            Some((s, j)) => (self.q1[s][j], self.q2[s][j]),
            None => (R::zero(), R::zero()),
        };
        let q1 = &mut self.q1[state][joint];
        *q1 = *q1 + eta * (rewards.p1 + next1 - *q1);
        let q2 = &mut self.q2[state][joint];
        *q2 = *q2 + eta * (rewards.p2 + next2 - *q2);
    }

    pub fn of(&self, player: Player, state: usize, joint: usize) -> R {
        match player {
            Player::P1 => self.q1[state][joint],
            Player::P2 => self.q2[state][joint],
        }
    }
}

/// Preventative action choice: minimize the expected absolute gap between
/// the players' action values under the modeled opponent mix. Ties go to
/// the lowest action index.
pub fn bouncer_act<R: Real>(
    compiled: &CompiledGame<R>,
    q: &QTablePair<R>,
    opp_probs: &[R],
    state: usize,
    seat: Player,
) -> usize {
    let own_n = compiled.num_actions_of(state, seat);
    let mut best = (0usize, R::infinity());
    for a in 0..own_n {
        let mut gap = R::zero();
        for (b, &p) in opp_probs.iter().enumerate() {
            if p == R::zero() {
                continue;
            }
            let joint = match seat {
                Player::P1 => JointAction::new(a, b),
                Player::P2 => JointAction::new(b, a),
            };
            let j = compiled.joint_index(state, joint);
            gap = gap + p * (q.q1[state][j] - q.q2[state][j]).abs();
        }
        if gap < best.1 {
            best = (a, gap);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::stage_game;
    use crate::planning::CompiledGame;

    fn compiled() -> CompiledGame<f64> {
        let g = stage_game(
            "stage",
            &[
                vec![(2.0, 2.0), (0.0, 3.0)],
                vec![(3.0, 0.0), (1.0, 1.0)],
            ],
            1,
        );
        CompiledGame::compile(&g, 100).unwrap()
    }

    #[test]
    fn frequencies_normalize() {
        let c = compiled();
        let mut m = FictitiousModel::new(&c, Player::P2);
        for _ in 0..3 {
            m.observe(0, 0);
        }
        m.observe(0, 1);
        assert_eq!(m.predict::<f64>(0), vec![0.75, 0.25]);
    }

    #[test]
    fn unvisited_state_is_uniform() {
        let c = compiled();
        let m = FictitiousModel::new(&c, Player::P2);
        assert_eq!(m.predict::<f64>(0), vec![0.5, 0.5]);
    }

    #[test]
    fn observation_increments_one_count() {
        let c = compiled();
        let mut m = FictitiousModel::new(&c, Player::P2);
        m.observe(0, 1);
        assert_eq!(m.visits(0), 1);
        assert_eq!(m.predict::<f64>(0), vec![0.0, 1.0]);
    }

    #[test]
    fn sarsa_arithmetic() {
        let c = compiled();
        let mut q = QTablePair::new(&c, 0.1);
        q.sarsa_update(0, 0, RewardPair::new(1.0, 0.0), None);
        assert!((q.q1[0][0] - 0.1).abs() < 1e-12);
        assert_eq!(q.q2[0][0], 0.0);
    }

    #[test]
    fn sarsa_fixed_point() {
        let c = compiled();
        let mut q = QTablePair::new(&c, 0.1);
        q.q1[0][0] = 2.0;
        q.q2[0][0] = 2.0;
        // Zero reward and equal continuation leave the value unchanged.
        let before = q.q1[0][0];
        q.sarsa_update(0, 0, RewardPair::new(0.0, 0.0), Some((0, 0)));
        assert_eq!(q.q1[0][0], before);
    }

    #[test]
    fn sarsa_converges_to_fixed_policy_return() {
        // Two-move episodes under a fixed joint action; the true return of
        // the first move is r0 + r1.
        let g: crate::games::TabularRsg<f64> = stage_game("twice", &[vec![(1.0, 1.0)]], 2);
        let c = CompiledGame::compile(&g, 100).unwrap();
        let mut q = QTablePair::new(&c, 0.1);
        for _ in 0..500 {
            q.sarsa_update(0, 0, RewardPair::new(1.0, 1.0), Some((1, 0)));
            q.sarsa_update(1, 0, RewardPair::new(1.0, 1.0), None);
        }
        assert!((q.q1[0][0] - 2.0).abs() < 1e-3);
        assert!((q.q1[1][0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn equal_tables_pick_lowest_action() {
        let c = compiled();
        let q = QTablePair::new(&c, 0.1);
        let a = bouncer_act(&c, &q, &[0.5, 0.5], 0, Player::P1);
        assert_eq!(a, 0);
    }

    #[test]
    fn bouncer_minimizes_expected_gap() {
        let c = compiled();
        let mut q = QTablePair::new(&c, 0.1);
        // Row 0 has a large gap, row 1 none.
        q.q1[0][0] = 5.0; // (0,0)
        q.q1[0][1] = 5.0; // (0,1)
        let a = bouncer_act(&c, &q, &[0.5, 0.5], 0, Player::P1);
        assert_eq!(a, 1);
    }

    #[test]
    fn skewed_model_matches_hand_enumeration() {
        let c = compiled();
        let mut q = QTablePair::new(&c, 0.1);
        q.q1[0][0] = 1.0; // gap (0,0) = 1
        q.q2[0][1] = 8.0; // gap (0,1) = 8
        q.q1[0][2] = 2.0; // gap (1,0) = 2
        q.q2[0][3] = 2.0; // gap (1,1) = 2
        // gamma = (0.9, 0.1): row 0 gap = 0.9*1 + 0.1*8 = 1.7; row 1 = 2.0.
        let a = bouncer_act(&c, &q, &[0.9, 0.1], 0, Player::P1);
        assert_eq!(a, 0);
        // gamma = (0.1, 0.9): row 0 gap = 7.3; row 1 = 2.0.
        let a = bouncer_act(&c, &q, &[0.1, 0.9], 0, Player::P1);
        assert_eq!(a, 1);
    }
}
