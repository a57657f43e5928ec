//! Expert-algorithm abstraction and the bandit-driven composite agent.
//!
//! The composite agent reduces the repeated game to a bandit problem: one
//! arm per expert, one pull per round, rewarded with the normalized round
//! total. Any type implementing [`ExpertAlgorithm`] can drive the arm
//! selection, so further algorithms plug in without touching the agent.

mod eee;
mod exp3;

pub use eee::Eee;
pub use exp3::Exp3;

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GabeError, Result};
use crate::experts::ModelHub;
use crate::rsg::{run_round, ActionIndex, Agent, MoveRecord, Rsg, RoundRecord, StateId};
use crate::scalar::{real, Real};

/// Per-round arm selection over the expert set.
pub trait ExpertAlgorithm<R: Real>: Send {
    fn name(&self) -> String;

    fn arm_count(&self) -> usize;

    /// Chooses the expert to follow for the whole round.
    fn select(&mut self, round: usize, rng: &mut ChaCha8Rng) -> usize;

    /// Feeds back the selected expert's normalized round payoff.
    fn update(&mut self, arm: usize, payoff01: R) -> Result<()>;
}

/// Affine map from round totals into `[0, 1]` for bandit feedback.
///
/// Bounds come from planning: the lower bound is the worst of zero and the
/// seat's security value, the upper bound the best target payoff, with the
/// interval widened by ten percent to absorb overshoot. Out-of-range totals
/// clamp and are counted.
#[derive(Debug, Clone, Copy)]
pub struct PayoffNormalizer<R> {
    pub lower: R,
    pub upper: R,
}

impl<R: Real> PayoffNormalizer<R> {
    pub fn new(lower: R, upper: R) -> Result<Self> {
        if lower >= upper {
            return Err(GabeError::Config(format!(
                "normalizer bounds [{lower}, {upper}] are not increasing"
            )));
        }
        Ok(PayoffNormalizer { lower, upper })
    }

    /// Bounds derived from the seat's security value and the best payoff
    /// among the enumerated targets.
    pub fn from_planning(security_value: R, max_target_payoff: R) -> Result<Self> {
        let lo = security_value.min(R::zero());
        let hi = max_target_payoff;
        let span = hi - lo;
        let span = if span > R::zero() {
            span
        } else {
            hi.abs().max(R::one())
        };
        let pad = real::<R>(0.05) * span;
        Self::new(lo - pad, hi + pad)
    }

    /// Clamped affine normalization; the flag reports clamping.
    pub fn normalize(&self, total: R) -> (R, bool) {
        let x = (total - self.lower) / (self.upper - self.lower);
        if x < R::zero() {
            (R::zero(), true)
        } else if x > R::one() {
            (R::one(), true)
        } else {
            (x, false)
        }
    }
}

/// Bandit-over-experts agent: selects one expert per round, follows it for
/// the whole round, and keeps every expert's models current off-policy.
pub struct BanditAgent<R: Real> {
    name: String,
    experts: Vec<Box<dyn Agent<R>>>,
    algorithm: Box<dyn ExpertAlgorithm<R>>,
    normalizer: PayoffNormalizer<R>,
    hub: Rc<ModelHub<R>>,
    selection_rng: ChaCha8Rng,
    active: usize,
    round: usize,
    /// Selected expert index per round, for reproducibility dumps.
    pub selections: Vec<usize>,
    /// Round totals that fell outside the normalizer bounds.
    pub clamped_payoffs: u64,
}

impl<R: Real> BanditAgent<R> {
    pub fn new(
        name: String,
        experts: Vec<Box<dyn Agent<R>>>,
        algorithm: Box<dyn ExpertAlgorithm<R>>,
        normalizer: PayoffNormalizer<R>,
        hub: Rc<ModelHub<R>>,
        seed: u64,
    ) -> Result<Self> {
        if experts.is_empty() {
            return Err(GabeError::Config("expert set is empty".into()));
        }
        if algorithm.arm_count() != experts.len() {
            return Err(GabeError::Config(format!(
                "expert algorithm has {} arms for {} experts",
                algorithm.arm_count(),
                experts.len()
            )));
        }
        Ok(BanditAgent {
            name,
            experts,
            algorithm,
            normalizer,
            hub,
            selection_rng: ChaCha8Rng::seed_from_u64(seed),
            active: 0,
            round: 0,
            selections: Vec::new(),
            clamped_payoffs: 0,
        })
    }

    pub fn expert_names(&self) -> Vec<String> {
        self.experts.iter().map(|e| e.name()).collect()
    }

    pub fn active_expert(&self) -> usize {
        self.active
    }
}

impl<R: Real> Agent<R> for BanditAgent<R> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn begin_round(&mut self, round: usize) {
        self.round = round;
        self.active = self.algorithm.select(round, &mut self.selection_rng);
        self.selections.push(self.active);
        for e in &mut self.experts {
            e.begin_round(round);
        }
    }

    fn act(&mut self, state: &StateId, rng: &mut ChaCha8Rng) -> ActionIndex {
        self.experts[self.active].act(state, rng)
    }

    fn observe(&mut self, mv: &MoveRecord<R>) {
        // Shared models advance once; every expert sees every move so
        // leaders keep their deviation bookkeeping current off-policy.
        self.hub.observe_move(mv);
        for e in &mut self.experts {
            e.observe(mv);
        }
    }

    fn end_round(&mut self, own_total: R) {
        self.hub.end_round();
        for e in &mut self.experts {
            e.end_round(own_total);
        }
        let (x, clamped) = self.normalizer.normalize(own_total);
        if clamped {
            self.clamped_payoffs += 1;
        }
        self.algorithm
            .update(self.active, x)
            .expect("normalized payoff is in range");
    }
}

/// Plays one full round of the bandit agent against an opponent,
/// dispatching the begin-round notifications.
pub fn bandit_round<R: Real>(
    game: &dyn Rsg<R>,
    round: usize,
    agent: &mut BanditAgent<R>,
    opponent: &mut dyn Agent<R>,
    rng: &mut ChaCha8Rng,
    move_cap: usize,
) -> Result<RoundRecord<R>> {
    agent.begin_round(round);
    opponent.begin_round(round);
    match agent.hub.seat() {
        crate::rsg::Player::P1 => run_round(game, agent, opponent, rng, move_cap),
        crate::rsg::Player::P2 => run_round(game, opponent, agent, rng, move_cap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::{build_expert_set, ExpertSetup, LeaderParams};
    use crate::games::stage_game;
    use crate::planning::{
        default_omega_grid, enumerate_targets, select_targets, solve_zero_sum, CompiledGame,
        PlanningParams,
    };
    use crate::rsg::Player;
    use std::sync::Arc;

    #[test]
    fn normalizer_endpoints_and_clamping() {
        let n = PayoffNormalizer::new(-2.0, 6.0).unwrap();
        assert_eq!(n.normalize(6.0), (1.0, false));
        assert_eq!(n.normalize(-2.0), (0.0, false));
        assert_eq!(n.normalize(10.0), (1.0, true));
        assert_eq!(n.normalize(-5.0), (0.0, true));
    }

    #[test]
    fn degenerate_bounds_rejected() {
        assert!(PayoffNormalizer::new(1.0, 1.0).is_err());
        assert!(PayoffNormalizer::new(2.0, 1.0).is_err());
    }

    #[test]
    fn planning_bounds_are_widened() {
        let n = PayoffNormalizer::<f64>::from_planning(-1.0, 9.0).unwrap();
        assert!(n.lower < -1.0);
        assert!(n.upper > 9.0);
        // Positive security clips the lower bound at zero before padding.
        let n = PayoffNormalizer::<f64>::from_planning(0.5, 9.0).unwrap();
        assert!(n.lower <= 0.0);
    }

    fn build_gabe(seed: u64) -> (Arc<CompiledGame<f64>>, BanditAgent<f64>) {
        let g = stage_game::<f64>(
            "pd-ish",
            &[
                vec![(2.0, 2.0), (-1.0, 3.0)],
                vec![(3.0, -1.0), (-0.5, -0.5)],
            ],
            1,
        );
        let compiled = Arc::new(CompiledGame::compile(&g, 100).unwrap());
        let params = PlanningParams::default();
        let targets = enumerate_targets(&compiled, &default_omega_grid(), &params).unwrap();
        let sec1 = Arc::new(solve_zero_sum(&compiled, Player::P1, &params).unwrap());
        let sec2 = Arc::new(solve_zero_sum(&compiled, Player::P2, &params).unwrap());
        let selected = select_targets(
            &targets,
            Player::P1,
            sec1.security_value,
            sec2.security_value,
            5,
        );
        let hub = ModelHub::new(Player::P1, compiled.clone(), 0.1);
        let egal = selected[0].payoff_of(Player::P1);
        let setup = ExpertSetup {
            seat: Player::P1,
            compiled: &compiled,
            targets: &selected,
            own_security: &sec1,
            opp_security: &sec2,
            hub: &hub,
            leader: LeaderParams {
                lambda: 0.9,
                delta: 0.01 * egal.abs(),
                alpha0: egal,
            },
            planning: params,
        };
        let experts = build_expert_set(&setup).unwrap();
        let k = experts.len();
        let max_target = targets
            .iter()
            .map(|t| t.payoff_of(Player::P1))
            .fold(f64::NEG_INFINITY, f64::max);
        let normalizer =
            PayoffNormalizer::from_planning(sec1.security_value, max_target).unwrap();
        let agent = BanditAgent::new(
            "gabe-exp3".into(),
            experts,
            Box::new(Exp3::new(k, 0.1)),
            normalizer,
            hub,
            seed,
        )
        .unwrap();
        (compiled, agent)
    }

    #[test]
    fn selection_log_grows_per_round() {
        let (compiled, mut agent) = build_gabe(1);
        let game = stage_game::<f64>(
            "pd-ish",
            &[
                vec![(2.0, 2.0), (-1.0, 3.0)],
                vec![(3.0, -1.0), (-0.5, -0.5)],
            ],
            1,
        );
        let mut opp = crate::experts::MaximinFollower::new(
            "maximin".into(),
            compiled.clone(),
            Arc::new(
                solve_zero_sum(&compiled, Player::P2, &PlanningParams::default()).unwrap(),
            ),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for round in 0..25 {
            bandit_round(&game, round, &mut agent, &mut opp, &mut rng, 10).unwrap();
        }
        assert_eq!(agent.selections.len(), 25);
    }

    #[test]
    fn identical_seeds_reproduce_selections() {
        let run = |seed: u64| {
            let (compiled, mut agent) = build_gabe(seed);
            let game = stage_game::<f64>(
                "pd-ish",
                &[
                    vec![(2.0, 2.0), (-1.0, 3.0)],
                    vec![(3.0, -1.0), (-0.5, -0.5)],
                ],
                1,
            );
            let mut opp = crate::experts::MaximinFollower::new(
                "maximin".into(),
                compiled.clone(),
                Arc::new(
                    solve_zero_sum(&compiled, Player::P2, &PlanningParams::default()).unwrap(),
                ),
            );
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            for round in 0..30 {
                bandit_round(&game, round, &mut agent, &mut opp, &mut rng, 10).unwrap();
            }
            agent.selections.clone()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6)); // different bandit seed, different draws
    }

    #[test]
    fn single_expert_set_is_that_expert() {
        // With one arm the agent's trajectory equals the lone expert's.
        let g = stage_game::<f64>(
            "pd-ish",
            &[
                vec![(2.0, 2.0), (-1.0, 3.0)],
                vec![(3.0, -1.0), (-0.5, -0.5)],
            ],
            1,
        );
        let compiled = Arc::new(CompiledGame::compile(&g, 100).unwrap());
        let params = PlanningParams::default();
        let targets = enumerate_targets(&compiled, &[0.5], &params).unwrap();
        let sec1 = Arc::new(solve_zero_sum(&compiled, Player::P1, &params).unwrap());
        let sec2 = Arc::new(solve_zero_sum(&compiled, Player::P2, &params).unwrap());
        let hub = ModelHub::new(Player::P1, compiled.clone(), 0.1);
        let follower = crate::experts::TargetFollower::new(
            "follower".into(),
            Player::P1,
            targets[0].clone(),
            compiled.clone(),
        );
        let _ = (&sec1, &sec2);
        let normalizer = PayoffNormalizer::new(-1.0, 3.0).unwrap();
        let mut agent = BanditAgent::new(
            "gabe-one".into(),
            vec![Box::new(follower)],
            Box::new(Exp3::new(1, 0.1)),
            normalizer,
            hub,
            3,
        )
        .unwrap();

        // The lone expert plays its target action every round.
        let expected = targets[0].plan_for_round(0).policy[0].of(Player::P1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let start = g.start_state();
        for round in 0..10 {
            agent.begin_round(round);
            assert_eq!(agent.act(&start, &mut rng), expected);
            agent.end_round(2.0);
        }
    }
}
