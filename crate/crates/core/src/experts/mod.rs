//! The expert strategy set: leaders, followers, and the preventative
//! Bouncer, all behind the per-round agent contract.

mod follower;
mod leader;
mod model;

pub use follower::{fictitious_predict, mbrl_act, MaximinFollower, MbrlExpert, TargetFollower};
pub use leader::{
    aspiration_update, punish_condition, punishment_settled, LeaderExpert, LeaderParams,
};
pub use model::{bouncer_act, FictitiousModel, QTablePair};

use std::cell::{Cell, RefCell};
use std::rc::Rc;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GabeError, Result};
use crate::planning::{CompiledGame, PlanningParams, SecurityProfile, TargetSolution};
use crate::rsg::{ActionIndex, Agent, MoveRecord, Player, RewardPair, StateId};
use crate::scalar::{real, Real};

/// Samples an index from a mixed strategy.
pub fn sample_mixed<R: Real>(probs: &[R], rng: &mut ChaCha8Rng) -> usize {
    if probs.len() == 1 {
        return 0;
    }
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.to_f64_lossy();
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// One agent's shared view of the associate: fictitious-play frequency
/// models for both players and the pair of action-value tables, updated once
/// per observed move (between moves, never during action selection).
pub struct ModelHub<R> {
    seat: Player,
    compiled: Arc<CompiledGame<R>>,
    pub opp_model: RefCell<FictitiousModel>,
    pub own_model: RefCell<FictitiousModel>,
    pub qtables: RefCell<QTablePair<R>>,
    pending_sarsa: RefCell<Option<(usize, usize, RewardPair<R>)>>,
    version: Cell<u64>,
}

impl<R: Real> ModelHub<R> {
    pub fn new(seat: Player, compiled: Arc<CompiledGame<R>>, learning_rate: R) -> Rc<Self> {
        Rc::new(ModelHub {
            seat,
            opp_model: RefCell::new(FictitiousModel::new(&compiled, seat.other())),
            own_model: RefCell::new(FictitiousModel::new(&compiled, seat)),
            qtables: RefCell::new(QTablePair::new(&compiled, learning_rate)),
            pending_sarsa: RefCell::new(None),
            compiled,
            version: Cell::new(0),
        })
    }

    pub fn seat(&self) -> Player {
        self.seat
    }

    /// Monotone counter bumped on every model change; lets planners cache.
    pub fn version(&self) -> u64 {
        self.version.get()
    }

    /// Folds one observed move into the frequency models and advances the
    /// on-policy value tables by one step.
    pub fn observe_move(&self, mv: &MoveRecord<R>) {
        let Some(s) = self.compiled.state_index(&mv.state) else {
            return;
        };
        self.opp_model
            .borrow_mut()
            .observe(s, mv.action.of(self.seat.other()));
        self.own_model.borrow_mut().observe(s, mv.action.of(self.seat));
        let joint = self.compiled.joint_index(s, mv.action);
        let mut pending = self.pending_sarsa.borrow_mut();
        if let Some((ps, pj, pr)) = pending.take() {
            self.qtables
                .borrow_mut()
                .sarsa_update(ps, pj, pr, Some((s, joint)));
        }
        *pending = Some((s, joint, mv.rewards));
        self.version.set(self.version.get() + 1);
    }

    /// Closes the episode for the value tables (zero continuation).
    pub fn end_round(&self) {
        if let Some((ps, pj, pr)) = self.pending_sarsa.borrow_mut().take() {
            self.qtables.borrow_mut().sarsa_update(ps, pj, pr, None);
            self.version.set(self.version.get() + 1);
        }
    }
}

/// Preventative expert: steers toward states where the two players' learned
/// action values coincide, so deviations have nothing to gain.
pub struct BouncerExpert<R> {
    name: String,
    seat: Player,
    compiled: Arc<CompiledGame<R>>,
    hub: Rc<ModelHub<R>>,
}

impl<R: Real> BouncerExpert<R> {
    pub fn new(name: String, seat: Player, compiled: Arc<CompiledGame<R>>, hub: Rc<ModelHub<R>>) -> Self {
        BouncerExpert {
            name,
            seat,
            compiled,
            hub,
        }
    }
}

impl<R: Real> Agent<R> for BouncerExpert<R> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn begin_round(&mut self, _round: usize) {}

    fn act(&mut self, state: &StateId, _rng: &mut ChaCha8Rng) -> ActionIndex {
        let s = self.compiled.state_index(state).unwrap_or(0);
        let probs = self.hub.opp_model.borrow().predict::<R>(s);
        bouncer_act(&self.compiled, &self.hub.qtables.borrow(), &probs, s, self.seat)
    }

    fn observe(&mut self, _mv: &MoveRecord<R>) {}

    fn end_round(&mut self, _own_total: R) {}
}

/// Everything needed to assemble a seat's expert set.
pub struct ExpertSetup<'a, R> {
    pub seat: Player,
    pub compiled: &'a Arc<CompiledGame<R>>,
    /// Targets chosen for this seat, egalitarian first.
    pub targets: &'a [TargetSolution<R>],
    /// Zero-sum profile protecting this seat (maximin play).
    pub own_security: &'a Arc<SecurityProfile<R>>,
    /// Zero-sum profile protecting the associate (attack play).
    pub opp_security: &'a Arc<SecurityProfile<R>>,
    pub hub: &'a Rc<ModelHub<R>>,
    pub leader: LeaderParams<R>,
    pub planning: PlanningParams<R>,
}

/// Builds the full expert set for one seat: a leader and a follower per
/// target, the maximin follower, the model-based responder, and the
/// Bouncer. Five targets yield thirteen experts.
pub fn build_expert_set<R: Real>(setup: &ExpertSetup<'_, R>) -> Result<Vec<Box<dyn Agent<R>>>> {
    if setup.targets.is_empty() {
        return Err(GabeError::Config(
            "cannot build an expert set from an empty target list".into(),
        ));
    }
    let mut experts: Vec<Box<dyn Agent<R>>> = Vec::new();
    for target in setup.targets {
        experts.push(Box::new(LeaderExpert::new(
            format!("leader[{}]", target.label()),
            setup.seat,
            target.clone(),
            setup.compiled.clone(),
            setup.opp_security.clone(),
            &setup.leader,
        )));
    }
    for target in setup.targets {
        experts.push(Box::new(TargetFollower::new(
            format!("follower[{}]", target.label()),
            setup.seat,
            target.clone(),
            setup.compiled.clone(),
        )));
    }
    experts.push(Box::new(MaximinFollower::new(
        "maximin".into(),
        setup.compiled.clone(),
        setup.own_security.clone(),
    )));
    experts.push(Box::new(MbrlExpert::new(
        "mbrl".into(),
        setup.seat,
        setup.compiled.clone(),
        setup.hub.clone(),
        setup.planning,
    )));
    experts.push(Box::new(BouncerExpert::new(
        "bouncer".into(),
        setup.seat,
        setup.compiled.clone(),
        setup.hub.clone(),
    )));
    Ok(experts)
}

/// Default per-step learning rate of the value tables.
pub fn default_learning_rate<R: Real>() -> R {
    real(0.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::stage_game;
    use crate::planning::{
        default_omega_grid, enumerate_targets, select_targets, solve_zero_sum,
    };
    use rand::SeedableRng;

    fn setup_game() -> (
        Arc<CompiledGame<f64>>,
        Vec<TargetSolution<f64>>,
        Arc<SecurityProfile<f64>>,
        Arc<SecurityProfile<f64>>,
    ) {
        let g = stage_game(
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
        (compiled, selected, sec1, sec2)
    }

    fn make_set(
        compiled: &Arc<CompiledGame<f64>>,
        targets: &[TargetSolution<f64>],
        sec1: &Arc<SecurityProfile<f64>>,
        sec2: &Arc<SecurityProfile<f64>>,
    ) -> (Vec<Box<dyn Agent<f64>>>, Rc<ModelHub<f64>>) {
        let hub = ModelHub::new(Player::P1, compiled.clone(), 0.1);
        let egal = targets[0].payoff_of(Player::P1);
        let setup = ExpertSetup {
            seat: Player::P1,
            compiled,
            targets,
            own_security: sec1,
            opp_security: sec2,
            hub: &hub,
            leader: LeaderParams {
                lambda: 0.9,
                delta: 0.01 * egal.abs(),
                alpha0: egal,
            },
            planning: PlanningParams::default(),
        };
        (build_expert_set(&setup).unwrap(), hub)
    }

    #[test]
    fn expert_count_scales_with_targets() {
        let (compiled, selected, sec1, sec2) = setup_game();
        let (experts, _) = make_set(&compiled, &selected, &sec1, &sec2);
        assert_eq!(experts.len(), 2 * selected.len() + 3);
        let (one, _) = make_set(&compiled, &selected[..1], &sec1, &sec2);
        assert_eq!(one.len(), 5);
    }

    #[test]
    fn empty_target_list_is_a_config_error() {
        let (compiled, _, sec1, sec2) = setup_game();
        let hub = ModelHub::new(Player::P1, compiled.clone(), 0.1);
        let setup = ExpertSetup {
            seat: Player::P1,
            compiled: &compiled,
            targets: &[],
            own_security: &sec1,
            opp_security: &sec2,
            hub: &hub,
            leader: LeaderParams {
                lambda: 0.9,
                delta: 0.0,
                alpha0: 0.0,
            },
            planning: PlanningParams::default(),
        };
        assert!(build_expert_set(&setup).is_err());
    }

    #[test]
    fn every_expert_acts_at_the_start_state() {
        let (compiled, selected, sec1, sec2) = setup_game();
        let (mut experts, _) = make_set(&compiled, &selected, &sec1, &sec2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let start = compiled.states[0].clone();
        for e in experts.iter_mut() {
            e.begin_round(0);
            let a = e.act(&start, &mut rng);
            assert!(a < compiled.num_actions_of(0, Player::P1), "{}", e.name());
        }
    }

    #[test]
    fn leader_and_follower_agree_when_unprovoked() {
        let (compiled, selected, sec1, sec2) = setup_game();
        let target = selected[0].clone();
        let mut leader = LeaderExpert::new(
            "l".into(),
            Player::P1,
            target.clone(),
            compiled.clone(),
            sec2.clone(),
            &LeaderParams {
                lambda: 0.9,
                delta: 0.1,
                alpha0: target.payoff_of(Player::P1),
            },
        );
        let mut follower =
            TargetFollower::new("f".into(), Player::P1, target, compiled.clone());
        let _ = sec1;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let start = compiled.states[0].clone();
        for round in 0..12 {
            leader.begin_round(round);
            follower.begin_round(round);
            assert_eq!(leader.act(&start, &mut rng), follower.act(&start, &mut rng));
        }
    }
}
