//! Follower strategies: unconditional target play, the maximin strategy,
//! and model-based best response to an estimated stationary associate.

use std::rc::Rc;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::planning::{best_response, CompiledGame, PlanningParams, SecurityProfile, TargetSolution};
use crate::rsg::{ActionIndex, Agent, MoveRecord, Player, StateId};
use crate::scalar::{real, Real};

use super::{sample_mixed, ModelHub};

/// Plays its part of a target solution unconditionally: no monitoring, no
/// punishment.
pub struct TargetFollower<R> {
    name: String,
    seat: Player,
    target: TargetSolution<R>,
    compiled: Arc<CompiledGame<R>>,
    round: usize,
}

impl<R: Real> TargetFollower<R> {
    pub fn new(
        name: String,
        seat: Player,
        target: TargetSolution<R>,
        compiled: Arc<CompiledGame<R>>,
    ) -> Self {
        TargetFollower {
            name,
            seat,
            target,
            compiled,
            round: 0,
        }
    }
}

impl<R: Real> Agent<R> for TargetFollower<R> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn begin_round(&mut self, round: usize) {
        self.round = round;
    }

    fn act(&mut self, state: &StateId, _rng: &mut ChaCha8Rng) -> ActionIndex {
        let s = self.compiled.state_index(state).unwrap_or(0);
        self.target.plan_for_round(self.round).policy[s].of(self.seat)
    }

    fn observe(&mut self, _mv: &MoveRecord<R>) {}

    fn end_round(&mut self, _own_total: R) {}
}

/// Plays the seat's maximin mixed strategy every move: the best response to
/// an associate assumed to be minimizing our payoff.
pub struct MaximinFollower<R> {
    name: String,
    compiled: Arc<CompiledGame<R>>,
    /// Zero-sum profile protecting this seat.
    security: Arc<SecurityProfile<R>>,
}

impl<R: Real> MaximinFollower<R> {
    pub fn new(name: String, compiled: Arc<CompiledGame<R>>, security: Arc<SecurityProfile<R>>) -> Self {
        MaximinFollower {
            name,
            compiled,
            security,
        }
    }
}

impl<R: Real> Agent<R> for MaximinFollower<R> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn begin_round(&mut self, _round: usize) {}

    fn act(&mut self, state: &StateId, rng: &mut ChaCha8Rng) -> ActionIndex {
        let s = self.compiled.state_index(state).unwrap_or(0);
        sample_mixed(&self.security.maximin[s], rng)
    }

    fn observe(&mut self, _mv: &MoveRecord<R>) {}

    fn end_round(&mut self, _own_total: R) {}
}

/// Model-based best responder: fits a per-state frequency model of the
/// associate and replans a best response at the start of each round it
/// actually plays, exploring with a decaying epsilon.
pub struct MbrlExpert<R> {
    name: String,
    seat: Player,
    compiled: Arc<CompiledGame<R>>,
    hub: Rc<ModelHub<R>>,
    params: PlanningParams<R>,
    policy: Vec<ActionIndex>,
    planned_version: Option<u64>,
    planned_round: Option<usize>,
    round: usize,
    warned_divergence: bool,
}

impl<R: Real> MbrlExpert<R> {
    pub fn new(
        name: String,
        seat: Player,
        compiled: Arc<CompiledGame<R>>,
        hub: Rc<ModelHub<R>>,
        params: PlanningParams<R>,
    ) -> Self {
        let policy = vec![0; compiled.num_states()];
        MbrlExpert {
            name,
            seat,
            compiled,
            hub,
            params,
            policy,
            planned_version: None,
            planned_round: None,
            round: 0,
            warned_divergence: false,
        }
    }

    /// Exploration rate for a 0-based round index.
    pub fn epsilon(round: usize) -> f64 {
        1.0 / (1.0 + round as f64 / 20.0)
    }

    fn replan_if_stale(&mut self) {
        if self.planned_round == Some(self.round) {
            return; // plans are refreshed at most once per round
        }
        let version = self.hub.version();
        if self.planned_version != Some(version) {
            let model = self.hub.opp_model.borrow();
            let result = best_response(
                &self.compiled,
                self.seat,
                |s| model.predict(s),
                &self.params,
            );
            match result {
                Ok((policy, _)) => self.policy = policy,
                Err(e) => {
                    if !self.warned_divergence {
                        self.warned_divergence = true;
                        log::warn!("{}: keeping stale plan ({e})", self.name);
                    }
                }
            }
            self.planned_version = Some(version);
        }
        self.planned_round = Some(self.round);
    }
}

impl<R: Real> Agent<R> for MbrlExpert<R> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn begin_round(&mut self, round: usize) {
        self.round = round;
    }

    fn act(&mut self, state: &StateId, rng: &mut ChaCha8Rng) -> ActionIndex {
        self.replan_if_stale();
        let s = self.compiled.state_index(state).unwrap_or(0);
        let n = self.compiled.num_actions_of(s, self.seat);
        if rng.gen::<f64>() < Self::epsilon(self.round) {
            rng.gen_range(0..n)
        } else {
            self.policy[s].min(n - 1)
        }
    }

    fn observe(&mut self, _mv: &MoveRecord<R>) {}

    fn end_round(&mut self, _own_total: R) {}
}

/// Greedy best-response action against a frequency model, exploring with
/// probability `epsilon`.
pub fn mbrl_act<R: Real>(
    compiled: &CompiledGame<R>,
    seat: Player,
    model: &super::FictitiousModel,
    state: usize,
    epsilon: f64,
    params: &PlanningParams<R>,
    rng: &mut ChaCha8Rng,
) -> crate::error::Result<ActionIndex> {
    let n = compiled.num_actions_of(state, seat);
    if rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..n));
    }
    let (policy, _) = best_response(compiled, seat, |s| model.predict::<R>(s), params)?;
    Ok(policy[state])
}

/// Normalized frequency estimate of the modeled player's mix in a state.
pub fn fictitious_predict<R: Real>(model: &super::FictitiousModel, state: usize) -> Vec<R> {
    model.predict::<R>(state)
}
