//! Leader strategies: play a target solution, punish profitable deviations.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::planning::{CompiledGame, SecurityProfile, TargetSolution};
use crate::rsg::{ActionIndex, Agent, MoveRecord, Player, StateId};
use crate::scalar::Real;

use super::sample_mixed;

/// Parameters of the punishment bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct LeaderParams<R> {
    /// Aspiration smoothing factor in (0, 1).
    pub lambda: R,
    /// Extra amount to extract beyond the deviation's counterfactual value.
    pub delta: R,
    /// Starting aspiration (the seat's egalitarian payoff).
    pub alpha0: R,
}

/// Punishment trigger: the deviation must both lower the leader's value
/// (condition on the value drop across the move) and leave the round on
/// course to miss the leader's aspiration.
pub fn punish_condition<R: Real>(
    v_own_prev: R,
    v_own_now: R,
    r_last: R,
    payoffs_so_far: R,
    alpha: R,
) -> bool {
    v_own_now + r_last < v_own_prev && payoffs_so_far + v_own_now < alpha
}

/// Exponentially smoothed aspiration level.
pub fn aspiration_update<R: Real>(alpha_prev: R, lambda: R, round_total: R) -> R {
    lambda * alpha_prev + (R::one() - lambda) * round_total
}

/// Punishment ends once the deviator's realized take since the deviation has
/// fallen to `delta` below what target play would have paid it.
pub fn punishment_settled<R: Real>(realized: R, counterfactual: R, delta: R) -> bool {
    realized <= counterfactual - delta
}

/// Plays its share of a target solution; on a harmful deviation, switches to
/// the attack strategy until the deviator's gain is extracted.
pub struct LeaderExpert<R> {
    name: String,
    seat: Player,
    target: TargetSolution<R>,
    compiled: Arc<CompiledGame<R>>,
    /// Zero-sum profile protecting the opponent; its attack side is ours.
    attack: Arc<SecurityProfile<R>>,
    lambda: R,
    delta: R,
    alpha: R,
    round: usize,
    round_own_sum: R,
    punishing: bool,
    counterfactual: R,
    realized: R,
    /// Rounds spent in the current punishment spell.
    pub rounds_punishing: usize,
    warned_persistent: bool,
}

impl<R: Real> LeaderExpert<R> {
    pub fn new(
        name: String,
        seat: Player,
        target: TargetSolution<R>,
        compiled: Arc<CompiledGame<R>>,
        attack: Arc<SecurityProfile<R>>,
        params: &LeaderParams<R>,
    ) -> Self {
        debug_assert_eq!(attack.protect, seat.other());
        LeaderExpert {
            name,
            seat,
            target,
            compiled,
            attack,
            lambda: params.lambda,
            delta: params.delta,
            alpha: params.alpha0,
            round: 0,
            round_own_sum: R::zero(),
            punishing: false,
            counterfactual: R::zero(),
            realized: R::zero(),
            rounds_punishing: 0,
            warned_persistent: false,
        }
    }

    pub fn is_punishing(&self) -> bool {
        self.punishing
    }

    /// Outstanding amount still to extract from the deviator.
    pub fn debt(&self) -> R {
        if self.punishing {
            (self.realized - (self.counterfactual - self.delta)).max(R::zero())
        } else {
            R::zero()
        }
    }

    pub fn aspiration(&self) -> R {
        self.alpha
    }

    pub fn target(&self) -> &TargetSolution<R> {
        &self.target
    }
}

impl<R: Real> Agent<R> for LeaderExpert<R> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn begin_round(&mut self, round: usize) {
        self.round = round;
        self.round_own_sum = R::zero();
    }

    fn act(&mut self, state: &StateId, rng: &mut ChaCha8Rng) -> ActionIndex {
        let s = self.compiled.state_index(state).unwrap_or(0);
        if self.punishing {
            sample_mixed(&self.attack.attack[s], rng)
        } else {
            self.target.plan_for_round(self.round).policy[s].of(self.seat)
        }
    }

    fn observe(&mut self, mv: &MoveRecord<R>) {
        let Some(s) = self.compiled.state_index(&mv.state) else {
            return;
        };
        self.round_own_sum = self.round_own_sum + mv.rewards.of(self.seat);
        if self.punishing {
            self.realized = self.realized + mv.rewards.of(self.seat.other());
            return;
        }
        let plan = self.target.plan_for_round(self.round);
        let opp = self.seat.other();
        if mv.action.of(opp) == plan.policy[s].of(opp) {
            return; // on target; stochastic transitions are not deviations
        }
        let s_now = self.compiled.state_index(&mv.next).unwrap_or(s);
        let triggered = punish_condition(
            plan.value_of(s, self.seat),
            plan.value_of(s_now, self.seat),
            mv.rewards.of(self.seat),
            self.round_own_sum,
            self.alpha,
        );
        if triggered {
            self.punishing = true;
            // What target play from here was worth to the deviator, counted
            // from the deviation move itself.
            self.counterfactual = plan.value_of(s, opp);
            self.realized = mv.rewards.of(opp);
            self.rounds_punishing = 0;
        }
    }

    fn end_round(&mut self, own_total: R) {
        self.alpha = aspiration_update(self.alpha, self.lambda, own_total);
        if self.punishing {
            self.rounds_punishing += 1;
            if punishment_settled(self.realized, self.counterfactual, self.delta) {
                self.punishing = false;
                self.rounds_punishing = 0;
            } else if self.rounds_punishing > 100 && !self.warned_persistent {
                self.warned_persistent = true;
                log::warn!(
                    "{}: punishment has persisted for {} rounds (deviator still above its counterfactual)",
                    self.name,
                    self.rounds_punishing
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aspiration_arithmetic() {
        assert_eq!(aspiration_update(10.0, 0.9, 20.0), 11.0);
        assert_eq!(aspiration_update(7.5, 0.9, 7.5), 7.5);
    }

    #[test]
    fn aspiration_converges_geometrically() {
        let mut alpha: f64 = -3.0;
        for _ in 0..500 {
            alpha = aspiration_update(alpha, 0.9, 4.0);
        }
        assert!((alpha - 4.0).abs() < 1e-6);
    }

    #[test]
    fn trigger_requires_a_value_drop() {
        // The reward recovered the value drop: no punishment.
        assert!(!punish_condition(10.0, 9.0, 2.0, 11.0, 100.0));
        // Dropped value and missed aspiration: punish.
        assert!(punish_condition(10.0, 8.0, 0.0, 1.0, 12.0));
        // Deviation that raises the leader's value is tolerated.
        assert!(!punish_condition(10.0, 12.0, 0.0, 1.0, 12.0));
    }

    #[test]
    fn settlement_threshold() {
        // Counterfactual 10, delta 1: settle at 9 or below.
        assert!(!punishment_settled(9.5, 10.0, 1.0));
        assert!(punishment_settled(8.5, 10.0, 1.0));
        assert!(punishment_settled(9.0, 10.0, 1.0));
        // Boundary with no margin.
        assert!(punishment_settled(10.0, 10.0, 0.0));
    }
}
