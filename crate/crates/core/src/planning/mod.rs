//! Joint-MDP planning, target solutions, and zero-sum security profiles.
//!
//! Target solutions come from solving the joint MDP whose payoff is a convex
//! combination `ω·r1 + (1−ω)·r2`; ω is always anchored to player one so both
//! seats derive identical plans for corresponding weights. Punishment and
//! security come from the zero-sum game on one player's reward.

mod matrix_game;

pub use matrix_game::{matrix_game_solve, matrix_game_solve_full, MatrixGameSolution};

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{GabeError, Result};
use crate::rsg::{enumerate_states, JointAction, Player, RewardPair, Rsg, StateId};
use crate::scalar::{real, Real};

/// Solver knobs.
#[derive(Debug, Clone, Copy)]
pub struct PlanningParams<R> {
    /// Value-iteration convergence threshold.
    pub tolerance: R,
    /// Zero-sum (stage game) iteration threshold.
    pub zero_sum_tolerance: R,
    /// Iteration cap before reporting divergence.
    pub max_iterations: usize,
    /// Reachable-state bound.
    pub state_bound: usize,
}

impl<R: Real> Default for PlanningParams<R> {
    fn default() -> Self {
        PlanningParams {
            tolerance: real(1e-9),
            zero_sum_tolerance: real(1e-6),
            max_iterations: 100_000,
            state_bound: crate::rsg::DEFAULT_STATE_BOUND,
        }
    }
}

/// A game flattened into dense index-based tables.
///
/// State 0 is the start state; states appear in breadth-first discovery
/// order. All planners and model-based agents work on this representation.
pub struct CompiledGame<R> {
    pub name: String,
    pub states: Vec<StateId>,
    pub index: HashMap<StateId, usize>,
    pub goal: Vec<bool>,
    /// Per state: (player-one actions, player-two actions).
    pub actions: Vec<(usize, usize)>,
    /// Per state, indexed `a1 * n2 + a2`.
    pub rewards: Vec<Vec<RewardPair<R>>>,
    /// Per state and joint action: successor index and probability.
    pub transitions: Vec<Vec<Vec<(usize, R)>>>,
}

impl<R: Real> CompiledGame<R> {
    pub fn compile(game: &dyn Rsg<R>, bound: usize) -> Result<Self> {
        let states = enumerate_states(game, bound)?;
        let index: HashMap<StateId, usize> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let mut goal = Vec::with_capacity(states.len());
        let mut actions = Vec::with_capacity(states.len());
        let mut rewards = Vec::with_capacity(states.len());
        let mut transitions = Vec::with_capacity(states.len());
        let tol = real::<R>(1e-9);
        for s in &states {
            let is_goal = game.is_goal(s);
            goal.push(is_goal);
            if is_goal {
                actions.push((1, 1));
                rewards.push(vec![RewardPair::zero()]);
                transitions.push(vec![Vec::new()]);
                continue;
            }
            let n1 = game.num_actions(s, Player::P1);
            let n2 = game.num_actions(s, Player::P2);
            actions.push((n1, n2));
            let mut row_r = Vec::with_capacity(n1 * n2);
            let mut row_t = Vec::with_capacity(n1 * n2);
            for a1 in 0..n1 {
                for a2 in 0..n2 {
                    let joint = JointAction::new(a1, a2);
                    row_r.push(game.rewards(s, joint));
                    let dist = game.transition(s, joint);
                    let mut total = R::zero();
                    let compiled: Vec<(usize, R)> = dist
                        .into_iter()
                        .map(|(next, p)| {
                            if p < R::zero() {
                                return Err(GabeError::Config(format!(
                                    "negative transition probability in `{}`",
                                    game.name()
                                )));
                            }
                            total = total + p;
                            Ok((index[&next], p))
                        })
                        .collect::<Result<_>>()?;
                    if (total - R::one()).abs() > tol {
                        return Err(GabeError::Config(format!(
                            "transition probabilities sum to {total} in `{}`",
                            game.name()
                        )));
                    }
                    row_t.push(compiled);
                }
            }
            rewards.push(row_r);
            transitions.push(row_t);
        }
        Ok(CompiledGame {
            name: game.name().to_string(),
            states,
            index,
            goal,
            actions,
            rewards,
            transitions,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn joint_index(&self, state: usize, action: JointAction) -> usize {
        action.p1 * self.actions[state].1 + action.p2
    }

    pub fn joint_action(&self, state: usize, joint: usize) -> JointAction {
        let n2 = self.actions[state].1;
        JointAction::new(joint / n2, joint % n2)
    }

    pub fn state_index(&self, state: &StateId) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Actions available to one player in a state.
    pub fn num_actions_of(&self, state: usize, player: Player) -> usize {
        match player {
            Player::P1 => self.actions[state].0,
            Player::P2 => self.actions[state].1,
        }
    }
}

/// Deterministic joint policy for one payoff weight, with both players'
/// value tables under that policy.
#[derive(Debug, Clone)]
pub struct JointPlan<R> {
    /// Weight on player one's reward in the planning objective.
    pub omega: R,
    /// Joint action per state (goal states hold a no-op).
    pub policy: Vec<JointAction>,
    pub v1: Vec<R>,
    pub v2: Vec<R>,
    /// `(v1, v2)` at the start state.
    pub payoff: (R, R),
}

impl<R: Real> JointPlan<R> {
    pub fn value_of(&self, state: usize, player: Player) -> R {
        match player {
            Player::P1 => self.v1[state],
            Player::P2 => self.v2[state],
        }
    }
}

/// Solves the joint MDP with payoff `ω·r1 + (1−ω)·r2` by undiscounted value
/// iteration (descending state order, which is a backward sweep for
/// episodic games discovered breadth-first).
///
/// Argmax ties break lexicographically by joint-action index, so plans are
/// reproducible. Fails with a divergence error when the weighted values do
/// not settle within the iteration cap (e.g. positive-reward cycles).
pub fn solve_joint_mdp<R: Real>(
    compiled: &CompiledGame<R>,
    omega: R,
    params: &PlanningParams<R>,
) -> Result<JointPlan<R>> {
    let n = compiled.num_states();
    let sigma = |s: usize, j: usize| -> R {
        let r = compiled.rewards[s][j];
        omega * r.p1 + (R::one() - omega) * r.p2
    };
    let mut v = vec![R::zero(); n];
    converge(params, "joint MDP", &compiled.name, |v_next: &mut Vec<R>, v: &Vec<R>| {
        for s in (0..n).rev() {
            if compiled.goal[s] {
                v_next[s] = R::zero();
                continue;
            }
            let mut best = R::neg_infinity();
            for j in 0..compiled.rewards[s].len() {
                let q = sigma(s, j) + expected(compiled, s, j, v);
                if q > best {
                    best = q;
                }
            }
            v_next[s] = best;
        }
    }, &mut v)?;

    // Extract the policy from the converged weighted values.
    let mut policy = vec![JointAction::new(0, 0); n];
    for s in 0..n {
        if compiled.goal[s] {
            continue;
        }
        let mut best = R::neg_infinity();
        let mut arg = 0;
        for j in 0..compiled.rewards[s].len() {
            let q = sigma(s, j) + expected(compiled, s, j, &v);
            if q > best {
                best = q;
                arg = j;
            }
        }
        policy[s] = compiled.joint_action(s, arg);
    }

    let (v1, v2) = evaluate_policy(compiled, &policy, params)?;
    let payoff = (v1[0], v2[0]);
    Ok(JointPlan {
        omega,
        policy,
        v1,
        v2,
        payoff,
    })
}

/// Per-player expected returns of a fixed joint policy.
pub fn evaluate_policy<R: Real>(
    compiled: &CompiledGame<R>,
    policy: &[JointAction],
    params: &PlanningParams<R>,
) -> Result<(Vec<R>, Vec<R>)> {
    let n = compiled.num_states();
    let mut v1 = vec![R::zero(); n];
    let mut v2 = vec![R::zero(); n];
    // Sweep both players jointly; the policy is fixed so this is linear.
    let mut merged: Vec<R> = vec![R::zero(); 2 * n];
    converge(
        params,
        "policy evaluation",
        &compiled.name,
        |next: &mut Vec<R>, cur: &Vec<R>| {
            for s in (0..n).rev() {
                if compiled.goal[s] {
                    next[s] = R::zero();
                    next[n + s] = R::zero();
                    continue;
                }
                let j = compiled.joint_index(s, policy[s]);
                let r = compiled.rewards[s][j];
                let mut e1 = R::zero();
                let mut e2 = R::zero();
                for &(t, p) in &compiled.transitions[s][j] {
                    e1 = e1 + p * cur[t];
                    e2 = e2 + p * cur[n + t];
                }
                next[s] = r.p1 + e1;
                next[n + s] = r.p2 + e2;
            }
        },
        &mut merged,
    )?;
    v1.copy_from_slice(&merged[..n]);
    v2.copy_from_slice(&merged[n..]);
    Ok((v1, v2))
}

fn expected<R: Real>(compiled: &CompiledGame<R>, s: usize, j: usize, v: &[R]) -> R {
    let mut e = R::zero();
    for &(t, p) in &compiled.transitions[s][j] {
        e = e + p * v[t];
    }
    e
}

/// Runs `sweep` on a value vector until the sup-norm change drops below
/// tolerance, or errors after the iteration cap.
fn converge<R: Real>(
    params: &PlanningParams<R>,
    what: &str,
    game: &str,
    mut sweep: impl FnMut(&mut Vec<R>, &Vec<R>),
    v: &mut Vec<R>,
) -> Result<()> {
    let mut next = v.clone();
    for _ in 0..params.max_iterations {
        sweep(&mut next, v);
        let mut delta = R::zero();
        for (a, b) in next.iter().zip(v.iter()) {
            let d = (*a - *b).abs();
            if d > delta {
                delta = d;
            }
        }
        std::mem::swap(v, &mut next);
        if delta <= params.tolerance {
            return Ok(());
        }
    }
    Err(GabeError::Divergence(format!(
        "{what} on `{game}` did not converge within {} iterations",
        params.max_iterations
    )))
}

/// A pure or length-2 alternating joint plan with its start-state payoff.
#[derive(Clone)]
pub struct TargetSolution<R> {
    /// One plan for a pure solution; two (lower-ω first) for alternating.
    plans: Vec<Arc<JointPlan<R>>>,
    /// Pure: every grid ω that produced this payoff vector. Alternating:
    /// the two plans' first ωs.
    pub omegas: Vec<R>,
    /// Payoff at the start state (cycle-averaged for alternating).
    pub payoff: (R, R),
}

impl<R: Real> TargetSolution<R> {
    pub(crate) fn from_parts(
        plans: Vec<Arc<JointPlan<R>>>,
        omegas: Vec<R>,
        payoff: (R, R),
    ) -> Self {
        TargetSolution {
            plans,
            omegas,
            payoff,
        }
    }

    pub fn is_alternating(&self) -> bool {
        self.plans.len() == 2
    }

    /// Plan in force for a 0-based round index: alternating solutions play
    /// their lower-ω plan on even indices (first, third, ... rounds).
    pub fn plan_for_round(&self, round: usize) -> &JointPlan<R> {
        if self.plans.len() == 1 {
            &self.plans[0]
        } else {
            &self.plans[round % 2]
        }
    }

    pub fn plans(&self) -> &[Arc<JointPlan<R>>] {
        &self.plans
    }

    pub fn payoff_of(&self, player: Player) -> R {
        match player {
            Player::P1 => self.payoff.0,
            Player::P2 => self.payoff.1,
        }
    }

    pub fn label(&self) -> String {
        let omegas = self
            .omegas
            .iter()
            .map(|w| format!("{}", w))
            .collect::<Vec<_>>()
            .join(",");
        if self.is_alternating() {
            format!("alt(ω={omegas})")
        } else {
            format!("pure(ω={omegas})")
        }
    }

    /// Deterministic ordering key: lower ω first, then pure before
    /// alternating, then payoff.
    fn tie_key(&self) -> (R, u8, R, R, R) {
        (
            self.omegas[0],
            self.is_alternating() as u8,
            *self.omegas.last().unwrap(),
            self.payoff.0,
            self.payoff.1,
        )
    }
}

fn key_less<R: Real>(a: &TargetSolution<R>, b: &TargetSolution<R>) -> bool {
    a.tie_key()
        .partial_cmp(&b.tie_key())
        .map(|o| o == std::cmp::Ordering::Less)
        .unwrap_or(false)
}

/// Default ω grid: 0.1 .. 0.9 in steps of 0.1.
pub fn default_omega_grid<R: Real>() -> Vec<R> {
    (1..=9).map(|i| real(i as f64 / 10.0)).collect()
}

/// Computes every pure target solution over the ω grid (deduplicated by
/// payoff vector) plus every alternating pair of distinct pure solutions.
pub fn enumerate_targets<R: Real>(
    compiled: &CompiledGame<R>,
    omega_grid: &[R],
    params: &PlanningParams<R>,
) -> Result<Vec<TargetSolution<R>>> {
    assert!(!omega_grid.is_empty(), "omega grid must be non-empty");
    let mut grid: Vec<R> = omega_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let dedupe_tol = real::<R>(1e-6);
    let mut pures: Vec<TargetSolution<R>> = Vec::new();
    for &omega in &grid {
        let plan = Arc::new(solve_joint_mdp(compiled, omega, params)?);
        let payoff = plan.payoff;
        if let Some(existing) = pures.iter_mut().find(|t| {
            (t.payoff.0 - payoff.0).abs() <= dedupe_tol
                && (t.payoff.1 - payoff.1).abs() <= dedupe_tol
        }) {
            existing.omegas.push(omega);
        } else {
            pures.push(TargetSolution {
                plans: vec![plan],
                omegas: vec![omega],
                payoff,
            });
        }
    }

    let mut targets = pures.clone();
    let two = real::<R>(2.0);
    for i in 0..pures.len() {
        for j in (i + 1)..pures.len() {
            let a = &pures[i];
            let b = &pures[j];
            targets.push(TargetSolution {
                plans: vec![a.plans[0].clone(), b.plans[0].clone()],
                omegas: vec![a.omegas[0], b.omegas[0]],
                payoff: (
                    (a.payoff.0 + b.payoff.0) / two,
                    (a.payoff.1 + b.payoff.1) / two,
                ),
            });
        }
    }
    Ok(targets)
}

/// Selects up to `k` targets for one seat, in order: the egalitarian
/// solution, the seat's best payoff subject to the other player's security
/// level, the mirror of that, then greedy max-min-distance fillers.
/// Unsatisfiable security slots are skipped; duplicates collapse.
pub fn select_targets<R: Real>(
    candidates: &[TargetSolution<R>],
    seat: Player,
    security_own: R,
    security_other: R,
    k: usize,
) -> Vec<TargetSolution<R>> {
    assert!(!candidates.is_empty(), "no target candidates");
    let slack = real::<R>(1e-9);
    let mut chosen: Vec<usize> = Vec::new();

    let own = |i: usize| candidates[i].payoff_of(seat);
    let other = |i: usize| candidates[i].payoff_of(seat.other());

    // 1: egalitarian (max-min payoff).
    pick_best(
        candidates,
        &mut chosen,
        |i| {
            let p = candidates[i].payoff;
            if p.0 < p.1 {
                p.0
            } else {
                p.1
            }
        },
        |_| true,
    );
    // 2: best own payoff, other player at least at its security level.
    pick_best(candidates, &mut chosen, own, |i| {
        other(i) >= security_other - slack
    });
    // 3: best payoff for the other player, own at least at security.
    pick_best(candidates, &mut chosen, other, |i| {
        own(i) >= security_own - slack
    });
    // 4..k: spread out by Euclidean distance from the selected vectors.
    while chosen.len() < k.min(candidates.len()) {
        let selected = chosen.clone();
        let before = chosen.len();
        pick_best(
            candidates,
            &mut chosen,
            |i| {
                selected
                    .iter()
                    .map(|&s| {
                        let (dx, dy) = (
                            candidates[i].payoff.0 - candidates[s].payoff.0,
                            candidates[i].payoff.1 - candidates[s].payoff.1,
                        );
                        (dx * dx + dy * dy).sqrt()
                    })
                    .fold(R::infinity(), |a, b| if b < a { b } else { a })
            },
            |_| true,
        );
        if chosen.len() == before {
            break;
        }
    }

    chosen.truncate(k);
    chosen.into_iter().map(|i| candidates[i].clone()).collect()
}

/// Adds the best admissible, not-yet-chosen candidate under `value`,
/// breaking near-ties with the deterministic target key.
fn pick_best<R: Real>(
    candidates: &[TargetSolution<R>],
    chosen: &mut Vec<usize>,
    value: impl Fn(usize) -> R,
    admissible: impl Fn(usize) -> bool,
) {
    let slack = real::<R>(1e-9);
    let mut best: Option<usize> = None;
    for i in 0..candidates.len() {
        if chosen.contains(&i) || !admissible(i) {
            continue;
        }
        best = Some(match best {
            None => i,
            Some(b) => {
                let (vi, vb) = (value(i), value(b));
                if vi > vb + slack || (vi >= vb - slack && key_less(&candidates[i], &candidates[b]))
                {
                    i
                } else {
                    b
                }
            }
        });
    }
    if let Some(i) = best {
        chosen.push(i);
    }
}

/// Optimal single-agent response against a fixed per-state opponent mix.
///
/// `opponent(s)` gives the modeled distribution over the other player's
/// actions in state `s`. Returns the greedy policy (own action per state,
/// lexicographic tie-break) and its value table.
pub fn best_response<R: Real>(
    compiled: &CompiledGame<R>,
    seat: Player,
    opponent: impl Fn(usize) -> Vec<R>,
    params: &PlanningParams<R>,
) -> Result<(Vec<usize>, Vec<R>)> {
    let n = compiled.num_states();
    let mix: Vec<Vec<R>> = (0..n).map(&opponent).collect();
    let q_value = |s: usize, own: usize, v: &[R]| -> R {
        let mut q = R::zero();
        for (other, &p) in mix[s].iter().enumerate() {
            if p == R::zero() {
                continue;
            }
            let joint = match seat {
                Player::P1 => JointAction::new(own, other),
                Player::P2 => JointAction::new(other, own),
            };
            let j = compiled.joint_index(s, joint);
            q = q + p * (compiled.rewards[s][j].of(seat) + expected(compiled, s, j, v));
        }
        q
    };
    let mut v = vec![R::zero(); n];
    converge(
        params,
        "best response",
        &compiled.name,
        |next: &mut Vec<R>, cur: &Vec<R>| {
            for s in (0..n).rev() {
                if compiled.goal[s] {
                    next[s] = R::zero();
                    continue;
                }
                let own_n = compiled.num_actions_of(s, seat);
                let mut best = R::neg_infinity();
                for a in 0..own_n {
                    let q = q_value(s, a, cur);
                    if q > best {
                        best = q;
                    }
                }
                next[s] = best;
            }
        },
        &mut v,
    )?;
    let mut policy = vec![0usize; n];
    for s in 0..n {
        if compiled.goal[s] {
            continue;
        }
        let own_n = compiled.num_actions_of(s, seat);
        let mut best = R::neg_infinity();
        for a in 0..own_n {
            let q = q_value(s, a, &v);
            if q > best {
                best = q;
                policy[s] = a;
            }
        }
    }
    Ok((policy, v))
}

/// Zero-sum solution of the game restricted to one player's reward.
///
/// `maximin[s]` is the protected player's optimal mixed action in state `s`;
/// `attack[s]` is the adversary's minimizing mixed action, used as the
/// punishment strategy against that player.
#[derive(Debug, Clone)]
pub struct SecurityProfile<R> {
    pub protect: Player,
    pub values: Vec<R>,
    /// Guaranteed value at the start state.
    pub security_value: R,
    pub maximin: Vec<Vec<R>>,
    pub attack: Vec<Vec<R>>,
}

/// Solves the zero-sum stochastic game on the protected player's reward by
/// iterating stage matrix games over the value table.
pub fn solve_zero_sum<R: Real>(
    compiled: &CompiledGame<R>,
    protect: Player,
    params: &PlanningParams<R>,
) -> Result<SecurityProfile<R>> {
    let n = compiled.num_states();
    let stage_matrix = |s: usize, v: &[R]| -> Vec<Vec<R>> {
        let (n1, n2) = compiled.actions[s];
        let (np, no) = match protect {
            Player::P1 => (n1, n2),
            Player::P2 => (n2, n1),
        };
        (0..np)
            .map(|ap| {
                (0..no)
                    .map(|ao| {
                        let joint = match protect {
                            Player::P1 => JointAction::new(ap, ao),
                            Player::P2 => JointAction::new(ao, ap),
                        };
                        let j = compiled.joint_index(s, joint);
                        compiled.rewards[s][j].of(protect) + expected(compiled, s, j, v)
                    })
                    .collect()
            })
            .collect()
    };

    let mut v = vec![R::zero(); n];
    let zs_params = PlanningParams {
        tolerance: params.zero_sum_tolerance,
        ..*params
    };
    converge(
        &zs_params,
        "zero-sum solve",
        &compiled.name,
        |next: &mut Vec<R>, cur: &Vec<R>| {
            for s in (0..n).rev() {
                if compiled.goal[s] {
                    next[s] = R::zero();
                    continue;
                }
                let m = stage_matrix(s, cur);
                let (value, _) = matrix_game_solve(&m);
                next[s] = value;
            }
        },
        &mut v,
    )?;

    let mut maximin = Vec::with_capacity(n);
    let mut attack = Vec::with_capacity(n);
    for s in 0..n {
        if compiled.goal[s] {
            maximin.push(vec![R::one()]);
            attack.push(vec![R::one()]);
            continue;
        }
        let m = stage_matrix(s, &v);
        let sol = matrix_game_solve_full(&m);
        maximin.push(sol.row_strategy);
        attack.push(sol.col_strategy);
    }
    Ok(SecurityProfile {
        protect,
        security_value: v[0],
        values: v,
        maximin,
        attack,
    })
}

/// Human-readable schedule of a plan: walks the most likely trajectory and
/// lists `(move, action)` entries for non-trivial actions.
pub fn describe_plan<R: Real>(
    game: &dyn Rsg<R>,
    compiled: &CompiledGame<R>,
    plan: &JointPlan<R>,
) -> String {
    let mut entries = Vec::new();
    let mut s = 0usize;
    for t in 0..compiled.num_states().min(200) {
        if compiled.goal[s] {
            break;
        }
        let action = plan.policy[s];
        let id = &compiled.states[s];
        for (player, a) in [(Player::P1, action.p1), (Player::P2, action.p2)] {
            let desc = game.describe_action(id, player, a);
            if !desc.is_empty() && desc != "stay" {
                entries.push(format!("({t},{desc})"));
            }
        }
        let j = compiled.joint_index(s, action);
        let next = compiled.transitions[s][j]
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|&(t, _)| t)
            .unwrap_or(s);
        if next == s {
            break;
        }
        s = next;
    }
    entries.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{stage_game, TabularRsg};

    fn params() -> PlanningParams<f64> {
        PlanningParams::default()
    }

    /// Two-state game with a stochastic branch, used across planning tests.
    fn fixture() -> TabularRsg<f64> {
        let mut g = TabularRsg::new("fixture", 4);
        let s0 = g.add_state("s0", 2, 2, false);
        let s1 = g.add_state("s1", 2, 2, false);
        let goal = g.add_state("goal", 1, 1, true);
        g.set_outcome(s0, 0, 0, (1.0, 1.0), vec![(s1, 0.6), (goal, 0.4)]);
        g.set_outcome(s0, 0, 1, (0.0, 2.5), vec![(goal, 1.0)]);
        g.set_outcome(s0, 1, 0, (2.5, 0.0), vec![(goal, 1.0)]);
        g.set_outcome(s0, 1, 1, (0.5, 0.5), vec![(goal, 1.0)]);
        g.set_outcome(s1, 0, 0, (2.0, 2.0), vec![(goal, 1.0)]);
        g.set_outcome(s1, 0, 1, (0.0, 3.0), vec![(goal, 1.0)]);
        g.set_outcome(s1, 1, 0, (3.0, 0.0), vec![(goal, 1.0)]);
        g.set_outcome(s1, 1, 1, (0.2, 0.2), vec![(goal, 1.0)]);
        g.set_start(s0);
        g
    }

    #[test]
    fn omega_one_is_single_agent_control() {
        // With all weight on player one, the plan maximizes r1 alone. Brute
        // force over the 16 joint policies: s0=(0,0), s1=(1,0) nets
        // 1 + 0.6 * 3 = 2.8, beating the myopic 2.5 exit.
        let g = fixture();
        let compiled = CompiledGame::compile(&g, 10_000).unwrap();
        let plan = solve_joint_mdp(&compiled, 1.0, &params()).unwrap();
        assert!((plan.payoff.0 - 2.8).abs() < 1e-9);
        assert_eq!(plan.policy[0], JointAction::new(0, 0));
        let s1 = compiled.state_index(&g.transition(&g.start_state(), JointAction::new(0, 0))[0].0)
            .unwrap();
        assert_eq!(plan.policy[s1], JointAction::new(1, 0));
    }

    #[test]
    fn dominant_joint_action_selected_everywhere() {
        let g: TabularRsg<f64> = stage_game(
            "dominant",
            &[
                vec![(3.0, 3.0), (1.0, 1.0)],
                vec![(0.0, 0.0), (0.5, 0.5)],
            ],
            2,
        );
        let compiled = CompiledGame::compile(&g, 100).unwrap();
        let plan = solve_joint_mdp(&compiled, 0.5, &params()).unwrap();
        for s in 0..compiled.num_states() {
            if !compiled.goal[s] {
                assert_eq!(plan.policy[s], JointAction::new(0, 0));
            }
        }
    }

    #[test]
    fn divergence_reported_for_positive_cycles() {
        let mut g: TabularRsg<f64> = TabularRsg::new("loop", 2);
        let s0 = g.add_state("s0", 1, 1, false);
        let _goal = g.add_state("goal", 1, 1, true);
        g.set_outcome(s0, 0, 0, (1.0, 1.0), vec![(s0, 1.0)]);
        g.set_start(s0);
        let compiled = CompiledGame::compile(&g, 100).unwrap();
        let err = solve_joint_mdp(&compiled, 0.5, &params()).unwrap_err();
        assert!(matches!(err, GabeError::Divergence(_)));
    }

    #[test]
    fn plan_values_are_consistent_with_policy() {
        let g = fixture();
        let compiled = CompiledGame::compile(&g, 10_000).unwrap();
        let plan = solve_joint_mdp(&compiled, 0.5, &params()).unwrap();
        // ω=0.5 prefers (0,0) everywhere: jointly best.
        assert_eq!(plan.policy[0], JointAction::new(0, 0));
        // v at s0: 1 + 0.6 * 2 = 2.2 for each player.
        assert!((plan.v1[0] - 2.2).abs() < 1e-9);
        assert!((plan.v2[0] - 2.2).abs() < 1e-9);
    }

    #[test]
    fn grid_of_one_yields_one_pure_target() {
        let g = fixture();
        let compiled = CompiledGame::compile(&g, 10_000).unwrap();
        let targets = enumerate_targets(&compiled, &[0.5], &params()).unwrap();
        assert_eq!(targets.len(), 1);
        assert!(!targets[0].is_alternating());
    }

    #[test]
    fn equal_payoff_omegas_merge() {
        let g = fixture();
        let compiled = CompiledGame::compile(&g, 10_000).unwrap();
        let targets = enumerate_targets(&compiled, &[0.45, 0.5, 0.55], &params()).unwrap();
        let pure: Vec<_> = targets.iter().filter(|t| !t.is_alternating()).collect();
        assert_eq!(pure.len(), 1);
        assert_eq!(pure[0].omegas.len(), 3);
    }

    #[test]
    fn alternating_payoffs_are_midpoints() {
        let g = fixture();
        let compiled = CompiledGame::compile(&g, 10_000).unwrap();
        let targets =
            enumerate_targets(&compiled, &default_omega_grid(), &params()).unwrap();
        for t in targets.iter().filter(|t| t.is_alternating()) {
            let a = t.plans()[0].payoff;
            let b = t.plans()[1].payoff;
            assert_eq!(t.payoff.0, (a.0 + b.0) / 2.0);
            assert_eq!(t.payoff.1, (a.1 + b.1) / 2.0);
        }
    }

    #[test]
    fn selection_slots_behave() {
        let g = fixture();
        let compiled = CompiledGame::compile(&g, 10_000).unwrap();
        let targets =
            enumerate_targets(&compiled, &default_omega_grid(), &params()).unwrap();
        let sec1 = solve_zero_sum(&compiled, Player::P1, &params()).unwrap();
        let sec2 = solve_zero_sum(&compiled, Player::P2, &params()).unwrap();
        let selected = select_targets(
            &targets,
            Player::P1,
            sec1.security_value,
            sec2.security_value,
            5,
        );
        assert!(!selected.is_empty());
        assert!(selected.len() <= 5);
        // Slot one is the egalitarian target: no candidate has a larger
        // minimum payoff.
        let egal_min = selected[0].payoff.0.min(selected[0].payoff.1);
        for t in &targets {
            assert!(t.payoff.0.min(t.payoff.1) <= egal_min + 1e-9);
        }
    }

    #[test]
    fn small_candidate_lists_return_whole_list() {
        let g = fixture();
        let compiled = CompiledGame::compile(&g, 10_000).unwrap();
        let targets = enumerate_targets(&compiled, &[0.2, 0.8], &params()).unwrap();
        let n = targets.len();
        let selected = select_targets(&targets, Player::P1, -100.0, -100.0, 5);
        assert_eq!(selected.len(), n.min(5));
    }

    #[test]
    fn single_action_security_is_its_return() {
        let mut g: TabularRsg<f64> = TabularRsg::new("line", 3);
        let s0 = g.add_state("s0", 1, 1, false);
        let s1 = g.add_state("s1", 1, 1, false);
        let goal = g.add_state("goal", 1, 1, true);
        g.set_outcome(s0, 0, 0, (1.5, 0.0), vec![(s1, 1.0)]);
        g.set_outcome(s1, 0, 0, (2.0, 0.0), vec![(goal, 1.0)]);
        g.set_start(s0);
        let compiled = CompiledGame::compile(&g, 100).unwrap();
        let sec = solve_zero_sum(&compiled, Player::P1, &params()).unwrap();
        assert!((sec.security_value - 3.5).abs() < 1e-6);
    }

    #[test]
    fn matching_pennies_security_is_zero_and_mixed() {
        let g: TabularRsg<f64> = stage_game(
            "pennies",
            &[
                vec![(1.0, -1.0), (-1.0, 1.0)],
                vec![(-1.0, 1.0), (1.0, -1.0)],
            ],
            1,
        );
        let compiled = CompiledGame::compile(&g, 100).unwrap();
        let sec = solve_zero_sum(&compiled, Player::P1, &params()).unwrap();
        assert!(sec.security_value.abs() < 1e-6);
        assert!((sec.maximin[0][0] - 0.5).abs() < 1e-6);
        assert!((sec.attack[0][0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn security_matches_mixed_grid_oracle() {
        // Brute force over mixed strategies on a coarse grid for the
        // one-shot stage of the fixture's s1 subgame.
        let g: TabularRsg<f64> = stage_game(
            "stage",
            &[
                vec![(2.0, 2.0), (0.0, 3.0)],
                vec![(3.0, 0.0), (0.2, 0.2)],
            ],
            1,
        );
        let compiled = CompiledGame::compile(&g, 100).unwrap();
        let sec = solve_zero_sum(&compiled, Player::P1, &params()).unwrap();
        let m = [[2.0, 0.0], [3.0, 0.2]];
        let mut best = f64::NEG_INFINITY;
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            let worst = (0..2)
                .map(|c| p * m[0][c] + (1.0 - p) * m[1][c])
                .fold(f64::INFINITY, f64::min);
            best = best.max(worst);
        }
        assert!((sec.security_value - best).abs() < 2e-2);
    }
}
