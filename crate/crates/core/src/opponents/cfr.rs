//! Counterfactual regret minimization over the episodic game.
//!
//! Simultaneous-move states are modeled as one information set per player
//! per state; regrets merge across depths. The vanilla trainer walks the
//! full history tree (bounded by a size check); the external-sampling
//! variant samples the opponent and the transitions, for games whose tree
//! is too large to walk.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GabeError, Result};
use crate::experts::{sample_mixed, FictitiousModel};
use crate::planning::{best_response, CompiledGame, PlanningParams};
use crate::rsg::{ActionIndex, Agent, JointAction, MoveRecord, Player, StateId};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfrVariant {
    Vanilla,
    ExternalSampling,
}

/// Cumulative regrets and strategy sums for both players.
#[derive(Debug, Clone)]
pub struct CfrStrategy<R> {
    regrets: [Vec<Vec<R>>; 2],
    strategy_sums: [Vec<Vec<R>>; 2],
    pub iterations: u64,
}

impl<R: Real> CfrStrategy<R> {
    pub fn new(compiled: &CompiledGame<R>) -> Self {
        let tables = |player: Player| -> Vec<Vec<R>> {
            (0..compiled.num_states())
                .map(|s| vec![R::zero(); compiled.num_actions_of(s, player)])
                .collect()
        };
        CfrStrategy {
            regrets: [tables(Player::P1), tables(Player::P2)],
            strategy_sums: [tables(Player::P1), tables(Player::P2)],
            iterations: 0,
        }
    }

    /// Regret-matching strategy for the current iteration.
    pub fn current(&self, player: Player, state: usize) -> Vec<R> {
        regret_match(&self.regrets[player.index()][state])
    }

    /// Normalized average strategy; uniform where nothing accumulated.
    pub fn average(&self, player: Player, state: usize) -> Vec<R> {
        let sums = &self.strategy_sums[player.index()][state];
        let total: R = sums.iter().copied().sum();
        if total <= R::zero() {
            let n = sums.len();
            return vec![R::one() / real::<R>(n as f64); n];
        }
        sums.iter().map(|&x| x / total).collect()
    }
}

fn regret_match<R: Real>(regrets: &[R]) -> Vec<R> {
    let positive: R = regrets
        .iter()
        .map(|&r| if r > R::zero() { r } else { R::zero() })
        .sum();
    if positive <= R::zero() {
        let n = regrets.len();
        return vec![R::one() / real::<R>(n as f64); n];
    }
    regrets
        .iter()
        .map(|&r| if r > R::zero() { r / positive } else { R::zero() })
        .collect()
}

/// Number of nodes a vanilla tree walk would visit, or `None` when it
/// exceeds `bound` (also bails if the memo itself grows too large).
pub fn vanilla_tree_size<R: Real>(
    compiled: &CompiledGame<R>,
    depth_cap: usize,
    bound: u64,
) -> Option<u64> {
    const MEMO_LIMIT: usize = 2_000_000;
    fn go<R: Real>(
        compiled: &CompiledGame<R>,
        s: usize,
        depth: usize,
        depth_cap: usize,
        bound: u64,
        memo: &mut HashMap<(usize, usize), u64>,
    ) -> Option<u64> {
        if compiled.goal[s] || depth >= depth_cap {
            return Some(1);
        }
        if let Some(&n) = memo.get(&(s, depth)) {
            return Some(n);
        }
        if memo.len() > MEMO_LIMIT {
            return None;
        }
        let mut total = 1u64;
        for joint in 0..compiled.rewards[s].len() {
            for &(t, _) in &compiled.transitions[s][joint] {
                let sub = go(compiled, t, depth + 1, depth_cap, bound, memo)?;
                total = total.saturating_add(sub);
                if total > bound {
                    return None;
                }
            }
        }
        memo.insert((s, depth), total);
        Some(total)
    }
    let mut memo = HashMap::new();
    go(compiled, 0, 0, depth_cap, bound, &mut memo)
}

/// Self-play CFR trainer.
pub struct CfrTrainer<R: Real> {
    compiled: Arc<CompiledGame<R>>,
    pub strategy: CfrStrategy<R>,
    variant: CfrVariant,
    depth_cap: usize,
    rng: ChaCha8Rng,
}

impl<R: Real> CfrTrainer<R> {
    pub fn new(
        compiled: Arc<CompiledGame<R>>,
        variant: CfrVariant,
        depth_cap: usize,
        seed: u64,
    ) -> Self {
        let strategy = CfrStrategy::new(&compiled);
        CfrTrainer {
            compiled,
            strategy,
            variant,
            depth_cap,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn train(&mut self, iterations: u64) {
        for _ in 0..iterations {
            match self.variant {
                CfrVariant::Vanilla => {
                    vanilla_walk(
                        &self.compiled,
                        &mut self.strategy,
                        0,
                        0,
                        self.depth_cap,
                        R::one(),
                        R::one(),
                        R::one(),
                        None,
                        UpdateScope::Both,
                    );
                }
                CfrVariant::ExternalSampling => {
                    for traverser in [Player::P1, Player::P2] {
                        external_walk(
                            &self.compiled,
                            &mut self.strategy,
                            0,
                            0,
                            self.depth_cap,
                            traverser,
                            None,
                            &mut self.rng,
                        );
                    }
                }
            }
            self.strategy.iterations += 1;
        }
    }

    /// Online adaptation: extra iterations in which the opponent's strategy
    /// at states it has actually visited is pinned to its empirical
    /// frequencies; only the adapting player's tables move.
    pub fn adapt_against(&mut self, me: Player, empirical: &FictitiousModel, iterations: u64) {
        for _ in 0..iterations {
            match self.variant {
                CfrVariant::Vanilla => {
                    vanilla_walk(
                        &self.compiled,
                        &mut self.strategy,
                        0,
                        0,
                        self.depth_cap,
                        R::one(),
                        R::one(),
                        R::one(),
                        Some((me.other(), empirical)),
                        UpdateScope::Only(me),
                    );
                }
                CfrVariant::ExternalSampling => {
                    external_walk(
                        &self.compiled,
                        &mut self.strategy,
                        0,
                        0,
                        self.depth_cap,
                        me,
                        Some((me.other(), empirical)),
                        &mut self.rng,
                    );
                }
            }
            self.strategy.iterations += 1;
        }
    }
}

#[derive(Clone, Copy)]
enum UpdateScope {
    Both,
    Only(Player),
}

impl UpdateScope {
    fn includes(self, p: Player) -> bool {
        match self {
            UpdateScope::Both => true,
            UpdateScope::Only(q) => q == p,
        }
    }
}

/// Strategy for `player` at `state`, honoring an empirical pin if present.
fn strategy_at<R: Real>(
    strat: &CfrStrategy<R>,
    pin: Option<(Player, &FictitiousModel)>,
    player: Player,
    state: usize,
) -> Vec<R> {
    if let Some((pinned, model)) = pin {
        if pinned == player && model.visits(state) > 0 {
            return model.predict(state);
        }
    }
    strat.current(player, state)
}

#[allow(clippy::too_many_arguments)]
fn vanilla_walk<R: Real>(
    compiled: &CompiledGame<R>,
    strat: &mut CfrStrategy<R>,
    s: usize,
    depth: usize,
    depth_cap: usize,
    reach1: R,
    reach2: R,
    reach_c: R,
    pin: Option<(Player, &FictitiousModel)>,
    scope: UpdateScope,
) -> (R, R) {
    if compiled.goal[s] || depth >= depth_cap {
        return (R::zero(), R::zero());
    }
    let (n1, n2) = compiled.actions[s];
    let sigma1 = strategy_at(strat, pin, Player::P1, s);
    let sigma2 = strategy_at(strat, pin, Player::P2, s);

    // Continuation value pairs per joint action.
    let mut joint_values = vec![(R::zero(), R::zero()); n1 * n2];
    for a1 in 0..n1 {
        for a2 in 0..n2 {
            let j = a1 * n2 + a2;
            let r = compiled.rewards[s][j];
            let mut v = (r.p1, r.p2);
            for &(t, p) in &compiled.transitions[s][j] {
                let child = vanilla_walk(
                    compiled,
                    strat,
                    t,
                    depth + 1,
                    depth_cap,
                    reach1 * sigma1[a1],
                    reach2 * sigma2[a2],
                    reach_c * p,
                    pin,
                    scope,
                );
                v.0 = v.0 + p * child.0;
                v.1 = v.1 + p * child.1;
            }
            joint_values[j] = v;
        }
    }

    let mut cv1 = vec![R::zero(); n1];
    let mut cv2 = vec![R::zero(); n2];
    for a1 in 0..n1 {
        for a2 in 0..n2 {
            let j = a1 * n2 + a2;
            cv1[a1] = cv1[a1] + sigma2[a2] * joint_values[j].0;
            cv2[a2] = cv2[a2] + sigma1[a1] * joint_values[j].1;
        }
    }
    let u1: R = (0..n1).map(|a| sigma1[a] * cv1[a]).sum();
    let u2: R = (0..n2).map(|a| sigma2[a] * cv2[a]).sum();

    if scope.includes(Player::P1) {
        for a1 in 0..n1 {
            strat.regrets[0][s][a1] = strat.regrets[0][s][a1] + reach2 * reach_c * (cv1[a1] - u1);
            strat.strategy_sums[0][s][a1] =
                strat.strategy_sums[0][s][a1] + reach1 * sigma1[a1];
        }
    }
    if scope.includes(Player::P2) {
        for a2 in 0..n2 {
            strat.regrets[1][s][a2] = strat.regrets[1][s][a2] + reach1 * reach_c * (cv2[a2] - u2);
            strat.strategy_sums[1][s][a2] =
                strat.strategy_sums[1][s][a2] + reach2 * sigma2[a2];
        }
    }
    (u1, u2)
}

/// External-sampling traversal for one player: opponent actions and
/// transitions are sampled, the traverser's actions are all explored.
#[allow(clippy::too_many_arguments)]
fn external_walk<R: Real>(
    compiled: &CompiledGame<R>,
    strat: &mut CfrStrategy<R>,
    s: usize,
    depth: usize,
    depth_cap: usize,
    me: Player,
    pin: Option<(Player, &FictitiousModel)>,
    rng: &mut ChaCha8Rng,
) -> R {
    if compiled.goal[s] || depth >= depth_cap {
        return R::zero();
    }
    let opp = me.other();
    let sigma_me = strategy_at(strat, pin, me, s);
    let sigma_opp = strategy_at(strat, pin, opp, s);
    let b = sample_mixed(&sigma_opp, rng);

    let own_n = compiled.num_actions_of(s, me);
    let mut values = vec![R::zero(); own_n];
    for a in 0..own_n {
        let joint = match me {
            Player::P1 => JointAction::new(a, b),
            Player::P2 => JointAction::new(b, a),
        };
        let j = compiled.joint_index(s, joint);
        let next = {
            let dist = &compiled.transitions[s][j];
            if dist.len() == 1 {
                dist[0].0
            } else {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut chosen = dist[dist.len() - 1].0;
                for &(t, p) in dist {
                    acc += p.to_f64_lossy();
                    if u < acc {
                        chosen = t;
                        break;
                    }
                }
                chosen
            }
        };
        values[a] = compiled.rewards[s][j].of(me)
            + external_walk(compiled, strat, next, depth + 1, depth_cap, me, pin, rng);
    }
    let u: R = (0..own_n).map(|a| sigma_me[a] * values[a]).sum();
    for a in 0..own_n {
        strat.regrets[me.index()][s][a] = strat.regrets[me.index()][s][a] + (values[a] - u);
    }
    // The sampled opponent node accumulates its current mix.
    for (bb, &p) in sigma_opp.iter().enumerate() {
        strat.strategy_sums[opp.index()][s][bb] = strat.strategy_sums[opp.index()][s][bb] + p;
    }
    u
}

/// Sum of both players' best-response gains over the average profile: zero
/// exactly at a Nash equilibrium, and the exploitability in zero-sum games.
pub fn nash_conv<R: Real>(
    compiled: &CompiledGame<R>,
    strat: &CfrStrategy<R>,
    params: &PlanningParams<R>,
) -> Result<R> {
    let (_, br1) = best_response(compiled, Player::P1, |s| strat.average(Player::P2, s), params)?;
    let (_, br2) = best_response(compiled, Player::P2, |s| strat.average(Player::P1, s), params)?;
    let (u1, u2) = profile_value(compiled, strat, params)?;
    Ok((br1[0] - u1) + (br2[0] - u2))
}

/// Expected value pair of both players playing their average strategies.
pub fn profile_value<R: Real>(
    compiled: &CompiledGame<R>,
    strat: &CfrStrategy<R>,
    params: &PlanningParams<R>,
) -> Result<(R, R)> {
    let n = compiled.num_states();
    let mut v1 = vec![R::zero(); n];
    let mut v2 = vec![R::zero(); n];
    for _ in 0..params.max_iterations {
        let mut delta = R::zero();
        for s in (0..n).rev() {
            if compiled.goal[s] {
                continue;
            }
            let (n1, n2) = compiled.actions[s];
            let s1 = strat.average(Player::P1, s);
            let s2 = strat.average(Player::P2, s);
            let mut e1 = R::zero();
            let mut e2 = R::zero();
            for a1 in 0..n1 {
                for a2 in 0..n2 {
                    let w = s1[a1] * s2[a2];
                    if w == R::zero() {
                        continue;
                    }
                    let j = a1 * n2 + a2;
                    let r = compiled.rewards[s][j];
                    let mut c1 = r.p1;
                    let mut c2 = r.p2;
                    for &(t, p) in &compiled.transitions[s][j] {
                        c1 = c1 + p * v1[t];
                        c2 = c2 + p * v2[t];
                    }
                    e1 = e1 + w * c1;
                    e2 = e2 + w * c2;
                }
            }
            delta = delta.max((e1 - v1[s]).abs()).max((e2 - v2[s]).abs());
            v1[s] = e1;
            v2[s] = e2;
        }
        if delta <= params.tolerance {
            return Ok((v1[0], v2[0]));
        }
    }
    Err(GabeError::Divergence(format!(
        "profile evaluation on `{}` did not converge",
        compiled.name
    )))
}

/// Plays a fixed equilibrium approximation computed before the match.
pub struct CfrNeAgent<R: Real> {
    name: String,
    seat: Player,
    compiled: Arc<CompiledGame<R>>,
    strategy: Arc<CfrStrategy<R>>,
}

impl<R: Real> CfrNeAgent<R> {
    pub fn new(
        name: String,
        seat: Player,
        compiled: Arc<CompiledGame<R>>,
        strategy: Arc<CfrStrategy<R>>,
    ) -> Self {
        CfrNeAgent {
            name,
            seat,
            compiled,
            strategy,
        }
    }
}

impl<R: Real> Agent<R> for CfrNeAgent<R> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn begin_round(&mut self, _round: usize) {}

    fn act(&mut self, state: &StateId, rng: &mut ChaCha8Rng) -> ActionIndex {
        let s = self.compiled.state_index(state).unwrap_or(0);
        sample_mixed(&self.strategy.average(self.seat, s), rng)
    }

    fn observe(&mut self, _mv: &MoveRecord<R>) {}

    fn end_round(&mut self, _own_total: R) {}
}

/// Like [`CfrNeAgent`], but keeps refining between rounds against the
/// associate's observed action frequencies.
pub struct CfrAgent<R: Real> {
    name: String,
    seat: Player,
    compiled: Arc<CompiledGame<R>>,
    trainer: CfrTrainer<R>,
    empirical: FictitiousModel,
    updates_per_round: u64,
}

impl<R: Real> CfrAgent<R> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        seat: Player,
        compiled: Arc<CompiledGame<R>>,
        pretrained: &CfrStrategy<R>,
        variant: CfrVariant,
        depth_cap: usize,
        updates_per_round: u64,
        seed: u64,
    ) -> Self {
        let mut trainer = CfrTrainer::new(compiled.clone(), variant, depth_cap, seed);
        trainer.strategy = pretrained.clone();
        let empirical = FictitiousModel::new(&compiled, seat.other());
        CfrAgent {
            name,
            seat,
            compiled,
            trainer,
            empirical,
            updates_per_round,
        }
    }
}

impl<R: Real> Agent<R> for CfrAgent<R> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn begin_round(&mut self, _round: usize) {}

    fn act(&mut self, state: &StateId, rng: &mut ChaCha8Rng) -> ActionIndex {
        let s = self.compiled.state_index(state).unwrap_or(0);
        sample_mixed(&self.trainer.strategy.average(self.seat, s), rng)
    }

    fn observe(&mut self, mv: &MoveRecord<R>) {
        if let Some(s) = self.compiled.state_index(&mv.state) {
            self.empirical.observe(s, mv.action.of(self.seat.other()));
        }
    }

    fn end_round(&mut self, _own_total: R) {
        self.trainer
            .adapt_against(self.seat, &self.empirical, self.updates_per_round);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::stage_game;
    use crate::planning::CompiledGame;

    fn pennies() -> Arc<CompiledGame<f64>> {
        let g = stage_game::<f64>(
            "pennies",
            &[
                vec![(1.0, -1.0), (-1.0, 1.0)],
                vec![(-1.0, 1.0), (1.0, -1.0)],
            ],
            1,
        );
        Arc::new(CompiledGame::compile(&g, 100).unwrap())
    }

    #[test]
    fn matching_pennies_averages_to_uniform() {
        let compiled = pennies();
        let mut trainer = CfrTrainer::new(compiled.clone(), CfrVariant::Vanilla, 10, 0);
        trainer.train(10_000);
        for p in [Player::P1, Player::P2] {
            let avg = trainer.strategy.average(p, 0);
            assert!((avg[0] - 0.5).abs() < 0.02, "{p}: {avg:?}");
        }
    }

    #[test]
    fn dominant_action_dominates_the_average() {
        let g = stage_game::<f64>(
            "dominant",
            &[
                vec![(5.0, 5.0), (5.0, 0.0)],
                vec![(0.0, 5.0), (0.0, 0.0)],
            ],
            1,
        );
        let compiled = Arc::new(CompiledGame::compile(&g, 100).unwrap());
        let mut trainer = CfrTrainer::new(compiled, CfrVariant::Vanilla, 10, 0);
        trainer.train(2_000);
        let avg = trainer.strategy.average(Player::P1, 0);
        assert!(avg[0] >= 0.99, "{avg:?}");
    }

    #[test]
    fn exploitability_trends_down() {
        // Uniform play is already the matching-pennies equilibrium, so use a
        // skewed zero-sum game (mixed equilibrium at 3/7) to see movement.
        let g = stage_game::<f64>(
            "skewed-pennies",
            &[
                vec![(3.0, -3.0), (-1.0, 1.0)],
                vec![(-2.0, 2.0), (1.0, -1.0)],
            ],
            1,
        );
        let compiled = Arc::new(CompiledGame::compile(&g, 100).unwrap());
        let params = PlanningParams::default();
        let mut trainer = CfrTrainer::new(compiled.clone(), CfrVariant::Vanilla, 10, 0);
        trainer.train(100);
        let early = nash_conv(&compiled, &trainer.strategy, &params).unwrap();
        trainer.train(9_900);
        let late = nash_conv(&compiled, &trainer.strategy, &params).unwrap();
        assert!(late < early, "early {early}, late {late}");
        assert!(late >= -1e-9);
        let avg = trainer.strategy.average(Player::P1, 0);
        assert!((avg[0] - 3.0 / 7.0).abs() < 0.02, "{avg:?}");
    }

    #[test]
    fn external_sampling_also_converges_on_pennies() {
        let compiled = pennies();
        let mut trainer =
            CfrTrainer::new(compiled.clone(), CfrVariant::ExternalSampling, 10, 42);
        trainer.train(20_000);
        let avg = trainer.strategy.average(Player::P1, 0);
        assert!((avg[0] - 0.5).abs() < 0.05, "{avg:?}");
    }

    #[test]
    fn tree_size_counts_and_bails() {
        let compiled = pennies();
        // Root + 4 joint-action children.
        assert_eq!(vanilla_tree_size(&compiled, 10, 1_000), Some(5));
        assert_eq!(vanilla_tree_size(&compiled, 10, 3), None);
    }

    #[test]
    fn ne_agent_is_stationary() {
        let compiled = pennies();
        let mut trainer = CfrTrainer::new(compiled.clone(), CfrVariant::Vanilla, 10, 0);
        trainer.train(100);
        let strategy = Arc::new(trainer.strategy);
        let agent = CfrNeAgent::new("cfr-ne".into(), Player::P1, compiled.clone(), strategy.clone());
        // The sampled distribution is fixed: the average strategy does not
        // change between rounds because nothing updates it.
        let before = strategy.average(Player::P1, 0);
        drop(agent);
        let after = strategy.average(Player::P1, 0);
        assert_eq!(before, after);
    }
}
