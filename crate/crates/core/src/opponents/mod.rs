//! The evaluation zoo: named agents built from a game's planning outputs.

mod cfr;

pub use cfr::{
    nash_conv, profile_value, vanilla_tree_size, CfrAgent, CfrNeAgent, CfrStrategy, CfrTrainer,
    CfrVariant,
};

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;
use std::sync::{Arc, Mutex};

use rand_chacha::ChaCha8Rng;

use crate::bandit::{BanditAgent, Eee, Exp3, ExpertAlgorithm, PayoffNormalizer};
use crate::error::{GabeError, Result};
use crate::experts::{
    build_expert_set, default_learning_rate, BouncerExpert, ExpertSetup, LeaderExpert,
    LeaderParams, MaximinFollower, MbrlExpert, ModelHub, TargetFollower,
};
use crate::planning::{
    default_omega_grid, enumerate_targets, select_targets, solve_joint_mdp, solve_zero_sum,
    CompiledGame, JointPlan, PlanningParams, SecurityProfile, TargetSolution,
};
use crate::rsg::{default_move_cap, ActionIndex, Agent, MoveRecord, Player, Rsg, StateId};
use crate::scalar::{real, Real};

/// Registered agent names accepted by [`GameContext::make_agent`].
pub const AGENT_NAMES: [&str; 10] = [
    "coop", "bully", "folkegal", "maximin", "bouncer", "mbrl", "cfr", "cfr-ne", "gabe-exp3",
    "gabe-eee",
];

/// Parsed agent specification: a registered name plus `?key=value` options.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentSpec {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl AgentSpec {
    pub fn parse(spec: &str) -> Result<AgentSpec> {
        let (name, query) = match spec.split_once('?') {
            Some((n, q)) => (n, Some(q)),
            None => (spec, None),
        };
        let mut params = BTreeMap::new();
        if let Some(query) = query {
            for pair in query.split('&').filter(|p| !p.is_empty()) {
                let (k, v) = pair.split_once('=').ok_or_else(|| {
                    GabeError::Config(format!("agent spec `{spec}`: expected key=value, got `{pair}`"))
                })?;
                params.insert(k.to_string(), v.to_string());
            }
        }
        Ok(AgentSpec {
            name: name.to_string(),
            params,
        })
    }

    fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                GabeError::Config(format!("agent `{}`: `{key}={v}` is not a number", self.name))
            }),
        }
    }

    fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                GabeError::Config(format!("agent `{}`: `{key}={v}` is not an integer", self.name))
            }),
        }
    }
}

impl std::fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { "?" } else { "&" })?;
        }
        Ok(())
    }
}

/// Construction-time knobs for a game's planning cache.
#[derive(Debug, Clone)]
pub struct ContextOptions<R> {
    pub omega_grid: Vec<R>,
    /// Targets selected per seat.
    pub num_targets: usize,
    /// Aspiration smoothing of the leader experts.
    pub lambda: R,
    /// Punishment margin as a fraction of the egalitarian payoff.
    pub delta_fraction: R,
    pub planning: PlanningParams<R>,
    /// Move cap per round; defaults to ten times the state count.
    pub move_cap: Option<usize>,
}

impl<R: Real> Default for ContextOptions<R> {
    fn default() -> Self {
        ContextOptions {
            omega_grid: default_omega_grid(),
            num_targets: 5,
            lambda: real(0.9),
            delta_fraction: real(0.01),
            planning: PlanningParams::default(),
            move_cap: None,
        }
    }
}

/// Planning outputs for one game, shared by every agent in a tournament:
/// the compiled game, enumerated and selected targets, both zero-sum
/// profiles, and a cache of pretrained equilibrium strategies.
pub struct GameContext<R: Real> {
    pub game: Arc<dyn Rsg<R>>,
    pub compiled: Arc<CompiledGame<R>>,
    pub options: ContextOptions<R>,
    /// All enumerated target solutions (pure and alternating).
    pub candidates: Vec<TargetSolution<R>>,
    /// Selected targets per seat, egalitarian first.
    pub selected: [Vec<TargetSolution<R>>; 2],
    /// Zero-sum profiles indexed by the protected seat.
    pub security: [Arc<SecurityProfile<R>>; 2],
    /// Per seat: highest own payoff sustaining the other's security level.
    pub bully_target: [TargetSolution<R>; 2],
    /// Per seat: the plan putting all weight on the associate's reward.
    pub coop_target: [TargetSolution<R>; 2],
    pub move_cap: usize,
    cfr_cache: Mutex<HashMap<String, Arc<CfrStrategy<R>>>>,
}

impl<R: Real> GameContext<R> {
    pub fn new(game: Arc<dyn Rsg<R>>, options: ContextOptions<R>) -> Result<Self> {
        let compiled = Arc::new(CompiledGame::compile(game.as_ref(), options.planning.state_bound)?);
        let params = options.planning;
        let candidates = enumerate_targets(&compiled, &options.omega_grid, &params)?;
        let security = [
            Arc::new(solve_zero_sum(&compiled, Player::P1, &params)?),
            Arc::new(solve_zero_sum(&compiled, Player::P2, &params)?),
        ];
        let select = |seat: Player| -> Vec<TargetSolution<R>> {
            select_targets(
                &candidates,
                seat,
                security[seat.index()].security_value,
                security[seat.other().index()].security_value,
                options.num_targets,
            )
        };
        let selected = [select(Player::P1), select(Player::P2)];

        let bully_for = |seat: Player| -> TargetSolution<R> {
            let other_security = security[seat.other().index()].security_value;
            let slack = real::<R>(1e-9);
            let sustainable = candidates
                .iter()
                .filter(|t| t.payoff_of(seat.other()) >= other_security - slack)
                .max_by(|a, b| {
                    a.payoff_of(seat)
                        .partial_cmp(&b.payoff_of(seat))
                        .unwrap()
                });
            match sustainable {
                Some(t) => t.clone(),
                // No candidate sustains the other player: fall back to the
                // unconstrained own-payoff maximum.
                None => candidates
                    .iter()
                    .max_by(|a, b| {
                        a.payoff_of(seat)
                            .partial_cmp(&b.payoff_of(seat))
                            .unwrap()
                    })
                    .expect("candidates non-empty")
                    .clone(),
            }
        };
        let bully_target = [bully_for(Player::P1), bully_for(Player::P2)];

        let coop_for = |seat: Player| -> Result<TargetSolution<R>> {
            // All planning weight on the associate's reward, up to a sliver
            // of own weight that breaks the otherwise arbitrary ties among
            // own actions (a fully indifferent player can otherwise be
            // assigned non-terminating wander loops).
            let eps = real::<R>(1e-6);
            let omega = match seat {
                Player::P1 => eps,
                Player::P2 => R::one() - eps,
            };
            let plan = Arc::new(solve_joint_mdp(&compiled, omega, &params)?);
            Ok(TargetSolution::pure(plan, vec![omega]))
        };
        let coop_target = [coop_for(Player::P1)?, coop_for(Player::P2)?];

        let move_cap = options
            .move_cap
            .unwrap_or_else(|| default_move_cap(compiled.num_states()));
        Ok(GameContext {
            game,
            compiled,
            options,
            candidates,
            selected,
            security,
            bully_target,
            coop_target,
            move_cap,
            cfr_cache: Mutex::new(HashMap::new()),
        })
    }

    /// The egalitarian target (selection slot one; identical across seats).
    pub fn egalitarian(&self) -> &TargetSolution<R> {
        &self.selected[0][0]
    }

    fn leader_params(&self, seat: Player) -> LeaderParams<R> {
        let egal = self.egalitarian().payoff_of(seat);
        LeaderParams {
            lambda: self.options.lambda,
            delta: self.options.delta_fraction * egal.abs(),
            alpha0: egal,
        }
    }

    /// Bandit feedback bounds for one seat.
    pub fn normalizer(&self, seat: Player) -> Result<PayoffNormalizer<R>> {
        let max_target = self
            .candidates
            .iter()
            .map(|t| t.payoff_of(seat))
            .fold(R::neg_infinity(), |a, b| if b > a { b } else { a });
        PayoffNormalizer::from_planning(self.security[seat.index()].security_value, max_target)
    }

    /// Names of the expert set one seat's bandit agents run on.
    pub fn expert_roster(&self, seat: Player) -> Result<Vec<String>> {
        let hub = ModelHub::new(seat, self.compiled.clone(), default_learning_rate());
        let experts = build_expert_set(&self.expert_setup(seat, &hub))?;
        Ok(experts.iter().map(|e| e.name()).collect())
    }

    fn expert_setup<'a>(
        &'a self,
        seat: Player,
        hub: &'a Rc<ModelHub<R>>,
    ) -> ExpertSetup<'a, R> {
        ExpertSetup {
            seat,
            compiled: &self.compiled,
            targets: &self.selected[seat.index()],
            own_security: &self.security[seat.index()],
            opp_security: &self.security[seat.other().index()],
            hub,
            leader: self.leader_params(seat),
            planning: self.options.planning,
        }
    }

    fn pretrained_cfr(&self, spec: &AgentSpec) -> Result<(Arc<CfrStrategy<R>>, CfrVariant)> {
        let iterations = spec.get_u64("iters", 10_000)?;
        let sampling = spec
            .params
            .get("sampling")
            .map(String::as_str)
            .unwrap_or("auto");
        let tree_bound = spec.get_u64("tree_bound", 500_000)?;
        let variant = match sampling {
            "vanilla" => CfrVariant::Vanilla,
            "external" => CfrVariant::ExternalSampling,
            "auto" => {
                if vanilla_tree_size(&self.compiled, self.move_cap, tree_bound).is_some() {
                    CfrVariant::Vanilla
                } else {
                    return Err(GabeError::ResourceLimit(format!(
                        "game `{}`: full tree walks exceed {tree_bound} nodes; pass \
                         `{}?sampling=external` to opt into sampled training, or use a \
                         smaller game",
                        self.compiled.name, spec.name
                    )));
                }
            }
            other => {
                return Err(GabeError::Config(format!(
                    "agent `{}`: unknown sampling mode `{other}` (vanilla, external, auto)",
                    spec.name
                )))
            }
        };
        let key = format!("{variant:?}/{iterations}");
        {
            let cache = self.cfr_cache.lock().unwrap();
            if let Some(hit) = cache.get(&key) {
                return Ok((hit.clone(), variant));
            }
        }
        let seed = fnv1a(key.as_bytes());
        let mut trainer = CfrTrainer::new(self.compiled.clone(), variant, self.move_cap, seed);
        trainer.train(iterations);
        let trained = Arc::new(trainer.strategy);
        self.cfr_cache
            .lock()
            .unwrap()
            .insert(key, trained.clone());
        Ok((trained, variant))
    }

    /// Builds an agent for a seat from its spec string.
    pub fn make_agent(&self, spec: &str, seat: Player, seed: u64) -> Result<Box<dyn Agent<R>>> {
        let spec = AgentSpec::parse(spec)?;
        let display = spec.to_string();
        match spec.name.as_str() {
            "coop" => Ok(Box::new(TargetFollower::new(
                display,
                seat,
                self.coop_target[seat.index()].clone(),
                self.compiled.clone(),
            ))),
            "folkegal" => Ok(Box::new(LeaderExpert::new(
                display,
                seat,
                self.egalitarian().clone(),
                self.compiled.clone(),
                self.security[seat.other().index()].clone(),
                &self.leader_params(seat),
            ))),
            "bully" => Ok(Box::new(LeaderExpert::new(
                display,
                seat,
                self.bully_target[seat.index()].clone(),
                self.compiled.clone(),
                self.security[seat.other().index()].clone(),
                &self.leader_params(seat),
            ))),
            "maximin" => Ok(Box::new(MaximinFollower::new(
                display,
                self.compiled.clone(),
                self.security[seat.index()].clone(),
            ))),
            "bouncer" => {
                let hub = ModelHub::new(seat, self.compiled.clone(), default_learning_rate());
                let inner = BouncerExpert::new(display, seat, self.compiled.clone(), hub.clone());
                Ok(Box::new(WithHub {
                    hub,
                    inner: Box::new(inner),
                }))
            }
            "mbrl" => {
                let hub = ModelHub::new(seat, self.compiled.clone(), default_learning_rate());
                let inner = MbrlExpert::new(
                    display,
                    seat,
                    self.compiled.clone(),
                    hub.clone(),
                    self.options.planning,
                );
                Ok(Box::new(WithHub {
                    hub,
                    inner: Box::new(inner),
                }))
            }
            "cfr-ne" => {
                let (strategy, _) = self.pretrained_cfr(&spec)?;
                Ok(Box::new(CfrNeAgent::new(
                    display,
                    seat,
                    self.compiled.clone(),
                    strategy,
                )))
            }
            "cfr" => {
                let (strategy, variant) = self.pretrained_cfr(&spec)?;
                let updates = spec.get_u64("updates", 10)?;
                Ok(Box::new(CfrAgent::new(
                    display,
                    seat,
                    self.compiled.clone(),
                    &strategy,
                    variant,
                    self.move_cap,
                    updates,
                    seed,
                )))
            }
            "gabe-exp3" | "gabe-eee" => {
                let hub = ModelHub::new(seat, self.compiled.clone(), default_learning_rate());
                let experts = build_expert_set(&self.expert_setup(seat, &hub))?;
                let arms = experts.len();
                let algorithm: Box<dyn ExpertAlgorithm<R>> = if spec.name == "gabe-exp3" {
                    let gamma = spec.get_f64("gamma", 0.1)?;
                    Box::new(Exp3::new(arms, real(gamma)))
                } else {
                    Box::new(Eee::new(arms))
                };
                Ok(Box::new(BanditAgent::new(
                    display,
                    experts,
                    algorithm,
                    self.normalizer(seat)?,
                    hub,
                    seed,
                )?))
            }
            other => Err(GabeError::Config(format!(
                "unknown agent `{other}`; registered agents: {}",
                AGENT_NAMES.join(", ")
            ))),
        }
    }
}

impl<R: Real> TargetSolution<R> {
    /// A pure target around an externally computed plan.
    pub fn pure(plan: Arc<JointPlan<R>>, omegas: Vec<R>) -> Self {
        let payoff = plan.payoff;
        TargetSolution::from_parts(vec![plan], omegas, payoff)
    }
}

/// Wraps a standalone expert with its own model hub, keeping the hub fed
/// from observations.
struct WithHub<R: Real> {
    hub: Rc<ModelHub<R>>,
    inner: Box<dyn Agent<R>>,
}

impl<R: Real> Agent<R> for WithHub<R> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn begin_round(&mut self, round: usize) {
        self.inner.begin_round(round);
    }

    fn act(&mut self, state: &StateId, rng: &mut ChaCha8Rng) -> ActionIndex {
        self.inner.act(state, rng)
    }

    fn observe(&mut self, mv: &MoveRecord<R>) {
        self.hub.observe_move(mv);
        self.inner.observe(mv);
    }

    fn end_round(&mut self, own_total: R) {
        self.hub.end_round();
        self.inner.end_round(own_total);
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
