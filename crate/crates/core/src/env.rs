//! The water-distribution world: villages connected by a directed road
//! network, a tanker truck of fixed capacity, and per-village consumption.
//!
//! One action is one time step. A step first moves the truck (refilling at
//! the source or dispensing at a village) and then applies one round of
//! consumption to every village.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::f_gini;

/// Node id used for the source in configuration and model files.
pub const SOURCE_ID: i64 = -1;

/// A location the truck can be at: the water source or a village.
///
/// Ordering puts the source first, then villages by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Node {
    Source,
    Village(usize),
}

impl Node {
    pub fn id(self) -> i64 {
        match self {
            Node::Source => SOURCE_ID,
            Node::Village(v) => v as i64,
        }
    }

    /// Dense index: source is 0, village `v` is `v + 1`.
    pub fn index(self) -> usize {
        match self {
            Node::Source => 0,
            Node::Village(v) => v + 1,
        }
    }

    pub fn village(self) -> Option<usize> {
        match self {
            Node::Source => None,
            Node::Village(v) => Some(v),
        }
    }
}

impl TryFrom<i64> for Node {
    type Error = String;

    fn try_from(id: i64) -> std::result::Result<Self, Self::Error> {
        match id {
            SOURCE_ID => Ok(Node::Source),
            v if v >= 0 => Ok(Node::Village(v as usize)),
            other => Err(format!("invalid node id {other}")),
        }
    }
}

impl From<Node> for i64 {
    fn from(node: Node) -> i64 {
        node.id()
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

impl FromStr for Node {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let id: i64 = s
            .trim()
            .parse()
            .map_err(|e| format!("bad node id {s:?}: {e}"))?;
        Node::try_from(id)
    }
}

/// Static description of one village.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VillageSpec {
    pub id: usize,
    /// Number of inhabitants.
    pub population: u32,
    /// Litres per inhabitant per step at or below `threshold`.
    pub base_rate: f64,
    /// Litres per inhabitant per step above `threshold`.
    pub high_rate: f64,
    /// Litres per inhabitant.
    pub threshold: f64,
}

impl VillageSpec {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("village {}: {what}", self.id)));
        if self.population == 0 {
            return bad("population must be positive");
        }
        if !(self.base_rate >= 0.0 && self.base_rate.is_finite()) {
            return bad("base_rate must be a finite non-negative number");
        }
        if !(self.high_rate >= 0.0 && self.high_rate.is_finite()) {
            return bad("high_rate must be a finite non-negative number");
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return bad("threshold must be a finite non-negative number");
        }
        Ok(())
    }
}

/// One step of consumption for a village holding `level` litres per
/// inhabitant. The high rate applies only strictly above the threshold.
pub fn consume(level: f64, village: &VillageSpec) -> f64 {
    let rate = if level > village.threshold {
        village.high_rate
    } else {
        village.base_rate
    };
    (level - rate).max(0.0)
}

/// Directed road graph over the source and the villages.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    villages: usize,
    edges: Vec<(Node, Node)>,
    successors: Vec<Vec<Node>>,
    dead_end: Vec<bool>,
}

impl RoadNetwork {
    pub fn new(villages: usize, edges: impl IntoIterator<Item = (Node, Node)>) -> Result<Self> {
        let mut edges: Vec<(Node, Node)> = edges.into_iter().collect();
        edges.sort();
        edges.dedup();

        let contains = |n: Node| match n {
            Node::Source => true,
            Node::Village(v) => v < villages,
        };
        for &(from, to) in &edges {
            if !contains(from) || !contains(to) {
                return Err(Error::InvalidConfig(format!(
                    "edge ({from}, {to}) references an unknown node"
                )));
            }
            if from == to {
                return Err(Error::InvalidConfig(format!("self-loop at node {from}")));
            }
        }

        let mut successors = vec![Vec::new(); villages + 1];
        for &(from, to) in &edges {
            successors[from.index()].push(to);
        }
        let dead_end = (0..villages)
            .map(|v| {
                !successors[Node::Village(v).index()]
                    .iter()
                    .any(|n| matches!(n, Node::Village(_)))
            })
            .collect();

        let network = Self {
            villages,
            edges,
            successors,
            dead_end,
        };
        network.check_connectivity()?;
        Ok(network)
    }

    fn check_connectivity(&self) -> Result<()> {
        let mut seen = vec![false; self.villages + 1];
        let mut stack = vec![Node::Source];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &m in self.successors(n) {
                if !seen[m.index()] {
                    seen[m.index()] = true;
                    stack.push(m);
                }
            }
        }
        if let Some(v) = (0..self.villages).find(|&v| !seen[Node::Village(v).index()]) {
            return Err(Error::InvalidConfig(format!(
                "village {v} is not reachable from the source"
            )));
        }
        if !self.edges.iter().any(|&(_, to)| to == Node::Source) {
            return Err(Error::InvalidConfig(
                "no road leads back to the source".into(),
            ));
        }
        Ok(())
    }

    pub fn villages(&self) -> usize {
        self.villages
    }

    pub fn contains(&self, node: Node) -> bool {
        match node {
            Node::Source => true,
            Node::Village(v) => v < self.villages,
        }
    }

    pub fn edges(&self) -> &[(Node, Node)] {
        &self.edges
    }

    /// Destinations reachable in one step from `node`, in ascending order.
    pub fn successors(&self, node: Node) -> &[Node] {
        &self.successors[node.index()]
    }

    /// A village with no outgoing road to another village.
    pub fn is_dead_end(&self, village: usize) -> bool {
        self.dead_end[village]
    }
}

/// How an episode picks its initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ResetMode {
    /// Every village level drawn independently from `Uniform(low, high)`;
    /// the truck starts full at the source.
    Random {
        low: f64,
        high: f64,
    },
    Fixed {
        state: WorldState,
    },
}

/// Static environment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnvConfig", into = "RawEnvConfig")]
pub struct EnvConfig {
    pub villages: Vec<VillageSpec>,
    pub network: RoadNetwork,
    /// Truck capacity in litres.
    pub capacity: u64,
    /// Deliveries are multiples of this many litres.
    pub delivery_quantum: u64,
    /// The episode ends once this many litres have been delivered.
    pub total_to_distribute: u64,
    pub reset: ResetMode,
    /// Hard cap on episode length. Reaching it ends the episode as truncated.
    pub max_steps: Option<usize>,
    /// Let a loaded truck visit a village and deliver nothing. When false a
    /// loaded truck delivers at least one quantum at every village, and only
    /// an empty truck moves with a zero delivery.
    pub allow_zero_dispense: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawEnvConfig {
    villages: Vec<VillageSpec>,
    edges: Vec<[i64; 2]>,
    capacity: u64,
    delivery_quantum: u64,
    total_to_distribute: u64,
    reset: ResetMode,
    #[serde(default = "default_max_steps")]
    max_steps: Option<usize>,
    #[serde(default)]
    allow_zero_dispense: bool,
}

fn default_max_steps() -> Option<usize> {
    Some(DEFAULT_MAX_STEPS)
}

pub const DEFAULT_MAX_STEPS: usize = 2_000;

impl TryFrom<RawEnvConfig> for EnvConfig {
    type Error = Error;

    fn try_from(raw: RawEnvConfig) -> Result<Self> {
        let edges = raw
            .edges
            .iter()
            .map(|&[a, b]| {
                let from = Node::try_from(a).map_err(Error::InvalidConfig)?;
                let to = Node::try_from(b).map_err(Error::InvalidConfig)?;
                Ok((from, to))
            })
            .collect::<Result<Vec<_>>>()?;
        let network = RoadNetwork::new(raw.villages.len(), edges)?;
        let config = EnvConfig {
            villages: raw.villages,
            network,
            capacity: raw.capacity,
            delivery_quantum: raw.delivery_quantum,
            total_to_distribute: raw.total_to_distribute,
            reset: raw.reset,
            max_steps: raw.max_steps,
            allow_zero_dispense: raw.allow_zero_dispense,
        };
        config.validate()?;
        Ok(config)
    }
}

impl From<EnvConfig> for RawEnvConfig {
    fn from(c: EnvConfig) -> Self {
        RawEnvConfig {
            edges: c
                .network
                .edges()
                .iter()
                .map(|&(a, b)| [a.id(), b.id()])
                .collect(),
            villages: c.villages,
            capacity: c.capacity,
            delivery_quantum: c.delivery_quantum,
            total_to_distribute: c.total_to_distribute,
            reset: c.reset,
            max_steps: c.max_steps,
            allow_zero_dispense: c.allow_zero_dispense,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.villages.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one village is required".into(),
            ));
        }
        for (i, v) in self.villages.iter().enumerate() {
            if v.id != i {
                return Err(Error::InvalidConfig(format!(
                    "village ids must be 0..{} in order, found {} at position {i}",
                    self.villages.len(),
                    v.id
                )));
            }
            v.validate()?;
        }
        if self.network.villages() != self.villages.len() {
            return Err(Error::InvalidConfig(
                "road network and village list disagree on the village count".into(),
            ));
        }
        if self.delivery_quantum == 0 {
            return Err(Error::InvalidConfig(
                "delivery_quantum must be positive".into(),
            ));
        }
        if self.capacity == 0 || !self.capacity.is_multiple_of(self.delivery_quantum) {
            return Err(Error::InvalidConfig(
                "capacity must be a positive multiple of delivery_quantum".into(),
            ));
        }
        if self.total_to_distribute == 0 {
            return Err(Error::InvalidConfig(
                "total_to_distribute must be positive".into(),
            ));
        }
        if self.max_steps == Some(0) {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        match &self.reset {
            ResetMode::Random { low, high } => {
                if !(low.is_finite() && high.is_finite() && 0.0 <= *low && low <= high) {
                    return Err(Error::InvalidConfig(
                        "random reset needs 0 <= low <= high".into(),
                    ));
                }
            }
            ResetMode::Fixed { state } => state.validate(self)?,
        }
        Ok(())
    }

    /// The default map and village parameters.
    ///
    /// The road layout is a reconstruction: the source feeds villages 1 and
    /// 3, village 1 is the hub, village 0 is reached only through the hub,
    /// and village 2 is a dead end behind it.
    pub fn default_map() -> Self {
        let v = Node::Village;
        let s = Node::Source;
        let edges = [
            (s, v(1)),
            (s, v(3)),
            (v(0), v(1)),
            (v(1), v(0)),
            (v(1), v(3)),
            (v(3), v(1)),
            (v(1), v(2)),
            (v(2), s),
            (v(3), s),
            (v(0), s),
        ];
        let villages = vec![
            VillageSpec {
                id: 0,
                population: 25,
                base_rate: 4.0,
                high_rate: 100.0,
                threshold: 350.0,
            },
            VillageSpec {
                id: 1,
                population: 260,
                base_rate: 3.5,
                high_rate: 9.0,
                threshold: 250.0,
            },
            VillageSpec {
                id: 2,
                population: 1000,
                base_rate: 3.5,
                high_rate: 50.0,
                threshold: 350.0,
            },
            VillageSpec {
                id: 3,
                population: 1050,
                base_rate: 3.5,
                high_rate: 16.0,
                threshold: 100.0,
            },
        ];
        EnvConfig {
            network: RoadNetwork::new(villages.len(), edges).expect("default map is valid"),
            villages,
            capacity: 60_000,
            delivery_quantum: 15_000,
            total_to_distribute: 1_440_000,
            reset: ResetMode::Random {
                low: 0.0,
                high: 600.0,
            },
            max_steps: default_max_steps(),
            allow_zero_dispense: false,
        }
    }

    pub fn num_villages(&self) -> usize {
        self.villages.len()
    }

    /// Same world, different stopping amount.
    pub fn with_total(&self, total_to_distribute: u64) -> Self {
        EnvConfig {
            total_to_distribute,
            ..self.clone()
        }
    }

    pub fn with_reset(&self, reset: ResetMode) -> Self {
        EnvConfig {
            reset,
            ..self.clone()
        }
    }

    /// Truck full at the source, nothing delivered yet.
    pub fn start_state(&self, levels: Vec<f64>) -> WorldState {
        WorldState {
            levels,
            position: Node::Source,
            load: self.capacity,
            distributed_total: 0,
        }
    }
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::default_map()
    }
}

/// Full (continuous) environment state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Litres per inhabitant, one entry per village.
    pub levels: Vec<f64>,
    pub position: Node,
    /// Litres in the truck.
    pub load: u64,
    /// Litres delivered so far in the episode.
    #[serde(default)]
    pub distributed_total: u64,
}

impl WorldState {
    pub fn validate(&self, config: &EnvConfig) -> Result<()> {
        if self.levels.len() != config.num_villages() {
            return Err(Error::InvalidState(format!(
                "expected {} village levels, got {}",
                config.num_villages(),
                self.levels.len()
            )));
        }
        if let Some(x) = self.levels.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidState(format!(
                "water level {x} is not a finite non-negative number"
            )));
        }
        if !config.network.contains(self.position) {
            return Err(Error::InvalidState(format!(
                "position {} is not a node of the network",
                self.position
            )));
        }
        if self.load > config.capacity || !self.load.is_multiple_of(config.delivery_quantum) {
            return Err(Error::InvalidState(format!(
                "load {} is not a multiple of {} within capacity {}",
                self.load, config.delivery_quantum, config.capacity
            )));
        }
        Ok(())
    }
}

/// Move to `destination` and dispense `dispense` litres there. At the source
/// the truck refills and `dispense` is always 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub destination: Node,
    pub dispense: u64,
}

impl Action {
    pub fn new(destination: Node, dispense: u64) -> Self {
        Self {
            destination,
            dispense,
        }
    }

    pub fn refill() -> Self {
        Self::new(Node::Source, 0)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.destination, self.dispense)
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (p, d) = s
            .split_once(',')
            .ok_or_else(|| format!("action {s:?} is not of the form \"p,d\""))?;
        let destination = p.parse()?;
        let dispense = d
            .trim()
            .parse()
            .map_err(|e| format!("bad dispense amount in {s:?}: {e}"))?;
        Ok(Action {
            destination,
            dispense,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: WorldState,
    /// Alignment of `next_state`.
    pub reward: f64,
    pub done: bool,
    /// The episode hit `max_steps` before distributing everything.
    pub truncated: bool,
}

/// Legal actions from `state`, sorted by `(destination, dispense)`.
///
/// An empty result is reported as [`Error::EmptyActionSet`].
pub fn available_actions(state: &WorldState, config: &EnvConfig) -> Result<Vec<Action>> {
    if !config.network.contains(state.position) {
        return Err(Error::InvalidState(format!(
            "position {} is not a node of the network",
            state.position
        )));
    }
    let mut actions = Vec::new();
    for &dest in config.network.successors(state.position) {
        match dest {
            Node::Source => {
                if state.load == 0 {
                    actions.push(Action::refill());
                }
            }
            Node::Village(v) if config.network.is_dead_end(v) => {
                actions.push(Action::new(dest, state.load));
            }
            Node::Village(_) => {
                let mut d = if state.load > 0 && !config.allow_zero_dispense {
                    config.delivery_quantum
                } else {
                    0
                };
                while d <= state.load {
                    actions.push(Action::new(dest, d));
                    d += config.delivery_quantum;
                }
            }
        }
    }
    if actions.is_empty() {
        return Err(Error::EmptyActionSet {
            position: state.position,
            load: state.load,
        });
    }
    Ok(actions)
}

/// Successor of `state` under `action`, which must be legal.
pub fn predict_transition(
    state: &WorldState,
    action: &Action,
    config: &EnvConfig,
) -> Result<WorldState> {
    let legal = available_actions(state, config)?;
    if legal.binary_search(action).is_err() {
        return Err(Error::IllegalAction {
            action: *action,
            position: state.position,
            load: state.load,
        });
    }
    Ok(transition(state, action, config))
}

/// Transition without the legality check. Callers guarantee `action` came
/// from [`available_actions`].
pub(crate) fn transition(state: &WorldState, action: &Action, config: &EnvConfig) -> WorldState {
    let mut next = state.clone();
    next.position = action.destination;
    match action.destination {
        Node::Source => next.load = config.capacity,
        Node::Village(v) => {
            next.load -= action.dispense;
            next.levels[v] += action.dispense as f64 / f64::from(config.villages[v].population);
        }
    }
    for (level, village) in next.levels.iter_mut().zip(&config.villages) {
        *level = consume(*level, village);
    }
    next.distributed_total += action.dispense;
    next
}

/// A single run of the environment. Owns its current state; the
/// configuration is borrowed and never mutated.
#[derive(Debug, Clone)]
pub struct Episode<'a> {
    config: &'a EnvConfig,
    state: WorldState,
    steps: usize,
    done: bool,
    truncated: bool,
}

impl<'a> Episode<'a> {
    /// Episode positioned at `initial`, which is validated.
    pub fn start_from(config: &'a EnvConfig, initial: WorldState) -> Result<Self> {
        initial.validate(config)?;
        let done = initial.distributed_total >= config.total_to_distribute;
        Ok(Self {
            config,
            state: initial,
            steps: 0,
            done,
            truncated: false,
        })
    }

    /// Fresh episode drawn from the configured reset mode.
    pub fn reset<R: Rng + ?Sized>(config: &'a EnvConfig, rng: &mut R) -> Result<Self> {
        let initial = sample_initial(config, rng);
        Self::start_from(config, initial)
    }

    pub fn reset_seeded(config: &'a EnvConfig, seed: u64) -> Result<Self> {
        Self::reset(config, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn config(&self) -> &'a EnvConfig {
        self.config
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn available_actions(&self) -> Result<Vec<Action>> {
        available_actions(&self.state, self.config)
    }

    pub fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let next = predict_transition(&self.state, action, self.config)?;
        Ok(self.advance(next))
    }

    /// Step with an action already known to be legal (e.g. drawn from a
    /// freshly computed action list).
    pub(crate) fn step_trusted(&mut self, action: &Action) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let next = transition(&self.state, action, self.config);
        Ok(self.advance(next))
    }

    fn advance(&mut self, next: WorldState) -> StepOutcome {
        self.steps += 1;
        let reward = f_gini(&next, &self.config.villages);
        let finished = next.distributed_total >= self.config.total_to_distribute;
        let truncated = !finished && self.config.max_steps.is_some_and(|m| self.steps >= m);
        self.done = finished || truncated;
        self.truncated = truncated;
        self.state = next.clone();
        StepOutcome {
            next_state: next,
            reward,
            done: self.done,
            truncated,
        }
    }
}

pub fn sample_initial<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> WorldState {
    match &config.reset {
        ResetMode::Fixed { state } => state.clone(),
        ResetMode::Random { low, high } => {
            let dist = Uniform::new_inclusive(*low, *high);
            let levels = (0..config.num_villages())
                .map(|_| dist.sample(rng))
                .collect();
            config.start_state(levels)
        }
    }
}
