//! The WN2M2, BN2M2 and WN2M3 decision processes.
//!
//! Environments are stateless transition functions over explicit state
//! values: `step` never mutates the environment, so any number of episodes
//! can run in parallel against one instance, each worker holding its own
//! seeded generator.

use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::quantum::{
    dejmps_distill, depolarize, generation_probability, twirl_to_werner, BellDiagonalState,
    LinkParameters, QuantumError, WernerState,
};

/// Hard cap on episode length.
pub const MAX_EPISODE_STEPS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("no actions are defined at the terminal absorbing state")]
    TerminalState,
    #[error("action {0:?} is not admissible in the current state")]
    InadmissibleAction(Action),
    #[error("environment construction failed: {0}")]
    Construction(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// The four action classes. Purification carries the slot-index pair; only
/// the three-memory environment exposes more than one variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Wait,
    Consume,
    Discard,
    /// DEJMPS on the pairs in the given (0-based) slots.
    Purify(usize, usize),
}

/// Fixed enumeration used for weight rows and tie-breaking.
pub const ACTION_ORDER: [Action; 6] = [
    Action::Wait,
    Action::Consume,
    Action::Discard,
    Action::Purify(0, 1),
    Action::Purify(0, 2),
    Action::Purify(1, 2),
];

impl Action {
    /// Index in [`ACTION_ORDER`].
    pub fn index(&self) -> usize {
        ACTION_ORDER
            .iter()
            .position(|a| a == self)
            .expect("action outside the fixed enumeration")
    }

    pub fn from_index(index: usize) -> Option<Action> {
        ACTION_ORDER.get(index).copied()
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Wait => write!(f, "wait"),
            Action::Consume => write!(f, "consume"),
            Action::Discard => write!(f, "discard"),
            Action::Purify(i, j) => write!(f, "purify({},{})", i + 1, j + 1),
        }
    }
}

/// Admissible-action sets are tiny; keep them inline.
pub type ActionSet = SmallVec<[Action; 6]>;

/// Named reward channels. Werner environments emit `Time` and `Fidelity`;
/// the Bell-diagonal environment emits `Time` and the `B`, `C`, `D`
/// coefficients of the consumed pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardChannel {
    Fidelity,
    BellB,
    BellC,
    BellD,
    Time,
}

impl RewardChannel {
    pub fn label(&self) -> &'static str {
        match self {
            RewardChannel::Fidelity => "j_fidelity",
            RewardChannel::BellB => "j_b",
            RewardChannel::BellC => "j_c",
            RewardChannel::BellD => "j_d",
            RewardChannel::Time => "j_time",
        }
    }
}

pub const WERNER_CHANNELS: &[RewardChannel] = &[RewardChannel::Fidelity, RewardChannel::Time];
pub const BDS_CHANNELS: &[RewardChannel] = &[
    RewardChannel::BellB,
    RewardChannel::BellC,
    RewardChannel::BellD,
    RewardChannel::Time,
];

/// Per-step rewards on every channel. Unused channels stay zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RewardVector {
    pub time_s: f64,
    pub fidelity: f64,
    pub bell_b: f64,
    pub bell_c: f64,
    pub bell_d: f64,
}

impl RewardVector {
    pub fn channel(&self, ch: RewardChannel) -> f64 {
        match ch {
            RewardChannel::Fidelity => self.fidelity,
            RewardChannel::BellB => self.bell_b,
            RewardChannel::BellC => self.bell_c,
            RewardChannel::BellD => self.bell_d,
            RewardChannel::Time => self.time_s,
        }
    }

    pub fn approx_eq(&self, other: &RewardVector, tol: f64) -> bool {
        (self.time_s - other.time_s).abs() <= tol
            && (self.fidelity - other.fidelity).abs() <= tol
            && (self.bell_b - other.bell_b).abs() <= tol
            && (self.bell_c - other.bell_c).abs() <= tol
            && (self.bell_d - other.bell_d).abs() <= tol
    }
}

/// What one remote memory pair stores. Implemented by the Werner and
/// Bell-diagonal representations.
pub trait MemoryPair: Copy + PartialEq + fmt::Debug + Send + Sync + 'static {
    const FEATURES_PER_SLOT: usize;
    const CHANNELS: &'static [RewardChannel];

    fn fresh(f0: f64) -> Self;
    fn fidelity(&self) -> f64;
    fn depolarized(&self, elapsed_s: f64, coherence_time_s: f64) -> Self;
    /// DEJMPS output and success probability.
    fn distilled(a: &Self, b: &Self) -> (Self, f64);
    /// Symmetrization to the Werner form (identity for Werner pairs).
    fn twirled(&self) -> Self;
    fn write_features(&self, out: &mut Vec<f64>);
    fn write_empty_features(out: &mut Vec<f64>);
    fn write_consume_reward(&self, reward: &mut RewardVector);
    fn approx_eq(&self, other: &Self, tol: f64) -> bool;
}

/// Werner pair: a bare fidelity in (0.25, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WernerPair(pub f64);

impl MemoryPair for WernerPair {
    const FEATURES_PER_SLOT: usize = 1;
    const CHANNELS: &'static [RewardChannel] = WERNER_CHANNELS;

    fn fresh(f0: f64) -> Self {
        WernerPair(f0)
    }

    fn fidelity(&self) -> f64 {
        self.0
    }

    fn depolarized(&self, elapsed_s: f64, coherence_time_s: f64) -> Self {
        WernerPair(crate::quantum::depolarize_werner_fidelity(
            self.0,
            elapsed_s,
            coherence_time_s,
        ))
    }

    fn distilled(a: &Self, b: &Self) -> (Self, f64) {
        let s1 = WernerState::new(a.0).expect("invalid stored fidelity");
        let s2 = WernerState::new(b.0).expect("invalid stored fidelity");
        let (out, p) = dejmps_distill(&s1.to_bell_diagonal(), &s2.to_bell_diagonal());
        (WernerPair(twirl_to_werner(&out).fidelity()), p)
    }

    fn twirled(&self) -> Self {
        *self
    }

    fn write_features(&self, out: &mut Vec<f64>) {
        out.push(self.0);
    }

    fn write_empty_features(out: &mut Vec<f64>) {
        out.push(0.0);
    }

    fn write_consume_reward(&self, reward: &mut RewardVector) {
        reward.fidelity = self.0;
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.0 - other.0).abs() <= tol
    }
}

/// Bell-diagonal pair: the full coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdsPair(pub BellDiagonalState);

impl MemoryPair for BdsPair {
    const FEATURES_PER_SLOT: usize = 4;
    const CHANNELS: &'static [RewardChannel] = BDS_CHANNELS;

    fn fresh(f0: f64) -> Self {
        BdsPair(
            WernerState::new(f0)
                .expect("invalid initial fidelity")
                .to_bell_diagonal(),
        )
    }

    fn fidelity(&self) -> f64 {
        self.0.fidelity()
    }

    fn depolarized(&self, elapsed_s: f64, coherence_time_s: f64) -> Self {
        BdsPair(depolarize(&self.0, elapsed_s, coherence_time_s))
    }

    fn distilled(a: &Self, b: &Self) -> (Self, f64) {
        let (out, p) = dejmps_distill(&a.0, &b.0);
        (BdsPair(out), p)
    }

    fn twirled(&self) -> Self {
        BdsPair(twirl_to_werner(&self.0).to_bell_diagonal())
    }

    fn write_features(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.0.coefficients());
    }

    fn write_empty_features(out: &mut Vec<f64>) {
        out.extend_from_slice(&[0.0; 4]);
    }

    fn write_consume_reward(&self, reward: &mut RewardVector) {
        reward.bell_b = self.0.b();
        reward.bell_c = self.0.c();
        reward.bell_d = self.0.d();
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.0
            .coefficients()
            .iter()
            .zip(other.0.coefficients())
            .all(|(x, y)| (x - y).abs() <= tol)
    }
}

/// MDP state: the occupied memory pairs in slot order, the knowledge
/// probability, and the terminal flag. Empty slots are implicit; occupied
/// pairs always sit in the lowest-index slots.
///
/// The terminal absorbing state is a distinguished sentinel, never an
/// all-empty slot configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpState<M: MemoryPair> {
    occupied: SmallVec<[M; 3]>,
    knowledge_p: f64,
    terminal: bool,
}

impl<M: MemoryPair> MdpState<M> {
    pub fn initial() -> Self {
        MdpState {
            occupied: SmallVec::new(),
            knowledge_p: 1.0,
            terminal: false,
        }
    }

    pub fn terminal_state() -> Self {
        MdpState {
            occupied: SmallVec::new(),
            knowledge_p: 1.0,
            terminal: true,
        }
    }

    /// Builds a non-terminal state directly; intended for tests and oracles.
    pub fn with_pairs(pairs: &[M], knowledge_p: f64) -> Self {
        assert!(
            knowledge_p > 0.0 && knowledge_p <= 1.0,
            "knowledge_p outside (0, 1]"
        );
        assert!(
            knowledge_p == 1.0 || !pairs.is_empty(),
            "pending outcome requires an occupied slot"
        );
        MdpState {
            occupied: SmallVec::from_slice(pairs),
            knowledge_p,
            terminal: false,
        }
    }

    pub fn occupied(&self) -> &[M] {
        &self.occupied
    }

    pub fn knowledge_p(&self) -> f64 {
        self.knowledge_p
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.terminal == other.terminal
            && (self.knowledge_p - other.knowledge_p).abs() <= tol
            && self.occupied.len() == other.occupied.len()
            && self
                .occupied
                .iter()
                .zip(other.occupied.iter())
                .all(|(a, b)| a.approx_eq(b, tol))
    }

    /// Index of the pair that `Consume` targets when all outcomes are
    /// heralded: maximum fidelity, ties to the lowest slot.
    fn consume_target(&self) -> usize {
        let mut best = 0;
        for (i, m) in self.occupied.iter().enumerate().skip(1) {
            if m.fidelity() > self.occupied[best].fidelity() {
                best = i;
            }
        }
        best
    }

    /// Index discarded: minimum fidelity, ties to the highest slot.
    fn discard_target(&self) -> usize {
        let mut best = 0;
        for (i, m) in self.occupied.iter().enumerate().skip(1) {
            if m.fidelity() <= self.occupied[best].fidelity() {
                best = i;
            }
        }
        best
    }
}

/// Which of the three environments a [`LinkMdp`] instance realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Wn2m2,
    Bn2m2,
    Wn2m3,
}

impl EnvKind {
    pub fn memory_slots(&self) -> usize {
        match self {
            EnvKind::Wn2m2 | EnvKind::Bn2m2 => 2,
            EnvKind::Wn2m3 => 3,
        }
    }

    pub fn is_bell_diagonal(&self) -> bool {
        matches!(self, EnvKind::Bn2m2)
    }

    pub fn parse(s: &str) -> Option<EnvKind> {
        match s.to_ascii_lowercase().as_str() {
            "wn2m2" => Some(EnvKind::Wn2m2),
            "bn2m2" => Some(EnvKind::Bn2m2),
            "wn2m3" => Some(EnvKind::Wn2m3),
            _ => None,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvKind::Wn2m2 => write!(f, "wn2m2"),
            EnvKind::Bn2m2 => write!(f, "bn2m2"),
            EnvKind::Wn2m3 => write!(f, "wn2m3"),
        }
    }
}

/// Common interface of the link environments and test MDPs.
pub trait Environment: Send + Sync {
    type State: Clone + fmt::Debug + Send;

    /// Dimension of the `[0,1]^m` feature vector.
    fn feature_dim(&self) -> usize;
    /// Size of the fixed action enumeration (4 or 6 for link environments).
    fn num_actions(&self) -> usize;
    fn reward_channels(&self) -> &'static [RewardChannel];
    fn initial_state(&self) -> Self::State;
    fn is_terminal(&self, state: &Self::State) -> bool;
    fn admissible_actions(&self, state: &Self::State) -> Result<ActionSet, EnvError>;
    fn state_features(&self, state: &Self::State) -> Vec<f64>;
    fn step(
        &self,
        state: &Self::State,
        action: Action,
        rng: &mut dyn RngCore,
    ) -> Result<(Self::State, RewardVector), EnvError>;
}

/// The two-node link environment, generic over the memory representation
/// and instantiated with two or three memory pairs per node.
#[derive(Debug, Clone)]
pub struct LinkMdp<M: MemoryPair> {
    kind: EnvKind,
    link: LinkParameters,
    num_slots: usize,
    dt: f64,
    p_gen: f64,
    twirl_after_distill: bool,
    _marker: std::marker::PhantomData<M>,
}

pub type WernerLinkMdp = LinkMdp<WernerPair>;
pub type BdsLinkMdp = LinkMdp<BdsPair>;

impl LinkMdp<WernerPair> {
    /// WN2M2: two Werner memory pairs per node.
    pub fn wn2m2(link: LinkParameters) -> Result<Self, EnvError> {
        Self::build(EnvKind::Wn2m2, link, 2, false)
    }

    /// WN2M3: three Werner memory pairs per node.
    pub fn wn2m3(link: LinkParameters) -> Result<Self, EnvError> {
        Self::build(EnvKind::Wn2m3, link, 3, false)
    }
}

impl LinkMdp<BdsPair> {
    /// BN2M2: two Bell-diagonal memory pairs per node; distillation keeps
    /// the full coefficient vector.
    pub fn bn2m2(link: LinkParameters) -> Result<Self, EnvError> {
        Self::build(EnvKind::Bn2m2, link, 2, false)
    }

    /// BN2M2 variant that twirls after every distillation, so that it
    /// mirrors WN2M2 trajectory-for-trajectory under a shared seed.
    pub fn bn2m2_with_twirling(link: LinkParameters) -> Result<Self, EnvError> {
        Self::build(EnvKind::Bn2m2, link, 2, true)
    }
}

impl<M: MemoryPair> LinkMdp<M> {
    fn build(
        kind: EnvKind,
        link: LinkParameters,
        num_slots: usize,
        twirl_after_distill: bool,
    ) -> Result<Self, EnvError> {
        let link = link.validated()?;
        let dt = link.dt();
        if !(dt > 0.0) {
            return Err(EnvError::Construction(format!(
                "time step dt = {dt}; the link must have positive length"
            )));
        }
        let p_gen = generation_probability(&link);
        Ok(LinkMdp {
            kind,
            link,
            num_slots,
            dt,
            p_gen,
            twirl_after_distill,
            _marker: std::marker::PhantomData,
        })
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn link(&self) -> &LinkParameters {
        &self.link
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    /// Duration of one generation attempt (the MDP time step), seconds.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn p_gen(&self) -> f64 {
        self.p_gen
    }

    /// Slot fidelities padded with zeros for empty slots.
    pub fn slot_fidelities(&self, state: &MdpState<M>) -> SmallVec<[f64; 3]> {
        let mut out: SmallVec<[f64; 3]> =
            state.occupied.iter().map(|m| m.fidelity()).collect();
        out.resize(self.num_slots, 0.0);
        out
    }

    fn distill(&self, a: &M, b: &M) -> (M, f64) {
        let (out, p) = M::distilled(a, b);
        if self.twirl_after_distill {
            (out.twirled(), p)
        } else {
            (out, p)
        }
    }

    fn admissible(&self, state: &MdpState<M>) -> ActionSet {
        let occupied = state.occupied.len();
        let full = occupied == self.num_slots;
        let heralded = state.knowledge_p >= 1.0;
        let mut set = ActionSet::new();
        if !full {
            set.push(Action::Wait);
        }
        if occupied >= 1 {
            set.push(Action::Consume);
        }
        if occupied >= 1 && heralded {
            set.push(Action::Discard);
        }
        if occupied >= 2 {
            set.push(Action::Purify(0, 1));
        }
        if occupied >= 3 {
            set.push(Action::Purify(0, 2));
            set.push(Action::Purify(1, 2));
        }
        // Keep enumeration order.
        set.sort_by_key(Action::index);
        set
    }

    fn step_wait(&self, state: &MdpState<M>, rng: &mut dyn RngCore) -> (MdpState<M>, RewardVector) {
        let free = self.num_slots - state.occupied.len();
        let mut survivors: SmallVec<[M; 3]> = SmallVec::new();
        for (i, pair) in state.occupied.iter().enumerate() {
            if i == 0 && state.knowledge_p < 1.0 {
                // Heralding for the pending distillation arrives during this
                // step; on failure the stored pair is discarded.
                if rng.random::<f64>() >= state.knowledge_p {
                    continue;
                }
            }
            survivors.push(pair.depolarized(self.dt, self.link.coherence_time_s));
        }
        // One independent generation attempt per slot that was free at the
        // start of the step. Fresh pairs are not decohered within the step
        // that creates them.
        for _ in 0..free {
            if rng.random::<f64>() < self.p_gen {
                survivors.push(M::fresh(self.link.initial_fidelity));
            }
        }
        let next = MdpState {
            occupied: survivors,
            knowledge_p: 1.0,
            terminal: false,
        };
        let reward = RewardVector {
            time_s: self.dt,
            ..RewardVector::default()
        };
        (next, reward)
    }

    fn step_consume(
        &self,
        state: &MdpState<M>,
        rng: &mut dyn RngCore,
    ) -> (MdpState<M>, RewardVector) {
        let mut reward = RewardVector::default();
        if state.knowledge_p >= 1.0 {
            let target = state.consume_target();
            state.occupied[target].write_consume_reward(&mut reward);
            return (MdpState::terminal_state(), reward);
        }
        // Slot 1 holds the pair with the pending distillation outcome.
        if rng.random::<f64>() < state.knowledge_p {
            state.occupied[0].write_consume_reward(&mut reward);
            (MdpState::terminal_state(), reward)
        } else {
            let mut rest = state.occupied.clone();
            rest.remove(0);
            (
                MdpState {
                    occupied: rest,
                    knowledge_p: 1.0,
                    terminal: false,
                },
                reward,
            )
        }
    }

    fn step_discard(&self, state: &MdpState<M>) -> (MdpState<M>, RewardVector) {
        let target = state.discard_target();
        let mut rest = state.occupied.clone();
        rest.remove(target);
        // Remaining pairs are reordered by descending fidelity.
        rest.sort_by(|a, b| b.fidelity().partial_cmp(&a.fidelity()).unwrap());
        (
            MdpState {
                occupied: rest,
                knowledge_p: 1.0,
                terminal: false,
            },
            RewardVector::default(),
        )
    }

    fn step_purify(&self, state: &MdpState<M>, i: usize, j: usize) -> (MdpState<M>, RewardVector) {
        let (out, p_success) = self.distill(&state.occupied[i], &state.occupied[j]);
        let mut next: SmallVec<[M; 3]> = SmallVec::new();
        next.push(out);
        for (k, pair) in state.occupied.iter().enumerate() {
            if k != i && k != j {
                next.push(*pair);
            }
        }
        // Unheralded outcomes compound multiplicatively.
        let knowledge_p = state.knowledge_p * p_success;
        (
            MdpState {
                occupied: next,
                knowledge_p,
                terminal: false,
            },
            RewardVector::default(),
        )
    }
}

impl<M: MemoryPair> Environment for LinkMdp<M> {
    type State = MdpState<M>;

    fn feature_dim(&self) -> usize {
        self.num_slots * M::FEATURES_PER_SLOT + 1
    }

    fn num_actions(&self) -> usize {
        if self.num_slots == 2 {
            4
        } else {
            6
        }
    }

    fn reward_channels(&self) -> &'static [RewardChannel] {
        M::CHANNELS
    }

    fn initial_state(&self) -> MdpState<M> {
        MdpState::initial()
    }

    fn is_terminal(&self, state: &MdpState<M>) -> bool {
        state.terminal
    }

    fn admissible_actions(&self, state: &MdpState<M>) -> Result<ActionSet, EnvError> {
        if state.terminal {
            return Err(EnvError::TerminalState);
        }
        debug_assert!(state.occupied.len() <= self.num_slots);
        Ok(self.admissible(state))
    }

    fn state_features(&self, state: &MdpState<M>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_dim());
        for pair in &state.occupied {
            pair.write_features(&mut out);
        }
        for _ in state.occupied.len()..self.num_slots {
            M::write_empty_features(&mut out);
        }
        out.push(state.knowledge_p);
        out
    }

    fn step(
        &self,
        state: &MdpState<M>,
        action: Action,
        rng: &mut dyn RngCore,
    ) -> Result<(MdpState<M>, RewardVector), EnvError> {
        let admissible = self.admissible_actions(state)?;
        if !admissible.contains(&action) {
            return Err(EnvError::InadmissibleAction(action));
        }
        Ok(match action {
            Action::Wait => self.step_wait(state, rng),
            Action::Consume => self.step_consume(state, rng),
            Action::Discard => self.step_discard(state),
            Action::Purify(i, j) => self.step_purify(state, i, j),
        })
    }
}

/// A decision rule mapping states to actions, possibly stochastic.
pub trait DecisionPolicy<E: Environment + ?Sized> {
    fn decide(
        &self,
        env: &E,
        state: &E::State,
        rng: &mut dyn RngCore,
    ) -> Result<Action, EnvError>;
}

/// One recorded step: the feature representation of the visited state, the
/// admissible set, the action taken, and the reward vector.
#[derive(Debug, Clone)]
pub struct EpisodeStep {
    pub features: Vec<f64>,
    pub admissible: ActionSet,
    pub action: Action,
    pub reward: RewardVector,
}

/// A completed episode: terminal entry or truncation at the step cap.
#[derive(Debug, Clone, Default)]
pub struct EpisodeHistory {
    pub steps: Vec<EpisodeStep>,
    pub truncated: bool,
}

impl EpisodeHistory {
    /// Episode total of one reward channel (undiscounted).
    pub fn total(&self, channel: RewardChannel) -> f64 {
        self.steps.iter().map(|s| s.reward.channel(channel)).sum()
    }
}

/// Rolls out one episode from the initial state, stopping at the terminal
/// state or after `max_steps` steps.
pub fn run_episode<E, P>(
    env: &E,
    policy: &P,
    rng: &mut dyn RngCore,
    max_steps: usize,
) -> Result<EpisodeHistory, EnvError>
where
    E: Environment,
    P: DecisionPolicy<E> + ?Sized,
{
    let mut state = env.initial_state();
    let mut history = EpisodeHistory::default();
    for _ in 0..max_steps {
        if env.is_terminal(&state) {
            return Ok(history);
        }
        let features = env.state_features(&state);
        let admissible = env.admissible_actions(&state)?;
        let action = policy.decide(env, &state, rng)?;
        let (next, reward) = env.step(&state, action, rng)?;
        history.steps.push(EpisodeStep {
            features,
            admissible,
            action,
            reward,
        });
        state = next;
    }
    history.truncated = !env.is_terminal(&state);
    Ok(history)
}

/// Uniform-random choice over the admissible set; useful as a probe policy.
pub struct UniformPolicy;

impl<E: Environment> DecisionPolicy<E> for UniformPolicy {
    fn decide(
        &self,
        env: &E,
        state: &E::State,
        rng: &mut dyn RngCore,
    ) -> Result<Action, EnvError> {
        let actions = env.admissible_actions(state)?;
        let k = rng.random_range(0..actions.len());
        Ok(actions[k])
    }
}
