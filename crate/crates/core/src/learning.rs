//! Private signals, private beliefs and finite-memory learning sequences.
//!
//! A node that joins a sequence receives `K` bits from its predecessor: the
//! last `K - 2` private signals along the sequence (oldest first), the running
//! estimate `T` and the challenge bit `Q`. It forms a maximum-likelihood
//! private belief `x` from those signals plus its own, runs the two-bit
//! tracking automaton, and forwards the window shifted by one with its own
//! signal appended.
//!
//! Sequences advance one hop per slot. A node joins the first sequence that
//! reaches it (uniformly at random among simultaneous arrivals) and ignores
//! everything afterwards.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::params::SystemParams;
use crate::topology::Topology;

/// How a node turns a window of signals into a private belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeliefRule {
    /// Log-likelihood ratio test with known `p11` and `p10`.
    Known,
    /// `p10` treated as negligible: belief is 1 iff any signal is 1.
    Unknown,
}

impl std::str::FromStr for BeliefRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "known" => Ok(Self::Known),
            "unknown" => Ok(Self::Unknown),
            other => Err(invalid(format!("unknown belief rule {other:?}"))),
        }
    }
}

/// Where a signal in a window came from. Simulator metadata only; the air
/// interface carries just the bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Zero fill for history the sequence does not have yet.
    Padding,
    Inside,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggedSignal {
    pub bit: bool,
    pub provenance: Provenance,
}

impl TaggedSignal {
    pub const PADDING: TaggedSignal = TaggedSignal {
        bit: false,
        provenance: Provenance::Padding,
    };

    pub fn observed(bit: bool, inside: bool) -> Self {
        Self {
            bit,
            provenance: if inside {
                Provenance::Inside
            } else {
                Provenance::Outside
            },
        }
    }
}

/// Learning content passed between neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearningMessage {
    /// Oldest first. Exactly `K - 2` entries for a finite memory.
    pub signals: Vec<TaggedSignal>,
    /// `T`: running estimate of the abnormality.
    pub estimate: bool,
    /// `Q`: set when the estimate is being challenged.
    pub challenge: bool,
    pub sequence_id: u32,
}

impl LearningMessage {
    /// The bits that actually go on the air: signals, then `T`, then `Q`.
    pub fn air_bits(&self) -> Vec<bool> {
        self.signals
            .iter()
            .map(|s| s.bit)
            .chain([self.estimate, self.challenge])
            .collect()
    }
}

/// State of a node after its learning step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefState {
    /// The `K - 2` signals this node forwards, oldest first.
    pub window: Vec<TaggedSignal>,
    pub estimate: bool,
    pub challenge: bool,
    /// Private belief `x` formed at the learning step.
    pub belief: bool,
    pub learned: bool,
    /// Signals in the belief window that came from inside the observation disk.
    pub kappa: usize,
    /// Remaining signals in the belief window (outside or padding).
    pub eta: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Memory {
    /// `K` bits: `K - 2` signals plus `T` and `Q`.
    Finite(usize),
    /// Full signal history; the estimate is the ML belief over all of it.
    Infinite,
}

/// Bernoulli(`p11`) inside the disk when the abnormality is present,
/// Bernoulli(`p10`) otherwise.
pub fn draw_private_signal_under<R: Rng + ?Sized>(
    abnormality: bool,
    inside: bool,
    params: &SystemParams,
    rng: &mut R,
) -> bool {
    let p = if abnormality && inside {
        params.p11
    } else {
        params.p10
    };
    rng.random_bool(p)
}

/// Private signal with the abnormality present.
pub fn draw_private_signal<R: Rng + ?Sized>(inside: bool, params: &SystemParams, rng: &mut R) -> bool {
    draw_private_signal_under(true, inside, params, rng)
}

/// Likelihood-ratio belief: 1 iff the ratio of the summed log-likelihoods
/// under "present" and "absent" is at most one.
pub fn private_belief_known(signals: &[bool], p11: f64, p10: f64) -> Result<bool> {
    if signals.is_empty() {
        return Err(invalid("belief needs at least one signal"));
    }
    for p in [p11, p10] {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!(
                "likelihood ratio test needs probabilities strictly inside (0, 1), got {p}"
            )));
        }
    }
    let ones = signals.iter().filter(|&&b| b).count() as f64;
    let zeros = signals.len() as f64 - ones;
    let present = ones * p11.ln() + zeros * (1.0 - p11).ln();
    let absent = ones * p10.ln() + zeros * (1.0 - p10).ln();
    // both sums are strictly negative
    Ok(present / absent <= 1.0)
}

/// OR-rule belief.
pub fn private_belief_unknown(signals: &[bool]) -> Result<bool> {
    if signals.is_empty() {
        return Err(invalid("belief needs at least one signal"));
    }
    Ok(signals.iter().any(|&b| b))
}

pub fn private_belief(signals: &[bool], rule: BeliefRule, p11: f64, p10: f64) -> Result<bool> {
    match rule {
        BeliefRule::Known => private_belief_known(signals, p11, p10),
        BeliefRule::Unknown => private_belief_unknown(signals),
    }
}

/// Two-bit tracking automaton. `T` flips only after two consecutive beliefs
/// that disagree with it; `Q` records the first disagreement.
pub fn track(estimate: bool, challenge: bool, belief: bool) -> (bool, bool) {
    match (challenge, belief == estimate) {
        (false, true) => (estimate, false),
        (false, false) => (estimate, true),
        (true, false) => (!estimate, false),
        (true, true) => (estimate, false),
    }
}

fn belief_counts(considered: &[TaggedSignal]) -> (usize, usize) {
    let kappa = considered
        .iter()
        .filter(|s| s.provenance == Provenance::Inside)
        .count();
    (kappa, considered.len() - kappa)
}

/// One finite-memory learning step.
pub fn update_state(
    incoming: &LearningMessage,
    own: TaggedSignal,
    params: &SystemParams,
    rule: BeliefRule,
) -> Result<(BeliefState, LearningMessage)> {
    let window_len = params.memory_bits.checked_sub(2).ok_or_else(|| {
        invalid(format!("memory K = {} is below 2", params.memory_bits))
    })?;
    if incoming.signals.len() != window_len {
        return Err(Error::MalformedWindow {
            expected: window_len,
            actual: incoming.signals.len(),
        });
    }
    let mut considered = incoming.signals.clone();
    considered.push(own);
    let bits: Vec<bool> = considered.iter().map(|s| s.bit).collect();
    let belief = private_belief(&bits, rule, params.p11, params.p10)?;
    let (estimate, challenge) = track(incoming.estimate, incoming.challenge, belief);
    let (kappa, eta) = belief_counts(&considered);
    let window = considered[1..].to_vec();
    let state = BeliefState {
        window: window.clone(),
        estimate,
        challenge,
        belief,
        learned: true,
        kappa,
        eta,
    };
    let outgoing = LearningMessage {
        signals: window,
        estimate,
        challenge,
        sequence_id: incoming.sequence_id,
    };
    Ok((state, outgoing))
}

/// Full-history baseline: appends the node's signal and re-estimates from
/// everything seen so far.
pub fn infinite_memory_update(
    history: &[bool],
    own: bool,
    params: &SystemParams,
    known_probs: bool,
) -> Result<(Vec<bool>, bool)> {
    let mut extended = history.to_vec();
    extended.push(own);
    let rule = if known_probs {
        BeliefRule::Known
    } else {
        BeliefRule::Unknown
    };
    let estimate = private_belief(&extended, rule, params.p11, params.p10)?;
    Ok((extended, estimate))
}

fn learn_infinite(
    incoming: &LearningMessage,
    own: TaggedSignal,
    params: &SystemParams,
    rule: BeliefRule,
) -> Result<(BeliefState, LearningMessage)> {
    let mut considered = incoming.signals.clone();
    considered.push(own);
    let bits: Vec<bool> = considered.iter().map(|s| s.bit).collect();
    let estimate = private_belief(&bits, rule, params.p11, params.p10)?;
    let (kappa, eta) = belief_counts(&considered);
    let state = BeliefState {
        window: considered.clone(),
        estimate,
        challenge: false,
        belief: estimate,
        learned: true,
        kappa,
        eta,
    };
    let outgoing = LearningMessage {
        signals: considered,
        estimate,
        challenge: false,
        sequence_id: incoming.sequence_id,
    };
    Ok((state, outgoing))
}

/// A sequence root. Its belief rests on its own signal alone; the forwarded
/// window is zero-padded in front of that signal.
fn root_state(own: TaggedSignal, memory: Memory, sequence_id: u32) -> (BeliefState, LearningMessage) {
    let considered: Vec<TaggedSignal> = match memory {
        Memory::Finite(k) => {
            let mut w = vec![TaggedSignal::PADDING; k - 2];
            w.push(own);
            w
        }
        Memory::Infinite => vec![own],
    };
    let window = match memory {
        Memory::Finite(_) => considered[1..].to_vec(),
        Memory::Infinite => considered.clone(),
    };
    let (kappa, eta) = belief_counts(&considered);
    let state = BeliefState {
        window: window.clone(),
        estimate: own.bit,
        challenge: false,
        belief: own.bit,
        learned: true,
        kappa,
        eta,
    };
    let msg = LearningMessage {
        signals: window,
        estimate: own.bit,
        challenge: false,
        sequence_id,
    };
    (state, msg)
}

/// One row of the learning trace, emitted when a node executes its step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub step: u64,
    pub node: usize,
    pub sequence_id: u32,
    pub belief: bool,
    pub estimate: bool,
    pub challenge: bool,
}

/// Slot-synchronous propagation state for one episode.
#[derive(Debug, Clone)]
pub struct SequenceState {
    pub memory: Memory,
    pub rule: BeliefRule,
    /// Sequence each node joined, if any. Never reassigned.
    pub membership: Vec<Option<u32>>,
    pub states: Vec<Option<BeliefState>>,
    /// Predecessor chosen by each non-root member.
    pub parent: Vec<Option<usize>>,
    /// Propagation step at which each node joined (roots at 0).
    pub joined_at: Vec<Option<u64>>,
    /// Private signal of every node, drawn once at onset.
    pub signals: Vec<bool>,
    /// Whether each node has ever held belief 1.
    pub ever_believed: Vec<bool>,
    pub roots: usize,
    pub step: u64,
    outgoing: Vec<Option<LearningMessage>>,
    /// Senders whose message reaches each node at the next step.
    pending: Vec<Vec<usize>>,
    frontier: Vec<usize>,
}

impl SequenceState {
    pub fn is_terminated(&self) -> bool {
        self.frontier.is_empty()
    }

    pub fn estimate(&self, node: usize) -> bool {
        self.states[node].as_ref().is_some_and(|s| s.estimate)
    }

    pub fn outgoing(&self, node: usize) -> Option<&LearningMessage> {
        self.outgoing[node].as_ref()
    }

    /// Nodes that will execute a learning step at the next call to
    /// [`propagate_step`], in id order.
    pub fn frontier(&self) -> &[usize] {
        &self.frontier
    }

    pub fn pending_from(&self, node: usize) -> &[usize] {
        &self.pending[node]
    }

    pub fn member_count(&self) -> usize {
        self.membership.iter().filter(|m| m.is_some()).count()
    }

    fn trace_row(&self, node: usize) -> TraceRow {
        let s = self.states[node].as_ref().expect("member has a state");
        TraceRow {
            step: self.step,
            node,
            sequence_id: self.membership[node].expect("member has a sequence"),
            belief: s.belief,
            estimate: s.estimate,
            challenge: s.challenge,
        }
    }

    /// Queues `joined` nodes' messages at their unassigned neighbors.
    fn broadcast(&mut self, topology: &Topology, joined: &[usize]) {
        let mut next = Vec::new();
        for &node in joined {
            for &nb in &topology.adjacency[node] {
                if self.membership[nb].is_none() {
                    if self.pending[nb].is_empty() {
                        next.push(nb);
                    }
                    self.pending[nb].push(node);
                }
            }
        }
        next.sort_unstable();
        self.frontier = next;
    }
}

/// Draws every node's private signal at onset and starts one sequence at each
/// node that observed the abnormality.
pub fn seed_sequences<R: Rng + ?Sized>(
    topology: &Topology,
    params: &SystemParams,
    memory: Memory,
    abnormality: bool,
    rng: &mut R,
) -> Result<(SequenceState, Vec<TraceRow>)> {
    if let Memory::Finite(k) = memory {
        if k < 2 {
            return Err(invalid(format!("memory K = {k} is below 2")));
        }
    }
    let n = topology.len();
    let signals: Vec<bool> = (0..n)
        .map(|i| draw_private_signal_under(abnormality, topology.inside[i], params, rng))
        .collect();
    let mut state = SequenceState {
        memory,
        rule: params.belief_rule,
        membership: vec![None; n],
        states: vec![None; n],
        parent: vec![None; n],
        joined_at: vec![None; n],
        signals,
        ever_believed: vec![false; n],
        roots: 0,
        step: 0,
        outgoing: vec![None; n],
        pending: vec![Vec::new(); n],
        frontier: Vec::new(),
    };
    let mut joined = Vec::new();
    let mut trace = Vec::new();
    for i in 0..n {
        if !state.signals[i] {
            continue;
        }
        let id = state.roots as u32;
        state.roots += 1;
        let own = TaggedSignal::observed(true, topology.inside[i]);
        let (s, msg) = root_state(own, memory, id);
        state.ever_believed[i] |= s.belief;
        state.membership[i] = Some(id);
        state.joined_at[i] = Some(0);
        state.states[i] = Some(s);
        state.outgoing[i] = Some(msg);
        joined.push(i);
        trace.push(state.trace_row(i));
    }
    state.broadcast(topology, &joined);
    Ok((state, trace))
}

/// Advances every pending sequence by one hop. Returns the trace rows of the
/// nodes that executed their learning step.
pub fn propagate_step<R: Rng + ?Sized>(
    topology: &Topology,
    state: &mut SequenceState,
    params: &SystemParams,
    rng: &mut R,
) -> Result<Vec<TraceRow>> {
    let frontier = std::mem::take(&mut state.frontier);
    state.step += 1;
    // read phase: every update sees only messages committed in earlier steps
    let mut updates = Vec::with_capacity(frontier.len());
    for &node in &frontier {
        let senders = &state.pending[node];
        let pick = if senders.len() == 1 {
            0
        } else {
            rng.random_range(0..senders.len())
        };
        let sender = senders[pick];
        let incoming = state.outgoing[sender]
            .as_ref()
            .expect("sender has an outgoing message");
        let own = TaggedSignal::observed(state.signals[node], topology.inside[node]);
        let (s, msg) = match state.memory {
            Memory::Finite(_) => update_state(incoming, own, params, state.rule)?,
            Memory::Infinite => learn_infinite(incoming, own, params, state.rule)?,
        };
        updates.push((node, sender, s, msg));
    }
    // commit phase
    let mut trace = Vec::with_capacity(updates.len());
    for (node, sender, s, msg) in updates {
        state.ever_believed[node] |= s.belief;
        state.membership[node] = Some(msg.sequence_id);
        state.parent[node] = Some(sender);
        state.joined_at[node] = Some(state.step);
        state.states[node] = Some(s);
        state.outgoing[node] = Some(msg);
        state.pending[node].clear();
        trace.push(state.trace_row(node));
    }
    state.broadcast(topology, &frontier);
    Ok(trace)
}
