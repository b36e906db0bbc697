//! Slotted CDMA uplink with periodic reporters and one alarm.
//!
//! Each slot, the nodes whose phase matches transmit one periodic message on a
//! uniformly chosen code; failed periodic messages are dropped. From the
//! abnormality onset on, the alarm holder transmits on the reserved code every
//! slot. A transmission succeeds iff no other transmitter used its code.
//! Nodes whose learning estimate says "alarm present" stop using the
//! reserved code.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::learning::{propagate_step, seed_sequences, Memory, SequenceState, TraceRow};
use crate::params::{PhaseAssignment, SystemParams};
use crate::rng::{stream, Stream};
use crate::topology::{sample_deployment, Topology};

/// Code index used by the alarm holder.
pub const RESERVED_CODE: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    NoLearning,
    FiniteMemory,
    InfiniteMemory,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::NoLearning, Mode::FiniteMemory, Mode::InfiniteMemory];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::NoLearning => "no_learning",
            Mode::FiniteMemory => "finite_memory",
            Mode::InfiniteMemory => "infinite_memory",
        }
    }

    fn memory(self, memory_bits: usize) -> Option<Memory> {
        match self {
            Mode::NoLearning => None,
            Mode::FiniteMemory => Some(Memory::Finite(memory_bits)),
            Mode::InfiniteMemory => Some(Memory::Infinite),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficState {
    pub period: u64,
    /// First periodic slot of each node, in `1..=T`.
    pub phase: Vec<u64>,
    /// Nodes grouped by phase; `by_phase[p - 1]` is sorted by id.
    pub by_phase: Vec<Vec<usize>>,
    pub alarm_holder: Option<usize>,
    pub alarm_onset: u64,
    pub reserved_code: u64,
}

impl TrafficState {
    pub fn alarm_active(&self, slot: u64) -> bool {
        self.alarm_holder.is_some() && slot >= self.alarm_onset
    }

    /// Periodic transmitters in `slot`, in id order. The alarm holder stops
    /// sending periodic messages once its alarm is active.
    pub fn periodic_active(&self, slot: u64) -> impl Iterator<Item = usize> + '_ {
        let idx = ((slot + self.period - 1) % self.period) as usize;
        let skip = if self.alarm_active(slot) {
            self.alarm_holder
        } else {
            None
        };
        self.by_phase[idx].iter().copied().filter(move |&n| Some(n) != skip)
    }
}

/// Assigns first-transmission slots. The alarm holder (if any) draws its
/// phase independently; the other nodes follow `params.phase_assignment`.
pub fn schedule_phases<R: Rng + ?Sized>(
    topology: &Topology,
    params: &SystemParams,
    alarm_holder: Option<usize>,
    rng: &mut R,
) -> TrafficState {
    let period = params.period;
    let n = topology.len();
    let mut phase = vec![0u64; n];
    match params.phase_assignment {
        PhaseAssignment::Balanced => {
            let mut order: Vec<usize> = (0..n).filter(|&i| Some(i) != alarm_holder).collect();
            order.shuffle(rng);
            let offset = rng.random_range(0..period);
            for (rank, node) in order.into_iter().enumerate() {
                phase[node] = (offset + rank as u64) % period + 1;
            }
        }
        PhaseAssignment::Independent => {
            for (i, p) in phase.iter_mut().enumerate() {
                if Some(i) != alarm_holder {
                    *p = rng.random_range(1..=period);
                }
            }
        }
    }
    if let Some(h) = alarm_holder {
        phase[h] = rng.random_range(1..=period);
    }
    let mut by_phase = vec![Vec::new(); period as usize];
    for (i, &p) in phase.iter().enumerate() {
        by_phase[(p - 1) as usize].push(i);
    }
    TrafficState {
        period,
        phase,
        by_phase,
        alarm_holder,
        alarm_onset: params.onset(),
        reserved_code: RESERVED_CODE,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotOutcome {
    pub slot: u64,
    /// Every transmitter, periodic ones in id order, then the alarm holder.
    pub active: Vec<usize>,
    pub code_choice: Vec<u64>,
    /// Whether each transmitter was avoiding the reserved code.
    pub avoiding: Vec<bool>,
    pub successes: Vec<usize>,
    pub alarm_active: bool,
    pub alarm_success: bool,
}

impl SlotOutcome {
    /// Successful periodic messages (the alarm is not counted).
    pub fn periodic_successes(&self) -> usize {
        self.successes.len() - usize::from(self.alarm_success)
    }
}

/// Runs one slot. `learned[i]` is node `i`'s current "alarm present" estimate.
pub fn simulate_slot<R: Rng + ?Sized>(
    traffic: &TrafficState,
    learned: &[bool],
    slot: u64,
    codes: u64,
    rng: &mut R,
) -> SlotOutcome {
    let mut active: Vec<usize> = traffic.periodic_active(slot).collect();
    let mut code_choice = Vec::with_capacity(active.len() + 1);
    let mut avoiding = Vec::with_capacity(active.len() + 1);
    for &node in &active {
        let avoid = learned[node];
        let code = if avoid {
            // uniform over the C - 1 codes other than the reserved one
            let c = rng.random_range(0..codes - 1);
            if c >= traffic.reserved_code {
                c + 1
            } else {
                c
            }
        } else {
            rng.random_range(0..codes)
        };
        code_choice.push(code);
        avoiding.push(avoid);
    }
    let alarm_active = traffic.alarm_active(slot);
    if alarm_active {
        let h = traffic.alarm_holder.expect("active alarm has a holder");
        active.push(h);
        code_choice.push(traffic.reserved_code);
        avoiding.push(false);
    }
    let mut load = vec![0u32; codes as usize];
    for &c in &code_choice {
        load[c as usize] += 1;
    }
    let successes: Vec<usize> = active
        .iter()
        .zip(&code_choice)
        .filter(|(_, &c)| load[c as usize] == 1)
        .map(|(&n, _)| n)
        .collect();
    let alarm_success = alarm_active && load[traffic.reserved_code as usize] == 1;
    SlotOutcome {
        slot,
        active,
        code_choice,
        avoiding,
        successes,
        alarm_active,
        alarm_success,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub n_nodes: usize,
    pub onset: u64,
    /// Slots from onset (counted as 1) to the first alarm success; 0 when
    /// the episode was truncated first.
    pub alarm_delay: u64,
    /// Periodic successes in every slot, starting at slot 1.
    pub throughput_series: Vec<u32>,
    /// Mean periodic successes per slot before onset.
    pub throughput_baseline: f64,
    /// Mean periodic successes per slot from onset to the end of the episode.
    pub throughput_post: f64,
    /// Fraction of nodes whose estimate matches the truth once propagation
    /// has ended.
    pub learned_fraction_final: f64,
    /// The same fraction after every post-onset slot.
    pub learned_fraction_series: Vec<f64>,
    /// Fraction learned in the slot where the alarm first got through.
    pub learned_at_success: f64,
    /// Nodes that observed the abnormality at onset (sequence roots).
    pub roots: usize,
    pub zero_observer: bool,
    /// Propagation steps until no sequence could advance.
    pub propagation_steps: u64,
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeTrace {
    pub slots: Vec<SlotOutcome>,
    /// Learning rows as `(slot, row)`.
    pub learning: Vec<(u64, TraceRow)>,
}

/// Everything that stays fixed within an episode, precomputed from a seed.
pub struct EpisodeSetup {
    pub topology: Topology,
    pub traffic: TrafficState,
}

impl EpisodeSetup {
    pub fn sample(params: &SystemParams, seed: u64) -> Result<Self> {
        let topology = sample_deployment(params, &mut stream(seed, Stream::Topology))?;
        Self::with_topology(params, seed, topology)
    }

    pub fn with_topology(params: &SystemParams, seed: u64, topology: Topology) -> Result<Self> {
        let holder = topology.nearest_to_abnormality().ok_or(Error::EmptyDeployment)?;
        let traffic = schedule_phases(&topology, params, Some(holder), &mut stream(seed, Stream::Phases));
        Ok(Self { topology, traffic })
    }
}

pub fn run_episode(params: &SystemParams, mode: Mode, seed: u64) -> Result<EpisodeMetrics> {
    params.validate()?;
    let setup = EpisodeSetup::sample(params, seed)?;
    run_prepared(params, mode, seed, &setup, None)
}

pub fn run_episode_traced(
    params: &SystemParams,
    mode: Mode,
    seed: u64,
    setup: &EpisodeSetup,
) -> Result<(EpisodeMetrics, EpisodeTrace)> {
    params.validate()?;
    let mut trace = EpisodeTrace::default();
    let metrics = run_prepared(params, mode, seed, setup, Some(&mut trace))?;
    Ok((metrics, trace))
}

fn mean(values: &[u32]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64
    }
}

/// Runs until the alarm has succeeded and propagation has stopped.
pub fn run_prepared(
    params: &SystemParams,
    mode: Mode,
    seed: u64,
    setup: &EpisodeSetup,
    mut trace: Option<&mut EpisodeTrace>,
) -> Result<EpisodeMetrics> {
    let topology = &setup.topology;
    let traffic = &setup.traffic;
    let n = topology.len();
    let codes = params.codes();
    if codes < 2 {
        return Err(Error::InvalidParameter("at least two codes are required".into()));
    }
    let onset = traffic.alarm_onset;
    let memory = mode.memory(params.memory_bits);
    let mut signal_rng = stream(seed, Stream::Signals);
    let mut learn_rng = stream(seed, Stream::Learning);
    let mut code_rng = stream(seed, Stream::Codes);

    let mut learned = vec![false; n];
    let mut learned_count = 0usize;
    let mut sequences: Option<SequenceState> = None;
    let mut roots = 0;

    let mut throughput_series = Vec::new();
    let mut learned_fraction_series = Vec::new();
    let mut alarm_delay = None;
    let mut learned_at_success = 0.0;

    let mut slot = 1u64;
    loop {
        let mut rows = Vec::new();
        if slot == onset {
            let (st, seed_rows) = seed_sequences(
                topology,
                params,
                memory.unwrap_or(Memory::Finite(params.memory_bits)),
                true,
                &mut signal_rng,
            )?;
            roots = st.roots;
            if memory.is_some() {
                rows = seed_rows;
                sequences = Some(st);
            }
        } else if slot > onset {
            if let Some(st) = sequences.as_mut().filter(|s| !s.is_terminated()) {
                rows = propagate_step(topology, st, params, &mut learn_rng)?;
            }
        }
        for r in &rows {
            if r.estimate && !learned[r.node] {
                learned[r.node] = true;
                learned_count += 1;
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.learning.extend(rows.iter().map(|r| (slot, *r)));
        }

        let outcome = simulate_slot(traffic, &learned, slot, codes, &mut code_rng);
        throughput_series.push(outcome.periodic_successes() as u32);
        let alarm_success = outcome.alarm_success;
        if let Some(t) = trace.as_deref_mut() {
            t.slots.push(outcome);
        }

        if slot >= onset {
            let fraction = learned_count as f64 / n as f64;
            learned_fraction_series.push(fraction);
            if alarm_success && alarm_delay.is_none() {
                alarm_delay = Some(slot - onset + 1);
                learned_at_success = fraction;
            }
            let propagating = sequences.as_ref().is_some_and(|s| !s.is_terminated());
            let elapsed = slot - onset + 1;
            if alarm_delay.is_some() && !propagating {
                break;
            }
            if elapsed >= params.episode_cap {
                let split = (onset - 1) as usize;
                let metrics = EpisodeMetrics {
                    n_nodes: n,
                    onset,
                    alarm_delay: alarm_delay.unwrap_or(0),
                    throughput_baseline: mean(&throughput_series[..split]),
                    throughput_post: mean(&throughput_series[split..]),
                    throughput_series,
                    learned_fraction_final: fraction,
                    learned_fraction_series,
                    learned_at_success,
                    roots,
                    zero_observer: roots == 0,
                    propagation_steps: sequences.as_ref().map_or(0, |s| s.step),
                };
                return Err(Error::Truncated {
                    cap: params.episode_cap,
                    metrics: Box::new(metrics),
                });
            }
        }
        slot += 1;
    }

    let split = (onset - 1) as usize;
    Ok(EpisodeMetrics {
        n_nodes: n,
        onset,
        alarm_delay: alarm_delay.expect("loop exits after the alarm succeeds"),
        throughput_baseline: mean(&throughput_series[..split]),
        throughput_post: mean(&throughput_series[split..]),
        throughput_series,
        learned_fraction_final: learned_count as f64 / n as f64,
        learned_fraction_series,
        learned_at_success,
        roots,
        zero_observer: roots == 0,
        propagation_steps: sequences.as_ref().map_or(0, |s| s.step),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Point;

    fn traffic(n: usize, period: u64) -> TrafficState {
        let p = SystemParams {
            period,
            ..SystemParams::default()
        }
        .with_fixed_n(n);
        let topo = sample_deployment(&p, &mut stream(1, Stream::Topology)).unwrap();
        schedule_phases(&topo, &p, None, &mut stream(1, Stream::Phases))
    }

    #[test]
    fn period_one_means_always_active() {
        let t = traffic(10, 1);
        for slot in 1..5 {
            assert_eq!(t.periodic_active(slot).count(), 10);
        }
    }

    #[test]
    fn balanced_phases_are_even() {
        let t = traffic(2000, 20);
        for slot in 1..=40 {
            assert_eq!(t.periodic_active(slot).count(), 100);
        }
        assert!(t.phase.iter().all(|&p| (1..=20).contains(&p)));
    }

    #[test]
    fn independent_phases_average_n_over_t() {
        let mut p = SystemParams::default().with_fixed_n(2000);
        p.phase_assignment = PhaseAssignment::Independent;
        let topo = sample_deployment(&p, &mut stream(2, Stream::Topology)).unwrap();
        // every 20-slot cycle covers each node exactly once, so average over
        // fresh phase draws instead
        let mut total = 0usize;
        let draws = 500;
        for k in 0..draws {
            let t = schedule_phases(&topo, &p, None, &mut stream(k, Stream::Phases));
            for slot in 1..=20 {
                total += t.periodic_active(slot).count();
            }
        }
        let mean = total as f64 / (draws * 20) as f64;
        assert!((mean - 100.0).abs() < 1.0, "{mean}");
    }

    /// Every node transmits in every slot.
    fn fixed(n: usize, alarm: Option<usize>) -> TrafficState {
        TrafficState {
            period: 1,
            phase: vec![1; n],
            by_phase: vec![(0..n).collect()],
            alarm_holder: alarm,
            alarm_onset: 1,
            reserved_code: 0,
        }
    }

    /// Recounts successes for a given set of codes without the RNG.
    fn unique_holders(codes: &[u64]) -> Vec<usize> {
        (0..codes.len())
            .filter(|&i| codes.iter().filter(|&&c| c == codes[i]).count() == 1)
            .collect()
    }

    #[test]
    fn collision_rule() {
        assert!(unique_holders(&[3, 3]).is_empty());
        assert_eq!(unique_holders(&[3, 7]), vec![0, 1]);
        let t = fixed(2, Some(0));
        // holder 0 is on the reserved code; node 1 collides only if it picks 0
        let mut rng = stream(4, Stream::Codes);
        let mut collided = false;
        for slot in 1..200 {
            let o = simulate_slot(&t, &[false, false], slot, 15, &mut rng);
            assert_eq!(o.active, vec![1, 0]);
            let recount: Vec<usize> = unique_holders(&o.code_choice)
                .into_iter()
                .map(|i| o.active[i])
                .collect();
            assert_eq!(o.successes, recount);
            if o.code_choice[0] == 0 {
                collided = true;
                assert!(!o.alarm_success);
            } else {
                assert!(o.alarm_success);
            }
        }
        assert!(collided);
    }

    #[test]
    fn learned_nodes_skip_reserved_code() {
        let t = fixed(6, None);
        let mut rng = stream(6, Stream::Codes);
        for slot in 1..2000 {
            let o = simulate_slot(&t, &[true; 6], slot, 3, &mut rng);
            assert!(o.code_choice.iter().all(|&c| c == 1 || c == 2));
        }
    }

    #[test]
    fn lone_alarm_succeeds_immediately() {
        let p = SystemParams::default().with_fixed_n(1);
        for mode in Mode::ALL {
            let m = run_episode(&p, mode, 11).unwrap();
            assert_eq!(m.alarm_delay, 1);
            assert_eq!(m.n_nodes, 1);
        }
    }

    #[test]
    fn empty_deployment_is_an_error() {
        let p = SystemParams::default().with_fixed_n(0);
        assert!(matches!(run_episode(&p, Mode::NoLearning, 1), Err(Error::EmptyDeployment)));
    }

    #[test]
    fn truncation_is_reported() {
        let mut p = SystemParams::default().with_fixed_n(2000);
        p.episode_cap = 3;
        let mut seen = false;
        for seed in 0..20 {
            match run_episode(&p, Mode::NoLearning, seed) {
                Err(Error::Truncated { cap, metrics }) => {
                    assert_eq!(cap, 3);
                    assert_eq!(metrics.learned_fraction_series.len(), 3);
                    seen = true;
                }
                Ok(m) => assert!(m.alarm_delay <= 3),
                Err(e) => panic!("{e}"),
            }
        }
        assert!(seen);
    }

    #[test]
    fn modes_share_deployment_and_signals() {
        let p = SystemParams::default().with_lambda(0.5);
        let a = run_episode(&p, Mode::NoLearning, 5).unwrap();
        let b = run_episode(&p, Mode::FiniteMemory, 5).unwrap();
        assert_eq!(a.n_nodes, b.n_nodes);
        assert_eq!(a.roots, b.roots);
        assert_eq!(a.throughput_baseline, b.throughput_baseline);
        assert_eq!(a.learned_fraction_final, 0.0);
    }

    #[test]
    fn holder_stops_periodic_traffic_after_onset() {
        let mut p = SystemParams::default();
        p.abnormality = Some((0.0, 0.0));
        let topo = Topology::from_positions(&[Point::new(0.0, 0.0), Point::new(30.0, 30.0)], &p);
        let setup = EpisodeSetup::with_topology(&p, 3, topo).unwrap();
        assert_eq!(setup.traffic.alarm_holder, Some(0));
        let onset = setup.traffic.alarm_onset;
        for slot in onset..onset + 40 {
            assert!(setup.traffic.periodic_active(slot).all(|n| n != 0));
        }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("learning".parse::<Mode>().is_err());
    }
}
