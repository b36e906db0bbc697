//! Scalar model parameters.

use crate::error::{invalid, Result};
use crate::learning::BeliefRule;

/// How first-transmission slots are spread over the period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseAssignment {
    /// Shuffle the nodes and deal phases round-robin from a random offset.
    /// Each node's phase is still uniform on `{1..T}`, and every slot carries
    /// `floor(N/T)` or `ceil(N/T)` periodic transmitters.
    Balanced,
    /// Every node draws its phase independently; per-slot counts are binomial.
    Independent,
}

/// All scalar parameters of one deployment.
///
/// `p01`, `p00` and the code count are derived on demand so they can never
/// disagree with `p11`, `p10` and `code_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Field side length in meters.
    pub field_side: f64,
    /// PPP density in nodes per square meter.
    pub lambda: f64,
    /// Exact node count; overrides the Poisson draw when set.
    pub fixed_n: Option<usize>,
    /// Spreading code length in bits.
    pub code_len: u32,
    /// Slot duration in seconds.
    pub tau: f64,
    /// Periodic-message period in slots.
    pub period: u64,
    /// Communication range in meters.
    pub comm_range: f64,
    /// Observation range in meters.
    pub obs_range: f64,
    pub p11: f64,
    pub p10: f64,
    /// Memory size in bits, at least 2.
    pub memory_bits: usize,
    /// Abnormality position; `None` puts it at the field center.
    pub abnormality: Option<(f64, f64)>,
    /// Slot index (1-based) at which the abnormality appears; `None` means `T + 1`.
    pub onset_slot: Option<u64>,
    /// Maximum number of post-onset slots before an episode is truncated.
    pub episode_cap: u64,
    pub belief_rule: BeliefRule,
    pub phase_assignment: PhaseAssignment,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            field_side: 50.0,
            lambda: 0.8,
            fixed_n: None,
            code_len: 4,
            tau: 1.0,
            period: 20,
            comm_range: 2.0,
            obs_range: 10.0,
            p11: 0.8,
            p10: 0.001,
            memory_bits: 7,
            abnormality: None,
            onset_slot: None,
            episode_cap: 1_000_000,
            belief_rule: BeliefRule::Unknown,
            phase_assignment: PhaseAssignment::Balanced,
        }
    }
}

impl SystemParams {
    /// Number of spreading codes, `2^l - 1`.
    pub fn codes(&self) -> u64 {
        (1u64 << self.code_len) - 1
    }

    pub fn p01(&self) -> f64 {
        1.0 - self.p11
    }

    pub fn p00(&self) -> f64 {
        1.0 - self.p10
    }

    /// `R^2 * lambda`, or the fixed count when one is configured.
    pub fn expected_nodes(&self) -> f64 {
        match self.fixed_n {
            Some(n) => n as f64,
            None => self.field_side * self.field_side * self.lambda,
        }
    }

    pub fn abnormality_pos(&self) -> (f64, f64) {
        self.abnormality
            .unwrap_or((self.field_side / 2.0, self.field_side / 2.0))
    }

    pub fn onset(&self) -> u64 {
        self.onset_slot.unwrap_or(self.period + 1)
    }

    pub fn with_memory(mut self, k: usize) -> Self {
        self.memory_bits = k;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_fixed_n(mut self, n: usize) -> Self {
        self.fixed_n = Some(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=20).contains(&self.code_len) {
            return Err(invalid(format!("code length {} outside 1..=20", self.code_len)));
        }
        if self.period < 1 {
            return Err(invalid("period T must be at least 1"));
        }
        if self.memory_bits < 2 {
            return Err(invalid(format!("memory K = {} is below 2", self.memory_bits)));
        }
        for (name, v) in [
            ("R", self.field_side),
            ("tau", self.tau),
            ("r_c", self.comm_range),
            ("r_d", self.obs_range),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.fixed_n.is_none() && !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.p11) || !(0.0..=1.0).contains(&self.p10) {
            return Err(invalid("signal probabilities must lie in [0, 1]"));
        }
        if self.p10 >= self.p11 {
            return Err(invalid(format!(
                "p11 must exceed p10 (p11 = {}, p10 = {})",
                self.p11, self.p10
            )));
        }
        if self.episode_cap == 0 {
            return Err(invalid("episode cap must be positive"));
        }
        if self.onset() == 0 {
            return Err(invalid("onset slot is 1-based"));
        }
        Ok(())
    }
}
