//! Closed-form collision, delay and belief formulas.
//!
//! `n` transmitters each pick one of `C` codes uniformly at random and a
//! transmission succeeds iff no other transmitter picked the same code.
//! The success-count distribution is built from per-subset probabilities:
//! `exact(s)` is the probability that one *specific* set of `s` transmitters is
//! exactly the set of successes, so `binom(n, s) * exact(s)` is `Pr(S = s)`.
//!
//! The combinatorial functions are generic over [`Probability`] and therefore
//! run in `f32`, `f64` or exact rationals. Formulas with real exponents need a
//! [`Scalar`].

pub mod oracle;

use crate::error::{invalid, Result};
use crate::params::SystemParams;
use crate::scalar::{from_f64, from_u64, Probability, Scalar};

pub use oracle::{brute_force_subset_probs, brute_force_throughput, brute_force_throughput_exact};

/// Largest possible number of successes: `n` when every transmitter can hold
/// its own code, otherwise `C - 1` (at least one code must be shared).
pub fn s_max(n: u64, codes: u64) -> Result<u64> {
    if codes < 1 {
        return Err(invalid("code count must be at least 1"));
    }
    Ok(if n <= codes { n } else { codes - 1 })
}

/// Probability that a specific set of `s` transmitters all succeed: they hold
/// `s` distinct codes and the other `n - s` avoid those codes.
pub fn prob_success_at_least<T: Probability>(s: u64, n: u64, codes: u64) -> Result<T> {
    if codes < 1 {
        return Err(invalid("code count must be at least 1"));
    }
    if s == 0 {
        return Ok(T::one());
    }
    let c = from_u64::<T>(codes);
    let distinct = |s: u64| {
        (0..s).fold(T::one(), |acc, j| {
            acc * (from_u64::<T>(codes - j) / c.clone())
        })
    };
    if s < codes && s <= n {
        let avoid = from_u64::<T>(codes - s) / c.clone();
        Ok(distinct(s) * num_traits::pow(avoid, (n - s) as usize))
    } else if s == codes && s == n {
        Ok(distinct(s))
    } else {
        Ok(T::zero())
    }
}

/// `binom(m, 0..=m)` computed multiplicatively in the target scalar.
pub fn binomial_row<T: Probability>(m: u64) -> Vec<T> {
    let mut row = Vec::with_capacity(m as usize + 1);
    let mut c = T::one();
    row.push(c.clone());
    for i in 0..m {
        c = c * from_u64::<T>(m - i) / from_u64::<T>(i + 1);
        row.push(c.clone());
    }
    row
}

/// Per-subset exact-success probabilities for one `(n, C)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputDistribution<T> {
    pub n: u64,
    pub codes: u64,
    pub s_max: u64,
    /// `p_exact[s]` for `s` in `0..=s_max`.
    pub p_exact: Vec<T>,
}

impl<T: Probability> ThroughputDistribution<T> {
    /// Fills the table top-down from `s_max`, subtracting the mass of every
    /// strict superset from the at-least probability.
    pub fn new(n: u64, codes: u64) -> Result<Self> {
        let s_max = s_max(n, codes)?;
        let mut p_exact = vec![T::zero(); s_max as usize + 1];
        for s in (0..=s_max).rev() {
            let supersets = binomial_row::<T>(n - s);
            let mut p = prob_success_at_least::<T>(s, n, codes)?;
            for i in 1..=(s_max - s) {
                p = p - supersets[i as usize].clone() * p_exact[(s + i) as usize].clone();
            }
            p_exact[s as usize] = p;
        }
        Ok(Self {
            n,
            codes,
            s_max,
            p_exact,
        })
    }

    pub fn exact(&self, s: u64) -> Result<T> {
        self.p_exact.get(s as usize).cloned().ok_or_else(|| {
            invalid(format!(
                "s = {s} exceeds s_max = {} for n = {}, C = {}",
                self.s_max, self.n, self.codes
            ))
        })
    }

    /// `Pr(S = s)` for every `s`, i.e. `binom(n, s) * exact(s)`.
    pub fn count_pmf(&self) -> Vec<T> {
        let row = binomial_row::<T>(self.n);
        self.p_exact
            .iter()
            .enumerate()
            .map(|(s, p)| row[s].clone() * p.clone())
            .collect()
    }

    /// Should be one.
    pub fn normalization_sum(&self) -> T {
        self.count_pmf()
            .into_iter()
            .fold(T::zero(), |acc, p| acc + p)
    }

    pub fn expected_successes(&self) -> T {
        self.count_pmf()
            .into_iter()
            .enumerate()
            .skip(1)
            .fold(T::zero(), |acc, (s, p)| acc + from_u64::<T>(s as u64) * p)
    }
}

pub fn prob_success_exact<T: Probability>(s: u64, n: u64, codes: u64) -> Result<T> {
    ThroughputDistribution::<T>::new(n, codes)?.exact(s)
}

/// Expected number of successful transmitters per slot.
pub fn expected_throughput<T: Probability>(n: u64, codes: u64) -> Result<T> {
    if n == 0 {
        s_max(n, codes)?;
        return Ok(T::zero());
    }
    Ok(ThroughputDistribution::<T>::new(n, codes)?.expected_successes())
}

/// Per-slot success probability of the alarm against `(N - 1) / T` periodic
/// competitors, each colliding with probability `1 / C`. The exponent is kept
/// real-valued.
pub fn alarm_success_prob_for<F: Scalar>(nodes: F, codes: u64, period: u64) -> Result<F> {
    if nodes < F::one() {
        return Err(invalid("at least one node is required"));
    }
    if codes < 2 {
        return Err(invalid("at least two codes are required"));
    }
    if period < 1 {
        return Err(invalid("period must be at least 1"));
    }
    let c = from_u64::<F>(codes);
    let base = (c - F::one()) / c;
    Ok(base.powf((nodes - F::one()) / from_u64::<F>(period)))
}

/// Expected alarm delay in slots without learning; the mean of a geometric
/// variable with the success probability of [`alarm_success_prob_for`].
pub fn expected_delay_for<F: Scalar>(nodes: F, codes: u64, period: u64) -> Result<F> {
    alarm_success_prob_for(nodes, codes, period)?;
    let c = from_u64::<F>(codes);
    let base = c / (c - F::one());
    Ok(base.powf((nodes - F::one()) / from_u64::<F>(period)))
}

pub fn alarm_success_prob<F: Scalar>(params: &SystemParams) -> Result<F> {
    alarm_success_prob_for(from_f64(params.expected_nodes()), params.codes(), params.period)
}

/// Expected alarm delay in slots; multiply by `tau` for seconds.
pub fn expected_delay_no_learning<F: Scalar>(params: &SystemParams) -> Result<F> {
    expected_delay_for(from_f64(params.expected_nodes()), params.codes(), params.period)
}

/// Radius within which a K-bit memory can still carry an informative signal:
/// `r_d + (K - 2) * r_c`.
pub fn effective_observation_range<F: Scalar>(obs_range: F, comm_range: F, memory_bits: usize) -> Result<F> {
    if memory_bits < 2 {
        return Err(invalid(format!("memory K = {memory_bits} is below 2")));
    }
    if obs_range <= F::zero() || comm_range <= F::zero() {
        return Err(invalid("ranges must be positive"));
    }
    Ok(obs_range + from_u64::<F>(memory_bits as u64 - 2) * comm_range)
}

fn check_prob<F: Scalar>(name: &str, p: F) -> Result<()> {
    if p < F::zero() || p > F::one() {
        return Err(invalid(format!("{name} outside [0, 1]")));
    }
    Ok(())
}

/// Probability that an in-range node's OR-rule belief is 1 when the
/// abnormality is present: `1 - (1 - p11)^(K - 1)`.
pub fn belief_correct_prob_inside<F: Scalar>(p11: F, memory_bits: usize) -> Result<F> {
    if memory_bits < 2 {
        return Err(invalid(format!("memory K = {memory_bits} is below 2")));
    }
    check_prob("p11", p11)?;
    Ok(F::one() - num_traits::pow(F::one() - p11, memory_bits - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutsideForm {
    /// Keeps the false-alarm term `(1 - p10)^eta`.
    Full,
    /// Treats `p10` as zero.
    Simplified,
}

/// Belief-is-1 probability for a node whose window holds `kappa` signals from
/// inside the observation disk and `eta` from outside.
pub fn belief_correct_prob_outside<F: Scalar>(
    p11: F,
    p10: F,
    kappa: i64,
    eta: i64,
    form: OutsideForm,
) -> Result<F> {
    if kappa < 0 || eta < 0 {
        return Err(invalid("signal counts must be non-negative"));
    }
    check_prob("p11", p11)?;
    check_prob("p10", p10)?;
    let miss_inside = num_traits::pow(F::one() - p11, kappa as usize);
    Ok(match form {
        OutsideForm::Full => F::one() - miss_inside * num_traits::pow(F::one() - p10, eta as usize),
        OutsideForm::Simplified => F::one() - miss_inside,
    })
}
