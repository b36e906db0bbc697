//! Exhaustive enumeration of code assignments.
//!
//! Walks all `C^n` equiprobable assignments and counts unique-code holders
//! with integer arithmetic, so the results are exact rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::Exact;

/// Largest number of assignments the oracle will walk.
pub const ENUMERATION_BOUND: u64 = 1_000_000;

fn assignment_count(n: u64, codes: u64) -> Result<u64> {
    if codes < 1 {
        return Err(Error::InvalidParameter("code count must be at least 1".into()));
    }
    let too_big = Error::EnumerationBound {
        active: n,
        codes,
        bound: ENUMERATION_BOUND,
    };
    let total = u32::try_from(n)
        .ok()
        .and_then(|e| codes.checked_pow(e))
        .ok_or(too_big)?;
    if total > ENUMERATION_BOUND {
        return Err(Error::EnumerationBound {
            active: n,
            codes,
            bound: ENUMERATION_BOUND,
        });
    }
    Ok(total)
}

/// Calls `visit` with the per-transmitter success flags of every assignment.
fn enumerate(n: u64, codes: u64, mut visit: impl FnMut(&[bool])) -> Result<u64> {
    let total = assignment_count(n, codes)?;
    let n = n as usize;
    let codes = codes as usize;
    let mut choice = vec![0usize; n];
    let mut load = vec![0u32; codes];
    load[0] = n as u32;
    let mut unique = vec![false; n];
    for _ in 0..total {
        for (u, &c) in unique.iter_mut().zip(&choice) {
            *u = load[c] == 1;
        }
        visit(&unique);
        // odometer increment
        for digit in choice.iter_mut() {
            load[*digit] -= 1;
            *digit += 1;
            if *digit == codes {
                *digit = 0;
                load[0] += 1;
            } else {
                load[*digit] += 1;
                break;
            }
        }
    }
    Ok(total)
}

/// Exact mean number of unique-code transmitters.
pub fn brute_force_throughput_exact(n: u64, codes: u64) -> Result<Exact> {
    let mut successes: u64 = 0;
    let total = enumerate(n, codes, |unique| {
        successes += unique.iter().filter(|&&u| u).count() as u64;
    })?;
    Ok(BigRational::new(BigInt::from(successes), BigInt::from(total)))
}

pub fn brute_force_throughput(n: u64, codes: u64) -> Result<f64> {
    Ok(brute_force_throughput_exact(n, codes)?
        .to_f64()
        .expect("finite ratio"))
}

/// For each `s`, the probability that the success set is exactly the first
/// `s` transmitters. By symmetry this is the per-subset probability for any
/// set of size `s`.
pub fn brute_force_subset_probs(n: u64, codes: u64) -> Result<Vec<Exact>> {
    let mut hits = vec![0u64; n as usize + 1];
    let total = enumerate(n, codes, |unique| {
        let leading = unique.iter().take_while(|&&u| u).count();
        if unique[leading..].iter().all(|&u| !u) {
            hits[leading] += 1;
        }
    })?;
    Ok(hits
        .into_iter()
        .map(|h| BigRational::new(BigInt::from(h), BigInt::from(total)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    #[test]
    fn small_instances() {
        assert_eq!(brute_force_throughput(2, 2).unwrap(), 1.0);
        assert_eq!(brute_force_throughput(1, 7).unwrap(), 1.0);
        // 24 all-distinct (3 successes) + 36 pair+single (1) + 4 triple (0)
        assert_eq!(brute_force_throughput(3, 4).unwrap(), 108.0 / 64.0);
        assert_eq!(brute_force_throughput(0, 4).unwrap(), 0.0);
    }

    #[test]
    fn subset_probs_two_by_two() {
        let p = brute_force_subset_probs(2, 2).unwrap();
        assert_eq!(p[0].to_f64().unwrap(), 0.5);
        assert!(p[1].is_zero());
        assert_eq!(p[2].to_f64().unwrap(), 0.5);
    }

    #[test]
    fn bound_is_enforced() {
        assert!(brute_force_throughput(6, 15).is_err());
        assert!(brute_force_throughput(5, 15).is_ok());
        assert!(matches!(
            brute_force_throughput(100, 31),
            Err(Error::EnumerationBound { .. })
        ));
    }
}
