//! Oracle and invariant suites behind the `validate` subcommand.
//!
//! Each suite returns a [`SuiteReport`]; failing suites carry the first
//! counterexample found. The checks that test a formula take the
//! implementation as a function argument so a deliberately broken variant can
//! be fed through the same check.

use num_traits::ToPrimitive;

use super::stats::{mean, std_error};
use crate::analytics::{
    self, brute_force_throughput_exact, effective_observation_range, expected_delay_for, ThroughputDistribution,
};
use crate::error::Result;
use crate::learning::{private_belief_known, private_belief_unknown, propagate_step, seed_sequences, Memory};
use crate::mac::{run_episode, Mode};
use crate::params::SystemParams;
use crate::rng::{derive_seed, stream, Stream};
use crate::topology::sample_deployment;
use crate::Exact;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub counterexample: Option<String>,
}

impl SuiteReport {
    fn pass(name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed: true,
            detail: detail.into(),
            counterexample: None,
        }
    }

    fn fail(name: &'static str, detail: impl Into<String>, counterexample: impl Into<String>) -> Self {
        Self {
            name,
            passed: false,
            detail: detail.into(),
            counterexample: Some(counterexample.into()),
        }
    }

    /// `name<TAB>PASS|FAIL<TAB>detail[<TAB>counterexample=...]`
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        match &self.counterexample {
            Some(c) => format!("{}\t{}\t{}\tcounterexample={}", self.name, status, self.detail, c),
            None => format!("{}\t{}\t{}", self.name, status, self.detail),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    /// Topologies sampled for the effective-range check.
    pub containment_topologies: usize,
    /// Episodes at `N = 200` for the empirical delay check.
    pub delay_episodes_small: usize,
    /// Episodes at `N = 1250`.
    pub delay_episodes_large: usize,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            containment_topologies: 100,
            delay_episodes_small: 10_000,
            delay_episodes_large: 2_000,
            seed: 1,
        }
    }
}

/// Every `(n, C)` with `C^n <= 10^6`, for `C` in `1..=64`.
pub fn oracle_grid() -> Vec<(u64, u64)> {
    let mut grid = Vec::new();
    for codes in 1..=64u64 {
        let mut n = 0u64;
        while codes.checked_pow(n as u32).is_some_and(|t| t <= 1_000_000) {
            grid.push((n, codes));
            n += 1;
            if codes == 1 && n > 20 {
                break;
            }
        }
    }
    grid
}

pub fn analytic_delay_suite() -> SuiteReport {
    const NAME: &str = "analytic_delay";
    let low: f64 = expected_delay_for(1250.0, 15, 20).expect("valid");
    let high: f64 = expected_delay_for(2000.0, 15, 20).expect("valid");
    let detail = format!("N=1250 -> {low:.3}, N=2000 -> {high:.3}");
    if (low - 74.3).abs() <= 0.5 && (high - 988.2).abs() <= 2.0 {
        SuiteReport::pass(NAME, detail)
    } else {
        SuiteReport::fail(NAME, detail, "expected 74.3 +- 0.5 and 988.2 +- 2")
    }
}

/// `|throughput(n, C) - brute force| <= 1e-9` over [`oracle_grid`].
pub fn oracle_equivalence_suite(throughput: &dyn Fn(u64, u64) -> Result<f64>) -> SuiteReport {
    const NAME: &str = "oracle_equivalence";
    let grid = oracle_grid();
    let mut worst = 0.0f64;
    for &(n, codes) in &grid {
        let oracle = brute_force_throughput_exact(n, codes)
            .expect("grid is within the enumeration bound")
            .to_f64()
            .expect("finite");
        let got = match throughput(n, codes) {
            Ok(v) => v,
            Err(e) => return SuiteReport::fail(NAME, "implementation error", format!("n={n} C={codes}: {e}")),
        };
        let err = (got - oracle).abs();
        worst = worst.max(err);
        if !(err <= 1e-9) {
            return SuiteReport::fail(
                NAME,
                format!("{} instances", grid.len()),
                format!("n={n} C={codes} closed_form={got} oracle={oracle}"),
            );
        }
    }
    SuiteReport::pass(NAME, format!("{} instances, max |err| = {worst:.2e}", grid.len()))
}

/// `sum_s binom(n, s) * exact(s) = 1` for `n <= 100`, `C` in `{3, 7, 15, 31}`.
pub fn normalization_suite(build: &dyn Fn(u64, u64) -> Result<ThroughputDistribution<f64>>) -> SuiteReport {
    const NAME: &str = "normalization";
    let mut worst = 0.0f64;
    for codes in [3u64, 7, 15, 31] {
        for n in 0..=100u64 {
            let dist = match build(n, codes) {
                Ok(d) => d,
                Err(e) => return SuiteReport::fail(NAME, "implementation error", format!("n={n} C={codes}: {e}")),
            };
            let err = (dist.normalization_sum() - 1.0).abs();
            worst = worst.max(err);
            let bad_entry = dist
                .p_exact
                .iter()
                .enumerate()
                .find(|(_, p)| !(-1e-12..=1.0 + 1e-12).contains(*p));
            if !(err <= 1e-9) {
                let s = worst_superset_residual(&dist)
                    .map_or_else(|| "?".to_string(), |s| s.to_string());
                return SuiteReport::fail(
                    NAME,
                    "sum deviates",
                    format!("n={n} C={codes} s={s} sum={}", dist.normalization_sum()),
                );
            }
            if let Some((s, p)) = bad_entry {
                return SuiteReport::fail(NAME, "entry outside [0, 1]", format!("n={n} C={codes} s={s} p={p}"));
            }
        }
    }
    SuiteReport::pass(NAME, format!("404 distributions, max |sum - 1| = {worst:.2e}"))
}

/// The `s` whose at-least probability is worst reproduced by summing the
/// table over its supersets, i.e. where the recursion went wrong.
fn worst_superset_residual(dist: &ThroughputDistribution<f64>) -> Option<u64> {
    let (n, codes) = (dist.n, dist.codes);
    let mut worst: Option<(u64, f64)> = None;
    for s in 0..dist.p_exact.len() as u64 {
        let at_least: f64 = analytics::prob_success_at_least(s, n, codes).ok()?;
        let row = analytics::binomial_row::<f64>(n - s);
        let total: f64 = (0..dist.p_exact.len() as u64 - s)
            .map(|i| row[i as usize] * dist.p_exact[(s + i) as usize])
            .sum();
        let r = (total - at_least).abs();
        if worst.is_none_or(|(_, w)| r > w) {
            worst = Some((s, r));
        }
    }
    worst.map(|(s, _)| s)
}

/// Exhaustive check that the rational closed form reproduces every per-subset
/// probability of the enumeration.
pub fn subset_probability_suite() -> SuiteReport {
    const NAME: &str = "subset_probabilities";
    for (n, codes) in [(2u64, 2u64), (3, 4), (4, 3), (5, 5), (6, 7), (4, 15), (7, 6)] {
        let oracle = analytics::brute_force_subset_probs(n, codes).expect("within bound");
        let dist = ThroughputDistribution::<Exact>::new(n, codes).expect("valid");
        for (s, want) in oracle.iter().enumerate() {
            let got = dist.exact(s as u64).unwrap_or_else(|_| Exact::from_integer(0.into()));
            if &got != want {
                return SuiteReport::fail(NAME, "mismatch", format!("n={n} C={codes} s={s} got={got} want={want}"));
            }
        }
    }
    SuiteReport::pass(NAME, "7 instances, exact equality")
}

pub fn reciprocity_suite() -> SuiteReport {
    const NAME: &str = "reciprocity";
    for codes in [3u64, 7, 15, 31] {
        for period in [1u64, 5, 20, 50] {
            for nodes in [1.0, 2.0, 17.0, 200.0, 1250.0, 2000.0] {
                let p: f64 = analytics::alarm_success_prob_for(nodes, codes, period).expect("valid");
                let d: f64 = expected_delay_for(nodes, codes, period).expect("valid");
                if (p * d - 1.0).abs() > 1e-12 {
                    return SuiteReport::fail(NAME, "product deviates", format!("N={nodes} C={codes} T={period}"));
                }
            }
        }
    }
    SuiteReport::pass(NAME, "96 parameter sets")
}

fn bits_of(mask: u32, len: usize) -> Vec<bool> {
    (0..len).map(|i| mask >> i & 1 == 1).collect()
}

/// LRT decision equals the argmax of the exact product likelihood (ties to 1).
pub fn lrt_ml_suite(belief: &dyn Fn(&[bool], f64, f64) -> Result<bool>) -> SuiteReport {
    const NAME: &str = "lrt_vs_ml";
    let grid: [(f64, f64); 7] = [(0.8, 0.001), (0.8, 0.2), (0.6, 0.4), (0.95, 0.5), (0.51, 0.49), (0.3, 0.1), (0.99, 0.01)];
    let mut checked = 0usize;
    for &(p11, p10) in &grid {
        for len in 1..=12usize {
            for mask in 0..(1u32 << len) {
                let bits = bits_of(mask, len);
                let ones = bits.iter().filter(|&&b| b).count() as i32;
                let zeros = len as i32 - ones;
                let present = p11.powi(ones) * (1.0 - p11).powi(zeros);
                let absent = p10.powi(ones) * (1.0 - p10).powi(zeros);
                if (present - absent).abs() <= 1e-12 * present.max(absent) {
                    continue; // numerical tie, either answer is an argmax
                }
                let want = present > absent;
                match belief(&bits, p11, p10) {
                    Ok(got) if got == want => checked += 1,
                    Ok(got) => {
                        return SuiteReport::fail(
                            NAME,
                            "decision differs from product likelihood",
                            format!("p11={p11} p10={p10} signals={bits:?} got={got}"),
                        )
                    }
                    Err(e) => return SuiteReport::fail(NAME, "implementation error", e.to_string()),
                }
            }
        }
    }
    SuiteReport::pass(NAME, format!("{checked} windows"))
}

pub fn or_rule_suite() -> SuiteReport {
    const NAME: &str = "or_rule";
    let mut checked = 0usize;
    for len in 1..=16usize {
        for mask in 0..(1u32 << len) {
            let bits = bits_of(mask, len);
            if private_belief_unknown(&bits).expect("nonempty") != (mask != 0) {
                return SuiteReport::fail(NAME, "mismatch", format!("{bits:?}"));
            }
            checked += 1;
        }
    }
    SuiteReport::pass(NAME, format!("{checked} windows"))
}

pub fn belief_gain_suite() -> SuiteReport {
    const NAME: &str = "belief_gain_and_range";
    for k in 2..=20usize {
        for i in 1..100 {
            let p11 = i as f64 / 100.0;
            let inside: f64 = analytics::belief_correct_prob_inside(p11, k).expect("valid");
            if inside < p11 - 1e-12 {
                return SuiteReport::fail(NAME, "belief less informative than signal", format!("p11={p11} K={k}"));
            }
        }
        let r: f64 = effective_observation_range(10.0, 2.0, k).expect("valid");
        let prev: f64 = if k > 2 {
            effective_observation_range(10.0, 2.0, k - 1).expect("valid")
        } else {
            f64::NEG_INFINITY
        };
        if !(r > prev) || (k == 2 && r != 10.0) {
            return SuiteReport::fail(NAME, "range not strictly increasing from r_d", format!("K={k}"));
        }
    }
    SuiteReport::pass(NAME, "K in 2..=20, p11 on a 0.01 grid")
}

/// Outcome of the effective-range property over sampled topologies.
#[derive(Debug, Clone, Default)]
pub struct ContainmentStats {
    pub topologies: usize,
    pub runs: usize,
    pub believers: usize,
    pub violations: Vec<String>,
}

/// With `p10 = 0`, every node that ever holds belief 1 must lie within
/// `r_d + (K - 2) * r_c` of the abnormality.
pub fn containment_check(base: &SystemParams, topologies: usize, seed: u64) -> Result<ContainmentStats> {
    let mut params = base.clone();
    params.p10 = 0.0;
    let mut stats = ContainmentStats {
        topologies,
        ..ContainmentStats::default()
    };
    for t in 0..topologies {
        let topo_seed = derive_seed(seed, &[t as u64]);
        let topology = sample_deployment(&params, &mut stream(topo_seed, Stream::Topology))?;
        for k in 2..=10usize {
            let p = params.clone().with_memory(k);
            let limit = effective_observation_range(p.obs_range, p.comm_range, k)?;
            let run_seed = derive_seed(topo_seed, &[k as u64]);
            let mut sig = stream(run_seed, Stream::Signals);
            let mut learn = stream(run_seed, Stream::Learning);
            let (mut st, _) = seed_sequences(&topology, &p, Memory::Finite(k), true, &mut sig)?;
            while !st.is_terminated() {
                propagate_step(&topology, &mut st, &p, &mut learn)?;
            }
            stats.runs += 1;
            for (node, &believed) in st.ever_believed.iter().enumerate() {
                if !believed {
                    continue;
                }
                stats.believers += 1;
                let d = topology.distance_to_abnormality(node);
                if d > limit + 1e-9 {
                    stats.violations.push(format!(
                        "topology={t} K={k} node={node} distance={d:.3} limit={limit}"
                    ));
                }
            }
        }
    }
    Ok(stats)
}

pub fn containment_suite(base: &SystemParams, topologies: usize, seed: u64) -> SuiteReport {
    const NAME: &str = "effective_range_containment";
    match containment_check(base, topologies, seed) {
        Ok(s) if s.violations.is_empty() => SuiteReport::pass(
            NAME,
            format!("{} topologies x K=2..10, {} believers", s.topologies, s.believers),
        ),
        Ok(s) => SuiteReport::fail(
            NAME,
            format!("{} violations", s.violations.len()),
            s.violations[0].clone(),
        ),
        Err(e) => SuiteReport::fail(NAME, "simulation error", e.to_string()),
    }
}

/// Empirical no-learning delay statistics over fixed-N episodes.
#[derive(Debug, Clone, Copy)]
pub struct DelayCheck {
    pub nodes: usize,
    pub episodes: usize,
    pub mean: f64,
    pub std_error: f64,
    pub analytic: f64,
}

impl DelayCheck {
    pub fn z(&self) -> f64 {
        (self.mean - self.analytic) / self.std_error
    }
}

pub fn delay_check(base: &SystemParams, nodes: usize, episodes: usize, seed: u64) -> Result<DelayCheck> {
    let params = base.clone().with_fixed_n(nodes);
    let delays: Vec<f64> = (0..episodes)
        .map(|i| run_episode(&params, Mode::NoLearning, derive_seed(seed, &[nodes as u64, i as u64])))
        .map(|r| r.map(|m| m.alarm_delay as f64))
        .collect::<Result<_>>()?;
    Ok(DelayCheck {
        nodes,
        episodes,
        mean: mean(&delays),
        std_error: std_error(&delays),
        analytic: expected_delay_for(nodes as f64, params.codes(), params.period)?,
    })
}

pub fn empirical_delay_suite(base: &SystemParams, options: &ValidateOptions) -> SuiteReport {
    const NAME: &str = "empirical_delay";
    let mut parts = Vec::new();
    for (nodes, episodes) in [(200, options.delay_episodes_small), (1250, options.delay_episodes_large)] {
        match delay_check(base, nodes, episodes, options.seed) {
            Ok(c) => {
                let text = format!(
                    "N={} mean={:.3} se={:.3} analytic={:.3} z={:.2}",
                    c.nodes,
                    c.mean,
                    c.std_error,
                    c.analytic,
                    c.z()
                );
                if c.z().abs() > 3.0 {
                    return SuiteReport::fail(NAME, "outside 3 standard errors", text);
                }
                parts.push(text);
            }
            Err(e) => return SuiteReport::fail(NAME, "simulation error", e.to_string()),
        }
    }
    SuiteReport::pass(NAME, parts.join("; "))
}

/// Runs every suite with the production implementations.
pub fn validate(options: &ValidateOptions) -> Vec<SuiteReport> {
    let base = SystemParams::default();
    vec![
        analytic_delay_suite(),
        oracle_equivalence_suite(&|n, c| analytics::expected_throughput::<f64>(n, c)),
        normalization_suite(&|n, c| ThroughputDistribution::<f64>::new(n, c)),
        subset_probability_suite(),
        reciprocity_suite(),
        lrt_ml_suite(&private_belief_known),
        or_rule_suite(),
        belief_gain_suite(),
        containment_suite(&base, options.containment_topologies, options.seed),
        empirical_delay_suite(&base, options),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_the_named_instances() {
        let g = oracle_grid();
        assert!(g.contains(&(6, 7)));
        assert!(g.contains(&(7, 7)));
        assert!(g.contains(&(5, 15)));
        assert!(!g.contains(&(6, 15)));
        assert!(g.contains(&(0, 31)));
    }

    #[test]
    fn cheap_suites_pass() {
        for r in [
            analytic_delay_suite(),
            reciprocity_suite(),
            subset_probability_suite(),
            belief_gain_suite(),
            normalization_suite(&|n, c| ThroughputDistribution::<f64>::new(n, c)),
        ] {
            assert!(r.passed, "{}", r.line());
        }
    }

    #[test]
    fn report_lines() {
        let ok = SuiteReport::pass("x", "fine");
        assert_eq!(ok.line(), "x\tPASS\tfine");
        let bad = SuiteReport::fail("y", "broken", "n=1");
        assert_eq!(bad.line(), "y\tFAIL\tbroken\tcounterexample=n=1");
    }
}
