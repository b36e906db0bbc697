//! Seeded Monte Carlo sweeps over memory size and density.
//!
//! Every `(lambda, replication)` pair owns one episode seed, shared by all
//! learners and memory sizes at that pair. The deployment, traffic phases and
//! private signals are therefore identical across the cells being compared,
//! and percent reductions are taken against the matching no-learning runs.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentSpec;
use super::stats::{ci95, mean};
use crate::error::{Error, Result};
use crate::mac::{run_episode, EpisodeMetrics, Mode};
use crate::rng::derive_seed;

pub const RAW_HEADER: &str = "lambda,K,mode,replication,seed,N_actual,alarm_delay_slots,throughput_post,throughput_base,learned_fraction,truncated,zero_observer";
pub const AGGREGATE_HEADER: &str = "lambda,K,mode,reps,delay_mean,delay_ci95,delay_reduction_pct,throughput_reduction_pct,learned_pct,learned_ci95";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub mode: &'static str,
    pub replication: usize,
    pub seed: u64,
    #[serde(rename = "N_actual")]
    pub n_actual: usize,
    pub alarm_delay_slots: u64,
    pub throughput_post: f64,
    pub throughput_base: f64,
    pub learned_fraction: f64,
    pub truncated: bool,
    pub zero_observer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub mode: &'static str,
    pub reps: usize,
    pub delay_mean: f64,
    pub delay_ci95: f64,
    pub delay_reduction_pct: f64,
    pub throughput_reduction_pct: f64,
    pub learned_pct: f64,
    pub learned_ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<AggregateRow>,
}

/// `100 * (baseline - value) / baseline`.
pub fn percent_reduction(value: f64, baseline: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "baseline must be positive, got {baseline}"
        )));
    }
    Ok(100.0 * (baseline - value) / baseline)
}

/// Seed of the episode at `(lambda_index, replication)`.
pub fn episode_seed(master: u64, lambda_index: usize, replication: usize) -> u64 {
    derive_seed(master, &[lambda_index as u64, replication as u64])
}

#[derive(Debug, Clone, Copy)]
struct Job {
    lambda_index: usize,
    k_index: usize,
    mode: Mode,
    replication: usize,
}

struct Outcome {
    metrics: EpisodeMetrics,
    truncated: bool,
}

fn run_job(spec: &ExperimentSpec, job: Job) -> Result<Outcome> {
    let params = spec
        .base
        .clone()
        .with_lambda(spec.lambda_grid[job.lambda_index])
        .with_memory(spec.k_grid[job.k_index]);
    let seed = episode_seed(spec.master_seed, job.lambda_index, job.replication);
    match run_episode(&params, job.mode, seed) {
        Ok(metrics) => Ok(Outcome {
            metrics,
            truncated: false,
        }),
        Err(Error::Truncated { metrics, .. }) => Ok(Outcome {
            metrics: *metrics,
            truncated: true,
        }),
        Err(e) => Err(e),
    }
}

fn row(spec: &ExperimentSpec, job: Job, k: usize, out: &Outcome) -> ResultRow {
    let m = &out.metrics;
    ResultRow {
        lambda: spec.lambda_grid[job.lambda_index],
        k,
        mode: job.mode.as_str(),
        replication: job.replication,
        seed: episode_seed(spec.master_seed, job.lambda_index, job.replication),
        n_actual: m.n_nodes,
        alarm_delay_slots: m.alarm_delay,
        throughput_post: m.throughput_post,
        throughput_base: m.throughput_baseline,
        learned_fraction: m.learned_fraction_final,
        truncated: out.truncated,
        zero_observer: m.zero_observer,
    }
}

/// Runs every episode of the sweep and aggregates per grid cell.
///
/// The no-learning episode does not depend on `K`, so it runs once per
/// `(lambda, replication)` and its row is repeated for every `K`.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let learners: Vec<Mode> = Mode::ALL
        .into_iter()
        .filter(|m| *m != Mode::NoLearning && spec.modes.contains(m))
        .collect();
    let mut jobs = Vec::new();
    for li in 0..spec.lambda_grid.len() {
        for rep in 0..spec.replications {
            jobs.push(Job {
                lambda_index: li,
                k_index: 0,
                mode: Mode::NoLearning,
                replication: rep,
            });
            for ki in 0..spec.k_grid.len() {
                for &mode in &learners {
                    jobs.push(Job {
                        lambda_index: li,
                        k_index: ki,
                        mode,
                        replication: rep,
                    });
                }
            }
        }
    }

    let execute = || -> Vec<Result<Outcome>> { jobs.par_iter().map(|&j| run_job(spec, j)).collect() };
    let outcomes = match spec.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(execute),
        None => execute(),
    };
    let outcomes: Vec<Outcome> = outcomes.into_iter().collect::<Result<_>>()?;

    // (lambda, K, mode, replication) order, independent of execution order
    let mut keyed: Vec<(Job, &Outcome)> = jobs.iter().copied().zip(outcomes.iter()).collect();
    keyed.sort_by_key(|(j, _)| (j.lambda_index, j.k_index, j.mode, j.replication));

    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for li in 0..spec.lambda_grid.len() {
        let baseline: Vec<(Job, &Outcome)> = keyed
            .iter()
            .filter(|(j, _)| j.lambda_index == li && j.mode == Mode::NoLearning)
            .copied()
            .collect();
        for (ki, &k) in spec.k_grid.iter().enumerate() {
            for mode in Mode::ALL.into_iter().filter(|m| spec.modes.contains(m)) {
                let cell: Vec<(Job, &Outcome)> = if mode == Mode::NoLearning {
                    baseline.clone()
                } else {
                    keyed
                        .iter()
                        .filter(|(j, _)| j.lambda_index == li && j.k_index == ki && j.mode == mode)
                        .copied()
                        .collect()
                };
                rows.extend(cell.iter().map(|(j, o)| row(spec, *j, k, o)));
                aggregates.push(aggregate(spec.lambda_grid[li], k, mode, &cell, &baseline)?);
            }
        }
    }
    Ok(SweepResult { rows, aggregates })
}

fn aggregate(
    lambda: f64,
    k: usize,
    mode: Mode,
    cell: &[(Job, &Outcome)],
    baseline: &[(Job, &Outcome)],
) -> Result<AggregateRow> {
    let done: Vec<&EpisodeMetrics> = cell
        .iter()
        .filter(|(_, o)| !o.truncated)
        .map(|(_, o)| &o.metrics)
        .collect();
    let delays: Vec<f64> = done.iter().map(|m| m.alarm_delay as f64).collect();
    let learned: Vec<f64> = cell.iter().map(|(_, o)| o.metrics.learned_fraction_final).collect();

    // paired means over replications that finished in both runs
    let (mut d, mut d0, mut t, mut t0) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for ((_, o), (_, b)) in cell.iter().zip(baseline) {
        if !o.truncated && !b.truncated {
            d.push(o.metrics.alarm_delay as f64);
            d0.push(b.metrics.alarm_delay as f64);
            t.push(o.metrics.throughput_post);
            t0.push(b.metrics.throughput_post);
        }
    }
    let reduction = |v: &[f64], b: &[f64]| -> Result<f64> {
        if v.is_empty() {
            Ok(f64::NAN)
        } else {
            percent_reduction(mean(v), mean(b))
        }
    };
    Ok(AggregateRow {
        lambda,
        k,
        mode: mode.as_str(),
        reps: cell.len(),
        delay_mean: mean(&delays),
        delay_ci95: ci95(&delays),
        delay_reduction_pct: reduction(&d, &d0)?,
        throughput_reduction_pct: reduction(&t, &t0)?,
        learned_pct: 100.0 * mean(&learned),
        learned_ci95: 100.0 * ci95(&learned),
    })
}

fn write_csv<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl SweepResult {
    /// Writes `raw.csv` and `aggregate.csv` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_csv(&dir.join("raw.csv"), &self.rows)?;
        write_csv(&dir.join("aggregate.csv"), &self.aggregates)?;
        Ok(())
    }

    pub fn raw_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }

    pub fn cell(&self, lambda: f64, k: usize, mode: Mode) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.lambda == lambda && a.k == k && a.mode == mode.as_str())
    }
}
