use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mtclearn::analytics::{self, oracle, OutsideForm, ThroughputDistribution};
use mtclearn::harness::{self, config::load_config, ExperimentSpec, ValidateOptions};
use mtclearn::mac::{run_episode_traced, EpisodeSetup};
use mtclearn::{Mode, Topology};

#[derive(Parser, Debug)]
#[command(name = "mtclearn", version, about = "Alarm delay and finite-memory learning in a slotted CDMA uplink")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct GlobalArgs {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replications per grid point.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Memory sizes, comma separated.
    #[arg(long, global = true)]
    k: Option<String>,
    /// Deployment densities, comma separated.
    #[arg(long, global = true)]
    lambda: Option<String>,
    /// Modes, comma separated: no_learning, finite_memory, infinite_memory.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Deploy exactly this many nodes instead of a Poisson count.
    #[arg(long, global = true)]
    fixed_n: Option<usize>,
    /// Write per-slot trace tables.
    #[arg(long, global = true)]
    trace: bool,
    /// Worker threads for sweeps (never changes results).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a closed-form quantity.
    Analytic(AnalyticArgs),
    /// Run one episode.
    Simulate(SimulateArgs),
    /// Run the full parameter sweep and write raw.csv and aggregate.csv.
    Sweep,
    /// Run the validation suites; exits nonzero if any fails.
    Validate(ValidateArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Op {
    /// Expected alarm delay without learning.
    Delay,
    /// Per-slot alarm success probability without learning.
    AlarmProb,
    /// Expected successes per slot among n transmitters.
    Throughput,
    /// Exhaustive-enumeration expected successes.
    BruteForce,
    /// Distribution of the success count.
    Pmf,
    /// Effective observation range.
    Range,
    /// Probability an in-range node believes correctly.
    BeliefInside,
    /// Probability an out-of-range node believes correctly.
    BeliefOutside,
}

#[derive(Args, Debug)]
struct AnalyticArgs {
    op: Op,
    /// Transmitter count (throughput, pmf) or deployed nodes (delay); defaults to the expected node count.
    #[arg(long)]
    n: Option<u64>,
    /// Inside signals in the window.
    #[arg(long, default_value_t = 0)]
    kappa: i64,
    /// Outside signals in the window.
    #[arg(long, default_value_t = 0)]
    eta: i64,
    /// Use the simplified out-of-range form.
    #[arg(long)]
    simplified: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Load the deployment from a topology table instead of sampling it.
    #[arg(long)]
    topology: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Topologies for the effective-range check.
    #[arg(long)]
    topologies: Option<usize>,
    /// Episodes at N = 200 for the empirical delay check.
    #[arg(long)]
    small_episodes: Option<usize>,
    /// Episodes at N = 1250.
    #[arg(long)]
    large_episodes: Option<usize>,
}

fn list<T: std::str::FromStr>(flag: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let v = harness::config::parse_list(value).map_err(|e| anyhow::anyhow!("--{flag}: {e}"))?;
    if v.is_empty() {
        bail!("--{flag} is empty");
    }
    Ok(v)
}

/// Config file first, then flags on top.
fn build_spec(g: &GlobalArgs) -> Result<ExperimentSpec> {
    let mut spec = match &g.config {
        Some(path) => load_config(path)?,
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = g.seed {
        spec.master_seed = seed;
    }
    if let Some(reps) = g.reps {
        spec.replications = reps;
    }
    if let Some(out) = &g.out {
        spec.output_dir = out.clone();
    }
    if let Some(k) = &g.k {
        spec.k_grid = list("k", k)?;
    }
    if let Some(l) = &g.lambda {
        spec.lambda_grid = list("lambda", l)?;
    }
    if let Some(m) = &g.mode {
        spec.modes = list("mode", m)?;
    }
    if g.fixed_n.is_some() {
        spec.base.fixed_n = g.fixed_n;
    }
    if g.workers.is_some() {
        spec.workers = g.workers;
    }
    spec.validate()?;
    Ok(spec)
}

fn analytic(spec: &ExperimentSpec, a: &AnalyticArgs) -> Result<()> {
    let p = spec.base.clone().with_lambda(spec.lambda_grid[0]).with_memory(spec.k_grid[0]);
    let codes = p.codes();
    let nodes = a.n.map(|n| n as f64).unwrap_or_else(|| p.expected_nodes());
    match a.op {
        Op::Delay => println!("{}", analytics::expected_delay_for(nodes, codes, p.period)?),
        Op::AlarmProb => println!("{}", analytics::alarm_success_prob_for(nodes, codes, p.period)?),
        Op::Throughput => {
            let n = a.n.context("--n is required")?;
            println!("{}", analytics::expected_throughput::<f64>(n, codes)?);
        }
        Op::BruteForce => {
            let n = a.n.context("--n is required")?;
            let exact = oracle::brute_force_throughput_exact(n, codes)?;
            println!("{}\t{}", exact, oracle::brute_force_throughput(n, codes)?);
        }
        Op::Pmf => {
            let n = a.n.context("--n is required")?;
            let d = ThroughputDistribution::<f64>::new(n, codes)?;
            println!("s\tprob_exact\tprob_count");
            for (s, count) in d.count_pmf().iter().enumerate() {
                println!("{s}\t{}\t{count}", d.exact(s as u64)?);
            }
        }
        Op::Range => println!(
            "{}",
            analytics::effective_observation_range(p.obs_range, p.comm_range, p.memory_bits)?
        ),
        Op::BeliefInside => println!("{}", analytics::belief_correct_prob_inside(p.p11, p.memory_bits)?),
        Op::BeliefOutside => {
            let form = if a.simplified { OutsideForm::Simplified } else { OutsideForm::Full };
            println!(
                "{}",
                analytics::belief_correct_prob_outside(p.p11, p.p10, a.kappa, a.eta, form)?
            );
        }
    }
    Ok(())
}

fn tsv(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn simulate(spec: &ExperimentSpec, g: &GlobalArgs, s: &SimulateArgs) -> Result<()> {
    let params = spec.base.clone().with_lambda(spec.lambda_grid[0]).with_memory(spec.k_grid[0]);
    params.validate()?;
    let mode = spec.modes.last().copied().unwrap_or(Mode::FiniteMemory);
    let seed = spec.master_seed;
    let setup = match &s.topology {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let topology = Topology::read_table(BufReader::new(f), &params)?;
            EpisodeSetup::with_topology(&params, seed, topology)?
        }
        None => EpisodeSetup::sample(&params, seed)?,
    };
    let (m, trace) = match run_episode_traced(&params, mode, seed, &setup) {
        Ok(v) => v,
        Err(mtclearn::Error::Truncated { cap, metrics }) => {
            eprintln!("episode hit the cap of {cap} slots");
            (*metrics, Default::default())
        }
        Err(e) => return Err(e.into()),
    };
    println!("mode\t{mode}");
    println!("seed\t{seed}");
    println!("K\t{}", params.memory_bits);
    println!("nodes\t{}", m.n_nodes);
    println!("onset_slot\t{}", m.onset);
    println!("alarm_delay_slots\t{}", m.alarm_delay);
    println!("throughput_base\t{:.4}", m.throughput_baseline);
    println!("throughput_post\t{:.4}", m.throughput_post);
    println!("learned_fraction\t{:.4}", m.learned_fraction_final);
    println!("roots\t{}", m.roots);
    println!("propagation_steps\t{}", m.propagation_steps);

    if g.trace {
        let dir = &spec.output_dir;
        fs::create_dir_all(dir)?;
        setup.topology.write_table(tsv(&dir.join("topology.tsv"))?)?;
        let mut w = tsv(&dir.join("mac_trace.tsv"))?;
        writeln!(w, "slot\tn_active\tn_success\talarm_active\talarm_success")?;
        for o in &trace.slots {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                o.slot,
                o.active.len(),
                o.periodic_successes(),
                u8::from(o.alarm_active),
                u8::from(o.alarm_success)
            )?;
        }
        w.flush()?;
        let mut w = tsv(&dir.join("learning_trace.tsv"))?;
        writeln!(w, "slot\tnode\tsequence_id\tx\tT\tQ")?;
        for (slot, r) in &trace.learning {
            writeln!(
                w,
                "{slot}\t{}\t{}\t{}\t{}\t{}",
                r.node,
                r.sequence_id,
                u8::from(r.belief),
                u8::from(r.estimate),
                u8::from(r.challenge)
            )?;
        }
        w.flush()?;
        eprintln!("traces written to {}", dir.display());
    }
    Ok(())
}

fn sweep(spec: &ExperimentSpec) -> Result<()> {
    let result = harness::run_sweep(spec)?;
    result.write(&spec.output_dir)?;
    println!("{}", harness::AGGREGATE_HEADER);
    for a in &result.aggregates {
        println!(
            "{},{},{},{},{:.3},{:.3},{:.2},{:.2},{:.2},{:.2}",
            a.lambda,
            a.k,
            a.mode,
            a.reps,
            a.delay_mean,
            a.delay_ci95,
            a.delay_reduction_pct,
            a.throughput_reduction_pct,
            a.learned_pct,
            a.learned_ci95
        );
    }
    eprintln!("wrote {}", spec.output_dir.display());
    Ok(())
}

fn validate(spec: &ExperimentSpec, v: &ValidateArgs) -> Result<bool> {
    let d = ValidateOptions::default();
    let options = ValidateOptions {
        containment_topologies: v.topologies.unwrap_or(d.containment_topologies),
        delay_episodes_small: v.small_episodes.unwrap_or(d.delay_episodes_small),
        delay_episodes_large: v.large_episodes.unwrap_or(d.delay_episodes_large),
        seed: spec.master_seed,
    };
    let reports = harness::validate(&options);
    for r in &reports {
        println!("{}", r.line());
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn run(cli: Cli) -> Result<bool> {
    let spec = build_spec(&cli.global)?;
    match &cli.command {
        Command::Analytic(a) => analytic(&spec, a)?,
        Command::Simulate(s) => simulate(&spec, &cli.global, s)?,
        Command::Sweep => sweep(&spec)?,
        Command::Validate(v) => return validate(&spec, v),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
