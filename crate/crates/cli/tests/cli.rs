use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtclearn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("{key} missing in\n{out}"))
        .to_string()
}

#[test]
fn analytic_delay_for_both_densities() {
    let o = run(&["analytic", "delay", "--lambda", "0.5"]);
    assert!(o.status.success());
    let d: f64 = stdout(&o).trim().parse().unwrap();
    assert!((d - 74.3).abs() < 0.5);
    let o = run(&["analytic", "delay", "--n", "2000"]);
    let d: f64 = stdout(&o).trim().parse().unwrap();
    assert!((d - 988.2).abs() < 2.0);
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, "l = 2\nK = 4\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "analytic", "brute-force", "--n", "3"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("4/3\t"), "{}", stdout(&o));
    // r_d + (K - 2) r_c with the flag overriding the file
    let o = run(&["--config", cfg.to_str().unwrap(), "--k", "7", "analytic", "range"]);
    assert_eq!(stdout(&o).trim(), "20");
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "R = 50\nradius = 3\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "analytic", "delay"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:"));
    let o = run(&["--mode", "sometimes", "sweep"]);
    assert_eq!(o.status.code(), Some(2));
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn simulate_writes_traces_and_reloads_topology() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["--lambda", "0.5", "--k", "6", "--mode", "finite_memory", "--seed", "9"];
    let mut first = args.to_vec();
    first.extend(["--trace", "--out", out, "simulate"]);
    let o = run(&first);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(header(&dir.path().join("mac_trace.tsv")), "slot\tn_active\tn_success\talarm_active\talarm_success");
    assert_eq!(header(&dir.path().join("learning_trace.tsv")), "slot\tnode\tsequence_id\tx\tT\tQ");
    assert_eq!(header(&dir.path().join("topology.tsv")), "id\tx\ty\tinside");

    let topo = dir.path().join("topology.tsv");
    let mut again = args.to_vec();
    again.extend(["simulate", "--topology", topo.to_str().unwrap()]);
    let o2 = run(&again);
    assert!(o2.status.success());
    for key in ["nodes", "alarm_delay_slots", "learned_fraction", "throughput_post"] {
        assert_eq!(value(&stdout(&o), key), value(&stdout(&o2), key), "{key}");
    }
}

#[test]
fn sweep_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&[
        "--reps", "3", "--k", "2,5", "--lambda", "0.5", "--fixed-n", "300",
        "--out", out.to_str().unwrap(), "sweep",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let raw = fs::read_to_string(out.join("raw.csv")).unwrap();
    assert_eq!(
        raw.lines().next().unwrap(),
        "lambda,K,mode,replication,seed,N_actual,alarm_delay_slots,throughput_post,throughput_base,learned_fraction,truncated,zero_observer"
    );
    assert_eq!(raw.lines().count(), 1 + 2 * 2 * 3);
    assert!(raw.lines().skip(1).all(|l| l.split(',').nth(5) == Some("300")));
    assert_eq!(
        header(&out.join("aggregate.csv")),
        "lambda,K,mode,reps,delay_mean,delay_ci95,delay_reduction_pct,throughput_reduction_pct,learned_pct,learned_ci95"
    );
}

#[test]
fn validate_reports_every_suite() {
    let o = run(&["validate", "--topologies", "3", "--small-episodes", "500", "--large-episodes", "100"]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 10, "{text}");
    assert!(text.lines().all(|l| l.contains("\tPASS\t") || l.contains("\tFAIL\t")));
    assert_eq!(o.status.success(), !text.contains("\tFAIL\t"));
}
