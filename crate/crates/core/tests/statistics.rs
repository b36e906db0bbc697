//! Distributional checks on the random components, with tolerances of a few
//! standard errors.

use mtclearn::harness::validate::delay_check;
use mtclearn::harness::{run_sweep, ExperimentSpec};
use mtclearn::learning::{seed_sequences, propagate_step, update_state, BeliefRule, LearningMessage, Memory, TaggedSignal};
use mtclearn::rng::{derive_seed, stream, Stream};
use mtclearn::topology::sample_deployment;
use mtclearn::{Mode, Point, SystemParams, Topology};

#[test]
fn poisson_deployment_mean_count() {
    let params = SystemParams {
        field_side: 10.0,
        lambda: 0.8,
        ..SystemParams::default()
    };
    let samples = 2000;
    let counts: Vec<f64> = (0..samples)
        .map(|i| {
            let mut rng = stream(derive_seed(7, &[i]), Stream::Topology);
            sample_deployment(&params, &mut rng).unwrap().len() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / samples as f64;
    let expected = params.expected_nodes();
    let se = (expected / samples as f64).sqrt();
    assert!((mean - expected).abs() <= 3.0 * se, "mean {mean} vs {expected} (se {se})");
}

#[test]
fn deployment_stays_in_the_field() {
    let params = SystemParams::default().with_fixed_n(3000);
    let topo = sample_deployment(&params, &mut stream(1, Stream::Topology)).unwrap();
    assert_eq!(topo.len(), 3000);
    for n in &topo.nodes {
        assert!((0.0..=50.0).contains(&n.pos.x) && (0.0..=50.0).contains(&n.pos.y));
    }
}

/// Two roots in range of a single outside node: each should win half the time.
#[test]
fn tie_break_is_fair() {
    let params = SystemParams {
        abnormality: Some((10.0, 10.0)),
        obs_range: 1.0,
        p11: 0.999,
        p10: 0.0,
        ..SystemParams::default()
    }
    .with_memory(5);
    let topo = Topology::from_positions(
        &[Point::new(10.0, 11.0), Point::new(10.0, 9.0), Point::new(11.5, 10.0)],
        &params,
    );
    assert_eq!(topo.inside, vec![true, true, false]);
    let (mut first, mut trials) = (0u32, 0u32);
    for t in 0..10_000u64 {
        let seed = derive_seed(11, &[t]);
        let (mut st, _) =
            seed_sequences(&topo, &params, Memory::Finite(5), true, &mut stream(seed, Stream::Signals)).unwrap();
        if st.roots != 2 {
            continue;
        }
        assert_eq!(st.frontier(), &[2]);
        assert_eq!(st.pending_from(2), &[0, 1]);
        propagate_step(&topo, &mut st, &params, &mut stream(seed, Stream::Learning)).unwrap();
        trials += 1;
        first += u32::from(st.membership[2] == Some(0));
    }
    let share = first as f64 / trials as f64;
    assert!(trials > 9_900);
    assert!((share - 0.5).abs() <= 0.02, "share {share} over {trials}");
}

#[test]
fn root_count_matches_inside_detection_rate() {
    let params = SystemParams {
        abnormality: Some((25.0, 25.0)),
        ..SystemParams::default()
    };
    // 20 nodes inside the disk, 20 outside
    let positions: Vec<Point> = (0..40)
        .map(|i| {
            let a = i as f64 * 0.7;
            let r = if i < 20 { 5.0 } else { 20.0 };
            Point::new(25.0 + r * a.cos(), 25.0 + r * a.sin())
        })
        .collect();
    let topo = Topology::from_positions(&positions, &params);
    assert_eq!(topo.inside_count(), 20);
    let runs = 4000;
    let total: usize = (0..runs)
        .map(|t| {
            let mut rng = stream(derive_seed(5, &[t]), Stream::Signals);
            seed_sequences(&topo, &params, Memory::Finite(7), true, &mut rng).unwrap().0.roots
        })
        .sum();
    let mean = total as f64 / runs as f64;
    // 20 * 0.8 from inside plus 20 * 0.001 from outside
    assert!((mean - 16.02).abs() <= 0.5, "mean roots {mean}");
    assert!((mean - 16.02).abs() <= 4.0 * (20.0f64 * 0.8 * 0.2 / runs as f64).sqrt() + 0.02);
}

/// Leaving the disk with a window full of inside signals, the inside count
/// falls by exactly one per hop until it reaches zero.
#[test]
fn inside_count_falls_by_one_per_hop() {
    for k in 2..=12usize {
        let params = SystemParams::default().with_memory(k);
        let mut msg = LearningMessage {
            signals: vec![TaggedSignal::observed(true, true); k - 2],
            estimate: true,
            challenge: false,
            sequence_id: 0,
        };
        let (state, out) = update_state(&msg, TaggedSignal::observed(true, true), &params, BeliefRule::Unknown).unwrap();
        assert_eq!(state.kappa, k - 1);
        msg = out;
        let mut expected = k - 1;
        while expected > 0 {
            let (state, out) =
                update_state(&msg, TaggedSignal::observed(false, false), &params, BeliefRule::Unknown).unwrap();
            expected -= 1;
            assert_eq!(state.kappa, expected, "K={k}");
            msg = out;
        }
        let (state, _) = update_state(&msg, TaggedSignal::observed(false, false), &params, BeliefRule::Unknown).unwrap();
        assert_eq!(state.kappa, 0);
        assert!(!state.belief);
    }
}

#[test]
fn small_population_delay_matches_closed_form() {
    let check = delay_check(&SystemParams::default(), 200, 10_000, 3).unwrap();
    assert!(check.z().abs() <= 3.0, "{check:?}");
}

#[test]
fn benefit_grows_with_memory() {
    let spec = ExperimentSpec {
        k_grid: vec![2, 4, 8, 15],
        lambda_grid: vec![0.5],
        modes: vec![Mode::NoLearning, Mode::FiniteMemory],
        replications: 150,
        master_seed: 42,
        ..ExperimentSpec::default()
    };
    let result = run_sweep(&spec).unwrap();
    let cells: Vec<_> = spec
        .k_grid
        .iter()
        .map(|&k| result.cell(0.5, k, Mode::FiniteMemory).unwrap())
        .collect();
    for w in cells.windows(2) {
        assert!(w[1].learned_pct > w[0].learned_pct, "{:?}", w);
        assert!(w[1].delay_reduction_pct > w[0].delay_reduction_pct, "{:?}", w);
    }
    assert!(cells[0].delay_reduction_pct > 0.0);
}
