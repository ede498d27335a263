//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible under `--nocapture`). Thresholds live here,
//! in code, not in any external calibration.

use std::sync::OnceLock;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use rcs_core::adversary::Regime;
use rcs_core::analysis::{delta_sigma, exhaustive_q, mu_unsafe_order_stat};
use rcs_core::protocols::{run_cs, run_rcs, run_rcs_coin, LatencyModel};
use rcs_core::scalar::Scalar;
use rcs_core::{
    Dist64, ExactDist, ExactGroup, FiniteDistribution, Group64, ModelGroup, OutputSpace, Phase,
};
use rcs_harness::config::{ExperimentGrid, ProtocolKind};
use rcs_harness::grid::{run_grid, RunOutput};

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion:>2} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

/// Full default grid, every regime and protocol, 1000 trials per cell.
fn full_grid_run() -> &'static (RunOutput, f64) {
    static RUN: OnceLock<(RunOutput, f64)> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut grid = ExperimentGrid::preset_paper();
        grid.trials_per_cell = 1000;
        let start = Instant::now();
        let out = run_grid(&grid).expect("grid runs");
        (out, start.elapsed().as_secs_f64())
    })
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    assert!(!v.is_empty());
    v.iter().sum::<f64>() / v.len() as f64
}

/// Criterion 1: RCS and F-RCS never abstain, on any cell of the full
/// default grid at >= 1000 trials per cell, within the runtime target.
#[test]
fn criterion_01_zero_abstention_for_rcs_and_frcs() {
    let (run, elapsed) = full_grid_run();
    let mut cells = 0;
    let mut abstaining = 0;
    for cell in &run.cells {
        if matches!(cell.key.protocol, ProtocolKind::Rcs | ProtocolKind::Frcs) {
            cells += 1;
            if cell.abstention_rate != 0.0 {
                abstaining += 1;
            }
        }
    }
    let pass = cells > 0 && abstaining == 0 && run.failures.is_empty() && *elapsed < 300.0;
    report(
        1,
        "zero abstention",
        pass,
        &format!("{cells} RCS/FRCS cells, {abstaining} abstaining, grid ran in {elapsed:.1}s"),
    );
}

/// Criterion 2: on the reduced collusion grid, aggregate RCS safe rate is
/// at least five times the baseline's. The baseline figure counts
/// abstentions against it (safe deliveries over all trials), matching the
/// comparison-table convention where SR and AR sum below 100%.
#[test]
fn criterion_02_safety_ratio_under_collusion() {
    let mut grid = ExperimentGrid::preset_ci();
    grid.regimes = vec![Regime::Collusion];
    grid.protocols = vec![ProtocolKind::Cs, ProtocolKind::Rcs];
    grid.trials_per_cell = 2000;
    let out = run_grid(&grid).expect("grid runs");
    let rcs = mean(
        out.cells
            .iter()
            .filter(|c| c.key.protocol == ProtocolKind::Rcs)
            .map(|c| c.safe_rate.expect("rcs always delivers")),
    );
    let cs = mean(
        out.cells
            .iter()
            .filter(|c| c.key.protocol == ProtocolKind::Cs)
            .map(|c| c.sr_over_all_trials),
    );
    let pass = rcs >= 5.0 * cs;
    report(
        2,
        "collusion safety ratio",
        pass,
        &format!("RCS {rcs:.4} vs CS {cs:.4} (ratio {:.2}, need >= 5)", rcs / cs),
    );
}

/// Criterion 3: RCS keeps aggregate safe rate above 0.67 under the default
/// collusion scenario at 8000 trials per cell.
#[test]
fn criterion_03_collusion_floor() {
    let mut grid = ExperimentGrid::preset_paper();
    grid.regimes = vec![Regime::Collusion];
    grid.protocols = vec![ProtocolKind::Rcs];
    grid.trials_per_cell = 8000;
    let out = run_grid(&grid).expect("grid runs");
    let sr = mean(
        out.cells
            .iter()
            .map(|c| c.safe_rate.expect("rcs always delivers")),
    );
    let pass = sr > 0.67;
    report(
        3,
        "collusion floor",
        pass,
        &format!("aggregate RCS safe rate {sr:.4} (need > 0.67)"),
    );
}

fn worked_instance() -> Group64 {
    let space = OutputSpace::new(3, [2]).unwrap();
    ModelGroup::new(
        space,
        vec![
            FiniteDistribution::new(vec![0.5, 0.5, 0.0]).unwrap(),
            FiniteDistribution::new(vec![0.5, 0.5, 0.0]).unwrap(),
            FiniteDistribution::new(vec![0.0, 0.0, 1.0]).unwrap(),
        ],
        2,
    )
    .unwrap()
}

fn mixed_instance() -> Group64 {
    let space = OutputSpace::new(4, [3]).unwrap();
    ModelGroup::new(
        space,
        vec![
            FiniteDistribution::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap(),
            FiniteDistribution::new(vec![0.35, 0.35, 0.2, 0.1]).unwrap(),
            FiniteDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
            FiniteDistribution::new(vec![0.25, 0.25, 0.25, 0.25]).unwrap(),
        ],
        2,
    )
    .unwrap()
}

fn partial_overlap_instance() -> Group64 {
    let space = OutputSpace::new(2, [1]).unwrap();
    ModelGroup::new(
        space,
        vec![
            FiniteDistribution::new(vec![0.9, 0.1]).unwrap(),
            FiniteDistribution::new(vec![0.1, 0.9]).unwrap(),
        ],
        1,
    )
    .unwrap()
}

/// Criterion 4: the baseline's empirical abstention rate equals (1-Z)^R
/// within three binomial standard errors at 1e5 trials on three fixed
/// enumerable instances.
#[test]
fn criterion_04_abstention_law() {
    const TRIALS: usize = 100_000;
    let lat = LatencyModel::default();
    let cases: [(Group64, usize, u64); 3] = [
        (worked_instance(), 2, 401),
        (mixed_instance(), 3, 402),
        (partial_overlap_instance(), 4, 403),
    ];
    let mut detail = String::new();
    let mut pass = true;
    for (group, rounds, seed) in cases {
        let z: f64 = group.overlap_z();
        let predicted = (1.0 - z).powi(rounds as i32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let abstains = (0..TRIALS)
            .filter(|_| run_cs(&group, rounds, &lat, &mut rng).is_abstain())
            .count();
        let observed = abstains as f64 / TRIALS as f64;
        let sd = (predicted * (1.0 - predicted) / TRIALS as f64).sqrt();
        let ok = (observed - predicted).abs() <= 3.0 * sd;
        pass &= ok;
        detail.push_str(&format!(
            "[n={} R={rounds}: predicted {predicted:.4}, observed {observed:.4}] ",
            group.n()
        ));
    }
    report(4, "abstention law", pass, detail.trim());
}

/// Criterion 5: on 200 randomized small instances, the exact unsafe
/// delivery probability never exceeds R * mu(U) + (1-Z)^R, in exact
/// rational arithmetic. Zero violations permitted.
#[test]
fn criterion_05_bound_soundness_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(271_828);
    let mut violations = 0;
    let instances = 200;
    for _ in 0..instances {
        let size = rng.gen_range(2..=8usize);
        let n = rng.gen_range(1..=7usize);
        let s = rng.gen_range(1..=n);
        let rounds = rng.gen_range(1..=4usize);
        let unsafe_count = rng.gen_range(1..size);
        let mut indices: Vec<usize> = (0..size).collect();
        for i in (1..size).rev() {
            let j = rng.gen_range(0..=i);
            indices.swap(i, j);
        }
        let space = OutputSpace::new(size, indices[..unsafe_count].iter().copied()).unwrap();

        let models: Vec<ExactDist> = (0..n)
            .map(|_| {
                let mut weights: Vec<i64> = (0..size).map(|_| rng.gen_range(0..16)).collect();
                if weights.iter().all(|w| *w == 0) {
                    weights[rng.gen_range(0..size)] = 1;
                }
                let total: i64 = weights.iter().sum();
                FiniteDistribution::new(
                    weights
                        .into_iter()
                        .map(|w| BigRational::new(w.into(), total.into()))
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let group = ExactGroup::new(space, models, s).unwrap();

        let q = exhaustive_q(&group, rounds).unwrap();
        let z = group.overlap_z();
        let pr_trace = Scalar::powi(&(BigRational::one() - z), rounds as u32);
        let mu = mu_unsafe_order_stat(&group);
        let bound = BigRational::from_integer((rounds as i64).into()) * mu + pr_trace;
        if q > bound {
            violations += 1;
        }
        assert!(q >= BigRational::zero() && q <= BigRational::one());
    }
    report(
        5,
        "bound soundness (exact)",
        violations == 0,
        &format!("{instances} instances, {violations} violations"),
    );
}

/// Criterion 6: sign of sigma(y_t) - sigma(y_v) equals the sign of
/// D_{t,v} - 1 on 1e4 randomized triples with finite positive ratio.
#[test]
fn criterion_06_sign_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(314_159);
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    let mut attempts = 0usize;
    while checked < 10_000 {
        attempts += 1;
        assert!(attempts < 1_000_000, "triple generation starved");
        let size = rng.gen_range(2..=16usize);
        let n = rng.gen_range(1..=9usize);
        let s = rng.gen_range(1..=n);
        // 64-grain lattice keeps products exact in f64, so true ties are
        // exact ties and sign comparisons are sound.
        let models: Vec<Dist64> = (0..n)
            .map(|_| {
                let mut counts = vec![0u32; size];
                for _ in 0..64 {
                    counts[rng.gen_range(0..size)] += 1;
                }
                FiniteDistribution::new(
                    counts.into_iter().map(|c| c as f64 / 64.0).collect(),
                )
                .unwrap()
            })
            .collect();
        let group = ModelGroup::new(OutputSpace::all_safe(size), models, s).unwrap();
        let y_t = rng.gen_range(0..size);
        let y_v = rng.gen_range(0..size);
        if y_t == y_v {
            continue;
        }
        let Ok(ds) = delta_sigma(&group, y_t, y_v) else {
            continue;
        };
        let Some(dtv) = ds.dtv else { continue };
        if dtv <= 0.0 {
            continue;
        }
        let lhs = ds.delta.partial_cmp(&0.0).unwrap();
        let rhs = dtv.partial_cmp(&1.0).unwrap();
        if lhs != rhs {
            mismatches += 1;
        }
        checked += 1;
    }
    report(
        6,
        "sign equivalence",
        mismatches == 0,
        &format!("{checked} triples, {mismatches} sign mismatches"),
    );
}

/// Criterion 7: conditioned on round-1 acceptance, delivered responses
/// follow (1/Z) * (1/s) * sum_{i<=s} p_(i)(y); chi-square at significance
/// 0.001 over 1e5 trials on two fixed instances.
#[test]
fn criterion_07_accept_phase_distribution() {
    const TRIALS: usize = 100_000;
    let lat = LatencyModel::default();
    let mut pass = true;
    let mut detail = String::new();
    for (group, seed) in [(worked_instance(), 701u64), (mixed_instance(), 702u64)] {
        let size = group.space().size();
        let s = group.s_declared();
        let z: f64 = group.overlap_z();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0usize; size];
        let mut accepted = 0usize;
        for _ in 0..TRIALS {
            if let Some((y, _, Phase::Accept)) =
                run_cs(&group, 1, &lat, &mut rng).delivered()
            {
                counts[y] += 1;
                accepted += 1;
            }
        }
        let mut stat = 0.0;
        let mut df = 0usize;
        for (y, count) in counts.iter().enumerate() {
            let w: f64 = {
                let sorted = group.order_stats_at(y).unwrap();
                sorted[..s].iter().sum::<f64>() / s as f64
            };
            let expected = w / z * accepted as f64;
            if expected > 0.0 {
                let diff = *count as f64 - expected;
                stat += diff * diff / expected;
                df += 1;
            } else {
                pass &= *count == 0;
            }
        }
        let crit = ChiSquared::new((df - 1) as f64)
            .unwrap()
            .inverse_cdf(1.0 - 0.001);
        pass &= stat < crit;
        detail.push_str(&format!(
            "[n={}: chi2 {stat:.2} < {crit:.2}, {accepted} accepts] ",
            group.n()
        ));
    }
    report(7, "accept-phase distribution", pass, detail.trim());
}

/// Criterion 8: mean feedback accuracy over the collusion feedback cells
/// lies in [0.8, 1.0].
#[test]
fn criterion_08_feedback_accuracy() {
    let (run, _) = full_grid_run();
    let accs: Vec<f64> = run
        .cells
        .iter()
        .filter(|c| {
            c.key.protocol == ProtocolKind::Frcs && c.key.regime == Regime::Collusion
        })
        .filter_map(|c| c.feedback_accuracy)
        .collect();
    let pass = !accs.is_empty() && {
        let m = mean(accs.iter().copied());
        (0.8..=1.0).contains(&m)
    };
    let m = mean(accs.iter().copied());
    report(
        8,
        "feedback accuracy",
        pass,
        &format!("{} cells, mean accuracy {m:.4} (need within [0.8, 1.0])", accs.len()),
    );
}

/// Criterion 9: per-cell mean latency of RCS stays within +15% of the
/// baseline's, and the trace surcharge is accounted exactly as
/// c * n^2 * log2(n).
#[test]
fn criterion_09_latency_comparability() {
    let (run, _) = full_grid_run();
    let mut worst: f64 = 0.0;
    for cs in run
        .cells
        .iter()
        .filter(|c| c.key.protocol == ProtocolKind::Cs)
    {
        let rcs = run
            .cells
            .iter()
            .find(|c| {
                c.key.protocol == ProtocolKind::Rcs
                    && c.key.regime == cs.key.regime
                    && c.key.lambda == cs.key.lambda
                    && c.key.n == cs.key.n
            })
            .expect("matching rcs cell");
        worst = worst.max(rcs.mean_latency_units / cs.mean_latency_units);
    }

    // Exact surcharge accounting on a forced trace (sigma = 0 everywhere,
    // so the first run already traces).
    let group = partial_overlap_disjoint();
    let lat = LatencyModel::default();
    let rounds = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(901);
    let exact_ok = loop {
        let out = run_rcs(&group, rounds, &lat, &mut rng);
        if let Some((_, _, Phase::Trace)) = out.delivered() {
            let n = group.n();
            let expected = rounds as f64 * 1.0 + 1e-6 * (n * n) as f64 * (n as f64).log2();
            break out.latency_units == expected;
        }
    };

    let pass = worst <= 1.15 && exact_ok;
    report(
        9,
        "latency comparability",
        pass,
        &format!("worst RCS/CS ratio {worst:.4} (cap 1.15), surcharge exact: {exact_ok}"),
    );
}

fn partial_overlap_disjoint() -> Group64 {
    let space = OutputSpace::new(2, [1]).unwrap();
    ModelGroup::new(
        space,
        vec![
            FiniteDistribution::new(vec![1.0, 0.0]).unwrap(),
            FiniteDistribution::new(vec![0.0, 1.0]).unwrap(),
        ],
        1,
    )
    .unwrap()
}

/// Criterion 10: two `run --preset ci --seed 42` invocations of the CLI
/// produce byte-identical CSV output.
#[test]
fn criterion_10_determinism() {
    let bin = env!("CARGO_BIN_EXE_rcs");
    let read_run = |dir: &std::path::Path| -> Vec<u8> {
        let status = std::process::Command::new(bin)
            .args(["run", "--preset", "ci", "--seed", "42", "--out"])
            .arg(dir)
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .status()
            .expect("binary runs");
        assert!(status.success());
        std::fs::read(dir.join("results.csv")).expect("results written")
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = read_run(dir_a.path());
    let b = read_run(dir_b.path());
    let pass = a == b && !a.is_empty();
    report(
        10,
        "determinism",
        pass,
        &format!("{} bytes, identical: {}", a.len(), a == b),
    );
}

/// Criterion 11: the local-coin hybrid abstains with frequency 1/2 (three
/// binomial standard errors at 1e5 trials) conditioned on reaching the
/// coin, and its trace deliveries equal plain RCS's under shared seeds.
#[test]
fn criterion_11_local_coin_split() {
    const TRIALS: usize = 100_000;
    let group = partial_overlap_disjoint(); // sigma = 0 everywhere: every trial reaches the coin
    let lat = LatencyModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1101);
    let abstains = (0..TRIALS)
        .filter(|_| run_rcs_coin(&group, 3, &lat, &mut rng).is_abstain())
        .count();
    let freq = abstains as f64 / TRIALS as f64;
    let sd = (0.25f64 / TRIALS as f64).sqrt();
    let freq_ok = (freq - 0.5).abs() <= 3.0 * sd;

    let mut equal_ok = true;
    let mut delivered = 0usize;
    for seed in 0..2000u64 {
        let mut rng_a = ChaCha8Rng::seed_from_u64(seed);
        let mut rng_b = ChaCha8Rng::seed_from_u64(seed);
        let rcs = run_rcs(&group, 3, &lat, &mut rng_a);
        let coin = run_rcs_coin(&group, 3, &lat, &mut rng_b);
        if let Some((y, origin, phase)) = coin.delivered() {
            delivered += 1;
            equal_ok &= phase == Phase::Trace && rcs.delivered() == Some((y, origin, phase));
        }
    }
    let pass = freq_ok && equal_ok && delivered > 0;
    report(
        11,
        "local-coin split",
        pass,
        &format!(
            "abstain frequency {freq:.4} (3sd band {:.4}), {delivered} coin deliveries all matched RCS: {equal_ok}",
            3.0 * sd
        ),
    );
}

/// Exact value conversion sanity for the rational path used by criterion 5.
#[test]
fn exact_oracle_agrees_with_float_oracle() {
    let space = OutputSpace::new(3, [2]).unwrap();
    let exact_models: Vec<ExactDist> = vec![
        FiniteDistribution::new(vec![
            BigRational::new(1.into(), 2.into()),
            BigRational::new(1.into(), 2.into()),
            BigRational::zero(),
        ])
        .unwrap(),
        FiniteDistribution::new(vec![
            BigRational::new(1.into(), 2.into()),
            BigRational::new(1.into(), 2.into()),
            BigRational::zero(),
        ])
        .unwrap(),
        FiniteDistribution::new(vec![
            BigRational::zero(),
            BigRational::zero(),
            BigRational::one(),
        ])
        .unwrap(),
    ];
    let exact_group = ExactGroup::new(space, exact_models, 2).unwrap();
    for rounds in 1..=4 {
        let q_exact = exhaustive_q(&exact_group, rounds).unwrap();
        let q_float: f64 = exhaustive_q(&worked_instance(), rounds).unwrap();
        assert!((q_exact.to_f64().unwrap() - q_float).abs() < 1e-12);
    }
}
