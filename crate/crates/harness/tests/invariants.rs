//! Grid-level invariants beyond the acceptance gate.

use rcs_core::adversary::Regime;
use rcs_harness::config::{ExperimentGrid, ProtocolKind};
use rcs_harness::grid::run_grid;

/// At f = ceil(n/2) the declared-safety assumption is void; the trace
/// protocol must stay practically robust (safe rate above one half on
/// every cell) while the abstaining baseline falls below it. The baseline
/// comparison uses the all-trials safe rate and allows three binomial
/// standard errors since the two protocols are estimated on independent
/// streams.
#[test]
fn half_resilience_keeps_rcs_above_half_and_cs_below() {
    let trials = 2000usize;
    let grid = ExperimentGrid {
        regimes: vec![Regime::HalfResilience],
        protocols: vec![ProtocolKind::Cs, ProtocolKind::Rcs],
        trials_per_cell: trials,
        risk_trials: 200,
        ..ExperimentGrid::preset_paper()
    };
    let out = run_grid(&grid).expect("grid runs");
    assert!(out.failures.is_empty());

    let sd = (0.25f64 / trials as f64).sqrt();
    let mut cs_total = 0.0;
    let mut rcs_total = 0.0;
    let mut cells = 0.0;
    for cs in out
        .cells
        .iter()
        .filter(|c| c.key.protocol == ProtocolKind::Cs)
    {
        let rcs = out
            .cells
            .iter()
            .find(|c| {
                c.key.protocol == ProtocolKind::Rcs
                    && c.key.lambda == cs.key.lambda
                    && c.key.n == cs.key.n
            })
            .expect("paired cell");
        let rcs_sr = rcs.safe_rate.expect("rcs delivers");
        assert!(
            rcs_sr > 0.5,
            "half-resilience cell lambda={} n={} has RCS safe rate {rcs_sr}",
            cs.key.lambda,
            cs.key.n
        );
        // The baseline never beats the trace protocol beyond noise.
        assert!(
            cs.sr_over_all_trials <= rcs.sr_over_all_trials + 3.0 * sd * 2.0f64.sqrt(),
            "cell lambda={} n={}: CS {} vs RCS {}",
            cs.key.lambda,
            cs.key.n,
            cs.sr_over_all_trials,
            rcs.sr_over_all_trials
        );
        cs_total += cs.sr_over_all_trials;
        rcs_total += rcs.sr_over_all_trials;
        cells += 1.0;
    }
    assert!(cells > 0.0);
    assert!(
        cs_total / cells < rcs_total / cells,
        "aggregate CS {} should degrade below RCS {}",
        cs_total / cells,
        rcs_total / cells
    );
}

/// Degenerate grid: n = 2 carries no Byzantine slot and no outlier seed,
/// and jitter 0 collapses both models onto one base. Every protocol then
/// accepts in round one with safe provenance.
#[test]
fn degenerate_identical_safe_groups_deliver_immediately() {
    let mut grid = ExperimentGrid {
        lambdas: vec![2],
        n_values: vec![2],
        regimes: vec![Regime::General],
        protocols: ProtocolKind::ALL.to_vec(),
        trials_per_cell: 500,
        risk_trials: 100,
        ..ExperimentGrid::preset_ci()
    };
    grid.adversary.strength = 0.0;
    grid.adversary.jitter = 0.0;
    let out = run_grid(&grid).expect("grid runs");
    assert_eq!(out.cells.len(), 4);
    for cell in &out.cells {
        assert_eq!(cell.f_actual, 0);
        assert_eq!(cell.abstention_rate, 0.0);
        assert_eq!(cell.safe_rate, Some(1.0));
        assert!(
            (cell.mean_latency_units - 1.0).abs() < 1e-12,
            "round-1 accepts only"
        );
        assert!((cell.risk.z - 1.0).abs() < 1e-9);
    }
}
