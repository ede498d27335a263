//! Experiment-grid execution and metric aggregation.

use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;

use rcs_core::adversary::{
    build_group, build_group_with_placement, draw_placement, Regime, SafeModelSpec,
    ScenarioConfig,
};
use rcs_core::analysis::{risk_bound_report, RiskReport};
use rcs_core::feedback::{eval_oracle, frcs_run, ExclusionRegistry, TaskClass, Verdict};
use rcs_core::protocols::{run_cs, run_rcs, run_rcs_coin};
use rcs_core::stream::{derive_stream, trial_rng};
use rcs_core::{Dist64, LabeledGroup64, OutputSpace};

use crate::config::{ExperimentGrid, ProtocolKind};
use crate::scenario;

/// Stream-id tags distinguishing the random streams of one cell.
const STREAM_TRIAL: u64 = 0;
const STREAM_PLACEMENT: u64 = 1;
const STREAM_RISK: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellKey {
    pub protocol: ProtocolKind,
    pub regime: Regime,
    pub lambda: u64,
    pub n: usize,
}

/// Aggregated metrics of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    pub rounds: usize,
    pub s_declared: usize,
    pub f_actual: usize,
    pub trials: usize,
    /// Safe-provenance rate over delivered responses; `None` when every
    /// trial abstained.
    pub safe_rate: Option<f64>,
    /// Safe-provenance rate over all trials, abstentions counted against it.
    pub sr_over_all_trials: f64,
    pub abstention_rate: f64,
    pub mean_latency_units: f64,
    /// Present only for feedback-protocol cells with at least one exclusion.
    pub feedback_accuracy: Option<f64>,
    pub risk: RiskReport,
}

/// A cell whose generator or protocol errored out.
#[derive(Debug, Clone)]
pub struct FailureRow {
    pub key: CellKey,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub cells: Vec<CellResult>,
    pub failures: Vec<FailureRow>,
    /// Append-only delivery logs of the feedback cells, for audit.
    pub feedback_logs: Vec<(CellKey, Vec<rcs_core::feedback::FeedbackRecord>)>,
}

/// Runs every cell of the grid. Cells execute in parallel; all randomness
/// is derived from `(base_seed, cell index, trial)`, so results are
/// bit-identical regardless of thread count.
pub fn run_grid(grid: &ExperimentGrid) -> Result<RunOutput, crate::config::ConfigError> {
    grid.validate()?;
    let ingested = match &grid.adversary.distributions {
        Some(path) => {
            let parsed = crate::ingest::ingest_distributions(path)
                .map_err(|e| crate::config::ConfigError::Invalid(e.to_string()))?;
            Some((parsed.space, parsed.models))
        }
        None => None,
    };

    let mut keys = Vec::new();
    for regime in &grid.regimes {
        for n in &grid.n_values {
            for lambda in &grid.lambdas {
                for protocol in &grid.protocols {
                    keys.push(CellKey {
                        protocol: *protocol,
                        regime: *regime,
                        lambda: *lambda,
                        n: *n,
                    });
                }
            }
        }
    }

    let outcomes: Vec<Result<CellOutcome, FailureRow>> = keys
        .par_iter()
        .enumerate()
        .map(|(cell_id, key)| run_cell(grid, cell_id as u64, *key, ingested.as_ref()))
        .collect();

    let mut out = RunOutput::default();
    for entry in outcomes {
        match entry {
            Ok(cell) => {
                if let Some(log) = cell.feedback_log {
                    out.feedback_logs.push((cell.result.key, log));
                }
                out.cells.push(cell.result);
            }
            Err(failure) => {
                eprintln!(
                    "cell {}/{}/lambda={}/n={} failed: {}",
                    failure.key.protocol.as_str(),
                    failure.key.regime.as_str(),
                    failure.key.lambda,
                    failure.key.n,
                    failure.error
                );
                out.failures.push(failure);
            }
        }
    }
    Ok(out)
}

struct CellOutcome {
    result: CellResult,
    feedback_log: Option<Vec<rcs_core::feedback::FeedbackRecord>>,
}

struct TrialTally {
    delivered: usize,
    safe_delivered: usize,
    abstained: usize,
    latency_total: f64,
}

impl TrialTally {
    fn new() -> Self {
        Self {
            delivered: 0,
            safe_delivered: 0,
            abstained: 0,
            latency_total: 0.0,
        }
    }

    fn record(&mut self, outcome: &rcs_core::Outcome, labeled: &LabeledGroup64) {
        self.latency_total += outcome.latency_units;
        match outcome.delivered() {
            Some((_, origin, _)) => {
                self.delivered += 1;
                if labeled.truth_safe(origin) {
                    self.safe_delivered += 1;
                }
            }
            None => self.abstained += 1,
        }
    }
}

fn run_cell(
    grid: &ExperimentGrid,
    cell_id: u64,
    key: CellKey,
    ingested: Option<&(OutputSpace, Vec<Dist64>)>,
) -> Result<CellOutcome, FailureRow> {
    let fail = |e: String| FailureRow {
        key,
        error: e,
    };
    let scenario = ScenarioConfig::from_grid_point(
        key.regime,
        key.lambda,
        key.n,
        grid.adversary.strength,
        grid.base_seed,
        grid.trials_per_cell,
    )
    .map_err(|e| fail(e.to_string()))?;

    let (space, base_dists) = match ingested {
        Some((space, models)) => (space.clone(), models.clone()),
        None => (
            scenario::default_space(),
            scenario::default_base_dists(scenario.n - scenario.f_actual),
        ),
    };
    let spec = SafeModelSpec {
        base_dists,
        psi_floor: grid.adversary.psi_floor,
        jitter: grid.adversary.jitter,
    };

    let mut tally = TrialTally::new();
    let mut feedback_log = None;
    let feedback_accuracy = match key.protocol {
        ProtocolKind::Frcs => {
            let (accuracy, log) =
                run_frcs_cell(grid, cell_id, &scenario, &spec, &space, &mut tally)
                    .map_err(|e| fail(e.to_string()))?;
            feedback_log = Some(log);
            accuracy
        }
        _ => {
            for trial in 0..grid.trials_per_cell {
                let mut rng = trial_rng(
                    grid.base_seed,
                    derive_stream(&[cell_id, STREAM_TRIAL, trial as u64]),
                );
                let labeled = build_group(&scenario, &spec, &space, &mut rng)
                    .map_err(|e| fail(e.to_string()))?;
                let outcome = match key.protocol {
                    ProtocolKind::Cs => {
                        run_cs(&labeled.group, scenario.rounds, &grid.latency, &mut rng)
                    }
                    ProtocolKind::Rcs => {
                        run_rcs(&labeled.group, scenario.rounds, &grid.latency, &mut rng)
                    }
                    ProtocolKind::RcsCoin => {
                        run_rcs_coin(&labeled.group, scenario.rounds, &grid.latency, &mut rng)
                    }
                    ProtocolKind::Frcs => unreachable!(),
                };
                tally.record(&outcome, &labeled);
            }
            None
        }
    };

    // Risk diagnostics on a representative group from a dedicated stream.
    let mut risk_rng = trial_rng(grid.base_seed, derive_stream(&[cell_id, STREAM_RISK]));
    let representative = build_group(&scenario, &spec, &space, &mut risk_rng)
        .map_err(|e| fail(e.to_string()))?;
    let z: f64 = representative.group.overlap_z();
    if z == 0.0 {
        // Fully disjoint supports: the abstention baseline never delivers
        // and the negligibility argument is void. Proceed, but loudly.
        eprintln!(
            "warning: cell {}/{}/lambda={}/n={} has zero overlap (Z = 0)",
            key.protocol.as_str(),
            key.regime.as_str(),
            key.lambda,
            key.n
        );
    }
    let risk = risk_bound_report(
        &representative,
        scenario.rounds,
        grid.risk_trials,
        &mut risk_rng,
    );

    let trials = grid.trials_per_cell;
    Ok(CellOutcome {
        result: CellResult {
            key,
            rounds: scenario.rounds,
            s_declared: scenario.s_declared,
            f_actual: scenario.f_actual,
            trials,
            safe_rate: (tally.delivered > 0)
                .then(|| tally.safe_delivered as f64 / tally.delivered as f64),
            sr_over_all_trials: tally.safe_delivered as f64 / trials as f64,
            abstention_rate: tally.abstained as f64 / trials as f64,
            mean_latency_units: tally.latency_total / trials as f64,
            feedback_accuracy,
            risk,
        },
        feedback_log,
    })
}

/// Feedback cells run their trials as one sequence of task-class episodes:
/// the Byzantine position assignment is drawn once (model identities
/// persist across the sequence), distributions are redrawn each trial,
/// consecutive `episode_len` trials form one class of similar prompts, and
/// evaluation verdicts reach the registry `eval_delay` trials after
/// delivery.
fn run_frcs_cell(
    grid: &ExperimentGrid,
    cell_id: u64,
    scenario: &ScenarioConfig,
    spec: &SafeModelSpec<f64>,
    space: &OutputSpace,
    tally: &mut TrialTally,
) -> Result<(Option<f64>, Vec<rcs_core::feedback::FeedbackRecord>), rcs_core::CoreError> {
    let mut placement_rng = trial_rng(
        grid.base_seed,
        derive_stream(&[cell_id, STREAM_PLACEMENT]),
    );
    let placement = draw_placement(scenario.n, scenario.f_actual, &mut placement_rng);
    let mut registry = ExclusionRegistry::new();
    let mut pending: VecDeque<(usize, rcs_core::feedback::FeedbackRecord)> = VecDeque::new();
    let mut last_labeled: Option<LabeledGroup64> = None;
    let task_for = |trial: usize| {
        TaskClass::new(format!("cell-{cell_id}-ep-{}", trial / grid.episode_len.max(1)))
    };

    for trial in 0..grid.trials_per_cell {
        while pending
            .front()
            .is_some_and(|(t, _)| t + grid.eval_delay <= trial)
        {
            let (_, record) = pending.pop_front().expect("checked non-empty");
            let verdict = eval_oracle(record.y, space)?;
            // Keep the group usable: never exclude past the two-model floor.
            let would_shrink = verdict == Verdict::Unsafe
                && !registry.is_excluded(&record.task, record.phi_max);
            if !(would_shrink
                && registry.active_models(&record.task, scenario.n).len() <= 2)
            {
                registry.record_verdict(&record, verdict);
            }
        }

        let mut rng = trial_rng(
            grid.base_seed,
            derive_stream(&[cell_id, STREAM_TRIAL, trial as u64]),
        );
        let labeled = build_group_with_placement(scenario, spec, space, &placement, &mut rng)?;
        let (outcome, record) = frcs_run(
            &labeled.group,
            &task_for(trial),
            &mut registry,
            scenario.rounds,
            &grid.latency,
            &mut rng,
        )?;
        tally.record(&outcome, &labeled);
        pending.push_back((trial, record));
        last_labeled = Some(labeled);
    }

    let accuracy = last_labeled
        .as_ref()
        .and_then(|labeled| rcs_core::feedback::feedback_accuracy(&registry, labeled));
    Ok((accuracy, registry.history().to_vec()))
}

/// Per-regime metric means plus their overall average, the summary-table
/// layout: one block per protocol, columns per regime and AVG.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTriple {
    pub safe_rate: f64,
    pub abstention_rate: f64,
    pub latency: f64,
}

#[derive(Debug, Clone)]
pub struct ProtocolSummary {
    pub protocol: ProtocolKind,
    pub per_regime: Vec<(Regime, MetricTriple)>,
    pub avg: MetricTriple,
}

#[derive(Debug, Clone)]
pub struct AggregateTable {
    pub rows: Vec<ProtocolSummary>,
}

/// Mean metrics per `(protocol, regime)` and the cross-regime average.
/// Safe rate here is over all trials so abstention-heavy baselines are
/// penalized the way the comparison tables expect.
pub fn aggregate_table(results: &[CellResult]) -> Result<AggregateTable, crate::config::ConfigError> {
    if results.is_empty() {
        return Err(crate::config::ConfigError::Invalid(
            "no results to aggregate".into(),
        ));
    }
    let mut protocols: Vec<ProtocolKind> = Vec::new();
    let mut regimes: Vec<Regime> = Vec::new();
    for r in results {
        if !protocols.contains(&r.key.protocol) {
            protocols.push(r.key.protocol);
        }
        if !regimes.contains(&r.key.regime) {
            regimes.push(r.key.regime);
        }
    }

    let mut rows = Vec::new();
    for protocol in protocols {
        let mut per_regime = Vec::new();
        for regime in &regimes {
            let cells: Vec<&CellResult> = results
                .iter()
                .filter(|r| r.key.protocol == protocol && r.key.regime == *regime)
                .collect();
            if cells.is_empty() {
                continue;
            }
            let k = cells.len() as f64;
            per_regime.push((
                *regime,
                MetricTriple {
                    safe_rate: cells.iter().map(|c| c.sr_over_all_trials).sum::<f64>() / k,
                    abstention_rate: cells.iter().map(|c| c.abstention_rate).sum::<f64>() / k,
                    latency: cells.iter().map(|c| c.mean_latency_units).sum::<f64>() / k,
                },
            ));
        }
        let k = per_regime.len() as f64;
        let avg = MetricTriple {
            safe_rate: per_regime.iter().map(|(_, m)| m.safe_rate).sum::<f64>() / k,
            abstention_rate: per_regime
                .iter()
                .map(|(_, m)| m.abstention_rate)
                .sum::<f64>()
                / k,
            latency: per_regime.iter().map(|(_, m)| m.latency).sum::<f64>() / k,
        };
        rows.push(ProtocolSummary {
            protocol,
            per_regime,
            avg,
        });
    }
    Ok(AggregateTable { rows })
}

impl fmt::Display for AggregateTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            writeln!(f, "{}", row.protocol.as_str())?;
            write!(f, "  {:<16}", "metric")?;
            for (regime, _) in &row.per_regime {
                write!(f, "{:>16}", regime.as_str())?;
            }
            writeln!(f, "{:>16}", "AVG")?;

            type Getter = fn(&MetricTriple) -> f64;
            let lines: [(&str, Getter); 3] = [
                ("safe_rate %", |m| m.safe_rate * 100.0),
                ("abstention %", |m| m.abstention_rate * 100.0),
                ("latency units", |m| m.latency),
            ];
            for (name, get) in lines {
                write!(f, "  {name:<16}")?;
                for (_, m) in &row.per_regime {
                    write!(f, "{:>16.2}", get(m))?;
                }
                writeln!(f, "{:>16.2}", get(&row.avg))?;
            }
        }
        Ok(())
    }
}
