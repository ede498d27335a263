//! Feedback-optimized sampling: task-class-aware model exclusion driven by
//! delayed safety evaluations.
//!
//! Each delivery records which model assigned the response its highest
//! probability. When a later evaluation judges the response unsafe, that
//! model is excluded from subsequent runs for the same task class. The
//! feedback loop never alters a completed run: with an empty registry a
//! run is exactly a plain reliable-consensus-sampling run.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::group::{LabeledGroup, ModelGroup};
use crate::protocols::{run_rcs, LatencyModel, Outcome, RunResult};
use crate::scalar::Scalar;
use crate::space::OutputSpace;

/// Opaque label grouping prompts considered similar; exclusions apply per
/// class.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskClass(pub String);

impl TaskClass {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Safe,
    Unsafe,
}

/// One delivery's feedback data: the models most and least committed to
/// the delivered response, plus provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackRecord {
    /// Model (original group index) with maximal probability on `y`.
    pub phi_max: usize,
    /// Model with minimal probability on `y`; logged only, drives nothing.
    pub phi_min: usize,
    pub task: TaskClass,
    pub y: usize,
    /// Model whose mixture draw produced the delivered response.
    pub provenance: usize,
    /// Whether `phi_max` is also the producing model.
    pub self_entangled: bool,
    /// Logical counter assigned at append time.
    pub timestamp: u64,
}

/// Per-task-class exclusion sets plus the append-only delivery log.
/// Exclusion sets only grow; there is no un-exclusion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionRegistry {
    excluded: BTreeMap<TaskClass, BTreeSet<usize>>,
    history: Vec<FeedbackRecord>,
}

impl ExclusionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_excluded(&self, task: &TaskClass, model: usize) -> bool {
        self.excluded
            .get(task)
            .is_some_and(|set| set.contains(&model))
    }

    pub fn excluded_for(&self, task: &TaskClass) -> Option<&BTreeSet<usize>> {
        self.excluded.get(task)
    }

    pub fn excluded(&self) -> &BTreeMap<TaskClass, BTreeSet<usize>> {
        &self.excluded
    }

    pub fn history(&self) -> &[FeedbackRecord] {
        &self.history
    }

    /// Model indices still usable for `task` out of a group of `n`.
    pub fn active_models(&self, task: &TaskClass, n: usize) -> Vec<usize> {
        (0..n).filter(|i| !self.is_excluded(task, *i)).collect()
    }

    /// Total exclusions counted as a multiset over task classes.
    pub fn total_exclusions(&self) -> usize {
        self.excluded.values().map(|s| s.len()).sum()
    }

    fn next_timestamp(&self) -> u64 {
        self.history.len() as u64
    }

    fn append(&mut self, record: FeedbackRecord) {
        self.history.push(record);
    }

    /// Applies an evaluation verdict: an unsafe verdict excludes the
    /// record's `phi_max` for its task class, a safe verdict changes
    /// nothing. Re-excluding is an idempotent set insert.
    pub fn record_verdict(&mut self, record: &FeedbackRecord, verdict: Verdict) {
        if verdict == Verdict::Unsafe {
            self.excluded
                .entry(record.task.clone())
                .or_default()
                .insert(record.phi_max);
        }
    }
}

/// Ground-truth safety oracle of the simulation: a response is unsafe iff
/// it lies in the unsafe set. Deterministic; callers model evaluation
/// delay by deferring the call.
pub fn eval_oracle(y: usize, space: &OutputSpace) -> Result<Verdict> {
    space.check_index(y)?;
    Ok(if space.is_unsafe(y) {
        Verdict::Unsafe
    } else {
        Verdict::Safe
    })
}

/// One feedback-optimized run: filters the group by the registry for this
/// task class, runs reliable consensus sampling on the remainder, and logs
/// which model was most committed to the delivered response.
///
/// All indices in the outcome and the record refer to the original group.
/// Errors with `GroupExhausted` when exclusions leave fewer than two
/// models.
pub fn frcs_run<T: Scalar, R: Rng + ?Sized>(
    group: &ModelGroup<T>,
    task: &TaskClass,
    registry: &mut ExclusionRegistry,
    rounds: usize,
    latency: &LatencyModel,
    rng: &mut R,
) -> Result<(Outcome, FeedbackRecord)> {
    let active = registry.active_models(task, group.n());
    if active.len() < 2 {
        return Err(CoreError::GroupExhausted);
    }

    let outcome = if active.len() == group.n() {
        run_rcs(group, rounds, latency, rng)
    } else {
        let models = active.iter().map(|&i| group.model(i).clone()).collect();
        let sub = ModelGroup::new(
            group.space().clone(),
            models,
            group.s_declared().min(active.len()),
        )?;
        let sub_outcome = run_rcs(&sub, rounds, latency, rng);
        remap_origin(sub_outcome, &active)
    };

    let (y, provenance, _) = outcome.delivered().expect("rcs always delivers");
    let mut phi_max = active[0];
    let mut phi_min = active[0];
    for &i in &active[1..] {
        if group.model(i).prob(y) > group.model(phi_max).prob(y) {
            phi_max = i;
        }
        if group.model(i).prob(y) < group.model(phi_min).prob(y) {
            phi_min = i;
        }
    }
    let record = FeedbackRecord {
        phi_max,
        phi_min,
        task: task.clone(),
        y,
        provenance,
        self_entangled: phi_max == provenance,
        timestamp: registry.next_timestamp(),
    };
    registry.append(record.clone());
    Ok((outcome, record))
}

fn remap_origin(outcome: Outcome, active: &[usize]) -> Outcome {
    match outcome.result {
        RunResult::Delivered {
            y,
            origin,
            phase,
            rounds_used,
        } => Outcome {
            result: RunResult::Delivered {
                y,
                origin: active[origin],
                phase,
                rounds_used,
            },
            latency_units: outcome.latency_units,
        },
        RunResult::Abstain { .. } => outcome,
    }
}

/// Fraction of excluded models that are truly Byzantine, as a multiset
/// over task classes. `None` when nothing has been excluded (the ratio is
/// undefined, not zero).
pub fn feedback_accuracy<T: Scalar>(
    registry: &ExclusionRegistry,
    labeled: &LabeledGroup<T>,
) -> Option<f64> {
    let total = registry.total_exclusions();
    if total == 0 {
        return None;
    }
    let correct: usize = registry
        .excluded()
        .values()
        .map(|set| set.iter().filter(|&&i| !labeled.truth_safe(i)).count())
        .sum();
    Some(correct as f64 / total as f64)
}
