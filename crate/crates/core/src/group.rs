//! The model group and its per-response statistics.

use rand::Rng;

use crate::dist::FiniteDistribution;
use crate::error::{CoreError, Result};
use crate::scalar::{sum, Scalar};
use crate::space::OutputSpace;

/// Ground-truth role of a model, simulation metadata only.
///
/// Protocols never see labels: they operate on [`ModelGroup`], which does
/// not carry them. Labels live in [`LabeledGroup`], consumed by the
/// adversary generators, the analysis module, and the harness metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelLabel {
    Safe,
    Byzantine,
}

/// `n` output distributions over one space plus the declared parameter `s`.
///
/// `s_declared` is the protocol's belief about how many models are safe; it
/// need not match any ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGroup<T> {
    space: OutputSpace,
    models: Vec<FiniteDistribution<T>>,
    s_declared: usize,
}

/// Acceptance ratio at one response, with the sorted per-model
/// probabilities it was computed from.
///
/// The sorted vector is kept because the trace phase reuses the largest
/// `n - s` entries; callers should not recompute it.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaStats<T> {
    pub value: T,
    pub sorted: Vec<T>,
}

/// One draw from the uniform mixture: the response and the model that
/// produced it. The origin is provenance metadata for metrics; acceptance
/// logic never reads it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixtureDraw {
    pub y: usize,
    pub origin: usize,
}

impl<T: Scalar> ModelGroup<T> {
    pub fn new(
        space: OutputSpace,
        models: Vec<FiniteDistribution<T>>,
        s_declared: usize,
    ) -> Result<Self> {
        if models.is_empty() {
            return Err(CoreError::InvalidArgument("group needs models".into()));
        }
        if s_declared == 0 || s_declared > models.len() {
            return Err(CoreError::InvalidArgument(format!(
                "s_declared must lie in 1..={}, got {}",
                models.len(),
                s_declared
            )));
        }
        for m in &models {
            if m.len() != space.size() {
                return Err(CoreError::InvalidArgument(format!(
                    "model has {} entries, space has {}",
                    m.len(),
                    space.size()
                )));
            }
            FiniteDistribution::validate(m.probs())?;
        }
        Ok(Self {
            space,
            models,
            s_declared,
        })
    }

    pub fn n(&self) -> usize {
        self.models.len()
    }

    pub fn s_declared(&self) -> usize {
        self.s_declared
    }

    pub fn space(&self) -> &OutputSpace {
        &self.space
    }

    pub fn models(&self) -> &[FiniteDistribution<T>] {
        &self.models
    }

    pub fn model(&self, i: usize) -> &FiniteDistribution<T> {
        &self.models[i]
    }

    /// Per-model probabilities at `y`, sorted ascending.
    ///
    /// Ties keep model order (stable sort), so the result is deterministic.
    pub fn order_stats_at(&self, y: usize) -> Result<Vec<T>> {
        self.space.check_index(y)?;
        let mut stats: Vec<T> = self.models.iter().map(|m| m.prob(y).clone()).collect();
        stats.sort_by(|a, b| a.partial_cmp(b).expect("probabilities are comparable"));
        Ok(stats)
    }

    /// Mixture probability `(1/n) * sum_i p_i(y)`.
    pub fn mixture_mass_at(&self, y: usize) -> Result<T> {
        self.space.check_index(y)?;
        let total = sum(self.models.iter().map(|m| m.prob(y)));
        Ok(total / T::from_count(self.n()))
    }

    /// Acceptance ratio: mean of the `s` smallest probabilities at `y` over
    /// the mean of all `n`, computed as `(low * n) / (total * s)` so exact
    /// inputs give exact ratios.
    pub fn sigma_at(&self, y: usize) -> Result<SigmaStats<T>> {
        let sorted = self.order_stats_at(y)?;
        let total = sum(&sorted);
        if total <= T::zero() {
            return Err(CoreError::ZeroMixtureMass);
        }
        let low = sum(&sorted[..self.s_declared]);
        let value = (low * T::from_count(self.n())) / (total * T::from_count(self.s_declared));
        Ok(SigmaStats { value, sorted })
    }

    /// Overlap statistic `Z = sum_y (1/s) sum_{i<=s} p_(i)(y)`, the group's
    /// degree of consensus. Zero only for fully disjoint supports.
    pub fn overlap_z(&self) -> T {
        let mut acc = T::zero();
        for y in 0..self.space.size() {
            let sorted = self.order_stats_at(y).expect("y in space");
            acc = acc + sum(&sorted[..self.s_declared]);
        }
        acc / T::from_count(self.s_declared)
    }

    /// Samples `y` from the uniform mixture: picks a model uniformly, then
    /// draws from it by inverse CDF.
    ///
    /// Consumes exactly two `f64` variates from `rng`, in that order; this
    /// ordering is part of the reproducibility contract.
    pub fn mixture_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> MixtureDraw {
        let u_model: f64 = rng.gen();
        let origin = ((u_model * self.n() as f64) as usize).min(self.n() - 1);
        let u_draw: f64 = rng.gen();
        let y = self.models[origin].sample_index(&T::from_float(u_draw));
        MixtureDraw { y, origin }
    }
}

/// A model group plus ground-truth labels and everything downstream of them.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGroup<T> {
    pub group: ModelGroup<T>,
    pub labels: Vec<ModelLabel>,
}

impl<T: Scalar> LabeledGroup<T> {
    pub fn new(group: ModelGroup<T>, labels: Vec<ModelLabel>) -> Result<Self> {
        if labels.len() != group.n() {
            return Err(CoreError::InvalidArgument(
                "one label per model required".into(),
            ));
        }
        Ok(Self { group, labels })
    }

    pub fn truth_safe(&self, i: usize) -> bool {
        self.labels[i] == ModelLabel::Safe
    }

    pub fn safe_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == ModelLabel::Safe).count()
    }

    pub fn byzantine_count(&self) -> usize {
        self.labels.len() - self.safe_count()
    }
}
