//! Probability vectors over a finite output space.

use crate::error::{CoreError, Result};
use crate::scalar::{sum, Scalar};
use crate::space::OutputSpace;
use crate::PROB_TOL;

/// A probability distribution over responses `0..size`.
///
/// Entries are non-negative and sum to 1 within [`PROB_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution<T> {
    probs: Vec<T>,
}

impl<T: Scalar> FiniteDistribution<T> {
    /// Validates and wraps a probability vector.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        Self::validate(&probs)?;
        Ok(Self { probs })
    }

    /// Checks the distribution invariants: every entry non-negative and the
    /// total within [`PROB_TOL`] of 1.
    pub fn validate(probs: &[T]) -> Result<()> {
        if probs.is_empty() {
            return Err(CoreError::InvalidArgument(
                "distribution must be non-empty".into(),
            ));
        }
        for (index, p) in probs.iter().enumerate() {
            if *p < T::zero() {
                return Err(CoreError::NegativeMass {
                    index,
                    value: p.as_f64(),
                });
            }
        }
        let total = sum(probs);
        if total.abs_diff(&T::one()) > T::from_float(PROB_TOL) {
            return Err(CoreError::NotNormalized {
                sum: total.as_f64(),
                tolerance: PROB_TOL,
            });
        }
        Ok(())
    }

    /// Point mass on `index`.
    pub fn point(size: usize, index: usize) -> Self {
        assert!(index < size, "point mass index out of range");
        let mut probs = vec![T::zero(); size];
        probs[index] = T::one();
        Self { probs }
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0);
        let p = T::one() / T::from_count(size);
        Self {
            probs: vec![p; size],
        }
    }

    /// Divides through by the current total. Panics on zero total.
    pub fn renormalized(mut self) -> Self {
        let total = sum(&self.probs);
        assert!(total > T::zero(), "cannot renormalize zero mass");
        for p in &mut self.probs {
            *p = p.clone() / total.clone();
        }
        self
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, y: usize) -> &T {
        &self.probs[y]
    }

    /// Total mass on an index subset. Errors if any index is outside the
    /// distribution's space.
    pub fn cumulative_mass(&self, subset: impl IntoIterator<Item = usize>) -> Result<T> {
        let mut acc = T::zero();
        for y in subset {
            if y >= self.probs.len() {
                return Err(CoreError::IndexOutOfSpace {
                    index: y,
                    size: self.probs.len(),
                });
            }
            acc = acc + self.probs[y].clone();
        }
        Ok(acc)
    }

    /// Mass on the unsafe part of `space`.
    pub fn unsafe_mass(&self, space: &OutputSpace) -> T {
        self.cumulative_mass(space.unsafe_set().iter().copied())
            .expect("space matches distribution length")
    }

    /// Total variation distance to another distribution of the same length.
    pub fn tv_distance(&self, other: &Self) -> T {
        assert_eq!(self.len(), other.len());
        let two = T::from_count(2);
        let mut acc = T::zero();
        for (a, b) in self.probs.iter().zip(other.probs.iter()) {
            acc = acc + a.abs_diff(b);
        }
        acc / two
    }

    /// Inverse-CDF draw: walks the cumulative vector until it exceeds `u`.
    ///
    /// `u` must lie in [0, 1). If rounding leaves the cumulative total just
    /// under `u`, the last index with positive mass is returned so a draw
    /// never lands outside the support.
    pub fn sample_index(&self, u: &T) -> usize {
        let mut cum = T::zero();
        let mut last_positive = 0;
        for (y, p) in self.probs.iter().enumerate() {
            if *p > T::zero() {
                last_positive = y;
            }
            cum = cum + p.clone();
            // The first index where u < cum necessarily carries positive mass.
            if *u < cum {
                return y;
            }
        }
        last_positive
    }
}
