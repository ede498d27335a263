//! Finite output space partitioned into safe and unsafe responses.

use std::collections::BTreeSet;

use crate::error::{CoreError, Result};

/// Indexed finite set of distinct responses, split into a safe set and its
/// unsafe complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputSpace {
    size: usize,
    unsafe_set: BTreeSet<usize>,
}

impl OutputSpace {
    /// Builds a space of `size` responses where `unsafe_indices` are the
    /// unsafe ones; every other index is safe.
    pub fn new(size: usize, unsafe_indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        if size == 0 {
            return Err(CoreError::InvalidArgument(
                "output space must be non-empty".into(),
            ));
        }
        let mut unsafe_set = BTreeSet::new();
        for idx in unsafe_indices {
            if idx >= size {
                return Err(CoreError::IndexOutOfSpace { index: idx, size });
            }
            if !unsafe_set.insert(idx) {
                return Err(CoreError::BadPartition);
            }
        }
        Ok(Self { size, unsafe_set })
    }

    pub fn all_safe(size: usize) -> Self {
        Self {
            size,
            unsafe_set: BTreeSet::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, y: usize) -> bool {
        y < self.size
    }

    pub fn check_index(&self, y: usize) -> Result<()> {
        if self.contains(y) {
            Ok(())
        } else {
            Err(CoreError::IndexOutOfSpace {
                index: y,
                size: self.size,
            })
        }
    }

    pub fn is_unsafe(&self, y: usize) -> bool {
        self.unsafe_set.contains(&y)
    }

    pub fn unsafe_set(&self) -> &BTreeSet<usize> {
        &self.unsafe_set
    }

    pub fn safe_iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.size).filter(move |y| !self.unsafe_set.contains(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_covers_space() {
        let space = OutputSpace::new(5, [3, 4]).unwrap();
        let safe: Vec<usize> = space.safe_iter().collect();
        assert_eq!(safe, vec![0, 1, 2]);
        assert!(space.is_unsafe(4));
        assert!(!space.is_unsafe(0));
    }

    #[test]
    fn rejects_out_of_range_unsafe_index() {
        let err = OutputSpace::new(3, [3]).unwrap_err();
        assert_eq!(err, CoreError::IndexOutOfSpace { index: 3, size: 3 });
    }

    #[test]
    fn rejects_duplicate_unsafe_index() {
        let err = OutputSpace::new(3, [1, 1]).unwrap_err();
        assert_eq!(err, CoreError::BadPartition);
    }
}
