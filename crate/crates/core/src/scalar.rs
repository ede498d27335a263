//! Scalar abstraction for probability arithmetic.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Field the probability computations are carried out in.
///
/// `f32`/`f64` cover simulation; `num_rational::BigRational` gives exact
/// arithmetic for the enumeration oracle. Anything satisfying the bounds
/// works.
pub trait Scalar: Num + FromPrimitive + ToPrimitive + PartialOrd + Clone + Debug {
    /// `self^exp` by repeated multiplication, exact for rational scalars.
    fn powi(&self, exp: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..exp {
            acc = acc * self.clone();
        }
        acc
    }

    /// |self - other| without requiring `Signed`.
    fn abs_diff(&self, other: &Self) -> Self {
        if self >= other {
            self.clone() - other.clone()
        } else {
            other.clone() - self.clone()
        }
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn from_float(x: f64) -> Self {
        Self::from_f64(x).expect("f64 representable in scalar type")
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Scalar for T where T: Num + FromPrimitive + ToPrimitive + PartialOrd + Clone + Debug {}

/// Sum a sequence of scalars by reference.
pub fn sum<'a, T: Scalar + 'a>(items: impl IntoIterator<Item = &'a T>) -> T {
    items
        .into_iter()
        .fold(T::zero(), |acc, x| acc + x.clone())
}
