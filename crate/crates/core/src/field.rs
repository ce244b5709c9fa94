//! Exact field arithmetic used by the secret-sharing layer.
//!
//! The LSSS compiler and reconstruction solver are written against [`Field`]
//! so they run unchanged over the pairing group's exponent field
//! ([`Scalar`](crate::Scalar)) and over exact rationals, which the test suite
//! uses as an independent check of the modular solver.

use std::fmt::Debug;
use std::ops::{Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// A commutative field with exact equality.
pub trait Field: Clone + Debug + PartialEq + Zero + One + Neg<Output = Self> + Sub<Output = Self> {
    /// Multiplicative inverse; `None` exactly for zero.
    fn inverse(&self) -> Option<Self>;

    fn from_i64(v: i64) -> Self;
}

impl Field for BigRational {
    fn inverse(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(self.recip())
        }
    }

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
}
