//! Scalar abstraction so the numerical core works for `f32` and `f64`.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point element type of grids, fields and curves.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Conversion from the `f64` the numerics accumulate in.
    fn of_f64(v: f64) -> Self;

    /// Widening conversion for accumulation.
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn of_f64(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of_f64(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_conversions() {
        assert_eq!(<f32 as Scalar>::of_f64(1.5), 1.5f32);
        assert_eq!(2.25f32.as_f64(), 2.25);
        assert_eq!(<f64 as Scalar>::of_f64(-0.125), -0.125);
    }
}
