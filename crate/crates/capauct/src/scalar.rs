//! Scalar abstraction for the payment algebra.
//!
//! Everything the mechanism algebra needs is a signed ordered field: addition,
//! subtraction, multiplication, division, and comparisons. `f64`/`f32` satisfy
//! this, and so does `num_rational::Ratio<i64>`, which the exactness tests and
//! the worked-example reproductions use.

use num_traits::Signed;

/// An ordered signed field element. Blanket-implemented; do not implement
/// directly.
pub trait Scalar: Signed + PartialOrd + Clone {}

impl<T: Signed + PartialOrd + Clone> Scalar for T {}

/// `min` via `PartialOrd` (no `Ord` on floats).
pub fn smin<T: Scalar>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

/// `max` via `PartialOrd`.
pub fn smax<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// Capacitated utility of wealth `z`: `min(z, capacity)`. Negative wealth is
/// passed through unchanged (off-equilibrium losses are real).
pub fn capped<T: Scalar>(z: T, capacity: T) -> T {
    smin(z, capacity)
}

/// 1/2 in the field, for trapezoids.
pub fn half<T: Scalar>() -> T {
    T::one() / (T::one() + T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn capped_handles_negative_wealth() {
        assert_eq!(capped(-3.0, 2.0), -3.0);
        assert_eq!(capped(5.0, 2.0), 2.0);
        let q = |n, d| Ratio::new(n, d);
        assert_eq!(capped(q(7i64, 2), q(2, 1)), q(2, 1));
        assert_eq!(capped(q(-1i64, 3), q(2, 1)), q(-1, 3));
    }

    #[test]
    fn half_is_exact_for_rationals() {
        assert_eq!(half::<Ratio<i64>>(), Ratio::new(1, 2));
        assert_eq!(half::<f64>(), 0.5);
    }
}
