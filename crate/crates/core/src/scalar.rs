use std::fmt::Debug;
use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};

use num_traits::Num;

/// Double-double scalar (about 32 significant digits).
pub type Dd = qd::Quad;

/// Arithmetic needed by the tridiagonal pencil solver.
///
/// Only field operations, `abs` and `sqrt` are required, so extended
/// precision types without transcendental functions qualify.
pub trait Real:
    Num + Copy + PartialOrd + Debug + Neg<Output = Self> + AddAssign + SubAssign + MulAssign + DivAssign
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    /// Unit roundoff of the type.
    fn epsilon() -> Self;

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn epsilon() -> Self {
        f64::EPSILON
    }
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn abs(self) -> Self {
        f32::abs(self)
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn epsilon() -> Self {
        f32::EPSILON
    }
}

impl Real for Dd {
    fn from_f64(x: f64) -> Self {
        qd::Quad::from(x)
    }
    fn to_f64(self) -> f64 {
        self.0 + self.1
    }
    fn abs(self) -> Self {
        qd::Quad::abs(self)
    }
    fn sqrt(self) -> Self {
        qd::Quad::sqrt(self)
    }
    fn epsilon() -> Self {
        qd::Quad::EPSILON
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn third<T: Real>() -> T {
        T::one() / T::from_f64(3.0)
    }

    #[test]
    fn roundoff_levels() {
        let e64 = (third::<f64>() * 3.0 - 1.0).abs();
        assert!(e64 <= f64::EPSILON);
        let t: Dd = third::<Dd>();
        let edd = (t * Dd::from_f64(3.0) - <Dd as num_traits::One>::one()).abs().to_f64();
        assert!(edd < 1e-30, "{edd}");
        let s = Dd::from_f64(2.0).sqrt();
        assert!((s * s - Dd::from_f64(2.0)).abs().to_f64() < 1e-30);
    }

    #[test]
    fn conversions_keep_value() {
        assert_eq!(Dd::from_f64(0.1).to_f64(), 0.1);
        assert_eq!(<f32 as Real>::from_f64(0.5).to_f64(), 0.5);
        assert!(<Dd as Real>::epsilon() < Dd::from_f64(1e-30));
    }
}
