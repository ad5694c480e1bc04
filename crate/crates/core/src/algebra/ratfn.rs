//! Minimal exact rational functions over [`DiffPoly`].
//!
//! No gcd reduction is attempted: equality is decided by cross
//! multiplication, which is all the identity checks need. Denominators stay
//! small (products of a handful of extracted coefficient polynomials), so
//! the lack of cancellation is harmless.

use super::poly::{DiffPoly, VarVals};
use num::complex::Complex64;

#[derive(Clone, Debug)]
pub struct RatFn {
    pub num: DiffPoly,
    pub den: DiffPoly,
}

impl RatFn {
    pub fn from_poly(p: DiffPoly) -> Self {
        RatFn {
            num: p,
            den: DiffPoly::one(),
        }
    }

    pub fn new(num: DiffPoly, den: DiffPoly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        RatFn { num, den }
    }

    pub fn zero() -> Self {
        Self::from_poly(DiffPoly::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn neg(&self) -> Self {
        RatFn {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        RatFn {
            num: self
                .num
                .mul(&other.den)
                .add(&other.num.mul(&self.den)),
            den: self.den.mul(&other.den),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        RatFn {
            num: self.num.mul(&other.num),
            den: self.den.mul(&other.den),
        }
    }

    pub fn div(&self, other: &Self) -> Self {
        assert!(!other.num.is_zero(), "division by zero rational function");
        RatFn {
            num: self.num.mul(&other.den),
            den: self.den.mul(&other.num),
        }
    }

    pub fn scale_int(&self, k: i64) -> Self {
        RatFn {
            num: self.num.scale_int(k),
            den: self.den.clone(),
        }
    }

    /// Exact equality by cross multiplication.
    pub fn equals(&self, other: &Self) -> bool {
        self.num
            .mul(&other.den)
            .sub(&other.num.mul(&self.den))
            .is_zero()
    }

    /// `self - other` brought over a common denominator; the numerator is
    /// the exact residual (zero iff equal).
    pub fn residual_numerator(&self, other: &Self) -> DiffPoly {
        self.num
            .mul(&other.den)
            .sub(&other.num.mul(&self.den))
    }

    /// Floating-point instantiation at the given variable values.
    pub fn eval(&self, v: &VarVals) -> Complex64 {
        self.num.eval(v) / self.den.eval(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::poly::{VD1, VT};

    #[test]
    fn partial_fraction_identity() {
        // 1/(b + a x) = 1/b - a x / (b (b + a x)) with x = D1, a = t, b = t+1
        let x = DiffPoly::var(VD1, 1);
        let a = DiffPoly::var(VT, 1);
        let b = DiffPoly::var(VT, 1).add(&DiffPoly::one());
        let den = b.add(&a.mul(&x));
        let lhs = RatFn::new(DiffPoly::one(), den.clone());
        let rhs = RatFn::new(DiffPoly::one(), b.clone()).sub(&RatFn::new(
            a.mul(&x),
            b.mul(&den),
        ));
        assert!(lhs.equals(&rhs));
        assert!(lhs.residual_numerator(&rhs).is_zero());
    }
}
