//! Extraction of the named coefficient functions from the quadratic.
//!
//! The quadratic coefficients have the graded structure
//!
//! ```text
//! T2 = a2(t) - D1
//! T1 = t^-2 T^-2 (b1(t) + a1(t) D1)
//! T0 = t^-5 T^-4 c2(t) + t^-4 T^-2 c0(t) D + t^-3 T^-2 c1(t) D1 + t^-2 P
//! P  = d1 t^-2 D1 D^2 + d2 t^-1 D1 D + d3 t^-2 D^2
//!      + D1^2 (q1 + q2 t^-1 D + q3 t^-2 D^2 + q4 D1 + q5 t^-1 D D1 + q6 D1^2)
//! ```
//!
//! where every named function is bounded as `t -> infinity` in the closed
//! sector (no positive powers of `t` in normal form). This module peels the
//! quadratic apart into that table and checks boundedness and the exact
//! leading constants
//!
//! ```text
//! a2 -> n1^2,   c1 -> 8 n1^4 C (2 n1 + 1),   c0 -> -8 n1^4 C (2 n1 + 1).
//! ```

use super::poly::{DiffPoly, NVARS, VBIGT, VC, VN1, VT};
use super::ratfn::RatFn;
use super::subst::QuadraticInD2;
use std::fmt;

/// Errors from coefficient extraction.
#[derive(Debug)]
pub enum ExtractError {
    /// A slot has an unexpected dependence on the state variables.
    UnexpectedStateMonomial { slot: &'static str, term: String },
    /// A slot fails boundedness at infinity.
    Unbounded { slot: &'static str, term: String },
}

impl fmt::Display for ExtractError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtractError::UnexpectedStateMonomial { slot, term } => {
                write!(f, "slot {} contains unexpected monomial {}", slot, term)
            }
            ExtractError::Unbounded { slot, term } => {
                write!(f, "slot {} is unbounded at infinity: {}", slot, term)
            }
        }
    }
}

impl std::error::Error for ExtractError {}

/// The extracted coefficient functions. All entries are exact polynomials in
/// `(t^-1, T^-1, C, n1, n3, n4)` over `(t-1)` denominators; `ctilde4..6` are
/// exact ratios since they divide by `b1`.
pub struct CoefficientTable {
    pub a1: DiffPoly,
    pub b1: DiffPoly,
    pub a2: DiffPoly,
    pub c0: DiffPoly,
    pub c1: DiffPoly,
    pub c2: DiffPoly,
    /// `ctilde4 = c2 / b1`, the limit coefficient of the driving term
    /// `F0 = ctilde4 t^-3 T^-2`.
    pub ctilde4: RatFn,
    /// `ctilde5 = t (c0 / b1 + 2 n1)`, the subleading linear-in-D weight.
    pub ctilde5: RatFn,
    /// `ctilde6 = t (c1 / b1 - 2 n1) - a1 c2 / (b1^2 t T^2)`.
    pub ctilde6: RatFn,
    pub d1: DiffPoly,
    pub d2: DiffPoly,
    pub d3: DiffPoly,
    pub q1: DiffPoly,
    pub q2: DiffPoly,
    pub q3: DiffPoly,
    pub q4: DiffPoly,
    pub q5: DiffPoly,
    pub q6: DiffPoly,
}

fn shift_t_bigt(p: &DiffPoly, dt: i16, dbigt: i16) -> DiffPoly {
    let mut s = [0i16; NVARS];
    s[VT] = dt;
    s[VBIGT] = dbigt;
    p.shift(s)
}

fn check_slot(slot: &'static str, p: &DiffPoly) -> Result<(), ExtractError> {
    if let Some(term) = p.unbounded_monomial() {
        return Err(ExtractError::Unbounded { slot, term });
    }
    Ok(())
}

/// Expected leading constant `n1^2`.
pub fn lead_a2() -> DiffPoly {
    let mut e = [0i16; NVARS];
    e[VN1] = 2;
    DiffPoly::monomial(num::BigRational::from_integer(1.into()), e)
}

/// Expected leading constant `8 n1^4 C (2 n1 + 1)`.
pub fn lead_c1() -> DiffPoly {
    let mut e1 = [0i16; NVARS];
    e1[VN1] = 4;
    e1[VC] = 1;
    let mut e2 = e1;
    e2[VN1] = 5;
    DiffPoly::monomial(num::BigRational::from_integer(8.into()), e1).add(&DiffPoly::monomial(
        num::BigRational::from_integer(16.into()),
        e2,
    ))
}

/// Expected leading constant `-8 n1^4 C (2 n1 + 1)`.
pub fn lead_c0() -> DiffPoly {
    lead_c1().neg()
}

/// Peel the quadratic into the coefficient table.
pub fn extract_coefficients(q: &QuadraticInD2) -> Result<CoefficientTable, ExtractError> {
    // a2 = T2 + D1. T2 must be D1-linear with unit slope and free of D, D2.
    let a2 = q.t2.add(&DiffPoly::var(super::poly::VD1, 1));
    for (e, _) in a2.iter_terms() {
        if e[super::poly::VD] != 0 || e[super::poly::VD1] != 0 || e[super::poly::VD2] != 0 {
            return Err(ExtractError::UnexpectedStateMonomial {
                slot: "a2",
                term: a2.terms_strings().join(" + "),
            });
        }
    }
    check_slot("a2", &a2)?;

    // T1 = t^-2 T^-2 (b1 + a1 D1)
    let t1_const = q.t1.coeff_of_state(0, 0, 0);
    let t1_d1 = q.t1.coeff_of_state(0, 1, 0);
    let residual: usize = q
        .t1
        .state_support()
        .iter()
        .filter(|s| **s != (0, 0, 0) && **s != (0, 1, 0))
        .count();
    if residual != 0 {
        return Err(ExtractError::UnexpectedStateMonomial {
            slot: "T1",
            term: format!("{:?}", q.t1.state_support()),
        });
    }
    let b1 = shift_t_bigt(&t1_const, 2, 2);
    let a1 = shift_t_bigt(&t1_d1, 2, 2);
    check_slot("b1", &b1)?;
    check_slot("a1", &a1)?;

    // T0 slots by (D, D1) degree.
    let grab = |e_d: i16, e_d1: i16, dt: i16, dbigt: i16| -> DiffPoly {
        shift_t_bigt(&q.t0.coeff_of_state(e_d, e_d1, 0), dt, dbigt)
    };
    let c2 = grab(0, 0, 5, 4);
    let c0 = grab(1, 0, 4, 2);
    let c1 = grab(0, 1, 3, 2);
    let d1 = grab(2, 1, 4, 0);
    let d2 = grab(1, 1, 3, 0);
    let d3 = grab(2, 0, 4, 0);
    let q1 = grab(0, 2, 2, 0);
    let q2 = grab(1, 2, 3, 0);
    let q3 = grab(2, 2, 4, 0);
    let q4 = grab(0, 3, 2, 0);
    let q5 = grab(1, 3, 3, 0);
    let q6 = grab(0, 4, 2, 0);

    // No other state powers may appear in T0.
    let allowed = [
        (0, 0, 0),
        (1, 0, 0),
        (0, 1, 0),
        (2, 1, 0),
        (1, 1, 0),
        (2, 0, 0),
        (0, 2, 0),
        (1, 2, 0),
        (2, 2, 0),
        (0, 3, 0),
        (1, 3, 0),
        (0, 4, 0),
    ];
    for s in q.t0.state_support() {
        if !allowed.contains(&s) {
            return Err(ExtractError::UnexpectedStateMonomial {
                slot: "T0",
                term: format!("state powers {:?}", s),
            });
        }
    }

    let named: [(&'static str, &DiffPoly); 12] = [
        ("c2", &c2),
        ("c0", &c0),
        ("c1", &c1),
        ("d1", &d1),
        ("d2", &d2),
        ("d3", &d3),
        ("q1", &q1),
        ("q2", &q2),
        ("q3", &q3),
        ("q4", &q4),
        ("q5", &q5),
        ("q6", &q6),
    ];
    for (slot, p) in named {
        check_slot(slot, p)?;
    }

    // Derived ratios.
    let two_n1 = DiffPoly::var(VN1, 1).scale_int(2);
    let t_var = DiffPoly::var(VT, 1);
    let ctilde4 = RatFn::new(c2.clone(), b1.clone());
    let ctilde5 = RatFn::new(t_var.mul(&c0.add(&two_n1.mul(&b1))), b1.clone());
    // ctilde6 = t (c1 - 2 n1 b1)/b1 - a1 c2 / (b1^2 t T^2)
    let mut e_t_t2 = [0i16; NVARS];
    e_t_t2[VT] = 1;
    e_t_t2[VBIGT] = 2;
    let t_t2 = DiffPoly::monomial(num::BigRational::from_integer(1.into()), e_t_t2);
    let ctilde6 = RatFn::new(
        t_var
            .mul(&c1.sub(&two_n1.mul(&b1)))
            .mul(&b1)
            .mul(&t_t2)
            .sub(&a1.mul(&c2).mul(&t_var)),
        b1.mul(&b1).mul(&t_t2).mul(&t_var),
    );

    Ok(CoefficientTable {
        a1,
        b1,
        a2,
        c0,
        c1,
        c2,
        ctilde4,
        ctilde5,
        ctilde6,
        d1,
        d2,
        d3,
        q1,
        q2,
        q3,
        q4,
        q5,
        q6,
    })
}
