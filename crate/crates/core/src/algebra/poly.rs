//! Exact sparse polynomials in the differential variables.
//!
//! A [`DiffPoly`] is a finite sum of monomials
//!
//! ```text
//! coeff * t^a * T^b * D^e * D1^f * D2^g * C^h * n1^i * n3^j * n4^k
//! ```
//!
//! divided by a common power of `(t - 1)`, with exact rational coefficients.
//! Here `T` stands for `t^{n1}` (so only nonpositive even powers of `T`
//! appear in normalised results), `D`, `D1`, `D2` are the remainder and its
//! first two derivatives, `C` is the asymptotic constant and `n1`, `n3`,
//! `n4` are the equation parameters. Positive powers of `(t - 1)` are always
//! expanded, so the stored `(t - 1)` exponent is a denominator power only.
//!
//! Arithmetic rescales operands to a common denominator power and reduces
//! results to a canonical form (no spurious `(t - 1)` factors), so structural
//! equality of the term maps is semantic equality.

use crate::Cplx;
use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// Number of formal variables.
pub const NVARS: usize = 9;

/// Variable indices into an exponent vector.
pub const VT: usize = 0;
pub const VBIGT: usize = 1;
pub const VD: usize = 2;
pub const VD1: usize = 3;
pub const VD2: usize = 4;
pub const VC: usize = 5;
pub const VN1: usize = 6;
pub const VN3: usize = 7;
pub const VN4: usize = 8;

pub const VAR_NAMES: [&str; NVARS] = ["t", "T", "D", "D1", "D2", "C", "n1", "n3", "n4"];

/// Exponent vector of one monomial, ordered as [`VAR_NAMES`].
pub type Expo = [i16; NVARS];

/// Numeric values for the formal variables, for floating-point instantiation.
///
/// `big_t` is supplied independently of `t`; identities verified at the
/// polynomial level hold for unrelated values as well, which makes random
/// instantiation a stronger cross-check. Callers modelling the actual ray
/// set `big_t = t^{n1}` on the pinned branch.
#[derive(Debug, Clone, Copy)]
pub struct VarVals {
    pub t: Cplx,
    pub big_t: Cplx,
    pub d: Cplx,
    pub d1: Cplx,
    pub d2: Cplx,
    pub c: Cplx,
    pub n1: Cplx,
    pub n3: Cplx,
    pub n4: Cplx,
}

impl VarVals {
    fn get(&self, var: usize) -> Cplx {
        match var {
            VT => self.t,
            VBIGT => self.big_t,
            VD => self.d,
            VD1 => self.d1,
            VD2 => self.d2,
            VC => self.c,
            VN1 => self.n1,
            VN3 => self.n3,
            VN4 => self.n4,
            _ => unreachable!(),
        }
    }
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact sparse polynomial over the differential variables, divided by
/// `(t - 1)^tm1`.
#[derive(Clone, PartialEq, Eq)]
pub struct DiffPoly {
    tm1: u32,
    terms: BTreeMap<Expo, BigRational>,
}

impl DiffPoly {
    pub fn zero() -> Self {
        DiffPoly {
            tm1: 0,
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Self::constant(rat(1))
    }

    pub fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert([0i16; NVARS], c);
        }
        DiffPoly { tm1: 0, terms }
    }

    pub fn int(n: i64) -> Self {
        Self::constant(rat(n))
    }

    /// Single variable to the given power.
    pub fn var(var: usize, power: i16) -> Self {
        let mut e = [0i16; NVARS];
        e[var] = power;
        Self::monomial(rat(1), e)
    }

    pub fn monomial(c: BigRational, e: Expo) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(e, c);
        }
        DiffPoly { tm1: 0, terms }
    }

    /// Monomial together with a signed `(t-1)` exponent (negative values are
    /// denominator powers, positive values are expanded).
    pub fn monomial_tm1(c: BigRational, e: Expo, e_tm1: i32) -> Self {
        let base = Self::monomial(c, e);
        if e_tm1 >= 0 {
            base.mul(&Self::t_minus_1().pow(e_tm1 as u32))
        } else {
            let mut p = base;
            p.tm1 = (-e_tm1) as u32;
            p.reduce();
            p
        }
    }

    /// The polynomial `t - 1`.
    pub fn t_minus_1() -> Self {
        Self::var(VT, 1).sub(&Self::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Denominator power of `(t - 1)` in canonical form.
    pub fn tm1_power(&self) -> u32 {
        self.tm1
    }

    pub fn iter_terms(&self) -> impl Iterator<Item = (&Expo, &BigRational)> {
        self.terms.iter()
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = -v.clone();
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= c;
        }
        out
    }

    pub fn scale_int(&self, n: i64) -> Self {
        self.scale(&rat(n))
    }

    pub fn add(&self, other: &Self) -> Self {
        let tm1 = self.tm1.max(other.tm1);
        let mut out = self.raise_tm1(tm1);
        for (e, c) in other.raise_tm1(tm1).terms {
            let entry = out.terms.entry(e).or_insert_with(BigRational::zero);
            *entry += c;
            if entry.is_zero() {
                out.terms.remove(&e);
            }
        }
        out.reduce();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms: BTreeMap<Expo, BigRational> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let mut e = *ea;
                for k in 0..NVARS {
                    e[k] += eb[k];
                }
                let c = ca * cb;
                let entry = terms.entry(e).or_insert_with(BigRational::zero);
                *entry += c;
                if entry.is_zero() {
                    terms.remove(&e);
                }
            }
        }
        let mut out = DiffPoly {
            tm1: self.tm1 + other.tm1,
            terms,
        };
        out.reduce();
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Multiply by the monomial with exponent vector `shift` (entries may be
    /// negative).
    pub fn shift(&self, shift: Expo) -> Self {
        let mut out = self.clone();
        let mut terms = BTreeMap::new();
        for (e, c) in out.terms {
            let mut ne = e;
            for k in 0..NVARS {
                ne[k] += shift[k];
            }
            terms.insert(ne, c);
        }
        out.terms = terms;
        out
    }

    /// Divide by `(t-1)^k`, i.e. raise the cleared denominator power.
    pub fn div_tm1(&self, k: u32) -> Self {
        let mut out = self.clone();
        out.tm1 += k;
        out.reduce();
        out
    }

    /// Rescale the representation to denominator power `tm1 >= self.tm1`
    /// without changing the value.
    fn raise_tm1(&self, tm1: u32) -> Self {
        assert!(tm1 >= self.tm1);
        if tm1 == self.tm1 {
            return self.clone();
        }
        let factor = Self::t_minus_1().pow(tm1 - self.tm1);
        let mut prod = self.mul_no_reduce(&factor);
        prod.tm1 = tm1;
        prod
    }

    fn mul_no_reduce(&self, other: &Self) -> Self {
        let mut terms: BTreeMap<Expo, BigRational> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let mut e = *ea;
                for k in 0..NVARS {
                    e[k] += eb[k];
                }
                let c = ca * cb;
                let entry = terms.entry(e).or_insert_with(BigRational::zero);
                *entry += c;
                if entry.is_zero() {
                    terms.remove(&e);
                }
            }
        }
        DiffPoly {
            tm1: self.tm1 + other.tm1,
            terms,
        }
    }

    /// Canonicalise: strip `(t-1)` factors common to numerator and
    /// denominator.
    fn reduce(&mut self) {
        if self.terms.is_empty() {
            self.tm1 = 0;
            return;
        }
        while self.tm1 > 0 {
            match self.try_divide_tm1() {
                Some(q) => {
                    self.terms = q;
                    self.tm1 -= 1;
                }
                None => break,
            }
        }
    }

    /// Attempt exact division of the numerator by `(t - 1)`; `None` if not
    /// divisible.
    fn try_divide_tm1(&self) -> Option<BTreeMap<Expo, BigRational>> {
        // Group monomials into univariate Laurent polynomials in t.
        let mut groups: BTreeMap<Expo, BTreeMap<i16, BigRational>> = BTreeMap::new();
        for (e, c) in &self.terms {
            let mut key = *e;
            let et = key[VT];
            key[VT] = 0;
            groups.entry(key).or_default().insert(et, c.clone());
        }
        let mut out: BTreeMap<Expo, BigRational> = BTreeMap::new();
        for (key, uni) in groups {
            // Divisible by (t-1) iff the coefficient sum vanishes.
            let sum: BigRational = uni.values().cloned().sum();
            if !sum.is_zero() {
                return None;
            }
            let lo = *uni.keys().next().unwrap();
            let hi = *uni.keys().last().unwrap();
            // Synthetic division of sum c_a t^(a-lo) by (t - 1), top down.
            let mut carry = BigRational::zero();
            for a in ((lo + 1)..=hi).rev() {
                let coeff = uni.get(&a).cloned().unwrap_or_else(BigRational::zero);
                carry += coeff;
                if !carry.is_zero() {
                    let mut e = key;
                    e[VT] = a - 1;
                    out.insert(e, carry.clone());
                }
            }
        }
        Some(out)
    }

    /// Formal derivative in `t`, using `dT/dt = n1 T / t`, `dD/dt = D1`,
    /// `dD1/dt = D2`. Inputs containing `D2` are rejected: the chain stops at
    /// the second derivative.
    pub fn derive(&self) -> Result<Self, String> {
        for e in self.terms.keys() {
            if e[VD2] != 0 {
                return Err("cannot derive a polynomial containing D2".into());
            }
        }
        let mut num = Self::zero();
        for (e, c) in &self.terms {
            // d/dt of t^a: a t^(a-1)
            if e[VT] != 0 {
                let mut ne = *e;
                ne[VT] -= 1;
                num = num.add(&Self::monomial(c * rat(e[VT] as i64), ne));
            }
            // d/dt of T^b: b n1 t^(-1) T^b
            if e[VBIGT] != 0 {
                let mut ne = *e;
                ne[VT] -= 1;
                ne[VN1] += 1;
                num = num.add(&Self::monomial(c * rat(e[VBIGT] as i64), ne));
            }
            // d/dt of D^e: e D^(e-1) D1
            if e[VD] != 0 {
                let mut ne = *e;
                ne[VD] -= 1;
                ne[VD1] += 1;
                num = num.add(&Self::monomial(c * rat(e[VD] as i64), ne));
            }
            // d/dt of D1^f: f D1^(f-1) D2
            if e[VD1] != 0 {
                let mut ne = *e;
                ne[VD1] -= 1;
                ne[VD2] += 1;
                num = num.add(&Self::monomial(c * rat(e[VD1] as i64), ne));
            }
        }
        if self.tm1 == 0 {
            return Ok(num);
        }
        // d/dt [P / (t-1)^d] = [P' (t-1) - d P] / (t-1)^(d+1)
        let d = rat(self.tm1 as i64);
        let numerator_only = DiffPoly {
            tm1: 0,
            terms: self.terms.clone(),
        };
        let mut out = num
            .mul(&Self::t_minus_1())
            .sub(&numerator_only.scale(&d));
        out.tm1 += self.tm1 + 1;
        out.reduce();
        Ok(out)
    }

    /// Terms with the given exponents of (D, D1, D2), those exponents
    /// removed. The remaining polynomial depends on (t, T, C, n1, n3, n4).
    pub fn coeff_of_state(&self, e_d: i16, e_d1: i16, e_d2: i16) -> Self {
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[VD] == e_d && e[VD1] == e_d1 && e[VD2] == e_d2 {
                let mut ne = *e;
                ne[VD] = 0;
                ne[VD1] = 0;
                ne[VD2] = 0;
                terms.insert(ne, c.clone());
            }
        }
        let mut out = DiffPoly {
            tm1: self.tm1,
            terms,
        };
        out.reduce();
        out
    }

    /// All distinct (D, D1, D2) exponent triples present.
    pub fn state_support(&self) -> Vec<(i16, i16, i16)> {
        let mut set = std::collections::BTreeSet::new();
        for e in self.terms.keys() {
            set.insert((e[VD], e[VD1], e[VD2]));
        }
        set.into_iter().collect()
    }

    /// Highest power of `D2`.
    pub fn degree_d2(&self) -> i16 {
        self.terms.keys().map(|e| e[VD2]).max().unwrap_or(0)
    }

    /// Whether every monomial stays bounded as `t -> infinity` for all
    /// admissible parameters: `e_t <= tm1` and `e_T <= 0` monomial-wise.
    pub fn is_bounded_at_infinity(&self) -> bool {
        self.terms
            .keys()
            .all(|e| (e[VT] as i32) <= self.tm1 as i32 && e[VBIGT] <= 0)
    }

    /// First monomial violating boundedness, if any (for diagnostics).
    pub fn unbounded_monomial(&self) -> Option<String> {
        self.terms
            .iter()
            .find(|(e, _)| (e[VT] as i32) > self.tm1 as i32 || e[VBIGT] > 0)
            .map(|(e, c)| format_term(e, c, self.tm1))
    }

    /// The constant the polynomial tends to as `t -> infinity`, as an exact
    /// polynomial in `(C, n1, n3, n4)`: the sum of monomials with `e_t =
    /// tm1`, `e_T = 0` and no state variables. Meaningful once
    /// [`Self::is_bounded_at_infinity`] holds.
    pub fn leading_constant(&self) -> Self {
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[VT] as i32 == self.tm1 as i32
                && e[VBIGT] == 0
                && e[VD] == 0
                && e[VD1] == 0
                && e[VD2] == 0
            {
                let mut ne = *e;
                ne[VT] = 0;
                terms.insert(ne, c.clone());
            }
        }
        DiffPoly { tm1: 0, terms }
    }

    /// All `T` exponents even (oddness would indicate a half-integer power
    /// slipped in).
    pub fn all_big_t_exponents_even(&self) -> bool {
        self.terms.keys().all(|e| e[VBIGT] % 2 == 0)
    }

    /// Numeric instantiation at the given variable values.
    pub fn eval(&self, v: &VarVals) -> Cplx {
        let mut acc = Cplx::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut term = Cplx::new(rational_to_f64(c), 0.0);
            for (var, &expo) in e.iter().enumerate() {
                if expo != 0 {
                    term *= v.get(var).powi(expo as i32);
                }
            }
            acc += term;
        }
        if self.tm1 > 0 {
            acc /= (v.t - Cplx::new(1.0, 0.0)).powi(self.tm1 as i32);
        }
        acc
    }

    /// Render all monomials (for reports / diagnostics).
    pub fn terms_strings(&self) -> Vec<String> {
        self.terms
            .iter()
            .map(|(e, c)| format_term(e, c, self.tm1))
            .collect()
    }
}

pub(crate) fn rational_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

fn format_term(e: &Expo, c: &BigRational, tm1: u32) -> String {
    let mut s = String::new();
    if c.is_negative() {
        s.push_str("- ");
    }
    let ac = c.abs();
    s.push_str(&ac.to_string());
    for (var, &expo) in e.iter().enumerate() {
        if expo != 0 {
            s.push_str(&format!(" {}^{}", VAR_NAMES[var], expo));
        }
    }
    if tm1 > 0 {
        s.push_str(&format!(" / (t-1)^{}", tm1));
    }
    s
}

impl fmt::Debug for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        write!(f, "{}", self.terms_strings().join(" + "))
    }
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
