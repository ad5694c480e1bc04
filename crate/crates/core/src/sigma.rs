//! Floating-point evaluation of the equation and the remainder right-hand
//! side.
//!
//! The exact engine in [`crate::algebra`] proves, once, that substituting
//!
//! ```text
//! u = -nu1^2 t + (nu1^2 + nu3 nu4)/2 + C t^(-2 nu1) + Delta
//! ```
//!
//! into the equation yields `T2 (Delta'')^2 + T1 Delta'' + T0 = 0` with known
//! closed-form coefficients. This module instantiates those verified closed
//! forms in floating point: the quadratic's coefficients at a state
//! ([`Evaluator::t_triple`]), the decaying root `F` solved for the second
//! derivative ([`Evaluator::f`]), and the driving term `R` of the integral
//! formulation ([`Evaluator::r`]), plus an independent decomposed evaluation
//! path ([`Evaluator::r_decomposed`]) used to cross-check sign conventions.
//!
//! Branch discipline: every fractional power of `t` is taken on the ray
//! branch `log t = ln|t| + i theta` carried by [`RayPoint`]. Only even powers
//! of `T = t^nu1` occur (engine-verified), so a single `w = t^(2 nu1)` per
//! point suffices.

use crate::algebra::poly::{
    self, DiffPoly, VarVals, VBIGT, VC, VD, VD1, VD2, VN1, VN3, VN4, VT,
};
use crate::algebra::verify;
use crate::domain::{Parameters, RayGrid, RayPoint};
use crate::{Cplx, Real};
use std::fmt;

/// Discriminant-ratio threshold above which the normal form is still usable
/// but flagged as poorly conditioned.
pub const DISCRIMINANT_WARN: Real = 0.5;

/// Errors from the numeric evaluators.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaError {
    /// `C = 0`: the family degenerates; use the exact solution (the linear
    /// quadratic coefficient vanishes identically, so the normal form is
    /// 0/0).
    DegenerateFamily,
    /// `|4 T0 T2 / T1^2| >= 1`: outside the asymptotic regime; increase the
    /// inner radius `rho`.
    OutsideAsymptoticRegime { ratio: Real },
}

impl fmt::Display for SigmaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaError::DegenerateFamily => {
                write!(f, "C = 0 degenerates the family: use the exact solution")
            }
            SigmaError::OutsideAsymptoticRegime { ratio } => write!(
                f,
                "discriminant ratio {ratio:.3e} >= 1: outside the asymptotic regime, increase rho"
            ),
        }
    }
}

impl std::error::Error for SigmaError {}

/// A point on the ray together with the remainder state `(Delta, Delta')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePoint {
    pub t: RayPoint,
    /// `Delta`.
    pub delta1: Cplx,
    /// `Delta'`.
    pub delta2: Cplx,
}

impl StatePoint {
    pub fn new(t: RayPoint, delta1: Cplx, delta2: Cplx) -> Self {
        StatePoint { t, delta1, delta2 }
    }

    /// The complex value of `t`.
    pub fn value(&self) -> Cplx {
        self.t.value()
    }

    /// Rescaled state `S1 = t^(2 nu1) Delta`.
    pub fn s1(&self, p: &Parameters) -> Cplx {
        self.t.cpow(2.0 * p.nu1) * self.delta1
    }

    /// Rescaled state `S2 = t^(1 + 2 nu1) Delta'`.
    pub fn s2(&self, p: &Parameters) -> Cplx {
        self.t.cpow(2.0 * p.nu1 + Cplx::new(1.0, 0.0)) * self.delta2
    }
}

/// The quadratic's coefficients evaluated at one state, with the recorded
/// discriminant ratio `|4 T0 T2 / T1^2|`.
#[derive(Debug, Clone, Copy)]
pub struct TTriple {
    pub t0: Cplx,
    pub t1: Cplx,
    pub t2: Cplx,
    /// Where it was evaluated.
    pub t: Cplx,
    pub delta1: Cplx,
    pub delta2: Cplx,
    /// `|4 T0 T2 / T1^2|`; infinite when `T1 = 0` (the `C = 0` degeneracy).
    pub discriminant_ratio: Real,
}

impl TTriple {
    /// Below the warn threshold the series form of the decaying root is
    /// well conditioned.
    pub fn is_well_conditioned(&self) -> bool {
        self.discriminant_ratio < DISCRIMINANT_WARN
    }

    /// `T1 = 0`, which happens exactly when `C = 0`.
    pub fn is_degenerate(&self) -> bool {
        self.t1 == Cplx::new(0.0, 0.0)
    }
}

/// The base member of the family: `u = -nu1^2 t + (nu1^2 + nu3 nu4)/2`,
/// returned with its first two derivatives.
pub fn exact_solution(p: &Parameters, t: Cplx) -> (Cplx, Cplx, Cplx) {
    let u = -p.nu1 * p.nu1 * t + 0.5 * (p.nu1 * p.nu1 + p.nu3 * p.nu4);
    (u, -p.nu1 * p.nu1, Cplx::new(0.0, 0.0))
}

/// Assemble `u`, `u'` (and `u''` when the second state derivative is
/// supplied) from a remainder state:
///
/// ```text
/// u   = -nu1^2 t + (nu1^2 + nu3 nu4)/2 + C t^(-2 nu1) + Delta
/// u'  = -nu1^2 - 2 nu1 C t^(-1 - 2 nu1) + Delta'
/// u'' = 2 nu1 (2 nu1 + 1) C t^(-2 - 2 nu1) + Delta''
/// ```
pub fn compose_u(p: &Parameters, st: &StatePoint, d2: Option<Cplx>) -> (Cplx, Cplx, Option<Cplx>) {
    let t = st.value();
    let two_nu1 = 2.0 * p.nu1;
    let one = Cplx::new(1.0, 0.0);
    let u = -p.nu1 * p.nu1 * t
        + 0.5 * (p.nu1 * p.nu1 + p.nu3 * p.nu4)
        + p.c * st.t.cpow(-two_nu1)
        + st.delta1;
    let up = -p.nu1 * p.nu1 - two_nu1 * p.c * st.t.cpow(-one - two_nu1) + st.delta2;
    let upp = d2.map(|dd| two_nu1 * (two_nu1 + one) * p.c * st.t.cpow(-2.0 * one - two_nu1) + dd);
    (u, up, upp)
}

fn sigma_terms(p: &Parameters, t: Cplx, u: Cplx, up: Cplx, upp: Cplx) -> (Cplx, Cplx, Cplx) {
    let one = Cplx::new(1.0, 0.0);
    let lhs1 = up * (upp * t * (t - one)).powi(2);
    let bracket = 2.0 * up * (t * up - u) - up * up - p.nu1 * p.nu1 * p.nu3 * p.nu4;
    let lhs2 = bracket * bracket;
    let rhs = (up + p.nu1 * p.nu1).powi(2) * (up + p.nu3 * p.nu3) * (up + p.nu4 * p.nu4);
    (lhs1, lhs2, rhs)
}

/// Residual of the equation at a solution triple: left side minus right side
/// of
///
/// ```text
/// u' (u'' t (t-1))^2 + (2 u' (t u' - u) - u'^2 - nu1^2 nu3 nu4)^2
///     = (u' + nu1^2)^2 (u' + nu3^2) (u' + nu4^2)
/// ```
pub fn sigma_residual(p: &Parameters, t: Cplx, u: Cplx, up: Cplx, upp: Cplx) -> Cplx {
    let (a, b, c) = sigma_terms(p, t, u, up, upp);
    a + b - c
}

/// Natural size of the equation's terms at the same point — the denominator
/// for a relative residual of the raw assembly.
///
/// Each term enters through the triangle-inequality bound of its assembled
/// constituents rather than its final (possibly cancelled) value, so the
/// scale stays positive at solution triples, where all three terms vanish,
/// and honestly reflects the magnitudes double precision had to subtract:
/// the second term's inner bracket is a difference of `O(t)`-sized
/// products, which is exactly where the raw assembly loses digits.
pub fn sigma_residual_scale(p: &Parameters, t: Cplx, u: Cplx, up: Cplx, upp: Cplx) -> Real {
    let one = Cplx::new(1.0, 0.0);
    let a = up.norm() * (upp * t * (t - one)).norm().powi(2);
    let inner = 2.0 * up.norm() * ((t * up).norm() + u.norm())
        + (up * up).norm()
        + (p.nu1 * p.nu1 * p.nu3 * p.nu4).norm();
    let b = inner * inner;
    let c3 = (up.norm() + (p.nu1 * p.nu1).norm()).powi(2)
        * (up.norm() + (p.nu3 * p.nu3).norm())
        * (up.norm() + (p.nu4 * p.nu4).norm());
    a + b + c3
}

/// One monomial of a compiled polynomial: complex coefficient (parameters
/// folded in) times `t^e_t w^e_w Delta^e_d Delta'^e_d1`.
#[derive(Debug, Clone, Copy)]
struct CTerm {
    coeff: Cplx,
    e_t: i32,
    e_w: i32,
    e_d: u8,
    e_d1: u8,
}

/// A coefficient polynomial compiled for fixed parameters: only `t`,
/// `w = t^(2 nu1)` and the state remain symbolic.
#[derive(Debug, Clone)]
pub struct Compiled {
    terms: Vec<CTerm>,
    tm1: i32,
    t_lo: i32,
    t_hi: i32,
    w_lo: i32,
    w_hi: i32,
}

const POW_SPAN: usize = 40;

fn pow_table(base: Cplx, lo: i32, hi: i32) -> [Cplx; POW_SPAN] {
    let mut out = [Cplx::new(1.0, 0.0); POW_SPAN];
    let span = (hi - lo) as usize;
    debug_assert!(span < POW_SPAN);
    out[0] = base.powi(lo);
    for i in 0..span {
        out[i + 1] = out[i] * base;
    }
    out
}

impl Compiled {
    /// Fold the parameters and tail amplitude of an engine polynomial into
    /// complex coefficients. Panics on inputs outside the verified shape
    /// (odd `T` powers, second-derivative terms, state powers above 4) —
    /// those would indicate corruption upstream, not a user error.
    fn from_poly(source: &DiffPoly, p: &Parameters) -> Self {
        let mut terms = Vec::new();
        let (mut t_lo, mut t_hi) = (0i32, 0i32);
        let (mut w_lo, mut w_hi) = (0i32, 0i32);
        for (e, coeff) in source.iter_terms() {
            assert!(e[VD2] == 0, "compiled polynomials must be free of Delta''");
            assert!(e[VBIGT] % 2 == 0, "only even powers of t^nu1 are supported");
            assert!(
                (0..=4).contains(&e[VD]) && (0..=4).contains(&e[VD1]),
                "state powers outside the verified range"
            );
            let mut z = Cplx::new(poly::rational_to_f64(coeff), 0.0);
            for (var, base) in [(VC, p.c), (VN1, p.nu1), (VN3, p.nu3), (VN4, p.nu4)] {
                let expo = e[var];
                if expo != 0 {
                    if base == Cplx::new(0.0, 0.0) {
                        z = Cplx::new(0.0, 0.0);
                        break;
                    }
                    z *= base.powi(expo as i32);
                }
            }
            if z == Cplx::new(0.0, 0.0) {
                continue;
            }
            let term = CTerm {
                coeff: z,
                e_t: e[VT] as i32,
                e_w: (e[VBIGT] / 2) as i32,
                e_d: e[VD] as u8,
                e_d1: e[VD1] as u8,
            };
            t_lo = t_lo.min(term.e_t);
            t_hi = t_hi.max(term.e_t);
            w_lo = w_lo.min(term.e_w);
            w_hi = w_hi.max(term.e_w);
            terms.push(term);
        }
        Compiled {
            terms,
            tm1: source.tm1_power() as i32,
            t_lo,
            t_hi,
            w_lo,
            w_hi,
        }
    }

    /// Evaluate at a point: `t` and `w = t^(2 nu1)` supplied by the caller
    /// (so the branch is decided exactly once per point).
    pub fn eval_at(&self, t: Cplx, w: Cplx, d: Cplx, d1: Cplx) -> Cplx {
        let tp = pow_table(t, self.t_lo, self.t_hi);
        let wp = pow_table(w, self.w_lo, self.w_hi);
        let mut dp = [Cplx::new(1.0, 0.0); 5];
        let mut d1p = [Cplx::new(1.0, 0.0); 5];
        for i in 1..5 {
            dp[i] = dp[i - 1] * d;
            d1p[i] = d1p[i - 1] * d1;
        }
        let mut acc = Cplx::new(0.0, 0.0);
        for term in &self.terms {
            acc += term.coeff
                * tp[(term.e_t - self.t_lo) as usize]
                * wp[(term.e_w - self.w_lo) as usize]
                * dp[term.e_d as usize]
                * d1p[term.e_d1 as usize];
        }
        if self.tm1 > 0 {
            acc /= (t - Cplx::new(1.0, 0.0)).powi(self.tm1);
        }
        acc
    }

    /// Freeze the point, leaving a small polynomial in the state alone —
    /// the hot representation for repeated evaluation at fixed grid nodes.
    pub fn bind(&self, t: Cplx, w: Cplx) -> BoundPoly {
        let tp = pow_table(t, self.t_lo, self.t_hi);
        let wp = pow_table(w, self.w_lo, self.w_hi);
        let scale = if self.tm1 > 0 {
            (t - Cplx::new(1.0, 0.0)).powi(-self.tm1)
        } else {
            Cplx::new(1.0, 0.0)
        };
        let mut buckets: std::collections::BTreeMap<(u8, u8), Cplx> = std::collections::BTreeMap::new();
        for term in &self.terms {
            let v = term.coeff
                * tp[(term.e_t - self.t_lo) as usize]
                * wp[(term.e_w - self.w_lo) as usize]
                * scale;
            *buckets.entry((term.e_d, term.e_d1)).or_insert(Cplx::new(0.0, 0.0)) += v;
        }
        BoundPoly {
            buckets: buckets.into_iter().map(|((a, b), v)| (a, b, v)).collect(),
        }
    }
}

/// A compiled polynomial bound to one grid node: a short list of
/// `(state powers, coefficient)` buckets.
#[derive(Debug, Clone)]
pub struct BoundPoly {
    buckets: Vec<(u8, u8, Cplx)>,
}

impl BoundPoly {
    pub fn eval(&self, d: Cplx, d1: Cplx) -> Cplx {
        let mut dp = [Cplx::new(1.0, 0.0); 5];
        let mut d1p = [Cplx::new(1.0, 0.0); 5];
        for i in 1..5 {
            dp[i] = dp[i - 1] * d;
            d1p[i] = d1p[i - 1] * d1;
        }
        let mut acc = Cplx::new(0.0, 0.0);
        for &(a, b, c) in &self.buckets {
            acc += c * dp[a as usize] * d1p[b as usize];
        }
        acc
    }
}

/// The three decaying pieces and the square-root correction of the driving
/// term, evaluated through the splitting (an independent path from the
/// direct quadratic evaluation), with their total
/// `R = -(pure_decay + linear_subleading + remainder_quartic + tau)`.
#[derive(Debug, Clone, Copy)]
pub struct RPieces {
    /// State-free decay term (the `t^(-3-2 nu1)` leading behaviour).
    pub pure_decay: Cplx,
    /// Subleading linear-in-state block (the dominant linear block is not
    /// part of `R`; it forms the left side of the linear equation).
    pub linear_subleading: Cplx,
    /// Quartic remainder over the linear denominator.
    pub remainder_quartic: Cplx,
    /// Square-root correction from the decaying root of the quadratic.
    pub tau: Cplx,
    pub total: Cplx,
}

fn var_vals(p: &Parameters, st: &StatePoint) -> VarVals {
    VarVals {
        t: st.value(),
        big_t: st.t.cpow(p.nu1),
        d: st.delta1,
        d1: st.delta2,
        d2: Cplx::new(0.0, 0.0),
        c: p.c,
        n1: p.nu1,
        n3: p.nu3,
        n4: p.nu4,
    }
}

fn normal_form(t0: Cplx, t1: Cplx, t2: Cplx) -> Result<(Cplx, Real), SigmaError> {
    let ratio = discriminant_ratio(t0, t1, t2);
    if !(ratio < 1.0) {
        return Err(SigmaError::OutsideAsymptoticRegime { ratio });
    }
    let x = 4.0 * t0 * t2 / (t1 * t1);
    let s = (Cplx::new(1.0, 0.0) - x).sqrt();
    Ok((-2.0 * t0 / (t1 * (Cplx::new(1.0, 0.0) + s)), ratio))
}

fn discriminant_ratio(t0: Cplx, t1: Cplx, t2: Cplx) -> Real {
    if t1 == Cplx::new(0.0, 0.0) {
        return Real::INFINITY;
    }
    (4.0 * t0 * t2 / (t1 * t1)).norm()
}

/// Numeric evaluator for fixed parameters. Construction compiles the
/// engine-verified coefficient polynomials once; evaluation is then pure
/// floating point.
#[derive(Debug, Clone)]
pub struct Evaluator {
    params: Parameters,
    t2: Compiled,
    t1: Compiled,
    t0: Compiled,
}

impl Evaluator {
    pub fn new(p: &Parameters) -> Self {
        let q = verify::quadratic();
        Evaluator {
            params: *p,
            t2: Compiled::from_poly(&q.t2, p),
            t1: Compiled::from_poly(&q.t1, p),
            t0: Compiled::from_poly(&q.t0, p),
        }
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    fn point_powers(&self, st: &StatePoint) -> (Cplx, Cplx) {
        (st.value(), st.t.cpow(2.0 * self.params.nu1))
    }

    /// The quadratic's coefficients at a state.
    pub fn t_triple(&self, st: &StatePoint) -> TTriple {
        let (t, w) = self.point_powers(st);
        let t2 = self.t2.eval_at(t, w, st.delta1, st.delta2);
        let t1 = self.t1.eval_at(t, w, st.delta1, st.delta2);
        let t0 = self.t0.eval_at(t, w, st.delta1, st.delta2);
        TTriple {
            t0,
            t1,
            t2,
            t,
            delta1: st.delta1,
            delta2: st.delta2,
            discriminant_ratio: discriminant_ratio(t0, t1, t2),
        }
    }

    /// The decaying root of the quadratic, i.e. the second derivative the
    /// remainder equation assigns to the state. Uses the subtraction-free
    /// form `-2 T0 / (T1 (1 + sqrt(1 - 4 T0 T2/T1^2)))` with the square
    /// root branch that equals 1 at argument 1.
    pub fn f(&self, st: &StatePoint) -> Result<Cplx, SigmaError> {
        Ok(self.f_with_triple(st)?.0)
    }

    /// As [`Self::f`], returning the evaluated triple alongside.
    pub fn f_with_triple(&self, st: &StatePoint) -> Result<(Cplx, TTriple), SigmaError> {
        if self.params.c == Cplx::new(0.0, 0.0) {
            return Err(SigmaError::DegenerateFamily);
        }
        let tt = self.t_triple(st);
        let (f, _) = normal_form(tt.t0, tt.t1, tt.t2)?;
        Ok((f, tt))
    }

    /// The root the construction rejects: `-T1 (1 + sqrt(1 - x)) / (2 T2)`.
    /// Its magnitude is of order `|T1/T2|`, far above the decaying root.
    pub fn rejected_branch(&self, tt: &TTriple) -> Cplx {
        let x = 4.0 * tt.t0 * tt.t2 / (tt.t1 * tt.t1);
        let s = (Cplx::new(1.0, 0.0) - x).sqrt();
        -tt.t1 * (Cplx::new(1.0, 0.0) + s) / (2.0 * tt.t2)
    }

    /// Driving term of the integral formulation:
    /// `R = F + 2 nu1 t^-1 Delta' - 2 nu1 t^-2 Delta`.
    pub fn r(&self, st: &StatePoint) -> Result<Cplx, SigmaError> {
        let f = self.f(st)?;
        let t = st.value();
        let two_nu1 = 2.0 * self.params.nu1;
        Ok(f + two_nu1 * st.delta2 / t - two_nu1 * st.delta1 / (t * t))
    }

    /// Independent evaluation of `R` through the verified splitting: the
    /// pure decay term, the subleading linear block, the quartic remainder
    /// over the linear denominator, and the square-root correction, summed
    /// with the engine-resolved signs. Agreement with [`Self::r`] is a
    /// numeric shadow of the exact splitting identities.
    pub fn r_decomposed(&self, st: &StatePoint) -> Result<RPieces, SigmaError> {
        if self.params.c == Cplx::new(0.0, 0.0) {
            return Err(SigmaError::DegenerateFamily);
        }
        let p = &self.params;
        let ms = verify::master_splitting();
        let v = var_vals(p, st);
        let one = Cplx::new(1.0, 0.0);
        let t = st.value();
        let w = st.t.cpow(2.0 * p.nu1);
        let two_nu1 = 2.0 * p.nu1;

        let f0 = ms.f0.eval(&v);
        let alpha = ms.alpha.eval(&v);
        let beta = ms.beta.eval(&v);
        let denom = ms.denom.eval(&v);
        let quartic = ms.n.eval(&v) / denom;

        let linear_subleading =
            (alpha + two_nu1 / (t * t)) * st.delta1 + (beta - two_nu1 / t) * st.delta2;
        let ratio01 = f0 + alpha * st.delta1 + beta * st.delta2 + quartic;
        let t2_closed = p.nu1 * p.nu1 + two_nu1 * p.c / (t * w) - st.delta2;
        let ratio21 = t2_closed * t * t * w / denom;
        let x = 4.0 * ratio01 * ratio21;
        if !(x.norm() < 1.0) {
            return Err(SigmaError::OutsideAsymptoticRegime { ratio: x.norm() });
        }
        let s = (one - x).sqrt();
        let tau = 4.0 * ratio01 * ratio01 * ratio21 / ((one + s) * (one + s));
        Ok(RPieces {
            pure_decay: f0,
            linear_subleading,
            remainder_quartic: quartic,
            tau,
            total: -(f0 + linear_subleading + quartic + tau),
        })
    }

    /// Equation residual of a remainder state with an externally supplied
    /// second state derivative `dpp = Delta''`, evaluated through the
    /// substituted form
    ///
    /// ```text
    /// E = -t^2 (t-1)^2 (T2 dpp^2 + T1 dpp + T0),
    /// ```
    ///
    /// returned together with the local term scale
    /// `|t^2 (t-1)^2| (|T2 dpp^2| + |T1 dpp| + |T0|)`.
    ///
    /// The substituted form is an exact rewriting of the raw equation (the
    /// algebra engine verifies the identity), but it assembles only
    /// decaying monomials: unlike the raw composition of `u`, which
    /// subtracts `O(t)`-sized products and rounds the residual information
    /// away at tail nodes, this form stays meaningful over the whole ray.
    /// The caller must supply `dpp` from a source independent of the
    /// quadratic itself — its decaying root satisfies the equation
    /// identically by construction — typically numerical differentiation
    /// of a computed `Delta'`.
    pub fn residual_of_state(&self, st: &StatePoint, dpp: Cplx) -> (Cplx, Real) {
        let tt = self.t_triple(st);
        let t = st.value();
        let one = Cplx::new(1.0, 0.0);
        let pref = (t * (t - one)).powi(2);
        let q = tt.t2 * dpp * dpp + tt.t1 * dpp + tt.t0;
        let scale = (tt.t2 * dpp * dpp).norm() + (tt.t1 * dpp).norm() + tt.t0.norm();
        (-pref * q, pref.norm() * scale)
    }

    /// Bind the compiled coefficients to every node of a grid.
    pub fn bind_grid(&self, grid: &RayGrid) -> GridEvaluator {
        let nodes = grid
            .points()
            .map(|pt| {
                let t = pt.value();
                let w = pt.cpow(2.0 * self.params.nu1);
                NodeEval {
                    t,
                    t2: self.t2.bind(t, w),
                    t1: self.t1.bind(t, w),
                    t0: self.t0.bind(t, w),
                }
            })
            .collect();
        GridEvaluator {
            params: self.params,
            nodes,
        }
    }
}

#[derive(Debug, Clone)]
struct NodeEval {
    t: Cplx,
    t2: BoundPoly,
    t1: BoundPoly,
    t0: BoundPoly,
}

/// Coefficients bound to the nodes of one grid: the hot path for the
/// fixed-point iteration, which re-evaluates the same nodes with new states
/// every sweep.
#[derive(Debug, Clone)]
pub struct GridEvaluator {
    params: Parameters,
    nodes: Vec<NodeEval>,
}

impl GridEvaluator {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn t(&self, k: usize) -> Cplx {
        self.nodes[k].t
    }

    pub fn triple_at(&self, k: usize, d: Cplx, d1: Cplx) -> TTriple {
        let node = &self.nodes[k];
        let t0 = node.t0.eval(d, d1);
        let t1 = node.t1.eval(d, d1);
        let t2 = node.t2.eval(d, d1);
        TTriple {
            t0,
            t1,
            t2,
            t: node.t,
            delta1: d,
            delta2: d1,
            discriminant_ratio: discriminant_ratio(t0, t1, t2),
        }
    }

    pub fn f_at(&self, k: usize, d: Cplx, d1: Cplx) -> Result<Cplx, SigmaError> {
        if self.params.c == Cplx::new(0.0, 0.0) {
            return Err(SigmaError::DegenerateFamily);
        }
        let tt = self.triple_at(k, d, d1);
        Ok(normal_form(tt.t0, tt.t1, tt.t2)?.0)
    }

    pub fn r_at(&self, k: usize, d: Cplx, d1: Cplx) -> Result<Cplx, SigmaError> {
        let f = self.f_at(k, d, d1)?;
        let t = self.nodes[k].t;
        let two_nu1 = 2.0 * self.params.nu1;
        Ok(f + two_nu1 * d1 / t - two_nu1 * d / (t * t))
    }
}

/// Exact limits, instantiated numerically, that govern the tail of the
/// solution family:
///
/// - `c4_infinity`: limit of `t^(3 + 2 nu1) T0/T1` at zero state — the
///   pure-decay weight of the splitting;
/// - `r_infinity = -c4_infinity`: limit of `t^(3 + 2 nu1) F(t, 0, 0)`,
///   equal to the same limit of `R(t, 0, 0)`;
/// - `kappa = r_infinity / (2 + 2 nu1)`: limit of `t^(1 + 2 nu1) Delta(t)`
///   for the solution itself.
#[derive(Debug, Clone, Copy)]
pub struct TailConstants {
    pub c4_infinity: Cplx,
    pub r_infinity: Cplx,
    pub kappa: Cplx,
}

/// Evaluate the engine's exact leading constants at the given parameters.
pub fn tail_constants(p: &Parameters) -> TailConstants {
    let table = verify::coefficients();
    let v = VarVals {
        t: Cplx::new(1.0, 0.0),
        big_t: Cplx::new(1.0, 0.0),
        d: Cplx::new(0.0, 0.0),
        d1: Cplx::new(0.0, 0.0),
        d2: Cplx::new(0.0, 0.0),
        c: p.c,
        n1: p.nu1,
        n3: p.nu3,
        n4: p.nu4,
    };
    let c4 = table.c2.leading_constant().eval(&v) / table.b1.leading_constant().eval(&v);
    let r = -c4;
    TailConstants {
        c4_infinity: c4,
        r_infinity: r,
        kappa: r / (2.0 * p.nu1 + Cplx::new(2.0, 0.0)),
    }
}

/// Relative residuals of the dominant linear operator
/// `L[y] = y'' + 2 nu1 t^-1 y' - 2 nu1 t^-2 y` applied to its two
/// homogeneous solutions `y = t` and `y = t^(-2 nu1)`, at every node of the
/// grid. Each piece is computed through an independent branch power, so the
/// cancellation is a genuine floating-point check.
pub fn homogeneous_residuals(p: &Parameters, grid: &RayGrid) -> Vec<(Real, Real)> {
    let one = Cplx::new(1.0, 0.0);
    let two_nu1 = 2.0 * p.nu1;
    grid.points()
        .map(|pt| {
            let t = pt.value();
            // y = t: y'' = 0, the two first-order pieces must cancel.
            let a = two_nu1 / t;
            let b = -two_nu1 / (t * t) * t;
            let rel_linear = (a + b).norm() / (a.norm() + b.norm());
            // y = t^(-2 nu1).
            let y = pt.cpow(-two_nu1);
            let y1 = -two_nu1 * pt.cpow(-one - two_nu1);
            let y2 = two_nu1 * (two_nu1 + one) * pt.cpow(-2.0 * one - two_nu1);
            let p1 = y2;
            let p2 = two_nu1 / t * y1;
            let p3 = -two_nu1 / (t * t) * y;
            let rel_power = (p1 + p2 + p3).norm() / (p1.norm() + p2.norm() + p3.norm());
            (rel_linear, rel_power)
        })
        .collect()
}

/// Least-squares slope of `ln(values)` against `ln(moduli)` — the decay
/// exponent estimator used by the residual and tail diagnostics.
pub fn log_log_slope(moduli: &[Real], values: &[Real]) -> Real {
    assert!(
        moduli.len() == values.len() && moduli.len() >= 2,
        "slope fit needs matching samples, at least two"
    );
    let n = moduli.len() as Real;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&m, &v) in moduli.iter().zip(values) {
        let x = m.ln();
        let y = v.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_ray_grid, Sector};

    fn c(re: Real, im: Real) -> Cplx {
        Cplx::new(re, im)
    }

    fn params(nu1: Real, nu3: Real, nu4: Real, cc: Real) -> Parameters {
        Parameters::real(nu1, nu3, nu4, cc).unwrap()
    }

    #[test]
    fn exact_solution_values_and_zero_residual() {
        let p = params(1.0, 2.0, 3.0, 0.0);
        let t = c(10.0, 0.0);
        let (u, up, upp) = exact_solution(&p, t);
        assert_eq!(u, c(-6.5, 0.0));
        assert_eq!(up, c(-1.0, 0.0));
        assert_eq!(upp, c(0.0, 0.0));
        let res = sigma_residual(&p, t, u, up, upp);
        assert_eq!(res, c(0.0, 0.0), "both sides vanish identically");
    }

    #[test]
    fn compose_u_reduces_to_exact_solution() {
        let p = params(1.25, 0.5, -0.75, 0.0);
        let st = StatePoint::new(RayPoint::new(42.0, 0.3), c(0.0, 0.0), c(0.0, 0.0));
        let (u, up, upp) = compose_u(&p, &st, Some(c(0.0, 0.0)));
        let (eu, eup, eupp) = exact_solution(&p, st.value());
        assert!((u - eu).norm() < 1e-14 * eu.norm());
        assert!((up - eup).norm() < 1e-14);
        assert_eq!(upp.unwrap(), eupp);
    }

    #[test]
    fn compose_u_half_power_shift() {
        // nu1 = 1/2 makes the tail exactly C/t.
        let p = params(0.5, 1.0, 1.0, 1.0);
        let st = StatePoint::new(RayPoint::new(100.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let (u, _, _) = compose_u(&p, &st, None);
        let (eu, _, _) = exact_solution(&p, st.value());
        // Absolute slack at the size of u itself (|u| ~ 25).
        assert!((u - eu - c(0.01, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn compose_u_matches_high_precision_recomputation() {
        // Frozen from a 60-digit recomputation of the same formulas at
        // nu = (1, 2, 3), C = 2, t = 50 e^{i pi/3}, Delta = 1e-6,
        // Delta' = Delta'' = 0.
        let p = params(1.0, 2.0, 3.0, 2.0);
        let st = StatePoint::new(
            RayPoint::new(50.0, std::f64::consts::FRAC_PI_3),
            c(1e-6, 0.0),
            c(0.0, 0.0),
        );
        let (u, up, upp) = compose_u(&p, &st, Some(c(0.0, 0.0)));
        let u_expect = c(-21.500399000000000000, -43.301963009544959889);
        let up_expect = c(-0.99996800000000000000, 0.0);
        let upp_expect = c(-9.6e-7, 1.6627687752661222018e-6);
        assert!((u - u_expect).norm() <= 1e-12 * u_expect.norm());
        assert!((up - up_expect).norm() <= 1e-12 * up_expect.norm());
        assert!((upp.unwrap() - upp_expect).norm() <= 1e-12 * upp_expect.norm());
    }

    #[test]
    fn state_residual_vanishes_on_the_decaying_root() {
        // Supplying the quadratic's own root annihilates the substituted
        // form by construction; what remains is assembly roundoff.
        let p = params(1.0, 2.0, 3.0, 1.0);
        let ev = Evaluator::new(&p);
        for (r, d, d1) in [
            (50.0, c(1e-5, 2e-6), c(-3e-7, 1e-7)),
            (4.0e3, c(1e-11, 0.0), c(-1e-14, 2e-15)),
            (5.0e5, c(2e-17, -1e-18), c(-1e-22, 0.0)),
        ] {
            let st = StatePoint::new(RayPoint::new(r, 0.0), d, d1);
            let f = ev.f(&st).unwrap();
            let (res, scale) = ev.residual_of_state(&st, f);
            assert!(
                res.norm() <= 1e-13 * scale,
                "|t| = {r}: residual {} over scale {scale}",
                res.norm()
            );
        }
    }

    #[test]
    fn state_residual_is_first_order_in_a_wrong_second_derivative() {
        let p = params(1.0, 1.0, 1.0, 1.0);
        let ev = Evaluator::new(&p);
        let st = StatePoint::new(RayPoint::new(200.0, 0.0), c(2e-7, 0.0), c(-3e-9, 0.0));
        let f = ev.f(&st).unwrap();
        let eps = 1e-6;
        let (r1, scale) = ev.residual_of_state(&st, f * c(1.0 + eps, 0.0));
        let (r2, _) = ev.residual_of_state(&st, f * c(1.0 + 2.0 * eps, 0.0));
        let rel = r1.norm() / scale;
        assert!(
            rel > 1e-8 && rel < 1e-4,
            "perturbed-root relative residual {rel}"
        );
        assert!(
            (r2.norm() / r1.norm() - 2.0).abs() < 0.1,
            "doubling the defect doubles the residual (ratio {})",
            r2.norm() / r1.norm()
        );
    }

    #[test]
    fn residual_difference_is_first_order_in_perturbation() {
        // Finite-difference linearization around the truncated asymptotic
        // member (nonzero residual): the residual difference is linear in a
        // perturbation of u.
        let p = params(1.0, 2.0, 3.0, 1.0);
        let st = StatePoint::new(RayPoint::new(10.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let (u, up, upp) = compose_u(&p, &st, Some(c(0.0, 0.0)));
        let t = st.value();
        let base = sigma_residual(&p, t, u, up, upp.unwrap());
        let eps = c(1e-3, 0.0);
        let d1 = sigma_residual(&p, t, u + eps, up, upp.unwrap()) - base;
        let d2 = sigma_residual(&p, t, u + 2.0 * eps, up, upp.unwrap()) - base;
        assert!(d1.norm() > 0.0);
        assert!(
            (d2 / d1 - c(2.0, 0.0)).norm() < 0.1,
            "doubling the perturbation doubles the residual shift (got {})",
            d2 / d1
        );
    }

    #[test]
    fn truncated_asymptotic_residual_decays_at_the_tail_rate() {
        // With the state dropped, the composed u is off by O(t^(-1-2 nu1)),
        // and the equation's residual decays accordingly. The absolute
        // residual falls like t^(-1-4 nu1) here (its natural scale itself
        // decays like t^(-4 nu1)), comfortably below the -(1+2 nu1) + 0.1
        // requirement.
        let p = params(1.0, 2.0, 3.0, 1.0);
        let sector = Sector::new(-0.1, 0.1, 100.0).unwrap();
        let grid = make_ray_grid(&sector, 0.0, 1e3, 16, crate::domain::Grading::Geometric).unwrap();
        let mut moduli = Vec::new();
        let mut magnitudes = Vec::new();
        for pt in grid.points() {
            let st = StatePoint::new(pt, c(0.0, 0.0), c(0.0, 0.0));
            let (u, up, upp) = compose_u(&p, &st, Some(c(0.0, 0.0)));
            let t = st.value();
            moduli.push(pt.modulus);
            magnitudes.push(sigma_residual(&p, t, u, up, upp.unwrap()).norm());
        }
        let slope = log_log_slope(&moduli, &magnitudes);
        assert!(
            slope <= -(1.0 + 2.0 * p.nu1.re) + 0.1,
            "measured decay slope {slope}"
        );
        assert!(
            (slope + 1.0 + 4.0 * p.nu1.re).abs() < 0.2,
            "sharp rate pin: measured {slope}"
        );
    }

    #[test]
    fn triple_matches_generic_polynomial_evaluation() {
        // The compiled fast path against the exact engine's own numeric
        // instantiation, at a complex parameter point and a sizable state.
        let p = Parameters::new(c(0.75, 0.25), c(0.5, -1.0), c(1.25, 0.5), c(0.3, 0.7)).unwrap();
        let ev = Evaluator::new(&p);
        let st = StatePoint::new(RayPoint::new(37.0, 0.6), c(1e-3, -2e-4), c(-3e-4, 5e-5));
        let tt = ev.t_triple(&st);
        let q = verify::quadratic();
        let v = var_vals(&p, &st);
        for (got, exact) in [
            (tt.t0, q.t0.eval(&v)),
            (tt.t1, q.t1.eval(&v)),
            (tt.t2, q.t2.eval(&v)),
        ] {
            assert!(
                (got - exact).norm() <= 1e-10 * exact.norm(),
                "compiled path diverges: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn bound_nodes_match_direct_evaluation() {
        let p = params(1.0, 1.0, 1.0, 1.0);
        let ev = Evaluator::new(&p);
        let sector = Sector::new(-0.1, 1.0, 50.0).unwrap();
        let grid = make_ray_grid(&sector, 0.5, 1e4, 9, crate::domain::Grading::Geometric).unwrap();
        let ge = ev.bind_grid(&grid);
        let d = c(2e-4, 1e-4);
        let d1 = c(-1e-5, 3e-5);
        for (k, pt) in grid.points().enumerate() {
            let st = StatePoint::new(pt, d, d1);
            let direct = ev.t_triple(&st);
            let bound = ge.triple_at(k, d, d1);
            assert!((direct.t0 - bound.t0).norm() <= 1e-13 * direct.t0.norm());
            assert!((direct.t1 - bound.t1).norm() <= 1e-13 * direct.t1.norm());
            assert!((direct.t2 - bound.t2).norm() <= 1e-13 * direct.t2.norm());
        }
    }

    #[test]
    fn quadratic_limit_and_degenerate_flag() {
        // T2 -> nu1^2 with O(1/t) error at zero state...
        let p = params(1.0, 1.0, 1.0, 1.0);
        let ev = Evaluator::new(&p);
        for r in [1e2, 1e3, 1e4] {
            let st = StatePoint::new(RayPoint::new(r, 0.0), c(0.0, 0.0), c(0.0, 0.0));
            let tt = ev.t_triple(&st);
            assert!((tt.t2 - c(1.0, 0.0)).norm() <= 10.0 / r);
        }
        // ...and C = 0 collapses the linear coefficient identically.
        let p0 = params(1.0, 1.0, 1.0, 0.0);
        let ev0 = Evaluator::new(&p0);
        let st = StatePoint::new(RayPoint::new(100.0, 0.0), c(1e-3, 0.0), c(1e-4, 0.0));
        let tt = ev0.t_triple(&st);
        assert!(tt.is_degenerate());
        assert!(tt.discriminant_ratio.is_infinite());
        assert_eq!(ev0.f(&st).unwrap_err(), SigmaError::DegenerateFamily);
    }

    #[test]
    fn decaying_root_solves_the_quadratic_and_scales_like_the_tail() {
        let p = params(1.0, 1.0, 1.0, 1.0);
        let ev = Evaluator::new(&p);
        let consts = tail_constants(&p);
        let st = StatePoint::new(RayPoint::new(1e3, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let (f, tt) = ev.f_with_triple(&st).unwrap();
        // Root of the quadratic:
        let res = tt.t2 * f * f + tt.t1 * f + tt.t0;
        let scale = (tt.t2 * f * f).norm() + (tt.t1 * f).norm() + tt.t0.norm();
        assert!(res.norm() <= 1e-10 * scale);
        // Leading tail amplitude:
        let scaled = f * st.t.cpow(c(5.0, 0.0));
        assert!(
            (scaled - consts.r_infinity).norm() <= 0.05 * consts.r_infinity.norm(),
            "t^5 F = {scaled} vs {}",
            consts.r_infinity
        );
        // The rejected root is larger by orders of magnitude.
        let other = ev.rejected_branch(&tt);
        assert!(other.norm() > 100.0 * f.norm());
        // And it too solves the quadratic.
        let res2 = tt.t2 * other * other + tt.t1 * other + tt.t0;
        assert!(res2.norm() <= 1e-9 * (tt.t1 * other).norm());
    }

    #[test]
    fn discriminant_overflow_is_an_error() {
        // A state far outside the contraction ball blows the discriminant
        // ratio past 1. (Making T1 itself vanish is not a way to get here:
        // T1 is proportional to T2, and both share a zero along u' = 0
        // where the whole equation degenerates gracefully.)
        let p = params(1.0, 1.0, 1.0, 1.0);
        let ev = Evaluator::new(&p);
        let st = StatePoint::new(RayPoint::new(50.0, 0.0), c(1e3, 0.0), c(0.5, 0.0));
        match ev.f(&st) {
            Err(SigmaError::OutsideAsymptoticRegime { ratio }) => assert!(ratio >= 1.0),
            other => panic!("expected discriminant error, got {other:?}"),
        }
    }

    #[test]
    fn decomposed_driving_term_agrees_with_direct() {
        for (p, theta) in [
            (params(1.0, 1.0, 1.0, 1.0), 0.0),
            (params(0.5, 2.0, 3.0, 1.0), std::f64::consts::FRAC_PI_4),
            (
                Parameters::new(c(1.0, 0.5), c(0.5, 0.0), c(2.0, -0.5), c(0.0, 1.0)).unwrap(),
                -0.3,
            ),
        ] {
            let ev = Evaluator::new(&p);
            for r in [50.0, 215.0, 1000.0] {
                let pt = RayPoint::new(r, theta);
                // A state at the natural tail size.
                let m = pt.pow_modulus(-1.0 - 2.0 * p.nu1);
                let st = StatePoint::new(pt, c(m, 0.3 * m), c(-3.0 * m / r, m / r));
                let direct = ev.r(&st).unwrap();
                let pieces = ev.r_decomposed(&st).unwrap();
                assert!(
                    (direct - pieces.total).norm() <= 1e-10 * direct.norm(),
                    "paths disagree at r = {r}: {direct} vs {}",
                    pieces.total
                );
            }
        }
    }

    #[test]
    fn tail_constants_at_unit_parameters() {
        let consts = tail_constants(&params(1.0, 1.0, 1.0, 1.0));
        assert!((consts.c4_infinity - c(-6.0, 0.0)).norm() < 1e-12);
        assert!((consts.r_infinity - c(6.0, 0.0)).norm() < 1e-12);
        assert!((consts.kappa - c(1.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn homogeneous_solutions_cancel_to_roundoff() {
        let sector = Sector::new(-0.8, 0.8, 50.0).unwrap();
        let grid = make_ray_grid(&sector, 0.4, 5e5, 64, crate::domain::Grading::Geometric).unwrap();
        for p in [
            params(0.5, 1.0, 1.0, 1.0),
            params(1.0, 2.0, 3.0, 1.0),
            Parameters::new(c(1.0, 1.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)).unwrap(),
        ] {
            for (a, b) in homogeneous_residuals(&p, &grid) {
                assert!(a <= 1e-13, "linear solution residual {a}");
                assert!(b <= 1e-13, "power solution residual {b}");
            }
        }
    }

    #[test]
    fn slope_estimator_recovers_pure_power() {
        let moduli: Vec<Real> = (1..=20).map(|k| 10.0 * 1.5f64.powi(k)).collect();
        let values: Vec<Real> = moduli.iter().map(|m| 3.0 * m.powf(-2.5)).collect();
        let slope = log_log_slope(&moduli, &values);
        assert!((slope + 2.5).abs() < 1e-12);
    }
}
