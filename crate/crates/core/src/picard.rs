//! The integral operator, its quadrature, and the fixed-point iteration.
//!
//! The remainder pair `(Delta1, Delta2)` solves a fixed-point problem
//! `Delta = J(Delta)` where
//!
//! ```text
//! J1 = (2 nu1 + 1)^-1 [ t I_a(t)  -  t^(-2 nu1) I_b(t) ]
//! J2 = (2 nu1 + 1)^-1 [   I_a(t)  +  2 nu1 t^(-1-2 nu1) I_b(t) ]
//! I_a(t) = integral from infinity to t of R(s) ds
//! I_b(t) = integral from infinity to t of s^(1+2 nu1) R(s) ds
//! ```
//!
//! with `R` the driving term from [`crate::sigma`]. Both integrals run along
//! the ray `arg s = theta`. The kernel annihilates the homogeneous solutions
//! `t` and `t^(-2 nu1)`, so the fixed point is the unique decaying remainder.
//!
//! Quadrature: composite 4-point Gauss-Legendre on each grid cell in the
//! `log |t|` variable, accumulated inward from `t_max`, plus a closed-form
//! tail over `(t_max, infinity)` from a two-term power fit of `R` at the
//! outermost evaluation points. States are carried at the grid nodes and
//! interpolated to the quadrature abscissae by cubic Lagrange stencils in
//! `log |t|`.
//!
//! The Banach norm weighs the pair by branch moduli of `t^(1+2 nu1)` and
//! `t^(2+2 nu1)`; see [`weighted_norm`].

use std::fmt;

use crate::domain::{Parameters, RayGrid, RayPoint};
use crate::sigma::{Evaluator, GridEvaluator, SigmaError, StatePoint};
use crate::{Cplx, Real};

/// Default fixed-point tolerance in the weighted norm.
pub const DEFAULT_TOL: Real = 1e-12;
/// Default iteration cap; geometric convergence makes this generous.
pub const DEFAULT_MAX_ITER: usize = 50;
/// Sanity ceiling for the post-hoc equation residual of a converged run.
/// The fixed point of the discretized operator sits within quadrature
/// accuracy of the true solution, so a converged iteration whose composed
/// solution violates the equation at this (much looser) level is flagged
/// as not converged.
const RESIDUAL_BACKSTOP: Real = 1e-6;

/// 4-point Gauss-Legendre abscissae on (-1, 1).
const GAUSS_X: [Real; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_26,
    0.339_981_043_584_856_26,
    0.861_136_311_594_052_6,
];
/// Matching weights, summing to 2.
const GAUSS_W: [Real; 4] = [
    0.347_854_845_137_453_85,
    0.652_145_154_862_546_2,
    0.652_145_154_862_546_2,
    0.347_854_845_137_453_85,
];

#[derive(Debug, Clone, PartialEq)]
pub enum PicardError {
    /// The driving-term evaluation failed (degenerate family or a state
    /// outside the asymptotic regime).
    Sigma(SigmaError),
    /// The two-level quadrature comparison estimates an error above the
    /// budget `tol / 10`: the grid needs more nodes.
    QuadratureTooCoarse { estimate: Real, budget: Real },
    /// Increments stopped decreasing while still above the noise floor.
    NonContraction { rho: Real, ratio: Real },
    /// Cubic interpolation stencils need at least four grid nodes.
    GridTooSmall { n: usize },
}

impl fmt::Display for PicardError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PicardError::Sigma(e) => write!(f, "driving term evaluation failed: {e}"),
            PicardError::QuadratureTooCoarse { estimate, budget } => write!(
                f,
                "quadrature error estimate {estimate:.3e} exceeds the budget {budget:.3e}: \
                 refine the grid (more nodes over the same span)"
            ),
            PicardError::NonContraction { rho, ratio } => write!(
                f,
                "iteration is not contracting at rho = {rho} (increment ratio {ratio:.3}): \
                 increase rho"
            ),
            PicardError::GridTooSmall { n } => write!(
                f,
                "grid has {n} nodes; the quadrature stencils need at least 4"
            ),
        }
    }
}

impl std::error::Error for PicardError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            PicardError::Sigma(e) => Some(e),
            _ => None,
        }
    }
}

impl From<SigmaError> for PicardError {
    fn from(e: SigmaError) -> Self {
        PicardError::Sigma(e)
    }
}

/// A remainder pair sampled on a ray grid, with the convergence record of
/// the iteration that produced it.
#[derive(Debug, Clone)]
pub struct RemainderSolution {
    pub grid: RayGrid,
    /// `Delta1 = Delta` at each node.
    pub delta1: Vec<Cplx>,
    /// `Delta2 = Delta'` at each node.
    pub delta2: Vec<Cplx>,
    /// Number of operator applications performed.
    pub iterations: usize,
    /// Weighted-norm distances between successive iterates, in order. For a
    /// converged run the last entry is the re-verified fixed-point defect
    /// `norm(J(Delta) - Delta)` of the returned pair's predecessor.
    pub increments: Vec<Real>,
    pub converged: bool,
    /// Weighted norm of the returned pair.
    pub final_norm: Real,
}

impl RemainderSolution {
    /// The all-zero pair on `grid` (the iteration seed, and the exact
    /// remainder of the degenerate `C = 0` family).
    pub fn zero(grid: RayGrid) -> Self {
        let n = grid.len();
        RemainderSolution {
            grid,
            delta1: vec![Cplx::new(0.0, 0.0); n],
            delta2: vec![Cplx::new(0.0, 0.0); n],
            iterations: 0,
            increments: Vec::new(),
            converged: false,
            final_norm: 0.0,
        }
    }

    /// The state at node `k`.
    pub fn state(&self, k: usize) -> StatePoint {
        StatePoint::new(self.grid.point(k), self.delta1[k], self.delta2[k])
    }
}

fn norm_on(p: &Parameters, grid: &RayGrid, d1: &[Cplx], d2: &[Cplx]) -> Real {
    let w1 = Cplx::new(1.0, 0.0) + 2.0 * p.nu1;
    let w2 = Cplx::new(2.0, 0.0) + 2.0 * p.nu1;
    let mut sup: Real = 0.0;
    for (k, pt) in grid.points().enumerate() {
        sup = sup
            .max(pt.pow_modulus(w1) * d1[k].norm())
            .max(pt.pow_modulus(w2) * d2[k].norm());
    }
    sup
}

/// The Banach norm of the pair: the larger of `sup |t^(1+2 nu1)| |Delta1|`
/// and `sup |t^(2+2 nu1)| |Delta2|` over the grid nodes, where `|t^a|` is
/// the branch modulus `|t|^Re(a) exp(-Im(a) arg t)`.
///
/// A branch-consistent power `Delta1 = t^(-1-2 nu1)` has unit norm on every
/// ray: its modulus carries the angular factor `exp(+Im(1+2 nu1) arg t)`
/// which the weight cancels exactly.
pub fn weighted_norm(p: &Parameters, sol: &RemainderSolution) -> Real {
    norm_on(p, &sol.grid, &sol.delta1, &sol.delta2)
}

/// Per-node equation residuals of a solution, with their local scales.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// `|E|` at each node: the absolute residual of the equation.
    pub absolute: Vec<Real>,
    /// `|E|` over the local scale of the equation's terms at the node.
    pub relative: Vec<Real>,
}

impl ResidualReport {
    pub fn worst_relative(&self) -> Real {
        self.relative.iter().cloned().fold(0.0, Real::max)
    }
}

/// Verify a computed pair against the equation itself: differentiate
/// `Delta2` along the grid (5-point Lagrange stencils in `log |t|`, fourth
/// order) for an independent second derivative, then evaluate the residual
/// of the substituted equation at every node. The quadratic's own root is
/// never used here — it would satisfy the equation by construction.
/// Requires at least 5 nodes.
pub fn equation_residuals(p: &Parameters, sol: &RemainderSolution) -> ResidualReport {
    let n = sol.grid.len();
    assert!(n >= 5, "residual differentiation needs at least 5 nodes");
    let ev = Evaluator::new(p);
    let xs: Vec<Real> = sol.grid.moduli.iter().map(|m| m.ln()).collect();
    let mut absolute = Vec::with_capacity(n);
    let mut relative = Vec::with_capacity(n);
    for k in 0..n {
        let base = k.saturating_sub(2).min(n - 5);
        let w = derivative_weights(xs[k], &xs[base..base + 5]);
        let mut dx = Cplx::new(0.0, 0.0);
        for i in 0..5 {
            dx += w[i] * sol.delta2[base + i];
        }
        let st = sol.state(k);
        let dpp = dx / st.value();
        let (res, scale) = ev.residual_of_state(&st, dpp);
        absolute.push(res.norm());
        relative.push(if scale > 0.0 { res.norm() / scale } else { res.norm() });
    }
    ResidualReport { absolute, relative }
}

/// Derivatives of the five Lagrange basis polynomials over `xs`, at `x`.
fn derivative_weights(x: Real, xs: &[Real]) -> [Real; 5] {
    let mut out = [0.0; 5];
    for i in 0..5 {
        let mut acc = 0.0;
        for m in 0..5 {
            if m == i {
                continue;
            }
            let mut prod = 1.0 / (xs[i] - xs[m]);
            for j in 0..5 {
                if j != i && j != m {
                    prod *= (x - xs[j]) / (xs[i] - xs[j]);
                }
            }
            acc += prod;
        }
        out[i] = acc;
    }
    out
}

/// Composite 4-point Gauss-Legendre plan for cumulative integrals along one
/// ray grid, in the `log |t|` variable, with a two-term power-law tail over
/// `(t_max, infinity)`.
#[derive(Debug, Clone)]
pub struct RayQuadrature {
    nu1: Cplx,
    n_nodes: usize,
    points: Vec<RayPoint>,
    /// Per abscissa: quadrature weight times `ds = s dx`, for `I_a`.
    wa: Vec<Cplx>,
    /// Per abscissa: `wa` times `s^(1+2 nu1)`, for `I_b`.
    wb: Vec<Cplx>,
    /// Per abscissa: the four grid nodes of its interpolation stencil.
    stencil: Vec<[usize; 4]>,
    /// Per abscissa: cubic Lagrange coefficients at the stencil nodes.
    coeffs: Vec<[Real; 4]>,
    /// Abscissa indices used for the tail fit (inner, outer).
    fit: (usize, usize),
    /// Outermost grid node and its tail-integral powers.
    t_end: RayPoint,
}

impl RayQuadrature {
    pub fn new(grid: &RayGrid, nu1: Cplx) -> Result<Self, PicardError> {
        let n = grid.len();
        if n < 4 {
            return Err(PicardError::GridTooSmall { n });
        }
        let theta = grid.theta;
        let xs: Vec<Real> = grid.moduli.iter().map(|m| m.ln()).collect();
        let one_plus = Cplx::new(1.0, 0.0) + 2.0 * nu1;

        let cells = n - 1;
        let mut points = Vec::with_capacity(4 * cells);
        let mut wa = Vec::with_capacity(4 * cells);
        let mut wb = Vec::with_capacity(4 * cells);
        let mut stencil = Vec::with_capacity(4 * cells);
        let mut coeffs = Vec::with_capacity(4 * cells);

        for j in 0..cells {
            let half = 0.5 * (xs[j + 1] - xs[j]);
            let mid = 0.5 * (xs[j + 1] + xs[j]);
            let base = if j == 0 {
                0
            } else if j + 2 >= n {
                n - 4
            } else {
                j - 1
            };
            for g in 0..4 {
                let x = mid + half * GAUSS_X[g];
                let pt = RayPoint::new(x.exp(), theta);
                let s = pt.value();
                wa.push((half * GAUSS_W[g]) * s);
                wb.push((half * GAUSS_W[g]) * s * pt.cpow(one_plus));
                stencil.push([base, base + 1, base + 2, base + 3]);
                coeffs.push(lagrange_coeffs(x, &xs[base..base + 4]));
                points.push(pt);
            }
        }

        // Tail-fit abscissae: the outermost one, and one roughly half a
        // modulus octave in for conditioning (both are genuine evaluation
        // points, so the fit costs nothing extra).
        let hi = points.len() - 1;
        let cut = 0.5 * grid.t_max();
        let lo = points[..hi]
            .iter()
            .rposition(|pt| pt.modulus <= cut)
            .unwrap_or(hi - 2);
        Ok(RayQuadrature {
            nu1,
            n_nodes: n,
            points,
            wa,
            wb,
            stencil,
            coeffs,
            fit: (lo, hi),
            t_end: RayPoint::new(grid.t_max(), theta),
        })
    }

    /// The quadrature abscissae, in ascending modulus.
    pub fn points(&self) -> &[RayPoint] {
        &self.points
    }

    /// Interpolate nodal values to the abscissae (cubic Lagrange in
    /// `log |t|`).
    pub fn interpolate(&self, nodal: &[Cplx]) -> Vec<Cplx> {
        assert_eq!(nodal.len(), self.n_nodes);
        self.stencil
            .iter()
            .zip(&self.coeffs)
            .map(|(st, co)| {
                let mut acc = Cplx::new(0.0, 0.0);
                for i in 0..4 {
                    acc += co[i] * nodal[st[i]];
                }
                acc
            })
            .collect()
    }

    /// Fit `R(s) = c s^(-3-2 nu1) + d s^(-4-2 nu1)` at the two tail
    /// abscissae and return the closed-form integrals over
    /// `(t_max, infinity)`: `(integral of R, integral of s^(1+2 nu1) R)`.
    fn tail_integrals(&self, r_gauss: &[Cplx]) -> (Cplx, Cplx) {
        let m3 = Cplx::new(-3.0, 0.0) - 2.0 * self.nu1;
        let m4 = Cplx::new(-4.0, 0.0) - 2.0 * self.nu1;
        let (ilo, ihi) = self.fit;
        let (plo, phi) = (&self.points[ilo], &self.points[ihi]);
        let (a_lo, b_lo) = (plo.cpow(m3), plo.cpow(m4));
        let (a_hi, b_hi) = (phi.cpow(m3), phi.cpow(m4));
        let det = a_lo * b_hi - a_hi * b_lo;
        let (c, d) = if det.norm() > 1e-10 * (a_lo * b_hi).norm() {
            (
                (r_gauss[ilo] * b_hi - r_gauss[ihi] * b_lo) / det,
                (a_lo * r_gauss[ihi] - a_hi * r_gauss[ilo]) / det,
            )
        } else {
            (r_gauss[ihi] / a_hi, Cplx::new(0.0, 0.0))
        };
        let two_p = Cplx::new(2.0, 0.0) + 2.0 * self.nu1;
        let three_p = Cplx::new(3.0, 0.0) + 2.0 * self.nu1;
        let te = &self.t_end;
        let tail_a = c * te.cpow(-two_p) / two_p + d * te.cpow(-three_p) / three_p;
        let inv = te.cpow(Cplx::new(-1.0, 0.0));
        let tail_b = c * inv + d * inv * inv / 2.0;
        (tail_a, tail_b)
    }

    /// Cumulative integrals at the grid nodes from integrand values at the
    /// abscissae: `I_a(t_k) = int_inf^{t_k} R ds` and
    /// `I_b(t_k) = int_inf^{t_k} s^(1+2 nu1) R ds`.
    pub fn cumulative(&self, r_gauss: &[Cplx]) -> (Vec<Cplx>, Vec<Cplx>) {
        assert_eq!(r_gauss.len(), self.points.len());
        let n = self.n_nodes;
        let (tail_a, tail_b) = self.tail_integrals(r_gauss);
        let mut ia = vec![Cplx::new(0.0, 0.0); n];
        let mut ib = vec![Cplx::new(0.0, 0.0); n];
        ia[n - 1] = -tail_a;
        ib[n - 1] = -tail_b;
        for j in (0..n - 1).rev() {
            let mut ca = Cplx::new(0.0, 0.0);
            let mut cb = Cplx::new(0.0, 0.0);
            for g in 4 * j..4 * j + 4 {
                ca += self.wa[g] * r_gauss[g];
                cb += self.wb[g] * r_gauss[g];
            }
            ia[j] = ia[j + 1] - ca;
            ib[j] = ib[j + 1] - cb;
        }
        (ia, ib)
    }

    /// Cumulative integrals of an explicit integrand evaluated directly at
    /// the abscissae (no interpolation involved).
    pub fn integrals_of(&self, f: impl Fn(RayPoint) -> Cplx) -> (Vec<Cplx>, Vec<Cplx>) {
        let r: Vec<Cplx> = self.points.iter().map(|pt| f(*pt)).collect();
        self.cumulative(&r)
    }
}

fn lagrange_coeffs(x: Real, xs: &[Real]) -> [Real; 4] {
    let mut out = [0.0; 4];
    for i in 0..4 {
        let mut c = 1.0;
        for m in 0..4 {
            if m != i {
                c *= (x - xs[m]) / (xs[i] - xs[m]);
            }
        }
        out[i] = c;
    }
    out
}

/// Thin a grid to every other node (endpoints kept), for the two-level
/// quadrature error estimate.
fn thin_grid(grid: &RayGrid) -> (RayGrid, Vec<usize>) {
    let n = grid.len();
    let mut idx: Vec<usize> = (0..n).step_by(2).collect();
    if *idx.last().unwrap() != n - 1 {
        idx.push(n - 1);
    }
    let moduli = idx.iter().map(|&k| grid.moduli[k]).collect();
    (
        RayGrid {
            theta: grid.theta,
            moduli,
        },
        idx,
    )
}

struct CoarseCheck {
    quad: RayQuadrature,
    gauss_eval: GridEvaluator,
    idx: Vec<usize>,
}

/// The integral operator bound to one parameter set and one grid: compiled
/// coefficient polynomials at every quadrature abscissa, the quadrature
/// plan, and the node powers of the kernel. Reused across iterations.
pub struct PicardEngine {
    params: Parameters,
    grid: RayGrid,
    quad: RayQuadrature,
    gauss_eval: GridEvaluator,
    coarse: Option<CoarseCheck>,
    evaluator: Evaluator,
    inv_denom: Cplx,
    node_t: Vec<Cplx>,
    pow_m2nu: Vec<Cplx>,
    pow_m1m2nu: Vec<Cplx>,
}

impl PicardEngine {
    pub fn new(p: &Parameters, grid: &RayGrid) -> Result<Self, PicardError> {
        let quad = RayQuadrature::new(grid, p.nu1)?;
        let evaluator = Evaluator::new(p);
        let gauss_eval = evaluator.bind_grid(&RayGrid {
            theta: grid.theta,
            moduli: quad.points().iter().map(|pt| pt.modulus).collect(),
        });
        let (thin, idx) = thin_grid(grid);
        let coarse = if thin.len() >= 4 {
            let quad_c = RayQuadrature::new(&thin, p.nu1)?;
            let gauss_eval_c = evaluator.bind_grid(&RayGrid {
                theta: thin.theta,
                moduli: quad_c.points().iter().map(|pt| pt.modulus).collect(),
            });
            Some(CoarseCheck {
                quad: quad_c,
                gauss_eval: gauss_eval_c,
                idx,
            })
        } else {
            None
        };
        let m2nu = -2.0 * p.nu1;
        let m1m2nu = Cplx::new(-1.0, 0.0) - 2.0 * p.nu1;
        Ok(PicardEngine {
            params: *p,
            grid: grid.clone(),
            quad,
            gauss_eval,
            coarse,
            evaluator,
            inv_denom: Cplx::new(1.0, 0.0) / (2.0 * p.nu1 + 1.0),
            node_t: grid.points().map(|pt| pt.value()).collect(),
            pow_m2nu: grid.points().map(|pt| pt.cpow(m2nu)).collect(),
            pow_m1m2nu: grid.points().map(|pt| pt.cpow(m1m2nu)).collect(),
        })
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn grid(&self) -> &RayGrid {
        &self.grid
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    /// Weighted norm of a pair on this engine's grid.
    pub fn norm(&self, d1: &[Cplx], d2: &[Cplx]) -> Real {
        norm_on(&self.params, &self.grid, d1, d2)
    }

    fn apply_with(
        &self,
        quad: &RayQuadrature,
        gauss_eval: &GridEvaluator,
        d1: &[Cplx],
        d2: &[Cplx],
        node_t: &[Cplx],
        pow_m2nu: &[Cplx],
        pow_m1m2nu: &[Cplx],
    ) -> Result<(Vec<Cplx>, Vec<Cplx>), PicardError> {
        let d1g = quad.interpolate(d1);
        let d2g = quad.interpolate(d2);
        let mut r_gauss = Vec::with_capacity(d1g.len());
        for g in 0..d1g.len() {
            r_gauss.push(gauss_eval.r_at(g, d1g[g], d2g[g])?);
        }
        let (ia, ib) = quad.cumulative(&r_gauss);
        let two_nu1 = 2.0 * self.params.nu1;
        let n = node_t.len();
        let mut j1 = Vec::with_capacity(n);
        let mut j2 = Vec::with_capacity(n);
        for k in 0..n {
            j1.push(self.inv_denom * (node_t[k] * ia[k] - pow_m2nu[k] * ib[k]));
            j2.push(self.inv_denom * (ia[k] + two_nu1 * pow_m1m2nu[k] * ib[k]));
        }
        Ok((j1, j2))
    }

    /// One application of the integral operator to a nodal pair.
    pub fn apply(&self, d1: &[Cplx], d2: &[Cplx]) -> Result<(Vec<Cplx>, Vec<Cplx>), PicardError> {
        assert_eq!(d1.len(), self.grid.len());
        assert_eq!(d2.len(), self.grid.len());
        self.apply_with(
            &self.quad,
            &self.gauss_eval,
            d1,
            d2,
            &self.node_t,
            &self.pow_m2nu,
            &self.pow_m1m2nu,
        )
    }

    /// Two-level quadrature error estimate: the operator applied through
    /// this grid versus through the grid thinned to every other node, both
    /// compared at the innermost node in the weighted norm (the node where
    /// the weights make quadrature error largest). Infinite when the grid
    /// is too small to thin.
    pub fn quadrature_error_estimate(&self, d1: &[Cplx], d2: &[Cplx]) -> Result<Real, PicardError> {
        let Some(coarse) = &self.coarse else {
            return Ok(Real::INFINITY);
        };
        let (j1_f, j2_f) = self.apply(d1, d2)?;
        let d1c: Vec<Cplx> = coarse.idx.iter().map(|&k| d1[k]).collect();
        let d2c: Vec<Cplx> = coarse.idx.iter().map(|&k| d2[k]).collect();
        let node_t: Vec<Cplx> = coarse.idx.iter().map(|&k| self.node_t[k]).collect();
        let pow_m2nu: Vec<Cplx> = coarse.idx.iter().map(|&k| self.pow_m2nu[k]).collect();
        let pow_m1m2nu: Vec<Cplx> = coarse.idx.iter().map(|&k| self.pow_m1m2nu[k]).collect();
        let (j1_c, j2_c) = self.apply_with(
            &coarse.quad,
            &coarse.gauss_eval,
            &d1c,
            &d2c,
            &node_t,
            &pow_m2nu,
            &pow_m1m2nu,
        )?;
        let pt = self.grid.point(0);
        let w1 = pt.pow_modulus(Cplx::new(1.0, 0.0) + 2.0 * self.params.nu1);
        let w2 = pt.pow_modulus(Cplx::new(2.0, 0.0) + 2.0 * self.params.nu1);
        Ok((w1 * (j1_f[0] - j1_c[0]).norm()).max(w2 * (j2_f[0] - j2_c[0]).norm()))
    }
}

/// One application of the integral operator, packaged as a solution
/// snapshot (a convenience around [`PicardEngine::apply`] for one-shot use).
pub fn apply_j(p: &Parameters, input: &RemainderSolution) -> Result<RemainderSolution, PicardError> {
    let engine = PicardEngine::new(p, &input.grid)?;
    let (d1, d2) = engine.apply(&input.delta1, &input.delta2)?;
    let final_norm = engine.norm(&d1, &d2);
    Ok(RemainderSolution {
        grid: input.grid.clone(),
        delta1: d1,
        delta2: d2,
        iterations: 1,
        increments: Vec::new(),
        converged: false,
        final_norm,
    })
}

fn solve_on(
    engine: &PicardEngine,
    tol: Real,
    max_iter: usize,
    seed: Option<(Vec<Cplx>, Vec<Cplx>)>,
) -> Result<RemainderSolution, PicardError> {
    let p = engine.params();
    let grid = engine.grid();
    let n = grid.len();
    let zeros = vec![Cplx::new(0.0, 0.0); n];

    let estimate = engine.quadrature_error_estimate(&zeros, &zeros)?;
    let budget = tol / 10.0;
    if !(estimate < budget) {
        return Err(PicardError::QuadratureTooCoarse { estimate, budget });
    }

    let (mut d1, mut d2) = seed.unwrap_or_else(|| (zeros.clone(), zeros));
    let mut increments: Vec<Real> = Vec::new();
    let mut prev_inc: Option<Real> = None;

    for it in 1..=max_iter {
        let (n1, n2) = engine.apply(&d1, &d2)?;
        let diff1: Vec<Cplx> = n1.iter().zip(&d1).map(|(a, b)| a - b).collect();
        let diff2: Vec<Cplx> = n2.iter().zip(&d2).map(|(a, b)| a - b).collect();
        let inc = engine.norm(&diff1, &diff2);
        increments.push(inc);
        d1 = n1;
        d2 = n2;

        if inc < tol {
            // Re-verify the fixed point: one more application, whose
            // distance from the accepted pair is the certificate. The
            // fresher pair is the one returned.
            let (f1, f2) = engine.apply(&d1, &d2)?;
            let diff1: Vec<Cplx> = f1.iter().zip(&d1).map(|(a, b)| a - b).collect();
            let diff2: Vec<Cplx> = f2.iter().zip(&d2).map(|(a, b)| a - b).collect();
            let defect = engine.norm(&diff1, &diff2);
            increments.push(defect);
            let final_norm = engine.norm(&f1, &f2);
            let mut sol = RemainderSolution {
                grid: grid.clone(),
                delta1: f1,
                delta2: f2,
                iterations: it + 1,
                increments,
                converged: defect <= tol,
                final_norm,
            };
            if sol.converged {
                let worst = equation_residuals(p, &sol).worst_relative();
                if worst > RESIDUAL_BACKSTOP {
                    sol.converged = false;
                }
            }
            return Ok(sol);
        }

        if let Some(prev) = prev_inc {
            if inc >= prev && inc > 10.0 * tol {
                return Err(PicardError::NonContraction {
                    rho: grid.rho(),
                    ratio: inc / prev,
                });
            }
        }
        prev_inc = Some(inc);
    }

    let final_norm = engine.norm(&d1, &d2);
    Ok(RemainderSolution {
        grid: grid.clone(),
        delta1: d1,
        delta2: d2,
        iterations: max_iter,
        increments,
        converged: false,
        final_norm,
    })
}

/// Solve the fixed-point problem `Delta = J(Delta)` by iteration from zero.
///
/// `C = 0` short-circuits to the zero remainder (the truncated family is
/// exact there). Detected non-contraction triggers one retry on the grid
/// scaled by 4 in modulus (same node count and grading) before failing;
/// a converged result carries the grid it was actually computed on.
pub fn picard_solve(
    p: &Parameters,
    grid: &RayGrid,
    tol: Real,
    max_iter: usize,
) -> Result<RemainderSolution, PicardError> {
    if p.c == Cplx::new(0.0, 0.0) {
        let mut sol = RemainderSolution::zero(grid.clone());
        sol.converged = true;
        return Ok(sol);
    }
    let engine = PicardEngine::new(p, grid)?;
    match solve_on(&engine, tol, max_iter, None) {
        Err(PicardError::NonContraction { .. }) => {
            let scaled = RayGrid {
                theta: grid.theta,
                moduli: grid.moduli.iter().map(|m| 4.0 * m).collect(),
            };
            let engine = PicardEngine::new(p, &scaled)?;
            solve_on(&engine, tol, max_iter, None)
        }
        other => other,
    }
}

/// As [`picard_solve`], but starting from a given nodal pair instead of
/// zero, on the caller's grid (no escalation: the seed is grid-bound).
pub fn picard_solve_seeded(
    p: &Parameters,
    grid: &RayGrid,
    tol: Real,
    max_iter: usize,
    seed_d1: Vec<Cplx>,
    seed_d2: Vec<Cplx>,
) -> Result<RemainderSolution, PicardError> {
    if p.c == Cplx::new(0.0, 0.0) {
        let mut sol = RemainderSolution::zero(grid.clone());
        sol.converged = true;
        return Ok(sol);
    }
    let engine = PicardEngine::new(p, grid)?;
    solve_on(&engine, tol, max_iter, Some((seed_d1, seed_d2)))
}
