//! Large-|t| solution family of the sigma-form Painleve VI equation.
//!
//! The equation, for parameters (nu1, nu3, nu4) with Re(nu1) > 0, is
//!
//! ```text
//! u' (u'' t (t-1))^2 + (2 u' (t u' - u) - u'^2 - nu1^2 nu3 nu4)^2
//!     = (u' + nu1^2)^2 (u' + nu3^2) (u' + nu4^2)
//! ```
//!
//! It admits the exact solution `u = -nu1^2 t + (nu1^2 + nu3 nu4)/2`, and a
//! one-parameter family deforming it: for any constant `C` there is a unique
//! solution behaving like
//!
//! ```text
//! u(t) = -nu1^2 t + (nu1^2 + nu3 nu4)/2 + C t^(-2 nu1) + O(t^(-1-2 nu1))
//! ```
//!
//! as `t -> infinity` along a ray. This crate computes that solution and
//! machine-verifies the closed-form coefficient tables the construction rests
//! on. Modules:
//!
//! - [`domain`]: parameters, sectors, ray grids, branch-pinned complex powers.
//! - [`algebra`]: exact sparse differential polynomials over rationals; the
//!   substitution engine that turns the equation into a quadratic in the
//!   second derivative of the remainder, coefficient extraction, and identity
//!   verification against independently hand-entered reference tables.
//! - [`sigma`]: floating-point evaluation of the equation, the extracted
//!   coefficient tables, and the remainder right-hand side `F`.
//! - [`picard`]: the integral operator `J`, its weighted-norm contraction
//!   iteration, and quadrature (composite Gauss-Legendre plus analytic tail).
//! - [`ode`]: an adaptive embedded Runge-Kutta integrator used as an
//!   independent oracle for the Picard solution.
//! - [`bounds`]: the contraction bound functions and an empirical ball /
//!   contraction certificate.

pub mod algebra;
pub mod bounds;
pub mod domain;
pub mod ode;
pub mod picard;
pub mod sigma;

pub use num::complex::Complex64;

/// Real scalar type used throughout the numeric modules. Centralised so a
/// higher-precision type can be substituted by recompilation.
pub type Real = f64;

/// Complex scalar built on [`Real`].
pub type Cplx = num::complex::Complex<Real>;
