//! Problem parameters, sectors at infinity, ray grids and branch-pinned
//! complex powers.
//!
//! All asymptotics in this crate live on a ray `t = r e^{i theta}` going to
//! infinity inside a sector. Powers like `t^{-2 nu1}` are multivalued; every
//! numeric routine here fixes the branch by `log t = ln r + i theta` with the
//! ray angle `theta` itself, not the principal argument. [`cpow`] and
//! [`RayPoint::cpow`] implement that convention.

use crate::{Cplx, Real};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Errors from constructing or validating domain objects.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainError {
    /// `Re(nu1)` must be positive for the remainder norm to be finite.
    NonPositiveRealPart(Cplx),
    /// `2 nu1 + 1` must not vanish (it divides the integral operator).
    ResonantNu1(Cplx),
    /// Sector angles must satisfy `angle_lo < angle_hi < angle_lo + 2 pi`.
    BadSectorAngles { lo: Real, hi: Real },
    /// The inner radius of a sector must exceed 1.
    BadSectorRadius(Real),
    /// Ray angle must lie inside the sector.
    ThetaOutsideSector { theta: Real, lo: Real, hi: Real },
    /// Outer modulus must exceed the inner radius strictly.
    DegenerateInterval { rho: Real, t_max: Real },
    /// At least two nodes are needed to form a quadrature cell.
    TooFewNodes(usize),
    /// A point handed to a branch-pinned operation is off the ray.
    OffRay { expected_theta: Real, got: Cplx },
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainError::NonPositiveRealPart(v) => {
                write!(f, "Re(nu1) must be positive (got {})", v)
            }
            DomainError::ResonantNu1(v) => {
                write!(f, "2*nu1 + 1 must be nonzero (got nu1 = {})", v)
            }
            DomainError::BadSectorAngles { lo, hi } => write!(
                f,
                "sector angles must satisfy lo < hi < lo + 2*pi (got lo = {}, hi = {})",
                lo, hi
            ),
            DomainError::BadSectorRadius(r) => {
                write!(f, "sector radius must exceed 1 (got {})", r)
            }
            DomainError::ThetaOutsideSector { theta, lo, hi } => write!(
                f,
                "ray angle {} lies outside the sector [{}, {}]",
                theta, lo, hi
            ),
            DomainError::DegenerateInterval { rho, t_max } => write!(
                f,
                "outer modulus must exceed the inner radius (rho = {}, t_max = {})",
                rho, t_max
            ),
            DomainError::TooFewNodes(n) => {
                write!(f, "grid needs at least 2 nodes (got {})", n)
            }
            DomainError::OffRay {
                expected_theta,
                got,
            } => write!(
                f,
                "point {} does not lie on the ray with angle {}",
                got, expected_theta
            ),
        }
    }
}

impl std::error::Error for DomainError {}

fn serialize_cplx<S: Serializer>(v: &Cplx, s: S) -> Result<S::Ok, S::Error> {
    [v.re, v.im].serialize(s)
}

fn deserialize_cplx<'de, D: Deserializer<'de>>(d: D) -> Result<Cplx, D::Error> {
    let pair = <[Real; 2]>::deserialize(d)?;
    Ok(Cplx::new(pair[0], pair[1]))
}

/// Equation parameters `(nu1, nu3, nu4)` together with the asymptotic
/// constant `C` selecting one member of the solution family.
///
/// Serialized as `{"nu1": [re, im], "nu3": ..., "nu4": ..., "C": ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    #[serde(
        serialize_with = "serialize_cplx",
        deserialize_with = "deserialize_cplx"
    )]
    pub nu1: Cplx,
    #[serde(
        serialize_with = "serialize_cplx",
        deserialize_with = "deserialize_cplx"
    )]
    pub nu3: Cplx,
    #[serde(
        serialize_with = "serialize_cplx",
        deserialize_with = "deserialize_cplx"
    )]
    pub nu4: Cplx,
    #[serde(
        rename = "C",
        serialize_with = "serialize_cplx",
        deserialize_with = "deserialize_cplx"
    )]
    pub c: Cplx,
}

/// Validated constructor for [`Parameters`].
///
/// Requires `Re(nu1) > 0` and asserts `2 nu1 + 1 != 0` (automatic given the
/// first condition, but checked explicitly since the integral operator
/// divides by it).
pub fn make_parameters(nu1: Cplx, nu3: Cplx, nu4: Cplx, c: Cplx) -> Result<Parameters, DomainError> {
    if !(nu1.re > 0.0) {
        return Err(DomainError::NonPositiveRealPart(nu1));
    }
    let two_nu1_plus_1 = 2.0 * nu1 + Cplx::new(1.0, 0.0);
    if two_nu1_plus_1.norm() == 0.0 {
        return Err(DomainError::ResonantNu1(nu1));
    }
    Ok(Parameters { nu1, nu3, nu4, c })
}

impl Parameters {
    pub fn new(nu1: Cplx, nu3: Cplx, nu4: Cplx, c: Cplx) -> Result<Self, DomainError> {
        make_parameters(nu1, nu3, nu4, c)
    }

    /// Convenience constructor from real parts.
    pub fn real(nu1: Real, nu3: Real, nu4: Real, c: Real) -> Result<Self, DomainError> {
        make_parameters(
            Cplx::new(nu1, 0.0),
            Cplx::new(nu3, 0.0),
            Cplx::new(nu4, 0.0),
            Cplx::new(c, 0.0),
        )
    }
}

/// A sector `{ t : angle_lo <= arg t <= angle_hi, |t| >= rho }` at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub angle_lo: Real,
    pub angle_hi: Real,
    pub rho: Real,
}

impl Sector {
    pub fn new(angle_lo: Real, angle_hi: Real, rho: Real) -> Result<Self, DomainError> {
        if !(angle_lo < angle_hi && angle_hi < angle_lo + 2.0 * std::f64::consts::PI) {
            return Err(DomainError::BadSectorAngles {
                lo: angle_lo,
                hi: angle_hi,
            });
        }
        if !(rho > 1.0) {
            return Err(DomainError::BadSectorRadius(rho));
        }
        Ok(Sector {
            angle_lo,
            angle_hi,
            rho,
        })
    }

    pub fn contains_angle(&self, theta: Real) -> bool {
        self.angle_lo <= theta && theta <= self.angle_hi
    }
}

/// Branch choice for complex powers: `log t = ln |t| + i theta` along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchRef {
    pub theta: Real,
}

impl BranchRef {
    pub fn new(theta: Real) -> Self {
        BranchRef { theta }
    }
}

/// A point on a ray, stored as modulus and angle so the branch of `log` is
/// exact by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayPoint {
    pub modulus: Real,
    pub theta: Real,
}

impl RayPoint {
    pub fn new(modulus: Real, theta: Real) -> Self {
        RayPoint { modulus, theta }
    }

    /// The complex value `r e^{i theta}`.
    pub fn value(&self) -> Cplx {
        Cplx::from_polar(self.modulus, self.theta)
    }

    /// `t^p` on the pinned branch: `exp(p (ln r + i theta))`.
    pub fn cpow(&self, p: Cplx) -> Cplx {
        let log_t = Cplx::new(self.modulus.ln(), self.theta);
        (p * log_t).exp()
    }

    /// Modulus of `t^p` on the pinned branch: `r^{Re p} e^{-Im p * theta}`.
    pub fn pow_modulus(&self, p: Cplx) -> Real {
        (p.re * self.modulus.ln() - p.im * self.theta).exp()
    }
}

/// `t^p` on the branch pinned by `branch`, for a point `t` on that ray.
///
/// The point is validated to lie on the ray (within a small relative slack)
/// and the power is computed from `ln |t| + i theta`, which stays continuous
/// when the ray crosses the negative real axis.
pub fn cpow(t: Cplx, p: Cplx, branch: &BranchRef) -> Result<Cplx, DomainError> {
    let r = t.norm();
    if r == 0.0 {
        return Err(DomainError::OffRay {
            expected_theta: branch.theta,
            got: t,
        });
    }
    let expected = Cplx::from_polar(r, branch.theta);
    if (t - expected).norm() > 1e-9 * r {
        return Err(DomainError::OffRay {
            expected_theta: branch.theta,
            got: t,
        });
    }
    Ok(RayPoint::new(r, branch.theta).cpow(p))
}

/// Node spacing rule for [`RayGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grading {
    /// Moduli in geometric progression (uniform in `log |t|`). Default.
    Geometric,
    /// Moduli in arithmetic progression.
    Uniform,
}

/// A finite grid of nodes on the ray `arg t = theta`, moduli strictly
/// increasing from the sector radius `rho` to `t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayGrid {
    pub theta: Real,
    pub moduli: Vec<Real>,
}

impl RayGrid {
    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn branch(&self) -> BranchRef {
        BranchRef::new(self.theta)
    }

    pub fn point(&self, k: usize) -> RayPoint {
        RayPoint::new(self.moduli[k], self.theta)
    }

    pub fn points(&self) -> impl Iterator<Item = RayPoint> + '_ {
        self.moduli
            .iter()
            .map(move |&r| RayPoint::new(r, self.theta))
    }

    pub fn rho(&self) -> Real {
        self.moduli[0]
    }

    pub fn t_max(&self) -> Real {
        *self.moduli.last().unwrap()
    }
}

/// Build a grid of `n` nodes on the ray `arg t = theta` spanning
/// `[sector.rho, t_max]`.
///
/// Geometric grading places nodes uniformly in `log |t|`; uniform grading
/// uniformly in `|t|`. Requires `theta` inside the sector, `t_max >
/// sector.rho`, and `n >= 2`. (Solver entry points additionally require a
/// quadrature-grade density; see [`crate::picard`].)
pub fn make_ray_grid(
    sector: &Sector,
    theta: Real,
    t_max: Real,
    n: usize,
    grading: Grading,
) -> Result<RayGrid, DomainError> {
    if !sector.contains_angle(theta) {
        return Err(DomainError::ThetaOutsideSector {
            theta,
            lo: sector.angle_lo,
            hi: sector.angle_hi,
        });
    }
    if !(t_max > sector.rho) {
        return Err(DomainError::DegenerateInterval {
            rho: sector.rho,
            t_max,
        });
    }
    if n < 2 {
        return Err(DomainError::TooFewNodes(n));
    }
    let rho = sector.rho;
    let mut moduli = Vec::with_capacity(n);
    match grading {
        Grading::Geometric => {
            let step = (t_max / rho).ln() / (n - 1) as Real;
            for k in 0..n {
                moduli.push(rho * (step * k as Real).exp());
            }
        }
        Grading::Uniform => {
            let step = (t_max - rho) / (n - 1) as Real;
            for k in 0..n {
                moduli.push(rho + step * k as Real);
            }
        }
    }
    // Endpoints exactly as requested, independent of rounding in the loop.
    moduli[0] = rho;
    moduli[n - 1] = t_max;
    debug_assert!(moduli.windows(2).all(|w| w[0] < w[1]));
    Ok(RayGrid { theta, moduli })
}

/// Serializable grid specification, the external form of a sector + grid:
/// `{"rho": .., "theta": .., "t_max": .., "n": .., "grading": "geometric"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rho: Real,
    pub theta: Real,
    pub t_max: Real,
    pub n: usize,
    pub grading: Grading,
    /// Sector half-width around `theta`; defaults to `pi/4` on input.
    #[serde(default = "default_half_width")]
    pub half_width: Real,
}

fn default_half_width() -> Real {
    std::f64::consts::FRAC_PI_4
}

impl GridSpec {
    pub fn sector(&self) -> Result<Sector, DomainError> {
        Sector::new(
            self.theta - self.half_width,
            self.theta + self.half_width,
            self.rho,
        )
    }

    pub fn build(&self) -> Result<RayGrid, DomainError> {
        let sector = self.sector()?;
        make_ray_grid(&sector, self.theta, self.t_max, self.n, self.grading)
    }
}
