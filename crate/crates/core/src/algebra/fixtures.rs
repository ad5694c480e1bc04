//! Loader for the hand-transcribed reference expansions shipped as plain-text
//! monomial lists under `fixtures/`.
//!
//! Keeping the transcriptions out of the source tree (and out of the engine's
//! code path) means a typo in a transcription shows up as a reported residual
//! monomial rather than silently biasing both sides of an identity check.

use super::poly::{DiffPoly, Expo, NVARS};
use num::BigRational;
use std::fmt;
use std::str::FromStr;

/// Errors from fixture parsing.
#[derive(Debug)]
pub enum FixtureError {
    /// A line did not have the expected 11 fields.
    BadArity { line: usize, got: usize },
    /// A field failed to parse as a rational or integer.
    BadField { line: usize, field: String },
}

impl fmt::Display for FixtureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixtureError::BadArity { line, got } => {
                write!(f, "fixture line {}: expected 11 fields, got {}", line, got)
            }
            FixtureError::BadField { line, field } => {
                write!(f, "fixture line {}: cannot parse field {:?}", line, field)
            }
        }
    }
}

impl std::error::Error for FixtureError {}

/// Parse a monomial-list fixture into a polynomial. Lines starting with `;`
/// (after trimming) and blank lines are ignored; parentheses are decorative.
pub fn parse_fixture(text: &str) -> Result<DiffPoly, FixtureError> {
    let mut acc = DiffPoly::zero();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim().trim_start_matches('(').trim_end_matches(')').trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != NVARS + 2 {
            return Err(FixtureError::BadArity {
                line: idx + 1,
                got: fields.len(),
            });
        }
        let coeff = BigRational::from_str(fields[0]).map_err(|_| FixtureError::BadField {
            line: idx + 1,
            field: fields[0].to_string(),
        })?;
        let mut e: Expo = [0; NVARS];
        for (k, slot) in e.iter_mut().enumerate() {
            *slot = fields[k + 1].parse().map_err(|_| FixtureError::BadField {
                line: idx + 1,
                field: fields[k + 1].to_string(),
            })?;
        }
        let e_tm1: i32 = fields[NVARS + 1].parse().map_err(|_| FixtureError::BadField {
            line: idx + 1,
            field: fields[NVARS + 1].to_string(),
        })?;
        acc = acc.add(&DiffPoly::monomial_tm1(coeff, e, e_tm1));
    }
    Ok(acc)
}

macro_rules! fixture_loader {
    ($name:ident, $file:literal) => {
        #[doc = concat!("The reference expansion from `fixtures/", $file, "`.")]
        pub fn $name() -> DiffPoly {
            parse_fixture(include_str!(concat!("../../fixtures/", $file)))
                .expect(concat!("malformed fixture ", $file))
        }
    };
}

fixture_loader!(reference_t2, "quad_t2.sexp");
fixture_loader!(reference_t1, "quad_t1.sexp");
fixture_loader!(reference_t0_pure, "quad_t0_pure.sexp");
fixture_loader!(reference_t0_lin_d, "quad_t0_lin_d.sexp");
fixture_loader!(reference_t0_lin_d1, "quad_t0_lin_d1.sexp");
fixture_loader!(reference_t0_higher, "quad_t0_higher.sexp");
fixture_loader!(reference_dominant_linear, "dominant_linear.sexp");

/// The full reference reconstruction of the zeroth quadratic coefficient:
/// pure part + D-linear + D1-linear + higher-order part.
pub fn reference_t0() -> DiffPoly {
    reference_t0_pure()
        .add(&reference_t0_lin_d())
        .add(&reference_t0_lin_d1())
        .add(&reference_t0_higher())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::poly::{VarVals, VN1, VT};
    use num::complex::Complex64;

    #[test]
    fn parses_comments_and_parens() {
        let p = parse_fixture("; header\n\n(2 1 0 0 0 0 0 0 0 0 0)\n(-1/2 0 0 0 0 0 0 0 0 0 0)\n")
            .unwrap();
        let expected = DiffPoly::var(VT, 1)
            .scale_int(2)
            .add(&DiffPoly::constant(BigRational::new((-1).into(), 2.into())));
        assert_eq!(p, expected);
    }

    #[test]
    fn arity_error_reports_line() {
        let err = parse_fixture("(1 2 3)\n").unwrap_err();
        match err {
            FixtureError::BadArity { line, got } => {
                assert_eq!(line, 1);
                assert_eq!(got, 3);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn reference_t2_has_seven_monomials_before_reduction() {
        // The reference keeps the (t-1)^2-denominator shape; after canonical
        // reduction it collapses to the three-term normal form.
        let raw = include_str!("../../fixtures/quad_t2.sexp");
        let body = raw
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim().starts_with(';'))
            .count();
        assert_eq!(body, 7);
        let p = reference_t2();
        assert_eq!(p.num_terms(), 3);
        // Normal form: n1^2 + 2 n1 C t^-1 T^-2 - D1.
        let v = VarVals {
            t: Complex64::new(7.0, 0.0),
            big_t: Complex64::new(3.0, 0.0),
            d: Complex64::new(0.0, 0.0),
            d1: Complex64::new(0.25, 0.0),
            d2: Complex64::new(0.0, 0.0),
            c: Complex64::new(2.0, 0.0),
            n1: Complex64::new(1.5, 0.0),
            n3: Complex64::new(0.0, 0.0),
            n4: Complex64::new(0.0, 0.0),
        };
        let want = Complex64::new(1.5 * 1.5 + 2.0 * 1.5 * 2.0 / (7.0 * 9.0) - 0.25, 0.0);
        assert!((p.eval(&v) - want).norm() < 1e-14);
    }

    #[test]
    fn reference_t2_derivative_slot_is_minus_one() {
        let p = reference_t2();
        assert_eq!(p.coeff_of_state(0, 1, 0), DiffPoly::int(-1));
        let mut e = [0i16; crate::algebra::poly::NVARS];
        e[VN1] = 2;
        // The state-free part has leading constant n1^2.
        assert_eq!(
            p.coeff_of_state(0, 0, 0).leading_constant(),
            DiffPoly::monomial(BigRational::from_integer(1.into()), e)
        );
    }
}
