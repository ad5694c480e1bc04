//! Machine verification of the closed-form identities behind the remainder
//! equation.
//!
//! Every check here is exact rational arithmetic: "passes" means a residual
//! that is the zero polynomial, never a small norm. Reference expansions are
//! loaded from the fixture files; everything else is derived by the
//! substitution engine, which uses only the equation and the expansion ansatz.
//! Where a reference display admits more than one reading (a sign, a swapped
//! pair of coefficient names, an overall prefactor), the checker tests the
//! candidate readings and records which one closes, reporting the rest as
//! findings rather than failures.

use super::extract::{extract_coefficients, lead_a2, lead_c0, lead_c1, CoefficientTable};
use super::fixtures;
use super::poly::{DiffPoly, Expo, NVARS, VBIGT, VC, VD, VD1, VD2, VN1, VT};
use super::ratfn::RatFn;
use super::subst::{expansion_is_consistent, substitute_expansion, substituted_equation, QuadraticInD2};
use serde::Serialize;
use std::sync::OnceLock;

/// One exact identity check.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub passed: bool,
    /// Number of monomials left over when the check compares two expansions
    /// (zero on pass).
    pub residual_monomials: usize,
    pub detail: String,
}

/// The full verification report.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
    /// Resolved-convention notes and documented discrepancies between the
    /// reference displays and the engine-derived forms.
    pub findings: Vec<String>,
    /// Sign with which the dominant linear reference block enters the
    /// splitting of the driving ratio.
    pub dominant_linear_sign: i64,
    /// Which cubic denominator closes the tau identity.
    pub cubic_denominator: String,
    /// Prefactor needed on the squared scaled numerator in the tau identity.
    pub tau_prefactor: i64,
    pub all_passed: bool,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.all_passed
    }
}

fn check(name: &str, passed: bool, residual_monomials: usize, detail: String) -> IdentityCheck {
    IdentityCheck {
        name: name.to_string(),
        passed,
        residual_monomials,
        detail,
    }
}

/// Monomial t^et * T^ebt with unit coefficient.
fn pw(et: i16, ebt: i16) -> DiffPoly {
    let mut e: Expo = [0; NVARS];
    e[VT] = et;
    e[VBIGT] = ebt;
    DiffPoly::monomial(num::BigRational::from_integer(1.into()), e)
}

fn describe_residual(residual: &DiffPoly) -> String {
    if residual.is_zero() {
        return "residual is the zero polynomial".to_string();
    }
    let mut terms = residual.terms_strings();
    let total = terms.len();
    terms.truncate(8);
    let mut s = format!("{} residual monomial(s): {}", total, terms.join(", "));
    if total > 8 {
        s.push_str(", ...");
    }
    s
}

fn poly_match(name: &str, engine: &DiffPoly, reference: &DiffPoly) -> IdentityCheck {
    let residual = engine.sub(reference);
    check(
        name,
        residual.is_zero(),
        residual.num_terms(),
        describe_residual(&residual),
    )
}

/// The cached substituted quadratic (the substitution is by far the most
/// expensive exact computation; every verifier consumes the same one).
pub fn quadratic() -> &'static QuadraticInD2 {
    static CACHE: OnceLock<QuadraticInD2> = OnceLock::new();
    CACHE.get_or_init(substitute_expansion)
}

/// The cached coefficient table extracted from [`quadratic`].
pub fn coefficients() -> &'static CoefficientTable {
    static CACHE: OnceLock<CoefficientTable> = OnceLock::new();
    CACHE.get_or_init(|| {
        extract_coefficients(quadratic()).expect("coefficient extraction must succeed")
    })
}

/// The splitting of the driving ratio T0/T1 into a pure decay term, linear
/// state weights, and the master quartic numerator over the shared linear
/// denominator:
///
/// ```text
/// T0/T1 = f0 + alpha D + beta D1 + n / (b1 + a1 D1)
/// ```
///
/// Shared between the exact verifier (which proves the identity closes) and
/// the numeric evaluators (which use it as an independent evaluation path).
pub struct MasterSplitting {
    /// Pure decay term `c2 / (b1 t^3 T^2)`; state-free.
    pub f0: RatFn,
    /// Weight of `D`: `c0 / (b1 t^2)`; state-free.
    pub alpha: RatFn,
    /// Weight of `D1`: `c1/(b1 t) - a1 c2/(b1^2 t^3 T^2)`; state-free.
    pub beta: RatFn,
    /// Master quartic numerator; contains the state variables.
    pub n: RatFn,
    /// Shared linear denominator `b1 + a1 D1`.
    pub denom: DiffPoly,
}

/// Cached [`MasterSplitting`] built from the extracted coefficient table.
pub fn master_splitting() -> &'static MasterSplitting {
    static CACHE: OnceLock<MasterSplitting> = OnceLock::new();
    CACHE.get_or_init(|| {
        let table = coefficients();
        let d1_v = DiffPoly::var(VD1, 1);
        let s1 = pw(0, 2).mul(&DiffPoly::var(VD, 1));
        let s2 = pw(1, 2).mul(&d1_v);
        let p = |a: &DiffPoly, et: i16, ebt: i16| RatFn::from_poly(a.mul(&pw(et, ebt)));
        let over_b1 =
            |a: DiffPoly, et: i16, ebt: i16| RatFn::new(a.mul(&pw(et, ebt)), table.b1.clone());
        let s1s1 = s1.mul(&s1);
        let s2s2 = s2.mul(&s2);
        let n = p(&table.q3.mul(&s1s1).mul(&s2s2), -4, -6)
            .add(&p(&table.q2.mul(&s2s2).mul(&s1), -3, -4))
            .add(&p(&table.q5.mul(&s1).mul(&s2s2).mul(&s2), -4, -6))
            .add(&p(&table.d1.mul(&s2).mul(&s1s1), -3, -4))
            .add(&over_b1(table.c0.mul(&table.a1).mul(&s2).mul(&s1).neg(), -3, -4))
            .add(&p(&table.d2.mul(&s2).mul(&s1), -2, -2))
            .add(&p(&table.q6.mul(&s2s2).mul(&s2s2), -4, -6))
            .add(&p(&table.q4.mul(&s2s2).mul(&s2), -3, -4))
            .add(&p(&table.d3.mul(&s1s1), -2, -2))
            .add(&over_b1(table.c1.mul(&table.a1).mul(&s2s2).neg(), -3, -4))
            .add(&RatFn::new(
                table.c2.mul(&table.a1).mul(&table.a1).mul(&s2s2).mul(&pw(-5, -6)),
                table.b1.mul(&table.b1),
            ))
            .add(&p(&table.q1.mul(&s2s2), -2, -2));
        MasterSplitting {
            f0: RatFn::new(table.c2.clone(), table.b1.mul(&pw(3, 2))),
            alpha: RatFn::new(table.c0.clone(), table.b1.mul(&pw(2, 0))),
            beta: RatFn::new(table.c1.clone(), table.b1.mul(&pw(1, 0))).sub(&RatFn::new(
                table.a1.mul(&table.c2),
                table.b1.mul(&table.b1).mul(&pw(3, 2)),
            )),
            n,
            denom: table.b1.add(&table.a1.mul(&d1_v)),
        }
    })
}

/// Compare the three engine-derived quadratic coefficients against the
/// hand-transcribed reference expansions, monomial by monomial.
pub fn verify_t0_decomposition(q: &QuadraticInD2) -> Vec<IdentityCheck> {
    let mut checks = Vec::new();
    checks.push(poly_match(
        "second-derivative-square-coefficient-matches-reference",
        &q.t2,
        &fixtures::reference_t2(),
    ));
    checks.push(poly_match(
        "linear-second-derivative-coefficient-matches-reference",
        &q.t1,
        &fixtures::reference_t1(),
    ));
    checks.push(poly_match(
        "zeroth-coefficient-matches-reference",
        &q.t0,
        &fixtures::reference_t0(),
    ));
    checks
}

/// Verify the splitting of the driving ratio, the regroupings of its
/// numerator, and the tau identity, resolving the ambiguous readings.
/// Returns the checks, the findings, and the resolved conventions
/// (sign, cubic denominator, tau prefactor).
pub fn verify_splittings(
    table: &CoefficientTable,
    q: &QuadraticInD2,
) -> (Vec<IdentityCheck>, Vec<String>, i64, String, i64) {
    let mut checks = Vec::new();
    let mut findings = Vec::new();

    let d_v = DiffPoly::var(VD, 1);
    let d1_v = DiffPoly::var(VD1, 1);
    let two_n1 = DiffPoly::var(VN1, 1).scale_int(2);
    let s1 = pw(0, 2).mul(&d_v); // T^2 D
    let s2 = pw(1, 2).mul(&d1_v); // t T^2 D1
    let x_big = q.t0.mul(&pw(2, 2)); // scaled zeroth coefficient
    let denom_linear = table.b1.add(&table.a1.mul(&d1_v));
    let denom_swapped = table.a1.add(&table.b1.mul(&d1_v));

    // --- proportionality of the first two coefficients ------------------
    // The linear coefficient is -a1 t^-2 T^-2 times the quadratic one,
    // equivalently b1 = -a1 * a2.
    {
        let residual = table.b1.add(&table.a1.mul(&table.a2));
        checks.push(check(
            "linear-coefficient-proportional-to-quadratic-one",
            residual.is_zero(),
            residual.num_terms(),
            describe_residual(&residual),
        ));
    }

    // --- limit ratios of the linear-in-state weights ---------------------
    let c0_plus = table.c0.add(&two_n1.mul(&table.b1));
    let c0_minus_b = table.c0.sub(&two_n1.mul(&table.b1));
    let c1_minus = table.c1.sub(&two_n1.mul(&table.b1));
    let c0_minus_a = table.c0.sub(&two_n1.mul(&table.a1));
    let c1_plus_a = table.c1.add(&two_n1.mul(&table.a1));
    let t_c0_plus = DiffPoly::var(VT, 1).mul(&c0_plus);
    let t_c1_minus = DiffPoly::var(VT, 1).mul(&c1_minus);
    let ratios_ok = c0_plus.leading_constant().is_zero()
        && c1_minus.leading_constant().is_zero()
        && t_c0_plus.is_bounded_at_infinity()
        && t_c1_minus.is_bounded_at_infinity()
        && !table.b1.leading_constant().is_zero();
    checks.push(check(
        "limit-ratios-of-linear-weights",
        ratios_ok,
        c0_plus.leading_constant().num_terms() + c1_minus.leading_constant().num_terms(),
        "c0/b1 + 2 n1 and c1/b1 - 2 n1 both gain a factor 1/t".to_string(),
    ));
    if !c0_minus_a.leading_constant().is_zero() && !c1_plus_a.leading_constant().is_zero() {
        findings.push(format!(
            "the limit ratios close against b1 with reversed signs (c0/b1 -> -2 n1, \
             c1/b1 -> +2 n1); the a1-based forms do not decay: c0 - 2 n1 a1 has leading \
             constant {} and c1 + 2 n1 a1 has leading constant {}",
            c0_minus_a.leading_constant().terms_strings().join(" + "),
            c1_plus_a.leading_constant().terms_strings().join(" + "),
        ));
    }
    if !c0_minus_b.leading_constant().is_zero() {
        findings.push(
            "the dominant linear block enters the splitting negated: the driving ratio \
             equals F0 - (2 n1 t^-2 D - 2 n1 t^-1 D1) + subleading linear + remainder"
                .to_string(),
        );
    }

    // Subleading ratio weights are bounded: with b1's leading constant
    // nonzero, ctilde5 = t (c0 + 2 n1 b1)/b1 and
    // ctilde6 = t (c1 - 2 n1 b1)/b1 - a1 c2/(b1^2 t T^2) are ratios of
    // bounded expansions, the second term with extra decay.
    {
        let ok = t_c0_plus.is_bounded_at_infinity()
            && t_c1_minus.is_bounded_at_infinity()
            && table.a1.mul(&table.c2).is_bounded_at_infinity()
            && !table.b1.leading_constant().is_zero();
        checks.push(check(
            "subleading-ratio-weights-bounded",
            ok,
            0,
            "numerators of the subleading linear weights stay bounded at infinity".to_string(),
        ));
    }

    // --- master splitting of the driving ratio ---------------------------
    // driving ratio = F0 + alpha D + beta D1 + N / (b1 + a1 D1); pieces are
    // built once in master_splitting() and shared with the numeric path.
    let ms = master_splitting();
    let n_master = &ms.n;
    {
        let lhs = RatFn::new(q.t0.clone(), q.t1.clone());
        let rhs = ms
            .f0
            .add(&ms.alpha.mul(&RatFn::from_poly(d_v.clone())))
            .add(&ms.beta.mul(&RatFn::from_poly(d1_v.clone())))
            .add(&n_master.div(&RatFn::from_poly(denom_linear.clone())));
        let residual = lhs.residual_numerator(&rhs);
        checks.push(check(
            "driving-ratio-splitting-closes",
            residual.is_zero(),
            residual.num_terms(),
            describe_residual(&residual),
        ));
        findings.push(
            "the subleading derivative weight carries a minus sign: \
             beta = c1/(b1 t) - a1 c2/(b1^2 t^3 T^2)"
                .to_string(),
        );
    }

    // --- regrouping of the master numerator ------------------------------
    {
        let n_dom = RatFn::from_poly(
            table
                .d2
                .mul(&s2)
                .mul(&s1)
                .add(&table.d3.mul(&s1).mul(&s1))
                .add(&table.q1.mul(&s2).mul(&s2))
                .mul(&pw(-2, -2)),
        );
        let mid = table
            .c0
            .mul(&s1)
            .mul(&table.a1)
            .neg()
            .add(&table.q4.mul(&s2).mul(&s2).mul(&table.b1))
            .add(&table.q2.mul(&s2).mul(&s1).mul(&table.b1))
            .add(&table.d1.mul(&s1).mul(&s1).mul(&table.b1))
            .sub(&table.c1.mul(&table.a1).mul(&s2));
        let delta_n = RatFn::new(
            table.c2.mul(&table.a1).mul(&table.a1).mul(&s2).mul(&s2).mul(&pw(-5, -6)),
            table.b1.mul(&table.b1),
        )
        .add(&RatFn::new(s2.mul(&mid).mul(&pw(-3, -4)), table.b1.clone()))
        .add(&RatFn::from_poly(
            s2.mul(&s2)
                .mul(
                    &table
                        .q5
                        .mul(&s2)
                        .mul(&s1)
                        .add(&table.q6.mul(&s2).mul(&s2))
                        .add(&table.q3.mul(&s1).mul(&s1)),
                )
                .mul(&pw(-4, -6)),
        ));
        let residual = n_master.residual_numerator(&delta_n.add(&n_dom));
        checks.push(check(
            "master-numerator-regrouping",
            residual.is_zero(),
            residual.num_terms(),
            describe_residual(&residual),
        ));
    }

    // --- the scaled numerator and its square -----------------------------
    let q_exact = pw(1, 1).mul(&x_big); // t T times the scaled zeroth coefficient
    let y_dom = table
        .d3
        .mul(&s1)
        .mul(&s1)
        .add(&table.c1.mul(&s2))
        .add(&table.c0.mul(&s1))
        .add(&table.d2.mul(&s2).mul(&s1))
        .add(&table.q1.mul(&s2).mul(&s2));
    let delta_small = s2
        .mul(
            &table
                .q4
                .mul(&s2)
                .mul(&s2)
                .add(&table.q2.mul(&s2).mul(&s1))
                .add(&table.d1.mul(&s1).mul(&s1)),
        )
        .mul(&pw(-2, -3))
        .add(
            &s2.mul(&s2)
                .mul(
                    &table
                        .q6
                        .mul(&s2)
                        .mul(&s2)
                        .add(&table.q5.mul(&s2).mul(&s1))
                        .add(&table.q3.mul(&s1).mul(&s1)),
                )
                .mul(&pw(-3, -5)),
        );
    {
        let regrouped = y_dom
            .mul(&pw(-1, -1))
            .add(&table.c2.mul(&pw(-2, -1)))
            .add(&delta_small);
        let residual = q_exact.sub(&regrouped);
        checks.push(check(
            "scaled-numerator-regrouping",
            residual.is_zero(),
            residual.num_terms(),
            describe_residual(&residual),
        ));
    }
    {
        // The itemized display of the scaled numerator doubles the d1 block
        // and omits the q5 block; verify the residual is exactly that.
        let displayed = table
            .q4
            .mul(&s2)
            .mul(&s2)
            .mul(&s2)
            .mul(&pw(-2, -3))
            .add(&table.q3.mul(&s1).mul(&s1).mul(&s2).mul(&s2).mul(&pw(-3, -5)))
            .add(&table.q6.mul(&s2).mul(&s2).mul(&s2).mul(&s2).mul(&pw(-3, -5)))
            .add(&table.d3.mul(&s1).mul(&s1).mul(&pw(-1, -1)))
            .add(&table.c1.mul(&s2).mul(&pw(-1, -1)))
            .add(&table.c2.mul(&pw(-2, -1)))
            .add(&table.c0.mul(&s1).mul(&pw(-1, -1)))
            .add(&table.d1.mul(&s2).mul(&s1).mul(&s1).mul(&pw(-2, -3)).scale_int(2))
            .add(&table.q2.mul(&s2).mul(&s2).mul(&s1).mul(&pw(-2, -3)))
            .add(&table.d2.mul(&s2).mul(&s1).mul(&pw(-1, -1)))
            .add(&table.q1.mul(&s2).mul(&s2).mul(&pw(-1, -1)));
        let expected_gap = table
            .d1
            .mul(&s2)
            .mul(&s1)
            .mul(&s1)
            .mul(&pw(-2, -3))
            .sub(&table.q5.mul(&s1).mul(&s2).mul(&s2).mul(&s2).mul(&pw(-3, -5)));
        let residual = displayed.sub(&q_exact).sub(&expected_gap);
        checks.push(check(
            "itemized-scaled-numerator-gap-is-classified",
            residual.is_zero(),
            residual.num_terms(),
            describe_residual(&residual),
        ));
        if residual.is_zero() && !expected_gap.is_zero() {
            findings.push(
                "the itemized scaled-numerator display differs from the exact expansion by \
                 d1 S2 S1^2/(t^2 T^3) - q5 S1 S2^3/(t^3 T^5): its S2 S1^2 weight is doubled \
                 and its q5 block is missing; the grouped display is exact"
                    .to_string(),
            );
        }
    }
    {
        let q_dom = y_dom.mul(&y_dom).mul(&pw(-2, -2));
        let delta_q = table
            .c2
            .mul(&table.c2)
            .mul(&pw(-4, -2))
            .add(&delta_small.mul(&delta_small))
            .add(&y_dom.mul(&table.c2).mul(&pw(-3, -2)).scale_int(2))
            .add(&y_dom.mul(&delta_small).mul(&pw(-1, -1)).scale_int(2))
            .add(&table.c2.mul(&delta_small).mul(&pw(-2, -1)).scale_int(2));
        let residual = q_exact.mul(&q_exact).sub(&q_dom).sub(&delta_q);
        checks.push(check(
            "scaled-numerator-square-splitting",
            residual.is_zero(),
            residual.num_terms(),
            describe_residual(&residual),
        ));
        findings.push(
            "with delta taken as displayed (denominators included), the square splits as \
             Q^2 = Y^2/(t^2 T^2) + c2^2/(t^4 T^2) + delta^2 + 2 Y c2/(t^3 T^2) \
             + 2 Y delta/(t T) + 2 c2 delta/(t^2 T); the displayed correction's \
             delta^2 and cross-term denominators instead treat delta as its leading numerator"
                .to_string(),
        );
    }

    // --- the tau identity -------------------------------------------------
    // tau times the common square-root factor equals, as an exact rational
    // function, 4 (T0/T1)^2 (T2/T1). Test prefactors 1 and 4 against both
    // cubic denominators.
    let mut tau_prefactor = 0i64;
    let mut cubic_denominator = String::new();
    {
        let w = RatFn::new(
            q.t0.mul(&q.t0).mul(&q.t2).scale_int(4),
            q.t1.mul(&q.t1).mul(&q.t1),
        );
        let qq_t2 = q_exact.mul(&q_exact).mul(&q.t2);
        let candidates = [
            (4i64, &denom_linear, "(b1 + a1 D1)^3"),
            (4, &denom_swapped, "(a1 + b1 D1)^3"),
            (1, &denom_linear, "(b1 + a1 D1)^3"),
            (1, &denom_swapped, "(a1 + b1 D1)^3"),
        ];
        // Find one reading that closes by the full cross-multiplied identity;
        // the ring has no zero divisors and the shared numerator factor is
        // nonzero, so any other reading closes iff its scaled cubic
        // denominator agrees with the closing one — a small-polynomial test.
        let mut closing = Vec::new();
        let mut witness: Option<(i64, DiffPoly)> = None;
        for (k, den, label) in candidates {
            let agrees = match &witness {
                Some((k0, den0_cubed)) => {
                    den.pow(3).scale_int(*k0).sub(&den0_cubed.scale_int(k)).is_zero()
                }
                None => w.equals(&RatFn::new(qq_t2.scale_int(k), den.pow(3))),
            };
            if agrees {
                if witness.is_none() {
                    witness = Some((k, den.pow(3)));
                }
                closing.push((k, label));
            }
        }
        let passed = closing.len() == 1;
        if let Some((k, d)) = closing.first() {
            tau_prefactor = *k;
            cubic_denominator = d.to_string();
        }
        checks.push(check(
            "tau-identity-resolution",
            passed,
            0,
            format!(
                "closing readings: {:?}",
                closing
                    .iter()
                    .map(|(k, d)| format!("prefactor {k}, denominator {d}"))
                    .collect::<Vec<_>>()
            ),
        ));
        if passed {
            findings.push(format!(
                "the tau identity closes with prefactor {} and cubic denominator {}; \
                 the other readings leave nonzero residuals",
                tau_prefactor, cubic_denominator
            ));
        }
    }

    // --- sign resolution of the dominant linear block ---------------------
    let sign = if c0_plus.leading_constant().is_zero() {
        -1i64
    } else if c0_minus_b.leading_constant().is_zero() {
        1
    } else {
        0
    };
    {
        // The reference block must read +2 n1 t^-2 D - 2 n1 t^-1 D1 so that
        // the resolved sign is meaningful.
        let reference = fixtures::reference_dominant_linear();
        let expected = two_n1
            .mul(&pw(-2, 0))
            .mul(&d_v)
            .sub(&two_n1.mul(&pw(-1, 0)).mul(&d1_v));
        let residual = reference.sub(&expected);
        checks.push(check(
            "dominant-linear-reference-block",
            residual.is_zero() && sign != 0,
            residual.num_terms(),
            format!("resolved sign: {sign}"),
        ));
    }

    (checks, findings, sign, cubic_denominator, tau_prefactor)
}

/// Run the complete identity verification and assemble the report.
pub fn verify_identities() -> IdentityReport {
    let mut checks = Vec::new();
    let mut findings = Vec::new();

    // Jet consistency of the expansion and exactness of the base solution.
    checks.push(check(
        "expansion-derivative-consistency",
        expansion_is_consistent(),
        0,
        "formal derivative of the expansion reproduces the next jet entry".to_string(),
    ));
    {
        let eq = substituted_equation();
        let vanishing = eq
            .iter_terms()
            .all(|(e, _)| e[VC] > 0 || e[VD] > 0 || e[VD1] > 0 || e[VD2] > 0);
        checks.push(check(
            "exact-solution-annihilates-equation",
            vanishing,
            0,
            "every monomial of the substituted equation carries C or a state variable"
                .to_string(),
        ));
    }

    let q = quadratic();
    checks.extend(verify_t0_decomposition(q));

    // Degeneracy structure: the linear coefficient vanishes exactly when the
    // tail amplitude C does.
    {
        let all_carry_c = q.t1.iter_terms().all(|(e, _)| e[VC] > 0);
        checks.push(check(
            "linear-coefficient-carries-tail-amplitude",
            all_carry_c && !q.t1.is_zero(),
            0,
            "the linear coefficient vanishes iff C = 0".to_string(),
        ));
    }

    let table = coefficients();
    checks.push(check(
        "quadratic-coefficient-leading-constant",
        table.a2.leading_constant() == lead_a2(),
        0,
        "a2 -> n1^2".to_string(),
    ));
    checks.push(check(
        "derivative-weight-leading-constant",
        table.c1.leading_constant() == lead_c1(),
        0,
        "c1 -> 8 n1^4 C (2 n1 + 1)".to_string(),
    ));
    checks.push(check(
        "state-weight-leading-constant",
        table.c0.leading_constant() == lead_c0(),
        0,
        "c0 -> -8 n1^4 C (2 n1 + 1)".to_string(),
    ));
    {
        let even = q.t0.all_big_t_exponents_even()
            && q.t1.all_big_t_exponents_even()
            && q.t2.all_big_t_exponents_even();
        checks.push(check(
            "big-t-exponents-even",
            even,
            0,
            "only even powers of T appear, so numeric evaluation needs t^(2 n1) only"
                .to_string(),
        ));
    }

    let (split_checks, split_findings, sign, cubic, prefactor) = verify_splittings(table, q);
    checks.extend(split_checks);
    findings.extend(split_findings);

    // Homogeneous solutions of the dominant linear operator.
    {
        let apply_l = |y: &DiffPoly| -> DiffPoly {
            let y1 = y.derive().expect("state-free input");
            let y2 = y1.derive().expect("state-free input");
            let two_n1 = DiffPoly::var(VN1, 1).scale_int(2);
            y2.add(&two_n1.mul(&pw(-1, 0)).mul(&y1))
                .sub(&two_n1.mul(&pw(-2, 0)).mul(y))
        };
        let r1 = apply_l(&DiffPoly::var(VT, 1));
        let r2 = apply_l(&pw(0, -2));
        checks.push(check(
            "homogeneous-solutions-annihilated",
            r1.is_zero() && r2.is_zero(),
            r1.num_terms() + r2.num_terms(),
            "the dominant linear operator annihilates t and t^(-2 n1)".to_string(),
        ));
    }

    // Guard: no third-derivative leakage into the extracted pieces.
    {
        let clean = q.t0.iter_terms().all(|(e, _)| e[VD2] == 0)
            && q.t1.iter_terms().all(|(e, _)| e[VD2] == 0)
            && q.t2.iter_terms().all(|(e, _)| e[VD2] == 0);
        checks.push(check(
            "quadratic-coefficients-free-of-second-derivative",
            clean,
            0,
            "each collected coefficient is free of D2".to_string(),
        ));
    }

    let all_passed = checks.iter().all(|c| c.passed);
    IdentityReport {
        checks,
        findings,
        dominant_linear_sign: sign,
        cubic_denominator: cubic,
        tau_prefactor: prefactor,
        all_passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_report_passes() {
        let report = verify_identities();
        for c in &report.checks {
            assert!(c.passed, "check {} failed: {}", c.name, c.detail);
        }
        assert!(report.all_passed());
        assert_eq!(report.dominant_linear_sign, -1);
        assert_eq!(report.tau_prefactor, 4);
        assert_eq!(report.cubic_denominator, "(b1 + a1 D1)^3");
    }

    #[test]
    fn injected_typo_is_pinpointed() {
        // Corrupt one reference monomial and confirm the residual names it.
        let mut reference = fixtures::reference_t2();
        let mut e = [0i16; NVARS];
        e[VC] = 1;
        e[VN1] = 1;
        e[VT] = -1;
        e[VBIGT] = -2;
        reference = reference.add(&DiffPoly::monomial(
            num::BigRational::from_integer(1.into()),
            e,
        ));
        let residual = quadratic().t2.sub(&reference);
        assert_eq!(residual.num_terms(), 1);
        let shown = residual.terms_strings().join(" ");
        assert!(shown.contains("C"), "residual display {shown} names the monomial");
    }

    #[test]
    fn zeroth_reference_contains_the_stated_spot_monomials() {
        // Two spot checks pinning the transcription: the quartic-derivative
        // weight and the highest tail-amplitude block.
        let q = quadratic();
        let quartic = q.t0.coeff_of_state(0, 4, 0);
        let expected = DiffPoly::monomial_tm1(
            num::BigRational::from_integer((-4).into()),
            {
                let mut e = [0i16; NVARS];
                e[VT] = -1;
                e
            },
            -1,
        );
        assert_eq!(quartic, expected);

        // The C^4 block of the state-free part equals
        // -16 n1^2 C^4 [(1+2n1)^2 t - 2 n1 (1+2n1)] / (t^5 (t-1)^2 T^8).
        let pure = fixtures::reference_t0_pure();
        let mut acc = DiffPoly::zero();
        for (e, coeff) in pure.iter_terms() {
            if e[VC] == 4 {
                acc = acc.add(&DiffPoly::monomial_tm1(
                    coeff.clone(),
                    *e,
                    -(pure.tm1_power() as i32),
                ));
            }
        }
        let n1 = DiffPoly::var(VN1, 1);
        let one_plus_2n1 = DiffPoly::one().add(&n1.scale_int(2));
        let c_pow = DiffPoly::var(VC, 4);
        let bracket = one_plus_2n1
            .mul(&one_plus_2n1)
            .mul(&DiffPoly::var(VT, 1))
            .sub(&n1.scale_int(2).mul(&one_plus_2n1));
        let expected_c4 = c_pow
            .mul(&n1.pow(2))
            .mul(&bracket)
            .mul(&pw(-5, -8))
            .scale_int(-16)
            .div_tm1(2);
        assert_eq!(acc, expected_c4);
    }
}
