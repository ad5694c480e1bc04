//! Exact sparse rational-coefficient algebra for the substituted equation.
//!
//! The pipeline: [`poly`] provides the differential-polynomial ring (variables
//! `t`, `T = t^nu1`, the remainder jets `D`, `D1`, `D2`, the tail amplitude
//! `C`, and the parameters), [`subst`] substitutes the deformed solution into
//! the equation and normalises the result into a quadratic in `D2`,
//! [`extract`] peels that quadratic into the named coefficient table, and
//! [`verify`] checks the table against independently hand-entered reference
//! fixtures ([`fixtures`]) together with every splitting and regrouping
//! identity the numeric solver relies on. [`ratfn`] supplies the thin
//! rational-function layer used when denominators cannot be cleared up front.

pub mod extract;
pub mod fixtures;
pub mod poly;
pub mod ratfn;
pub mod subst;
pub mod verify;
