//! Numerical laboratory for discrete Schrödinger operators
//!
//! ```text
//! (Hψ)(n) = ψ(n+1) + ψ(n-1) + V(n) ψ(n)
//! ```
//!
//! on the half-line with decaying, oscillating potentials.

// `!(x > a)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dd;
pub mod error;
pub mod expsum;
pub mod kruger;
pub mod operator;
pub mod potentials;
pub mod pruefer;
pub mod spectra;
pub mod summation;

pub use error::{Error, Result};
pub use potentials::{
    eval_potential, phase_value, validate_spec, Mode, OscTerm, PhaseSpec, PotentialSpec, RawSpec, RawTerm,
    Reduction, Tail, TailKind, Violation, ViolationCode,
};
