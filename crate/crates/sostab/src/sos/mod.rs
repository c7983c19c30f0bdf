//! Sum-of-squares programming on top of the [`crate::sdp`] solver.
//!
//! A polynomial F is SOS iff F = zᵀQz for a PSD Gram matrix Q over a monomial
//! basis z. [`check_sos`] decides that for a concrete polynomial;
//! [`SosProgram`] expresses feasibility problems with *unknown* polynomials
//! (free-coefficient or SOS-constrained) appearing affinely in SOS
//! constraints, and [`compile`] lowers them to block SDPs with a decode map
//! back to polynomial space.

mod basis;
mod check;
mod compile;
mod gram;
mod program;

pub use basis::{make_basis, monomials_up_to, MonomialBasis};
pub use check::{check_sos, CheckSettings, SosDecision, SosWitness};
pub use compile::{compile, CompiledSos, DecodedSos};
pub use gram::{gram_decompose, GramParam};
pub use program::{ConstraintKind, PolyExpr, SosProgram, UnknownId, UnknownKind};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SosError {
    #[error("monomial {0} of the target polynomial is not representable in the basis")]
    UnrepresentableMonomial(String),
    #[error("constraint expression is not affine in the unknowns: {0}")]
    AffinenessViolation(String),
    #[error("program has no constraints")]
    EmptyProgram,
    #[error("SOS-declared unknown `{0}` must have even degree, got {1}")]
    OddSosDegree(String, u32),
    #[error("objective is unbounded over the free coefficients")]
    UnboundedObjective,
    #[error("variable-count mismatch: {0}")]
    DimensionMismatch(String),
    #[error("SDP solver failed: {0}")]
    Solver(String),
    #[error(transparent)]
    Sdp(#[from] crate::sdp::SdpError),
}
