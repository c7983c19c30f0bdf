//! Constrained stability region (CSR) estimation for classical power-system
//! models using sum-of-squares Lyapunov certificates.
//!
//! The pipeline:
//!
//! 1. [`powersys`] builds a constrained polynomial system from multi-machine
//!    network data: Newton-Raphson power flow, Kron reduction to machine
//!    internal nodes, a trigonometric variable transformation of the swing
//!    equations, and low-voltage ride-through (LVRT) inequality polynomials.
//! 2. [`sos`] compiles sum-of-squares feasibility programs — with known and
//!    unknown polynomials — into semidefinite programs via the Gram-matrix
//!    method.
//! 3. [`sdp`] solves those programs with a dense homogeneous self-dual
//!    interior-point method.
//! 4. [`roa`] runs the Lyapunov synthesis: a local estimate, the expanding
//!    interior alternation, and an outer shape-update loop, producing a
//!    certificate whose level set {V ≤ 1} estimates the CSR.
//! 5. [`sim`] validates certificates against a brute-force time-domain
//!    oracle (RK4 swing integration with voltage monitoring).

pub mod poly;
pub mod sim;
pub mod powersys;
pub mod sdp;
pub mod sos;
