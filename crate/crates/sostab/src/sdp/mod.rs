//! Dense semidefinite programming.
//!
//! Problems are given in standard conic form over a block-diagonal PSD
//! variable:
//!
//! ```text
//! minimize    Σ_k ⟨C_k, X_k⟩
//! subject to  Σ_k ⟨A_{i,k}, X_k⟩ = b_i     i = 1..m
//!             X_k ⪰ 0
//! ```
//!
//! Constraint and cost matrices are symmetric and stored as sparse upper
//! triangles. The solver ([`solve`]) is a primal-dual interior-point method
//! on the homogeneous self-dual embedding with Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector step; infeasibility is detected through the
//! embedding's τ/κ ratio and dual improving rays.

mod solver;

pub use solver::solve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A named PSD block variable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpBlock {
    pub name: String,
    pub dim: usize,
}

/// Sparse symmetric matrix acting on one block. Entries are `(row, col, value)`
/// with `row <= col`; the value is stored once and implied on the mirrored
/// position.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockMatrix {
    pub block: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl BlockMatrix {
    pub fn new(block: usize) -> Self {
        BlockMatrix { block, entries: Vec::new() }
    }

    /// Accumulate a symmetric entry (indices are normalized to `row <= col`).
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        let (r, c) = if row <= col { (row, col) } else { (col, row) };
        self.entries.push((r, c, value));
    }

    /// ⟨A, X⟩ with the off-diagonal doubling implied by symmetry.
    pub fn inner(&self, x: &nalgebra::DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.entries {
            acc += if i == j { v * x[(i, i)] } else { 2.0 * v * x[(i, j)] };
        }
        acc
    }

    /// Dense symmetric realization.
    pub fn to_dense(&self, dim: usize) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        }
        m
    }

    pub fn frobenius(&self, dim: usize) -> f64 {
        self.to_dense(dim).norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |a, &(_, _, v)| a.max(v.abs()))
    }
}

/// One linear equality constraint Σ_k ⟨A_{i,k}, X_k⟩ = rhs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpConstraint {
    pub terms: Vec<BlockMatrix>,
    pub rhs: f64,
}

/// A complete SDP in block standard form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpProblem {
    pub blocks: Vec<SdpBlock>,
    pub constraints: Vec<SdpConstraint>,
    /// Per-block cost matrices; empty for pure feasibility.
    pub objective: Vec<BlockMatrix>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<SdpBlock>) -> Self {
        SdpProblem { blocks, constraints: Vec::new(), objective: Vec::new() }
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_feasibility(&self) -> bool {
        self.objective.iter().all(|c| c.entries.iter().all(|e| e.2 == 0.0))
    }

    /// Structural validation: block references and entry indices in range,
    /// finite values, at least one block.
    pub fn validate(&self) -> Result<(), SdpError> {
        if self.blocks.is_empty() {
            return Err(SdpError::InvalidProblem("no blocks declared".into()));
        }
        for b in &self.blocks {
            if b.dim == 0 {
                return Err(SdpError::InvalidProblem(format!("block {} has dimension 0", b.name)));
            }
        }
        let check = |mat: &BlockMatrix, what: &str| -> Result<(), SdpError> {
            let Some(blk) = self.blocks.get(mat.block) else {
                return Err(SdpError::InvalidProblem(format!("{what} references unknown block {}", mat.block)));
            };
            for &(i, j, v) in &mat.entries {
                if i > j || j >= blk.dim {
                    return Err(SdpError::InvalidProblem(format!(
                        "{what} entry ({i},{j}) out of range for block {} (dim {})",
                        blk.name, blk.dim
                    )));
                }
                if !v.is_finite() {
                    return Err(SdpError::InvalidProblem(format!("{what} has non-finite entry")));
                }
            }
            Ok(())
        };
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(SdpError::InvalidProblem(format!("constraint {i} rhs not finite")));
            }
            for t in &c.terms {
                check(t, &format!("constraint {i}"))?;
            }
        }
        for t in &self.objective {
            check(t, "objective")?;
        }
        Ok(())
    }

    /// Sparse-triplet JSON dump for debugging compiled programs.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("SdpProblem serialization")
    }
}

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("invalid SDP: {0}")]
    InvalidProblem(String),
}

/// Termination status of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    /// Converged with a nonzero objective.
    Optimal,
    /// Converged on a pure feasibility problem.
    Feasible,
    /// Certified primal infeasibility (dual improving ray found).
    Infeasible,
    /// Certified dual infeasibility (primal objective unbounded below).
    Unbounded,
    /// No conclusion within the iteration budget.
    NumericalFailure,
}

/// Solver tolerances and limits.
#[derive(Clone, Debug)]
pub struct SdpSettings {
    pub eig_tol: f64,
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Fraction-to-boundary step damping.
    pub step_frac: f64,
    /// Declare infeasibility when τ/κ drops below this.
    pub tau_kappa_tol: f64,
    pub verbose: bool,
}

impl Default for SdpSettings {
    fn default() -> Self {
        SdpSettings {
            eig_tol: 1e-8,
            feas_tol: 1e-7,
            gap_tol: 1e-7,
            max_iter: 200,
            step_frac: 0.98,
            tau_kappa_tol: 1e-8,
            verbose: false,
        }
    }
}

/// Result of a solve. `blocks` and `dual` hold the de-homogenized primal and
/// dual iterates when the status is `Optimal`/`Feasible`; on `Infeasible` the
/// dual vector carries the normalized improving ray.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub blocks: Vec<nalgebra::DMatrix<f64>>,
    pub dual: nalgebra::DVector<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub objective: f64,
    pub iterations: usize,
}
