//! SOS membership test with a certified Gram witness.
//!
//! Rather than a bare feasibility solve, the test maximizes the margin t in
//! Q = Q' + tI, zᵀQz = F, Q' ⪰ 0. The margin problem always has a strictly
//! feasible point when F is representable at all, so the interior-point
//! method never has to distinguish "infeasible" from "no interior": the sign
//! of t* decides. The returned witness is residual-projected so that
//! zᵀQz = F holds to machine precision, and its minimum eigenvalue is
//! reported as the certificate margin.

use super::basis::MonomialBasis;
use super::gram::{expand_quadratic_form, product_pairs};
use super::SosError;
use crate::poly::{Monomial, Polynomial};
use crate::sdp::{self, BlockMatrix, SdpBlock, SdpConstraint, SdpProblem, SdpSettings, SdpStatus};
use nalgebra::DMatrix;
use std::collections::{BTreeMap, BTreeSet};

/// PSD Gram certificate for an SOS polynomial.
#[derive(Clone, Debug)]
pub struct SosWitness {
    pub basis: MonomialBasis,
    pub gram: DMatrix<f64>,
    /// Minimum eigenvalue of the (projected) Gram witness.
    pub min_eig: f64,
}

impl SosWitness {
    pub fn expand(&self) -> Polynomial {
        expand_quadratic_form(&self.basis, &self.gram)
    }
}

#[derive(Clone, Debug)]
pub enum SosDecision {
    Sos(SosWitness),
    NotSos,
}

impl SosDecision {
    pub fn is_sos(&self) -> bool {
        matches!(self, SosDecision::Sos(_))
    }
}

#[derive(Clone, Debug)]
pub struct CheckSettings {
    /// Witness acceptance threshold on the projected Gram eigenvalues.
    pub eig_tol: f64,
    pub sdp: SdpSettings,
}

impl Default for CheckSettings {
    fn default() -> Self {
        let mut sdp = SdpSettings::default();
        sdp.feas_tol = 1e-9;
        sdp.gap_tol = 1e-9;
        CheckSettings { eig_tol: 1e-8, sdp }
    }
}

/// Gram basis for a concrete polynomial: degree-range pruning followed by the
/// diagonal-consistency fixpoint (drop m when m·m is unreachable and not in
/// the support).
pub(crate) fn gram_basis_for_support(nvars: usize, support: &BTreeSet<Monomial>) -> MonomialBasis {
    if support.is_empty() {
        return MonomialBasis::from_monomials(nvars, []);
    }
    let maxdeg = support.iter().map(Monomial::degree).max().unwrap();
    let mindeg = support.iter().map(Monomial::degree).min().unwrap();
    let hi = maxdeg / 2;
    let lo = mindeg.div_ceil(2);
    let mut monos: Vec<Monomial> = super::basis::monomials_up_to(nvars, hi)
        .into_iter()
        .filter(|m| m.degree() >= lo)
        .collect();
    loop {
        let basis = MonomialBasis::from_monomials(nvars, monos.iter().cloned());
        let pairs = product_pairs(&basis);
        let mut keep: Vec<Monomial> = Vec::with_capacity(monos.len());
        for m in basis.entries() {
            let sq = m.mul(m);
            let only_self = pairs.get(&sq).map(|ps| ps.len() == 1).unwrap_or(true);
            if only_self && !support.contains(&sq) {
                continue;
            }
            keep.push(m.clone());
        }
        if keep.len() == monos.len() {
            return basis;
        }
        monos = keep;
    }
}

/// Decide whether `f` is a sum of squares.
pub fn check_sos(f: &Polynomial) -> Result<SosDecision, SosError> {
    check_sos_with(f, &CheckSettings::default())
}

pub fn check_sos_with(f: &Polynomial, settings: &CheckSettings) -> Result<SosDecision, SosError> {
    if f.is_zero() {
        return Ok(SosDecision::Sos(SosWitness {
            basis: MonomialBasis::from_monomials(f.nvars(), []),
            gram: DMatrix::zeros(0, 0),
            min_eig: 0.0,
        }));
    }
    if f.degree() % 2 == 1 {
        return Ok(SosDecision::NotSos);
    }
    let support: BTreeSet<Monomial> = f.terms().map(|(m, _)| m.clone()).collect();
    let basis = gram_basis_for_support(f.nvars(), &support);
    let pairs = product_pairs(&basis);

    // support monomials with no representing pair force a nonzero coefficient
    // to vanish: not SOS over the complete degree-range basis
    for (m, _) in f.terms() {
        if !pairs.contains_key(m) {
            return Ok(SosDecision::NotSos);
        }
    }

    let n = basis.len();
    if n == 0 {
        return Ok(SosDecision::NotSos);
    }

    // blocks: Q' (n×n), t⁺ and t⁻ (margin split)
    let mut problem = SdpProblem::new(vec![
        SdpBlock { name: "gram".into(), dim: n },
        SdpBlock { name: "t_pos".into(), dim: 1 },
        SdpBlock { name: "t_neg".into(), dim: 1 },
    ]);
    for (mono, ps) in &pairs {
        let mut a = BlockMatrix::new(0);
        let mut diag_count = 0.0;
        for &(i, j) in ps {
            // inner-product convention doubles off-diagonals: v = 1 yields
            // the (2 − δ_ij) coefficient either way
            a.push(i, j, 1.0);
            if i == j {
                diag_count += 1.0;
            }
        }
        let mut terms = vec![a];
        if diag_count > 0.0 {
            let mut tp = BlockMatrix::new(1);
            tp.push(0, 0, diag_count);
            let mut tn = BlockMatrix::new(2);
            tn.push(0, 0, -diag_count);
            terms.push(tp);
            terms.push(tn);
        }
        problem.constraints.push(SdpConstraint { terms, rhs: f.coeff(mono) });
    }
    // maximize t = t⁺ − t⁻
    let mut cp = BlockMatrix::new(1);
    cp.push(0, 0, -1.0);
    let mut cn = BlockMatrix::new(2);
    cn.push(0, 0, 1.0);
    problem.objective.push(cp);
    problem.objective.push(cn);

    let sol = sdp::solve(&problem, &settings.sdp)?;
    match sol.status {
        SdpStatus::Optimal | SdpStatus::Feasible => {
            let t = sol.blocks[1][(0, 0)] - sol.blocks[2][(0, 0)];
            let mut gram = sol.blocks[0].clone();
            for i in 0..n {
                gram[(i, i)] += t;
            }
            project_gram(&mut gram, f, &basis, &pairs);
            let min_eig = gram
                .symmetric_eigenvalues()
                .iter()
                .fold(f64::INFINITY, |a, &v| a.min(v));
            if min_eig >= -settings.eig_tol {
                Ok(SosDecision::Sos(SosWitness { basis, gram, min_eig }))
            } else {
                Ok(SosDecision::NotSos)
            }
        }
        // a support monomial outside the pair span was already rejected, so
        // infeasibility here means the coefficient system is inconsistent
        SdpStatus::Infeasible => Ok(SosDecision::NotSos),
        SdpStatus::Unbounded => Err(SosError::Solver("margin problem reported unbounded".into())),
        SdpStatus::NumericalFailure => Err(SosError::Solver(format!(
            "no convergence after {} iterations",
            sol.iterations
        ))),
    }
}

/// Distribute the coefficient residuals of zᵀQz − F back onto the pairs so
/// the witness matches F exactly.
fn project_gram(
    gram: &mut DMatrix<f64>,
    f: &Polynomial,
    basis: &MonomialBasis,
    pairs: &BTreeMap<Monomial, Vec<(usize, usize)>>,
) {
    let expanded = expand_quadratic_form(basis, gram);
    for (mono, ps) in pairs {
        let defect = f.coeff(mono) - expanded.coeff(mono);
        if defect == 0.0 {
            continue;
        }
        let share = defect / ps.len() as f64;
        for &(i, j) in ps {
            if i == j {
                gram[(i, i)] += share;
            } else {
                gram[(i, j)] += share / 2.0;
                gram[(j, i)] += share / 2.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x2_plus_1_is_sos() {
        let x = Polynomial::variable(1, 0);
        let f = x.mul(&x).add(&Polynomial::constant(1, 1.0));
        let d = check_sos(&f).unwrap();
        let SosDecision::Sos(w) = d else { panic!("expected SOS") };
        assert!(w.min_eig >= -1e-8);
        assert!(w.expand().max_coeff_diff(&f) < 1e-8);
    }

    #[test]
    fn negative_square_is_not_sos() {
        let x = Polynomial::variable(1, 0);
        let f = x.mul(&x).neg();
        assert!(!check_sos(&f).unwrap().is_sos());
    }

    #[test]
    fn motzkin_is_not_sos() {
        // x⁴y² + x²y⁴ − 3x²y² + 1: nonnegative but not SOS
        let f = Polynomial::from_terms(
            2,
            vec![
                (Monomial::new(vec![4, 2]), 1.0),
                (Monomial::new(vec![2, 4]), 1.0),
                (Monomial::new(vec![2, 2]), -3.0),
                (Monomial::new(vec![0, 0]), 1.0),
            ],
        );
        assert!(!check_sos(&f).unwrap().is_sos());
    }

    #[test]
    fn odd_degree_short_circuits() {
        let x = Polynomial::variable(1, 0);
        let f = x.mul(&x).mul(&x);
        assert!(!check_sos(&f).unwrap().is_sos());
    }

    #[test]
    fn zero_is_sos() {
        assert!(check_sos(&Polynomial::zero(3)).unwrap().is_sos());
    }

    #[test]
    fn boundary_sos_accepted() {
        // (x² − 1)² is SOS with a singular optimal Gram
        let x = Polynomial::variable(1, 0);
        let g = x.mul(&x).sub(&Polynomial::constant(1, 1.0));
        let f = g.mul(&g);
        let d = check_sos(&f).unwrap();
        assert!(d.is_sos());
    }
}
