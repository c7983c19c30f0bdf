//! Gram parameterization of a polynomial over a monomial basis.
//!
//! Every symmetric Q with zᵀQz = F lives on the affine subspace
//! Q0 + span{Q_i}, where zᵀQ_i z ≡ 0. The subspace has one generating
//! "pair trade" per product monomial that is reachable by more than one
//! basis pair.

use super::{MonomialBasis, SosError};
use crate::poly::{Monomial, Polynomial};
use nalgebra::DMatrix;
use std::collections::BTreeMap;

/// Particular Gram matrix plus a spanning set of the homogeneous nullspace.
#[derive(Clone, Debug)]
pub struct GramParam {
    pub basis: MonomialBasis,
    pub q0: DMatrix<f64>,
    pub nullspace: Vec<DMatrix<f64>>,
}

impl GramParam {
    /// Re-expand zᵀQz into a polynomial.
    pub fn expand(&self, q: &DMatrix<f64>) -> Polynomial {
        expand_quadratic_form(&self.basis, q)
    }
}

/// zᵀQz as a polynomial over the basis.
pub fn expand_quadratic_form(basis: &MonomialBasis, q: &DMatrix<f64>) -> Polynomial {
    let n = basis.len();
    assert_eq!(q.nrows(), n);
    assert_eq!(q.ncols(), n);
    let mut p = Polynomial::zero(basis.nvars());
    for i in 0..n {
        for j in i..n {
            let v = if i == j { q[(i, i)] } else { q[(i, j)] + q[(j, i)] };
            if v != 0.0 {
                p.add_term(basis.entry(i).mul(basis.entry(j)), v);
            }
        }
    }
    p
}

/// Unordered basis pairs grouped by their product monomial.
pub(crate) fn product_pairs(basis: &MonomialBasis) -> BTreeMap<Monomial, Vec<(usize, usize)>> {
    let n = basis.len();
    let mut map: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..n {
        for j in i..n {
            map.entry(basis.entry(i).mul(basis.entry(j))).or_default().push((i, j));
        }
    }
    map
}

/// Decompose F over the basis: a particular Q0 with zᵀQ0z = F (coefficient
/// exact) and one nullspace generator per redundant pair.
pub fn gram_decompose(f: &Polynomial, basis: &MonomialBasis) -> Result<GramParam, SosError> {
    if f.nvars() != basis.nvars() {
        return Err(SosError::DimensionMismatch(format!(
            "polynomial has {} variables, basis {}",
            f.nvars(),
            basis.nvars()
        )));
    }
    let n = basis.len();
    let pairs = product_pairs(basis);
    let mut q0 = DMatrix::zeros(n, n);
    for (m, c) in f.terms() {
        let Some(ps) = pairs.get(m) else {
            return Err(SosError::UnrepresentableMonomial(format!("{}", Polynomial::from_terms(f.nvars(), [(m.clone(), 1.0)]))));
        };
        let (i, j) = ps[0];
        if i == j {
            q0[(i, i)] = c;
        } else {
            q0[(i, j)] = c / 2.0;
            q0[(j, i)] = c / 2.0;
        }
    }
    let mut nullspace = Vec::new();
    for ps in pairs.values() {
        if ps.len() < 2 {
            continue;
        }
        let (i0, j0) = ps[0];
        let w0 = if i0 == j0 { 1.0 } else { 0.5 };
        for &(i, j) in &ps[1..] {
            let mut nmat = DMatrix::zeros(n, n);
            nmat[(i0, j0)] = w0;
            nmat[(j0, i0)] = w0;
            let w = if i == j { -1.0 } else { -0.5 };
            nmat[(i, j)] = w;
            nmat[(j, i)] = w;
            nullspace.push(nmat);
        }
    }
    Ok(GramParam { basis: basis.clone(), q0, nullspace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use crate::sos::make_basis;

    #[test]
    fn complete_square() {
        // x^2 + 2x + 1 over [1, x]: unique Gram [[1,1],[1,1]]
        let x = Polynomial::variable(1, 0);
        let f = x.mul(&x).add(&x.scale(2.0)).add(&Polynomial::constant(1, 1.0));
        let basis = make_basis(1, 1, true);
        let g = gram_decompose(&f, &basis).unwrap();
        assert_eq!(g.nullspace.len(), 0);
        assert_eq!(g.q0[(0, 0)], 1.0);
        assert_eq!(g.q0[(0, 1)], 1.0);
        assert_eq!(g.q0[(1, 1)], 1.0);
        assert!(g.expand(&g.q0).max_coeff_diff(&f) < 1e-10);
    }

    #[test]
    fn quartic_nullspace_dimension() {
        // x^4 over [1, x, x^2]: one pair trade (x^2·x^2 vs x·x^3... here 1·x^4
        // pairing is absent, the trade is between (x,x)-style duplicates of x^2)
        let x = Polynomial::variable(1, 0);
        let f = x.mul(&x).mul(&x).mul(&x);
        let basis = make_basis(1, 2, true);
        let g = gram_decompose(&f, &basis).unwrap();
        assert_eq!(g.nullspace.len(), 1);
        for nmat in &g.nullspace {
            assert!(g.expand(nmat).is_zero());
        }
        assert!(g.expand(&g.q0).max_coeff_diff(&f) < 1e-10);
    }

    #[test]
    fn zero_polynomial() {
        let f = Polynomial::zero(2);
        let basis = make_basis(2, 1, true);
        let g = gram_decompose(&f, &basis).unwrap();
        assert_eq!(g.q0.norm(), 0.0);
        // every generator satisfies zᵀQz = 0
        for nmat in &g.nullspace {
            assert!(g.expand(nmat).is_zero());
        }
    }

    #[test]
    fn unrepresentable_monomial_rejected() {
        // constant term but basis excludes the constant monomial
        let f = Polynomial::constant(1, 1.0);
        let basis = make_basis(1, 1, false);
        assert!(matches!(
            gram_decompose(&f, &basis),
            Err(SosError::UnrepresentableMonomial(_))
        ));
    }
}
