//! Monomial bases for Gram parameterizations.

use crate::poly::Monomial;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Ordered set of monomials serving as the vector z(x) in F = zᵀQz.
/// Entries are unique and sorted in the global graded-lex order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonomialBasis {
    nvars: usize,
    max_degree: u32,
    entries: Vec<Monomial>,
}

impl MonomialBasis {
    /// Build from an arbitrary monomial set (used by pruned Gram bases).
    pub fn from_monomials(nvars: usize, monomials: impl IntoIterator<Item = Monomial>) -> Self {
        let set: BTreeSet<Monomial> = monomials.into_iter().collect();
        for m in &set {
            assert_eq!(m.nvars(), nvars, "basis monomial has wrong variable count");
        }
        let max_degree = set.iter().map(Monomial::degree).max().unwrap_or(0);
        MonomialBasis { nvars, max_degree, entries: set.into_iter().collect() }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Monomial] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &Monomial {
        &self.entries[i]
    }

    /// Evaluate the basis vector at a point.
    pub fn eval(&self, point: &[f64]) -> Vec<f64> {
        self.entries.iter().map(|m| m.eval(point)).collect()
    }
}

/// All monomials of total degree ≤ `max_degree` in `nvars` variables,
/// graded-lex sorted.
pub fn monomials_up_to(nvars: usize, max_degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut exps = vec![0u32; nvars];
    enumerate(nvars, max_degree, 0, &mut exps, &mut out);
    out.sort();
    out
}

fn enumerate(nvars: usize, budget: u32, var: usize, exps: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if var == nvars {
        out.push(Monomial::new(exps.clone()));
        return;
    }
    for e in 0..=budget {
        exps[var] = e;
        enumerate(nvars, budget - e, var + 1, exps, out);
    }
    exps[var] = 0;
}

/// The standard basis of §-half-degree monomials: every monomial of degree
/// ≤ `half_degree`, optionally without the constant (for polynomials that
/// vanish at the origin).
pub fn make_basis(nvars: usize, half_degree: u32, include_constant: bool) -> MonomialBasis {
    let monos = monomials_up_to(nvars, half_degree)
        .into_iter()
        .filter(|m| include_constant || !m.is_constant());
    MonomialBasis::from_monomials(nvars, monos)
}
