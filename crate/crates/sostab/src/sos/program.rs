//! SOS feasibility programs with unknown polynomials.
//!
//! Unknowns are either *free* (sign-unconstrained coefficient vectors — the
//! Lyapunov candidate V and the equality-manifold multipliers λ) or
//! *SOS-declared* (the s multipliers, Gram-parameterized directly by a PSD
//! block). Constraint expressions must stay affine in the unknowns; the
//! expression type only offers known×unknown products, and a general product
//! of two expressions is rejected at build time when both carry unknowns.

use super::SosError;
use crate::poly::Polynomial;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct UnknownId(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnknownKind {
    /// Free coefficients up to the degree bound; optionally without a
    /// constant term (polynomials pinned to 0 at the origin).
    Free { vanish_at_origin: bool },
    /// Constrained to be SOS; even degree bound required.
    Sos,
}

#[derive(Clone, Debug)]
pub(crate) struct UnknownDecl {
    pub name: String,
    pub kind: UnknownKind,
    pub degree: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Expression must be a sum of squares.
    Sos,
    /// Expression must vanish identically (coefficient-wise zero).
    Zero,
}

/// Polynomial expression affine in the unknowns:
/// `known + Σ_k multiplier_k · unknown_k`.
#[derive(Clone, Debug)]
pub struct PolyExpr {
    pub(crate) nvars: usize,
    pub(crate) known: Polynomial,
    /// (unknown, known multiplier polynomial); one entry per unknown.
    pub(crate) terms: Vec<(UnknownId, Polynomial)>,
}

impl PolyExpr {
    pub fn from_poly(p: Polynomial) -> Self {
        PolyExpr { nvars: p.nvars(), known: p, terms: Vec::new() }
    }

    pub fn zero(nvars: usize) -> Self {
        PolyExpr::from_poly(Polynomial::zero(nvars))
    }

    pub fn from_unknown(nvars: usize, id: UnknownId) -> Self {
        PolyExpr {
            nvars,
            known: Polynomial::zero(nvars),
            terms: vec![(id, Polynomial::constant(nvars, 1.0))],
        }
    }

    pub fn has_unknowns(&self) -> bool {
        !self.terms.is_empty()
    }

    pub fn add(&self, other: &PolyExpr) -> PolyExpr {
        assert_eq!(self.nvars, other.nvars, "variable-count mismatch");
        let mut out = self.clone();
        out.known = out.known.add(&other.known);
        for (id, mult) in &other.terms {
            out.accumulate(*id, mult.clone());
        }
        out
    }

    pub fn sub(&self, other: &PolyExpr) -> PolyExpr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> PolyExpr {
        PolyExpr {
            nvars: self.nvars,
            known: self.known.neg(),
            terms: self.terms.iter().map(|(id, m)| (*id, m.neg())).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> PolyExpr {
        PolyExpr {
            nvars: self.nvars,
            known: self.known.scale(s),
            terms: self.terms.iter().map(|(id, m)| (*id, m.scale(s))).collect(),
        }
    }

    /// Multiply by a known polynomial (keeps affineness).
    pub fn mul_poly(&self, p: &Polynomial) -> PolyExpr {
        assert_eq!(self.nvars, p.nvars(), "variable-count mismatch");
        PolyExpr {
            nvars: self.nvars,
            known: self.known.mul(p),
            terms: self.terms.iter().map(|(id, m)| (*id, m.mul(p))).collect(),
        }
    }

    /// General product; rejected when both factors carry unknowns.
    pub fn mul(&self, other: &PolyExpr) -> Result<PolyExpr, SosError> {
        match (self.has_unknowns(), other.has_unknowns()) {
            (true, true) => Err(SosError::AffinenessViolation(
                "product of two unknown-bearing expressions".into(),
            )),
            (_, false) => Ok(self.mul_poly(&other.known)),
            (false, _) => Ok(other.mul_poly(&self.known)),
        }
    }

    fn accumulate(&mut self, id: UnknownId, mult: Polynomial) {
        if let Some((_, m)) = self.terms.iter_mut().find(|(i, _)| *i == id) {
            *m = m.add(&mult);
        } else {
            self.terms.push((id, mult));
        }
        self.terms.retain(|(_, m)| !m.is_zero());
    }
}

/// Linear objective over unknown coefficients: minimize
/// Σ weight · coeff(unknown, monomial).
#[derive(Clone, Debug, Default)]
pub struct SosObjective {
    pub(crate) terms: Vec<(UnknownId, crate::poly::Monomial, f64)>,
}

/// A complete SOS program over a fixed variable count.
#[derive(Clone, Debug)]
pub struct SosProgram {
    pub(crate) nvars: usize,
    pub(crate) unknowns: Vec<UnknownDecl>,
    pub(crate) constraints: Vec<(ConstraintKind, PolyExpr, String)>,
    pub(crate) objective: Option<SosObjective>,
}

impl SosProgram {
    pub fn new(nvars: usize) -> Self {
        SosProgram { nvars, unknowns: Vec::new(), constraints: Vec::new(), objective: None }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Declare a free-coefficient unknown polynomial.
    pub fn add_free_poly(&mut self, name: &str, degree: u32, vanish_at_origin: bool) -> UnknownId {
        self.unknowns.push(UnknownDecl {
            name: name.to_string(),
            kind: UnknownKind::Free { vanish_at_origin },
            degree,
        });
        UnknownId(self.unknowns.len() - 1)
    }

    /// Declare an SOS-constrained unknown (Gram-parameterized multiplier).
    pub fn add_sos_poly(&mut self, name: &str, degree: u32) -> UnknownId {
        self.unknowns.push(UnknownDecl { name: name.to_string(), kind: UnknownKind::Sos, degree });
        UnknownId(self.unknowns.len() - 1)
    }

    pub fn unknown(&self, id: UnknownId) -> PolyExpr {
        PolyExpr::from_unknown(self.nvars, id)
    }

    /// Require `expr` to be a sum of squares.
    pub fn require_sos(&mut self, label: &str, expr: PolyExpr) {
        assert_eq!(expr.nvars, self.nvars, "variable-count mismatch");
        self.constraints.push((ConstraintKind::Sos, expr, label.to_string()));
    }

    /// Require `expr` to vanish coefficient-wise.
    pub fn require_zero(&mut self, label: &str, expr: PolyExpr) {
        assert_eq!(expr.nvars, self.nvars, "variable-count mismatch");
        self.constraints.push((ConstraintKind::Zero, expr, label.to_string()));
    }

    /// Minimize a linear functional of unknown coefficients.
    pub fn set_objective(&mut self, objective: SosObjective) {
        self.objective = Some(objective);
    }

    pub(crate) fn decl(&self, id: UnknownId) -> &UnknownDecl {
        &self.unknowns[id.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_unknowns_rejected() {
        let mut prog = SosProgram::new(1);
        let a = prog.add_free_poly("a", 2, false);
        let b = prog.add_sos_poly("b", 2);
        let ea = prog.unknown(a);
        let eb = prog.unknown(b);
        assert!(matches!(ea.mul(&eb), Err(SosError::AffinenessViolation(_))));
        // known × unknown stays fine either way around
        let k = PolyExpr::from_poly(Polynomial::variable(1, 0));
        assert!(ea.mul(&k).is_ok());
        assert!(k.mul(&eb).is_ok());
    }

    #[test]
    fn expression_algebra_merges_terms() {
        let mut prog = SosProgram::new(2);
        let v = prog.add_free_poly("v", 2, true);
        let x = Polynomial::variable(2, 0);
        let e = prog.unknown(v).mul_poly(&x).add(&prog.unknown(v).mul_poly(&x.neg()));
        assert!(!e.has_unknowns());
    }
}
