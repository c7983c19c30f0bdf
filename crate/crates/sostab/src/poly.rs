//! Sparse multivariate polynomials over `f64` coefficients.
//!
//! Polynomials are the common currency between the SOS compiler, the ROA
//! algorithms and the power-system transformation. Terms are kept in a
//! `BTreeMap` keyed by monomial in graded-lexicographic order, which makes
//! every iteration (display, evaluation, coefficient matching) deterministic.
//!
//! Values are immutable after construction; all operations return new
//! polynomials. Coefficients with magnitude below [`COEFF_EPS`] are dropped
//! on canonicalization — SDP solutions are only ~1e-8 accurate, anything
//! smaller is noise.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

/// Canonicalization threshold: terms with |coefficient| below this are dropped.
pub const COEFF_EPS: f64 = 1e-12;

/// Exponent vector of a single monomial. Length always equals the ambient
/// variable count of the polynomial it belongs to.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial { exps }
    }

    /// The constant monomial (all exponents zero).
    pub fn one(nvars: usize) -> Self {
        Monomial { exps: vec![0; nvars] }
    }

    /// The monomial `x_var`.
    pub fn var(nvars: usize, var: usize) -> Self {
        assert!(var < nvars, "variable index {var} out of range for {nvars} variables");
        let mut exps = vec![0; nvars];
        exps[var] = 1;
        Monomial { exps }
    }

    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    pub fn exps(&self) -> &[u32] {
        &self.exps
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    /// Product of two monomials (exponent-wise sum).
    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.exps.len(), other.exps.len());
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.exps.len());
        let mut v = 1.0;
        for (x, &e) in point.iter().zip(&self.exps) {
            v *= x.powi(e as i32);
        }
        v
    }
}

/// Graded lexicographic order: total degree first, ties broken
/// lexicographically on the exponent vector. Fixed globally so Gram bases
/// and coefficient-matching rows come out in a reproducible order.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.exps.cmp(&other.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{:?}", self.exps)
    }
}

/// Sparse multivariate polynomial with `f64` coefficients.
///
/// Invariants: no stored coefficient has magnitude below [`COEFF_EPS`], no
/// duplicate monomial keys, every monomial has exactly `nvars` exponents.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    /// The polynomial `x_var`.
    pub fn variable(nvars: usize, var: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, var), 1.0);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, f64)>>(nvars: usize, terms: I) -> Self {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Max total degree over terms; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Min total degree over terms; 0 for the zero polynomial.
    pub fn min_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).min().unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Accumulate `c` onto monomial `m`, dropping the term if it cancels
    /// below the canonicalization threshold.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        assert_eq!(
            m.nvars(),
            self.nvars,
            "monomial has {} exponents, polynomial has {} variables",
            m.nvars(),
            self.nvars
        );
        let new = self.terms.get(&m).copied().unwrap_or(0.0) + c;
        if new.abs() < COEFF_EPS {
            self.terms.remove(&m);
        } else {
            self.terms.insert(m, new);
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars, "variable-count mismatch in add");
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars, "variable-count mismatch in sub");
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), -c);
        }
        out
    }

    pub fn neg(&self) -> Polynomial {
        let mut out = Self::zero(self.nvars);
        for (m, c) in self.terms() {
            out.add_term(m.clone(), -c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Self::zero(self.nvars);
        for (m, c) in self.terms() {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars, "variable-count mismatch in mul");
        let mut out = Self::zero(self.nvars);
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    /// Term-wise power rule: ∂p/∂x_var.
    pub fn differentiate(&self, var: usize) -> Polynomial {
        assert!(var < self.nvars, "variable index {var} out of range");
        let mut out = Self::zero(self.nvars);
        for (m, c) in self.terms() {
            let e = m.exps()[var];
            if e == 0 {
                continue;
            }
            let mut exps = m.exps().to_vec();
            exps[var] = e - 1;
            out.add_term(Monomial::new(exps), c * e as f64);
        }
        out
    }

    /// Directional derivative along a vector field: Σ_i ∂p/∂x_i · f_i.
    pub fn lie_derivative(&self, field: &[Polynomial]) -> Polynomial {
        assert_eq!(
            field.len(),
            self.nvars,
            "vector field has {} components, polynomial has {} variables",
            field.len(),
            self.nvars
        );
        let mut out = Self::zero(self.nvars);
        for (i, f) in field.iter().enumerate() {
            out = out.add(&self.differentiate(i).mul(f));
        }
        out
    }

    /// Evaluate at a point. Terms are summed in graded-lex monomial order,
    /// so the result is reproducible bit-for-bit.
    pub fn evaluate(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.nvars, "point has wrong dimension");
        let mut acc = 0.0;
        for (m, c) in self.terms() {
            acc += c * m.eval(point);
        }
        acc
    }

    /// Largest absolute coefficient difference against `other`, over the
    /// union of supports.
    pub fn max_coeff_diff(&self, other: &Polynomial) -> f64 {
        assert_eq!(self.nvars, other.nvars);
        let mut d: f64 = 0.0;
        for (m, c) in self.terms() {
            d = d.max((c - other.coeff(m)).abs());
        }
        for (m, c) in other.terms() {
            d = d.max((c - self.coeff(m)).abs());
        }
        d
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0_f64, |a, c| a.max(c.abs()))
    }

    /// Render with custom variable labels, e.g. `["z1", "z2", ...]`.
    pub fn display_with<'a>(&'a self, labels: &'a [String]) -> PolyDisplay<'a> {
        assert_eq!(labels.len(), self.nvars);
        PolyDisplay { poly: self, labels: Some(labels) }
    }
}

/// Default labels are `z1..zn`.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        PolyDisplay { poly: self, labels: None }.fmt(f)
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

pub struct PolyDisplay<'a> {
    poly: &'a Polynomial,
    labels: Option<&'a [String]>,
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.poly.terms() {
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let mag = fmt_sig(c.abs());
            if m.is_constant() {
                write!(f, "{mag}")?;
                continue;
            }
            write!(f, "{mag}")?;
            for (i, &e) in m.exps().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                match self.labels {
                    Some(ls) => write!(f, "*{}", ls[i])?,
                    None => write!(f, "*z{}", i + 1)?,
                }
                if e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Compact rendering with ~6 significant digits (printf "%g" style).
fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e6).contains(&a) {
        let digits = (5 - a.log10().floor() as i32).max(0) as usize;
        let s = format!("{v:.digits$}");
        let trimmed = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.')
        } else {
            &s
        };
        trimmed.to_string()
    } else {
        format!("{v:.5e}")
    }
}

/// Convenience: p(z) = Σ z_i² in `nvars` variables.
pub fn sum_of_squares_of_vars(nvars: usize) -> Polynomial {
    let mut p = Polynomial::zero(nvars);
    for i in 0..nvars {
        let mut exps = vec![0; nvars];
        exps[i] = 2;
        p.add_term(Monomial::new(exps), 1.0);
    }
    p
}
