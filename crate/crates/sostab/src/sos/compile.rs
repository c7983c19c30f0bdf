//! Lowering of [`SosProgram`]s to block SDPs.
//!
//! Every SOS constraint gets a Gram block over a degree-range-pruned basis;
//! SOS-declared unknowns get their own Gram blocks. Coefficient matching
//! produces one equality row per reachable monomial. Free unknown
//! coefficients (V, λ) are then eliminated by projecting the rows onto the
//! left nullspace of the free-coefficient matrix — an exact reduction: the
//! projected system is feasible iff the original one is. Free values are
//! recovered after the solve by least squares, and callers re-verify the
//! assembled certificates independently.

use super::basis::MonomialBasis;
use super::check::gram_basis_for_support;
use super::gram::product_pairs;
use super::program::{ConstraintKind, PolyExpr, SosProgram, UnknownKind};
use super::SosError;
use crate::poly::{Monomial, Polynomial};
use crate::sdp::{BlockMatrix, SdpBlock, SdpConstraint, SdpProblem, SdpSolution, SdpStatus};
use nalgebra::{DMatrix, DVector};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug)]
struct Row {
    /// (block, i, j, v) with i <= j; contributes v·(2−δ)·X_ij to the LHS.
    gram: Vec<(usize, usize, usize, f64)>,
    /// (free column, coefficient).
    free: Vec<(usize, f64)>,
    rhs: f64,
}

/// A compiled program: the SDP plus everything needed to decode solutions
/// back into polynomial space.
pub struct CompiledSos {
    pub sdp: SdpProblem,
    nvars: usize,
    names: Vec<String>,
    kinds: Vec<UnknownKind>,
    /// Per unknown: Gram block index + basis (SOS unknowns only).
    sos_blocks: Vec<Option<(usize, MonomialBasis)>>,
    /// Per unknown: free column offset + coefficient monomials (free only).
    free_layout: Vec<Option<(usize, Vec<Monomial>)>>,
    n_free: usize,
    /// Per constraint: Gram block index + basis (SOS constraints with a
    /// nonempty basis).
    constraint_blocks: Vec<Option<(usize, MonomialBasis)>>,
    constraints: Vec<(ConstraintKind, PolyExpr, String)>,
    rows: Vec<Row>,
    b_free: DMatrix<f64>,
    /// Constant offset of the objective introduced by eliminating free
    /// variables; add to the SDP objective value.
    pub objective_constant: f64,
}

/// Decoded polynomials and certificates from an SDP solution.
pub struct DecodedSos {
    pub unknowns: BTreeMap<String, Polynomial>,
    /// Per constraint: basis and Gram certificate (SOS constraints only).
    pub constraint_grams: Vec<Option<(MonomialBasis, DMatrix<f64>)>>,
}

pub fn compile(prog: &SosProgram) -> Result<CompiledSos, SosError> {
    if prog.constraints.is_empty() {
        return Err(SosError::EmptyProgram);
    }
    let nvars = prog.nvars();

    // unknown layouts
    let mut blocks: Vec<SdpBlock> = Vec::new();
    let mut sos_blocks: Vec<Option<(usize, MonomialBasis)>> = Vec::new();
    let mut free_layout: Vec<Option<(usize, Vec<Monomial>)>> = Vec::new();
    let mut n_free = 0usize;
    for decl in &prog.unknowns {
        match decl.kind {
            UnknownKind::Sos => {
                if decl.degree % 2 != 0 {
                    return Err(SosError::OddSosDegree(decl.name.clone(), decl.degree));
                }
                let basis = super::make_basis(nvars, decl.degree / 2, true);
                let idx = blocks.len();
                blocks.push(SdpBlock { name: decl.name.clone(), dim: basis.len() });
                sos_blocks.push(Some((idx, basis)));
                free_layout.push(None);
            }
            UnknownKind::Free { vanish_at_origin } => {
                let monos: Vec<Monomial> = super::monomials_up_to(nvars, decl.degree)
                    .into_iter()
                    .filter(|m| !(vanish_at_origin && m.is_constant()))
                    .collect();
                free_layout.push(Some((n_free, monos.clone())));
                n_free += monos.len();
                sos_blocks.push(None);
            }
        }
    }

    // constraint Gram blocks and coefficient rows
    let mut rows: Vec<Row> = Vec::new();
    let mut constraint_blocks: Vec<Option<(usize, MonomialBasis)>> = Vec::new();
    for (kind, expr, label) in &prog.constraints {
        if expr.nvars != nvars {
            return Err(SosError::DimensionMismatch(label.clone()));
        }
        // potential support: known terms plus every multiplier×unknown product
        let mut support: BTreeSet<Monomial> = expr.known.terms().map(|(m, _)| m.clone()).collect();
        for (id, mult) in &expr.terms {
            for mu in unknown_monomials(prog, *id, &sos_blocks, &free_layout) {
                for (mc, _) in mult.terms() {
                    support.insert(mc.mul(&mu));
                }
            }
        }

        let con_block = match kind {
            ConstraintKind::Sos => {
                let basis = gram_basis_for_support(nvars, &support);
                if basis.is_empty() {
                    None
                } else {
                    let idx = blocks.len();
                    blocks.push(SdpBlock { name: format!("sos:{label}"), dim: basis.len() });
                    Some((idx, basis))
                }
            }
            ConstraintKind::Zero => None,
        };

        // row index per monomial: support ∪ basis pair products
        let mut row_of: BTreeMap<Monomial, usize> = BTreeMap::new();
        let mut local_rows: Vec<Row> = Vec::new();
        let mut row_idx = |m: Monomial, local_rows: &mut Vec<Row>| -> usize {
            *row_of.entry(m).or_insert_with(|| {
                local_rows.push(Row { gram: Vec::new(), free: Vec::new(), rhs: 0.0 });
                local_rows.len() - 1
            })
        };
        for m in &support {
            let r = row_idx(m.clone(), &mut local_rows);
            local_rows[r].rhs = expr.known.coeff(m);
        }
        if let Some((bidx, basis)) = &con_block {
            for (mono, ps) in product_pairs(basis) {
                let r = row_idx(mono.clone(), &mut local_rows);
                local_rows[r].rhs = expr.known.coeff(&mono);
                for (i, j) in ps {
                    local_rows[r].gram.push((*bidx, i, j, 1.0));
                }
            }
        }
        // unknown contributions move to the LHS with negative sign
        for (id, mult) in &expr.terms {
            match &sos_blocks[id.0] {
                Some((bidx, ubasis)) => {
                    let upairs = product_pairs(ubasis);
                    for (mc, gamma) in mult.terms() {
                        for (umono, ps) in &upairs {
                            let m = mc.mul(umono);
                            let r = row_idx(m, &mut local_rows);
                            for &(a, b) in ps {
                                local_rows[r].gram.push((*bidx, a, b, -gamma));
                            }
                        }
                    }
                }
                None => {
                    let (offset, monos) = free_layout[id.0].as_ref().expect("free layout");
                    for (mc, gamma) in mult.terms() {
                        for (k, mu) in monos.iter().enumerate() {
                            let m = mc.mul(mu);
                            let r = row_idx(m, &mut local_rows);
                            local_rows[r].free.push((offset + k, -gamma));
                        }
                    }
                }
            }
        }
        constraint_blocks.push(con_block);
        rows.extend(local_rows);
    }

    // merge duplicate sparse keys inside each row, equilibrate, drop blanks
    let mut cleaned: Vec<Row> = Vec::new();
    for row in rows {
        let mut gram: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for (b, i, j, v) in row.gram {
            *gram.entry((b, i, j)).or_insert(0.0) += v;
        }
        gram.retain(|_, v| v.abs() > 1e-14);
        let mut free: BTreeMap<usize, f64> = BTreeMap::new();
        for (c, v) in row.free {
            *free.entry(c).or_insert(0.0) += v;
        }
        free.retain(|_, v| v.abs() > 1e-14);
        let mut scale = 0.0_f64;
        for v in gram.values() {
            scale = scale.max(v.abs());
        }
        for v in free.values() {
            scale = scale.max(v.abs());
        }
        if scale == 0.0 {
            if row.rhs.abs() > 1e-10 {
                // structurally unsatisfiable monomial; keep so the solver
                // reports infeasibility instead of silently dropping it
                cleaned.push(Row { gram: Vec::new(), free: Vec::new(), rhs: row.rhs });
            }
            continue;
        }
        let s = 1.0 / scale;
        cleaned.push(Row {
            gram: gram.into_iter().map(|((b, i, j), v)| (b, i, j, v * s)).collect(),
            free: free.into_iter().map(|(c, v)| (c, v * s)).collect(),
            rhs: row.rhs * s,
        });
    }
    // exact-duplicate removal
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut rows: Vec<Row> = Vec::new();
    for row in cleaned {
        let mut sig: Vec<u64> = Vec::new();
        for &(b, i, j, v) in &row.gram {
            sig.extend([b as u64, i as u64, j as u64, v.to_bits()]);
        }
        sig.push(u64::MAX);
        for &(c, v) in &row.free {
            sig.extend([c as u64, v.to_bits()]);
        }
        sig.push(row.rhs.to_bits());
        if seen.insert(sig) {
            rows.push(row);
        }
    }

    let b_free = {
        let mut b = DMatrix::zeros(rows.len(), n_free);
        for (r, row) in rows.iter().enumerate() {
            for &(c, v) in &row.free {
                b[(r, c)] += v;
            }
        }
        b
    };

    // project rows onto the left nullspace of the free-coefficient matrix
    let reduced: Vec<Row> = if n_free == 0 {
        rows.clone()
    } else {
        let nullspace = left_nullspace(&b_free);
        let mut out = Vec::new();
        for col in 0..nullspace.ncols() {
            let w = nullspace.column(col);
            let mut gram: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
            let mut rhs = 0.0;
            for (r, row) in rows.iter().enumerate() {
                let wr = w[r];
                if wr.abs() < 1e-15 {
                    continue;
                }
                for &(b, i, j, v) in &row.gram {
                    *gram.entry((b, i, j)).or_insert(0.0) += wr * v;
                }
                rhs += wr * row.rhs;
            }
            gram.retain(|_, v| v.abs() > 1e-12);
            if gram.is_empty() && rhs.abs() <= 1e-9 {
                continue;
            }
            out.push(Row {
                gram: gram.into_iter().map(|((b, i, j), v)| (b, i, j, v)).collect(),
                free: Vec::new(),
                rhs,
            });
        }
        out
    };

    let mut sdp = SdpProblem::new(blocks);
    for row in &reduced {
        let mut by_block: BTreeMap<usize, BlockMatrix> = BTreeMap::new();
        for &(b, i, j, v) in &row.gram {
            by_block.entry(b).or_insert_with(|| BlockMatrix::new(b)).push(i, j, v);
        }
        sdp.constraints.push(SdpConstraint {
            terms: by_block.into_values().collect(),
            rhs: row.rhs,
        });
    }

    // objective: linear functional of unknown coefficients
    let mut objective_constant = 0.0;
    if let Some(obj) = &prog.objective {
        let mut q_free = DVector::zeros(n_free.max(1));
        let mut q_gram: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for (id, mono, w) in &obj.terms {
            match &sos_blocks[id.0] {
                Some((bidx, ubasis)) => {
                    let upairs = product_pairs(ubasis);
                    if let Some(ps) = upairs.get(mono) {
                        for &(a, b) in ps {
                            *q_gram.entry((*bidx, a, b)).or_insert(0.0) += w;
                        }
                    }
                }
                None => {
                    let (offset, monos) = free_layout[id.0].as_ref().expect("free layout");
                    if let Some(k) = monos.iter().position(|m| m == mono) {
                        q_free[offset + k] += w;
                    }
                }
            }
        }
        if n_free > 0 && q_free.amax() > 0.0 {
            // q must lie in the row space of B, i.e. Bᵀ w = q solvable
            let bt = b_free.transpose();
            let svd = bt.clone().svd(true, true);
            let w = svd
                .solve(&q_free, 1e-10)
                .map_err(|e| SosError::Solver(e.to_string()))?;
            let resid = (&bt * &w - &q_free).norm();
            if resid > 1e-8 * (1.0 + q_free.norm()) {
                return Err(SosError::UnboundedObjective);
            }
            for (r, row) in rows.iter().enumerate() {
                let wr = w[r];
                if wr == 0.0 {
                    continue;
                }
                objective_constant += wr * row.rhs;
                for &(b, i, j, v) in &row.gram {
                    *q_gram.entry((b, i, j)).or_insert(0.0) -= wr * v;
                }
            }
        }
        let mut by_block: BTreeMap<usize, BlockMatrix> = BTreeMap::new();
        for ((b, i, j), v) in q_gram {
            if v.abs() > 1e-14 {
                by_block.entry(b).or_insert_with(|| BlockMatrix::new(b)).push(i, j, v);
            }
        }
        sdp.objective = by_block.into_values().collect();
    }

    Ok(CompiledSos {
        sdp,
        nvars,
        names: prog.unknowns.iter().map(|d| d.name.clone()).collect(),
        kinds: prog.unknowns.iter().map(|d| d.kind).collect(),
        sos_blocks,
        free_layout,
        n_free,
        constraint_blocks,
        constraints: prog.constraints.clone(),
        rows,
        b_free,
        objective_constant,
    })
}

fn unknown_monomials(
    prog: &SosProgram,
    id: super::UnknownId,
    sos_blocks: &[Option<(usize, MonomialBasis)>],
    free_layout: &[Option<(usize, Vec<Monomial>)>],
) -> Vec<Monomial> {
    let _ = prog;
    match &sos_blocks[id.0] {
        Some((_, basis)) => product_pairs(basis).into_keys().collect(),
        None => free_layout[id.0].as_ref().expect("free layout").1.clone(),
    }
}

/// Orthonormal basis of {w : Bᵀw = 0} from the eigen-decomposition of BBᵀ.
/// Structural rank deficiencies dominate here, so the spectral gap is wide.
fn left_nullspace(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let p = b * b.transpose();
    let eig = nalgebra::SymmetricEigen::new(p);
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v));
    let tol = 1e-12 * lmax.max(1.0);
    let mut cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= tol).collect();
    cols.sort();
    let mut out = DMatrix::zeros(n, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        out.set_column(k, &eig.eigenvectors.column(i));
    }
    out
}

impl CompiledSos {
    /// Map an SDP solution back to polynomials: Gram blocks expand directly,
    /// free coefficients are recovered by least squares on the original rows.
    pub fn decode(&self, sol: &SdpSolution) -> Result<DecodedSos, SosError> {
        if !matches!(sol.status, SdpStatus::Feasible | SdpStatus::Optimal) {
            return Err(SosError::Solver(format!("cannot decode status {:?}", sol.status)));
        }
        let u = if self.n_free == 0 {
            DVector::zeros(0)
        } else {
            let mut resid = DVector::zeros(self.rows.len());
            for (r, row) in self.rows.iter().enumerate() {
                let mut lhs = 0.0;
                for &(b, i, j, v) in &row.gram {
                    let x = &sol.blocks[b];
                    lhs += if i == j { v * x[(i, i)] } else { 2.0 * v * x[(i, j)] };
                }
                resid[r] = row.rhs - lhs;
            }
            let svd = self.b_free.clone().svd(true, true);
            svd.solve(&resid, 1e-10).map_err(|e| SosError::Solver(e.to_string()))?
        };

        let mut unknowns = BTreeMap::new();
        for (k, name) in self.names.iter().enumerate() {
            let poly = match self.kinds[k] {
                UnknownKind::Sos => {
                    let (bidx, basis) = self.sos_blocks[k].as_ref().expect("sos block");
                    super::gram::expand_quadratic_form(basis, &sol.blocks[*bidx])
                }
                UnknownKind::Free { .. } => {
                    let (offset, monos) = self.free_layout[k].as_ref().expect("free layout");
                    Polynomial::from_terms(
                        self.nvars,
                        monos.iter().enumerate().map(|(i, m)| (m.clone(), u[offset + i])),
                    )
                }
            };
            unknowns.insert(name.clone(), poly);
        }

        let constraint_grams = self
            .constraint_blocks
            .iter()
            .map(|cb| cb.as_ref().map(|(bidx, basis)| (basis.clone(), sol.blocks[*bidx].clone())))
            .collect();

        Ok(DecodedSos { unknowns, constraint_grams })
    }

    /// Assemble the `idx`-th constraint expression with decoded unknowns.
    pub fn assemble_constraint(&self, idx: usize, decoded: &DecodedSos) -> Polynomial {
        let (_, expr, _) = &self.constraints[idx];
        let mut p = expr.known.clone();
        for (id, mult) in &expr.terms {
            let name = &self.names[id.0];
            p = p.add(&mult.mul(&decoded.unknowns[name]));
        }
        p
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraint_label(&self, idx: usize) -> &str {
        &self.constraints[idx].2
    }

    /// Largest coefficient mismatch between each decoded Gram certificate and
    /// its assembled constraint polynomial.
    pub fn gram_consistency(&self, decoded: &DecodedSos) -> f64 {
        let mut worst = 0.0_f64;
        for (idx, cb) in decoded.constraint_grams.iter().enumerate() {
            let assembled = self.assemble_constraint(idx, decoded);
            match cb {
                Some((basis, q)) => {
                    let expanded = super::gram::expand_quadratic_form(basis, q);
                    worst = worst.max(expanded.max_coeff_diff(&assembled));
                }
                None => {
                    if matches!(self.constraints[idx].0, ConstraintKind::Sos) {
                        worst = worst.max(assembled.max_abs_coeff());
                    }
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{solve, SdpSettings};

    /// find s SOS, degree 2, with s − x² SOS: feasible (s = x² works)
    #[test]
    fn simple_sos_dominance_feasible() {
        let mut prog = SosProgram::new(1);
        let s = prog.add_sos_poly("s", 2);
        let x = Polynomial::variable(1, 0);
        let x2 = x.mul(&x);
        let expr = prog.unknown(s).sub(&PolyExpr::from_poly(x2.clone()));
        prog.require_sos("s-x2", expr);
        let compiled = compile(&prog).unwrap();
        let sol = solve(&compiled.sdp, &SdpSettings::default()).unwrap();
        assert!(matches!(sol.status, SdpStatus::Feasible | SdpStatus::Optimal), "{:?}", sol.status);
        let dec = compiled.decode(&sol).unwrap();
        // decoded s must dominate x² pointwise on a few samples
        let sp = &dec.unknowns["s"];
        for t in [-2.0, -0.5, 0.0, 0.7, 1.5] {
            assert!(sp.evaluate(&[t]) >= x2.evaluate(&[t]) - 1e-6);
        }
        assert!(compiled.gram_consistency(&dec) < 1e-7);
    }

    /// find s SOS with s + x² + 1 == 0 coefficient-wise: infeasible
    #[test]
    fn negative_forcing_infeasible() {
        let mut prog = SosProgram::new(1);
        let s = prog.add_sos_poly("s", 2);
        let x = Polynomial::variable(1, 0);
        let one = Polynomial::constant(1, 1.0);
        let expr = prog
            .unknown(s)
            .add(&PolyExpr::from_poly(x.mul(&x)))
            .add(&PolyExpr::from_poly(one));
        prog.require_zero("s+x2+1", expr);
        let compiled = compile(&prog).unwrap();
        let sol = solve(&compiled.sdp, &SdpSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    /// free unknown elimination: find free f (deg 2) with f − (x²+1) == 0 and
    /// a dummy SOS constraint; decode must recover f exactly
    #[test]
    fn free_unknown_roundtrip() {
        let mut prog = SosProgram::new(1);
        let f = prog.add_free_poly("f", 2, false);
        let x = Polynomial::variable(1, 0);
        let target = x.mul(&x).add(&Polynomial::constant(1, 1.0));
        prog.require_zero("pin f", prog.unknown(f).sub(&PolyExpr::from_poly(target.clone())));
        prog.require_sos("f is sos", prog.unknown(f));
        let compiled = compile(&prog).unwrap();
        let sol = solve(&compiled.sdp, &SdpSettings::default()).unwrap();
        assert!(matches!(sol.status, SdpStatus::Feasible | SdpStatus::Optimal));
        let dec = compiled.decode(&sol).unwrap();
        assert!(dec.unknowns["f"].max_coeff_diff(&target) < 1e-6);
        assert!(compiled.gram_consistency(&dec) < 1e-7);
    }

    #[test]
    fn empty_program_rejected() {
        let prog = SosProgram::new(1);
        assert!(matches!(compile(&prog), Err(SosError::EmptyProgram)));
    }

    /// objective over a free coefficient: minimize c in f = c·x² subject to
    /// f − x² SOS  =>  c* = 1
    #[test]
    fn objective_on_free_coefficient() {
        let mut prog = SosProgram::new(1);
        let f = prog.add_free_poly("f", 2, true);
        let x = Polynomial::variable(1, 0);
        let x2 = x.mul(&x);
        prog.require_sos("f-x2", prog.unknown(f).sub(&PolyExpr::from_poly(x2.clone())));
        let mut obj = super::super::program::SosObjective::default();
        obj.terms.push((f, Monomial::new(vec![2]), 1.0));
        prog.set_objective(obj);
        let compiled = compile(&prog).unwrap();
        let sol = solve(&compiled.sdp, &SdpSettings::default()).unwrap();
        assert!(matches!(sol.status, SdpStatus::Optimal | SdpStatus::Feasible));
        let value = sol.objective + compiled.objective_constant;
        assert!((value - 1.0).abs() < 1e-5, "objective {value}");
        let dec = compiled.decode(&sol).unwrap();
        assert!((dec.unknowns["f"].coeff(&Monomial::new(vec![2])) - 1.0).abs() < 1e-5);
    }
}
