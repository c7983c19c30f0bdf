//! Homogeneous self-dual interior-point method.
//!
//! The embedding searches for (X ⪰ 0, y, S ⪰ 0, τ ≥ 0, κ ≥ 0) with
//!
//! ```text
//! A(X) − b τ            = 0
//! −A*(y) + C τ − S      = 0
//! bᵀy − ⟨C, X⟩ − κ      = 0
//! ```
//!
//! driving X∘S → 0 and τκ → 0. A solution with τ > 0 de-homogenizes to a
//! primal-dual optimal pair; τ → 0 with κ > 0 certifies infeasibility
//! (bᵀy > 0: primal infeasible; ⟨C,X⟩ < 0: unbounded).
//!
//! Each Newton step uses Nesterov-Todd scaling per block and reduces to an
//! m×m Schur system M Δy = r with M_ij = Σ_k ⟨A_i, W A_j W⟩.

use super::*;
use nalgebra::{DMatrix, DVector};

struct BlockScaling {
    /// NT factor T with X = TΛTᵀ, S = T⁻ᵀΛT⁻¹.
    t: DMatrix<f64>,
    t_inv: DMatrix<f64>,
    /// Scaled spectrum λ (diagonal of Λ).
    lambda: DVector<f64>,
    /// W = TTᵀ.
    w: DMatrix<f64>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dtau: f64,
    dkappa: f64,
}

pub fn solve(problem: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let mut scaled = problem.clone();
    // row equilibration; dual variables are mapped back on exit
    let mut row_scale = vec![1.0; scaled.constraints.len()];
    for (i, c) in scaled.constraints.iter_mut().enumerate() {
        let mut m: f64 = c.rhs.abs();
        for t in &c.terms {
            m = m.max(t.max_abs());
        }
        if m > 0.0 {
            let s = 1.0 / m;
            row_scale[i] = s;
            c.rhs *= s;
            for t in &mut c.terms {
                for e in &mut t.entries {
                    e.2 *= s;
                }
            }
        }
    }
    let mut sol = ipm(&scaled, settings);
    for (i, s) in row_scale.iter().enumerate() {
        // scaled A_i = s·A_i  =>  unscaled multiplier y_i = s·y'_i
        sol.dual[i] *= s;
    }
    Ok(sol)
}

fn ipm(p: &SdpProblem, st: &SdpSettings) -> SdpSolution {
    let dims: Vec<usize> = p.blocks.iter().map(|b| b.dim).collect();
    let nblk = dims.len();
    let m = p.constraints.len();
    let nu: f64 = dims.iter().map(|&d| d as f64).sum();

    let b = DVector::from_iterator(m, p.constraints.iter().map(|c| c.rhs));
    let c_dense: Vec<DMatrix<f64>> = dense_objective(p, &dims);

    if m == 0 {
        // unconstrained over the PSD cone: optimum 0 at X = 0 when every
        // C_k ⪰ 0, otherwise the objective is unbounded along an eigvector ray
        let unbounded = c_dense.iter().any(|c| min_eig(c) < -1e-12);
        return SdpSolution {
            status: if unbounded {
                SdpStatus::Unbounded
            } else if p.is_feasibility() {
                SdpStatus::Feasible
            } else {
                SdpStatus::Optimal
            },
            blocks: dims.iter().map(|&d| DMatrix::zeros(d, d)).collect(),
            dual: DVector::zeros(0),
            primal_residual: 0.0,
            dual_residual: 0.0,
            gap: 0.0,
            objective: if unbounded { f64::NEG_INFINITY } else { 0.0 },
            iterations: 0,
        };
    }
    let c_norm = c_dense.iter().map(|c| c.norm().powi(2)).sum::<f64>().sqrt();
    let b_norm = b.norm();

    // cold start: scaled identities
    let rho_x = 1.0_f64.max(b.amax());
    let rho_s = 1.0_f64.max(c_dense.iter().map(|c| c.amax()).fold(0.0, f64::max));
    let mut x: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::identity(d, d) * rho_x).collect();
    let mut s: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::identity(d, d) * rho_s).collect();
    let mut y = DVector::zeros(m);
    let mut tau = 1.0_f64;
    let mut kappa = 1.0_f64;

    let fail = |iters: usize, dual: DVector<f64>| SdpSolution {
        status: SdpStatus::NumericalFailure,
        blocks: Vec::new(),
        dual,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        gap: f64::NAN,
        objective: f64::NAN,
        iterations: iters,
    };

    for iter in 0..st.max_iter {
        let mu = (dot_blocks(&x, &s) + tau * kappa) / (nu + 1.0);

        // de-homogenized residual measures
        let ax = apply_a(p, &x);
        let pres = (&ax / tau - &b).norm() / (1.0 + b_norm);
        let aty = apply_at(p, &y, &dims);
        let mut dres2 = 0.0;
        for k in 0..nblk {
            let r = (&aty[k] + &s[k]) / tau - &c_dense[k];
            dres2 += r.norm().powi(2);
        }
        let dres = dres2.sqrt() / (1.0 + c_norm);
        let pobj = dot_blocks(&c_dense, &x) / tau;
        let dobj = b.dot(&y) / tau;
        let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs().max(dobj.abs()));
        let compl = (dot_blocks(&x, &s) / (tau * tau)) / (1.0 + pobj.abs().max(dobj.abs()));

        if st.verbose {
            eprintln!(
                "sdp iter {iter:3}  mu {mu:9.2e}  pres {pres:9.2e}  dres {dres:9.2e}  gap {relgap:9.2e}  tau {tau:8.2e}  kappa {kappa:8.2e}"
            );
        }

        if pres <= st.feas_tol && dres <= st.feas_tol && relgap <= st.gap_tol && compl <= st.gap_tol {
            let status = if p.is_feasibility() { SdpStatus::Feasible } else { SdpStatus::Optimal };
            return SdpSolution {
                status,
                blocks: x.iter().map(|xk| xk / tau).collect(),
                dual: &y / tau,
                primal_residual: pres,
                dual_residual: dres,
                gap: relgap,
                objective: pobj,
                iterations: iter,
            };
        }

        // improving-ray certificates (also reached through τ/κ collapse)
        let by = b.dot(&y);
        if by > 1e-8 * (1.0 + b_norm) {
            let yr = &y / by;
            let atyr = apply_at(p, &yr, &dims);
            let ray_ok = atyr.iter().all(|a| min_eig(&(-a.clone())) >= -1e-9);
            if ray_ok {
                return SdpSolution {
                    status: SdpStatus::Infeasible,
                    blocks: Vec::new(),
                    dual: yr,
                    primal_residual: f64::NAN,
                    dual_residual: f64::NAN,
                    gap: f64::NAN,
                    objective: f64::NAN,
                    iterations: iter,
                };
            }
        }
        if tau <= st.tau_kappa_tol * kappa.max(1.0) {
            let cx = dot_blocks(&c_dense, &x);
            if cx < -1e-8 * (1.0 + c_norm) {
                let xr: Vec<DMatrix<f64>> = x.iter().map(|xk| xk / (-cx)).collect();
                if apply_a(p, &xr).norm() <= 1e-6 {
                    return SdpSolution {
                        status: SdpStatus::Unbounded,
                        blocks: xr,
                        dual: DVector::zeros(m),
                        primal_residual: f64::NAN,
                        dual_residual: f64::NAN,
                        gap: f64::NAN,
                        objective: f64::NEG_INFINITY,
                        iterations: iter,
                    };
                }
            }
            return fail(iter, y.clone());
        }

        // NT scalings
        let Some(scalings) = (0..nblk)
            .map(|k| nt_scaling(&x[k], &s[k]))
            .collect::<Option<Vec<_>>>()
        else {
            return fail(iter, y.clone());
        };

        // Schur complement M, A(WCW), ⟨C, WCW⟩
        let wcw: Vec<DMatrix<f64>> = (0..nblk)
            .map(|k| &scalings[k].w * &c_dense[k] * &scalings[k].w)
            .collect();
        let v_hat = apply_a(p, &wcw);
        let u = &v_hat + &b;
        let c_wcw = dot_blocks(&c_dense, &wcw);

        let mut m_mat = DMatrix::zeros(m, m);
        // per constraint j: realize W A_j W once, then sparse dots with every A_i
        for j in 0..m {
            let mut waw: Vec<Option<DMatrix<f64>>> = vec![None; nblk];
            for t in &p.constraints[j].terms {
                let k = t.block;
                let w = &scalings[k].w;
                // WA accumulated columnwise: A = Σ v (e_r e_cᵀ + e_c e_rᵀ)
                let acc = waw[k].get_or_insert_with(|| DMatrix::zeros(dims[k], dims[k]));
                for &(r, c, v) in &t.entries {
                    let wr = w.column(r).clone_owned();
                    let wc = w.column(c).clone_owned();
                    acc.column_mut(c).axpy(v, &wr, 1.0);
                    if r != c {
                        acc.column_mut(r).axpy(v, &wc, 1.0);
                    }
                }
            }
            for (k, wa) in waw.iter_mut().enumerate() {
                if let Some(wa) = wa {
                    *wa = &*wa * &scalings[k].w;
                }
            }
            for i in 0..m {
                let mut acc = 0.0;
                for t in &p.constraints[i].terms {
                    if let Some(wawk) = &waw[t.block] {
                        acc += t.inner(wawk);
                    }
                }
                m_mat[(i, j)] = acc;
            }
        }
        symmetrize(&mut m_mat);

        let Some(m_chol) = chol_with_reg(&m_mat) else {
            return fail(iter, y.clone());
        };

        // residuals of the embedding
        let r_p = &ax - &b * tau;
        let mut r_d: Vec<DMatrix<f64>> = Vec::with_capacity(nblk);
        for k in 0..nblk {
            r_d.push(&c_dense[k] * tau - &aty[k] - &s[k]);
        }
        let r_g = b.dot(&y) - dot_blocks(&c_dense, &x) - kappa;
        let a_wrdw: DVector<f64> = {
            let wrdw: Vec<DMatrix<f64>> = (0..nblk)
                .map(|k| &scalings[k].w * &r_d[k] * &scalings[k].w)
                .collect();
            apply_a(p, &wrdw)
        };

        let solve_dir = |eta: f64, d_blocks: &[DMatrix<f64>], e_kt: f64| -> Option<Direction> {
            let g: Vec<DMatrix<f64>> = (0..nblk)
                .map(|k| &scalings[k].t * &d_blocks[k] * scalings[k].t.transpose())
                .collect();
            let a_g = apply_a(p, &g);
            let r1 = &r_p * eta - &a_g - &a_wrdw * eta;
            let r2 = eta * r_g
                + dot_blocks(&c_dense, &g)
                + eta * dot_blocks(&wcw, &r_d)
                + e_kt / tau;
            let w1 = m_chol.solve(&r1);
            let w2 = m_chol.solve(&u);
            let bv = &b - &v_hat;
            let denom = c_wcw + kappa / tau + bv.dot(&w2);
            if denom.abs() < 1e-300 || !denom.is_finite() {
                return None;
            }
            let dtau = (r2 - bv.dot(&w1)) / denom;
            let dy = &w1 + &w2 * dtau;
            let aty_dy = apply_at(p, &dy, &dims);
            let mut ds = Vec::with_capacity(nblk);
            let mut dx = Vec::with_capacity(nblk);
            for k in 0..nblk {
                let dsk = &c_dense[k] * dtau - &aty_dy[k] - &r_d[k] * eta;
                let dxk = &g[k] - &scalings[k].w * &dsk * &scalings[k].w;
                ds.push(dsk);
                dx.push(dxk);
            }
            let dkappa = (e_kt - kappa * dtau) / tau;
            Some(Direction { dx, dy, ds, dtau, dkappa })
        };

        // predictor (affine direction): D = -Λ, e = -τκ, η = -1
        let d_aff: Vec<DMatrix<f64>> = scalings
            .iter()
            .map(|sc| -DMatrix::from_diagonal(&sc.lambda))
            .collect();
        let Some(aff) = solve_dir(-1.0, &d_aff, -tau * kappa) else {
            return fail(iter, y.clone());
        };
        let alpha_aff = max_step(&x, &s, tau, kappa, &aff, 1.0);
        let mu_aff = {
            let mut acc = tau_kappa_after(tau, kappa, &aff, alpha_aff);
            for k in 0..nblk {
                acc += (&x[k] + &aff.dx[k] * alpha_aff).dot(&(&s[k] + &aff.ds[k] * alpha_aff));
            }
            acc / (nu + 1.0)
        };
        let sigma = ((mu_aff / mu).powi(3)).clamp(1e-8, 0.99);

        // corrector
        let mut d_cor: Vec<DMatrix<f64>> = Vec::with_capacity(nblk);
        for k in 0..nblk {
            let sc = &scalings[k];
            let dxa = &sc.t_inv * &aff.dx[k] * sc.t_inv.transpose();
            let dsa = sc.t.transpose() * &aff.ds[k] * &sc.t;
            let gamma = (&dxa * &dsa + &dsa * &dxa) * 0.5;
            let n = dims[k];
            let mut d = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let li = sc.lambda[i];
                    let lj = sc.lambda[j];
                    let num = if i == j { sigma * mu - li * lj - gamma[(i, j)] } else { -gamma[(i, j)] };
                    d[(i, j)] = 2.0 * num / (li + lj);
                }
            }
            d_cor.push(d);
        }
        let e_kt = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
        let Some(dir) = solve_dir(sigma - 1.0, &d_cor, e_kt) else {
            return fail(iter, y.clone());
        };

        let alpha = max_step(&x, &s, tau, kappa, &dir, st.step_frac).min(1.0);
        if alpha < 1e-9 {
            return fail(iter, y.clone());
        }
        for k in 0..nblk {
            x[k] += &dir.dx[k] * alpha;
            s[k] += &dir.ds[k] * alpha;
            symmetrize(&mut x[k]);
            symmetrize(&mut s[k]);
        }
        y += &dir.dy * alpha;
        tau += dir.dtau * alpha;
        kappa += dir.dkappa * alpha;
        if !tau.is_finite() || !kappa.is_finite() || tau <= 0.0 || kappa <= 0.0 {
            return fail(iter, y.clone());
        }
    }
    fail(st.max_iter, y)
}

fn dense_objective(p: &SdpProblem, dims: &[usize]) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for t in &p.objective {
        let dense = t.to_dense(dims[t.block]);
        out[t.block] += dense;
    }
    out
}

/// A(X): one inner product per constraint, summed over blocks.
fn apply_a(p: &SdpProblem, x: &[DMatrix<f64>]) -> DVector<f64> {
    DVector::from_iterator(
        p.constraints.len(),
        p.constraints.iter().map(|c| c.terms.iter().map(|t| t.inner(&x[t.block])).sum()),
    )
}

/// A*(y): Σ_i y_i A_{i,k} per block, dense symmetric.
fn apply_at(p: &SdpProblem, y: &DVector<f64>, dims: &[usize]) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for (i, c) in p.constraints.iter().enumerate() {
        let yi = y[i];
        if yi == 0.0 {
            continue;
        }
        for t in &c.terms {
            let acc = &mut out[t.block];
            for &(r, cc, v) in &t.entries {
                acc[(r, cc)] += yi * v;
                if r != cc {
                    acc[(cc, r)] += yi * v;
                }
            }
        }
    }
    out
}

fn dot_blocks(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// NT scaling from Cholesky factors and the SVD of Lsᵀ Lx.
fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<BlockScaling> {
    let lx = x.clone().cholesky()?;
    let ls = s.clone().cholesky()?;
    let prod = ls.l().transpose() * lx.l();
    let svd = prod.svd(false, true);
    let vt = svd.v_t.as_ref()?;
    let lambda = svd.singular_values.clone();
    if lambda.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
        return None;
    }
    let inv_sqrt = DMatrix::from_diagonal(&lambda.map(|l| 1.0 / l.sqrt()));
    let sqrt = DMatrix::from_diagonal(&lambda.map(|l| l.sqrt()));
    let t = lx.l() * vt.transpose() * &inv_sqrt;
    // T⁻¹ = Σ^{1/2} Vᵀ Lx⁻¹
    let lx_inv = lx
        .l()
        .solve_lower_triangular(&DMatrix::identity(x.nrows(), x.nrows()))?;
    let t_inv = sqrt * vt * lx_inv;
    let w = &t * t.transpose();
    Some(BlockScaling { t, t_inv, lambda, w })
}

/// Largest α with X + αΔX ⪰ 0 for every cone variable, damped by `frac`.
fn max_step(
    x: &[DMatrix<f64>],
    s: &[DMatrix<f64>],
    tau: f64,
    kappa: f64,
    dir: &Direction,
    frac: f64,
) -> f64 {
    let mut alpha = f64::INFINITY;
    for k in 0..x.len() {
        alpha = alpha.min(psd_max_step(&x[k], &dir.dx[k]));
        alpha = alpha.min(psd_max_step(&s[k], &dir.ds[k]));
    }
    if dir.dtau < 0.0 {
        alpha = alpha.min(-tau / dir.dtau);
    }
    if dir.dkappa < 0.0 {
        alpha = alpha.min(-kappa / dir.dkappa);
    }
    if alpha.is_finite() {
        frac * alpha
    } else {
        1.0
    }
}

fn tau_kappa_after(tau: f64, kappa: f64, dir: &Direction, alpha: f64) -> f64 {
    (tau + alpha * dir.dtau) * (kappa + alpha * dir.dkappa)
}

/// max α: X + αΔ ⪰ 0, via λmin(L⁻¹ Δ L⁻ᵀ).
fn psd_max_step(x: &DMatrix<f64>, delta: &DMatrix<f64>) -> f64 {
    let Some(chol) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let Some(y) = l.solve_lower_triangular(delta) else {
        return 0.0;
    };
    let Some(bt) = l.solve_lower_triangular(&y.transpose()) else {
        return 0.0;
    };
    let mut b = bt;
    symmetrize(&mut b);
    let lmin = min_eig(&b);
    if lmin >= -1e-14 {
        f64::INFINITY
    } else {
        1.0 / (-lmin)
    }
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    let mut msym = m.clone();
    symmetrize(&mut msym);
    let eig = msym.symmetric_eigenvalues();
    eig.iter().fold(f64::INFINITY, |a, &v| a.min(v))
}

fn chol_with_reg(m: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    if n == 0 {
        return None;
    }
    let scale = 1.0 + m.trace().abs() / n as f64;
    let mut reg = 1e-13 * scale;
    for _ in 0..7 {
        let mut mm = m.clone();
        for i in 0..n {
            mm[(i, i)] += reg;
        }
        if let Some(c) = mm.cholesky() {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> SdpSettings {
        SdpSettings::default()
    }

    /// minimize tr(X), 1x1 block, X11 = 1  =>  optimum 1
    #[test]
    fn scalar_trace_minimum() {
        let mut p = SdpProblem::new(vec![SdpBlock { name: "x".into(), dim: 1 }]);
        let mut a = BlockMatrix::new(0);
        a.push(0, 0, 1.0);
        p.constraints.push(SdpConstraint { terms: vec![a], rhs: 1.0 });
        let mut c = BlockMatrix::new(0);
        c.push(0, 0, 1.0);
        p.objective.push(c);
        let sol = solve(&p, &settings()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-6, "objective {}", sol.objective);
        assert!((sol.blocks[0][(0, 0)] - 1.0).abs() < 1e-6);
    }

    /// X ⪰ 0 with tr(X) = -1 is infeasible
    #[test]
    fn negative_trace_infeasible() {
        let mut p = SdpProblem::new(vec![SdpBlock { name: "x".into(), dim: 2 }]);
        let mut a = BlockMatrix::new(0);
        a.push(0, 0, 1.0);
        a.push(1, 1, 1.0);
        p.constraints.push(SdpConstraint { terms: vec![a], rhs: -1.0 });
        let sol = solve(&p, &settings()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    /// minimize x s.t. [[x,1],[1,x]] ⪰ 0: eigenvalues x±1, optimum x = 1.
    /// Standard form: X ⪰ 0 2x2 with X12 = 1 and X11 = X22, minimize X11.
    #[test]
    fn toeplitz_minimum() {
        let mut p = SdpProblem::new(vec![SdpBlock { name: "x".into(), dim: 2 }]);
        let mut a1 = BlockMatrix::new(0);
        a1.push(0, 1, 1.0);
        p.constraints.push(SdpConstraint { terms: vec![a1], rhs: 2.0 }); // 2*X12 = 2
        let mut a2 = BlockMatrix::new(0);
        a2.push(0, 0, 1.0);
        a2.push(1, 1, -1.0);
        p.constraints.push(SdpConstraint { terms: vec![a2], rhs: 0.0 });
        let mut c = BlockMatrix::new(0);
        c.push(0, 0, 1.0);
        p.objective.push(c);
        let sol = solve(&p, &settings()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-6, "objective {}", sol.objective);
    }

    /// feasibility with an interior solution
    #[test]
    fn simple_feasibility() {
        let mut p = SdpProblem::new(vec![SdpBlock { name: "x".into(), dim: 3 }]);
        let mut a = BlockMatrix::new(0);
        a.push(0, 0, 1.0);
        a.push(1, 1, 2.0);
        a.push(2, 2, 1.0);
        p.constraints.push(SdpConstraint { terms: vec![a], rhs: 4.0 });
        let sol = solve(&p, &settings()).unwrap();
        assert_eq!(sol.status, SdpStatus::Feasible);
        assert!(min_eig(&sol.blocks[0]) >= -1e-8);
    }

    /// unbounded: minimize -tr(X) with a constraint that leaves a ray free
    #[test]
    fn unbounded_detection() {
        let mut p = SdpProblem::new(vec![SdpBlock { name: "x".into(), dim: 2 }]);
        let mut a = BlockMatrix::new(0);
        a.push(0, 0, 1.0);
        p.constraints.push(SdpConstraint { terms: vec![a], rhs: 1.0 });
        let mut c = BlockMatrix::new(0);
        c.push(1, 1, -1.0);
        p.objective.push(c);
        let sol = solve(&p, &settings()).unwrap();
        assert_eq!(sol.status, SdpStatus::Unbounded);
    }
}
