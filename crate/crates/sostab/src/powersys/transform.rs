//! Trigonometric recasting of the swing equations as a constrained
//! polynomial system.
//!
//! With θ_i = δ_{i,ref} − δˢ_{i,ref} for each non-reference machine, the
//! substitution
//!
//! ```text
//! z_i          = ω_{i,ref}              i = 1..m        (speeds)
//! z_{m+2i-1}   = sin θ_i                                (per machine)
//! z_{m+2i}     = 1 − cos θ_i
//! ```
//!
//! turns trig expressions of angle differences into polynomials: every
//! sin/cos of δ_a − δ_b expands through the angle-sum identities about the
//! equilibrium. The origin is the transformed equilibrium, each machine
//! contributes the circle constraint g_i = z_s² + (1 − z_c)² − 1 = 0, and
//! voltage-magnitude-squared expressions become degree-2 polynomials through
//! the reduced-network recovery map.

use super::system::SwingSystem;
use super::ModelError;
use crate::poly::{Monomial, Polynomial};
use num_complex::Complex64;

/// Polynomial vector field with equality-manifold and inequality constraints
/// in the transformed coordinates.
#[derive(Clone, Debug)]
pub struct ConstrainedPolySystem {
    pub nvars: usize,
    /// ż = f(z); speeds first, then (sin, 1−cos) pairs per machine.
    pub f: Vec<Polynomial>,
    /// Trig-identity manifold polynomials, one per non-reference machine.
    pub g: Vec<Polynomial>,
    /// LVRT feasibility polynomials h_j(z) = |v_j(z)|² − bound², degree 2.
    pub h: Vec<Polynomial>,
    /// δˢ of the non-reference machines (original coordinates).
    pub sep_delta_rel: Vec<f64>,
    pub var_labels: Vec<String>,
}

impl ConstrainedPolySystem {
    pub fn n_machines_rel(&self) -> usize {
        self.nvars / 3
    }

    /// Map an original state [δ_rel.., ω_rel..] to transformed coordinates.
    pub fn state_to_z(&self, state: &[f64]) -> Vec<f64> {
        let m = self.n_machines_rel();
        debug_assert_eq!(state.len(), 2 * m);
        let mut z = vec![0.0; self.nvars];
        for k in 0..m {
            let theta = state[k] - self.sep_delta_rel[k];
            z[k] = state[m + k];
            z[m + 2 * k] = theta.sin();
            z[m + 2 * k + 1] = 1.0 - theta.cos();
        }
        z
    }

    /// Inverse map for points on the manifold (arcsin/arccos consistency via
    /// atan2): returns [δ_rel.., ω_rel..].
    pub fn z_to_state(&self, z: &[f64]) -> Vec<f64> {
        let m = self.n_machines_rel();
        debug_assert_eq!(z.len(), self.nvars);
        let mut state = vec![0.0; 2 * m];
        for k in 0..m {
            let s = z[m + 2 * k];
            let c = 1.0 - z[m + 2 * k + 1];
            state[k] = self.sep_delta_rel[k] + s.atan2(c);
            state[m + k] = z[k];
        }
        state
    }

    /// Manifold coordinates from per-machine angles θ and speeds ω.
    pub fn angles_to_z(&self, thetas: &[f64], omegas: &[f64]) -> Vec<f64> {
        let m = self.n_machines_rel();
        debug_assert_eq!(thetas.len(), m);
        debug_assert_eq!(omegas.len(), m);
        let mut z = vec![0.0; self.nvars];
        for k in 0..m {
            z[k] = omegas[k];
            z[m + 2 * k] = thetas[k].sin();
            z[m + 2 * k + 1] = 1.0 - thetas[k].cos();
        }
        z
    }
}

/// Polynomials for sin/cos of (θ_a − θ_b + shift) over the z variables.
/// Index `None` denotes the reference machine (θ ≡ 0).
struct TrigExpander {
    nvars: usize,
    m: usize,
}

impl TrigExpander {
    fn sin_var(&self, k: usize) -> Polynomial {
        Polynomial::variable(self.nvars, self.m + 2 * k)
    }

    fn cos_poly(&self, k: usize) -> Polynomial {
        // cos θ = 1 − z_c
        Polynomial::constant(self.nvars, 1.0)
            .sub(&Polynomial::variable(self.nvars, self.m + 2 * k + 1))
    }

    fn sin_theta(&self, k: Option<usize>) -> Polynomial {
        match k {
            Some(k) => self.sin_var(k),
            None => Polynomial::zero(self.nvars),
        }
    }

    fn cos_theta(&self, k: Option<usize>) -> Polynomial {
        match k {
            Some(k) => self.cos_poly(k),
            None => Polynomial::constant(self.nvars, 1.0),
        }
    }

    /// sin(θ_a − θ_b + shift), cos(θ_a − θ_b + shift).
    fn pair(&self, a: Option<usize>, b: Option<usize>, shift: f64) -> (Polynomial, Polynomial) {
        let (sa, ca) = (self.sin_theta(a), self.cos_theta(a));
        let (sb, cb) = (self.sin_theta(b), self.cos_theta(b));
        let sin_ab = sa.mul(&cb).sub(&ca.mul(&sb));
        let cos_ab = ca.mul(&cb).add(&sa.mul(&sb));
        let (ss, cs) = shift.sin_cos();
        let sin = sin_ab.scale(cs).add(&cos_ab.scale(ss));
        let cos = cos_ab.scale(cs).sub(&sin_ab.scale(ss));
        (sin, cos)
    }
}

/// Build the constrained polynomial system about the solved equilibrium.
pub fn transform_to_polynomial(sys: &SwingSystem) -> Result<ConstrainedPolySystem, ModelError> {
    let m = sys.others.len();
    let nvars = 3 * m;
    let ng = sys.n_machines();
    let exp = TrigExpander { nvars, m };
    let sep = &sys.equilibrium.delta_rel;

    // θ index (into 0..m) per absolute machine index; reference → None
    let theta_of = |mach: usize| -> Option<usize> {
        sys.others.iter().position(|&o| o == mach)
    };
    // δˢ in the reference frame per absolute machine index
    let sep_of = |mach: usize| -> f64 {
        theta_of(mach).map(|k| sep[k]).unwrap_or(0.0)
    };

    // electrical power of machine `a` as a polynomial in z
    let electrical = |a: usize| -> Polynomial {
        let mut p = Polynomial::zero(nvars);
        for bmach in 0..ng {
            let y = sys.reduced.y_red[(a, bmach)];
            let (gij, bij) = (y.re, y.im);
            if gij == 0.0 && bij == 0.0 {
                continue;
            }
            let shift = sep_of(a) - sep_of(bmach);
            let (sin, cos) = exp.pair(theta_of(a), theta_of(bmach), shift);
            let coeff = sys.emf[a] * sys.emf[bmach];
            p = p.add(&cos.scale(coeff * gij)).add(&sin.scale(coeff * bij));
        }
        p
    };

    let pe_ref = electrical(sys.reference);
    let acc_ref = Polynomial::constant(nvars, sys.pm[sys.reference])
        .sub(&pe_ref)
        .scale(1.0 / sys.inertia[sys.reference]);

    let mut f = Vec::with_capacity(nvars);
    for (k, &mach) in sys.others.iter().enumerate() {
        let pe = electrical(mach);
        let acc = Polynomial::constant(nvars, sys.pm[mach])
            .sub(&pe)
            .scale(1.0 / sys.inertia[mach]);
        let mut zdot = acc
            .sub(&acc_ref)
            .sub(&Polynomial::variable(nvars, k).scale(sys.gamma));
        // the constant term is the equilibrium residual; it must vanish
        let c0 = zdot.evaluate(&vec![0.0; nvars]);
        if c0.abs() > 1e-10 {
            return Err(ModelError::EquilibriumResidual(format!(
                "transformed field has f({}) = {c0:.3e} at the origin",
                k + 1
            )));
        }
        zdot.add_term(Monomial::one(nvars), -c0);
        f.push(zdot);
    }
    for k in 0..m {
        let zk = Polynomial::variable(nvars, k);
        let sin = Polynomial::variable(nvars, m + 2 * k);
        let cos = exp.cos_poly(k);
        f.push(cos.mul(&zk)); // d/dt sin θ = cos θ · ω
        f.push(sin.mul(&zk)); // d/dt (1 − cos θ) = sin θ · ω
    }
    // declaration order is speeds then interleaved (sin, 1−cos): reorder the
    // trig part built above into the final layout
    let mut field = Vec::with_capacity(nvars);
    field.extend(f[..m].iter().cloned());
    for k in 0..m {
        field.push(f[m + 2 * k].clone());
        field.push(f[m + 2 * k + 1].clone());
    }

    let mut g = Vec::with_capacity(m);
    for k in 0..m {
        let s = Polynomial::variable(nvars, m + 2 * k);
        let c = Polynomial::variable(nvars, m + 2 * k + 1);
        // sin² + (1 − (1 − cos))² − 1 = s² + c² − 2c
        g.push(s.mul(&s).add(&c.mul(&c)).sub(&c.scale(2.0)));
    }

    let h = lvrt_polynomials_inner(sys, &exp, &theta_of, &sep_of)?;

    let mut var_labels = Vec::with_capacity(nvars);
    for k in 0..nvars {
        var_labels.push(format!("z{}", k + 1));
    }

    Ok(ConstrainedPolySystem {
        nvars,
        f: field,
        g,
        h,
        sep_delta_rel: sep.clone(),
        var_labels,
    })
}

/// LVRT inequality polynomials h_j(z) = |v_j(z)|² − max(LVRT_j)².
pub fn lvrt_polynomials(sys: &SwingSystem) -> Result<Vec<Polynomial>, ModelError> {
    let m = sys.others.len();
    let exp = TrigExpander { nvars: 3 * m, m };
    let sep = &sys.equilibrium.delta_rel;
    let theta_of = |mach: usize| sys.others.iter().position(|&o| o == mach);
    let sep_of = |mach: usize| theta_of(mach).map(|k| sep[k]).unwrap_or(0.0);
    lvrt_polynomials_inner(sys, &exp, &theta_of, &sep_of)
}

fn lvrt_polynomials_inner(
    sys: &SwingSystem,
    exp: &TrigExpander,
    theta_of: &dyn Fn(usize) -> Option<usize>,
    sep_of: &dyn Fn(usize) -> f64,
) -> Result<Vec<Polynomial>, ModelError> {
    let nvars = exp.nvars;
    let ng = sys.n_machines();
    let mut out = Vec::new();
    for &(bus_row, vmin) in &sys.monitored {
        if bus_row >= sys.reduced.k_e.nrows() {
            return Err(ModelError::Validation(format!(
                "monitored bus row {bus_row} outside the reduced network"
            )));
        }
        let mut re = Polynomial::zero(nvars);
        let mut im = Polynomial::zero(nvars);
        for mach in 0..ng {
            // absorb the equilibrium rotation into the constant map:
            // v_j = Σ K_jm · e^{jδˢ_m} · (cos θ_m + j sin θ_m)
            let kappa = sys.reduced.k_e[(bus_row, mach)]
                * Complex64::from_polar(1.0, sep_of(mach));
            let (s, c) = match theta_of(mach) {
                Some(k) => (exp.sin_var(k), exp.cos_poly(k)),
                None => (Polynomial::zero(nvars), Polynomial::constant(nvars, 1.0)),
            };
            re = re.add(&c.scale(kappa.re)).sub(&s.scale(kappa.im));
            im = im.add(&c.scale(kappa.im)).add(&s.scale(kappa.re));
        }
        let hj = re
            .mul(&re)
            .add(&im.mul(&im))
            .sub(&Polynomial::constant(nvars, vmin * vmin));
        out.push(hj);
    }
    Ok(out)
}
