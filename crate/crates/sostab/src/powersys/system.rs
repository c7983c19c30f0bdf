//! Equilibrium solution and the reduced swing-equation system.

use super::model::PowerSystemModel;
use super::network::{kron_reduce, raw_admittance, with_load_shunts, ReducedNetwork};
use super::powerflow::solve_on;
use super::ModelError;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Post-reduction operating point.
#[derive(Clone, Debug)]
pub struct Equilibrium {
    /// Relative internal angles δˢ of the non-reference machines [rad],
    /// in machine declaration order.
    pub delta_rel: Vec<f64>,
    /// Bus voltage phasors at the operating point (reference-machine frame).
    pub bus_voltages: Vec<Complex64>,
    /// Electrical power of each machine at the equilibrium.
    pub electrical_power: Vec<f64>,
    /// Max relative swing residual at the returned point.
    pub residual: f64,
}

/// Everything the dynamics need: machine constants, the reduced network and
/// the operating point. Immutable once built.
#[derive(Clone, Debug)]
pub struct SwingSystem {
    pub inertia: Vec<f64>,
    pub pm: Vec<f64>,
    pub emf: Vec<f64>,
    /// Uniform D/M [1/s].
    pub gamma: f64,
    pub reference: usize,
    /// Non-reference machine indices in declaration order.
    pub others: Vec<usize>,
    pub reduced: ReducedNetwork,
    pub equilibrium: Equilibrium,
    /// (bus row, conservative LVRT bound) per monitored PV unit.
    pub monitored: Vec<(usize, f64)>,
    /// Bus ids in row order, for reports.
    pub bus_ids: Vec<usize>,
}

/// Admittance matrix of the study network with loads as constant shunts,
/// converted at the solved power-flow voltages.
pub fn build_admittance(
    model: &PowerSystemModel,
) -> Result<super::network::AugmentedAdmittance, ModelError> {
    let raw = raw_admittance(model);
    let flow = solve_on(model, &raw)?;
    Ok(with_load_shunts(&raw, model, flow.bus_voltages(raw.n_bus)))
}

/// Electrical power of every machine on the reduced network at the given
/// absolute internal angles.
pub fn electrical_power(
    y_red: &DMatrix<Complex64>,
    emf: &[f64],
    delta: &[f64],
) -> Vec<f64> {
    let ng = emf.len();
    let e = DVector::from_iterator(
        ng,
        (0..ng).map(|i| Complex64::from_polar(emf[i], delta[i])),
    );
    let current = y_red * &e;
    (0..ng).map(|i| (e[i] * current[i].conj()).re).collect()
}

/// Power flow, load conversion, reduction and relative-equilibrium
/// refinement in one pass.
pub fn solve_equilibrium(model: &PowerSystemModel) -> Result<(SwingSystem, Equilibrium), ModelError> {
    let raw = raw_admittance(model);
    let flow = solve_on(model, &raw)?;
    let shunted = with_load_shunts(&raw, model, flow.bus_voltages(raw.n_bus));
    let emf: Vec<f64> = model.machines.iter().map(|m| m.emf).collect();
    let reduced = kron_reduce(&shunted, &emf)?;

    let ng = model.n_machines();
    let reference = model.reference_machine();
    let others: Vec<usize> = (0..ng).filter(|&i| i != reference).collect();
    let inertia: Vec<f64> = model.machines.iter().map(|m| m.inertia).collect();
    let pm: Vec<f64> = model.machines.iter().map(|m| m.pm).collect();

    // relative accelerations must vanish: refine the flow angles on the
    // reduced network (absorbs file-precision Pm roundoff)
    let mut delta_rel: Vec<f64> =
        others.iter().map(|&i| flow.internal_angles[i]).collect();
    let resid = |dr: &[f64]| -> Vec<f64> {
        let mut delta = vec![0.0; ng];
        for (k, &i) in others.iter().enumerate() {
            delta[i] = dr[k];
        }
        let pe = electrical_power(&reduced.y_red, &emf, &delta);
        let acc: Vec<f64> = (0..ng).map(|i| (pm[i] - pe[i]) / inertia[i]).collect();
        others.iter().map(|&i| acc[i] - acc[reference]).collect()
    };
    let m = others.len();
    for _ in 0..50 {
        let r = resid(&delta_rel);
        let worst = r.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if worst < 1e-12 {
            break;
        }
        let mut jac = DMatrix::zeros(m, m);
        let h = 1e-7;
        for c in 0..m {
            let mut dp = delta_rel.clone();
            dp[c] += h;
            let rp = resid(&dp);
            for rr in 0..m {
                jac[(rr, c)] = (rp[rr] - r[rr]) / h;
            }
        }
        let rhs = DVector::from_vec(r.clone());
        let Some(step) = jac.lu().solve(&rhs) else {
            return Err(ModelError::Singular("equilibrium refinement Jacobian".into()));
        };
        for k in 0..m {
            delta_rel[k] -= step[k];
        }
        if step.amax() > 1.0 {
            return Err(ModelError::EquilibriumResidual(
                "refinement diverged; machine data inconsistent with the network".into(),
            ));
        }
    }
    let r = resid(&delta_rel);
    let residual = r.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if residual > 1e-8 {
        return Err(ModelError::EquilibriumResidual(format!(
            "relative swing residual {residual:.3e} exceeds 1e-8"
        )));
    }

    let mut delta = vec![0.0; ng];
    for (k, &i) in others.iter().enumerate() {
        delta[i] = delta_rel[k];
    }
    let electrical = electrical_power(&reduced.y_red, &emf, &delta);
    let eph = DVector::from_iterator(
        ng,
        (0..ng).map(|i| Complex64::from_polar(emf[i], delta[i])),
    );
    let bus_voltages: Vec<Complex64> = (&reduced.v_from_e * &eph).iter().copied().collect();

    let equilibrium = Equilibrium {
        delta_rel,
        bus_voltages,
        electrical_power: electrical,
        residual,
    };

    let bus_index = model.bus_index();
    let monitored: Vec<(usize, f64)> = model
        .pv_units
        .iter()
        .map(|pv| {
            let curve = model.lvrt_curve(&pv.lvrt).expect("validated curve");
            (bus_index[&pv.bus], curve.max_value)
        })
        .collect();
    let bus_ids: Vec<usize> = model.buses.iter().map(|b| b.id).collect();

    let sys = SwingSystem {
        inertia,
        pm,
        emf,
        gamma: model.damping_ratio(),
        reference,
        others,
        reduced,
        equilibrium: equilibrium.clone(),
        monitored,
        bus_ids,
    };
    Ok((sys, equilibrium))
}

impl SwingSystem {
    pub fn n_machines(&self) -> usize {
        self.inertia.len()
    }

    /// Relative state dimension: (δ_rel, ω_rel) per non-reference machine.
    pub fn state_dim(&self) -> usize {
        2 * self.others.len()
    }

    /// Absolute internal angles from relative ones (reference pinned at 0).
    pub fn absolute_angles(&self, delta_rel: &[f64]) -> Vec<f64> {
        let mut delta = vec![0.0; self.n_machines()];
        for (k, &i) in self.others.iter().enumerate() {
            delta[i] = delta_rel[k];
        }
        delta
    }

    /// Equilibrium as a state vector [δ_rel, ω_rel = 0].
    pub fn sep_state(&self) -> Vec<f64> {
        let m = self.others.len();
        let mut x = vec![0.0; 2 * m];
        x[..m].copy_from_slice(&self.equilibrium.delta_rel);
        x
    }

    /// Bus voltage phasors at a relative-angle configuration.
    pub fn bus_voltages_at(&self, delta_rel: &[f64]) -> Vec<Complex64> {
        let delta = self.absolute_angles(delta_rel);
        let ng = self.n_machines();
        let e = DVector::from_iterator(
            ng,
            (0..ng).map(|i| Complex64::from_polar(1.0, delta[i])),
        );
        (&self.reduced.k_e * &e).iter().copied().collect()
    }
}

/// Relative-frame swing dynamics: state = [δ_rel.., ω_rel..], returns the
/// derivative in the same layout. Uniform damping makes the relative system
/// autonomous.
pub fn swing_rhs(sys: &SwingSystem, state: &[f64]) -> Vec<f64> {
    let m = sys.others.len();
    debug_assert_eq!(state.len(), 2 * m);
    let delta_rel = &state[..m];
    let omega_rel = &state[m..];
    let delta = sys.absolute_angles(delta_rel);
    let pe = electrical_power(&sys.reduced.y_red, &sys.emf, &delta);
    let acc: Vec<f64> = (0..sys.n_machines())
        .map(|i| (sys.pm[i] - pe[i]) / sys.inertia[i])
        .collect();
    let mut out = vec![0.0; 2 * m];
    for k in 0..m {
        out[k] = omega_rel[k];
        out[m + k] = acc[sys.others[k]] - acc[sys.reference] - sys.gamma * omega_rel[k];
    }
    out
}
