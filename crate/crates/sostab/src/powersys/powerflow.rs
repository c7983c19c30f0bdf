//! Newton-Raphson power flow on the augmented network.
//!
//! Machine internal nodes act as PV buses (P = Pm, |V| = |E|), the reference
//! machine's internal node is the slack, and every physical bus is a PQ node
//! whose injection is the negated constant-power load (PV units included as
//! negative loads). Solving at the internal nodes makes the flow solution
//! the classical-model operating point directly.

use super::model::PowerSystemModel;
use super::network::{raw_admittance, AugmentedAdmittance};
use super::ModelError;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct PowerFlow {
    /// Phasors for all nodes (buses then machine internal nodes).
    pub voltages: Vec<Complex64>,
    /// Machine internal-node angles [rad] (slack at 0).
    pub internal_angles: Vec<f64>,
    /// Real electrical power delivered by each machine at its internal node.
    pub machine_power: Vec<f64>,
    pub iterations: usize,
}

impl PowerFlow {
    pub fn bus_voltages(&self, n_bus: usize) -> &[Complex64] {
        &self.voltages[..n_bus]
    }
}

pub fn solve_power_flow(model: &PowerSystemModel) -> Result<PowerFlow, ModelError> {
    let aug = raw_admittance(model);
    solve_on(model, &aug)
}

pub(crate) fn solve_on(
    model: &PowerSystemModel,
    aug: &AugmentedAdmittance,
) -> Result<PowerFlow, ModelError> {
    let n_bus = aug.n_bus;
    let ng = model.n_machines();
    let n = n_bus + ng;
    let reference = model.reference_machine();
    let slack = n_bus + reference;

    let g: DMatrix<f64> = aug.matrix.map(|c| c.re);
    let b: DMatrix<f64> = aug.matrix.map(|c| c.im);

    // specified injections
    let mut p_spec = vec![0.0; n];
    let mut q_spec = vec![0.0; n];
    for bus in &model.buses {
        let i = aug.bus_index[&bus.id];
        let s = model.total_load(bus.id);
        p_spec[i] = -s.re;
        q_spec[i] = -s.im;
    }
    for (k, m) in model.machines.iter().enumerate() {
        p_spec[n_bus + k] = m.pm;
    }

    let mut theta = vec![0.0_f64; n];
    let mut vm = vec![1.0_f64; n];
    for (k, m) in model.machines.iter().enumerate() {
        vm[n_bus + k] = m.emf;
    }

    // unknown layout: angles for every node but the slack, magnitudes for buses
    let ang_nodes: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let mag_nodes: Vec<usize> = (0..n_bus).collect();
    let nun = ang_nodes.len() + mag_nodes.len();

    let calc = |theta: &[f64], vm: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            let mut pi = 0.0;
            let mut qi = 0.0;
            for j in 0..n {
                let gij = g[(i, j)];
                let bij = b[(i, j)];
                if gij == 0.0 && bij == 0.0 {
                    continue;
                }
                let tij = theta[i] - theta[j];
                let (s, c) = tij.sin_cos();
                pi += vm[j] * (gij * c + bij * s);
                qi += vm[j] * (gij * s - bij * c);
            }
            p[i] = vm[i] * pi;
            q[i] = vm[i] * qi;
        }
        (p, q)
    };

    let mut iterations = 0;
    for it in 0..60 {
        iterations = it;
        let (p, q) = calc(&theta, &vm);
        let mut mismatch = DVector::zeros(nun);
        for (r, &i) in ang_nodes.iter().enumerate() {
            mismatch[r] = p_spec[i] - p[i];
        }
        for (r, &i) in mag_nodes.iter().enumerate() {
            mismatch[ang_nodes.len() + r] = q_spec[i] - q[i];
        }
        if mismatch.amax() < 1e-12 {
            let voltages: Vec<Complex64> = (0..n)
                .map(|i| Complex64::from_polar(vm[i], theta[i]))
                .collect();
            let internal_angles: Vec<f64> =
                (0..ng).map(|k| theta[n_bus + k] - theta[slack]).collect();
            let machine_power: Vec<f64> = (0..ng).map(|k| p[n_bus + k]).collect();
            return Ok(PowerFlow { voltages, internal_angles, machine_power, iterations });
        }

        // polar Jacobian of the calculated injections
        let mut jac = DMatrix::zeros(nun, nun);
        for (r, &i) in ang_nodes.iter().enumerate() {
            for (c, &j) in ang_nodes.iter().enumerate() {
                jac[(r, c)] = if i == j {
                    -q[i] - b[(i, i)] * vm[i] * vm[i]
                } else {
                    let tij = theta[i] - theta[j];
                    let (s, co) = tij.sin_cos();
                    vm[i] * vm[j] * (g[(i, j)] * s - b[(i, j)] * co)
                };
            }
            for (c, &j) in mag_nodes.iter().enumerate() {
                jac[(r, ang_nodes.len() + c)] = if i == j {
                    p[i] / vm[i] + g[(i, i)] * vm[i]
                } else {
                    let tij = theta[i] - theta[j];
                    let (s, co) = tij.sin_cos();
                    vm[i] * (g[(i, j)] * co + b[(i, j)] * s)
                };
            }
        }
        for (r, &i) in mag_nodes.iter().enumerate() {
            for (c, &j) in ang_nodes.iter().enumerate() {
                jac[(ang_nodes.len() + r, c)] = if i == j {
                    p[i] - g[(i, i)] * vm[i] * vm[i]
                } else {
                    let tij = theta[i] - theta[j];
                    let (s, co) = tij.sin_cos();
                    -vm[i] * vm[j] * (g[(i, j)] * co + b[(i, j)] * s)
                };
            }
            for (c, &j) in mag_nodes.iter().enumerate() {
                jac[(ang_nodes.len() + r, ang_nodes.len() + c)] = if i == j {
                    q[i] / vm[i] - b[(i, i)] * vm[i]
                } else {
                    let tij = theta[i] - theta[j];
                    let (s, co) = tij.sin_cos();
                    vm[i] * (g[(i, j)] * s - b[(i, j)] * co)
                };
            }
        }
        let Some(dx) = jac.lu().solve(&mismatch) else {
            return Err(ModelError::Singular("power-flow Jacobian".into()));
        };
        for (r, &i) in ang_nodes.iter().enumerate() {
            theta[i] += dx[r];
        }
        for (r, &i) in mag_nodes.iter().enumerate() {
            vm[i] += dx[ang_nodes.len() + r];
            if vm[i] <= 0.0 {
                return Err(ModelError::PowerFlowDiverged(format!(
                    "voltage collapsed at bus {}",
                    model.buses[i].id
                )));
            }
        }
        if dx.amax() > 1e3 {
            return Err(ModelError::PowerFlowDiverged(format!(
                "step diverged at iteration {it}"
            )));
        }
    }
    Err(ModelError::PowerFlowDiverged(format!(
        "no convergence after {iterations} iterations"
    )))
}
