//! Bus admittance assembly and Kron reduction to machine internal nodes.

use super::model::PowerSystemModel;
use super::ModelError;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Admittance matrix over physical buses followed by machine internal nodes.
/// Load shunts are included only after a power-flow solution fixes the bus
/// voltages; the raw matrix (loads as injections) drives the flow itself.
#[derive(Clone, Debug)]
pub struct AugmentedAdmittance {
    pub matrix: DMatrix<Complex64>,
    pub n_bus: usize,
    pub bus_index: BTreeMap<usize, usize>,
}

/// Network reduced to the machine internal nodes.
#[derive(Clone, Debug)]
pub struct ReducedNetwork {
    /// Y22 − Y21 Y11⁻¹ Y12 over machine internal nodes.
    pub y_red: DMatrix<Complex64>,
    /// −Y11⁻¹ Y12: maps internal-EMF phasors to eliminated bus voltages.
    pub v_from_e: DMatrix<Complex64>,
    /// v_from_e · diag(|E|): bus voltages from unit machine phasors.
    pub k_e: DMatrix<Complex64>,
}

/// Raw admittance: branches with series elements and line charging, machine
/// transient reactances tying internal nodes to their terminals. No loads.
pub fn raw_admittance(model: &PowerSystemModel) -> AugmentedAdmittance {
    let n_bus = model.n_bus();
    let n = n_bus + model.n_machines();
    let bus_index = model.bus_index();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in &model.branches {
        let f = bus_index[&br.from];
        let t = bus_index[&br.to];
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let half_b = Complex64::new(0.0, br.b / 2.0);
        y[(f, f)] += ys + half_b;
        y[(t, t)] += ys + half_b;
        y[(f, t)] -= ys;
        y[(t, f)] -= ys;
    }
    for (k, m) in model.machines.iter().enumerate() {
        let term = bus_index[&m.bus];
        let node = n_bus + k;
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(0.0, m.xd_prime);
        y[(node, node)] += ys;
        y[(term, term)] += ys;
        y[(node, term)] -= ys;
        y[(term, node)] -= ys;
    }
    AugmentedAdmittance { matrix: y, n_bus, bus_index }
}

/// Convert constant-power loads (PV units included, as negative loads) to
/// shunt admittances at the given bus voltages: y = conj(S) / |V|².
pub fn with_load_shunts(
    base: &AugmentedAdmittance,
    model: &PowerSystemModel,
    bus_voltages: &[Complex64],
) -> AugmentedAdmittance {
    assert_eq!(bus_voltages.len(), base.n_bus);
    let mut out = base.clone();
    for bus in &model.buses {
        let s = model.total_load(bus.id);
        if s == Complex64::new(0.0, 0.0) {
            continue;
        }
        let i = base.bus_index[&bus.id];
        let v2 = bus_voltages[i].norm_sqr();
        out.matrix[(i, i)] += s.conj() / v2;
    }
    out
}

/// Schur-complement elimination of the physical buses:
/// Y_red = Y22 − Y21 Y11⁻¹ Y12, plus the voltage-recovery map of the
/// eliminated nodes. `emf` scales the recovery map into `k_e`.
pub fn kron_reduce(y: &AugmentedAdmittance, emf: &[f64]) -> Result<ReducedNetwork, ModelError> {
    let n = y.matrix.nrows();
    let nb = y.n_bus;
    let ng = n - nb;
    assert_eq!(emf.len(), ng);
    if nb == 0 {
        return Ok(ReducedNetwork {
            y_red: y.matrix.clone(),
            v_from_e: DMatrix::zeros(0, ng),
            k_e: DMatrix::zeros(0, ng),
        });
    }
    let y11 = y.matrix.view((0, 0), (nb, nb)).clone_owned();
    let y12 = y.matrix.view((0, nb), (nb, ng)).clone_owned();
    let y21 = y.matrix.view((nb, 0), (ng, nb)).clone_owned();
    let y22 = y.matrix.view((nb, nb), (ng, ng)).clone_owned();
    let lu = y11.lu();
    let x = lu
        .solve(&y12)
        .ok_or_else(|| ModelError::Singular("bus partition of the admittance matrix".into()))?;
    let y_red = y22 - y21 * &x;
    let v_from_e = -x;
    let mut k_e = v_from_e.clone();
    for (j, &e) in emf.iter().enumerate() {
        for i in 0..nb {
            k_e[(i, j)] *= e;
        }
    }
    Ok(ReducedNetwork { y_red, v_from_e, k_e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::powersys::model::PowerSystemModel;
    use num_complex::Complex64;

    fn two_bus() -> PowerSystemModel {
        PowerSystemModel::parse(
            r#"
frequency_hz = 60.0

[[bus]]
id = 1

[[bus]]
id = 2

[[branch]]
from = 1
to = 2
x = 0.5

[[machine]]
bus = 1
inertia = 0.1
damping = 0.1
xd_prime = 0.2
pm = 0.0
emf = 1.0

[[machine]]
bus = 2
inertia = 0.1
damping = 0.1
xd_prime = 0.2
pm = 0.0
emf = 1.0
"#,
        )
        .unwrap()
    }

    #[test]
    fn single_branch_stamp() {
        let model = two_bus();
        let y = raw_admittance(&model);
        let ys = Complex64::new(0.0, -2.0); // 1/(j0.5)
        let xd = Complex64::new(0.0, -5.0); // 1/(j0.2)
        assert!((y.matrix[(0, 1)] + ys).norm() < 1e-12);
        assert!((y.matrix[(1, 0)] + ys).norm() < 1e-12);
        assert!((y.matrix[(0, 0)] - (ys + xd)).norm() < 1e-12);
        // machine internal node stamp
        assert!((y.matrix[(0, 2)] + xd).norm() < 1e-12);
        assert!((y.matrix[(2, 2)] - xd).norm() < 1e-12);
    }

    #[test]
    fn chain_elimination_is_series_combination() {
        // a—b—c, eliminate b: y_ac = y_ab·y_bc/(y_ab + y_bc)
        let y_ab = Complex64::new(1.2, -3.0);
        let y_bc = Complex64::new(0.7, -2.1);
        let mut m = DMatrix::from_element(3, 3, Complex64::new(0.0, 0.0));
        // node order: b (to eliminate), then a, c
        m[(0, 0)] = y_ab + y_bc;
        m[(1, 1)] = y_ab;
        m[(2, 2)] = y_bc;
        m[(0, 1)] = -y_ab;
        m[(1, 0)] = -y_ab;
        m[(0, 2)] = -y_bc;
        m[(2, 0)] = -y_bc;
        let aug = AugmentedAdmittance { matrix: m, n_bus: 1, bus_index: BTreeMap::new() };
        let red = kron_reduce(&aug, &[1.0, 1.0]).unwrap();
        let expect = y_ab * y_bc / (y_ab + y_bc);
        assert!((red.y_red[(0, 1)] + expect).norm() < 1e-12);
        assert!((red.y_red[(0, 0)] - expect).norm() < 1e-12);
    }

    #[test]
    fn eliminating_nothing_keeps_y() {
        let y22 = Complex64::new(0.3, -1.5);
        let mut m = DMatrix::from_element(1, 1, Complex64::new(0.0, 0.0));
        m[(0, 0)] = y22;
        let aug = AugmentedAdmittance { matrix: m, n_bus: 0, bus_index: BTreeMap::new() };
        let red = kron_reduce(&aug, &[1.0]).unwrap();
        assert!((red.y_red[(0, 0)] - y22).norm() < 1e-14);
    }

    #[test]
    fn voltage_recovery_matches_direct_solve() {
        let model = two_bus();
        let y = raw_admittance(&model);
        let red = kron_reduce(&y, &[1.0, 1.0]).unwrap();
        // random-ish EMF phasors: v = −Y11⁻¹ Y12 E must match the linear solve
        let e = nalgebra::DVector::from_vec(vec![
            Complex64::new(1.02, 0.13),
            Complex64::new(0.98, -0.21),
        ]);
        let v = &red.v_from_e * &e;
        let nb = y.n_bus;
        let y11 = y.matrix.view((0, 0), (nb, nb)).clone_owned();
        let y12 = y.matrix.view((0, nb), (nb, 2)).clone_owned();
        let rhs = -(&y12 * &e);
        let direct = y11.lu().solve(&rhs).unwrap();
        assert!((v - direct).norm() < 1e-10);
    }
}
