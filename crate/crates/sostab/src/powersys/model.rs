//! Model file schema and validation.
//!
//! Models are TOML records: buses (with optional constant-power loads),
//! branches (per-unit series impedance + total line-charging susceptance),
//! classical machines (inertia M [s²/rad·pu], damping D [pu], transient
//! reactance, mechanical power, internal EMF magnitude), inverter-based
//! units modeled as negative loads with an LVRT curve, and the curves
//! themselves. See the shipped three-machine fixture for a complete example.

use super::ModelError;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    #[serde(default)]
    pub load_p: f64,
    #[serde(default)]
    pub load_q: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance (half stamped at each end).
    #[serde(default)]
    pub b: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Machine {
    pub bus: usize,
    /// M [s²/rad·pu].
    pub inertia: f64,
    /// D [pu]; D/M must be uniform across machines.
    pub damping: f64,
    pub xd_prime: f64,
    /// Mechanical power [pu].
    pub pm: f64,
    /// Internal EMF magnitude [pu].
    pub emf: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PvUnit {
    pub bus: usize,
    /// Injection as negative load: `p = -0.4` consumes −0.4, i.e. injects 0.4.
    pub p: f64,
    #[serde(default)]
    pub q: f64,
    pub lvrt: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LvrtCurve {
    pub name: String,
    /// (time [s], minimum voltage [pu]) samples.
    pub points: Vec<(f64, f64)>,
    /// Maximum of the curve; the conservative time-independent bound.
    #[serde(skip_deserializing)]
    pub max_value: f64,
}

#[derive(Clone, Debug, Deserialize)]
struct RawModel {
    frequency_hz: f64,
    reference_bus: Option<usize>,
    #[serde(default, rename = "bus")]
    buses: Vec<Bus>,
    #[serde(default, rename = "branch")]
    branches: Vec<Branch>,
    #[serde(default, rename = "machine")]
    machines: Vec<Machine>,
    #[serde(default, rename = "pv")]
    pv_units: Vec<PvUnit>,
    #[serde(default, rename = "lvrt")]
    lvrt_curves: Vec<LvrtCurve>,
}

#[derive(Clone, Debug)]
pub struct PowerSystemModel {
    pub frequency_hz: f64,
    pub reference_bus: Option<usize>,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub machines: Vec<Machine>,
    pub pv_units: Vec<PvUnit>,
    pub lvrt_curves: Vec<LvrtCurve>,
}

impl PowerSystemModel {
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Io(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let raw: RawModel = toml::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        let mut model = PowerSystemModel {
            frequency_hz: raw.frequency_hz,
            reference_bus: raw.reference_bus,
            buses: raw.buses,
            branches: raw.branches,
            machines: raw.machines,
            pv_units: raw.pv_units,
            lvrt_curves: raw.lvrt_curves,
        };
        for curve in &mut model.lvrt_curves {
            curve.max_value = curve.points.iter().fold(0.0_f64, |a, &(_, v)| a.max(v));
        }
        model.validate()?;
        Ok(model)
    }

    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    pub fn n_machines(&self) -> usize {
        self.machines.len()
    }

    /// 0-based index into `buses` keyed by bus id.
    pub fn bus_index(&self) -> BTreeMap<usize, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    /// Uniform damping ratio D/M [1/s].
    pub fn damping_ratio(&self) -> f64 {
        self.machines[0].damping / self.machines[0].inertia
    }

    /// Reference machine index: explicit `reference_bus`, else highest inertia.
    pub fn reference_machine(&self) -> usize {
        if let Some(bus) = self.reference_bus {
            return self
                .machines
                .iter()
                .position(|m| m.bus == bus)
                .expect("validated reference bus");
        }
        let mut best = 0;
        for (i, m) in self.machines.iter().enumerate() {
            if m.inertia > self.machines[best].inertia {
                best = i;
            }
        }
        best
    }

    pub fn lvrt_curve(&self, name: &str) -> Option<&LvrtCurve> {
        self.lvrt_curves.iter().find(|c| c.name == name)
    }

    /// Total constant-power load at a bus, PV units included as negative load.
    pub fn total_load(&self, bus_id: usize) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        if let Some(b) = self.buses.iter().find(|b| b.id == bus_id) {
            s += Complex64::new(b.load_p, b.load_q);
        }
        for pv in &self.pv_units {
            if pv.bus == bus_id {
                s += Complex64::new(pv.p, pv.q);
            }
        }
        s
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Validation(msg));
        if self.frequency_hz <= 0.0 {
            return bad("frequency_hz must be positive".into());
        }
        if self.buses.is_empty() {
            return bad("model declares no buses".into());
        }
        let mut ids = BTreeSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return bad(format!("bus {} declared twice", b.id));
            }
        }
        if self.branches.is_empty() {
            return bad("model declares no branches".into());
        }
        for br in &self.branches {
            if !ids.contains(&br.from) || !ids.contains(&br.to) {
                return bad(format!("branch {}-{} references an unknown bus", br.from, br.to));
            }
            if br.from == br.to {
                return bad(format!("branch {}-{} is a self-loop", br.from, br.to));
            }
            if br.r == 0.0 && br.x == 0.0 {
                return bad(format!("branch {}-{} has zero impedance", br.from, br.to));
            }
        }
        if self.machines.is_empty() {
            return bad("model declares no machines".into());
        }
        let mut mach_buses = BTreeSet::new();
        for m in &self.machines {
            if !ids.contains(&m.bus) {
                return bad(format!("machine at bus {} references an unknown bus", m.bus));
            }
            if !mach_buses.insert(m.bus) {
                return bad(format!("two machines at bus {}", m.bus));
            }
            if m.inertia <= 0.0 || m.xd_prime <= 0.0 || m.emf <= 0.0 {
                return bad(format!(
                    "machine at bus {}: inertia, xd_prime and emf must be positive",
                    m.bus
                ));
            }
        }
        // uniform damping is required by the single-machine reference-frame
        // reduction of the swing equations
        let gamma0 = self.machines[0].damping / self.machines[0].inertia;
        for m in &self.machines[1..] {
            let gamma = m.damping / m.inertia;
            if (gamma - gamma0).abs() > 1e-8 * gamma0.abs().max(1.0) {
                return bad(format!(
                    "non-uniform damping: machine at bus {} has D/M = {:.6}, expected {:.6}",
                    m.bus, gamma, gamma0
                ));
            }
        }
        if let Some(rb) = self.reference_bus {
            if !mach_buses.contains(&rb) {
                return bad(format!("reference_bus {rb} has no machine"));
            }
        }
        for pv in &self.pv_units {
            if !ids.contains(&pv.bus) {
                return bad(format!("pv unit at bus {} references an unknown bus", pv.bus));
            }
            let Some(curve) = self.lvrt_curve(&pv.lvrt) else {
                return bad(format!("pv unit at bus {}: unknown lvrt curve `{}`", pv.bus, pv.lvrt));
            };
            if curve.points.is_empty() {
                return bad(format!("lvrt curve `{}` has no points", curve.name));
            }
        }
        for c in &self.lvrt_curves {
            let mut last_t = f64::NEG_INFINITY;
            for &(t, v) in &c.points {
                if t < last_t {
                    return bad(format!("lvrt curve `{}`: times must be nondecreasing", c.name));
                }
                last_t = t;
                if v < 0.0 || v > 1.0 {
                    return bad(format!("lvrt curve `{}`: voltage {v} outside [0, 1]", c.name));
                }
            }
            if c.max_value <= 0.0 {
                return bad(format!("lvrt curve `{}`: maximum must be positive", c.name));
            }
        }
        // connected network
        let index = self.bus_index();
        let mut parent: Vec<usize> = (0..self.buses.len()).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let r = find(parent, parent[i]);
                parent[i] = r;
            }
            parent[i]
        }
        for br in &self.branches {
            let a = find(&mut parent, index[&br.from]);
            let b = find(&mut parent, index[&br.to]);
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        for i in 1..self.buses.len() {
            if find(&mut parent, i) != root {
                return bad(format!("network is not connected: bus {} is isolated", self.buses[i].id));
            }
        }
        Ok(())
    }
}
