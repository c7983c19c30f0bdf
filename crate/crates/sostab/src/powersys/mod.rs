//! Classical multi-machine power-system modeling: model files, admittance
//! assembly, Kron reduction, power flow, the reduced swing dynamics and
//! their polynomial transformation.

mod model;
mod network;
mod powerflow;
mod system;
mod transform;

pub use model::{Branch, Bus, LvrtCurve, Machine, PowerSystemModel, PvUnit};
pub use network::{kron_reduce, raw_admittance, with_load_shunts, AugmentedAdmittance, ReducedNetwork};
pub use powerflow::{solve_power_flow, PowerFlow};
pub use system::{build_admittance, electrical_power, solve_equilibrium, swing_rhs, Equilibrium, SwingSystem};
pub use transform::{lvrt_polynomials, transform_to_polynomial, ConstrainedPolySystem};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {0}: {1}")]
    Io(String, String),
    #[error("model parse error: {0}")]
    Parse(String),
    #[error("model validation: {0}")]
    Validation(String),
    #[error("power flow diverged: {0}")]
    PowerFlowDiverged(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("equilibrium check failed: {0}")]
    EquilibriumResidual(String),
}
