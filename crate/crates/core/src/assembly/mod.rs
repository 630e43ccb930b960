//! Discrete forms of the scheme and the per-step saddle-point system.

pub mod forms;
mod system;

pub use forms::{
    cell_divergence, convection, convection_with, coupling, coupling_with, discrete_curl, divergence, load_curl_vector, load_vector, mass, mean_vector, AssemblyPattern,
    stiffness, CouplingPattern,
};
pub use system::{apply_constraints, assemble_step_system, BlockSystem, Layout, StepData, StepInputs, StepOperators};

use crate::fem::FemError;
use crate::linalg::LinalgError;
use crate::spaces::SpaceKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssemblyError {
    #[error("expected a {expected:?} field, got {got:?}")]
    KindMismatch { expected: SpaceKind, got: SpaceKind },
    #[error("spaces are defined on different meshes")]
    MeshMismatch,
    #[error("coupling {0:?} needs a magnetic field")]
    MissingField(CouplingPattern),
    #[error("time step must be positive")]
    InvalidStep,
    #[error("step data were computed for a different time level")]
    StaleStepData,
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
