//! Reference elements, quadrature and Piola maps.

pub mod basis;
pub mod piola;
pub mod quadrature;
pub mod tabulation;

use thiserror::Error;

pub use basis::{BasisValues, ElementFamily, ReferenceBasis};
pub use piola::{push_forward, CellMap};
pub use quadrature::{QuadratureRule, TriangleRule};
pub use tabulation::{CellBasis, Tabulation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FemError {
    #[error("quadrature degree {0} is not supported")]
    UnsupportedDegree(usize),
    #[error("cell map has a singular Jacobian")]
    DegenerateJacobian,
}
