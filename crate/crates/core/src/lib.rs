//! Structure-preserving finite elements for incompressible MHD.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix the usual double-precision instantiation.

pub mod analysis;
pub mod assembly;
pub mod fem;
pub mod initial;
pub mod linalg;
pub mod mesh;
pub mod mms;
pub mod scalar;
pub mod scheme;
pub mod spaces;
pub mod vec3;
pub mod verify;

pub type Mesh = mesh::Mesh<f64>;
pub type FeSpace = spaces::FeSpace<f64>;
pub type Field = spaces::Field<f64>;
pub type MhdSpaces = spaces::MhdSpaces<f64>;
pub type CsrMatrix = linalg::CsrMatrix<f64>;
pub type State = scheme::State<f64>;
pub type ProblemParams = scheme::ProblemParams<f64>;
pub type TimeConfig = scheme::TimeConfig<f64>;
pub type SourceSet = scheme::SourceSet<f64>;
pub type BoundaryData = scheme::BoundaryData<f64>;
pub type Stepper = scheme::Stepper<f64>;
pub type ExactSolution = mms::ExactSolution<f64>;
