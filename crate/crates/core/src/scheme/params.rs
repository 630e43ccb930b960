use std::fmt;
use std::sync::Arc;

use crate::scheme::SchemeError;
use crate::scalar::Real;
use crate::spaces::{Field, MhdSpaces};
use crate::vec3::Vec3;

/// Time-dependent vector field `(t, x) ↦ v`.
pub type VectorFn<T> = Arc<dyn Fn(T, Vec3<T>) -> Vec3<T> + Send + Sync>;

/// Dimensionless coefficients. `alpha = s / R_m` is stored alongside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemParams<T> {
    pub re: T,
    pub rm: T,
    pub s: T,
    pub alpha: T,
}

impl<T: Real> ProblemParams<T> {
    pub fn new(re: T, rm: T, s: T) -> Result<Self, SchemeError> {
        for (name, v) in [("Re", re), ("Rm", rm), ("s", s)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(SchemeError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { re, rm, s, alpha: s / rm })
    }
}

impl<T: Real> Default for ProblemParams<T> {
    fn default() -> Self {
        Self::new(T::one(), T::one(), T::one()).expect("unit parameters")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SchemeKind {
    /// One solve per step with lagged advector and magnetic field.
    Linearized,
    /// Fixed-point iteration on the fully implicit step.
    #[default]
    Picard,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Linearized => "linearized",
            Self::Picard => "picard",
        })
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linearized" => Ok(Self::Linearized),
            "picard" => Ok(Self::Picard),
            other => Err(format!("unknown scheme '{other}' (allowed: linearized, picard)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeConfig<T> {
    pub k: T,
    pub final_time: T,
    pub steps: usize,
    pub scheme: SchemeKind,
    pub picard_tol: T,
    pub picard_max_iter: usize,
}

impl<T: Real> TimeConfig<T> {
    /// Uniform grid with `final_time / k` steps; the ratio must be an
    /// integer to round-off.
    pub fn new(k: T, final_time: T, scheme: SchemeKind) -> Result<Self, SchemeError> {
        if !(k > T::zero()) || !k.is_finite() {
            return Err(SchemeError::InvalidParameter(format!("time step must be positive, got {k}")));
        }
        if final_time < T::zero() || !final_time.is_finite() {
            return Err(SchemeError::InvalidParameter(format!("final time must be nonnegative, got {final_time}")));
        }
        let ratio = final_time / k;
        let steps = ratio.round();
        if (ratio - steps).abs() > T::lit(1e-6) * ratio.max(T::one()) {
            return Err(SchemeError::InvalidParameter(format!(
                "final time {final_time} is not a multiple of k = {k}"
            )));
        }
        Ok(Self {
            k,
            final_time,
            steps: steps.to_usize().expect("step count"),
            scheme,
            picard_tol: T::lit(1e-10),
            picard_max_iter: 30,
        })
    }

    pub fn with_picard(mut self, tol: T, max_iter: usize) -> Self {
        self.picard_tol = tol;
        self.picard_max_iter = max_iter;
        self
    }
}

/// Forcing terms. Absent entries are zero.
#[derive(Clone, Default)]
pub struct SourceSet<T> {
    /// `f` in the momentum equation.
    pub momentum: Option<VectorFn<T>>,
    /// `g_B` added to the Faraday equation.
    pub induction: Option<VectorFn<T>>,
    /// Functional `ℓ(F) = s (j*, F) − α (B*, ∇×F)` added to Ohm's law.
    pub ohm: Option<OhmSource<T>>,
}

#[derive(Clone)]
pub struct OhmSource<T> {
    pub current: VectorFn<T>,
    pub magnetic: VectorFn<T>,
}

impl<T> fmt::Debug for SourceSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceSet")
            .field("momentum", &self.momentum.is_some())
            .field("induction", &self.induction.is_some())
            .field("ohm", &self.ohm.is_some())
            .finish()
    }
}

impl<T> SourceSet<T> {
    pub fn is_zero(&self) -> bool {
        self.momentum.is_none() && self.induction.is_none() && self.ohm.is_none()
    }
}

/// Dirichlet data for `u`, `n·B` and `n×E`. Absent entries are homogeneous.
#[derive(Clone, Default)]
pub struct BoundaryData<T> {
    pub velocity: Option<VectorFn<T>>,
    pub magnetic: Option<VectorFn<T>>,
    pub electric: Option<VectorFn<T>>,
}

impl<T> fmt::Debug for BoundaryData<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData")
            .field("velocity", &self.velocity.is_some())
            .field("magnetic", &self.magnetic.is_some())
            .field("electric", &self.electric.is_some())
            .finish()
    }
}

impl<T> BoundaryData<T> {
    pub fn is_homogeneous(&self) -> bool {
        self.velocity.is_none() && self.magnetic.is_none() && self.electric.is_none()
    }
}

/// Discrete fields at one time level.
#[derive(Clone, Debug)]
pub struct State<T> {
    pub t: T,
    pub u: Field<T>,
    pub b: Field<T>,
    pub e: Field<T>,
    pub p: Field<T>,
}

impl<T: Real> State<T> {
    pub fn zeros(spaces: &MhdSpaces<T>, t: T) -> Self {
        Self {
            t,
            u: Field::zeros(&spaces.velocity),
            b: Field::zeros(&spaces.magnetic),
            e: Field::zeros(&spaces.electric),
            p: Field::zeros(&spaces.pressure),
        }
    }
}
