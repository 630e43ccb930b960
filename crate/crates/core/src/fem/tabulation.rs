//! Reference bases tabulated at quadrature points, and their per-cell
//! physical images.

use crate::fem::basis::{BasisValues, ElementFamily, ReferenceBasis};
use crate::fem::piola::CellMap;
use crate::fem::quadrature::QuadratureRule;
use crate::scalar::Real;
use crate::vec3::{self, Vec3};

#[derive(Clone, Debug)]
pub struct Tabulation<T> {
    family: ElementFamily,
    rule: QuadratureRule<T>,
    reference: Vec<BasisValues<T>>,
}

impl<T: Real> Tabulation<T> {
    pub fn new(family: ElementFamily, rule: QuadratureRule<T>) -> Self {
        let basis = ReferenceBasis::new(family);
        let reference = rule.points().iter().map(|p| basis.eval(*p)).collect();
        Self {
            family,
            rule,
            reference,
        }
    }

    pub fn family(&self) -> ElementFamily {
        self.family
    }

    pub fn rule(&self) -> &QuadratureRule<T> {
        &self.rule
    }

    pub fn dof_count(&self) -> usize {
        self.family.dof_count()
    }

    /// Fresh buffer sized for this tabulation.
    pub fn cell_buffer(&self) -> CellBasis<T> {
        let n = self.rule.len() * self.dof_count();
        CellBasis {
            family: self.family,
            ndofs: self.dof_count(),
            weights: vec![T::zero(); self.rule.len()],
            points: vec![vec3::zero(); self.rule.len()],
            scalar: vec![T::zero(); n],
            vector: vec![vec3::zero(); n],
            deriv_scalar: vec![T::zero(); n],
            deriv_vector: vec![vec3::zero(); n],
        }
    }

    /// Pushes the tabulated reference values to the cell described by `map`.
    /// Optional `signs` flip local functions to the global orientation.
    pub fn fill(&self, map: &CellMap<T>, signs: Option<&[i8]>, out: &mut CellBasis<T>) {
        let nd = self.dof_count();
        let jdet = map.det().abs();
        let sign = |i: usize| match signs {
            Some(s) if s[i] < 0 => -T::one(),
            _ => T::one(),
        };
        for (q, ((p, w), rv)) in self.rule.iter().zip(&self.reference).enumerate() {
            out.weights[q] = w * jdet;
            out.points[q] = map.to_physical(p);
            let base = q * nd;
            match rv {
                BasisValues::Scalar { values, grads } => {
                    for i in 0..nd {
                        out.scalar[base + i] = values[i];
                        out.deriv_vector[base + i] = map.covariant(grads[i]);
                    }
                }
                BasisValues::Edge { values, curls } => {
                    for i in 0..nd {
                        let s = sign(i);
                        out.vector[base + i] = vec3::scale(s, map.covariant(values[i]));
                        out.deriv_vector[base + i] = vec3::scale(s, map.contravariant(curls[i]));
                    }
                }
                BasisValues::Face { values, divs } => {
                    for i in 0..nd {
                        let s = sign(i);
                        out.vector[base + i] = vec3::scale(s, map.contravariant(values[i]));
                        out.deriv_scalar[base + i] = s * divs[i] / map.det();
                    }
                }
            }
        }
    }
}

/// Physical basis data on one cell, stored point-major.
#[derive(Clone, Debug)]
pub struct CellBasis<T> {
    family: ElementFamily,
    ndofs: usize,
    weights: Vec<T>,
    points: Vec<Vec3<T>>,
    scalar: Vec<T>,
    vector: Vec<Vec3<T>>,
    deriv_scalar: Vec<T>,
    deriv_vector: Vec<Vec3<T>>,
}

impl<T: Real> CellBasis<T> {
    pub fn family(&self) -> ElementFamily {
        self.family
    }

    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    pub fn npoints(&self) -> usize {
        self.weights.len()
    }

    /// Quadrature weight including the Jacobian determinant.
    #[inline]
    pub fn weight(&self, q: usize) -> T {
        self.weights[q]
    }

    #[inline]
    pub fn point(&self, q: usize) -> Vec3<T> {
        self.points[q]
    }

    /// Lagrange value.
    #[inline]
    pub fn scalar(&self, q: usize, i: usize) -> T {
        self.scalar[q * self.ndofs + i]
    }

    /// Lagrange gradient.
    #[inline]
    pub fn grad(&self, q: usize, i: usize) -> Vec3<T> {
        self.deriv_vector[q * self.ndofs + i]
    }

    /// N0 or RT0 vector value.
    #[inline]
    pub fn vector(&self, q: usize, i: usize) -> Vec3<T> {
        self.vector[q * self.ndofs + i]
    }

    /// N0 curl.
    #[inline]
    pub fn curl(&self, q: usize, i: usize) -> Vec3<T> {
        self.deriv_vector[q * self.ndofs + i]
    }

    /// RT0 divergence.
    #[inline]
    pub fn div(&self, q: usize, i: usize) -> T {
        self.deriv_scalar[q * self.ndofs + i]
    }
}
