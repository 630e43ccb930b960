//! Affine cell maps and the Piola transforms that carry reference bases to
//! physical cells.

use crate::fem::basis::{BasisValues, ElementFamily};
use crate::fem::FemError;
use crate::scalar::Real;
use crate::vec3::{self, Mat3, Vec3};

/// Affine map `x = x0 + J x̂` from the reference tetrahedron.
#[derive(Clone, Copy, Debug)]
pub struct CellMap<T> {
    origin: Vec3<T>,
    jac: Mat3<T>,
    inv: Mat3<T>,
    det: T,
}

impl<T: Real> CellMap<T> {
    pub fn new(vertices: [Vec3<T>; 4]) -> Result<Self, FemError> {
        let mut jac = [[T::zero(); 3]; 3];
        for c in 0..3 {
            let e = vec3::sub(vertices[c + 1], vertices[0]);
            for r in 0..3 {
                jac[r][c] = e[r];
            }
        }
        Self::from_jacobian(vertices[0], jac)
    }

    pub fn from_jacobian(origin: Vec3<T>, jac: Mat3<T>) -> Result<Self, FemError> {
        let inv = vec3::inverse(&jac).ok_or(FemError::DegenerateJacobian)?;
        Ok(Self {
            origin,
            jac,
            inv,
            det: vec3::det(&jac),
        })
    }

    pub fn jacobian(&self) -> &Mat3<T> {
        &self.jac
    }

    pub fn inverse_jacobian(&self) -> &Mat3<T> {
        &self.inv
    }

    pub fn det(&self) -> T {
        self.det
    }

    pub fn to_physical(&self, xr: Vec3<T>) -> Vec3<T> {
        vec3::add(self.origin, vec3::mat_vec(&self.jac, xr))
    }

    pub fn to_reference(&self, x: Vec3<T>) -> Vec3<T> {
        vec3::mat_vec(&self.inv, vec3::sub(x, self.origin))
    }

    /// `J^{-T} v̂`: gradients and covariant (H(curl)) vectors.
    #[inline]
    pub fn covariant(&self, v: Vec3<T>) -> Vec3<T> {
        vec3::mat_t_vec(&self.inv, v)
    }

    /// `J v̂ / det J`: contravariant (H(div)) vectors and curls of H(curl) fields.
    #[inline]
    pub fn contravariant(&self, v: Vec3<T>) -> Vec3<T> {
        vec3::scale(T::one() / self.det, vec3::mat_vec(&self.jac, v))
    }
}

/// Maps reference basis values to the physical cell.
///
/// Lagrange values compose with the map and gradients pick up `J^{-T}`.
/// N0 uses the covariant Piola transform with `curl ↦ J curl̂ / det J`;
/// RT0 the contravariant one with `div ↦ div̂ / det J`.
pub fn push_forward<T: Real>(family: ElementFamily, map: &CellMap<T>, reference: &BasisValues<T>) -> BasisValues<T> {
    match (family, reference) {
        (ElementFamily::P1 | ElementFamily::P2, BasisValues::Scalar { values, grads }) => BasisValues::Scalar {
            values: values.clone(),
            grads: grads.iter().map(|g| map.covariant(*g)).collect(),
        },
        (ElementFamily::N0, BasisValues::Edge { values, curls }) => BasisValues::Edge {
            values: values.iter().map(|v| map.covariant(*v)).collect(),
            curls: curls.iter().map(|c| map.contravariant(*c)).collect(),
        },
        (ElementFamily::RT0, BasisValues::Face { values, divs }) => BasisValues::Face {
            values: values.iter().map(|v| map.contravariant(*v)).collect(),
            divs: divs.iter().map(|d| *d / map.det()).collect(),
        },
        _ => panic!("basis values do not belong to family {family:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::basis::ReferenceBasis;

    fn skewed() -> CellMap<f64> {
        CellMap::new([
            [0.1, 0.2, -0.3],
            [1.2, 0.1, 0.0],
            [0.3, 0.9, 0.2],
            [0.2, 0.4, 1.1],
        ])
        .unwrap()
    }

    #[test]
    fn identity_map_leaves_values_unchanged() {
        let id = CellMap::new([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        for fam in [ElementFamily::P1, ElementFamily::P2, ElementFamily::N0, ElementFamily::RT0] {
            let r = ReferenceBasis::new(fam).eval([0.2, 0.3, 0.1]);
            assert_eq!(push_forward(fam, &id, &r), r);
        }
    }

    #[test]
    fn reference_round_trip() {
        let m = skewed();
        let x = [0.3, 0.2, 0.1];
        let back = m.to_reference(m.to_physical(x));
        assert!(vec3::norm(vec3::sub(back, x)) < 1e-15);
    }

    #[test]
    fn degenerate_jacobian_is_rejected() {
        let err = CellMap::new([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]).unwrap_err();
        assert_eq!(err, FemError::DegenerateJacobian);
    }
}
