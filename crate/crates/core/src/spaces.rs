//! Global degree-of-freedom maps for the four discrete spaces, canonical
//! interpolation and boundary DOF sets.

use std::sync::Arc;

use thiserror::Error;

use crate::fem::quadrature::{gauss_legendre, TriangleRule};
use crate::fem::ElementFamily;
use crate::mesh::Mesh;
use crate::scalar::Real;
use crate::vec3::{self, Vec3};

/// Points per edge for tangential line integrals.
const EDGE_POINTS: usize = 6;
/// Polynomial degree of the face rule used for normal fluxes.
const FACE_DEGREE: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error("coefficient vector has length {got}, space has {expected} DOFs")]
    LengthMismatch { expected: usize, got: usize },
    #[error("operation requires a {expected:?} space, got {got:?}")]
    KindMismatch { expected: SpaceKind, got: SpaceKind },
}

/// The discrete spaces of the scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Continuous quadratic vector fields (velocity).
    VectorP2,
    /// Continuous linear scalars (pressure).
    P1,
    /// Lowest-order Nédélec edge fields (electric field).
    Nedelec,
    /// Lowest-order Raviart–Thomas face fields (magnetic field).
    RaviartThomas,
}

impl SpaceKind {
    pub fn element(self) -> ElementFamily {
        match self {
            SpaceKind::VectorP2 => ElementFamily::P2,
            SpaceKind::P1 => ElementFamily::P1,
            SpaceKind::Nedelec => ElementFamily::N0,
            SpaceKind::RaviartThomas => ElementFamily::RT0,
        }
    }

    /// DOFs per cell. Vector P2 interleaves components: local DOF
    /// `3 * node + component`.
    pub fn local_dofs(self) -> usize {
        match self {
            SpaceKind::VectorP2 => 30,
            other => other.element().dof_count(),
        }
    }
}

#[derive(Debug)]
pub struct FeSpace<T> {
    mesh: Arc<Mesh<T>>,
    kind: SpaceKind,
    dof_count: usize,
    cell_dofs: Vec<usize>,
    cell_signs: Vec<i8>,
    boundary_dofs: Vec<usize>,
    on_boundary: Vec<bool>,
}

impl<T: Real> FeSpace<T> {
    pub fn build(mesh: &Arc<Mesh<T>>, kind: SpaceKind) -> Arc<Self> {
        let nl = kind.local_dofs();
        let nc = mesh.num_cells();
        let nv = mesh.num_vertices();
        let mut cell_dofs = Vec::with_capacity(nc * nl);
        let mut cell_signs = Vec::with_capacity(nc * nl);
        let dof_count = match kind {
            SpaceKind::VectorP2 => 3 * (nv + mesh.num_edges()),
            SpaceKind::P1 => nv,
            SpaceKind::Nedelec => mesh.num_edges(),
            SpaceKind::RaviartThomas => mesh.num_faces(),
        };
        for c in 0..nc {
            match kind {
                SpaceKind::VectorP2 => {
                    let cell = mesh.cells()[c];
                    let edges = mesh.cell_edges(c);
                    let nodes = cell.iter().copied().chain(edges.iter().map(|e| nv + e));
                    for node in nodes {
                        for comp in 0..3 {
                            cell_dofs.push(3 * node + comp);
                            cell_signs.push(1);
                        }
                    }
                }
                SpaceKind::P1 => {
                    cell_dofs.extend_from_slice(&mesh.cells()[c]);
                    cell_signs.extend_from_slice(&[1; 4]);
                }
                SpaceKind::Nedelec => {
                    cell_dofs.extend_from_slice(mesh.cell_edges(c));
                    cell_signs.extend_from_slice(mesh.cell_edge_signs(c));
                }
                SpaceKind::RaviartThomas => {
                    cell_dofs.extend_from_slice(mesh.cell_faces(c));
                    cell_signs.extend_from_slice(mesh.cell_face_signs(c));
                }
            }
        }

        let boundary_dofs: Vec<usize> = match kind {
            SpaceKind::VectorP2 => {
                let nodes = mesh
                    .boundary_vertices()
                    .iter()
                    .copied()
                    .chain(mesh.boundary_edges().iter().map(|e| nv + e));
                let mut dofs: Vec<usize> = nodes.flat_map(|n| [3 * n, 3 * n + 1, 3 * n + 2]).collect();
                dofs.sort_unstable();
                dofs
            }
            SpaceKind::P1 => Vec::new(),
            SpaceKind::Nedelec => mesh.boundary_edges().to_vec(),
            SpaceKind::RaviartThomas => mesh.boundary_faces().to_vec(),
        };
        let mut on_boundary = vec![false; dof_count];
        for &d in &boundary_dofs {
            on_boundary[d] = true;
        }
        Arc::new(Self {
            mesh: Arc::clone(mesh),
            kind,
            dof_count,
            cell_dofs,
            cell_signs,
            boundary_dofs,
            on_boundary,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn local_dofs(&self) -> usize {
        self.kind.local_dofs()
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let n = self.local_dofs();
        &self.cell_dofs[cell * n..(cell + 1) * n]
    }

    /// Orientation signs of the local functions (all +1 for Lagrange spaces).
    pub fn cell_signs(&self, cell: usize) -> &[i8] {
        let n = self.local_dofs();
        &self.cell_signs[cell * n..(cell + 1) * n]
    }

    /// DOFs carrying the trace selected by the space: full value for
    /// velocity, tangential for Nédélec, normal for Raviart–Thomas.
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn is_boundary_dof(&self, dof: usize) -> bool {
        self.on_boundary[dof]
    }

    /// Physical location of a Lagrange node (vertex or edge midpoint).
    fn node_point(&self, node: usize) -> Vec3<T> {
        let nv = self.mesh.num_vertices();
        if node < nv {
            self.mesh.vertices()[node]
        } else {
            let [a, b] = self.mesh.edges()[node - nv];
            let v = self.mesh.vertices();
            vec3::scale(T::lit(0.5), vec3::add(v[a], v[b]))
        }
    }

    /// Canonical degrees of freedom of `field` for the listed global DOFs.
    /// Scalar spaces read component 0 of the field.
    pub fn dof_values<F>(&self, dofs: impl Iterator<Item = usize>, field: F) -> Vec<T>
    where
        F: Fn(Vec3<T>) -> Vec3<T>,
    {
        let verts = self.mesh.vertices();
        match self.kind {
            SpaceKind::VectorP2 => dofs.map(|d| field(self.node_point(d / 3))[d % 3]).collect(),
            SpaceKind::P1 => dofs.map(|d| field(verts[d])[0]).collect(),
            SpaceKind::Nedelec => {
                let (xs, ws) = gauss_legendre::<T>(EDGE_POINTS);
                dofs.map(|d| {
                    let [a, b] = self.mesh.edges()[d];
                    let t = vec3::sub(verts[b], verts[a]);
                    xs.iter()
                        .zip(&ws)
                        .map(|(s, w)| *w * vec3::dot(field(vec3::add(verts[a], vec3::scale(*s, t))), t))
                        .sum()
                })
                .collect()
            }
            SpaceKind::RaviartThomas => {
                let rule = TriangleRule::<T>::new(FACE_DEGREE).expect("face rule");
                dofs.map(|d| {
                    let [a, b, c] = self.mesh.faces()[d];
                    let e1 = vec3::sub(verts[b], verts[a]);
                    let e2 = vec3::sub(verts[c], verts[a]);
                    let n = vec3::cross(e1, e2);
                    rule.iter()
                        .map(|([s, t], w)| {
                            let x = vec3::add(verts[a], vec3::add(vec3::scale(s, e1), vec3::scale(t, e2)));
                            w * vec3::dot(field(x), n)
                        })
                        .sum()
                })
                .collect()
            }
        }
    }

    /// `(dof, value)` pairs of the canonical interpolant of `field`
    /// restricted to the boundary DOFs.
    pub fn boundary_values<F>(&self, field: F) -> Vec<(usize, T)>
    where
        F: Fn(Vec3<T>) -> Vec3<T>,
    {
        let values = self.dof_values(self.boundary_dofs.iter().copied(), field);
        self.boundary_dofs.iter().copied().zip(values).collect()
    }
}

/// Canonical interpolant of `field` into `space`.
pub fn interpolate<T: Real, F>(space: &Arc<FeSpace<T>>, field: F) -> Field<T>
where
    F: Fn(Vec3<T>) -> Vec3<T>,
{
    let coeffs = space.dof_values(0..space.dof_count(), field);
    Field {
        space: Arc::clone(space),
        coeffs,
    }
}

/// Scalar convenience wrapper around [`interpolate`].
pub fn interpolate_scalar<T: Real, F>(space: &Arc<FeSpace<T>>, field: F) -> Field<T>
where
    F: Fn(Vec3<T>) -> T,
{
    interpolate(space, |x| [field(x), T::zero(), T::zero()])
}

/// Coefficient vector bound to its space.
#[derive(Clone, Debug)]
pub struct Field<T> {
    space: Arc<FeSpace<T>>,
    coeffs: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(space: &Arc<FeSpace<T>>) -> Self {
        Self {
            space: Arc::clone(space),
            coeffs: vec![T::zero(); space.dof_count()],
        }
    }

    pub fn from_coeffs(space: &Arc<FeSpace<T>>, coeffs: Vec<T>) -> Result<Self, SpaceError> {
        if coeffs.len() != space.dof_count() {
            return Err(SpaceError::LengthMismatch {
                expected: space.dof_count(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            space: Arc::clone(space),
            coeffs,
        })
    }

    pub fn space(&self) -> &Arc<FeSpace<T>> {
        &self.space
    }

    pub fn kind(&self) -> SpaceKind {
        self.space.kind()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Local coefficients on a cell, in the space's local order.
    pub fn cell_coeffs(&self, cell: usize, out: &mut Vec<T>) {
        out.clear();
        out.extend(self.space.cell_dofs(cell).iter().map(|&d| self.coeffs[d]));
    }
}

/// The velocity, pressure, magnetic and electric spaces on one mesh.
#[derive(Clone, Debug)]
pub struct MhdSpaces<T> {
    pub velocity: Arc<FeSpace<T>>,
    pub pressure: Arc<FeSpace<T>>,
    pub magnetic: Arc<FeSpace<T>>,
    pub electric: Arc<FeSpace<T>>,
}

impl<T: Real> MhdSpaces<T> {
    pub fn new(mesh: &Arc<Mesh<T>>) -> Self {
        Self {
            velocity: FeSpace::build(mesh, SpaceKind::VectorP2),
            pressure: FeSpace::build(mesh, SpaceKind::P1),
            magnetic: FeSpace::build(mesh, SpaceKind::RaviartThomas),
            electric: FeSpace::build(mesh, SpaceKind::Nedelec),
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        self.velocity.mesh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(n: usize) -> Arc<Mesh<f64>> {
        Arc::new(Mesh::build_box(n, n, n, [1.0; 3]).unwrap())
    }

    #[test]
    fn dof_counts_on_single_cube() {
        let m = mesh(1);
        assert_eq!(FeSpace::build(&m, SpaceKind::Nedelec).dof_count(), 19);
        assert_eq!(FeSpace::build(&m, SpaceKind::RaviartThomas).dof_count(), 18);
        assert_eq!(FeSpace::build(&m, SpaceKind::VectorP2).dof_count(), 81);
        assert_eq!(FeSpace::build(&m, SpaceKind::P1).dof_count(), 8);
    }

    #[test]
    fn every_dof_is_referenced() {
        let m = mesh(2);
        for kind in [SpaceKind::VectorP2, SpaceKind::P1, SpaceKind::Nedelec, SpaceKind::RaviartThomas] {
            let s = FeSpace::build(&m, kind);
            let mut seen = vec![false; s.dof_count()];
            for c in 0..m.num_cells() {
                for &d in s.cell_dofs(c) {
                    seen[d] = true;
                }
            }
            assert!(seen.iter().all(|b| *b), "{kind:?}");
        }
    }

    #[test]
    fn boundary_sets_follow_traces() {
        let m = mesh(2);
        let v = FeSpace::build(&m, SpaceKind::VectorP2);
        assert_eq!(
            v.boundary_dofs().len(),
            3 * (m.boundary_vertices().len() + m.boundary_edges().len())
        );
        assert!(FeSpace::build(&m, SpaceKind::P1).boundary_dofs().is_empty());
        assert_eq!(FeSpace::build(&m, SpaceKind::Nedelec).boundary_dofs(), m.boundary_edges());
        assert_eq!(FeSpace::build(&m, SpaceKind::RaviartThomas).boundary_dofs(), m.boundary_faces());
    }

    #[test]
    fn zero_field_has_zero_boundary_values() {
        let m = mesh(1);
        for kind in [SpaceKind::VectorP2, SpaceKind::Nedelec, SpaceKind::RaviartThomas] {
            let s = FeSpace::build(&m, kind);
            assert!(s.boundary_values(|_| [0.0; 3]).iter().all(|(_, v)| *v == 0.0));
        }
    }

    #[test]
    fn constant_flux_through_boundary_faces() {
        let m = mesh(1);
        let s = FeSpace::build(&m, SpaceKind::RaviartThomas);
        let c = [0.3, -1.2, 2.0];
        for (f, val) in s.boundary_values(|_| c) {
            let [a, b, d] = m.faces()[f];
            let v = m.vertices();
            let area_normal = vec3::scale(0.5, vec3::cross(vec3::sub(v[b], v[a]), vec3::sub(v[d], v[a])));
            assert!((val - vec3::dot(c, area_normal)).abs() < 1e-14);
        }
    }

    #[test]
    fn field_length_is_checked() {
        let m = mesh(1);
        let s = FeSpace::build(&m, SpaceKind::P1);
        assert_eq!(
            Field::from_coeffs(&s, vec![0.0; 3]).unwrap_err(),
            SpaceError::LengthMismatch { expected: 8, got: 3 }
        );
    }
}
