//! Tetrahedral meshes of axis-aligned boxes with full entity connectivity.
//!
//! Edges and faces are stored as ascending vertex tuples. That ordering is the
//! global orientation used by edge and face elements: an edge points from its
//! lower to its higher vertex, and a face normal follows the right-hand rule
//! over its sorted vertices.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::scalar::Real;
use crate::vec3::{self, Vec3};

/// Local vertex pairs of the six cell edges.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local face `i` is opposite local vertex `i`; the vertex order gives an
/// outward right-hand normal on a positively oriented cell.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("subdivision counts must be at least 1, got ({0}, {1}, {2})")]
    InvalidDivisions(usize, usize, usize),
    #[error("box extents must be positive and finite")]
    InvalidExtents,
    #[error("mesh has no cells")]
    Empty,
    #[error("cell {cell} references vertex {vertex} out of range")]
    VertexOutOfRange { cell: usize, vertex: usize },
    #[error("cell {0} has zero volume")]
    DegenerateCell(usize),
    #[error("face {0} is shared by more than two cells")]
    NonManifoldFace(usize),
}

/// Topological dimension of a mesh entity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dim {
    Vertex = 0,
    Edge = 1,
    Face = 2,
    Cell = 3,
}

#[derive(Clone, Debug)]
pub struct Mesh<T> {
    vertices: Vec<Vec3<T>>,
    cells: Vec<[usize; 4]>,
    edges: Vec<[usize; 2]>,
    faces: Vec<[usize; 3]>,
    edge_lookup: HashMap<[usize; 2], usize>,
    face_edges: Vec<[usize; 3]>,
    cell_edges: Vec<[usize; 6]>,
    cell_edge_signs: Vec<[i8; 6]>,
    cell_faces: Vec<[usize; 4]>,
    cell_face_signs: Vec<[i8; 4]>,
    face_cells: Vec<Vec<usize>>,
    boundary_vertices: Vec<usize>,
    boundary_edges: Vec<usize>,
    boundary_faces: Vec<usize>,
    vertex_on_boundary: Vec<bool>,
    edge_on_boundary: Vec<bool>,
    face_on_boundary: Vec<bool>,
    volumes: Vec<T>,
    h: T,
}

fn sorted<const N: usize>(mut a: [usize; N]) -> [usize; N] {
    a.sort_unstable();
    a
}

/// +1 when `a` is an even permutation of its sorted order.
fn parity3(a: [usize; 3]) -> i8 {
    let inversions = (a[0] > a[1]) as u8 + (a[0] > a[2]) as u8 + (a[1] > a[2]) as u8;
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn signed_volume<T: Real>(p: [Vec3<T>; 4]) -> T {
    let a = vec3::sub(p[1], p[0]);
    let b = vec3::sub(p[2], p[0]);
    let c = vec3::sub(p[3], p[0]);
    vec3::dot(a, vec3::cross(b, c)) / T::lit(6.0)
}

impl<T: Real> Mesh<T> {
    /// Kuhn subdivision of `[0, lx] x [0, ly] x [0, lz]`: each of the
    /// `nx * ny * nz` sub-cubes is split into six tetrahedra that share the
    /// diagonal from its lowest to its highest corner.
    pub fn build_box(nx: usize, ny: usize, nz: usize, extents: [T; 3]) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(MeshError::InvalidDivisions(nx, ny, nz));
        }
        if extents.iter().any(|e| !(e.is_finite() && *e > T::zero())) {
            return Err(MeshError::InvalidExtents);
        }
        let n = [nx, ny, nz];
        let index = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    let ijk = [i, j, k];
                    vertices.push(std::array::from_fn(|d| {
                        extents[d] * T::from_count(ijk[d]) / T::from_count(n[d])
                    }));
                }
            }
        }

        const PERMUTATIONS: [[usize; 3]; 6] =
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut cells = Vec::with_capacity(6 * nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    for perm in PERMUTATIONS {
                        let mut corner = [i, j, k];
                        let mut tet = [index(i, j, k), 0, 0, 0];
                        for (slot, axis) in perm.iter().enumerate() {
                            corner[*axis] += 1;
                            tet[slot + 1] = index(corner[0], corner[1], corner[2]);
                        }
                        cells.push(tet);
                    }
                }
            }
        }
        Self::from_cells(vertices, cells)
    }

    /// Builds a mesh from raw cells, reordering vertices of negatively
    /// oriented cells so that every cell has positive volume.
    pub fn from_cells(vertices: Vec<Vec3<T>>, mut cells: Vec<[usize; 4]>) -> Result<Self, MeshError> {
        if cells.is_empty() {
            return Err(MeshError::Empty);
        }
        let mut volumes = Vec::with_capacity(cells.len());
        let mut h = T::zero();
        for (c, cell) in cells.iter_mut().enumerate() {
            if let Some(&v) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(MeshError::VertexOutOfRange { cell: c, vertex: v });
            }
            let mut longest = T::zero();
            for [a, b] in LOCAL_EDGES {
                longest = longest.max(vec3::norm(vec3::sub(vertices[cell[b]], vertices[cell[a]])));
            }
            let mut vol = signed_volume(cell.map(|v| vertices[v]));
            if vol.abs() <= T::epsilon() * longest.powi(3) {
                return Err(MeshError::DegenerateCell(c));
            }
            if vol < T::zero() {
                cell.swap(2, 3);
                vol = -vol;
            }
            volumes.push(vol);
            h = h.max(longest);
        }

        let mut edges = Vec::new();
        let mut edge_lookup = HashMap::new();
        let mut faces = Vec::new();
        let mut face_lookup: HashMap<[usize; 3], usize> = HashMap::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut cell_edge_signs = Vec::with_capacity(cells.len());
        let mut cell_faces = Vec::with_capacity(cells.len());
        let mut cell_face_signs = Vec::with_capacity(cells.len());
        let mut face_cells: Vec<Vec<usize>> = Vec::new();

        for (c, cell) in cells.iter().enumerate() {
            let mut ce = [0; 6];
            let mut cs = [0i8; 6];
            for (le, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let key = sorted([cell[*a], cell[*b]]);
                let next = edges.len();
                let id = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    next
                });
                ce[le] = id;
                cs[le] = if cell[*a] < cell[*b] { 1 } else { -1 };
            }
            let mut cf = [0; 4];
            let mut fs = [0i8; 4];
            for (lf, local) in LOCAL_FACES.iter().enumerate() {
                let global = local.map(|v| cell[v]);
                let key = sorted(global);
                let next = faces.len();
                let id = *face_lookup.entry(key).or_insert_with(|| {
                    faces.push(key);
                    face_cells.push(Vec::with_capacity(2));
                    next
                });
                face_cells[id].push(c);
                if face_cells[id].len() > 2 {
                    return Err(MeshError::NonManifoldFace(id));
                }
                cf[lf] = id;
                fs[lf] = parity3(global);
            }
            cell_edges.push(ce);
            cell_edge_signs.push(cs);
            cell_faces.push(cf);
            cell_face_signs.push(fs);
        }

        let face_edges = faces
            .iter()
            .map(|&[a, b, c]| [edge_lookup[&[a, b]], edge_lookup[&[a, c]], edge_lookup[&[b, c]]])
            .collect::<Vec<_>>();

        let mut vertex_on_boundary = vec![false; vertices.len()];
        let mut edge_on_boundary = vec![false; edges.len()];
        let mut face_on_boundary = vec![false; faces.len()];
        for (f, incident) in face_cells.iter().enumerate() {
            if incident.len() == 1 {
                face_on_boundary[f] = true;
                for v in faces[f] {
                    vertex_on_boundary[v] = true;
                }
                for e in face_edges[f] {
                    edge_on_boundary[e] = true;
                }
            }
        }
        let collect = |mask: &[bool]| mask.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect();

        Ok(Self {
            boundary_vertices: collect(&vertex_on_boundary),
            boundary_edges: collect(&edge_on_boundary),
            boundary_faces: collect(&face_on_boundary),
            vertices,
            cells,
            edges,
            faces,
            edge_lookup,
            face_edges,
            cell_edges,
            cell_edge_signs,
            cell_faces,
            cell_face_signs,
            face_cells,
            vertex_on_boundary,
            edge_on_boundary,
            face_on_boundary,
            volumes,
            h,
        })
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Global edge indices of a cell in [`LOCAL_EDGES`] order.
    pub fn cell_edges(&self, cell: usize) -> &[usize; 6] {
        &self.cell_edges[cell]
    }

    /// +1 where the local edge direction agrees with the global one.
    pub fn cell_edge_signs(&self, cell: usize) -> &[i8; 6] {
        &self.cell_edge_signs[cell]
    }

    /// Global face indices of a cell in [`LOCAL_FACES`] order.
    pub fn cell_faces(&self, cell: usize) -> &[usize; 4] {
        &self.cell_faces[cell]
    }

    /// +1 where the global face normal points out of the cell.
    pub fn cell_face_signs(&self, cell: usize) -> &[i8; 4] {
        &self.cell_face_signs[cell]
    }

    /// Cells incident to a face: one on the boundary, two inside.
    pub fn face_cells(&self, face: usize) -> &[usize] {
        &self.face_cells[face]
    }

    /// Edges of a face, as `[ab, ac, bc]` for the sorted face `[a, b, c]`.
    pub fn face_edges(&self, face: usize) -> &[usize; 3] {
        &self.face_edges[face]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&sorted([a, b])).copied()
    }

    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }

    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    pub fn boundary_faces(&self) -> &[usize] {
        &self.boundary_faces
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.vertex_on_boundary[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_on_boundary[e]
    }

    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.face_on_boundary[f]
    }

    pub fn cell_vertices(&self, cell: usize) -> [Vec3<T>; 4] {
        self.cells[cell].map(|v| self.vertices[v])
    }

    pub fn cell_volume(&self, cell: usize) -> T {
        self.volumes[cell]
    }

    /// Longest edge over all cells.
    pub fn mesh_size(&self) -> T {
        self.h
    }

    /// Incidence lists from entities of dimension `from` to entities of
    /// dimension `to`. Equal dimensions map each entity to itself.
    pub fn connectivity(&self, from: Dim, to: Dim) -> Vec<Vec<usize>> {
        use Dim::*;
        match (from, to) {
            _ if from == to => (0..self.count(from)).map(|i| vec![i]).collect(),
            (Cell, Vertex) => self.cells.iter().map(|c| c.to_vec()).collect(),
            (Cell, Edge) => self.cell_edges.iter().map(|c| c.to_vec()).collect(),
            (Cell, Face) => self.cell_faces.iter().map(|c| c.to_vec()).collect(),
            (Face, Vertex) => self.faces.iter().map(|f| f.to_vec()).collect(),
            (Face, Edge) => self.face_edges.iter().map(|f| f.to_vec()).collect(),
            (Edge, Vertex) => self.edges.iter().map(|e| e.to_vec()).collect(),
            (Face, Cell) => self.face_cells.clone(),
            _ => {
                // upward incidence is the transpose of the downward one
                let down = self.connectivity(to, from);
                let mut up = vec![Vec::new(); self.count(from)];
                for (hi, lows) in down.iter().enumerate() {
                    for &lo in lows {
                        up[lo].push(hi);
                    }
                }
                up
            }
        }
    }

    pub fn count(&self, dim: Dim) -> usize {
        match dim {
            Dim::Vertex => self.num_vertices(),
            Dim::Edge => self.num_edges(),
            Dim::Face => self.num_faces(),
            Dim::Cell => self.num_cells(),
        }
    }

    /// Plain-text dump for debugging: `v x y z` and `c i0 i1 i2 i3` lines.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        for v in &self.vertices {
            writeln!(out, "v {} {} {}", v[0], v[1], v[2])?;
        }
        for c in &self.cells {
            writeln!(out, "c {} {} {} {}", c[0], c[1], c[2], c[3])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Mesh<f64> {
        Mesh::build_box(n, n, n, [1.0; 3]).unwrap()
    }

    fn euler(m: &Mesh<f64>) -> i64 {
        m.num_vertices() as i64 - m.num_edges() as i64 + m.num_faces() as i64 - m.num_cells() as i64
    }

    #[test]
    fn single_cube_counts() {
        let m = unit(1);
        assert_eq!(
            (m.num_vertices(), m.num_edges(), m.num_faces(), m.num_cells()),
            (8, 19, 18, 6)
        );
        assert_eq!(euler(&m), 1);
    }

    #[test]
    fn two_cube_counts_match_formula() {
        let m = unit(2);
        let n = 2usize;
        let edges = 3 * n * (n + 1).pow(2) + 3 * n * n * (n + 1) + n.pow(3);
        assert_eq!(edges, 98);
        assert_eq!(
            (m.num_vertices(), m.num_edges(), m.num_faces(), m.num_cells()),
            (27, 98, 120, 48)
        );
    }

    #[test]
    fn unit_cube_volumes() {
        let m = unit(1);
        let total: f64 = (0..6).map(|c| m.cell_volume(c)).sum();
        assert!((total - 1.0).abs() < 1e-15);
        for c in 0..6 {
            assert!((m.cell_volume(c) - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn face_incidence_on_single_cube() {
        let m = unit(1);
        let fc = m.connectivity(Dim::Face, Dim::Cell);
        assert_eq!(fc.iter().filter(|c| c.len() == 1).count(), 12);
        assert_eq!(fc.iter().filter(|c| c.len() == 2).count(), 6);
        assert_eq!(m.boundary_faces().len(), 12);
        assert_eq!(m.boundary_vertices().len(), 8);
    }

    #[test]
    fn stored_tuples_are_sorted() {
        let m = unit(2);
        assert!(m.edges().iter().all(|e| e[0] < e[1]));
        assert!(m.faces().iter().all(|f| f[0] < f[1] && f[1] < f[2]));
        let cv = m.connectivity(Dim::Cell, Dim::Vertex);
        assert!(cv.iter().all(|c| c.len() == 4));
    }

    #[test]
    fn mesh_size_is_body_diagonal() {
        assert!((unit(1).mesh_size() - 3f64.sqrt()).abs() < 1e-15);
        assert!((unit(2).mesh_size() - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            Mesh::<f64>::build_box(0, 1, 1, [1.0; 3]).unwrap_err(),
            MeshError::InvalidDivisions(0, 1, 1)
        );
        assert_eq!(
            Mesh::<f64>::build_box(1, 1, 1, [1.0, -1.0, 1.0]).unwrap_err(),
            MeshError::InvalidExtents
        );
        assert_eq!(Mesh::<f64>::from_cells(vec![], vec![]).unwrap_err(), MeshError::Empty);
        let flat = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert_eq!(
            Mesh::from_cells(flat, vec![[0, 1, 2, 3]]).unwrap_err(),
            MeshError::DegenerateCell(0)
        );
    }

    #[test]
    fn negative_cells_are_reoriented() {
        let v: Vec<[f64; 3]> = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let m = Mesh::from_cells(v, vec![[0, 2, 1, 3]]).unwrap();
        assert!((m.cell_volume(0) - 1.0 / 6.0).abs() < 1e-15);
        assert!(signed_volume(m.cell_vertices(0)) > 0.0);
    }

    #[test]
    fn local_faces_have_outward_normals() {
        let m = unit(1);
        for c in 0..m.num_cells() {
            let p = m.cell_vertices(c);
            let centroid = vec3::scale(0.25, p.iter().fold([0.0; 3], |a, b| vec3::add(a, *b)));
            for (i, f) in LOCAL_FACES.iter().enumerate() {
                let n = vec3::cross(vec3::sub(p[f[1]], p[f[0]]), vec3::sub(p[f[2]], p[f[0]]));
                assert!(vec3::dot(n, vec3::sub(p[f[0]], centroid)) > 0.0, "cell {c} face {i}");
            }
        }
    }

    #[test]
    fn dump_lists_every_entity() {
        let m = unit(1);
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert_eq!(text.lines().filter(|l| l.starts_with("c ")).count(), 6);
    }
}
