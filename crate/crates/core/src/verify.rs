//! Independent checks of the discretization.
//!
//! The reference assembly here evaluates every basis function directly in
//! physical coordinates from barycentric coordinates and the global entity
//! orientation: Lagrange functions, Whitney edge forms `λ_a∇λ_b − λ_b∇λ_a`
//! and Whitney face forms, each normalized by its own degree of freedom. It
//! shares no code with the reference-element tabulation, the Piola maps or
//! the local sign tables used by the production assembly, and integrates with
//! a rule of degree 8 on every cell.

use std::collections::HashMap;
use std::sync::Arc;

use crate::assembly::{self, forms, AssemblyError, CouplingPattern};
use crate::fem::quadrature::{QuadratureRule, TriangleRule, MAX_TET_DEGREE, MAX_TRIANGLE_DEGREE};
use crate::linalg::CsrMatrix;
use crate::mesh::{Mesh, MeshError};
use crate::spaces::{interpolate, FeSpace, Field, MhdSpaces, SpaceKind};
use crate::vec3::{self, Mat3, Vec3};

/// Relative tolerance of the oracle comparisons and algebraic identities.
pub const ORACLE_TOL: f64 = 1e-12;
/// Pointwise tolerance of the de Rham inclusion.
pub const DE_RHAM_TOL: f64 = 1e-12;
pub const QUADRATURE_TOL: f64 = 1e-14;

const ORACLE_DEGREE: usize = 8;

/// One named measurement against its tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {:.3e} (tol {:.1e})", self.name, self.value, self.tolerance)
    }
}

/// A basis function and its derivatives at one point.
#[derive(Clone, Copy, Debug, Default)]
struct Eval {
    value: Vec3<f64>,
    /// `[c][d] = ∂_d value_c`; only filled for Lagrange spaces.
    grad: Mat3<f64>,
    curl: Vec3<f64>,
    div: f64,
}

struct Cell {
    vertices: [usize; 4],
    origin: Vec3<f64>,
    jac: Mat3<f64>,
    /// Barycentric gradients.
    grads: [Vec3<f64>; 4],
    det: f64,
}

impl Cell {
    fn new(mesh: &Mesh<f64>, c: usize) -> Self {
        let ids = mesh.cells()[c];
        let x = mesh.cell_vertices(c);
        let mut jac = [[0.0; 3]; 3];
        for r in 0..3 {
            for k in 0..3 {
                jac[r][k] = x[k + 1][r] - x[0][r];
            }
        }
        // rows of J⁻¹ are ∇λ_1..∇λ_3
        let (a, b, cc) = (vec3::sub(x[1], x[0]), vec3::sub(x[2], x[0]), vec3::sub(x[3], x[0]));
        let det = vec3::dot(a, vec3::cross(b, cc));
        let g1 = vec3::scale(1.0 / det, vec3::cross(b, cc));
        let g2 = vec3::scale(1.0 / det, vec3::cross(cc, a));
        let g3 = vec3::scale(1.0 / det, vec3::cross(a, b));
        let g0 = vec3::scale(-1.0, vec3::add(g1, vec3::add(g2, g3)));
        Self {
            vertices: ids,
            origin: x[0],
            jac,
            grads: [g0, g1, g2, g3],
            det,
        }
    }

    fn lambda(&self, x: Vec3<f64>) -> [f64; 4] {
        let d = vec3::sub(x, self.origin);
        let l1 = vec3::dot(self.grads[1], d);
        let l2 = vec3::dot(self.grads[2], d);
        let l3 = vec3::dot(self.grads[3], d);
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }

    fn local(&self, global: usize) -> usize {
        self.vertices.iter().position(|v| *v == global).expect("vertex of cell")
    }

    fn point(&self, xi: Vec3<f64>) -> Vec3<f64> {
        vec3::add(self.origin, vec3::mat_vec(&self.jac, xi))
    }
}

/// Global basis functions supported on one cell, evaluated from scratch.
struct Oracle<'a> {
    mesh: &'a Mesh<f64>,
    faces: HashMap<[usize; 3], usize>,
}

impl<'a> Oracle<'a> {
    fn new(mesh: &'a Mesh<f64>) -> Self {
        let faces = mesh.faces().iter().enumerate().map(|(i, f)| (*f, i)).collect();
        Self { mesh, faces }
    }

    fn sorted_pairs(cell: &Cell) -> Vec<[usize; 2]> {
        let v = cell.vertices;
        let mut out = Vec::with_capacity(6);
        for i in 0..4 {
            for j in i + 1..4 {
                out.push(if v[i] < v[j] { [v[i], v[j]] } else { [v[j], v[i]] });
            }
        }
        out
    }

    fn edge_id(&self, e: [usize; 2]) -> usize {
        self.mesh.edge_index(e[0], e[1]).expect("edge of mesh")
    }

    fn eval(&self, kind: SpaceKind, cell: &Cell, x: Vec3<f64>) -> Vec<(usize, Eval)> {
        let lam = cell.lambda(x);
        let g = &cell.grads;
        let mut out = Vec::new();
        match kind {
            SpaceKind::P1 => {
                for (i, &v) in cell.vertices.iter().enumerate() {
                    let mut e = Eval::default();
                    e.value[0] = lam[i];
                    e.grad[0] = g[i];
                    out.push((v, e));
                }
            }
            SpaceKind::VectorP2 => {
                let nv = self.mesh.num_vertices();
                let mut nodes: Vec<(usize, f64, Vec3<f64>)> = Vec::with_capacity(10);
                for (i, &v) in cell.vertices.iter().enumerate() {
                    nodes.push((v, lam[i] * (2.0 * lam[i] - 1.0), vec3::scale(4.0 * lam[i] - 1.0, g[i])));
                }
                for e in Self::sorted_pairs(cell) {
                    let (i, j) = (cell.local(e[0]), cell.local(e[1]));
                    let grad = vec3::add(vec3::scale(4.0 * lam[j], g[i]), vec3::scale(4.0 * lam[i], g[j]));
                    nodes.push((nv + self.edge_id(e), 4.0 * lam[i] * lam[j], grad));
                }
                for (node, phi, dphi) in nodes {
                    for c in 0..3 {
                        let mut e = Eval::default();
                        e.value[c] = phi;
                        e.grad[c] = dphi;
                        e.div = dphi[c];
                        out.push((3 * node + c, e));
                    }
                }
            }
            SpaceKind::Nedelec => {
                for e in Self::sorted_pairs(cell) {
                    let (i, j) = (cell.local(e[0]), cell.local(e[1]));
                    let whitney = |lam: [f64; 4]| vec3::sub(vec3::scale(lam[i], g[j]), vec3::scale(lam[j], g[i]));
                    // tangential moment along the edge, constant for Whitney forms
                    let verts = self.mesh.vertices();
                    let mid = vec3::scale(0.5, vec3::add(verts[e[0]], verts[e[1]]));
                    let t = vec3::sub(verts[e[1]], verts[e[0]]);
                    let moment = vec3::dot(whitney(cell.lambda(mid)), t);
                    let ev = Eval {
                        value: vec3::scale(1.0 / moment, whitney(lam)),
                        curl: vec3::scale(2.0 / moment, vec3::cross(g[i], g[j])),
                        ..Default::default()
                    };
                    out.push((self.edge_id(e), ev));
                }
            }
            SpaceKind::RaviartThomas => {
                let v = cell.vertices;
                for skip in 0..4 {
                    let mut f: Vec<usize> = (0..4).filter(|k| *k != skip).map(|k| v[k]).collect();
                    f.sort_unstable();
                    let (a, b, c) = (cell.local(f[0]), cell.local(f[1]), cell.local(f[2]));
                    let whitney = |lam: [f64; 4]| {
                        let t1 = vec3::scale(lam[a], vec3::cross(g[b], g[c]));
                        let t2 = vec3::scale(lam[b], vec3::cross(g[c], g[a]));
                        let t3 = vec3::scale(lam[c], vec3::cross(g[a], g[b]));
                        vec3::scale(2.0, vec3::add(t1, vec3::add(t2, t3)))
                    };
                    // flux through the face, whose normal component is constant
                    let verts = self.mesh.vertices();
                    let (xa, xb, xc) = (verts[f[0]], verts[f[1]], verts[f[2]]);
                    let centroid = vec3::scale(1.0 / 3.0, vec3::add(xa, vec3::add(xb, xc)));
                    let n = vec3::cross(vec3::sub(xb, xa), vec3::sub(xc, xa));
                    let flux = 0.5 * vec3::dot(whitney(cell.lambda(centroid)), n);
                    let triple = vec3::dot(g[a], vec3::cross(g[b], g[c]));
                    let ev = Eval {
                        value: vec3::scale(1.0 / flux, whitney(lam)),
                        div: 6.0 * triple / flux,
                        ..Default::default()
                    };
                    out.push((self.faces[&[f[0], f[1], f[2]]], ev));
                }
            }
        }
        out
    }
}

/// Dense matrix `A[i][j] = Σ_cells ∫ kernel(test_i, trial_j, x)`.
fn dense_form(
    mesh: &Mesh<f64>,
    test: (SpaceKind, usize),
    trial: (SpaceKind, usize),
    mut kernel: impl FnMut(&Eval, &Eval, Vec3<f64>, &Cell, &Oracle) -> f64,
) -> Vec<Vec<f64>> {
    let oracle = Oracle::new(mesh);
    let rule = QuadratureRule::<f64>::tetrahedron(ORACLE_DEGREE).expect("oracle rule");
    let mut a = vec![vec![0.0; trial.1]; test.1];
    for c in 0..mesh.num_cells() {
        let cell = Cell::new(mesh, c);
        for (xi, w) in rule.iter() {
            let x = cell.point(xi);
            let wq = w * cell.det.abs();
            let ti = oracle.eval(test.0, &cell, x);
            let tj = oracle.eval(trial.0, &cell, x);
            for (i, ei) in &ti {
                for (j, ej) in &tj {
                    a[*i][*j] += wq * kernel(ei, ej, x, &cell, &oracle);
                }
            }
        }
    }
    a
}

/// Value of a finite element field at `x` inside `cell`, from the oracle basis.
fn field_at(f: &Field<f64>, cell: &Cell, oracle: &Oracle, x: Vec3<f64>) -> Eval {
    let mut out = Eval::default();
    for (d, e) in oracle.eval(f.kind(), cell, x) {
        let c = f.coeffs()[d];
        out.value = vec3::add(out.value, vec3::scale(c, e.value));
        for r in 0..3 {
            out.grad[r] = vec3::add(out.grad[r], vec3::scale(c, e.grad[r]));
        }
        out.curl = vec3::add(out.curl, vec3::scale(c, e.curl));
        out.div += c * e.div;
    }
    out
}

fn dense_max_abs(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// `max |A - O| / max |O|`, with a shape mismatch reported as infinite.
fn relative_difference(a: &CsrMatrix<f64>, oracle: &[Vec<f64>]) -> f64 {
    if a.nrows() != oracle.len() || oracle.first().is_some_and(|r| r.len() != a.ncols()) {
        return f64::INFINITY;
    }
    let d = a.to_dense();
    let diff = d
        .iter()
        .zip(oracle)
        .flat_map(|(r, o)| r.iter().zip(o).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    diff / dense_max_abs(oracle).max(f64::MIN_POSITIVE)
}

fn sparse_relative(a: &CsrMatrix<f64>, b: &CsrMatrix<f64>, sign: f64) -> Result<f64, AssemblyError> {
    let d = CsrMatrix::linear_combination(&[(1.0, a), (sign, b)])?;
    Ok(d.max_abs() / a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE))
}

fn sample_advector(x: Vec3<f64>) -> Vec3<f64> {
    [x[1].sin() + x[0] * x[2], x[0].cos() * x[1], x[0] * x[1] * x[2] - 0.3]
}

fn sample_magnetic(x: Vec3<f64>) -> Vec3<f64> {
    [1.0 + x[1] * x[2], x[0] * x[0] - 0.5, x[2].sin() + 0.2]
}

/// Every assembled matrix against the dense reference, plus the skewness and
/// adjointness identities, on one mesh.
pub fn oracle_checks(mesh: &Arc<Mesh<f64>>, label: &str) -> Result<Vec<Check>, AssemblyError> {
    let sp = MhdSpaces::new(mesh);
    let (u, p, b, e) = (&sp.velocity, &sp.pressure, &sp.magnetic, &sp.electric);
    let dim = |s: &Arc<FeSpace<f64>>| (s.kind(), s.dof_count());
    let adv = interpolate(u, sample_advector);
    let bf = interpolate(b, sample_magnetic);
    let m: &Mesh<f64> = mesh;
    let mut out = Vec::new();
    let mut push = |name: &str, value: f64| out.push(Check::new(format!("{name} [{label}]"), value, ORACLE_TOL));

    for s in [u, p, b, e] {
        let oracle = dense_form(m, dim(s), dim(s), |i, j, _, _, _| vec3::dot(i.value, j.value));
        push(&format!("mass {:?}", s.kind()), relative_difference(&forms::mass(s, 1.0)?, &oracle));
    }
    let stiff = dense_form(m, dim(u), dim(u), |i, j, _, _, _| {
        (0..3).map(|c| vec3::dot(i.grad[c], j.grad[c])).sum()
    });
    push("stiffness", relative_difference(&forms::stiffness(u, 1.0)?, &stiff));
    let div = dense_form(m, dim(p), dim(u), |q, v, _, _, _| -v.div * q.value[0]);
    push("divergence", relative_difference(&forms::divergence(u, p)?, &div));

    let conv = dense_form(m, dim(u), dim(u), |i, j, x, cell, o| {
        let w = field_at(&adv, cell, o, x).value;
        // ((w·∇)φ_j)·φ_i with [c][d] = ∂_d φ_c
        let dir = |g: &Mat3<f64>| [vec3::dot(g[0], w), vec3::dot(g[1], w), vec3::dot(g[2], w)];
        0.5 * (vec3::dot(dir(&j.grad), i.value) - vec3::dot(dir(&i.grad), j.value))
    });
    let n = forms::convection(&adv)?;
    push("convection", relative_difference(&n, &conv));
    push("convection skewness", sparse_relative(&n, &n.transpose(), 1.0)?);

    let drag = dense_form(m, dim(u), dim(u), |i, j, x, cell, o| {
        let bq = field_at(&bf, cell, o, x).value;
        vec3::dot(vec3::cross(j.value, bq), vec3::cross(i.value, bq))
    });
    push("magnetic drag", relative_difference(&forms::coupling(&sp, CouplingPattern::MagneticDrag, Some(&bf))?, &drag));
    let lorentz = dense_form(m, dim(u), dim(e), |i, j, x, cell, o| {
        let bq = field_at(&bf, cell, o, x).value;
        vec3::dot(vec3::cross(j.value, bq), i.value)
    });
    let l = forms::coupling(&sp, CouplingPattern::ElectricLorentz, Some(&bf))?;
    push("Lorentz coupling", relative_difference(&l, &lorentz));
    let ohm = dense_form(m, dim(e), dim(u), |i, j, x, cell, o| {
        let bq = field_at(&bf, cell, o, x).value;
        vec3::dot(vec3::cross(j.value, bq), i.value)
    });
    let oh = forms::coupling(&sp, CouplingPattern::OhmAdvection, Some(&bf))?;
    push("Ohm coupling", relative_difference(&oh, &ohm));
    push("Lorentz/Ohm adjointness", sparse_relative(&l, &oh.transpose(), 1.0)?);

    let curl = dense_form(m, dim(b), dim(e), |i, j, _, _, _| vec3::dot(j.curl, i.value));
    let c = forms::coupling(&sp, CouplingPattern::CurlOfTrial, None)?;
    push("curl of trial", relative_difference(&c, &curl));
    let ct = forms::coupling(&sp, CouplingPattern::CurlOfTest, None)?;
    let curl_t = dense_form(m, dim(e), dim(b), |i, j, _, _, _| vec3::dot(j.value, i.curl));
    push("curl of test", relative_difference(&ct, &curl_t));
    push("curl adjointness", sparse_relative(&ct, &c.transpose(), -1.0)?);
    Ok(out)
}

/// Pointwise `∇×φ_e = Σ_f D_fe ψ_f` for every edge basis function `φ_e`,
/// where the face coefficients are computed as fluxes of the curl by
/// quadrature and compared to the incidence matrix as well.
pub fn de_rham_checks(mesh: &Arc<Mesh<f64>>, label: &str) -> Result<Vec<Check>, AssemblyError> {
    let sp = MhdSpaces::new(mesh);
    let (b, e) = (&sp.magnetic, &sp.electric);
    let d = assembly::discrete_curl(mesh);
    let oracle = Oracle::new(mesh);
    let tri = TriangleRule::<f64>::new(2).expect("face rule");
    let mut cl = forms::CellLoop::new(&[e.as_ref(), b.as_ref()], 2)?;
    let (mut flux_err, mut point_err, mut scale) = (0.0f64, 0.0f64, 0.0f64);
    let verts = mesh.vertices();
    for edge in 0..e.dof_count() {
        let mut coeffs = vec![0.0; b.dof_count()];
        for (f, face) in mesh.faces().iter().enumerate() {
            let cell = Cell::new(mesh, mesh.face_cells(f)[0]);
            let (xa, xb, xc) = (verts[face[0]], verts[face[1]], verts[face[2]]);
            let (e1, e2) = (vec3::sub(xb, xa), vec3::sub(xc, xa));
            let n = vec3::cross(e1, e2);
            let basis = oracle.eval(SpaceKind::Nedelec, &cell, xa);
            let Some((_, ev)) = basis.iter().find(|(g, _)| *g == edge) else {
                // the edge basis function vanishes on this cell, hence on the face
                continue;
            };
            coeffs[f] = tri
                .iter()
                .map(|(_, w)| w * vec3::dot(ev.curl, n))
                .sum();
        }
        for (f, c) in coeffs.iter().enumerate() {
            flux_err = flux_err.max((c - d.get(f, edge)).abs());
        }
        let mut unit = vec![0.0; e.dof_count()];
        unit[edge] = 1.0;
        let ef = Field::from_coeffs(e, unit).expect("sized");
        let bf = Field::from_coeffs(b, coeffs).expect("sized");
        let (mut el, mut bl) = (Vec::new(), Vec::new());
        for c in 0..cl.num_cells() {
            cl.visit(c)?;
            ef.cell_coeffs(c, &mut el);
            bf.cell_coeffs(c, &mut bl);
            for q in 0..cl.npoints() {
                let curl = forms::edge_curl(&cl.bases[0], &el, q);
                let rt = forms::vector_value(&cl.bases[1], &bl, q);
                point_err = point_err.max(vec3::norm(vec3::sub(curl, rt)));
                scale = scale.max(vec3::norm(curl));
            }
        }
    }
    Ok(vec![
        Check::new(format!("de Rham face fluxes [{label}]"), flux_err, DE_RHAM_TOL),
        Check::new(
            format!("de Rham pointwise curl in RT0 [{label}]"),
            point_err / scale.max(f64::MIN_POSITIVE),
            DE_RHAM_TOL,
        ),
    ])
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Largest monomial error of every tetrahedron and triangle rule up to its
/// advertised degree.
pub fn quadrature_checks() -> Vec<Check> {
    let mut tet_err = 0.0f64;
    for d in 1..=MAX_TET_DEGREE {
        let q = QuadratureRule::<f64>::tetrahedron(d).expect("supported degree");
        let d = d as u32;
        for a in 0..=d {
            for b in 0..=d - a {
                for c in 0..=d - a - b {
                    let v: f64 = q
                        .iter()
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                        .sum();
                    let exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
                    tet_err = tet_err.max((v - exact).abs());
                }
            }
        }
    }
    let mut tri_err = 0.0f64;
    for d in 1..=MAX_TRIANGLE_DEGREE {
        let q = TriangleRule::<f64>::new(d).expect("supported degree");
        let d = d as u32;
        for a in 0..=d {
            for b in 0..=d - a {
                let v: f64 = q.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                tri_err = tri_err.max((v - factorial(a) * factorial(b) / factorial(a + b + 2)).abs());
            }
        }
    }
    vec![
        Check::new("tetrahedron quadrature exactness", tet_err, QUADRATURE_TOL),
        Check::new("triangle quadrature exactness", tri_err, QUADRATURE_TOL),
    ]
}

/// Division-2 unit cube with every vertex moved by a fixed smooth
/// perturbation, so cells are not congruent.
pub fn jittered_cube() -> Result<Mesh<f64>, MeshError> {
    let base = Mesh::build_box(2, 2, 2, [1.0; 3])?;
    let vertices = base
        .vertices()
        .iter()
        .map(|x: &Vec3<f64>| {
            [
                x[0] + 0.06 * (3.0 * x[1] + x[2]).sin(),
                x[1] + 0.05 * (2.0 * x[2] - x[0]).cos() * x[0],
                x[2] - 0.04 * (x[0] + 2.0 * x[1]).sin(),
            ]
        })
        .collect();
    Mesh::from_cells(vertices, base.cells().to_vec())
}

/// Oracle, de Rham and quadrature checks on the division-2 cube and its
/// jittered copy (48 cells each).
pub fn selftest() -> Result<Vec<Check>, AssemblyError> {
    let cube = Arc::new(Mesh::build_box(2, 2, 2, [1.0; 3]).expect("unit cube"));
    let jitter = Arc::new(jittered_cube().expect("jittered cube"));
    let mut out = quadrature_checks();
    for (mesh, label) in [(&cube, "cube"), (&jitter, "jittered")] {
        out.extend(oracle_checks(mesh, label)?);
        out.extend(de_rham_checks(mesh, label)?);
    }
    Ok(out)
}
