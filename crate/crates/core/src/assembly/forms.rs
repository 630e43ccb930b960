//! Cell-wise assembly of the bilinear, trilinear and linear forms.

use std::sync::Arc;

use crate::assembly::AssemblyError;
use crate::fem::{CellBasis, CellMap, QuadratureRule, Tabulation};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::Mesh;
use crate::scalar::Real;
use crate::spaces::{FeSpace, Field, MhdSpaces, SpaceKind};
use crate::vec3::{self, Mat3, Vec3};

/// Quadrature degrees, chosen so every polynomial integrand is integrated
/// exactly (P2 velocity is degree 2, N0 and RT0 fields are degree 1).
pub mod degree {
    pub const P1_MASS: usize = 2;
    pub const P2_MASS: usize = 4;
    pub const EDGE_FACE_MASS: usize = 2;
    pub const STIFFNESS: usize = 2;
    pub const DIVERGENCE: usize = 2;
    pub const CONVECTION: usize = 5;
    pub const DRAG: usize = 6;
    pub const LORENTZ: usize = 4;
    pub const CURL: usize = 1;
    /// Analytic right-hand sides and error integrals.
    pub const SOURCE: usize = 6;
}

fn signs<T: Real>(space: &FeSpace<T>, cell: usize) -> Option<&[i8]> {
    match space.kind() {
        SpaceKind::Nedelec | SpaceKind::RaviartThomas => Some(space.cell_signs(cell)),
        _ => None,
    }
}

fn require(space: &FeSpace<impl Real>, kind: SpaceKind) -> Result<(), AssemblyError> {
    if space.kind() != kind {
        return Err(AssemblyError::KindMismatch {
            expected: kind,
            got: space.kind(),
        });
    }
    Ok(())
}

fn same_mesh<T: Real>(a: &FeSpace<T>, b: &FeSpace<T>) -> Result<(), AssemblyError> {
    if Arc::ptr_eq(a.mesh(), b.mesh()) {
        Ok(())
    } else {
        Err(AssemblyError::MeshMismatch)
    }
}

/// Physical basis data of several spaces on one cell at a common rule.
pub struct CellLoop<'a, T> {
    mesh: &'a Mesh<T>,
    spaces: Vec<&'a FeSpace<T>>,
    tabs: Vec<Tabulation<T>>,
    pub bases: Vec<CellBasis<T>>,
}

impl<'a, T: Real> CellLoop<'a, T> {
    pub fn new(spaces: &[&'a FeSpace<T>], degree: usize) -> Result<Self, AssemblyError> {
        let rule = QuadratureRule::tetrahedron(degree)?;
        for s in &spaces[1..] {
            same_mesh(spaces[0], s)?;
        }
        let tabs: Vec<_> = spaces
            .iter()
            .map(|s| Tabulation::new(s.kind().element(), rule.clone()))
            .collect();
        let bases = tabs.iter().map(|t| t.cell_buffer()).collect();
        Ok(Self {
            mesh: spaces[0].mesh(),
            spaces: spaces.to_vec(),
            tabs,
            bases,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_cells()
    }

    pub fn npoints(&self) -> usize {
        self.bases[0].npoints()
    }

    /// Fills every basis buffer for `cell`.
    pub fn visit(&mut self, cell: usize) -> Result<(), AssemblyError> {
        let map = CellMap::new(self.mesh.cell_vertices(cell))?;
        for ((tab, space), buf) in self.tabs.iter().zip(&self.spaces).zip(&mut self.bases) {
            tab.fill(&map, signs(space, cell), buf);
        }
        Ok(())
    }
}

/// Value of a vector P2 field at point `q` from its local coefficients.
#[inline]
pub fn p2_value<T: Real>(cb: &CellBasis<T>, local: &[T], q: usize) -> Vec3<T> {
    let mut v = vec3::zero();
    for a in 0..10 {
        let phi = cb.scalar(q, a);
        for c in 0..3 {
            v[c] += phi * local[3 * a + c];
        }
    }
    v
}

/// Gradient `G[c][d] = ∂_d u_c` of a vector P2 field.
#[inline]
pub fn p2_gradient<T: Real>(cb: &CellBasis<T>, local: &[T], q: usize) -> Mat3<T> {
    let mut g = [[T::zero(); 3]; 3];
    for a in 0..10 {
        let dphi = cb.grad(q, a);
        for c in 0..3 {
            for d in 0..3 {
                g[c][d] += local[3 * a + c] * dphi[d];
            }
        }
    }
    g
}

/// Value of an N0 or RT0 field.
#[inline]
pub fn vector_value<T: Real>(cb: &CellBasis<T>, local: &[T], q: usize) -> Vec3<T> {
    let mut v = vec3::zero();
    for (i, c) in local.iter().enumerate() {
        v = vec3::add(v, vec3::scale(*c, cb.vector(q, i)));
    }
    v
}

/// Curl of an N0 field.
#[inline]
pub fn edge_curl<T: Real>(cb: &CellBasis<T>, local: &[T], q: usize) -> Vec3<T> {
    let mut v = vec3::zero();
    for (i, c) in local.iter().enumerate() {
        v = vec3::add(v, vec3::scale(*c, cb.curl(q, i)));
    }
    v
}

/// Divergence of an RT0 field.
#[inline]
pub fn face_div<T: Real>(cb: &CellBasis<T>, local: &[T], q: usize) -> T {
    local.iter().enumerate().map(|(i, c)| *c * cb.div(q, i)).sum()
}

/// Value of a P1 field.
#[inline]
pub fn p1_value<T: Real>(cb: &CellBasis<T>, local: &[T], q: usize) -> T {
    local.iter().enumerate().map(|(i, c)| *c * cb.scalar(q, i)).sum()
}

/// Sparsity pattern of a test/trial pair together with the value slot of
/// every local matrix entry, so that forms re-assembled at each iteration
/// write straight into CSR storage.
#[derive(Clone, Debug)]
pub struct AssemblyPattern<T> {
    test: Arc<FeSpace<T>>,
    trial: Arc<FeSpace<T>>,
    pattern: CsrMatrix<T>,
    slots: Vec<usize>,
}

impl<T: Real> AssemblyPattern<T> {
    pub fn new(test: &Arc<FeSpace<T>>, trial: &Arc<FeSpace<T>>) -> Result<Self, AssemblyError> {
        same_mesh(test, trial)?;
        let cells = test.mesh().num_cells();
        let (nt, nr) = (test.local_dofs(), trial.local_dofs());
        let mut tb = TripletBuilder::with_capacity(test.dof_count(), trial.dof_count(), cells * nt * nr);
        let ones = vec![T::one(); nt * nr];
        for c in 0..cells {
            tb.add_local(test.cell_dofs(c), trial.cell_dofs(c), &ones);
        }
        let mut pattern = tb.build();
        pattern.values_mut().iter_mut().for_each(|v| *v = T::zero());
        let mut slots = Vec::with_capacity(cells * nt * nr);
        for c in 0..cells {
            for &r in test.cell_dofs(c) {
                for &col in trial.cell_dofs(c) {
                    slots.push(pattern.position(r, col).expect("entry in pattern"));
                }
            }
        }
        Ok(Self {
            test: test.clone(),
            trial: trial.clone(),
            pattern,
            slots,
        })
    }

    pub fn matches(&self, test: &FeSpace<T>, trial: &FeSpace<T>) -> bool {
        std::ptr::eq(&*self.test, test) && std::ptr::eq(&*self.trial, trial)
    }
}

enum Sink<'p, T> {
    Triplets(TripletBuilder<T>),
    Slots(&'p AssemblyPattern<T>, Vec<T>),
}

fn bilinear<T: Real>(
    test: &FeSpace<T>,
    trial: &FeSpace<T>,
    degree: usize,
    extra: Option<&Field<T>>,
    kernel: impl FnMut(&CellBasis<T>, &CellBasis<T>, Option<(&CellBasis<T>, &[T])>, &mut [T]),
) -> Result<CsrMatrix<T>, AssemblyError> {
    bilinear_with(None, test, trial, degree, extra, kernel)
}

fn bilinear_with<T: Real>(
    target: Option<&AssemblyPattern<T>>,
    test: &FeSpace<T>,
    trial: &FeSpace<T>,
    degree: usize,
    extra: Option<&Field<T>>,
    mut kernel: impl FnMut(&CellBasis<T>, &CellBasis<T>, Option<(&CellBasis<T>, &[T])>, &mut [T]),
) -> Result<CsrMatrix<T>, AssemblyError> {
    let mut spaces = vec![test, trial];
    if let Some(f) = extra {
        spaces.push(f.space().as_ref());
    }
    let mut cl = CellLoop::new(&spaces, degree)?;
    let (nt, nr) = (test.local_dofs(), trial.local_dofs());
    let mut local = vec![T::zero(); nt * nr];
    let mut coeffs = Vec::new();
    let mut sink = match target {
        Some(p) if p.matches(test, trial) => Sink::Slots(p, vec![T::zero(); p.pattern.nnz()]),
        Some(_) => return Err(AssemblyError::MeshMismatch),
        None => Sink::Triplets(TripletBuilder::with_capacity(
            test.dof_count(),
            trial.dof_count(),
            cl.num_cells() * nt * nr,
        )),
    };
    for c in 0..cl.num_cells() {
        cl.visit(c)?;
        local.iter_mut().for_each(|v| *v = T::zero());
        let given = match extra {
            Some(f) => {
                f.cell_coeffs(c, &mut coeffs);
                Some((&cl.bases[2], coeffs.as_slice()))
            }
            None => None,
        };
        kernel(&cl.bases[0], &cl.bases[1], given, &mut local);
        match &mut sink {
            Sink::Triplets(tb) => tb.add_local(test.cell_dofs(c), trial.cell_dofs(c), &local),
            Sink::Slots(p, values) => {
                let slots = &p.slots[c * nt * nr..(c + 1) * nt * nr];
                for (slot, v) in slots.iter().zip(&local) {
                    values[*slot] += *v;
                }
            }
        }
    }
    Ok(match sink {
        Sink::Triplets(tb) => tb.build(),
        Sink::Slots(p, values) => {
            let mut m = p.pattern.clone();
            m.values_mut().copy_from_slice(&values);
            m
        }
    })
}

/// `weight · ∫ φ_j · φ_i` on any of the four spaces.
pub fn mass<T: Real>(space: &FeSpace<T>, weight: T) -> Result<CsrMatrix<T>, AssemblyError> {
    let deg = match space.kind() {
        SpaceKind::VectorP2 => degree::P2_MASS,
        SpaceKind::P1 => degree::P1_MASS,
        _ => degree::EDGE_FACE_MASS,
    };
    let kind = space.kind();
    let n = space.local_dofs();
    bilinear(space, space, deg, None, |cb, _, _, local| {
        for q in 0..cb.npoints() {
            let w = weight * cb.weight(q);
            match kind {
                SpaceKind::VectorP2 => {
                    for a in 0..10 {
                        for b in 0..10 {
                            let v = w * cb.scalar(q, a) * cb.scalar(q, b);
                            for c in 0..3 {
                                local[(3 * a + c) * n + 3 * b + c] += v;
                            }
                        }
                    }
                }
                SpaceKind::P1 => {
                    for i in 0..n {
                        for j in 0..n {
                            local[i * n + j] += w * cb.scalar(q, i) * cb.scalar(q, j);
                        }
                    }
                }
                _ => {
                    for i in 0..n {
                        for j in 0..n {
                            local[i * n + j] += w * vec3::dot(cb.vector(q, i), cb.vector(q, j));
                        }
                    }
                }
            }
        }
    })
}

/// `weight · ∫ ∇u : ∇v` on the vector P2 space.
pub fn stiffness<T: Real>(space: &FeSpace<T>, weight: T) -> Result<CsrMatrix<T>, AssemblyError> {
    require(space, SpaceKind::VectorP2)?;
    bilinear(space, space, degree::STIFFNESS, None, |cb, _, _, local| {
        for q in 0..cb.npoints() {
            let w = weight * cb.weight(q);
            for a in 0..10 {
                for b in 0..10 {
                    let v = w * vec3::dot(cb.grad(q, a), cb.grad(q, b));
                    for c in 0..3 {
                        local[(3 * a + c) * 30 + 3 * b + c] += v;
                    }
                }
            }
        }
    })
}

/// Skew convection form: `N_ij = ½(φ·∇ψ_j, ψ_i) − ½(φ·∇ψ_i, ψ_j)` for the
/// advector `φ`.
pub fn convection<T: Real>(advector: &Field<T>) -> Result<CsrMatrix<T>, AssemblyError> {
    convection_with(None, advector)
}

/// [`convection`] written into a precomputed pattern.
pub fn convection_with<T: Real>(
    target: Option<&AssemblyPattern<T>>,
    advector: &Field<T>,
) -> Result<CsrMatrix<T>, AssemblyError> {
    let space = advector.space().as_ref();
    require(space, SpaceKind::VectorP2)?;
    let half = T::lit(0.5);
    let mut phi_dot = [T::zero(); 10];
    bilinear_with(target, space, space, degree::CONVECTION, Some(advector), |cb, _, given, local| {
        let (_, adv) = given.expect("advector");
        for q in 0..cb.npoints() {
            let w = half * cb.weight(q);
            let phi = p2_value(cb, adv, q);
            for (a, pd) in phi_dot.iter_mut().enumerate() {
                *pd = vec3::dot(phi, cb.grad(q, a));
            }
            for a in 0..10 {
                for b in 0..10 {
                    let v = w * (phi_dot[b] * cb.scalar(q, a) - phi_dot[a] * cb.scalar(q, b));
                    for c in 0..3 {
                        local[(3 * a + c) * 30 + 3 * b + c] += v;
                    }
                }
            }
        }
    })
}

/// `B_qv = −∫ (∇·ψ_v) χ_q`, rows on the pressure space.
pub fn divergence<T: Real>(velocity: &FeSpace<T>, pressure: &FeSpace<T>) -> Result<CsrMatrix<T>, AssemblyError> {
    require(velocity, SpaceKind::VectorP2)?;
    require(pressure, SpaceKind::P1)?;
    bilinear(pressure, velocity, degree::DIVERGENCE, None, |cp, cu, _, local| {
        for q in 0..cp.npoints() {
            let w = cp.weight(q);
            for i in 0..4 {
                let chi = cp.scalar(q, i);
                for b in 0..10 {
                    let g = cu.grad(q, b);
                    for c in 0..3 {
                        local[i * 30 + 3 * b + c] -= w * chi * g[c];
                    }
                }
            }
        }
    })
}

/// The coupling forms between velocity, magnetic and electric spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CouplingPattern {
    /// `(E × B_g, v)`: rows velocity, columns electric.
    ElectricLorentz,
    /// `(u × B_g, v × B_g)`: rows and columns velocity. Equals
    /// `−((u × B_g) × B_g, v)`.
    MagneticDrag,
    /// `(u × B_g, F)`: rows electric, columns velocity.
    OhmAdvection,
    /// `(E, F)`: electric mass.
    EdgeMass,
    /// `(∇×E, C)`: rows magnetic, columns electric.
    CurlOfTrial,
    /// `(B, ∇×F)`: rows electric, columns magnetic.
    CurlOfTest,
}

impl CouplingPattern {
    pub fn needs_field(self) -> bool {
        matches!(self, Self::ElectricLorentz | Self::MagneticDrag | Self::OhmAdvection)
    }
}

/// Assembles a coupling block. `given` is the magnetic field frozen inside
/// the Lorentz and Ohm terms; it is ignored by the linear patterns.
pub fn coupling<T: Real>(
    spaces: &MhdSpaces<T>,
    pattern: CouplingPattern,
    given: Option<&Field<T>>,
) -> Result<CsrMatrix<T>, AssemblyError> {
    coupling_with(None, spaces, pattern, given)
}

/// [`coupling`] written into a precomputed pattern of the same test/trial pair.
pub fn coupling_with<T: Real>(
    target: Option<&AssemblyPattern<T>>,
    spaces: &MhdSpaces<T>,
    pattern: CouplingPattern,
    given: Option<&Field<T>>,
) -> Result<CsrMatrix<T>, AssemblyError> {
    let given = if pattern.needs_field() {
        let g = given.ok_or(AssemblyError::MissingField(pattern))?;
        require(g.space(), SpaceKind::RaviartThomas)?;
        same_mesh(g.space(), &spaces.velocity)?;
        Some(g)
    } else {
        None
    };
    let (u, b, e) = (&*spaces.velocity, &*spaces.magnetic, &*spaces.electric);
    match pattern {
        CouplingPattern::ElectricLorentz => bilinear_with(target, u, e, degree::LORENTZ, given, |cu, ce, g, local| {
            let (cbg, bl) = g.expect("field");
            for q in 0..cu.npoints() {
                let w = cu.weight(q);
                let bq = vector_value(cbg, bl, q);
                for j in 0..6 {
                    let exb = vec3::cross(ce.vector(q, j), bq);
                    for a in 0..10 {
                        let phi = w * cu.scalar(q, a);
                        for c in 0..3 {
                            local[(3 * a + c) * 6 + j] += phi * exb[c];
                        }
                    }
                }
            }
        }),
        CouplingPattern::MagneticDrag => bilinear_with(target, u, u, degree::DRAG, given, |cu, _, g, local| {
            let (cbg, bl) = g.expect("field");
            for q in 0..cu.npoints() {
                let w = cu.weight(q);
                let bq = vector_value(cbg, bl, q);
                let b2 = vec3::dot(bq, bq);
                // (e_c × B)·(e_d × B) = δ_cd |B|² − B_c B_d
                let mut k = [[T::zero(); 3]; 3];
                for c in 0..3 {
                    for d in 0..3 {
                        k[c][d] = -bq[c] * bq[d];
                    }
                    k[c][c] += b2;
                }
                // upper block triangle only; the form is symmetric
                for a in 0..10 {
                    for bb in a..10 {
                        let v = w * cu.scalar(q, a) * cu.scalar(q, bb);
                        for c in 0..3 {
                            for d in 0..3 {
                                local[(3 * a + c) * 30 + 3 * bb + d] += v * k[c][d];
                            }
                        }
                    }
                }
            }
            for a in 0..10 {
                for bb in a + 1..10 {
                    for c in 0..3 {
                        for d in 0..3 {
                            local[(3 * bb + d) * 30 + 3 * a + c] = local[(3 * a + c) * 30 + 3 * bb + d];
                        }
                    }
                }
            }
        }),
        CouplingPattern::OhmAdvection => bilinear_with(target, e, u, degree::LORENTZ, given, |ce, cu, g, local| {
            let (cbg, bl) = g.expect("field");
            for q in 0..ce.npoints() {
                let w = ce.weight(q);
                let bq = vector_value(cbg, bl, q);
                for i in 0..6 {
                    // (e_c × B)·F = e_c · (B × F)
                    let bxf = vec3::cross(bq, ce.vector(q, i));
                    for a in 0..10 {
                        let phi = w * cu.scalar(q, a);
                        for c in 0..3 {
                            local[i * 30 + 3 * a + c] += phi * bxf[c];
                        }
                    }
                }
            }
        }),
        CouplingPattern::EdgeMass => mass(e, T::one()),
        CouplingPattern::CurlOfTrial => bilinear_with(target, b, e, degree::CURL, None, |cb, ce, _, local| {
            for q in 0..cb.npoints() {
                let w = cb.weight(q);
                for i in 0..4 {
                    for j in 0..6 {
                        local[i * 6 + j] += w * vec3::dot(ce.curl(q, j), cb.vector(q, i));
                    }
                }
            }
        }),
        CouplingPattern::CurlOfTest => bilinear_with(target, e, b, degree::CURL, None, |ce, cb, _, local| {
            for q in 0..ce.npoints() {
                let w = ce.weight(q);
                for i in 0..6 {
                    for j in 0..4 {
                        local[i * 4 + j] += w * vec3::dot(cb.vector(q, j), ce.curl(q, i));
                    }
                }
            }
        }),
    }
}

/// Right-hand side `(f, ψ_i)`; scalar spaces read component 0 of `f`.
pub fn load_vector<T: Real>(
    space: &FeSpace<T>,
    degree: usize,
    f: impl Fn(Vec3<T>) -> Vec3<T>,
) -> Result<Vec<T>, AssemblyError> {
    let mut cl = CellLoop::new(&[space], degree)?;
    let mut out = vec![T::zero(); space.dof_count()];
    let n = space.local_dofs();
    let mut local = vec![T::zero(); n];
    for c in 0..cl.num_cells() {
        cl.visit(c)?;
        let cb = &cl.bases[0];
        local.iter_mut().for_each(|v| *v = T::zero());
        for q in 0..cb.npoints() {
            let w = cb.weight(q);
            let fq = f(cb.point(q));
            match space.kind() {
                SpaceKind::VectorP2 => {
                    for a in 0..10 {
                        let phi = w * cb.scalar(q, a);
                        for k in 0..3 {
                            local[3 * a + k] += phi * fq[k];
                        }
                    }
                }
                SpaceKind::P1 => {
                    for (i, l) in local.iter_mut().enumerate() {
                        *l += w * cb.scalar(q, i) * fq[0];
                    }
                }
                _ => {
                    for (i, l) in local.iter_mut().enumerate() {
                        *l += w * vec3::dot(fq, cb.vector(q, i));
                    }
                }
            }
        }
        for (d, v) in space.cell_dofs(c).iter().zip(&local) {
            out[*d] += *v;
        }
    }
    Ok(out)
}

/// Right-hand side `(f, ∇×F_i)` on the Nédélec space.
pub fn load_curl_vector<T: Real>(
    space: &FeSpace<T>,
    degree: usize,
    f: impl Fn(Vec3<T>) -> Vec3<T>,
) -> Result<Vec<T>, AssemblyError> {
    require(space, SpaceKind::Nedelec)?;
    let mut cl = CellLoop::new(&[space], degree)?;
    let mut out = vec![T::zero(); space.dof_count()];
    for c in 0..cl.num_cells() {
        cl.visit(c)?;
        let cb = &cl.bases[0];
        for q in 0..cb.npoints() {
            let fq = vec3::scale(cb.weight(q), f(cb.point(q)));
            for (i, d) in space.cell_dofs(c).iter().enumerate() {
                out[*d] += vec3::dot(fq, cb.curl(q, i));
            }
        }
    }
    Ok(out)
}

/// `m_q = ∫ χ_q`, the pressure mean functional.
pub fn mean_vector<T: Real>(pressure: &FeSpace<T>) -> Result<Vec<T>, AssemblyError> {
    require(pressure, SpaceKind::P1)?;
    load_vector(pressure, 1, |_| [T::one(), T::zero(), T::zero()])
}

/// Signed face-edge incidence: column `e` holds the RT0 coefficients of the
/// curl of the N0 basis function of edge `e`.
pub fn discrete_curl<T: Real>(mesh: &Mesh<T>) -> CsrMatrix<T> {
    let mut tb = TripletBuilder::with_capacity(mesh.num_faces(), mesh.num_edges(), 3 * mesh.num_faces());
    for f in 0..mesh.num_faces() {
        // face (a, b, c) is circulated a → b → c → a; face_edges is [ab, ac, bc]
        let [ab, ac, bc] = *mesh.face_edges(f);
        tb.push(f, ab, T::one());
        tb.push(f, ac, -T::one());
        tb.push(f, bc, T::one());
    }
    tb.build()
}

/// Cell-wise divergence of an RT0 field (outward flux over volume).
pub fn cell_divergence<T: Real>(field: &Field<T>) -> Result<Vec<T>, AssemblyError> {
    let space = field.space();
    require(space, SpaceKind::RaviartThomas)?;
    let mesh = space.mesh();
    let c = field.coeffs();
    Ok((0..mesh.num_cells())
        .map(|k| {
            let flux: T = mesh
                .cell_faces(k)
                .iter()
                .zip(mesh.cell_face_signs(k))
                .map(|(f, s)| if *s > 0 { c[*f] } else { -c[*f] })
                .sum();
            flux / mesh.cell_volume(k)
        })
        .collect())
}
