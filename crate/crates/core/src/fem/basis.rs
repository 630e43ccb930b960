//! Lowest-order reference bases on the unit tetrahedron.
//!
//! Local numbering follows the mesh conventions: vertex functions first,
//! edge objects in [`LOCAL_EDGES`] order, face objects in [`LOCAL_FACES`]
//! order (face `i` opposite vertex `i`).

use crate::mesh::{LOCAL_EDGES, LOCAL_FACES};
use crate::scalar::Real;
use crate::vec3::{self, Vec3};

/// Reference element family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementFamily {
    /// Continuous linear Lagrange.
    P1,
    /// Continuous quadratic Lagrange (scalar).
    P2,
    /// Lowest-order Nédélec edge element of the first kind.
    N0,
    /// Lowest-order Raviart–Thomas face element.
    RT0,
}

impl ElementFamily {
    pub fn dof_count(self) -> usize {
        match self {
            ElementFamily::P1 => 4,
            ElementFamily::P2 => 10,
            ElementFamily::N0 => 6,
            ElementFamily::RT0 => 4,
        }
    }

    pub fn is_vector_valued(self) -> bool {
        matches!(self, ElementFamily::N0 | ElementFamily::RT0)
    }
}

/// Basis values and the derivative natural to the family.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisValues<T> {
    /// Lagrange: values and gradients.
    Scalar { values: Vec<T>, grads: Vec<Vec3<T>> },
    /// H(curl): values and curls.
    Edge { values: Vec<Vec3<T>>, curls: Vec<Vec3<T>> },
    /// H(div): values and divergences.
    Face { values: Vec<Vec3<T>>, divs: Vec<T> },
}

impl<T: Real> BasisValues<T> {
    pub fn len(&self) -> usize {
        match self {
            BasisValues::Scalar { values, .. } => values.len(),
            BasisValues::Edge { values, .. } | BasisValues::Face { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReferenceBasis {
    family: ElementFamily,
}

/// Barycentric coordinates of a reference point.
#[inline]
pub fn barycentric<T: Real>(p: Vec3<T>) -> [T; 4] {
    [T::one() - p[0] - p[1] - p[2], p[0], p[1], p[2]]
}

/// Reference gradients of the barycentric coordinates.
#[inline]
pub fn barycentric_gradients<T: Real>() -> [Vec3<T>; 4] {
    let (o, z) = (T::one(), T::zero());
    [[-o, -o, -o], [o, z, z], [z, o, z], [z, z, o]]
}

/// Reference vertices of the unit tetrahedron.
pub fn reference_vertices<T: Real>() -> [Vec3<T>; 4] {
    let (o, z) = (T::one(), T::zero());
    [[z, z, z], [o, z, z], [z, o, z], [z, z, o]]
}

impl ReferenceBasis {
    pub fn new(family: ElementFamily) -> Self {
        Self { family }
    }

    pub fn family(&self) -> ElementFamily {
        self.family
    }

    pub fn dof_count(&self) -> usize {
        self.family.dof_count()
    }

    pub fn eval<T: Real>(&self, p: Vec3<T>) -> BasisValues<T> {
        let l = barycentric(p);
        let g = barycentric_gradients::<T>();
        match self.family {
            ElementFamily::P1 => BasisValues::Scalar {
                values: l.to_vec(),
                grads: g.to_vec(),
            },
            ElementFamily::P2 => {
                let two = T::lit(2.0);
                let four = T::lit(4.0);
                let mut values = Vec::with_capacity(10);
                let mut grads = Vec::with_capacity(10);
                for i in 0..4 {
                    values.push(l[i] * (two * l[i] - T::one()));
                    grads.push(vec3::scale(four * l[i] - T::one(), g[i]));
                }
                for [a, b] in LOCAL_EDGES {
                    values.push(four * l[a] * l[b]);
                    grads.push(vec3::scale(four, vec3::add(vec3::scale(l[a], g[b]), vec3::scale(l[b], g[a]))));
                }
                BasisValues::Scalar { values, grads }
            }
            ElementFamily::N0 => {
                let two = T::lit(2.0);
                let values = LOCAL_EDGES
                    .iter()
                    .map(|&[a, b]| vec3::sub(vec3::scale(l[a], g[b]), vec3::scale(l[b], g[a])))
                    .collect();
                let curls = LOCAL_EDGES
                    .iter()
                    .map(|&[a, b]| vec3::scale(two, vec3::cross(g[a], g[b])))
                    .collect();
                BasisValues::Edge { values, curls }
            }
            ElementFamily::RT0 => {
                // psi_i = c (x - p_i) with unit outward flux through face i;
                // on the reference cell |K| = 1/6 so c = 1 / (3 |K|) = 2
                let c = T::lit(2.0);
                let verts = reference_vertices::<T>();
                let values = (0..4).map(|i| vec3::scale(c, vec3::sub(p, verts[i]))).collect();
                let divs = vec![T::lit(3.0) * c; 4];
                BasisValues::Face { values, divs }
            }
        }
    }

    /// Applies the canonical degrees of freedom of the reference element to a
    /// field given on the reference cell. Scalar families read component 0.
    ///
    /// Lagrange: nodal values. N0: `∫_e v·(x_b - x_a)` along the local edge.
    /// RT0: outward flux `∫_f v·n` through the local face.
    pub fn apply_dofs<T: Real>(&self, field: impl Fn(Vec3<T>) -> Vec3<T>) -> Vec<T> {
        let verts = reference_vertices::<T>();
        let half = T::lit(0.5);
        match self.family {
            ElementFamily::P1 => verts.iter().map(|v| field(*v)[0]).collect(),
            ElementFamily::P2 => {
                let mut out: Vec<T> = verts.iter().map(|v| field(*v)[0]).collect();
                for [a, b] in LOCAL_EDGES {
                    out.push(field(vec3::scale(half, vec3::add(verts[a], verts[b])))[0]);
                }
                out
            }
            ElementFamily::N0 => {
                let (x, w) = super::quadrature::gauss_legendre::<T>(6);
                LOCAL_EDGES
                    .iter()
                    .map(|&[a, b]| {
                        let t = vec3::sub(verts[b], verts[a]);
                        x.iter()
                            .zip(&w)
                            .map(|(s, w)| *w * vec3::dot(field(vec3::add(verts[a], vec3::scale(*s, t))), t))
                            .sum()
                    })
                    .collect()
            }
            ElementFamily::RT0 => {
                let rule = super::quadrature::TriangleRule::<T>::new(8).expect("face rule");
                LOCAL_FACES
                    .iter()
                    .map(|f| {
                        let e1 = vec3::sub(verts[f[1]], verts[f[0]]);
                        let e2 = vec3::sub(verts[f[2]], verts[f[0]]);
                        // |e1 x e2| is twice the face area, matching the
                        // reference triangle measure 1/2
                        let n = vec3::cross(e1, e2);
                        rule.iter()
                            .map(|([s, t], w)| {
                                let x = vec3::add(verts[f[0]], vec3::add(vec3::scale(s, e1), vec3::scale(t, e2)));
                                w * vec3::dot(field(x), n)
                            })
                            .sum()
                    })
                    .collect()
            }
        }
    }
}
