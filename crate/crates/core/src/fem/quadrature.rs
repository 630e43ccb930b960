//! Quadrature on the unit interval, the reference triangle and the reference
//! tetrahedron.
//!
//! Rules of degree three and above are conical (Stroud) products of
//! Gauss–Jacobi rules: the collapsed coordinates absorb the Duffy Jacobian
//! into the Jacobi weight, so `n` points per direction integrate every
//! polynomial of degree `2n - 1` in each collapsed coordinate exactly with positive weights and
//! strictly interior points.

use crate::fem::FemError;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Highest degree accepted by [`QuadratureRule::tetrahedron`].
pub const MAX_TET_DEGREE: usize = 8;
/// Highest degree accepted by [`TriangleRule::new`].
pub const MAX_TRIANGLE_DEGREE: usize = 12;

#[derive(Clone, Debug)]
pub struct QuadratureRule<T> {
    points: Vec<Vec3<T>>,
    weights: Vec<T>,
    degree: usize,
}

impl<T: Real> QuadratureRule<T> {
    /// Rule on `{x, y, z >= 0, x + y + z <= 1}` exact to total degree `degree`.
    /// Weights sum to the reference volume 1/6.
    pub fn tetrahedron(degree: usize) -> Result<Self, FemError> {
        if degree == 0 || degree > MAX_TET_DEGREE {
            return Err(FemError::UnsupportedDegree(degree));
        }
        let (points, weights) = match degree {
            1 => (vec![[0.25; 3]], vec![1.0 / 6.0]),
            2 => {
                let a = 0.585_410_196_624_968_5;
                let b = 0.138_196_601_125_010_5;
                (
                    vec![[b, b, b], [a, b, b], [b, a, b], [b, b, a]],
                    vec![1.0 / 24.0; 4],
                )
            }
            _ => {
                let n = degree / 2 + 1;
                let (x1, w1) = gauss_jacobi_unit(n, 2);
                let (x2, w2) = gauss_jacobi_unit(n, 1);
                let (x3, w3) = gauss_jacobi_unit(n, 0);
                let mut pts = Vec::with_capacity(n * n * n);
                let mut wts = Vec::with_capacity(n * n * n);
                for (a, wa) in x1.iter().zip(&w1) {
                    for (b, wb) in x2.iter().zip(&w2) {
                        for (c, wc) in x3.iter().zip(&w3) {
                            pts.push([*a, b * (1.0 - a), c * (1.0 - a) * (1.0 - b)]);
                            wts.push(wa * wb * wc);
                        }
                    }
                }
                (pts, wts)
            }
        };
        Ok(Self {
            points: points.into_iter().map(|p| p.map(T::lit)).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
            degree,
        })
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Iterates `(point, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (Vec3<T>, T)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Rule on the reference triangle `{s, t >= 0, s + t <= 1}`; weights sum to 1/2.
#[derive(Clone, Debug)]
pub struct TriangleRule<T> {
    points: Vec<[T; 2]>,
    weights: Vec<T>,
}

impl<T: Real> TriangleRule<T> {
    pub fn new(degree: usize) -> Result<Self, FemError> {
        if degree == 0 || degree > MAX_TRIANGLE_DEGREE {
            return Err(FemError::UnsupportedDegree(degree));
        }
        let (points, weights) = if degree == 1 {
            (vec![[1.0 / 3.0; 2]], vec![0.5])
        } else {
            let n = degree / 2 + 1;
            let (x1, w1) = gauss_jacobi_unit(n, 1);
            let (x2, w2) = gauss_jacobi_unit(n, 0);
            let mut pts = Vec::with_capacity(n * n);
            let mut wts = Vec::with_capacity(n * n);
            for (a, wa) in x1.iter().zip(&w1) {
                for (b, wb) in x2.iter().zip(&w2) {
                    pts.push([*a, b * (1.0 - a)]);
                    wts.push(wa * wb);
                }
            }
            (pts, wts)
        };
        Ok(Self {
            points: points.into_iter().map(|p| p.map(T::lit)).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = ([T; 2], T)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `n`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_jacobi_unit(n, 0);
    (x.into_iter().map(T::lit).collect(), w.into_iter().map(T::lit).collect())
}

/// Jacobi polynomial `P_n^(a, 0)` and its derivative at `x`.
fn jacobi(n: usize, a: f64, x: f64) -> (f64, f64) {
    let eval = |n: usize, a: f64, b: f64| -> f64 {
        if n == 0 {
            return 1.0;
        }
        let mut p0 = 1.0;
        let mut p1 = 0.5 * ((a + b + 2.0) * x + (a - b));
        for k in 2..=n {
            let k = k as f64;
            let s = 2.0 * k + a + b;
            let c1 = 2.0 * k * (k + a + b) * (s - 2.0);
            let c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
            let c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
            let p2 = (c2 * p1 - c3 * p0) / c1;
            p0 = p1;
            p1 = p2;
        }
        p1
    };
    let p = eval(n, a, 0.0);
    let dp = if n == 0 {
        0.0
    } else {
        0.5 * (n as f64 + a + 1.0) * eval(n - 1, a + 1.0, 1.0)
    };
    (p, dp)
}

/// Gauss–Jacobi rule for `∫_0^1 (1 - s)^alpha g(s) ds`.
fn gauss_jacobi_unit(n: usize, alpha: u32) -> (Vec<f64>, Vec<f64>) {
    let a = alpha as f64;
    // bracket the roots on a fine grid, then bisect to full precision
    let samples = 400 * n;
    let grid: Vec<f64> = (0..=samples)
        .map(|i| -1.0 + 2.0 * i as f64 / samples as f64)
        .collect();
    let mut roots = Vec::with_capacity(n);
    for pair in grid.windows(2) {
        let (mut lo, mut hi) = (pair[0], pair[1]);
        let (flo, fhi) = (jacobi(n, a, lo).0, jacobi(n, a, hi).0);
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        // a root on a grid point is taken by the window starting there
        if flo * fhi > 0.0 || fhi == 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if jacobi(n, a, lo).0 * jacobi(n, a, mid).0 <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    debug_assert_eq!(roots.len(), n, "Jacobi root count");
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for x in roots {
        let (_, dp) = jacobi(n, a, x);
        // weight on [-1, 1] is 2^(a+1) / ((1 - x^2) P'^2); mapping to [0, 1]
        // divides by 2^(a+1)
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
        nodes.push(0.5 * (1.0 + x));
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// ∫ x^a y^b z^c over the reference tetrahedron = a! b! c! / (a+b+c+3)!
    fn tet_monomial(a: u32, b: u32, c: u32) -> f64 {
        factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)
    }

    /// ∫ s^a t^b over the reference triangle = a! b! / (a+b+2)!
    fn tri_monomial(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn degree_one_is_centroid_rule() {
        let q = QuadratureRule::<f64>::tetrahedron(1).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.points()[0], [0.25; 3]);
        assert!((q.weights()[0] - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn weights_sum_to_reference_volume() {
        for d in 1..=MAX_TET_DEGREE {
            let q = QuadratureRule::<f64>::tetrahedron(d).unwrap();
            let s: f64 = q.weights().iter().sum();
            assert!((s - 1.0 / 6.0).abs() < 1e-15, "degree {d}");
            assert!(q.weights().iter().all(|w| *w > 0.0));
            assert!(q.points().iter().all(|p| p.iter().all(|c| *c > 0.0) && p.iter().sum::<f64>() < 1.0));
        }
    }

    #[test]
    fn xy_moment() {
        let q = QuadratureRule::<f64>::tetrahedron(2).unwrap();
        let v: f64 = q.iter().map(|(p, w)| w * p[0] * p[1]).sum();
        assert!((v - 1.0 / 120.0).abs() < 1e-16);
        assert!((tet_monomial(1, 1, 0) - 1.0 / 120.0).abs() < 1e-18);
    }

    #[test]
    fn tetrahedron_rules_are_exact_to_their_degree() {
        for d in 1..=MAX_TET_DEGREE {
            let q = QuadratureRule::<f64>::tetrahedron(d).unwrap();
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    for c in 0..=(d as u32 - a - b) {
                        let v: f64 = q
                            .iter()
                            .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                            .sum();
                        let exact = tet_monomial(a, b, c);
                        assert!((v - exact).abs() < 1e-15, "degree {d} monomial ({a},{b},{c})");
                    }
                }
            }
        }
    }

    #[test]
    fn triangle_rules_are_exact_to_their_degree() {
        for d in 1..=MAX_TRIANGLE_DEGREE {
            let q = TriangleRule::<f64>::new(d).unwrap();
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let v: f64 = q.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                    assert!((v - tri_monomial(a, b)).abs() < 1e-15, "degree {d} ({a},{b})");
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_odd_degree() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre::<f64>(n);
            for p in 0..2 * n as i32 {
                let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
                assert!((v - 1.0 / (p as f64 + 1.0)).abs() < 1e-15, "n {n} p {p}");
            }
        }
    }

    #[test]
    fn unsupported_degrees() {
        assert_eq!(QuadratureRule::<f64>::tetrahedron(0).unwrap_err(), FemError::UnsupportedDegree(0));
        assert_eq!(QuadratureRule::<f64>::tetrahedron(9).unwrap_err(), FemError::UnsupportedDegree(9));
    }

    #[test]
    fn single_precision_rules() {
        let q = QuadratureRule::<f32>::tetrahedron(5).unwrap();
        let s: f32 = q.weights().iter().sum();
        assert!((s - 1.0 / 6.0).abs() < 1e-6);
    }
}
