//! Polynomial divergence-free fields on the unit cube for the invariant runs.
//!
//! Both are curls of `(0, 0, ψ)` with `ψ` built from `b(t) = t²(1 − t)²`, so
//! they are solenoidal, the velocity vanishes on the boundary and the magnetic
//! field has zero normal trace. The RT0 interpolant of the magnetic field is
//! computed with exact face quadrature and is therefore divergence-free cell
//! by cell.

use crate::scalar::Real;
use crate::scheme::State;
use crate::spaces::{interpolate, Field, MhdSpaces};
use crate::vec3::Vec3;

pub const VELOCITY_AMPLITUDE: f64 = 1000.0;
pub const MAGNETIC_AMPLITUDE: f64 = 64.0;

fn bump<T: Real>(t: T) -> (T, T) {
    let s = t * (T::one() - t);
    (s * s, T::lit(2.0) * s * (T::one() - t - t))
}

/// `A ∇×(0, 0, b(x) b(y) b(z))`.
pub fn velocity<T: Real>(x: Vec3<T>) -> Vec3<T> {
    let (bx, dx) = bump(x[0]);
    let (by, dy) = bump(x[1]);
    let (bz, _) = bump(x[2]);
    let a = T::lit(VELOCITY_AMPLITUDE);
    [a * bx * dy * bz, -a * dx * by * bz, T::zero()]
}

/// `A ∇×(0, 0, b(x) b(y))`.
pub fn magnetic<T: Real>(x: Vec3<T>) -> Vec3<T> {
    let (bx, dx) = bump(x[0]);
    let (by, dy) = bump(x[1]);
    let a = T::lit(MAGNETIC_AMPLITUDE);
    [a * bx * dy, -a * dx * by, T::zero()]
}

/// Interpolated velocity and magnetic field, zero electric field and pressure.
pub fn state<T: Real>(spaces: &MhdSpaces<T>, t: T) -> State<T> {
    State {
        t,
        u: interpolate(&spaces.velocity, velocity),
        b: interpolate(&spaces.magnetic, magnetic),
        e: Field::zeros(&spaces.electric),
        p: Field::zeros(&spaces.pressure),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_vanish_on_the_boundary() {
        for x in [[0.0, 0.3, 0.6], [1.0, 0.2, 0.9], [0.4, 0.0, 0.5], [0.7, 1.0, 0.1]] {
            assert_eq!(velocity::<f64>(x), [0.0; 3]);
            assert_eq!(magnetic::<f64>(x), [0.0; 3]);
        }
        // only the tangential part of B survives on z faces
        assert!(magnetic::<f64>([0.3, 0.2, 0.0])[0] != 0.0);
        assert_eq!(velocity::<f64>([0.3, 0.2, 1.0]), [0.0; 3]);
    }

    #[test]
    fn divergence_vanishes_by_central_differences() {
        let h = 1e-5;
        for x in [[0.3, 0.4, 0.7], [0.81, 0.12, 0.5]] {
            for f in [velocity::<f64> as fn(Vec3<f64>) -> Vec3<f64>, magnetic::<f64>] {
                let mut div = 0.0;
                for d in 0..3 {
                    let (mut p, mut m) = (x, x);
                    p[d] += h;
                    m[d] -= h;
                    div += (f(p)[d] - f(m)[d]) / (2.0 * h);
                }
                assert!(div.abs() < 1e-7, "{div}");
            }
        }
    }
}
