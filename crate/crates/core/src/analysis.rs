//! Error norms, time-accumulated norms, energy and divergence diagnostics,
//! and convergence-rate tables.

use thiserror::Error;

use crate::assembly::forms::{self, degree, edge_curl, p1_value, p2_gradient, p2_value, vector_value, CellLoop};
use crate::assembly::AssemblyError;
use crate::mms::ExactSolution;
use crate::scalar::Real;
use crate::scheme::{ProblemParams, SchemeKind, State};
use crate::spaces::{Field, SpaceKind};
use crate::vec3::{self, Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no time steps to accumulate")]
    Empty,
    #[error("norm is not defined for a {0:?} field")]
    WrongKind(SpaceKind),
    #[error("trajectories do not line up: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// `∫ integrand` over the field's mesh; the integrand receives the cell basis,
/// the local coefficients and the quadrature point index.
fn integrate<T: Real>(
    field: &Field<T>,
    degree: usize,
    mut integrand: impl FnMut(&crate::fem::CellBasis<T>, &[T], usize) -> T,
) -> Result<T, AnalysisError> {
    let mut cl = CellLoop::new(&[field.space().as_ref()], degree)?;
    let mut local = Vec::new();
    let mut sum = T::zero();
    for c in 0..cl.num_cells() {
        cl.visit(c)?;
        field.cell_coeffs(c, &mut local);
        let cb = &cl.bases[0];
        for q in 0..cb.npoints() {
            sum += cb.weight(q) * integrand(cb, &local, q);
        }
    }
    Ok(sum)
}

fn value_at<T: Real>(kind: SpaceKind, cb: &crate::fem::CellBasis<T>, local: &[T], q: usize) -> Vec3<T> {
    match kind {
        SpaceKind::VectorP2 => p2_value(cb, local, q),
        SpaceKind::P1 => [p1_value(cb, local, q), T::zero(), T::zero()],
        _ => vector_value(cb, local, q),
    }
}

/// `‖v − v_h‖_{L²}`; scalar fields compare against component 0 of `exact`.
pub fn l2_error<T: Real>(field: &Field<T>, exact: impl Fn(Vec3<T>) -> Vec3<T>) -> Result<T, AnalysisError> {
    let kind = field.kind();
    let s = integrate(field, degree::SOURCE, |cb, l, q| {
        let d = vec3::sub(exact(cb.point(q)), value_at(kind, cb, l, q));
        vec3::dot(d, d)
    })?;
    Ok(s.sqrt())
}

pub fn norm_l2<T: Real>(field: &Field<T>) -> Result<T, AnalysisError> {
    l2_error(field, |_| vec3::zero())
}

/// `‖∇(u − u_h)‖` for vector P2 fields; `grad[c][d] = ∂_d u_c`.
pub fn h1_error<T: Real>(field: &Field<T>, grad: impl Fn(Vec3<T>) -> Mat3<T>) -> Result<T, AnalysisError> {
    if field.kind() != SpaceKind::VectorP2 {
        return Err(AnalysisError::WrongKind(field.kind()));
    }
    let s = integrate(field, degree::SOURCE, |cb, l, q| {
        let g = p2_gradient(cb, l, q);
        let ge = grad(cb.point(q));
        let mut acc = T::zero();
        for c in 0..3 {
            for d in 0..3 {
                let e = ge[c][d] - g[c][d];
                acc += e * e;
            }
        }
        acc
    })?;
    Ok(s.sqrt())
}

pub fn seminorm_h1<T: Real>(field: &Field<T>) -> Result<T, AnalysisError> {
    h1_error(field, |_| [[T::zero(); 3]; 3])
}

/// `‖∇×(E − E_h)‖` for Nédélec fields.
pub fn curl_error<T: Real>(field: &Field<T>, curl: impl Fn(Vec3<T>) -> Vec3<T>) -> Result<T, AnalysisError> {
    if field.kind() != SpaceKind::Nedelec {
        return Err(AnalysisError::WrongKind(field.kind()));
    }
    let s = integrate(field, degree::SOURCE, |cb, l, q| {
        let d = vec3::sub(curl(cb.point(q)), edge_curl(cb, l, q));
        vec3::dot(d, d)
    })?;
    Ok(s.sqrt())
}

/// `(‖F‖² + ‖∇×F‖²)^{1/2}`.
pub fn norm_curl<T: Real>(field: &Field<T>) -> Result<T, AnalysisError> {
    let a = norm_l2(field)?;
    let b = curl_error(field, |_| vec3::zero())?;
    Ok((a * a + b * b).sqrt())
}

/// `(‖B‖² + ‖∇·B‖²)^{1/2}` for Raviart–Thomas fields.
pub fn norm_div<T: Real>(field: &Field<T>) -> Result<T, AnalysisError> {
    let a = norm_l2(field)?;
    let d = div_l2(field)?;
    Ok((a * a + d * d).sqrt())
}

/// `‖∇·B_h‖_{L²}`, exact for the piecewise constant RT0 divergence.
pub fn div_l2<T: Real>(field: &Field<T>) -> Result<T, AnalysisError> {
    let div = forms::cell_divergence(field)?;
    let mesh = field.space().mesh();
    Ok(div
        .iter()
        .enumerate()
        .map(|(c, d)| mesh.cell_volume(c) * *d * *d)
        .sum::<T>()
        .sqrt())
}

/// `‖j‖²` with `j = E + u × B`.
pub fn current_norm_sq<T: Real>(u: &Field<T>, e: &Field<T>, b: &Field<T>) -> Result<T, AnalysisError> {
    let spaces = [u.space().as_ref(), e.space().as_ref(), b.space().as_ref()];
    let mut cl = CellLoop::new(&spaces, degree::SOURCE)?;
    let (mut lu, mut le, mut lb) = (Vec::new(), Vec::new(), Vec::new());
    let mut sum = T::zero();
    for c in 0..cl.num_cells() {
        cl.visit(c)?;
        u.cell_coeffs(c, &mut lu);
        e.cell_coeffs(c, &mut le);
        b.cell_coeffs(c, &mut lb);
        let [cu, ce, cb] = [&cl.bases[0], &cl.bases[1], &cl.bases[2]];
        for q in 0..cu.npoints() {
            let j = vec3::add(
                vector_value(ce, &le, q),
                vec3::cross(p2_value(cu, &lu, q), vector_value(cb, &lb, q)),
            );
            sum += cu.weight(q) * vec3::dot(j, j);
        }
    }
    Ok(sum)
}

/// Discrete `L²(0, T)` norm: `(k Σ v_n²)^{1/2}`.
pub fn vert_norm<T: Real>(values: &[T], k: T) -> Result<T, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    Ok((k * values.iter().map(|v| *v * *v).sum::<T>()).sqrt())
}

/// Per-step error contributions `n = 1..=m`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepErrors<T> {
    pub u_l2: T,
    pub grad_u: T,
    pub b_l2: T,
    pub e_l2: T,
    pub curl_e: T,
    pub p_l2: T,
}

/// Starred errors of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport<T> {
    pub h: T,
    pub k: T,
    pub scheme: SchemeKind,
    pub u: T,
    pub b: T,
    pub e: T,
    pub p: T,
    pub steps: Vec<StepErrors<T>>,
}

impl<T: Real> ErrorReport<T> {
    /// Combines per-step contributions into the starred norms.
    pub fn from_steps(h: T, k: T, scheme: SchemeKind, steps: Vec<StepErrors<T>>) -> Result<Self, AnalysisError> {
        let last = steps.last().ok_or(AnalysisError::Empty)?;
        let col = |f: fn(&StepErrors<T>) -> T| steps.iter().map(f).collect::<Vec<_>>();
        let grad = vert_norm(&col(|s| s.grad_u), k)?;
        let e = vert_norm(&col(|s| s.e_l2), k)?;
        let curl = vert_norm(&col(|s| s.curl_e), k)?;
        let p = vert_norm(&col(|s| s.p_l2), k)?;
        Ok(Self {
            h,
            k,
            scheme,
            u: (last.u_l2 * last.u_l2 + grad * grad).sqrt(),
            b: last.b_l2,
            e: (e * e + k * curl * curl).sqrt(),
            p,
            steps,
        })
    }

    pub fn as_array(&self) -> [T; 4] {
        [self.u, self.b, self.e, self.p]
    }
}

/// Errors of one state against the manufactured solution at its time.
pub fn exact_step_errors<T: Real>(state: &State<T>) -> Result<StepErrors<T>, AnalysisError> {
    let t = state.t;
    let shift = ExactSolution::<T>::pressure_mean(state.p.space(), t)?;
    Ok(StepErrors {
        u_l2: l2_error(&state.u, |x| ExactSolution::velocity(t, x))?,
        grad_u: h1_error(&state.u, |x| ExactSolution::velocity_gradient(t, x))?,
        b_l2: l2_error(&state.b, |x| ExactSolution::magnetic(t, x))?,
        e_l2: l2_error(&state.e, |x| ExactSolution::electric(t, x))?,
        curl_e: curl_error(&state.e, |x| ExactSolution::electric_curl(t, x))?,
        p_l2: l2_error(&state.p, |x| [ExactSolution::pressure(t, x) - shift, T::zero(), T::zero()])?,
    })
}

/// Starred errors of a trajectory `[state_0, ..., state_m]` against the
/// manufactured solution. The initial state is excluded from the sums.
pub fn starred_errors<T: Real>(
    trajectory: &[State<T>],
    k: T,
    scheme: SchemeKind,
) -> Result<ErrorReport<T>, AnalysisError> {
    let first = trajectory.first().ok_or(AnalysisError::Empty)?;
    let h = first.u.space().mesh().mesh_size();
    let steps = trajectory[1..].iter().map(exact_step_errors).collect::<Result<Vec<_>, _>>()?;
    ErrorReport::from_steps(h, k, scheme, steps)
}

fn difference<T: Real>(a: &Field<T>, b: &Field<T>) -> Field<T> {
    let mut d = a.clone();
    d.coeffs_mut().iter_mut().zip(b.coeffs()).for_each(|(x, y)| *x -= *y);
    d
}

/// Starred differences between a coarse-step trajectory and a reference
/// trajectory on the same mesh whose step divides the coarse one.
pub fn starred_differences<T: Real>(
    trajectory: &[State<T>],
    reference: &[State<T>],
    k: T,
    scheme: SchemeKind,
) -> Result<ErrorReport<T>, AnalysisError> {
    let m = trajectory.len().checked_sub(1).ok_or(AnalysisError::Empty)?;
    let mr = reference.len().checked_sub(1).ok_or(AnalysisError::Empty)?;
    if m == 0 || mr % m != 0 {
        return Err(AnalysisError::Misaligned(format!("{m} coarse steps vs {mr} reference steps")));
    }
    let stride = mr / m;
    let h = trajectory[0].u.space().mesh().mesh_size();
    let mut steps = Vec::with_capacity(m);
    for n in 1..=m {
        let (a, r) = (&trajectory[n], &reference[n * stride]);
        if (a.t - r.t).abs() > T::lit(1e-9) * (T::one() + r.t.abs()) {
            return Err(AnalysisError::Misaligned(format!("time {} vs {}", a.t, r.t)));
        }
        let (du, db, de, dp) = (
            difference(&a.u, &r.u),
            difference(&a.b, &r.b),
            difference(&a.e, &r.e),
            difference(&a.p, &r.p),
        );
        steps.push(StepErrors {
            u_l2: norm_l2(&du)?,
            grad_u: seminorm_h1(&du)?,
            b_l2: norm_l2(&db)?,
            e_l2: norm_l2(&de)?,
            curl_e: curl_error(&de, |_| vec3::zero())?,
            p_l2: norm_l2(&dp)?,
        });
    }
    ErrorReport::from_steps(h, k, scheme, steps)
}

/// Energy bookkeeping of one step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyStep<T> {
    /// `‖uⁿ‖² + α‖Bⁿ‖²`.
    pub energy: T,
    /// `‖∇uⁿ‖²`.
    pub grad_u_sq: T,
    /// `‖jⁿ‖²`.
    pub current_sq: T,
    /// `E^{n−1} − Eⁿ − 2k R_e⁻¹‖∇uⁿ‖² − 2k s‖jⁿ‖²`; nonnegative for an
    /// exact solve without forcing.
    pub step_margin: T,
    /// `E⁰ − (Eⁿ + 2 R_e⁻¹ k Σ‖∇u‖² + 2 s k Σ‖j‖²)` with sums over steps
    /// `1..=n`, i.e. the sum of the step margins so far.
    pub margin: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport<T> {
    pub initial_energy: T,
    pub steps: Vec<EnergyStep<T>>,
}

impl<T: Real> EnergyReport<T> {
    pub fn min_margin(&self) -> T {
        self.steps.iter().map(|s| s.margin).fold(T::infinity(), T::min)
    }

    pub fn min_step_margin(&self) -> T {
        self.steps.iter().map(|s| s.step_margin).fold(T::infinity(), T::min)
    }

    pub fn is_nonincreasing(&self, slack: T) -> bool {
        let mut prev = self.initial_energy;
        self.steps.iter().all(|s| {
            let ok = s.energy <= prev + slack;
            prev = s.energy;
            ok
        })
    }
}

pub fn energy<T: Real>(state: &State<T>, params: &ProblemParams<T>) -> Result<T, AnalysisError> {
    let u = norm_l2(&state.u)?;
    let b = norm_l2(&state.b)?;
    Ok(u * u + params.alpha * b * b)
}

/// Energy terms along a trajectory. The current uses the magnetic field the
/// scheme froze in its couplings: `B^{n−1}` (linearized) or `Bⁿ` (Picard).
pub fn energy_report<T: Real>(
    trajectory: &[State<T>],
    params: &ProblemParams<T>,
    k: T,
    scheme: SchemeKind,
) -> Result<EnergyReport<T>, AnalysisError> {
    let first = trajectory.first().ok_or(AnalysisError::Empty)?;
    let e0 = energy(first, params)?;
    let two = T::lit(2.0);
    let (mut prev, mut acc_u, mut acc_j) = (e0, T::zero(), T::zero());
    let mut steps = Vec::new();
    for w in trajectory.windows(2) {
        let (old, new) = (&w[0], &w[1]);
        let en = energy(new, params)?;
        let g = seminorm_h1(&new.u)?;
        let lag = match scheme {
            SchemeKind::Linearized => &old.b,
            SchemeKind::Picard => &new.b,
        };
        let j2 = current_norm_sq(&new.u, &new.e, lag)?;
        acc_u += k * g * g;
        acc_j += k * j2;
        steps.push(EnergyStep {
            energy: en,
            grad_u_sq: g * g,
            current_sq: j2,
            step_margin: prev - en - two * k * g * g / params.re - two * k * params.s * j2,
            margin: e0 - (en + two * acc_u / params.re + two * params.s * acc_j),
        });
        prev = en;
    }
    Ok(EnergyReport {
        initial_energy: e0,
        steps,
    })
}

/// Divergence of `B` at one time level.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DivBStep<T> {
    pub l2: T,
    pub max_abs: T,
}

pub fn div_b<T: Real>(b: &Field<T>) -> Result<DivBStep<T>, AnalysisError> {
    let div = forms::cell_divergence(b)?;
    let max_abs = div.iter().fold(T::zero(), |m, d| m.max(d.abs()));
    Ok(DivBStep { l2: div_l2(b)?, max_abs })
}

/// `‖∇·Bⁿ‖` and `max |∇·Bⁿ|` for every state, including the initial one.
pub fn div_b_report<T: Real>(trajectory: &[State<T>]) -> Result<Vec<DivBStep<T>>, AnalysisError> {
    trajectory.iter().map(|s| div_b(&s.b)).collect()
}

/// Errors per refinement level and the observed orders between them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateTable {
    /// `(parameter, [u, B, E, p])`, parameter being `h` or `k`.
    pub rows: Vec<(f64, [f64; 4])>,
}

impl RateTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rows must be pushed coarse to fine.
    pub fn push(&mut self, param: f64, errors: [f64; 4]) {
        self.rows.push((param, errors));
    }

    /// Observed order between row `i − 1` and row `i`.
    pub fn rate(&self, i: usize) -> Option<[f64; 4]> {
        if i == 0 || i >= self.rows.len() {
            return None;
        }
        let (p0, e0) = self.rows[i - 1];
        let (p1, e1) = self.rows[i];
        let lr = (p0 / p1).ln();
        Some(std::array::from_fn(|f| (e0[f] / e1[f]).ln() / lr))
    }

    /// Least-squares slope of `log e` against `log param` over all rows.
    pub fn fitted_order(&self) -> Option<[f64; 4]> {
        let n = self.rows.len();
        if n < 2 {
            return None;
        }
        let xs: Vec<f64> = self.rows.iter().map(|r| r.0.ln()).collect();
        let xm = xs.iter().sum::<f64>() / n as f64;
        Some(std::array::from_fn(|f| {
            let ys: Vec<f64> = self.rows.iter().map(|r| r.1[f].ln()).collect();
            let ym = ys.iter().sum::<f64>() / n as f64;
            let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
            let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
            num / den
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vert_norm_closed_forms() {
        assert_eq!(vert_norm(&[0.0, 0.0], 0.1).unwrap(), 0.0);
        assert!((vert_norm(&[3.0f64], 0.25).unwrap() - 1.5).abs() < 1e-15);
        let v = vec![2.0f64; 8];
        assert!((vert_norm(&v, 0.125).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(vert_norm::<f64>(&[], 0.1).unwrap_err(), AnalysisError::Empty);
    }

    #[test]
    fn rate_of_exact_first_order_data() {
        let mut t = RateTable::new();
        t.push(0.5, [1.0, 2.0, 4.0, 8.0]);
        t.push(0.25, [0.5, 1.0, 2.0, 4.0]);
        t.push(0.125, [0.25, 0.5, 1.0, 2.0]);
        for r in t.rate(2).unwrap().iter().chain(&t.fitted_order().unwrap()) {
            assert!((r - 1.0).abs() < 1e-12);
        }
        assert!(t.rate(0).is_none());
    }
}
