//! Backward-Euler time stepping: the linearized scheme (one solve per step)
//! and the fully implicit scheme solved by Picard iteration.

mod params;

pub use params::{BoundaryData, OhmSource, ProblemParams, SchemeKind, SourceSet, State, TimeConfig, VectorFn};

use thiserror::Error;

use crate::analysis::{self, AnalysisError, DivBStep};
use crate::assembly::{self, AssemblyError, BlockSystem, StepData, StepInputs, StepOperators};
use crate::linalg::{CsrMatrix, LinalgError, LinearSolver, SolveStats, SolverOptions};
use crate::scalar::Real;
use crate::spaces::{Field, MhdSpaces};

/// Bound on the divergence-row residual `max |B uⁿ + m λ|`.
pub const DIVERGENCE_ROW_TOL: f64 = 1e-9;
/// Bound on the Faraday defect after each solve.
pub const FARADAY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("linear solve failed: {0}")]
    Solver(#[from] LinalgError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("Picard iteration did not converge in {iterations} iterations (increments {history:?})")]
    PicardDiverged { iterations: usize, history: Vec<f64> },
    #[error("post-solve check failed: {0}")]
    Assertion(String),
}

/// Diagnostics of one time step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub picard_iterations: usize,
    /// Relative increments of the Picard iterates.
    pub picard_history: Vec<f64>,
    pub solves: Vec<SolveStats>,
    /// `max_q |(B uⁿ)_q + m_q λ|`.
    pub divergence_residual: f64,
    /// Interior Faraday rows: `max |M_B(Bⁿ − Bⁿ⁻¹ + k D Eⁿ) − k G|`.
    pub faraday_defect: f64,
    /// `max |Bⁿ − Bⁿ⁻¹ + k D Eⁿ|` over all faces, when there is no
    /// induction source.
    pub faraday_identity: Option<f64>,
    /// Relative residual of the fully implicit equations at the converged
    /// Picard iterate.
    pub nonlinear_residual: Option<f64>,
}

impl StepDiagnostics {
    pub fn max_solve_residual(&self) -> f64 {
        self.solves.iter().map(|s| s.relative_residual).fold(0.0, f64::max)
    }

    /// Whether the last three Picard increments strictly decrease (vacuous
    /// with fewer than three iterations).
    pub fn picard_contracting(&self) -> bool {
        let h = &self.picard_history;
        h[h.len().saturating_sub(3)..].windows(2).all(|w| w[1] < w[0])
    }
}

fn norm<T: Real>(v: &[T]) -> f64 {
    v.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>().sqrt()
}

fn max_abs<T: Real>(v: impl Iterator<Item = T>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.as_f64().abs()))
}

/// Advances states on a fixed mesh with a fixed step, reusing the
/// state-independent matrices and the symbolic factorization.
pub struct Stepper<T> {
    ops: StepOperators<T>,
    solver: LinearSolver,
    params: ProblemParams<T>,
    k: T,
    sources: SourceSet<T>,
    boundary: BoundaryData<T>,
    incidence: CsrMatrix<T>,
    /// Sources and boundary values of the time level being solved for.
    data: Option<StepData<T>>,
}

impl<T: Real> Stepper<T> {
    pub fn new(
        spaces: &MhdSpaces<T>,
        params: ProblemParams<T>,
        k: T,
        sources: SourceSet<T>,
        boundary: BoundaryData<T>,
        solver: SolverOptions,
    ) -> Result<Self, SchemeError> {
        if !(k > T::zero()) {
            return Err(SchemeError::InvalidParameter(format!("time step must be positive, got {k}")));
        }
        Ok(Self {
            ops: StepOperators::new(spaces)?,
            solver: LinearSolver::new(solver),
            params,
            k,
            sources,
            boundary,
            incidence: assembly::discrete_curl(spaces.mesh()),
            data: None,
        })
    }

    pub fn operators(&self) -> &StepOperators<T> {
        &self.ops
    }

    pub fn params(&self) -> &ProblemParams<T> {
        &self.params
    }

    pub fn k(&self) -> T {
        self.k
    }

    fn system(&mut self, prev: &State<T>, advector: &Field<T>, lag: &Field<T>) -> Result<BlockSystem<T>, SchemeError> {
        let t = prev.t + self.k;
        let data = match self.data.take() {
            Some(d) if d.t == t => d,
            _ => self.ops.step_data(&self.params, &self.sources, &self.boundary, t)?,
        };
        let inputs = StepInputs {
            u_prev: &prev.u,
            b_prev: &prev.b,
            advector,
            magnetic_lag: lag,
            t,
            k: self.k,
        };
        let sys = self.ops.assemble_from(&inputs, &self.params, &data);
        self.data = Some(data);
        Ok(sys?)
    }

    fn split(&self, x: &[T], t: T) -> Result<(State<T>, T), SchemeError> {
        let l = self.ops.layout();
        let sp = self.ops.spaces();
        let field = |s, r: std::ops::Range<usize>| {
            Field::from_coeffs(s, x[r].to_vec()).map_err(|e| SchemeError::Assertion(e.to_string()))
        };
        Ok((
            State {
                t,
                u: field(&sp.velocity, l.u.clone())?,
                b: field(&sp.magnetic, l.b.clone())?,
                e: field(&sp.electric, l.e.clone())?,
                p: field(&sp.pressure, l.p.clone())?,
            },
            x[l.lambda],
        ))
    }

    fn pack(&self, state: &State<T>, lambda: T) -> Vec<T> {
        let mut x = Vec::with_capacity(self.ops.layout().total());
        x.extend_from_slice(state.u.coeffs());
        x.extend_from_slice(state.b.coeffs());
        x.extend_from_slice(state.e.coeffs());
        x.extend_from_slice(state.p.coeffs());
        x.push(lambda);
        x
    }

    /// `guess` (an earlier iterate) only seeds the solver.
    fn solve_once(
        &mut self,
        prev: &State<T>,
        advector: &Field<T>,
        lag: &Field<T>,
        guess: (&State<T>, T),
    ) -> Result<(State<T>, T, SolveStats), SchemeError> {
        let sys = self.system(prev, advector, lag)?;
        let x0 = self.pack(guess.0, guess.1);
        let (x, stats) = self.solver.solve_from(&sys.matrix, &sys.rhs, Some(&x0))?;
        let (state, lambda) = self.split(&x, prev.t + self.k)?;
        Ok((state, lambda, stats))
    }

    fn check(&self, prev: &State<T>, next: &State<T>, lambda: T, diag: &mut StepDiagnostics) -> Result<(), SchemeError> {
        let ops = &self.ops;
        let bu = ops.div().spmv(next.u.coeffs())?;
        diag.divergence_residual = max_abs(bu.iter().zip(ops.mean()).map(|(b, m)| *b + *m * lambda));

        let de = self.incidence.spmv(next.e.coeffs())?;
        let r: Vec<T> = next
            .b
            .coeffs()
            .iter()
            .zip(prev.b.coeffs())
            .zip(&de)
            .map(|((bn, bp), d)| *bn - *bp + self.k * *d)
            .collect();
        let mut mr = ops.mass_b().spmv(&r)?;
        if let Some(g) = &self.sources.induction {
            let t = next.t;
            let gv = assembly::load_vector(&ops.spaces().magnetic, assembly::forms::degree::SOURCE, |x| g(t, x))?;
            mr.iter_mut().zip(&gv).for_each(|(m, g)| *m -= self.k * *g);
            diag.faraday_identity = None;
        } else {
            diag.faraday_identity = Some(max_abs(r.iter().copied()));
        }
        let space = &ops.spaces().magnetic;
        diag.faraday_defect = max_abs(
            mr.iter()
                .enumerate()
                .filter(|(i, _)| !space.is_boundary_dof(*i))
                .map(|(_, v)| *v),
        );

        if !(diag.divergence_residual <= DIVERGENCE_ROW_TOL) {
            return Err(SchemeError::Assertion(format!(
                "divergence row residual {:e} exceeds {DIVERGENCE_ROW_TOL:e}",
                diag.divergence_residual
            )));
        }
        if !(diag.faraday_defect <= FARADAY_TOL) {
            return Err(SchemeError::Assertion(format!(
                "Faraday defect {:e} exceeds {FARADAY_TOL:e}",
                diag.faraday_defect
            )));
        }
        // the coefficient-wise identity also needs boundary data that is
        // itself Faraday-consistent, i.e. a vanishing boundary part of r
        let boundary_r = max_abs(space.boundary_dofs().iter().map(|&i| r[i]));
        if let (Some(id), true) = (diag.faraday_identity, boundary_r <= FARADAY_TOL) {
            if !(id <= FARADAY_TOL) {
                return Err(SchemeError::Assertion(format!("Faraday identity defect {id:e} exceeds {FARADAY_TOL:e}")));
            }
        }
        Ok(())
    }

    /// One step of the linearized scheme: advector `uⁿ⁻¹`, magnetic lag `Bⁿ⁻¹`.
    pub fn step_linearized(&mut self, prev: &State<T>) -> Result<(State<T>, StepDiagnostics), SchemeError> {
        let (next, lambda, stats) = self.solve_once(prev, &prev.u, &prev.b, (prev, T::zero()))?;
        let mut diag = StepDiagnostics {
            picard_iterations: 1,
            solves: vec![stats],
            ..Default::default()
        };
        self.check(prev, &next, lambda, &mut diag)?;
        Ok((next, diag))
    }

    /// One step of the fully implicit scheme by Picard iteration. Each
    /// iterate freezes the previous iterate's velocity and magnetic field in
    /// every nonlinear term; it stops when
    /// `‖δu‖ + ‖δB‖ + ‖δE‖ ≤ tol (1 + ‖u‖ + ‖B‖ + ‖E‖)` in coefficient norms.
    pub fn step_picard(
        &mut self,
        prev: &State<T>,
        tol: f64,
        max_iter: usize,
    ) -> Result<(State<T>, StepDiagnostics), SchemeError> {
        self.step_picard_from(prev, prev.clone(), tol, max_iter)
    }

    /// [`step_picard`](Self::step_picard) with the iteration started from
    /// `start` instead of `prev`. The limit does not depend on the start.
    pub fn step_picard_from(
        &mut self,
        prev: &State<T>,
        start: State<T>,
        tol: f64,
        max_iter: usize,
    ) -> Result<(State<T>, StepDiagnostics), SchemeError> {
        let mut diag = StepDiagnostics::default();
        let mut current = start;
        let mut lambda = T::zero();
        let mut converged = false;
        for _ in 0..max_iter.max(1) {
            let (next, lam, stats) = self.solve_once(prev, &current.u, &current.b, (&current, lambda))?;
            diag.solves.push(stats);
            diag.picard_iterations += 1;
            let inc = [(&next.u, &current.u), (&next.b, &current.b), (&next.e, &current.e)]
                .iter()
                .map(|(a, b)| {
                    let d: Vec<T> = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| *x - *y).collect();
                    norm(&d)
                })
                .sum::<f64>();
            let size = 1.0 + norm(next.u.coeffs()) + norm(next.b.coeffs()) + norm(next.e.coeffs());
            diag.picard_history.push(inc / size);
            current = next;
            lambda = lam;
            if inc <= tol * size {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SchemeError::PicardDiverged {
                iterations: diag.picard_iterations,
                history: diag.picard_history,
            });
        }
        let sys = self.system(prev, &current.u, &current.b)?;
        let x = self.pack(&current, lambda);
        let ax = sys.matrix.spmv(&x)?;
        let r: Vec<T> = sys.rhs.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
        let rel = norm(&r) / norm(&sys.rhs).max(f64::MIN_POSITIVE);
        diag.nonlinear_residual = Some(rel);
        let bound = 10.0 * tol.max(self.solver.options().tolerance);
        if !(rel <= bound) {
            return Err(SchemeError::Assertion(format!(
                "fully implicit residual {rel:e} exceeds {bound:e} at the converged Picard iterate"
            )));
        }
        self.check(prev, &current, lambda, &mut diag)?;
        Ok((current, diag))
    }

    /// One step of the configured scheme. With `before` (the state preceding
    /// `prev`) Picard starts from the linear extrapolation `2 prev − before`.
    pub fn step(
        &mut self,
        prev: &State<T>,
        before: Option<&State<T>>,
        time: &TimeConfig<T>,
    ) -> Result<(State<T>, StepDiagnostics), SchemeError> {
        let (tol, max_iter) = (time.picard_tol.as_f64(), time.picard_max_iter);
        match (time.scheme, before) {
            (SchemeKind::Linearized, _) => self.step_linearized(prev),
            (SchemeKind::Picard, None) => self.step_picard(prev, tol, max_iter),
            (SchemeKind::Picard, Some(b)) => self.step_picard_from(prev, extrapolate(prev, b), tol, max_iter),
        }
    }
}

fn extrapolate<T: Real>(prev: &State<T>, before: &State<T>) -> State<T> {
    let two = T::lit(2.0);
    let lin = |a: &Field<T>, b: &Field<T>| {
        let mut f = a.clone();
        f.coeffs_mut().iter_mut().zip(b.coeffs()).for_each(|(x, y)| *x = two * *x - *y);
        f
    };
    State {
        t: prev.t,
        u: lin(&prev.u, &before.u),
        b: lin(&prev.b, &before.b),
        e: lin(&prev.e, &before.e),
        p: lin(&prev.p, &before.p),
    }
}

/// Per-step entry of a [`RunReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    /// `‖uⁿ‖² + α‖Bⁿ‖²`.
    pub energy: f64,
    pub div_b: DivBStep<f64>,
    pub diagnostics: StepDiagnostics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub scheme: SchemeKind,
    pub h: f64,
    pub k: f64,
    pub initial_energy: f64,
    pub initial_div_b: DivBStep<f64>,
    pub steps: Vec<StepRecord>,
    /// How the inputs were chosen; kept with the results for the record.
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn picard_iters_max(&self) -> usize {
        self.steps.iter().map(|s| s.diagnostics.picard_iterations).max().unwrap_or(0)
    }

    pub fn solve_residual_max(&self) -> f64 {
        self.steps.iter().map(|s| s.diagnostics.max_solve_residual()).fold(0.0, f64::max)
    }

    /// Steps whose Picard increments did not contract at the end.
    pub fn non_contracting_steps(&self) -> Vec<usize> {
        self.steps.iter().filter(|s| !s.diagnostics.picard_contracting()).map(|s| s.n).collect()
    }

    pub fn div_b_max(&self) -> f64 {
        self.steps.iter().map(|s| s.div_b.max_abs).fold(self.initial_div_b.max_abs, f64::max)
    }
}

/// A run that stopped early, with everything computed before the failure.
#[derive(Debug)]
pub struct RunFailure<T> {
    pub error: SchemeError,
    pub trajectory: Vec<State<T>>,
    pub report: RunReport,
}

impl<T> std::fmt::Display for RunFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "step {} failed: {}", self.report.steps.len() + 1, self.error)
    }
}

pub fn spaces_of<T: Real>(state: &State<T>) -> MhdSpaces<T> {
    MhdSpaces {
        velocity: state.u.space().clone(),
        pressure: state.p.space().clone(),
        magnetic: state.b.space().clone(),
        electric: state.e.space().clone(),
    }
}

/// Runs `time.steps` steps from `initial` and returns the whole trajectory
/// (initial state first).
pub fn run<T: Real>(
    initial: State<T>,
    params: ProblemParams<T>,
    time: &TimeConfig<T>,
    sources: SourceSet<T>,
    boundary: BoundaryData<T>,
    solver: SolverOptions,
) -> Result<(Vec<State<T>>, RunReport), Box<RunFailure<T>>> {
    let spaces = spaces_of(&initial);
    let mut report = RunReport {
        scheme: time.scheme,
        h: spaces.mesh().mesh_size().as_f64(),
        k: time.k.as_f64(),
        initial_energy: 0.0,
        initial_div_b: DivBStep::default(),
        steps: Vec::new(),
        notes: vec![
            "initial data: canonical interpolants supplied by the caller".into(),
            "boundary data: strong elimination of interpolated values at each new time level".into(),
            format!("sources: {:?}", sources),
        ],
    };
    let mut trajectory = vec![initial];
    let fail = |error: SchemeError, trajectory: Vec<State<T>>, report: RunReport| {
        Box::new(RunFailure {
            error,
            trajectory,
            report,
        })
    };
    let init = &trajectory[0];
    match (analysis::energy(init, &params), analysis::div_b(&init.b)) {
        (Ok(e), Ok(d)) => {
            report.initial_energy = e.as_f64();
            report.initial_div_b = to_f64(d);
        }
        (Err(e), _) | (_, Err(e)) => return Err(fail(e.into(), trajectory, report)),
    }
    let mut stepper = match Stepper::new(&spaces, params, time.k, sources, boundary, solver) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, trajectory, report)),
    };
    for n in 1..=time.steps {
        let prev = trajectory.last().expect("nonempty");
        let before = trajectory.len().checked_sub(2).map(|i| &trajectory[i]);
        let out = stepper.step(prev, before, time).and_then(|(next, diag)| {
            let energy = analysis::energy(&next, &params)?;
            let div = analysis::div_b(&next.b)?;
            Ok((next, diag, energy, div))
        });
        match out {
            Ok((next, diagnostics, energy, div)) => {
                report.steps.push(StepRecord {
                    n,
                    t: next.t.as_f64(),
                    energy: energy.as_f64(),
                    div_b: to_f64(div),
                    diagnostics,
                });
                trajectory.push(next);
            }
            Err(e) => return Err(fail(e, trajectory, report)),
        }
    }
    Ok((trajectory, report))
}

fn to_f64<T: Real>(d: DivBStep<T>) -> DivBStep<f64> {
    DivBStep {
        l2: d.l2.as_f64(),
        max_abs: d.max_abs.as_f64(),
    }
}
