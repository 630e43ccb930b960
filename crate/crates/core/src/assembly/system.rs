//! The monolithic per-step block system `[u | B | E | p | λ]`.

use std::ops::Range;

use crate::assembly::forms::{self, degree, AssemblyPattern, CouplingPattern};
use crate::assembly::AssemblyError;
use crate::linalg::CsrMatrix;
use crate::scalar::Real;
use crate::scheme::{BoundaryData, ProblemParams, SourceSet, VectorFn};
use crate::spaces::{FeSpace, Field, MhdSpaces};

/// Offsets of the unknown blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub u: Range<usize>,
    pub b: Range<usize>,
    pub e: Range<usize>,
    pub p: Range<usize>,
    pub lambda: usize,
}

impl Layout {
    pub fn new<T: Real>(spaces: &MhdSpaces<T>) -> Self {
        let nu = spaces.velocity.dof_count();
        let nb = spaces.magnetic.dof_count();
        let ne = spaces.electric.dof_count();
        let np = spaces.pressure.dof_count();
        let u = 0..nu;
        let b = u.end..u.end + nb;
        let e = b.end..b.end + ne;
        let p = e.end..e.end + np;
        let lambda = p.end;
        Self { u, b, e, p, lambda }
    }

    pub fn total(&self) -> usize {
        self.lambda + 1
    }
}

/// Everything in a step system that depends only on the new time level.
#[derive(Clone, Debug)]
pub struct StepData<T> {
    pub t: T,
    /// Source contributions, laid out like the right-hand side.
    pub loads: Vec<T>,
    pub constraints: Vec<(usize, T)>,
}

/// Assembled operator, right-hand side and the Dirichlet constraints that
/// were eliminated from it.
#[derive(Clone, Debug)]
pub struct BlockSystem<T> {
    pub layout: Layout,
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    pub constraints: Vec<(usize, T)>,
}

/// Inputs that change from solve to solve.
#[derive(Clone, Copy, Debug)]
pub struct StepInputs<'a, T> {
    pub u_prev: &'a Field<T>,
    pub b_prev: &'a Field<T>,
    /// Velocity in the convection form.
    pub advector: &'a Field<T>,
    /// Magnetic field frozen in the Lorentz and Ohm couplings.
    pub magnetic_lag: &'a Field<T>,
    /// New time level.
    pub t: T,
    pub k: T,
}

/// Matrices that do not depend on the state, assembled once per mesh.
#[derive(Clone, Debug)]
pub struct StepOperators<T> {
    spaces: MhdSpaces<T>,
    layout: Layout,
    mass_u: CsrMatrix<T>,
    stiffness: CsrMatrix<T>,
    mass_b: CsrMatrix<T>,
    mass_e: CsrMatrix<T>,
    curl: CsrMatrix<T>,
    curl_t: CsrMatrix<T>,
    div: CsrMatrix<T>,
    div_t: CsrMatrix<T>,
    mean: Vec<T>,
    mean_col: CsrMatrix<T>,
    mean_row: CsrMatrix<T>,
    zero_p: CsrMatrix<T>,
    zero_l: CsrMatrix<T>,
    pattern_uu: AssemblyPattern<T>,
    pattern_ue: AssemblyPattern<T>,
    pattern_eu: AssemblyPattern<T>,
}

impl<T: Real> StepOperators<T> {
    pub fn new(spaces: &MhdSpaces<T>) -> Result<Self, AssemblyError> {
        let mass_u = forms::mass(&spaces.velocity, T::one())?;
        let stiffness = forms::stiffness(&spaces.velocity, T::one())?;
        let mass_b = forms::mass(&spaces.magnetic, T::one())?;
        let mass_e = forms::mass(&spaces.electric, T::one())?;
        let curl = forms::coupling(spaces, CouplingPattern::CurlOfTrial, None)?;
        let curl_t = curl.transpose();
        let div = forms::divergence(&spaces.velocity, &spaces.pressure)?;
        let div_t = div.transpose();
        let mean = forms::mean_vector(&spaces.pressure)?;
        let np = mean.len();
        let trip: Vec<_> = mean.iter().enumerate().map(|(i, v)| (i, 0, *v)).collect();
        let mean_col = CsrMatrix::from_triplets(np, 1, &trip);
        let mean_row = mean_col.transpose();
        Ok(Self {
            layout: Layout::new(spaces),
            spaces: spaces.clone(),
            mass_u,
            stiffness,
            mass_b,
            mass_e,
            curl,
            curl_t,
            div,
            div_t,
            mean,
            mean_col,
            mean_row,
            zero_p: CsrMatrix::identity(np).scaled(T::zero()),
            zero_l: CsrMatrix::identity(1).scaled(T::zero()),
            pattern_uu: AssemblyPattern::new(&spaces.velocity, &spaces.velocity)?,
            pattern_ue: AssemblyPattern::new(&spaces.velocity, &spaces.electric)?,
            pattern_eu: AssemblyPattern::new(&spaces.electric, &spaces.velocity)?,
        })
    }

    pub fn spaces(&self) -> &MhdSpaces<T> {
        &self.spaces
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn mass_u(&self) -> &CsrMatrix<T> {
        &self.mass_u
    }

    pub fn stiffness(&self) -> &CsrMatrix<T> {
        &self.stiffness
    }

    pub fn mass_b(&self) -> &CsrMatrix<T> {
        &self.mass_b
    }

    pub fn mass_e(&self) -> &CsrMatrix<T> {
        &self.mass_e
    }

    /// `(∇×E, C)`, rows magnetic.
    pub fn curl(&self) -> &CsrMatrix<T> {
        &self.curl
    }

    pub fn div(&self) -> &CsrMatrix<T> {
        &self.div
    }

    /// `∫ χ_q` for every pressure DOF.
    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// Assembles the step operator and right-hand side and eliminates the
    /// Dirichlet data at `inputs.t`.
    pub fn assemble(
        &self,
        inputs: &StepInputs<'_, T>,
        params: &ProblemParams<T>,
        sources: &SourceSet<T>,
        boundary: &BoundaryData<T>,
    ) -> Result<BlockSystem<T>, AssemblyError> {
        let data = self.step_data(params, sources, boundary, inputs.t)?;
        self.assemble_from(inputs, params, &data)
    }

    /// [`assemble`](Self::assemble) with the time-level data precomputed,
    /// so Picard iterates of one step share it.
    pub fn assemble_from(
        &self,
        inputs: &StepInputs<'_, T>,
        params: &ProblemParams<T>,
        data: &StepData<T>,
    ) -> Result<BlockSystem<T>, AssemblyError> {
        if inputs.t != data.t {
            return Err(AssemblyError::StaleStepData);
        }
        let (mut matrix, mut rhs) = self.assemble_unconstrained_from(inputs, params, &data.loads)?;
        apply_constraints(&mut matrix, &mut rhs, &data.constraints);
        Ok(BlockSystem {
            layout: self.layout.clone(),
            matrix,
            rhs,
            constraints: data.constraints.clone(),
        })
    }

    /// Source loads and Dirichlet values at time `t`.
    pub fn step_data(
        &self,
        params: &ProblemParams<T>,
        sources: &SourceSet<T>,
        boundary: &BoundaryData<T>,
        t: T,
    ) -> Result<StepData<T>, AssemblyError> {
        Ok(StepData {
            t,
            loads: self.source_loads(params, sources, t)?,
            constraints: self.constraints(boundary, t),
        })
    }

    fn source_loads(&self, params: &ProblemParams<T>, sources: &SourceSet<T>, t: T) -> Result<Vec<T>, AssemblyError> {
        let sp = &self.spaces;
        let l = &self.layout;
        let (s, alpha) = (params.s, params.alpha);
        let mut rhs = vec![T::zero(); l.total()];
        if let Some(f) = &sources.momentum {
            let fv = forms::load_vector(&sp.velocity, degree::SOURCE, at(f, t))?;
            add_into(&mut rhs[l.u.clone()], &fv, T::one());
        }
        if let Some(g) = &sources.induction {
            let gv = forms::load_vector(&sp.magnetic, degree::SOURCE, at(g, t))?;
            add_into(&mut rhs[l.b.clone()], &gv, alpha);
        }
        if let Some(ohm_src) = &sources.ohm {
            let jv = forms::load_vector(&sp.electric, degree::SOURCE, at(&ohm_src.current, t))?;
            let bv = forms::load_curl_vector(&sp.electric, degree::SOURCE, at(&ohm_src.magnetic, t))?;
            add_into(&mut rhs[l.e.clone()], &jv, s);
            add_into(&mut rhs[l.e.clone()], &bv, -alpha);
        }
        Ok(rhs)
    }

    /// Operator and right-hand side before boundary elimination.
    pub fn assemble_unconstrained(
        &self,
        inputs: &StepInputs<'_, T>,
        params: &ProblemParams<T>,
        sources: &SourceSet<T>,
    ) -> Result<(CsrMatrix<T>, Vec<T>), AssemblyError> {
        let loads = self.source_loads(params, sources, inputs.t)?;
        self.assemble_unconstrained_from(inputs, params, &loads)
    }

    fn assemble_unconstrained_from(
        &self,
        inputs: &StepInputs<'_, T>,
        params: &ProblemParams<T>,
        loads: &[T],
    ) -> Result<(CsrMatrix<T>, Vec<T>), AssemblyError> {
        let sp = &self.spaces;
        let k = inputs.k;
        if !(k > T::zero()) {
            return Err(AssemblyError::InvalidStep);
        }
        let (s, alpha) = (params.s, params.alpha);
        let lag = Some(inputs.magnetic_lag);
        let conv = forms::convection_with(Some(&self.pattern_uu), inputs.advector)?;
        let drag = forms::coupling_with(Some(&self.pattern_uu), sp, CouplingPattern::MagneticDrag, lag)?;
        let lorentz = forms::coupling_with(Some(&self.pattern_ue), sp, CouplingPattern::ElectricLorentz, lag)?;
        let ohm = forms::coupling_with(Some(&self.pattern_eu), sp, CouplingPattern::OhmAdvection, lag)?;

        let a_uu = CsrMatrix::linear_combination(&[
            (T::one() / k, &self.mass_u),
            (T::one(), &conv),
            (T::one() / params.re, &self.stiffness),
            (s, &drag),
        ])?;
        let a_ue = lorentz.scaled(-s);
        let a_bb = self.mass_b.scaled(alpha / k);
        let a_be = self.curl.scaled(alpha);
        let a_eu = ohm.scaled(s);
        let a_eb = self.curl_t.scaled(-alpha);
        let a_ee = self.mass_e.scaled(s);
        let l = &self.layout;
        let n = l.total();
        let matrix = CsrMatrix::from_blocks(
            n,
            n,
            &[
                (l.u.start, l.u.start, &a_uu),
                (l.u.start, l.e.start, &a_ue),
                (l.u.start, l.p.start, &self.div_t),
                (l.b.start, l.b.start, &a_bb),
                (l.b.start, l.e.start, &a_be),
                (l.e.start, l.u.start, &a_eu),
                (l.e.start, l.b.start, &a_eb),
                (l.e.start, l.e.start, &a_ee),
                (l.p.start, l.u.start, &self.div),
                (l.p.start, l.p.start, &self.zero_p),
                (l.p.start, l.lambda, &self.mean_col),
                (l.lambda, l.p.start, &self.mean_row),
                (l.lambda, l.lambda, &self.zero_l),
            ],
        );

        let mut rhs = loads.to_vec();
        let mu = self.mass_u.spmv(inputs.u_prev.coeffs())?;
        add_into(&mut rhs[l.u.clone()], &mu, T::one() / k);
        let mb = self.mass_b.spmv(inputs.b_prev.coeffs())?;
        add_into(&mut rhs[l.b.clone()], &mb, alpha / k);
        Ok((matrix, rhs))
    }

    /// Global `(index, value)` Dirichlet pairs at time `t`.
    pub fn constraints(&self, boundary: &BoundaryData<T>, t: T) -> Vec<(usize, T)> {
        let l = &self.layout;
        let mut out = Vec::new();
        let mut push = |space: &FeSpace<T>, data: &Option<VectorFn<T>>, offset: usize| match data {
            Some(f) => out.extend(space.boundary_values(at(f, t)).into_iter().map(|(d, v)| (offset + d, v))),
            None => out.extend(space.boundary_dofs().iter().map(|d| (offset + d, T::zero()))),
        };
        push(&self.spaces.velocity, &boundary.velocity, l.u.start);
        push(&self.spaces.magnetic, &boundary.magnetic, l.b.start);
        push(&self.spaces.electric, &boundary.electric, l.e.start);
        out
    }
}

fn at<T: Real>(f: &VectorFn<T>, t: T) -> impl Fn(crate::vec3::Vec3<T>) -> crate::vec3::Vec3<T> + '_ {
    move |x| f(t, x)
}

fn add_into<T: Real>(dst: &mut [T], src: &[T], scale: T) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += scale * *s);
}

/// Symmetric elimination of Dirichlet values with right-hand-side lifting.
/// Constrained rows and columns become zero apart from a unit diagonal; the
/// sparsity pattern is left untouched.
pub fn apply_constraints<T: Real>(matrix: &mut CsrMatrix<T>, rhs: &mut [T], constraints: &[(usize, T)]) {
    let n = matrix.nrows();
    let mut value: Vec<Option<T>> = vec![None; n];
    for &(d, v) in constraints {
        value[d] = Some(v);
    }
    let rp = matrix.row_ptr().to_vec();
    let ci = matrix.col_idx().to_vec();
    let vals = matrix.values_mut();
    for i in 0..n {
        let row_fixed = value[i].is_some();
        for k in rp[i]..rp[i + 1] {
            let j = ci[k];
            if row_fixed {
                vals[k] = if j == i { T::one() } else { T::zero() };
            } else if let Some(g) = value[j] {
                rhs[i] -= vals[k] * g;
                vals[k] = T::zero();
            }
        }
    }
    for &(d, v) in constraints {
        rhs[d] = v;
    }
}

/// One-shot assembly without operator caching.
pub fn assemble_step_system<T: Real>(
    spaces: &MhdSpaces<T>,
    inputs: &StepInputs<'_, T>,
    params: &ProblemParams<T>,
    sources: &SourceSet<T>,
    boundary: &BoundaryData<T>,
) -> Result<BlockSystem<T>, AssemblyError> {
    StepOperators::new(spaces)?.assemble(inputs, params, sources, boundary)
}
