//! Whole-step behaviour: invariants, the zero state, and the manufactured solution.

use std::sync::Arc;

use mhd_core::analysis::{self, div_b_report, energy_report, starred_errors};
use mhd_core::linalg::SolverOptions;
use mhd_core::scheme::{self, SchemeKind, SourceSet, BoundaryData, State};
use mhd_core::{initial, ExactSolution, Mesh, MhdSpaces, ProblemParams, Stepper, TimeConfig};

fn spaces(n: usize) -> MhdSpaces {
    MhdSpaces::new(&Arc::new(Mesh::build_box(n, n, n, [1.0; 3]).unwrap()))
}

fn run(
    initial: State<f64>,
    time: &TimeConfig,
    sources: SourceSet<f64>,
) -> (Vec<State<f64>>, scheme::RunReport) {
    scheme::run(initial, ProblemParams::default(), time, sources, BoundaryData::default(), SolverOptions::default())
        .unwrap_or_else(|f| panic!("{f}"))
}

#[test]
fn zero_state_stays_exactly_zero() {
    let sp = spaces(2);
    for scheme in [SchemeKind::Linearized, SchemeKind::Picard] {
        let time = TimeConfig::new(0.1, 0.3, scheme).unwrap();
        let (traj, report) = run(State::zeros(&sp, 0.0), &time, SourceSet::default());
        assert_eq!(traj.len(), 4);
        for s in &traj {
            for c in [s.u.coeffs(), s.b.coeffs(), s.e.coeffs(), s.p.coeffs()] {
                assert!(c.iter().all(|v| *v == 0.0));
            }
        }
        assert_eq!(report.div_b_max(), 0.0);
    }
}

#[test]
fn interpolated_solenoidal_field_has_no_divergence() {
    let sp = spaces(3);
    let s = initial::state(&sp, 0.0);
    let d = analysis::div_b(&s.b).unwrap();
    assert!(d.max_abs <= 1e-12, "{d:?}");
    assert!(analysis::norm_l2(&s.b).unwrap() > 0.1);
}

#[test]
fn gauss_law_survives_forced_steps() {
    // nonzero momentum forcing, no induction source
    let f: mhd_core::scheme::VectorFn<f64> = Arc::new(|t, x| [(6.0 * x[1]).sin() * (1.0 + t), x[2] * x[0], 0.0]);
    let sources = SourceSet {
        momentum: Some(f),
        ..Default::default()
    };
    let sp = spaces(2);
    for scheme in [SchemeKind::Linearized, SchemeKind::Picard] {
        let time = TimeConfig::new(0.05, 0.25, scheme).unwrap();
        let (traj, report) = run(initial::state(&sp, 0.0), &time, sources.clone());
        for d in div_b_report(&traj).unwrap() {
            assert!(d.max_abs <= 1e-11, "{scheme}: {d:?}");
        }
        for s in &report.steps {
            assert!(s.diagnostics.faraday_identity.unwrap() <= 1e-10);
            assert!(s.diagnostics.divergence_residual <= 1e-9);
        }
    }
}

#[test]
fn energy_decays_without_forcing() {
    let sp = spaces(2);
    let params = ProblemParams::default();
    for scheme in [SchemeKind::Linearized, SchemeKind::Picard] {
        let time = TimeConfig::new(0.05, 0.5, scheme).unwrap();
        let (traj, _) = run(initial::state(&sp, 0.0), &time, SourceSet::default());
        let rep = energy_report(&traj, &params, 0.05, scheme).unwrap();
        let e0 = rep.initial_energy;
        assert!(e0 > 0.1);
        assert!(rep.is_nonincreasing(0.0), "{scheme}");
        assert!(rep.min_step_margin() >= -1e-9 * e0, "{scheme}: {}", rep.min_step_margin());
        assert!(rep.min_margin() >= -1e-9 * e0, "{scheme}: {}", rep.min_margin());
        // viscous and Joule losses are real: energy drops
        assert!(rep.steps.last().unwrap().energy < 0.9 * e0);
    }
}

#[test]
fn picard_iterate_solves_the_implicit_system() {
    let sp = spaces(2);
    let exact = ExactSolution::new(ProblemParams::default());
    let init = exact.interpolant(&sp, 0.0).unwrap();
    let mut st = Stepper::new(&sp, *exact.params(), 0.02, exact.sources(), exact.boundary(), SolverOptions::default()).unwrap();
    let (next, diag) = st.step_picard(&init, 1e-12, 40).unwrap();
    assert!(diag.picard_iterations >= 2);
    assert!(diag.nonlinear_residual.unwrap() <= 1e-9);
    // the history contracts
    let h = &diag.picard_history;
    assert!(h.last().unwrap() < &h[0]);
    assert!(diag.picard_contracting(), "{h:?}");
    let (lin, ldiag) = st.step_linearized(&init).unwrap();
    assert_eq!(ldiag.picard_iterations, 1);
    // both are backward Euler steps of size k; they agree to O(k) and differ
    let du: f64 = next.u.coeffs().iter().zip(lin.u.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(du > 0.0 && du < 0.05, "{du}");
}

#[test]
fn picard_limit_does_not_depend_on_the_start() {
    let sp = spaces(2);
    let exact = ExactSolution::new(ProblemParams::default());
    let s0 = exact.interpolant(&sp, 0.0).unwrap();
    let mut st = Stepper::new(&sp, *exact.params(), 0.05, exact.sources(), exact.boundary(), SolverOptions::default()).unwrap();
    let (s1, _) = st.step_picard(&s0, 1e-12, 40).unwrap();
    let (plain, d_plain) = st.step_picard(&s1, 1e-12, 40).unwrap();
    let mut start = s1.clone();
    for (f, g) in [(&mut start.u, &s0.u), (&mut start.b, &s0.b), (&mut start.e, &s0.e)] {
        f.coeffs_mut().iter_mut().zip(g.coeffs()).for_each(|(x, y)| *x = 2.0 * *x - *y);
    }
    let (extra, d_extra) = st.step_picard_from(&s1, start, 1e-12, 40).unwrap();
    assert!(d_extra.picard_iterations <= d_plain.picard_iterations);
    for (a, b) in [(&plain.u, &extra.u), (&plain.b, &extra.b), (&plain.e, &extra.e), (&plain.p, &extra.p)] {
        let diff = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let size = a.coeffs().iter().map(|x| x.abs()).fold(1.0, f64::max);
        assert!(diff <= 1e-9 * size, "{diff}");
    }
}

#[test]
fn contraction_looks_at_the_last_three_increments() {
    let diag = |h: &[f64]| scheme::StepDiagnostics {
        picard_history: h.to_vec(),
        ..Default::default()
    };
    assert!(diag(&[]).picard_contracting());
    assert!(diag(&[1.0]).picard_contracting());
    assert!(diag(&[1.0, 2.0, 0.5, 0.1, 0.01]).picard_contracting());
    assert!(!diag(&[1.0, 0.1, 0.2]).picard_contracting());
    assert!(!diag(&[1.0, 0.1, 0.1]).picard_contracting());
}

#[test]
fn picard_reports_divergence_when_capped() {
    let sp = spaces(2);
    let exact = ExactSolution::new(ProblemParams::default());
    let init = exact.interpolant(&sp, 0.0).unwrap();
    let mut st = Stepper::new(&sp, *exact.params(), 0.02, exact.sources(), exact.boundary(), SolverOptions::default()).unwrap();
    match st.step_picard(&init, 1e-14, 1) {
        Err(scheme::SchemeError::PicardDiverged { iterations, history }) => {
            assert_eq!(iterations, 1);
            assert_eq!(history.len(), 1);
        }
        other => panic!("expected a capped Picard failure, got {:?}", other.map(|(_, d)| d)),
    }
}

#[test]
fn manufactured_errors_shrink_under_refinement() {
    let exact = ExactSolution::new(ProblemParams::default());
    let time = TimeConfig::new(0.01, 0.02, SchemeKind::Picard).unwrap();
    let mut errs = Vec::new();
    for n in [2, 3] {
        let sp = spaces(n);
        let init = exact.interpolant(&sp, 0.0).unwrap();
        let (traj, report) = scheme::run(init, *exact.params(), &time, exact.sources(), exact.boundary(), SolverOptions::default())
            .unwrap_or_else(|f| panic!("{f}"));
        assert!(report.solve_residual_max() <= 1e-10);
        errs.push(starred_errors(&traj, 0.01, SchemeKind::Picard).unwrap().as_array());
    }
    for i in 0..4 {
        assert!(errs[1][i] < errs[0][i], "{errs:?}");
    }
}

#[test]
fn exact_trajectory_has_tiny_errors_only_from_interpolation() {
    // the interpolant of the exact solution is not the exact solution, but
    // its errors must shrink at least linearly with h
    let exact = ExactSolution::new(ProblemParams::default());
    let mut prev: Option<[f64; 4]> = None;
    for n in [2, 4] {
        let sp = spaces(n);
        let traj: Vec<_> = (0..3).map(|i| exact.interpolant(&sp, 0.01 * i as f64).unwrap()).collect();
        let e = starred_errors(&traj, 0.01, SchemeKind::Picard).unwrap().as_array();
        if let Some(p) = prev {
            for i in 0..4 {
                assert!((p[i] / e[i]).log2() > 0.9, "{p:?} {e:?}");
            }
        }
        prev = Some(e);
    }
}
