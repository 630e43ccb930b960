//! Times manufactured-solution steps:
//! `cargo run --release --example mms_step -- <divisions> <steps> <k>`.

use std::sync::Arc;
use std::time::Instant;

use mhd_core::linalg::SolverOptions;
use mhd_core::{ExactSolution, Mesh, MhdSpaces, ProblemParams, Stepper};

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let steps: usize = std::env::args().nth(2).and_then(|a| a.parse().ok()).unwrap_or(1);
    let k: f64 = std::env::args().nth(3).and_then(|a| a.parse().ok()).unwrap_or(0.01);
    let mesh = Arc::new(Mesh::build_box(n, n, n, [1.0; 3]).expect("mesh"));
    let spaces = MhdSpaces::new(&mesh);
    let exact = ExactSolution::new(ProblemParams::default());
    let mut state = exact.interpolant(&spaces, 0.0).expect("interpolant");
    let t0 = Instant::now();
    let mut stepper = Stepper::new(
        &spaces,
        *exact.params(),
        k,
        exact.sources(),
        exact.boundary(),
        SolverOptions::default(),
    )
    .expect("stepper");
    println!("setup {:.2}s", t0.elapsed().as_secs_f64());
    let mut before: Option<mhd_core::State> = None;
    for _ in 0..steps {
        let t = Instant::now();
        let (next, diag) = match &before {
            Some(b) => {
                let start = two_step(&state, b);
                stepper.step_picard_from(&state, start, 1e-10, 30).expect("step")
            }
            None => stepper.step_picard(&state, 1e-10, 30).expect("step"),
        };
        let s = &diag.solves[0];
        println!(
            "step {:.2}s picard {} unknowns {} nnz {} solve {:.2}s residual {:e}",
            t.elapsed().as_secs_f64(),
            diag.picard_iterations,
            s.unknowns,
            s.nonzeros,
            s.seconds,
            diag.max_solve_residual()
        );
        println!("solves {:?}", diag.solves.iter().map(|s| (s.seconds, s.iterations, s.factored)).collect::<Vec<_>>());
        before = Some(std::mem::replace(&mut state, next));
    }
    profile(&spaces, &state);
}

fn two_step(prev: &mhd_core::State, before: &mhd_core::State) -> mhd_core::State {
    let mut s = prev.clone();
    for (f, g) in [(&mut s.u, &before.u), (&mut s.b, &before.b), (&mut s.e, &before.e), (&mut s.p, &before.p)] {
        f.coeffs_mut().iter_mut().zip(g.coeffs()).for_each(|(x, y)| *x = 2.0 * *x - *y);
    }
    s
}

/// Times the per-iterate assembly pieces once.
fn profile(spaces: &MhdSpaces, state: &mhd_core::State) {
    use mhd_core::assembly::{convection_with, coupling_with, AssemblyPattern, CouplingPattern};
    let time = |label: &str, f: &mut dyn FnMut()| {
        let t = Instant::now();
        f();
        println!("{label} {:.3}s", t.elapsed().as_secs_f64());
    };
    let uu = AssemblyPattern::new(&spaces.velocity, &spaces.velocity).unwrap();
    let ue = AssemblyPattern::new(&spaces.velocity, &spaces.electric).unwrap();
    let eu = AssemblyPattern::new(&spaces.electric, &spaces.velocity).unwrap();
    let lag = Some(&state.b);
    time("convection", &mut || drop(convection_with(Some(&uu), &state.u).unwrap()));
    time("drag", &mut || drop(coupling_with(Some(&uu), spaces, CouplingPattern::MagneticDrag, lag).unwrap()));
    time("lorentz", &mut || drop(coupling_with(Some(&ue), spaces, CouplingPattern::ElectricLorentz, lag).unwrap()));
    time("ohm", &mut || drop(coupling_with(Some(&eu), spaces, CouplingPattern::OhmAdvection, lag).unwrap()));
    let m = convection_with(Some(&uu), &state.u).unwrap();
    time("combination", &mut || {
        drop(mhd_core::CsrMatrix::linear_combination(&[(1.0, &m), (2.0, &m), (3.0, &m), (4.0, &m)]).unwrap())
    });
    time("energy + div", &mut || {
        let p = ProblemParams::default();
        let _ = mhd_core::analysis::energy(state, &p).unwrap();
        let _ = mhd_core::analysis::div_b(&state.b).unwrap();
    });
    time("exact errors", &mut || drop(mhd_core::analysis::exact_step_errors(state).unwrap()));
}
