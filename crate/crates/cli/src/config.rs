//! Run configuration: `key = value` lines under `[mesh]`, `[params]`,
//! `[time]`, `[scheme]`, `[solver]` and `[experiment]` headers.
//!
//! The syntax is TOML, so strings are quoted. Every key is optional; unknown
//! sections and keys are rejected. Errors carry the line they refer to.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;
use std::str::FromStr;

use mhd_core::linalg::{SolverMethod, SolverOptions};
use mhd_core::scheme::SchemeKind;
use mhd_core::ProblemParams;
use serde::Deserialize;
use toml::Spanned;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Single,
    HSweep,
    KSweep,
    Energy,
    Gauss,
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "single" => Self::Single,
            "h-sweep" => Self::HSweep,
            "k-sweep" => Self::KSweep,
            "energy" => Self::Energy,
            "gauss" => Self::Gauss,
            other => {
                return Err(format!(
                    "unknown experiment '{other}' (expected single, h-sweep, k-sweep, energy or gauss)"
                ))
            }
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Single => "single",
            Self::HSweep => "h-sweep",
            Self::KSweep => "k-sweep",
            Self::Energy => "energy",
            Self::Gauss => "gauss",
        })
    }
}

/// When the k-sweep measures against a fine-step reference instead of the
/// exact solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceMode {
    /// Only if the exact-error rates show the spatial floor.
    Auto,
    Always,
    Never,
}

impl FromStr for ReferenceMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Self::Auto),
            "always" => Ok(Self::Always),
            "never" => Ok(Self::Never),
            other => Err(format!("unknown reference mode '{other}' (expected auto, always or never)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub divisions: usize,
    pub extents: [f64; 3],
    pub params: ProblemParams,
    pub k: f64,
    pub final_time: f64,
    pub scheme: SchemeKind,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub solver: SolverOptions,
    pub experiment: ExperimentKind,
    /// Mesh levels of an h-sweep.
    pub sweep_divisions: Vec<usize>,
    /// Steps of a k-sweep, coarse to fine.
    pub sweep_steps: Vec<f64>,
    pub reference_k: f64,
    pub reference: ReferenceMode,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            divisions: 4,
            extents: [1.0; 3],
            params: ProblemParams::default(),
            k: 0.01,
            final_time: 0.08,
            scheme: SchemeKind::Picard,
            picard_tol: 1e-10,
            picard_max_iter: 30,
            solver: SolverOptions::default(),
            experiment: ExperimentKind::Single,
            sweep_divisions: vec![2, 4, 8],
            sweep_steps: vec![0.25, 0.125, 0.0625, 0.03125],
            reference_k: 1.0 / 128.0,
            reference: ReferenceMode::Auto,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn time_steps(&self) -> usize {
        (self.final_time / self.k).round() as usize
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Raw {
    mesh: Option<RawMesh>,
    params: Option<RawParams>,
    time: Option<RawTime>,
    scheme: Option<RawScheme>,
    solver: Option<RawSolver>,
    experiment: Option<RawExperiment>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    divisions: Option<Spanned<i64>>,
    extents: Option<Spanned<Vec<f64>>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawParams {
    re: Option<Spanned<f64>>,
    rm: Option<Spanned<f64>>,
    s: Option<Spanned<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTime {
    k: Option<Spanned<f64>>,
    final_time: Option<Spanned<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    kind: Option<Spanned<String>>,
    picard_tol: Option<Spanned<f64>>,
    picard_max_iter: Option<Spanned<i64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    method: Option<Spanned<String>>,
    tol: Option<Spanned<f64>>,
    reuse_iterations: Option<Spanned<i64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    kind: Option<Spanned<String>>,
    divisions: Option<Spanned<Vec<i64>>>,
    k_values: Option<Spanned<Vec<f64>>>,
    reference_k: Option<Spanned<f64>>,
    reference: Option<Spanned<String>>,
    output: Option<Spanned<String>>,
}

struct Lines<'a>(&'a str);

impl Lines<'_> {
    fn of(&self, span: Range<usize>) -> usize {
        self.0[..span.start.min(self.0.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, span: Range<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError {
            line: Some(self.of(span)),
            message: message.into(),
        })
    }

    fn positive(&self, v: &Spanned<f64>, name: &str) -> Result<f64, ConfigError> {
        let x = *v.get_ref();
        if x > 0.0 && x.is_finite() {
            Ok(x)
        } else {
            self.err(v.span(), format!("{name} must be positive and finite, got {x}"))
        }
    }

    fn count(&self, v: &Spanned<i64>, name: &str) -> Result<usize, ConfigError> {
        let x = *v.get_ref();
        if x >= 1 {
            Ok(x as usize)
        } else {
            self.err(v.span(), format!("{name} must be at least 1, got {x}"))
        }
    }

    fn parse<T: FromStr<Err = String>>(&self, v: &Spanned<String>) -> Result<T, ConfigError> {
        v.get_ref().parse().or_else(|e| self.err(v.span(), e))
    }
}

fn is_multiple(t: f64, k: f64) -> bool {
    let r = t / k;
    r >= 0.5 && (r - r.round()).abs() <= 1e-9 * r.max(1.0)
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_for(text, None)
}

/// Like [`parse_config`], with the experiment fixed by the caller. A file
/// naming a different experiment is an error.
pub fn parse_config_for(text: &str, forced: Option<ExperimentKind>) -> Result<RunConfig, ConfigError> {
    let raw: Raw = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| Lines(text).of(s)),
        message: e.message().to_string(),
    })?;
    let lines = Lines(text);
    let mut cfg = RunConfig::default();

    let mesh = raw.mesh.unwrap_or_default();
    if let Some(d) = &mesh.divisions {
        cfg.divisions = lines.count(d, "divisions")?;
    }
    if let Some(e) = &mesh.extents {
        let v = e.get_ref();
        if v.len() != 3 || !v.iter().all(|x| *x > 0.0 && x.is_finite()) {
            return lines.err(e.span(), "extents must be three positive numbers");
        }
        cfg.extents = [v[0], v[1], v[2]];
    }

    let params = raw.params.unwrap_or_default();
    let get = |v: &Option<Spanned<f64>>, name: &str, default: f64| match v {
        Some(v) => lines.positive(v, name),
        None => Ok(default),
    };
    let re = get(&params.re, "re", 1.0)?;
    let rm = get(&params.rm, "rm", 1.0)?;
    let s = get(&params.s, "s", 1.0)?;
    cfg.params = ProblemParams::new(re, rm, s).map_err(|e| ConfigError {
        line: None,
        message: e.to_string(),
    })?;

    let time = raw.time.unwrap_or_default();
    cfg.k = get(&time.k, "k", cfg.k)?;
    cfg.final_time = get(&time.final_time, "final_time", cfg.final_time)?;
    if !is_multiple(cfg.final_time, cfg.k) {
        let span = time.final_time.as_ref().or(time.k.as_ref()).map_or(0..0, |v| v.span());
        return lines.err(span, format!("final_time {} is not a whole number of steps k = {}", cfg.final_time, cfg.k));
    }

    let scheme = raw.scheme.unwrap_or_default();
    if let Some(kind) = &scheme.kind {
        cfg.scheme = lines.parse(kind)?;
    }
    cfg.picard_tol = get(&scheme.picard_tol, "picard_tol", cfg.picard_tol)?;
    if let Some(m) = &scheme.picard_max_iter {
        cfg.picard_max_iter = lines.count(m, "picard_max_iter")?;
    }

    let solver = raw.solver.unwrap_or_default();
    if let Some(m) = &solver.method {
        cfg.solver.method = lines.parse::<SolverMethod>(m)?;
    }
    cfg.solver.tolerance = get(&solver.tol, "tol", cfg.solver.tolerance)?;
    if let Some(r) = &solver.reuse_iterations {
        let x = *r.get_ref();
        if x < 0 {
            return lines.err(r.span(), format!("reuse_iterations must be nonnegative, got {x}"));
        }
        cfg.solver.reuse_iterations = x as usize;
    }

    let exp = raw.experiment.unwrap_or_default();
    if let Some(kind) = &exp.kind {
        cfg.experiment = lines.parse(kind)?;
    }
    if let Some(f) = forced {
        if let Some(kind) = exp.kind.as_ref().filter(|_| cfg.experiment != f) {
            return lines.err(kind.span(), format!("experiment kind \"{}\" conflicts with the `{f}` command", cfg.experiment));
        }
        cfg.experiment = f;
    }
    if let Some(d) = &exp.divisions {
        let v = d.get_ref();
        if v.len() < 2 || v.iter().any(|x| *x < 1) || v.windows(2).any(|w| w[1] <= w[0]) {
            return lines.err(d.span(), "divisions must list at least two increasing counts >= 1");
        }
        cfg.sweep_divisions = v.iter().map(|x| *x as usize).collect();
    }
    if let Some(ks) = &exp.k_values {
        let v = ks.get_ref();
        if v.len() < 2 || v.iter().any(|x| !(*x > 0.0)) || v.windows(2).any(|w| w[1] >= w[0]) {
            return lines.err(ks.span(), "k_values must list at least two decreasing positive steps");
        }
        cfg.sweep_steps = v.clone();
    }
    cfg.reference_k = get(&exp.reference_k, "reference_k", cfg.reference_k)?;
    if let Some(r) = &exp.reference {
        cfg.reference = lines.parse(r)?;
    }
    if let Some(o) = &exp.output {
        cfg.output = Some(PathBuf::from(o.get_ref()));
    }
    if cfg.experiment == ExperimentKind::KSweep {
        for k in &cfg.sweep_steps {
            if !is_multiple(cfg.final_time, *k) || !is_multiple(*k, cfg.reference_k) {
                let span = exp.k_values.as_ref().map_or(0..0, |v| v.span());
                return lines.err(
                    span,
                    format!("k = {k} must divide final_time and be a multiple of reference_k = {}", cfg.reference_k),
                );
            }
        }
    }
    if matches!(cfg.experiment, ExperimentKind::Energy | ExperimentKind::Gauss) && cfg.extents != [1.0; 3] {
        let span = mesh.extents.as_ref().map_or(0..0, |v| v.span());
        return lines.err(span, "energy and gauss experiments run on the unit cube");
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_fixes_the_experiment() {
        let c = parse_config_for("", Some(ExperimentKind::Energy)).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Energy);
        let e = parse_config_for("[experiment]\nkind = \"gauss\"\n", Some(ExperimentKind::Energy)).unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_config_for("[mesh]\nextents = [2.0, 1.0, 1.0]\n", Some(ExperimentKind::Gauss)).unwrap_err();
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!((c.params.re, c.params.rm, c.params.s), (1.0, 1.0, 1.0));
        assert_eq!(c.params.alpha, 1.0);
        assert_eq!(c.scheme, SchemeKind::Picard);
        assert_eq!(c.time_steps(), 8);
        assert_eq!(c.experiment, ExperimentKind::Single);
    }

    #[test]
    fn minimal_file_with_sections() {
        let c = parse_config("[mesh]\ndivisions = 2\n\n[params]\nre = 10.0\n").unwrap();
        assert_eq!(c.divisions, 2);
        assert_eq!((c.params.re, c.params.rm, c.params.s), (10.0, 1.0, 1.0));
    }

    #[test]
    fn zero_step_is_rejected_with_its_line() {
        let e = parse_config("[mesh]\ndivisions = 2\n[time]\nk = 0.0\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.message.contains("k must be positive"), "{e}");
    }

    #[test]
    fn unknown_scheme_lists_allowed_values() {
        let e = parse_config("[scheme]\nkind = \"newton\"\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.message.contains("linearized") && e.message.contains("picard"), "{e}");
    }

    #[test]
    fn unknown_keys_and_sections_are_errors() {
        let e = parse_config("[mesh]\ndivisions = 2\nrefine = 3\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("refine"), "{e}");
        let e = parse_config("[plot]\nx = 1\n").unwrap_err();
        assert!(e.message.contains("plot"), "{e}");
    }

    #[test]
    fn syntax_errors_have_lines() {
        let e = parse_config("[time]\nk = 0.01\nfinal_time = = 1\n").unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn fractional_step_count_is_rejected() {
        let e = parse_config("[time]\nk = 0.03\nfinal_time = 0.08\n").unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn sweep_lists_are_validated() {
        let c = parse_config("[experiment]\nkind = \"h-sweep\"\ndivisions = [1, 2, 4]\n").unwrap();
        assert_eq!(c.sweep_divisions, vec![1, 2, 4]);
        assert!(parse_config("[experiment]\ndivisions = [4, 2]\n").is_err());
        let c = parse_config(
            "[time]\nk = 0.25\nfinal_time = 1.0\n[experiment]\nkind = \"k-sweep\"\nk_values = [0.5, 0.25]\nreference = \"always\"\n",
        )
        .unwrap();
        assert_eq!(c.reference, ReferenceMode::Always);
        let e = parse_config("[time]\nk = 0.25\nfinal_time = 1.0\n[experiment]\nkind = \"k-sweep\"\nk_values = [0.3, 0.1]\n")
            .unwrap_err();
        assert_eq!(e.line, Some(6));
    }

    #[test]
    fn invariant_runs_need_the_unit_cube() {
        assert!(parse_config("[mesh]\nextents = [2.0, 1.0, 1.0]\n[experiment]\nkind = \"gauss\"\n").is_err());
        assert!(parse_config("[mesh]\nextents = [2.0, 1.0, 1.0]\n").is_ok());
    }

    #[test]
    fn solver_section() {
        let c = parse_config("[solver]\nmethod = \"gmres\"\ntol = 1e-9\nreuse_iterations = 0\n").unwrap();
        assert_eq!(c.solver.method, SolverMethod::Gmres);
        assert_eq!(c.solver.tolerance, 1e-9);
        assert_eq!(c.solver.reuse_iterations, 0);
        assert_eq!(parse_config("[solver]\nmethod = \"cg\"\n").unwrap_err().line, Some(2));
    }
}
