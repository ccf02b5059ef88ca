//! Command-line front end.
//!
//! Exit codes: 0 success, 1 error, 2 success with warnings (a fixed point
//! missing or on the existence boundary, a failed invariance verdict).

pub mod commands;
pub mod output;
pub mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::integrate::{IntegratorSpec, Method};
use crate::manifolds::ManifoldId;
pub use commands::Outcome;
pub use output::Format;
use scenario::{Plane, PointLabel, Scenario};

#[derive(Debug, Parser)]
#[command(name = "armdyn", version, about = "Fixed points, stability, invariant surfaces and normal forms of a torqued two-link arm")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Link mass (kg).
    #[arg(long, global = true)]
    pub m: Option<f64>,
    /// Link length (m).
    #[arg(long = "L", global = true)]
    pub length: Option<f64>,
    /// Gravitational acceleration (m/s²).
    #[arg(long, global = true)]
    pub g: Option<f64>,
    /// Constant torque at the shoulder (N·m).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta1: Option<f64>,
    /// Constant torque at the elbow (N·m).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta2: Option<f64>,
    /// Scenario file (TOML), or any output file of this tool.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output path; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Eigenvalue zero threshold (1/s).
    #[arg(long, global = true)]
    pub tol_zero: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct IntegratorArgs {
    /// Implicit-midpoint step (s).
    #[arg(long, conflicts_with = "tolerance")]
    pub step: Option<f64>,
    /// Switch to the adaptive explicit method with this tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
}

impl IntegratorArgs {
    fn apply(&self, spec: &mut IntegratorSpec) {
        if let Some(step) = self.step {
            spec.method = Method::ImplicitMidpoint { step };
        }
        if let Some(tolerance) = self.tolerance {
            spec.method = Method::ExplicitAdaptive { tolerance };
        }
        if let Some(n) = self.max_steps {
            spec.max_steps = n;
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// The four equilibria with energies, spectra and classifications.
    FixedPoints,
    /// Spectra and classifications, plus the approach to the existence
    /// boundary.
    Classify,
    /// Integrate one trajectory.
    Simulate {
        /// θ1,p1,θ2,p2
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        initial: Option<Vec<f64>>,
        #[arg(long)]
        horizon: Option<f64>,
        #[command(flatten)]
        integrator: IntegratorArgs,
    },
    /// Families of orbits on a surface or in a normal-form plane.
    Portrait {
        #[arg(long, value_enum)]
        plane: Option<Plane>,
        #[arg(long, value_enum)]
        point: Option<PointLabel>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[command(flatten)]
        integrator: IntegratorArgs,
    },
    /// Does the full flow stay on M1 / M2?
    ManifoldCheck {
        #[arg(long, value_enum, num_args = 1..)]
        manifold: Option<Vec<ManifoldId>>,
        /// Starting angles θ1 (rad), p1 = 0.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        amplitude: Option<Vec<f64>>,
        #[arg(long)]
        count: Option<usize>,
        /// Horizon in units of 1/ω0.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long = "check-tol")]
        check_tol: Option<f64>,
        #[command(flatten)]
        integrator: IntegratorArgs,
    },
    /// Quadratic normal form at a saddle-center.
    NormalForm {
        #[arg(long, value_enum)]
        point: Option<PointLabel>,
        /// θ1,p1,θ2,p2 whose energy split is reported.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        state: Option<Vec<f64>>,
    },
    /// Existence and classification over a torque grid.
    Sweep {
        /// β1 range in units of mgL.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        beta1_range: Option<Vec<f64>>,
        /// β2 range in units of mgL.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        beta2_range: Option<Vec<f64>>,
        /// Grid points along β1 and β2.
        #[arg(long, value_delimiter = ',')]
        resolution: Option<Vec<usize>>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FixedPoints => "fixed-points",
            Command::Classify => "classify",
            Command::Simulate { .. } => "simulate",
            Command::Portrait { .. } => "portrait",
            Command::ManifoldCheck { .. } => "manifold-check",
            Command::NormalForm { .. } => "normal-form",
            Command::Sweep { .. } => "sweep",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::FixedPoints | Command::Classify | Command::NormalForm { .. } => Format::Json,
            _ => Format::Csv,
        }
    }
}

fn exact<T: Copy, const N: usize>(flag: &str, v: &[T]) -> Result<[T; N]> {
    v.try_into()
        .map_err(|_| Error::Config(format!("--{flag} takes {N} comma-separated values, got {}", v.len())))
}

/// Loads the scenario (file first, then flags) and resolves defaults.
pub fn build_scenario(global: &GlobalArgs, command: &Command) -> Result<Scenario> {
    let mut s = match &global.config {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    if let Some(v) = global.m {
        s.arm.m = v;
    }
    if let Some(v) = global.length {
        s.arm.length = v;
    }
    if let Some(v) = global.g {
        s.arm.g = v;
    }
    if let Some(v) = global.beta1 {
        s.torques.beta1 = v;
    }
    if let Some(v) = global.beta2 {
        s.torques.beta2 = v;
    }
    if let Some(v) = global.tol_zero {
        s.analysis.tol_zero = Some(v);
    }
    match command {
        Command::FixedPoints | Command::Classify => {}
        Command::Simulate { initial, horizon, integrator } => {
            if let Some(v) = initial {
                s.simulate.initial = exact("initial", v)?;
            }
            if let Some(v) = horizon {
                s.simulate.horizon = *v;
            }
            integrator.apply(&mut s.integrator);
        }
        Command::Portrait { plane, point, resolution, amplitude, horizon, integrator } => {
            let p = &mut s.portrait;
            if let Some(v) = plane {
                p.plane = *v;
            }
            if let Some(v) = point {
                p.point = *v;
            }
            if let Some(v) = resolution {
                p.resolution = *v;
            }
            if let Some(v) = amplitude {
                p.amplitude = *v;
            }
            if let Some(v) = horizon {
                p.horizon = *v;
            }
            integrator.apply(&mut s.integrator);
        }
        Command::ManifoldCheck { manifold, amplitude, count, horizon, check_tol, integrator } => {
            let mc = &mut s.manifold_check;
            if let Some(v) = manifold {
                mc.manifolds = v.clone();
            }
            if let Some(v) = amplitude {
                mc.amplitudes = v.clone();
            }
            if let Some(v) = count {
                mc.count = *v;
                mc.amplitudes.clear();
            }
            if let Some(v) = horizon {
                mc.horizon = *v;
            }
            if let Some(v) = check_tol {
                mc.tolerance = *v;
            }
            integrator.apply(&mut s.integrator);
        }
        Command::NormalForm { point, state } => {
            if let Some(v) = point {
                s.normal_form.point = *v;
            }
            if let Some(v) = state {
                s.normal_form.state = Some(exact("state", v)?);
            }
        }
        Command::Sweep { beta1_range, beta2_range, resolution } => {
            if let Some(v) = beta1_range {
                s.sweep.beta1_range = exact("beta1-range", v)?;
            }
            if let Some(v) = beta2_range {
                s.sweep.beta2_range = exact("beta2-range", v)?;
            }
            if let Some(v) = resolution {
                s.sweep.resolution = exact("resolution", v)?;
            }
        }
    }
    s.resolve()
}

/// Runs `command` on a resolved scenario.
pub fn execute(command: &Command, scenario: &Scenario, format: Option<Format>) -> Result<Outcome> {
    let format = format.unwrap_or_else(|| command.default_format());
    match command {
        Command::FixedPoints => commands::fixed_points(scenario, format),
        Command::Classify => commands::classify_points(scenario, format),
        Command::Simulate { .. } => commands::simulate(scenario, format),
        Command::Portrait { .. } => commands::portrait(scenario, format),
        Command::ManifoldCheck { .. } => commands::manifold_check(scenario, format),
        Command::NormalForm { .. } => commands::normal_form(scenario, format),
        Command::Sweep { .. } => commands::sweep(scenario, format),
    }
}

/// Parses, runs and writes; returns the process exit code.
pub fn run(cli: &Cli) -> Result<u8> {
    let scenario = build_scenario(&cli.global, &cli.command)?;
    let outcome = execute(&cli.command, &scenario, cli.global.format)?;
    match &cli.global.out {
        Some(path) => std::fs::write(path, &outcome.body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(outcome.body.as_bytes())?;
        }
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(f) = &outcome.failure {
        eprintln!("error: {f}");
        return Ok(1);
    }
    Ok(if outcome.warnings.is_empty() { 0 } else { 2 })
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors exit with 1; code 2 is reserved for warnings
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn main_entry() -> ExitCode {
    ExitCode::from(run_from(std::env::args_os()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn run_in(dir: &Path, args: &[&str]) -> (u8, String) {
        let out = dir.join("out.txt");
        let _ = std::fs::remove_file(&out);
        let mut full = vec!["armdyn"];
        full.extend_from_slice(args);
        let out_arg = out.to_str().unwrap().to_string();
        full.extend(["--out", &out_arg]);
        let code = run_from(full);
        (code, std::fs::read_to_string(&out).unwrap_or_default())
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_in(dir.path(), &["fixed-points"]).0, 0);
        assert_eq!(run_in(dir.path(), &["fixed-points", "--g", "9.81", "--beta1", "25"]).0, 2);
        assert_eq!(run_in(dir.path(), &["fixed-points", "--beta2", "1"]).0, 2);
        assert_eq!(run_in(dir.path(), &["fixed-points", "--m", "0"]).0, 1);
        assert_eq!(run_in(dir.path(), &["bogus"]).0, 1);
        assert_eq!(run_in(dir.path(), &["normal-form", "--point", "P1"]).0, 0);
        assert_eq!(run_in(dir.path(), &["normal-form", "--point", "P4"]).0, 1);
        assert_eq!(run_in(dir.path(), &["sweep", "--resolution", "3"]).0, 1);
        assert_eq!(run_in(dir.path(), &["simulate", "--horizon", "1", "--max-steps", "10"]).0, 1);
        let (code, text) = run_in(dir.path(), &["manifold-check", "--amplitude", "0.3", "--horizon", "2", "--manifold", "M1"]);
        assert_eq!(code, 2);
        assert!(text.contains("# verdict: fail"));
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("s.toml");
        std::fs::write(&cfg, "[arm]\ng = 9.81\n[torques]\nbeta1 = 1.0\n").unwrap();
        let cli = Cli::try_parse_from(["armdyn", "fixed-points", "--config", cfg.to_str().unwrap(), "--beta1", "2"]).unwrap();
        let s = build_scenario(&cli.global, &cli.command).unwrap();
        assert_eq!((s.arm.g, s.torques.beta1), (9.81, 2.0));
        assert_eq!(s.tol_zero(), 1e-7 * 9.81f64.sqrt());
    }

    #[test]
    fn negative_values_parse() {
        let cli = Cli::try_parse_from(["armdyn", "simulate", "--beta2", "-0.5", "--initial", "-0.1,0,0.2,-1"]).unwrap();
        let s = build_scenario(&cli.global, &cli.command).unwrap();
        assert_eq!(s.torques.beta2, -0.5);
        assert_eq!(s.simulate.initial, [-0.1, 0.0, 0.2, -1.0]);
    }

    #[test]
    fn echo_reproduces_every_command() {
        let dir = tempfile::tempdir().unwrap();
        let cases: [&[&str]; 7] = [
            &["fixed-points", "--beta1", "0.7", "--beta2", "-0.2"],
            &["classify", "--g", "2", "--format", "csv"],
            &["simulate", "--horizon", "0.3", "--tolerance", "1e-9"],
            &["portrait", "--plane", "manifold-M2", "--horizon", "1"],
            &["manifold-check", "--count", "2", "--horizon", "1", "--step", "0.01"],
            &["normal-form", "--point", "P2", "--state", "0.01,0,3.1,0"],
            &["sweep", "--resolution", "4,3", "--beta1-range", "-1,1"],
        ];
        for args in cases {
            let (_, first) = run_in(dir.path(), args);
            let echo = dir.path().join("echo.txt");
            std::fs::write(&echo, &first).unwrap();
            let format = if first.starts_with('{') { "json" } else { "csv" };
            let (_, second) = run_in(dir.path(), &[args[0], "--config", echo.to_str().unwrap(), "--format", format]);
            assert!(!first.is_empty());
            assert_eq!(first, second, "{args:?}");
        }
    }
}
