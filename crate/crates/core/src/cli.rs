//! Command-line entry point: `solve`, `verify` and `identities`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::field::{read_profile, write_profile};
use crate::functional::{verify, VerificationReport};
use crate::greens::{l2_norm_sq_by_quadrature, omega_alpha, regular_part_by_limit, Dimension, GreenKernel, InteractionStrength};
use crate::nonlinearity::AssumptionReport;
use crate::solver::{mountain_pass, write_trace, RegularityRegime};

#[derive(Debug, Parser)]
#[command(name = "deltafield", version, about = "Ground states of the scalar field equation with a point interaction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve by mountain-pass descent and Newton refinement; writes profile, report and trace.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the `output` key of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute energy and residuals of a saved profile.
    Verify {
        #[arg(long)]
        profile: PathBuf,
        /// Defaults to `config.toml` next to the profile.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Tabulate ξ_λ and λ‖G_λ‖² in closed form against numerical evaluations.
    Identities {
        #[arg(long, value_parser = parse_dim)]
        dim: Dimension,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long)]
        lambda_min: f64,
        #[arg(long)]
        lambda_max: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
}

fn parse_dim(s: &str) -> std::result::Result<Dimension, String> {
    let n: i64 = s.parse().map_err(|e| format!("{e}"))?;
    Dimension::new(n).map_err(|e| e.to_string())
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub converged: bool,
    pub sigma: f64,
    pub m0: Option<f64>,
    pub lambda: f64,
    pub charge: f64,
    pub iterations: usize,
    pub newton_history: Vec<f64>,
    pub regime: RegularityRegime,
    pub assumptions: AssumptionReport,
    pub warnings: Vec<String>,
}

/// Parses `args` and runs the subcommand, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Solve { config, out } => solve(&config, out.as_deref()),
        Command::Verify { profile, config } => verify_profile(&profile, config.as_deref()).map(|_| EXIT_OK),
        Command::Identities { dim, alpha, lambda_min, lambda_max, steps } => {
            identities(dim, alpha, lambda_min, lambda_max, steps).map(|rows| {
                print!("{}", format_identities(&rows));
                EXIT_OK
            })
        }
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}

fn with_context<T>(r: Result<T>, what: impl FnOnce() -> String) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { .. } => e,
        other => Error::Config(format!("{}: {other}", what())),
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Runs a solve; returns 0 when the gates pass and 2 otherwise, after writing
/// `profile.csv` (+ sidecar), `report.json`, `summary.json`, `trace.csv` and
/// a copy of the configuration to the output directory.
pub fn solve(config_path: &Path, out: Option<&Path>) -> Result<i32> {
    let config = RunConfig::load(config_path)?;
    let problem = config.problem()?;
    for w in &problem.warnings {
        eprintln!("warning: {w}");
    }
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set `output` in the config".into()))?;
    with_context(std::fs::create_dir_all(&out).map_err(Error::from), || format!("creating {}", out.display()))?;
    let result = with_context(mountain_pass(&problem.spec, &problem.strength, problem.grid.clone(), &config.solver), || {
        "solver failed".into()
    })?;
    let profile = out.join("profile.csv");
    write_profile(&result.state, &profile)?;
    write_json(&out.join("report.json"), &result.report)?;
    write_trace(&out.join("trace.csv"), &result.trace)?;
    std::fs::write(out.join("config.toml"), config.to_toml())?;
    let summary = Summary {
        converged: result.converged,
        sigma: result.sigma_estimate,
        m0: result.m0_estimate,
        lambda: result.state.lambda(),
        charge: result.state.charge().re,
        iterations: result.iterations,
        newton_history: result.newton_history.clone(),
        regime: result.regime,
        assumptions: crate::nonlinearity::check_assumptions(&problem.spec, &problem.strength),
        warnings: problem.warnings.clone(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    let r = &result.report;
    println!(
        "{} sigma = {:.12e}  m0 = {}  q = {:.6e}  gradient = {:.3e}  pohozaev = {:.3e}  boundary = {:.3e}  iterations = {}",
        if result.converged { "converged" } else { "NOT converged" },
        result.sigma_estimate,
        result.m0_estimate.map_or("n/a".into(), |m| format!("{m:.12e}")),
        result.state.charge().re,
        r.gradient_norm,
        r.pohozaev_residual,
        r.boundary_residual.norm(),
        result.iterations,
    );
    println!("wrote {}", out.display());
    Ok(if result.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Verifies a saved profile against the configuration it was solved with,
/// printing the report and writing it next to the profile as `*.report.json`.
pub fn verify_profile(profile: &Path, config: Option<&Path>) -> Result<VerificationReport> {
    let config_path = config
        .map(Path::to_path_buf)
        .unwrap_or_else(|| profile.parent().unwrap_or(Path::new(".")).join("config.toml"));
    let config = RunConfig::load(&config_path)?;
    let problem = config.problem()?;
    let state = read_profile(profile)?;
    if state.grid().dim() != problem.strength.dim {
        return Err(Error::Config(format!(
            "profile is {}-dimensional but {} sets dim = {}",
            state.grid().dim().value(),
            config_path.display(),
            problem.strength.dim.value()
        )));
    }
    let report = verify(&state, &problem.spec, &problem.strength)?;
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    std::fs::write(profile.with_extension("report.json"), text)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityRow {
    pub lambda: f64,
    pub xi: f64,
    pub xi_numeric: f64,
    pub xi_delta: f64,
    pub lambda_norm_sq: f64,
    pub lambda_norm_sq_numeric: f64,
    pub norm_delta: f64,
    pub alpha_plus_xi: f64,
    pub threshold: bool,
}

fn delta(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

/// Geometric sweep of `steps` values over `[lambda_min, lambda_max]`, with
/// `ω_α` inserted when it lies in range.
pub fn identities(dim: Dimension, alpha: f64, lambda_min: f64, lambda_max: f64, steps: usize) -> Result<Vec<IdentityRow>> {
    if !(lambda_min > 0.0 && lambda_max >= lambda_min && lambda_max.is_finite()) {
        return Err(Error::Domain(format!("need 0 < lambda-min <= lambda-max, got [{lambda_min}, {lambda_max}]")));
    }
    let steps = steps.max(1);
    let ratio = lambda_max / lambda_min;
    let mut lambdas: Vec<f64> = (0..steps)
        .map(|k| if steps == 1 { lambda_min } else { lambda_min * ratio.powf(k as f64 / (steps - 1) as f64) })
        .collect();
    let strength = InteractionStrength::new(alpha, dim);
    let wa = omega_alpha(&strength);
    if wa >= lambda_min && wa <= lambda_max && !lambdas.contains(&wa) {
        lambdas.push(wa);
        lambdas.sort_by(f64::total_cmp);
    }
    lambdas
        .into_iter()
        .map(|lambda| {
            let kernel = GreenKernel::new(dim, lambda)?;
            let xi = kernel.xi();
            let xi_numeric = -regular_part_by_limit(&kernel);
            let lambda_norm_sq = lambda * kernel.l2_norm_sq();
            let lambda_norm_sq_numeric = lambda * l2_norm_sq_by_quadrature(&kernel);
            let alpha_plus_xi = alpha + xi;
            Ok(IdentityRow {
                lambda,
                xi,
                xi_numeric,
                xi_delta: delta(xi, xi_numeric),
                lambda_norm_sq,
                lambda_norm_sq_numeric,
                norm_delta: delta(lambda_norm_sq, lambda_norm_sq_numeric),
                alpha_plus_xi,
                threshold: alpha_plus_xi.abs() <= 1e-12 * alpha.abs().max(1.0),
            })
        })
        .collect()
}

pub fn format_identities(rows: &[IdentityRow]) -> String {
    let mut s = String::from(
        "lambda,xi,xi_numeric,xi_delta,lambda_norm_sq,lambda_norm_sq_numeric,norm_delta,alpha_plus_xi,threshold\n",
    );
    for r in rows {
        writeln!(
            s,
            "{:.12e},{:.12e},{:.12e},{:.3e},{:.12e},{:.12e},{:.3e},{:.12e},{}",
            r.lambda,
            r.xi,
            r.xi_numeric,
            r.xi_delta,
            r.lambda_norm_sq,
            r.lambda_norm_sq_numeric,
            r.norm_delta,
            r.alpha_plus_xi,
            r.threshold
        )
        .expect("writing to a String");
    }
    s
}
