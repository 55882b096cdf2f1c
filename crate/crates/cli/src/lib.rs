//! Command-line front end: argument parsing, validation and report writing.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use annulus_energy::closedform::{self, OracleReport};
use annulus_energy::energy::EnergyBreakdown;
use annulus_energy::harmonic::capacity_modulus;
use annulus_energy::minimize::{self, CurvePoint};
use annulus_energy::{HopfFit, LogPolarGrid, MinimizeOptions, TargetDomain};

pub mod json;
pub mod verify;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_VERIFY_FAILED: u8 = 3;

const MAX_NS: usize = 4096;
const MAX_NTHETA: usize = 8192;

#[derive(Debug, Parser)]
#[command(name = "annulus-energy", version, about = "Energy-minimal mappings between annuli")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the energy for one source modulus and write a JSON report
    Minimize(ProblemArgs),
    /// Sweep a range of source moduli and tabulate the minimum energies
    Curve(CurveArgs),
    /// Print the closed-form reference values for (tau, R*)
    Oracle(OracleArgs),
    /// Conformal modulus of a (possibly sheared) target annulus
    Modulus(ModulusArgs),
    /// Run the property battery and print a pass/fail table
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Grid rows along s
    #[arg(long)]
    pub ns: Option<usize>,
    /// Grid columns along theta (even)
    #[arg(long)]
    pub ntheta: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Source modulus (for `curve`, a range `a:b:n`)
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<String>,
    /// Outer radius of the target annulus
    #[arg(long, allow_negative_numbers = true)]
    pub rstar: Option<f64>,
    /// Shear of the target, w -> w + delta conj(w)
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Stop once the projected gradient norm is below grad_tol * (1 + E)
    #[arg(long, allow_negative_numbers = true)]
    pub grad_tol: Option<f64>,
    /// Iteration cap for the optimizer
    #[arg(long, allow_negative_numbers = true)]
    pub max_iter: Option<i64>,
    /// JSON run configuration; explicit flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Points minimized concurrently
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Source modulus
    #[arg(long, allow_negative_numbers = true)]
    pub tau: f64,
    /// Outer radius of the target annulus
    #[arg(long, allow_negative_numbers = true, default_value_t = 2.0)]
    pub rstar: f64,
    /// Output file (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModulusArgs {
    /// Outer radius of the target annulus
    #[arg(long, allow_negative_numbers = true, default_value_t = 2.0)]
    pub rstar: f64,
    /// Shear of the target, w -> w + delta conj(w)
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub delta: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Output file (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Outer radius of the target annulus
    #[arg(long, allow_negative_numbers = true, default_value_t = 2.0)]
    pub rstar: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Run only these checks (comma separated or repeated)
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Stop once the projected gradient norm is below grad_tol * (1 + E)
    #[arg(long, allow_negative_numbers = true)]
    pub grad_tol: Option<f64>,
    /// Iteration cap for the optimizer
    #[arg(long, allow_negative_numbers = true)]
    pub max_iter: Option<i64>,
}

/// Invalid user input; reported on one line with exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// `tau` in a run configuration: one value or an `a:b:n` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauSpec {
    Value(f64),
    Range(String),
}

/// Run configuration file; every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tau: Option<TauSpec>,
    pub rstar: Option<f64>,
    pub delta: Option<f64>,
    pub ns: Option<usize>,
    pub ntheta: Option<usize>,
    pub grad_tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Fully validated parameters shared by `minimize` and `curve`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub rstar: f64,
    pub delta: f64,
    pub ns: usize,
    pub ntheta: usize,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Resolved {
    pub fn target(&self) -> TargetDomain {
        TargetDomain::new(self.rstar, self.delta).expect("validated target")
    }

    pub fn options(&self) -> MinimizeOptions {
        MinimizeOptions { max_iter: self.max_iter, grad_tol: self.grad_tol }
    }
}

pub fn validate_tau(tau: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(usage("tau must be positive"));
    }
    Ok(tau)
}

fn validate_target(rstar: f64, delta: f64) -> Result<()> {
    if !(rstar.is_finite() && rstar > 1.0) {
        return Err(usage("rstar must exceed 1"));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(usage("delta must lie in [0, 1)"));
    }
    Ok(())
}

pub fn validate_grid(ns: usize, ntheta: usize) -> Result<()> {
    if !(4..=MAX_NS).contains(&ns) {
        return Err(usage(format!("ns must lie in [4, {MAX_NS}]")));
    }
    if !(8..=MAX_NTHETA).contains(&ntheta) || ntheta % 2 != 0 {
        return Err(usage(format!("ntheta must be even and lie in [8, {MAX_NTHETA}]")));
    }
    Ok(())
}

fn validate_solver(grad_tol: f64, max_iter: Option<i64>) -> Result<usize> {
    if !(grad_tol.is_finite() && grad_tol > 0.0) {
        return Err(usage("grad-tol must be positive"));
    }
    match max_iter {
        Some(m) if m < 1 => Err(usage("max-iter must be at least 1")),
        Some(m) => Ok(m as usize),
        None => Ok(MinimizeOptions::default().max_iter),
    }
}

/// Parses `a:b:n` (n equally spaced points, both ends included) or a single value.
pub fn parse_tau_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(format!("invalid tau '{spec}'")));
    let taus = match parts.as_slice() {
        [v] => vec![num(v)?],
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| usage(format!("invalid point count in '{spec}'")))?;
            match n {
                0 => return Err(usage("tau range needs at least one point")),
                1 => vec![a],
                _ => {
                    if b <= a {
                        return Err(usage("tau range must be increasing"));
                    }
                    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
                }
            }
        }
        _ => return Err(usage(format!("tau range must look like a:b:n (got '{spec}')"))),
    };
    for &t in &taus {
        validate_tau(t)?;
    }
    Ok(taus)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

/// Merges flags over the config file and validates. Returns the tau text and parameters.
pub fn resolve(args: &ProblemArgs) -> Result<(Option<String>, Resolved)> {
    let cfg = load_config(args.config.as_deref())?;
    let tau = args.tau.clone().or(match cfg.tau {
        Some(TauSpec::Value(v)) => Some(v.to_string()),
        Some(TauSpec::Range(r)) => Some(r),
        None => None,
    });
    let defaults = MinimizeOptions::default();
    let rstar = args.rstar.or(cfg.rstar).unwrap_or(2.0);
    let delta = args.delta.or(cfg.delta).unwrap_or(0.0);
    let ns = args.grid.ns.or(cfg.ns).unwrap_or(96);
    let ntheta = args.grid.ntheta.or(cfg.ntheta).unwrap_or(192);
    let grad_tol = args.grad_tol.or(cfg.grad_tol).unwrap_or(defaults.grad_tol);
    let max_iter = args.max_iter.or(cfg.max_iter.map(|m| m as i64));
    validate_target(rstar, delta)?;
    validate_grid(ns, ntheta)?;
    let max_iter = validate_solver(grad_tol, max_iter)?;
    Ok((tau, Resolved { rstar, delta, ns, ntheta, grad_tol, max_iter }))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundChecks {
    /// `2 |target|`
    pub lower: f64,
    /// `(Mod/tau + tau/Mod) |target|`
    pub upper: f64,
    pub appendix: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub appendix_ok: bool,
}

/// Slack on the bound checks in reports.
pub const BOUND_SLACK: f64 = 0.005;

pub fn bound_checks(tau: f64, target: &TargetDomain, modulus: f64, energy: f64) -> BoundChecks {
    let area = target.area();
    let lower = 2.0 * area;
    let upper = closedform::upper_energy_bound(tau, modulus, area);
    // boundary separation of the unsheared target over the source diameter
    let appendix = closedform::appendix_energy_bound(target.rstar() - 1.0, 2.0, 2.0 * tau.exp());
    BoundChecks {
        lower,
        upper,
        appendix,
        lower_ok: energy >= lower * (1.0 - BOUND_SLACK),
        upper_ok: energy <= upper * (1.0 + BOUND_SLACK),
        appendix_ok: energy > appendix,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeReport {
    pub tau: f64,
    pub config: Resolved,
    pub energy: EnergyBreakdown,
    pub hopf: HopfFit,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub target_modulus: f64,
    pub contact_extent: f64,
    pub bounds: BoundChecks,
    pub oracle_energy: Option<f64>,
    pub oracle_hopf_c: Option<f64>,
}

pub fn cmd_minimize(args: &ProblemArgs) -> Result<u8> {
    let (tau, cfg) = resolve(args)?;
    let tau_text = tau.ok_or_else(|| usage("tau is required"))?;
    let tau = validate_tau(tau_text.trim().parse::<f64>().map_err(|_| usage(format!("invalid tau '{tau_text}'")))?)?;
    let target = cfg.target();
    let grid = LogPolarGrid::new(tau, cfg.ns, cfg.ntheta)?;
    let r = minimize::minimize(&grid, &target, &cfg.options())?;
    let text = match args.format {
        Format::Json => {
            let report = MinimizeReport {
                tau,
                config: cfg,
                energy: r.energy,
                hopf: r.hopf,
                converged: r.converged,
                iterations: r.iterations,
                grad_norm: r.grad_norm,
                target_modulus: r.target_modulus,
                contact_extent: r.state.inner_contact_extent(),
                bounds: bound_checks(tau, &target, r.target_modulus, r.energy.total),
                oracle_energy: target.is_circular().then(|| closedform::min_energy_annulus(tau, cfg.rstar).ok()).flatten(),
                oracle_hopf_c: minimize::hopf_oracle(tau, &target),
            };
            json::to_string(&report)?
        }
        Format::Csv => {
            let mut buf = Vec::new();
            r.field.write_csv(&mut buf)?;
            String::from_utf8(buf)?
        }
    };
    write_output(args.out.as_deref(), &text)?;
    Ok(if r.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    #[serde(flatten)]
    pub point: CurvePoint,
    pub oracle: Option<f64>,
}

pub const CURVE_COLUMNS: [&str; 10] = [
    "tau",
    "total",
    "normal",
    "tangential",
    "jacobian_integral",
    "hopf_c",
    "hopf_residual",
    "converged",
    "iterations",
    "oracle",
];

pub fn curve_csv(rows: &[CurveRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CURVE_COLUMNS)?;
    for r in rows {
        let p = &r.point;
        w.write_record([
            json::fmt_f64(p.tau),
            json::fmt_f64(p.energy.total),
            json::fmt_f64(p.energy.normal),
            json::fmt_f64(p.energy.tangential),
            json::fmt_f64(p.energy.jacobian_integral),
            json::fmt_f64(p.hopf.c),
            json::fmt_f64(p.hopf.residual),
            p.converged.to_string(),
            p.iterations.to_string(),
            r.oracle.map(json::fmt_f64).unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn cmd_curve(args: &CurveArgs) -> Result<u8> {
    let (tau, cfg) = resolve(&args.problem)?;
    let taus = parse_tau_range(&tau.ok_or_else(|| usage("tau range is required"))?)?;
    if args.jobs == 0 {
        return Err(usage("jobs must be at least 1"));
    }
    let target = cfg.target();
    let points = minimize::energy_curve(&taus, &target, cfg.ns, cfg.ntheta, &cfg.options(), args.jobs)?;
    let rows: Vec<CurveRow> = points
        .into_iter()
        .map(|point| CurveRow {
            oracle: target.is_circular().then(|| closedform::min_energy_annulus(point.tau, cfg.rstar).ok()).flatten(),
            point,
        })
        .collect();
    let text = match args.problem.format {
        Format::Csv => curve_csv(&rows)?,
        Format::Json => json::to_string(&rows)?,
    };
    write_output(args.problem.out.as_deref(), &text)?;
    Ok(if rows.iter().all(|r| r.point.converged) { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<u8> {
    validate_tau(args.tau)?;
    validate_target(args.rstar, 0.0)?;
    let report: OracleReport = closedform::oracle_report(args.tau, args.rstar)?;
    write_output(args.out.as_deref(), &json::to_string(&report)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub rstar: f64,
    pub delta: f64,
    pub ns: usize,
    pub ntheta: usize,
    pub modulus: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

pub fn cmd_modulus(args: &ModulusArgs) -> Result<u8> {
    validate_target(args.rstar, args.delta)?;
    let ns = args.grid.ns.unwrap_or(96);
    let ntheta = args.grid.ntheta.unwrap_or(192);
    validate_grid(ns, ntheta)?;
    let target = TargetDomain::new(args.rstar, args.delta)?;
    let modulus = capacity_modulus(&target, ns, ntheta)?;
    let (lower_bound, upper_bound) = target.modulus_bounds();
    let report = ModulusReport { rstar: args.rstar, delta: args.delta, ns, ntheta, modulus, lower_bound, upper_bound };
    write_output(args.out.as_deref(), &json::to_string(&report)?)?;
    Ok(EXIT_OK)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<u8> {
    validate_target(args.rstar, 0.0)?;
    let ns = args.grid.ns.unwrap_or(96);
    let ntheta = args.grid.ntheta.unwrap_or(192);
    validate_grid(ns, ntheta)?;
    let grad_tol = args.grad_tol.unwrap_or(MinimizeOptions::default().grad_tol);
    let max_iter = validate_solver(grad_tol, args.max_iter)?;
    for name in &args.only {
        if !verify::CHECKS.contains(&name.as_str()) {
            return Err(usage(format!("unknown check '{name}' (known: {})", verify::CHECKS.join(", "))));
        }
    }
    let settings = verify::Settings {
        rstar: args.rstar,
        ns,
        ntheta,
        opts: MinimizeOptions { max_iter, grad_tol },
    };
    let checks = verify::run(&settings, &args.only)?;
    print!("{}", verify::render(&checks));
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        println!("failed: {}", failed.join(", "));
        Ok(EXIT_VERIFY_FAILED)
    }
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Minimize(a) => cmd_minimize(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Modulus(a) => cmd_modulus(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_syntax() {
        assert_eq!(parse_tau_range("0.5:1.5:3").unwrap(), vec![0.5, 1.0, 1.5]);
        assert_eq!(parse_tau_range("1.2:1.2:1").unwrap(), vec![1.2]);
        assert_eq!(parse_tau_range("0.7").unwrap(), vec![0.7]);
        let ten = parse_tau_range("0.4:2.2:10").unwrap();
        assert_eq!(ten.len(), 10);
        assert_eq!(ten[9], 2.2);
        assert!(parse_tau_range("1:0.5:3").is_err());
        assert!(parse_tau_range("-1:0.5:3").is_err());
        assert!(parse_tau_range("1:2").is_err());
        assert!(parse_tau_range("1:2:0").is_err());
        assert!(parse_tau_range("a:2:3").is_err());
    }

    #[test]
    fn config_file_shape() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{ "tau": 1.0, "rstar": 2.0, "delta": 0.0, "ns": 32, "ntheta": 64, "grad_tol": 1e-8, "max_iter": 100 }"#,
        )
        .unwrap();
        assert_eq!(cfg.tau, Some(TauSpec::Value(1.0)));
        let cfg: RunConfig = serde_json::from_str(r#"{ "tau": "0.5:1:3" }"#).unwrap();
        assert_eq!(cfg.tau, Some(TauSpec::Range("0.5:1:3".into())));
        assert!(serde_json::from_str::<RunConfig>(r#"{ "taus": 1 }"#).is_err());
    }

    #[test]
    fn validation_messages() {
        assert_eq!(validate_tau(-1.0).unwrap_err().to_string(), "tau must be positive");
        assert!(validate_tau(0.0).is_err());
        assert!(validate_target(1.0, 0.0).is_err());
        assert!(validate_target(2.0, 1.0).is_err());
        assert!(validate_grid(96, 191).is_err());
        assert!(validate_grid(3, 16).is_err());
        assert!(validate_solver(0.0, None).is_err());
        assert!(validate_solver(1e-8, Some(0)).is_err());
    }

    #[test]
    fn csv_layout() {
        let point = CurvePoint {
            tau: 1.0,
            energy: EnergyBreakdown { total: 3.0, normal: 1.0, tangential: 2.0, jacobian_integral: 1.5 },
            hopf: HopfFit { c: -0.25, residual: 0.0, sign_consistent: true },
            converged: true,
            iterations: 7,
        };
        let text = curve_csv(&[CurveRow { point, oracle: None }]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CURVE_COLUMNS.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "1.0000000000000000e0,3.0000000000000000e0,1.0000000000000000e0,2.0000000000000000e0,1.5000000000000000e0,-2.5000000000000000e-1,0.0000000000000000e0,true,7,"
        );
    }
}
