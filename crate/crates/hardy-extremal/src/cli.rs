//! Command-line surface. Every subcommand reads/writes JSON files through
//! the atomic writer, seeds all randomness from `--seed`, and keeps its
//! outputs bit-identical across runs with identical flags.
//!
//! Exit codes: 0 success, 1 a computation or file-content failure,
//! 2 a usage error (bad flag, bad flag value, unknown subcommand).

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardy::HardyExponent;
use crate::io::{atomic_write, read_json, to_json_bytes};
use crate::sample::{generate_sample, load_sample, save_sample, GeneratorFamily, PointSample};
use crate::search::{
    brute_force_g, search_g, BoundKind, ConstraintMode, ExtremalProblem, SearchResiduals,
};
use crate::selftest::run_all_checks;
use crate::solver::{solve_dp_over_disk, KernelResiduals};
use crate::study::{
    build_report, default_epsilon_grid, epsilon_grid, rows_to_csv, run_sandwich_study,
    verify_report, StudyBudgets, StudyReport, DEFAULT_SEARCH_BUDGET,
    STUDY_BRUTE_MAX_SAMPLE,
};
use crate::tolerances::{BRUTE_DEGREE_HEADROOM, DP_GRID_ANGLES};

#[derive(Parser)]
#[command(
    name = "hardy-extremal",
    about = "Certified extremal bounds for unit-norm analytic functions under disk sample constraints",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand that solves one problem instance.
#[derive(Args)]
struct InstanceArgs {
    /// Path to a saved point sample (see gen-set)
    #[arg(long)]
    sample: PathBuf,
    /// Constraint tolerance
    #[arg(long)]
    epsilon: f64,
    /// Radius of the disk the target point ranges over
    #[arg(long = "R")]
    radius: f64,
    /// Whether constraints weight the modulus by (1 - |zeta|)
    #[arg(long, default_value = "weighted")]
    mode: ConstraintMode,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a point sample from a built-in family and save it as JSON
    GenSet {
        /// One of: radial_harmonic, radial_power, spiral, uniform_annulus
        #[arg(long)]
        family: String,
        /// Number of points to generate
        #[arg(long)]
        count: usize,
        /// Seed for the family's randomized parts
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Decay exponent (radial_power only)
        #[arg(long)]
        beta: Option<f64>,
        /// Fixed angle in radians (radial_harmonic, radial_power)
        #[arg(long)]
        angle: Option<f64>,
        /// Angle increment in radians (spiral only)
        #[arg(long)]
        angle_step: Option<f64>,
        /// Inner modulus bound (uniform_annulus only)
        #[arg(long)]
        r_min: Option<f64>,
        /// Outer modulus bound (uniform_annulus only)
        #[arg(long)]
        r_max: Option<f64>,
        /// Output path for the sample file
        #[arg(long)]
        out: PathBuf,
    },
    /// Certified lower bound from an explicit product configuration
    SearchG {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Candidate budget for randomized search (exhaustive enumeration
        /// replaces it automatically on small samples)
        #[arg(long, default_value_t = DEFAULT_SEARCH_BUDGET)]
        budget: usize,
        /// Seed for randomized search
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path for the result file
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact quadratic-norm extremal value over the disk, with certificate
    SolveDp {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Angular grid resolution for the circle sweep
        #[arg(long, default_value_t = DP_GRID_ANGLES)]
        budget: usize,
        /// Output path for the result file
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a sandwich study over a tolerance grid, or re-check a report
    VerifySandwich {
        /// Re-verify an existing report file instead of running a study
        #[arg(long, conflicts_with_all = ["sample", "out", "csv"])]
        check: Option<PathBuf>,
        /// Path to a saved point sample
        #[arg(long, required_unless_present = "check")]
        sample: Option<PathBuf>,
        /// Tolerance grid as start:factor:count (default 0.5:0.5:12)
        #[arg(long = "epsilon-grid")]
        epsilon_grid: Option<String>,
        /// Radius of the disk the target point ranges over
        #[arg(long = "R", default_value_t = 0.5)]
        radius: f64,
        /// Whether constraints weight the modulus by (1 - |zeta|)
        #[arg(long, default_value = "weighted")]
        mode: ConstraintMode,
        /// Angular grid resolution for each row's circle sweep
        #[arg(long, default_value_t = DP_GRID_ANGLES)]
        budget: usize,
        /// Seed for randomized search on large samples
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path for the report file
        #[arg(long, required_unless_present = "check")]
        out: Option<PathBuf>,
        /// Optional flat CSV export of the rows
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Fit the empirical scaling law from a saved report's rows
    FitScaling {
        /// Path to a report written by verify-sandwich
        #[arg(long)]
        report: PathBuf,
        /// Output path for the fit (stdout summary only when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in closed-form and oracle checks
    Selftest,
}

/// On-disk schema for search-g results.
#[derive(Serialize, Deserialize)]
struct GResultFile {
    value: f64,
    kind: BoundKind,
    /// Zeros of the certifying product as (re, im) pairs; empty when the
    /// bound is trivial or infeasible.
    zeros: Vec<[f64; 2]>,
    /// Where on the disk the bound is attained, as (re, im).
    argmax: Option<[f64; 2]>,
    residuals: SearchResiduals,
}

/// On-disk schema for solve-dp results.
#[derive(Serialize, Deserialize)]
struct DpResultFile {
    value: f64,
    argmax_z0: [f64; 2],
    base_points: Vec<[f64; 2]>,
    coefficients: Vec<[f64; 2]>,
    residuals: KernelResiduals,
}

fn usage_error(msg: &str) -> Error {
    Error::MalformedFile {
        path: "<usage>".to_string(),
        detail: msg.to_string(),
    }
}

fn is_usage(e: &Error) -> bool {
    matches!(e, Error::MalformedFile { path, .. } if path == "<usage>")
        || matches!(e, Error::BadEpsilonGrid { .. })
}

/// Build a generator family from the gen-set flags, rejecting extraneous
/// or missing parameters with the offending flag named.
#[allow(clippy::too_many_arguments)]
fn family_from_flags(
    family: &str,
    beta: Option<f64>,
    angle: Option<f64>,
    angle_step: Option<f64>,
    r_min: Option<f64>,
    r_max: Option<f64>,
) -> Result<GeneratorFamily> {
    let reject = |flag: &str| -> Result<()> {
        Err(usage_error(&format!(
            "--{flag} does not apply to family {family}"
        )))
    };
    match family {
        "radial_harmonic" => {
            if beta.is_some() {
                reject("beta")?;
            }
            if angle_step.is_some() {
                reject("angle-step")?;
            }
            if r_min.is_some() || r_max.is_some() {
                reject("r-min/--r-max")?;
            }
            Ok(GeneratorFamily::RadialHarmonic { angle })
        }
        "radial_power" => {
            let beta = beta.ok_or_else(|| usage_error("--beta is required for radial_power"))?;
            if angle_step.is_some() {
                reject("angle-step")?;
            }
            if r_min.is_some() || r_max.is_some() {
                reject("r-min/--r-max")?;
            }
            Ok(GeneratorFamily::RadialPower { beta, angle })
        }
        "spiral" => {
            let angle_step =
                angle_step.ok_or_else(|| usage_error("--angle-step is required for spiral"))?;
            if beta.is_some() {
                reject("beta")?;
            }
            if angle.is_some() {
                reject("angle")?;
            }
            if r_min.is_some() || r_max.is_some() {
                reject("r-min/--r-max")?;
            }
            Ok(GeneratorFamily::Spiral { angle_step })
        }
        "uniform_annulus" => {
            let r_min =
                r_min.ok_or_else(|| usage_error("--r-min is required for uniform_annulus"))?;
            let r_max =
                r_max.ok_or_else(|| usage_error("--r-max is required for uniform_annulus"))?;
            if beta.is_some() {
                reject("beta")?;
            }
            if angle.is_some() || angle_step.is_some() {
                reject("angle/--angle-step")?;
            }
            Ok(GeneratorFamily::UniformAnnulus { r_min, r_max })
        }
        other => Err(usage_error(&format!(
            "--family must be one of radial_harmonic, radial_power, spiral, uniform_annulus; got {other}"
        ))),
    }
}

/// Parse "start:factor:count" into a grid.
fn parse_epsilon_grid(raw: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = raw.split(':').collect();
    let bad = || Error::BadEpsilonGrid {
        raw: raw.to_string(),
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let factor: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    epsilon_grid(start, factor, count)
}

fn complex_pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn load_instance(args: &InstanceArgs) -> Result<(PointSample, ExtremalProblem)> {
    let sample = load_sample(&args.sample)?;
    let prob = ExtremalProblem::new(
        sample.clone(),
        args.epsilon,
        args.radius,
        HardyExponent::TWO,
        args.mode,
    )?;
    Ok((sample, prob))
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, &to_json_bytes(value)?)
}

fn run_gen_set(
    family: GeneratorFamily,
    count: usize,
    seed: u64,
    out: &Path,
) -> Result<String> {
    let sample = generate_sample(family, count, seed)?;
    save_sample(out, &sample)?;
    let sum = sample.blaschke_partial_sum();
    Ok(format!(
        "wrote {} {} points to {} (sum of 1-|z| = {:.6})",
        sample.len(),
        sample.generator().family.name(),
        out.display(),
        sum
    ))
}

fn run_search_g(
    instance: &InstanceArgs,
    budget: usize,
    seed: u64,
    out: &Path,
) -> Result<String> {
    let (sample, prob) = load_instance(instance)?;
    let bound = if sample.len() <= STUDY_BRUTE_MAX_SAMPLE {
        brute_force_g(&prob, sample.len() + BRUTE_DEGREE_HEADROOM)?
    } else {
        search_g(&prob, budget, seed)?
    };
    bound.revalidate(&prob)?;
    let file = GResultFile {
        value: bound.value,
        kind: bound.kind,
        zeros: bound
            .certificate
            .as_ref()
            .map(|cfg| cfg.zeros().iter().map(|z| complex_pair(z.to_complex())).collect())
            .unwrap_or_default(),
        argmax: bound.argmax_point.map(complex_pair),
        residuals: bound.residuals,
    };
    write_json_file(out, &file)?;
    Ok(format!(
        "g = {:.12} ({:?}) written to {}",
        bound.value,
        bound.kind,
        out.display()
    ))
}

fn run_solve_dp(instance: &InstanceArgs, nodes: usize, out: &Path) -> Result<String> {
    let (_, prob) = load_instance(instance)?;
    let solution = solve_dp_over_disk(&prob, nodes, &[])?;
    solution.certificate.validate(&prob, solution.argmax_z0)?;
    let file = DpResultFile {
        value: solution.value,
        argmax_z0: complex_pair(solution.argmax_z0),
        base_points: solution
            .certificate
            .base_points
            .iter()
            .map(|p| complex_pair(p.to_complex()))
            .collect(),
        coefficients: solution
            .certificate
            .coefficients
            .iter()
            .map(|c| complex_pair(*c))
            .collect(),
        residuals: solution.certificate.residuals,
    };
    write_json_file(out, &file)?;
    Ok(format!(
        "d2 = {:.12} at z0 = {:.6} + {:.6}i written to {}",
        solution.value,
        solution.argmax_z0.re,
        solution.argmax_z0.im,
        out.display()
    ))
}

#[allow(clippy::too_many_arguments)]
fn run_verify_sandwich(
    sample_path: &Path,
    grid_raw: Option<&str>,
    radius: f64,
    mode: ConstraintMode,
    nodes: usize,
    seed: u64,
    out: &Path,
    csv: Option<&Path>,
) -> Result<String> {
    // Flag values are validated before any filesystem access, so a bad
    // grid string is reported as the usage error it is.
    let grid = match grid_raw {
        Some(raw) => parse_epsilon_grid(raw)?,
        None => default_epsilon_grid(),
    };
    let sample = load_sample(sample_path)?;
    let budgets = StudyBudgets {
        search_budget: DEFAULT_SEARCH_BUDGET,
        dp_angular_nodes: nodes,
        seed,
    };
    let rows = run_sandwich_study(&sample, radius, &grid, mode, &budgets)?;
    let n_rows = rows.len();
    let report = build_report(&sample, radius, &grid, mode, &budgets, rows);
    write_json_file(out, &report)?;
    if let Some(csv_path) = csv {
        atomic_write(csv_path, rows_to_csv(&report.rows).as_bytes())?;
    }
    let fit_note = match &report.fit {
        Some(fit) => format!(
            "alpha_hat = {:.6}, r^2 = {:.6} over {} rows",
            fit.alpha_hat, fit.r_squared, fit.rows_used
        ),
        None => "no usable fit".to_string(),
    };
    Ok(format!(
        "verified {n_rows} rows (every g <= d2), report written to {}; {fit_note}",
        out.display()
    ))
}

fn run_check_report(path: &Path) -> Result<String> {
    let report: StudyReport = read_json(path)?;
    verify_report(&report)?;
    Ok(format!(
        "report {} verifies: {} rows hold the lower-bound inequality",
        path.display(),
        report.rows.len()
    ))
}

fn run_fit_scaling(report_path: &Path, out: Option<&Path>) -> Result<String> {
    let report: StudyReport = read_json(report_path)?;
    let fit = crate::study::fit_scaling(&report.rows)?;
    if let Some(path) = out {
        write_json_file(path, &fit)?;
    }
    Ok(format!(
        "alpha_hat = {:.12}, intercept = {:.12}, r^2 = {:.12} ({} rows used)",
        fit.alpha_hat, fit.intercept, fit.r_squared, fit.rows_used
    ))
}

fn run_selftest() -> i32 {
    let mut failures = 0;
    for outcome in run_all_checks() {
        match outcome.result {
            Ok(detail) => println!("check {:32} ok: {detail}", outcome.name),
            Err(e) => {
                failures += 1;
                println!("check {:32} FAILED: {e}", outcome.name);
            }
        }
    }
    if failures == 0 {
        println!("all checks passed");
        0
    } else {
        println!("{failures} check(s) failed");
        1
    }
}

fn dispatch(command: Command) -> Result<String> {
    match command {
        Command::GenSet {
            family,
            count,
            seed,
            beta,
            angle,
            angle_step,
            r_min,
            r_max,
            out,
        } => {
            let family = family_from_flags(&family, beta, angle, angle_step, r_min, r_max)?;
            run_gen_set(family, count, seed, &out)
        }
        Command::SearchG {
            instance,
            budget,
            seed,
            out,
        } => run_search_g(&instance, budget, seed, &out),
        Command::SolveDp {
            instance,
            budget,
            out,
        } => run_solve_dp(&instance, budget, &out),
        Command::VerifySandwich {
            check: Some(path), ..
        } => run_check_report(&path),
        Command::VerifySandwich {
            check: None,
            sample,
            epsilon_grid,
            radius,
            mode,
            budget,
            seed,
            out,
            csv,
        } => run_verify_sandwich(
            &sample.expect("clap enforces --sample without --check"),
            epsilon_grid.as_deref(),
            radius,
            mode,
            budget,
            seed,
            &out.expect("clap enforces --out without --check"),
            csv.as_deref(),
        ),
        Command::FitScaling { report, out } => run_fit_scaling(&report, out.as_deref()),
        Command::Selftest => unreachable!("selftest is dispatched before this point"),
    }
}

/// Entry point shared by the binary and the CLI tests. Returns the process
/// exit code instead of exiting, so tests can call it in-process.
pub fn cli_main<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            // clap's message names the offending flag or subcommand.
            let _ = e.print();
            return code;
        }
    };
    if matches!(cli.command, Command::Selftest) {
        return run_selftest();
    }
    match dispatch(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) if is_usage(&e) => {
            eprintln!("usage error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
