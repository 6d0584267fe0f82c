//! Built-in closed-form and oracle checks, runnable from the CLI. Each
//! check recomputes a quantity two independent ways (closed form vs
//! numerics, enumeration vs search, export vs export) and fails loudly on
//! disagreement, so a binary can vouch for its own numerical core on the
//! machine it is deployed on.

use num_complex::Complex64;

use crate::disk::{DiskPoint, ZeroConfiguration};
use crate::error::Result;
use crate::hardy::{hardy_norm, BlaschkeProduct, HardyExponent, NormalizedSzegoKernel};
use crate::sample::{generate_sample, GeneratorFamily};
use crate::search::{brute_force_g, search_g, ConstraintMode, ExtremalProblem};
use crate::solver::solve_extremal_at_point;
use crate::study::{fit_scaling, rows_to_csv, run_sandwich_study, verify_rows, StudyBudgets};
use crate::tolerances::ROW_SLACK;

/// Outcome of one named check.
pub struct CheckOutcome {
    pub name: &'static str,
    /// `Ok` carries a one-line summary of what was verified.
    pub result: Result<String>,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<String>) -> CheckOutcome {
    CheckOutcome {
        name,
        result: run(),
    }
}

fn ensure(cond: bool, detail: String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(crate::error::Error::CertificateInvalid { detail })
    }
}

fn pt(re: f64, im: f64) -> Result<DiskPoint> {
    DiskPoint::new(re, im)
}

/// Finite products of disk automorphisms have unit boundary norm in every
/// exponent; quadrature at radius 1 must reproduce that.
fn blaschke_unit_norm() -> Result<String> {
    let zeros = vec![
        pt(0.3, 0.4)?,
        pt(-0.55, 0.1)?,
        pt(0.0, -0.72)?,
        pt(0.81, 0.05)?,
        pt(-0.2, -0.33)?,
    ];
    let product = BlaschkeProduct {
        zeros: ZeroConfiguration::new(zeros)?,
    };
    let mut worst: f64 = 0.0;
    for p in [HardyExponent::ONE, HardyExponent::TWO, HardyExponent::new(4.0)?] {
        let norm = hardy_norm(&product, p)?;
        worst = worst.max((norm - 1.0).abs());
    }
    ensure(
        worst <= 1e-6,
        format!("boundary norm drifts from 1 by {worst:.3e}"),
    )?;
    Ok(format!(
        "degree-5 product has unit boundary norm in p = 1, 2, 4 (worst drift {worst:.1e})"
    ))
}

/// The normalized reproducing kernel attains the unit-ball growth bound
/// `(1 - |w|^2)^(-1/2)` exactly at its base point.
fn pointwise_growth_bound() -> Result<String> {
    let w = pt(0.44, -0.31)?;
    let kernel = NormalizedSzegoKernel { w };
    let attained = crate::hardy::BoundaryEvaluator::eval(&kernel, w.to_complex()).norm();
    let bound = (1.0 - w.to_complex().norm_sqr()).powf(-0.5);
    let gap = (attained - bound).abs();
    ensure(gap <= 1e-8, format!("equality case misses by {gap:.3e}"))?;
    Ok(format!(
        "normalized kernel attains the growth bound {bound:.12} (gap {gap:.1e})"
    ))
}

/// With every constraint slack, the extremal value at `z0` is the kernel
/// norm `(1 - |z0|^2)^(-1/2)`; at R = 0.6 that is exactly 1.25.
fn unconstrained_kernel_value() -> Result<String> {
    let sample = generate_sample(
        GeneratorFamily::UniformAnnulus {
            r_min: 0.2,
            r_max: 0.7,
        },
        4,
        5,
    )?;
    let prob = ExtremalProblem::new(sample, 2.0, 0.6, HardyExponent::TWO, ConstraintMode::Weighted)?;
    let cert = solve_extremal_at_point(&prob, Complex64::new(0.6, 0.0))?;
    let gap = (cert.achieved_value - 1.25).abs();
    ensure(gap <= 1e-6, format!("value {} vs 1.25", cert.achieved_value))?;
    Ok(format!(
        "slack constraints reproduce the kernel norm 1.25 (gap {gap:.1e})"
    ))
}

/// One exact-vanishing constraint at 0.5, target -0.6: projecting the
/// kernel onto the constraint's orthocomplement gives 55/52 in closed form.
fn single_vanishing_closed_form() -> Result<String> {
    let sample = crate::sample::PointSample::new(
        vec![pt(0.5, 0.0)?],
        crate::sample::GeneratorDescriptor {
            family: GeneratorFamily::UniformAnnulus {
                r_min: 0.4,
                r_max: 0.6,
            },
            seed: 0,
        },
    )?;
    let prob = ExtremalProblem::new(sample, 0.0, 0.6, HardyExponent::TWO, ConstraintMode::Weighted)?;
    let cert = solve_extremal_at_point(&prob, Complex64::new(-0.6, 0.0))?;
    let expected = 55.0 / 52.0;
    let gap = (cert.achieved_value - expected).abs();
    ensure(
        gap <= 1e-8,
        format!("value {} vs closed form {expected}", cert.achieved_value),
    )?;
    Ok(format!(
        "exact-vanishing constraint matches the closed form 55/52 (gap {gap:.1e})"
    ))
}

/// Randomized search must coincide with exhaustive enumeration on a small
/// instance, since it runs the same enumeration as its first candidate.
fn enumeration_matches_search() -> Result<String> {
    let sample = generate_sample(
        GeneratorFamily::RadialHarmonic { angle: None },
        6,
        17,
    )?;
    let prob = ExtremalProblem::new(
        sample,
        0.1,
        0.5,
        HardyExponent::TWO,
        ConstraintMode::Weighted,
    )?;
    let exhaustive = brute_force_g(&prob, 10)?;
    let searched = search_g(&prob, 200, 0)?;
    let gap = (exhaustive.value - searched.value).abs();
    ensure(
        gap <= 1e-9,
        format!("search {} vs enumeration {}", searched.value, exhaustive.value),
    )?;
    Ok(format!(
        "search equals exhaustive enumeration at {:.12} (gap {gap:.1e})",
        exhaustive.value
    ))
}

/// A small end-to-end study: every row must keep the certified lower bound
/// below the kernel-solver value, and re-verification must accept the rows.
fn study_row_invariant() -> Result<String> {
    let sample = generate_sample(
        GeneratorFamily::UniformAnnulus {
            r_min: 0.2,
            r_max: 0.8,
        },
        4,
        23,
    )?;
    let budgets = StudyBudgets {
        dp_angular_nodes: 32,
        ..StudyBudgets::default()
    };
    let rows = run_sandwich_study(
        &sample,
        0.5,
        &[0.5, 0.125],
        ConstraintMode::Weighted,
        &budgets,
    )?;
    verify_rows(&rows)?;
    let worst = rows
        .iter()
        .map(|r| r.g_value - r.d2_value)
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(
        worst <= ROW_SLACK,
        format!("a row has g above d2 by {worst:.3e}"),
    )?;
    Ok(format!(
        "2-row study holds the lower-bound inequality (worst margin {worst:.1e})"
    ))
}

/// The scaling fit must recover an exact synthetic power law.
fn scaling_fit_identity() -> Result<String> {
    let rows: Vec<crate::study::StudyRow> = (1..=6)
        .map(|k| {
            let g = 0.5f64.powi(k);
            serde_json::from_value(serde_json::json!({
                "epsilon": 0.1,
                "g_value": g,
                "g_kind": "oracle_exact",
                "d2_value": g.sqrt(),
                "ratio_log": 0.5,
                "metadata": {
                    "family": "synthetic",
                    "sample_size": 0,
                    "radius": 0.5,
                    "mode": "weighted",
                    "d2_argmax": [0.0, 0.0],
                },
            }))
            .expect("synthetic row shape matches StudyRow")
        })
        .collect();
    let fit = fit_scaling(&rows)?;
    let gap = (fit.alpha_hat - 0.5).abs();
    ensure(
        gap <= 1e-9 && fit.r_squared >= 1.0 - 1e-12,
        format!("alpha {} r^2 {}", fit.alpha_hat, fit.r_squared),
    )?;
    Ok(format!(
        "fit recovers the exponent 0.5 exactly (r^2 = {})",
        fit.r_squared
    ))
}

/// CSV rows must carry the same float tokens as the JSON report.
fn csv_matches_json() -> Result<String> {
    let sample = generate_sample(
        GeneratorFamily::RadialHarmonic { angle: None },
        3,
        7,
    )?;
    let budgets = StudyBudgets {
        dp_angular_nodes: 32,
        ..StudyBudgets::default()
    };
    let rows = run_sandwich_study(&sample, 0.4, &[0.25], ConstraintMode::Weighted, &budgets)?;
    let csv = rows_to_csv(&rows);
    let json = String::from_utf8(crate::io::to_json_bytes(&rows)?).expect("JSON is UTF-8");
    let line = csv.lines().nth(1).expect("one data row");
    for (i, token) in line.split(',').enumerate() {
        if i == 2 || token.is_empty() {
            continue; // enum tag / undefined ratio
        }
        ensure(
            json.contains(token),
            format!("CSV token {token} missing from JSON export"),
        )?;
    }
    Ok("CSV float fields match the JSON report byte-for-byte".to_string())
}

/// Run every check in order. The list is fixed, so output order is stable.
pub fn run_all_checks() -> Vec<CheckOutcome> {
    vec![
        check("blaschke-unit-norm", blaschke_unit_norm),
        check("pointwise-growth-bound", pointwise_growth_bound),
        check("unconstrained-kernel-value", unconstrained_kernel_value),
        check("single-vanishing-closed-form", single_vanishing_closed_form),
        check("enumeration-matches-search", enumeration_matches_search),
        check("study-row-invariant", study_row_invariant),
        check("scaling-fit-identity", scaling_fit_identity),
        check("csv-matches-json", csv_matches_json),
    ]
}
