//! Sandwich studies: sweep a geometric tolerance grid, compute the certified
//! lower bound `g` and the exact quadratic-norm value `d2` for every grid
//! point, enforce `g <= d2 + slack` row by row, and fit the empirical power
//! law `d2 ~ C * g^alpha` from the accumulated rows.
//!
//! Every row revalidates both certificates from scratch before it is
//! accepted, so a report is only ever assembled from independently checked
//! numbers. A violated row aborts the whole study and carries a forensic
//! dump of both certificates in the error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardy::HardyExponent;
use crate::sample::PointSample;
use crate::search::{brute_force_g, search_g, BoundKind, ConstraintMode, ExtremalProblem};
use crate::solver::solve_dp_over_disk;
use crate::tolerances::{BRUTE_DEGREE_HEADROOM, DP_GRID_ANGLES, ROW_SLACK};

/// Largest sample size for which study rows use exhaustive enumeration for
/// the lower bound instead of randomized search.
pub const STUDY_BRUTE_MAX_SAMPLE: usize = 10;

/// Default budget handed to randomized search when enumeration is too big.
pub const DEFAULT_SEARCH_BUDGET: usize = 300;

/// Hard cap on grid length; geometric grids below ~1e-300 underflow anyway.
const MAX_GRID_COUNT: usize = 10_000;

/// Knobs for one study run. `Default` matches the CLI defaults.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StudyBudgets {
    /// Candidate-configuration budget for randomized search (large samples).
    pub search_budget: usize,
    /// Grid resolution for the circle sweep behind every `d2` value.
    pub dp_angular_nodes: usize,
    /// Seed for randomized search; enumeration ignores it.
    pub seed: u64,
}

impl Default for StudyBudgets {
    fn default() -> Self {
        StudyBudgets {
            search_budget: DEFAULT_SEARCH_BUDGET,
            dp_angular_nodes: DP_GRID_ANGLES,
            seed: 0,
        }
    }
}

/// Instance descriptors repeated on every row so a report is self-contained.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RowMetadata {
    /// Generator family name of the sample the row was computed on.
    pub family: String,
    pub sample_size: usize,
    /// Radius of the disk the objective is maximized over.
    pub radius: f64,
    pub mode: ConstraintMode,
    /// Argmax of the quadratic-norm value, as (re, im).
    pub d2_argmax: [f64; 2],
}

/// One tolerance's worth of results: the certified lower bound, the exact
/// quadratic-norm value, and the log-log ratio feeding the scaling fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub epsilon: f64,
    /// Certified lower bound from an explicit product configuration.
    pub g_value: f64,
    /// Whether `g_value` is exhaustive or a certified search result.
    pub g_kind: BoundKind,
    /// Exact sup of `|f(z0)|` over the disk for unit-norm f under the
    /// sample constraints, from the kernel-span solver.
    pub d2_value: f64,
    /// `ln(d2_value) / ln(g_value)` when both logs are defined and the
    /// denominator is nonzero (`g` strictly inside (0,1), `d2` positive).
    pub ratio_log: Option<f64>,
    pub metadata: RowMetadata,
}

/// `ln d2 / ln g` where defined; `None` otherwise.
fn ratio_log(g: f64, d2: f64) -> Option<f64> {
    if g.is_finite() && d2.is_finite() && g > 0.0 && g < 1.0 && d2 > 0.0 {
        Some(d2.ln() / g.ln())
    } else {
        None
    }
}

/// Build a geometric tolerance grid `start, start*factor, ...` of length
/// `count`. Grids must stay strictly positive and finite; a shrinking
/// factor yields the conventional descending sweep.
pub fn epsilon_grid(start: f64, factor: f64, count: usize) -> Result<Vec<f64>> {
    let raw = format!("{start}:{factor}:{count}");
    let bad = || Error::BadEpsilonGrid { raw: raw.clone() };
    if !start.is_finite() || start <= 0.0 {
        return Err(bad());
    }
    if !factor.is_finite() || factor <= 0.0 {
        return Err(bad());
    }
    if count == 0 || count > MAX_GRID_COUNT {
        return Err(bad());
    }
    let mut values = Vec::with_capacity(count);
    let mut v = start;
    for _ in 0..count {
        if !v.is_finite() || v <= 0.0 {
            return Err(bad());
        }
        values.push(v);
        v *= factor;
    }
    Ok(values)
}

/// The default study grid: twelve tolerances halving from 0.5 down to
/// 0.5 * 2^-11, spanning slack constraints through strongly binding ones.
pub fn default_epsilon_grid() -> Vec<f64> {
    epsilon_grid(0.5, 0.5, 12).expect("default grid parameters are valid")
}

/// Compute one row: certified lower bound, revalidation, circle sweep
/// seeded at the lower bound's argmax angle, revalidation again, and the
/// row invariant `g <= d2 + slack`.
fn study_row(
    sample: &PointSample,
    radius: f64,
    epsilon: f64,
    mode: ConstraintMode,
    budgets: &StudyBudgets,
) -> Result<StudyRow> {
    let prob = ExtremalProblem::new(
        sample.clone(),
        epsilon,
        radius,
        HardyExponent::TWO,
        mode,
    )?;
    let g = if sample.len() <= STUDY_BRUTE_MAX_SAMPLE {
        brute_force_g(&prob, sample.len() + BRUTE_DEGREE_HEADROOM)?
    } else {
        search_g(&prob, budgets.search_budget, budgets.seed)?
    };
    g.revalidate(&prob)?;
    // Seeding the sweep with the lower bound's argmax angle guarantees the
    // refinement visits the angle where the certified bound is attained.
    let seeds: Vec<f64> = g.argmax_point.iter().map(|z| z.arg()).collect();
    let dp = solve_dp_over_disk(&prob, budgets.dp_angular_nodes, &seeds)?;
    dp.certificate.validate(&prob, dp.argmax_z0)?;
    if g.value > dp.value + ROW_SLACK {
        return Err(Error::RowInvariant {
            epsilon,
            g_value: g.value,
            d2_value: dp.value,
            dump: format!(
                "lower-bound certificate:\n{g:#?}\nkernel certificate:\n{:#?}",
                dp.certificate
            ),
        });
    }
    Ok(StudyRow {
        epsilon,
        g_value: g.value,
        g_kind: g.kind,
        d2_value: dp.value,
        ratio_log: ratio_log(g.value, dp.value),
        metadata: RowMetadata {
            family: sample.generator().family.name().to_string(),
            sample_size: sample.len(),
            radius,
            mode,
            d2_argmax: [dp.argmax_z0.re, dp.argmax_z0.im],
        },
    })
}

/// Run the full sandwich study: one row per grid tolerance, descending.
///
/// Grid values must be finite and strictly positive; they are sorted into
/// descending order before the sweep so callers may pass grids in any
/// order. Rows are computed sequentially — the circle sweep inside each
/// row already fans out across cores — which keeps row order, and hence
/// the report bytes, independent of thread scheduling.
pub fn run_sandwich_study(
    sample: &PointSample,
    radius: f64,
    grid: &[f64],
    mode: ConstraintMode,
    budgets: &StudyBudgets,
) -> Result<Vec<StudyRow>> {
    if grid.is_empty() {
        return Err(Error::BadEpsilonGrid {
            raw: "<empty grid>".to_string(),
        });
    }
    for &eps in grid {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::BadEpsilonGrid {
                raw: format!("grid value {eps}"),
            });
        }
    }
    let mut order: Vec<f64> = grid.to_vec();
    order.sort_by(|a, b| b.partial_cmp(a).expect("grid values are finite"));
    order
        .iter()
        .map(|&eps| study_row(sample, radius, eps, mode, budgets))
        .collect()
}

/// Re-check the invariants of already-computed rows: positive finite
/// tolerances, `g <= d2 + slack`, and a `ratio_log` consistent with the
/// stored values. Used by report verification after deserialization.
pub fn verify_rows(rows: &[StudyRow]) -> Result<()> {
    for row in rows {
        if !row.epsilon.is_finite()
            || row.epsilon <= 0.0
            || !row.g_value.is_finite()
            || row.g_value < 0.0
            || !row.d2_value.is_finite()
            || row.d2_value < 0.0
        {
            return Err(Error::CertificateInvalid {
                detail: format!(
                    "row at eps = {} carries a non-finite or negative value",
                    row.epsilon
                ),
            });
        }
        if row.g_value > row.d2_value + ROW_SLACK {
            return Err(Error::RowInvariant {
                epsilon: row.epsilon,
                g_value: row.g_value,
                d2_value: row.d2_value,
                dump: "stored row fails the lower-bound inequality".to_string(),
            });
        }
        let expected = ratio_log(row.g_value, row.d2_value);
        let consistent = match (row.ratio_log, expected) {
            (None, None) => true,
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
            _ => false,
        };
        if !consistent {
            return Err(Error::CertificateInvalid {
                detail: format!(
                    "row at eps = {} stores ratio_log {:?} but values imply {:?}",
                    row.epsilon, row.ratio_log, expected
                ),
            });
        }
    }
    Ok(())
}

/// Least-squares fit of `ln d2 = alpha_hat * ln g + intercept` over the
/// usable rows, with the usual coefficient of determination.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Fitted exponent: slope of `ln d2` against `ln g`.
    pub alpha_hat: f64,
    /// Fitted offset, i.e. `ln` of the multiplicative constant.
    pub intercept: f64,
    /// `1 - SS_res / SS_tot`; 1 means a perfect power law.
    pub r_squared: f64,
    /// How many rows passed the usability filter.
    pub rows_used: usize,
}

/// Fit the empirical scaling law from study rows. A row is usable when
/// `g` lies strictly inside (0,1) and `d2` is positive, so both logs are
/// defined and the regressor is nonzero.
pub fn fit_scaling(rows: &[StudyRow]) -> Result<ScalingFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| {
            r.g_value.is_finite()
                && r.d2_value.is_finite()
                && r.g_value > 0.0
                && r.g_value < 1.0
                && r.d2_value > 0.0
        })
        .map(|r| (r.g_value.ln(), r.d2_value.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::NotEnoughRows { usable: pts.len() });
    }
    let n = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let alpha_hat = sxy / sxx;
    let intercept = ybar - alpha_hat * xbar;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - (alpha_hat * p.0 + intercept)).powi(2))
        .sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - ybar).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(ScalingFit {
        alpha_hat,
        intercept,
        r_squared,
        rows_used: pts.len(),
    })
}

/// A complete persisted study: instance description, rows, and the fit.
/// This is the schema behind report files on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub format_version: u32,
    pub family: String,
    pub sample_size: usize,
    pub radius: f64,
    pub mode: ConstraintMode,
    pub seed: u64,
    pub epsilon_grid: Vec<f64>,
    pub rows: Vec<StudyRow>,
    /// Present whenever enough usable rows exist to regress on.
    pub fit: Option<ScalingFit>,
}

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Assemble the persisted report for a finished study. The fit is attached
/// when the rows support one; degenerate row sets simply omit it.
pub fn build_report(
    sample: &PointSample,
    radius: f64,
    grid: &[f64],
    mode: ConstraintMode,
    budgets: &StudyBudgets,
    rows: Vec<StudyRow>,
) -> StudyReport {
    let fit = fit_scaling(&rows).ok();
    StudyReport {
        format_version: REPORT_FORMAT_VERSION,
        family: sample.generator().family.name().to_string(),
        sample_size: sample.len(),
        radius,
        mode,
        seed: budgets.seed,
        epsilon_grid: grid.to_vec(),
        rows,
        fit,
    }
}

/// Re-verify a deserialized report: format version, row invariants, and a
/// fit consistent with the rows it claims to summarize.
pub fn verify_report(report: &StudyReport) -> Result<()> {
    if report.format_version != REPORT_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: report.format_version as u64,
            expected: REPORT_FORMAT_VERSION as u64,
        });
    }
    verify_rows(&report.rows)?;
    let expected = fit_scaling(&report.rows).ok();
    let consistent = match (&report.fit, &expected) {
        (None, None) => true,
        (Some(a), Some(b)) => {
            (a.alpha_hat - b.alpha_hat).abs() <= 1e-12
                && (a.intercept - b.intercept).abs() <= 1e-12
                && (a.r_squared - b.r_squared).abs() <= 1e-12
                && a.rows_used == b.rows_used
        }
        _ => false,
    };
    if !consistent {
        return Err(Error::CertificateInvalid {
            detail: format!(
                "stored fit {:?} disagrees with a fit recomputed from the rows {expected:?}",
                report.fit
            ),
        });
    }
    Ok(())
}

/// Print a float exactly as the JSON writer does, so the CSV and JSON
/// exports of the same report agree field-for-field.
fn csv_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Flat plot-ready export. Columns: epsilon, g_value, g_kind, d2_value,
/// ratio_log. Floats use the same 17-significant-digit form as the JSON
/// report; an undefined ratio_log is left empty (JSON `null`).
pub fn rows_to_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("epsilon,g_value,g_kind,d2_value,ratio_log\n");
    for row in rows {
        let kind = serde_json::to_string(&row.g_kind)
            .expect("enum serialization cannot fail");
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_float(row.epsilon),
            csv_float(row.g_value),
            kind.trim_matches('"'),
            csv_float(row.d2_value),
            row.ratio_log.map(csv_float).unwrap_or_default(),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{generate_sample, GeneratorFamily};

    fn synthetic_row(epsilon: f64, g: f64, d2: f64) -> StudyRow {
        StudyRow {
            epsilon,
            g_value: g,
            g_kind: BoundKind::OracleExact,
            d2_value: d2,
            ratio_log: ratio_log(g, d2),
            metadata: RowMetadata {
                family: "synthetic".to_string(),
                sample_size: 0,
                radius: 0.5,
                mode: ConstraintMode::Weighted,
                d2_argmax: [0.0, 0.0],
            },
        }
    }

    #[test]
    fn geometric_grid_builds_and_validates() {
        let grid = epsilon_grid(0.5, 0.5, 12).unwrap();
        assert_eq!(grid.len(), 12);
        assert_eq!(grid[0], 0.5);
        assert_eq!(grid[11], 0.5 * 2f64.powi(-11));
        for w in grid.windows(2) {
            assert!(w[0] > w[1]);
        }
        assert_eq!(default_epsilon_grid(), grid);

        for (s, f, c) in [
            (0.0, 0.5, 3),
            (-1.0, 0.5, 3),
            (f64::NAN, 0.5, 3),
            (0.5, 0.0, 3),
            (0.5, -2.0, 3),
            (0.5, f64::INFINITY, 3),
            (0.5, 0.5, 0),
        ] {
            assert!(
                matches!(epsilon_grid(s, f, c), Err(Error::BadEpsilonGrid { .. })),
                "grid ({s}, {f}, {c}) should be rejected"
            );
        }
        // Underflow to zero partway through the grid is also rejected.
        assert!(matches!(
            epsilon_grid(1e-300, 1e-30, 20),
            Err(Error::BadEpsilonGrid { .. })
        ));
    }

    #[test]
    fn exact_half_power_data_recovers_exponent() {
        let rows: Vec<StudyRow> = (1..=8)
            .map(|k| {
                let g = 0.5f64.powi(k);
                synthetic_row(0.1, g, g.sqrt())
            })
            .collect();
        let fit = fit_scaling(&rows).unwrap();
        assert!(
            (fit.alpha_hat - 0.5).abs() <= 1e-9,
            "alpha_hat = {}",
            fit.alpha_hat
        );
        assert!(fit.r_squared >= 1.0 - 1e-12, "r^2 = {}", fit.r_squared);
        assert_eq!(fit.rows_used, 8);
        assert!(fit.intercept.abs() <= 1e-9);
    }

    #[test]
    fn degenerate_fits_are_rejected() {
        // Constant g: regressor has zero variance.
        let rows: Vec<StudyRow> = (0..5)
            .map(|k| synthetic_row(0.1, 0.25, 0.3 + 0.01 * k as f64))
            .collect();
        assert!(matches!(fit_scaling(&rows), Err(Error::ZeroVariance)));

        // Two usable rows plus two unusable ones (g outside (0,1)).
        let rows = vec![
            synthetic_row(0.1, 0.25, 0.5),
            synthetic_row(0.2, 0.5, 0.7),
            synthetic_row(0.3, 1.5, 1.7),
            synthetic_row(0.4, 0.0, 0.2),
        ];
        assert!(matches!(
            fit_scaling(&rows),
            Err(Error::NotEnoughRows { usable: 2 })
        ));
    }

    #[test]
    fn small_study_rows_hold_invariants_and_match_enumeration() {
        let sample =
            generate_sample(GeneratorFamily::RadialHarmonic { angle: None }, 5, 3).unwrap();
        let grid = epsilon_grid(0.5, 0.25, 4).unwrap();
        let budgets = StudyBudgets::default();
        let rows = run_sandwich_study(
            &sample,
            0.5,
            &grid,
            ConstraintMode::Weighted,
            &budgets,
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        verify_rows(&rows).unwrap();

        for (row, &eps) in rows.iter().zip(&grid) {
            assert_eq!(row.epsilon, eps);
            assert!(row.g_value <= row.d2_value + ROW_SLACK);
            assert_eq!(row.g_kind, BoundKind::OracleExact);
            assert_eq!(row.metadata.family, "radial_harmonic");
            assert_eq!(row.metadata.sample_size, 5);

            // The g column must match a direct enumeration oracle.
            let prob = ExtremalProblem::new(
                sample.clone(),
                eps,
                0.5,
                HardyExponent::TWO,
                ConstraintMode::Weighted,
            )
            .unwrap();
            let oracle = brute_force_g(&prob, 5 + BRUTE_DEGREE_HEADROOM).unwrap();
            assert!(
                (row.g_value - oracle.value).abs() <= 1e-9,
                "study g {} vs oracle {}",
                row.g_value,
                oracle.value
            );
        }

        // Grid is descending, so both columns must be nonincreasing.
        for w in rows.windows(2) {
            assert!(w[0].g_value >= w[1].g_value - ROW_SLACK);
            assert!(w[0].d2_value >= w[1].d2_value - ROW_SLACK);
        }
    }

    #[test]
    fn slack_tolerance_rows_hit_the_kernel_norm() {
        let sample =
            generate_sample(GeneratorFamily::UniformAnnulus { r_min: 0.2, r_max: 0.8 }, 4, 9)
                .unwrap();
        let rows = run_sandwich_study(
            &sample,
            0.6,
            &[2.0, 1.0],
            ConstraintMode::Weighted,
            &StudyBudgets::default(),
        )
        .unwrap();
        let expected = (1.0 - 0.36f64).powf(-0.5);
        for row in &rows {
            assert!(
                (row.d2_value - expected).abs() <= 1e-6,
                "eps = {}: d2 = {} vs unconstrained {}",
                row.epsilon,
                row.d2_value,
                expected
            );
        }
    }

    #[test]
    fn studies_reject_bad_grids() {
        let sample =
            generate_sample(GeneratorFamily::RadialHarmonic { angle: None }, 3, 0).unwrap();
        let budgets = StudyBudgets::default();
        for grid in [vec![], vec![0.5, 0.0], vec![0.5, -0.1], vec![f64::NAN]] {
            assert!(matches!(
                run_sandwich_study(
                    &sample,
                    0.5,
                    &grid,
                    ConstraintMode::Weighted,
                    &budgets
                ),
                Err(Error::BadEpsilonGrid { .. })
            ));
        }
    }

    #[test]
    fn row_verification_catches_tampering() {
        let mut rows = vec![
            synthetic_row(0.5, 0.3, 0.6),
            synthetic_row(0.25, 0.2, 0.5),
            synthetic_row(0.125, 0.1, 0.4),
        ];
        verify_rows(&rows).unwrap();

        let mut broken = rows.clone();
        broken[1].g_value = broken[1].d2_value + 1.0;
        assert!(matches!(
            verify_rows(&broken),
            Err(Error::RowInvariant { .. })
        ));

        rows[2].ratio_log = Some(42.0);
        assert!(matches!(
            verify_rows(&rows),
            Err(Error::CertificateInvalid { .. })
        ));
    }

    #[test]
    fn csv_export_matches_json_field_for_field() {
        let rows = vec![
            synthetic_row(0.5, 0.371234567890123, 0.7123456789012345),
            synthetic_row(0.25, 1.5, 0.9),
        ];
        let csv = rows_to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "epsilon,g_value,g_kind,d2_value,ratio_log");

        for (line, row) in lines.zip(&rows) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 5);
            // Every float token must parse back to the exact stored double
            // and match the byte representation in the JSON export.
            let json = String::from_utf8(crate::io::to_json_bytes(row).unwrap()).unwrap();
            for (token, value) in [
                (fields[0], row.epsilon),
                (fields[1], row.g_value),
                (fields[3], row.d2_value),
            ] {
                assert_eq!(token.parse::<f64>().unwrap(), value);
                assert!(json.contains(token), "JSON lacks token {token}");
            }
            assert_eq!(fields[2], "oracle_exact");
            match row.ratio_log {
                Some(v) => {
                    assert_eq!(fields[4].parse::<f64>().unwrap(), v);
                    assert!(json.contains(fields[4]));
                }
                None => assert!(fields[4].is_empty()),
            }
        }
    }
}
