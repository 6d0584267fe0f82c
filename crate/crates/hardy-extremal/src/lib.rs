//! Certified extremal bounds for analytic functions on the unit disk.

pub mod disk;
pub mod error;
pub mod hardy;
pub mod io;
pub mod sample;
pub mod search;
pub mod cli;
pub mod selftest;
pub mod solver;
pub mod study;
pub mod tolerances;

pub use disk::{blaschke_factor, product_log_modulus, product_modulus, weight_q};
pub use disk::{DiskPoint, ZeroConfiguration};
pub use error::Error;
pub use search::{
    brute_force_g, feasibility_margin, search_g, sup_on_disk, BoundKind, CertifiedBound,
    ConstraintMode, ExtremalProblem,
};
pub use cli::cli_main;
pub use selftest::{run_all_checks, CheckOutcome};
pub use study::{
    build_report, default_epsilon_grid, epsilon_grid, fit_scaling, rows_to_csv,
    run_sandwich_study, verify_report, verify_rows, RowMetadata, ScalingFit, StudyBudgets,
    StudyReport, StudyRow,
};
pub use solver::{
    interior_spot_check, lower_bound_dp_from_blaschke, solve_dp_over_disk, solve_dp_over_disk_seq,
    solve_extremal_at_point, DpSolution, KernelCertificate, KernelResiduals,
};
