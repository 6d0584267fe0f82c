//! Central numeric tolerances and grid defaults.
//!
//! Every magic number that decides "equal enough", "feasible enough", or
//! "converged enough" lives here so the relationships between them stay
//! auditable. The ordering matters: certificate re-validation must be looser
//! than the solver's own convergence target, and feasibility slack must be
//! tighter than anything a certificate check accepts.

/// Margin kept between stored points and the unit circle; construction of a
/// `DiskPoint` rejects moduli above `1 - INTERIOR_MARGIN`. Keeps every
/// downstream denominator `1 - conj(a) z` bounded away from zero.
pub const INTERIOR_MARGIN: f64 = 1e-15;

/// Slack past the closed unit disk accepted by evaluation routines, so that
/// boundary points produced through `cos`/`sin` roundoff remain in-domain.
pub const BOUNDARY_SLACK: f64 = 1e-12;

/// Euclidean distance below which two sample points are considered
/// duplicates and merged at construction time.
pub const DEDUP_DISTANCE: f64 = 1e-12;

/// Pseudo-hyperbolic distance below which the kernel solver merges base
/// points before forming the Gram matrix.
pub const MERGE_PH_DISTANCE: f64 = 1e-8;

/// Relative ridge added to the normalized Gram diagonal. The normalized
/// diagonal is exactly 1, so this is also the absolute ridge.
pub const GRAM_RIDGE: f64 = 1e-12;

/// Additive slack in feasibility checks: a configuration is feasible when
/// its worst constraint value is at most `eps + FEASIBILITY_SLACK`.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// Re-evaluating any certificate must reproduce the stored value this
/// closely.
pub const CERT_REEVAL: f64 = 1e-9;

/// Convergence target for the Karush-Kuhn-Tucker residual of the kernel
/// solver (stationarity, complementarity, and primal violation combined).
pub const KKT_TOL: f64 = 1e-8;

/// Constraint violation and norm excess allowed on a kernel certificate.
pub const CERT_SLACK: f64 = 1e-8;

/// Unit-norm check tolerance for Blaschke certificates re-measured by
/// boundary quadrature.
pub const INNER_NORM_TOL: f64 = 1e-6;

/// Minimum improvement for the local search to accept a move. Anything
/// smaller is indistinguishable from quadrature noise.
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-12;

/// Additive slack in the study row invariant `g_value <= d2_value + ROW_SLACK`.
pub const ROW_SLACK: f64 = 1e-8;

/// Angular grid for `sup_on_disk` before golden-section refinement.
pub const SUP_GRID_NODES: usize = 512;

/// Golden-section refinement runs until the bracket is this narrow (radians).
pub const GOLDEN_ANGLE_TOL: f64 = 1e-10;

/// Angular grid for the outer sweep of `solve_dp_over_disk`.
pub const DP_GRID_ANGLES: usize = 256;

/// Default node count for boundary quadrature (power of two; the trapezoid
/// rule on a uniform angular grid is spectrally accurate for functions
/// analytic past the circle).
pub const QUADRATURE_NODES: usize = 4096;

/// Fewest quadrature nodes accepted.
pub const MIN_QUADRATURE_NODES: usize = 16;

/// Evaluation radius used for norms of functions that do not extend
/// continuously to the boundary. Values computed there underestimate the
/// true norm by O(1e-6) for bounded functions; callers are warned in the
/// `hardy_norm` docs.
pub const NEAR_BOUNDARY_RADIUS: f64 = 1.0 - 1e-6;

/// Per-point zero multiplicity cap in brute-force enumeration; keeps the
/// multiset count near 10^6 at the documented size limits.
pub const BRUTE_MULTIPLICITY_CAP: usize = 4;

/// Largest sample brute-force enumeration accepts.
pub const BRUTE_MAX_SAMPLE: usize = 12;

/// `max_degree` may exceed the sample size by at most this much.
pub const BRUTE_DEGREE_HEADROOM: usize = 4;
