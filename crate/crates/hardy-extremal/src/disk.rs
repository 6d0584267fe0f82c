//! Geometry of the open unit disk: validated points, Blaschke factors, the
//! radial weight `q(z) = 1 - |z|`, and log-space modulus accumulation for
//! finite weighted products.
//!
//! All modulus computations for products run in log space: a sum of factor
//! log-moduli (plus `ln(1 - |z|)` when weighted) never underflows where the
//! direct product would, and is exactly `-inf` iff the product vanishes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::{BOUNDARY_SLACK, INTERIOR_MARGIN};

/// A point strictly inside the unit disk.
///
/// Construction rejects non-finite coordinates and moduli above
/// `1 - INTERIOR_MARGIN`, so every stored point keeps Blaschke denominators
/// `1 - conj(a) z` bounded away from zero on the closed disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct DiskPoint {
    re: f64,
    im: f64,
}

impl DiskPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::NonFiniteCoordinate { re, im });
        }
        let modulus = re.hypot(im);
        if modulus > 1.0 - INTERIOR_MARGIN {
            return Err(Error::PointOutsideDisk { re, im, modulus });
        }
        Ok(DiskPoint { re, im })
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Euclidean distance to another point.
    pub fn distance(&self, other: &DiskPoint) -> f64 {
        (self.re - other.re).hypot(self.im - other.im)
    }
}

impl TryFrom<(f64, f64)> for DiskPoint {
    type Error = Error;

    fn try_from(pair: (f64, f64)) -> Result<Self> {
        DiskPoint::new(pair.0, pair.1)
    }
}

impl From<DiskPoint> for (f64, f64) {
    fn from(p: DiskPoint) -> (f64, f64) {
        (p.re, p.im)
    }
}

/// Pseudo-hyperbolic distance `|a - b| / |1 - conj(b) a|`.
///
/// Invariant under disk automorphisms; this is the metric in which nearby
/// base points make reproducing-kernel Gram matrices singular.
pub fn pseudo_hyperbolic(a: &DiskPoint, b: &DiskPoint) -> f64 {
    let az = a.to_complex();
    let bz = b.to_complex();
    let denom = (Complex64::new(1.0, 0.0) - bz.conj() * az).norm();
    (az - bz).norm() / denom
}

/// An ordered multiset of prescribed zeros. Repeats are legal and meaningful
/// (zero multiplicity); the list is never empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DiskPoint>", into = "Vec<DiskPoint>")]
pub struct ZeroConfiguration {
    zeros: Vec<DiskPoint>,
}

impl ZeroConfiguration {
    pub fn new(zeros: Vec<DiskPoint>) -> Result<Self> {
        if zeros.is_empty() {
            return Err(Error::EmptyConfiguration);
        }
        Ok(ZeroConfiguration { zeros })
    }

    pub fn single(zero: DiskPoint) -> Self {
        ZeroConfiguration { zeros: vec![zero] }
    }

    pub fn zeros(&self) -> &[DiskPoint] {
        &self.zeros
    }

    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl TryFrom<Vec<DiskPoint>> for ZeroConfiguration {
    type Error = Error;

    fn try_from(zeros: Vec<DiskPoint>) -> Result<Self> {
        ZeroConfiguration::new(zeros)
    }
}

impl From<ZeroConfiguration> for Vec<DiskPoint> {
    fn from(cfg: ZeroConfiguration) -> Vec<DiskPoint> {
        cfg.zeros
    }
}

fn check_eval_domain(z: Complex64) -> Result<()> {
    let modulus = z.norm();
    if !modulus.is_finite() || modulus > 1.0 + BOUNDARY_SLACK {
        return Err(Error::EvaluationOutsideDomain { modulus });
    }
    Ok(())
}

/// Single Blaschke factor `(z - a) / (1 - conj(a) z)`.
///
/// Defined on the closed disk (plus roundoff slack); unimodular on the
/// boundary and of modulus < 1 strictly inside.
pub fn blaschke_factor(a: DiskPoint, z: Complex64) -> Result<Complex64> {
    check_eval_domain(z)?;
    let av = a.to_complex();
    Ok((z - av) / (Complex64::new(1.0, 0.0) - av.conj() * z))
}

/// Radial weight `q(z) = 1 - |z|`, clamped to 0 within the boundary slack.
pub fn weight_q(z: Complex64) -> Result<f64> {
    check_eval_domain(z)?;
    Ok((1.0 - z.norm()).max(0.0))
}

/// Log-modulus of the (optionally weighted) finite Blaschke product with the
/// given zeros, evaluated at `z`. Returns `-inf` exactly when the product
/// vanishes: at a zero of the configuration, or on the boundary in weighted
/// mode.
pub fn product_log_modulus(cfg: &ZeroConfiguration, z: Complex64, weighted: bool) -> Result<f64> {
    check_eval_domain(z)?;
    let mut acc = if weighted { weight_q(z)?.ln() } else { 0.0 };
    for zero in cfg.zeros() {
        acc += blaschke_factor(*zero, z)?.norm().ln();
    }
    Ok(acc)
}

/// Modulus of the (optionally weighted) product; `exp` of the log form, so 0
/// exactly where the product vanishes.
pub fn product_modulus(cfg: &ZeroConfiguration, z: Complex64, weighted: bool) -> Result<f64> {
    Ok(product_log_modulus(cfg, z, weighted)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(re: f64, im: f64) -> DiskPoint {
        DiskPoint::new(re, im).unwrap()
    }

    #[test]
    fn construction_enforces_strict_interior() {
        assert!(DiskPoint::new(0.0, 0.0).is_ok());
        assert!(DiskPoint::new(0.9999, 0.0).is_ok());
        assert!(matches!(
            DiskPoint::new(1.0, 0.0),
            Err(Error::PointOutsideDisk { .. })
        ));
        assert!(matches!(
            DiskPoint::new(0.8, 0.7),
            Err(Error::PointOutsideDisk { .. })
        ));
        assert!(matches!(
            DiskPoint::new(f64::NAN, 0.0),
            Err(Error::NonFiniteCoordinate { .. })
        ));
    }

    #[test]
    fn empty_configuration_is_rejected() {
        assert!(matches!(
            ZeroConfiguration::new(vec![]),
            Err(Error::EmptyConfiguration)
        ));
        assert_eq!(ZeroConfiguration::single(pt(0.1, 0.0)).len(), 1);
    }

    #[test]
    fn factor_at_origin_zero_is_identity() {
        let z = Complex64::new(0.3, -0.4);
        let f = blaschke_factor(pt(0.0, 0.0), z).unwrap();
        assert!((f - z).norm() < 1e-15);
    }

    /// a = 0.5 evaluated at the boundary point z = 1: (1 - 0.5)/(1 - 0.5) = 1.
    #[test]
    fn factor_is_unimodular_on_boundary() {
        let f = blaschke_factor(pt(0.5, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        assert!((f - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn factor_rejects_points_outside_closed_disk() {
        assert!(matches!(
            blaschke_factor(pt(0.5, 0.0), Complex64::new(1.1, 0.0)),
            Err(Error::EvaluationOutsideDomain { .. })
        ));
    }

    #[test]
    fn weight_is_one_minus_modulus() {
        assert_eq!(weight_q(Complex64::new(0.0, 0.0)).unwrap(), 1.0);
        assert!((weight_q(Complex64::new(0.6, 0.0)).unwrap() - 0.4).abs() < 1e-15);
        // Within the boundary slack the weight clamps to zero, never negative.
        let w = weight_q(Complex64::new(1.0 + 0.5 * BOUNDARY_SLACK, 0.0)).unwrap();
        assert_eq!(w, 0.0);
    }

    /// Single zero at the origin, z = 0.5, weighted:
    /// (1 - 0.5) * |0.5| = 0.25, i.e. log-modulus ln(1/4).
    #[test]
    fn weighted_product_single_zero_at_origin() {
        let cfg = ZeroConfiguration::single(pt(0.0, 0.0));
        let z = Complex64::new(0.5, 0.0);
        let lm = product_log_modulus(&cfg, z, true).unwrap();
        assert!((lm -raw_log_modulus(&cfg, z, true)).abs() < 1e-14);
        assert!((product_modulus(&cfg, z, true).unwrap() - 0.25).abs() < 1e-14);
    }

    /// Zeros at +/- 0.5 evaluated at the origin, weighted:
    /// weight 1, factor moduli 0.5 each, product 0.25.
    #[test]
    fn weighted_product_symmetric_pair_at_origin() {
        let cfg = ZeroConfiguration::new(vec![pt(0.5, 0.0), pt(-0.5, 0.0)]).unwrap();
        let m = product_modulus(&cfg, Complex64::new(0.0, 0.0), true).unwrap();
        assert!((m - 0.25).abs() < 1e-15);
    }

    #[test]
    fn product_vanishes_exactly_at_a_zero() {
        let cfg = ZeroConfiguration::single(pt(0.5, 0.0));
        let z = Complex64::new(0.5, 0.0);
        assert_eq!(
            product_log_modulus(&cfg, z, false).unwrap(),
            f64::NEG_INFINITY
        );
        assert_eq!(product_modulus(&cfg, z, false).unwrap(), 0.0);
    }

    #[test]
    fn weighted_product_vanishes_on_boundary() {
        let cfg = ZeroConfiguration::single(pt(0.5, 0.0));
        let z = Complex64::new(0.0, 1.0);
        assert_eq!(
            product_log_modulus(&cfg, z, true).unwrap(),
            f64::NEG_INFINITY
        );
    }

    /// Direct product, for cross-checking the log-space accumulation where it
    /// does not underflow.
    fn raw_log_modulus(cfg: &ZeroConfiguration, z: Complex64, weighted: bool) -> f64 {
        let mut prod = if weighted {
            (1.0 - z.norm()).max(0.0)
        } else {
            1.0
        };
        for zero in cfg.zeros() {
            prod *= blaschke_factor(*zero, z).unwrap().norm();
        }
        prod.ln()
    }

    fn disk_point_strategy(max_modulus: f64) -> impl Strategy<Value = DiskPoint> {
        (0.0..max_modulus, 0.0..std::f64::consts::TAU)
            .prop_map(|(r, theta)| DiskPoint::new(r * theta.cos(), r * theta.sin()).unwrap())
    }

    fn config_strategy() -> impl Strategy<Value = ZeroConfiguration> {
        proptest::collection::vec(disk_point_strategy(0.95), 1..8)
            .prop_map(|zs| ZeroConfiguration::new(zs).unwrap())
    }

    proptest! {
        /// |factor| <= 1 everywhere on the closed disk.
        #[test]
        fn factor_modulus_bounded_by_one(a in disk_point_strategy(0.98),
                                         r in 0.0..=1.0f64,
                                         theta in 0.0..std::f64::consts::TAU) {
            let z = Complex64::from_polar(r, theta);
            let f = blaschke_factor(a, z).unwrap();
            prop_assert!(f.norm() <= 1.0 + 1e-12);
        }

        /// Unweighted products stay <= 1; weighted products stay <= 1 - |z|.
        #[test]
        fn product_modulus_bounds(cfg in config_strategy(),
                                  r in 0.0..=1.0f64,
                                  theta in 0.0..std::f64::consts::TAU) {
            let z = Complex64::from_polar(r, theta);
            let plain = product_modulus(&cfg, z, false).unwrap();
            prop_assert!(plain <= 1.0 + 1e-12);
            let weighted = product_modulus(&cfg, z, true).unwrap();
            prop_assert!(weighted <= (1.0 - z.norm()).max(0.0) + 1e-12);
        }

        /// Unweighted products are unimodular on the boundary.
        #[test]
        fn product_unimodular_on_boundary(cfg in config_strategy(),
                                          theta in 0.0..std::f64::consts::TAU) {
            let z = Complex64::from_polar(1.0, theta);
            let m = product_modulus(&cfg, z, false).unwrap();
            prop_assert!((m - 1.0).abs() < 1e-12);
        }

        /// Log-space accumulation agrees with the direct product wherever the
        /// direct product stays above underflow.
        #[test]
        fn log_space_matches_direct_product(cfg in config_strategy(),
                                            z in disk_point_strategy(0.999),
                                            weighted in proptest::bool::ANY) {
            let zc = z.to_complex();
            let direct = raw_log_modulus(&cfg, zc, weighted);
            if direct > -300.0 {
                let accumulated = product_log_modulus(&cfg, zc, weighted).unwrap();
                prop_assert!((accumulated - direct).abs() <= 1e-12 * direct.abs().max(1.0));
            }
        }
    }
}
