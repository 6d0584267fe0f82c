//! Hardy-space machinery: boundary quadrature norms, the growth bound
//! `|g(z)| <= (1 - |z|^2)^(-1/p)` for unit-norm functions, and the Szego
//! reproducing kernel `k_w(z) = 1 / (1 - conj(w) z)`.
//!
//! Norms are circle means: `||g||_p^p = (1/N) sum |g(r e^{i theta_k})|^p` on
//! a uniform angular grid. For functions analytic past the circle of
//! integration the trapezoid rule converges spectrally, and for trigonometric
//! polynomials of degree below the node count it is exact.

use num_complex::Complex64;

use crate::disk::{blaschke_factor, DiskPoint, ZeroConfiguration};
use crate::error::{Error, Result};
use crate::tolerances::{MIN_QUADRATURE_NODES, NEAR_BOUNDARY_RADIUS, QUADRATURE_NODES};

/// Integrability exponent `p` in `[1, inf]`. `p = inf` selects the sup norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyExponent(f64);

impl HardyExponent {
    pub const ONE: HardyExponent = HardyExponent(1.0);
    pub const TWO: HardyExponent = HardyExponent(2.0);
    pub const INFINITY: HardyExponent = HardyExponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent { p });
        }
        Ok(HardyExponent(p))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }
}

/// A deterministic evaluation oracle for an analytic function on the disk.
///
/// `eval` must accept every `z` with `|z| <= 1` when
/// `boundary_continuous()` is true, and every `|z| < 1` otherwise.
pub trait BoundaryEvaluator: Sync {
    fn eval(&self, z: Complex64) -> Complex64;

    /// Whether the function extends continuously to `|z| = 1`. Radius-1
    /// quadrature is only meaningful when this holds.
    fn boundary_continuous(&self) -> bool {
        true
    }
}

/// Constant function.
pub struct Constant(pub Complex64);

impl BoundaryEvaluator for Constant {
    fn eval(&self, _z: Complex64) -> Complex64 {
        self.0
    }
}

/// Polynomial with coefficients in ascending degree order.
pub struct Polynomial {
    pub coefficients: Vec<Complex64>,
}

impl BoundaryEvaluator for Polynomial {
    fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coefficients.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }
}

/// Unweighted finite Blaschke product with the given zeros. Inner: unit
/// modulus on the boundary, hence unit `H^p` norm for every `p`.
pub struct BlaschkeProduct {
    pub zeros: ZeroConfiguration,
}

impl BoundaryEvaluator for BlaschkeProduct {
    fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for zero in self.zeros.zeros() {
            // Zeros are strictly interior, so the factor is defined on the
            // closed disk and the unwrap cannot fire for in-domain z.
            acc *= blaschke_factor(*zero, z).expect("zero configuration is strictly interior");
        }
        acc
    }
}

/// Szego kernel `k_w` as a function of `z`.
pub struct SzegoKernel {
    pub w: DiskPoint,
}

impl BoundaryEvaluator for SzegoKernel {
    fn eval(&self, z: Complex64) -> Complex64 {
        kernel_value(self.w, z)
    }
}

/// `k_w / ||k_w||`, the unit-norm extremizer of the pointwise growth bound
/// at `w` for `p = 2`.
pub struct NormalizedSzegoKernel {
    pub w: DiskPoint,
}

impl BoundaryEvaluator for NormalizedSzegoKernel {
    fn eval(&self, z: Complex64) -> Complex64 {
        let norm = (1.0 - self.w.to_complex().norm_sqr()).sqrt();
        kernel_value(self.w, z) * norm
    }
}

/// Finite combination `g = sum_i c_i k_{w_i}`; the shape of every kernel
/// solver certificate.
pub struct KernelCombination {
    pub base_points: Vec<DiskPoint>,
    pub coefficients: Vec<Complex64>,
}

impl BoundaryEvaluator for KernelCombination {
    fn eval(&self, z: Complex64) -> Complex64 {
        self.base_points
            .iter()
            .zip(&self.coefficients)
            .map(|(w, c)| c * kernel_value(*w, z))
            .sum()
    }
}

fn kernel_value(w: DiskPoint, z: Complex64) -> Complex64 {
    (Complex64::new(1.0, 0.0) - w.to_complex().conj() * z).inv()
}

/// Szego kernel value `k_w(z) = 1 / (1 - conj(w) z)` with domain checking on
/// `z`. The denominator cannot vanish for `|w| < 1`, `|z| <= 1`.
pub fn szego_kernel(w: DiskPoint, z: Complex64) -> Result<Complex64> {
    let modulus = z.norm();
    if !modulus.is_finite() || modulus > 1.0 + crate::tolerances::BOUNDARY_SLACK {
        return Err(Error::EvaluationOutsideDomain { modulus });
    }
    Ok(kernel_value(w, z))
}

/// `H^p` norm of `g` measured on the circle of the given radius with an
/// `nodes`-point uniform trapezoid rule. `p = inf` takes the max over nodes.
///
/// `nodes` must be a power of two (>= 16) so grid-doubling comparisons reuse
/// node sets; `radius = 1` requires boundary continuity.
pub fn hp_norm<E: BoundaryEvaluator + ?Sized>(
    g: &E,
    p: HardyExponent,
    nodes: usize,
    radius: f64,
) -> Result<f64> {
    if nodes < MIN_QUADRATURE_NODES || !nodes.is_power_of_two() {
        return Err(Error::InvalidNodeCount {
            nodes,
            min: MIN_QUADRATURE_NODES,
        });
    }
    if !radius.is_finite() || radius <= 0.0 || radius > 1.0 {
        return Err(Error::InvalidRadius { radius });
    }
    if radius == 1.0 && !g.boundary_continuous() {
        return Err(Error::BoundaryDiscontinuous);
    }

    let step = std::f64::consts::TAU / nodes as f64;
    if p.is_infinite() {
        let mut max = 0.0f64;
        for k in 0..nodes {
            let theta = step * k as f64;
            let z = Complex64::from_polar(radius, theta);
            max = max.max(g.eval(z).norm());
        }
        return Ok(max);
    }

    let pv = p.value();
    let mut sum = 0.0f64;
    for k in 0..nodes {
        let theta = step * k as f64;
        let z = Complex64::from_polar(radius, theta);
        sum += g.eval(z).norm().powf(pv);
    }
    Ok((sum / nodes as f64).powf(1.0 / pv))
}

/// `H^p` norm with the default grid: radius 1 for boundary-continuous
/// functions, radius `1 - 1e-6` otherwise (a small systematic underestimate
/// for functions growing toward the boundary).
pub fn hardy_norm<E: BoundaryEvaluator + ?Sized>(g: &E, p: HardyExponent) -> Result<f64> {
    let radius = if g.boundary_continuous() {
        1.0
    } else {
        NEAR_BOUNDARY_RADIUS
    };
    hp_norm(g, p, QUADRATURE_NODES, radius)
}

/// `H^2` norm from Taylor coefficients: `sqrt(sum |c_k|^2)` (Parseval).
pub fn h2_norm_from_coefficients(coefficients: &[Complex64]) -> f64 {
    coefficients
        .iter()
        .map(|c| c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Outcome of testing `|g(z)| <= (1 - |z|^2)^(-1/p)` at one point.
#[derive(Debug, Clone, Copy)]
pub struct PointwiseBoundReport {
    pub value: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Check the unit-ball growth bound at `z`. For `p = inf` the bound
/// degenerates to 1. `ok` allows `1e-9` of slack for roundoff.
pub fn check_pointwise_bound<E: BoundaryEvaluator + ?Sized>(
    g: &E,
    p: HardyExponent,
    z: DiskPoint,
) -> PointwiseBoundReport {
    let value = g.eval(z.to_complex()).norm();
    let bound = if p.is_infinite() {
        1.0
    } else {
        (1.0 - z.to_complex().norm_sqr()).powf(-1.0 / p.value())
    };
    PointwiseBoundReport {
        value,
        bound,
        ok: value <= bound + 1e-9,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(re: f64, im: f64) -> DiskPoint {
        DiskPoint::new(re, im).unwrap()
    }

    fn random_disk_point(rng: &mut ChaCha8Rng, max_modulus: f64) -> DiskPoint {
        let r = max_modulus * rng.gen::<f64>();
        let theta = std::f64::consts::TAU * rng.gen::<f64>();
        pt(r * theta.cos(), r * theta.sin())
    }

    /// Independent quadrature oracle: composite Simpson mean over a period.
    /// Different rule and node count than the implementation under test.
    fn simpson_mean(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
        let h = std::f64::consts::TAU / panels as f64;
        let mut sum = f(0.0) + f(std::f64::consts::TAU);
        for k in 1..panels {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(h * k as f64);
        }
        sum * h / 3.0 / std::f64::consts::TAU
    }

    #[test]
    fn norm_of_constant_is_its_modulus() {
        let g = Constant(Complex64::new(0.0, 1.0));
        for p in [HardyExponent::ONE, HardyExponent::TWO, HardyExponent::INFINITY] {
            let n = hp_norm(&g, p, 64, 1.0).unwrap();
            assert!((n - 1.0).abs() < 1e-15);
        }
    }

    /// ||1 + z||_2 = sqrt(2): the 2-norm of coefficients (1, 1).
    #[test]
    fn h2_norm_of_one_plus_z() {
        let g = Polynomial {
            coefficients: vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
        };
        let n = hp_norm(&g, HardyExponent::TWO, QUADRATURE_NODES, 1.0).unwrap();
        assert!((n - 2.0f64.sqrt()).abs() < 1e-13);
    }

    /// ||1 + z||_4 = 6^(1/4): the circle mean of |1 + e^{i t}|^4 =
    /// (2 + 2 cos t)^2 is 6. Cross-checked against a Simpson oracle before
    /// freezing the constant.
    #[test]
    fn h4_norm_of_one_plus_z() {
        let expected = 1.565_084_580_073_287_3; // 6^(1/4)
        let oracle = simpson_mean(|t| (2.0 + 2.0 * t.cos()).powi(2), 100_000)
            .powf(0.25);
        assert!((oracle - expected).abs() < 1e-10, "oracle drifted: {oracle}");

        let g = Polynomial {
            coefficients: vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
        };
        let n = hp_norm(&g, HardyExponent::new(4.0).unwrap(), QUADRATURE_NODES, 1.0).unwrap();
        assert!((n - expected).abs() < 1e-12, "norm {n}");
    }

    #[test]
    fn sup_norm_of_one_plus_z_is_two() {
        let g = Polynomial {
            coefficients: vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
        };
        let n = hp_norm(&g, HardyExponent::INFINITY, 64, 1.0).unwrap();
        assert!((n - 2.0).abs() < 1e-15);
    }

    #[test]
    fn norm_rejects_bad_grids_and_radii() {
        let g = Constant(Complex64::new(1.0, 0.0));
        assert!(matches!(
            hp_norm(&g, HardyExponent::TWO, 15, 1.0),
            Err(Error::InvalidNodeCount { .. })
        ));
        assert!(matches!(
            hp_norm(&g, HardyExponent::TWO, 100, 1.0),
            Err(Error::InvalidNodeCount { .. })
        ));
        assert!(matches!(
            hp_norm(&g, HardyExponent::TWO, 64, 0.0),
            Err(Error::InvalidRadius { .. })
        ));
        assert!(matches!(
            hp_norm(&g, HardyExponent::TWO, 64, 1.5),
            Err(Error::InvalidRadius { .. })
        ));
    }

    #[test]
    fn radius_one_requires_boundary_continuity() {
        struct Rough;
        impl BoundaryEvaluator for Rough {
            fn eval(&self, z: Complex64) -> Complex64 {
                z
            }
            fn boundary_continuous(&self) -> bool {
                false
            }
        }
        assert!(matches!(
            hp_norm(&Rough, HardyExponent::TWO, 64, 1.0),
            Err(Error::BoundaryDiscontinuous)
        ));
        // hardy_norm falls back to the near-boundary radius instead.
        let n = hardy_norm(&Rough, HardyExponent::TWO).unwrap();
        assert!((n - NEAR_BOUNDARY_RADIUS).abs() < 1e-9);
    }

    #[test]
    fn exponent_validation() {
        assert!(HardyExponent::new(1.0).is_ok());
        assert!(HardyExponent::new(f64::INFINITY).is_ok());
        assert!(matches!(
            HardyExponent::new(0.5),
            Err(Error::InvalidExponent { .. })
        ));
        assert!(matches!(
            HardyExponent::new(f64::NAN),
            Err(Error::InvalidExponent { .. })
        ));
    }

    /// ||g||_p is nondecreasing in p (Jensen on the circle mean).
    #[test]
    fn norm_monotone_in_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let coefficients = (0..6)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let g = Polynomial { coefficients };
            let n1 = hp_norm(&g, HardyExponent::ONE, QUADRATURE_NODES, 1.0).unwrap();
            let n2 = hp_norm(&g, HardyExponent::TWO, QUADRATURE_NODES, 1.0).unwrap();
            let n4 = hp_norm(&g, HardyExponent::new(4.0).unwrap(), QUADRATURE_NODES, 1.0).unwrap();
            assert!(n1 <= n2 + 1e-10 && n2 <= n4 + 1e-10, "{n1} {n2} {n4}");
        }
    }

    /// Finite Blaschke products are inner: unit norm for every p.
    #[test]
    fn blaschke_products_have_unit_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..25 {
            let degree = rng.gen_range(1..=8);
            let zeros: Vec<DiskPoint> = (0..degree)
                .map(|_| random_disk_point(&mut rng, 0.9))
                .collect();
            let g = BlaschkeProduct {
                zeros: ZeroConfiguration::new(zeros).unwrap(),
            };
            for p in [
                HardyExponent::ONE,
                HardyExponent::TWO,
                HardyExponent::new(4.0).unwrap(),
                HardyExponent::INFINITY,
            ] {
                let n = hp_norm(&g, p, QUADRATURE_NODES, 1.0).unwrap();
                assert!((n - 1.0).abs() < 1e-9, "p = {:?}: {n}", p.value());
            }
        }
    }

    /// Parseval: quadrature 2-norm of a polynomial equals the coefficient
    /// 2-norm (the trapezoid rule is exact below the node count).
    #[test]
    fn parseval_cross_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let coefficients: Vec<Complex64> = (0..17)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let by_coeff = h2_norm_from_coefficients(&coefficients);
            let g = Polynomial { coefficients };
            let by_quad = hp_norm(&g, HardyExponent::TWO, QUADRATURE_NODES, 1.0).unwrap();
            assert!((by_coeff - by_quad).abs() < 1e-10);
        }
    }

    #[test]
    fn coefficient_norm_basics() {
        assert_eq!(h2_norm_from_coefficients(&[]), 0.0);
        let n = h2_norm_from_coefficients(&[Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)]);
        assert!((n - 5.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_at_origin_and_diagonal() {
        let w = pt(0.3, 0.1);
        let at_zero = szego_kernel(w, Complex64::new(0.0, 0.0)).unwrap();
        assert!((at_zero - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let diag = szego_kernel(w, w.to_complex()).unwrap();
        let expected = 1.0 / (1.0 - w.to_complex().norm_sqr());
        assert!((diag - Complex64::new(expected, 0.0)).norm() < 1e-14);
    }

    /// Reproducing property through boundary quadrature: the circle pairing
    /// of f(z) = z^2 against k_w recovers f(w) = w^2 at w = 0.3 + 0.1i.
    #[test]
    fn kernel_reproduces_point_evaluation() {
        let w = pt(0.3, 0.1);
        let f = |z: Complex64| z * z;
        let nodes = 4096;
        let mut pairing = Complex64::new(0.0, 0.0);
        for k in 0..nodes {
            let theta = std::f64::consts::TAU * k as f64 / nodes as f64;
            let z = Complex64::from_polar(1.0, theta);
            pairing += f(z) * szego_kernel(w, z).unwrap().conj();
        }
        pairing /= nodes as f64;
        let expected = w.to_complex() * w.to_complex();
        assert!((pairing - expected).norm() < 1e-13, "pairing {pairing}");
    }

    /// ||k_w||^2 = k_w(w) = (1 - |w|^2)^(-1), measured by quadrature.
    #[test]
    fn kernel_norm_squared_is_diagonal_value() {
        let w = pt(0.5, 0.0);
        let n = hp_norm(&SzegoKernel { w }, HardyExponent::TWO, QUADRATURE_NODES, 1.0).unwrap();
        let expected = (1.0 - 0.25f64).powf(-0.5);
        assert!((n - expected).abs() < 1e-12);
    }

    /// The normalized kernel attains the p = 2 growth bound with equality at
    /// its base point: both sides equal (1 - 0.25)^(-1/2) = 1.1547005383792515.
    #[test]
    fn normalized_kernel_attains_growth_bound() {
        let w = pt(0.5, 0.0);
        let g = NormalizedSzegoKernel { w };
        let norm = hp_norm(&g, HardyExponent::TWO, QUADRATURE_NODES, 1.0).unwrap();
        assert!((norm - 1.0).abs() < 1e-12, "normalized kernel norm {norm}");

        let report = check_pointwise_bound(&g, HardyExponent::TWO, w);
        let expected = 1.154_700_538_379_251_5;
        assert!((report.value - expected).abs() < 1e-12);
        assert!((report.bound - expected).abs() < 1e-12);
        assert!((report.value - report.bound).abs() < 1e-8);
        assert!(report.ok);
    }

    /// Growth bound holds across the unit-norm family at random points.
    #[test]
    fn growth_bound_on_unit_norm_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let z = random_disk_point(&mut rng, 0.98);
            let w = random_disk_point(&mut rng, 0.9);
            let zeros: Vec<DiskPoint> = (0..rng.gen_range(1..=4))
                .map(|_| random_disk_point(&mut rng, 0.9))
                .collect();
            let blaschke = BlaschkeProduct {
                zeros: ZeroConfiguration::new(zeros).unwrap(),
            };
            let kernel = NormalizedSzegoKernel { w };
            let theta = std::f64::consts::TAU * rng.gen::<f64>();
            let constant = Constant(Complex64::from_polar(1.0, theta));

            for p in [HardyExponent::ONE, HardyExponent::TWO, HardyExponent::INFINITY] {
                assert!(check_pointwise_bound(&constant, p, z).ok);
                assert!(check_pointwise_bound(&blaschke, p, z).ok);
            }
            // The kernel is unit-norm in H^2 specifically.
            assert!(check_pointwise_bound(&kernel, HardyExponent::TWO, z).ok);
        }
    }

    /// Gram identity for kernel combinations:
    /// ||sum c_i k_{w_i}||^2 = sum_{ij} c_i conj(c_j) / (1 - conj(w_i) w_j).
    #[test]
    fn kernel_combination_norm_matches_gram_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..10 {
            let m = rng.gen_range(1..=4);
            let base_points: Vec<DiskPoint> =
                (0..m).map(|_| random_disk_point(&mut rng, 0.8)).collect();
            let coefficients: Vec<Complex64> = (0..m)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let mut gram = Complex64::new(0.0, 0.0);
            for (i, wi) in base_points.iter().enumerate() {
                for (j, wj) in base_points.iter().enumerate() {
                    let inner = (Complex64::new(1.0, 0.0)
                        - wi.to_complex().conj() * wj.to_complex())
                    .inv();
                    gram += coefficients[i] * coefficients[j].conj() * inner;
                }
            }
            let g = KernelCombination {
                base_points,
                coefficients,
            };
            let by_quad = hp_norm(&g, HardyExponent::TWO, QUADRATURE_NODES, 1.0).unwrap();
            assert!((by_quad * by_quad - gram.re).abs() < 1e-10);
            assert!(gram.im.abs() < 1e-12);
        }
    }
}
