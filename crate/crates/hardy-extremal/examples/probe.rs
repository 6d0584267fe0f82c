use hardy_extremal::*;
use hardy_extremal::sample::GeneratorFamily;
use hardy_extremal::search::ConstraintMode;
use num_complex::Complex64;

fn main() {
    let s = sample::generate_sample(
        GeneratorFamily::UniformAnnulus { r_min: 0.15, r_max: 0.85 },
        10,
        11,
    )
    .unwrap();
    let eps = 0.5f64.powi(4); // 6.25e-2
    let prob = search::ExtremalProblem::new(
        s.clone(), eps, 0.5, hardy::HardyExponent::TWO, ConstraintMode::Weighted,
    )
    .unwrap();
    let k = 4usize;
    let theta = std::f64::consts::TAU * k as f64 / 64.0;
    let z0 = Complex64::from_polar(0.5, theta);
    match solve_extremal_at_point(&prob, z0) {
        Ok(c) => println!("ok value={:.12e} kkt={:.3e}", c.achieved_value, c.residuals.kkt_residual),
        Err(e) => println!("ERR {e}"),
    }
}
