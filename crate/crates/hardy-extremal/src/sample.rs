//! Deterministic families of constraint points in the disk, with JSON
//! persistence.
//!
//! The parent sequences behind the radial families are infinite; whether
//! `sum (1 - |z_j|)` diverges is a property of the family law, so the
//! classification is carried as metadata and never inferred from a finite
//! prefix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disk::DiskPoint;
use crate::error::{Error, Result};
use crate::io;
use crate::tolerances::DEDUP_DISTANCE;

pub const SAMPLE_FILE_VERSION: u64 = 1;

/// Generator family plus its parameters. Radial families place `|z_j| =
/// 1 - 1/(j+1)^beta` (beta = 1 for harmonic); angles come from the seeded
/// generator unless pinned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum GeneratorFamily {
    RadialHarmonic {
        #[serde(default)]
        angle: Option<f64>,
    },
    RadialPower {
        beta: f64,
        #[serde(default)]
        angle: Option<f64>,
    },
    Spiral {
        angle_step: f64,
    },
    UniformAnnulus {
        r_min: f64,
        r_max: f64,
    },
}

pub const KNOWN_FAMILIES: [&str; 4] = ["radial_harmonic", "radial_power", "spiral", "uniform_annulus"];

impl GeneratorFamily {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorFamily::RadialHarmonic { .. } => "radial_harmonic",
            GeneratorFamily::RadialPower { .. } => "radial_power",
            GeneratorFamily::Spiral { .. } => "spiral",
            GeneratorFamily::UniformAnnulus { .. } => "uniform_annulus",
        }
    }

    /// Whether the infinite parent series `sum (1 - |z_j|)` converges.
    /// Harmonic and spiral radii give the harmonic series (divergent); power
    /// radii give `sum 1/(j+1)^beta`; annulus terms are bounded below by
    /// `1 - r_max > 0`.
    pub fn blaschke_convergent(&self) -> bool {
        match self {
            GeneratorFamily::RadialHarmonic { .. } => false,
            GeneratorFamily::RadialPower { beta, .. } => *beta > 1.0,
            GeneratorFamily::Spiral { .. } => false,
            GeneratorFamily::UniformAnnulus { .. } => false,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |detail: String| Err(Error::InvalidGeneratorParams { detail });
        match self {
            GeneratorFamily::RadialHarmonic { angle } => {
                if let Some(a) = angle {
                    if !a.is_finite() {
                        return bad(format!("angle must be finite, got {a}"));
                    }
                }
            }
            GeneratorFamily::RadialPower { beta, angle } => {
                if !beta.is_finite() || *beta <= 0.0 {
                    return bad(format!("beta must be finite and > 0, got {beta}"));
                }
                if let Some(a) = angle {
                    if !a.is_finite() {
                        return bad(format!("angle must be finite, got {a}"));
                    }
                }
            }
            GeneratorFamily::Spiral { angle_step } => {
                if !angle_step.is_finite() {
                    return bad(format!("angle_step must be finite, got {angle_step}"));
                }
            }
            GeneratorFamily::UniformAnnulus { r_min, r_max } => {
                if !r_min.is_finite() || !r_max.is_finite() || *r_min < 0.0 || *r_max >= 1.0 || r_min >= r_max
                {
                    return bad(format!(
                        "annulus needs 0 <= r_min < r_max < 1, got [{r_min}, {r_max}]"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// How a sample was produced: family, parameters, seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorDescriptor {
    #[serde(flatten)]
    pub family: GeneratorFamily,
    pub seed: u64,
}

/// A finite ordered list of distinct disk points with generator provenance.
/// Points closer than `DEDUP_DISTANCE` are merged at construction (first
/// occurrence wins); the partial Blaschke sum is cached.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    points: Vec<DiskPoint>,
    generator: GeneratorDescriptor,
    blaschke_partial_sum: f64,
}

impl PointSample {
    pub fn new(points: Vec<DiskPoint>, generator: GeneratorDescriptor) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut distinct: Vec<DiskPoint> = Vec::with_capacity(points.len());
        for p in points {
            if !distinct.iter().any(|q| q.distance(&p) < DEDUP_DISTANCE) {
                distinct.push(p);
            }
        }
        let blaschke_partial_sum = partial_sum(&distinct);
        Ok(PointSample {
            points: distinct,
            generator,
            blaschke_partial_sum,
        })
    }

    pub fn points(&self) -> &[DiskPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn generator(&self) -> &GeneratorDescriptor {
        &self.generator
    }

    /// Cached `sum (1 - |z_j|)`; construction guarantees it matches a fresh
    /// recomputation to well under 1e-12.
    pub fn blaschke_partial_sum(&self) -> f64 {
        self.blaschke_partial_sum
    }
}

fn partial_sum(points: &[DiskPoint]) -> f64 {
    points.iter().map(|p| 1.0 - p.modulus()).sum()
}

/// Partial Blaschke sum plus the family-level divergence classification.
#[derive(Debug, Clone, Copy)]
pub struct BlaschkeSumReport {
    pub partial_sum: f64,
    /// True when the parent series converges (a Blaschke family).
    pub convergent_family: bool,
}

/// Recompute `sum (1 - |z_j|)` over the sample and report the family
/// classification.
pub fn blaschke_sum(sample: &PointSample) -> BlaschkeSumReport {
    BlaschkeSumReport {
        partial_sum: partial_sum(sample.points()),
        convergent_family: sample.generator().family.blaschke_convergent(),
    }
}

/// Generate `count` points of the family, deterministically for a fixed
/// (family, count, seed) triple.
pub fn generate_sample(family: GeneratorFamily, count: usize, seed: u64) -> Result<PointSample> {
    family.validate()?;
    if count == 0 {
        return Err(Error::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    for j in 1..=count {
        let (r, theta) = match &family {
            GeneratorFamily::RadialHarmonic { angle } => {
                let theta = angle.unwrap_or_else(|| rng.gen::<f64>() * std::f64::consts::TAU);
                (1.0 - 1.0 / (j as f64 + 1.0), theta)
            }
            GeneratorFamily::RadialPower { beta, angle } => {
                let theta = angle.unwrap_or_else(|| rng.gen::<f64>() * std::f64::consts::TAU);
                (1.0 - (j as f64 + 1.0).powf(-beta), theta)
            }
            GeneratorFamily::Spiral { angle_step } => {
                (1.0 - 1.0 / (j as f64 + 1.0), j as f64 * angle_step)
            }
            GeneratorFamily::UniformAnnulus { r_min, r_max } => {
                // Area-uniform radius, uniform angle.
                let u = rng.gen::<f64>();
                let r = (r_min * r_min + u * (r_max * r_max - r_min * r_min)).sqrt();
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                (r, theta)
            }
        };
        let point = DiskPoint::new(r * theta.cos(), r * theta.sin())
            .map_err(|_| Error::GeneratorAtBoundary { index: j })?;
        points.push(point);
    }
    PointSample::new(points, GeneratorDescriptor { family, seed })
}

#[derive(Serialize, Deserialize)]
struct SampleFile {
    version: u64,
    #[serde(flatten)]
    family: GeneratorFamily,
    seed: u64,
    points: Vec<(f64, f64)>,
}

/// Write a sample as JSON (atomic; full-precision coordinates).
pub fn save_sample(path: &std::path::Path, sample: &PointSample) -> Result<()> {
    let file = SampleFile {
        version: SAMPLE_FILE_VERSION,
        family: sample.generator().family.clone(),
        seed: sample.generator().seed,
        points: sample.points().iter().map(|p| (p.re(), p.im())).collect(),
    };
    io::write_json(path, &file)
}

/// Load a sample, validating version, family name, and every point.
pub fn load_sample(path: &std::path::Path) -> Result<PointSample> {
    let value = io::read_json_value(path)?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::malformed(path, "missing integer field \"version\""))?;
    if version != SAMPLE_FILE_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: SAMPLE_FILE_VERSION,
        });
    }
    let family_name = value
        .get("family")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::malformed(path, "missing string field \"family\""))?;
    if !KNOWN_FAMILIES.contains(&family_name) {
        return Err(Error::UnknownFamily {
            name: family_name.to_string(),
        });
    }
    let file: SampleFile =
        serde_json::from_value(value).map_err(|e| Error::malformed(path, e))?;
    let mut points = Vec::with_capacity(file.points.len());
    for (re, im) in file.points {
        points.push(DiskPoint::new(re, im)?);
    }
    PointSample::new(
        points,
        GeneratorDescriptor {
            family: file.family,
            seed: file.seed,
        },
    )
}
