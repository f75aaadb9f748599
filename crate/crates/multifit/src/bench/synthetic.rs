//! Synthetic multi-structure dataset generation: exact model samples with
//! normal perpendicular noise plus uniform gross outliers.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{ModelKind, ObservationKind, PointSet};

/// Axis-aligned bounding region of the generated observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Region {
    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        [
            rng.random_range(self.min[0]..self.max[0]),
            rng.random_range(self.min[1]..self.max[1]),
        ]
    }
}

/// One ground-truth structure: model parameters, inlier count and noise
/// standard deviation in residual units. A structure may carry its own
/// sampling region (a plane patch, a line segment's extent); it defaults to
/// the dataset region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub params: Vec<f64>,
    pub inliers: usize,
    pub noise_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
}

/// Recipe for a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: ModelKind,
    pub structures: Vec<StructureSpec>,
    pub gross_outliers: usize,
    pub region: Region,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn total_points(&self) -> usize {
        self.structures.iter().map(|s| s.inliers).sum::<usize>() + self.gross_outliers
    }

    /// Fraction of points not belonging to any structure.
    pub fn gross_outlier_rate(&self) -> f64 {
        self.gross_outliers as f64 / self.total_points() as f64
    }
}

/// Normalized line parameters through two points.
pub fn line_through(p: [f64; 2], q: [f64; 2]) -> Vec<f64> {
    let dx = q[0] - p[0];
    let dy = q[1] - p[1];
    let len = dx.hypot(dy);
    let a = dy / len;
    let b = -dx / len;
    vec![a, b, -(a * p[0] + b * p[1])]
}

/// Generate the dataset: structures first (labels 1..S in order), gross
/// outliers last (label 0). Deterministic given the spec's seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let obs_kind = spec.kind.observation_kind();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(spec.total_points());
    let mut labels: Vec<usize> = Vec::with_capacity(spec.total_points());

    for (idx, structure) in spec.structures.iter().enumerate() {
        let label = idx + 1;
        for _ in 0..structure.inliers {
            rows.push(sample_structure_point(spec, structure, &mut rng));
            labels.push(label);
        }
    }
    for _ in 0..spec.gross_outliers {
        let row = match obs_kind {
            ObservationKind::PlanarPoint => spec.region.sample(&mut rng).to_vec(),
            ObservationKind::Correspondence => {
                let a = spec.region.sample(&mut rng);
                let b = spec.region.sample(&mut rng);
                vec![a[0], a[1], b[0], b[1]]
            }
        };
        rows.push(row);
        labels.push(0);
    }

    PointSet::new(obs_kind, rows, Some(labels)).expect("generated rows are well-formed")
}

fn sample_structure_point(
    spec: &SyntheticSpec,
    structure: &StructureSpec,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let noise = Normal::new(0.0, structure.noise_std.max(0.0))
        .expect("noise std is finite and nonnegative");
    let region = &structure.region.unwrap_or(spec.region);
    match spec.kind {
        ModelKind::Line2d => {
            let p = &structure.params;
            let norm = p[0].hypot(p[1]);
            let (a, b, c) = (p[0] / norm, p[1] / norm, p[2] / norm);
            // Closest point to the origin plus the in-line direction.
            let base = [-c * a, -c * b];
            let dir = [-b, a];
            let (t_lo, t_hi) = clip_to_region(base, dir, region)
                .unwrap_or((-region.diagonal(), region.diagonal()));
            let t = rng.random_range(t_lo..t_hi);
            let offset = noise.sample(rng);
            vec![
                base[0] + t * dir[0] + offset * a,
                base[1] + t * dir[1] + offset * b,
            ]
        }
        ModelKind::Circle2d => {
            let (cx, cy, r) = (
                structure.params[0],
                structure.params[1],
                structure.params[2],
            );
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let rho = r + noise.sample(rng);
            vec![cx + rho * theta.cos(), cy + rho * theta.sin()]
        }
        ModelKind::Homography => {
            let h = Matrix3::from_row_slice(&structure.params);
            // Keep correspondences whose image lands near the region.
            for _ in 0..100 {
                let x1 = region.sample(rng);
                let y = h * Vector3::new(x1[0], x1[1], 1.0);
                if y.z.abs() < 1e-12 {
                    continue;
                }
                let x2 = [y.x / y.z, y.y / y.z];
                let margin = 0.5 * region.diagonal();
                if x2[0] < region.min[0] - margin
                    || x2[0] > region.max[0] + margin
                    || x2[1] < region.min[1] - margin
                    || x2[1] > region.max[1] + margin
                {
                    continue;
                }
                return vec![
                    x1[0],
                    x1[1],
                    x2[0] + noise.sample(rng),
                    x2[1] + noise.sample(rng),
                ];
            }
            // Give up on the margin requirement rather than loop forever.
            let x1 = region.sample(rng);
            let y = h * Vector3::new(x1[0], x1[1], 1.0);
            let w = if y.z.abs() < 1e-12 { 1e-12 } else { y.z };
            vec![
                x1[0],
                x1[1],
                y.x / w + noise.sample(rng),
                y.y / w + noise.sample(rng),
            ]
        }
        ModelKind::Fundamental => {
            let f = Matrix3::from_row_slice(&structure.params);
            for _ in 0..100 {
                let x1 = region.sample(rng);
                let l = f * Vector3::new(x1[0], x1[1], 1.0);
                let norm = l.x.hypot(l.y);
                if norm < 1e-12 {
                    continue;
                }
                // A point on the epipolar line plus its direction.
                let base = [-l.z * l.x / (norm * norm), -l.z * l.y / (norm * norm)];
                let dir = [-l.y / norm, l.x / norm];
                let Some((t_lo, t_hi)) = clip_to_region(base, dir, region) else {
                    continue;
                };
                let t = rng.random_range(t_lo..t_hi);
                let offset = noise.sample(rng);
                return vec![
                    x1[0],
                    x1[1],
                    base[0] + t * dir[0] + offset * l.x / norm,
                    base[1] + t * dir[1] + offset * l.y / norm,
                ];
            }
            // Epipolar line keeps missing the region; fall back to the
            // closest point on it.
            let x1 = region.sample(rng);
            let l = f * Vector3::new(x1[0], x1[1], 1.0);
            let norm = l.x.hypot(l.y).max(1e-12);
            vec![
                x1[0],
                x1[1],
                -l.z * l.x / (norm * norm),
                -l.z * l.y / (norm * norm),
            ]
        }
    }
}

/// Parameter interval of `base + t·dir` inside the region, when it exists.
fn clip_to_region(base: [f64; 2], dir: [f64; 2], region: &Region) -> Option<(f64, f64)> {
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for axis in 0..2 {
        let (lo, hi) = (region.min[axis], region.max[axis]);
        if dir[axis].abs() < 1e-12 {
            if base[axis] < lo || base[axis] > hi {
                return None;
            }
            continue;
        }
        let t0 = (lo - base[axis]) / dir[axis];
        let t1 = (hi - base[axis]) / dir[axis];
        let (t0, t1) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        t_lo = t_lo.max(t0);
        t_hi = t_hi.min(t1);
    }
    (t_lo < t_hi).then_some((t_lo, t_hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::residual;

    fn three_line_spec() -> SyntheticSpec {
        let region = Region {
            min: [0.0, 0.0],
            max: [500.0, 500.0],
        };
        SyntheticSpec {
            kind: ModelKind::Line2d,
            structures: vec![
                StructureSpec {
                    params: line_through([0.0, 80.0], [500.0, 420.0]),
                    inliers: 79,
                    noise_std: 2.0,
                    region: None,
                },
                StructureSpec {
                    params: line_through([0.0, 420.0], [500.0, 80.0]),
                    inliers: 79,
                    noise_std: 2.0,
                    region: None,
                },
                StructureSpec {
                    params: line_through([250.0, 0.0], [250.0, 500.0]),
                    inliers: 79,
                    noise_std: 2.0,
                    region: None,
                },
            ],
            gross_outliers: 263,
            region,
            seed: 7,
        }
    }

    #[test]
    fn noise_free_inliers_sit_on_the_model() {
        let spec = SyntheticSpec {
            kind: ModelKind::Line2d,
            structures: vec![StructureSpec {
                params: line_through([0.0, 0.0], [100.0, 100.0]),
                inliers: 100,
                noise_std: 0.0,
                region: None,
            }],
            gross_outliers: 0,
            region: Region {
                min: [0.0, 0.0],
                max: [100.0, 100.0],
            },
            seed: 1,
        };
        let points = generate_synthetic(&spec);
        for obs in points.iter() {
            assert!(residual(ModelKind::Line2d, &spec.structures[0].params, obs) <= 1e-9);
        }
    }

    #[test]
    fn label_histogram_matches_spec_counts() {
        let spec = three_line_spec();
        let points = generate_synthetic(&spec);
        let labels = points.labels().unwrap();
        assert_eq!(points.len(), spec.total_points());
        for (idx, s) in spec.structures.iter().enumerate() {
            assert_eq!(labels.iter().filter(|&&l| l == idx + 1).count(), s.inliers);
        }
        assert_eq!(
            labels.iter().filter(|&&l| l == 0).count(),
            spec.gross_outliers
        );
    }

    #[test]
    fn three_line_rates_near_table_targets() {
        let spec = three_line_spec();
        // Per-structure outlier rate (pseudo + gross) and gross rate.
        let n = spec.total_points() as f64;
        let per_structure = (n - 79.0) / n * 100.0;
        let gross = spec.gross_outlier_rate() * 100.0;
        assert!((per_structure - 84.25).abs() < 0.5, "{per_structure}");
        assert!((gross - 52.63).abs() < 0.5, "{gross}");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = three_line_spec();
        assert_eq!(generate_synthetic(&spec), generate_synthetic(&spec));
    }

    #[test]
    fn circle_inliers_have_expected_radial_noise() {
        let spec = SyntheticSpec {
            kind: ModelKind::Circle2d,
            structures: vec![StructureSpec {
                params: vec![250.0, 250.0, 100.0],
                inliers: 400,
                noise_std: 2.0,
                region: None,
            }],
            gross_outliers: 0,
            region: Region {
                min: [0.0, 0.0],
                max: [500.0, 500.0],
            },
            seed: 3,
        };
        let points = generate_synthetic(&spec);
        let residuals: Vec<f64> = points
            .iter()
            .map(|o| residual(ModelKind::Circle2d, &spec.structures[0].params, o))
            .collect();
        let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
        // Half-normal mean of |N(0, 2)| is 2·√(2/π) ≈ 1.60.
        assert!((mean - 1.6).abs() < 0.3, "mean |residual| {mean}");
    }

    #[test]
    fn homography_inliers_respect_the_model() {
        let h = vec![1.1, 0.02, 5.0, -0.01, 0.95, -3.0, 1e-4, -5e-5, 1.0];
        let spec = SyntheticSpec {
            kind: ModelKind::Homography,
            structures: vec![StructureSpec {
                params: h.clone(),
                inliers: 200,
                noise_std: 0.0,
                region: None,
            }],
            gross_outliers: 0,
            region: Region {
                min: [0.0, 0.0],
                max: [400.0, 400.0],
            },
            seed: 9,
        };
        let points = generate_synthetic(&spec);
        for obs in points.iter() {
            assert!(residual(ModelKind::Homography, &h, obs) <= 1e-7);
        }
    }

    #[test]
    fn fundamental_inliers_satisfy_epipolar_constraint() {
        // Rank-2 matrix built from two rank-1 terms.
        let f = vec![0.2, -0.4, 30.0, 0.5, 0.1, -20.0, -0.001, 0.002, 1.0];
        // Force rank 2 via cross-product structure is overkill here: use a
        // classic skew-symmetric-times-rotation style matrix instead.
        let f = {
            let a = Vector3::new(f[0], f[1], f[2]);
            let b = Vector3::new(f[3], f[4], f[5]);
            let m = a * Vector3::new(1.0, 0.5, 0.001).transpose()
                + b * Vector3::new(-0.3, 1.0, 0.002).transpose();
            m.transpose().iter().cloned().collect::<Vec<f64>>()
        };
        let spec = SyntheticSpec {
            kind: ModelKind::Fundamental,
            structures: vec![StructureSpec {
                params: f.clone(),
                inliers: 100,
                noise_std: 0.0,
                region: None,
            }],
            gross_outliers: 0,
            region: Region {
                min: [0.0, 0.0],
                max: [300.0, 300.0],
            },
            seed: 11,
        };
        let points = generate_synthetic(&spec);
        for obs in points.iter() {
            assert!(
                residual(ModelKind::Fundamental, &f, obs) <= 1e-6,
                "residual {}",
                residual(ModelKind::Fundamental, &f, obs)
            );
        }
    }
}
