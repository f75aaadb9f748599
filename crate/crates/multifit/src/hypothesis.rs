//! Hypothesis generation: proximity-guided minimal-subset sampling plus the
//! iterative K-th ordered scale estimator (IKOSE) for per-hypothesis inlier
//! scales.
//!
//! Sampling draws the first subset index uniformly and every subsequent index
//! with probability proportional to `exp(−d(x_j, x_first)² / σ_p²)` over the
//! not-yet-chosen indices, so subsets concentrate on spatially coherent
//! neighborhoods. Each hypothesis slot owns its own deterministic RNG stream,
//! which makes the output a pure function of the seed regardless of
//! evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{self, ModelHypothesis, ModelKind, PointSet, PreparedModel};

#[derive(Debug, Error, PartialEq)]
pub enum HypothesisError {
    #[error("need at least {needed} points for {kind:?}, got {got}")]
    NotEnoughPoints {
        kind: ModelKind,
        needed: usize,
        got: usize,
    },
    #[error("no non-degenerate minimal subset found after {retries} retries per slot")]
    SamplingExhausted { retries: usize },
    #[error("fewer than K = {k} residuals stayed within the inlier cutoff (had {inliers})")]
    InsufficientInliers { k: usize, inliers: usize },
}

/// Minimal-subset sampler parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Number of hypotheses M to generate.
    pub hypothesis_count: usize,
    /// Spatial kernel width of the proximity weighting, in observation units.
    pub proximity_sigma: f64,
    pub seed: u64,
    /// Resampling attempts per slot before the slot is skipped.
    pub max_degenerate_retries: usize,
}

impl SamplerConfig {
    /// Defaults for a given data set: the kernel width tracks the data scale
    /// as one tenth of the bounding-box diagonal.
    pub fn for_points(points: &PointSet, hypothesis_count: usize, seed: u64) -> Self {
        SamplerConfig {
            hypothesis_count,
            proximity_sigma: default_proximity_sigma(points),
            seed,
            max_degenerate_retries: 50,
        }
    }
}

/// One tenth of the observation bounding-box diagonal (floored well above
/// zero so exact-duplicate degenerate data cannot produce a zero kernel).
pub fn default_proximity_sigma(points: &PointSet) -> f64 {
    let dim = points.kind().dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for obs in points.iter() {
        for (d, &v) in obs.iter().enumerate() {
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    let diag = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    (0.1 * diag).max(1e-12)
}

/// IKOSE parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct IkoseConfig {
    /// Ordinal index K of the residual used as the scale anchor.
    pub k: usize,
    /// Inlier cutoff in multiples of σ.
    pub inlier_cutoff: f64,
    pub max_iters: usize,
    /// Floor applied to the returned scale.
    pub min_scale: f64,
}

impl IkoseConfig {
    /// K = max(10, ⌈0.1·N⌉), clamped to N.
    pub fn for_count(n: usize) -> Self {
        let k = ((n as f64 * 0.1).ceil() as usize).max(10).min(n);
        IkoseConfig {
            k,
            inlier_cutoff: 2.5,
            max_iters: 20,
            min_scale: 1e-9,
        }
    }
}

/// Output of the sampler: index subsets plus how many slots were abandoned
/// as persistently degenerate.
#[derive(Debug, Clone)]
pub struct SampledSubsets {
    pub subsets: Vec<Vec<usize>>,
    pub degenerate_skipped: usize,
}

/// Draw up to M minimal subsets of distinct indices, each passing the solver
/// degeneracy test. Deterministic given the seed.
pub fn proximity_sample(
    points: &PointSet,
    kind: ModelKind,
    cfg: &SamplerConfig,
) -> Result<SampledSubsets, HypothesisError> {
    let n = points.len();
    let subset_size = kind.minimal_subset_size();
    if n < subset_size {
        return Err(HypothesisError::NotEnoughPoints {
            kind,
            needed: subset_size,
            got: n,
        });
    }
    let mut subsets = Vec::with_capacity(cfg.hypothesis_count);
    let mut skipped = 0usize;
    for slot in 0..cfg.hypothesis_count {
        match sample_slot(points, kind, cfg, slot as u64) {
            Some(subset) => subsets.push(subset),
            None => skipped += 1,
        }
    }
    if subsets.is_empty() {
        return Err(HypothesisError::SamplingExhausted {
            retries: cfg.max_degenerate_retries,
        });
    }
    Ok(SampledSubsets {
        subsets,
        degenerate_skipped: skipped,
    })
}

fn slot_rng(seed: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(slot);
    rng
}

fn sample_slot(
    points: &PointSet,
    kind: ModelKind,
    cfg: &SamplerConfig,
    slot: u64,
) -> Option<Vec<usize>> {
    let mut rng = slot_rng(cfg.seed, slot);
    let n = points.len();
    let subset_size = kind.minimal_subset_size();
    let inv_sigma_sq = 1.0 / (cfg.proximity_sigma * cfg.proximity_sigma);
    let mut weights = vec![0.0f64; n];
    for _ in 0..cfg.max_degenerate_retries.max(1) {
        let first = rng.random_range(0..n);
        let mut chosen = vec![first];
        let anchor = points.obs(first);
        for (j, w) in weights.iter_mut().enumerate() {
            let d2: f64 = points
                .obs(j)
                .iter()
                .zip(anchor)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            *w = (-d2 * inv_sigma_sq).exp();
        }
        weights[first] = 0.0;
        while chosen.len() < subset_size {
            let total: f64 = weights.iter().sum();
            let next = if total > 1e-300 {
                let mut target = rng.random_range(0.0..total);
                let mut pick = None;
                for (j, &w) in weights.iter().enumerate() {
                    if w <= 0.0 {
                        continue;
                    }
                    target -= w;
                    if target <= 0.0 {
                        pick = Some(j);
                        break;
                    }
                }
                // Accumulated rounding can leave the cursor past the last
                // positive weight; take that one.
                pick.unwrap_or_else(|| {
                    weights
                        .iter()
                        .rposition(|&w| w > 0.0)
                        .expect("total > 0 implies a positive weight")
                })
            } else {
                // All remaining weights underflowed: uniform fallback.
                let unchosen: Vec<usize> = (0..n).filter(|j| !chosen.contains(j)).collect();
                unchosen[rng.random_range(0..unchosen.len())]
            };
            weights[next] = 0.0;
            chosen.push(next);
        }
        let rows: Vec<&[f64]> = chosen.iter().map(|&i| points.obs(i)).collect();
        if geometry::minimal_solve(kind, &rows).is_ok() {
            return Some(chosen);
        }
    }
    None
}

/// IKOSE: σ = r̃_K / Φ⁻¹((1 + K/ñ)/2), iterating the inlier count ñ from N
/// until it is stable. Scaling every residual by c > 0 scales the result by
/// exactly c.
pub fn ikose(residuals: &[f64], cfg: &IkoseConfig) -> Result<f64, HypothesisError> {
    let n = residuals.len();
    assert!(n > 0, "residuals must be non-empty");
    assert!(cfg.k >= 1 && cfg.k <= n, "K must satisfy 1 <= K <= N");
    let mut sorted = residuals.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rk = sorted[cfg.k - 1];
    let mut inliers = n;
    let mut sigma = 0.0;
    for _ in 0..cfg.max_iters.max(1) {
        let quantile = inverse_normal_cdf(0.5 * (1.0 + cfg.k as f64 / inliers as f64));
        sigma = if quantile.is_finite() {
            rk / quantile
        } else {
            0.0
        };
        let cutoff = cfg.inlier_cutoff * sigma;
        let recount = sorted.partition_point(|&r| r <= cutoff);
        if recount < cfg.k {
            return Err(HypothesisError::InsufficientInliers {
                k: cfg.k,
                inliers: recount,
            });
        }
        if recount == inliers {
            break;
        }
        inliers = recount;
    }
    Ok(sigma.max(cfg.min_scale))
}

/// Inverse standard-normal CDF (Acklam's rational approximation, relative
/// error below 1.2e-9). Returns ±∞ at the boundaries.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Sampled hypotheses plus generation diagnostics.
#[derive(Debug, Clone)]
pub struct GeneratedHypotheses {
    pub hypotheses: Vec<ModelHypothesis>,
    pub degenerate_skipped: usize,
    /// Hypotheses retained with scale 0 because IKOSE found no coherent
    /// inlier population.
    pub scale_failures: usize,
}

/// Generate hypotheses end to end: sample subsets, solve each, estimate each
/// scale from the full residual vector. IKOSE failures keep the hypothesis
/// with scale 0 so downstream indexing stays aligned.
pub fn generate_hypotheses(
    points: &PointSet,
    kind: ModelKind,
    scfg: &SamplerConfig,
    icfg: &IkoseConfig,
) -> Result<GeneratedHypotheses, HypothesisError> {
    let sampled = proximity_sample(points, kind, scfg)?;
    let mut hypotheses = Vec::with_capacity(sampled.subsets.len());
    let mut scale_failures = 0usize;
    let mut residuals = vec![0.0f64; points.len()];
    for subset in &sampled.subsets {
        let rows: Vec<&[f64]> = subset.iter().map(|&i| points.obs(i)).collect();
        let params = match geometry::minimal_solve(kind, &rows) {
            Ok(p) => p,
            // The sampler already vetted the subset; a failure here would be
            // a logic error, but stay total and just skip.
            Err(_) => continue,
        };
        let prepared = PreparedModel::new(kind, &params);
        for (i, obs) in points.iter().enumerate() {
            residuals[i] = prepared.residual(obs);
        }
        let scale = match ikose(&residuals, icfg) {
            Ok(s) => s,
            Err(HypothesisError::InsufficientInliers { .. }) => {
                scale_failures += 1;
                0.0
            }
            Err(e) => return Err(e),
        };
        hypotheses.push(ModelHypothesis {
            kind,
            params,
            scale,
        });
    }
    Ok(GeneratedHypotheses {
        hypotheses,
        degenerate_skipped: sampled.degenerate_skipped,
        scale_failures,
    })
}
