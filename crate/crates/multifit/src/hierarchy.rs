//! Two-layer hierarchical representation: a sparse bipartite structure
//! linking data points to model hypotheses, message propagation over it, and
//! pruning of both layers (entropy thresholding for hypotheses, a 1D
//! two-component GMM gate for points).
//!
//! Edge weights follow `ω = exp(−r/σ)` truncated at `r > 2.5σ`. Propagation
//! alternates bipartite score sums — `d(i) ← Σ_m h(m)·ω(i,m)` then
//! `h(m) ← Σ_i d(i)·ω(i,m)` from the uniform start `h ≡ 1/M` — and
//! max-normalizes both score arrays after every round so repeated rounds stay
//! in range. Per-edge preference messages are reconstructed as
//! `P(i,m) = h(m)·ω(i,m)` wherever they are consumed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ModelHypothesis, PointSet, PreparedModel};

/// Inlier cutoff of the edge weighting function, in multiples of σ.
pub const EDGE_CUTOFF: f64 = 2.5;

#[derive(Debug, Error, PartialEq)]
pub enum HierarchyError {
    #[error("every edge weight is zero")]
    EmptyGraph,
    #[error("every hypothesis weight is zero")]
    AllZeroWeights,
    #[error("score histogram is degenerate (fewer than 4 values or all identical)")]
    DegenerateInput,
    #[error("no point passed the weight threshold")]
    EmptyResult,
}

/// `ω(r, σ) = exp(−r/σ)` when `r ≤ 2.5σ`, exactly 0 beyond the cutoff.
pub fn edge_weight(residual: f64, sigma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    if residual <= EDGE_CUTOFF * sigma {
        (-residual / sigma).exp()
    } else {
        0.0
    }
}

/// Sparse N×M nonnegative edge-weight structure between the data-point layer
/// and the hypothesis layer. Rows hold `(hypothesis index, weight)` entries
/// sorted by index; structural zeros are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalRepresentation {
    point_count: usize,
    hypotheses: Vec<ModelHypothesis>,
    rows: Vec<Vec<(u32, f64)>>,
    nnz: usize,
}

impl HierarchicalRepresentation {
    /// Connect every point to every hypothesis within its inlier band.
    /// Hypotheses with scale 0 contribute an all-zero column.
    pub fn build(points: &PointSet, hypotheses: Vec<ModelHypothesis>) -> Self {
        let n = points.len();
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (m, hyp) in hypotheses.iter().enumerate() {
            if hyp.scale <= 0.0 {
                continue;
            }
            let prepared = PreparedModel::new(hyp.kind, &hyp.params);
            for (i, obs) in points.iter().enumerate() {
                let w = edge_weight(prepared.residual(obs), hyp.scale);
                if w > 0.0 {
                    rows[i].push((m as u32, w));
                }
            }
        }
        let nnz = rows.iter().map(Vec::len).sum();
        HierarchicalRepresentation {
            point_count: n,
            hypotheses,
            rows,
            nnz,
        }
    }

    /// Assemble a representation from precomputed rows. Entries must be
    /// sorted by column with weights in (0, 1].
    pub fn from_parts(
        point_count: usize,
        hypotheses: Vec<ModelHypothesis>,
        rows: Vec<Vec<(u32, f64)>>,
    ) -> Self {
        assert_eq!(rows.len(), point_count);
        debug_assert!(rows.iter().all(|row| {
            row.windows(2).all(|w| w[0].0 < w[1].0)
                && row
                    .iter()
                    .all(|&(m, w)| (m as usize) < hypotheses.len() && w > 0.0 && w <= 1.0)
        }));
        let nnz = rows.iter().map(Vec::len).sum();
        HierarchicalRepresentation {
            point_count,
            hypotheses,
            rows,
            nnz,
        }
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    pub fn hypothesis_count(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn hypotheses(&self) -> &[ModelHypothesis] {
        &self.hypotheses
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    /// Stored weight at (i, m), or 0 for a structural zero.
    pub fn weight(&self, i: usize, m: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&(m as u32), |&(c, _)| c) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0.0,
        }
    }

    /// Restriction to the hypothesis columns in `kept`, renumbered to
    /// `0..kept.len()` in the given order.
    pub fn restrict_hypotheses(&self, kept: &[usize]) -> Self {
        let mut remap = vec![u32::MAX; self.hypotheses.len()];
        for (new, &old) in kept.iter().enumerate() {
            remap[old] = new as u32;
        }
        let rows: Vec<Vec<(u32, f64)>> = self
            .rows
            .iter()
            .map(|row| {
                let mut out: Vec<(u32, f64)> = row
                    .iter()
                    .filter_map(|&(m, w)| {
                        let new = remap[m as usize];
                        (new != u32::MAX).then_some((new, w))
                    })
                    .collect();
                out.sort_unstable_by_key(|&(m, _)| m);
                out
            })
            .collect();
        let hypotheses = kept.iter().map(|&m| self.hypotheses[m].clone()).collect();
        let nnz = rows.iter().map(Vec::len).sum();
        HierarchicalRepresentation {
            point_count: self.point_count,
            hypotheses,
            rows,
            nnz,
        }
    }
}

/// Per-point and per-hypothesis scores after propagation; both arrays are
/// max-normalized after every completed round.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub point_score: Vec<f64>,
    pub hyp_score: Vec<f64>,
    pub iterations_run: usize,
}

/// Run `iterations` rounds of bipartite score propagation from the uniform
/// hypothesis start `h ≡ 1/M`.
pub fn propagate(
    rep: &HierarchicalRepresentation,
    iterations: usize,
) -> Result<MessageState, HierarchyError> {
    let m = rep.hypothesis_count();
    propagate_from(rep, &vec![1.0 / m as f64; m], iterations)
}

/// Same as [`propagate`] but starting from a caller-supplied hypothesis
/// score vector; `propagate(rep, t + 1)` equals one more round applied to
/// `propagate(rep, t)`'s hypothesis scores.
pub fn propagate_from(
    rep: &HierarchicalRepresentation,
    initial_hyp_score: &[f64],
    iterations: usize,
) -> Result<MessageState, HierarchyError> {
    assert!(iterations >= 1, "at least one round required");
    assert_eq!(initial_hyp_score.len(), rep.hypothesis_count());
    if rep.nnz() == 0 {
        return Err(HierarchyError::EmptyGraph);
    }
    let n = rep.point_count();
    let m = rep.hypothesis_count();
    let mut hyp_score = initial_hyp_score.to_vec();
    let mut point_score = vec![0.0f64; n];
    for _ in 0..iterations {
        for (i, row) in rep.rows.iter().enumerate() {
            point_score[i] = row
                .iter()
                .map(|&(col, w)| hyp_score[col as usize] * w)
                .sum();
        }
        let mut next_hyp = vec![0.0f64; m];
        for (i, row) in rep.rows.iter().enumerate() {
            let d = point_score[i];
            for &(col, w) in row {
                next_hyp[col as usize] += d * w;
            }
        }
        hyp_score = next_hyp;
        max_normalize(&mut point_score);
        max_normalize(&mut hyp_score);
    }
    Ok(MessageState {
        point_score,
        hyp_score,
        iterations_run: iterations,
    })
}

fn max_normalize(values: &mut [f64]) {
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        for v in values.iter_mut() {
            *v /= max;
        }
    }
}

/// Per-hypothesis Epanechnikov density weights
/// `ω^h(m) = (1/N) Σ_i K(r_{i,m}/b) / (σ_m·b)` with the plug-in bandwidth
/// `b = σ_m·(243/(35N))^{1/5}`. Residuals are recovered from stored edge
/// weights (`r = −σ·ln ω`); the kernel support lies inside the edge cutoff,
/// so unstored entries contribute nothing.
pub fn hypothesis_weights(rep: &HierarchicalRepresentation) -> Vec<f64> {
    let n = rep.point_count() as f64;
    let m = rep.hypothesis_count();
    let band_factor = (243.0 / (35.0 * n)).powf(0.2);
    let mut acc = vec![0.0f64; m];
    for row in &rep.rows {
        for &(col, w) in row {
            let sigma = rep.hypotheses[col as usize].scale;
            let b = sigma * band_factor;
            let r = -sigma * w.ln();
            let u = r / b;
            if u <= 1.0 {
                acc[col as usize] += 0.75 * (1.0 - u * u);
            }
        }
    }
    acc.iter()
        .enumerate()
        .map(|(col, &a)| {
            let sigma = rep.hypotheses[col].scale;
            if sigma <= 0.0 {
                0.0
            } else {
                // a / (σ·b) summed over points, averaged over N.
                a / (n * sigma * sigma * band_factor)
            }
        })
        .collect()
}

/// Entropy thresholding: keep hypotheses whose normalized weight satisfies
/// `p_m ≥ 2^(−E)` with `E = −Σ p_m·log₂ p_m`. The maximum-weight hypothesis
/// always qualifies, so the result is never empty.
pub fn prune_hypotheses(weights: &[f64]) -> Result<Vec<usize>, HierarchyError> {
    let sum: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    if sum <= 0.0 {
        return Err(HierarchyError::AllZeroWeights);
    }
    let entropy: f64 = weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|&w| {
            let p = w / sum;
            -p * p.log2()
        })
        .sum();
    // Tiny relative slack keeps the uniform-weights boundary inclusive under
    // rounding.
    let threshold = (-entropy).exp2() * (1.0 - 1e-12);
    let kept: Vec<usize> = weights
        .iter()
        .enumerate()
        .filter(|&(_, &w)| w > 0.0 && w / sum >= threshold)
        .map(|(m, _)| m)
        .collect();
    debug_assert!(!kept.is_empty());
    Ok(kept)
}

/// Strongest edge weight per point: `max_m ω(i,m)`, the largest preference
/// message a point can receive. Unlike the sum, this does not scale with a
/// structure's hypothesis count, so one threshold treats structures of
/// uneven support equally. A point with no edges gets exactly 0.
pub fn strongest_edge_weights(rep: &HierarchicalRepresentation) -> Vec<f64> {
    rep.rows
        .iter()
        .map(|row| row.iter().map(|&(_, w)| w).fold(0.0f64, f64::max))
        .collect()
}

/// Per-point preference sums `ω^d(i) = Σ_m h(m)·ω(i,m)`; a point with no
/// edges gets exactly 0.
pub fn point_weights(rep: &HierarchicalRepresentation, msg: &MessageState) -> Vec<f64> {
    assert_eq!(msg.hyp_score.len(), rep.hypothesis_count());
    rep.rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|&(col, w)| msg.hyp_score[col as usize] * w)
                .sum()
        })
        .collect()
}

/// Fitted two-component 1D Gaussian mixture plus the inlier threshold
/// `φ = (φ₁ + φ₂)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm1d {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub stds: [f64; 2],
    pub threshold: f64,
    /// Log-likelihood after each EM iteration (non-decreasing).
    pub log_likelihood: Vec<f64>,
}

const GMM_MAX_ITERS: usize = 200;
const GMM_TOL: f64 = 1e-8;
const GMM_VAR_FLOOR: f64 = 1e-12;

/// Minimum relative gap between the component means for the mixture to count
/// as two peaks rather than numerical texture inside one mode.
pub const MIN_RELATIVE_SEPARATION: f64 = 1e-2;

impl Gmm1d {
    /// The threshold φ when the fitted components are meaningfully
    /// separated; None marks an effectively unimodal histogram, in which
    /// case the caller keeps every point.
    pub fn separating_threshold(&self) -> Option<f64> {
        let gap = self.means[1] - self.means[0];
        let scale = self.means[1].abs().max(self.means[0].abs());
        (gap > MIN_RELATIVE_SEPARATION * scale).then_some(self.threshold)
    }
}

/// Deterministic two-component EM: initialize by splitting the sorted values
/// at the median, iterate until the log-likelihood improvement drops below
/// 1e-8.
pub fn fit_gmm_1d(values: &[f64]) -> Result<Gmm1d, HierarchyError> {
    let n = values.len();
    if n < 4 {
        return Err(HierarchyError::DegenerateInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    if sorted[n - 1] - sorted[0] <= 1e-12 {
        return Err(HierarchyError::DegenerateInput);
    }

    let half = n / 2;
    let mut weights = [half as f64 / n as f64, (n - half) as f64 / n as f64];
    let mut means = [mean(&sorted[..half]), mean(&sorted[half..])];
    let mut vars = [
        variance(&sorted[..half], means[0]).max(GMM_VAR_FLOOR),
        variance(&sorted[half..], means[1]).max(GMM_VAR_FLOOR),
    ];

    let mut log_likelihood = Vec::new();
    let mut resp = vec![0.0f64; n];
    for _ in 0..GMM_MAX_ITERS {
        // E step in log space.
        let mut ll = 0.0;
        for (i, &x) in values.iter().enumerate() {
            let l0 = weights[0].ln() + log_normal(x, means[0], vars[0]);
            let l1 = weights[1].ln() + log_normal(x, means[1], vars[1]);
            let hi = l0.max(l1);
            let lse = hi + ((l0 - hi).exp() + (l1 - hi).exp()).ln();
            resp[i] = (l0 - lse).exp();
            ll += lse;
        }
        log_likelihood.push(ll);
        let len = log_likelihood.len();
        if len >= 2 && ll - log_likelihood[len - 2] < GMM_TOL {
            break;
        }
        // M step.
        let n0: f64 = resp.iter().sum::<f64>().max(1e-300);
        let n1 = (n as f64 - n0).max(1e-300);
        let m0 = values.iter().zip(&resp).map(|(&x, &r)| r * x).sum::<f64>() / n0;
        let m1 = values
            .iter()
            .zip(&resp)
            .map(|(&x, &r)| (1.0 - r) * x)
            .sum::<f64>()
            / n1;
        let v0 = values
            .iter()
            .zip(&resp)
            .map(|(&x, &r)| r * (x - m0) * (x - m0))
            .sum::<f64>()
            / n0;
        let v1 = values
            .iter()
            .zip(&resp)
            .map(|(&x, &r)| (1.0 - r) * (x - m1) * (x - m1))
            .sum::<f64>()
            / n1;
        weights = [n0 / n as f64, n1 / n as f64];
        means = [m0, m1];
        vars = [v0.max(GMM_VAR_FLOOR), v1.max(GMM_VAR_FLOOR)];
    }

    // Report the low-mean component first.
    if means[0] > means[1] {
        weights.swap(0, 1);
        means.swap(0, 1);
        vars.swap(0, 1);
    }
    Ok(Gmm1d {
        weights,
        means,
        stds: [vars[0].sqrt(), vars[1].sqrt()],
        threshold: 0.5 * (means[0] + means[1]),
        log_likelihood,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn variance(values: &[f64], mean: f64) -> f64 {
    values.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / values.len() as f64
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((std::f64::consts::TAU * var).ln() + (x - mean) * (x - mean) / var)
}

/// Indices with weight at or above the threshold, in original order.
pub fn prune_points(point_weights: &[f64], threshold: f64) -> Result<Vec<usize>, HierarchyError> {
    let kept: Vec<usize> = point_weights
        .iter()
        .enumerate()
        .filter(|&(_, &w)| w >= threshold)
        .map(|(i, _)| i)
        .collect();
    if kept.is_empty() {
        return Err(HierarchyError::EmptyResult);
    }
    Ok(kept)
}

/// Aggregate output of the layer-pruning stage.
#[derive(Debug, Clone)]
pub struct PruneResult {
    pub kept_hypotheses: Vec<usize>,
    pub kept_points: Vec<usize>,
    pub point_weights: Vec<f64>,
    pub hyp_weights: Vec<f64>,
    /// None when the score histogram was degenerate (all points kept).
    pub gmm: Option<Gmm1d>,
    pub threshold: f64,
}
