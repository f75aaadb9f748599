//! Misclassification (fitting) error: the misassigned fraction under the
//! optimal one-to-one matching between predicted and ground-truth structure
//! labels, with the outlier label 0 pinned to itself.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("label arrays differ in length ({pred} vs {gt})")]
    LengthMismatch { pred: usize, gt: usize },
}

/// Percentage of points assigned to the wrong structure under the best
/// bijection between nonzero predicted and ground-truth labels. Invariant
/// under any relabeling permutation of the predicted structures.
pub fn misclassification_error(pred: &[usize], gt: &[usize]) -> Result<f64, MetricError> {
    if pred.len() != gt.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    let n = pred.len();
    if n == 0 {
        return Ok(0.0);
    }

    let pred_ids = index_labels(pred);
    let gt_ids = index_labels(gt);
    let mut agreement = vec![vec![0usize; gt_ids.len()]; pred_ids.len()];
    let mut outlier_agreement = 0usize;
    for (&p, &g) in pred.iter().zip(gt) {
        match (p, g) {
            (0, 0) => outlier_agreement += 1,
            (0, _) | (_, 0) => {}
            (p, g) => agreement[pred_ids[&p]][gt_ids[&g]] += 1,
        }
    }

    let matched = if pred_ids.is_empty() || gt_ids.is_empty() {
        0
    } else {
        let k = pred_ids.len().max(gt_ids.len());
        let mut cost = vec![vec![0.0f64; k]; k];
        for (p, row) in agreement.iter().enumerate() {
            for (g, &count) in row.iter().enumerate() {
                cost[p][g] = -(count as f64);
            }
        }
        let assignment = hungarian_min_cost(&cost);
        assignment
            .iter()
            .enumerate()
            .filter(|&(p, &g)| p < pred_ids.len() && g < gt_ids.len())
            .map(|(p, &g)| agreement[p][g])
            .sum()
    };

    let correct = outlier_agreement + matched;
    Ok(100.0 * (n - correct) as f64 / n as f64)
}

fn index_labels(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut map = BTreeMap::new();
    for &l in labels {
        if l > 0 {
            let next = map.len();
            map.entry(l).or_insert(next);
        }
    }
    map
}

/// Exact minimum-cost assignment on a square matrix via the O(n³) potentials
/// method. Returns `assignment[row] = column`.
pub fn hungarian_min_cost(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    debug_assert!(cost.iter().all(|row| row.len() == n));
    if n == 0 {
        return Vec::new();
    }
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    // p[j] = row matched to column j (1-based; 0 = unmatched sentinel).
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}
