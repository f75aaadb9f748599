//! Clustering of pruned data points: Tanimoto-like similarity over preference
//! vectors, τ-nearest-neighbor sparse graph construction, affinity
//! propagation restricted to graph edges, and a two-stage cluster
//! selection/refinement that merges fragments of one structure and refits
//! each final instance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, ModelKind, PointSet};

#[derive(Debug, Error, PartialEq)]
pub enum ClusteringError {
    #[error("preference vector is all-zero")]
    ZeroVector,
    #[error("every stage-1 cluster fell below the minimal subset size")]
    NoClusters,
}

/// Affinity-propagation knobs shared by both clustering passes.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseApConfig {
    /// Damping λ in [0, 1): new ← λ·old + (1−λ)·computed.
    pub damping: f64,
    pub max_iters: usize,
    /// Iterations the exemplar set must stay unchanged before stopping.
    pub stable_window: usize,
}

impl Default for SparseApConfig {
    fn default() -> Self {
        SparseApConfig {
            damping: 0.9,
            max_iters: 1000,
            stable_window: 50,
        }
    }
}

/// Self-similarity of the refinement pass. Electing an extra exemplar pays
/// off in affinity propagation once its members' similarity gains exceed the
/// preference, so the preference deepens with the fragment count: a lone
/// pair merges at the Tanimoto midpoint, larger fragment sets at up to three
/// midpoints. One exemplar then serves a whole structure's fragments while a
/// cross-structure takeover (several fragments' worth of near-orthogonal
/// similarity) still costs more than the preference saves.
fn merge_preference(fragments: usize) -> f64 {
    -0.5 * (fragments as f64 - 1.0).min(3.0)
}

/// Margin of the exemplar decision `r(k,k) + a(k,k) > 0`. Exactly symmetric
/// inputs settle on 0 and would otherwise flip on rounding dust; genuine
/// exemplar evidence sits far above this.
const DECISION_MARGIN: f64 = 1e-9;

/// `S(p, q) = ⟨p,q⟩ / (‖p‖² + ‖q‖² − ⟨p,q⟩) − 1`, in [−1, 0] for
/// nonnegative inputs; 0 exactly when p = q, −1 for orthogonal supports.
pub fn tanimoto_similarity(p: &[f64], q: &[f64]) -> Result<f64, ClusteringError> {
    assert_eq!(p.len(), q.len(), "preference vectors must share a length");
    debug_assert!(p.iter().chain(q).all(|v| *v >= 0.0));
    let mut dot = 0.0;
    let mut np = 0.0;
    let mut nq = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        dot += a * b;
        np += a * a;
        nq += b * b;
    }
    if np == 0.0 || nq == 0.0 {
        return Err(ClusteringError::ZeroVector);
    }
    Ok(dot / (np + nq - dot) - 1.0)
}

/// Symmetric sparse similarity graph with a uniform self-similarity
/// (preference) used by affinity propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    n: usize,
    adjacency: Vec<Vec<(u32, f64)>>,
    preference: f64,
    edge_count: usize,
}

impl SimilarityGraph {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn preference(&self) -> f64 {
        self.preference
    }

    pub fn neighbors(&self, i: usize) -> &[(u32, f64)] {
        &self.adjacency[i]
    }

    /// Undirected edge count.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Replace the uniform self-similarity.
    pub fn with_preference(mut self, preference: f64) -> Self {
        self.preference = preference;
        self
    }

    /// τ-NN construction over an arbitrary similarity: every vertex
    /// contributes edges to its τ most-similar neighbors (ties broken toward
    /// the lowest index) and the edge set is the symmetric union. The
    /// preference is the median over all off-diagonal similarities — the
    /// graph sparsifies message passing, not the preference statistic.
    pub fn from_similarities<F>(n: usize, tau: usize, sim: F) -> Self
    where
        F: Fn(usize, usize) -> f64,
    {
        if n <= 1 {
            return SimilarityGraph {
                n,
                adjacency: vec![Vec::new(); n],
                preference: 0.0,
                edge_count: 0,
            };
        }
        assert!(tau >= 1 && tau <= n - 1, "tau must lie in [1, n-1]");
        // Upper-triangle cache so each pair is evaluated once.
        let mut pair_sims = vec![0.0f64; n * (n - 1) / 2];
        let idx = |i: usize, j: usize| -> usize {
            debug_assert!(i < j);
            i * n - i * (i + 1) / 2 + (j - i - 1)
        };
        for i in 0..n {
            for j in (i + 1)..n {
                pair_sims[idx(i, j)] = sim(i, j);
            }
        }
        let mut edges = std::collections::BTreeSet::<(u32, u32)>::new();
        let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
        for i in 0..n {
            candidates.clear();
            for j in 0..n {
                if j != i {
                    let s = if i < j {
                        pair_sims[idx(i, j)]
                    } else {
                        pair_sims[idx(j, i)]
                    };
                    candidates.push((s, j));
                }
            }
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(_, j) in candidates.iter().take(tau) {
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                edges.insert((lo as u32, hi as u32));
            }
        }
        let mut adjacency: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(lo, hi) in &edges {
            let s = pair_sims[idx(lo as usize, hi as usize)];
            adjacency[lo as usize].push((hi, s));
            adjacency[hi as usize].push((lo, s));
        }
        for adj in &mut adjacency {
            adj.sort_unstable_by_key(|&(j, _)| j);
        }
        let mut all_sims = pair_sims;
        all_sims.sort_by(|a, b| a.total_cmp(b));
        let preference = median_of_sorted(&all_sims);
        SimilarityGraph {
            n,
            adjacency,
            preference,
            edge_count: edges.len(),
        }
    }
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    }
}

/// τ-NN graph over preference vectors under the Tanimoto-like similarity.
/// Vectors must be nonzero (zero-preference points are discarded before
/// clustering).
pub fn build_knn_graph(prefs: &[Vec<f64>], tau: usize) -> SimilarityGraph {
    SimilarityGraph::from_similarities(prefs.len(), tau, |i, j| {
        tanimoto_similarity(&prefs[i], &prefs[j]).expect("preference vectors must be nonzero")
    })
}

/// Exemplar election result: `assignments[i]` is the exemplar vertex that
/// vertex `i` belongs to; exemplars are assigned to themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct ApOutcome {
    pub exemplars: Vec<usize>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

/// Affinity propagation restricted to the graph's edges plus self-loops.
///
/// Responsibilities and availabilities follow the standard recursions with
/// damping; termination happens at `max_iters` or once the exemplar
/// decision vector is unchanged for `stable_window` consecutive iterations.
/// Always returns; non-convergence is reported through the flag.
pub fn sparse_affinity_propagation(g: &SimilarityGraph, cfg: &SparseApConfig) -> ApOutcome {
    assert!(
        (0.0..1.0).contains(&cfg.damping),
        "damping must lie in [0, 1)"
    );
    let n = g.vertex_count();
    if n == 0 {
        return ApOutcome {
            exemplars: Vec::new(),
            assignments: Vec::new(),
            iterations: 0,
            converged: true,
        };
    }
    if n == 1 {
        return ApOutcome {
            exemplars: vec![0],
            assignments: vec![0],
            iterations: 0,
            converged: true,
        };
    }

    // Flattened candidate lists: for vertex i the slots cover its neighbors
    // plus itself, sorted by candidate index.
    let mut cand_start = Vec::with_capacity(n + 1);
    let mut cand = Vec::new();
    let mut sims = Vec::new();
    let mut self_slot = vec![0usize; n];
    cand_start.push(0usize);
    for i in 0..n {
        let mut inserted_self = false;
        for &(j, s) in g.neighbors(i) {
            if !inserted_self && (j as usize) > i {
                self_slot[i] = cand.len();
                cand.push(i as u32);
                sims.push(g.preference());
                inserted_self = true;
            }
            cand.push(j);
            sims.push(s);
        }
        if !inserted_self {
            self_slot[i] = cand.len();
            cand.push(i as u32);
            sims.push(g.preference());
        }
        cand_start.push(cand.len());
    }
    let total_slots = cand.len();

    // Incoming slots per candidate k: (source vertex, slot index).
    let mut incoming: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
    for i in 0..n {
        for slot in cand_start[i]..cand_start[i + 1] {
            incoming[cand[slot] as usize].push((i as u32, slot as u32));
        }
    }

    let lambda = cfg.damping;
    let keep = 1.0 - lambda;
    let mut r = vec![0.0f64; total_slots];
    let mut a = vec![0.0f64; total_slots];
    let mut decisions = vec![false; n];
    let mut streak = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    while iterations < cfg.max_iters {
        iterations += 1;
        // Responsibilities.
        for i in 0..n {
            let slots = cand_start[i]..cand_start[i + 1];
            let mut max1 = f64::NEG_INFINITY;
            let mut max1_slot = usize::MAX;
            let mut max2 = f64::NEG_INFINITY;
            for slot in slots.clone() {
                let v = a[slot] + sims[slot];
                if v > max1 {
                    max2 = max1;
                    max1 = v;
                    max1_slot = slot;
                } else if v > max2 {
                    max2 = v;
                }
            }
            for slot in slots {
                let competing = if slot == max1_slot { max2 } else { max1 };
                let fresh = sims[slot] - competing;
                r[slot] = lambda * r[slot] + keep * fresh;
            }
        }
        // Availabilities.
        for k in 0..n {
            let self_r = r[self_slot[k]];
            let mut sum_pos = 0.0;
            for &(src, slot) in &incoming[k] {
                if src as usize != k {
                    sum_pos += r[slot as usize].max(0.0);
                }
            }
            for &(src, slot) in &incoming[k] {
                let slot = slot as usize;
                let fresh = if src as usize == k {
                    sum_pos
                } else {
                    (self_r + sum_pos - r[slot].max(0.0)).min(0.0)
                };
                a[slot] = lambda * a[slot] + keep * fresh;
            }
        }
        // Exemplar decisions and stability tracking.
        let mut changed = false;
        for k in 0..n {
            let e = r[self_slot[k]] + a[self_slot[k]] > DECISION_MARGIN;
            if e != decisions[k] {
                decisions[k] = e;
                changed = true;
            }
        }
        if changed {
            streak = 0;
        } else {
            streak += 1;
            if streak >= cfg.stable_window {
                converged = true;
                break;
            }
        }
    }

    let mut exemplars: Vec<usize> = (0..n).filter(|&k| decisions[k]).collect();
    if exemplars.is_empty() {
        // No exemplar evidence anywhere (degenerate, near-uniform
        // similarities): each connected component forms one cluster around
        // its lowest-index vertex.
        let (component_exemplars, assignments) = connected_component_clusters(g);
        return ApOutcome {
            exemplars: component_exemplars,
            assignments,
            iterations,
            converged,
        };
    }

    let is_exemplar: Vec<bool> = {
        let mut flags = vec![false; n];
        for &e in &exemplars {
            flags[e] = true;
        }
        flags
    };
    let mut assignments = vec![usize::MAX; n];
    let mut extra_exemplars = Vec::new();
    for i in 0..n {
        if is_exemplar[i] {
            assignments[i] = i;
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for slot in cand_start[i]..cand_start[i + 1] {
            let k = cand[slot] as usize;
            if k == i || !is_exemplar[k] {
                continue;
            }
            let s = sims[slot];
            let better = match best {
                None => true,
                Some((bs, bk)) => s > bs || (s == bs && k < bk),
            };
            if better {
                best = Some((s, k));
            }
        }
        match best {
            Some((_, k)) => assignments[i] = k,
            // No exemplar among the neighbors: the vertex stands alone.
            None => {
                assignments[i] = i;
                extra_exemplars.push(i);
            }
        }
    }
    exemplars.extend(extra_exemplars);
    exemplars.sort_unstable();

    ApOutcome {
        exemplars,
        assignments,
        iterations,
        converged,
    }
}

fn connected_component_clusters(g: &SimilarityGraph) -> (Vec<usize>, Vec<usize>) {
    let n = g.vertex_count();
    let mut assignments = vec![usize::MAX; n];
    let mut exemplars = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if assignments[start] != usize::MAX {
            continue;
        }
        exemplars.push(start);
        assignments[start] = start;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for &(u, _) in g.neighbors(v) {
                let u = u as usize;
                if assignments[u] == usize::MAX {
                    assignments[u] = start;
                    queue.push_back(u);
                }
            }
        }
    }
    (exemplars, assignments)
}

/// One fitted model instance: refit parameters plus its member indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInstance {
    pub params: Vec<f64>,
    pub members: Vec<usize>,
}

/// Final clustering of the kept points.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    /// Cluster id per kept point (0 = discarded).
    pub labels: Vec<usize>,
    /// Representative point per final cluster.
    pub exemplars: Vec<usize>,
    pub instances: Vec<ModelInstance>,
    /// Stage-1 clusters surviving the minimal-subset-size floor.
    pub stage1_cluster_count: usize,
    /// Final clusters dropped because refitting was degenerate.
    pub dropped_degenerate: usize,
    /// Convergence flag of the refinement pass (true when it did not run).
    pub refine_converged: bool,
}

/// Second clustering stage: discard stage-1 clusters below the minimal
/// subset size, merge the survivors by running affinity propagation over
/// their mean preference vectors on a complete graph, union memberships and
/// refit every final cluster.
pub fn refine_clusters(
    stage1: &ApOutcome,
    prefs: &[Vec<f64>],
    points: &PointSet,
    kind: ModelKind,
    cfg: &SparseApConfig,
) -> Result<ClusterResult, ClusteringError> {
    cluster_core(stage1, prefs, points, kind, cfg, true)
}

/// Stage-1 clusters taken as final (no merge pass): apply the
/// minimal-subset-size floor and refit each survivor.
pub fn select_clusters(
    stage1: &ApOutcome,
    prefs: &[Vec<f64>],
    points: &PointSet,
    kind: ModelKind,
) -> Result<ClusterResult, ClusteringError> {
    cluster_core(
        stage1,
        prefs,
        points,
        kind,
        &SparseApConfig::default(),
        false,
    )
}

fn cluster_core(
    stage1: &ApOutcome,
    prefs: &[Vec<f64>],
    points: &PointSet,
    kind: ModelKind,
    cfg: &SparseApConfig,
    merge: bool,
) -> Result<ClusterResult, ClusteringError> {
    assert_eq!(stage1.assignments.len(), prefs.len());
    assert_eq!(prefs.len(), points.len());
    let min_size = kind.minimal_subset_size();

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &e) in stage1.assignments.iter().enumerate() {
        groups.entry(e).or_default().push(i);
    }
    let clusters: Vec<(usize, Vec<usize>)> = groups
        .into_iter()
        .filter(|(_, members)| members.len() >= min_size)
        .collect();
    if clusters.is_empty() {
        return Err(ClusteringError::NoClusters);
    }
    let stage1_cluster_count = clusters.len();

    // Merge pass: affinity propagation over the cluster-mean preference
    // vectors on a complete graph, so fragments of one structure collapse
    // onto a single exemplar fragment.
    let dim = prefs[0].len();
    let (merge_groups, refine_converged) = if !merge || clusters.len() == 1 {
        let singles: Vec<Vec<usize>> = (0..clusters.len()).map(|c| vec![c]).collect();
        (singles, true)
    } else {
        let means: Vec<Vec<f64>> = clusters
            .iter()
            .map(|(_, members)| {
                let mut mean = vec![0.0f64; dim];
                for &i in members {
                    for (m, v) in mean.iter_mut().zip(&prefs[i]) {
                        *m += v;
                    }
                }
                let inv = 1.0 / members.len() as f64;
                mean.iter_mut().for_each(|v| *v *= inv);
                mean
            })
            .collect();
        let graph =
            build_knn_graph(&means, means.len() - 1).with_preference(merge_preference(means.len()));
        let outcome = sparse_affinity_propagation(&graph, cfg);
        let mut merged: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (c, &e) in outcome.assignments.iter().enumerate() {
            merged.entry(e).or_default().push(c);
        }
        (merged.into_values().collect(), outcome.converged)
    };

    // Union memberships, order final clusters by their smallest member.
    let mut finals: Vec<(usize, Vec<usize>)> = merge_groups
        .into_iter()
        .map(|cluster_ids| {
            let exemplar_cluster = cluster_ids[0];
            let mut members: Vec<usize> = cluster_ids
                .iter()
                .flat_map(|&c| clusters[c].1.iter().copied())
                .collect();
            members.sort_unstable();
            (clusters[exemplar_cluster].0, members)
        })
        .collect();
    finals.sort_by_key(|(_, members)| members[0]);

    let mut labels = vec![0usize; prefs.len()];
    let mut instances = Vec::new();
    let mut exemplars = Vec::new();
    let mut dropped_degenerate = 0usize;
    for (stage1_exemplar, members) in finals {
        let rows: Vec<&[f64]> = members.iter().map(|&i| points.obs(i)).collect();
        match geometry::refit(kind, &rows) {
            Ok(params) => {
                let id = instances.len() + 1;
                for &i in &members {
                    labels[i] = id;
                }
                exemplars.push(stage1_exemplar);
                instances.push(ModelInstance { params, members });
            }
            Err(_) => dropped_degenerate += 1,
        }
    }

    Ok(ClusterResult {
        labels,
        exemplars,
        instances,
        stage1_cluster_count,
        dropped_degenerate,
        refine_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ObservationKind;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tanimoto_analytic_triples() {
        assert_eq!(tanimoto_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(tanimoto_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), -1.0);
        assert_eq!(tanimoto_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap(), -0.5);
    }

    #[test]
    fn tanimoto_zero_vector_errors() {
        assert_eq!(
            tanimoto_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(ClusteringError::ZeroVector)
        );
    }

    proptest! {
        #[test]
        fn tanimoto_common_scale_invariance(
            seed in 0u64..500,
            c in 1e-3f64..1e3,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
            let q: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
            prop_assume!(p.iter().any(|v| *v > 0.0) && q.iter().any(|v| *v > 0.0));
            let base = tanimoto_similarity(&p, &q).unwrap();
            let ps: Vec<f64> = p.iter().map(|v| v * c).collect();
            let qs: Vec<f64> = q.iter().map(|v| v * c).collect();
            let scaled = tanimoto_similarity(&ps, &qs).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-12);
            prop_assert!((-1.0..=0.0).contains(&base));
            // Symmetry is bitwise: every term commutes.
            prop_assert_eq!(base, tanimoto_similarity(&q, &p).unwrap());
            // Self-similarity is exactly zero.
            prop_assert_eq!(tanimoto_similarity(&p, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn knn_graph_tie_break_takes_lowest_index() {
        // S(0,1) = −0.1, S(0,2) = S(1,2) = −0.9; with τ = 1 vertex 2 ties
        // between 0 and 1 and must pick 0.
        let sims = [[0.0, -0.1, -0.9], [-0.1, 0.0, -0.9], [-0.9, -0.9, 0.0]];
        let g = SimilarityGraph::from_similarities(3, 1, |i, j| sims[i][j]);
        let edges: Vec<Vec<u32>> = (0..3)
            .map(|i| g.neighbors(i).iter().map(|&(j, _)| j).collect())
            .collect();
        assert_eq!(edges[0], vec![1, 2]);
        assert_eq!(edges[1], vec![0]);
        assert_eq!(edges[2], vec![0]);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn knn_graph_saturated_is_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prefs: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..5).map(|_| rng.random_range(0.1..1.0)).collect())
            .collect();
        let g = build_knn_graph(&prefs, prefs.len() - 1);
        assert_eq!(g.edge_count(), 8 * 7 / 2);
        for i in 0..8 {
            assert_eq!(g.neighbors(i).len(), 7);
        }
    }

    #[test]
    fn knn_graph_adjacency_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for tau in [1usize, 3, 7] {
            let prefs: Vec<Vec<f64>> = (0..15)
                .map(|_| {
                    (0..6)
                        .map(|_| rng.random_range(0.0..1.0f64).max(1e-3))
                        .collect()
                })
                .collect();
            let g = build_knn_graph(&prefs, tau);
            for i in 0..15 {
                for &(j, s) in g.neighbors(i) {
                    let back = g
                        .neighbors(j as usize)
                        .iter()
                        .find(|&&(k, _)| k as usize == i)
                        .expect("symmetric edge");
                    assert_eq!(back.1, s);
                }
            }
        }
    }

    #[test]
    fn ap_single_vertex_is_own_exemplar() {
        let g = SimilarityGraph::from_similarities(1, 1, |_, _| 0.0);
        let out = sparse_affinity_propagation(&g, &SparseApConfig::default());
        assert_eq!(out.exemplars, vec![0]);
        assert_eq!(out.assignments, vec![0]);
    }

    #[test]
    fn ap_separates_two_value_clusters() {
        let xs = [0.0, 0.1, 0.2, 10.0, 10.1];
        let g = SimilarityGraph::from_similarities(5, 4, |i, j| -(xs[i] - xs[j]) * (xs[i] - xs[j]));
        let out = sparse_affinity_propagation(&g, &SparseApConfig::default());
        assert_eq!(out.exemplars.len(), 2, "exemplars: {:?}", out.exemplars);
        assert!(out.converged);
        // Memberships split as {0,1,2} and {3,4}.
        assert_eq!(out.assignments[0], out.assignments[1]);
        assert_eq!(out.assignments[1], out.assignments[2]);
        assert_eq!(out.assignments[3], out.assignments[4]);
        assert_ne!(out.assignments[0], out.assignments[3]);
        for &e in &out.exemplars {
            assert_eq!(out.assignments[e], e);
        }
    }

    /// Dense affinity propagation written independently against full
    /// matrices, with the same damping and schedule.
    fn dense_ap_oracle(s: &[Vec<f64>], pref: f64, cfg: &SparseApConfig) -> Vec<usize> {
        let n = s.len();
        let mut sim = s.to_vec();
        for (k, row) in sim.iter_mut().enumerate() {
            row[k] = pref;
        }
        let mut r = vec![vec![0.0f64; n]; n];
        let mut a = vec![vec![0.0f64; n]; n];
        let mut decisions = vec![false; n];
        let mut streak = 0;
        for _ in 0..cfg.max_iters {
            let mut r_new = vec![vec![0.0f64; n]; n];
            for i in 0..n {
                for k in 0..n {
                    let mut best = f64::NEG_INFINITY;
                    for kp in 0..n {
                        if kp != k {
                            best = best.max(a[i][kp] + sim[i][kp]);
                        }
                    }
                    r_new[i][k] = sim[i][k] - best;
                }
            }
            for i in 0..n {
                for k in 0..n {
                    r[i][k] = cfg.damping * r[i][k] + (1.0 - cfg.damping) * r_new[i][k];
                }
            }
            let mut a_new = vec![vec![0.0f64; n]; n];
            for i in 0..n {
                for k in 0..n {
                    if i == k {
                        let mut sum = 0.0;
                        for ip in 0..n {
                            if ip != k {
                                sum += r[ip][k].max(0.0);
                            }
                        }
                        a_new[k][k] = sum;
                    } else {
                        let mut sum = 0.0;
                        for ip in 0..n {
                            if ip != i && ip != k {
                                sum += r[ip][k].max(0.0);
                            }
                        }
                        a_new[i][k] = (r[k][k] + sum).min(0.0);
                    }
                }
            }
            for i in 0..n {
                for k in 0..n {
                    a[i][k] = cfg.damping * a[i][k] + (1.0 - cfg.damping) * a_new[i][k];
                }
            }
            let mut changed = false;
            for k in 0..n {
                let e = r[k][k] + a[k][k] > DECISION_MARGIN;
                if e != decisions[k] {
                    decisions[k] = e;
                    changed = true;
                }
            }
            if changed {
                streak = 0;
            } else {
                streak += 1;
                if streak >= cfg.stable_window {
                    break;
                }
            }
        }
        (0..n).filter(|&k| decisions[k]).collect()
    }

    #[test]
    fn complete_graph_matches_dense_oracle() {
        let cfg = SparseApConfig::default();
        for seed in 0..8u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(4..20usize);
            let mut s = vec![vec![0.0f64; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = -rng.random_range(0.0..2.0f64);
                    s[i][j] = v;
                    s[j][i] = v;
                }
            }
            let g = SimilarityGraph::from_similarities(n, n - 1, |i, j| s[i][j]);
            let sparse = sparse_affinity_propagation(&g, &cfg);
            let dense = dense_ap_oracle(&s, g.preference(), &cfg);
            if dense.is_empty() {
                // Fallback exemplar selection is outside the oracle's scope.
                continue;
            }
            assert_eq!(sparse.exemplars, dense, "seed {seed}");
        }
    }

    #[test]
    fn ap_labels_partition_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let prefs: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                (0..10)
                    .map(|_| rng.random_range(0.0..1.0f64).max(1e-6))
                    .collect()
            })
            .collect();
        let g = build_knn_graph(&prefs, 5);
        let out = sparse_affinity_propagation(&g, &SparseApConfig::default());
        assert_eq!(out.assignments.len(), 40);
        for (i, &e) in out.assignments.iter().enumerate() {
            assert!(
                out.exemplars.contains(&e),
                "vertex {i} assigned to non-exemplar {e}"
            );
        }
        for &e in &out.exemplars {
            assert_eq!(out.assignments[e], e);
        }
    }

    fn planar(rows: Vec<Vec<f64>>) -> PointSet {
        PointSet::new(ObservationKind::PlanarPoint, rows, None).unwrap()
    }

    #[test]
    fn refine_single_cluster_refits_members() {
        let points = planar(vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
        ]);
        let prefs = vec![vec![1.0, 0.2]; 4];
        let stage1 = ApOutcome {
            exemplars: vec![0],
            assignments: vec![0, 0, 0, 0],
            iterations: 1,
            converged: true,
        };
        let result = refine_clusters(
            &stage1,
            &prefs,
            &points,
            ModelKind::Line2d,
            &SparseApConfig::default(),
        )
        .unwrap();
        assert_eq!(result.instances.len(), 1);
        assert_eq!(result.labels, vec![1, 1, 1, 1]);
        assert_eq!(result.stage1_cluster_count, 1);
        let params = &result.instances[0].params;
        for i in 0..4 {
            assert!(geometry::residual(ModelKind::Line2d, params, points.obs(i)) < 1e-9);
        }
    }

    #[test]
    fn refine_merges_identical_mean_preferences() {
        // Two collinear fragments with identical preference vectors must
        // collapse into a single instance.
        let points = planar(vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
        ]);
        let prefs = vec![vec![0.7, 0.1]; 4];
        let stage1 = ApOutcome {
            exemplars: vec![0, 2],
            assignments: vec![0, 0, 2, 2],
            iterations: 1,
            converged: true,
        };
        let result = refine_clusters(
            &stage1,
            &prefs,
            &points,
            ModelKind::Line2d,
            &SparseApConfig::default(),
        )
        .unwrap();
        assert_eq!(result.instances.len(), 1);
        assert_eq!(result.stage1_cluster_count, 2);
        assert_eq!(result.instances[0].members, vec![0, 1, 2, 3]);
    }

    #[test]
    fn refine_discards_undersized_clusters() {
        let points = planar(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![2.0, 0.1],
            vec![5.0, 9.0],
        ]);
        // A three-member circle-kind cluster plus a singleton: the singleton
        // falls below the minimal size and keeps label 0.
        let prefs = vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ];
        let stage1 = ApOutcome {
            exemplars: vec![0, 3],
            assignments: vec![0, 0, 0, 3],
            iterations: 1,
            converged: true,
        };
        let result = refine_clusters(
            &stage1,
            &prefs,
            &points,
            ModelKind::Circle2d,
            &SparseApConfig::default(),
        )
        .unwrap();
        assert_eq!(result.stage1_cluster_count, 1);
        assert_eq!(result.labels[3], 0);
        for inst in &result.instances {
            assert!(inst.members.len() >= ModelKind::Circle2d.minimal_subset_size());
        }
    }

    #[test]
    fn refine_errors_when_everything_is_undersized() {
        let points = planar(vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        let prefs = vec![vec![1.0], vec![1.0]];
        let stage1 = ApOutcome {
            exemplars: vec![0, 1],
            assignments: vec![0, 1],
            iterations: 1,
            converged: true,
        };
        assert_eq!(
            refine_clusters(
                &stage1,
                &prefs,
                &points,
                ModelKind::Circle2d,
                &SparseApConfig::default(),
            )
            .unwrap_err(),
            ClusteringError::NoClusters
        );
    }
}
