//! End-to-end fitting pipeline: hypothesis generation with scale estimation,
//! hierarchical representation, layer pruning, message propagation, sparse
//! affinity-propagation clustering and instance refitting, exposed through a
//! single configurable entry point plus component-ablation variants.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{self, ClusteringError, ModelInstance, SparseApConfig};
use crate::geometry::{ModelKind, PointSet};
use crate::hierarchy::{self, Gmm1d, HierarchicalRepresentation, HierarchyError, PruneResult};
use crate::hypothesis::{self, HypothesisError, IkoseConfig, SamplerConfig};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("hypothesis generation failed: {0}")]
    HypothesisGeneration(#[from] HypothesisError),
    #[error("hypothesis pruning failed: {0}")]
    HypothesisPruning(HierarchyError),
    #[error("message propagation failed: {0}")]
    Propagation(HierarchyError),
    #[error("point pruning failed: {0}")]
    PointPruning(HierarchyError),
    #[error("clustering failed: {0}")]
    Clustering(#[from] ClusteringError),
}

/// Pipeline configuration. `seed` is the master seed: it overrides
/// `sampler.seed` when the pipeline runs, so one knob controls determinism.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub kind: ModelKind,
    pub sampler: SamplerConfig,
    pub ikose: IkoseConfig,
    /// Message-propagation rounds.
    pub propagation_iters: usize,
    /// Nearest-neighbor count of the sparse similarity graph (clamped to the
    /// kept-point count minus one).
    pub tau: usize,
    pub damping: f64,
    pub ap_max_iters: usize,
    pub ap_stable_window: usize,
    pub seed: u64,
}

impl FitConfig {
    /// Defaults derived from the data: proximity kernel from the bounding
    /// box, K from the point count, three propagation rounds, τ = 30.
    pub fn for_points(
        kind: ModelKind,
        points: &PointSet,
        hypothesis_count: usize,
        seed: u64,
    ) -> Self {
        FitConfig {
            kind,
            sampler: SamplerConfig::for_points(points, hypothesis_count, seed),
            ikose: IkoseConfig::for_count(points.len()),
            propagation_iters: 3,
            tau: 30,
            damping: 0.9,
            ap_max_iters: 1000,
            ap_stable_window: 50,
            seed,
        }
    }

    fn ap_config(&self) -> SparseApConfig {
        SparseApConfig {
            damping: self.damping,
            max_iters: self.ap_max_iters,
            stable_window: self.ap_stable_window,
        }
    }
}

/// Component-ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Full pipeline: layer pruning plus cluster refinement.
    HmpIap,
    /// Layer pruning, no cluster refinement (stage-1 clusters are final).
    HmpSap,
    /// No layer pruning; clustering with refinement on all points.
    Iap,
    /// Neither pruning nor refinement.
    Sap,
}

impl Variant {
    pub fn prunes_layers(self) -> bool {
        matches!(self, Variant::HmpIap | Variant::HmpSap)
    }

    pub fn refines_clusters(self) -> bool {
        matches!(self, Variant::HmpIap | Variant::Iap)
    }

    pub const ALL: [Variant; 4] = [Variant::HmpIap, Variant::HmpSap, Variant::Iap, Variant::Sap];
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Variant::HmpIap => "hmp+iap",
            Variant::HmpSap => "hmp+sap",
            Variant::Iap => "iap",
            Variant::Sap => "sap",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "+").as_str() {
            "hmp+iap" | "full" => Ok(Variant::HmpIap),
            "hmp+sap" => Ok(Variant::HmpSap),
            "iap" => Ok(Variant::Iap),
            "sap" => Ok(Variant::Sap),
            other => Err(format!(
                "unknown variant `{other}` (expected hmp+iap, hmp+sap, iap or sap)"
            )),
        }
    }
}

/// Stage sizes: M hypotheses generated, M' kept, N' points kept, N''
/// significant stage-1 clusters, final instance count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitCounts {
    pub hypotheses: usize,
    pub kept_hypotheses: usize,
    pub kept_points: usize,
    pub stage1_clusters: usize,
    pub instances: usize,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub hypothesize: f64,
    pub build_representation: f64,
    pub prune_hypotheses: f64,
    pub propagate: f64,
    pub prune_points: f64,
    pub build_graph: f64,
    pub cluster: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Sampler slots abandoned as persistently degenerate.
    pub degenerate_subsets_skipped: usize,
    /// Hypotheses kept with zero scale after a failed scale estimate.
    pub scale_failures: usize,
    /// Kept points discarded for having an all-zero preference vector.
    pub zero_preference_points: usize,
    pub ap_converged: bool,
    pub refine_converged: bool,
    /// Final clusters dropped because refitting was degenerate.
    pub dropped_degenerate_instances: usize,
}

/// Full pipeline output. Labels cover the original point set: 0 marks a
/// point that was pruned, discarded or left unassigned; label k ≥ 1 marks
/// membership in `instances[k-1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub instances: Vec<ModelInstance>,
    pub labels: Vec<usize>,
    pub counts: FitCounts,
    pub timings: StageTimings,
    pub diagnostics: Diagnostics,
}

/// Run the full pipeline (equivalent to `ablate` with the full variant).
pub fn fit(points: &PointSet, cfg: &FitConfig) -> Result<FitReport, PipelineError> {
    run(points, cfg, true, true)
}

/// Run the pipeline with the designated stages bypassed.
pub fn ablate(
    points: &PointSet,
    cfg: &FitConfig,
    variant: Variant,
) -> Result<FitReport, PipelineError> {
    run(
        points,
        cfg,
        variant.prunes_layers(),
        variant.refines_clusters(),
    )
}

fn run(
    points: &PointSet,
    cfg: &FitConfig,
    prune_layers: bool,
    refine: bool,
) -> Result<FitReport, PipelineError> {
    let n = points.len();
    let total_start = Instant::now();
    let mut timings = StageTimings::default();

    // Hypothesis generation + scale estimation.
    let stage = Instant::now();
    let mut sampler = cfg.sampler.clone();
    sampler.seed = cfg.seed;
    let generated = hypothesis::generate_hypotheses(points, cfg.kind, &sampler, &cfg.ikose)?;
    let hypothesis_count = generated.hypotheses.len();
    timings.hypothesize = stage.elapsed().as_secs_f64();

    // Hierarchical representation.
    let stage = Instant::now();
    let rep_full = HierarchicalRepresentation::build(points, generated.hypotheses);
    timings.build_representation = stage.elapsed().as_secs_f64();

    // Hypothesis-layer pruning (entropy rule over Epanechnikov weights).
    let stage = Instant::now();
    let hyp_weights = hierarchy::hypothesis_weights(&rep_full);
    let (rep, kept_hypotheses) = if prune_layers {
        let kept =
            hierarchy::prune_hypotheses(&hyp_weights).map_err(PipelineError::HypothesisPruning)?;
        let restricted = rep_full.restrict_hypotheses(&kept);
        (restricted, kept)
    } else {
        let all: Vec<usize> = (0..hypothesis_count).collect();
        (rep_full, all)
    };
    timings.prune_hypotheses = stage.elapsed().as_secs_f64();

    // Message propagation on the (possibly pruned) representation.
    let stage = Instant::now();
    let msg =
        hierarchy::propagate(&rep, cfg.propagation_iters).map_err(PipelineError::Propagation)?;
    timings.propagate = stage.elapsed().as_secs_f64();

    // Point-layer pruning: GMM threshold over each point's strongest edge
    // weight. Summed scores would scale with a structure's kept-hypothesis
    // count and starve weakly supported structures at a single threshold.
    let stage = Instant::now();
    let point_weight_values = hierarchy::strongest_edge_weights(&rep);
    let (kept_points, gmm, threshold): (Vec<usize>, Option<Gmm1d>, f64) = if prune_layers {
        match hierarchy::fit_gmm_1d(&point_weight_values) {
            Ok(g) => match g.separating_threshold() {
                Some(thr) => {
                    let kept = hierarchy::prune_points(&point_weight_values, thr)
                        .map_err(PipelineError::PointPruning)?;
                    (kept, Some(g), thr)
                }
                // One mode only: nothing to prune.
                None => ((0..n).collect(), Some(g), 0.0),
            },
            // Degenerate score histogram: every point is treated as inlier.
            Err(HierarchyError::DegenerateInput) => ((0..n).collect(), None, 0.0),
            Err(e) => return Err(PipelineError::PointPruning(e)),
        }
    } else {
        ((0..n).collect(), None, 0.0)
    };
    let prune = PruneResult {
        kept_hypotheses,
        kept_points,
        point_weights: point_weight_values,
        hyp_weights,
        gmm,
        threshold,
    };
    timings.prune_points = stage.elapsed().as_secs_f64();

    // Preference vectors over the pruned hypothesis layer; points whose
    // vector is all-zero cannot be clustered and are discarded here.
    let stage = Instant::now();
    let m_kept = rep.hypothesis_count();
    let mut prefs = Vec::with_capacity(prune.kept_points.len());
    let mut clustered_points = Vec::with_capacity(prune.kept_points.len());
    let mut zero_preference_points = 0usize;
    for &i in &prune.kept_points {
        let row = rep.row(i);
        let mut p = vec![0.0f64; m_kept];
        let mut nonzero = false;
        for &(col, w) in row {
            let v = msg.hyp_score[col as usize] * w;
            p[col as usize] = v;
            nonzero |= v > 0.0;
        }
        if nonzero {
            clustered_points.push(i);
            prefs.push(p);
        } else {
            zero_preference_points += 1;
        }
    }
    if clustered_points.is_empty() {
        return Err(PipelineError::PointPruning(HierarchyError::EmptyResult));
    }
    let tau = cfg.tau.min(clustered_points.len().saturating_sub(1)).max(1);
    let graph = clustering::build_knn_graph(&prefs, tau);
    timings.build_graph = stage.elapsed().as_secs_f64();

    // Sparse affinity propagation plus refinement/refit.
    let stage = Instant::now();
    let ap_cfg = cfg.ap_config();
    let stage1 = clustering::sparse_affinity_propagation(&graph, &ap_cfg);
    let kept_set = points
        .select(&clustered_points)
        .expect("clustered point list is non-empty");
    let clusters = if refine {
        clustering::refine_clusters(&stage1, &prefs, &kept_set, cfg.kind, &ap_cfg)?
    } else {
        clustering::select_clusters(&stage1, &prefs, &kept_set, cfg.kind)?
    };
    timings.cluster = stage.elapsed().as_secs_f64();

    // Map back to original indices.
    let mut labels = vec![0usize; n];
    for (local, &orig) in clustered_points.iter().enumerate() {
        labels[orig] = clusters.labels[local];
    }
    let instances: Vec<ModelInstance> = clusters
        .instances
        .iter()
        .map(|inst| ModelInstance {
            params: inst.params.clone(),
            members: inst.members.iter().map(|&l| clustered_points[l]).collect(),
        })
        .collect();

    timings.total = total_start.elapsed().as_secs_f64();
    Ok(FitReport {
        counts: FitCounts {
            hypotheses: hypothesis_count,
            kept_hypotheses: rep.hypothesis_count(),
            kept_points: prune.kept_points.len(),
            stage1_clusters: clusters.stage1_cluster_count,
            instances: instances.len(),
        },
        labels,
        instances,
        timings,
        diagnostics: Diagnostics {
            degenerate_subsets_skipped: generated.degenerate_skipped,
            scale_failures: generated.scale_failures,
            zero_preference_points,
            ap_converged: stage1.converged,
            refine_converged: clusters.refine_converged,
            dropped_degenerate_instances: clusters.dropped_degenerate,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ObservationKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn planar(rows: Vec<Vec<f64>>) -> PointSet {
        PointSet::new(ObservationKind::PlanarPoint, rows, None).unwrap()
    }

    fn noise_free_line(n: usize) -> PointSet {
        planar(
            (0..n)
                .map(|i| vec![i as f64, 2.0 * i as f64 + 1.0])
                .collect(),
        )
    }

    /// Two separated lines with noise plus uniform gross outliers.
    fn two_line_scene(seed: u64) -> (PointSet, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.4).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..70 {
            rows.push(vec![i as f64, 15.0 + normal.sample(&mut rng)]);
            labels.push(1);
        }
        for i in 0..70 {
            rows.push(vec![i as f64, 45.0 + normal.sample(&mut rng)]);
            labels.push(2);
        }
        for _ in 0..100 {
            rows.push(vec![
                rng.random_range(0.0..70.0),
                rng.random_range(0.0..60.0),
            ]);
            labels.push(0);
        }
        (planar(rows), labels)
    }

    #[test]
    fn single_noise_free_line() {
        let points = noise_free_line(50);
        let cfg = FitConfig::for_points(ModelKind::Line2d, &points, 100, 3);
        let report = fit(&points, &cfg).unwrap();
        assert_eq!(report.counts.instances, 1);
        assert!(report.labels.iter().all(|&l| l == 1));
        // Ground truth 2x − y + 1 = 0 normalized.
        let norm = (5.0f64).sqrt();
        let truth = [2.0 / norm, -1.0 / norm, 1.0 / norm];
        let got = &report.instances[0].params;
        let sign = if got[0] * truth[0] + got[1] * truth[1] >= 0.0 {
            1.0
        } else {
            -1.0
        };
        for (g, t) in got.iter().zip(truth.iter()) {
            assert!((g - sign * t).abs() < 1e-6, "params {got:?}");
        }
    }

    #[test]
    fn fixed_seed_reports_are_identical() {
        let (points, _) = two_line_scene(11);
        let cfg = FitConfig::for_points(ModelKind::Line2d, &points, 800, 42);
        let a = fit(&points, &cfg).unwrap();
        let b = fit(&points, &cfg).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.instances, b.instances);
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.diagnostics, b.diagnostics);
    }

    #[test]
    fn counts_stay_monotone_and_outlier_labels_sound() {
        let (points, _) = two_line_scene(5);
        let cfg = FitConfig::for_points(ModelKind::Line2d, &points, 600, 9);
        let report = fit(&points, &cfg).unwrap();
        assert!(report.counts.kept_hypotheses <= report.counts.hypotheses);
        assert!(report.counts.kept_points <= points.len());
        assert!(report.counts.instances <= report.counts.stage1_clusters);
        // Membership lists and labels agree.
        for (idx, inst) in report.instances.iter().enumerate() {
            for &i in &inst.members {
                assert_eq!(report.labels[i], idx + 1);
            }
        }
        let member_total: usize = report.instances.iter().map(|i| i.members.len()).sum();
        let labeled = report.labels.iter().filter(|&&l| l > 0).count();
        assert_eq!(member_total, labeled);
    }

    #[test]
    fn full_variant_equals_fit() {
        let (points, _) = two_line_scene(21);
        let cfg = FitConfig::for_points(ModelKind::Line2d, &points, 500, 77);
        let a = fit(&points, &cfg).unwrap();
        let b = ablate(&points, &cfg, Variant::HmpIap).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.instances, b.instances);
        assert_eq!(a.counts, b.counts);
    }

    #[test]
    fn clean_data_every_variant_finds_the_structure() {
        let points = noise_free_line(40);
        let cfg = FitConfig::for_points(ModelKind::Line2d, &points, 150, 13);
        for variant in Variant::ALL {
            let report = ablate(&points, &cfg, variant).unwrap();
            assert_eq!(
                report.counts.instances, 1,
                "variant {variant} found {} instances",
                report.counts.instances
            );
        }
    }

    #[test]
    fn fit_decomposes_into_module_calls() {
        let (points, _) = two_line_scene(2);
        let cfg = FitConfig::for_points(ModelKind::Line2d, &points, 400, 31);
        let report = fit(&points, &cfg).unwrap();

        // Manual composition with the same seeds and configuration.
        let mut sampler = cfg.sampler.clone();
        sampler.seed = cfg.seed;
        let generated =
            hypothesis::generate_hypotheses(&points, cfg.kind, &sampler, &cfg.ikose).unwrap();
        let rep_full = HierarchicalRepresentation::build(&points, generated.hypotheses);
        let hyp_w = hierarchy::hypothesis_weights(&rep_full);
        let kept_h = hierarchy::prune_hypotheses(&hyp_w).unwrap();
        let rep = rep_full.restrict_hypotheses(&kept_h);
        let msg = hierarchy::propagate(&rep, cfg.propagation_iters).unwrap();
        let gate = hierarchy::strongest_edge_weights(&rep);
        let gmm = hierarchy::fit_gmm_1d(&gate).unwrap();
        let thr = gmm.separating_threshold().expect("bimodal score histogram");
        let kept_p = hierarchy::prune_points(&gate, thr).unwrap();
        let mut prefs = Vec::new();
        let mut clustered = Vec::new();
        for &i in &kept_p {
            let mut p = vec![0.0f64; rep.hypothesis_count()];
            for &(col, wij) in rep.row(i) {
                p[col as usize] = msg.hyp_score[col as usize] * wij;
            }
            if p.iter().any(|v| *v > 0.0) {
                clustered.push(i);
                prefs.push(p);
            }
        }
        let tau = cfg.tau.min(clustered.len() - 1).max(1);
        let graph = clustering::build_knn_graph(&prefs, tau);
        let stage1 = clustering::sparse_affinity_propagation(&graph, &cfg.ap_config());
        let kept_set = points.select(&clustered).unwrap();
        let clusters =
            clustering::refine_clusters(&stage1, &prefs, &kept_set, cfg.kind, &cfg.ap_config())
                .unwrap();
        let mut labels = vec![0usize; points.len()];
        for (local, &orig) in clustered.iter().enumerate() {
            labels[orig] = clusters.labels[local];
        }

        assert_eq!(report.labels, labels);
        assert_eq!(report.counts.kept_hypotheses, kept_h.len());
        assert_eq!(report.counts.kept_points, kept_p.len());
        assert_eq!(report.counts.instances, clusters.instances.len());
        for (a, b) in report.instances.iter().zip(&clusters.instances) {
            assert_eq!(a.params, b.params);
        }
    }

    #[test]
    fn too_few_points_is_annotated() {
        let points = planar(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        let cfg = FitConfig::for_points(ModelKind::Circle2d, &points, 10, 1);
        match fit(&points, &cfg) {
            Err(PipelineError::HypothesisGeneration(HypothesisError::NotEnoughPoints {
                ..
            })) => {}
            other => panic!("expected NotEnoughPoints, got {other:?}"),
        }
    }

    #[test]
    fn variant_round_trips_through_strings() {
        for v in Variant::ALL {
            let s = v.to_string();
            assert_eq!(s.parse::<Variant>().unwrap(), v);
        }
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn two_line_scene_is_segmented() {
        let (points, truth) = two_line_scene(77);
        let cfg = FitConfig::for_points(ModelKind::Line2d, &points, 1000, 5);
        let report = fit(&points, &cfg).unwrap();
        assert_eq!(report.counts.instances, 2, "counts: {:?}", report.counts);
        // Most structured points must land in some instance.
        let recovered = truth
            .iter()
            .zip(&report.labels)
            .filter(|(&t, &l)| t > 0 && l > 0)
            .count();
        let structured = truth.iter().filter(|&&t| t > 0).count();
        assert!(
            recovered as f64 >= 0.8 * structured as f64,
            "only {recovered}/{structured} structured points kept"
        );
    }
}
