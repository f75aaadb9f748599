//! Benchmark sweeps: repeated seeded runs per dataset recipe, per-run error
//! and timing records, and the aggregate statistics reported by the
//! evaluation protocol (mean, std, median, mean CPU time, totals).

use serde::{Deserialize, Serialize};

use crate::bench::metrics::misclassification_error;
use crate::bench::synthetic::{generate_synthetic, SyntheticSpec};
use crate::hypothesis::{default_proximity_sigma, IkoseConfig};
use crate::pipeline::{self, FitConfig};

/// A named dataset recipe inside a benchmark suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchDataset {
    pub name: String,
    pub spec: SyntheticSpec,
}

/// Outcome of one (dataset, repeat) cell. Failures carry 100% error and a
/// reason instead of aborting the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub repeat: usize,
    pub data_seed: u64,
    pub fit_seed: u64,
    pub error_pct: f64,
    pub instance_count: usize,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub name: String,
    pub mean_error: f64,
    pub std_error: f64,
    pub median_error: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchStats {
    pub datasets: Vec<DatasetStats>,
    /// Mean of the per-dataset mean errors.
    pub total_average: f64,
    /// Median of the per-dataset median errors.
    pub total_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub stats: BenchStats,
    pub runs: Vec<RunRecord>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, dataset: usize, repeat: usize) -> u64 {
    splitmix64(base ^ splitmix64((dataset as u64) << 32 | repeat as u64))
}

/// Run `fit` once per (dataset, repeat) with derived per-run seeds. Both the
/// noise realization and the sampling seed change per repeat; the data-scale
/// defaults (proximity kernel, IKOSE K) are re-derived per generated
/// dataset, everything else comes from `cfg`.
pub fn run_benchmark(datasets: &[BenchDataset], cfg: &FitConfig, repeats: usize) -> BenchReport {
    assert!(repeats >= 1, "at least one repeat required");
    let mut runs = Vec::with_capacity(datasets.len() * repeats);
    for (di, dataset) in datasets.iter().enumerate() {
        for repeat in 0..repeats {
            let data_seed = derive_seed(dataset.spec.seed, di, repeat);
            let fit_seed = derive_seed(cfg.seed, di, repeat);
            let mut spec = dataset.spec.clone();
            spec.seed = data_seed;
            let points = generate_synthetic(&spec);
            let truth = points.labels().expect("synthetic data is labeled").to_vec();

            let mut run_cfg = cfg.clone();
            run_cfg.seed = fit_seed;
            run_cfg.sampler.proximity_sigma = default_proximity_sigma(&points);
            run_cfg.ikose = IkoseConfig::for_count(points.len());

            let started = std::time::Instant::now();
            let record = match pipeline::fit(&points, &run_cfg) {
                Ok(report) => RunRecord {
                    dataset: dataset.name.clone(),
                    repeat,
                    data_seed,
                    fit_seed,
                    error_pct: misclassification_error(&report.labels, &truth)
                        .expect("label arrays share a length"),
                    instance_count: report.counts.instances,
                    seconds: started.elapsed().as_secs_f64(),
                    failure: None,
                },
                Err(e) => RunRecord {
                    dataset: dataset.name.clone(),
                    repeat,
                    data_seed,
                    fit_seed,
                    error_pct: 100.0,
                    instance_count: 0,
                    seconds: started.elapsed().as_secs_f64(),
                    failure: Some(e.to_string()),
                },
            };
            runs.push(record);
        }
    }
    BenchReport {
        stats: aggregate(datasets, &runs),
        runs,
    }
}

fn aggregate(datasets: &[BenchDataset], runs: &[RunRecord]) -> BenchStats {
    let mut per_dataset = Vec::with_capacity(datasets.len());
    for dataset in datasets {
        let errors: Vec<f64> = runs
            .iter()
            .filter(|r| r.dataset == dataset.name)
            .map(|r| r.error_pct)
            .collect();
        let seconds: Vec<f64> = runs
            .iter()
            .filter(|r| r.dataset == dataset.name)
            .map(|r| r.seconds)
            .collect();
        per_dataset.push(DatasetStats {
            name: dataset.name.clone(),
            mean_error: mean(&errors),
            std_error: std_dev(&errors),
            median_error: median(&errors),
            mean_seconds: mean(&seconds),
        });
    }
    let means: Vec<f64> = per_dataset.iter().map(|d| d.mean_error).collect();
    let medians: Vec<f64> = per_dataset.iter().map(|d| d.median_error).collect();
    BenchStats {
        total_average: mean(&means),
        total_median: median(&medians),
        datasets: per_dataset,
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::synthetic::{line_through, Region, StructureSpec};
    use crate::geometry::ModelKind;

    fn clean_line_dataset() -> BenchDataset {
        BenchDataset {
            name: "clean-line".into(),
            spec: SyntheticSpec {
                kind: ModelKind::Line2d,
                structures: vec![StructureSpec {
                    params: line_through([0.0, 10.0], [100.0, 60.0]),
                    inliers: 60,
                    noise_std: 0.0,
                    region: None,
                }],
                gross_outliers: 0,
                region: Region {
                    min: [0.0, 0.0],
                    max: [100.0, 100.0],
                },
                seed: 5,
            },
        }
    }

    fn default_cfg(points_hint: usize) -> FitConfig {
        // A representative config; run_benchmark re-derives the data-scale
        // parts per generated dataset anyway.
        FitConfig {
            kind: ModelKind::Line2d,
            sampler: crate::hypothesis::SamplerConfig {
                hypothesis_count: 200,
                proximity_sigma: 1.0,
                seed: 0,
                max_degenerate_retries: 50,
            },
            ikose: IkoseConfig::for_count(points_hint),
            propagation_iters: 3,
            tau: 30,
            damping: 0.9,
            ap_max_iters: 1000,
            ap_stable_window: 50,
            seed: 99,
        }
    }

    #[test]
    fn singleton_clean_run_scores_zero() {
        let datasets = vec![clean_line_dataset()];
        let report = run_benchmark(&datasets, &default_cfg(60), 1);
        assert_eq!(report.runs.len(), 1);
        assert_eq!(report.runs[0].error_pct, 0.0);
        assert_eq!(report.runs[0].instance_count, 1);
        assert!(report.runs[0].failure.is_none());
        assert_eq!(report.stats.datasets[0].mean_error, 0.0);
        assert_eq!(report.stats.total_average, 0.0);
        assert_eq!(report.stats.total_median, 0.0);
    }

    #[test]
    fn same_seeds_reproduce_identical_stats() {
        let datasets = vec![clean_line_dataset()];
        let cfg = default_cfg(60);
        let a = run_benchmark(&datasets, &cfg, 3);
        let b = run_benchmark(&datasets, &cfg, 3);
        assert_eq!(
            a.stats.datasets[0].mean_error,
            b.stats.datasets[0].mean_error
        );
        assert_eq!(a.stats.total_median, b.stats.total_median);
        for (ra, rb) in a.runs.iter().zip(&b.runs) {
            assert_eq!(ra.error_pct, rb.error_pct);
            assert_eq!(ra.instance_count, rb.instance_count);
            assert_eq!(ra.data_seed, rb.data_seed);
            assert_eq!(ra.fit_seed, rb.fit_seed);
        }
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        // Two points cannot seed circle hypotheses: every run fails but the
        // sweep completes.
        let datasets = vec![BenchDataset {
            name: "impossible".into(),
            spec: SyntheticSpec {
                kind: ModelKind::Circle2d,
                structures: vec![StructureSpec {
                    params: vec![50.0, 50.0, 10.0],
                    inliers: 2,
                    noise_std: 0.0,
                    region: None,
                }],
                gross_outliers: 0,
                region: Region {
                    min: [0.0, 0.0],
                    max: [100.0, 100.0],
                },
                seed: 8,
            },
        }];
        let mut cfg = default_cfg(2);
        cfg.kind = ModelKind::Circle2d;
        let report = run_benchmark(&datasets, &cfg, 2);
        assert_eq!(report.runs.len(), 2);
        for run in &report.runs {
            assert_eq!(run.error_pct, 100.0);
            assert!(run.failure.is_some());
        }
    }

    #[test]
    fn statistics_helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]) - 2.138).abs() < 1e-3);
    }
}
