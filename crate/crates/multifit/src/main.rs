//! Command-line interface: synthetic dataset generation, fitting, component
//! ablation and benchmark sweeps over JSON datasets.
//!
//! Exit codes: 0 on success, 1 when a pipeline stage fails, 2 on IO or
//! parse errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use multifit::bench::{self, io::Dataset, runner::BenchDataset, BenchReport, SyntheticSpec};
use multifit::geometry::{ModelKind, PointSet};
use multifit::hypothesis::{IkoseConfig, SamplerConfig};
use multifit::pipeline::{self, FitConfig, FitReport, Variant};

#[derive(Parser)]
#[command(
    name = "multifit",
    about = "Multi-structure robust geometric model fitting",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a recipe file.
    Generate {
        /// JSON file holding the dataset recipe.
        #[arg(long)]
        spec: PathBuf,
        /// Output dataset path (.json, or .csv for planar points).
        #[arg(long)]
        out: PathBuf,
        /// Optional ground-truth scatter plot.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Fit model instances to a dataset.
    Fit {
        #[command(flatten)]
        fit: FitArgs,
        /// Report output path (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional scatter plot of the segmentation.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Fit with a designated pipeline stage bypassed.
    Ablate {
        #[command(flatten)]
        fit: FitArgs,
        /// Pipeline variant: hmp+iap, hmp+sap, iap or sap.
        #[arg(long)]
        variant: Variant,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run a benchmark suite of synthetic dataset recipes.
    Bench {
        /// Suite file: fit settings plus named dataset recipes.
        #[arg(long)]
        suite: PathBuf,
        /// Repeats per dataset (overrides the suite file).
        #[arg(long)]
        repeats: Option<usize>,
        /// Statistics output path (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FitArgs {
    /// Input dataset (.json, or .csv with x,y[,label] rows).
    #[arg(long = "in")]
    input: PathBuf,
    /// Model kind: line2d, circle2d, homography or fundamental.
    #[arg(long)]
    kind: ModelKind,
    /// Number of model hypotheses M.
    #[arg(long, default_value_t = 5000)]
    hypotheses: usize,
    /// Ordinal index K of the scale estimator (default: max(10, N/10)).
    #[arg(long)]
    k_ikose: Option<usize>,
    /// Nearest-neighbor count of the sparse similarity graph.
    #[arg(long, default_value_t = 30)]
    tau: usize,
    /// Message-propagation rounds.
    #[arg(long, default_value_t = 3)]
    iters: usize,
    /// Affinity-propagation damping in [0, 1).
    #[arg(long, default_value_t = 0.9)]
    damping: f64,
    #[arg(long, default_value_t = 1000)]
    ap_max_iters: usize,
    #[arg(long, default_value_t = 50)]
    ap_stable_window: usize,
    /// Proximity-sampling kernel width (default: a tenth of the bounding-box
    /// diagonal).
    #[arg(long)]
    proximity_sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FitArgs {
    fn config(&self, points: &PointSet) -> FitConfig {
        let mut sampler = SamplerConfig::for_points(points, self.hypotheses, self.seed);
        if let Some(sigma) = self.proximity_sigma {
            sampler.proximity_sigma = sigma;
        }
        let mut ikose = IkoseConfig::for_count(points.len());
        if let Some(k) = self.k_ikose {
            ikose.k = k;
        }
        FitConfig {
            kind: self.kind,
            sampler,
            ikose,
            propagation_iters: self.iters,
            tau: self.tau,
            damping: self.damping,
            ap_max_iters: self.ap_max_iters,
            ap_stable_window: self.ap_stable_window,
            seed: self.seed,
        }
    }
}

/// Suite file schema for `bench`.
#[derive(serde::Deserialize)]
struct SuiteFile {
    kind: ModelKind,
    #[serde(default = "default_hypotheses")]
    hypotheses: usize,
    #[serde(default = "default_repeats")]
    repeats: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_tau")]
    tau: usize,
    #[serde(default = "default_iters")]
    iters: usize,
    #[serde(default = "default_damping")]
    damping: f64,
    datasets: Vec<BenchDataset>,
}

fn default_hypotheses() -> usize {
    5000
}
fn default_repeats() -> usize {
    20
}
fn default_tau() -> usize {
    30
}
fn default_iters() -> usize {
    3
}
fn default_damping() -> f64 {
    0.9
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Pipeline(pipeline::PipelineError),
    Io(String),
}

impl From<pipeline::PipelineError> for CliError {
    fn from(e: pipeline::PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}

impl From<bench::DatasetError> for CliError {
    fn from(e: bench::DatasetError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { spec, out, plot } => {
            let text = std::fs::read_to_string(&spec)?;
            let recipe: SyntheticSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Io(format!("{}: {e}", spec.display())))?;
            let points = bench::generate_synthetic(&recipe);
            let labels = points.labels().expect("synthetic data is labeled").to_vec();
            let meta = serde_json::json!({
                "structures": recipe.structures.len(),
                "gross_outliers": recipe.gross_outliers,
                "gross_outlier_rate": recipe.gross_outlier_rate(),
                "seed": recipe.seed,
            });
            if let Some(path) = plot {
                bench::emit_plot(&points, &labels, &path)?;
            }
            let dataset = Dataset {
                points,
                meta: Some(meta),
            };
            bench::write_dataset(&out, &dataset)?;
            println!(
                "wrote {} observations to {}",
                dataset.points.len(),
                out.display()
            );
            Ok(())
        }
        Command::Fit { fit, out, plot } => {
            let dataset = bench::read_dataset(&fit.input)?;
            require_kind(&dataset.points, fit.kind)?;
            let cfg = fit.config(&dataset.points);
            let report = pipeline::fit(&dataset.points, &cfg)?;
            finish_fit(&dataset, &report, out, plot)
        }
        Command::Ablate {
            fit,
            variant,
            out,
            plot,
        } => {
            let dataset = bench::read_dataset(&fit.input)?;
            require_kind(&dataset.points, fit.kind)?;
            let cfg = fit.config(&dataset.points);
            let report = pipeline::ablate(&dataset.points, &cfg, variant)?;
            finish_fit(&dataset, &report, out, plot)
        }
        Command::Bench {
            suite,
            repeats,
            out,
        } => {
            let text = std::fs::read_to_string(&suite)?;
            let suite: SuiteFile = serde_json::from_str(&text)
                .map_err(|e| CliError::Io(format!("suite file: {e}")))?;
            // The runner re-derives data-scale defaults per generated
            // dataset; the placeholder sampler fields are never used as-is.
            let cfg = FitConfig {
                kind: suite.kind,
                sampler: SamplerConfig {
                    hypothesis_count: suite.hypotheses,
                    proximity_sigma: 1.0,
                    seed: suite.seed,
                    max_degenerate_retries: 50,
                },
                ikose: IkoseConfig::for_count(1000),
                propagation_iters: suite.iters,
                tau: suite.tau,
                damping: suite.damping,
                ap_max_iters: 1000,
                ap_stable_window: 50,
                seed: suite.seed,
            };
            let repeats = repeats.unwrap_or(suite.repeats);
            let report: BenchReport = bench::run_benchmark(&suite.datasets, &cfg, repeats);
            for d in &report.stats.datasets {
                println!(
                    "{}: mean {:.2}% std {:.2} median {:.2}% time {:.2}s",
                    d.name, d.mean_error, d.std_error, d.median_error, d.mean_seconds
                );
            }
            println!(
                "total average {:.2}% | total median {:.2}%",
                report.stats.total_average, report.stats.total_median
            );
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&report).unwrap())?;
            }
            Ok(())
        }
    }
}

fn require_kind(points: &PointSet, kind: ModelKind) -> Result<(), CliError> {
    if points.kind() != kind.observation_kind() {
        return Err(CliError::Io(format!(
            "dataset holds {:?} observations but --kind {kind} needs {:?}",
            points.kind(),
            kind.observation_kind()
        )));
    }
    Ok(())
}

fn finish_fit(
    dataset: &Dataset,
    report: &FitReport,
    out: Option<PathBuf>,
    plot: Option<PathBuf>,
) -> Result<(), CliError> {
    println!(
        "{} instances | M {} -> M' {} | N {} -> N' {} | {:.2}s",
        report.counts.instances,
        report.counts.hypotheses,
        report.counts.kept_hypotheses,
        dataset.points.len(),
        report.counts.kept_points,
        report.timings.total
    );
    if let Some(truth) = dataset.points.labels() {
        let err = bench::misclassification_error(&report.labels, truth)
            .expect("report labels cover the dataset");
        println!("misclassification vs ground truth: {err:.2}%");
    }
    if let Some(path) = plot {
        bench::emit_plot(&dataset.points, &report.labels, &path)?;
    }
    if let Some(path) = out {
        std::fs::write(&path, serde_json::to_string_pretty(report).unwrap())?;
    }
    Ok(())
}
