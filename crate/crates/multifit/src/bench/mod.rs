//! Benchmark harness: synthetic dataset generation, dataset IO, the
//! misclassification metric, benchmark statistics and SVG plots.

pub mod io;
pub mod metrics;
pub mod plot;
pub mod runner;
pub mod synthetic;

pub use io::{read_dataset, write_dataset, Dataset, DatasetError};
pub use metrics::{misclassification_error, MetricError};
pub use plot::{emit_plot, render_svg};
pub use runner::{run_benchmark, BenchDataset, BenchReport, BenchStats, RunRecord};
pub use synthetic::{generate_synthetic, line_through, Region, StructureSpec, SyntheticSpec};
