//! Labeled scatter plots as standalone SVG documents with one marker per
//! point, colors keyed by structure label and label 0 (outliers) rendered
//! distinctly. Output bytes are deterministic for identical input.

use std::fs;
use std::path::Path;

use crate::bench::io::DatasetError;
use crate::geometry::PointSet;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 30.0;
const LEGEND_WIDTH: f64 = 110.0;
const OUTLIER_COLOR: &str = "#9e9e9e";
const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
];

pub fn structure_color(label: usize) -> &'static str {
    debug_assert!(label >= 1);
    PALETTE[(label - 1) % PALETTE.len()]
}

/// Render positions (first-image coordinates for correspondences) to SVG.
pub fn render_svg(positions: &[[f64; 2]], labels: &[usize]) -> String {
    assert_eq!(positions.len(), labels.len(), "one label per point");
    let (lo, hi) = bounds(positions);
    let span_x = (hi[0] - lo[0]).max(1e-9);
    let span_y = (hi[1] - lo[1]).max(1e-9);
    let plot_w = WIDTH - LEGEND_WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let scale = (plot_w / span_x).min(plot_h / span_y);
    let to_px = |p: [f64; 2]| -> (f64, f64) {
        (
            MARGIN + (p[0] - lo[0]) * scale,
            // SVG y grows downward.
            HEIGHT - MARGIN - (p[1] - lo[1]) * scale,
        )
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (p, &l) in positions.iter().zip(labels) {
        let (x, y) = to_px(*p);
        if l == 0 {
            svg.push_str(&format!(
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"1.8\" fill=\"{OUTLIER_COLOR}\" \
                 fill-opacity=\"0.7\"/>\n"
            ));
        } else {
            svg.push_str(&format!(
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{}\"/>\n",
                structure_color(l)
            ));
        }
    }

    // Legend: one entry per distinct nonzero label plus outliers when present.
    let mut structures: Vec<usize> = labels.iter().copied().filter(|&l| l > 0).collect();
    structures.sort_unstable();
    structures.dedup();
    let legend_x = WIDTH - LEGEND_WIDTH;
    let mut row = 0usize;
    for &l in &structures {
        let y = MARGIN + row as f64 * 18.0;
        svg.push_str(&format!(
            "<circle cx=\"{legend_x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{}\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" \
             font-family=\"sans-serif\">structure {l}</text>\n",
            structure_color(l),
            legend_x + 10.0,
            y + 4.0,
        ));
        row += 1;
    }
    if labels.contains(&0) {
        let y = MARGIN + row as f64 * 18.0;
        svg.push_str(&format!(
            "<circle cx=\"{legend_x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{OUTLIER_COLOR}\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" \
             font-family=\"sans-serif\">outliers</text>\n",
            legend_x + 10.0,
            y + 4.0,
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(positions: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    if positions.is_empty() {
        return ([0.0, 0.0], [1.0, 1.0]);
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in positions {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

/// Write a scatter plot of the point set under the given labels.
pub fn emit_plot(points: &PointSet, labels: &[usize], path: &Path) -> Result<(), DatasetError> {
    assert_eq!(points.len(), labels.len(), "one label per point");
    let positions: Vec<[f64; 2]> = points.iter().map(|o| [o[0], o[1]]).collect();
    fs::write(path, render_svg(&positions, labels))?;
    Ok(())
}
