//! Model kinds, minimal-subset solvers, residual functions and least-squares
//! refitting for lines, circles, homographies and fundamental matrices.
//!
//! All solvers return normalized parameter vectors: lines in unit-normal form
//! `(a, b, c)` with `a² + b² = 1`, circles as `(cx, cy, r)` with `r > 0`, and
//! the two 3×3 models as row-major 9-vectors of unit Frobenius norm (the
//! fundamental matrix additionally has rank 2 enforced). Every operation here
//! is a pure function of its inputs.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative singular-value cutoff for rank-deficiency tests.
const DEGENERACY_RTOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate subset: {0}")]
    DegenerateSubset(&'static str),
    #[error("{kind:?} needs {expected} observations, got {got}")]
    SubsetSize {
        kind: ModelKind,
        expected: usize,
        got: usize,
    },
    #[error("observation has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point set must contain at least one observation")]
    EmptyPointSet,
    #[error("labels length {got} does not match point count {expected}")]
    LabelLength { expected: usize, got: usize },
}

/// What a single observation is: a 2D point or a 4D point correspondence
/// `(x1, y1, x2, y2)` between two images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservationKind {
    #[serde(rename = "planar-point")]
    PlanarPoint,
    #[serde(rename = "correspondence")]
    Correspondence,
}

impl ObservationKind {
    pub fn dim(self) -> usize {
        match self {
            ObservationKind::PlanarPoint => 2,
            ObservationKind::Correspondence => 4,
        }
    }
}

/// The supported model families with their minimal-subset sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Line2d,
    Circle2d,
    Homography,
    Fundamental,
}

impl ModelKind {
    /// Smallest observation count that determines the model.
    pub fn minimal_subset_size(self) -> usize {
        match self {
            ModelKind::Line2d => 2,
            ModelKind::Circle2d => 3,
            ModelKind::Homography => 4,
            ModelKind::Fundamental => 8,
        }
    }

    /// Length of the parameter vector produced by the solvers.
    pub fn param_len(self) -> usize {
        match self {
            ModelKind::Line2d | ModelKind::Circle2d => 3,
            ModelKind::Homography | ModelKind::Fundamental => 9,
        }
    }

    pub fn observation_kind(self) -> ObservationKind {
        match self {
            ModelKind::Line2d | ModelKind::Circle2d => ObservationKind::PlanarPoint,
            ModelKind::Homography | ModelKind::Fundamental => ObservationKind::Correspondence,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ModelKind::Line2d => "line2d",
            ModelKind::Circle2d => "circle2d",
            ModelKind::Homography => "homography",
            ModelKind::Fundamental => "fundamental",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "line2d" | "line" => Ok(ModelKind::Line2d),
            "circle2d" | "circle" => Ok(ModelKind::Circle2d),
            "homography" => Ok(ModelKind::Homography),
            "fundamental" => Ok(ModelKind::Fundamental),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

/// N observations of a single kind, with optional ground-truth labels
/// (0 marks a gross outlier, k ≥ 1 a structure id).
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    kind: ObservationKind,
    data: Vec<f64>,
    labels: Option<Vec<usize>>,
}

impl PointSet {
    pub fn new(
        kind: ObservationKind,
        rows: Vec<Vec<f64>>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self, GeometryError> {
        let dim = kind.dim();
        if rows.is_empty() {
            return Err(GeometryError::EmptyPointSet);
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        if let Some(ref l) = labels {
            if l.len() != rows.len() {
                return Err(GeometryError::LabelLength {
                    expected: rows.len(),
                    got: l.len(),
                });
            }
        }
        Ok(PointSet { kind, data, labels })
    }

    pub fn from_flat(
        kind: ObservationKind,
        data: Vec<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self, GeometryError> {
        let dim = kind.dim();
        if data.is_empty() {
            return Err(GeometryError::EmptyPointSet);
        }
        if data.len() % dim != 0 {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: data.len() % dim,
            });
        }
        let n = data.len() / dim;
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(GeometryError::LabelLength {
                    expected: n,
                    got: l.len(),
                });
            }
        }
        Ok(PointSet { kind, data, labels })
    }

    pub fn kind(&self) -> ObservationKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.kind.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn obs(&self, i: usize) -> &[f64] {
        let dim = self.kind.dim();
        &self.data[i * dim..(i + 1) * dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.kind.dim())
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn set_labels(&mut self, labels: Option<Vec<usize>>) -> Result<(), GeometryError> {
        if let Some(ref l) = labels {
            if l.len() != self.len() {
                return Err(GeometryError::LabelLength {
                    expected: self.len(),
                    got: l.len(),
                });
            }
        }
        self.labels = labels;
        Ok(())
    }

    /// New point set containing only the observations at `indices`
    /// (labels dropped).
    pub fn select(&self, indices: &[usize]) -> Result<Self, GeometryError> {
        let dim = self.kind.dim();
        if indices.is_empty() {
            return Err(GeometryError::EmptyPointSet);
        }
        let mut data = Vec::with_capacity(indices.len() * dim);
        for &i in indices {
            data.extend_from_slice(self.obs(i));
        }
        Ok(PointSet {
            kind: self.kind,
            data,
            labels: None,
        })
    }
}

/// A candidate model: parameters plus the inlier scale estimated for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHypothesis {
    pub kind: ModelKind,
    pub params: Vec<f64>,
    /// Inlier scale σ in residual units; 0 marks a hypothesis whose scale
    /// estimation failed (it carries no edges downstream).
    pub scale: f64,
}

impl ModelHypothesis {
    pub fn residual(&self, obs: &[f64]) -> f64 {
        residual(self.kind, &self.params, obs)
    }
}

/// Solve for model parameters from a minimal subset of observations.
///
/// Line and circle parameters interpolate the subset exactly; homography and
/// fundamental parameters minimize algebraic error after Hartley
/// normalization.
pub fn minimal_solve(kind: ModelKind, subset: &[&[f64]]) -> Result<Vec<f64>, GeometryError> {
    let expected = kind.minimal_subset_size();
    if subset.len() != expected {
        return Err(GeometryError::SubsetSize {
            kind,
            expected,
            got: subset.len(),
        });
    }
    check_dims(kind, subset)?;
    match kind {
        ModelKind::Line2d => solve_line_two_points(subset),
        ModelKind::Circle2d => solve_circumcircle(subset),
        ModelKind::Homography => solve_homography_dlt(subset),
        ModelKind::Fundamental => solve_fundamental_8pt(subset),
    }
}

/// Least-squares refit over an inlier set (total least squares for lines,
/// algebraic circle fit, DLT / 8-point over all members for the two-view
/// models).
pub fn refit(kind: ModelKind, inliers: &[&[f64]]) -> Result<Vec<f64>, GeometryError> {
    let needed = kind.minimal_subset_size();
    if inliers.len() < needed {
        return Err(GeometryError::SubsetSize {
            kind,
            expected: needed,
            got: inliers.len(),
        });
    }
    check_dims(kind, inliers)?;
    match kind {
        ModelKind::Line2d => fit_line_tls(inliers),
        ModelKind::Circle2d => {
            if inliers.len() == 3 {
                solve_circumcircle(inliers)
            } else {
                fit_circle_algebraic(inliers)
            }
        }
        ModelKind::Homography => solve_homography_dlt(inliers),
        ModelKind::Fundamental => solve_fundamental_8pt(inliers),
    }
}

/// Nonnegative residual of one observation against model parameters:
/// point-line distance, radial deviation, symmetric transfer error or
/// Sampson distance depending on the kind.
pub fn residual(kind: ModelKind, params: &[f64], obs: &[f64]) -> f64 {
    PreparedModel::new(kind, params).residual(obs)
}

/// Per-hypothesis state precomputed once so residuals over many observations
/// avoid rebuilding matrices and inverses.
#[derive(Debug, Clone)]
pub enum PreparedModel {
    Line {
        a: f64,
        b: f64,
        c: f64,
    },
    Circle {
        cx: f64,
        cy: f64,
        r: f64,
    },
    Homography {
        h: Matrix3<f64>,
        h_inv: Option<Matrix3<f64>>,
    },
    Fundamental {
        f: Matrix3<f64>,
    },
}

impl PreparedModel {
    pub fn new(kind: ModelKind, params: &[f64]) -> Self {
        assert_eq!(params.len(), kind.param_len(), "parameter length mismatch");
        match kind {
            ModelKind::Line2d => PreparedModel::Line {
                a: params[0],
                b: params[1],
                c: params[2],
            },
            ModelKind::Circle2d => PreparedModel::Circle {
                cx: params[0],
                cy: params[1],
                r: params[2],
            },
            ModelKind::Homography => {
                let h = Matrix3::from_row_slice(params);
                PreparedModel::Homography {
                    h,
                    h_inv: h.try_inverse(),
                }
            }
            ModelKind::Fundamental => PreparedModel::Fundamental {
                f: Matrix3::from_row_slice(params),
            },
        }
    }

    pub fn residual(&self, obs: &[f64]) -> f64 {
        match *self {
            PreparedModel::Line { a, b, c } => (a * obs[0] + b * obs[1] + c).abs(),
            PreparedModel::Circle { cx, cy, r } => {
                let d = ((obs[0] - cx).powi(2) + (obs[1] - cy).powi(2)).sqrt();
                (d - r).abs()
            }
            PreparedModel::Homography { ref h, ref h_inv } => {
                let x1 = Vector3::new(obs[0], obs[1], 1.0);
                let x2 = Vector3::new(obs[2], obs[3], 1.0);
                let fwd = transfer_dist_sq(h, &x1, obs[2], obs[3]);
                match h_inv {
                    Some(inv) => {
                        let bwd = transfer_dist_sq(inv, &x2, obs[0], obs[1]);
                        (fwd + bwd).sqrt()
                    }
                    // Non-invertible H: forward error only, kept on the same
                    // scale as the two-sided sum.
                    None => (2.0 * fwd).sqrt(),
                }
            }
            PreparedModel::Fundamental { ref f } => {
                let x1 = Vector3::new(obs[0], obs[1], 1.0);
                let x2 = Vector3::new(obs[2], obs[3], 1.0);
                let fx1 = f * x1;
                let ftx2 = f.transpose() * x2;
                let num = x2.dot(&fx1);
                let denom = fx1.x * fx1.x + fx1.y * fx1.y + ftx2.x * ftx2.x + ftx2.y * ftx2.y;
                if num == 0.0 {
                    0.0
                } else {
                    num.abs() / denom.max(1e-300).sqrt()
                }
            }
        }
    }
}

fn transfer_dist_sq(h: &Matrix3<f64>, x: &Vector3<f64>, tx: f64, ty: f64) -> f64 {
    let y = h * x;
    if y.z.abs() < 1e-300 {
        return f64::INFINITY;
    }
    let dx = y.x / y.z - tx;
    let dy = y.y / y.z - ty;
    dx * dx + dy * dy
}

fn check_dims(kind: ModelKind, obs: &[&[f64]]) -> Result<(), GeometryError> {
    let dim = kind.observation_kind().dim();
    for o in obs {
        if o.len() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: o.len(),
            });
        }
    }
    Ok(())
}

fn coordinate_scale(obs: &[&[f64]]) -> f64 {
    obs.iter()
        .flat_map(|o| o.iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1.0)
}

/// Flip the sign so the largest-magnitude entry is positive; keeps otherwise
/// sign-ambiguous parameter vectors deterministic.
fn canonicalize_sign(params: &mut [f64]) {
    let lead = params
        .iter()
        .cloned()
        .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
    if lead < 0.0 {
        for v in params.iter_mut() {
            *v = -*v;
        }
    }
}

fn solve_line_two_points(pts: &[&[f64]]) -> Result<Vec<f64>, GeometryError> {
    let (p, q) = (pts[0], pts[1]);
    let dx = q[0] - p[0];
    let dy = q[1] - p[1];
    let len = (dx * dx + dy * dy).sqrt();
    if len <= DEGENERACY_RTOL * coordinate_scale(pts) {
        return Err(GeometryError::DegenerateSubset("coincident line points"));
    }
    // Normal is the direction rotated by 90°.
    let a = dy / len;
    let b = -dx / len;
    let c = -(a * p[0] + b * p[1]);
    let mut params = vec![a, b, c];
    canonicalize_sign(&mut params);
    Ok(params)
}

fn fit_line_tls(pts: &[&[f64]]) -> Result<Vec<f64>, GeometryError> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for p in pts {
        let dx = p[0] - cx;
        let dy = p[1] - cy;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let scatter = Matrix2::new(sxx, sxy, sxy, syy);
    let scale = coordinate_scale(pts);
    let eig = scatter.symmetric_eigen();
    let (lo, hi) = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    if eig.eigenvalues[hi] <= (DEGENERACY_RTOL * scale).powi(2) {
        return Err(GeometryError::DegenerateSubset("coincident line points"));
    }
    // The normal is the eigenvector of the smallest scatter eigenvalue.
    let normal: Vector2<f64> = eig.eigenvectors.column(lo).into_owned();
    let norm = normal.norm();
    let a = normal.x / norm;
    let b = normal.y / norm;
    let c = -(a * cx + b * cy);
    let mut params = vec![a, b, c];
    canonicalize_sign(&mut params);
    Ok(params)
}

fn solve_circumcircle(pts: &[&[f64]]) -> Result<Vec<f64>, GeometryError> {
    let (p1, p2, p3) = (pts[0], pts[1], pts[2]);
    // Perpendicular-bisector system for the center.
    let m = Matrix2::new(
        2.0 * (p2[0] - p1[0]),
        2.0 * (p2[1] - p1[1]),
        2.0 * (p3[0] - p1[0]),
        2.0 * (p3[1] - p1[1]),
    );
    let rhs = Vector2::new(
        p2[0] * p2[0] + p2[1] * p2[1] - p1[0] * p1[0] - p1[1] * p1[1],
        p3[0] * p3[0] + p3[1] * p3[1] - p1[0] * p1[0] - p1[1] * p1[1],
    );
    let svd = m.svd(true, true);
    let smax = svd.singular_values[0].max(svd.singular_values[1]);
    let smin = svd.singular_values[0].min(svd.singular_values[1]);
    if smax == 0.0 || smin <= DEGENERACY_RTOL * smax {
        return Err(GeometryError::DegenerateSubset("collinear circle points"));
    }
    let center = svd
        .solve(&rhs, 0.0)
        .map_err(|_| GeometryError::DegenerateSubset("collinear circle points"))?;
    let r = ((p1[0] - center.x).powi(2) + (p1[1] - center.y).powi(2)).sqrt();
    if r <= 0.0 {
        return Err(GeometryError::DegenerateSubset("zero-radius circle"));
    }
    Ok(vec![center.x, center.y, r])
}

/// Algebraic circle fit: least squares on x² + y² + D·x + E·y + F = 0.
fn fit_circle_algebraic(pts: &[&[f64]]) -> Result<Vec<f64>, GeometryError> {
    let n = pts.len();
    let mut design = DMatrix::<f64>::zeros(n, 3);
    let mut rhs = DMatrix::<f64>::zeros(n, 1);
    for (i, p) in pts.iter().enumerate() {
        design[(i, 0)] = p[0];
        design[(i, 1)] = p[1];
        design[(i, 2)] = 1.0;
        rhs[(i, 0)] = -(p[0] * p[0] + p[1] * p[1]);
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin <= DEGENERACY_RTOL * smax {
        return Err(GeometryError::DegenerateSubset("collinear circle points"));
    }
    let sol = svd
        .solve(&rhs, 0.0)
        .map_err(|_| GeometryError::DegenerateSubset("collinear circle points"))?;
    let (d, e, f) = (sol[(0, 0)], sol[(1, 0)], sol[(2, 0)]);
    let cx = -d / 2.0;
    let cy = -e / 2.0;
    let r2 = cx * cx + cy * cy - f;
    if r2 <= 0.0 {
        return Err(GeometryError::DegenerateSubset(
            "non-positive circle radius",
        ));
    }
    Ok(vec![cx, cy, r2.sqrt()])
}

/// Translation to the centroid plus isotropic scaling to mean distance √2.
struct Normalization {
    transform: Matrix3<f64>,
}

fn hartley_normalize(pts: &[(f64, f64)]) -> Result<Normalization, GeometryError> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mean_dist = pts
        .iter()
        .map(|p| ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let coord_scale = pts
        .iter()
        .fold(0.0f64, |acc, p| acc.max(p.0.abs()).max(p.1.abs()))
        .max(1.0);
    if mean_dist <= DEGENERACY_RTOL * coord_scale {
        return Err(GeometryError::DegenerateSubset(
            "coincident correspondences",
        ));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    let transform = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    Ok(Normalization { transform })
}

fn apply_h(t: &Matrix3<f64>, x: f64, y: f64) -> (f64, f64) {
    let v = t * Vector3::new(x, y, 1.0);
    (v.x / v.z, v.y / v.z)
}

/// Right singular vector of the smallest singular value, with a relative
/// rank test on the second-smallest one (the solution is only unique when
/// the design matrix has rank 8).
fn nullspace_9(design: &DMatrix<f64>) -> Result<Vec<f64>, GeometryError> {
    // A zero row keeps the singular structure intact while giving the SVD a
    // full set of nine right singular vectors.
    let mat = if design.nrows() < 9 {
        design.clone().resize_vertically(9, 0.0)
    } else {
        design.clone()
    };
    let svd = mat.svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or(GeometryError::DegenerateSubset("svd failed"))?;
    let s = &svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let largest = s[order[0]];
    let second_smallest = s[order[s.len() - 2]];
    if largest == 0.0 || second_smallest <= DEGENERACY_RTOL * largest {
        return Err(GeometryError::DegenerateSubset(
            "rank-deficient correspondence design matrix",
        ));
    }
    Ok(v_t.row(order[s.len() - 1]).iter().cloned().collect())
}

fn split_correspondences(obs: &[&[f64]]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let p1 = obs.iter().map(|o| (o[0], o[1])).collect();
    let p2 = obs.iter().map(|o| (o[2], o[3])).collect();
    (p1, p2)
}

fn solve_homography_dlt(obs: &[&[f64]]) -> Result<Vec<f64>, GeometryError> {
    let (p1, p2) = split_correspondences(obs);
    let t1 = hartley_normalize(&p1)?;
    let t2 = hartley_normalize(&p2)?;
    let n = obs.len();
    let mut design = DMatrix::<f64>::zeros(2 * n, 9);
    for i in 0..n {
        let (x, y) = apply_h(&t1.transform, p1[i].0, p1[i].1);
        let (xp, yp) = apply_h(&t2.transform, p2[i].0, p2[i].1);
        let r0 = 2 * i;
        design[(r0, 0)] = -x;
        design[(r0, 1)] = -y;
        design[(r0, 2)] = -1.0;
        design[(r0, 6)] = x * xp;
        design[(r0, 7)] = y * xp;
        design[(r0, 8)] = xp;
        let r1 = 2 * i + 1;
        design[(r1, 3)] = -x;
        design[(r1, 4)] = -y;
        design[(r1, 5)] = -1.0;
        design[(r1, 6)] = x * yp;
        design[(r1, 7)] = y * yp;
        design[(r1, 8)] = yp;
    }
    let h_vec = nullspace_9(&design)?;
    let h_norm = Matrix3::from_row_slice(&h_vec);
    let t2_inv = t2
        .transform
        .try_inverse()
        .expect("normalization transform is invertible");
    let h = t2_inv * h_norm * t1.transform;
    Ok(frobenius_params(&h))
}

fn solve_fundamental_8pt(obs: &[&[f64]]) -> Result<Vec<f64>, GeometryError> {
    let (p1, p2) = split_correspondences(obs);
    let t1 = hartley_normalize(&p1)?;
    let t2 = hartley_normalize(&p2)?;
    let n = obs.len();
    let mut design = DMatrix::<f64>::zeros(n, 9);
    for i in 0..n {
        let (x, y) = apply_h(&t1.transform, p1[i].0, p1[i].1);
        let (xp, yp) = apply_h(&t2.transform, p2[i].0, p2[i].1);
        design[(i, 0)] = xp * x;
        design[(i, 1)] = xp * y;
        design[(i, 2)] = xp;
        design[(i, 3)] = yp * x;
        design[(i, 4)] = yp * y;
        design[(i, 5)] = yp;
        design[(i, 6)] = x;
        design[(i, 7)] = y;
        design[(i, 8)] = 1.0;
    }
    let f_vec = nullspace_9(&design)?;
    let f_norm = Matrix3::from_row_slice(&f_vec);
    // Rank-2 enforcement: zero the smallest singular value.
    let svd = f_norm.svd(true, true);
    let u = svd.u.ok_or(GeometryError::DegenerateSubset("svd failed"))?;
    let v_t = svd
        .v_t
        .ok_or(GeometryError::DegenerateSubset("svd failed"))?;
    let mut s = svd.singular_values;
    s[2] = 0.0;
    let f_rank2 = u * Matrix3::from_diagonal(&s) * v_t;
    let f = t2.transform.transpose() * f_rank2 * t1.transform;
    Ok(frobenius_params(&f))
}

fn frobenius_params(m: &Matrix3<f64>) -> Vec<f64> {
    let norm = m.norm();
    let mut params: Vec<f64> = m.transpose().iter().map(|v| v / norm).collect();
    canonicalize_sign(&mut params);
    params
}
