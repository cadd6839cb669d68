//! Saliency-aware horizontal image retargeting as linearly constrained
//! subspace stress minimization.
//!
//! A lattice over the source image is rescaled horizontally to the target
//! width. Its horizontal coordinates are then displaced by `Φα` for a
//! closed-form Fourier basis that vanishes on the left and right edges, so
//! the output width is exact. The stress pulls every lattice edge towards
//! its original length with a weight given by the saliency of its
//! endpoints, which moves the compression into non-salient regions.
//! Each outer iteration minimizes the quadratic majorizer of the lattice
//! stress plus a Dirichlet penalty `μ αᵀΛα` subject to a minimum horizontal
//! spacing `ε` at the sampled vertices.

mod qp;
mod warp;

pub use qp::{qp_solve, QpOptions, QpSolution, QpWarmStart, QuadraticProgram};
pub use warp::{warp_image, HorizontalWarp};

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::laplace::FourierGridBasis;
use crate::mesh_io::{generate_grid_mesh, RasterImage, TriangleMesh};
use crate::metric::{farthest_point_indices, WeightedGraph};
use crate::smacof::ConvergenceLog;
use crate::stress::EdgeStress;

/// Floor of the saliency-derived edge weights.
pub const MIN_EDGE_WEIGHT: f64 = 0.01;

/// Default Dirichlet weight.
pub const DEFAULT_MU: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct RetargetConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Output width over source width, in `(0, 1]`.
    pub target_width_ratio: f64,
    pub mu: f64,
    /// Minimum horizontal spacing; `None` means half the rescaled spacing.
    pub epsilon: Option<f64>,
    pub p: usize,
    pub q: usize,
    pub seed: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub stress_pairs: StressPairs,
    pub qp: QpOptions,
}

/// Which lattice edges enter the minimized stress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StressPairs {
    /// Every lattice edge. The majorizer Hessian is built once, so the
    /// per-iteration cost stays linear in the vertex count.
    #[default]
    AllEdges,
    /// Only edges with a sampled endpoint.
    SampleStar,
}

impl RetargetConfig {
    /// Defaults for a `width x height` source: a lattice with one vertex
    /// per 4 pixels in each direction, half width, `p = 300`, `q = 4p`.
    pub fn for_image(width: usize, height: usize) -> Self {
        Self {
            grid_rows: (height / 4).max(2),
            grid_cols: (width / 4).max(3),
            target_width_ratio: 0.5,
            mu: DEFAULT_MU,
            epsilon: None,
            p: 300,
            q: 1200,
            seed: 0,
            max_iter: 100,
            rel_tol: 1e-5,
            stress_pairs: StressPairs::AllEdges,
            qp: QpOptions::default(),
        }
    }

    /// Output width in pixels.
    pub fn target_width(&self, width: usize) -> usize {
        (self.target_width_ratio * width as f64).round() as usize
    }

    /// Checks the configuration against a `width x height` source.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if width < 2 || height < 2 {
            return bad(format!("source image {width}x{height} is too small"));
        }
        if self.grid_rows < 2 || self.grid_cols < 3 {
            return bad(format!("grid {}x{} is too small", self.grid_rows, self.grid_cols));
        }
        if !(self.target_width_ratio > 0.0 && self.target_width_ratio <= 1.0) {
            return bad(format!("target width ratio {} is outside (0, 1]", self.target_width_ratio));
        }
        if self.target_width(width) == 0 {
            return bad("target width rounds to zero pixels".into());
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu = {} must be finite and nonnegative", self.mu));
        }
        let modes = (self.grid_cols - 2) * self.grid_rows;
        if self.p == 0 || self.p > modes {
            return bad(format!("p = {} is outside 1..={modes} for this grid", self.p));
        }
        let n = self.grid_rows * self.grid_cols;
        if self.q == 0 || self.q > n {
            return bad(format!("q = {} is outside 1..={n}", self.q));
        }
        if self.q < self.p {
            log::warn!("q = {} samples is fewer than p = {} basis functions", self.q, self.p);
        }
        if self.seed >= n {
            return bad(format!("seed vertex {} is outside the grid", self.seed));
        }
        if self.max_iter == 0 || !(self.rel_tol >= 0.0) {
            return bad("max_iter must be positive and rel_tol nonnegative".into());
        }
        let spacing = self.rescaled_spacing(width);
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps < spacing) {
                return bad(format!("epsilon = {eps} must lie in (0, {spacing}), the rescaled grid spacing"));
            }
        }
        Ok(())
    }

    fn rescaled_spacing(&self, width: usize) -> f64 {
        self.target_width(width) as f64 / (self.grid_cols - 1) as f64
    }
}

/// Everything the constrained solver needs.
#[derive(Debug, Clone)]
pub struct RetargetProblem {
    pub rows: usize,
    pub cols: usize,
    pub source_width: usize,
    pub source_height: usize,
    pub target_width: usize,
    /// Rescaled lattice, `N x 2`.
    pub x0: DMatrix<f64>,
    /// Stress on all 4-neighbor lattice edges.
    pub stress: EdgeStress,
    pub basis: FourierGridBasis,
    /// Farthest point samples on the lattice graph.
    pub samples: Vec<usize>,
    /// Indices of the stress pairs the solver minimizes over.
    pub solver_pairs: Vec<usize>,
    /// Box-averaged saliency at every vertex.
    pub vertex_saliency: Vec<f64>,
    pub epsilon: f64,
}

impl RetargetProblem {
    pub fn num_vertices(&self) -> usize {
        self.rows * self.cols
    }

    /// Horizontal spacing of the original lattice.
    pub fn source_spacing(&self) -> f64 {
        self.source_width as f64 / (self.cols - 1) as f64
    }

    /// Horizontal spacing of the rescaled lattice.
    pub fn rescaled_spacing(&self) -> f64 {
        self.target_width as f64 / (self.cols - 1) as f64
    }

    /// Triangulated lattice at the given positions (`N x 2`).
    pub fn grid_mesh(&self, positions: &DMatrix<f64>) -> Result<TriangleMesh> {
        let base = generate_grid_mesh(
            self.rows,
            self.cols,
            self.source_spacing(),
            self.source_height as f64 / (self.rows - 1) as f64,
        )?;
        let coords = DMatrix::from_fn(self.num_vertices(), 3, |v, k| if k < 2 { positions[(v, k)] } else { 0.0 });
        base.with_coordinates(&coords)
    }
}

/// Saliency averaged over each vertex's dual cell, via a summed-area table.
fn vertex_saliency(saliency: &RasterImage, rows: usize, cols: usize, width: usize, height: usize) -> Vec<f64> {
    let (sw, sh) = (saliency.width(), saliency.height());
    let mut integral = vec![0.0; (sw + 1) * (sh + 1)];
    for y in 0..sh {
        let mut run = 0.0;
        for x in 0..sw {
            run += saliency.get(x, y, 0);
            integral[(y + 1) * (sw + 1) + x + 1] = integral[y * (sw + 1) + x + 1] + run;
        }
    }
    let box_sum = |x0: usize, x1: usize, y0: usize, y1: usize| {
        let at = |x: usize, y: usize| integral[y * (sw + 1) + x];
        at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0)
    };
    // vertex positions in saliency pixel units
    let hx = sw as f64 / width as f64 * width as f64 / (cols - 1) as f64;
    let hy = sh as f64 / height as f64 * height as f64 / (rows - 1) as f64;
    // pixel k is covered when its center k + 0.5 lies in [a, b]
    let range = |a: f64, b: f64, n: usize| {
        let lo = ((a - 0.5).ceil().max(0.0) as usize).min(n);
        let hi = (((b - 0.5).floor() + 1.0).max(0.0) as usize).min(n);
        (lo, hi)
    };
    (0..rows * cols)
        .map(|v| {
            let (i, j) = (v / cols, v % cols);
            let (cx, cy) = (j as f64 * hx, i as f64 * hy);
            let (x0, x1) = range(cx - 0.5 * hx, cx + 0.5 * hx, sw);
            let (y0, y1) = range(cy - 0.5 * hy, cy + 0.5 * hy, sh);
            if x1 > x0 && y1 > y0 {
                box_sum(x0, x1, y0, y1) / ((x1 - x0) * (y1 - y0)) as f64
            } else {
                saliency.sample_bilinear(cx, cy, 0)
            }
        })
        .collect()
}

/// Builds the lattice, targets, weights, basis and samples.
pub fn build_retarget_problem(
    source: &RasterImage,
    saliency: &RasterImage,
    config: &RetargetConfig,
) -> Result<RetargetProblem> {
    let (width, height) = (source.width(), source.height());
    config.validate(width, height)?;
    if saliency.channels() != 1 {
        return Err(Error::InvalidImage(format!(
            "saliency must have 1 channel, got {}",
            saliency.channels()
        )));
    }
    if saliency.width() * height != saliency.height() * width {
        return Err(Error::InvalidImage(format!(
            "saliency {}x{} does not match the aspect of the source {width}x{height}",
            saliency.width(),
            saliency.height()
        )));
    }
    if let Some(v) = saliency.samples().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidImage(format!("saliency value {v} is outside [0, 1]")));
    }
    let (rows, cols) = (config.grid_rows, config.grid_cols);
    let n = rows * cols;
    let target_width = config.target_width(width);
    let hx = width as f64 / (cols - 1) as f64;
    let hy = height as f64 / (rows - 1) as f64;
    let hx_rescaled = target_width as f64 / (cols - 1) as f64;
    let x0 = DMatrix::from_fn(n, 2, |v, k| if k == 0 { (v % cols) as f64 * hx_rescaled } else { (v / cols) as f64 * hy });

    let vertex_saliency = vertex_saliency(saliency, rows, cols, width, height);
    let mut pairs = Vec::with_capacity(2 * n);
    let mut targets = Vec::with_capacity(2 * n);
    let mut weights = Vec::with_capacity(2 * n);
    let mut push = |a: usize, b: usize, d: f64| {
        pairs.push([a, b]);
        targets.push(d);
        weights.push((0.5 * (vertex_saliency[a] + vertex_saliency[b])).max(MIN_EDGE_WEIGHT));
    };
    for i in 0..rows {
        for j in 0..cols {
            let v = i * cols + j;
            if j + 1 < cols {
                push(v, v + 1, hx);
            }
            if i + 1 < rows {
                push(v, v + cols, hy);
            }
        }
    }
    let stress = EdgeStress::new(n, pairs, targets, weights)?;
    let basis = FourierGridBasis::new(rows, cols, target_width as f64, height as f64, config.p)?;
    let graph = WeightedGraph::lattice(rows, cols, hx, hy)?;
    let samples = farthest_point_indices(&graph, config.q, config.seed)?;
    let mut is_sample = vec![false; n];
    for &s in &samples {
        is_sample[s] = true;
    }
    let solver_pairs = match config.stress_pairs {
        StressPairs::AllEdges => (0..stress.pairs().len()).collect(),
        StressPairs::SampleStar => stress.select(|a, b| is_sample[a] || is_sample[b]),
    };
    Ok(RetargetProblem {
        rows,
        cols,
        source_width: width,
        source_height: height,
        target_width,
        x0,
        stress,
        basis,
        samples,
        solver_pairs,
        vertex_saliency,
        epsilon: config.epsilon.unwrap_or(0.5 * hx_rescaled),
    })
}

#[derive(Debug, Clone)]
pub struct RetargetSolution {
    /// Horizontal basis coefficients.
    pub alpha: DVector<f64>,
    /// Final lattice positions, `N x 2`.
    pub positions: DMatrix<f64>,
    /// Stress plus Dirichlet term per outer iteration.
    pub log: ConvergenceLog,
    /// Smallest constrained horizontal spacing minus `ε` at the samples.
    pub min_sampled_slack: f64,
    /// Horizontal lattice edges anywhere with spacing below `ε − 1e-9`.
    pub full_grid_violations: usize,
    pub qp_not_converged: usize,
}

impl RetargetSolution {
    pub fn warp(&self, problem: &RetargetProblem) -> HorizontalWarp {
        HorizontalWarp {
            rows: problem.rows,
            cols: problem.cols,
            x: self.positions.column(0).iter().copied().collect(),
        }
    }
}

/// Majorization-minimization over `α`, one QP per outer iteration.
pub fn solve_constrained(problem: &RetargetProblem, config: &RetargetConfig) -> Result<RetargetSolution> {
    let clock = Instant::now();
    let (rows, cols) = (problem.rows, problem.cols);
    let n = rows * cols;
    let basis = &problem.basis;
    let p = basis.len();
    let mu = config.mu;
    let eps = problem.epsilon;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {eps} must be positive")));
    }
    let x0 = &problem.x0;
    let pairs = problem.stress.pairs();
    let targets = problem.stress.targets();
    let weights = problem.stress.weights();
    let edges = &problem.solver_pairs;

    // the Hessian of the majorizer does not depend on the iterate:
    // 2 Σ w g gᵀ with g = Φ_a − Φ_b, accumulated over edge chunks
    let mut hessian = DMatrix::zeros(p, p);
    let chunk = (1 << 20) / p.max(1) + 1;
    for block in edges.chunks(chunk) {
        let ends: Vec<usize> = block.iter().flat_map(|&e| pairs[e]).collect();
        let phi = basis.rows_at(&ends);
        let mut gt = DMatrix::zeros(p, block.len());
        let mut wg = DMatrix::zeros(block.len(), p);
        for (r, &e) in block.iter().enumerate() {
            let diff = phi.row(2 * r) - phi.row(2 * r + 1);
            wg.row_mut(r).copy_from(&(&diff * weights[e]));
            gt.column_mut(r).tr_copy_from(&diff);
        }
        hessian.gemm(2.0, &gt, &wg, 1.0);
    }
    let lambda = basis.eigenvalues();
    for k in 0..p {
        hessian[(k, k)] += 2.0 * mu * lambda[k];
    }
    hessian = (&hessian + hessian.transpose()) * 0.5;

    // x_{v+1} − x_v ≥ ε at every sample with a right neighbor
    let constrained: Vec<usize> = problem.samples.iter().copied().filter(|&v| v % cols + 1 < cols).collect();
    let ends: Vec<usize> = constrained.iter().flat_map(|&v| [v + 1, v]).collect();
    let phi = basis.rows_at(&ends);
    let mut a = DMatrix::zeros(constrained.len(), p);
    let mut base_gap = DVector::zeros(constrained.len());
    for (r, &v) in constrained.iter().enumerate() {
        a.row_mut(r).copy_from(&(phi.row(2 * r) - phi.row(2 * r + 1)));
        base_gap[r] = x0[(v + 1, 0)] - x0[(v, 0)];
    }
    if let Some(r) = (0..constrained.len()).find(|&r| base_gap[r] < eps) {
        return Err(Error::Infeasible(format!(
            "epsilon = {eps} exceeds the rescaled spacing {} at vertex {}",
            base_gap[r], constrained[r]
        )));
    }
    // a small margin keeps QP round-off on the feasible side of ε
    let margin = 1e-6 * (problem.rescaled_spacing() - eps);
    let lower = base_gap.map(|gap| eps + margin - gap);
    let slack = |alpha: &DVector<f64>| -> DVector<f64> { (&a * alpha + &base_gap).add_scalar(-eps) };

    // objective value and the linear term of the majorizer at `alpha`
    let evaluate = |alpha: &DVector<f64>| -> (f64, DVector<f64>) {
        let delta = basis.synthesize(alpha.as_slice());
        let mut value = 0.0;
        let mut divergence = vec![0.0; n];
        for &e in edges {
            let [u, v] = pairs[e];
            let dx0 = x0[(u, 0)] - x0[(v, 0)];
            let dx = dx0 + delta[u] - delta[v];
            let dy = x0[(u, 1)] - x0[(v, 1)];
            let len = (dx * dx + dy * dy).sqrt();
            let res = len - targets[e];
            value += weights[e] * res * res;
            let pull = if len > 0.0 { targets[e] * dx / len } else { 0.0 };
            let c = 2.0 * weights[e] * (dx0 - pull);
            divergence[u] += c;
            divergence[v] -= c;
        }
        let dirichlet: f64 = (0..p).map(|k| lambda[k] * alpha[k] * alpha[k]).sum();
        (value + mu * dirichlet, DVector::from_vec(basis.project(&divergence)))
    };

    let mut alpha = DVector::zeros(p);
    let (mut value, mut linear) = evaluate(&alpha);
    let mut log = ConvergenceLog::default();
    log.push(0, value, clock.elapsed().as_secs_f64(), 0);
    let mut previous = f64::INFINITY;
    let mut warm: Option<QpWarmStart> = None;
    let mut qp_not_converged = 0;
    let mut k = 0;
    while k < config.max_iter && value > 0.0 && (1.0 - value / previous) > config.rel_tol {
        let qp = QuadraticProgram::with_lower_bounds(hessian.clone(), linear.clone(), a.clone(), lower.clone())?;
        let sol = qp_solve(&qp, &config.qp, warm.as_ref())?;
        if !sol.converged {
            qp_not_converged += 1;
        }
        // step back towards the current feasible iterate if round-off left
        // the proposal below ε anywhere
        let step = &sol.x - &alpha;
        let current = slack(&alpha);
        let change = &a * &step;
        let mut t: f64 = 1.0;
        for r in 0..change.len() {
            if current[r] + change[r] < 0.0 {
                t = t.min(current[r] / -change[r]);
            }
        }
        let candidate = &alpha + step * t;
        let (cand_value, cand_linear) = evaluate(&candidate);
        k += 1;
        previous = value;
        if cand_value <= value {
            alpha = candidate;
            value = cand_value;
            linear = cand_linear;
        }
        warm = Some(QpWarmStart { x: sol.x, y: sol.y });
        log.push(k, value, clock.elapsed().as_secs_f64(), 0);
    }

    let delta = basis.synthesize(alpha.as_slice());
    let mut positions = x0.clone();
    for v in 0..n {
        positions[(v, 0)] += delta[v];
    }
    let min_sampled_slack = slack(&alpha).iter().copied().fold(f64::INFINITY, f64::min);
    let mut full_grid_violations = 0;
    for i in 0..rows {
        for j in 0..cols - 1 {
            let v = i * cols + j;
            if positions[(v + 1, 0)] - positions[(v, 0)] < eps - 1e-9 {
                full_grid_violations += 1;
            }
        }
    }
    Ok(RetargetSolution {
        alpha,
        positions,
        log,
        min_sampled_slack,
        full_grid_violations,
        qp_not_converged,
    })
}

/// `|len − d| / d` on every horizontal lattice edge, row-major.
pub fn horizontal_distortion(problem: &RetargetProblem, positions: &DMatrix<f64>) -> Vec<f64> {
    let (rows, cols) = (problem.rows, problem.cols);
    let d = problem.source_spacing();
    let mut out = Vec::with_capacity(rows * (cols - 1));
    for i in 0..rows {
        for j in 0..cols - 1 {
            let v = i * cols + j;
            let len = (positions.row(v + 1) - positions.row(v)).norm();
            out.push((len - d).abs() / d);
        }
    }
    out
}

/// Largest horizontal distortion among edges whose endpoints are both
/// salient (vertex saliency ≥ `threshold`) and among edges whose endpoints
/// are both non-salient.
pub fn distortion_by_region(problem: &RetargetProblem, positions: &DMatrix<f64>, threshold: f64) -> (f64, f64) {
    let cols = problem.cols;
    let dist = horizontal_distortion(problem, positions);
    let (mut salient, mut other) = (0.0f64, 0.0f64);
    for (e, &value) in dist.iter().enumerate() {
        let (i, j) = (e / (cols - 1), e % (cols - 1));
        let v = i * cols + j;
        let (a, b) = (problem.vertex_saliency[v], problem.vertex_saliency[v + 1]);
        if a >= threshold && b >= threshold {
            salient = salient.max(value);
        } else if a < threshold && b < threshold {
            other = other.max(value);
        }
    }
    (salient, other)
}
