//! Experiment orchestration: anisotropic error norms, rate fitting,
//! configuration, snapshot/CSV I/O, and the end-to-end convergence runs.

pub mod config;
pub mod experiment;
pub mod io;

use crate::diffuse::{five_point_laplacian, Bc, GridSpec};
use crate::error::{Error, Result};
use crate::geometry::{Curve, Point};
use crate::numerics::{linear_fit, pairwise_sum};
use ndarray::Array2;

/// Anisotropic error norms of u = c_eps - c_A.
#[derive(Debug, Clone, Copy, Default)]
pub struct ErrorNorms {
    /// L2 over the rectangle
    pub l2: f64,
    /// L2 over the complement of the delta-tube
    pub l2_outside: f64,
    /// L2 of the tangential gradient part inside the 2delta-tube
    pub grad_tangential: f64,
    /// L2 of the normal gradient part inside the 2delta-tube
    pub grad_normal: f64,
    /// eps times the normal part (the theorem's weighting)
    pub grad_normal_eps: f64,
    /// L2 of the full gradient over the rectangle
    pub h1: f64,
    /// L2 of the 5-point Laplacian (H2 proxy)
    pub h2_proxy: f64,
}

/// Distance-to-interface and unit normal at a query point, as used by the
/// tangential/normal gradient split.
#[derive(Debug, Clone, Copy)]
pub struct TubeInfo {
    pub dist: f64,
    pub normal: Point,
}

/// Curve-based error norms: the tube classification uses the nearest
/// curve sample and the spline normal there.
pub fn compute_error_norms(
    c_eps: &Array2<f64>,
    c_a: &Array2<f64>,
    grid: &GridSpec,
    curve: &Curve,
    delta: f64,
    eps: f64,
) -> Result<ErrorNorms> {
    let classify = |x: Point| -> TubeInfo {
        let mut d2min = f64::INFINITY;
        let mut best = 0usize;
        for (pi, p) in curve.points.iter().enumerate() {
            let dx = x[0] - p[0];
            let dy = x[1] - p[1];
            let d2 = dx * dx + dy * dy;
            if d2 < d2min {
                d2min = d2;
                best = pi;
            }
        }
        TubeInfo {
            dist: d2min.sqrt(),
            normal: curve.normal_at(best as f64 / curve.n() as f64),
        }
    };
    error_norms_with_classifier(c_eps, c_a, grid, &classify, delta, eps)
}

/// Error norms with an arbitrary tube classifier (exact normals for
/// analytic interfaces).
pub fn error_norms_with_classifier(
    c_eps: &Array2<f64>,
    c_a: &Array2<f64>,
    grid: &GridSpec,
    classify: &dyn Fn(Point) -> TubeInfo,
    delta: f64,
    eps: f64,
) -> Result<ErrorNorms> {
    if c_eps.dim() != c_a.dim() {
        return Err(Error::GridMismatch {
            anx: c_eps.dim().1,
            any: c_eps.dim().0,
            bnx: c_a.dim().1,
            bny: c_a.dim().0,
        });
    }
    let (ny, nx) = c_eps.dim();
    if (nx, ny) != (grid.nx, grid.ny) {
        return Err(Error::GridMismatch { anx: nx, any: ny, bnx: grid.nx, bny: grid.ny });
    }
    let u = c_eps - c_a;
    let (hx, hy) = (grid.hx(), grid.hy());
    let cell = grid.cell_area();

    let grad_at = |j: usize, i: usize| -> [f64; 2] {
        match grid.bc {
            Bc::Periodic => {
                let ip = (i + 1) % nx;
                let im = (i + nx - 1) % nx;
                let jp = (j + 1) % ny;
                let jm = (j + ny - 1) % ny;
                [(u[(j, ip)] - u[(j, im)]) / (2.0 * hx), (u[(jp, i)] - u[(jm, i)]) / (2.0 * hy)]
            }
            Bc::WallNeumannNoSlip => {
                let gx = if i == 0 {
                    (u[(j, 1)] - u[(j, 0)]) / hx
                } else if i == nx - 1 {
                    (u[(j, nx - 1)] - u[(j, nx - 2)]) / hx
                } else {
                    (u[(j, i + 1)] - u[(j, i - 1)]) / (2.0 * hx)
                };
                let gy = if j == 0 {
                    (u[(1, i)] - u[(0, i)]) / hy
                } else if j == ny - 1 {
                    (u[(ny - 1, i)] - u[(ny - 2, i)]) / hy
                } else {
                    (u[(j + 1, i)] - u[(j - 1, i)]) / (2.0 * hy)
                };
                [gx, gy]
            }
        }
    };

    let mut sq_l2 = Vec::with_capacity(nx * ny);
    let mut sq_out = Vec::new();
    let mut sq_tan = Vec::new();
    let mut sq_nor = Vec::new();
    let mut sq_h1 = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = grid.center(i, j);
            let val = u[(j, i)];
            sq_l2.push(val * val);
            let g = grad_at(j, i);
            sq_h1.push(g[0] * g[0] + g[1] * g[1]);
            let info = classify(x);
            if info.dist >= delta {
                sq_out.push(val * val);
            }
            if info.dist < 2.0 * delta {
                let nvec = info.normal;
                let gn = g[0] * nvec[0] + g[1] * nvec[1];
                let gt = [g[0] - gn * nvec[0], g[1] - gn * nvec[1]];
                sq_nor.push(gn * gn);
                sq_tan.push(gt[0] * gt[0] + gt[1] * gt[1]);
            }
        }
    }
    let lap = five_point_laplacian(&u, *grid);
    let sq_h2: Vec<f64> = lap.iter().map(|&v| v * v).collect();
    let grad_normal = (pairwise_sum(&sq_nor) * cell).sqrt();
    Ok(ErrorNorms {
        l2: (pairwise_sum(&sq_l2) * cell).sqrt(),
        l2_outside: (pairwise_sum(&sq_out) * cell).sqrt(),
        grad_tangential: (pairwise_sum(&sq_tan) * cell).sqrt(),
        grad_normal,
        grad_normal_eps: eps * grad_normal,
        h1: (pairwise_sum(&sq_h1) * cell).sqrt(),
        h2_proxy: (pairwise_sum(&sq_h2) * cell).sqrt(),
    })
}

/// Least-squares fit of log(error) against log(eps).
/// Returns (rate, intercept, r^2); rejects non-positive errors.
pub fn fit_rate(eps: &[f64], errors: &[f64]) -> Result<(f64, f64, f64)> {
    assert!(eps.len() == errors.len() && eps.len() >= 3, "need at least 3 pairs");
    for &e in errors {
        if !(e > 0.0) {
            return Err(Error::NonPositiveError { value: e });
        }
    }
    let xs: Vec<f64> = eps.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&xs, &ys))
}

/// Symmetric Hausdorff distance between two point sets (polyline samples).
pub fn hausdorff_distance(a: &[Point], b: &[Point]) -> f64 {
    let one_sided = |p: &[Point], q: &[Point]| -> f64 {
        let mut worst = 0.0f64;
        for x in p {
            let mut best = f64::INFINITY;
            for y in q {
                let d = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
                if d < best {
                    best = d;
                }
            }
            worst = worst.max(best.sqrt());
        }
        worst
    };
    one_sided(a, b).max(one_sided(b, a))
}
