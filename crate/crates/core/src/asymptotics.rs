//! Layer-ansatz assembly: the solvability multiplier lambda0, the
//! extension coefficient g0 on the tube, the blended approximate field
//! c_A at orders 0/1, and the residual of the conserved Allen-Cahn
//! equation evaluated on the constructed field.

use crate::diffuse::{assemble_layer_field, five_point_laplacian, GridSpec};
use crate::error::{Error, Result};
use crate::fft::{GridTransform, LaplaceSymbol};
use crate::geometry::Curve;
use crate::numerics::pairwise_sum;
use crate::potential::Potential;
use crate::profiles::ProfileTable;
use crate::sharp::VelocityField;
use ndarray::Array2;

/// Assembled approximate field with the data that produced it.
#[derive(Debug, Clone)]
pub struct ApproxSolution {
    pub c_a: Array2<f64>,
    pub grid: GridSpec,
    pub eps: f64,
    pub order: u8,
    pub lambda0: f64,
    /// blending half-width used by the cutoff
    pub delta: f64,
    /// height-function samples on the reference grid (empty = zero)
    pub h_used: Vec<f64>,
}

/// Solvability multiplier lambda0 = (sigma/2) (mean(kappa) - mean(n.v)),
/// with length-weighted means over the curve.
pub fn compute_lambda0(curve: &Curve, v: Option<VelocityField>, sigma: f64) -> Result<f64> {
    let q = curve.quantities()?;
    let n = curve.n() as f64;
    let mean_kappa: f64 = q.kappa.iter().sum::<f64>() / n;
    let mean_nv: f64 = match v {
        Some(f) => {
            let mut acc = 0.0;
            for (i, p) in curve.points.iter().enumerate() {
                let vv = f(*p, 0.0);
                acc += vv[0] * q.normal[i][0] + vv[1] * q.normal[i][1];
            }
            acc / n
        }
        None => 0.0,
    };
    Ok(0.5 * sigma * (mean_kappa - mean_nv))
}

/// Length-weighted mean of n.v over the curve (the convection correction
/// entering lambda0; zero for divergence-free fields).
pub fn mean_normal_velocity(curve: &Curve, v: VelocityField) -> Result<f64> {
    let q = curve.quantities()?;
    let mut acc = 0.0;
    for (i, p) in curve.points.iter().enumerate() {
        let vv = v(*p, 0.0);
        acc += vv[0] * q.normal[i][0] + vv[1] * q.normal[i][1];
    }
    Ok(acc / curve.n() as f64)
}

/// Inputs of the g0 evaluation. The normal interface velocity V(s) must be
/// the one the curve actually moves with; for the volume-preserving law
/// with convection it is n.v + kappa - mean(kappa).
pub struct G0Input<'a> {
    pub curve: &'a Curve,
    pub v: Option<VelocityField<'a>>,
    /// normal velocity at parameter fraction s
    pub velocity_normal: &'a dyn Fn(f64) -> f64,
    pub lambda0: f64,
    pub sigma: f64,
    /// half-width of the near-interface band where the quotient formula
    /// degenerates (typically 10 grid cells)
    pub band: f64,
}

/// The interface-law bracket
/// B = dt d + v.grad d - Lap d - (2/sigma) lambda0
/// at tube coordinates (r, s): dt d = -V(s), v.grad d = v.n(s),
/// Lap d = -kappa/(1 - r kappa).
fn bracket(input: &G0Input, r: f64, s: f64, kappa: f64) -> f64 {
    let vn = input.velocity_normal;
    let conv = match input.v {
        Some(f) => {
            let foot = input.curve.at(s);
            let nv = input.curve.normal_at(s);
            let x = [foot[0] + r * nv[0], foot[1] + r * nv[1]];
            let vv = f(x, 0.0);
            vv[0] * nv[0] + vv[1] * nv[1]
        }
        None => 0.0,
    };
    -vn(s) + conv + kappa / (1.0 - r * kappa) - 2.0 / input.sigma * input.lambda0
}

/// Max |bracket| on the curve itself; must be ~0 for consistent inputs.
pub fn g0_bracket_residual(input: &G0Input) -> Result<f64> {
    let q = input.curve.quantities()?;
    let n = input.curve.n();
    let mut worst = 0.0f64;
    for i in 0..n {
        let s = i as f64 / n as f64;
        worst = worst.max(bracket(input, 0.0, s, q.kappa[i]).abs());
    }
    Ok(worst)
}

/// g0 at tube coordinates (r, s): the quotient -B/r away from the curve,
/// and a Taylor evaluation from normal finite differences of B inside the
/// band |r| < band (the extension-by-derivative rule on the curve itself).
pub fn compute_g0_at(input: &G0Input, r: f64, s: f64) -> Result<f64> {
    let resid = g0_bracket_residual(input)?;
    if resid > 1e-4 {
        return Err(Error::BracketNotVanishing { residual: resid });
    }
    let q = input.curve.quantities()?;
    let n = input.curve.n();
    let i = ((s * n as f64).round() as usize) % n;
    let kappa = q.kappa[i];
    let b = input.band;
    if r.abs() >= b {
        Ok(-bracket(input, r, s, kappa) / r)
    } else {
        // five-point normal derivatives of B at the foot point
        let bm2 = bracket(input, -2.0 * b, s, kappa);
        let bm1 = bracket(input, -b, s, kappa);
        let b0 = bracket(input, 0.0, s, kappa);
        let bp1 = bracket(input, b, s, kappa);
        let bp2 = bracket(input, 2.0 * b, s, kappa);
        let d1 = (-bp2 + 8.0 * bp1 - 8.0 * bm1 + bm2) / (12.0 * b);
        let d2 = (-bp2 + 16.0 * bp1 - 30.0 * b0 + 16.0 * bm1 - bm2) / (12.0 * b * b);
        let d3 = (bp2 - 2.0 * bp1 + 2.0 * bm1 - bm2) / (2.0 * b * b * b);
        Ok(-(d1 + 0.5 * r * d2 + r * r / 6.0 * d3))
    }
}

/// g0 pulled back to the curve samples (the h-equation reaction input).
pub fn g0_on_gamma(input: &G0Input) -> Result<Vec<f64>> {
    let n = input.curve.n();
    (0..n).map(|i| compute_g0_at(input, 0.0, i as f64 / n as f64)).collect()
}

/// Build the blended approximate field on the grid.
///
/// c_A = zeta(d) [theta0(rho) + eps lambda0 theta1(rho)]
///     + (1 - zeta) [sign(d) + eps lambda0 / f''(+-1)]
/// with rho = d/eps - h(s).
#[allow(clippy::too_many_arguments)]
pub fn build_approx_solution(
    grid: GridSpec,
    curves: &[Curve],
    eps: f64,
    table: &ProfileTable,
    order: u8,
    lambda0: f64,
    delta: f64,
    h: Option<&[f64]>,
) -> Result<ApproxSolution> {
    let hx = grid.hx();
    if hx > eps / 2.0 * (1.0 + 1e-9) {
        return Err(Error::ResolutionTooCoarse { hx, limit: eps / 2.0 });
    }
    let h_vec = h.map(|v| v.to_vec()).unwrap_or_default();
    let shift = |_, s: f64| -> f64 {
        if h_vec.is_empty() {
            0.0
        } else {
            // periodic linear interpolation on the reference grid
            let n = h_vec.len();
            let u = s.rem_euclid(1.0) * n as f64;
            let i = (u.floor() as usize) % n;
            let t = u - u.floor();
            h_vec[i] * (1.0 - t) + h_vec[(i + 1) % n] * t
        }
    };
    let c_a = assemble_layer_field(&grid, curves, eps, table, order, lambda0, delta, Some(&shift))?;
    Ok(ApproxSolution { c_a, grid, eps, order, lambda0, delta, h_used: h_vec })
}

/// Residual norms of the conserved Allen-Cahn operator applied to the
/// constructed field.
///
/// The `centered` variants subtract the per-phase far-field constants
/// s_pm = f'(+-1 + eps lambda0/f'')/eps^2 - lambda_A/eps first. Those
/// constants are the bulk residual a first-order construction cannot
/// remove (they belong to the next multiplier and outer corrector), so
/// the centered norms isolate the part of the residual the built orders
/// are responsible for.
#[derive(Debug, Clone, Copy)]
pub struct ResidualNorms {
    /// L2 over the rectangle
    pub l2_omega: f64,
    /// L1 over the tube |d| < 2 delta
    pub l1_tube: f64,
    /// L2 over the complement of the tube
    pub l2_bulk: f64,
    pub l2_omega_centered: f64,
    pub l1_tube_centered: f64,
}

/// Evaluate S = dt c_A + v.grad c_A - Lap c_A + f'(c_A)/eps^2 - lambda_A/eps
/// on the grid (central time difference from the supplied neighbor
/// snapshots) and split its norms by tube membership. `symbol` selects the
/// Laplacian: the spectral one resolves the layer far below the five-point
/// truncation floor.
pub fn residual_norms(
    approx: &ApproxSolution,
    time_neighbors: Option<(&Array2<f64>, &Array2<f64>, f64)>,
    v_a: Option<VelocityField>,
    lambda_a: f64,
    pot: &Potential,
    curves: &[Curve],
    symbol: LaplaceSymbol,
) -> Result<ResidualNorms> {
    let grid = approx.grid;
    let (nx, ny) = (grid.nx, grid.ny);
    let eps = approx.eps;
    let lap = match symbol {
        LaplaceSymbol::Discrete => five_point_laplacian(&approx.c_a, grid),
        LaplaceSymbol::Spectral => {
            let mut tr = GridTransform::new(
                grid.nx,
                grid.ny,
                grid.lx,
                grid.ly,
                matches!(grid.bc, crate::diffuse::Bc::Periodic),
            );
            tr.laplacian(&approx.c_a, LaplaceSymbol::Spectral)
        }
    };
    let (hx, hy) = (grid.hx(), grid.hy());
    // removable far-field constants of the construction
    let off_plus = if approx.order >= 1 {
        eps * approx.lambda0 / pot.eval(1.0).d2f
    } else {
        0.0
    };
    let off_minus = if approx.order >= 1 {
        eps * approx.lambda0 / pot.eval(-1.0).d2f
    } else {
        0.0
    };
    let s_plus = pot.eval(1.0 + off_plus).df / (eps * eps) - lambda_a / eps;
    let s_minus = pot.eval(-1.0 + off_minus).df / (eps * eps) - lambda_a / eps;

    let dt_field: Option<Array2<f64>> = match time_neighbors {
        Some((cm, cp, dt_fd)) => {
            if cm.dim() != (ny, nx) || cp.dim() != (ny, nx) {
                return Err(Error::GridMismatch {
                    anx: nx,
                    any: ny,
                    bnx: cp.dim().1,
                    bny: cp.dim().0,
                });
            }
            Some(Array2::from_shape_fn((ny, nx), |(j, i)| {
                (cp[(j, i)] - cm[(j, i)]) / (2.0 * dt_fd)
            }))
        }
        None => None,
    };

    let mut sq_omega = Vec::with_capacity(nx * ny);
    let mut sq_omega_c = Vec::with_capacity(nx * ny);
    let mut abs_tube = Vec::new();
    let mut abs_tube_c = Vec::new();
    let mut sq_bulk = Vec::new();
    let inv_e2 = 1.0 / (eps * eps);
    let two_delta = 2.0 * approx.delta;
    for j in 0..ny {
        for i in 0..nx {
            let x = grid.center(i, j);
            let mut s_val =
                -lap[(j, i)] + pot.eval(approx.c_a[(j, i)]).df * inv_e2 - lambda_a / eps;
            if let Some(dtf) = &dt_field {
                s_val += dtf[(j, i)];
            }
            if let Some(vf) = v_a {
                let vv = vf(x, 0.0);
                let ip = (i + 1) % nx;
                let im = (i + nx - 1) % nx;
                let jp = (j + 1) % ny;
                let jm = (j + ny - 1) % ny;
                let dcdx = (approx.c_a[(j, ip)] - approx.c_a[(j, im)]) / (2.0 * hx);
                let dcdy = (approx.c_a[(jp, i)] - approx.c_a[(jm, i)]) / (2.0 * hy);
                s_val += vv[0] * dcdx + vv[1] * dcdy;
            }
            // nearest sample distance: tube membership and phase sign
            let mut d2min = f64::INFINITY;
            let mut sign = 1.0;
            for c in curves {
                for (pi, p) in c.points.iter().enumerate() {
                    let dx = x[0] - p[0];
                    let dy = x[1] - p[1];
                    let d2 = dx * dx + dy * dy;
                    if d2 < d2min {
                        d2min = d2;
                        let nv = c.normal_at(pi as f64 / c.n() as f64);
                        sign = (dx * nv[0] + dy * nv[1]).signum();
                    }
                }
            }
            let centered = s_val - if sign >= 0.0 { s_plus } else { s_minus };
            sq_omega.push(s_val * s_val);
            sq_omega_c.push(centered * centered);
            if d2min.sqrt() < two_delta {
                abs_tube.push(s_val.abs());
                abs_tube_c.push(centered.abs());
            } else {
                sq_bulk.push(s_val * s_val);
            }
        }
    }
    let cell = grid.cell_area();
    Ok(ResidualNorms {
        l2_omega: (pairwise_sum(&sq_omega) * cell).sqrt(),
        l1_tube: pairwise_sum(&abs_tube) * cell,
        l2_bulk: (pairwise_sum(&sq_bulk) * cell).sqrt(),
        l2_omega_centered: (pairwise_sum(&sq_omega_c) * cell).sqrt(),
        l1_tube_centered: pairwise_sum(&abs_tube_c) * cell,
    })
}
