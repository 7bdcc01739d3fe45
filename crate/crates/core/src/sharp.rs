//! Sharp-interface dynamics: volume-preserving mean-curvature flow with an
//! optional convection term (front tracking over one or more closed curves
//! sharing a single mean curvature), the exact multi-circle ODE reduction,
//! and the height-function equation on the reference circle with its
//! nonlocal mass multiplier.

use crate::error::{Error, Result};
use crate::fft::{fft_forward, fft_inverse, Plans};
use crate::geometry::{Curve, Point};
use rustfft::num_complex::Complex64;

/// Interface law selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontLaw {
    /// V = n.v + kappa - mean(kappa): conserves total enclosed area.
    VolumePreserving,
    /// V = kappa: plain mean-curvature flow (validates the plumbing).
    PlainMcf,
}

/// Front-tracking state: one or more disjoint closed curves evolving under
/// a shared mean curvature.
#[derive(Clone)]
pub struct SharpState {
    pub curves: Vec<Curve>,
    pub t: f64,
    /// total enclosed area at construction (conservation reference)
    pub initial_area: f64,
}

pub type VelocityField<'a> = &'a dyn Fn(Point, f64) -> Point;

impl SharpState {
    pub fn new(curves: Vec<Curve>) -> Self {
        let initial_area: f64 = curves.iter().map(|c| c.polygon_area()).sum();
        SharpState { curves, t: 0.0, initial_area }
    }

    pub fn total_area(&self) -> f64 {
        self.curves.iter().map(|c| c.polygon_area()).sum()
    }

    pub fn total_length(&self) -> f64 {
        self.curves.iter().map(|c| c.length).sum()
    }
}

/// Sample velocities for all curves: V_j = n.v + kappa_j - mean curvature
/// (law-dependent).
///
/// The mean is taken with the exact shoelace area-gradient weights
/// w_j = (dA/dX_j).n_j, so the semi-discrete flow conserves the polygon
/// area identically when the convection term vanishes.
fn front_velocities(
    curves: &[Vec<Point>],
    t: f64,
    law: FrontLaw,
    vel: Option<VelocityField>,
) -> Result<Vec<Vec<[f64; 2]>>> {
    struct PerCurve {
        normal: Vec<Point>,
        kappa: Vec<f64>,
        conv: Vec<f64>,
    }
    let mut data = Vec::with_capacity(curves.len());
    let mut wsum = 0.0;
    let mut kwsum = 0.0;
    for pts in curves {
        let c = Curve::from_points_raw(pts.clone())?;
        let q = c.quantities()?;
        let n = pts.len();
        let mut conv = Vec::with_capacity(n);
        for j in 0..n {
            let prev = pts[(j + n - 1) % n];
            let next = pts[(j + 1) % n];
            // dA/dX_j = 0.5 (y_{j+1}-y_{j-1}, x_{j-1}-x_{j+1})
            let grad = [0.5 * (next[1] - prev[1]), 0.5 * (prev[0] - next[0])];
            let w = grad[0] * q.normal[j][0] + grad[1] * q.normal[j][1];
            conv.push(match vel {
                Some(f) => {
                    let v = f(pts[j], t);
                    v[0] * q.normal[j][0] + v[1] * q.normal[j][1]
                }
                None => 0.0,
            });
            wsum += w;
            kwsum += q.kappa[j] * w;
        }
        data.push(PerCurve { normal: q.normal, kappa: q.kappa, conv });
    }
    let mean_curv = match law {
        FrontLaw::VolumePreserving => kwsum / wsum,
        FrontLaw::PlainMcf => 0.0,
    };
    let mut out = Vec::with_capacity(curves.len());
    for pc in &data {
        let n = pc.normal.len();
        let mut vels = Vec::with_capacity(n);
        for j in 0..n {
            let vn = pc.conv[j] + pc.kappa[j] - mean_curv;
            vels.push([vn * pc.normal[j][0], vn * pc.normal[j][1]]);
        }
        out.push(vels);
    }
    Ok(out)
}

/// One RK4 step of the front-tracking law, followed by tangential
/// redistribution (equal-arclength resampling) of every curve.
pub fn vpmcf_step(
    state: &SharpState,
    dt: f64,
    law: FrontLaw,
    vel: Option<VelocityField>,
) -> Result<SharpState> {
    // explicit curvature-flow stability bound dt <= 0.4 ds^2
    let ds_min = state
        .curves
        .iter()
        .map(|c| c.length / c.n() as f64)
        .fold(f64::INFINITY, f64::min);
    let limit = 0.4 * ds_min * ds_min;
    if dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }

    let x0: Vec<Vec<Point>> = state.curves.iter().map(|c| c.points.clone()).collect();
    let shift = |base: &[Vec<Point>], k: &[Vec<[f64; 2]>], a: f64| -> Vec<Vec<Point>> {
        base.iter()
            .zip(k)
            .map(|(pts, kv)| {
                pts.iter()
                    .zip(kv)
                    .map(|(p, v)| [p[0] + a * v[0], p[1] + a * v[1]])
                    .collect()
            })
            .collect()
    };
    let t = state.t;
    let k1 = front_velocities(&x0, t, law, vel)?;
    let k2 = front_velocities(&shift(&x0, &k1, 0.5 * dt), t + 0.5 * dt, law, vel)?;
    let k3 = front_velocities(&shift(&x0, &k2, 0.5 * dt), t + 0.5 * dt, law, vel)?;
    let k4 = front_velocities(&shift(&x0, &k3, dt), t + dt, law, vel)?;

    let mut new_curves = Vec::with_capacity(state.curves.len());
    for (ci, pts) in x0.iter().enumerate() {
        let moved: Vec<Point> = (0..pts.len())
            .map(|j| {
                [
                    pts[j][0]
                        + dt / 6.0
                            * (k1[ci][j][0]
                                + 2.0 * k2[ci][j][0]
                                + 2.0 * k3[ci][j][0]
                                + k4[ci][j][0]),
                    pts[j][1]
                        + dt / 6.0
                            * (k1[ci][j][1]
                                + 2.0 * k2[ci][j][1]
                                + 2.0 * k3[ci][j][1]
                                + k4[ci][j][1]),
                ]
            })
            .collect();
        let n = moved.len();
        let curve = Curve::from_points_raw(moved)
            .and_then(|c| c.resample(n))
            .map_err(|e| match e {
                Error::DegenerateCurve { reason } if reason.contains("intersect") => {
                    Error::StepTooLarge
                }
                other => other,
            })?;
        new_curves.push(curve);
    }
    Ok(SharpState { curves: new_curves, t: state.t + dt, initial_area: state.initial_area })
}

/// Evolve to t_end with fixed dt (last step shortened).
pub fn vpmcf_evolve(
    state: &SharpState,
    t_end: f64,
    dt: f64,
    law: FrontLaw,
    vel: Option<VelocityField>,
    mut observer: impl FnMut(&SharpState),
) -> Result<SharpState> {
    let mut s = state.clone();
    observer(&s);
    while s.t < t_end - 1e-14 {
        let step = dt.min(t_end - s.t);
        s = vpmcf_step(&s, step, law, vel)?;
        observer(&s);
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// exact circle reduction
// ---------------------------------------------------------------------------

/// Integrate the exact reduction of the volume-preserving law for k
/// disjoint circles with v = 0:
///   dR_i/dt = -1/R_i + k / sum_j R_j.
/// Total area pi sum R_i^2 is conserved. Adaptive embedded RK (Fehlberg 4/5).
pub fn circle_oracle(radii: &[f64], t_end: f64) -> Result<Vec<f64>> {
    assert!(radii.iter().all(|&r| r > 0.0), "radii must be positive");
    let k = radii.len() as f64;
    let f = |r: &[f64]| -> Vec<f64> {
        let sum: f64 = r.iter().sum();
        r.iter().map(|&ri| -1.0 / ri + k / sum).collect()
    };
    let mut r = radii.to_vec();
    let mut t = 0.0;
    let mut dt = (t_end / 100.0).min(1e-3).max(1e-9);
    let tol = 1e-12;
    while t < t_end - 1e-15 {
        dt = dt.min(t_end - t);
        if r.iter().any(|&ri| ri < 1e-6) {
            let i = r.iter().position(|&ri| ri < 1e-6).unwrap();
            return Err(Error::CircleVanished { index: i, t });
        }
        let k1 = f(&r);
        let step = |coefs: &[(f64, &Vec<f64>)]| -> Vec<f64> {
            (0..r.len())
                .map(|i| r[i] + dt * coefs.iter().map(|(a, kv)| a * kv[i]).sum::<f64>())
                .collect()
        };
        let k2 = f(&step(&[(0.25, &k1)]));
        let k3 = f(&step(&[(3.0 / 32.0, &k1), (9.0 / 32.0, &k2)]));
        let k4 = f(&step(&[
            (1932.0 / 2197.0, &k1),
            (-7200.0 / 2197.0, &k2),
            (7296.0 / 2197.0, &k3),
        ]));
        let k5 = f(&step(&[
            (439.0 / 216.0, &k1),
            (-8.0, &k2),
            (3680.0 / 513.0, &k3),
            (-845.0 / 4104.0, &k4),
        ]));
        let k6 = f(&step(&[
            (-8.0 / 27.0, &k1),
            (2.0, &k2),
            (-3544.0 / 2565.0, &k3),
            (1859.0 / 4104.0, &k4),
            (-11.0 / 40.0, &k5),
        ]));
        let mut r5 = vec![0.0; r.len()];
        let mut err = 0.0f64;
        let mut bad = false;
        for i in 0..r.len() {
            let fourth = r[i]
                + dt * (25.0 / 216.0 * k1[i] + 1408.0 / 2565.0 * k3[i]
                    + 2197.0 / 4104.0 * k4[i]
                    - 0.2 * k5[i]);
            let fifth = r[i]
                + dt * (16.0 / 135.0 * k1[i] + 6656.0 / 12825.0 * k3[i]
                    + 28561.0 / 56430.0 * k4[i]
                    - 9.0 / 50.0 * k5[i]
                    + 2.0 / 55.0 * k6[i]);
            err = err.max((fifth - fourth).abs());
            if !fifth.is_finite() || fifth <= 0.0 {
                bad = true;
            }
            r5[i] = fifth;
        }
        if bad {
            dt *= 0.25;
            if dt < 1e-15 {
                let i = r.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
                return Err(Error::CircleVanished { index: i, t });
            }
            continue;
        }
        if err <= tol {
            t += dt;
            r = r5;
        }
        let scale = if err > 0.0 { 0.9 * (tol / err).powf(0.2) } else { 2.0 };
        dt *= scale.clamp(0.2, 2.5);
        if dt < 1e-15 {
            let i = r.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            return Err(Error::CircleVanished { index: i, t });
        }
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// height-function equation with nonlocal multiplier
// ---------------------------------------------------------------------------

/// State of the height equation on the unit-period reference grid.
#[derive(Debug, Clone)]
pub struct HFieldState {
    pub h: Vec<f64>,
    /// current mass multiplier
    pub lambda: f64,
    pub t: f64,
    /// discrete constraint residual int (V kappa h - D_t h) ds of the last
    /// accepted step; zero for the initial state
    pub constraint_residual: f64,
}

impl HFieldState {
    pub fn zero(n: usize) -> Self {
        HFieldState { h: vec![0.0; n], lambda: 0.0, t: 0.0, constraint_residual: 0.0 }
    }
}

/// Per-step coefficients of the height equation, sampled on the reference
/// grid (the reference circle has unit parameter length).
#[derive(Debug, Clone)]
pub struct HCoefficients {
    /// curve length; the surface Laplacian is (1/L^2) d^2/ds^2
    pub length: f64,
    /// V(s) kappa(s)
    pub v_kappa: Vec<f64>,
    /// tangential transport coefficient a(s) multiplying dh/ds
    pub advection: Vec<f64>,
    /// reaction g(s) (pull-back of the extension coefficient)
    pub reaction: Vec<f64>,
    /// surface-tension constant entering the multiplier
    pub sigma: f64,
}

impl HCoefficients {
    pub fn constant(n: usize, length: f64, v_kappa: f64, reaction: f64, sigma: f64) -> Self {
        HCoefficients {
            length,
            v_kappa: vec![v_kappa; n],
            advection: vec![0.0; n],
            reaction: vec![reaction; n],
            sigma,
        }
    }
}

/// The multiplier that keeps the step mass-consistent:
/// lambda = (sigma/2) [ int (V kappa - d_s a + g) h ds + int u_n ds ].
pub fn h_lambda(coeffs: &HCoefficients, h: &[f64], forcing: &[f64]) -> f64 {
    let n = h.len();
    let ds = 1.0 / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let da =
            (coeffs.advection[(i + 1) % n] - coeffs.advection[(i + n - 1) % n]) / (2.0 * ds);
        acc += (coeffs.v_kappa[i] - da + coeffs.reaction[i]) * h[i] + forcing[i];
    }
    0.5 * coeffs.sigma * acc * ds
}

/// One semi-implicit step: surface diffusion implicit (periodic transform
/// with the three-point symbol), advection/reaction/forcing/multiplier
/// explicit. The multiplier makes the discrete constraint
/// int (V kappa h - D_t h) ds = 0 hold to round-off.
pub fn h_step(
    state: &HFieldState,
    coeffs: &HCoefficients,
    forcing: &[f64],
    dt: f64,
    plans: &mut Plans,
) -> Result<HFieldState> {
    let n = state.h.len();
    if coeffs.v_kappa.len() != n
        || coeffs.advection.len() != n
        || coeffs.reaction.len() != n
        || forcing.len() != n
    {
        return Err(Error::NonPeriodicInput { len: coeffs.v_kappa.len() });
    }
    let ds = 1.0 / n as f64;
    let amax = coeffs.advection.iter().fold(0.0f64, |m, &a| m.max(a.abs()));
    if amax * dt / ds > 1.0 {
        return Err(Error::CflViolation { dt, limit: ds / amax });
    }

    let lambda = h_lambda(coeffs, &state.h, forcing);
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let dh = (state.h[(i + 1) % n] - state.h[(i + n - 1) % n]) / (2.0 * ds);
        rhs[i] = state.h[i] / dt - coeffs.advection[i] * dh - coeffs.reaction[i] * state.h[i]
            - forcing[i]
            + 2.0 / coeffs.sigma * lambda;
    }
    // implicit diffusion: (1/dt + A) h_new = rhs with the periodic
    // three-point symbol of -(1/L^2) d^2/ds^2
    let spec: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut hat = fft_forward(plans, &spec);
    let ll = coeffs.length * coeffs.length;
    for (k, v) in hat.iter_mut().enumerate() {
        let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let eig = (2.0 - 2.0 * th.cos()) / (ds * ds * ll);
        *v /= 1.0 / dt + eig;
    }
    let back = fft_inverse(plans, &hat);
    let h_new: Vec<f64> = back.iter().map(|v| v.re / n as f64).collect();

    let mut resid = 0.0;
    for i in 0..n {
        resid += (coeffs.v_kappa[i] * state.h[i] - (h_new[i] - state.h[i]) / dt) * ds;
    }
    Ok(HFieldState { h: h_new, lambda, t: state.t + dt, constraint_residual: resid })
}

/// March the height equation to t_end with frozen coefficients and a
/// time-dependent forcing sampler; returns the trajectory including the
/// initial state.
pub fn h_equation_solve(
    init: HFieldState,
    coeffs: &HCoefficients,
    t_end: f64,
    dt: f64,
    mut forcing: impl FnMut(f64) -> Vec<f64>,
) -> Result<Vec<HFieldState>> {
    let mut plans = Plans::new();
    let mut traj = vec![init];
    while traj.last().unwrap().t < t_end - 1e-14 {
        let cur = traj.last().unwrap();
        let step = dt.min(t_end - cur.t);
        let f = forcing(cur.t);
        let next = h_step(cur, coeffs, &f, step, &mut plans)?;
        traj.push(next);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linear_fit;

    #[test]
    fn oracle_initial_rates_and_area() {
        // radii (1,2): dR1 = -1 + 2/3 = -1/3, dR2 = -1/2 + 2/3 = 1/6
        let r = [1.0, 2.0];
        let k = 2.0;
        let sum: f64 = r.iter().sum();
        let d1 = -1.0 / r[0] + k / sum;
        let d2 = -1.0 / r[1] + k / sum;
        assert!((d1 + 1.0 / 3.0).abs() < 1e-15);
        assert!((d2 - 1.0 / 6.0).abs() < 1e-15);
        assert!((r[0] * d1 + r[1] * d2).abs() < 1e-15);
        let out = circle_oracle(&r, 0.3).unwrap();
        let a0: f64 = r.iter().map(|x| x * x).sum();
        let a1: f64 = out.iter().map(|x| x * x).sum();
        assert!((a1 - a0).abs() < 1e-9, "area drift {}", a1 - a0);
        assert!(out[0] < 1.0 && out[1] > 2.0);
    }

    #[test]
    fn oracle_fixed_points() {
        let out = circle_oracle(&[0.7], 1.0).unwrap();
        assert!((out[0] - 0.7).abs() < 1e-12);
        let out = circle_oracle(&[1.0, 1.0], 1.0).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-12 && (out[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_detects_vanishing() {
        match circle_oracle(&[0.2, 2.0], 1.0) {
            Err(Error::CircleVanished { index: 0, .. }) => {}
            other => panic!("expected CircleVanished, got {other:?}"),
        }
    }

    #[test]
    fn circle_is_stationary() {
        let c = Curve::circle([0.0, 0.0], 1.0, 256);
        let s0 = SharpState::new(vec![c]);
        let dt = 1e-4;
        let s = vpmcf_evolve(&s0, 0.05, dt, FrontLaw::VolumePreserving, None, |_| {}).unwrap();
        let mut worst = 0.0f64;
        for p in &s.curves[0].points {
            worst = worst.max(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs());
        }
        assert!(worst <= 1e-6, "radius drift {worst}");
    }

    #[test]
    fn shrinking_circle_matches_closed_form() {
        // plain MCF: R(t) = sqrt(1 - 2t)
        let c = Curve::circle([0.0, 0.0], 1.0, 256);
        let mut s = SharpState::new(vec![c]);
        let dt = 5e-5_f64;
        let t_end = 0.2;
        while s.t < t_end - 1e-14 {
            s = vpmcf_step(&s, dt.min(t_end - s.t), FrontLaw::PlainMcf, None).unwrap();
        }
        let exact = (1.0f64 - 2.0 * t_end).sqrt();
        let mut worst = 0.0f64;
        for p in &s.curves[0].points {
            worst = worst.max(((p[0] * p[0] + p[1] * p[1]).sqrt() - exact).abs());
        }
        assert!(worst < 1e-4, "radius error {worst}");
    }

    #[test]
    fn two_circles_follow_oracle() {
        let c1 = Curve::circle([-2.0, 0.0], 1.0, 256);
        let c2 = Curve::circle([2.5, 0.0], 2.0, 256);
        let mut s = SharpState::new(vec![c1, c2]);
        let t_end = 0.2;
        let dt = 1e-4_f64;
        while s.t < t_end - 1e-14 {
            s = vpmcf_step(&s, dt.min(t_end - s.t), FrontLaw::VolumePreserving, None).unwrap();
        }
        let oracle = circle_oracle(&[1.0, 2.0], t_end).unwrap();
        for (ci, center) in [[-2.0f64, 0.0], [2.5, 0.0]].iter().enumerate() {
            let mut mean_r = 0.0;
            for p in &s.curves[ci].points {
                mean_r += ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
            }
            mean_r /= s.curves[ci].n() as f64;
            let rel = (mean_r - oracle[ci]).abs() / oracle[ci];
            assert!(rel < 1e-3, "curve {ci}: {mean_r} vs oracle {}", oracle[ci]);
        }
    }

    #[test]
    fn flower_area_conserved_length_decreasing() {
        let c = Curve::flower([0.0, 0.0], 1.0, 0.15, 5, 512).unwrap();
        let s0 = SharpState::new(vec![c]);
        let a0 = s0.total_area();
        let ds = s0.curves[0].length / 512.0;
        let dt = 0.2 * ds * ds;
        let mut lengths = Vec::new();
        let s = vpmcf_evolve(&s0, 0.05, dt, FrontLaw::VolumePreserving, None, |st| {
            lengths.push(st.total_length());
        })
        .unwrap();
        let a1 = s.total_area();
        assert!(((a1 - a0) / a0).abs() <= 1e-5, "area drift {:.3e}", ((a1 - a0) / a0).abs());
        for w in lengths.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "length increased: {} -> {}", w[0], w[1]);
        }
        assert!(lengths.last().unwrap() + 1e-4 < lengths[0]);
    }

    #[test]
    fn rigid_motion_equivariance() {
        let base = Curve::flower([0.0, 0.0], 1.0, 0.1, 3, 256).unwrap();
        let (cth, sth) = (0.35f64.cos(), 0.35f64.sin());
        let mv = |p: &Point| [cth * p[0] - sth * p[1] + 1.2, sth * p[0] + cth * p[1] - 0.4];
        let moved_pts: Vec<Point> = base.points.iter().map(&mv).collect();
        let moved = Curve::from_points_raw(moved_pts).unwrap();
        let ds = base.length / 256.0;
        let dt = 0.2 * ds * ds;
        let s1 =
            vpmcf_step(&SharpState::new(vec![base]), dt, FrontLaw::VolumePreserving, None).unwrap();
        let s2 =
            vpmcf_step(&SharpState::new(vec![moved]), dt, FrontLaw::VolumePreserving, None)
                .unwrap();
        let mut worst = 0.0f64;
        for (p, q) in s1.curves[0].points.iter().zip(&s2.curves[0].points) {
            let pm = mv(p);
            worst = worst.max(((pm[0] - q[0]).powi(2) + (pm[1] - q[1]).powi(2)).sqrt());
        }
        assert!(worst < 1e-8, "equivariance violation {worst}");
    }

    #[test]
    fn cfl_guard() {
        let c = Curve::circle([0.0, 0.0], 1.0, 64);
        let s = SharpState::new(vec![c]);
        assert!(matches!(
            vpmcf_step(&s, 1.0, FrontLaw::VolumePreserving, None),
            Err(Error::CflViolation { .. })
        ));
    }

    // -- height equation --

    #[test]
    fn zero_forcing_stays_zero() {
        let n = 64;
        let coeffs = HCoefficients::constant(n, 1.0, 0.3, 0.5, 2.0 / 3.0);
        let traj =
            h_equation_solve(HFieldState::zero(n), &coeffs, 0.5, 1e-3, |_| vec![0.0; n]).unwrap();
        let last = traj.last().unwrap();
        assert!(last.h.iter().all(|&v| v.abs() < 1e-14));
        assert!(last.lambda.abs() < 1e-14);
    }

    #[test]
    fn constraint_residual_machine_small() {
        let n = 128;
        let mut v_kappa = vec![0.0; n];
        let mut advection = vec![0.0; n];
        let mut reaction = vec![0.0; n];
        for i in 0..n {
            let w = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            v_kappa[i] = 0.4 + 0.2 * w.cos();
            advection[i] = 0.3 * w.sin();
            reaction[i] = 0.5 + 0.1 * (2.0 * w).sin();
        }
        let coeffs = HCoefficients { length: 1.7, v_kappa, advection, reaction, sigma: 2.0 / 3.0 };
        let traj = h_equation_solve(HFieldState::zero(n), &coeffs, 0.2, 2e-4, |t| {
            (0..n)
                .map(|i| {
                    let s = i as f64 / n as f64;
                    (2.0 * std::f64::consts::PI * s).cos() * (1.0 + t)
                })
                .collect()
        })
        .unwrap();
        for st in &traj[1..] {
            assert!(
                st.constraint_residual.abs() <= 1e-8,
                "constraint {} at t={}",
                st.constraint_residual,
                st.t
            );
        }
        assert!(traj.last().unwrap().h.iter().any(|&v| v.abs() > 1e-3));
    }

    #[test]
    fn manufactured_solution_second_order() {
        // h*(s,t) = exp(-t) cos(2 pi s) with v = 0, g = 0, kappa = 0, L = 1;
        // the equation dt h - Lap h = -u_n + (2/sigma) lambda with lambda* = 0
        // needs u_n = -(dt h* - Lap h*) = (1 - 4 pi^2) exp(-t) cos(2 pi s).
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for &n in &[32usize, 64, 128, 256] {
            let ds = 1.0 / n as f64;
            let dt = 0.2 * ds * ds;
            let t_end = 0.05;
            let coeffs = HCoefficients::constant(n, 1.0, 0.0, 0.0, 2.0 / 3.0);
            let init = HFieldState {
                h: (0..n)
                    .map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                    .collect(),
                lambda: 0.0,
                t: 0.0,
                constraint_residual: 0.0,
            };
            let traj = h_equation_solve(init, &coeffs, t_end, dt, |t| {
                (0..n)
                    .map(|i| {
                        let s = i as f64 / n as f64;
                        (1.0 - 4.0 * std::f64::consts::PI * std::f64::consts::PI)
                            * (-t).exp()
                            * (2.0 * std::f64::consts::PI * s).cos()
                    })
                    .collect()
            })
            .unwrap();
            let last = traj.last().unwrap();
            let mut l2 = 0.0;
            for i in 0..n {
                let s = i as f64 / n as f64;
                let exact = (-last.t).exp() * (2.0 * std::f64::consts::PI * s).cos();
                l2 += (last.h[i] - exact).powi(2) * ds;
            }
            errs.push(l2.sqrt().ln());
            hs.push(ds.ln());
        }
        let (rate, _, r2) = linear_fit(&hs, &errs);
        assert!((rate - 2.0).abs() <= 0.1, "manufactured-solution order {rate} (r2 = {r2})");
    }

    #[test]
    fn mean_mode_steady_state_matches_algebraic_solve() {
        // constant coefficients: V kappa = c0, g = gamma, forcing F;
        // the stationary mean mode solves the 2x2 system
        //   gamma hbar - (2/sigma) lam = -F
        //   -(sigma/2)(c0 + gamma) hbar + lam = (sigma/2) F
        let (c0, gamma, ff, sigma) = (0.7, 0.9, 0.35, 2.0 / 3.0);
        let n = 64;
        let coeffs = HCoefficients::constant(n, 1.0, c0, gamma, sigma);
        let traj = h_equation_solve(HFieldState::zero(n), &coeffs, 8.0, 1e-3, |_| vec![ff; n])
            .unwrap();
        let last = traj.last().unwrap();
        let hbar: f64 = last.h.iter().sum::<f64>() / n as f64;
        let a = [[gamma, -2.0 / sigma], [-(sigma / 2.0) * (c0 + gamma), 1.0]];
        let b = [-ff, sigma / 2.0 * ff];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let hbar_exact = (b[0] * a[1][1] - a[0][1] * b[1]) / det;
        let lam_exact = (a[0][0] * b[1] - b[0] * a[1][0]) / det;
        assert!((hbar - hbar_exact).abs() < 1e-9, "hbar {hbar} vs {hbar_exact}");
        assert!((last.lambda - lam_exact).abs() < 1e-9, "lambda {} vs {lam_exact}", last.lambda);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let n = 64;
        let coeffs = HCoefficients::constant(n, 1.0, 0.0, 0.0, 2.0 / 3.0);
        let mut plans = Plans::new();
        let bad = vec![0.0; n + 1];
        assert!(h_step(&HFieldState::zero(n), &coeffs, &bad, 1e-3, &mut plans).is_err());
    }
}
