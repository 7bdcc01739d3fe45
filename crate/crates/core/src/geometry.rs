//! Closed-curve interface geometry: equal-arclength sampling, tangents,
//! normals and signed curvature, signed distance with closest-point
//! projection, tubular (r, s) coordinates, the stretched layer variable,
//! the smooth cutoff, and integration over tubular neighborhoods.
//!
//! Conventions (every other module imports these):
//! - curves are stored counterclockwise, the enclosed region is the plus
//!   phase, and the normal rot90(tau) points into it;
//! - signed distance d > 0 inside, so grad d = n on the curve;
//! - a circle of radius R enclosing the plus phase has curvature +1/R,
//!   consistent with Laplacian(d) = -kappa on the curve.

use crate::error::{Error, Result};
use crate::fft::{spectral_derivative, Plans};
use crate::numerics::gauss_legendre;
use rustfft::num_complex::Complex64;

pub type Point = [f64; 2];

/// Closed interface curve with equal-arclength samples.
#[derive(Debug, Clone)]
pub struct Curve {
    /// sample points at arclength fractions i/N, counterclockwise
    pub points: Vec<Point>,
    /// total arclength
    pub length: f64,
    spline: PeriodicSpline,
}

/// Tangent, interior normal, and signed curvature at the samples.
#[derive(Debug, Clone)]
pub struct CurveQuantities {
    pub tau: Vec<Point>,
    pub normal: Vec<Point>,
    pub kappa: Vec<f64>,
}

/// Tubular coordinates of a query point.
#[derive(Debug, Clone, Copy)]
pub struct TubeCoords {
    /// signed distance (positive on the enclosed side)
    pub r: f64,
    /// foot-point parameter in [0, 1)
    pub s: f64,
    pub foot: Point,
    /// |r| < 2 delta for the delta supplied to the query
    pub inside_tube: bool,
}

/// Smooth cutoff: 1 on [-delta, delta], 0 outside [-2 delta, 2 delta],
/// quintic smoothstep in the transition bands.
#[derive(Debug, Clone, Copy)]
pub struct CutoffZeta {
    pub delta: f64,
}

impl CutoffZeta {
    pub fn new(delta: f64) -> Self {
        assert!(delta > 0.0, "cutoff width must be positive");
        CutoffZeta { delta }
    }

    pub fn eval(&self, z: f64) -> f64 {
        let a = z.abs();
        if a <= self.delta {
            1.0
        } else if a >= 2.0 * self.delta {
            0.0
        } else {
            let t = (a - self.delta) / self.delta;
            1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let a = z.abs();
        if a <= self.delta || a >= 2.0 * self.delta {
            0.0
        } else {
            let t = (a - self.delta) / self.delta;
            let ds = -30.0 * t * t * (1.0 - t) * (1.0 - t) / self.delta;
            ds * z.signum()
        }
    }
}

/// Free-function form of the cutoff, as used in field assembly.
pub fn cutoff_zeta(delta: f64, z: f64) -> f64 {
    CutoffZeta::new(delta).eval(z)
}

// ---------------------------------------------------------------------------
// periodic cubic spline
// ---------------------------------------------------------------------------

/// Periodic cubic spline through n points with cumulative chord-length
/// knots, parametrized by u in [0, U).
#[derive(Debug, Clone)]
struct PeriodicSpline {
    pts: Vec<Point>,
    /// knot positions u_0 = 0 < u_1 < ... < u_{n-1}; period ends at `period`
    knots: Vec<f64>,
    period: f64,
    /// second derivatives at the knots, per component
    m: [Vec<f64>; 2],
}

impl PeriodicSpline {
    fn build(pts: &[Point]) -> Self {
        let n = pts.len();
        let mut knots = vec![0.0; n];
        for i in 1..n {
            knots[i] = knots[i - 1] + dist(pts[i - 1], pts[i]).max(1e-14);
        }
        let period = knots[n - 1] + dist(pts[n - 1], pts[0]).max(1e-14);
        let h = |i: usize| -> f64 {
            if i + 1 < n {
                knots[i + 1] - knots[i]
            } else {
                period - knots[n - 1]
            }
        };
        let solve_component = |comp: usize| -> Vec<f64> {
            // non-uniform natural periodic spline:
            // (h_{i-1}/6) m_{i-1} + ((h_{i-1}+h_i)/3) m_i + (h_i/6) m_{i+1}
            //   = dy_i/h_i - dy_{i-1}/h_{i-1}
            let him = |i: usize| h((i + n - 1) % n);
            let dy = |i: usize| (pts[(i + 1) % n][comp] - pts[i][comp]) / h(i);
            let diag: Vec<f64> = (0..n).map(|i| (him(i) + h(i)) / 3.0).collect();
            let lower: Vec<f64> = (1..n).map(|i| him(i) / 6.0).collect();
            let upper: Vec<f64> = (0..n - 1).map(|i| h(i) / 6.0).collect();
            let corner_top = him(0) / 6.0; // couples m_0 to m_{n-1}
            let corner_bot = h(n - 1) / 6.0; // couples m_{n-1} to m_0
            let rhs: Vec<f64> = (0..n).map(|i| dy(i) - dy((i + n - 1) % n)).collect();
            solve_cyclic_tridiagonal(&lower, &diag, &upper, corner_top, corner_bot, &rhs)
        };
        let m = [solve_component(0), solve_component(1)];
        PeriodicSpline { pts: pts.to_vec(), knots, period, m }
    }

    fn n(&self) -> usize {
        self.pts.len()
    }

    /// Segment index and local coordinate for parameter u.
    fn locate(&self, u: f64) -> (usize, usize, f64, f64) {
        let n = self.n();
        let uu = u.rem_euclid(self.period);
        let i = match self.knots.binary_search_by(|v| v.partial_cmp(&uu).unwrap()) {
            Ok(j) => j,
            Err(j) => j.saturating_sub(1),
        }
        .min(n - 1);
        let j = (i + 1) % n;
        let hi = if i + 1 < n { self.knots[i + 1] - self.knots[i] } else { self.period - self.knots[i] };
        (i, j, uu - self.knots[i], hi)
    }

    /// Position at parameter u (periodic).
    fn eval(&self, u: f64) -> Point {
        let (i, j, du, h) = self.locate(u);
        let t = du / h;
        let omt = 1.0 - t;
        let mut out = [0.0; 2];
        for c in 0..2 {
            let (ya, yb) = (self.pts[i][c], self.pts[j][c]);
            let (ma, mb) = (self.m[c][i], self.m[c][j]);
            out[c] = ya * omt
                + yb * t
                + h * h * ((omt * omt * omt - omt) * ma + (t * t * t - t) * mb) / 6.0;
        }
        out
    }

    fn deriv(&self, u: f64) -> Point {
        let (i, j, du, h) = self.locate(u);
        let t = du / h;
        let omt = 1.0 - t;
        let mut out = [0.0; 2];
        for c in 0..2 {
            let (ya, yb) = (self.pts[i][c], self.pts[j][c]);
            let (ma, mb) = (self.m[c][i], self.m[c][j]);
            out[c] = (yb - ya) / h
                + h * ((-3.0 * omt * omt + 1.0) * ma + (3.0 * t * t - 1.0) * mb) / 6.0;
        }
        out
    }

    fn second_deriv(&self, u: f64) -> Point {
        let (i, j, du, h) = self.locate(u);
        let t = du / h;
        let mut out = [0.0; 2];
        for c in 0..2 {
            out[c] = (1.0 - t) * self.m[c][i] + t * self.m[c][j];
        }
        out
    }

    fn segment_start(&self, i: usize) -> f64 {
        self.knots[i]
    }

    fn segment_width(&self, i: usize) -> f64 {
        if i + 1 < self.n() {
            self.knots[i + 1] - self.knots[i]
        } else {
            self.period - self.knots[i]
        }
    }

    /// Arclength of segment i by Gauss quadrature.
    fn segment_length(&self, i: usize, gl: &(Vec<f64>, Vec<f64>)) -> f64 {
        let a = self.segment_start(i);
        let w2 = 0.5 * self.segment_width(i);
        let mut total = 0.0;
        for (&x, &w) in gl.0.iter().zip(gl.1.iter()) {
            let u = a + w2 * (x + 1.0);
            let d = self.deriv(u);
            total += w2 * w * (d[0] * d[0] + d[1] * d[1]).sqrt();
        }
        total
    }

    /// Signed area enclosed by the spline via Green's theorem; the
    /// integrand is polynomial per segment, so Gauss-5 is exact.
    fn green_area(&self, gl: &(Vec<f64>, Vec<f64>)) -> f64 {
        let mut area = 0.0;
        for i in 0..self.n() {
            let a = self.segment_start(i);
            let w2 = 0.5 * self.segment_width(i);
            for (&x, &w) in gl.0.iter().zip(gl.1.iter()) {
                let u = a + w2 * (x + 1.0);
                let p = self.eval(u);
                let d = self.deriv(u);
                area += 0.5 * w2 * w * (p[0] * d[1] - p[1] * d[0]);
            }
        }
        area
    }
}

/// Cyclic tridiagonal solve by Sherman-Morrison; `corner_top` is the
/// (0, n-1) entry and `corner_bot` the (n-1, 0) entry.
fn solve_cyclic_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    corner_top: f64,
    corner_bot: f64,
    rhs: &[f64],
) -> Vec<f64> {
    let n = rhs.len();
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= corner_top * corner_bot / gamma;
    let y = crate::numerics::solve_tridiagonal(lower, &d, upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = corner_bot;
    let z = crate::numerics::solve_tridiagonal(lower, &d, upper, &u);
    let vy = y[0] + corner_top * y[n - 1] / gamma;
    let vz = z[0] + corner_top * z[n - 1] / gamma;
    let fact = vy / (1.0 + vz);
    (0..n).map(|i| y[i] - fact * z[i]).collect()
}

// ---------------------------------------------------------------------------
// curve construction and resampling
// ---------------------------------------------------------------------------

impl Curve {
    /// Build a curve from raw closed-polyline samples: orders it
    /// counterclockwise, checks simplicity, and resamples to `n_samples`
    /// equal-arclength points on the periodic cubic spline.
    pub fn from_points(raw: Vec<Point>, n_samples: usize) -> Result<Curve> {
        if raw.len() < 16 || n_samples < 16 {
            return Err(Error::DegenerateCurve {
                reason: format!("need at least 16 samples, got {}", raw.len().min(n_samples)),
            });
        }
        let mut pts = raw;
        if polygon_area(&pts) < 0.0 {
            pts.reverse();
        }
        let perimeter: f64 =
            (0..pts.len()).map(|i| dist(pts[i], pts[(i + 1) % pts.len()])).sum();
        if perimeter < 1e-10 {
            return Err(Error::DegenerateCurve { reason: "zero length".into() });
        }
        if self_intersects(&pts) {
            return Err(Error::DegenerateCurve { reason: "self-intersecting".into() });
        }
        Curve::assemble(pts)?.resample(n_samples)
    }

    fn assemble(pts: Vec<Point>) -> Result<Curve> {
        let spline = PeriodicSpline::build(&pts);
        let gl = gauss_legendre(5);
        let length: f64 = (0..pts.len()).map(|i| spline.segment_length(i, &gl)).sum();
        if length < 1e-10 {
            return Err(Error::DegenerateCurve { reason: "zero length".into() });
        }
        Ok(Curve { points: pts, length, spline })
    }

    /// Construct directly from points already in order (no resampling).
    pub fn from_points_raw(pts: Vec<Point>) -> Result<Curve> {
        Curve::assemble(pts)
    }

    /// Resample to `n` equal-arclength points on the current spline.
    pub fn resample(&self, n: usize) -> Result<Curve> {
        let gl = gauss_legendre(5);
        let nn = self.points.len();
        let mut cum = vec![0.0; nn + 1];
        for i in 0..nn {
            cum[i + 1] = cum[i] + self.spline.segment_length(i, &gl);
        }
        let total = cum[nn];
        if total < 1e-10 {
            return Err(Error::DegenerateCurve { reason: "zero length".into() });
        }
        let mut new_pts = Vec::with_capacity(n);
        for k in 0..n {
            let target = total * k as f64 / n as f64;
            let mut i = match cum.binary_search_by(|v| v.partial_cmp(&target).unwrap()) {
                Ok(j) => j,
                Err(j) => j.saturating_sub(1),
            };
            if i >= nn {
                i = nn - 1;
            }
            // Newton on arclength(u) = target within segment i
            let a = self.spline.segment_start(i);
            let w = self.spline.segment_width(i);
            let mut u = a + w * (target - cum[i]) / (cum[i + 1] - cum[i]).max(1e-300);
            for _ in 0..30 {
                let s_u = cum[i] + partial_segment_length(&self.spline, i, u - a, &gl);
                let d = self.spline.deriv(u);
                let speed = (d[0] * d[0] + d[1] * d[1]).sqrt().max(1e-300);
                let du = (s_u - target) / speed;
                u -= du;
                u = u.clamp(a, a + w);
                if du.abs() < 1e-14 * w.max(1.0) {
                    break;
                }
            }
            new_pts.push(self.spline.eval(u));
        }
        if self_intersects(&new_pts) {
            return Err(Error::DegenerateCurve { reason: "self-intersecting".into() });
        }
        Curve::assemble(new_pts)
    }

    /// Circle of radius r, counterclockwise.
    pub fn circle(center: Point, r: f64, n: usize) -> Curve {
        let pts: Vec<Point> = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [center[0] + r * t.cos(), center[1] + r * t.sin()]
            })
            .collect();
        Curve::assemble(pts).expect("circle is non-degenerate")
    }

    /// Axis-aligned ellipse with semi-axes (a, b).
    pub fn ellipse(center: Point, a: f64, b: f64, n: usize) -> Result<Curve> {
        let pts: Vec<Point> = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [center[0] + a * t.cos(), center[1] + b * t.sin()]
            })
            .collect();
        Curve::from_points(pts, n)
    }

    /// Flower-shaped curve r(phi) = r0 (1 + amp cos(k phi)).
    pub fn flower(center: Point, r0: f64, amp: f64, k: usize, n: usize) -> Result<Curve> {
        let pts: Vec<Point> = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let r = r0 * (1.0 + amp * (k as f64 * t).cos());
                [center[0] + r * t.cos(), center[1] + r * t.sin()]
            })
            .collect();
        Curve::from_points(pts, n)
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Shoelace area of the sample polygon (positive, counterclockwise).
    pub fn polygon_area(&self) -> f64 {
        polygon_area(&self.points)
    }

    /// Enclosed area of the spline curve (Green's theorem, exact per segment).
    pub fn enclosed_area(&self) -> f64 {
        self.spline.green_area(&gauss_legendre(5))
    }

    /// Tangents, interior normals, signed curvature by spectral
    /// differentiation of the equal-arclength parametrization.
    pub fn quantities(&self) -> Result<CurveQuantities> {
        let n = self.n();
        let mut plans = Plans::new();
        let z: Vec<Complex64> = self.points.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        let dz = spectral_derivative(&mut plans, &z, 1, 1.0);
        let d2z = spectral_derivative(&mut plans, &z, 2, 1.0);
        let mut tau = Vec::with_capacity(n);
        let mut normal = Vec::with_capacity(n);
        let mut kappa = Vec::with_capacity(n);
        for i in 0..n {
            let speed = dz[i].norm();
            if speed < 1e-12 {
                return Err(Error::DegenerateCurve { reason: "vanishing tangent".into() });
            }
            let t = [dz[i].re / speed, dz[i].im / speed];
            tau.push(t);
            normal.push([-t[1], t[0]]);
            let cross = dz[i].re * d2z[i].im - dz[i].im * d2z[i].re;
            kappa.push(cross / (speed * speed * speed));
        }
        Ok(CurveQuantities { tau, normal, kappa })
    }

    /// Tube half-width delta = min(0.4 / max|kappa|, clearance / 2.5).
    pub fn tube_delta(&self, clearance: Option<f64>) -> Result<f64> {
        let q = self.quantities()?;
        let kmax = q.kappa.iter().fold(0.0f64, |a, &k| a.max(k.abs())).max(1e-12);
        let mut delta = 0.4 / kmax;
        if let Some(c) = clearance {
            delta = delta.min(c / 2.5);
        }
        Ok(delta)
    }

    /// Closest-point projection with signed distance; `two_delta` sets the
    /// inside_tube flag and the reach used for ambiguity reporting.
    pub fn project(&self, x: Point, two_delta: f64) -> Result<TubeCoords> {
        let n = self.n();
        let mut d2: Vec<f64> = Vec::with_capacity(n);
        for p in &self.points {
            let dx = x[0] - p[0];
            let dy = x[1] - p[1];
            d2.push(dx * dx + dy * dy);
        }
        // local minima of the sampled distance are the projection candidates
        let mut candidates: Vec<usize> = (0..n)
            .filter(|&i| {
                let prev = d2[(i + n - 1) % n];
                let next = d2[(i + 1) % n];
                d2[i] <= prev && d2[i] <= next
            })
            .collect();
        if candidates.is_empty() {
            candidates.push(
                d2.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0,
            );
        }
        let period = self.spline.period;
        let seg_avg = period / n as f64;
        let mut refined: Vec<(f64, f64)> = Vec::new(); // (u, dist)
        for &i in &candidates {
            let mut u = self.spline.segment_start(i);
            for _ in 0..40 {
                let p = self.spline.eval(u);
                let dp = self.spline.deriv(u);
                let d2p = self.spline.second_deriv(u);
                let ex = p[0] - x[0];
                let ey = p[1] - x[1];
                let phi = ex * dp[0] + ey * dp[1];
                let dphi = dp[0] * dp[0] + dp[1] * dp[1] + ex * d2p[0] + ey * d2p[1];
                if dphi.abs() < 1e-300 {
                    break;
                }
                let step = (phi / dphi).clamp(-seg_avg, seg_avg);
                u -= step;
                if step.abs() < 1e-13 * period {
                    break;
                }
            }
            let p = self.spline.eval(u);
            refined.push((u.rem_euclid(period), dist(p, x)));
        }
        refined.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let (u_best, dist_best) = refined[0];
        if refined.len() > 1 && dist_best >= two_delta {
            let (u2, dist2) = refined[1];
            let gap = {
                let d = (u_best - u2).rem_euclid(period);
                d.min(period - d)
            };
            if (dist2 - dist_best).abs() < 1e-9 && gap > seg_avg {
                return Err(Error::AmbiguousProjection { x: x[0], y: x[1] });
            }
        }
        let foot = self.spline.eval(u_best);
        let dp = self.spline.deriv(u_best);
        let speed = (dp[0] * dp[0] + dp[1] * dp[1]).sqrt().max(1e-300);
        let nvec = [-dp[1] / speed, dp[0] / speed];
        let rsign = ((x[0] - foot[0]) * nvec[0] + (x[1] - foot[1]) * nvec[1]).signum();
        let r = rsign * dist_best;
        Ok(TubeCoords { r, s: u_best / period, foot, inside_tube: dist_best < two_delta })
    }

    /// Position at parameter fraction s in [0, 1) (arclength fraction up
    /// to the chord-vs-arc difference of the equal-arclength sampling).
    pub fn at(&self, s: f64) -> Point {
        self.spline.eval(s * self.spline.period)
    }

    /// Unit interior normal at parameter fraction s (from the spline).
    pub fn normal_at(&self, s: f64) -> Point {
        let dp = self.spline.deriv(s * self.spline.period);
        let speed = (dp[0] * dp[0] + dp[1] * dp[1]).sqrt().max(1e-300);
        [-dp[1] / speed, dp[0] / speed]
    }
}

/// Arclength of segment i from its start knot to offset `du`.
fn partial_segment_length(sp: &PeriodicSpline, i: usize, du: f64, gl: &(Vec<f64>, Vec<f64>)) -> f64 {
    if du <= 0.0 {
        return 0.0;
    }
    let a = sp.segment_start(i);
    let mut total = 0.0;
    for (&x, &w) in gl.0.iter().zip(gl.1.iter()) {
        let u = a + 0.5 * du * (x + 1.0);
        let d = sp.deriv(u);
        total += 0.5 * du * w * (d[0] * d[0] + d[1] * d[1]).sqrt();
    }
    total
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])).sqrt()
}

fn polygon_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    let mut a = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        a += pts[i][0] * pts[j][1] - pts[j][0] * pts[i][1];
    }
    0.5 * a
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d = |a: Point, b: Point, c: Point| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let d1 = d(q1, q2, p1);
    let d2 = d(q1, q2, p2);
    let d3 = d(p1, p2, q1);
    let d4 = d(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn self_intersects(pts: &[Point]) -> bool {
    let n = pts.len();
    for i in 0..n {
        let a1 = pts[i];
        let a2 = pts[(i + 1) % n];
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(a1, a2, pts[j], pts[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

/// Stretched layer variable rho = r / eps - h(s).
pub fn stretched_rho(tc: &TubeCoords, eps: f64, h: impl Fn(f64) -> f64) -> Result<f64> {
    if !tc.inside_tube {
        return Err(Error::OutsideTube { r: tc.r, tube: f64::NAN });
    }
    Ok(tc.r / eps - h(tc.s))
}

/// Integrate f(r, s) over the tube {|r| < delta_p} around the curve with
/// the normal-map Jacobian J = 1 - r kappa(s):
/// integral = L int_0^1 int_{-d'}^{d'} f(r, s) (1 - r kappa(s)) dr ds.
pub fn tube_integrate(
    curve: &Curve,
    delta_p: f64,
    integrand: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    let q = curve.quantities()?;
    let kmax = q.kappa.iter().fold(0.0f64, |a, &k| a.max(k.abs()));
    if delta_p * kmax >= 1.0 {
        return Err(Error::TubeTooWide { requested: delta_p, reach: 1.0 / kmax.max(1e-300) });
    }
    let n = curve.n();
    let (gx, gw) = gauss_legendre(32);
    let mut total = 0.0;
    for i in 0..n {
        let s = i as f64 / n as f64;
        let kap = q.kappa[i];
        let mut line = 0.0;
        for (&x, &w) in gx.iter().zip(gw.iter()) {
            let r = delta_p * x;
            line += delta_p * w * integrand(r, s) * (1.0 - r * kap);
        }
        total += line;
    }
    Ok(total * curve.length / n as f64)
}

/// Projection onto the nearest of several disjoint closed curves.
/// Signed distance is positive inside any of them.
pub fn project_union(curves: &[Curve], x: Point, two_delta: f64) -> Result<(usize, TubeCoords)> {
    let mut best: Option<(usize, TubeCoords)> = None;
    for (idx, c) in curves.iter().enumerate() {
        let tc = c.project(x, two_delta)?;
        if best.as_ref().map_or(true, |(_, b)| tc.r.abs() < b.r.abs()) {
            best = Some((idx, tc));
        }
    }
    best.ok_or(Error::NoInterface)
}

/// Curve CSV I/O: one "x,y" pair per line.
pub fn write_curve_csv(path: &std::path::Path, curve: &Curve) -> Result<()> {
    let mut out = String::new();
    out.push_str("x,y\n");
    for p in &curve.points {
        out.push_str(&format!("{:.17e},{:.17e}\n", p[0], p[1]));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_curve_csv(path: &std::path::Path, n_samples: usize) -> Result<Curve> {
    let text = std::fs::read_to_string(path)?;
    let mut pts = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with('x')) {
            continue;
        }
        let mut it = line.split(',');
        let mut field = || -> Result<f64> {
            it.next()
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::InvalidConfig(format!("bad curve CSV line {}", lineno + 1)))
        };
        let x = field()?;
        let y = field()?;
        pts.push([x, y]);
    }
    Curve::from_points(pts, n_samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::adaptive_quad;

    #[test]
    fn resample_circle_even_spacing() {
        // unevenly sampled unit circle
        let pts: Vec<Point> = (0..64)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * (i as f64 / 64.0).powi(2);
                [t.cos(), t.sin()]
            })
            .collect();
        let c = Curve::from_points(pts, 64).unwrap();
        let chord = 2.0 * (c.length / 128.0).sin();
        for i in 0..64 {
            let d = dist(c.points[i], c.points[(i + 1) % 64]);
            assert!((d - chord).abs() < 1e-6, "i={i} d={d} vs {chord}");
        }
        // spline length approximates the circle to O(ds^4)-level
        assert!((c.length - 2.0 * std::f64::consts::PI).abs() < 1e-5);
    }

    #[test]
    fn resample_idempotent() {
        let c = Curve::circle([0.3, -0.2], 0.7, 128);
        let c2 = c.resample(128).unwrap();
        let mut worst = 0.0f64;
        for i in 0..128 {
            worst = worst.max(dist(c.points[i], c2.points[i]));
        }
        assert!(worst <= 1e-10, "displacement {worst}");
    }

    #[test]
    fn ellipse_perimeter_matches_quadrature() {
        let (a, b) = (2.0, 1.0);
        let c = Curve::ellipse([0.0, 0.0], a, b, 512).unwrap();
        let oracle = adaptive_quad(
            |t| ((a * t.sin()).powi(2) + (b * t.cos()).powi(2)).sqrt(),
            0.0,
            2.0 * std::f64::consts::PI,
            1e-10,
        );
        assert!((oracle - 9.688448220547676).abs() < 1e-6, "oracle {oracle}");
        assert!((c.length - oracle).abs() < 1e-4, "perimeter {} vs {oracle}", c.length);
    }

    #[test]
    fn circle_curvature_positive_inside() {
        let c = Curve::circle([0.0, 0.0], 1.0, 256);
        let q = c.quantities().unwrap();
        for i in 0..c.n() {
            assert!((q.kappa[i] - 1.0).abs() < 1e-6, "kappa {}", q.kappa[i]);
            let p = c.points[i];
            let dot = -(q.normal[i][0] * p[0] + q.normal[i][1] * p[1]);
            assert!(dot > 0.99, "normal not interior");
        }
        let big = Curve::circle([0.0, 0.0], 1e3, 256);
        let qb = big.quantities().unwrap();
        assert!((qb.kappa[0] - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn ellipse_vertex_curvature() {
        let c = Curve::ellipse([0.0, 0.0], 2.0, 1.0, 1024).unwrap();
        let q = c.quantities().unwrap();
        let mut best = (f64::INFINITY, 0usize);
        for (i, p) in c.points.iter().enumerate() {
            let d = dist(*p, [2.0, 0.0]);
            if d < best.0 {
                best = (d, i);
            }
        }
        // kappa = a/b^2 = 2 at the semi-major vertex
        let k = q.kappa[best.1];
        assert!((k - 2.0).abs() < 5e-3, "vertex curvature {k}");
    }

    #[test]
    fn curvature_rigid_motion_invariant() {
        let base = Curve::ellipse([0.0, 0.0], 1.5, 0.8, 256).unwrap();
        let (cth, sth) = (0.6f64.cos(), 0.6f64.sin());
        let moved_pts: Vec<Point> = base
            .points
            .iter()
            .map(|p| [cth * p[0] - sth * p[1] + 3.0, sth * p[0] + cth * p[1] - 1.0])
            .collect();
        let moved = Curve::from_points_raw(moved_pts).unwrap();
        let q0 = base.quantities().unwrap();
        let q1 = moved.quantities().unwrap();
        for i in 0..base.n() {
            assert!((q0.kappa[i] - q1.kappa[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_signs_and_reconstruction() {
        let c = Curve::circle([0.0, 0.0], 1.0, 256);
        let two_delta = 0.5;
        let tc = c.project([2.0, 0.0], two_delta).unwrap();
        assert!((tc.r + 1.0).abs() < 1e-8, "r = {}", tc.r);
        assert!(dist(tc.foot, [1.0, 0.0]) < 1e-8);
        assert!(!tc.inside_tube);
        // interior point (not the exact center, which is ambiguous)
        let tc = c.project([0.62, 0.0], two_delta).unwrap();
        assert!((tc.r - 0.38).abs() < 1e-8, "r = {}", tc.r);
        assert!(tc.inside_tube);
        // reconstruction x = foot + r n(foot) for random tube points
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rng = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let ang = 2.0 * std::f64::consts::PI * rng();
            let rr = 0.5 * (2.0 * rng() - 1.0) * 0.99;
            let x = [(1.0 - rr) * ang.cos(), (1.0 - rr) * ang.sin()];
            let tc = c.project(x, two_delta).unwrap();
            assert!(tc.inside_tube);
            let nv = c.normal_at(tc.s);
            let rec = [tc.foot[0] + tc.r * nv[0], tc.foot[1] + tc.r * nv[1]];
            worst = worst.max(dist(rec, x));
        }
        assert!(worst <= 1e-8 * c.length, "reconstruction {worst}");
    }

    #[test]
    fn center_of_circle_positive_distance() {
        // the exact center ties all foot points; any of them is acceptable
        // but the sign must be positive (inside the plus phase)
        let c = Curve::circle([0.0, 0.0], 1.0, 256);
        match c.project([1e-3, 0.0], 0.5) {
            Ok(tc) => assert!((tc.r - (1.0 - 1e-3)).abs() < 1e-6),
            Err(e) => panic!("near-center projection failed: {e}"),
        }
    }

    #[test]
    fn foot_point_idempotent() {
        let c = Curve::ellipse([0.5, 0.5], 1.2, 0.7, 256).unwrap();
        let tc = c.project([1.9, 0.9], 0.4).unwrap();
        let tc2 = c.project(tc.foot, 0.4).unwrap();
        assert!(tc2.r.abs() < 1e-9, "foot residual {}", tc2.r);
    }

    #[test]
    fn grad_distance_unit_norm() {
        let c = Curve::ellipse([0.0, 0.0], 1.0, 0.6, 256).unwrap();
        let delta = c.tube_delta(None).unwrap();
        let h = 1e-4;
        let mut checked = 0;
        for &p in &[[1.05, 0.1], [0.0, 0.65], [-0.9, -0.3], [0.5, 0.5]] {
            let d = |x: Point| c.project(x, 2.0 * delta).unwrap().r;
            let center = c.project(p, 2.0 * delta).unwrap();
            if !center.inside_tube {
                continue;
            }
            let gx = (d([p[0] + h, p[1]]) - d([p[0] - h, p[1]])) / (2.0 * h);
            let gy = (d([p[0], p[1] + h]) - d([p[0], p[1] - h])) / (2.0 * h);
            let g = (gx * gx + gy * gy).sqrt();
            assert!((g - 1.0).abs() < 1e-3, "grad norm {g} at {p:?}");
            checked += 1;
        }
        assert!(checked >= 2);
    }

    #[test]
    fn stretched_variable_examples() {
        let tc = TubeCoords { r: 0.0, s: 0.3, foot: [0.0, 0.0], inside_tube: true };
        assert_eq!(stretched_rho(&tc, 0.05, |_| 0.0).unwrap(), 0.0);
        let tc = TubeCoords { r: 0.1, s: 0.3, foot: [0.0, 0.0], inside_tube: true };
        assert!((stretched_rho(&tc, 0.05, |_| 0.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((stretched_rho(&tc, 0.05, |_| 0.5).unwrap() - 1.5).abs() < 1e-12);
        let out = TubeCoords { r: 0.5, s: 0.0, foot: [0.0, 0.0], inside_tube: false };
        assert!(stretched_rho(&out, 0.05, |_| 0.0).is_err());
    }

    #[test]
    fn tube_integral_annulus() {
        let c = Curve::circle([0.0, 0.0], 1.0, 256);
        // area of the annulus 0.8 <= |x| <= 1.2 fixes the sign of r kappa
        let area = tube_integrate(&c, 0.2, |_, _| 1.0).unwrap();
        let exact = std::f64::consts::PI * (1.44 - 0.64);
        assert!((area - exact).abs() < 1e-6, "annulus {area} vs {exact}");
        // moment with integrand r against the polar oracle
        let v = tube_integrate(&c, 0.2, |r, _| r).unwrap();
        let oracle =
            2.0 * std::f64::consts::PI * adaptive_quad(|rho| (1.0 - rho) * rho, 0.8, 1.2, 1e-12);
        assert!((v - oracle).abs() < 1e-8, "r moment {v} vs {oracle}");
        // integrand odd in s on the symmetric circle
        let v = tube_integrate(&c, 0.2, |_, s| (2.0 * std::f64::consts::PI * s).sin()).unwrap();
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn tube_too_wide_rejected() {
        let c = Curve::circle([0.0, 0.0], 0.5, 128);
        assert!(matches!(tube_integrate(&c, 0.6, |_, _| 1.0), Err(Error::TubeTooWide { .. })));
    }

    #[test]
    fn jacobian_positive_within_delta() {
        let c = Curve::flower([0.0, 0.0], 1.0, 0.15, 5, 512).unwrap();
        let delta = c.tube_delta(None).unwrap();
        let q = c.quantities().unwrap();
        let kmax = q.kappa.iter().fold(0.0f64, |a, &k| a.max(k.abs()));
        // J = 1 - r kappa >= 0.5 throughout the tube |r| <= 2 delta... the
        // 0.4 margin in tube_delta guarantees 1 - 2*0.4 = 0.2 at worst for
        // the full 2-delta tube and >= 0.6 within delta
        assert!(1.0 - delta * kmax >= 0.5, "J bound within delta");
    }

    #[test]
    fn cutoff_shape_and_derivative_bound() {
        let delta = 0.3;
        let z = CutoffZeta::new(delta);
        assert_eq!(z.eval(0.0), 1.0);
        assert_eq!(z.eval(2.0 * delta), 0.0);
        assert_eq!(z.eval(delta), 1.0);
        assert_eq!(z.eval(-5.0), 0.0);
        let mut worst = 0.0f64;
        for i in 0..=4000 {
            let zz = -2.5 * delta + 5.0 * delta * i as f64 / 4000.0;
            let v = -zz * z.derivative(zz);
            assert!(v >= -1e-12, "sign violation at {zz}: {v}");
            worst = worst.max(v);
        }
        assert!(worst <= 4.0, "derivative bound {worst}");
    }

    #[test]
    fn degenerate_and_intersecting_rejected() {
        let tiny: Vec<Point> = (0..20).map(|_| [0.0, 0.0]).collect();
        assert!(Curve::from_points(tiny, 32).is_err());
        let eight: Vec<Point> = (0..64)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
                [t.sin(), t.sin() * t.cos()]
            })
            .collect();
        assert!(matches!(Curve::from_points(eight, 64), Err(Error::DegenerateCurve { .. })));
    }

    #[test]
    fn union_projection_two_circles() {
        let a = Curve::circle([-1.0, 0.0], 0.5, 128);
        let b = Curve::circle([1.0, 0.0], 0.5, 128);
        let curves = vec![a, b];
        let (idx, tc) = project_union(&curves, [1.2, 0.0], 0.4).unwrap();
        assert_eq!(idx, 1);
        assert!((tc.r - 0.3).abs() < 1e-8);
        let (idx, tc) = project_union(&curves, [-1.8, 0.0], 0.4).unwrap();
        assert_eq!(idx, 0);
        assert!((tc.r + 0.3).abs() < 1e-8);
    }

    proptest::proptest! {
        #[test]
        fn projection_distance_consistent(ang in 0.0f64..6.28, rad in 0.05f64..1.9) {
            let c = Curve::circle([0.0, 0.0], 1.0, 128);
            let x = [rad * ang.cos(), rad * ang.sin()];
            if let Ok(tc) = c.project(x, 0.5) {
                let exact = 1.0 - rad;
                proptest::prop_assert!((tc.r - exact).abs() < 1e-6);
            }
        }
    }
}
