//! One-dimensional transversal layer structure: the heteroclinic profile
//! theta0, the bounded corrector theta1, the first-order inner coefficient
//! c1 = lambda0 * theta1, the linearized operator L v = -v'' + f''(theta0) v,
//! and the solvability (orthogonality) integral against theta0'.

use crate::error::{Error, Result};
use crate::numerics::{solve_tridiagonal, trapezoid};
use crate::potential::Potential;

/// Tabulated transversal profiles on a uniform grid over [-L, L].
#[derive(Debug, Clone)]
pub struct ProfileTable {
    pub pot: Potential,
    /// truncation radius
    pub length: f64,
    /// grid spacing
    pub drho: f64,
    pub rho: Vec<f64>,
    pub theta0: Vec<f64>,
    pub theta0_prime: Vec<f64>,
    pub theta1: Vec<f64>,
    /// c1 = lambda0 * theta1; empty until `solve_c1` runs
    pub c1: Vec<f64>,
    pub lambda0_used: Option<f64>,
    /// tail decay rate min sqrt(f''(+-1))
    pub alpha: f64,
    /// int theta0'^2 drho
    pub sigma: f64,
    analytic_tanh: bool,
}

pub const DEFAULT_LENGTH: f64 = 20.0;
pub const DEFAULT_DRHO: f64 = 0.01;

impl ProfileTable {
    pub fn n(&self) -> usize {
        self.rho.len()
    }

    fn index_of_zero(&self) -> usize {
        self.n() / 2
    }

    /// theta0 at an arbitrary stretched coordinate; analytic tanh for the
    /// standard quartic, clamped cubic interpolation otherwise.
    pub fn theta0_at(&self, rho: f64) -> f64 {
        if self.analytic_tanh {
            (0.5 * rho).tanh()
        } else if rho <= -self.length {
            -1.0
        } else if rho >= self.length {
            1.0
        } else {
            cubic_interp(&self.rho, &self.theta0, self.drho, rho)
        }
    }

    pub fn theta0_prime_at(&self, rho: f64) -> f64 {
        if self.analytic_tanh {
            let s = 1.0 / (0.5 * rho).cosh();
            0.5 * s * s
        } else if rho.abs() >= self.length {
            0.0
        } else {
            cubic_interp(&self.rho, &self.theta0_prime, self.drho, rho)
        }
    }

    /// theta1 at an arbitrary stretched coordinate, saturating at the
    /// far-field limits 1/f''(+-1).
    pub fn theta1_at(&self, rho: f64) -> f64 {
        if rho <= -self.length {
            1.0 / self.pot.eval(-1.0).d2f
        } else if rho >= self.length {
            1.0 / self.pot.eval(1.0).d2f
        } else {
            cubic_interp(&self.rho, &self.theta1, self.drho, rho)
        }
    }
}

fn cubic_interp(grid: &[f64], values: &[f64], h: f64, x: f64) -> f64 {
    let n = grid.len();
    let t = (x - grid[0]) / h;
    let i = (t.floor() as isize).clamp(1, n as isize - 3) as usize;
    let s = t - i as f64;
    let (ym1, y0, y1, y2) = (values[i - 1], values[i], values[i + 1], values[i + 2]);
    // Catmull-Rom
    y0 + 0.5
        * s
        * (y1 - ym1 + s * (2.0 * ym1 - 5.0 * y0 + 4.0 * y1 - y2 + s * (3.0 * (y0 - y1) + y2 - ym1)))
}

/// Solve the profile ODE -theta0'' + f'(theta0) = 0, theta0(0) = 0,
/// theta0(+-inf) = +-1, on the truncated grid.
///
/// For the standard quartic the solution tanh(rho/2) is exact; for user
/// polynomials the first integral theta0' = sqrt(2 f(theta0)) is integrated
/// with RK4 from the origin.
pub fn solve_theta0(pot: &Potential, length: f64, drho: f64) -> Result<ProfileTable> {
    assert!(length >= 10.0, "truncation radius must be >= 10");
    assert!(drho <= 0.05, "grid spacing must be <= 0.05");
    pot.validate()?;

    let half = (length / drho).round() as usize;
    let n = 2 * half + 1;
    let rho: Vec<f64> = (0..n).map(|i| (i as isize - half as isize) as f64 * drho).collect();

    let analytic = matches!(pot, Potential::StandardQuartic);
    let mut theta0 = vec![0.0; n];
    let mut theta0_prime = vec![0.0; n];

    if analytic {
        for i in 0..n {
            theta0[i] = (0.5 * rho[i]).tanh();
            let s = 1.0 / (0.5 * rho[i]).cosh();
            theta0_prime[i] = 0.5 * s * s;
        }
    } else {
        // check f > 0 strictly between the wells so the first integral
        // defines a heteroclinic
        for k in 1..2000 {
            let s = -1.0 + 2.0 * k as f64 / 2000.0;
            if s.abs() < 1.0 - 1e-9 && pot.eval(s).f <= 0.0 {
                return Err(Error::NoHeteroclinic { at: s });
            }
        }
        let speed = |th: f64| (2.0 * pot.eval(th.clamp(-1.0, 1.0)).f).max(0.0).sqrt();
        // integrate upward from the origin with RK4 on theta' = sqrt(2 f)
        let mut th = 0.0;
        theta0[half] = 0.0;
        for i in half..n - 1 {
            let k1 = speed(th);
            let k2 = speed(th + 0.5 * drho * k1);
            let k3 = speed(th + 0.5 * drho * k2);
            let k4 = speed(th + drho * k3);
            th += drho / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            th = th.min(1.0);
            theta0[i + 1] = th;
        }
        for i in 0..half {
            theta0[i] = -theta0[n - 1 - i];
        }
        for i in 0..n {
            theta0_prime[i] = speed(theta0[i]);
        }
    }

    let alpha = pot.decay_rate();
    let sigma = trapezoid(&theta0_prime.iter().map(|v| v * v).collect::<Vec<_>>(), drho);

    Ok(ProfileTable {
        pot: pot.clone(),
        length,
        drho,
        rho,
        theta0,
        theta0_prime,
        theta1: Vec::new(),
        c1: Vec::new(),
        lambda0_used: None,
        alpha,
        sigma,
        analytic_tanh: analytic,
    })
}

/// Solve the corrector equation
/// -theta1'' + f''(theta0) theta1 = 1 - (2/sigma) theta0'
/// with theta1(0) = 0 and far-field values 1/f''(+-1).
///
/// The pinning at the origin removes the translation kernel; by evenness of
/// the data the problem is solved on [0, L] with Dirichlet ends and
/// reflected. A Numerov (fourth-order compact) discretization keeps the
/// solution error at O(drho^4), below the residual contract.
pub fn solve_theta1(table: &mut ProfileTable) -> Result<()> {
    let n = table.n();
    let half = table.index_of_zero();
    let drho = table.drho;
    let sigma = table.sigma;
    let m = n - half; // nodes on [0, L], including both ends

    // interior unknowns: indices 1..m-1 of the half grid
    let ni = m - 2;
    if ni == 0 {
        return Err(Error::SingularSystem);
    }
    let far = 1.0 / table.pot.eval(1.0).d2f;
    let h2 = drho * drho;
    let q = |i: usize| table.pot.eval(table.theta0[i]).d2f;
    let g = |i: usize| 1.0 - (2.0 / sigma) * table.theta0_prime[i];

    // Numerov for theta'' = q theta - g:
    // (1 - h^2 q_{i-1}/12)(-theta_{i-1}) + (2 + 10 h^2 q_i/12) theta_i
    //   + (1 - h^2 q_{i+1}/12)(-theta_{i+1})
    //   = h^2 (g_{i-1} + 10 g_i + g_{i+1}) / 12
    let coeff = |i: usize| 1.0 - h2 * q(i) / 12.0;
    let mut lower = vec![0.0; ni - 1];
    let mut upper = vec![0.0; ni - 1];
    let mut diag = vec![0.0; ni];
    let mut rhs = vec![0.0; ni];
    for k in 0..ni {
        let i = half + 1 + k;
        diag[k] = 2.0 + 10.0 * h2 * q(i) / 12.0;
        rhs[k] = h2 * (g(i - 1) + 10.0 * g(i) + g(i + 1)) / 12.0;
        if k > 0 {
            lower[k - 1] = -coeff(i - 1);
        }
        if k < ni - 1 {
            upper[k] = -coeff(i + 1);
        }
    }
    // boundary lifts: theta1(0) = 0 (adds nothing), theta1(L) = far
    rhs[ni - 1] += coeff(n - 1) * far;
    if !diag.iter().all(|d| d.is_finite() && d.abs() > 1e-14) {
        return Err(Error::SingularSystem);
    }
    let sol = solve_tridiagonal(&lower, &diag, &upper, &rhs);

    let mut theta1 = vec![0.0; n];
    theta1[half] = 0.0;
    for k in 0..ni {
        theta1[half + 1 + k] = sol[k];
    }
    theta1[n - 1] = far;
    for i in 0..half {
        theta1[i] = theta1[n - 1 - i];
    }
    table.theta1 = theta1;
    Ok(())
}

/// Apply L v = -v'' + f''(theta0) v by central differences
/// (one-sided second differences at the truncation ends).
pub fn apply_linearized(table: &ProfileTable, v: &[f64]) -> Result<Vec<f64>> {
    let n = table.n();
    if v.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: v.len() });
    }
    let inv_h2 = 1.0 / (table.drho * table.drho);
    let mut out = vec![0.0; n];
    for i in 0..n {
        let vpp = if i == 0 {
            (v[0] - 2.0 * v[1] + v[2]) * inv_h2
        } else if i == n - 1 {
            (v[n - 3] - 2.0 * v[n - 2] + v[n - 1]) * inv_h2
        } else {
            (v[i - 1] - 2.0 * v[i] + v[i + 1]) * inv_h2
        };
        out[i] = -vpp + table.pot.eval(table.theta0[i]).d2f * v[i];
    }
    Ok(out)
}

/// Solvability integral int h theta0' drho (trapezoid).
pub fn check_solvability(table: &ProfileTable, h: &[f64]) -> Result<f64> {
    if h.len() != table.n() {
        return Err(Error::ShapeMismatch { expected: table.n(), got: h.len() });
    }
    let prod: Vec<f64> = h.iter().zip(&table.theta0_prime).map(|(a, b)| a * b).collect();
    Ok(trapezoid(&prod, table.drho))
}

/// Set c1 = lambda0 * theta1 and verify the first-order inner ODE residual
/// (fourth-order stencil, so the measure reflects the identity rather than
/// the stencil's own truncation).
///
/// Returns the max-norm residual of
/// c1'' - f''(theta0) c1 + (1 - (2/sigma) theta0') lambda0.
pub fn solve_c1(table: &mut ProfileTable, lambda0: f64) -> Result<f64> {
    assert!(!table.theta1.is_empty(), "theta1 must be solved first");
    table.c1 = table.theta1.iter().map(|&t| lambda0 * t).collect();
    table.lambda0_used = Some(lambda0);
    Ok(lambda0.abs() * theta1_residual_fine(table))
}

/// Max-norm residual of the theta0 equation: second difference vs f'.
pub fn theta0_residual(table: &ProfileTable) -> f64 {
    let inv_h2 = 1.0 / (table.drho * table.drho);
    let mut worst = 0.0f64;
    for i in 1..table.n() - 1 {
        let d2 = (table.theta0[i - 1] - 2.0 * table.theta0[i] + table.theta0[i + 1]) * inv_h2;
        let r = -d2 + table.pot.eval(table.theta0[i]).df;
        worst = worst.max(r.abs());
    }
    worst
}

fn second_diff_fourth_order(v: &[f64], i: usize, inv_h2: f64) -> f64 {
    (-v[i - 2] + 16.0 * v[i - 1] - 30.0 * v[i] + 16.0 * v[i + 1] - v[i + 2]) / 12.0 * inv_h2
}

/// theta0 residual measured with a fourth-order second difference, so the
/// stencil truncation does not mask the profile's actual ODE defect.
pub fn theta0_residual_fine(table: &ProfileTable) -> f64 {
    let inv_h2 = 1.0 / (table.drho * table.drho);
    let mut worst = 0.0f64;
    for i in 2..table.n() - 2 {
        let d2 = second_diff_fourth_order(&table.theta0, i, inv_h2);
        worst = worst.max((-d2 + table.pot.eval(table.theta0[i]).df).abs());
    }
    worst
}

/// theta1 residual under the fourth-order stencil; dominated by the
/// O(drho^2) solution error of the three-point solve.
pub fn theta1_residual_fine(table: &ProfileTable) -> f64 {
    let inv_h2 = 1.0 / (table.drho * table.drho);
    let mut worst = 0.0f64;
    for i in 2..table.n() - 2 {
        let d2 = second_diff_fourth_order(&table.theta1, i, inv_h2);
        let lhs = -d2 + table.pot.eval(table.theta0[i]).d2f * table.theta1[i];
        let rhs = 1.0 - (2.0 / table.sigma) * table.theta0_prime[i];
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// Max-norm residual of the theta1 equation away from the ends.
pub fn theta1_residual(table: &ProfileTable) -> f64 {
    let lv = apply_linearized(table, &table.theta1).expect("theta1 present");
    let mut worst = 0.0f64;
    for i in 2..table.n() - 2 {
        let rhs = 1.0 - (2.0 / table.sigma) * table.theta0_prime[i];
        worst = worst.max((lv[i] - rhs).abs());
    }
    worst
}

/// Build the full default table: theta0, theta1, sigma, alpha.
pub fn build_default(pot: &Potential) -> Result<ProfileTable> {
    let mut t = solve_theta0(pot, DEFAULT_LENGTH, DEFAULT_DRHO)?;
    solve_theta1(&mut t)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linear_fit;

    fn table() -> ProfileTable {
        build_default(&Potential::standard()).unwrap()
    }

    #[test]
    fn theta0_values_and_oddness() {
        let t = table();
        let half = t.index_of_zero();
        assert_eq!(t.theta0[half], 0.0);
        assert!((t.theta0_prime[half] - 0.5).abs() < 1e-14);
        // odd on the grid
        for i in 0..t.n() {
            assert!((t.theta0[i] + t.theta0[t.n() - 1 - i]).abs() < 1e-14);
        }
        // approaches +1 with the expected tail
        assert!((t.theta0[t.n() - 1] - 1.0).abs() <= (-t.alpha * t.length / 2.0).exp());
        // strictly increasing
        for i in 1..t.n() {
            assert!(t.theta0[i] > t.theta0[i - 1]);
        }
    }

    #[test]
    fn theta0_ode_residual_small() {
        let t = table();
        // accurate stencil certifies the profile itself
        let fine = theta0_residual_fine(&t);
        assert!(fine < 1e-9, "fine residual {fine}");
        // plain second difference shows its own O(drho^2) truncation
        assert!(theta0_residual(&t) < 5.0 * t.drho * t.drho);
    }

    #[test]
    fn theta0_table_route_for_user_polynomial() {
        // the standard quartic written as an explicit polynomial exercises
        // the quadrature/RK4 path; compare against tanh
        let pot = Potential::user_polynomial(vec![0.125, 0.0, -0.25, 0.0, 0.125]).unwrap();
        let t = solve_theta0(&pot, 20.0, 0.01).unwrap();
        let mut worst = 0.0f64;
        for i in 0..t.n() {
            worst = worst.max((t.theta0[i] - (0.5 * t.rho[i]).tanh()).abs());
        }
        assert!(worst < 1e-8, "worst {worst}");
        assert!((t.sigma - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn sigma_rho_side_matches_c_side() {
        let t = table();
        let c_side = crate::potential::sigma_from_potential(&t.pot).unwrap();
        assert!((t.sigma - 2.0 / 3.0).abs() < 1e-8, "rho-side {}", t.sigma);
        assert!((t.sigma - c_side).abs() < 1e-8);
    }

    #[test]
    fn theta0_prime_integrals() {
        let t = table();
        let total = trapezoid(&t.theta0_prime, t.drho);
        assert!((total - 2.0).abs() < 1e-8, "int theta0' = {total}");
        assert!((t.sigma - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn theta1_far_field_even_and_residual() {
        let t = table();
        let far = t.theta1[t.n() - 1];
        assert!((far - 1.0).abs() < 1e-4, "theta1(L) = {far}");
        for i in 0..t.n() {
            assert!((t.theta1[i] - t.theta1[t.n() - 1 - i]).abs() < 1e-10);
        }
        let fine = theta1_residual_fine(&t);
        assert!(fine < 1e-6, "fine residual {fine}");
        // the plain 3-point measure carries its own O(drho^2) truncation
        assert!(theta1_residual(&t) < 1e-4, "coarse residual {}", theta1_residual(&t));
    }

    #[test]
    fn orthogonality_relation() {
        // int theta0'^2 f'''(theta0) theta1 = 0
        let t = table();
        let integrand: Vec<f64> = (0..t.n())
            .map(|i| {
                t.theta0_prime[i] * t.theta0_prime[i] * t.pot.eval(t.theta0[i]).d3f * t.theta1[i]
            })
            .collect();
        let v = trapezoid(&integrand, t.drho);
        assert!(v.abs() < 1e-8, "orthogonality integral = {v}");
    }

    #[test]
    fn linearized_kernel_and_theta1_rhs() {
        let t = table();
        let lv = apply_linearized(&t, &t.theta0_prime).unwrap();
        let mut worst = 0.0f64;
        for i in 2..t.n() - 2 {
            worst = worst.max(lv[i].abs());
        }
        // translation mode: residual O(drho^2)
        assert!(worst < 5.0 * t.drho * t.drho, "kernel residual {worst}");
        // zero maps to zero
        let z = apply_linearized(&t, &vec![0.0; t.n()]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        // wrong shape rejected
        assert!(apply_linearized(&t, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn solvability_examples() {
        let t = table();
        // h = 1 - (2/sigma) theta0' integrates to 2 - 2 = 0 against theta0'
        let h1: Vec<f64> =
            t.theta0_prime.iter().map(|&p| 1.0 - (2.0 / t.sigma) * p).collect();
        assert!(check_solvability(&t, &h1).unwrap().abs() < 1e-8);
        // h = theta0'' is odd against the even theta0'
        let mut h2 = vec![0.0; t.n()];
        for i in 1..t.n() - 1 {
            h2[i] = (t.theta0[i + 1] - 2.0 * t.theta0[i] + t.theta0[i - 1]) / (t.drho * t.drho);
        }
        assert!(check_solvability(&t, &h2).unwrap().abs() < 1e-10);
        // h = theta0' gives sigma
        let s = check_solvability(&t, &t.theta0_prime.clone()).unwrap();
        assert!((s - t.sigma).abs() < 1e-12);
    }

    #[test]
    fn c1_identity_and_limits() {
        let mut t = table();
        let resid = solve_c1(&mut t, 0.0).unwrap();
        assert!(t.c1.iter().all(|&v| v == 0.0));
        assert!(resid < 1e-12);
        let lam = 1.0 / 3.0;
        let resid = solve_c1(&mut t, lam).unwrap();
        assert!(resid < 1e-6, "c1 residual {resid}");
        let far = t.c1[t.n() - 1];
        assert!((far - lam).abs() < 1e-4, "c1(L) = {far}");
        for i in 0..t.n() {
            assert!((t.c1[i] - t.c1[t.n() - 1 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn residual_richardson_order_two() {
        // halving drho should drop both ODE residuals by about 4
        let pot = Potential::standard();
        let mut slopes = Vec::new();
        let mut hs = Vec::new();
        for &dr in &[0.04, 0.02, 0.01] {
            let mut t = solve_theta0(&pot, 20.0, dr).unwrap();
            solve_theta1(&mut t).unwrap();
            hs.push(dr.ln());
            slopes.push(theta1_residual_fine(&t).ln());
        }
        let (rate, _, _) = linear_fit(&hs, &slopes);
        assert!(rate >= 1.9, "theta1 residual order {rate}");
        let mut hs0 = Vec::new();
        let mut rs0 = Vec::new();
        for &dr in &[0.04, 0.02, 0.01] {
            let t = solve_theta0(&pot, 20.0, dr).unwrap();
            hs0.push(dr.ln());
            rs0.push(theta0_residual(&t).ln());
        }
        let (rate0, _, _) = linear_fit(&hs0, &rs0);
        assert!(rate0 >= 1.9, "theta0 residual order {rate0}");
    }

    #[test]
    fn tail_decay_rate() {
        let t = table();
        // fit log|theta0 - 1| ~ -alpha rho on rho in [5, 15]
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..t.n() {
            let r = t.rho[i];
            if r >= 5.0 && r <= 15.0 {
                let gap = (1.0 - t.theta0[i]).max(1e-300);
                xs.push(r);
                ys.push(gap.ln());
            }
        }
        let (slope, _, _) = linear_fit(&xs, &ys);
        let fitted_alpha = -slope;
        assert!(fitted_alpha >= 0.9 * t.alpha, "alpha fit {fitted_alpha} vs {}", t.alpha);
    }

    #[test]
    fn discrete_self_adjointness() {
        let t = table();
        let u: Vec<f64> = t.rho.iter().map(|&r| (-0.3 * r * r).exp()).collect();
        let v: Vec<f64> = t.rho.iter().map(|&r| r * (-0.25 * r * r).exp()).collect();
        let lu = apply_linearized(&t, &u).unwrap();
        let lv = apply_linearized(&t, &v).unwrap();
        let a: f64 = lu.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() * t.drho;
        let b: f64 = u.iter().zip(&lv).map(|(x, y)| x * y).sum::<f64>() * t.drho;
        assert!((a - b).abs() < 1e-8, "asymmetry {}", (a - b).abs());
    }
}
