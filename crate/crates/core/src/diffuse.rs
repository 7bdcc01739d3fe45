//! Finite-difference/spectral solver for the mass-conserving
//! Navier-Stokes/Allen-Cahn system on a rectangle.
//!
//! The order-parameter update is semi-implicit and pseudo-spectral: the
//! Laplacian is treated implicitly in transform space (FFT for periodic
//! boundaries, cosine transform for walls), convection and f' explicitly
//! with a stabilization shift, and the nonlocal mass term uses the exact
//! discrete mean of f'(c) re-anchored to the initial mass, which keeps
//! sum(c) constant to round-off for any number of steps.
//!
//! The flow solver is a classic MAC staggered scheme: explicit convection
//! and variable-viscosity diffusion, capillary forcing in the rotational
//! form -eps (Lap c) grad c, and an exact transform-based pressure
//! projection (discrete symbol), so the post-projection divergence sits at
//! the round-off floor.

use crate::error::{Error, Result};
use crate::fft::{GridTransform, LaplaceSymbol};
use crate::geometry::{project_union, Curve, CutoffZeta, Point};
use crate::numerics::pairwise_sum;
use crate::potential::Potential;
use crate::profiles::ProfileTable;
use ndarray::Array2;

/// Boundary-condition mode of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bc {
    Periodic,
    WallNeumannNoSlip,
}

/// Uniform cell-centered grid with square cells.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub bc: Bc,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, bc: Bc) -> Result<Self> {
        let g = GridSpec { nx, ny, lx, ly, bc };
        let (hx, hy) = (g.hx(), g.hy());
        if ((hx - hy) / hx).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "cells must be square: hx = {hx}, hy = {hy}"
            )));
        }
        Ok(g)
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    /// Cell-center coordinates.
    pub fn center(&self, i: usize, j: usize) -> Point {
        [(i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy()]
    }
}

/// Fields on the staggered (MAC) layout. For periodic boundaries u, v are
/// (ny, nx) with u[j][i] on the face between cells i and i+1; for walls u
/// is (ny, nx+1) and v is (ny+1, nx) with pinned zero boundary faces.
#[derive(Debug, Clone)]
pub struct DiffuseState {
    pub grid: GridSpec,
    pub c: Array2<f64>,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub p: Array2<f64>,
    pub t: f64,
    pub eps: f64,
}

/// Per-step scalar diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct Diagnostics {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub interfacial: f64,
    pub lambda_eps: f64,
    pub dissipation: f64,
    pub max_div: f64,
    pub max_abs_c: f64,
}

/// Step controls; the CFL constants mirror the solver contract.
#[derive(Debug, Clone, Copy)]
pub struct StepParams {
    pub dt: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    /// evolve the velocity (false = pure conserved Allen-Cahn)
    pub ns_enabled: bool,
    /// stabilization shift of the semi-implicit update
    pub s_stab: f64,
    pub c_adv: f64,
    pub c_diff: f64,
    pub c_ac: f64,
}

impl StepParams {
    pub fn allen_cahn(dt: f64) -> Self {
        StepParams {
            dt,
            nu_plus: 1.0,
            nu_minus: 1.0,
            ns_enabled: false,
            s_stab: 1.0,
            c_adv: 0.5,
            c_diff: 0.25,
            c_ac: 1.0,
        }
    }

    pub fn coupled(dt: f64, nu_plus: f64, nu_minus: f64) -> Self {
        StepParams { nu_plus, nu_minus, ns_enabled: true, ..StepParams::allen_cahn(dt) }
    }
}

/// Owns the state plus the transform plans and the conservation anchor.
pub struct DiffuseSolver {
    pub state: DiffuseState,
    pub pot: Potential,
    transform: GridTransform,
    /// initial mean of c: the exact conservation target
    mean0: f64,
}

impl DiffuseSolver {
    pub fn new(state: DiffuseState, pot: Potential) -> Self {
        let g = state.grid;
        let transform = GridTransform::new(g.nx, g.ny, g.lx, g.ly, matches!(g.bc, Bc::Periodic));
        let mean0 = mean(&state.c);
        DiffuseSolver { state, pot, transform, mean0 }
    }

    /// lambda_eps = mean(f'(c)) / eps.
    pub fn lambda_eps(&self) -> f64 {
        let g = self.state.c.mapv(|c| self.pot.eval(c).df);
        mean(&g) / self.state.eps
    }

    /// One time step; returns post-step diagnostics.
    pub fn step(&mut self, params: &StepParams) -> Result<Diagnostics> {
        let eps = self.state.eps;
        let h = self.state.grid.hx();
        let dt = params.dt;

        let vmax = self.max_velocity();
        if vmax > 0.0 && dt > params.c_adv * h / vmax {
            return Err(Error::CflViolation { dt, limit: params.c_adv * h / vmax });
        }
        let numax = params.nu_plus.max(params.nu_minus);
        if params.ns_enabled && dt > params.c_diff * h * h * (1.0 / numax).min(1.0) {
            return Err(Error::CflViolation {
                dt,
                limit: params.c_diff * h * h * (1.0 / numax).min(1.0),
            });
        }
        if dt > params.c_ac * eps * eps / params.s_stab {
            return Err(Error::CflViolation {
                dt,
                limit: params.c_ac * eps * eps / params.s_stab,
            });
        }

        self.allen_cahn_update(params)?;
        if params.ns_enabled {
            self.navier_stokes_update(params)?;
        }
        self.state.t += dt;
        Ok(self.diagnostics(params))
    }

    fn max_velocity(&self) -> f64 {
        let mu = self.state.u.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let mv = self.state.v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        mu.max(mv)
    }

    /// Semi-implicit stabilized conserved Allen-Cahn update.
    fn allen_cahn_update(&mut self, params: &StepParams) -> Result<()> {
        let eps = self.state.eps;
        let g = self.state.grid;
        let (nx, ny) = (g.nx, g.ny);
        let dt = params.dt;
        let a = 1.0 / dt + params.s_stab / (eps * eps);

        let fp = self.state.c.mapv(|c| self.pot.eval(c).df);
        let fp_mean = mean(&fp);
        let conv = if self.max_velocity() > 0.0 {
            advect_scalar(&self.state)
        } else {
            Array2::zeros((ny, nx))
        };

        let inv_e2 = 1.0 / (eps * eps);
        let mut rhs = Array2::zeros((ny, nx));
        for j in 0..ny {
            for i in 0..nx {
                rhs[(j, i)] =
                    a * self.state.c[(j, i)] - inv_e2 * (fp[(j, i)] - fp_mean) - conv[(j, i)];
            }
        }
        // re-anchor the zero mode on the conserved target: absorbs the
        // round-off of the mean and of the advective fluxes into the
        // multiplier (a shift of order machine epsilon)
        let correction = a * self.mean0 - mean(&rhs);
        rhs.mapv_inplace(|v| v + correction);

        self.state.c = self.transform.solve_helmholtz(&rhs, a, LaplaceSymbol::Spectral);
        Ok(())
    }

    /// Explicit MAC momentum update with exact projection.
    fn navier_stokes_update(&mut self, params: &StepParams) -> Result<()> {
        let eps = self.state.eps;
        let g = self.state.grid;
        let dt = params.dt;
        let nu = self.state.c.mapv(|c| {
            params.nu_minus
                + (params.nu_plus - params.nu_minus) * ((c + 1.0) * 0.5).clamp(0.0, 1.0)
        });
        let lap_c = five_point_laplacian(&self.state.c, g);
        let (fu, fv) = momentum_rhs(&self.state, &nu, &lap_c, eps);

        match g.bc {
            Bc::Periodic => {
                for j in 0..g.ny {
                    for i in 0..g.nx {
                        self.state.u[(j, i)] += dt * fu[(j, i)];
                        self.state.v[(j, i)] += dt * fv[(j, i)];
                    }
                }
            }
            Bc::WallNeumannNoSlip => {
                for j in 0..g.ny {
                    for i in 1..g.nx {
                        self.state.u[(j, i)] += dt * fu[(j, i)];
                    }
                }
                for j in 1..g.ny {
                    for i in 0..g.nx {
                        self.state.v[(j, i)] += dt * fv[(j, i)];
                    }
                }
            }
        }
        self.project()?;
        Ok(())
    }

    /// Exact discrete projection; leaves the divergence at round-off.
    pub fn project(&mut self) -> Result<()> {
        let div = divergence(&self.state);
        let mut rhs = div.mapv(|v| -v);
        let m = mean(&rhs);
        rhs.mapv_inplace(|v| v - m);
        // (0 - Lap) phi = -div  =>  Lap phi = div(u*)
        let phi = self.transform.solve_helmholtz(&rhs, 0.0, LaplaceSymbol::Discrete);
        subtract_gradient(&mut self.state, &phi);
        self.state.p = phi;
        let resid = divergence(&self.state).iter().fold(0.0f64, |mx, &d| mx.max(d.abs()));
        if resid > 1e-8 {
            return Err(Error::ProjectionDiverged { residual: resid, iters: 1 });
        }
        Ok(())
    }

    /// Scalar diagnostics of the current state.
    pub fn diagnostics(&mut self, params: &StepParams) -> Diagnostics {
        let eps = self.state.eps;
        let cell = self.state.grid.cell_area();
        let mass = pairwise_sum(self.state.c.as_slice().unwrap()) * cell;
        let fvals: Vec<f64> = self.state.c.iter().map(|&c| self.pot.eval(c).f).collect();
        let bulk = pairwise_sum(&fvals) * cell / eps;
        let grad = self.transform.grad_sq_integral(&self.state.c);
        let interfacial = 0.5 * eps * grad + bulk;
        let kinetic = 0.5
            * cell
            * (self.state.u.iter().map(|&x| x * x).sum::<f64>()
                + self.state.v.iter().map(|&x| x * x).sum::<f64>());
        let lambda_eps = self.lambda_eps();
        let mu = self.mu_field();
        let mu2 = mu.iter().map(|&m| m * m).sum::<f64>() * cell / eps;
        let nu = self.state.c.mapv(|c| {
            params.nu_minus
                + (params.nu_plus - params.nu_minus) * ((c + 1.0) * 0.5).clamp(0.0, 1.0)
        });
        let visc_diss = viscous_dissipation(&self.state, &nu);
        let max_div = divergence(&self.state).iter().fold(0.0f64, |mx, &d| mx.max(d.abs()));
        let max_abs_c = self.state.c.iter().fold(0.0f64, |mx, &c| mx.max(c.abs()));
        Diagnostics {
            t: self.state.t,
            mass,
            energy: kinetic + interfacial,
            kinetic,
            interfacial,
            lambda_eps,
            dissipation: visc_diss + mu2,
            max_div,
            max_abs_c,
        }
    }

    /// mu = -eps Lap c + f'(c)/eps - mean(f'(c))/eps with the solver's
    /// spectral Laplacian.
    pub fn mu_field(&mut self) -> Array2<f64> {
        let eps = self.state.eps;
        let lap = self.transform.laplacian(&self.state.c, LaplaceSymbol::Spectral);
        let fp = self.state.c.mapv(|c| self.pot.eval(c).df);
        let fp_mean = mean(&fp);
        let (ny, nx) = (self.state.grid.ny, self.state.grid.nx);
        Array2::from_shape_fn((ny, nx), |(j, i)| {
            -eps * lap[(j, i)] + (fp[(j, i)] - fp_mean) / eps
        })
    }

    pub fn mean0(&self) -> f64 {
        self.mean0
    }
}

fn mean(a: &Array2<f64>) -> f64 {
    pairwise_sum(a.as_slice().unwrap()) / a.len() as f64
}

/// div(v c) in conservative flux form; zero wall fluxes for the wall mode.
fn advect_scalar(st: &DiffuseState) -> Array2<f64> {
    let g = st.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let c = &st.c;
    let mut out = Array2::zeros((ny, nx));
    match g.bc {
        Bc::Periodic => {
            for j in 0..ny {
                for i in 0..nx {
                    let ip = (i + 1) % nx;
                    let im = (i + nx - 1) % nx;
                    let jp = (j + 1) % ny;
                    let jm = (j + ny - 1) % ny;
                    let fxp = st.u[(j, i)] * 0.5 * (c[(j, i)] + c[(j, ip)]);
                    let fxm = st.u[(j, im)] * 0.5 * (c[(j, im)] + c[(j, i)]);
                    let fyp = st.v[(j, i)] * 0.5 * (c[(j, i)] + c[(jp, i)]);
                    let fym = st.v[(jm, i)] * 0.5 * (c[(jm, i)] + c[(j, i)]);
                    out[(j, i)] = (fxp - fxm) / hx + (fyp - fym) / hy;
                }
            }
        }
        Bc::WallNeumannNoSlip => {
            for j in 0..ny {
                for i in 0..nx {
                    let fxp = if i + 1 < nx {
                        st.u[(j, i + 1)] * 0.5 * (c[(j, i)] + c[(j, i + 1)])
                    } else {
                        0.0
                    };
                    let fxm = if i > 0 {
                        st.u[(j, i)] * 0.5 * (c[(j, i - 1)] + c[(j, i)])
                    } else {
                        0.0
                    };
                    let fyp = if j + 1 < ny {
                        st.v[(j + 1, i)] * 0.5 * (c[(j, i)] + c[(j + 1, i)])
                    } else {
                        0.0
                    };
                    let fym = if j > 0 {
                        st.v[(j, i)] * 0.5 * (c[(j - 1, i)] + c[(j, i)])
                    } else {
                        0.0
                    };
                    out[(j, i)] = (fxp - fxm) / hx + (fyp - fym) / hy;
                }
            }
        }
    }
    out
}

/// Discrete divergence at cell centers.
pub fn divergence(st: &DiffuseState) -> Array2<f64> {
    let g = st.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = Array2::zeros((ny, nx));
    match g.bc {
        Bc::Periodic => {
            for j in 0..ny {
                for i in 0..nx {
                    let im = (i + nx - 1) % nx;
                    let jm = (j + ny - 1) % ny;
                    out[(j, i)] = (st.u[(j, i)] - st.u[(j, im)]) / hx
                        + (st.v[(j, i)] - st.v[(jm, i)]) / hy;
                }
            }
        }
        Bc::WallNeumannNoSlip => {
            for j in 0..ny {
                for i in 0..nx {
                    out[(j, i)] = (st.u[(j, i + 1)] - st.u[(j, i)]) / hx
                        + (st.v[(j + 1, i)] - st.v[(j, i)]) / hy;
                }
            }
        }
    }
    out
}

fn subtract_gradient(st: &mut DiffuseState, phi: &Array2<f64>) {
    let g = st.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    match g.bc {
        Bc::Periodic => {
            for j in 0..ny {
                for i in 0..nx {
                    let ip = (i + 1) % nx;
                    let jp = (j + 1) % ny;
                    st.u[(j, i)] -= (phi[(j, ip)] - phi[(j, i)]) / hx;
                    st.v[(j, i)] -= (phi[(jp, i)] - phi[(j, i)]) / hy;
                }
            }
        }
        Bc::WallNeumannNoSlip => {
            for j in 0..ny {
                for i in 1..nx {
                    st.u[(j, i)] -= (phi[(j, i)] - phi[(j, i - 1)]) / hx;
                }
            }
            for j in 1..ny {
                for i in 0..nx {
                    st.v[(j, i)] -= (phi[(j, i)] - phi[(j - 1, i)]) / hy;
                }
            }
        }
    }
}

/// 5-point Laplacian with periodic wrap or mirror ghosts.
pub fn five_point_laplacian(c: &Array2<f64>, g: GridSpec) -> Array2<f64> {
    let (nx, ny) = (g.nx, g.ny);
    let h2 = g.hx() * g.hx();
    let mut out = Array2::zeros((ny, nx));
    let at = |j: isize, i: isize| -> f64 {
        match g.bc {
            Bc::Periodic => {
                let ii = i.rem_euclid(nx as isize) as usize;
                let jj = j.rem_euclid(ny as isize) as usize;
                c[(jj, ii)]
            }
            Bc::WallNeumannNoSlip => {
                let ii = i.clamp(0, nx as isize - 1) as usize;
                let jj = j.clamp(0, ny as isize - 1) as usize;
                c[(jj, ii)]
            }
        }
    };
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            out[(j as usize, i as usize)] =
                (at(j, i - 1) + at(j, i + 1) + at(j - 1, i) + at(j + 1, i) - 4.0 * at(j, i)) / h2;
        }
    }
    out
}

/// Momentum right-hand side on the faces:
/// -(v.grad)v + div(2 nu Dv) - eps (Lap c) grad c.
fn momentum_rhs(
    st: &DiffuseState,
    nu: &Array2<f64>,
    lap_c: &Array2<f64>,
    eps: f64,
) -> (Array2<f64>, Array2<f64>) {
    let g = st.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    match g.bc {
        Bc::Periodic => {
            let u = &st.u;
            let v = &st.v;
            let c = &st.c;
            let mut fu = Array2::zeros((ny, nx));
            let mut fv = Array2::zeros((ny, nx));
            let ip = |i: usize| (i + 1) % nx;
            let im = |i: usize| (i + nx - 1) % nx;
            let jp = |j: usize| (j + 1) % ny;
            let jm = |j: usize| (j + ny - 1) % ny;
            let nu_corner = |j: usize, i: usize| {
                0.25 * (nu[(j, i)] + nu[(j, ip(i))] + nu[(jp(j), i)] + nu[(jp(j), ip(i))])
            };
            for j in 0..ny {
                for i in 0..nx {
                    // x momentum at face (i+1/2, j)
                    let dudx = (u[(j, ip(i))] - u[(j, im(i))]) / (2.0 * hx);
                    let dudy = (u[(jp(j), i)] - u[(jm(j), i)]) / (2.0 * hy);
                    let vbar =
                        0.25 * (v[(j, i)] + v[(j, ip(i))] + v[(jm(j), i)] + v[(jm(j), ip(i))]);
                    let adv_u = u[(j, i)] * dudx + vbar * dudy;
                    let sxx_r = 2.0 * nu[(j, ip(i))] * (u[(j, ip(i))] - u[(j, i)]) / hx;
                    let sxx_l = 2.0 * nu[(j, i)] * (u[(j, i)] - u[(j, im(i))]) / hx;
                    let sxy_t = nu_corner(j, i)
                        * ((u[(jp(j), i)] - u[(j, i)]) / hy + (v[(j, ip(i))] - v[(j, i)]) / hx);
                    let sxy_b = nu_corner(jm(j), i)
                        * ((u[(j, i)] - u[(jm(j), i)]) / hy
                            + (v[(jm(j), ip(i))] - v[(jm(j), i)]) / hx);
                    let visc_u = (sxx_r - sxx_l) / hx + (sxy_t - sxy_b) / hy;
                    let lap_face = 0.5 * (lap_c[(j, i)] + lap_c[(j, ip(i))]);
                    let dcdx = (c[(j, ip(i))] - c[(j, i)]) / hx;
                    fu[(j, i)] = -adv_u + visc_u - eps * lap_face * dcdx;

                    // y momentum at face (i, j+1/2)
                    let dvdy = (v[(jp(j), i)] - v[(jm(j), i)]) / (2.0 * hy);
                    let dvdx = (v[(j, ip(i))] - v[(j, im(i))]) / (2.0 * hx);
                    let ubar =
                        0.25 * (u[(j, i)] + u[(jp(j), i)] + u[(j, im(i))] + u[(jp(j), im(i))]);
                    let adv_v = ubar * dvdx + v[(j, i)] * dvdy;
                    let syy_t = 2.0 * nu[(jp(j), i)] * (v[(jp(j), i)] - v[(j, i)]) / hy;
                    let syy_b = 2.0 * nu[(j, i)] * (v[(j, i)] - v[(jm(j), i)]) / hy;
                    let sxy_r = nu_corner(j, i)
                        * ((u[(jp(j), i)] - u[(j, i)]) / hy + (v[(j, ip(i))] - v[(j, i)]) / hx);
                    let sxy_l = nu_corner(j, im(i))
                        * ((u[(jp(j), im(i))] - u[(j, im(i))]) / hy
                            + (v[(j, i)] - v[(j, im(i))]) / hx);
                    let visc_v = (syy_t - syy_b) / hy + (sxy_r - sxy_l) / hx;
                    let lap_face_y = 0.5 * (lap_c[(j, i)] + lap_c[(jp(j), i)]);
                    let dcdy = (c[(jp(j), i)] - c[(j, i)]) / hy;
                    fv[(j, i)] = -adv_v + visc_v - eps * lap_face_y * dcdy;
                }
            }
            (fu, fv)
        }
        Bc::WallNeumannNoSlip => {
            let u = &st.u;
            let v = &st.v;
            let c = &st.c;
            let mut fu = Array2::zeros((ny, nx + 1));
            let mut fv = Array2::zeros((ny + 1, nx));
            let nu_at = |j: isize, i: isize| {
                let jj = j.clamp(0, ny as isize - 1) as usize;
                let ii = i.clamp(0, nx as isize - 1) as usize;
                nu[(jj, ii)]
            };
            // no-slip ghosts for tangential components
            let u_at = |j: isize, i: usize| -> f64 {
                if j < 0 {
                    -u[(0, i)]
                } else if j >= ny as isize {
                    -u[(ny - 1, i)]
                } else {
                    u[(j as usize, i)]
                }
            };
            let v_at = |j: usize, i: isize| -> f64 {
                if i < 0 {
                    -v[(j, 0)]
                } else if i >= nx as isize {
                    -v[(j, nx - 1)]
                } else {
                    v[(j, i as usize)]
                }
            };
            for j in 0..ny {
                for i in 1..nx {
                    let ji = j as isize;
                    let dudx = (u[(j, i + 1)] - u[(j, i - 1)]) / (2.0 * hx);
                    let dudy = (u_at(ji + 1, i) - u_at(ji - 1, i)) / (2.0 * hy);
                    let vbar =
                        0.25 * (v[(j, i - 1)] + v[(j, i)] + v[(j + 1, i - 1)] + v[(j + 1, i)]);
                    let adv_u = u[(j, i)] * dudx + vbar * dudy;
                    let sxx_r = 2.0 * nu[(j, i)] * (u[(j, i + 1)] - u[(j, i)]) / hx;
                    let sxx_l = 2.0 * nu[(j, i - 1)] * (u[(j, i)] - u[(j, i - 1)]) / hx;
                    let ii = i as isize;
                    let nu_c_t = 0.25
                        * (nu_at(ji, ii - 1) + nu_at(ji, ii) + nu_at(ji + 1, ii - 1) + nu_at(ji + 1, ii));
                    let nu_c_b = 0.25
                        * (nu_at(ji - 1, ii - 1) + nu_at(ji - 1, ii) + nu_at(ji, ii - 1) + nu_at(ji, ii));
                    let sxy_t = nu_c_t
                        * ((u_at(ji + 1, i) - u[(j, i)]) / hy
                            + (v[(j + 1, i)] - v[(j + 1, i - 1)]) / hx);
                    let sxy_b = nu_c_b
                        * ((u[(j, i)] - u_at(ji - 1, i)) / hy + (v[(j, i)] - v[(j, i - 1)]) / hx);
                    let visc_u = (sxx_r - sxx_l) / hx + (sxy_t - sxy_b) / hy;
                    let lap_face = 0.5 * (lap_c[(j, i - 1)] + lap_c[(j, i)]);
                    let dcdx = (c[(j, i)] - c[(j, i - 1)]) / hx;
                    fu[(j, i)] = -adv_u + visc_u - eps * lap_face * dcdx;
                }
            }
            for j in 1..ny {
                for i in 0..nx {
                    let ii = i as isize;
                    let ji = j as isize;
                    let dvdy = (v[(j + 1, i)] - v[(j - 1, i)]) / (2.0 * hy);
                    let dvdx = (v_at(j, ii + 1) - v_at(j, ii - 1)) / (2.0 * hx);
                    let ubar =
                        0.25 * (u[(j - 1, i)] + u[(j - 1, i + 1)] + u[(j, i)] + u[(j, i + 1)]);
                    let adv_v = ubar * dvdx + v[(j, i)] * dvdy;
                    let syy_t = 2.0 * nu[(j, i)] * (v[(j + 1, i)] - v[(j, i)]) / hy;
                    let syy_b = 2.0 * nu[(j - 1, i)] * (v[(j, i)] - v[(j - 1, i)]) / hy;
                    let nu_c_r = 0.25
                        * (nu_at(ji - 1, ii) + nu_at(ji - 1, ii + 1) + nu_at(ji, ii) + nu_at(ji, ii + 1));
                    let nu_c_l = 0.25
                        * (nu_at(ji - 1, ii - 1) + nu_at(ji - 1, ii) + nu_at(ji, ii - 1) + nu_at(ji, ii));
                    let sxy_r = nu_c_r
                        * ((u[(j, i + 1)] - u[(j - 1, i + 1)]) / hy + (v_at(j, ii + 1) - v[(j, i)]) / hx);
                    let sxy_l = nu_c_l
                        * ((u[(j, i)] - u[(j - 1, i)]) / hy + (v[(j, i)] - v_at(j, ii - 1)) / hx);
                    let visc_v = (syy_t - syy_b) / hy + (sxy_r - sxy_l) / hx;
                    let lap_face_y = 0.5 * (lap_c[(j - 1, i)] + lap_c[(j, i)]);
                    let dcdy = (c[(j, i)] - c[(j - 1, i)]) / hy;
                    fv[(j, i)] = -adv_v + visc_v - eps * lap_face_y * dcdy;
                }
            }
            (fu, fv)
        }
    }
}

fn viscous_dissipation(st: &DiffuseState, nu: &Array2<f64>) -> f64 {
    // 2 nu |Dv|^2 sampled at cell centers
    let g = st.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let mut total = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let (dudx, dvdy, dudy, dvdx) = match g.bc {
                Bc::Periodic => {
                    let im = (i + nx - 1) % nx;
                    let jm = (j + ny - 1) % ny;
                    let jp = (j + 1) % ny;
                    let ip = (i + 1) % nx;
                    (
                        (st.u[(j, i)] - st.u[(j, im)]) / hx,
                        (st.v[(j, i)] - st.v[(jm, i)]) / hy,
                        (st.u[(jp, i)] - st.u[(jm, i)]) / (2.0 * hy),
                        (st.v[(j, ip)] - st.v[(j, im)]) / (2.0 * hx),
                    )
                }
                Bc::WallNeumannNoSlip => (
                    (st.u[(j, i + 1)] - st.u[(j, i)]) / hx,
                    (st.v[(j + 1, i)] - st.v[(j, i)]) / hy,
                    0.0,
                    0.0,
                ),
            };
            let d12 = 0.5 * (dudy + dvdx);
            total += 2.0 * nu[(j, i)] * (dudx * dudx + dvdy * dvdy + 2.0 * d12 * d12);
        }
    }
    total * g.cell_area()
}

// ---------------------------------------------------------------------------
// well-prepared initial data
// ---------------------------------------------------------------------------

/// Blending half-width for a set of disjoint curves inside the rectangle:
/// delta = min over curves of min(0.4/max|kappa|, clearance/2.5), where the
/// clearance is the distance to the other curves and, for walls, to the
/// boundary of the rectangle.
pub fn blending_delta(curves: &[Curve], grid: &GridSpec) -> Result<f64> {
    let mut delta = f64::INFINITY;
    for (i, c) in curves.iter().enumerate() {
        let mut clearance = f64::INFINITY;
        if matches!(grid.bc, Bc::WallNeumannNoSlip) {
            for p in &c.points {
                clearance =
                    clearance.min(p[0]).min(grid.lx - p[0]).min(p[1]).min(grid.ly - p[1]);
            }
        }
        for (k, other) in curves.iter().enumerate() {
            if k == i {
                continue;
            }
            for p in &c.points {
                let tc = other.project(*p, f64::INFINITY)?;
                clearance = clearance.min(tc.r.abs());
            }
        }
        let d = c.tube_delta(if clearance.is_finite() { Some(clearance) } else { None })?;
        delta = delta.min(d);
    }
    Ok(delta)
}

/// Assemble the layer ansatz c = zeta(d) inner(d/eps) + (1 - zeta) bulk on
/// the grid; order 1 adds eps lambda0 theta1 inside and
/// eps lambda0 / f''(+-1) outside, then initialize zero velocity.
pub fn init_well_prepared(
    grid: GridSpec,
    curves: &[Curve],
    eps: f64,
    table: &ProfileTable,
    order: u8,
    lambda0: f64,
) -> Result<DiffuseState> {
    let delta = blending_delta(curves, &grid)?;
    init_well_prepared_with_delta(grid, curves, eps, table, order, lambda0, delta)
}

/// Same with an externally chosen blending width.
pub fn init_well_prepared_with_delta(
    grid: GridSpec,
    curves: &[Curve],
    eps: f64,
    table: &ProfileTable,
    order: u8,
    lambda0: f64,
    delta: f64,
) -> Result<DiffuseState> {
    let hx = grid.hx();
    if hx > eps / 2.0 * (1.0 + 1e-9) {
        return Err(Error::ResolutionTooCoarse { hx, limit: eps / 2.0 });
    }
    if eps > delta / 5.0 * (1.0 + 1e-9) {
        return Err(Error::TubeTooNarrow { eps, limit: delta / 5.0 });
    }
    let c = assemble_layer_field(&grid, curves, eps, table, order, lambda0, delta, None)?;
    let (u, v) = zero_velocity(&grid);
    Ok(DiffuseState { grid, c, u, v, p: Array2::zeros((grid.ny, grid.nx)), t: 0.0, eps })
}

pub fn zero_velocity(grid: &GridSpec) -> (Array2<f64>, Array2<f64>) {
    match grid.bc {
        Bc::Periodic => (Array2::zeros((grid.ny, grid.nx)), Array2::zeros((grid.ny, grid.nx))),
        Bc::WallNeumannNoSlip => {
            (Array2::zeros((grid.ny, grid.nx + 1)), Array2::zeros((grid.ny + 1, grid.nx)))
        }
    }
}

/// Shared field assembly for well-prepared data and the layer-ansatz
/// builder; `h` (if given) shifts the stretched variable, receiving the
/// nearest-curve index and foot-point parameter.
#[allow(clippy::too_many_arguments)]
pub fn assemble_layer_field(
    grid: &GridSpec,
    curves: &[Curve],
    eps: f64,
    table: &ProfileTable,
    order: u8,
    lambda0: f64,
    delta: f64,
    h: Option<&dyn Fn(usize, f64) -> f64>,
) -> Result<Array2<f64>> {
    assert!(order <= 1, "expansion orders 0 and 1 only");
    let zeta = CutoffZeta::new(delta);
    let (nx, ny) = (grid.nx, grid.ny);
    let mut c = Array2::zeros((ny, nx));
    let d2fp = table.pot.eval(1.0).d2f;
    let d2fm = table.pot.eval(-1.0).d2f;
    let far_cut = 2.0 * delta + 4.0 * grid.hx();
    for j in 0..ny {
        for i in 0..nx {
            let x = grid.center(i, j);
            let (d, s_par, curve_idx) = signed_distance_fast(curves, x, far_cut)?;
            let z = zeta.eval(d);
            let bulk_sign = if d >= 0.0 { 1.0 } else { -1.0 };
            let mut val;
            if z == 0.0 {
                val = bulk_sign;
                if order == 1 {
                    val += eps * lambda0 / if d >= 0.0 { d2fp } else { d2fm };
                }
            } else {
                let shift = h.map(|f| f(curve_idx, s_par)).unwrap_or(0.0);
                let rho = d / eps - shift;
                let mut inner = table.theta0_at(rho);
                let mut outer = bulk_sign;
                if order == 1 {
                    inner += eps * lambda0 * table.theta1_at(rho);
                    outer += eps * lambda0 / if d >= 0.0 { d2fp } else { d2fm };
                }
                val = z * inner + (1.0 - z) * outer;
            }
            c[(j, i)] = val;
        }
    }
    Ok(c)
}

/// Signed distance to the union with a far-field shortcut: beyond
/// `far_cut` only the sign matters, taken from the nearest sample's normal.
fn signed_distance_fast(curves: &[Curve], x: Point, far_cut: f64) -> Result<(f64, f64, usize)> {
    let mut best = (f64::INFINITY, 0usize, 0usize);
    for (ci, c) in curves.iter().enumerate() {
        for (pi, p) in c.points.iter().enumerate() {
            let dx = x[0] - p[0];
            let dy = x[1] - p[1];
            let d2 = dx * dx + dy * dy;
            if d2 < best.0 {
                best = (d2, ci, pi);
            }
        }
    }
    let coarse = best.0.sqrt();
    let ci = best.1;
    if coarse > far_cut {
        let c = &curves[ci];
        let p = c.points[best.2];
        let nv = c.normal_at(best.2 as f64 / c.n() as f64);
        let sign = ((x[0] - p[0]) * nv[0] + (x[1] - p[1]) * nv[1]).signum();
        return Ok((sign * coarse, best.2 as f64 / c.n() as f64, ci));
    }
    let (idx, tc) = project_union(curves, x, f64::INFINITY)?;
    Ok((tc.r, tc.s, idx))
}

// ---------------------------------------------------------------------------
// zero-level extraction (marching squares)
// ---------------------------------------------------------------------------

/// One connected component of the zero level set.
#[derive(Debug, Clone)]
pub struct LevelSetComponent {
    pub points: Vec<Point>,
    pub closed: bool,
}

/// Extract the zero level set of the cell-centered field by marching
/// squares with linear interpolation on the cell-center lattice. Closed
/// loops are oriented so the positive phase is enclosed; open chains
/// (interfaces reaching the lattice boundary) are returned as-is.
pub fn extract_zero_level(grid: &GridSpec, c: &Array2<f64>) -> Result<Vec<LevelSetComponent>> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut has_pos = false;
    let mut has_neg = false;
    for &v in c.iter() {
        has_pos |= v > 0.0;
        has_neg |= v < 0.0;
    }
    if !(has_pos && has_neg) {
        return Err(Error::NoInterface);
    }

    // edge keys on the cell-center lattice: (0, j, i) is the horizontal
    // edge (j,i)-(j,i+1), (1, j, i) the vertical edge (j,i)-(j+1,i)
    type EdgeKey = (u8, usize, usize);
    let crossing = |a: f64, b: f64| -> Option<f64> {
        if (a > 0.0) != (b > 0.0) {
            Some(a / (a - b))
        } else {
            None
        }
    };
    let edge_point = |key: EdgeKey| -> Point {
        let (kind, j, i) = key;
        let p0 = grid.center(i, j);
        match kind {
            0 => {
                let t = crossing(c[(j, i)], c[(j, i + 1)]).unwrap();
                [p0[0] + t * grid.hx(), p0[1]]
            }
            _ => {
                let t = crossing(c[(j, i)], c[(j + 1, i)]).unwrap();
                [p0[0], p0[1] + t * grid.hy()]
            }
        }
    };

    let mut links: std::collections::HashMap<EdgeKey, Vec<EdgeKey>> =
        std::collections::HashMap::new();
    let link = |a: EdgeKey,
                    b: EdgeKey,
                    links: &mut std::collections::HashMap<EdgeKey, Vec<EdgeKey>>| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v0 = c[(j, i)];
            let v1 = c[(j, i + 1)];
            let v2 = c[(j + 1, i + 1)];
            let v3 = c[(j + 1, i)];
            let bottom: EdgeKey = (0, j, i);
            let top: EdgeKey = (0, j + 1, i);
            let left: EdgeKey = (1, j, i);
            let right: EdgeKey = (1, j, i + 1);
            let mut idx = 0u8;
            if v0 > 0.0 {
                idx |= 1;
            }
            if v1 > 0.0 {
                idx |= 2;
            }
            if v2 > 0.0 {
                idx |= 4;
            }
            if v3 > 0.0 {
                idx |= 8;
            }
            match idx {
                0 | 15 => {}
                1 | 14 => link(bottom, left, &mut links),
                2 | 13 => link(bottom, right, &mut links),
                3 | 12 => link(left, right, &mut links),
                4 | 11 => link(top, right, &mut links),
                6 | 9 => link(bottom, top, &mut links),
                7 | 8 => link(top, left, &mut links),
                5 | 10 => {
                    // saddle: resolved by the center mean
                    let center = 0.25 * (v0 + v1 + v2 + v3);
                    let pos_center = center > 0.0;
                    if (idx == 5) == pos_center {
                        link(bottom, right, &mut links);
                        link(top, left, &mut links);
                    } else {
                        link(bottom, left, &mut links);
                        link(top, right, &mut links);
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let mut visited: std::collections::HashSet<EdgeKey> = std::collections::HashSet::new();
    let mut components = Vec::new();
    let mut keys: Vec<EdgeKey> = links.keys().copied().collect();
    keys.sort_unstable();
    for start in keys {
        if visited.contains(&start) {
            continue;
        }
        // walk to a chain end if one exists; otherwise it is a loop
        let mut begin = start;
        {
            let mut cur = start;
            let mut prev: Option<EdgeKey> = None;
            for _ in 0..links.len() + 1 {
                let nbrs = &links[&cur];
                if nbrs.len() == 1 {
                    begin = cur;
                    break;
                }
                let next = nbrs.iter().find(|&&k| Some(k) != prev).copied();
                match next {
                    Some(nk) if nk != start => {
                        prev = Some(cur);
                        cur = nk;
                    }
                    _ => {
                        begin = start;
                        break;
                    }
                }
            }
        }
        let mut chain = vec![begin];
        visited.insert(begin);
        let mut prev: Option<EdgeKey> = None;
        let mut cur = begin;
        let closed;
        loop {
            let nbrs = &links[&cur];
            let next =
                nbrs.iter().find(|&&k| Some(k) != prev && !visited.contains(&k)).copied();
            match next {
                Some(nk) => {
                    visited.insert(nk);
                    chain.push(nk);
                    prev = Some(cur);
                    cur = nk;
                }
                None => {
                    closed = nbrs.contains(&begin) && chain.len() > 2;
                    break;
                }
            }
        }
        let pts: Vec<Point> = chain.iter().map(|&k| edge_point(k)).collect();
        components.push(LevelSetComponent { points: pts, closed });
    }
    for comp in &mut components {
        if comp.closed {
            orient_positive_inside(grid, c, comp);
        }
    }
    components.sort_by(|a, b| b.points.len().cmp(&a.points.len()));
    Ok(components)
}

fn orient_positive_inside(grid: &GridSpec, c: &Array2<f64>, comp: &mut LevelSetComponent) {
    // sample the field at the centroid; the interfaces in scope are
    // star-shaped so the centroid lies inside
    let n = comp.points.len() as f64;
    let cx = comp.points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = comp.points.iter().map(|p| p[1]).sum::<f64>() / n;
    let i = ((cx / grid.hx() - 0.5).round() as isize).clamp(0, grid.nx as isize - 1) as usize;
    let j = ((cy / grid.hy() - 0.5).round() as isize).clamp(0, grid.ny as isize - 1) as usize;
    let inside_positive = c[(j, i)] > 0.0;
    let mut area = 0.0;
    for k in 0..comp.points.len() {
        let a = comp.points[k];
        let b = comp.points[(k + 1) % comp.points.len()];
        area += a[0] * b[1] - b[0] * a[1];
    }
    let ccw = area > 0.0;
    if ccw != inside_positive {
        comp.points.reverse();
    }
}

/// Convert a closed component to an equal-arclength curve.
pub fn component_to_curve(comp: &LevelSetComponent, n_samples: usize) -> Result<Curve> {
    if !comp.closed {
        return Err(Error::InvalidConfig("open level-set component".into()));
    }
    Curve::from_points(comp.points.clone(), n_samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::build_default;

    fn quartic_table() -> ProfileTable {
        build_default(&Potential::standard()).unwrap()
    }

    fn circle_state(bc: Bc) -> DiffuseState {
        let grid = GridSpec::new(128, 128, 1.0, 1.0, bc).unwrap();
        let curve = Curve::circle([0.5, 0.5], 0.25, 256);
        let table = quartic_table();
        init_well_prepared(grid, &[curve], 0.02, &table, 0, 0.0).unwrap()
    }

    #[test]
    fn init_values_at_center_and_corner() {
        let st = circle_state(Bc::Periodic);
        let g = st.grid;
        let (ic, jc) = (g.nx / 2, g.ny / 2);
        assert!((st.c[(jc, ic)] - 1.0).abs() < 1e-6, "center {}", st.c[(jc, ic)]);
        assert!((st.c[(0, 0)] + 1.0).abs() < 1e-6, "corner {}", st.c[(0, 0)]);
    }

    #[test]
    fn init_matches_tanh_along_ray() {
        let st = circle_state(Bc::Periodic);
        let g = st.grid;
        let eps = st.eps;
        let jc = g.ny / 2;
        let mut checked = 0;
        for i in 0..g.nx {
            let x = g.center(i, jc);
            let d = 0.25 - ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
            if d.abs() <= 0.1 {
                let expect = (d / (2.0 * eps)).tanh();
                assert!(
                    (st.c[(jc, i)] - expect).abs() < 1e-4,
                    "at d={d}: {} vs {expect}",
                    st.c[(jc, i)]
                );
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn init_order1_reduces_to_order0_for_zero_lambda() {
        let grid = GridSpec::new(128, 128, 1.0, 1.0, Bc::Periodic).unwrap();
        let curve = Curve::circle([0.5, 0.5], 0.25, 256);
        let table = quartic_table();
        let s0 = init_well_prepared(grid, &[curve.clone()], 0.02, &table, 0, 0.0).unwrap();
        let s1 = init_well_prepared(grid, &[curve], 0.02, &table, 1, 0.0).unwrap();
        let diff = (&s0.c - &s1.c).iter().fold(0.0f64, |m, &d| m.max(d.abs()));
        assert!(diff < 1e-14, "order flag changed field by {diff}");
    }

    #[test]
    fn init_guards() {
        let table = quartic_table();
        let curve = Curve::circle([0.5, 0.5], 0.25, 128);
        let coarse = GridSpec::new(32, 32, 1.0, 1.0, Bc::Periodic).unwrap();
        assert!(matches!(
            init_well_prepared(coarse, &[curve.clone()], 0.02, &table, 0, 0.0),
            Err(Error::ResolutionTooCoarse { .. })
        ));
        let fine = GridSpec::new(256, 256, 1.0, 1.0, Bc::Periodic).unwrap();
        assert!(matches!(
            init_well_prepared(fine, &[curve], 0.05, &table, 0, 0.0),
            Err(Error::TubeTooNarrow { .. })
        ));
    }

    #[test]
    fn mass_exactly_conserved_short_run() {
        for bc in [Bc::Periodic, Bc::WallNeumannNoSlip] {
            let st = circle_state(bc);
            let mut solver = DiffuseSolver::new(st, Potential::standard());
            let params = StepParams::allen_cahn(1e-5);
            let m0 = solver.diagnostics(&params).mass;
            for _ in 0..200 {
                solver.step(&params).unwrap();
            }
            let m1 = solver.diagnostics(&params).mass;
            let rel = ((m1 - m0) / m0).abs();
            assert!(rel <= 1e-13, "{bc:?}: relative mass drift {rel:.3e}");
        }
    }

    #[test]
    fn energy_monotone_without_flow() {
        for bc in [Bc::Periodic, Bc::WallNeumannNoSlip] {
            let st = circle_state(bc);
            let mut solver = DiffuseSolver::new(st, Potential::standard());
            let params = StepParams::allen_cahn(1e-5);
            let mut prev = solver.diagnostics(&params).energy;
            for _ in 0..200 {
                let d = solver.step(&params).unwrap();
                assert!(d.energy <= prev + 1e-10, "{bc:?}: energy rose {prev} -> {}", d.energy);
                prev = d.energy;
            }
        }
    }

    #[test]
    fn constant_state_is_fixed_point() {
        let grid = GridSpec::new(64, 64, 1.0, 1.0, Bc::Periodic).unwrap();
        let (u, v) = zero_velocity(&grid);
        let st = DiffuseState {
            grid,
            c: Array2::from_elem((64, 64), 0.37),
            u,
            v,
            p: Array2::zeros((64, 64)),
            t: 0.0,
            eps: 0.05,
        };
        let mut solver = DiffuseSolver::new(st, Potential::standard());
        let params = StepParams::allen_cahn(1e-4);
        for _ in 0..50 {
            solver.step(&params).unwrap();
        }
        for &c in solver.state.c.iter() {
            assert!((c - 0.37).abs() < 1e-13, "constant drifted to {c}");
        }
    }

    #[test]
    fn lambda_eps_trivial_values() {
        let grid = GridSpec::new(32, 32, 1.0, 1.0, Bc::Periodic).unwrap();
        let (u, v) = zero_velocity(&grid);
        let mk = |val: f64| DiffuseState {
            grid,
            c: Array2::from_elem((32, 32), val),
            u: u.clone(),
            v: v.clone(),
            p: Array2::zeros((32, 32)),
            t: 0.0,
            eps: 0.05,
        };
        let s1 = DiffuseSolver::new(mk(1.0), Potential::standard());
        assert_eq!(s1.lambda_eps(), 0.0);
        let s0 = DiffuseSolver::new(mk(0.0), Potential::standard());
        assert_eq!(s0.lambda_eps(), 0.0);
    }

    #[test]
    fn projection_idempotent_and_divergence_free() {
        let grid = GridSpec::new(64, 64, 1.0, 1.0, Bc::Periodic).unwrap();
        let st = DiffuseState {
            grid,
            c: Array2::zeros((64, 64)),
            u: Array2::from_shape_fn((64, 64), |(j, i)| {
                ((i as f64 * 0.37).sin() + (j as f64 * 0.23).cos()) * 0.1
            }),
            v: Array2::from_shape_fn((64, 64), |(j, i)| {
                ((i as f64 * 0.61).cos() - (j as f64 * 0.19).sin()) * 0.1
            }),
            p: Array2::zeros((64, 64)),
            t: 0.0,
            eps: 0.05,
        };
        let mut solver = DiffuseSolver::new(st, Potential::standard());
        solver.project().unwrap();
        let div1 = divergence(&solver.state).iter().fold(0.0f64, |m, &d| m.max(d.abs()));
        assert!(div1 <= 1e-10, "post-projection divergence {div1}");
        let u_snapshot = solver.state.u.clone();
        solver.project().unwrap();
        let change =
            (&solver.state.u - &u_snapshot).iter().fold(0.0f64, |m, &d| m.max(d.abs()));
        assert!(change <= 1e-12, "projection not idempotent: {change}");
    }

    #[test]
    fn translation_equivariance_periodic() {
        let grid = GridSpec::new(128, 128, 1.0, 1.0, Bc::Periodic).unwrap();
        let curve = Curve::circle([0.5, 0.5], 0.25, 256);
        let table = quartic_table();
        let st = init_well_prepared(grid, &[curve], 0.02, &table, 0, 0.0).unwrap();
        let shift = 7usize;
        let mut shifted = st.clone();
        for j in 0..128 {
            for i in 0..128 {
                shifted.c[(j, (i + shift) % 128)] = st.c[(j, i)];
            }
        }
        let params = StepParams::allen_cahn(1e-5);
        let mut s1 = DiffuseSolver::new(st, Potential::standard());
        let mut s2 = DiffuseSolver::new(shifted, Potential::standard());
        for _ in 0..20 {
            s1.step(&params).unwrap();
            s2.step(&params).unwrap();
        }
        let mut worst = 0.0f64;
        for j in 0..128 {
            for i in 0..128 {
                worst =
                    worst.max((s1.state.c[(j, i)] - s2.state.c[(j, (i + shift) % 128)]).abs());
            }
        }
        assert!(worst < 1e-12, "translation equivariance violated by {worst}");
    }

    #[test]
    fn flat_interface_stationary() {
        // 1D tanh profile extended in y; walls in x
        let grid = GridSpec::new(128, 128, 1.0, 1.0, Bc::WallNeumannNoSlip).unwrap();
        let eps = 0.02;
        let (u, v) = zero_velocity(&grid);
        let c = Array2::from_shape_fn((128, 128), |(_, i)| {
            let x = grid.center(i, 0)[0];
            ((x - 0.5) / (2.0 * eps)).tanh()
        });
        let st = DiffuseState { grid, c, u, v, p: Array2::zeros((128, 128)), t: 0.0, eps };
        let mut solver = DiffuseSolver::new(st, Potential::standard());
        let params = StepParams::allen_cahn(1e-4);
        let zero_cross = |solver: &DiffuseSolver| -> f64 {
            let j = 64;
            for i in 0..127 {
                let (a, b) = (solver.state.c[(j, i)], solver.state.c[(j, i + 1)]);
                if a <= 0.0 && b > 0.0 {
                    let t = a / (a - b);
                    return grid.center(i, j)[0] + t * grid.hx();
                }
            }
            f64::NAN
        };
        let x0 = zero_cross(&solver);
        let steps = (0.1 / params.dt) as usize;
        for _ in 0..steps {
            solver.step(&params).unwrap();
        }
        let x1 = zero_cross(&solver);
        assert!((x1 - x0).abs() <= 1e-6, "interface moved {x0} -> {x1}");
        assert!(solver.lambda_eps().abs() < 1e-6);
    }

    #[test]
    fn extract_line_and_circle() {
        // linear field: horizontal line at y = 0.5
        let grid = GridSpec::new(64, 64, 1.0, 1.0, Bc::Periodic).unwrap();
        let c = Array2::from_shape_fn((64, 64), |(j, i)| {
            let y = grid.center(i, j)[1];
            y - 0.5
        });
        let comps = extract_zero_level(&grid, &c).unwrap();
        assert_eq!(comps.len(), 1);
        assert!(!comps[0].closed);
        for p in &comps[0].points {
            assert!((p[1] - 0.5).abs() < 1e-10, "y = {}", p[1]);
        }
        // well-prepared circle: zero level at the curve
        let st = circle_state(Bc::Periodic);
        let comps = extract_zero_level(&st.grid, &st.c).unwrap();
        assert_eq!(comps.len(), 1);
        assert!(comps[0].closed);
        let mut worst = 0.0f64;
        for p in &comps[0].points {
            let r = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
            worst = worst.max((r - 0.25).abs());
        }
        assert!(worst < 0.5 * st.grid.hx(), "radius error {worst}");
        let curve = component_to_curve(&comps[0], 128).unwrap();
        assert!(curve.polygon_area() > 0.0);
    }

    #[test]
    fn extract_two_components_with_areas() {
        let grid = GridSpec::new(256, 256, 2.0, 2.0, Bc::Periodic).unwrap();
        let c1 = Curve::circle([0.5, 1.0], 0.28, 256);
        let c2 = Curve::circle([1.45, 1.0], 0.38, 256);
        let table = quartic_table();
        let st = init_well_prepared(grid, &[c1, c2], 0.02, &table, 0, 0.0).unwrap();
        let comps = extract_zero_level(&grid, &st.c).unwrap();
        assert_eq!(comps.len(), 2, "components: {}", comps.len());
        let mut areas: Vec<f64> = comps
            .iter()
            .map(|comp| component_to_curve(comp, 256).unwrap().polygon_area())
            .collect();
        areas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let exact =
            [std::f64::consts::PI * 0.28 * 0.28, std::f64::consts::PI * 0.38 * 0.38];
        for (got, want) in areas.iter().zip(exact.iter()) {
            assert!(((got - want) / want).abs() < 0.01, "area {got} vs {want}");
        }
    }

    #[test]
    fn no_interface_detected() {
        let grid = GridSpec::new(32, 32, 1.0, 1.0, Bc::Periodic).unwrap();
        let c = Array2::from_elem((32, 32), 0.8);
        assert!(matches!(extract_zero_level(&grid, &c), Err(Error::NoInterface)));
    }

    #[test]
    fn cfl_rejection() {
        let st = circle_state(Bc::Periodic);
        let mut solver = DiffuseSolver::new(st, Potential::standard());
        let params = StepParams::allen_cahn(1.0);
        assert!(matches!(solver.step(&params), Err(Error::CflViolation { .. })));
    }
}
