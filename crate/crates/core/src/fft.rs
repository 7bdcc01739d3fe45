//! Thin transform layer over rustfft: periodic FFT and Neumann (DCT-II)
//! diagonal solves on uniform 2D grids, plus 1D spectral derivatives for
//! closed curves.
//!
//! The 2D solvers expose two Laplacian symbols: the exact spectral one
//! (used by the phase-field update, where layer resolution matters) and
//! the 5-point discrete one (used by the pressure projection, which must
//! invert the same divergence/gradient stencils it is paired with).

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LaplaceSymbol {
    /// Exact differentiation of the trigonometric interpolant.
    Spectral,
    /// Eigenvalues of the 3-point / 5-point finite-difference Laplacian.
    Discrete,
}

/// Plan cache keyed by (size, inverse?).
pub struct Plans {
    planner: FftPlanner<f64>,
    cache: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
}

impl Plans {
    pub fn new() -> Self {
        Plans { planner: FftPlanner::new(), cache: HashMap::new() }
    }

    pub fn get(&mut self, n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
        let planner = &mut self.planner;
        self.cache
            .entry((n, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    }
}

impl Default for Plans {
    fn default() -> Self {
        Self::new()
    }
}

/// Complex FFT of a slice, out of place.
pub fn fft_forward(plans: &mut Plans, data: &[Complex64]) -> Vec<Complex64> {
    let mut buf = data.to_vec();
    plans.get(data.len(), false).process(&mut buf);
    buf
}

/// Unnormalized inverse complex FFT of a slice, out of place.
pub fn fft_inverse(plans: &mut Plans, data: &[Complex64]) -> Vec<Complex64> {
    let mut buf = data.to_vec();
    plans.get(data.len(), true).process(&mut buf);
    buf
}

/// Signed integer frequency for bin `k` of an n-point FFT.
pub fn freq(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Spectral derivative of order `order` of a periodic complex signal
/// sampled on n points over a period of length `period`.
pub fn spectral_derivative(
    plans: &mut Plans,
    z: &[Complex64],
    order: u32,
    period: f64,
) -> Vec<Complex64> {
    let n = z.len();
    let mut hat = fft_forward(plans, z);
    let base = 2.0 * std::f64::consts::PI / period;
    for (k, v) in hat.iter_mut().enumerate() {
        let mut kk = freq(k, n) as f64;
        // the Nyquist mode of an odd-order derivative is not representable
        if n % 2 == 0 && k == n / 2 && order % 2 == 1 {
            kk = 0.0;
        }
        let ik = Complex64::new(0.0, base * kk);
        *v *= ik.powu(order);
    }
    let mut out = fft_inverse(plans, &hat);
    let scale = 1.0 / n as f64;
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// DCT-II: X[k] = 2 sum_j x[j] cos(pi k (2j+1) / (2n)), via a 2n complex FFT.
pub fn dct2(plans: &mut Plans, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut ext = vec![Complex64::new(0.0, 0.0); 2 * n];
    for j in 0..n {
        ext[j] = Complex64::new(x[j], 0.0);
        ext[2 * n - 1 - j] = Complex64::new(x[j], 0.0);
    }
    plans.get(2 * n, false).process(&mut ext);
    let mut out = vec![0.0; n];
    for k in 0..n {
        let phase = -std::f64::consts::PI * k as f64 / (2.0 * n as f64);
        let w = Complex64::from_polar(1.0, phase);
        out[k] = (w * ext[k]).re;
    }
    out
}

/// Inverse of [`dct2`] (a scaled DCT-III): idct3(dct2(x)) = x.
pub fn idct3(plans: &mut Plans, coeff: &[f64]) -> Vec<f64> {
    let n = coeff.len();
    let mut spec = vec![Complex64::new(0.0, 0.0); 2 * n];
    for k in 0..n {
        let phase = std::f64::consts::PI * k as f64 / (2.0 * n as f64);
        let y = Complex64::from_polar(1.0, phase) * coeff[k];
        spec[k] = y;
        if k > 0 {
            spec[2 * n - k] = y.conj();
        }
    }
    spec[n] = Complex64::new(0.0, 0.0);
    plans.get(2 * n, true).process(&mut spec);
    let scale = 1.0 / (2.0 * n as f64);
    (0..n).map(|j| spec[j].re * scale).collect()
}

/// Diagonal Helmholtz/Poisson solves on a uniform rectangle, cell-centered,
/// under periodic or homogeneous-Neumann boundary conditions.
pub struct GridTransform {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub periodic: bool,
    plans: Plans,
}

impl GridTransform {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, periodic: bool) -> Self {
        GridTransform { nx, ny, lx, ly, periodic, plans: Plans::new() }
    }

    fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    fn eig_x(&self, k: usize, symbol: LaplaceSymbol) -> f64 {
        eig_1d(k, self.nx, self.lx, self.periodic, symbol)
    }

    fn eig_y(&self, k: usize, symbol: LaplaceSymbol) -> f64 {
        eig_1d(k, self.ny, self.ly, self.periodic, symbol)
    }

    /// Solve (a - Laplacian) u = rhs. For a = 0 the zero mode of `u` is set
    /// to zero (zero-mean gauge); callers own the compatibility of `rhs`.
    pub fn solve_helmholtz(
        &mut self,
        rhs: &Array2<f64>,
        a: f64,
        symbol: LaplaceSymbol,
    ) -> Array2<f64> {
        if self.periodic {
            let mut hat = self.fft2_forward(rhs);
            for ky in 0..self.ny {
                for kx in 0..self.nx {
                    let lam = self.eig_x(kx, symbol) + self.eig_y(ky, symbol);
                    let denom = a + lam;
                    let v = &mut hat[(ky, kx)];
                    if denom.abs() < 1e-300 {
                        *v = Complex64::new(0.0, 0.0);
                    } else {
                        *v /= denom;
                    }
                }
            }
            self.fft2_inverse(&hat)
        } else {
            let mut hat = self.dct2_forward(rhs);
            for ky in 0..self.ny {
                for kx in 0..self.nx {
                    let lam = self.eig_x(kx, symbol) + self.eig_y(ky, symbol);
                    let denom = a + lam;
                    let v = &mut hat[(ky, kx)];
                    if denom.abs() < 1e-300 {
                        *v = 0.0;
                    } else {
                        *v /= denom;
                    }
                }
            }
            self.dct2_inverse(&hat)
        }
    }

    /// Laplacian with the chosen symbol (used for diagnostics that must be
    /// consistent with the solver's inverse).
    pub fn laplacian(&mut self, field: &Array2<f64>, symbol: LaplaceSymbol) -> Array2<f64> {
        if self.periodic {
            let mut hat = self.fft2_forward(field);
            for ky in 0..self.ny {
                for kx in 0..self.nx {
                    let lam = self.eig_x(kx, symbol) + self.eig_y(ky, symbol);
                    hat[(ky, kx)] *= -lam;
                }
            }
            self.fft2_inverse(&hat)
        } else {
            let mut hat = self.dct2_forward(field);
            for ky in 0..self.ny {
                for kx in 0..self.nx {
                    let lam = self.eig_x(kx, symbol) + self.eig_y(ky, symbol);
                    hat[(ky, kx)] *= -lam;
                }
            }
            self.dct2_inverse(&hat)
        }
    }

    /// Integral of |grad u|^2 over the rectangle, evaluated from the
    /// transform coefficients (Parseval), with the spectral symbol.
    pub fn grad_sq_integral(&mut self, field: &Array2<f64>) -> f64 {
        let cell = self.hx() * (self.ly / self.ny as f64);
        let npts = (self.nx * self.ny) as f64;
        if self.periodic {
            let hat = self.fft2_forward(field);
            let mut total = 0.0;
            for ky in 0..self.ny {
                for kx in 0..self.nx {
                    let lam = self.eig_x(kx, LaplaceSymbol::Spectral)
                        + self.eig_y(ky, LaplaceSymbol::Spectral);
                    total += lam * hat[(ky, kx)].norm_sqr();
                }
            }
            total * cell / npts
        } else {
            // cosine-series coefficients a_k = X[k] d_k / n with d_0 = 1/2,
            // d_k = 1 otherwise; discrete orthogonality weights 1 (k = 0)
            // and 1/2 (k > 0) per axis.
            let _ = npts;
            let hat = self.dct2_forward(field);
            let (nx, ny) = (self.nx as f64, self.ny as f64);
            let mut total = 0.0;
            for ky in 0..self.ny {
                for kx in 0..self.nx {
                    let dx = if kx == 0 { 0.5 } else { 1.0 };
                    let dy = if ky == 0 { 0.5 } else { 1.0 };
                    let wx = if kx == 0 { 1.0 } else { 0.5 };
                    let wy = if ky == 0 { 1.0 } else { 0.5 };
                    let a = hat[(ky, kx)] * dx * dy / (nx * ny);
                    let gx = self.eig_x(kx, LaplaceSymbol::Spectral)
                        * (0.5 * self.lx)
                        * (wy * self.ly);
                    let gy = self.eig_y(ky, LaplaceSymbol::Spectral)
                        * (wx * self.lx)
                        * (0.5 * self.ly);
                    total += a * a * (gx + gy);
                }
            }
            total
        }
    }

    pub fn fft2_forward(&mut self, field: &Array2<f64>) -> Array2<Complex64> {
        let (ny, nx) = (self.ny, self.nx);
        let mut buf = Array2::from_shape_fn((ny, nx), |(j, i)| Complex64::new(field[(j, i)], 0.0));
        let row_plan = self.plans.get(nx, false);
        let mut row = vec![Complex64::new(0.0, 0.0); nx];
        for j in 0..ny {
            for i in 0..nx {
                row[i] = buf[(j, i)];
            }
            row_plan.process(&mut row);
            for i in 0..nx {
                buf[(j, i)] = row[i];
            }
        }
        let col_plan = self.plans.get(ny, false);
        let mut col = vec![Complex64::new(0.0, 0.0); ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = buf[(j, i)];
            }
            col_plan.process(&mut col);
            for j in 0..ny {
                buf[(j, i)] = col[j];
            }
        }
        buf
    }

    pub fn fft2_inverse(&mut self, hat: &Array2<Complex64>) -> Array2<f64> {
        let (ny, nx) = (self.ny, self.nx);
        let mut buf = hat.clone();
        let row_plan = self.plans.get(nx, true);
        let mut row = vec![Complex64::new(0.0, 0.0); nx];
        for j in 0..ny {
            for i in 0..nx {
                row[i] = buf[(j, i)];
            }
            row_plan.process(&mut row);
            for i in 0..nx {
                buf[(j, i)] = row[i];
            }
        }
        let col_plan = self.plans.get(ny, true);
        let mut col = vec![Complex64::new(0.0, 0.0); ny];
        let scale = 1.0 / (nx * ny) as f64;
        let mut out = Array2::zeros((ny, nx));
        for i in 0..nx {
            for j in 0..ny {
                col[j] = buf[(j, i)];
            }
            col_plan.process(&mut col);
            for j in 0..ny {
                out[(j, i)] = col[j].re * scale;
            }
        }
        out
    }

    fn dct2_forward(&mut self, field: &Array2<f64>) -> Array2<f64> {
        let (ny, nx) = (self.ny, self.nx);
        let mut buf = Array2::zeros((ny, nx));
        let mut row = vec![0.0; nx];
        for j in 0..ny {
            for i in 0..nx {
                row[i] = field[(j, i)];
            }
            let t = dct2(&mut self.plans, &row);
            for i in 0..nx {
                buf[(j, i)] = t[i];
            }
        }
        let mut col = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = buf[(j, i)];
            }
            let t = dct2(&mut self.plans, &col);
            for j in 0..ny {
                buf[(j, i)] = t[j];
            }
        }
        buf
    }

    fn dct2_inverse(&mut self, hat: &Array2<f64>) -> Array2<f64> {
        let (ny, nx) = (self.ny, self.nx);
        let mut buf = hat.clone();
        let mut col = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = buf[(j, i)];
            }
            let t = idct3(&mut self.plans, &col);
            for j in 0..ny {
                buf[(j, i)] = t[j];
            }
        }
        let mut row = vec![0.0; nx];
        for j in 0..ny {
            for i in 0..nx {
                row[i] = buf[(j, i)];
            }
            let t = idct3(&mut self.plans, &row);
            for i in 0..nx {
                buf[(j, i)] = t[i];
            }
        }
        buf
    }
}

fn eig_1d(k: usize, n: usize, len: f64, periodic: bool, symbol: LaplaceSymbol) -> f64 {
    let h = len / n as f64;
    if periodic {
        match symbol {
            LaplaceSymbol::Spectral => {
                let kk = freq(k, n) as f64;
                let w = 2.0 * std::f64::consts::PI * kk / len;
                w * w
            }
            LaplaceSymbol::Discrete => {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                (2.0 - 2.0 * th.cos()) / (h * h)
            }
        }
    } else {
        match symbol {
            LaplaceSymbol::Spectral => {
                let w = std::f64::consts::PI * k as f64 / len;
                w * w
            }
            LaplaceSymbol::Discrete => {
                let th = std::f64::consts::PI * k as f64 / n as f64;
                (2.0 - 2.0 * th.cos()) / (h * h)
            }
        }
    }
}
