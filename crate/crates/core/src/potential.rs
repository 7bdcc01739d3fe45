//! Double-well potential f, its first three derivatives, and the
//! surface-tension constant sigma = int sqrt(2 f) between the wells.

use crate::error::{Error, Result};
use crate::numerics::adaptive_quad;

/// Absolute tolerance of the sigma quadrature.
pub const SIGMA_QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// f(c) = (c^2 - 1)^2 / 8, wells at +-1.
    StandardQuartic,
    /// Even polynomial of degree <= 4 with wells at +-1,
    /// stored as coefficients of 1, c, c^2, c^3, c^4.
    UserPolynomial { coefficients: Vec<f64> },
}

/// Values of f and its first three derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialValues {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
    pub d3f: f64,
}

impl Potential {
    pub fn standard() -> Self {
        Potential::StandardQuartic
    }

    /// Build a user polynomial, rejecting degree > 4 and validating the
    /// double-well structure: f'(+-1) = 0, f''(+-1) > 0, f even.
    pub fn user_polynomial(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() > 5 {
            return Err(Error::UnsupportedPotential { degree: coefficients.len() - 1 });
        }
        let pot = Potential::UserPolynomial { coefficients };
        pot.validate()?;
        Ok(pot)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Potential::StandardQuartic => Ok(()),
            Potential::UserPolynomial { coefficients } => {
                if coefficients.len() > 5 {
                    return Err(Error::UnsupportedPotential { degree: coefficients.len() - 1 });
                }
                for (k, &a) in coefficients.iter().enumerate() {
                    if k % 2 == 1 && a != 0.0 {
                        return Err(Error::InvalidConfig(format!(
                            "potential must be even; coefficient of c^{k} is {a}"
                        )));
                    }
                }
                let at = |c: f64| self.eval(c);
                let pv = at(1.0);
                let mv = at(-1.0);
                if pv.df.abs() > 1e-12 || mv.df.abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "wells must sit at +-1: f'(1) = {}, f'(-1) = {}",
                        pv.df, mv.df
                    )));
                }
                if pv.d2f <= 0.0 || mv.d2f <= 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "wells must be non-degenerate: f''(1) = {}, f''(-1) = {}",
                        pv.d2f, mv.d2f
                    )));
                }
                Ok(())
            }
        }
    }

    /// f, f', f'', f''' at `c`. Total function.
    pub fn eval(&self, c: f64) -> PotentialValues {
        match self {
            Potential::StandardQuartic => {
                let s = c * c - 1.0;
                PotentialValues {
                    f: 0.125 * s * s,
                    df: 0.5 * c * s,
                    d2f: 0.5 * (3.0 * c * c - 1.0),
                    d3f: 3.0 * c,
                }
            }
            Potential::UserPolynomial { coefficients } => {
                let mut f = 0.0;
                let mut df = 0.0;
                let mut d2f = 0.0;
                let mut d3f = 0.0;
                for (k, &a) in coefficients.iter().enumerate() {
                    let kf = k as f64;
                    f += a * c.powi(k as i32);
                    if k >= 1 {
                        df += a * kf * c.powi(k as i32 - 1);
                    }
                    if k >= 2 {
                        d2f += a * kf * (kf - 1.0) * c.powi(k as i32 - 2);
                    }
                    if k >= 3 {
                        d3f += a * kf * (kf - 1.0) * (kf - 2.0) * c.powi(k as i32 - 3);
                    }
                }
                PotentialValues { f, df, d2f, d3f }
            }
        }
    }

    /// Decay rate alpha = min sqrt(f''(+-1)) of the profile tails.
    pub fn decay_rate(&self) -> f64 {
        let p = self.eval(1.0).d2f;
        let m = self.eval(-1.0).d2f;
        p.min(m).sqrt()
    }
}

/// sigma = int_{-1}^{1} sqrt(2 f(s)) ds by adaptive quadrature.
///
/// Errors with `NegativePotential` if f dips below -1e-14 between the wells.
pub fn sigma_from_potential(pot: &Potential) -> Result<f64> {
    pot.validate()?;
    let probes = 2001;
    for i in 0..=probes {
        let s = -1.0 + 2.0 * i as f64 / probes as f64;
        let f = pot.eval(s).f;
        if f < -1e-14 {
            return Err(Error::NegativePotential { at: s, value: f });
        }
    }
    let val = adaptive_quad(|s| (2.0 * pot.eval(s).f).max(0.0).sqrt(), -1.0, 1.0, SIGMA_QUAD_TOL);
    Ok(val)
}
