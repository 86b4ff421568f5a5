//! Shape functions for the exogenous influence of a single subtitle and the
//! exponential excitation kernel between chat events.
//!
//! All times are in minutes. Every shape vanishes for nonpositive elapsed
//! time, so a subtitle or event never influences its own instant.

use serde::{Deserialize, Serialize};
use libm::erfc;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Default power-law offset, one second expressed in minutes.
pub const DEFAULT_POWERLAW_EPS: f64 = 1.0 / 60.0;

/// Default log-normal anchoring: influence peaks 2 s after a subtitle and
/// half of its mass arrives within 10 s.
pub const DEFAULT_PEAK_MIN: f64 = 2.0 / 60.0;
pub const DEFAULT_MEDIAN_MIN: f64 = 10.0 / 60.0;

/// Shape of the influence `s(t - τ)` one subtitle at `τ` exerts at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ShapeConfig {
    /// Log-normal density in elapsed time; `mu`, `sigma` are the location
    /// and scale of `ln(dt)`.
    Lognormal { mu: f64, sigma: f64 },
    /// `1 / (dt + eps)^c`.
    Powerlaw { c: f64, eps: f64 },
}

impl Default for ShapeConfig {
    fn default() -> Self {
        let (mu, sigma) = solve_lognormal_params(DEFAULT_PEAK_MIN, DEFAULT_MEDIAN_MIN)
            .expect("default peak precedes default median");
        ShapeConfig::Lognormal { mu, sigma }
    }
}

impl ShapeConfig {
    pub fn lognormal_from_peak_median(peak_time: f64, median_time: f64) -> Result<Self> {
        let (mu, sigma) = solve_lognormal_params(peak_time, median_time)?;
        Ok(ShapeConfig::Lognormal { mu, sigma })
    }

    pub fn powerlaw(c: f64, eps: f64) -> Result<Self> {
        let shape = ShapeConfig::Powerlaw { c, eps };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ShapeConfig::Lognormal { mu, sigma } => {
                if !mu.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "log-normal shape needs finite mu and sigma > 0 (got mu={mu}, sigma={sigma})"
                    )));
                }
            }
            ShapeConfig::Powerlaw { c, eps } => {
                if !(c > 1.0) || !(eps > 0.0) || !c.is_finite() || !eps.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "power-law shape needs c > 1 and eps > 0 (got c={c}, eps={eps})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Shape value at elapsed time `dt`; zero for `dt <= 0`.
    #[inline]
    pub fn value(&self, dt: f64) -> f64 {
        match *self {
            ShapeConfig::Lognormal { mu, sigma } => lognormal_shape(dt, mu, sigma),
            ShapeConfig::Powerlaw { c, eps } => powerlaw_shape(dt, c, eps),
        }
    }

    /// Integral of the shape over `(0, dt]`.
    #[inline]
    pub fn cumulative(&self, dt: f64) -> f64 {
        match *self {
            ShapeConfig::Lognormal { mu, sigma } => lognormal_cdf(dt, mu, sigma),
            ShapeConfig::Powerlaw { c, eps } => powerlaw_cumulative(dt, c, eps),
        }
    }

    /// Elapsed time at which the shape is maximal (0 for the power law,
    /// whose supremum is approached as `dt → 0+`).
    pub fn mode(&self) -> f64 {
        match *self {
            ShapeConfig::Lognormal { mu, sigma } => (mu - sigma * sigma).exp(),
            ShapeConfig::Powerlaw { .. } => 0.0,
        }
    }

    /// Supremum of the shape over elapsed times in `[lo, hi]`, `lo <= hi`.
    /// Both families are unimodal, so the supremum is the mode value when the
    /// mode lies inside the interval and the nearer endpoint otherwise.
    pub fn sup_on(&self, lo: f64, hi: f64) -> f64 {
        if hi <= 0.0 {
            return 0.0;
        }
        let lo = lo.max(0.0);
        match *self {
            ShapeConfig::Lognormal { .. } => {
                let m = self.mode();
                if m < lo {
                    self.value(lo)
                } else if m > hi {
                    self.value(hi)
                } else {
                    self.value(m)
                }
            }
            ShapeConfig::Powerlaw { c, eps } => (lo + eps).powf(-c),
        }
    }
}

/// Location and scale of a log-normal shape with its mode at `peak_time` and
/// its median at `median_time`: `exp(mu) = median`, `exp(mu - sigma²) = peak`.
pub fn solve_lognormal_params(peak_time: f64, median_time: f64) -> Result<(f64, f64)> {
    if !(peak_time > 0.0) || !(median_time > peak_time) || !median_time.is_finite() {
        return Err(Error::InvalidInput(format!(
            "log-normal anchoring needs 0 < peak < median (got peak={peak_time}, median={median_time})"
        )));
    }
    let mu = median_time.ln();
    let sigma = (median_time / peak_time).ln().sqrt();
    Ok((mu, sigma))
}

#[inline]
pub fn lognormal_shape(dt: f64, mu: f64, sigma: f64) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    let z = (dt.ln() - mu) / sigma;
    (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sigma * dt)
}

/// Log-normal CDF `Φ((ln dt − mu)/sigma)`; zero for `dt <= 0`.
#[inline]
pub fn lognormal_cdf(dt: f64, mu: f64, sigma: f64) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    if dt.is_infinite() {
        return 1.0;
    }
    let z = (dt.ln() - mu) / sigma;
    0.5 * erfc(-z / SQRT_2)
}

#[inline]
pub fn powerlaw_shape(dt: f64, c: f64, eps: f64) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    (dt + eps).powf(-c)
}

/// `∫_0^dt (u + eps)^{-c} du`.
#[inline]
pub fn powerlaw_cumulative(dt: f64, c: f64, eps: f64) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    let k = 1.0 - c;
    (eps.powf(k) - (dt + eps).powf(k)) / (c - 1.0)
}

/// Weight and decay time of the exponential excitation kernel
/// `φ(dt) = (alpha/gamma) exp(-dt/gamma)`, whose total mass is `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpKernelParams {
    pub alpha: f64,
    pub gamma: f64,
}

#[inline]
pub fn exp_kernel(dt: f64, params: ExpKernelParams) -> f64 {
    if dt < 0.0 {
        return 0.0;
    }
    params.alpha / params.gamma * (-dt / params.gamma).exp()
}

/// `∫_0^x φ = alpha (1 − e^{−x/gamma})`.
#[inline]
pub fn exp_kernel_integral(x: f64, params: ExpKernelParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    -params.alpha * (-x / params.gamma).exp_m1()
}
