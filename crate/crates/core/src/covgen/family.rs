//! Standardized marginal families for the Gaussian copula.
//!
//! Each family maps a latent standard normal `z` to a value with zero
//! median and unit scale. Scale is the standard deviation, except for Levy
//! (no finite moments) which uses IQR / 1.3489795, the normal IQR in σ units.

use serde::{Deserialize, Serialize};

use crate::special::{norm_cdf, norm_ppf, norm_sf};

/// Interquartile range of the standard normal.
const NORMAL_IQR: f64 = 1.348_979_500_392_163_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailFamily {
    Normal,
    Laplace,
    Weibull { shape: f64 },
    Gumbel,
    /// One-sided stable law with α = 0.5.
    Levy,
}

pub const DEFAULT_WEIBULL_SHAPE: f64 = 1.5;

impl TailFamily {
    pub fn all() -> [TailFamily; 5] {
        [
            TailFamily::Normal,
            TailFamily::Laplace,
            TailFamily::Weibull { shape: DEFAULT_WEIBULL_SHAPE },
            TailFamily::Gumbel,
            TailFamily::Levy,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            TailFamily::Normal => "normal",
            TailFamily::Laplace => "laplace",
            TailFamily::Weibull { .. } => "weibull",
            TailFamily::Gumbel => "gumbel",
            TailFamily::Levy => "levy",
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            TailFamily::Weibull { shape } => *shape > 0.0 && shape.is_finite(),
            _ => true,
        }
    }

    /// Raw (unstandardized) quantile, given `lo = Φ(z)` and `hi = 1 − Φ(z)`
    /// both computed directly so that neither tail loses precision.
    fn raw(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            TailFamily::Normal => unreachable!("normal is handled in latent space"),
            TailFamily::Laplace => {
                let b = core::f64::consts::FRAC_1_SQRT_2;
                if lo < 0.5 {
                    b * libm::log(2.0 * lo)
                } else {
                    -b * libm::log(2.0 * hi)
                }
            }
            TailFamily::Weibull { shape } => {
                // −ln(1 − u)
                let h = if lo < 0.5 { -libm::log1p(-lo) } else { -libm::log(hi) };
                libm::pow(h, 1.0 / shape)
            }
            TailFamily::Gumbel => {
                // −ln(−ln u)
                let nl = if lo < 0.5 { -libm::log(lo) } else { -libm::log1p(-hi) };
                -libm::log(nl)
            }
            TailFamily::Levy => {
                // x = 1 / Φ⁻¹(u/2)², with u/2 = 0.5 − hi/2 resolved near the median.
                let half_hi = 0.5 * hi;
                let p = if half_hi < 1e-9 {
                    -half_hi * libm::sqrt(2.0 * core::f64::consts::PI)
                } else {
                    norm_ppf(0.5 * lo)
                };
                1.0 / (p * p)
            }
        }
    }

    fn location_scale(&self) -> (f64, f64) {
        match *self {
            TailFamily::Normal => (0.0, 1.0),
            TailFamily::Laplace => (0.0, 1.0),
            TailFamily::Weibull { shape } => {
                let median = libm::pow(core::f64::consts::LN_2, 1.0 / shape);
                let g1 = libm::tgamma(1.0 + 1.0 / shape);
                let g2 = libm::tgamma(1.0 + 2.0 / shape);
                (median, libm::sqrt(g2 - g1 * g1))
            }
            TailFamily::Gumbel => {
                let median = -libm::log(core::f64::consts::LN_2);
                (median, core::f64::consts::PI / libm::sqrt(6.0))
            }
            TailFamily::Levy => {
                let q = |u: f64| {
                    let p = norm_ppf(0.5 * u);
                    1.0 / (p * p)
                };
                (q(0.5), (q(0.75) - q(0.25)) / NORMAL_IQR)
            }
        }
    }

    /// Standardized value for latent `z`. May be ±∞ for extreme `z`.
    pub fn standardized(&self, z: f64) -> f64 {
        if let TailFamily::Normal = self {
            return z;
        }
        let (loc, scale) = self.location_scale();
        (self.raw(norm_cdf(z), norm_sf(z)) - loc) / scale
    }

    /// Standardized quantile at probability `u` (for tests and diagnostics).
    pub fn quantile(&self, u: f64) -> f64 {
        self.standardized(norm_ppf(u))
    }
}
