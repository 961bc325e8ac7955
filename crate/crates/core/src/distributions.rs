//! Scalar distribution kit: CDFs and inverse CDFs for the marginal families
//! used by the copula generators.
//!
//! The special functions (error function, regularized incomplete gamma and
//! beta) come from `statrs`; every continuous inverse CDF is a bracketed,
//! Newton-accelerated root find on the CDF started from an analytic guess.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid parameters for {family}: {reason}")]
    InvalidParameter {
        family: String,
        reason: &'static str,
    },
    #[error("probability {p} outside the domain of the {family} inverse CDF")]
    ProbabilityOutOfDomain { family: String, p: f64 },
    #[error("inverse CDF of {family} did not converge at p = {p}")]
    NonConvergence { family: String, p: f64 },
}

/// A univariate distribution family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Normal { mean: f64, sd: f64 },
    Gamma { shape: f64, scale: f64 },
    F { d1: f64, d2: f64 },
    StudentT { dof: f64 },
    Poisson { mean: f64 },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::Normal { mean, sd } => write!(f, "normal(mean={mean}, sd={sd})"),
            Family::Gamma { shape, scale } => write!(f, "gamma(shape={shape}, scale={scale})"),
            Family::F { d1, d2 } => write!(f, "F(d1={d1}, d2={d2})"),
            Family::StudentT { dof } => write!(f, "student_t(dof={dof})"),
            Family::Poisson { mean } => write!(f, "poisson(mean={mean})"),
        }
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl Family {
    pub const STANDARD_NORMAL: Family = Family::Normal { mean: 0.0, sd: 1.0 };

    pub fn validate(&self) -> Result<(), DistError> {
        let reason = match *self {
            Family::Normal { mean, sd } if !mean.is_finite() || !positive(sd) => {
                Some("mean must be finite and sd > 0")
            }
            Family::Gamma { shape, scale } if !positive(shape) || !positive(scale) => {
                Some("shape and scale must be > 0")
            }
            Family::F { d1, d2 } if !positive(d1) || !positive(d2) => Some("d1 and d2 must be > 0"),
            Family::StudentT { dof } if !positive(dof) => Some("dof must be > 0"),
            Family::Poisson { mean } if !positive(mean) => Some("mean must be > 0"),
            _ => None,
        };
        match reason {
            Some(reason) => Err(DistError::InvalidParameter {
                family: self.to_string(),
                reason,
            }),
            None => Ok(()),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Family::Poisson { .. })
    }

    pub fn cdf(&self, x: f64) -> Result<f64, DistError> {
        self.validate()?;
        Ok(self.cdf_unchecked(x))
    }

    fn cdf_unchecked(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match *self {
            Family::Normal { mean, sd } => standard_normal_cdf((x - mean) / sd),
            Family::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else if x == f64::INFINITY {
                    1.0
                } else {
                    gamma_lr(shape, x / scale)
                }
            }
            Family::F { d1, d2 } => {
                if x <= 0.0 {
                    0.0
                } else if x == f64::INFINITY {
                    1.0
                } else {
                    let t = d1 * x;
                    beta_reg(d1 / 2.0, d2 / 2.0, t / (t + d2))
                }
            }
            Family::StudentT { dof } => student_t_cdf(x, dof),
            Family::Poisson { mean } => {
                if x < 0.0 {
                    0.0
                } else if x == f64::INFINITY {
                    1.0
                } else {
                    gamma_ur(x.floor() + 1.0, mean)
                }
            }
        }
    }

    /// Density, used only to accelerate the inversion.
    fn pdf(&self, x: f64) -> f64 {
        match *self {
            Family::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            }
            Family::Gamma { shape, scale } => {
                if x <= 0.0 {
                    return 0.0;
                }
                ((shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()).exp()
            }
            Family::F { d1, d2 } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let ln = 0.5 * (d1 * (d1 * x).ln() + d2 * d2.ln() - (d1 + d2) * (d1 * x + d2).ln())
                    - x.ln()
                    - ln_beta(d1 / 2.0, d2 / 2.0);
                ln.exp()
            }
            Family::StudentT { dof } => {
                let ln = ln_gamma((dof + 1.0) / 2.0)
                    - ln_gamma(dof / 2.0)
                    - 0.5 * (dof * PI).ln()
                    - (dof + 1.0) / 2.0 * (x * x / dof).ln_1p();
                ln.exp()
            }
            Family::Poisson { .. } => 0.0,
        }
    }

    /// Inverse CDF.
    ///
    /// Continuous families take `p` in (0, 1) and return `x` with
    /// `cdf(x) = p`. Poisson takes `p` in [0, 1) and returns the integer `x`
    /// with `F(x) <= p < F(x + 1)`, clamped to 0 when `p < F(0)`.
    pub fn inverse_cdf(&self, p: f64) -> Result<f64, DistError> {
        self.validate()?;
        let in_domain = if self.is_discrete() {
            (0.0..1.0).contains(&p)
        } else {
            p > 0.0 && p < 1.0
        };
        if !in_domain {
            return Err(DistError::ProbabilityOutOfDomain {
                family: self.to_string(),
                p,
            });
        }
        match *self {
            Family::Poisson { mean } => poisson_bracket(mean, p)
                .map(|k| k as f64)
                .ok_or_else(|| self.non_convergence(p)),
            Family::Gamma { .. } | Family::F { .. } => self.invert(p, self.initial_guess(p), 0.0),
            _ => self.invert(p, self.initial_guess(p), f64::NEG_INFINITY),
        }
    }

    fn non_convergence(&self, p: f64) -> DistError {
        DistError::NonConvergence {
            family: self.to_string(),
            p,
        }
    }

    fn initial_guess(&self, p: f64) -> f64 {
        let z = acklam_quantile(p);
        match *self {
            Family::Normal { mean, sd } => mean + sd * z,
            Family::Gamma { shape, scale } => {
                // Wilson-Hilferty, falling back to the lower-tail power law
                let c = 1.0 - 1.0 / (9.0 * shape) + z / (3.0 * shape.sqrt());
                if c > 0.0 {
                    shape * scale * c * c * c
                } else {
                    scale * (p.ln() + ln_gamma(shape + 1.0)).exp().powf(1.0 / shape)
                }
            }
            Family::F { d1, d2 } => {
                let spread = if d2 > 4.0 {
                    (2.0 * (d1 + d2 - 2.0) / (d1 * (d2 - 4.0))).sqrt()
                } else {
                    1.0
                };
                (1.0 + z * spread).max(1e-3)
            }
            Family::StudentT { dof } => z * (1.0 + (z * z + 1.0) / (4.0 * dof)),
            Family::Poisson { mean } => mean,
        }
    }

    fn invert(&self, p: f64, guess: f64, support_min: f64) -> Result<f64, DistError> {
        let f = |x: f64| self.cdf_unchecked(x) - p;
        let mut x = if guess.is_finite() && guess > support_min {
            guess
        } else if support_min.is_finite() {
            1.0
        } else {
            0.0
        };

        // bracket the root: f(lo) <= 0 <= f(hi)
        let (mut lo, mut hi);
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        let mut expansions = 0;
        if fx < 0.0 {
            lo = x;
            let mut step = x.abs().max(1.0);
            loop {
                hi = lo + step;
                if f(hi) >= 0.0 {
                    break;
                }
                lo = hi;
                step *= 2.0;
                expansions += 1;
                if expansions > 2000 || !hi.is_finite() {
                    return Err(self.non_convergence(p));
                }
            }
        } else {
            hi = x;
            loop {
                lo = if support_min.is_finite() {
                    if hi < 1e-300 {
                        support_min
                    } else {
                        hi / 2.0
                    }
                } else {
                    hi - hi.abs().max(1.0) * 2f64.powi(expansions.min(1000))
                };
                if f(lo) <= 0.0 {
                    break;
                }
                hi = lo;
                expansions += 1;
                if expansions > 2000 || !lo.is_finite() {
                    return Err(self.non_convergence(p));
                }
            }
        }

        x = x.clamp(lo, hi);
        for _ in 0..200 {
            let fx = f(x);
            if fx == 0.0 {
                return Ok(x);
            }
            if fx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = self.pdf(x);
            let newton = x - fx / d;
            let next = if d > 0.0 && newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let scale = next.abs().max(f64::MIN_POSITIVE);
            if (next - x).abs() <= 2.0 * f64::EPSILON * scale
                || (hi - lo) <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
            {
                return Ok(next);
            }
            x = next;
        }
        Err(self.non_convergence(p))
    }
}

fn student_t_cdf(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let t2 = t * t;
    // pick the incomplete-beta argument that stays away from 1
    let tail = if t2 < dof {
        0.5 - 0.5 * beta_reg(0.5, dof / 2.0, t2 / (dof + t2))
    } else {
        0.5 * beta_reg(dof / 2.0, 0.5, dof / (dof + t2))
    };
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Largest `k >= 0` with `F(k) <= p`, or 0 when `p < F(0)`.
fn poisson_bracket(mean: f64, p: f64) -> Option<u64> {
    let limit = (mean + 60.0 * mean.sqrt() + 200.0) as u64;
    let ln_mean = mean.ln();
    let mut cdf = 0.0;
    for k in 0..=limit {
        cdf += (k as f64 * ln_mean - mean - ln_gamma(k as f64 + 1.0)).exp();
        if cdf > p {
            return Some(k.saturating_sub(1));
        }
    }
    None
}

/// Φ(x).
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Φ⁻¹(p) for p in (0, 1).
pub fn standard_normal_quantile(p: f64) -> Result<f64, DistError> {
    Family::STANDARD_NORMAL.inverse_cdf(p)
}

/// Acklam's rational approximation to Φ⁻¹ (relative error ~1e-9); only a
/// starting point for the root find.
fn acklam_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam_quantile(1.0 - p)
    }
}
