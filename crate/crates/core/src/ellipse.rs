//! Closed-form quantile-ellipse geometry for a bivariate Gaussian.
//!
//! The (1-α) quantile ellipse of N((μ₁, μ₂), Σ) is the contour
//! `Q(x, y) = c²` with
//! `Q = ((x-μ₁)/σ₁)² - 2ρ((x-μ₁)/σ₁)((y-μ₂)/σ₂) + ((y-μ₂)/σ₂)²` and
//! `c² = -2(1-ρ²) ln α`. Seen from an external point, the two tangent lines
//! bound an angle Δθ that shrinks as ρ grows; this module computes that
//! angle both from the tangent slopes and from its closed-form relation
//! with ρ, and provides the generation-level algebra the normalization step
//! is built on.

use std::f64::consts::PI;

use thiserror::Error;

use crate::datagen::Damping;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EllipseError {
    #[error("alpha must lie in (0, 1), got {0}")]
    AlphaOutOfRange(f64),
    #[error("invalid bivariate Gaussian parameters: {0}")]
    InvalidParams(&'static str),
    #[error("point ({0}, {1}) is not outside the ellipse: no external tangents")]
    NoExternalTangents(f64, f64),
    #[error(
        "degenerate configuration: a tangent through ({0}, {1}) is vertical (unbounded slope)"
    )]
    VerticalTangent(f64, f64),
    #[error("point ({0}, {1}) is outside the positive-slope support region")]
    OutsideSupportRegion(f64, f64),
    #[error("negative radicand {0} in the angle relation (precondition breach)")]
    NegativeRadicand(f64),
    #[error("generation marginal correlation {0} is not inside (-1, 1)")]
    MarginalCorrelation(f64),
    #[error("condition inapplicable: cos 2γ = {0} <= 0")]
    ConditionInapplicable(f64),
    #[error("invalid schedule input: {0}")]
    InvalidSchedule(&'static str),
}

/// Tail probability α of a quantile ellipse (the ellipse holds 1-α).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(alpha: f64) -> Result<Self, EllipseError> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(EllipseError::AlphaOutOfRange(alpha))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// λ = -2 ln α.
    pub fn lambda(self) -> f64 {
        -2.0 * self.0.ln()
    }
}

impl Default for Alpha {
    fn default() -> Self {
        Self(0.05)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateGaussian {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl BivariateGaussian {
    pub fn new(
        mu1: f64,
        mu2: f64,
        sigma1: f64,
        sigma2: f64,
        rho: f64,
    ) -> Result<Self, EllipseError> {
        if !(mu1.is_finite() && mu2.is_finite()) {
            return Err(EllipseError::InvalidParams("means must be finite"));
        }
        if !(sigma1 > 0.0 && sigma2 > 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
            return Err(EllipseError::InvalidParams(
                "standard deviations must be > 0",
            ));
        }
        if !(rho.abs() < 1.0) {
            return Err(EllipseError::InvalidParams(
                "correlation must satisfy |rho| < 1",
            ));
        }
        Ok(Self {
            mu1,
            mu2,
            sigma1,
            sigma2,
            rho,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileEllipse {
    pub params: BivariateGaussian,
    pub alpha: Alpha,
    /// c² of the contour `Q(x, y) = c²`.
    pub level: f64,
    /// Density height D of the contour.
    pub density_height: f64,
}

impl QuantileEllipse {
    /// Quadratic form Q at `(x, y)`.
    pub fn quadratic_form(&self, x: f64, y: f64) -> f64 {
        let p = &self.params;
        let a = (x - p.mu1) / p.sigma1;
        let b = (y - p.mu2) / p.sigma2;
        a * a - 2.0 * p.rho * a * b + b * b
    }

    pub fn is_outside(&self, p: Point) -> bool {
        self.quadratic_form(p.x, p.y) > self.level
    }
}

pub fn quantile_ellipse(params: BivariateGaussian, alpha: Alpha) -> QuantileEllipse {
    let one_minus_rho2 = 1.0 - params.rho * params.rho;
    QuantileEllipse {
        params,
        alpha,
        level: one_minus_rho2 * alpha.lambda(),
        density_height: alpha.value()
            / (2.0 * PI * params.sigma1 * params.sigma2 * one_minus_rho2.sqrt()),
    }
}

/// Coefficients `(a, b, c)` of the tangency condition
/// `a k² - 2 b k + c = 0` for lines `y - y₀ = k (x - x₀)`.
fn tangency_coefficients(params: &BivariateGaussian, lambda: f64, p: Point) -> (f64, f64, f64) {
    let u1 = params.mu1 - p.x;
    let u2 = params.mu2 - p.y;
    let (s1, s2) = (params.sigma1, params.sigma2);
    (
        u1 * u1 - lambda * s1 * s1,
        u1 * u2 - lambda * params.rho * s1 * s2,
        u2 * u2 - lambda * s2 * s2,
    )
}

/// Slopes `(k₁, k₂)`, `k₁ <= k₂`, of the two lines through `p` tangent to
/// the ellipse.
pub fn tangent_slopes(ellipse: &QuantileEllipse, p: Point) -> Result<(f64, f64), EllipseError> {
    if !ellipse.is_outside(p) {
        return Err(EllipseError::NoExternalTangents(p.x, p.y));
    }
    let (a, b, c) = tangency_coefficients(&ellipse.params, ellipse.alpha.lambda(), p);
    let scale = a.abs().max(b.abs()).max(c.abs()).max(1.0);
    if a.abs() < 1e-12 * scale {
        return Err(EllipseError::VerticalTangent(p.x, p.y));
    }
    // outside the ellipse the discriminant is positive; clamp rounding only
    let disc = (b * b - a * c).max(0.0);
    let root = disc.sqrt();
    // numerically stable pair of roots of a k² - 2 b k + c
    let q = b + b.signum() * root;
    let (k1, k2) = if q != 0.0 {
        (q / a, c / q)
    } else {
        (root / a, -root / a)
    };
    Ok(if k1 <= k2 { (k1, k2) } else { (k2, k1) })
}

/// Angle between the rays of direction `(1, k1)` and `(1, k2)`, i.e.
/// `tan Δθ = |k₂ - k₁| / (1 + k₁k₂)` resolved into `[0, π)`.
pub fn angle_between_slopes(k1: f64, k2: f64) -> f64 {
    (k2 - k1).abs().atan2(1.0 + k1 * k2)
}

/// True iff `p` lies in `{x₀ < μ₁-ε₁, y₀ < μ₂-ε₂} ∪ {x₀ > μ₁+ε₁, y₀ > μ₂+ε₂}`
/// with `εᵢ = σᵢ √λ`, where both tangent slopes are positive.
pub fn support_region_contains(params: &BivariateGaussian, alpha: Alpha, p: Point) -> bool {
    let sqrt_lambda = alpha.lambda().sqrt();
    let e1 = params.sigma1 * sqrt_lambda;
    let e2 = params.sigma2 * sqrt_lambda;
    (p.x < params.mu1 - e1 && p.y < params.mu2 - e2)
        || (p.x > params.mu1 + e1 && p.y > params.mu2 + e2)
}

/// Δθ from the closed-form relation between the angle and ρ:
///
/// `tan²Δθ = [(λσ₁σ₂ρ - u₁u₂)² - (λ²σ₁²σ₂² + u₁²u₂² - λσ₁²u₂² - λσ₂²u₁²)]
///           / ([λ(σ₁²+σ₂²) - (u₁²+u₂²)]² / 4)`
///
/// with `u = μ - p`. Requires `p` in the support region.
pub fn delta_theta_theory(
    params: &BivariateGaussian,
    alpha: Alpha,
    p: Point,
) -> Result<f64, EllipseError> {
    if !support_region_contains(params, alpha, p) {
        return Err(EllipseError::OutsideSupportRegion(p.x, p.y));
    }
    let lambda = alpha.lambda();
    let u1 = params.mu1 - p.x;
    let u2 = params.mu2 - p.y;
    let (s1, s2, rho) = (params.sigma1, params.sigma2, params.rho);
    let lhs = lambda * s1 * s2 * rho - u1 * u2;
    let base = lambda * lambda * s1 * s1 * s2 * s2 + u1 * u1 * u2 * u2
        - lambda * s1 * s1 * u2 * u2
        - lambda * s2 * s2 * u1 * u1;
    let radicand = lhs * lhs - base;
    if radicand < 0.0 {
        return Err(EllipseError::NegativeRadicand(radicand));
    }
    let half = (lambda * (s1 * s1 + s2 * s2) - (u1 * u1 + u2 * u2)) / 2.0;
    Ok((radicand.sqrt() / half.abs()).atan())
}

/// Marginal law of a generation-`i` node of the degenerate model started at
/// the origin: mean `i·μ`, variance `i·σ²`, covariance `Σ_{r≤i} f(r;ρ) σ₁σ₂`.
pub fn generation_marginal(
    mu_x: f64,
    mu_y: f64,
    sigma1: f64,
    sigma2: f64,
    rho: f64,
    damping: Damping,
    i: u32,
) -> Result<BivariateGaussian, EllipseError> {
    if i == 0 {
        return Err(EllipseError::InvalidSchedule(
            "generation index starts at 1",
        ));
    }
    let mut f_sum = 0.0;
    for r in 1..=i {
        f_sum += damping
            .value(r, rho)
            .map_err(|_| EllipseError::InvalidSchedule("damping undefined at this generation"))?;
    }
    let fi = i as f64;
    let corr = f_sum / fi;
    if !(corr.abs() < 1.0) {
        return Err(EllipseError::MarginalCorrelation(corr));
    }
    BivariateGaussian::new(
        fi * mu_x,
        fi * mu_y,
        fi.sqrt() * sigma1,
        fi.sqrt() * sigma2,
        corr,
    )
}

/// Sufficient condition for Δθᵢ to decrease with the generation:
/// `μ²/(λσ²) > max{f(1;ρ)/cos 2γ, 1}` with γ, σ, μ derived from the
/// increment parameters.
pub fn generation_monotone_condition(
    mu_x: f64,
    mu_y: f64,
    sigma1: f64,
    sigma2: f64,
    rho: f64,
    damping: Damping,
    alpha: Alpha,
) -> Result<bool, EllipseError> {
    if !(mu_x > 0.0 && mu_y > 0.0) {
        return Err(EllipseError::InvalidParams("means must be positive"));
    }
    let norm = (mu_x * mu_x + mu_y * mu_y).sqrt();
    let half_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let cos_g = half_sqrt2 * (mu_x + mu_y) / norm;
    let sin_g = half_sqrt2 * (mu_x - mu_y) / norm;
    let cos_2g = cos_g * cos_g - sin_g * sin_g;
    if cos_2g <= 0.0 {
        return Err(EllipseError::ConditionInapplicable(cos_2g));
    }
    let sigma_sq = (sigma1 * sigma1).max(sigma2 * sigma2) * cos_2g;
    let sigma = sigma_sq.sqrt();
    let mu = sigma / sigma1 * mu_x * cos_g - sigma / sigma2 * mu_y * sin_g;
    let f1 = damping
        .value(1, rho)
        .map_err(|_| EllipseError::InvalidSchedule("damping undefined at generation 1"))?;
    let lhs = mu * mu / (alpha.lambda() * sigma_sq);
    Ok(lhs > (f1 / cos_2g).max(1.0))
}

/// Per-generation multiplier εᵢ in `μ*ᵢ² = εᵢ τ + λσ²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EpsilonSchedule {
    /// εᵢ = Σ_{j≤i} 1/j.
    #[default]
    Harmonic,
    /// εᵢ = (1 - f(i;ρ)) / (1 - ρ), which equalizes Δθᵢ across generations.
    Exact { damping: Damping, rho: f64 },
}

impl EpsilonSchedule {
    pub fn epsilon(&self, i: u32) -> Result<f64, EllipseError> {
        if i == 0 {
            return Err(EllipseError::InvalidSchedule(
                "generation index starts at 1",
            ));
        }
        match *self {
            EpsilonSchedule::Harmonic => Ok((1..=i).map(|j| 1.0 / j as f64).sum()),
            EpsilonSchedule::Exact { damping, rho } => {
                if rho == 1.0 {
                    return Err(EllipseError::InvalidSchedule(
                        "exact schedule undefined at rho = 1",
                    ));
                }
                let f = damping.value(i, rho).map_err(|_| {
                    EllipseError::InvalidSchedule("damping undefined at this generation")
                })?;
                Ok((1.0 - f) / (1.0 - rho))
            }
        }
    }
}

/// Target normalized mean `μ*ᵢ = √(εᵢ τ + λ σ²)`.
pub fn mu_star(
    i: u32,
    tau: f64,
    sigma2: f64,
    alpha: Alpha,
    schedule: &EpsilonSchedule,
) -> Result<f64, EllipseError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(EllipseError::InvalidSchedule("tau must be > 0"));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(EllipseError::InvalidSchedule("sigma^2 must be > 0"));
    }
    let eps = schedule.epsilon(i)?;
    Ok((eps * tau + alpha.lambda() * sigma2).sqrt())
}
