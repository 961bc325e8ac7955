//! The TDΔθ pipeline and its Pearson baselines.
//!
//! Increments are extracted per generation, optionally sign-flipped and
//! normalized to mean `μ*ᵢ` and standard deviation `σ`, then pooled and
//! measured by the empirical included angle at the origin.

use std::f64::consts::PI;

use thiserror::Error;

use crate::ellipse::{mu_star, Alpha, EllipseError, EpsilonSchedule};
use crate::tree::{IncrementsByGeneration, PairedTreeData, TreeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("generation {generation} has {n} samples; at least 2 are required")]
    TooFewSamples { generation: u32, n: usize },
    #[error("degenerate variance in generation {generation}")]
    DegenerateVariance { generation: u32 },
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("point {0} coincides with the vertex")]
    VertexPoint(usize),
    #[error("zero variance in pooled sample")]
    ZeroVariance,
    #[error("no generation left to estimate from")]
    NoUsableGeneration,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Ellipse(#[from] EllipseError),
}

/// Sample means and MLE standard deviations of one generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_y: f64,
    pub sd_x: f64,
    pub sd_y: f64,
    pub n: usize,
}

impl Moments {
    /// MLE moments (variance divides by `n`); `None` for an empty sample.
    pub fn of(samples: &[(f64, f64)]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mean_x = samples.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = samples.iter().map(|p| p.1).sum::<f64>() / n;
        let var_x = samples.iter().map(|p| (p.0 - mean_x).powi(2)).sum::<f64>() / n;
        let var_y = samples.iter().map(|p| (p.1 - mean_y).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean_x,
            mean_y,
            sd_x: var_x.sqrt(),
            sd_y: var_y.sqrt(),
            n: samples.len(),
        })
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.sd_x > 0.0 && self.sd_y > 0.0)
    }
}

/// Moments of every generation; `generations[0]` is generation 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationMoments {
    pub generations: Vec<Moments>,
}

impl GenerationMoments {
    pub fn generation(&self, i: u32) -> &Moments {
        &self.generations[(i - 1) as usize]
    }
}

/// Per-generation MLE fit. Every generation needs at least two samples.
pub fn mle_per_generation(
    inc: &IncrementsByGeneration,
) -> Result<GenerationMoments, EstimationError> {
    let generations = inc
        .generations
        .iter()
        .enumerate()
        .map(|(g, s)| {
            if s.len() < 2 {
                return Err(EstimationError::TooFewSamples {
                    generation: g as u32 + 1,
                    n: s.len(),
                });
            }
            Ok(Moments::of(s).expect("non-empty"))
        })
        .collect::<Result<_, _>>()?;
    Ok(GenerationMoments { generations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationConfig {
    pub alpha: Alpha,
    pub tau: f64,
    pub sigma2: f64,
    pub schedule: EpsilonSchedule,
    pub normalize: bool,
    pub sign_flip: bool,
    /// Under normalization, leave out generations that cannot be fitted
    /// (fewer than two samples or zero variance) instead of failing.
    pub skip_unfittable: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            alpha: Alpha::default(),
            tau: 0.1,
            sigma2: 1.0,
            schedule: EpsilonSchedule::Harmonic,
            normalize: true,
            sign_flip: false,
            skip_unfittable: true,
        }
    }
}

impl NormalizationConfig {
    pub fn validate(&self) -> Result<(), EstimationError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(EstimationError::InvalidConfig("tau must be > 0"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(EstimationError::InvalidConfig("sigma^2 must be > 0"));
        }
        Ok(())
    }
}

fn normalize_generation(
    i: u32,
    samples: &[(f64, f64)],
    m: &Moments,
    cfg: &NormalizationConfig,
) -> Result<Vec<(f64, f64)>, EstimationError> {
    if m.is_degenerate() || !(m.mean_x.is_finite() && m.mean_y.is_finite()) {
        return Err(EstimationError::DegenerateVariance { generation: i });
    }
    let target = mu_star(i, cfg.tau, cfg.sigma2, cfg.alpha, &cfg.schedule)?;
    let sigma = cfg.sigma2.sqrt();
    let (kx, ky) = (sigma / m.sd_x, sigma / m.sd_y);
    Ok(samples
        .iter()
        .map(|&(x, y)| ((x - m.mean_x) * kx + target, (y - m.mean_y) * ky + target))
        .collect())
}

/// Rescales each generation to standard deviation `σ` and recentres it on
/// `(μ*ᵢ, μ*ᵢ)`: `x' = (x - μ̂)·σ/σ̂ + μ*ᵢ`.
pub fn normalize_increments(
    inc: &IncrementsByGeneration,
    moments: &GenerationMoments,
    cfg: &NormalizationConfig,
) -> Result<IncrementsByGeneration, EstimationError> {
    cfg.validate()?;
    if moments.generations.len() != inc.generations.len() {
        return Err(EstimationError::InvalidConfig(
            "moments do not match the increments",
        ));
    }
    let generations = inc
        .generations
        .iter()
        .zip(&moments.generations)
        .enumerate()
        .map(|(g, (s, m))| normalize_generation(g as u32 + 1, s, m, cfg))
        .collect::<Result<_, _>>()?;
    Ok(IncrementsByGeneration { generations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleEstimate {
    pub delta_theta: f64,
    /// Width of each contiguous window of `m` sorted polar angles, in
    /// order of the window's lower edge.
    pub candidate_widths: Vec<f64>,
    pub m: usize,
    pub n: usize,
}

impl AngleEstimate {
    pub fn degrees(&self) -> f64 {
        self.delta_theta.to_degrees()
    }
}

/// Number of points a candidate pair of lines must cover: `⌈(1-α)n⌉`.
pub fn retained_count(alpha: Alpha, n: usize) -> usize {
    let raw = (1.0 - alpha.value()) * n as f64;
    ((raw - 1e-9).ceil().max(1.0) as usize).min(n)
}

/// Directions of the lines joining `vertex` to each point, as angles in
/// `[0, π)`, ordered counter-clockwise starting just after the widest empty
/// sector. A point and its reflection through the vertex share a line.
/// Each entry is `(angle, index)`.
pub fn ordered_line_angles(
    points: &[(f64, f64)],
    vertex: (f64, f64),
) -> Result<Vec<(f64, usize)>, EstimationError> {
    if points.len() < 2 {
        return Err(EstimationError::TooFewPoints(points.len()));
    }
    let mut angles = Vec::with_capacity(points.len());
    for (k, &(x, y)) in points.iter().enumerate() {
        let (dx, dy) = (x - vertex.0, y - vertex.1);
        if dx == 0.0 && dy == 0.0 {
            return Err(EstimationError::VertexPoint(k));
        }
        angles.push((line_angle(dy.atan2(dx)), k));
    }
    angles.sort_by(|a, b| a.0.total_cmp(&b.0));

    let n = angles.len();
    let mut start = 0;
    let mut widest = angles[0].0 + PI - angles[n - 1].0;
    for k in 1..n {
        let gap = angles[k].0 - angles[k - 1].0;
        if gap > widest {
            widest = gap;
            start = k;
        }
    }
    angles.rotate_left(start);
    Ok(angles)
}

/// Folds a polar angle in `[-π, π]` onto the line direction in `[0, π)`.
pub fn line_angle(theta: f64) -> f64 {
    if theta < 0.0 {
        theta + PI
    } else if theta >= PI {
        theta - PI
    } else {
        theta
    }
}

/// Counter-clockwise angle from line direction `lo` to `hi`, both in `[0, π)`.
pub fn ccw_width(lo: f64, hi: f64) -> f64 {
    let d = hi - lo;
    if d < 0.0 {
        d + PI
    } else {
        d
    }
}

/// Empirical included angle: the mean width over all pairs of lines through
/// the vertex that pass through observations and enclose at least `(1-α)n`
/// of them with the smallest angle.
pub fn delta_theta_hat(
    points: &[(f64, f64)],
    alpha: Alpha,
    vertex: (f64, f64),
) -> Result<AngleEstimate, EstimationError> {
    let angles = ordered_line_angles(points, vertex)?;
    let n = angles.len();
    let m = retained_count(alpha, n);
    let candidate_widths: Vec<f64> = (0..=n - m)
        .map(|lo| ccw_width(angles[lo].0, angles[lo + m - 1].0))
        .collect();
    let delta_theta = candidate_widths.iter().sum::<f64>() / candidate_widths.len() as f64;
    Ok(AngleEstimate {
        delta_theta,
        candidate_widths,
        m,
        n,
    })
}

/// Result of the full pipeline on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TdEstimate {
    pub angle: AngleEstimate,
    /// Generations left out because they could not be fitted.
    pub skipped_generations: Vec<u32>,
    pub flipped: bool,
}

/// Increments after the optional sign flip and normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedIncrements {
    /// Pooled over the generations that were kept.
    pub points: Vec<(f64, f64)>,
    pub skipped_generations: Vec<u32>,
    pub flipped: bool,
}

pub fn prepare_increments(
    data: &PairedTreeData,
    cfg: &NormalizationConfig,
) -> Result<PreparedIncrements, EstimationError> {
    cfg.validate()?;
    let inc = data.to_dspgm()?.extract_increments()?;
    let (inc, flipped) = if cfg.sign_flip {
        sign_flip_if_negative(&inc)?
    } else {
        (inc, false)
    };
    if !cfg.normalize {
        return Ok(PreparedIncrements {
            points: inc.pooled().collect(),
            skipped_generations: Vec::new(),
            flipped,
        });
    }
    let mut pooled = Vec::with_capacity(inc.total());
    let mut skipped = Vec::new();
    for (g, samples) in inc.generations.iter().enumerate() {
        let i = g as u32 + 1;
        let fitted = Moments::of(samples).filter(|m| m.n >= 2 && !m.is_degenerate());
        match fitted {
            Some(m) => pooled.extend(normalize_generation(i, samples, &m, cfg)?),
            None if cfg.skip_unfittable => skipped.push(i),
            None if samples.len() < 2 => {
                return Err(EstimationError::TooFewSamples {
                    generation: i,
                    n: samples.len(),
                })
            }
            None => return Err(EstimationError::DegenerateVariance { generation: i }),
        }
    }
    if pooled.is_empty() {
        return Err(EstimationError::NoUsableGeneration);
    }
    Ok(PreparedIncrements {
        points: pooled,
        skipped_generations: skipped,
        flipped,
    })
}

/// TDΔθ: DSPGM expansion, increments, optional sign flip and normalization,
/// then the empirical angle at the origin over all kept generations.
pub fn td_delta_theta(
    data: &PairedTreeData,
    cfg: &NormalizationConfig,
) -> Result<TdEstimate, EstimationError> {
    let prepared = prepare_increments(data, cfg)?;
    let angle = delta_theta_hat(&prepared.points, cfg.alpha, (0.0, 0.0))?;
    Ok(TdEstimate {
        angle,
        skipped_generations: prepared.skipped_generations,
        flipped: prepared.flipped,
    })
}

/// Sample Pearson correlation of paired values.
pub fn pearson(pairs: &[(f64, f64)]) -> Result<f64, EstimationError> {
    if pairs.len() < 2 {
        return Err(EstimationError::TooFewPoints(pairs.len()));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(EstimationError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Negates every `Δx` when the pooled correlation is negative.
pub fn sign_flip_if_negative(
    inc: &IncrementsByGeneration,
) -> Result<(IncrementsByGeneration, bool), EstimationError> {
    let pooled: Vec<_> = inc.pooled().collect();
    if pearson(&pooled)? < 0.0 {
        Ok((inc.map(|_, (x, y)| (-x, y)), true))
    } else {
        Ok((inc.clone(), false))
    }
}

/// Pearson correlation of all observed `(x, y)` values in node order.
pub fn pearson_flat(data: &PairedTreeData) -> Result<f64, EstimationError> {
    let pairs: Vec<(f64, f64)> = data
        .nodes
        .iter()
        .flat_map(|n| n.x.iter().copied().zip(n.y.iter().copied()))
        .collect();
    pearson(&pairs)
}

/// Sample Pearson correlation per generation, omitting generations where it
/// is undefined.
pub fn per_generation_pearson(inc: &IncrementsByGeneration) -> Vec<(u32, f64)> {
    inc.generations
        .iter()
        .enumerate()
        .filter_map(|(g, s)| pearson(s).ok().map(|r| (g as u32 + 1, r)))
        .collect()
}
