//! Seeded synthesis of paired tree-shaped datasets.
//!
//! Increments of generation `i` are bivariate Gaussian with correlation
//! `f(i; ρ)`; node values are the anchor plus the path sum of increments.
//! Non-Gaussian data keep the Gaussian dependence through a Gaussian copula
//! (continuous and Poisson targets) or by discretizing each coordinate.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::distributions::{standard_normal_cdf, DistError, Family};
use crate::tree::{NodeRecord, PairedTreeData};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
    #[error("damping pattern undefined at generation {i} (max generation {max})")]
    GenerationOutOfRange { i: u32, max: u32 },
    #[error("correlation {0} must satisfy |r| < 1")]
    Correlation(f64),
    #[error("copula probability {phi} for sample {index} underflowed to the boundary")]
    CopulaBoundary { index: usize, phi: f64 },
    #[error("cannot discretize: {0}")]
    Discretize(&'static str),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Generation-dependent correlation pattern `f(i; ρ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Damping {
    /// `ρ^i`
    #[default]
    Exponential,
    /// `(1 - (i-1)/I) ρ` for a tree of `I` generations.
    Linear { max_generation: u32 },
}

impl Damping {
    pub fn value(&self, i: u32, rho: f64) -> Result<f64, GenError> {
        match *self {
            Damping::Exponential => {
                if i == 0 {
                    return Err(GenError::GenerationOutOfRange { i, max: u32::MAX });
                }
                Ok(rho.powi(i as i32))
            }
            Damping::Linear { max_generation } => {
                if i == 0 || i > max_generation {
                    return Err(GenError::GenerationOutOfRange {
                        i,
                        max: max_generation,
                    });
                }
                Ok((1.0 - (i - 1) as f64 / max_generation as f64) * rho)
            }
        }
    }
}

/// `f(i; ρ)` for the given pattern.
pub fn f_pattern(kind: Damping, i: u32, rho: f64) -> Result<f64, GenError> {
    kind.value(i, rho)
}

/// Deterministic random stream: ChaCha20 keyed by `seed` (expanded with
/// `SeedableRng::seed_from_u64`) on ChaCha stream `stream`. Identical
/// `(seed, stream)` pairs give identical sequences on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha20Rng,
    seed: u64,
    stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw on `[lo, hi]`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u: f64 = self.rng.random();
        lo + (hi - lo) * u
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// One draw from N((μ₁, μ₂), [[σ₁², rσ₁σ₂], [rσ₁σ₂, σ₂²]]) via the lower
/// Cholesky factor applied to two independent standard normals.
pub fn sample_bivariate_normal(
    mu1: f64,
    mu2: f64,
    sigma1: f64,
    sigma2: f64,
    r: f64,
    rng: &mut RngStream,
) -> Result<(f64, f64), GenError> {
    if !(r.abs() < 1.0) {
        return Err(GenError::Correlation(r));
    }
    let z1 = rng.standard_normal();
    let z2 = rng.standard_normal();
    Ok((
        mu1 + sigma1 * z1,
        mu2 + sigma2 * (r * z1 + (1.0 - r * r).sqrt() * z2),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiscretizeMethod {
    EqualWidth,
    EqualFreq,
}

/// Marginal law imposed on the increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Gaussian,
    /// Copula onto `family`; with `loc_scale`, each coordinate is then
    /// mapped to `μ + σ·v` using its own increment mean and sd.
    Continuous {
        family: Family,
        loc_scale: bool,
    },
    Poisson {
        mean: f64,
    },
    Discretized {
        method: DiscretizeMethod,
        bins: usize,
    },
}

fn phi_checked(v: f64, mean: f64, sd: f64, index: usize) -> Result<f64, GenError> {
    let phi = standard_normal_cdf((v - mean) / sd);
    if phi <= 0.0 || phi >= 1.0 || phi.is_nan() {
        return Err(GenError::CopulaBoundary { index, phi });
    }
    Ok(phi)
}

/// Gaussian-copula transform of Gaussian increments onto a continuous target:
/// `Δx = F⁻¹(Φ((Δx* - μˣ)/σ₁))`, likewise for `y`.
pub fn copula_continuous(
    source: &[(f64, f64)],
    mu_x: f64,
    mu_y: f64,
    sigma1: f64,
    sigma2: f64,
    family: Family,
) -> Result<Vec<(f64, f64)>, GenError> {
    family.validate()?;
    if family.is_discrete() {
        return Err(GenError::InvalidConfig(
            "continuous copula needs a continuous family".into(),
        ));
    }
    source
        .iter()
        .enumerate()
        .map(|(k, &(x, y))| {
            let px = phi_checked(x, mu_x, sigma1, k)?;
            let py = phi_checked(y, mu_y, sigma2, k)?;
            Ok((family.inverse_cdf(px)?, family.inverse_cdf(py)?))
        })
        .collect()
}

/// Poisson copula: `Δx` is the integer with `F(Δx) <= Φ₁ < F(Δx + 1)`,
/// clamped to 0 below `F(0)`.
pub fn copula_poisson(
    source: &[(f64, f64)],
    mu_x: f64,
    mu_y: f64,
    sigma1: f64,
    sigma2: f64,
    mean: f64,
) -> Result<Vec<(i64, i64)>, GenError> {
    let family = Family::Poisson { mean };
    family.validate()?;
    source
        .iter()
        .enumerate()
        .map(|(k, &(x, y))| {
            let px = phi_checked(x, mu_x, sigma1, k)?;
            let py = phi_checked(y, mu_y, sigma2, k)?;
            Ok((
                family.inverse_cdf(px)? as i64,
                family.inverse_cdf(py)? as i64,
            ))
        })
        .collect()
}

/// Interval index in `1..=bins` for every sample.
///
/// Equal width splits `[min, max]` uniformly (the max falls in the top bin).
/// Equal frequency assigns the sample of rank `r` (stable order for ties) to
/// bin `⌊r·bins/n⌋ + 1`.
pub fn discretize(
    samples: &[f64],
    method: DiscretizeMethod,
    bins: usize,
) -> Result<Vec<u32>, GenError> {
    if bins < 2 {
        return Err(GenError::Discretize("need at least 2 bins"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(GenError::Discretize("non-finite sample"));
    }
    let n = samples.len();
    match method {
        DiscretizeMethod::EqualWidth => {
            let (min, max) = samples
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            if !(max > min) {
                return Err(GenError::Discretize("equal-width needs max > min"));
            }
            let width = (max - min) / bins as f64;
            Ok(samples
                .iter()
                .map(|&v| (((v - min) / width).floor() as usize).min(bins - 1) as u32 + 1)
                .collect())
        }
        DiscretizeMethod::EqualFreq => {
            if bins > n {
                return Err(GenError::Discretize(
                    "equal-frequency needs bins <= sample count",
                ));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));
            let mut out = vec![0u32; n];
            for (rank, &idx) in order.iter().enumerate() {
                out[idx] = (rank * bins / n) as u32 + 1;
            }
            Ok(out)
        }
    }
}

/// Parameters of one synthesized tree pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub branching: usize,
    pub depth: u32,
    /// Observations per node for each generation; empty means one each.
    pub series_len: Vec<usize>,
    pub mu_x: f64,
    pub mu_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub rho: f64,
    pub damping: Damping,
    pub anchor: (f64, f64),
    pub marginal: Marginal,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            branching: 2,
            depth: 7,
            series_len: Vec::new(),
            mu_x: 2.0,
            mu_y: 2.0,
            var_x: 1.0,
            var_y: 1.0,
            rho: 0.5,
            damping: Damping::Exponential,
            anchor: (0.0, 0.0),
            marginal: Marginal::Gaussian,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidConfig(m.into()));
        if self.branching < 1 {
            return bad("branching must be >= 1");
        }
        if self.depth < 1 {
            return bad("depth must be >= 1");
        }
        if !self.series_len.is_empty() && self.series_len.len() != self.depth as usize {
            return bad("series_len must be empty or hold one entry per generation");
        }
        if self.series_len.contains(&0) {
            return bad("series lengths must be >= 1");
        }
        if !(self.var_x > 0.0
            && self.var_y > 0.0
            && self.var_x.is_finite()
            && self.var_y.is_finite())
        {
            return bad("variances must be > 0");
        }
        if !(self.mu_x.is_finite() && self.mu_y.is_finite()) {
            return bad("means must be finite");
        }
        if !(self.rho.abs() < 1.0) {
            return bad("rho must satisfy |rho| < 1");
        }
        for i in 1..=self.depth {
            let f = self.damping.value(i, self.rho)?;
            if !(f.abs() < 1.0) {
                return bad("damping value outside (-1, 1)");
            }
        }
        match self.marginal {
            Marginal::Continuous { family, .. } => {
                family.validate()?;
                if family.is_discrete() {
                    return bad("continuous marginal needs a continuous family");
                }
            }
            Marginal::Poisson { mean } => Family::Poisson { mean }.validate()?,
            Marginal::Discretized { bins, .. } if bins < 2 => return bad("need at least 2 bins"),
            _ => {}
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        (0..self.depth).map(|g| self.branching.pow(g)).sum()
    }

    fn series_len_at(&self, generation: u32) -> usize {
        self.series_len
            .get(generation as usize - 1)
            .copied()
            .unwrap_or(1)
    }
}

/// A generated pair together with the increments that built it, one list
/// per node (in node order), each as long as the node's series.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPair {
    pub data: PairedTreeData,
    pub increments: Vec<Vec<(f64, f64)>>,
}

/// Full `branching`-ary tree with `depth` generations in breadth-first order;
/// node ids are 1-based breadth-first indices.
pub fn full_tree_parents(branching: usize, depth: u32) -> Vec<(Option<usize>, u32)> {
    let mut out = vec![(None, 1)];
    let mut start = 0;
    for g in 2..=depth {
        let end = out.len();
        for p in start..end {
            for _ in 0..branching {
                out.push((Some(p), g));
            }
        }
        start = end;
    }
    out
}

/// Draws one pair of trees from the configured model.
pub fn gen_pair(config: &GenConfig, rng: &mut RngStream) -> Result<PairedTreeData, GenError> {
    gen_pair_recorded(config, rng).map(|g| g.data)
}

/// As [`gen_pair`], also returning the per-node increments.
pub fn gen_pair_recorded(
    config: &GenConfig,
    rng: &mut RngStream,
) -> Result<GeneratedPair, GenError> {
    config.validate()?;
    let shape = full_tree_parents(config.branching, config.depth);
    let (s1, s2) = (config.var_x.sqrt(), config.var_y.sqrt());

    // Gaussian source increments, node by node
    let mut source = Vec::with_capacity(shape.len());
    for &(_, g) in &shape {
        let r = config.damping.value(g, config.rho)?;
        let t = config.series_len_at(g);
        let mut incs = Vec::with_capacity(t);
        for _ in 0..t {
            incs.push(sample_bivariate_normal(
                config.mu_x,
                config.mu_y,
                s1,
                s2,
                r,
                rng,
            )?);
        }
        source.push(incs);
    }

    let flat: Vec<(f64, f64)> = source.iter().flatten().copied().collect();
    let transformed: Vec<(f64, f64)> = match config.marginal {
        Marginal::Gaussian => flat,
        Marginal::Continuous { family, loc_scale } => {
            let out = copula_continuous(&flat, config.mu_x, config.mu_y, s1, s2, family)?;
            if loc_scale {
                out.into_iter()
                    .map(|(a, b)| (config.mu_x + s1 * a, config.mu_y + s2 * b))
                    .collect()
            } else {
                out
            }
        }
        Marginal::Poisson { mean } => {
            copula_poisson(&flat, config.mu_x, config.mu_y, s1, s2, mean)?
                .into_iter()
                .map(|(a, b)| (a as f64, b as f64))
                .collect()
        }
        Marginal::Discretized { method, bins } => {
            let xs: Vec<f64> = flat.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = flat.iter().map(|p| p.1).collect();
            let dx = discretize(&xs, method, bins)?;
            let dy = discretize(&ys, method, bins)?;
            dx.into_iter()
                .zip(dy)
                .map(|(a, b)| (a as f64, b as f64))
                .collect()
        }
    };

    let mut increments = Vec::with_capacity(shape.len());
    let mut cursor = transformed.into_iter();
    for incs in &source {
        increments.push(cursor.by_ref().take(incs.len()).collect::<Vec<_>>());
    }

    let mut nodes: Vec<NodeRecord> = Vec::with_capacity(shape.len());
    for (k, &(parent, _)) in shape.iter().enumerate() {
        let (mut x, mut y) = match parent {
            Some(p) => (*nodes[p].x.last().unwrap(), *nodes[p].y.last().unwrap()),
            None => config.anchor,
        };
        let mut xs = Vec::with_capacity(increments[k].len());
        let mut ys = Vec::with_capacity(increments[k].len());
        for &(dx, dy) in &increments[k] {
            x += dx;
            y += dy;
            xs.push(x);
            ys.push(y);
        }
        nodes.push(NodeRecord {
            id: (k + 1).to_string(),
            parent_id: parent.map(|p| (p + 1).to_string()),
            x: xs,
            y: ys,
        });
    }
    Ok(GeneratedPair {
        data: PairedTreeData::new(config.anchor, nodes),
        increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pearson(p: &[(f64, f64)]) -> f64 {
        let n = p.len() as f64;
        let mx = p.iter().map(|v| v.0).sum::<f64>() / n;
        let my = p.iter().map(|v| v.1).sum::<f64>() / n;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for &(x, y) in p {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn damping_values() {
        assert_abs_diff_eq!(f_pattern(Damping::Exponential, 2, 0.5).unwrap(), 0.25);
        let lin = Damping::Linear { max_generation: 7 };
        assert_abs_diff_eq!(f_pattern(lin, 1, 0.6).unwrap(), 0.6);
        assert_abs_diff_eq!(f_pattern(lin, 7, 0.6).unwrap(), 0.085714, epsilon = 1e-6);
        assert!(f_pattern(lin, 8, 0.6).is_err());
        assert!(f_pattern(Damping::Exponential, 0, 0.6).is_err());
    }

    #[test]
    fn damping_monotone() {
        for kind in [Damping::Exponential, Damping::Linear { max_generation: 7 }] {
            for k in 1..99 {
                let rho = k as f64 / 100.0;
                for i in 1..7 {
                    let here = kind.value(i, rho).unwrap();
                    assert!(kind.value(i + 1, rho).unwrap() < here);
                    assert!(kind.value(i, rho + 0.01).unwrap() > here);
                }
            }
        }
    }

    #[test]
    fn stream_determinism() {
        let mut a = RngStream::new(42, 3);
        let mut b = RngStream::new(42, 3);
        let mut c = RngStream::new(42, 4);
        let va: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let vb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let vc: Vec<u64> = (0..8).map(|_| c.next_u64()).collect();
        assert_eq!(va, vb);
        assert_ne!(va, vc);
    }

    #[test]
    fn bivariate_normal_correlation() {
        let mut rng = RngStream::new(7, 0);
        let draws: Vec<_> = (0..20_000)
            .map(|_| sample_bivariate_normal(1.0, -2.0, 2.0, 0.5, 0.7, &mut rng).unwrap())
            .collect();
        assert!((pearson(&draws) - 0.7).abs() < 0.02);
        let mean_x = draws.iter().map(|p| p.0).sum::<f64>() / draws.len() as f64;
        assert!((mean_x - 1.0).abs() < 0.05);
        assert!(sample_bivariate_normal(0.0, 0.0, 1.0, 1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn independent_when_uncorrelated() {
        let mut rng = RngStream::new(11, 0);
        let draws: Vec<_> = (0..20_000)
            .map(|_| sample_bivariate_normal(0.0, 0.0, 1.0, 1.0, 0.0, &mut rng).unwrap())
            .collect();
        assert!(pearson(&draws).abs() < 3.0 / (draws.len() as f64).sqrt());
    }

    #[test]
    fn full_binary_tree_shape() {
        let cfg = GenConfig::default();
        assert_eq!(cfg.node_count(), 127);
        let data = gen_pair(&cfg, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(data.nodes.len(), 127);
        let topo = data.topology().unwrap();
        assert_eq!(topo.max_generation(), 7);
        assert_eq!(topo.leaf_count(), 64);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig {
            marginal: Marginal::Poisson { mean: 3.0 },
            ..GenConfig::default()
        };
        let a = gen_pair(&cfg, &mut RngStream::new(5, 2)).unwrap();
        let b = gen_pair(&cfg, &mut RngStream::new(5, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn increments_round_trip() {
        let cfg = GenConfig {
            marginal: Marginal::Continuous {
                family: Family::Gamma {
                    shape: 2.0,
                    scale: 1.0,
                },
                loc_scale: false,
            },
            ..GenConfig::default()
        };
        let g = gen_pair_recorded(&cfg, &mut RngStream::new(9, 0)).unwrap();
        let inc = g.data.extract_increments().unwrap();
        let topo = g.data.topology().unwrap();
        let mut seen = [0usize; 7];
        for (k, node_incs) in g.increments.iter().enumerate() {
            let gen = topo.generation[k];
            let got = inc.generation(gen)[seen[gen as usize - 1]];
            seen[gen as usize - 1] += 1;
            assert_abs_diff_eq!(got.0, node_incs[0].0, epsilon = 1e-12);
            assert_abs_diff_eq!(got.1, node_incs[0].1, epsilon = 1e-12);
        }
    }

    #[test]
    fn spgm_series_lengths() {
        let cfg = GenConfig {
            depth: 3,
            series_len: vec![2, 3, 1],
            ..GenConfig::default()
        };
        let data = gen_pair(&cfg, &mut RngStream::new(2, 0)).unwrap();
        assert_eq!(data.observation_count(), 2 + 2 * 3 + 4);
        let d = data.to_dspgm().unwrap();
        assert_eq!(d.topology().unwrap().max_generation(), 6);
    }

    #[test]
    fn config_validation() {
        let bad_rho = GenConfig {
            rho: 1.0,
            ..GenConfig::default()
        };
        assert!(bad_rho.validate().is_err());
        let bad_lin = GenConfig {
            damping: Damping::Linear { max_generation: 3 },
            ..GenConfig::default()
        };
        assert!(bad_lin.validate().is_err());
        let bad_series = GenConfig {
            series_len: vec![1, 2],
            ..GenConfig::default()
        };
        assert!(bad_series.validate().is_err());
    }

    #[test]
    fn self_copula_is_identity() {
        let mut rng = RngStream::new(3, 0);
        let src: Vec<_> = (0..500)
            .map(|_| sample_bivariate_normal(1.5, -0.5, 0.8, 1.7, 0.4, &mut rng).unwrap())
            .collect();
        let out = copula_continuous(
            &src,
            1.5,
            1.5,
            0.8,
            0.8,
            Family::Normal { mean: 1.5, sd: 0.8 },
        )
        .unwrap();
        for (a, b) in src.iter().zip(&out) {
            assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn exponential_copula_closed_form() {
        let src = [(0.3, -1.2), (2.0, 0.1)];
        let exp = Family::Gamma {
            shape: 1.0,
            scale: 1.0,
        };
        let out = copula_continuous(&src, 0.0, 0.0, 1.0, 1.0, exp).unwrap();
        for (s, o) in src.iter().zip(&out) {
            assert_abs_diff_eq!(o.0, -(1.0 - standard_normal_cdf(s.0)).ln(), epsilon = 1e-10);
            assert_abs_diff_eq!(o.1, -(1.0 - standard_normal_cdf(s.1)).ln(), epsilon = 1e-10);
        }
    }

    #[test]
    fn copula_boundary_error() {
        let exp = Family::Gamma {
            shape: 1.0,
            scale: 1.0,
        };
        let err =
            copula_continuous(&[(0.0, 0.0), (40.0, 0.0)], 0.0, 0.0, 1.0, 1.0, exp).unwrap_err();
        assert!(matches!(err, GenError::CopulaBoundary { index: 1, .. }));
        assert!(copula_poisson(&[(-40.0, 0.0)], 0.0, 0.0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn poisson_copula_rule() {
        // Φ₁ = 0.2 with mean 2 (F(0)=0.1353, F(1)=0.4060) gives 0
        let z = crate::distributions::standard_normal_quantile(0.2).unwrap();
        let out = copula_poisson(&[(z, z)], 0.0, 0.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(out, vec![(0, 0)]);
        // Φ₁ below F(0) clamps to 0
        let z = crate::distributions::standard_normal_quantile(0.05).unwrap();
        assert_eq!(
            copula_poisson(&[(z, z)], 0.0, 0.0, 1.0, 1.0, 2.0).unwrap(),
            vec![(0, 0)]
        );
        let grid: Vec<(f64, f64)> = (-30..=30).map(|k| (k as f64 / 10.0, 0.0)).collect();
        let out = copula_poisson(&grid, 0.0, 0.0, 1.0, 1.0, 4.0).unwrap();
        assert!(out.windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn discretize_examples() {
        assert_eq!(
            discretize(&[0.0, 1.0, 2.0, 3.0], DiscretizeMethod::EqualWidth, 2).unwrap(),
            vec![1, 1, 2, 2]
        );
        assert_eq!(
            discretize(&[5.0, 1.0, 3.0, 9.0], DiscretizeMethod::EqualFreq, 2).unwrap(),
            vec![2, 1, 1, 2]
        );
        let s = [0.3, -1.0, 2.5, 0.0, 7.0];
        let mut perm = discretize(&s, DiscretizeMethod::EqualFreq, 5).unwrap();
        perm.sort_unstable();
        assert_eq!(perm, vec![1, 2, 3, 4, 5]);
        assert!(discretize(&[1.0, 1.0], DiscretizeMethod::EqualWidth, 2).is_err());
        assert!(discretize(&[1.0, 2.0], DiscretizeMethod::EqualFreq, 3).is_err());
        assert!(discretize(&[1.0, 2.0], DiscretizeMethod::EqualWidth, 1).is_err());
        // ties keep stable order
        assert_eq!(
            discretize(&[1.0, 1.0, 1.0, 1.0], DiscretizeMethod::EqualFreq, 2).unwrap(),
            vec![1, 1, 2, 2]
        );
    }
}
