//! Monte-Carlo comparison runner and mimic bootstrap.
//!
//! Every replicate owns a [`RngStream`] keyed by `(seed, replicate index)`
//! and results are reduced in index order, so outputs do not depend on the
//! worker-thread count.

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::datagen::{
    gen_pair, sample_bivariate_normal, Damping, DiscretizeMethod, GenConfig, GenError, Marginal,
    RngStream,
};
use crate::distributions::Family;
use crate::estimation::{
    pearson, pearson_flat, td_delta_theta, EstimationError, Moments, NormalizationConfig,
};
use crate::tree::{NodeRecord, PairedTreeData, TreeError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("all {count} replicates failed; first failure: {first}")]
    AllFailed { count: usize, first: String },
    #[error("cannot build worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// Closed interval a parameter is drawn uniformly from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn draw(&self, rng: &mut RngStream) -> f64 {
        rng.uniform(self.lo, self.hi)
    }

    fn is_valid(&self, positive: bool) -> bool {
        self.lo.is_finite()
            && self.hi.is_finite()
            && self.lo <= self.hi
            && (!positive || self.lo > 0.0)
    }
}

/// Ranges of the increment means and variances (both coordinates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuisanceRanges {
    pub mu: Range,
    pub var: Range,
}

impl NuisanceRanges {
    pub const SAME: Self = Self {
        mu: Range::new(1.0, 3.0),
        var: Range::new(0.5, 2.5),
    };
    pub const DIFF_FIRST: Self = Self {
        mu: Range::new(2.5, 3.0),
        var: Range::new(0.05, 0.1),
    };
    pub const DIFF_SECOND: Self = Self {
        mu: Range::new(1.5, 2.0),
        var: Range::new(0.25, 0.35),
    };
}

/// Ranges of the non-Gaussian marginal parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyRanges {
    pub gamma_shape: Range,
    pub gamma_scale: Range,
    pub f_d1: Range,
    pub f_d2: Range,
    pub t_dof: Range,
    pub poisson_mean: Range,
}

impl Default for FamilyRanges {
    fn default() -> Self {
        Self {
            gamma_shape: Range::new(2.0, 5.0),
            gamma_scale: Range::new(0.5, 1.5),
            f_d1: Range::new(5.0, 20.0),
            f_d2: Range::new(10.0, 30.0),
            t_dof: Range::new(5.0, 15.0),
            poisson_mean: Range::new(5.0, 10.0),
        }
    }
}

/// Marginal family of the simulated increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilySpec {
    Gaussian,
    Gamma,
    F,
    /// Location-scale Student-t: `μ + σ·t`.
    StudentT,
    Poisson,
    EqualWidth {
        bins: usize,
    },
    EqualFreq {
        bins: usize,
    },
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilySpec::Gaussian => write!(f, "gaussian"),
            FamilySpec::Gamma => write!(f, "gamma"),
            FamilySpec::F => write!(f, "f"),
            FamilySpec::StudentT => write!(f, "t"),
            FamilySpec::Poisson => write!(f, "poisson"),
            FamilySpec::EqualWidth { bins } => write!(f, "equal_width({bins})"),
            FamilySpec::EqualFreq { bins } => write!(f, "equal_freq({bins})"),
        }
    }
}

impl FamilySpec {
    fn draw(&self, ranges: &FamilyRanges, rng: &mut RngStream) -> Marginal {
        match *self {
            FamilySpec::Gaussian => Marginal::Gaussian,
            FamilySpec::Gamma => Marginal::Continuous {
                family: Family::Gamma {
                    shape: ranges.gamma_shape.draw(rng),
                    scale: ranges.gamma_scale.draw(rng),
                },
                loc_scale: false,
            },
            FamilySpec::F => Marginal::Continuous {
                family: Family::F {
                    d1: ranges.f_d1.draw(rng),
                    d2: ranges.f_d2.draw(rng),
                },
                loc_scale: false,
            },
            FamilySpec::StudentT => Marginal::Continuous {
                family: Family::StudentT {
                    dof: ranges.t_dof.draw(rng),
                },
                loc_scale: true,
            },
            FamilySpec::Poisson => Marginal::Poisson {
                mean: ranges.poisson_mean.draw(rng),
            },
            FamilySpec::EqualWidth { bins } => Marginal::Discretized {
                method: DiscretizeMethod::EqualWidth,
                bins,
            },
            FamilySpec::EqualFreq { bins } => Marginal::Discretized {
                method: DiscretizeMethod::EqualFreq,
                bins,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DampingKind {
    #[default]
    Exponential,
    Linear,
}

impl DampingKind {
    pub fn with_depth(self, depth: u32) -> Damping {
        match self {
            DampingKind::Exponential => Damping::Exponential,
            DampingKind::Linear => Damping::Linear {
                max_generation: depth,
            },
        }
    }
}

impl fmt::Display for DampingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DampingKind::Exponential => "exp",
            DampingKind::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    /// Both pairs share one draw of the nuisance parameters.
    SameParams,
    /// Each pair draws its own nuisance parameters from its own ranges.
    DiffParams,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::SameParams => "same",
            Setting::DiffParams => "diff",
        })
    }
}

/// Replicates and batches per preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// 200 replicates × 20 batches.
    Desk,
    /// 1000 replicates × 100 batches.
    Full,
}

impl Scale {
    pub fn reps_batches(self) -> (usize, usize) {
        match self {
            Scale::Desk => (200, 20),
            Scale::Full => (1000, 100),
        }
    }
}

/// One cell of a comparison table: pair 1 uses `ρ`, pair 2 uses `ρ + η`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub rho: f64,
    pub eta: f64,
    pub family: FamilySpec,
    pub damping: DampingKind,
    pub setting: Setting,
    pub normalize: bool,
    pub reps: usize,
    pub batches: usize,
    pub depth: u32,
    pub branching: usize,
    pub seed: u64,
    /// Ranges for the shared draw of the same-parameter setting.
    pub same_ranges: NuisanceRanges,
    /// Ranges of pair 1 and pair 2 in the different-parameter setting.
    pub diff_ranges: [NuisanceRanges; 2],
    pub family_ranges: FamilyRanges,
    /// Angle settings; `normalize` above overrides the flag here.
    pub estimation: NormalizationConfig,
}

impl ExperimentSpec {
    pub fn new(rho: f64, eta: f64, family: FamilySpec, setting: Setting, normalize: bool) -> Self {
        let (reps, batches) = Scale::Desk.reps_batches();
        Self {
            rho,
            eta,
            family,
            damping: DampingKind::Exponential,
            setting,
            normalize,
            reps,
            batches,
            depth: 7,
            branching: 2,
            seed: 20_190_501,
            same_ranges: NuisanceRanges::SAME,
            diff_ranges: [NuisanceRanges::DIFF_FIRST, NuisanceRanges::DIFF_SECOND],
            family_ranges: FamilyRanges::default(),
            estimation: NormalizationConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidSpec(m.into()));
        if !(self.rho > -1.0 && self.rho < 1.0 && self.eta.is_finite()) {
            return bad("rho must lie in (-1, 1)");
        }
        if !(self.rho + self.eta < 1.0 && self.rho + self.eta > -1.0) {
            return bad("rho + eta must lie in (-1, 1)");
        }
        if self.reps < 1 || self.batches < 1 {
            return bad("reps and batches must be >= 1");
        }
        if self.depth < 1 || self.branching < 1 {
            return bad("depth and branching must be >= 1");
        }
        let ranges = [self.same_ranges, self.diff_ranges[0], self.diff_ranges[1]];
        if !ranges
            .iter()
            .all(|r| r.mu.is_valid(false) && r.var.is_valid(true))
        {
            return bad("nuisance ranges must be ordered with positive variances");
        }
        let f = &self.family_ranges;
        let positive = [
            f.gamma_shape,
            f.gamma_scale,
            f.f_d1,
            f.f_d2,
            f.t_dof,
            f.poisson_mean,
        ];
        if !positive.iter().all(|r| r.is_valid(true)) {
            return bad("family ranges must be ordered and positive");
        }
        self.estimation.validate()?;
        Ok(())
    }

    fn estimation_config(&self) -> NormalizationConfig {
        NormalizationConfig {
            normalize: self.normalize,
            ..self.estimation
        }
    }
}

/// Proportions of a binary outcome over batches of replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionSummary {
    pub batch_proportions: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of the batch proportions.
    pub sd: f64,
    /// Replicates that failed and were left out of their batch.
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl ProportionSummary {
    /// Reduces per-replicate outcomes, in index order, into batches of `reps`.
    pub fn from_outcomes(
        outcomes: &[Result<bool, String>],
        reps: usize,
    ) -> Result<Self, HarnessError> {
        let mut batch_proportions = Vec::new();
        let mut failures = 0;
        let mut first_failure = None;
        for batch in outcomes.chunks(reps) {
            let (mut hits, mut ok) = (0usize, 0usize);
            for o in batch {
                match o {
                    Ok(hit) => {
                        ok += 1;
                        hits += usize::from(*hit);
                    }
                    Err(e) => {
                        failures += 1;
                        first_failure.get_or_insert_with(|| e.clone());
                    }
                }
            }
            if ok > 0 {
                batch_proportions.push(hits as f64 / ok as f64);
            }
        }
        if batch_proportions.is_empty() {
            return Err(HarnessError::AllFailed {
                count: failures,
                first: first_failure.unwrap_or_default(),
            });
        }
        let (mean, sd) = mean_sd(&batch_proportions);
        Ok(Self {
            batch_proportions,
            mean,
            sd,
            failures,
            first_failure,
        })
    }

    pub fn cell(&self) -> String {
        format_cell(self.mean, self.sd)
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    /// Proportion of replicates with `Δθ̂₁ > Δθ̂₂`.
    pub summary: ProportionSummary,
    pub elapsed: Duration,
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, HarnessError> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

struct PairDraw {
    mu: (f64, f64),
    var: (f64, f64),
    marginal: Marginal,
}

fn draw_pair_params(
    ranges: &NuisanceRanges,
    spec: &ExperimentSpec,
    rng: &mut RngStream,
) -> PairDraw {
    let mu = (ranges.mu.draw(rng), ranges.mu.draw(rng));
    let var = (ranges.var.draw(rng), ranges.var.draw(rng));
    let marginal = spec.family.draw(&spec.family_ranges, rng);
    PairDraw { mu, var, marginal }
}

fn pair_config(spec: &ExperimentSpec, draw: &PairDraw, rho: f64) -> GenConfig {
    GenConfig {
        branching: spec.branching,
        depth: spec.depth,
        series_len: Vec::new(),
        mu_x: draw.mu.0,
        mu_y: draw.mu.1,
        var_x: draw.var.0,
        var_y: draw.var.1,
        rho,
        damping: spec.damping.with_depth(spec.depth),
        anchor: (0.0, 0.0),
        marginal: draw.marginal,
        seed: spec.seed,
    }
}

/// Angles of both pairs of one replicate.
pub fn replicate_angles(spec: &ExperimentSpec, index: u64) -> Result<(f64, f64), String> {
    let mut rng = RngStream::new(spec.seed, index);
    let (first, second) = match spec.setting {
        Setting::SameParams => {
            let d = draw_pair_params(&spec.same_ranges, spec, &mut rng);
            (
                pair_config(spec, &d, spec.rho),
                pair_config(spec, &d, spec.rho + spec.eta),
            )
        }
        Setting::DiffParams => {
            let d1 = draw_pair_params(&spec.diff_ranges[0], spec, &mut rng);
            let d2 = draw_pair_params(&spec.diff_ranges[1], spec, &mut rng);
            (
                pair_config(spec, &d1, spec.rho),
                pair_config(spec, &d2, spec.rho + spec.eta),
            )
        }
    };
    let cfg = spec.estimation_config();
    let one = gen_pair(&first, &mut rng).map_err(|e| e.to_string())?;
    let two = gen_pair(&second, &mut rng).map_err(|e| e.to_string())?;
    let a = td_delta_theta(&one, &cfg).map_err(|e| format!("pair 1: {e}"))?;
    let b = td_delta_theta(&two, &cfg).map_err(|e| format!("pair 2: {e}"))?;
    Ok((a.angle.delta_theta, b.angle.delta_theta))
}

/// Estimates the proportion of replicates in which pair 1's angle exceeds
/// pair 2's, per batch and overall.
pub fn run_comparison(
    spec: &ExperimentSpec,
    threads: Option<usize>,
) -> Result<ExperimentResult, HarnessError> {
    spec.validate()?;
    let start = Instant::now();
    let total = spec.reps * spec.batches;
    let outcomes: Vec<Result<bool, String>> = with_pool(threads, || {
        (0..total as u64)
            .into_par_iter()
            .map(|k| replicate_angles(spec, k).map(|(a, b)| a > b))
            .collect()
    })?;
    let summary = ProportionSummary::from_outcomes(&outcomes, spec.reps)?;
    Ok(ExperimentResult {
        spec: spec.clone(),
        summary,
        elapsed: start.elapsed(),
    })
}

/// Mean and sd as a table cell: `"0.54 (3e-04)"`.
pub fn format_cell(mean: f64, sd: f64) -> String {
    format!("{} ({})", format_mean(mean), format_sci(sd))
}

fn format_mean(mean: f64) -> String {
    let s = format!("{mean:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn format_sci(v: f64) -> String {
    let raw = format!("{v:.0e}");
    let (mantissa, exp) = raw.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// One table row.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub rho: f64,
    pub eta: f64,
    pub setting: Setting,
    pub normalize: bool,
    pub family: FamilySpec,
    pub mean: f64,
    pub sd: f64,
    pub reps: usize,
    pub batches: usize,
    pub seed: u64,
    pub failures: usize,
    pub cell: String,
}

pub fn summarize(results: &[ExperimentResult]) -> Vec<SummaryRow> {
    results
        .iter()
        .map(|r| SummaryRow {
            rho: r.spec.rho,
            eta: r.spec.eta,
            setting: r.spec.setting,
            normalize: r.spec.normalize,
            family: r.spec.family,
            mean: r.summary.mean,
            sd: r.summary.sd,
            reps: r.spec.reps,
            batches: r.spec.batches,
            seed: r.spec.seed,
            failures: r.summary.failures,
            cell: r.summary.cell(),
        })
        .collect()
}

/// Fitted increment law of one generation.
#[derive(Debug, Clone, PartialEq)]
pub enum GenerationFit {
    Gaussian {
        moments: Moments,
        r: f64,
    },
    /// Too few samples, zero variance or `|r| = 1`: observed increments
    /// are reused unchanged.
    Observed {
        n: usize,
    },
}

/// A dataset's topology with the fitted per-generation laws.
#[derive(Debug, Clone)]
pub struct MimicModel {
    anchor: (f64, f64),
    ids: Vec<String>,
    parents: Vec<Option<usize>>,
    /// Node indices in generation order, parents first.
    order: Vec<usize>,
    generation: Vec<u32>,
    observed: Vec<(f64, f64)>,
    pub fits: Vec<GenerationFit>,
}

impl MimicModel {
    pub fn fit(data: &PairedTreeData) -> Result<Self, HarnessError> {
        let d = data.to_dspgm()?;
        let topo = d.topology()?;
        let inc = d.extract_increments()?;
        let fits = inc
            .generations
            .iter()
            .map(|s| {
                let m = Moments::of(s).filter(|m| m.n >= 3 && !m.is_degenerate());
                match (m, pearson(s)) {
                    (Some(moments), Ok(r)) if r.abs() < 1.0 => {
                        GenerationFit::Gaussian { moments, r }
                    }
                    _ => GenerationFit::Observed { n: s.len() },
                }
            })
            .collect();
        let mut order: Vec<usize> = (0..topo.len()).collect();
        order.sort_by_key(|&k| topo.generation[k]);
        let observed = d
            .nodes
            .iter()
            .zip(&topo.parent)
            .map(|(n, p)| {
                let base = match p {
                    Some(p) => (d.nodes[*p].x[0], d.nodes[*p].y[0]),
                    None => d.anchor,
                };
                (n.x[0] - base.0, n.y[0] - base.1)
            })
            .collect();
        Ok(Self {
            anchor: d.anchor,
            ids: d.nodes.iter().map(|n| n.id.clone()).collect(),
            parents: topo.parent,
            order,
            generation: topo.generation,
            observed,
            fits,
        })
    }

    /// One synthetic dataset on the fitted topology.
    pub fn sample(&self, rng: &mut RngStream) -> Result<PairedTreeData, HarnessError> {
        let mut values = vec![(0.0, 0.0); self.ids.len()];
        for &k in &self.order {
            let inc = match &self.fits[self.generation[k] as usize - 1] {
                GenerationFit::Gaussian { moments: m, r } => {
                    sample_bivariate_normal(m.mean_x, m.mean_y, m.sd_x, m.sd_y, *r, rng)?
                }
                GenerationFit::Observed { .. } => self.observed[k],
            };
            let base = self.parents[k].map_or(self.anchor, |p| values[p]);
            values[k] = (base.0 + inc.0, base.1 + inc.1);
        }
        let nodes = self
            .ids
            .iter()
            .enumerate()
            .map(|(k, id)| NodeRecord {
                id: id.clone(),
                parent_id: self.parents[k].map(|p| self.ids[p].clone()),
                x: vec![values[k].0],
                y: vec![values[k].1],
            })
            .collect();
        Ok(PairedTreeData::new(self.anchor, nodes))
    }
}

#[derive(Debug, Clone)]
pub struct MimicResult {
    /// Proportion of replicates with `Δθ̂_A > Δθ̂_B`.
    pub td: ProportionSummary,
    /// Proportion of replicates with Pearson-flat `r_A < r_B`, the same
    /// ordering expressed as a correlation.
    pub pearson_flat: ProportionSummary,
    pub fit_a: Vec<GenerationFit>,
    pub fit_b: Vec<GenerationFit>,
}

/// Fits both datasets, regenerates mimic pairs on their own topologies and
/// compares the two statistics replicate by replicate.
pub fn mimic_bootstrap(
    a: &PairedTreeData,
    b: &PairedTreeData,
    reps: usize,
    batches: usize,
    seed: u64,
    cfg: &NormalizationConfig,
    threads: Option<usize>,
) -> Result<MimicResult, HarnessError> {
    if reps < 1 || batches < 1 {
        return Err(HarnessError::InvalidSpec(
            "reps and batches must be >= 1".into(),
        ));
    }
    cfg.validate()?;
    let model_a = MimicModel::fit(a)?;
    let model_b = MimicModel::fit(b)?;
    let replicate = |k: u64| -> (Result<bool, String>, Result<bool, String>) {
        let mut rng = RngStream::new(seed, k);
        let pair = model_a
            .sample(&mut rng)
            .and_then(|ma| Ok((ma, model_b.sample(&mut rng)?)))
            .map_err(|e| e.to_string());
        let (ma, mb) = match pair {
            Ok(p) => p,
            Err(e) => return (Err(e.clone()), Err(e)),
        };
        let td = td_delta_theta(&ma, cfg)
            .and_then(|ta| Ok(ta.angle.delta_theta > td_delta_theta(&mb, cfg)?.angle.delta_theta))
            .map_err(|e| e.to_string());
        let pf = pearson_flat(&ma)
            .and_then(|ra| Ok(ra < pearson_flat(&mb)?))
            .map_err(|e| e.to_string());
        (td, pf)
    };
    let outcomes: Vec<_> = with_pool(threads, || {
        (0..(reps * batches) as u64)
            .into_par_iter()
            .map(replicate)
            .collect()
    })?;
    let (td, pf): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    Ok(MimicResult {
        td: ProportionSummary::from_outcomes(&td, reps)?,
        pearson_flat: ProportionSummary::from_outcomes(&pf, reps)?,
        fit_a: model_a.fits,
        fit_b: model_b.fits,
    })
}
