//! `treecorr` command-line front end.
//!
//! Exit codes: 0 on success, 2 on usage errors, 3 on data errors.

pub mod format;

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;
use treecorr::datagen::{gen_pair, DiscretizeMethod, GenConfig, Marginal, RngStream};
use treecorr::distributions::Family;
use treecorr::ellipse::{
    angle_between_slopes, quantile_ellipse, support_region_contains, tangent_slopes, Alpha,
    BivariateGaussian, EpsilonSchedule, Point,
};
use treecorr::estimation::{pearson, per_generation_pearson, td_delta_theta, NormalizationConfig};
use treecorr::harness::{
    mimic_bootstrap, run_comparison, summarize, DampingKind, ExperimentSpec, FamilySpec, Scale,
    Setting, SummaryRow,
};

use crate::format::{load_paired_trees, write_paired_trees};

pub const CSV_HEADER: &str = "rho,eta,setting,normalize,family,mean,sd,reps,batches,seed";
pub const ANGLE_CSV_HEADER: &str = "file,delta_theta_rad,delta_theta_deg,candidates,m,n";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn usage_err(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "treecorr",
    version,
    about = "Geometric tree-correlation statistic for paired tree-shaped data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantile ellipse, tangent slopes and included angle of a bivariate Gaussian
    Theory(TheoryArgs),
    /// Synthesize one pair of trees into a paired-tree file
    Generate(GenerateArgs),
    /// TDΔθ angle of a paired-tree file
    Angle(AngleArgs),
    /// Monte-Carlo comparison of two correlation levels
    Simulate(SimulateArgs),
    /// Compare two paired-tree files
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub mu1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub mu2: f64,
    #[arg(long)]
    pub sigma1: f64,
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub y0: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DampingArg {
    Exp,
    Linear,
}

impl From<DampingArg> for DampingKind {
    fn from(d: DampingArg) -> Self {
        match d {
            DampingArg::Exp => DampingKind::Exponential,
            DampingArg::Linear => DampingKind::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Gamma,
    F,
    #[value(name = "t")]
    StudentT,
    Poisson,
    EqualWidth,
    EqualFreq,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long = "f", value_enum, default_value = "exp")]
    pub damping: DampingArg,
    #[arg(long, default_value_t = 7)]
    pub depth: u32,
    #[arg(long, default_value_t = 2)]
    pub branching: usize,
    /// Observations per node for each generation, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub series_len: Vec<usize>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub mu_x: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub mu_y: f64,
    #[arg(long, default_value_t = 1.0)]
    pub var_x: f64,
    #[arg(long, default_value_t = 1.0)]
    pub var_y: f64,
    /// Gamma shape
    #[arg(long, default_value_t = 2.0)]
    pub shape: f64,
    /// Gamma scale
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 10.0)]
    pub d1: f64,
    #[arg(long, default_value_t = 20.0)]
    pub d2: f64,
    /// Student-t degrees of freedom
    #[arg(long, default_value_t = 10.0)]
    pub dof: f64,
    /// Poisson mean
    #[arg(long, default_value_t = 5.0)]
    pub mean: f64,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Map continuous copula output to `μ + σ·v` per coordinate
    #[arg(long)]
    pub loc_scale: bool,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub y0: f64,
    #[arg(long, env = "TREECORR_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EpsilonArg {
    Harmonic,
    Exact,
}

#[derive(Debug, Args)]
pub struct EstimationArgs {
    /// Skip the per-generation normalization
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, value_enum, default_value = "harmonic")]
    pub epsilon: EpsilonArg,
    /// ρ used by the exact schedule
    #[arg(long)]
    pub epsilon_rho: Option<f64>,
    /// Damping pattern used by the exact schedule
    #[arg(long = "epsilon-f", value_enum, default_value = "exp")]
    pub epsilon_damping: DampingArg,
    /// Negate Δx when the pooled increment correlation is negative
    #[arg(long)]
    pub sign_flip: bool,
    /// Fail on generations that cannot be normalized instead of skipping them
    #[arg(long)]
    pub strict: bool,
}

impl EstimationArgs {
    fn config(&self, depth: u32) -> Result<NormalizationConfig, CliError> {
        let alpha = Alpha::new(self.alpha).map_err(usage_err)?;
        let schedule = match self.epsilon {
            EpsilonArg::Harmonic => EpsilonSchedule::Harmonic,
            EpsilonArg::Exact => {
                let rho = self
                    .epsilon_rho
                    .ok_or_else(|| usage_err("--epsilon exact requires --epsilon-rho"))?;
                if !(rho > -1.0 && rho < 1.0) {
                    return Err(usage_err("--epsilon-rho must lie in (-1, 1)"));
                }
                EpsilonSchedule::Exact {
                    damping: DampingKind::from(self.epsilon_damping).with_depth(depth),
                    rho,
                }
            }
        };
        let cfg = NormalizationConfig {
            alpha,
            tau: self.tau,
            sigma2: self.sigma2,
            schedule,
            normalize: !self.no_normalize,
            sign_flip: self.sign_flip,
            skip_unfittable: !self.strict,
        };
        cfg.validate().map_err(usage_err)?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct AngleArgs {
    pub file: PathBuf,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Also write a CSV row (radians and degrees) to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SettingArg {
    Same,
    Diff,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Desk,
    Full,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// One or more ρ values, comma-separated
    #[arg(long, value_delimiter = ',', required = true)]
    pub rho: Vec<f64>,
    /// One or more η values, comma-separated; cells with ρ + η >= 1 are skipped
    #[arg(long, value_delimiter = ',', required = true)]
    pub eta: Vec<f64>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, value_enum, default_value = "same")]
    pub setting: SettingArg,
    #[arg(long)]
    pub normalize: bool,
    #[arg(long = "f", value_enum, default_value = "exp")]
    pub damping: DampingArg,
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: PresetArg,
    /// Replicates per batch (overrides the preset)
    #[arg(long)]
    pub reps: Option<usize>,
    /// Batches (overrides the preset)
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub depth: u32,
    #[arg(long, default_value_t = 2)]
    pub branching: usize,
    /// Sensitivity constant of the normalized means
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, env = "TREECORR_SEED", default_value_t = 20_190_501)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism
    #[arg(long, env = "TREECORR_THREADS", value_parser = positive_usize)]
    pub threads: Option<usize>,
    /// Write CSV here instead of printing a table
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub file_a: PathBuf,
    pub file_b: PathBuf,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Mimic-bootstrap replicates per batch; no bootstrap when omitted
    #[arg(long)]
    pub mimic_reps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub mimic_batches: usize,
    #[arg(long, env = "TREECORR_SEED", default_value_t = 20_190_501)]
    pub seed: u64,
    #[arg(long, env = "TREECORR_THREADS", value_parser = positive_usize)]
    pub threads: Option<usize>,
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let text = match cli.command {
        Command::Theory(a) => theory(&a)?,
        Command::Generate(a) => generate(&a)?,
        Command::Angle(a) => angle(&a)?,
        Command::Simulate(a) => simulate(&a)?,
        Command::Analyze(a) => analyze(&a)?,
    };
    out.write_all(text.as_bytes()).map_err(data_err)
}

fn theory(a: &TheoryArgs) -> Result<String, CliError> {
    let alpha = Alpha::new(a.alpha).map_err(usage_err)?;
    let params =
        BivariateGaussian::new(a.mu1, a.mu2, a.sigma1, a.sigma2, a.rho).map_err(usage_err)?;
    let e = quantile_ellipse(params, alpha);
    let p = Point::new(a.x0, a.y0);
    let mut s = String::new();
    writeln!(s, "c^2\t{:.6}", e.level).unwrap();
    writeln!(s, "D\t{:.6e}", e.density_height).unwrap();
    match tangent_slopes(&e, p) {
        Ok((k1, k2)) => {
            let dt = angle_between_slopes(k1, k2);
            writeln!(s, "k1\t{k1:.6}").unwrap();
            writeln!(s, "k2\t{k2:.6}").unwrap();
            writeln!(s, "delta_theta_rad\t{dt:.6}").unwrap();
            writeln!(s, "delta_theta_deg\t{:.4}", dt.to_degrees()).unwrap();
        }
        Err(err) => writeln!(s, "tangents\tundefined ({err})").unwrap(),
    }
    let inside = support_region_contains(&params, alpha, p);
    writeln!(s, "tangent_region\t{}", if inside { "yes" } else { "no" }).unwrap();
    Ok(s)
}

fn generate(a: &GenerateArgs) -> Result<String, CliError> {
    let marginal = match a.family {
        FamilyArg::Gaussian => Marginal::Gaussian,
        FamilyArg::Gamma => Marginal::Continuous {
            family: Family::Gamma {
                shape: a.shape,
                scale: a.scale,
            },
            loc_scale: a.loc_scale,
        },
        FamilyArg::F => Marginal::Continuous {
            family: Family::F { d1: a.d1, d2: a.d2 },
            loc_scale: a.loc_scale,
        },
        FamilyArg::StudentT => Marginal::Continuous {
            family: Family::StudentT { dof: a.dof },
            loc_scale: a.loc_scale,
        },
        FamilyArg::Poisson => Marginal::Poisson { mean: a.mean },
        FamilyArg::EqualWidth => Marginal::Discretized {
            method: DiscretizeMethod::EqualWidth,
            bins: a.bins,
        },
        FamilyArg::EqualFreq => Marginal::Discretized {
            method: DiscretizeMethod::EqualFreq,
            bins: a.bins,
        },
    };
    let cfg = GenConfig {
        branching: a.branching,
        depth: a.depth,
        series_len: a.series_len.clone(),
        mu_x: a.mu_x,
        mu_y: a.mu_y,
        var_x: a.var_x,
        var_y: a.var_y,
        rho: a.rho,
        damping: DampingKind::from(a.damping).with_depth(a.depth),
        anchor: (a.x0, a.y0),
        marginal,
        seed: a.seed,
    };
    cfg.validate().map_err(usage_err)?;
    let data = gen_pair(&cfg, &mut RngStream::new(a.seed, a.stream)).map_err(data_err)?;
    let text = write_paired_trees(&data);
    match &a.out {
        Some(path) => {
            fs::write(path, text)
                .map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))?;
            Ok(format!(
                "wrote {} nodes to {}\n",
                data.nodes.len(),
                path.display()
            ))
        }
        None => Ok(text),
    }
}

fn max_depth(data: &treecorr::tree::PairedTreeData) -> Result<u32, CliError> {
    Ok(data
        .to_dspgm()
        .map_err(data_err)?
        .topology()
        .map_err(data_err)?
        .max_generation())
}

fn angle(a: &AngleArgs) -> Result<String, CliError> {
    let data = load_paired_trees(&a.file).map_err(data_err)?;
    let cfg = a.estimation.config(max_depth(&data)?)?;
    let td = td_delta_theta(&data, &cfg).map_err(data_err)?;
    let est = &td.angle;
    let mut s = String::new();
    writeln!(s, "delta_theta\t{:.2}°", est.degrees()).unwrap();
    writeln!(s, "candidates\t{}", est.candidate_widths.len()).unwrap();
    writeln!(s, "m\t{}", est.m).unwrap();
    writeln!(s, "n\t{}", est.n).unwrap();
    if !td.skipped_generations.is_empty() {
        let g: Vec<String> = td.skipped_generations.iter().map(u32::to_string).collect();
        writeln!(s, "skipped_generations\t{}", g.join(",")).unwrap();
    }
    if td.flipped {
        writeln!(s, "sign_flipped\tyes").unwrap();
    }
    if let Some(path) = &a.out {
        let csv = format!(
            "{ANGLE_CSV_HEADER}\n{},{},{},{},{},{}\n",
            a.file.display(),
            est.delta_theta,
            est.degrees(),
            est.candidate_widths.len(),
            est.m,
            est.n
        );
        fs::write(path, csv)
            .map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(s)
}

fn family_spec(f: FamilyArg, bins: usize) -> FamilySpec {
    match f {
        FamilyArg::Gaussian => FamilySpec::Gaussian,
        FamilyArg::Gamma => FamilySpec::Gamma,
        FamilyArg::F => FamilySpec::F,
        FamilyArg::StudentT => FamilySpec::StudentT,
        FamilyArg::Poisson => FamilySpec::Poisson,
        FamilyArg::EqualWidth => FamilySpec::EqualWidth { bins },
        FamilyArg::EqualFreq => FamilySpec::EqualFreq { bins },
    }
}

/// CSV text of summary rows under [`CSV_HEADER`].
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.rho, r.eta, r.setting, r.normalize, r.family, r.mean, r.sd, r.reps, r.batches, r.seed
        )
        .unwrap();
    }
    s
}

/// Aligned human-readable table of summary rows.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<6}{:<6}{:<9}{:<11}{:<16}{:<16}{}\n",
        "rho", "eta", "setting", "normalize", "family", "cell", "failures"
    );
    for r in rows {
        writeln!(
            s,
            "{:<6}{:<6}{:<9}{:<11}{:<16}{:<16}{}",
            r.rho,
            r.eta,
            r.setting.to_string(),
            r.normalize,
            r.family.to_string(),
            r.cell,
            r.failures
        )
        .unwrap();
    }
    s
}

fn simulate(a: &SimulateArgs) -> Result<String, CliError> {
    let (mut reps, mut batches) = match a.preset {
        PresetArg::Desk => Scale::Desk.reps_batches(),
        PresetArg::Full => Scale::Full.reps_batches(),
    };
    reps = a.reps.unwrap_or(reps);
    batches = a.batches.unwrap_or(batches);
    let setting = match a.setting {
        SettingArg::Same => Setting::SameParams,
        SettingArg::Diff => Setting::DiffParams,
    };
    let mut specs = Vec::new();
    for &rho in &a.rho {
        for &eta in &a.eta {
            if rho + eta >= 1.0 && (a.rho.len() > 1 || a.eta.len() > 1) {
                continue;
            }
            let spec = ExperimentSpec {
                damping: a.damping.into(),
                reps,
                batches,
                depth: a.depth,
                branching: a.branching,
                seed: a.seed,
                estimation: NormalizationConfig {
                    tau: a.tau,
                    ..NormalizationConfig::default()
                },
                ..ExperimentSpec::new(
                    rho,
                    eta,
                    family_spec(a.family, a.bins),
                    setting,
                    a.normalize,
                )
            };
            spec.validate().map_err(usage_err)?;
            specs.push(spec);
        }
    }
    if specs.is_empty() {
        return Err(usage_err("no (rho, eta) cell satisfies rho + eta < 1"));
    }
    let results = specs
        .iter()
        .map(|s| run_comparison(s, a.threads).map_err(data_err))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = summarize(&results);
    match &a.out {
        Some(path) => {
            fs::write(path, summary_csv(&rows))
                .map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))?;
            Ok(format!("wrote {} rows to {}\n", rows.len(), path.display()))
        }
        None => Ok(summary_table(&rows)),
    }
}

fn pooled_increment_pearson(data: &treecorr::tree::PairedTreeData) -> Result<f64, CliError> {
    let inc = data
        .to_dspgm()
        .and_then(|d| d.extract_increments())
        .map_err(data_err)?;
    pearson(&inc.pooled().collect::<Vec<_>>()).map_err(data_err)
}

fn generation_pearson_line(data: &treecorr::tree::PairedTreeData) -> Result<String, CliError> {
    let inc = data
        .to_dspgm()
        .and_then(|d| d.extract_increments())
        .map_err(data_err)?;
    let listed = per_generation_pearson(&inc);
    let mut cells = Vec::new();
    for i in 1..=inc.max_generation() {
        match listed.iter().find(|(g, _)| *g == i) {
            Some((_, r)) => cells.push(format!("{i}:{r:.3}")),
            None => cells.push(format!("{i}:-")),
        }
    }
    Ok(cells.join(" "))
}

fn analyze(a: &AnalyzeArgs) -> Result<String, CliError> {
    let da = load_paired_trees(&a.file_a).map_err(data_err)?;
    let db = load_paired_trees(&a.file_b).map_err(data_err)?;
    let depth = max_depth(&da)?.max(max_depth(&db)?);
    let cfg = a.estimation.config(depth)?;
    let ta =
        td_delta_theta(&da, &cfg).map_err(|e| data_err(format!("{}: {e}", a.file_a.display())))?;
    let tb =
        td_delta_theta(&db, &cfg).map_err(|e| data_err(format!("{}: {e}", a.file_b.display())))?;
    let ra = pooled_increment_pearson(&da)?;
    let rb = pooled_increment_pearson(&db)?;

    let mut s = String::new();
    writeln!(
        s,
        "per-generation pearson (increments; '-' where undefined)"
    )
    .unwrap();
    writeln!(s, "  A\t{}", generation_pearson_line(&da)?).unwrap();
    writeln!(s, "  B\t{}", generation_pearson_line(&db)?).unwrap();
    let cmp = |x: f64, y: f64| {
        if x < y {
            "<"
        } else if x > y {
            ">"
        } else {
            "="
        }
    };
    let (da_deg, db_deg) = (ta.angle.degrees(), tb.angle.degrees());
    writeln!(
        s,
        "delta_theta\tA {da_deg:.2}° {} B {db_deg:.2}°",
        cmp(da_deg, db_deg)
    )
    .unwrap();
    writeln!(
        s,
        "pearson (pooled increments)\tA {ra:.3} {} B {rb:.3}",
        cmp(ra, rb)
    )
    .unwrap();

    if let Some(reps) = a.mimic_reps {
        let m = mimic_bootstrap(&da, &db, reps, a.mimic_batches, a.seed, &cfg, a.threads)
            .map_err(data_err)?;
        writeln!(s, "mimic bootstrap ({reps} x {})", a.mimic_batches).unwrap();
        writeln!(s, "  P(delta_theta_A > delta_theta_B)\t{}", m.td.cell()).unwrap();
        writeln!(
            s,
            "  P(pearson_flat_A < pearson_flat_B)\t{}",
            m.pearson_flat.cell()
        )
        .unwrap();
        if m.td.failures + m.pearson_flat.failures > 0 {
            writeln!(
                s,
                "  failed replicates\t{} / {}",
                m.td.failures, m.pearson_flat.failures
            )
            .unwrap();
        }
    }
    Ok(s)
}
