//! Command-line front end: `sample`, `abc`, `approx` and `validate`.
//!
//! Settings come from an optional TOML file and are overridden by flags.
//! Exit codes: 0 success, 1 failed validation or I/O error, 2 usage or
//! configuration error, 3 infeasible model.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::abc::{abc_rejection, AbcConfig, AbcOutput};
use crate::diagnostics::{effective_sample_size, summarize};
use crate::distributions::FamilyKind;
use crate::error::{Error, Result};
use crate::med_iqr_conditional::InitMode;
use crate::med_mad_conditional::KernelMode;
use crate::posterior_updates::{nig_approx_medmad, EfficiencyConstants, NigParams, Prior};
use crate::sampler::{run_chains, ChainOutput, GibbsConfig, RobustConstraint, RNG_NAME};
use crate::validate::{run_suite, Suite, SuiteOptions};

/// Environment variable naming the directory for default output paths.
pub const OUT_DIR_ENV: &str = "ROBUST_GIBBS_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "robust-gibbs",
    version,
    about = "Posterior sampling from robust summary statistics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Gibbs sampler and write the chain and a summary.
    Sample(SampleArgs),
    /// Run rejection ABC on the same summaries.
    Abc(AbcArgs),
    /// Closed-form NIG approximation for Gaussian data given median and MAD.
    Approx(ModelArgs),
    /// Run an invariant suite.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatsKind {
    Quantiles,
    Mediqr,
    Medmad,
}

#[derive(Debug, Default, Args)]
pub struct ModelArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<FamilyKind>,
    #[arg(long, value_enum)]
    pub stats: Option<StatsKind>,
    /// Sample size N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Observed median.
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<f64>,
    /// Observed MAD.
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    /// Observed IQR.
    #[arg(long, allow_hyphen_values = true)]
    pub iqr: Option<f64>,
    /// Quantile levels, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub probs: Option<Vec<f64>>,
    /// Observed quantiles, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Option<Vec<f64>>,
    /// Normal-Inverse-Gamma prior `mu0,nu,alpha,beta`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub prior_nig: Option<Vec<f64>>,
    /// Gaussian with this known variance and a flat prior on the mean.
    #[arg(long)]
    pub known_sigma2: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Draws CSV (sample, abc) or JSON (approx).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON path; defaults to the output path with a `.json` extension.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub init: Option<InitMode>,
    #[arg(long)]
    pub kernel: Option<KernelMode>,
    #[arg(long)]
    pub n_pairs: Option<usize>,
    #[arg(long)]
    pub collapsed_steps: Option<usize>,
    /// Keep the random-walk scales fixed during burn-in.
    #[arg(long)]
    pub no_adapt: bool,
    /// Starting parameters, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta0: Option<Vec<f64>>,
    /// Independent chains with seeds `seed + c`, run in parallel.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
}

#[derive(Debug, Args)]
pub struct AbcArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n_sims: Option<usize>,
    #[arg(long)]
    pub keep: Option<usize>,
    /// Wall-clock budget in seconds; `n-sims` becomes an upper bound.
    #[arg(long)]
    pub time_limit: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// One of medmad-invariants, quantile-invariants, mediqr-invariants,
    /// reachability, negative-control.
    pub suite: String,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; the report always goes to stdout as well.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub family: Option<FamilyKind>,
    pub constraint: Option<RobustConstraint>,
    pub prior: Option<Prior>,
    pub gibbs: Option<GibbsConfig>,
    pub abc: Option<AbcConfig>,
    pub output: Option<OutputPaths>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub draws: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        _ if e.is_infeasible() => 3,
        Error::Config(_) | Error::Domain(_) | Error::ParameterDomain(_) => 2,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Sample(a) => cmd_sample(&a),
        Command::Abc(a) => cmd_abc(&a),
        Command::Approx(a) => cmd_approx(&a),
        Command::Validate(a) => cmd_validate(&a),
    }
}

/// Family, constraint and prior after merging the file and the flags.
#[derive(Debug)]
pub struct Model {
    pub family: FamilyKind,
    pub constraint: RobustConstraint,
    pub prior: Prior,
}

fn stats_of(c: &RobustConstraint) -> StatsKind {
    match c {
        RobustConstraint::Quantiles { .. } => StatsKind::Quantiles,
        RobustConstraint::MedIqr { .. } => StatsKind::Mediqr,
        RobustConstraint::MedMad { .. } => StatsKind::Medmad,
    }
}

fn missing(what: &str) -> Error {
    Error::Config(format!("missing --{what} (or the matching config entry)"))
}

pub fn resolve_model(args: &ModelArgs, file: &RunConfigFile) -> Result<Model> {
    let family = args.family.or(file.family).unwrap_or(FamilyKind::Gaussian);
    let base = file.constraint.as_ref();
    let stats = args
        .stats
        .or(base.map(stats_of))
        .ok_or_else(|| missing("stats"))?;
    // file values are used only when the statistic kind matches
    let base = base.filter(|c| stats_of(c) == stats);
    let n = args
        .n
        .or(base.map(RobustConstraint::n))
        .ok_or_else(|| missing("n"))?;
    let constraint = match stats {
        StatsKind::Medmad => {
            let (bm, bs) = match base {
                Some(RobustConstraint::MedMad { median, mad, .. }) => (Some(*median), Some(*mad)),
                _ => (None, None),
            };
            RobustConstraint::med_mad(
                n,
                args.m.or(bm).ok_or_else(|| missing("m"))?,
                args.s.or(bs).ok_or_else(|| missing("s"))?,
            )?
        }
        StatsKind::Mediqr => {
            let (bm, bi) = match base {
                Some(RobustConstraint::MedIqr { median, iqr, .. }) => (Some(*median), Some(*iqr)),
                _ => (None, None),
            };
            RobustConstraint::med_iqr(
                n,
                args.m.or(bm).ok_or_else(|| missing("m"))?,
                args.iqr.or(bi).ok_or_else(|| missing("iqr"))?,
            )?
        }
        StatsKind::Quantiles => {
            let (bp, bv) = match base {
                Some(RobustConstraint::Quantiles { probs, values, .. }) => {
                    (Some(probs.clone()), Some(values.clone()))
                }
                _ => (None, None),
            };
            let probs = args.probs.clone().or(bp).ok_or_else(|| missing("probs"))?;
            let values = args
                .values
                .clone()
                .or(bv)
                .ok_or_else(|| missing("values"))?;
            if probs.len() != values.len() {
                return Err(Error::Config(format!(
                    "{} probs but {} values",
                    probs.len(),
                    values.len()
                )));
            }
            let pairs: Vec<(f64, f64)> = probs.into_iter().zip(values).collect();
            RobustConstraint::quantiles(n, &pairs)?
        }
    };
    let prior = if let Some(v) = &args.prior_nig {
        if v.len() != 4 {
            return Err(Error::Config("--prior-nig takes mu0,nu,alpha,beta".into()));
        }
        Prior::Nig(
            NigParams::new(v[0], v[1], v[2], v[3]).map_err(|e| Error::Config(e.to_string()))?,
        )
    } else if let Some(sigma2) = args.known_sigma2 {
        Prior::GaussianKnownVariance { sigma2 }
    } else {
        file.prior.unwrap_or_else(|| Prior::default_for(family))
    };
    prior.validate()?;
    if prior.family_kind() != family {
        return Err(Error::Config(format!(
            "prior {prior:?} does not fit the {} family",
            family.name()
        )));
    }
    Ok(Model {
        family,
        constraint,
        prior,
    })
}

fn load_file(args: &ModelArgs) -> Result<RunConfigFile> {
    match &args.config {
        Some(p) => RunConfigFile::load(p),
        None => Ok(RunConfigFile::default()),
    }
}

fn default_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Output paths from flags, then the file, then `$ROBUST_GIBBS_OUT_DIR`.
fn output_paths(
    args: &ModelArgs,
    file: &RunConfigFile,
    default_name: &str,
    ext: &str,
) -> (PathBuf, PathBuf) {
    let from_file = file.output.as_ref();
    let draws = args
        .out
        .clone()
        .or_else(|| from_file.and_then(|o| o.draws.clone()))
        .unwrap_or_else(|| default_dir().join(format!("{default_name}.{ext}")));
    let summary = args
        .summary
        .clone()
        .or_else(|| from_file.and_then(|o| o.summary.clone()))
        .unwrap_or_else(|| {
            if ext == "json" {
                draws.with_extension("summary.json")
            } else {
                draws.with_extension("json")
            }
        });
    (draws, summary)
}

/// Numbers are written with 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_draws(
    path: &Path,
    names: &[String],
    rows: impl Iterator<Item = (usize, Vec<f64>)>,
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iter".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (iter, theta) in rows {
        let mut rec = vec![iter.to_string()];
        rec.extend(theta.iter().map(|&v| num(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

fn versions() -> Value {
    json!({ "robust-gibbs": env!("CARGO_PKG_VERSION") })
}

fn param_summaries(
    names: &[String],
    draws: &[Vec<f64>],
    per_chain: &[Vec<Vec<f64>>],
) -> Result<BTreeMap<String, Value>> {
    let mut out = BTreeMap::new();
    for (k, name) in names.iter().enumerate() {
        let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        let mut s = summarize(&col)?;
        // pooled chains: ESS adds up across chains
        if per_chain.len() > 1 {
            s.ess = per_chain
                .iter()
                .map(|c| effective_sample_size(&c.iter().map(|d| d[k]).collect::<Vec<_>>()).ok())
                .sum::<Option<f64>>();
        }
        out.insert(name.clone(), serde_json::to_value(s)?);
    }
    Ok(out)
}

fn numbered(path: &Path, c: usize) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}.{c}.{ext}"))
}

pub fn resolve_gibbs(a: &SampleArgs, file: &RunConfigFile) -> GibbsConfig {
    let mut g = file.gibbs.clone().unwrap_or_default();
    if let Some(v) = a.iters {
        g.iterations = v;
    }
    if a.burn_in.is_some() {
        g.burn_in = a.burn_in;
    }
    if let Some(v) = a.thin {
        g.thin = v;
    }
    if let Some(v) = a.model.seed {
        g.seed = v;
    }
    if a.init.is_some() {
        g.init = a.init;
    }
    if let Some(v) = a.kernel {
        g.kernel = v;
    }
    if a.n_pairs.is_some() {
        g.n_pairs = a.n_pairs;
    }
    if let Some(v) = a.collapsed_steps {
        g.collapsed_steps = v;
    }
    if a.no_adapt {
        g.adapt = false;
    }
    if a.theta0.is_some() {
        g.theta0 = a.theta0.clone();
    }
    g
}

fn cmd_sample(a: &SampleArgs) -> Result<i32> {
    let file = load_file(&a.model)?;
    let model = resolve_model(&a.model, &file)?;
    let gibbs = resolve_gibbs(a, &file);
    if a.chains == 0 {
        return Err(Error::Config("--chains must be at least 1".into()));
    }
    let (draws_path, summary_path) = output_paths(&a.model, &file, "chain", "csv");
    let outs = run_chains(
        model.family,
        &model.constraint,
        &model.prior,
        &gibbs,
        a.chains,
    )?;
    for (c, out) in outs.iter().enumerate() {
        let path = if a.chains == 1 {
            draws_path.clone()
        } else {
            numbered(&draws_path, c)
        };
        let first = out.burn_in + gibbs.thin;
        write_draws(
            &path,
            &out.param_names,
            out.draws
                .iter()
                .enumerate()
                .map(|(k, d)| (first + k * gibbs.thin, d.clone())),
        )?;
        eprintln!(
            "chain {c}: {} draws written to {} in {:.2}s",
            out.draws.len(),
            path.display(),
            out.wall_clock_secs
        );
    }
    let summary = sample_summary(&model, &gibbs, &outs)?;
    write_json(&summary_path, &summary)?;
    eprintln!("summary written to {}", summary_path.display());
    Ok(0)
}

fn sample_summary(model: &Model, gibbs: &GibbsConfig, outs: &[ChainOutput]) -> Result<Value> {
    let names = &outs[0].param_names;
    let pooled: Vec<Vec<f64>> = outs.iter().flat_map(|o| o.draws.iter().cloned()).collect();
    let per_chain: Vec<Vec<Vec<f64>>> = outs.iter().map(|o| o.draws.clone()).collect();
    let census = outs.iter().filter_map(|o| o.census.as_ref()).fold(
        None,
        |acc: Option<BTreeMap<String, u64>>, c| {
            let mut acc = acc.unwrap_or_default();
            for (k, v) in c {
                *acc.entry(k.clone()).or_default() += v;
            }
            Some(acc)
        },
    );
    Ok(json!({
        "command": "sample",
        "family": model.family,
        "constraint": model.constraint,
        "prior": model.prior,
        "config": gibbs,
        "chains": outs.len(),
        "seeds": outs.iter().map(|o| o.seed).collect::<Vec<_>>(),
        "burn_in": outs[0].burn_in,
        "draws_per_chain": outs[0].draws.len(),
        "params": param_summaries(names, &pooled, &per_chain)?,
        "acceptance": outs.iter().map(|o| &o.acceptance).collect::<Vec<_>>(),
        "census": census,
        "rng": RNG_NAME,
        "versions": versions(),
    }))
}

pub fn resolve_abc(a: &AbcArgs, file: &RunConfigFile) -> AbcConfig {
    let mut c = file.abc.clone().unwrap_or_default();
    if let Some(v) = a.n_sims {
        c.n_sims = v;
    }
    if let Some(v) = a.keep {
        c.keep = v;
    }
    if let Some(v) = a.model.seed {
        c.seed = v;
    }
    if a.time_limit.is_some() {
        c.time_limit_secs = a.time_limit;
    }
    c
}

fn cmd_abc(a: &AbcArgs) -> Result<i32> {
    let file = load_file(&a.model)?;
    let model = resolve_model(&a.model, &file)?;
    let config = resolve_abc(a, &file);
    let (draws_path, summary_path) = output_paths(&a.model, &file, "abc", "csv");
    let out = abc_rejection(model.family, &model.constraint, &model.prior, &config)?;
    write_draws(
        &draws_path,
        &out.param_names,
        out.draws
            .iter()
            .cloned()
            .enumerate()
            .map(|(k, d)| (k + 1, d)),
    )?;
    eprintln!(
        "{} of {} simulations kept, written to {} in {:.2}s",
        out.draws.len(),
        out.n_sims,
        draws_path.display(),
        out.wall_clock_secs
    );
    write_json(&summary_path, &abc_summary(&model, &config, &out)?)?;
    eprintln!("summary written to {}", summary_path.display());
    Ok(0)
}

fn abc_summary(model: &Model, config: &AbcConfig, out: &AbcOutput) -> Result<Value> {
    Ok(json!({
        "command": "abc",
        "family": model.family,
        "constraint": model.constraint,
        "prior": model.prior,
        "config": config,
        "n_sims": out.n_sims,
        "keep": out.draws.len(),
        "params": param_summaries(&out.param_names, &out.draws, &[])?,
        "distance": {
            "metric": "euclidean",
            "standardization": "prior_predictive_sd",
            "summaries": model.constraint.summary_names(),
            "scale": out.scale,
            "max_kept": out.distances.iter().copied().fold(0.0, f64::max),
        },
        "seed": out.seed,
        "rng": RNG_NAME,
        "versions": versions(),
    }))
}

fn cmd_approx(a: &ModelArgs) -> Result<i32> {
    let file = load_file(a)?;
    let family = a.family.or(file.family).unwrap_or(FamilyKind::Gaussian);
    if family != FamilyKind::Gaussian {
        return Err(Error::Config(format!(
            "approx needs the gaussian family, got {}",
            family.name()
        )));
    }
    let base = file.constraint.as_ref();
    let stats = a.stats.or(base.map(stats_of)).unwrap_or(StatsKind::Medmad);
    if stats != StatsKind::Medmad {
        return Err(Error::Config(
            "approx needs median and MAD statistics".into(),
        ));
    }
    let (bn, bm, bs) = match base {
        Some(RobustConstraint::MedMad { n, median, mad }) => (Some(*n), Some(*median), Some(*mad)),
        _ => (None, None, None),
    };
    let n = a.n.or(bn).ok_or_else(|| missing("n"))?;
    let m = a.m.or(bm).ok_or_else(|| missing("m"))?;
    let s = a.s.or(bs).ok_or_else(|| missing("s"))?;
    let prior = match (&a.prior_nig, file.prior) {
        (Some(v), _) if v.len() == 4 => {
            NigParams::new(v[0], v[1], v[2], v[3]).map_err(|e| Error::Config(e.to_string()))?
        }
        (Some(_), _) => return Err(Error::Config("--prior-nig takes mu0,nu,alpha,beta".into())),
        (None, Some(Prior::Nig(p))) => p,
        (None, Some(other)) => {
            return Err(Error::Config(format!(
                "approx needs a NIG prior, got {other:?}"
            )))
        }
        (None, None) => match Prior::default_for(FamilyKind::Gaussian) {
            Prior::Nig(p) => p,
            _ => unreachable!(),
        },
    };
    let post = nig_approx_medmad(m, s, n, &prior).map_err(|e| Error::Config(e.to_string()))?;
    let k = EfficiencyConstants::default();
    let q = |p: f64| post.marginal_quantiles(p);
    let (mu_lo, s2_lo) = q(0.025);
    let (mu_med, s2_med) = q(0.5);
    let (mu_hi, s2_hi) = q(0.975);
    let report = json!({
        "command": "approx",
        "n": n,
        "median": m,
        "mad": s,
        "prior": prior,
        "posterior": post,
        "constants": {
            "eff_median": k.eff_med,
            "eff_mad": k.eff_mad,
            "c": k.c,
            "c_times_s": k.c * s,
        },
        "mu": { "mean": post.mu0, "q2.5": mu_lo, "q50": mu_med, "q97.5": mu_hi },
        "sigma2": { "mean": post.sigma2_mean(), "q2.5": s2_lo, "q50": s2_med, "q97.5": s2_hi },
        "versions": versions(),
    });
    let text = serde_json::to_string_pretty(&report)?;
    match a
        .out
        .clone()
        .or_else(|| file.output.and_then(|o| o.summary))
    {
        Some(p) => write_json(&p, &report)?,
        None => println!("{text}"),
    }
    Ok(0)
}

fn cmd_validate(a: &ValidateArgs) -> Result<i32> {
    let suite: Suite = a.suite.parse()?;
    let mut opts = SuiteOptions::default();
    if let Some(v) = a.iters {
        opts.iterations = v;
    }
    if let Some(v) = a.max_sweeps {
        opts.max_sweeps = v;
    }
    if let Some(v) = a.seed {
        opts.seed = v;
    }
    let report = run_suite(suite, &opts)?;
    let value = serde_json::to_value(&report)?;
    println!("{}", serde_json::to_string_pretty(&value)?);
    if let Some(p) = &a.out {
        write_json(p, &value)?;
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAILED {}: {}", c.name, c.detail);
    }
    Ok(if report.passed { 0 } else { 1 })
}
