//! Command-line interface.
//!
//! Exit codes: 0 success, 1 validation error (bad arguments, config or
//! input data), 2 runtime failure.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use olap_core::chain::{BoundsConfig, FiniteChain, DEFAULT_MAX_CHAIN_P};
use olap_core::coupling::{InitKind, MeetingConfig, DEFAULT_LAG, DEFAULT_THRESHOLD};
use olap_core::metrics::predict;
use olap_core::olap::{OlapModel, DEFAULT_U};
use olap_core::rng::split_seed;
use olap_core::sampler::{inclusion_probs, median_model, modal_model, run_chain, DEFAULT_J};
use olap_core::sim::{simulate, SimConfig};
use olap_core::{GlmFamily, Support};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, InitMethod, InitSection};
use crate::error::{Error, Result};
use crate::experiment::{initial_estimate, meeting_records, mixing_summary, run_experiment};
use crate::io::{self, load_dataset, load_matrix, save_dataset, support_from_indices, support_indices, write_json, MeetingRow};

#[derive(Debug, Parser)]
#[command(name = "olap", version, about = "Sparse GLM variable selection with one-step Laplace model scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset (CSV) and its ground truth (JSON).
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler on a CSV dataset.
    Fit(FitArgs),
    /// Coupling-based mixing-time estimate.
    Mixing(MixingArgs),
    /// Exact spectral analysis of the single-flip chain (p ≤ 12).
    Spectral(SpectralArgs),
    /// Replicated simulation experiment from a TOML config.
    Benchmark(BenchmarkArgs),
    /// Posterior-averaged predictions for new rows.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "logistic")]
    pub family: GlmFamily,
    #[arg(long, default_value = "y")]
    pub response: String,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Source of θ̃ and δ⁰: `lasso` (cross-validated) or `null`.
    #[arg(long, default_value = "lasso")]
    pub init: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Fixed λ₁ instead of cross-validation.
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_U)]
    pub u: f64,
}

impl InitArgs {
    fn section(&self) -> Result<InitSection> {
        let method = match self.init.as_str() {
            "lasso" => InitMethod::Lasso,
            "null" => InitMethod::Null,
            other => return Err(Error::Validation(format!("--init {other:?} not one of lasso, null"))),
        };
        Ok(InitSection { method, folds: self.folds, lambda1: self.lambda1, ..InitSection::default() })
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 10)]
    pub s_star: usize,
    #[arg(long, default_value = "logistic")]
    pub family: GlmFamily,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file for θ⋆ and δ⋆.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub init: InitArgs,
    #[arg(long, default_value_t = 400)]
    pub steps: u64,
    #[arg(long, default_value_t = DEFAULT_J)]
    pub j: usize,
    #[arg(long, default_value_t = 0.5)]
    pub burnin_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON lines of the sampled models.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MixingArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub init: InitArgs,
    /// Start law: `null`, `init` (the lasso support) or 1-based indices like `1,4,7`.
    #[arg(long, default_value = "null")]
    pub start: String,
    #[arg(long, default_value_t = 30)]
    pub records: usize,
    #[arg(long, default_value_t = DEFAULT_LAG)]
    pub lag: u64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: u64,
    #[arg(long, default_value_t = DEFAULT_J)]
    pub j: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON lines, one meeting record each.
    #[arg(long)]
    pub records_out: Option<PathBuf>,
    /// CSV `t,d_hat`.
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub init: InitArgs,
    /// Reference model for canonical paths (1-based, comma separated); the
    /// posterior mode by default.
    #[arg(long)]
    pub delta_star: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.05")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub j0: usize,
    #[arg(long, default_value_t = 200)]
    pub decay_steps: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV `t,tv` from the null model.
    #[arg(long)]
    pub tv_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Training data used for the fit.
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    /// CSV of new rows with the same covariate columns (a response column is ignored).
    #[arg(long)]
    pub new: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCount {
    pub model: Vec<usize>,
    pub count: u64,
}

/// Output of `fit`, also the input of `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub family: String,
    pub columns: Vec<String>,
    pub u: f64,
    pub j: usize,
    pub steps: u64,
    pub burnin: u64,
    pub seed: u64,
    pub lambda1: Option<f64>,
    pub theta_tilde: Vec<f64>,
    pub inclusion_probs: Vec<f64>,
    pub median_model: Vec<usize>,
    pub median_model_names: Vec<String>,
    pub modal_model: Vec<usize>,
    /// Post-burn-in visit counts, in model order.
    pub models: Vec<ModelCount>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Truth {
    theta_star: Vec<f64>,
    delta_star: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct MixingOutput {
    lag: u64,
    threshold: f64,
    records: usize,
    censored: usize,
    mixing_time: u64,
    reached: bool,
    start: String,
}

#[derive(Debug, Clone, Serialize)]
struct SpectralOutput {
    lambda: f64,
    phi_by_zeta: Vec<ZetaPhi>,
    #[serde(rename = "m_X0")]
    m_x0: f64,
    m_full: f64,
    #[serde(rename = "pi_X0")]
    pi_x0: f64,
    max_path_len: usize,
    delta_star: Vec<usize>,
    assertions: Vec<AssertionOut>,
}

#[derive(Debug, Clone, Serialize)]
struct ZetaPhi {
    zeta: f64,
    phi: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct AssertionOut {
    name: String,
    lhs: Option<f64>,
    rhs: Option<f64>,
    /// `null` when the precondition did not hold.
    pass: Option<bool>,
    witness: Option<String>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn parse_model(p: usize, spec: &str) -> Result<Support> {
    let idx = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Validation(format!("bad model index {s:?}"))))
        .collect::<Result<Vec<usize>>>()?;
    support_from_indices(p, &idx)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Mixing(a) => mixing_cmd(a),
        Command::Spectral(a) => spectral_cmd(a),
        Command::Benchmark(a) => benchmark_cmd(a),
        Command::Predict(a) => predict_cmd(a),
    }
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let cfg = SimConfig { rho: a.rho, s_star: a.s_star, ..SimConfig::new(a.n, a.p, a.family, a.seed) };
    let sim = simulate(&cfg)?;
    save_dataset(&a.out, &sim.data, None)?;
    if let Some(t) = a.truth {
        write_json(&t, &Truth { theta_star: sim.theta_star, delta_star: support_indices(&sim.delta_star) })?;
    }
    Ok(())
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    if !(0.0..1.0).contains(&a.burnin_fraction) {
        return Err(Error::Validation("--burnin-fraction outside [0, 1)".into()));
    }
    let loaded = load_dataset(&a.data.data, a.data.family, &a.data.response)?;
    let p = loaded.data.p();
    let init = initial_estimate(&loaded.data, &a.init.section()?, split_seed(a.seed, 2))?;
    let model = OlapModel::new(loaded.data, a.init.u, init.theta_tilde.clone())?;
    let j = a.j.min(p);
    let trace = run_chain(&model, &init.delta0, a.steps, j, split_seed(a.seed, 4))?;
    let burnin = (a.steps as f64 * a.burnin_fraction).floor() as u64;
    let med = median_model(&trace, burnin)?;
    let mut models: Vec<(Support, u64)> = Vec::new();
    for (d, &s) in trace.samples.iter().zip(&trace.sample_steps) {
        if s >= burnin {
            match models.iter_mut().find(|(m, _)| m == d) {
                Some(e) => e.1 += 1,
                None => models.push((d.clone(), 1)),
            }
        }
    }
    models.sort_by(|x, y| x.0.cmp(&y.0));
    if let Some(path) = &a.trace {
        let rows: Vec<ModelCount> = trace.samples.iter().map(|d| ModelCount { model: support_indices(d), count: 1 }).collect();
        io::write_jsonl(BufWriter::new(File::create(path)?), &rows)?;
    }
    let out = FitOutput {
        family: a.data.family.name().into(),
        median_model_names: med.iter_active().map(|j| loaded.columns[j].clone()).collect(),
        columns: loaded.columns,
        u: a.init.u,
        j,
        steps: a.steps,
        burnin,
        seed: a.seed,
        lambda1: init.lambda1,
        theta_tilde: init.theta_tilde,
        inclusion_probs: inclusion_probs(&trace, burnin)?,
        median_model: support_indices(&med),
        modal_model: modal_model(&trace).map(|d| support_indices(&d)).unwrap_or_default(),
        models: models.into_iter().map(|(d, c)| ModelCount { model: support_indices(&d), count: c }).collect(),
        warnings: init.warnings,
    };
    write_json(&a.out, &out)
}

fn mixing_cmd(a: MixingArgs) -> Result<()> {
    let loaded = load_dataset(&a.data.data, a.data.family, &a.data.response)?;
    let p = loaded.data.p();
    let init = initial_estimate(&loaded.data, &a.init.section()?, split_seed(a.seed, 2))?;
    let model = OlapModel::new(loaded.data, a.init.u, init.theta_tilde)?;
    let start = match a.start.as_str() {
        "null" => InitKind::Null,
        "init" => InitKind::Fixed(init.delta0),
        spec => InitKind::Fixed(parse_model(p, spec)?),
    };
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(Error::Validation("--threshold outside (0, 1)".into()));
    }
    let base = split_seed(a.seed, 3);
    let seeds: Vec<u64> = (0..a.records as u64).map(|k| split_seed(base, k)).collect();
    let records = meeting_records(&model, &start, &MeetingConfig::new(a.lag, a.j.min(p), a.max_steps), &seeds)?;
    let summary = mixing_summary(&records, a.threshold)?;
    if let Some(path) = &a.records_out {
        let rows: Vec<MeetingRow> = records.iter().map(MeetingRow::from).collect();
        io::write_jsonl(BufWriter::new(File::create(path)?), &rows)?;
    }
    if let Some(path) = &a.curve_out {
        io::write_curve_csv(BufWriter::new(File::create(path)?), &summary.curve)?;
    }
    let out = MixingOutput {
        lag: a.lag,
        threshold: a.threshold,
        records: records.len(),
        censored: summary.curve.censored_excluded,
        mixing_time: summary.estimate.t,
        reached: summary.estimate.reached,
        start: start.label(),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn spectral_cmd(a: SpectralArgs) -> Result<()> {
    let loaded = load_dataset(&a.data.data, a.data.family, &a.data.response)?;
    let p = loaded.data.p();
    if p > DEFAULT_MAX_CHAIN_P {
        return Err(Error::Validation(format!("spectral analysis needs p ≤ {DEFAULT_MAX_CHAIN_P}, got {p}")));
    }
    let init = initial_estimate(&loaded.data, &a.init.section()?, 0)?;
    let model = OlapModel::new(loaded.data, a.init.u, init.theta_tilde)?;
    let chain = FiniteChain::from_model(&model, DEFAULT_MAX_CHAIN_P)?;
    let star = match &a.delta_star {
        Some(s) => parse_model(p, s)?,
        None => model.enumerate_posterior(DEFAULT_MAX_CHAIN_P)?.mode(),
    };
    let report = chain.verify_bounds(&star, &a.eps, &BoundsConfig { j0: a.j0, decay_steps: a.decay_steps, ..BoundsConfig::default() })?;
    if let Some(path) = &a.tv_out {
        let tv: Vec<f64> = chain.tv_curve(&chain.point_mass(0), a.decay_steps)?.iter().map(|d| d / 2.0).collect();
        io::write_tv_csv(BufWriter::new(File::create(path)?), &tv)?;
    }
    let out = SpectralOutput {
        lambda: report.lambda,
        phi_by_zeta: report.phi_by_zeta.iter().map(|&(zeta, phi)| ZetaPhi { zeta, phi }).collect(),
        m_x0: report.m_x0,
        m_full: report.m_full,
        pi_x0: report.pi_x0,
        max_path_len: report.max_path_len,
        delta_star: support_indices(&star),
        assertions: report
            .assertions
            .iter()
            .map(|x| AssertionOut { name: x.name.clone(), lhs: finite(x.lhs), rhs: finite(x.rhs), pass: x.pass, witness: x.witness.clone() })
            .collect(),
    };
    write_json(&a.out, &out)?;
    if !report.violations().is_empty() {
        return Err(Error::Core(olap_core::Error::InvalidData(format!("{} bound(s) violated; see report", report.violations().len()))));
    }
    Ok(())
}

fn benchmark_cmd(a: BenchmarkArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config)?;
    let cfg = ExperimentConfig::from_toml(&text)?;
    let report = run_experiment(&cfg)?;
    write_json(&a.out, &report)?;
    println!("{}", serde_json::to_string_pretty(&report.summary)?);
    Ok(())
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let loaded = load_dataset(&a.data.data, a.data.family, &a.data.response)?;
    let fit: FitOutput = io::read_json(&a.fit)?;
    let p = loaded.data.p();
    if fit.theta_tilde.len() != p {
        return Err(Error::Validation(format!("fit has {} coefficients, data has {p} covariates", fit.theta_tilde.len())));
    }
    let (x_new, cols) = load_matrix(&a.new, Some(&a.data.response))?;
    if cols != loaded.columns {
        return Err(Error::Validation("new data columns differ from the training columns".into()));
    }
    let model = OlapModel::new(loaded.data, fit.u, fit.theta_tilde)?;
    let mut models = Vec::new();
    for m in &fit.models {
        let d = support_from_indices(p, &m.model)?;
        models.extend(std::iter::repeat_n(d, m.count as usize));
    }
    let pred = predict(&model, &models, &x_new)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&a.out)?));
    w.write_record(["row", "prediction", "overflow"])?;
    for (i, (m, o)) in pred.mean.iter().zip(&pred.overflow).enumerate() {
        w.write_record([(i + 1).to_string(), m.to_string(), o.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
