//! Simulation experiments: simulate → initial fit → chain(s) → metrics,
//! replicated over a worker pool and aggregated in replication order.
//!
//! Seeds: replication `r` uses `s = split_seed(master, r)`; within it the
//! training data uses `split_seed(s, 0)`, the test set `split_seed(s, 1)`,
//! cross-validation folds `split_seed(s, 2)`, coupling record `k`
//! `split_seed(split_seed(s, 3), k)`, the OLAP chain `split_seed(s, 4)` and
//! the DA chain `split_seed(s, 5)`.

use std::time::Instant;

use log::warn;
use nalgebra::DMatrix;
use olap_core::coupling::{l_lag_meeting_time, mixing_time_estimate, tv_bound_curve, InitKind, MeetingConfig, MeetingRecord, MixingEstimate, TvCurve};
use olap_core::metrics::{f1_score, median, predict_trace, rmse, std_dev};
use olap_core::net::{cv_select, fit_elastic_net, lambda_grid, lambda_max, support_of, NetConfig};
use olap_core::olap::OlapModel;
use olap_core::rng::split_seed;
use olap_core::sampler::{median_model, modal_model, run_chain_with, run_da_chain, ChainConfig, Clock, DaConfig};
use olap_core::sim::{ar1_design, draw_responses, simulate, SimConfig};
use olap_core::{Dataset, Support};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, InitMethod, InitSection, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::io::support_indices;

pub struct StdClock(Instant);

impl StdClock {
    pub fn new() -> Self {
        StdClock(Instant::now())
    }
}

impl Default for StdClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for StdClock {
    fn now_nanos(&self) -> u64 {
        self.0.elapsed().as_nanos() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitFit {
    pub theta_tilde: Vec<f64>,
    pub delta0: Support,
    pub lambda1: Option<f64>,
    pub warnings: Vec<String>,
}

/// θ̃ and δ⁰ as configured: a (cross-validated) lasso fit and its support,
/// or zeros and the null model.
pub fn initial_estimate(data: &Dataset, init: &InitSection, seed: u64) -> Result<InitFit> {
    let p = data.p();
    match init.method {
        InitMethod::Null => Ok(InitFit { theta_tilde: vec![0.0; p], delta0: Support::empty(p), lambda1: None, warnings: Vec::new() }),
        InitMethod::Lasso => {
            let base = NetConfig { lambda2: init.lambda2, ..NetConfig::default() };
            let mut warnings = Vec::new();
            let cfg = match init.lambda1 {
                Some(l) => NetConfig { lambda1: l, ..base },
                None => {
                    let hi = lambda_max(data, &base)?;
                    let grid = lambda_grid(hi, init.lambda_ratio, init.n_lambda);
                    let sel = cv_select(data, init.folds, &grid, &base, seed)?;
                    warnings.extend(sel.warnings);
                    sel.config
                }
            };
            let fit = fit_elastic_net(data, &cfg)?;
            if !fit.converged {
                warnings.push(format!("elastic net stopped with KKT residual {:.3e}", fit.kkt_violation));
            }
            let delta0 = support_of(&fit, cfg.support_tol);
            Ok(InitFit { theta_tilde: fit.theta_tilde, delta0, lambda1: Some(cfg.lambda1), warnings })
        }
    }
}

/// Meeting records for `seeds`, computed in parallel and returned in seed order.
pub fn meeting_records(model: &OlapModel, init: &InitKind, cfg: &MeetingConfig, seeds: &[u64]) -> Result<Vec<MeetingRecord>> {
    seeds
        .par_iter()
        .map(|&s| l_lag_meeting_time(model, init, cfg, s).map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingSummary {
    pub curve: TvCurve,
    pub estimate: MixingEstimate,
    pub threshold: f64,
}

/// Curve over `t = 0..=max(τ − L)` and the first `t` with `d̂(t) ≤ threshold`.
pub fn mixing_summary(records: &[MeetingRecord], threshold: f64) -> Result<MixingSummary> {
    let censored = records.iter().filter(|r| r.censored).count();
    if censored > 0 {
        warn!("{censored} of {} meeting records censored and excluded", records.len());
    }
    let t_max = records.iter().filter(|r| !r.censored).map(|r| r.tau - r.lag).max().unwrap_or(0);
    let curve = tv_bound_curve(records, t_max)?;
    let estimate = mixing_time_estimate(&curve.d_hat, threshold)?;
    Ok(MixingSummary { curve, estimate, threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub rep: usize,
    pub seed: u64,
    pub f1_median: Option<f64>,
    pub f1_modal: Option<f64>,
    pub rmse: Option<f64>,
    /// Test rows dropped from the RMSE because their prediction overflowed.
    pub rmse_flagged_rows: usize,
    pub median_model: Vec<usize>,
    pub init_model_size: usize,
    pub lambda1: Option<f64>,
    pub burnin: u64,
    /// `fraction` or `coupling`.
    pub burnin_rule: String,
    pub mixing_time: Option<u64>,
    pub mixing_reached: Option<bool>,
    pub censored_records: usize,
    pub da_f1_median: Option<f64>,
    pub da_acceptance: Option<f64>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub rep: usize,
    pub init_secs: f64,
    pub coupling_secs: f64,
    pub chain_secs: f64,
    pub mean_step_micros: f64,
    pub da_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub replications: usize,
    pub completed: usize,
    pub incomplete: Vec<usize>,
    pub median_f1: f64,
    /// Standard deviation across replications.
    pub sd_f1: f64,
    pub median_f1_modal: f64,
    pub median_rmse: Option<f64>,
    pub sd_rmse: Option<f64>,
    pub median_mixing_time: Option<f64>,
    pub median_da_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub schema_version: u32,
    pub coupling_lag: u64,
    pub coupling_threshold: f64,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub header: ReportHeader,
    pub rows: Vec<ReplicationRow>,
    pub summary: Summary,
    /// Wall-clock measurements; excluded from [`ExperimentReport::body_json`].
    pub timing: Vec<TimingRow>,
}

impl ExperimentReport {
    /// Deterministic part of the report.
    pub fn body_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            header: &'a ReportHeader,
            rows: &'a [ReplicationRow],
            summary: &'a Summary,
        }
        serde_json::to_string_pretty(&Body { header: &self.header, rows: &self.rows, summary: &self.summary }).expect("report serializes")
    }
}

/// Medians and standard deviations over the completed rows.
pub fn summarize(rows: &[ReplicationRow]) -> Summary {
    let done: Vec<&ReplicationRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let col = |f: &dyn Fn(&ReplicationRow) -> Option<f64>| done.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
    let opt = |v: Vec<f64>, g: fn(&[f64]) -> f64| if v.is_empty() { None } else { Some(g(&v)) };
    let f1 = col(&|r| r.f1_median);
    Summary {
        replications: rows.len(),
        completed: done.len(),
        incomplete: rows.iter().filter(|r| r.error.is_some()).map(|r| r.rep).collect(),
        median_f1: median(&f1),
        sd_f1: std_dev(&f1),
        median_f1_modal: median(&col(&|r| r.f1_modal)),
        median_rmse: opt(col(&|r| r.rmse), median),
        sd_rmse: opt(col(&|r| r.rmse), std_dev),
        median_mixing_time: opt(col(&|r| r.mixing_time.map(|t| t as f64)), median),
        median_da_f1: opt(col(&|r| r.da_f1_median), median),
    }
}

fn empty_row(rep: usize, seed: u64) -> ReplicationRow {
    ReplicationRow {
        rep,
        seed,
        f1_median: None,
        f1_modal: None,
        rmse: None,
        rmse_flagged_rows: 0,
        median_model: Vec::new(),
        init_model_size: 0,
        lambda1: None,
        burnin: 0,
        burnin_rule: String::new(),
        mixing_time: None,
        mixing_reached: None,
        censored_records: 0,
        da_f1_median: None,
        da_acceptance: None,
        warnings: Vec::new(),
        error: None,
    }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// One replication; failures are recorded in the row, not propagated.
pub fn run_replication(cfg: &ExperimentConfig, rep: usize) -> (ReplicationRow, TimingRow) {
    let seed = split_seed(cfg.master_seed, rep as u64);
    let mut row = empty_row(rep, seed);
    let mut timing = TimingRow { rep, init_secs: 0.0, coupling_secs: 0.0, chain_secs: 0.0, mean_step_micros: 0.0, da_secs: 0.0 };
    if let Err(e) = replication_body(cfg, seed, &mut row, &mut timing) {
        warn!("replication {rep} failed: {e}");
        row.error = Some(e.to_string());
    }
    (row, timing)
}

fn replication_body(cfg: &ExperimentConfig, seed: u64, row: &mut ReplicationRow, timing: &mut TimingRow) -> Result<()> {
    let s = &cfg.simulation;
    let family = cfg.family()?;
    let sim_cfg = SimConfig {
        n: s.n,
        p: s.p,
        rho: s.rho,
        s_star: s.s_star,
        signal_low: s.signal_low,
        signal_high: s.signal_high,
        family,
        seed: split_seed(seed, 0),
    };
    let sim = simulate(&sim_cfg)?;
    let p = s.p;

    let t0 = Instant::now();
    let init = initial_estimate(&sim.data, &cfg.init, split_seed(seed, 2))?;
    timing.init_secs = secs(t0);
    row.lambda1 = init.lambda1;
    row.init_model_size = init.delta0.weight();
    row.warnings.extend(init.warnings.iter().cloned());
    let model = OlapModel::new(sim.data.clone(), cfg.prior.u, init.theta_tilde.clone())?;
    let j = cfg.sampler.j.min(p);

    let mut burnin = (cfg.sampler.steps as f64 * cfg.sampler.burnin_fraction).floor() as u64;
    row.burnin_rule = "fraction".into();
    if cfg.coupling.enabled {
        let t0 = Instant::now();
        let c = &cfg.coupling;
        let start = match c.start.as_str() {
            "null" => InitKind::Null,
            "init" => InitKind::Fixed(init.delta0.clone()),
            _ => InitKind::TruthPlusFalsePositives { truth: sim.delta_star.clone(), k: c.false_positives.min(p - sim.delta_star.weight()) },
        };
        let base = split_seed(seed, 3);
        let seeds: Vec<u64> = (0..c.records as u64).map(|k| split_seed(base, k)).collect();
        let mcfg = MeetingConfig::new(c.lag, j, c.max_steps);
        let records = meeting_records(&model, &start, &mcfg, &seeds)?;
        row.censored_records = records.iter().filter(|r| r.censored).count();
        match mixing_summary(&records, c.threshold) {
            Ok(m) => {
                row.mixing_time = Some(m.estimate.t);
                row.mixing_reached = Some(m.estimate.reached);
                if cfg.sampler.burnin_from_coupling && m.estimate.reached {
                    burnin = m.estimate.t.min(cfg.sampler.steps);
                    row.burnin_rule = "coupling".into();
                }
            }
            Err(e) => row.warnings.push(format!("mixing estimate unavailable: {e}")),
        }
        timing.coupling_secs = secs(t0);
    }
    row.burnin = burnin;

    let t0 = Instant::now();
    let clock = StdClock::new();
    let chain_cfg = ChainConfig { steps: cfg.sampler.steps, j, seed: split_seed(seed, 4), thin: 1 };
    let trace = run_chain_with(&model, &init.delta0, &chain_cfg, Some(&clock))?;
    timing.chain_secs = secs(t0);
    if !trace.step_nanos.is_empty() {
        timing.mean_step_micros = trace.step_nanos.iter().sum::<u64>() as f64 / trace.step_nanos.len() as f64 / 1e3;
    }
    let med = median_model(&trace, burnin)?;
    row.f1_median = Some(f1_score(&med, &sim.delta_star)?);
    row.median_model = support_indices(&med);
    if let Some(modal) = modal_model(&trace) {
        row.f1_modal = Some(f1_score(&modal, &sim.delta_star)?);
    }

    if s.n_test > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 1));
        let x_test: DMatrix<f64> = ar1_design(s.n_test, p, s.rho, &mut rng);
        match draw_responses(&x_test, &sim.theta_star, family, &mut rng) {
            Some(y_test) => {
                let pred = predict_trace(&model, &trace, burnin, &x_test)?;
                let keep: Vec<usize> = (0..s.n_test).filter(|&i| !pred.overflow[i]).collect();
                row.rmse_flagged_rows = s.n_test - keep.len();
                if !keep.is_empty() {
                    let y: Vec<f64> = keep.iter().map(|&i| y_test[i]).collect();
                    let yh: Vec<f64> = keep.iter().map(|&i| pred.mean[i]).collect();
                    row.rmse = Some(rmse(&y, &yh)?);
                }
            }
            None => row.warnings.push("test responses overflowed; RMSE skipped".into()),
        }
    }

    if cfg.da.enabled {
        let t0 = Instant::now();
        let da_cfg = DaConfig { adapt_steps: cfg.da.adapt_steps, ..DaConfig::default() };
        let da = run_da_chain(&model, &init.theta_tilde, &init.delta0, cfg.da.steps, &da_cfg, split_seed(seed, 5))?;
        let da_burn = (cfg.da.steps as f64 * cfg.sampler.burnin_fraction).floor() as u64;
        row.da_f1_median = Some(f1_score(&median_model(&da, da_burn)?, &sim.delta_star)?);
        row.da_acceptance = da.acceptance_rate;
        timing.da_secs = secs(t0);
    }
    Ok(())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let work = || -> Vec<(ReplicationRow, TimingRow)> { (0..cfg.replications).into_par_iter().map(|r| run_replication(cfg, r)).collect() };
    let results = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)
    } else {
        work()
    };
    let (rows, timing): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(ExperimentReport {
        header: ReportHeader {
            schema_version: SCHEMA_VERSION,
            coupling_lag: cfg.coupling.lag,
            coupling_threshold: cfg.coupling.threshold,
            config: cfg.clone(),
        },
        summary: summarize(&rows),
        rows,
        timing,
    })
}
