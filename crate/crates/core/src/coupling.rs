//! Lagged coupled Gibbs chains and coupling-based TV upper bounds.
//!
//! Both chains share the ordered coordinate subset and the uniform for each
//! coordinate update, so bit `j` is `1{U < q_j}` in each chain with that
//! chain's own `q_j`: a maximal coupling of the two Bernoulli draws.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DimensionError, Error, Result};
use crate::olap::{OlapModel, PosteriorTable};
use crate::rng::{split_seed, uniform_f64, uniform_index};
use crate::sampler::{gibbs_step, ChainState};
use crate::support::Support;

pub const DEFAULT_LAG: u64 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.25;

/// Shared randomness driving both chains.
#[derive(Debug, Clone)]
pub struct CoupledDriver {
    draws: ChainState,
    step: u64,
}

impl CoupledDriver {
    pub fn new(p: usize, seed: u64) -> Self {
        CoupledDriver { draws: ChainState::new(Support::empty(p), seed), step: 0 }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// The two bits drawn from one shared uniform.
#[inline]
pub fn coupled_bits(u: f64, qx: f64, qy: f64) -> (bool, bool) {
    (u < qx, u < qy)
}

/// One coupled step: the `J` coordinates and their uniforms are shared.
///
/// Errors with [`Error::CouplingBroken`] if the chains entered equal and left
/// different, which can only happen through inconsistent conditionals.
pub fn coupled_gibbs_step(model: &OlapModel, x: &mut Support, y: &mut Support, j: usize, driver: &mut CoupledDriver) -> Result<()> {
    let p = model.p();
    if j == 0 || j > p {
        return Err(Error::InvalidArgument(format!("J = {j} must lie in 1..={p}")));
    }
    for d in [&*x, &*y] {
        if d.len() != p {
            return Err(DimensionError::Mismatch { expected: p, found: d.len() }.into());
        }
    }
    let met = x == y;
    for i in 0..j {
        let coord = driver.draws.pick(i);
        let u = driver.draws.uniform();
        let qx = model.cond_prob(x, coord)?;
        let qy = if met { qx } else { model.cond_prob(y, coord)? };
        let (bx, by) = coupled_bits(u, qx, qy);
        x.set(coord, bx);
        y.set(coord, by);
    }
    driver.step += 1;
    if met && x != y {
        return Err(Error::CouplingBroken { step: driver.step });
    }
    Ok(())
}

/// Law of the initial states; `X₀` and `Y₀` are drawn independently from it.
#[derive(Debug, Clone)]
pub enum InitKind {
    Null,
    Fixed(Support),
    /// Truth plus `k` false positives chosen uniformly outside the truth.
    TruthPlusFalsePositives { truth: Support, k: usize },
    Posterior(PosteriorTable),
}

impl InitKind {
    pub fn label(&self) -> String {
        match self {
            InitKind::Null => "null".into(),
            InitKind::Fixed(_) => "fixed".into(),
            InitKind::TruthPlusFalsePositives { k, .. } => format!("truth+{k}fp"),
            InitKind::Posterior(_) => "posterior".into(),
        }
    }

    pub fn sample(&self, p: usize, rng: &mut ChaCha8Rng) -> Result<Support> {
        let check = |d: &Support| {
            if d.len() == p {
                Ok(())
            } else {
                Err(Error::from(DimensionError::Mismatch { expected: p, found: d.len() }))
            }
        };
        match self {
            InitKind::Null => Ok(Support::empty(p)),
            InitKind::Fixed(d) => {
                check(d)?;
                Ok(d.clone())
            }
            InitKind::TruthPlusFalsePositives { truth, k } => {
                check(truth)?;
                let mut outside: Vec<usize> = (0..p).filter(|&j| !truth.get(j)).collect();
                if *k > outside.len() {
                    return Err(Error::InvalidArgument(format!("{k} false positives but only {} irrelevant coordinates", outside.len())));
                }
                let mut d = truth.clone();
                for i in 0..*k {
                    let r = i + uniform_index(rng, outside.len() - i);
                    outside.swap(i, r);
                    d.set(outside[i], true);
                }
                Ok(d)
            }
            InitKind::Posterior(table) => {
                if table.p() != p {
                    return Err(DimensionError::Mismatch { expected: p, found: table.p() }.into());
                }
                let u = uniform_f64(rng);
                let mut acc = 0.0;
                let probs = table.probs();
                for (code, &w) in probs.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        return Ok(Support::from_code(p, code));
                    }
                }
                let last = probs.iter().rposition(|&w| w > 0.0).unwrap_or(0);
                Ok(Support::from_code(p, last))
            }
        }
    }

    /// Law of `X₀` as a vector over [`Support::code`]; `None` for the random
    /// false-positive start.
    pub fn law(&self, p: usize) -> Option<Vec<f64>> {
        let point = |d: &Support| {
            let mut v = alloc::vec![0.0; 1 << p];
            v[d.code()] = 1.0;
            v
        };
        match self {
            InitKind::Null => Some(point(&Support::empty(p))),
            InitKind::Fixed(d) => Some(point(d)),
            InitKind::Posterior(t) => Some(t.probs().to_vec()),
            InitKind::TruthPlusFalsePositives { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeetingRecord {
    /// First `t ≥ L` with `X_t = Y_{t−L}`; the step cap when censored.
    pub tau: u64,
    pub lag: u64,
    pub seed: u64,
    pub delta0_x: Support,
    pub delta0_y: Support,
    pub censored: bool,
    pub init_kind: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeetingConfig {
    pub lag: u64,
    pub j: usize,
    pub max_steps: u64,
    /// Joint steps run after meeting to re-check faithfulness.
    pub post_meeting_steps: u64,
}

impl MeetingConfig {
    pub fn new(lag: u64, j: usize, max_steps: u64) -> Self {
        MeetingConfig { lag, j, max_steps, post_meeting_steps: 0 }
    }
}

/// Runs `X` alone for `L` steps, then `(X, Y)` jointly until `X_t = Y_{t−L}`.
///
/// Streams: initial draws use `split_seed(seed, 0)`, the solo phase of `X`
/// uses `split_seed(seed, 1)`, the joint phase `split_seed(seed, 2)`.
pub fn l_lag_meeting_time(model: &OlapModel, init: &InitKind, cfg: &MeetingConfig, seed: u64) -> Result<MeetingRecord> {
    if cfg.lag == 0 {
        return Err(Error::InvalidArgument("lag must be at least 1".into()));
    }
    let p = model.p();
    let mut init_rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 0));
    let x0 = init.sample(p, &mut init_rng)?;
    let y0 = init.sample(p, &mut init_rng)?;

    let mut solo = ChainState::new(x0.clone(), split_seed(seed, 1));
    for _ in 0..cfg.lag {
        gibbs_step(model, &mut solo, cfg.j)?;
    }
    let mut x = solo.delta;
    let mut y = y0.clone();
    let mut driver = CoupledDriver::new(p, split_seed(seed, 2));
    let mut t = cfg.lag;
    let mut censored = false;
    while x != y {
        if t >= cfg.max_steps {
            censored = true;
            break;
        }
        coupled_gibbs_step(model, &mut x, &mut y, cfg.j, &mut driver)?;
        t += 1;
    }
    if !censored {
        for _ in 0..cfg.post_meeting_steps {
            coupled_gibbs_step(model, &mut x, &mut y, cfg.j, &mut driver)?;
        }
    }
    Ok(MeetingRecord { tau: t, lag: cfg.lag, seed, delta0_x: x0, delta0_y: y0, censored, init_kind: init.label() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvCurve {
    /// `d̂(t)` for `t = 0..=t_max`.
    pub d_hat: Vec<f64>,
    pub lag: u64,
    pub used: usize,
    /// Censored records left out of the average.
    pub censored_excluded: usize,
}

/// `d̂(t) = mean max(0, ⌈(τ − L − t)/L⌉)` over uncensored records.
pub fn tv_bound_curve(records: &[MeetingRecord], t_max: u64) -> Result<TvCurve> {
    let first = records.first().ok_or_else(|| Error::InvalidArgument("no meeting records".into()))?;
    let lag = first.lag;
    if records.iter().any(|r| r.lag != lag) {
        return Err(Error::InvalidArgument("records mix different lags".into()));
    }
    let taus: Vec<u64> = records.iter().filter(|r| !r.censored).map(|r| r.tau).collect();
    if taus.is_empty() {
        return Err(Error::InvalidArgument("every record is censored".into()));
    }
    let nf = taus.len() as f64;
    let d_hat = (0..=t_max)
        .map(|t| {
            let total: u64 = taus.iter().map(|&tau| (tau - lag).saturating_sub(t).div_ceil(lag)).sum();
            total as f64 / nf
        })
        .collect();
    Ok(TvCurve { d_hat, lag, used: taus.len(), censored_excluded: records.len() - taus.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixingEstimate {
    pub t: u64,
    /// False when the curve never dropped to the threshold; `t` is then `t_max + 1`.
    pub reached: bool,
}

pub fn mixing_time_estimate(curve: &[f64], threshold: f64) -> Result<MixingEstimate> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0, 1)")));
    }
    Ok(match curve.iter().position(|&d| d <= threshold) {
        Some(t) => MixingEstimate { t: t as u64, reached: true },
        None => MixingEstimate { t: curve.len() as u64, reached: false },
    })
}
