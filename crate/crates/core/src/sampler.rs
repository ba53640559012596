//! Random-scan Gibbs over models under the OLAP posterior, and the exact
//! data-augmentation sampler used as comparator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{DimensionError, Error, Result};
use crate::glm::{dot, Dataset};
use crate::olap::OlapModel;
use crate::rng::{uniform_f64, uniform_index, RngSnapshot};
use crate::support::Support;

/// Default number of coordinates updated per step.
pub const DEFAULT_J: usize = 100;

/// Monotone nanosecond clock; supplied by the caller since `core` has none.
pub trait Clock {
    fn now_nanos(&self) -> u64;
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub delta: Support,
    pub step: u64,
    rng: ChaCha8Rng,
    /// Persistent permutation buffer for partial Fisher–Yates.
    perm: Vec<usize>,
}

impl ChainState {
    pub fn new(delta: Support, seed: u64) -> Self {
        let p = delta.len();
        ChainState { delta, step: 0, rng: ChaCha8Rng::seed_from_u64(seed), perm: (0..p).collect() }
    }

    pub fn rng_snapshot(&self) -> RngSnapshot {
        RngSnapshot::of(&self.rng)
    }

    /// `i`-th element of a partial Fisher–Yates shuffle; calling with
    /// `i = 0, 1, …, J−1` yields a uniformly random ordered subset.
    pub(crate) fn pick(&mut self, i: usize) -> usize {
        let p = self.perm.len();
        let k = i + uniform_index(&mut self.rng, p - i);
        self.perm.swap(i, k);
        self.perm[i]
    }

    #[cfg(test)]
    fn ordered_subset(&mut self, j: usize) -> Vec<usize> {
        (0..j).map(|i| self.pick(i)).collect()
    }

    pub(crate) fn uniform(&mut self) -> f64 {
        uniform_f64(&mut self.rng)
    }
}

/// Sampled sequence plus per-model visit counts.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// Retained states (every `thin`-th, starting with the initial state).
    pub samples: Vec<Support>,
    /// Step index of each retained state.
    pub sample_steps: Vec<u64>,
    /// Log score (OLAP) or log joint density (DA) of each retained state.
    pub log_scores: Vec<f64>,
    /// Visits over all recorded states `δ⁰, …, δ^{steps}`.
    pub visits: HashMap<Support, u64>,
    pub steps: u64,
    /// Wall-clock per step, when a clock was supplied.
    pub step_nanos: Vec<u64>,
    /// Post-adaptation MaLA acceptance rate (DA chains only).
    pub acceptance_rate: Option<f64>,
    /// Final MaLA step size (DA chains only).
    pub mala_step: Option<f64>,
}

impl Trace {
    fn record(&mut self, delta: &Support, step: u64, log_score: f64, thin: u64) {
        *self.visits.entry(delta.clone()).or_insert(0) += 1;
        if step % thin == 0 {
            self.samples.push(delta.clone());
            self.sample_steps.push(step);
            self.log_scores.push(log_score);
        }
    }

    pub fn final_state(&self) -> Option<&Support> {
        self.samples.last()
    }

    /// Visit frequencies indexed by [`Support::code`] (`p` small).
    pub fn empirical_law(&self, p: usize) -> Vec<f64> {
        let total: u64 = self.visits.values().sum();
        let mut out = vec![0.0; 1 << p];
        for (d, &c) in &self.visits {
            out[d.code()] += c as f64 / total as f64;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub steps: u64,
    pub j: usize,
    pub seed: u64,
    pub thin: u64,
}

impl ChainConfig {
    pub fn new(steps: u64, j: usize, seed: u64) -> Self {
        ChainConfig { steps, j, seed, thin: 1 }
    }
}

/// One step of the random-scan Gibbs sampler: `J` coordinates in a uniformly
/// random order, each resampled from its OLAP conditional.
pub fn gibbs_step(model: &OlapModel, state: &mut ChainState, j: usize) -> Result<()> {
    let p = model.p();
    if j == 0 || j > p {
        return Err(Error::InvalidArgument(format!("J = {j} must lie in 1..={p}")));
    }
    if state.delta.len() != p {
        return Err(DimensionError::Mismatch { expected: p, found: state.delta.len() }.into());
    }
    for i in 0..j {
        let coord = state.pick(i);
        let u = state.uniform();
        let q = model.cond_prob(&state.delta, coord)?;
        state.delta.set(coord, u < q);
    }
    state.step += 1;
    Ok(())
}

pub fn run_chain(model: &OlapModel, delta0: &Support, steps: u64, j: usize, seed: u64) -> Result<Trace> {
    run_chain_with(model, delta0, &ChainConfig::new(steps, j, seed), None)
}

pub fn run_chain_with(model: &OlapModel, delta0: &Support, cfg: &ChainConfig, clock: Option<&dyn Clock>) -> Result<Trace> {
    let thin = cfg.thin.max(1);
    let mut state = ChainState::new(delta0.clone(), cfg.seed);
    let mut trace = Trace::default();
    trace.record(delta0, 0, model.olap_log_score(delta0)?.log_score, thin);
    for t in 1..=cfg.steps {
        let start = clock.map(|c| c.now_nanos());
        gibbs_step(model, &mut state, cfg.j)?;
        if let (Some(c), Some(s)) = (clock, start) {
            trace.step_nanos.push(c.now_nanos().saturating_sub(s));
        }
        let score = if t % thin == 0 { model.olap_log_score(&state.delta)?.log_score } else { 0.0 };
        trace.record(&state.delta, t, score, thin);
    }
    trace.steps = cfg.steps;
    Ok(trace)
}

/// Inclusion frequency per coordinate over retained samples at steps `≥ burnin`.
pub fn inclusion_probs(trace: &Trace, burnin: u64) -> Result<Vec<f64>> {
    let kept: Vec<&Support> = trace
        .samples
        .iter()
        .zip(&trace.sample_steps)
        .filter(|(_, &s)| s >= burnin)
        .map(|(d, _)| d)
        .collect();
    let Some(first) = kept.first() else {
        return Err(Error::InvalidArgument(format!("burn-in {burnin} leaves no samples")));
    };
    let mut out = vec![0.0; first.len()];
    for d in &kept {
        for j in d.iter_active() {
            out[j] += 1.0;
        }
    }
    let m = kept.len() as f64;
    out.iter_mut().for_each(|v| *v /= m);
    Ok(out)
}

/// Median-probability model: inclusion frequency strictly above ½.
pub fn median_model(trace: &Trace, burnin: u64) -> Result<Support> {
    let probs = inclusion_probs(trace, burnin)?;
    Ok(Support::from_bools(&probs.iter().map(|&q| q > 0.5).collect::<Vec<_>>()))
}

/// Most visited model (smallest in lexicographic order on ties).
pub fn modal_model(trace: &Trace) -> Option<Support> {
    trace
        .visits
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(d, _)| d.clone())
}

// ---------------------------------------------------------------------------
// Data augmentation: joint (δ, θ) with pseudo-prior N(0, ρ₀⁻¹) off-support.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DaConfig {
    /// Pseudo-prior precision; `None` means `n`.
    pub rho0: Option<f64>,
    /// Initial MaLA step size; `None` means `1/n`.
    pub mala_step: Option<f64>,
    pub adapt_target: f64,
    pub adapt: bool,
    /// Steps during which the step size adapts; frozen afterwards.
    pub adapt_steps: u64,
}

impl Default for DaConfig {
    fn default() -> Self {
        DaConfig { rho0: None, mala_step: None, adapt_target: 0.57, adapt: true, adapt_steps: 1000 }
    }
}

#[derive(Debug, Clone)]
pub struct DaState {
    pub theta: Vec<f64>,
    pub delta: Support,
    pub step_size: f64,
    pub step: u64,
    rng: ChaCha8Rng,
    rho0: f64,
    eta: Vec<f64>,
    accepted: u64,
    proposed: u64,
}

impl DaState {
    pub fn new(data: &Dataset, theta: Vec<f64>, delta: Support, cfg: &DaConfig, seed: u64) -> Result<Self> {
        let p = data.p();
        if theta.len() != p {
            return Err(DimensionError::Mismatch { expected: p, found: theta.len() }.into());
        }
        if delta.len() != p {
            return Err(DimensionError::Mismatch { expected: p, found: delta.len() }.into());
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("θ must be finite".into()));
        }
        let n = data.n() as f64;
        let rho0 = cfg.rho0.unwrap_or(n);
        if !(rho0 > 0.0) {
            return Err(Error::InvalidArgument(format!("ρ₀ must be positive, got {rho0}")));
        }
        let step_size = cfg.mala_step.unwrap_or(1.0 / n);
        let eta = masked_predictor(data, &theta, &delta);
        Ok(DaState { theta, delta, step_size, step: 0, rng: ChaCha8Rng::seed_from_u64(seed), rho0, eta, accepted: 0, proposed: 0 })
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 { 0.0 } else { self.accepted as f64 / self.proposed as f64 }
    }
}

fn masked_predictor(data: &Dataset, theta: &[f64], delta: &Support) -> Vec<f64> {
    let mut eta = vec![0.0; data.n()];
    for j in delta.iter_active() {
        for (e, x) in eta.iter_mut().zip(data.column(j)) {
            *e += theta[j] * x;
        }
    }
    eta
}

/// `ℓ` at a linear predictor, `−∞` on overflow.
fn ll_or_neg_inf(data: &Dataset, eta: &[f64]) -> Result<f64> {
    match crate::glm::log_lik_from_predictor(data, eta) {
        Ok(v) => Ok(v),
        Err(Error::Overflow { .. }) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Log odds of `δⱼ = 1` given θ and the other bits:
/// `−u log p − ½ log ρ₀ − ½θⱼ² + (ρ₀/2)θⱼ² + ℓ(θ_{δ^{(j,1)}}) − ℓ(θ_{δ^{(j,0)}})`.
pub fn da_log_odds(u: f64, log_p: f64, rho0: f64, theta_j: f64, ll1: f64, ll0: f64) -> f64 {
    let prior = -u * log_p - 0.5 * libm::log(rho0) - 0.5 * theta_j * theta_j + 0.5 * rho0 * theta_j * theta_j;
    match (ll1 == f64::NEG_INFINITY, ll0 == f64::NEG_INFINITY) {
        (true, true) => f64::NEG_INFINITY,
        (true, false) => f64::NEG_INFINITY,
        (false, true) => f64::INFINITY,
        _ => prior + ll1 - ll0,
    }
}

/// `log π(θ | δ)` up to a constant and its gradient.
fn da_target(data: &Dataset, theta: &[f64], delta: &Support, rho0: f64, eta: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
    let mut ll = 0.0;
    let mut resid = Vec::with_capacity(eta.len());
    for (&e, &y) in eta.iter().zip(data.y()) {
        match (data.psi(e, 0), data.psi(e, 1)) {
            (Ok(v0), Ok(v1)) => {
                ll += y * e - v0;
                resid.push(y - v1);
            }
            (Err(Error::Overflow { .. }), _) | (_, Err(Error::Overflow { .. })) => return Ok(None),
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    let mut val = ll;
    let mut grad = vec![0.0; theta.len()];
    for (j, g) in grad.iter_mut().enumerate() {
        if delta.get(j) {
            val -= 0.5 * theta[j] * theta[j];
            *g = dot(data.column(j), &resid) - theta[j];
        } else {
            val -= 0.5 * rho0 * theta[j] * theta[j];
            *g = -rho0 * theta[j];
        }
    }
    Ok(Some((val, grad)))
}

fn log_proposal(to: &[f64], from: &[f64], grad_from: &[f64], h: f64) -> f64 {
    -to.iter()
        .zip(from)
        .zip(grad_from)
        .map(|((t, f), g)| {
            let d = t - f - 0.5 * h * g;
            d * d
        })
        .sum::<f64>()
        / (2.0 * h)
}

/// One DA sweep: systematic Gibbs over δ₁..δ_p given θ, then one MaLA move
/// on θ given δ. `adapting` enables the Robbins–Monro step-size update.
pub fn da_step(model: &OlapModel, state: &mut DaState, cfg: &DaConfig, adapting: bool) -> Result<()> {
    let data = model.data();
    let (u, log_p, rho0) = (model.u(), model.log_p(), state.rho0);

    // (i) δ | θ. η tracks X(θ⊙δ).
    let mut eta_alt = vec![0.0; data.n()];
    for j in 0..data.p() {
        let tj = state.theta[j];
        let xj = data.column(j);
        let on = state.delta.get(j);
        let sign = if on { -1.0 } else { 1.0 };
        for i in 0..eta_alt.len() {
            eta_alt[i] = state.eta[i] + sign * tj * xj[i];
        }
        let ll_cur = ll_or_neg_inf(data, &state.eta)?;
        let ll_alt = ll_or_neg_inf(data, &eta_alt)?;
        let (ll1, ll0) = if on { (ll_cur, ll_alt) } else { (ll_alt, ll_cur) };
        let lo = da_log_odds(u, log_p, rho0, tj, ll1, ll0);
        let q = if lo == f64::INFINITY { 1.0 } else { crate::glm::sigmoid(lo) };
        let bit = uniform_f64(&mut state.rng) < q;
        if bit != on {
            state.delta.set(j, bit);
            core::mem::swap(&mut state.eta, &mut eta_alt);
        }
    }

    // (ii) θ | δ by MaLA.
    let h = state.step_size;
    let current = da_target(data, &state.theta, &state.delta, rho0, &state.eta)?;
    let xi: Vec<f64> = (0..data.p()).map(|_| state.rng.sample::<f64, _>(StandardNormal)).collect();
    let u_acc = uniform_f64(&mut state.rng);
    let mut alpha = 0.0;
    if let Some((val, grad)) = current {
        let sq = libm::sqrt(h);
        let prop: Vec<f64> = (0..data.p()).map(|j| state.theta[j] + 0.5 * h * grad[j] + sq * xi[j]).collect();
        let eta_p = masked_predictor(data, &prop, &state.delta);
        if let Some((val_p, grad_p)) = da_target(data, &prop, &state.delta, rho0, &eta_p)? {
            let log_ratio = val_p - val + log_proposal(&state.theta, &prop, &grad_p, h) - log_proposal(&prop, &state.theta, &grad, h);
            alpha = if log_ratio >= 0.0 { 1.0 } else { libm::exp(log_ratio) };
            if u_acc < alpha {
                state.theta = prop;
                state.eta = eta_p;
                if !adapting {
                    state.accepted += 1;
                }
            }
        }
    }
    if adapting {
        let gamma = libm::pow(state.step as f64 + 1.0, -0.6);
        state.step_size *= libm::exp(gamma * (alpha - cfg.adapt_target));
    } else {
        state.proposed += 1;
    }
    state.step += 1;
    Ok(())
}

/// Log joint density of `(δ, θ)` up to a constant.
fn da_log_joint(model: &OlapModel, state: &DaState) -> Result<f64> {
    let data = model.data();
    let ll = ll_or_neg_inf(data, &state.eta)?;
    let mut v = ll - model.u() * state.delta.weight() as f64 * model.log_p();
    for (j, &t) in state.theta.iter().enumerate() {
        v += if state.delta.get(j) { -0.5 * t * t } else { 0.5 * libm::log(state.rho0) - 0.5 * state.rho0 * t * t };
    }
    Ok(v)
}

/// Runs the DA chain; the first `cfg.adapt_steps` steps (if adapting) tune
/// the step size and are still recorded.
pub fn run_da_chain(model: &OlapModel, theta0: &[f64], delta0: &Support, steps: u64, cfg: &DaConfig, seed: u64) -> Result<Trace> {
    let mut state = DaState::new(model.data(), theta0.to_vec(), delta0.clone(), cfg, seed)?;
    let mut trace = Trace::default();
    trace.record(delta0, 0, da_log_joint(model, &state)?, 1);
    for t in 1..=steps {
        let adapting = cfg.adapt && t <= cfg.adapt_steps;
        da_step(model, &mut state, cfg, adapting)?;
        let lj = da_log_joint(model, &state)?;
        trace.record(&state.delta, t, lj, 1);
    }
    trace.steps = steps;
    trace.acceptance_rate = Some(state.acceptance_rate());
    trace.mala_step = Some(state.step_size);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::GlmFamily;
    use crate::olap::DEFAULT_MAX_ENUM_P;
    use nalgebra::DMatrix;

    fn model(seed: u64, n: usize, p: usize, family: GlmFamily, u: f64) -> OlapModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = (0..n)
            .map(|i| {
                let e = 0.6 * x[(i, 0)];
                match family {
                    GlmFamily::Gaussian => e + rng.sample::<f64, _>(StandardNormal),
                    GlmFamily::Logistic => f64::from(rng.random::<f64>() < 1.0 / (1.0 + libm::exp(-e))),
                    GlmFamily::Poisson => rng.sample(rand_distr::Poisson::new(libm::exp(e)).unwrap()),
                }
            })
            .collect();
        OlapModel::new(Dataset::new(x, y, family).unwrap(), u, vec![0.0; p]).unwrap()
    }

    #[test]
    fn full_sweep_visits_each_index_once() {
        let mut st = ChainState::new(Support::empty(9), 4);
        for _ in 0..20 {
            let mut idx = st.ordered_subset(9);
            idx.sort_unstable();
            assert_eq!(idx, (0..9).collect::<Vec<_>>());
        }
    }

    #[test]
    fn ordered_subsets_are_uniform() {
        let mut st = ChainState::new(Support::empty(4), 5);
        let mut counts = HashMap::new();
        for _ in 0..120_000 {
            let s = st.ordered_subset(2);
            *counts.entry((s[0], s[1])).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 12);
        assert!(counts.values().all(|&c| (9_500..10_500).contains(&c)));
    }

    #[test]
    fn step_consumes_fixed_words() {
        let m = model(1, 30, 5, GlmFamily::Logistic, 0.8);
        let mut st = ChainState::new(Support::empty(5), 7);
        let w0 = st.rng_snapshot().word_pos;
        gibbs_step(&m, &mut st, 3).unwrap();
        // Two u64 per coordinate = four 32-bit words.
        assert_eq!(st.rng_snapshot().word_pos - w0, 12);
    }

    #[test]
    fn steps_zero_and_determinism() {
        let m = model(2, 30, 5, GlmFamily::Logistic, 0.8);
        let d0 = Support::from_indices(5, &[2]).unwrap();
        let t = run_chain(&m, &d0, 0, 1, 3).unwrap();
        assert_eq!(t.samples, vec![d0.clone()]);
        let a = run_chain(&m, &d0, 500, 2, 3).unwrap();
        let b = run_chain(&m, &d0, 500, 2, 3).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.visits.values().sum::<u64>(), 501);
        assert!(run_chain(&m, &d0, 5, 0, 3).is_err());
        assert!(run_chain(&m, &d0, 5, 6, 3).is_err());
    }

    #[test]
    fn replay_from_snapshot() {
        let m = model(3, 30, 6, GlmFamily::Poisson, 0.8);
        let mut a = ChainState::new(Support::empty(6), 11);
        for _ in 0..10 {
            gibbs_step(&m, &mut a, 2).unwrap();
        }
        let mut b = a.clone();
        b.rng = a.rng_snapshot().restore();
        for _ in 0..50 {
            gibbs_step(&m, &mut a, 2).unwrap();
            gibbs_step(&m, &mut b, 2).unwrap();
            assert_eq!(a.delta, b.delta);
        }
    }

    #[test]
    fn certain_conditional_forces_inclusion() {
        // A column equal to y/1 with huge n makes q ≈ 1.
        let n = 400;
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { (i % 2) as f64 * 4.0 - 2.0 } else { ((i * 7) % 5) as f64 - 2.0 });
        let y = (0..n).map(|i| x[(i, 0)] * 3.0).collect();
        let m = OlapModel::new(Dataset::new(x, y, GlmFamily::Gaussian).unwrap(), 0.8, vec![0.0; 2]).unwrap();
        assert_eq!(m.cond_prob(&Support::empty(2), 0).unwrap(), 1.0);
        let t = run_chain(&m, &Support::empty(2), 50, 2, 1).unwrap();
        assert!(t.samples[1..].iter().all(|d| d.get(0)));
    }

    #[test]
    fn inclusion_and_median_on_constant_trace() {
        let d = Support::from_indices(4, &[1, 3]).unwrap();
        let mut t = Trace::default();
        for s in 0..10 {
            t.record(&d, s, 0.0, 1);
        }
        assert_eq!(inclusion_probs(&t, 3).unwrap(), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(median_model(&t, 0).unwrap(), d);
        assert_eq!(modal_model(&t).unwrap(), d);
        assert!(inclusion_probs(&t, 10).is_err());
    }

    #[test]
    fn median_tie_is_excluded() {
        let mut t = Trace::default();
        t.record(&Support::full(1), 0, 0.0, 1);
        t.record(&Support::empty(1), 1, 0.0, 1);
        assert_eq!(inclusion_probs(&t, 0).unwrap(), vec![0.5]);
        assert!(median_model(&t, 0).unwrap().is_null());
    }

    #[test]
    fn single_coordinate_frequency_matches_enumeration() {
        let m = model(4, 40, 1, GlmFamily::Logistic, 0.3);
        let exact = m.enumerate_posterior(DEFAULT_MAX_ENUM_P).unwrap().probs()[1];
        let t = run_chain(&m, &Support::empty(1), 1_000_000, 1, 9).unwrap();
        let f = inclusion_probs(&t, 0).unwrap()[0];
        assert!((f - exact).abs() < 0.01, "{f} vs {exact}");
        assert_eq!(median_model(&t, 0).unwrap().get(0), exact > 0.5);
    }

    #[test]
    fn small_p_law_matches_enumeration() {
        let m = model(5, 50, 4, GlmFamily::Logistic, 0.5);
        let exact = m.enumerate_posterior(DEFAULT_MAX_ENUM_P).unwrap();
        let t = run_chain(&m, &Support::empty(4), 200_000, 1, 2).unwrap();
        assert!(exact.tv_to(&t.empirical_law(4)) < 0.05);
    }

    #[test]
    fn thinning_and_clock() {
        struct Tick(core::cell::Cell<u64>);
        impl Clock for Tick {
            fn now_nanos(&self) -> u64 {
                self.0.set(self.0.get() + 5);
                self.0.get()
            }
        }
        let m = model(6, 20, 3, GlmFamily::Gaussian, 0.8);
        let clock = Tick(core::cell::Cell::new(0));
        let cfg = ChainConfig { thin: 10, ..ChainConfig::new(100, 1, 1) };
        let t = run_chain_with(&m, &Support::empty(3), &cfg, Some(&clock)).unwrap();
        assert_eq!(t.samples.len(), 11);
        assert_eq!(t.step_nanos, vec![5; 100]);
        assert_eq!(t.visits.values().sum::<u64>(), 101);
    }

    #[test]
    fn da_log_odds_examples() {
        let lo = da_log_odds(0.8, 10f64.ln(), 50.0, 0.0, -3.0, -3.0);
        assert!((lo.exp() - 10f64.powf(-0.8) / 50f64.sqrt()).abs() < 1e-15);
        assert_eq!(da_log_odds(1.0, 1.0, 1.0, 0.0, f64::NEG_INFINITY, 0.0), f64::NEG_INFINITY);
        assert_eq!(da_log_odds(1.0, 1.0, 1.0, 0.0, 0.0, f64::NEG_INFINITY), f64::INFINITY);
    }

    #[test]
    fn mala_ratio_is_one_at_zero_move() {
        // Proposal equal to the current point with zero gradient: forward and
        // backward proposal densities coincide.
        let g = vec![0.0; 3];
        let x = vec![0.1, -0.2, 0.3];
        assert_eq!(log_proposal(&x, &x, &g, 0.5), 0.0);
    }

    #[test]
    fn da_determinism_and_adaptation() {
        let m = model(7, 60, 3, GlmFamily::Gaussian, 0.8);
        let cfg = DaConfig { adapt_steps: 2000, ..Default::default() };
        let a = run_da_chain(&m, &[0.0; 3], &Support::empty(3), 6000, &cfg, 5).unwrap();
        let b = run_da_chain(&m, &[0.0; 3], &Support::empty(3), 6000, &cfg, 5).unwrap();
        assert_eq!(a.samples, b.samples);
        let acc = a.acceptance_rate.unwrap();
        assert!((0.4..=0.75).contains(&acc), "acceptance {acc}");
    }

    #[test]
    fn da_marginal_matches_exact_small() {
        let m = model(8, 40, 3, GlmFamily::Gaussian, 0.5);
        let exact = m.enumerate_exact_gaussian(DEFAULT_MAX_ENUM_P).unwrap();
        let t = run_da_chain(&m, &[0.0; 3], &Support::empty(3), 200_000, &DaConfig::default(), 3).unwrap();
        let tv = exact.tv_to(&t.empirical_law(3));
        assert!(tv < 0.05, "tv {tv}");
    }
}
