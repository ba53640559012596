//! One-step Laplace model scores.
//!
//! For a model δ with initial estimate `θ̃^δ = [θ̃]_δ`, the one-step estimate is
//! a single Newton step on `barℓ^δ`,
//!
//! ```text
//! θ̌^δ = θ̃^δ + (H̃^δ)⁻¹ G̃^δ,
//! ```
//!
//! and the unnormalized log posterior mass of δ is
//! `−u‖δ‖₀ log p + barℓ^δ(θ̌^δ)`. The determinant term of the usual Laplace
//! approximation is dropped; [`OlapModel::full_laplace_log_score`] keeps it
//! and serves as a comparator.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::ScoreCache;
use crate::error::{DimensionError, Error, Result};
use crate::glm::{dot, restricted_eval, restricted_objective, Dataset, GlmFamily};
use crate::support::Support;

pub const DEFAULT_U: f64 = 0.8;

/// Largest `p` accepted by [`OlapModel::enumerate_posterior`] by default.
pub const DEFAULT_MAX_ENUM_P: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelScore {
    pub delta: Support,
    /// `θ̌^δ`; NaN entries when the evaluation overflowed.
    pub theta_check: Vec<f64>,
    /// `−u‖δ‖₀ log p + bar_ell`; `−∞` on overflow.
    pub log_score: f64,
    /// `barℓ^δ(θ̌^δ)`.
    pub bar_ell: f64,
}

impl ModelScore {
    pub fn overflowed(&self) -> bool {
        self.log_score == f64::NEG_INFINITY
    }
}

pub struct OlapModel {
    data: Dataset,
    u: f64,
    log_p: f64,
    theta_tilde: Vec<f64>,
    cache: ScoreCache<Support, ModelScore>,
}

impl fmt::Debug for OlapModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OlapModel")
            .field("n", &self.data.n())
            .field("p", &self.data.p())
            .field("family", &self.data.family())
            .field("u", &self.u)
            .field("cached", &self.cache.len())
            .finish()
    }
}

/// Result of the restricted Newton solve for `argmax barℓ^δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub theta: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn cholesky(h: DMatrix<f64>, delta: &Support) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(h).ok_or_else(|| Error::Factorization(delta.clone()))
}

pub(crate) fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| libm::log(*d)).sum::<f64>()
}

impl OlapModel {
    pub fn new(data: Dataset, u: f64, theta_tilde: Vec<f64>) -> Result<Self> {
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::InvalidArgument(format!("sparsity parameter u must be positive, got {u}")));
        }
        if theta_tilde.len() != data.p() {
            return Err(DimensionError::Mismatch { expected: data.p(), found: theta_tilde.len() }.into());
        }
        if theta_tilde.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("initial estimate has non-finite entries".into()));
        }
        let log_p = libm::log(data.p() as f64);
        Ok(OlapModel { data, u, log_p, theta_tilde, cache: ScoreCache::default() })
    }

    /// Replaces the cache with an LRU-capped one.
    pub fn with_cache_cap(mut self, cap: usize) -> Self {
        self.cache = ScoreCache::new(Some(cap));
        self
    }

    /// Same data and θ̃ under a different `u`, with a fresh cache.
    pub fn with_u(&self, u: f64) -> Result<Self> {
        OlapModel::new(self.data.clone(), u, self.theta_tilde.clone())
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    pub fn log_p(&self) -> f64 {
        self.log_p
    }

    pub fn theta_tilde(&self) -> &[f64] {
        &self.theta_tilde
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    pub fn clear_cache(&self) {
        self.cache.clear();
    }

    fn check(&self, delta: &Support) -> Result<()> {
        if delta.len() != self.p() {
            return Err(DimensionError::Mismatch { expected: self.p(), found: delta.len() }.into());
        }
        Ok(())
    }

    /// `−u‖δ‖₀ log p`.
    #[inline]
    pub fn log_prior(&self, delta: &Support) -> f64 {
        -(self.u * delta.weight() as f64 * self.log_p)
    }

    /// `θ̌^δ = θ̃^δ + (H̃^δ)⁻¹G̃^δ`.
    pub fn one_step(&self, delta: &Support) -> Result<Vec<f64>> {
        self.check(delta)?;
        if delta.is_null() {
            return Ok(Vec::new());
        }
        let w0 = delta.extract(&self.theta_tilde)?;
        let eval = restricted_eval(&self.data, delta, &w0)?;
        let chol = cholesky(eval.hess, delta)?;
        let step = chol.solve(&eval.grad);
        Ok(w0.iter().zip(step.iter()).map(|(a, b)| a + b).collect())
    }

    fn compute_score(&self, delta: &Support) -> Result<ModelScore> {
        let attempt = self.one_step(delta).and_then(|th| {
            let v = restricted_objective(&self.data, delta, &th)?;
            Ok((th, v))
        });
        match attempt {
            Ok((theta_check, bar_ell)) => Ok(ModelScore {
                delta: delta.clone(),
                theta_check,
                log_score: self.log_prior(delta) + bar_ell,
                bar_ell,
            }),
            Err(Error::Overflow { .. }) => Ok(ModelScore {
                delta: delta.clone(),
                theta_check: vec![f64::NAN; delta.weight()],
                log_score: f64::NEG_INFINITY,
                bar_ell: f64::NEG_INFINITY,
            }),
            Err(e) => Err(e),
        }
    }

    /// Memoized OLAP score of `delta`.
    pub fn olap_log_score(&self, delta: &Support) -> Result<Arc<ModelScore>> {
        if let Some(s) = self.cache.get(delta) {
            return Ok(s);
        }
        self.check(delta)?;
        let s = Arc::new(self.compute_score(delta)?);
        self.cache.insert(delta.clone(), Arc::clone(&s));
        Ok(s)
    }

    /// Uncached recomputation.
    pub fn olap_log_score_fresh(&self, delta: &Support) -> Result<ModelScore> {
        self.check(delta)?;
        self.compute_score(delta)
    }

    /// `q_j(δ) = P(δⱼ = 1 | δ₋ⱼ)` under the OLAP posterior, `j` zero-based.
    pub fn cond_prob(&self, delta: &Support, j: usize) -> Result<f64> {
        let s1 = self.olap_log_score(&delta.flip(j, true)?)?.log_score;
        let s0 = self.olap_log_score(&delta.flip(j, false)?)?.log_score;
        Ok(prob_from_scores(s1, s0))
    }

    /// Newton ascent on `barℓ^δ` from zero with step halving.
    pub fn mle_restricted(&self, delta: &Support, tol: f64, max_iter: usize) -> Result<MleResult> {
        self.check(delta)?;
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        let s = delta.weight();
        let mut w = vec![0.0; s];
        let mut eval = restricted_eval(&self.data, delta, &w)?;
        let mut iterations = 0;
        loop {
            let grad_norm = eval.grad.amax();
            if grad_norm <= tol || iterations >= max_iter {
                return Ok(MleResult { theta: w, grad_norm, iterations, converged: grad_norm <= tol });
            }
            iterations += 1;
            let step = cholesky(eval.hess.clone(), delta)?.solve(&eval.grad);
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..50 {
                let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
                match restricted_eval(&self.data, delta, &trial) {
                    Ok(e) if e.value >= eval.value - 1e-12 * eval.value.abs().max(1.0) => {
                        w = trial;
                        eval = e;
                        moved = true;
                        break;
                    }
                    Ok(_) | Err(Error::Overflow { .. }) => t *= 0.5,
                    Err(e) => return Err(e),
                }
            }
            if !moved {
                let grad_norm = eval.grad.amax();
                return Ok(MleResult { theta: w, grad_norm, iterations, converged: grad_norm <= tol });
            }
        }
    }

    /// `−u‖δ‖₀ log p + barℓ^δ(θ̂^δ) − ½ log det Ĥ^δ`.
    pub fn full_laplace_log_score(&self, delta: &Support) -> Result<f64> {
        let mle = self.mle_restricted(delta, 1e-10, 100)?;
        let eval = restricted_eval(&self.data, delta, &mle.theta)?;
        let ld = if delta.is_null() { 0.0 } else { log_det(&cholesky(eval.hess, delta)?) };
        Ok(self.log_prior(delta) + eval.value - 0.5 * ld)
    }

    /// Exact log marginal `log ∫ p^{−u‖δ‖₀} e^{ℓ} N(0, I)` (up to the shared
    /// constant) for the Gaussian family:
    /// `−u‖δ‖₀ log p + ½ bᵀA⁻¹b − ½ log det A`, `A = X_δᵀX_δ + I`, `b = X_δᵀy`.
    pub fn exact_gaussian_log_marginal(&self, delta: &Support) -> Result<f64> {
        self.check(delta)?;
        if self.data.family() != GlmFamily::Gaussian {
            return Err(Error::WrongFamily { expected: "gaussian" });
        }
        let cols = delta.active();
        let s = cols.len();
        let a = DMatrix::from_fn(s, s, |i, k| {
            dot(self.data.column(cols[i]), self.data.column(cols[k])) + if i == k { 1.0 } else { 0.0 }
        });
        let b = DVector::from_iterator(s, cols.iter().map(|&j| dot(self.data.column(j), self.data.y())));
        if s == 0 {
            return Ok(0.0);
        }
        let chol = cholesky(a, delta)?;
        let z = chol.l().solve_lower_triangular(&b).ok_or_else(|| Error::Factorization(delta.clone()))?;
        Ok(self.log_prior(delta) + 0.5 * z.norm_squared() - 0.5 * log_det(&chol))
    }

    /// Normalized OLAP posterior over all `2^p` models.
    pub fn enumerate_posterior(&self, max_p: usize) -> Result<PosteriorTable> {
        let p = self.p();
        if p > max_p || p >= usize::BITS as usize - 1 {
            return Err(Error::TooLarge { p, max: max_p });
        }
        let log_w = (0..1usize << p)
            .map(|code| Ok(self.olap_log_score(&Support::from_code(p, code))?.log_score))
            .collect::<Result<Vec<f64>>>()?;
        PosteriorTable::from_log_weights(p, log_w)
    }

    /// Exact Gaussian-family posterior over all `2^p` models.
    pub fn enumerate_exact_gaussian(&self, max_p: usize) -> Result<PosteriorTable> {
        let p = self.p();
        if p > max_p {
            return Err(Error::TooLarge { p, max: max_p });
        }
        let log_w = (0..1usize << p)
            .map(|code| self.exact_gaussian_log_marginal(&Support::from_code(p, code)))
            .collect::<Result<Vec<f64>>>()?;
        PosteriorTable::from_log_weights(p, log_w)
    }

    /// Empirical variable-selection-consistency constants at the one-step
    /// estimators.
    pub fn consistency_diagnostic(&self, delta_star: &Support, sample_size: usize, seed: u64) -> Result<ConsistencyDiagnostic> {
        self.check(delta_star)?;
        let p = self.p();
        let n = self.data.n() as f64;
        let log_p = if self.log_p > 0.0 { self.log_p } else { 1.0 };
        let bar = |d: &Support| -> Result<f64> { Ok(self.olap_log_score(d)?.bar_ell) };

        let mut diag = ConsistencyDiagnostic {
            c1_hat: 0.0,
            c2_hat: 0.0,
            irrelevant_pairs: 0,
            relevant_pairs: 0,
            pairs_checked: 0,
            violations: Vec::new(),
            exhaustive: false,
        };
        let mut c1 = f64::NEG_INFINITY;
        let mut c2 = f64::INFINITY;
        let mut irrelevant = |d0: &Support, d: &Support, diag: &mut ConsistencyDiagnostic| -> Result<()> {
            let k = (d.weight() - d0.weight()) as f64;
            c1 = c1.max((bar(d)? - bar(d0)?) / (k * log_p));
            diag.irrelevant_pairs += 1;
            Ok(())
        };
        let mut relevant = |d0: &Support, d: &Support, diag: &mut ConsistencyDiagnostic| -> Result<()> {
            let k = (d.weight() - d0.weight()) as f64;
            let gain = (bar(d)? - bar(d0)?) / (k * n);
            c2 = c2.min(gain);
            if !(gain > 0.0) {
                diag.violations.push((d0.clone(), d.clone()));
            }
            diag.relevant_pairs += 1;
            Ok(())
        };

        let star: Vec<usize> = delta_star.active();
        let rest: Vec<usize> = (0..p).filter(|&j| !delta_star.get(j)).collect();
        let exhaustive = p < 13;
        if exhaustive {
            diag.exhaustive = true;
            let subsets = |idx: &[usize]| -> Vec<Support> {
                (0..1usize << idx.len())
                    .map(|m| {
                        let mut d = Support::empty(p);
                        for (b, &j) in idx.iter().enumerate() {
                            if m >> b & 1 == 1 {
                                d.set(j, true);
                            }
                        }
                        d
                    })
                    .collect()
            };
            let under_star = subsets(&star);
            let outside = subsets(&rest);
            for d0 in &under_star {
                for e in outside.iter().skip(1) {
                    let d = d0.join(e)?;
                    irrelevant(d0, &d, &mut diag)?;
                }
            }
            for d in &under_star {
                for d0 in &under_star {
                    if d0 != d && d0.is_subset(d)? {
                        relevant(d0, d, &mut diag)?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let random_sub = |idx: &[usize], rng: &mut ChaCha8Rng| {
                let mut d = Support::empty(p);
                for &j in idx {
                    if rng.random_bool(0.5) {
                        d.set(j, true);
                    }
                }
                d
            };
            for _ in 0..sample_size {
                let d0 = random_sub(&star, &mut rng);
                if !rest.is_empty() {
                    let k = rng.random_range(1..=rest.len().min(5));
                    let mut d = d0.clone();
                    while d.weight() < d0.weight() + k {
                        d.set(rest[rng.random_range(0..rest.len())], true);
                    }
                    irrelevant(&d0, &d, &mut diag)?;
                }
                let missing: Vec<usize> = star.iter().copied().filter(|&j| !d0.get(j)).collect();
                if !missing.is_empty() {
                    let mut d = d0.clone();
                    d.set(missing[rng.random_range(0..missing.len())], true);
                    for &j in &missing {
                        if rng.random_bool(0.5) {
                            d.set(j, true);
                        }
                    }
                    relevant(&d0, &d, &mut diag)?;
                }
            }
        }
        if diag.irrelevant_pairs > 0 {
            diag.c1_hat = c1;
        }
        if diag.relevant_pairs > 0 {
            diag.c2_hat = c2;
        }
        diag.pairs_checked = diag.irrelevant_pairs + diag.relevant_pairs;
        Ok(diag)
    }
}

/// `σ(s₁ − s₀)` with the conventions for `−∞` scores.
#[inline]
pub fn prob_from_scores(s1: f64, s0: f64) -> f64 {
    match (s1 == f64::NEG_INFINITY, s0 == f64::NEG_INFINITY) {
        (true, _) => 0.0,
        (false, true) => 1.0,
        _ => crate::glm::sigmoid(s1 - s0),
    }
}

/// Normalized distribution over `2^p` models indexed by [`Support::code`].
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    p: usize,
    log_weights: Vec<f64>,
    probs: Vec<f64>,
    log_norm: f64,
}

impl PosteriorTable {
    pub fn from_log_weights(p: usize, log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.len() != 1usize << p {
            return Err(DimensionError::Mismatch { expected: 1 << p, found: log_weights.len() }.into());
        }
        let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY || m.is_nan() {
            return Err(Error::InvalidData("no model has finite score".into()));
        }
        let sum: f64 = log_weights.iter().map(|w| libm::exp(w - m)).sum();
        let log_norm = m + libm::log(sum);
        let probs = log_weights.iter().map(|w| libm::exp(w - log_norm)).collect();
        Ok(PosteriorTable { p, log_weights, probs, log_norm })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn prob(&self, delta: &Support) -> f64 {
        self.probs[delta.code()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Support, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(c, &q)| (Support::from_code(self.p, c), q))
    }

    /// `P(δⱼ = 1)` for each `j`.
    pub fn inclusion_probs(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for (code, &q) in self.probs.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                if code >> j & 1 == 1 {
                    *o += q;
                }
            }
        }
        out
    }

    /// Mass of `{δ ⊇ δ⋆, ‖δ‖₀ ≤ s⋆ + j}`.
    pub fn mass_a_j(&self, delta_star: &Support, j: usize) -> f64 {
        let star = delta_star.code();
        let cap = delta_star.weight() + j;
        self.probs
            .iter()
            .enumerate()
            .filter(|(c, _)| c & star == star && (c.count_ones() as usize) <= cap)
            .map(|(_, q)| q)
            .sum()
    }

    /// Most probable model (lowest code on ties).
    pub fn mode(&self) -> Support {
        let mut best = 0;
        for (c, &q) in self.probs.iter().enumerate() {
            if q > self.probs[best] {
                best = c;
            }
        }
        Support::from_code(self.p, best)
    }

    /// `‖a − b‖` in the sup-over-sets convention (half the ℓ₁ distance).
    pub fn tv_to(&self, other: &[f64]) -> f64 {
        0.5 * self.probs.iter().zip(other).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyDiagnostic {
    /// Max of `(barℓ(δ) − barℓ(δ₀)) / ((‖δ‖₀ − ‖δ₀‖₀) log p)` over irrelevant additions.
    pub c1_hat: f64,
    /// Min of `(barℓ(δ) − barℓ(δ₀)) / ((‖δ‖₀ − ‖δ₀‖₀) n)` over relevant additions.
    pub c2_hat: f64,
    pub irrelevant_pairs: usize,
    pub relevant_pairs: usize,
    pub pairs_checked: usize,
    /// Relevant additions that did not increase `barℓ`.
    pub violations: Vec<(Support, Support)>,
    pub exhaustive: bool,
}

impl ConsistencyDiagnostic {
    /// `u ≥ 2(1 + c₁)`.
    pub fn u_condition(&self, u: f64) -> bool {
        u >= 2.0 * (1.0 + self.c1_hat)
    }

    /// `c₂ n ≥ 2(u + 1) log p`.
    pub fn sample_size_condition(&self, n: usize, p: usize, u: f64) -> bool {
        self.c2_hat * n as f64 >= 2.0 * (u + 1.0) * libm::log(p as f64)
    }

    /// Lower bound on the mass of `{δ ⊇ δ⋆, ‖δ‖₀ ≤ s⋆ + j}` implied by the
    /// estimated constants (meaningful only when both conditions hold).
    pub fn concentration_bound(&self, n: usize, p: usize, u: f64, j: usize) -> f64 {
        1.0 - 2.0
            * (libm::pow(p as f64, -u * (j as f64 + 1.0) / 2.0) + 2.0 * libm::exp(-self.c2_hat * n as f64 / 4.0))
    }
}
