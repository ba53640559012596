//! Elastic-net penalized GLM fit used as the shared initial estimator θ̃.
//!
//! Minimizes
//!
//! ```text
//! Σᵢ [ψ(ηᵢ) − yᵢηᵢ] + λ₁ Σⱼ vⱼ|θⱼ| + (λ₂/2) Σⱼ vⱼ²θⱼ²,   η = Xθ (+ b₀)
//! ```
//!
//! by proximal Newton: an outer IRLS loop builds the quadratic model of the
//! loss, cyclic coordinate descent with an active set solves the penalized
//! quadratic, and a backtracking step keeps the objective non-increasing.
//! With `standardize` the penalty weights `vⱼ` are the column scales, which is
//! the same as penalizing coefficients of standardized columns; otherwise
//! `vⱼ = 1`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::glm::{dot, Dataset, GlmFamily};
use crate::support::Support;

const MIN_WEIGHT: f64 = 1e-5;
const MAX_OUTER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// KKT tolerance.
    pub tol: f64,
    /// Cap on coordinate-descent passes.
    pub max_iter: usize,
    pub support_tol: f64,
    pub standardize: bool,
    pub intercept: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            lambda1: 0.0,
            lambda2: 0.0,
            tol: 1e-7,
            max_iter: 10_000,
            support_tol: 1e-8,
            standardize: true,
            intercept: false,
        }
    }
}

impl NetConfig {
    pub fn lasso(lambda1: f64) -> Self {
        NetConfig { lambda1, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) || !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "penalties must be finite and nonnegative (λ₁ = {}, λ₂ = {})",
                self.lambda1, self.lambda2
            )));
        }
        if !(self.tol > 0.0) || !(self.support_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetResult {
    pub theta_tilde: Vec<f64>,
    pub intercept: f64,
    pub kkt_violation: f64,
    /// Coordinate-descent passes used.
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    /// Objective after each outer iteration, starting from the initial point.
    pub history: Vec<f64>,
}

/// Penalty weights `vⱼ`.
pub fn penalty_weights(data: &Dataset, cfg: &NetConfig) -> Vec<f64> {
    let n = data.n() as f64;
    (0..data.p())
        .map(|j| {
            if !cfg.standardize {
                return 1.0;
            }
            let col = data.column(j);
            let mean = if cfg.intercept { col.iter().sum::<f64>() / n } else { 0.0 };
            let s = libm::sqrt(col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n);
            if s > 1e-12 { s } else { 1.0 }
        })
        .collect()
}

fn loss_and_residual(data: &Dataset, eta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut loss = 0.0;
    let mut r = Vec::with_capacity(eta.len());
    for (&e, &y) in eta.iter().zip(data.y()) {
        loss += data.psi(e, 0)? - y * e;
        r.push(y - data.psi(e, 1)?);
    }
    Ok((loss, r))
}

fn penalty(theta: &[f64], v: &[f64], cfg: &NetConfig) -> f64 {
    theta
        .iter()
        .zip(v)
        .map(|(t, v)| cfg.lambda1 * v * t.abs() + 0.5 * cfg.lambda2 * v * v * t * t)
        .sum()
}

fn predictor(data: &Dataset, theta: &[f64], b0: f64) -> Vec<f64> {
    let mut eta = vec![b0; data.n()];
    for (j, &t) in theta.iter().enumerate() {
        if t != 0.0 {
            for (e, x) in eta.iter_mut().zip(data.column(j)) {
                *e += t * x;
            }
        }
    }
    eta
}

/// Max distance from 0 to the subdifferential, over coordinates (and the
/// unpenalized intercept).
fn kkt(data: &Dataset, theta: &[f64], resid: &[f64], v: &[f64], cfg: &NetConfig) -> f64 {
    let mut worst: f64 = if cfg.intercept { resid.iter().sum::<f64>().abs() } else { 0.0 };
    for j in 0..theta.len() {
        let g = -dot(data.column(j), resid) + cfg.lambda2 * v[j] * v[j] * theta[j];
        let l1 = cfg.lambda1 * v[j];
        let r = if theta[j] > 0.0 {
            (g + l1).abs()
        } else if theta[j] < 0.0 {
            (g - l1).abs()
        } else {
            (g.abs() - l1).max(0.0)
        };
        worst = worst.max(r);
    }
    worst
}

/// `Σᵢ (yᵢ − ψ'(0))·x_ij` scaled by the penalty weights; the smallest λ₁ with
/// an all-zero solution (no intercept).
pub fn lambda_max(data: &Dataset, cfg: &NetConfig) -> Result<f64> {
    let b0 = if cfg.intercept { null_intercept(data) } else { 0.0 };
    let eta = vec![b0; data.n()];
    let (_, r) = loss_and_residual(data, &eta)?;
    let v = penalty_weights(data, cfg);
    Ok((0..data.p()).map(|j| dot(data.column(j), &r).abs() / v[j]).fold(0.0, f64::max))
}

fn null_intercept(data: &Dataset) -> f64 {
    let ybar = data.y().iter().sum::<f64>() / data.n() as f64;
    match data.family() {
        GlmFamily::Gaussian => ybar,
        GlmFamily::Logistic => {
            let m = ybar.clamp(1e-6, 1.0 - 1e-6);
            libm::log(m / (1.0 - m))
        }
        GlmFamily::Poisson => libm::log(ybar.max(1e-6)),
    }
}

/// `k` log-spaced values from `hi` down to `hi·ratio`.
pub fn lambda_grid(hi: f64, ratio: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![hi],
        _ => (0..k)
            .map(|i| hi * libm::pow(ratio, i as f64 / (k - 1) as f64))
            .collect(),
    }
}

pub fn fit_elastic_net(data: &Dataset, cfg: &NetConfig) -> Result<NetResult> {
    fit_elastic_net_from(data, cfg, None)
}

/// As [`fit_elastic_net`], warm-started from a previous fit.
pub fn fit_elastic_net_from(data: &Dataset, cfg: &NetConfig, warm: Option<&NetResult>) -> Result<NetResult> {
    cfg.validate()?;
    let p = data.p();
    let n = data.n();
    let v = penalty_weights(data, cfg);
    let (mut theta, mut b0) = match warm {
        Some(w) if w.theta_tilde.len() == p => (w.theta_tilde.clone(), if cfg.intercept { w.intercept } else { 0.0 }),
        _ => (vec![0.0; p], if cfg.intercept { null_intercept(data) } else { 0.0 }),
    };

    let mut eta = predictor(data, &theta, b0);
    let (loss, mut resid) = match loss_and_residual(data, &eta) {
        Ok(v) => v,
        Err(Error::Overflow { .. }) if warm.is_some() => {
            theta.iter_mut().for_each(|t| *t = 0.0);
            b0 = 0.0;
            eta = predictor(data, &theta, b0);
            loss_and_residual(data, &eta)?
        }
        Err(e) => return Err(e),
    };
    let mut obj = loss + penalty(&theta, &v, cfg);
    let mut history = vec![obj];
    let mut passes = 0usize;
    let mut viol = kkt(data, &theta, &resid, &v, cfg);

    let col_sq: Vec<f64> = (0..p).map(|j| data.column(j).iter().map(|x| x * x).sum()).collect();

    for _ in 0..MAX_OUTER {
        if viol <= cfg.tol || passes >= cfg.max_iter {
            break;
        }
        // Quadratic model of the loss at η: weights w, working residual ρ = r − wXΔ.
        let w: Vec<f64> = eta.iter().map(|&e| data.psi(e, 2).map(|c| c.max(MIN_WEIGHT))).collect::<Result<_>>()?;
        let mut rho = resid.clone();
        let mut cand = theta.clone();
        let mut cand_b0 = b0;
        let a: Vec<f64> = if data.family() == GlmFamily::Gaussian {
            col_sq.clone()
        } else {
            (0..p).map(|j| data.column(j).iter().zip(&w).map(|(x, w)| w * x * x).sum()).collect()
        };
        let w_sum: f64 = w.iter().sum();
        // Inner tolerance tightens with the outer residual.
        let inner_tol = (viol * 1e-3).min(cfg.tol * 1e-2).max(1e-15);

        let update = |j: usize, cand: &mut [f64], rho: &mut [f64]| -> f64 {
            let xj = data.column(j);
            if a[j] <= 0.0 {
                return 0.0;
            }
            let c = dot(xj, rho) + a[j] * cand[j];
            let l1 = cfg.lambda1 * v[j];
            let shrunk = if c > l1 { c - l1 } else if c < -l1 { c + l1 } else { 0.0 };
            let new = shrunk / (a[j] + cfg.lambda2 * v[j] * v[j]);
            let d = new - cand[j];
            if d != 0.0 {
                for i in 0..n {
                    rho[i] -= w[i] * xj[i] * d;
                }
                cand[j] = new;
            }
            d.abs() * libm::sqrt(a[j])
        };
        let update_b0 = |cand_b0: &mut f64, rho: &mut [f64]| -> f64 {
            let d = rho.iter().sum::<f64>() / w_sum;
            if d != 0.0 {
                for i in 0..n {
                    rho[i] -= w[i] * d;
                }
                *cand_b0 += d;
            }
            d.abs() * libm::sqrt(w_sum)
        };

        loop {
            // Full pass, then iterate the active set to convergence.
            let mut full_change: f64 = 0.0;
            for j in 0..p {
                full_change = full_change.max(update(j, &mut cand, &mut rho));
            }
            if cfg.intercept {
                full_change = full_change.max(update_b0(&mut cand_b0, &mut rho));
            }
            passes += 1;
            if full_change <= inner_tol || passes >= cfg.max_iter {
                break;
            }
            let active: Vec<usize> = (0..p).filter(|&j| cand[j] != 0.0).collect();
            loop {
                let mut change: f64 = 0.0;
                for &j in &active {
                    change = change.max(update(j, &mut cand, &mut rho));
                }
                if cfg.intercept {
                    change = change.max(update_b0(&mut cand_b0, &mut rho));
                }
                passes += 1;
                if change <= inner_tol || passes >= cfg.max_iter {
                    break;
                }
            }
            if passes >= cfg.max_iter {
                break;
            }
        }

        // Backtracking along the proximal-Newton direction.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&cand).map(|(a, b)| a + t * (b - a)).collect();
            let trial_b0 = b0 + t * (cand_b0 - b0);
            let trial_eta = predictor(data, &trial, trial_b0);
            match loss_and_residual(data, &trial_eta) {
                Ok((l, r)) => {
                    let o = l + penalty(&trial, &v, cfg);
                    if o <= obj + 1e-12 * obj.abs().max(1.0) {
                        theta = trial;
                        b0 = trial_b0;
                        eta = trial_eta;
                        resid = r;
                        obj = o;
                        accepted = true;
                        break;
                    }
                }
                Err(Error::Overflow { .. }) => {}
                Err(e) => return Err(e),
            }
            t *= 0.5;
        }
        history.push(obj);
        viol = kkt(data, &theta, &resid, &v, cfg);
        if !accepted {
            break;
        }
    }

    Ok(NetResult {
        theta_tilde: theta,
        intercept: b0,
        kkt_violation: viol,
        iterations: passes,
        objective: obj,
        converged: viol <= cfg.tol,
        history,
    })
}

/// Warm-started fits along a descending grid of λ₁ (λ₂ from `cfg`).
pub fn fit_path(data: &Dataset, cfg: &NetConfig, grid: &[f64]) -> Result<Vec<NetResult>> {
    let mut out: Vec<NetResult> = Vec::with_capacity(grid.len());
    for &l1 in grid {
        let c = NetConfig { lambda1: l1, ..cfg.clone() };
        let fit = fit_elastic_net_from(data, &c, out.last())?;
        out.push(fit);
    }
    Ok(out)
}

/// Bit `j` set iff `|θ̃ⱼ| > support_tol`.
pub fn support_of(result: &NetResult, support_tol: f64) -> Support {
    let bits: Vec<bool> = result.theta_tilde.iter().map(|t| t.abs() > support_tol).collect();
    Support::from_bools(&bits)
}

/// Mean deviance of predictions `eta` for the family.
pub fn mean_deviance(family: GlmFamily, y: &[f64], eta: &[f64]) -> f64 {
    let total: f64 = y
        .iter()
        .zip(eta)
        .map(|(&y, &e)| match family {
            GlmFamily::Gaussian => (y - e) * (y - e),
            GlmFamily::Logistic => {
                let sp = if e > 0.0 { e + libm::log1p(libm::exp(-e)) } else { libm::log1p(libm::exp(e)) };
                2.0 * (sp - y * e)
            }
            GlmFamily::Poisson => {
                let mu = libm::exp(e.min(700.0));
                let ylog = if y > 0.0 { y * libm::log(y / mu) } else { 0.0 };
                2.0 * (ylog - (y - mu))
            }
        })
        .sum();
    total / y.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    pub config: NetConfig,
    /// Deduplicated grid, descending.
    pub grid: Vec<f64>,
    /// Mean held-out deviance per grid entry.
    pub cv_deviance: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Fold labels `0..folds`; stratified by response for the logistic family.
pub fn fold_assignment(data: &Dataset, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.n();
    let mut labels = vec![0usize; n];
    let groups: Vec<Vec<usize>> = if data.family() == GlmFamily::Logistic {
        let (ones, zeros): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| data.y()[i] == 1.0);
        vec![zeros, ones]
    } else {
        vec![(0..n).collect()]
    };
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            labels[i] = next % folds;
            next += 1;
        }
    }
    labels
}

/// K-fold selection of λ₁ by minimum mean held-out deviance; ties go to the
/// larger λ₁.
pub fn cv_select(data: &Dataset, folds: usize, lambda1_grid: &[f64], base: &NetConfig, seed: u64) -> Result<CvSelection> {
    if folds < 2 || folds > data.n() {
        return Err(Error::InvalidArgument(format!("need 2 ≤ folds ≤ n, got {folds}")));
    }
    if lambda1_grid.is_empty() {
        return Err(Error::InvalidArgument("empty λ₁ grid".into()));
    }
    if lambda1_grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("λ₁ grid must be sorted descending".into()));
    }
    let mut grid = lambda1_grid.to_vec();
    grid.dedup();

    let labels = fold_assignment(data, folds, seed);
    let mut sums = vec![0.0; grid.len()];
    let mut used = 0usize;
    let mut warnings = Vec::new();
    for k in 0..folds {
        let train: Vec<usize> = (0..data.n()).filter(|&i| labels[i] != k).collect();
        let test: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == k).collect();
        let tr = data.select_rows(&train);
        if data.family() == GlmFamily::Logistic && tr.y().windows(2).all(|w| w[0] == w[1]) {
            warnings.push(format!("fold {} excluded: constant training response", k + 1));
            continue;
        }
        let te = data.select_rows(&test);
        let path = fit_path(&tr, base, &grid)?;
        for (s, fit) in sums.iter_mut().zip(&path) {
            let eta = predictor(&te, &fit.theta_tilde, fit.intercept);
            *s += mean_deviance(data.family(), te.y(), &eta);
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::InvalidData("every cross-validation fold was excluded".into()));
    }
    let cv_deviance: Vec<f64> = sums.iter().map(|s| s / used as f64).collect();
    let mut best = 0;
    for i in 1..grid.len() {
        if cv_deviance[i] < cv_deviance[best] {
            best = i;
        }
    }
    Ok(CvSelection {
        config: NetConfig { lambda1: grid[best], ..base.clone() },
        grid,
        cv_deviance,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn raw(l1: f64, l2: f64) -> NetConfig {
        NetConfig { lambda1: l1, lambda2: l2, standardize: false, ..Default::default() }
    }

    fn random_data(seed: u64, n: usize, p: usize, family: GlmFamily) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta: Vec<f64> = (0..p).map(|j| if j < 2 { 0.8 } else { 0.0 }).collect();
        let y = (0..n)
            .map(|i| {
                let e: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum();
                match family {
                    GlmFamily::Gaussian => e + rng.sample::<f64, _>(StandardNormal),
                    GlmFamily::Logistic => f64::from(rng.random::<f64>() < 1.0 / (1.0 + (-e).exp())),
                    GlmFamily::Poisson => {
                        let d = rand_distr::Poisson::new(e.exp()).unwrap();
                        rng.sample(d)
                    }
                }
            })
            .collect();
        Dataset::new(x, y, family).unwrap()
    }

    #[test]
    fn lambda_above_max_gives_zero() {
        let d = random_data(1, 40, 6, GlmFamily::Logistic);
        let lmax = lambda_max(&d, &raw(0.0, 0.0)).unwrap();
        let fit = fit_elastic_net(&d, &raw(lmax * 1.0001, 0.0)).unwrap();
        assert!(fit.theta_tilde.iter().all(|&t| t == 0.0));
        assert!(fit.converged);
        assert!(support_of(&fit, 1e-8).is_null());
    }

    #[test]
    fn soft_threshold_example() {
        let d = Dataset::from_rows(&[vec![1.0]], vec![2.0], GlmFamily::Gaussian).unwrap();
        let fit = fit_elastic_net(&d, &raw(1.0, 0.0)).unwrap();
        assert!((fit.theta_tilde[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unpenalized_gaussian_is_least_squares() {
        let d = random_data(2, 30, 4, GlmFamily::Gaussian);
        let fit = fit_elastic_net(&d, &NetConfig { tol: 1e-10, ..raw(0.0, 0.0) }).unwrap();
        let x = d.x();
        let y = DVector::from_column_slice(d.y());
        let ols = (x.transpose() * x).cholesky().unwrap().solve(&(x.transpose() * y));
        for j in 0..4 {
            assert!((fit.theta_tilde[j] - ols[j]).abs() < 1e-8);
        }
    }

    fn newton_ridge(d: &Dataset, l2: f64) -> Vec<f64> {
        let p = d.p();
        let mut th = DVector::zeros(p);
        for _ in 0..100 {
            let eta = d.x() * &th;
            let r = DVector::from_iterator(d.n(), (0..d.n()).map(|i| d.y()[i] - d.family().eval(eta[i], 1).unwrap()));
            let w = DVector::from_iterator(d.n(), (0..d.n()).map(|i| d.family().eval(eta[i], 2).unwrap()));
            let g = d.x().transpose() * r - &th * l2;
            let mut h = d.x().transpose() * DMatrix::from_diagonal(&w) * d.x();
            for j in 0..p {
                h[(j, j)] += l2;
            }
            let step = h.cholesky().unwrap().solve(&g);
            th += &step;
            if step.amax() < 1e-14 {
                break;
            }
        }
        th.iter().copied().collect()
    }

    #[test]
    fn ridge_matches_newton() {
        for (seed, fam) in [(3, GlmFamily::Logistic), (4, GlmFamily::Poisson), (5, GlmFamily::Gaussian)] {
            let d = random_data(seed, 60, 5, fam);
            let fit = fit_elastic_net(&d, &raw(0.0, 2.0)).unwrap();
            assert!(fit.converged, "{fam}");
            let reference = newton_ridge(&d, 2.0);
            for j in 0..5 {
                assert!((fit.theta_tilde[j] - reference[j]).abs() < 1e-6, "{fam} j={j}");
            }
        }
    }

    #[test]
    fn intercept_is_unpenalized() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 4) as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| 5.0 + (i % 3) as f64).collect();
        let d = Dataset::from_rows(&rows, y.clone(), GlmFamily::Gaussian).unwrap();
        let cfg = NetConfig { intercept: true, ..raw(1e6, 0.0) };
        let fit = fit_elastic_net(&d, &cfg).unwrap();
        assert_eq!(fit.theta_tilde[0], 0.0);
        assert!((fit.intercept - y.iter().sum::<f64>() / 20.0).abs() < 1e-9);
    }

    #[test]
    fn standardized_penalty_matches_rescaled_columns() {
        // Penalizing vⱼ|θⱼ| on X equals the plain penalty on X·diag(1/v).
        let d = random_data(6, 50, 4, GlmFamily::Logistic);
        let cfg = NetConfig { lambda1: 2.0, lambda2: 0.5, ..Default::default() };
        let fit = fit_elastic_net(&d, &cfg).unwrap();
        let v = penalty_weights(&d, &cfg);
        let xs = DMatrix::from_fn(50, 4, |i, j| d.x()[(i, j)] / v[j]);
        let ds = Dataset::new(xs, d.y().to_vec(), GlmFamily::Logistic).unwrap();
        let fit2 = fit_elastic_net(&ds, &raw(2.0, 0.5)).unwrap();
        for j in 0..4 {
            assert!((fit.theta_tilde[j] * v[j] - fit2.theta_tilde[j]).abs() < 1e-7);
        }
    }

    #[test]
    fn path_is_warm_started_and_converged() {
        let d = random_data(7, 80, 10, GlmFamily::Logistic);
        let lmax = lambda_max(&d, &NetConfig::default()).unwrap();
        let grid = lambda_grid(lmax, 0.01, 8);
        assert_eq!(grid.len(), 8);
        assert!((grid[7] - lmax * 0.01).abs() < 1e-12 * lmax);
        let path = fit_path(&d, &NetConfig::default(), &grid).unwrap();
        assert!(path.iter().all(|f| f.converged));
        assert!(path[0].theta_tilde.iter().all(|&t| t == 0.0));
        assert!(path[7].theta_tilde.iter().filter(|t| **t != 0.0).count() >= 2);
    }

    #[test]
    fn support_of_examples() {
        let r = NetResult {
            theta_tilde: vec![1e-12, 0.5],
            intercept: 0.0,
            kkt_violation: 0.0,
            iterations: 0,
            objective: 0.0,
            converged: true,
            history: vec![],
        };
        assert_eq!(support_of(&r, 1e-8).active(), vec![1]);
        assert_eq!(support_of(&r, 1e-13).active(), vec![0, 1]);
        assert!(support_of(&r, 1.0).is_null());
    }

    #[test]
    fn cv_single_and_duplicate_grid() {
        let d = random_data(8, 40, 5, GlmFamily::Gaussian);
        let sel = cv_select(&d, 4, &[0.3], &NetConfig::default(), 1).unwrap();
        assert_eq!(sel.config.lambda1, 0.3);
        let sel = cv_select(&d, 4, &[2.0, 2.0], &NetConfig::default(), 1).unwrap();
        assert_eq!(sel.grid, vec![2.0]);
        assert_eq!(sel.config.lambda1, 2.0);
        assert!(cv_select(&d, 4, &[1.0, 2.0], &NetConfig::default(), 1).is_err());
        assert!(cv_select(&d, 1, &[1.0], &NetConfig::default(), 1).is_err());
    }

    #[test]
    fn cv_prefers_null_model_on_noise() {
        let mut wins = 0;
        for rep in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + rep);
            let x = DMatrix::from_fn(40, 15, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = (0..40).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let d = Dataset::new(x, y, GlmFamily::Gaussian).unwrap();
            let sel = cv_select(&d, 5, &[10.0, 0.001], &NetConfig::default(), rep).unwrap();
            if sel.config.lambda1 == 10.0 {
                wins += 1;
            }
        }
        assert!(wins > 10, "null model chosen in {wins}/20");
    }

    #[test]
    fn cv_excludes_constant_logistic_folds() {
        // One positive: every fold but the one holding it trains on a
        // two-class response; the fold holding it trains on all zeros.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let mut y = vec![0.0; 10];
        y[3] = 1.0;
        let d = Dataset::from_rows(&rows, y, GlmFamily::Logistic).unwrap();
        let sel = cv_select(&d, 2, &[1.0, 0.1], &NetConfig::default(), 5).unwrap();
        assert_eq!(sel.warnings.len(), 1);
    }

    #[test]
    fn stratified_folds_balance_classes() {
        let d = random_data(9, 101, 2, GlmFamily::Logistic);
        let labels = fold_assignment(&d, 5, 42);
        let ones = d.y().iter().filter(|y| **y == 1.0).count();
        for k in 0..5 {
            let c = (0..101).filter(|&i| labels[i] == k && d.y()[i] == 1.0).count();
            assert!(c.abs_diff(ones / 5) <= 1);
        }
        assert_eq!(labels, fold_assignment(&d, 5, 42));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn kkt_certificate_and_monotone_objective(seed in any::<u64>(), fam in 0usize..3, frac in 0.02f64..0.9, l2 in 0.0f64..1.0, std in any::<bool>()) {
            let family = [GlmFamily::Logistic, GlmFamily::Poisson, GlmFamily::Gaussian][fam];
            let d = random_data(seed, 50, 8, family);
            let base = NetConfig { standardize: std, ..raw(0.0, l2) };
            let lmax = lambda_max(&d, &base).unwrap();
            let cfg = NetConfig { lambda1: frac * lmax, ..base };
            let fit = fit_elastic_net(&d, &cfg).unwrap();
            prop_assert!(fit.converged, "kkt {}", fit.kkt_violation);
            for w in fit.history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
            }
            // Independent KKT recomputation.
            let v = penalty_weights(&d, &cfg);
            let eta = d.x() * DVector::from_column_slice(&fit.theta_tilde);
            for j in 0..8 {
                let g: f64 = -(0..50).map(|i| d.x()[(i, j)] * (d.y()[i] - family.eval(eta[i], 1).unwrap())).sum::<f64>()
                    + cfg.lambda2 * v[j] * v[j] * fit.theta_tilde[j];
                let l1 = cfg.lambda1 * v[j];
                if fit.theta_tilde[j] != 0.0 {
                    prop_assert!((g + l1 * fit.theta_tilde[j].signum()).abs() <= cfg.tol * 1.0001);
                } else {
                    prop_assert!(g.abs() <= l1 + cfg.tol);
                }
            }
        }

        #[test]
        fn support_is_monotone_in_tol(vals in proptest::collection::vec(-1.0f64..1.0, 1..20), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let r = NetResult { theta_tilde: vals, intercept: 0.0, kkt_violation: 0.0, iterations: 0, objective: 0.0, converged: true, history: vec![] };
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(support_of(&r, hi).is_subset(&support_of(&r, lo)).unwrap());
        }
    }
}
