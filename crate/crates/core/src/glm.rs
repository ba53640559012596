//! GLM families with canonical link and the support-restricted penalized
//! log-likelihood
//!
//! ```text
//! ℓ(θ; D)      = Σᵢ yᵢ⟨θ, xᵢ⟩ − ψ(⟨θ, xᵢ⟩)
//! barℓ^δ(w; D) = ℓ((w,0)_δ; D) − ½‖w‖²
//! ```
//!
//! together with its gradient and negative Hessian on the active block.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{DimensionError, Error, Result};
use crate::support::Support;

/// Default clamp on `|x|` for the Poisson exponential.
pub const DEFAULT_POISSON_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GlmFamily {
    /// `ψ(x) = log(1 + eˣ)`
    Logistic,
    /// `ψ(x) = eˣ`
    Poisson,
    /// `ψ(x) = x²/2` (unit noise variance)
    Gaussian,
}

impl GlmFamily {
    pub fn name(self) -> &'static str {
        match self {
            GlmFamily::Logistic => "logistic",
            GlmFamily::Poisson => "poisson",
            GlmFamily::Gaussian => "gaussian",
        }
    }

    /// Smallest `c₃` with `|ψ'''| ≤ c₃ ψ''` everywhere.
    pub fn self_concordance_constant(self) -> f64 {
        match self {
            GlmFamily::Logistic | GlmFamily::Poisson => 1.0,
            GlmFamily::Gaussian => 0.0,
        }
    }

    /// `dᵒψ/dxᵒ` at `x` for `order ∈ {0,1,2,3}`, using the default clamp.
    pub fn eval(self, x: f64, order: u8) -> Result<f64> {
        link_eval_clamped(self, x, order, DEFAULT_POISSON_CLAMP)
    }
}

impl fmt::Display for GlmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GlmFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" | "binomial" => Ok(GlmFamily::Logistic),
            "poisson" => Ok(GlmFamily::Poisson),
            "gaussian" | "linear" => Ok(GlmFamily::Gaussian),
            other => Err(Error::InvalidArgument(format!("unknown family `{other}`"))),
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// `dᵒψ/dxᵒ` at `x`. See [`link_eval_clamped`].
pub fn link_eval(family: GlmFamily, x: f64, order: u8) -> Result<f64> {
    link_eval_clamped(family, x, order, DEFAULT_POISSON_CLAMP)
}

/// `dᵒψ/dxᵒ` at `x`; Poisson predictors with `|x| > clamp` are an error.
pub fn link_eval_clamped(family: GlmFamily, x: f64, order: u8, clamp: f64) -> Result<f64> {
    if order > 3 {
        return Err(Error::InvalidArgument(format!("derivative order {order} not in 0..=3")));
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite argument {x}")));
    }
    Ok(match family {
        GlmFamily::Logistic => match order {
            0 => softplus(x),
            1 => sigmoid(x),
            2 => sigmoid(x) * sigmoid(-x),
            _ => {
                let (s, t) = (sigmoid(x), sigmoid(-x));
                s * t * (t - s)
            }
        },
        GlmFamily::Poisson => {
            if x.abs() > clamp {
                return Err(Error::Overflow { value: x, clamp });
            }
            libm::exp(x)
        }
        GlmFamily::Gaussian => match order {
            0 => 0.5 * x * x,
            1 => x,
            2 => 1.0,
            _ => 0.0,
        },
    })
}

/// Design matrix, response and family.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
    family: GlmFamily,
    clamp: f64,
}

impl Dataset {
    /// Validates shapes, finiteness and the family's response domain.
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, family: GlmFamily) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidData(format!("empty design ({n}×{p})")));
        }
        if y.len() != n {
            return Err(DimensionError::Mismatch { expected: n, found: y.len() }.into());
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite design entry at row {}, column {}",
                pos % n + 1,
                pos / n + 1
            )));
        }
        for (i, &yi) in y.iter().enumerate() {
            let ok = match family {
                _ if !yi.is_finite() => false,
                GlmFamily::Logistic => yi == 0.0 || yi == 1.0,
                GlmFamily::Poisson => yi >= 0.0 && libm::floor(yi) == yi,
                GlmFamily::Gaussian => true,
            };
            if !ok {
                return Err(Error::InvalidData(format!(
                    "response {yi} at row {} is invalid for the {family} family",
                    i + 1
                )));
            }
        }
        Ok(Dataset { x, y, family, clamp: DEFAULT_POISSON_CLAMP })
    }

    /// Builds from row-major data.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>, family: GlmFamily) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::InvalidData(format!("row {} has {} columns, expected {p}", i + 1, r.len())));
        }
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Dataset::new(x, y, family)
    }

    pub fn with_clamp(mut self, clamp: f64) -> Self {
        self.clamp = clamp;
        self
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    #[inline]
    pub fn family(&self) -> GlmFamily {
        self.family
    }

    #[inline]
    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    #[inline]
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Column `j` as a contiguous slice.
    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    /// `b = max |x_ij|`.
    pub fn max_abs_entry(&self) -> f64 {
        self.x.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let x = DMatrix::from_fn(rows.len(), self.p(), |i, j| self.x[(rows[i], j)]);
        let y = rows.iter().map(|&i| self.y[i]).collect();
        Dataset { x, y, family: self.family, clamp: self.clamp }
    }

    #[inline]
    pub(crate) fn psi(&self, x: f64, order: u8) -> Result<f64> {
        link_eval_clamped(self.family, x, order, self.clamp)
    }
}

/// `Xθ` for a full-length `theta`, skipping zero coordinates.
pub fn linear_predictor(data: &Dataset, theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != data.p() {
        return Err(DimensionError::Mismatch { expected: data.p(), found: theta.len() }.into());
    }
    let mut eta = vec![0.0; data.n()];
    for (j, &t) in theta.iter().enumerate() {
        if t != 0.0 {
            for (e, x) in eta.iter_mut().zip(data.column(j)) {
                *e += t * x;
            }
        }
    }
    Ok(eta)
}

/// `X_δ w`.
pub fn restricted_predictor(data: &Dataset, delta: &Support, w: &[f64]) -> Result<Vec<f64>> {
    check_restricted(data, delta, w)?;
    let mut eta = vec![0.0; data.n()];
    for (&wk, j) in w.iter().zip(delta.iter_active()) {
        if wk != 0.0 {
            for (e, x) in eta.iter_mut().zip(data.column(j)) {
                *e += wk * x;
            }
        }
    }
    Ok(eta)
}

fn check_restricted(data: &Dataset, delta: &Support, w: &[f64]) -> Result<()> {
    if delta.len() != data.p() {
        return Err(DimensionError::Mismatch { expected: data.p(), found: delta.len() }.into());
    }
    if w.len() != delta.weight() {
        return Err(DimensionError::Mismatch { expected: delta.weight(), found: w.len() }.into());
    }
    Ok(())
}

/// `Σᵢ yᵢηᵢ − ψ(ηᵢ)` for a given linear predictor.
pub(crate) fn log_lik_from_predictor(data: &Dataset, eta: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (&e, &y) in eta.iter().zip(data.y()) {
        acc += y * e - data.psi(e, 0)?;
    }
    Ok(acc)
}

/// `ℓ(θ; D)`.
pub fn log_lik(data: &Dataset, theta: &[f64]) -> Result<f64> {
    let eta = linear_predictor(data, theta)?;
    log_lik_from_predictor(data, &eta)
}

/// `barℓ^δ(w) = ℓ((w,0)_δ) − ½‖w‖²`; the empty model gives `ℓ(0)`.
pub fn restricted_objective(data: &Dataset, delta: &Support, w: &[f64]) -> Result<f64> {
    let eta = restricted_predictor(data, delta, w)?;
    let ll = log_lik_from_predictor(data, &eta)?;
    Ok(ll - 0.5 * w.iter().map(|v| v * v).sum::<f64>())
}

/// `∇barℓ^δ(w) = X_δᵀ(y − ψ'(X_δw)) − w`.
pub fn restricted_grad(data: &Dataset, delta: &Support, w: &[f64]) -> Result<Vec<f64>> {
    let eta = restricted_predictor(data, delta, w)?;
    let resid = residuals(data, &eta)?;
    Ok(delta
        .iter_active()
        .zip(w)
        .map(|(j, &wk)| dot(data.column(j), &resid) - wk)
        .collect())
}

/// `−∇²barℓ^δ(w) = X_δᵀ diag(ψ''(X_δw)) X_δ + I`.
pub fn restricted_hess(data: &Dataset, delta: &Support, w: &[f64]) -> Result<DMatrix<f64>> {
    let eta = restricted_predictor(data, delta, w)?;
    let weights = curvatures(data, &eta)?;
    Ok(weighted_gram(data, delta, &weights))
}

/// Value, gradient and negative Hessian of `barℓ^δ` at `w` from one pass.
#[derive(Debug, Clone)]
pub struct RestrictedEval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

pub fn restricted_eval(data: &Dataset, delta: &Support, w: &[f64]) -> Result<RestrictedEval> {
    let eta = restricted_predictor(data, delta, w)?;
    let mut resid = Vec::with_capacity(eta.len());
    let mut weights = Vec::with_capacity(eta.len());
    let mut ll = 0.0;
    for (&e, &y) in eta.iter().zip(data.y()) {
        let (v0, v1, v2) = psi012(data, e)?;
        ll += y * e - v0;
        resid.push(y - v1);
        weights.push(v2);
    }
    let value = ll - 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let grad = DVector::from_iterator(
        w.len(),
        delta.iter_active().zip(w).map(|(j, &wk)| dot(data.column(j), &resid) - wk),
    );
    let hess = weighted_gram(data, delta, &weights);
    Ok(RestrictedEval { value, grad, hess })
}

#[inline]
fn psi012(data: &Dataset, e: f64) -> Result<(f64, f64, f64)> {
    Ok(match data.family() {
        GlmFamily::Poisson => {
            let v = data.psi(e, 0)?;
            (v, v, v)
        }
        GlmFamily::Logistic => {
            let (s, t) = (sigmoid(e), sigmoid(-e));
            (softplus(e), s, s * t)
        }
        GlmFamily::Gaussian => (0.5 * e * e, e, 1.0),
    })
}

pub(crate) fn residuals(data: &Dataset, eta: &[f64]) -> Result<Vec<f64>> {
    eta.iter().zip(data.y()).map(|(&e, &y)| Ok(y - data.psi(e, 1)?)).collect()
}

pub(crate) fn curvatures(data: &Dataset, eta: &[f64]) -> Result<Vec<f64>> {
    eta.iter().map(|&e| data.psi(e, 2)).collect()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `X_δᵀ diag(weights) X_δ + I`.
fn weighted_gram(data: &Dataset, delta: &Support, weights: &[f64]) -> DMatrix<f64> {
    let cols: Vec<usize> = delta.active();
    let s = cols.len();
    let n = data.n();
    let mut h = DMatrix::identity(s, s);
    let mut wx = vec![0.0; n];
    for a in 0..s {
        let xa = data.column(cols[a]);
        for i in 0..n {
            wx[i] = weights[i] * xa[i];
        }
        for b in 0..=a {
            let v = dot(&wx, data.column(cols[b]));
            h[(a, b)] += v;
            if a != b {
                h[(b, a)] += v;
            }
        }
    }
    h
}

/// Outcome of a grid check of `|ψ'''| ≤ c₃ ψ''`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcordanceReport {
    pub max_ratio: f64,
    pub argmax: f64,
    pub pass: bool,
}

/// `max_x |ψ'''(x)| / ψ''(x)` over `grid`; passes iff the max is `≤ c3`.
pub fn self_concordance_check(family: GlmFamily, grid: &[f64], c3: f64) -> Result<ConcordanceReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let mut max_ratio = 0.0;
    let mut argmax = grid[0];
    for &x in grid {
        let d2 = family.eval(x, 2)?;
        let d3 = family.eval(x, 3)?;
        let ratio = if d3 == 0.0 { 0.0 } else { d3.abs() / d2 };
        if ratio > max_ratio {
            max_ratio = ratio;
            argmax = x;
        }
    }
    Ok(ConcordanceReport { max_ratio, argmax, pass: max_ratio <= c3 })
}

/// Both sides of the third-order remainder bound
/// `|ψ(u+h) − ψ(u) − ψ'(u)h − ½h²ψ''(u)| ≤ (c₃/6)|h|³ e^{c₃|h|} ψ''(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn remainder_bound_check(family: GlmFamily, u: f64, h: f64, c3: f64) -> Result<RemainderReport> {
    let lhs = (family.eval(u + h, 0)? - family.eval(u, 0)? - family.eval(u, 1)? * h
        - 0.5 * h * h * family.eval(u, 2)?)
    .abs();
    let ah = h.abs();
    let rhs = c3 / 6.0 * ah * ah * ah * libm::exp(c3 * ah) * family.eval(u, 2)?;
    Ok(RemainderReport { lhs, rhs, pass: lhs <= rhs + 1e-12 })
}
