//! Selection and prediction metrics, and replication summaries.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use nalgebra::DMatrix;

use crate::error::{DimensionError, Error, Result};
use crate::glm::link_eval_clamped;
use crate::olap::OlapModel;
use crate::sampler::Trace;
use crate::support::Support;

/// `2TP / (2TP + FP + FN)`, and 1 when all three counts are zero.
pub fn f1_score(estimate: &Support, truth: &Support) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(DimensionError::Mismatch { expected: truth.len(), found: estimate.len() }.into());
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for j in 0..truth.len() {
        match (estimate.get(j), truth.get(j)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    if tp + fp + fneg == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fneg) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Posterior-averaged mean response; NaN where flagged.
    pub mean: Vec<f64>,
    /// Rows whose linear predictor overflowed under some retained model.
    pub overflow: Vec<bool>,
}

/// Average of `ψ'(⟨x, (θ̌^δ, 0)_δ⟩)` over `models` (with repetition).
pub fn predict(model: &OlapModel, models: &[Support], x_new: &DMatrix<f64>) -> Result<Prediction> {
    let p = model.p();
    if x_new.ncols() != p {
        return Err(DimensionError::Mismatch { expected: p, found: x_new.ncols() }.into());
    }
    if models.is_empty() {
        return Err(Error::InvalidArgument("no models to average".into()));
    }
    let mut counts: HashMap<&Support, usize> = HashMap::new();
    for d in models {
        *counts.entry(d).or_insert(0) += 1;
    }
    let mut groups: Vec<(&Support, usize)> = counts.into_iter().collect();
    groups.sort_by(|a, b| a.0.cmp(b.0));

    let n = x_new.nrows();
    let family = model.data().family();
    let clamp = model.data().clamp();
    let total = models.len() as f64;
    let mut mean = vec![0.0; n];
    let mut overflow = vec![false; n];
    for (delta, c) in groups {
        let score = model.olap_log_score(delta)?;
        let w = c as f64 / total;
        for i in 0..n {
            let eta: f64 = delta.iter_active().zip(&score.theta_check).map(|(j, t)| x_new[(i, j)] * t).sum();
            match link_eval_clamped(family, eta, 1, clamp) {
                Ok(mu) => mean[i] += w * mu,
                Err(Error::Overflow { .. }) => overflow[i] = true,
                Err(Error::InvalidArgument(_)) if !eta.is_finite() => overflow[i] = true,
                Err(e) => return Err(e),
            }
        }
    }
    for (m, &o) in mean.iter_mut().zip(&overflow) {
        if o {
            *m = f64::NAN;
        }
    }
    Ok(Prediction { mean, overflow })
}

/// [`predict`] over the retained samples at steps `≥ burnin`.
pub fn predict_trace(model: &OlapModel, trace: &Trace, burnin: u64, x_new: &DMatrix<f64>) -> Result<Prediction> {
    let kept: Vec<Support> = trace
        .samples
        .iter()
        .zip(&trace.sample_steps)
        .filter(|(_, &s)| s >= burnin)
        .map(|(d, _)| d.clone())
        .collect();
    predict(model, &kept, x_new)
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(DimensionError::Mismatch { expected: y.len(), found: yhat.len() }.into());
    }
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::sqrt(ss / y.len() as f64))
}

/// Median (mean of the two middle values for even counts); NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Sample standard deviation (`n − 1` denominator); 0 for a single value.
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return if n == 1 { 0.0 } else { f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{Dataset, GlmFamily};
    use proptest::prelude::{prop_assert, proptest};

    fn s(p: usize, idx: &[usize]) -> Support {
        Support::from_indices(p, idx).unwrap()
    }

    #[test]
    fn f1_examples() {
        let truth = s(30, &(0..10).collect::<Vec<_>>());
        assert_eq!(f1_score(&truth, &truth).unwrap(), 1.0);
        assert!((f1_score(&s(30, &(0..9).collect::<Vec<_>>()), &truth).unwrap() - 18.0 / 19.0).abs() < 1e-15);
        assert!((f1_score(&Support::full(20), &s(20, &(0..10).collect::<Vec<_>>())).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_score(&Support::empty(5), &Support::empty(5)).unwrap(), 1.0);
        assert!(f1_score(&Support::empty(4), &Support::empty(5)).is_err());
    }

    proptest! {
        #[test]
        fn f1_permutation_symmetry(a in 0usize..1 << 10, b in 1usize..1 << 10, shift in 0usize..10) {
            let rot = |c: usize| ((c << shift) | (c >> (10 - shift))) & 0x3ff;
            let e = Support::from_code(10, a);
            let t = Support::from_code(10, b);
            let f = f1_score(&e, &t).unwrap();
            let g = f1_score(&Support::from_code(10, rot(a)), &Support::from_code(10, rot(b))).unwrap();
            prop_assert!((f - g).abs() < 1e-15 && (0.0..=1.0).contains(&f));
        }
    }

    fn gaussian_model() -> OlapModel {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, -1.0, 2.0, 0.3, -0.7, 2.0, 1.0]);
        let data = Dataset::new(x, vec![1.0, -0.5, 0.2, 2.0], GlmFamily::Gaussian).unwrap();
        OlapModel::new(data, 0.8, vec![0.0; 2]).unwrap()
    }

    #[test]
    fn logistic_empty_model_predicts_half() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let data = Dataset::new(x.clone(), vec![1.0, 0.0, 1.0], GlmFamily::Logistic).unwrap();
        let m = OlapModel::new(data, 0.8, vec![0.0; 2]).unwrap();
        let pr = predict(&m, &vec![Support::empty(2); 3], &x).unwrap();
        assert!(pr.mean.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn gaussian_single_model_is_linear() {
        let m = gaussian_model();
        let d = s(2, &[1]);
        let th = m.one_step(&d).unwrap();
        let xn = DMatrix::from_row_slice(2, 2, &[3.0, 1.5, -1.0, -2.0]);
        let pr = predict(&m, &[d], &xn).unwrap();
        assert!((pr.mean[0] - 1.5 * th[0]).abs() < 1e-14);
        assert!((pr.mean[1] + 2.0 * th[0]).abs() < 1e-14);
    }

    #[test]
    fn averaging_is_frequency_weighted() {
        let m = gaussian_model();
        let (a, b) = (s(2, &[0]), s(2, &[1]));
        let xn = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let pa = predict(&m, &[a.clone()], &xn).unwrap().mean[0];
        let pb = predict(&m, &[b.clone()], &xn).unwrap().mean[0];
        let avg = predict(&m, &[a.clone(), b.clone(), b.clone(), a], &xn).unwrap().mean[0];
        assert!((avg - 0.5 * (pa + pb)).abs() < 1e-14);
    }

    #[test]
    fn poisson_overflow_rows_are_flagged() {
        let x = DMatrix::from_row_slice(3, 1, &[0.1, 0.2, 0.3]);
        let data = Dataset::new(x, vec![1.0, 1.0, 2.0], GlmFamily::Poisson).unwrap();
        let m = OlapModel::new(data, 0.8, vec![0.0]).unwrap();
        let xn = DMatrix::from_row_slice(2, 1, &[0.5, 1e6]);
        let pr = predict(&m, &[Support::full(1)], &xn).unwrap();
        assert_eq!(pr.overflow, vec![false, true]);
        assert!(pr.mean[0].is_finite() && pr.mean[1].is_nan());
    }

    #[test]
    fn summaries() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((std_dev(&[1.0, 2.0, 3.0, 4.0]) - libm::sqrt(5.0 / 3.0)).abs() < 1e-15);
        assert_eq!(std_dev(&[7.0]), 0.0);
        assert!((rmse(&[1.0, 0.0], &[0.0, 0.0]).unwrap() - libm::sqrt(0.5)).abs() < 1e-15);
    }
}
