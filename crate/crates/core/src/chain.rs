//! Exact analysis of small finite chains: spectral gap, ζ-conductance,
//! canonical-path bottleneck, TV decay, and a report checking the known
//! inequalities between them.
//!
//! States of a hypercube chain are indexed by [`Support::code`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{DimensionError, Error, Result};
use crate::olap::{OlapModel, PosteriorTable};
use crate::support::Support;

pub const DEFAULT_MAX_CHAIN_P: usize = 12;
/// Largest state count for exhaustive subset enumeration.
pub const MAX_CONDUCTANCE_STATES: usize = 16;
/// Largest state count for the dense eigendecomposition.
pub const MAX_EIGEN_STATES: usize = 4096;

/// Kernel `K` (sparse rows, diagonal included) with stationary law `π`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    rows: Vec<Vec<(usize, f64)>>,
    pi: Vec<f64>,
    /// Hypercube dimension, when states are the models of `{0,1}^p`.
    p: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalKernel {
    /// Random-scan heat bath: pick `j` uniformly, resample `δⱼ` from its conditional.
    HeatBath,
    /// `½I + ½M` with `M` the random-scan single-flip Metropolis kernel.
    LazyMetropolis,
}

impl FiniteChain {
    /// The `J = 1` OLAP chain on all `2^p` models.
    pub fn from_model(model: &OlapModel, max_p: usize) -> Result<FiniteChain> {
        let p = model.p();
        if p > max_p {
            return Err(Error::TooLarge { p, max: max_p });
        }
        let table = model.enumerate_posterior(max_p)?;
        let pf = p as f64;
        let mut rows = Vec::with_capacity(1 << p);
        for code in 0..1usize << p {
            let d = Support::from_code(p, code);
            let mut row = Vec::with_capacity(p + 1);
            let mut off = 0.0;
            for j in 0..p {
                let q = model.cond_prob(&d, j)?;
                let move_prob = if d.get(j) { 1.0 - q } else { q } / pf;
                if move_prob > 0.0 {
                    row.push((code ^ (1 << j), move_prob));
                    off += move_prob;
                }
            }
            row.push((code, 1.0 - off));
            row.sort_by_key(|e| e.0);
            rows.push(row);
        }
        Ok(FiniteChain { rows, pi: table.probs().to_vec(), p: Some(p) })
    }

    /// Single-flip chain on `{0,1}^p` targeting `∝ exp(log_w)`.
    pub fn from_log_weights(p: usize, log_w: &[f64], kind: LocalKernel) -> Result<FiniteChain> {
        let table = PosteriorTable::from_log_weights(p, log_w.to_vec())?;
        let pf = p as f64;
        let mut rows = Vec::with_capacity(1 << p);
        for code in 0..1usize << p {
            let mut row = Vec::with_capacity(p + 1);
            let mut off = 0.0;
            for j in 0..p {
                let other = code ^ (1 << j);
                let diff = log_w[other] - log_w[code];
                let m = match kind {
                    LocalKernel::HeatBath => crate::glm::sigmoid(diff) / pf,
                    LocalKernel::LazyMetropolis => 0.5 * libm::exp(diff.min(0.0)) / pf,
                };
                if m > 0.0 {
                    row.push((other, m));
                    off += m;
                }
            }
            row.push((code, 1.0 - off));
            row.sort_by_key(|e| e.0);
            rows.push(row);
        }
        Ok(FiniteChain { rows, pi: table.probs().to_vec(), p: Some(p) })
    }

    /// Dense kernel and its stationary law; `p` marks hypercube state labels.
    pub fn from_dense(k: &DMatrix<f64>, pi: Vec<f64>, p: Option<usize>) -> Result<FiniteChain> {
        let n = k.nrows();
        if k.ncols() != n || pi.len() != n {
            return Err(DimensionError::Mismatch { expected: n, found: pi.len() }.into());
        }
        if let Some(p) = p {
            if n != 1 << p {
                return Err(DimensionError::Mismatch { expected: 1 << p, found: n }.into());
            }
        }
        let rows = (0..n)
            .map(|i| (0..n).filter(|&j| k[(i, j)] != 0.0).map(|j| (j, k[(i, j)])).collect())
            .collect();
        Ok(FiniteChain { rows, pi, p })
    }

    /// Random positive reversible single-flip chain on `{0,1}^p` with
    /// Gaussian log weights of scale `sigma`.
    pub fn random(p: usize, sigma: f64, kind: LocalKernel, seed: u64) -> Result<FiniteChain> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log_w: Vec<f64> = (0..1usize << p).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        FiniteChain::from_log_weights(p, &log_w, kind)
    }

    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn p(&self) -> Option<usize> {
        self.p
    }

    pub fn row(&self, x: usize) -> &[(usize, f64)] {
        &self.rows[x]
    }

    pub fn k(&self, x: usize, y: usize) -> f64 {
        self.rows[x].iter().find(|e| e.0 == y).map_or(0.0, |e| e.1)
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n_states();
        let mut m = DMatrix::zeros(n, n);
        for (x, row) in self.rows.iter().enumerate() {
            for &(y, v) in row {
                m[(x, y)] = v;
            }
        }
        m
    }

    /// `max_x |Σ_y K(x,y) − 1|`.
    pub fn row_sum_error(&self) -> f64 {
        self.rows.iter().map(|r| (r.iter().map(|e| e.1).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `‖πK − π‖₁`.
    pub fn stationarity_error(&self) -> f64 {
        let next = self.step_distribution(&self.pi);
        next.iter().zip(&self.pi).map(|(a, b)| (a - b).abs()).sum()
    }

    /// `max |π(x)K(x,y) − π(y)K(y,x)|`.
    pub fn reversibility_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (x, row) in self.rows.iter().enumerate() {
            for &(y, v) in row {
                worst = worst.max((self.pi[x] * v - self.pi[y] * self.k(y, x)).abs());
            }
        }
        worst
    }

    /// `μK`.
    pub fn step_distribution(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states()];
        for (x, row) in self.rows.iter().enumerate() {
            if mu[x] != 0.0 {
                for &(y, v) in row {
                    out[y] += mu[x] * v;
                }
            }
        }
        out
    }

    /// `S(x,y) = √(K(x,y)K(y,x))`, which equals `D^{½}KD^{−½}` for a
    /// reversible chain without forming `π^{±½}`.
    pub fn symmetrized(&self) -> DMatrix<f64> {
        let n = self.n_states();
        let mut s = DMatrix::zeros(n, n);
        for (x, row) in self.rows.iter().enumerate() {
            for &(y, v) in row {
                s[(x, y)] = if x == y { v } else { libm::sqrt(v * self.k(y, x)) };
            }
        }
        s
    }

    /// Eigenvalues of the symmetrized kernel, descending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.n_states() > MAX_EIGEN_STATES {
            return Err(Error::TooLarge { p: self.n_states(), max: MAX_EIGEN_STATES });
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.symmetrized()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        Ok(ev)
    }

    /// `λ = 1 − λ₂`, clamped to `[0, 1]`.
    pub fn spectral_gap(&self) -> Result<f64> {
        let ev = self.eigenvalues()?;
        Ok(if ev.len() < 2 { 1.0 } else { (1.0 - ev[1]).clamp(0.0, 1.0) })
    }

    /// Exact `Φ_ζ`; `None` when no set has `ζ < π(A) < 1 − ζ`.
    pub fn conductance(&self, zeta: f64) -> Result<Option<Cut>> {
        Ok(self.conductances(&[zeta])?.pop().flatten())
    }

    /// Exact `Φ_ζ` for several ζ in one enumeration.
    pub fn conductances(&self, zetas: &[f64]) -> Result<Vec<Option<Cut>>> {
        let n = self.n_states();
        if n > MAX_CONDUCTANCE_STATES {
            return Err(Error::TooLarge { p: n, max: MAX_CONDUCTANCE_STATES });
        }
        if let Some(z) = zetas.iter().find(|z| !(0.0..0.5).contains(*z)) {
            return Err(Error::InvalidArgument(format!("ζ = {z} outside [0, 1/2)")));
        }
        let mut best: Vec<Option<Cut>> = vec![None; zetas.len()];
        for mask in 1..(1u32 << n) - 1 {
            let mut pa = 0.0;
            let mut flow = 0.0;
            for x in 0..n {
                if mask >> x & 1 == 1 {
                    pa += self.pi[x];
                    for &(y, v) in &self.rows[x] {
                        if mask >> y & 1 == 0 {
                            flow += self.pi[x] * v;
                        }
                    }
                }
            }
            let pc = 1.0 - pa;
            for (b, &z) in best.iter_mut().zip(zetas) {
                if pa > z && pa < 1.0 - z {
                    let ratio = flow / ((pa - z) * (pc - z));
                    if b.as_ref().is_none_or(|c| ratio < c.value) {
                        *b = Some(Cut { value: ratio, set: (0..n).filter(|&x| mask >> x & 1 == 1).collect() });
                    }
                }
            }
        }
        Ok(best)
    }

    /// `‖π₀Kᵗ − π‖₁` for `t = 0..=steps` (twice the sup-over-sets distance).
    pub fn tv_curve(&self, pi0: &[f64], steps: usize) -> Result<Vec<f64>> {
        if pi0.len() != self.n_states() {
            return Err(DimensionError::Mismatch { expected: self.n_states(), found: pi0.len() }.into());
        }
        let mut mu = pi0.to_vec();
        let mut out = Vec::with_capacity(steps + 1);
        for t in 0..=steps {
            out.push(mu.iter().zip(&self.pi).map(|(a, b)| (a - b).abs()).sum());
            if t < steps {
                mu = self.step_distribution(&mu);
            }
        }
        Ok(out)
    }

    /// Point mass at state `x`.
    pub fn point_mass(&self, x: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_states()];
        v[x] = 1.0;
        v
    }

    /// `E_K(f,f) = ½ Σ π(x)K(x,y)(f(y) − f(x))²`.
    pub fn dirichlet_form(&self, f: &[f64]) -> f64 {
        let mut e = 0.0;
        for (x, row) in self.rows.iter().enumerate() {
            for &(y, v) in row {
                let d = f[y] - f[x];
                e += self.pi[x] * v * d * d;
            }
        }
        0.5 * e
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        let mean: f64 = f.iter().zip(&self.pi).map(|(a, b)| a * b).sum();
        f.iter().zip(&self.pi).map(|(a, b)| b * (a - mean) * (a - mean)).sum()
    }

    /// Certified upper bound on `λ_ζ` from random test functions with
    /// `‖f‖∞ ≤ 1` and `Var_π f > ζ`; `None` if no admissible function was found.
    pub fn zeta_gap_upper_bound(&self, zeta: f64, trials: usize, seed: u64) -> Option<f64> {
        let n = self.n_states();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<f64> = None;
        let mut consider = |f: &[f64]| {
            let var = self.variance(f);
            if var > zeta {
                let r = self.dirichlet_form(f) / (var - zeta / 2.0);
                if best.is_none_or(|b| r < b) {
                    best = Some(r);
                }
            }
        };
        if n <= MAX_CONDUCTANCE_STATES {
            // ±1 indicators of every set.
            for mask in 1..(1u32 << n) - 1 {
                let f: Vec<f64> = (0..n).map(|x| if mask >> x & 1 == 1 { 1.0 } else { -1.0 }).collect();
                consider(&f);
            }
        }
        for _ in 0..trials {
            let f: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            consider(&f);
        }
        best
    }

    /// `m(X₀)` over the canonical paths toward `delta_star`; see [`PathBound`].
    pub fn canonical_path_bound(&self, delta_star: &Support, x0: &[bool]) -> Result<PathBound> {
        let Some(p) = self.p else {
            return Err(Error::InvalidArgument("canonical paths need hypercube states".into()));
        };
        if delta_star.len() != p {
            return Err(DimensionError::Mismatch { expected: p, found: delta_star.len() }.into());
        }
        let n = self.n_states();
        if x0.len() != n {
            return Err(DimensionError::Mismatch { expected: n, found: x0.len() }.into());
        }
        let star = delta_star.code();
        let members: Vec<usize> = (0..n).filter(|&x| x0[x]).collect();
        // Path from each member toward δ⋆, as a vertex list.
        let to_star: Vec<Vec<usize>> = (0..n)
            .map(|x| if x0[x] { path_to_star(x, star, p) } else { Vec::new() })
            .collect();
        for &x in &members {
            if let Some(&v) = to_star[x].iter().find(|&&v| !x0[v]) {
                return Err(Error::InvalidArgument(format!(
                    "path from {} leaves X₀ at {}",
                    Support::from_code(p, x),
                    Support::from_code(p, v)
                )));
            }
        }

        let mut load = vec![0.0; n * p];
        let mut pos_on_y = vec![usize::MAX; n];
        let mut max_len = 0usize;
        for &y in &members {
            for (k, &v) in to_star[y].iter().enumerate() {
                pos_on_y[v] = k;
            }
            let py = &to_star[y];
            for &x in &members {
                if x == y {
                    continue;
                }
                let px = &to_star[x];
                let a = px.iter().position(|&v| pos_on_y[v] != usize::MAX).expect("paths share δ⋆");
                let b = pos_on_y[px[a]];
                let len = a + b;
                max_len = max_len.max(len);
                let w = len as f64 * self.pi[x] * self.pi[y];
                for k in 0..a {
                    load[edge_index(px[k], px[k + 1], p)] += w;
                }
                for k in (1..=b).rev() {
                    load[edge_index(py[k], py[k - 1], p)] += w;
                }
            }
            for &v in py {
                pos_on_y[v] = usize::MAX;
            }
        }

        let mut m: f64 = 0.0;
        let mut edge = None;
        for (idx, &l) in load.iter().enumerate() {
            if l > 0.0 {
                let (from, j) = (idx / p, idx % p);
                let to = from ^ (1 << j);
                let q = self.pi[from] * self.k(from, to);
                if !(q > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "edge {} → {} carries paths but has no flow",
                        Support::from_code(p, from),
                        Support::from_code(p, to)
                    )));
                }
                let r = l / q;
                if r > m {
                    m = r;
                    edge = Some((from, to));
                }
            }
        }
        Ok(PathBound { m, edge, max_path_len: max_len })
    }

    /// Checks the spectral, conductance, path and decay inequalities.
    pub fn verify_bounds(&self, delta_star: &Support, epsilons: &[f64], cfg: &BoundsConfig) -> Result<BoundsReport> {
        const SLACK: f64 = 1e-10;
        if let Some(e) = epsilons.iter().find(|e| !(0.0..0.5).contains(*e)) {
            return Err(Error::InvalidArgument(format!("ε = {e} outside [0, 1/2)")));
        }
        let n = self.n_states();
        let p = self.p.ok_or_else(|| Error::InvalidArgument("bounds need hypercube states".into()))?;
        let lambda = self.spectral_gap()?;
        let mut zetas = vec![0.0];
        for &e in epsilons {
            if 2.0 * e < 0.5 {
                zetas.push(2.0 * e);
            }
        }
        // Conductance is exhaustive; beyond the cap only the path and decay bounds run.
        let enumerable = n <= MAX_CONDUCTANCE_STATES;
        let cuts = if enumerable { self.conductances(&zetas)? } else { vec![None; zetas.len()] };
        let phi_by_zeta: Vec<(f64, Option<f64>)> = zetas.iter().zip(&cuts).map(|(z, c)| (*z, c.as_ref().map(|c| c.value))).collect();
        let mut assertions = Vec::new();

        // (i) Cheeger sandwich.
        const TOO_MANY: &str = "more states than the conductance enumeration cap";
        if enumerable {
            let phi = cuts[0].as_ref().map_or(0.0, |c| c.value);
            let witness = cuts[0].as_ref().map(|c| format!("A = {:?}", c.set));
            assertions.push(Assertion::le("cheeger_lower", phi * phi / 8.0, lambda, SLACK, witness.clone()));
            assertions.push(Assertion::le("cheeger_upper", lambda, phi, SLACK, witness));
        } else {
            assertions.push(Assertion::skipped("cheeger_lower", TOO_MANY));
            assertions.push(Assertion::skipped("cheeger_upper", TOO_MANY));
        }

        // (ii) Path bound on the whole space.
        let full = self.canonical_path_bound(delta_star, &vec![true; n])?;
        let edge_w = |b: &PathBound| b.edge.map(|(a, c)| format!("edge {} → {}", Support::from_code(p, a), Support::from_code(p, c)));
        assertions.push(Assertion::le("path_bound_full", 1.0 / full.m, lambda, SLACK, edge_w(&full)));

        // (iii) Composite bound on X₀ = {‖δ‖₀ ≤ s⋆ + J₀}.
        let cap = delta_star.weight() + cfg.j0;
        let x0: Vec<bool> = (0..n).map(|x| (x.count_ones() as usize) <= cap).collect();
        let pi_x0: f64 = (0..n).filter(|&x| x0[x]).map(|x| self.pi[x]).sum();
        let restricted = self.canonical_path_bound(delta_star, &x0)?;
        for &e in epsilons {
            let name = format!("composite_eps_{e}");
            if 2.0 * e >= 0.5 {
                assertions.push(Assertion::skipped(&name, "2ε ≥ 1/2: Φ_{2ε} undefined"));
                continue;
            }
            if pi_x0 < 1.0 - e / 8.0 {
                assertions.push(Assertion::skipped(&name, "π(X₀) < 1 − ε/8"));
                continue;
            }
            let idx = zetas.iter().position(|z| *z == 2.0 * e).expect("ζ listed");
            match &cuts[idx] {
                _ if !enumerable => assertions.push(Assertion::skipped(&name, TOO_MANY)),
                Some(c) => assertions.push(Assertion::le(&name, 1.0 / restricted.m, c.value, SLACK, Some(format!("A = {:?}", c.set)))),
                None => assertions.push(Assertion::skipped(&name, "no admissible set for Φ_{2ε}")),
            }
            if let Some(ub) = self.zeta_gap_upper_bound(e, cfg.test_functions, cfg.seed) {
                assertions.push(Assertion::le(&format!("path_vs_zeta_gap_eps_{e}"), 1.0 / restricted.m, ub, SLACK, edge_w(&restricted)));
            }
        }

        // (iv) Decay from every point mass.
        let mut worst_decay = Assertion::le("decay", 0.0, 0.0, SLACK, None);
        for x in 0..n {
            if self.pi[x] <= 0.0 {
                continue;
            }
            let tv = self.tv_curve(&self.point_mass(x), cfg.decay_steps)?;
            let var = 1.0 / self.pi[x] - 1.0;
            for (t, d) in tv.iter().enumerate().skip(1) {
                let lhs = d * d;
                let rhs = libm::pow(1.0 - lambda / 2.0, t as f64) * var;
                if lhs - rhs > worst_decay.lhs - worst_decay.rhs {
                    worst_decay = Assertion::le("decay", lhs, rhs, SLACK, Some(format!("start {}, N = {t}", Support::from_code(p, x))));
                }
            }
        }
        assertions.push(worst_decay);

        Ok(BoundsReport {
            lambda,
            phi_by_zeta,
            m_full: full.m,
            m_x0: restricted.m,
            pi_x0,
            max_path_len: restricted.max_path_len,
            assertions,
        })
    }
}

fn edge_index(from: usize, to: usize, p: usize) -> usize {
    from * p + (from ^ to).trailing_zeros() as usize
}

/// Drop false positives in decreasing index order, then add missing
/// relevant coordinates in increasing order.
fn path_to_star(x: usize, star: usize, p: usize) -> Vec<usize> {
    let mut path = vec![x];
    let mut cur = x;
    for j in (0..p).rev() {
        if cur >> j & 1 == 1 && star >> j & 1 == 0 {
            cur ^= 1 << j;
            path.push(cur);
        }
    }
    for j in 0..p {
        if cur >> j & 1 == 0 && star >> j & 1 == 1 {
            cur ^= 1 << j;
            path.push(cur);
        }
    }
    path
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub value: f64,
    pub set: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathBound {
    /// `max_e Σ_{γ_xy ∋ e} |γ_xy| π(x)π(y) / (π(e₋)K(e₋,e₊))`.
    pub m: f64,
    /// Maximizing directed edge.
    pub edge: Option<(usize, usize)>,
    pub max_path_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsConfig {
    pub j0: usize,
    pub decay_steps: usize,
    pub test_functions: usize,
    pub seed: u64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { j0: 1, decay_steps: 200, test_functions: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `None` when the precondition did not hold.
    pub pass: Option<bool>,
    pub witness: Option<String>,
}

impl Assertion {
    fn le(name: &str, lhs: f64, rhs: f64, slack: f64, witness: Option<String>) -> Self {
        let pass = lhs <= rhs + slack;
        Assertion { name: name.into(), lhs, rhs, pass: Some(pass), witness: if pass { None } else { witness } }
    }

    fn skipped(name: &str, why: &str) -> Self {
        Assertion { name: name.into(), lhs: f64::NAN, rhs: f64::NAN, pass: None, witness: Some(why.into()) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub lambda: f64,
    pub phi_by_zeta: Vec<(f64, Option<f64>)>,
    pub m_full: f64,
    pub m_x0: f64,
    pub pi_x0: f64,
    pub max_path_len: usize,
    pub assertions: Vec<Assertion>,
}

impl BoundsReport {
    pub fn violations(&self) -> Vec<&Assertion> {
        self.assertions.iter().filter(|a| a.pass == Some(false)).collect()
    }
}
