//! Acceptance criteria 1–10. Runs as a plain binary so every criterion
//! prints its own PASS/FAIL line; exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use olap::config::{CouplingSection, ExperimentConfig, InitSection, SamplerSection, SimulationSection, SCHEMA_VERSION};
use olap::experiment::{initial_estimate, meeting_records, run_experiment};
use olap_core::chain::{BoundsConfig, FiniteChain, LocalKernel};
use olap_core::coupling::{tv_bound_curve, InitKind, MeetingConfig};
use olap_core::glm::{remainder_bound_check, self_concordance_check};
use olap_core::metrics::median;
use olap_core::olap::OlapModel;
use olap_core::rng::split_seed;
use olap_core::sampler::{run_chain, run_da_chain, DaConfig};
use olap_core::sim::{simulate, SimConfig};
use olap_core::{Dataset, GlmFamily, Support};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_support(rng: &mut ChaCha8Rng, p: usize, max_weight: usize) -> Support {
    let k = rng.random_range(1..=max_weight.min(p));
    let mut idx: Vec<usize> = (0..p).collect();
    for i in 0..k {
        let j = rng.random_range(i..p);
        idx.swap(i, j);
    }
    Support::from_indices(p, &idx[..k]).unwrap()
}

fn log_det_spd(m: DMatrix<f64>) -> f64 {
    let l = m.cholesky().expect("positive definite").l();
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// One-step equals the restricted maximizer for the Gaussian family.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(10..=50);
        let p = rng.random_range(2..=12);
        let x = gaussian_matrix(&mut rng, n, p);
        let y: Vec<f64> = (0..n).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let theta: Vec<f64> = (0..p).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let model = OlapModel::new(Dataset::new(x, y, GlmFamily::Gaussian).unwrap(), 0.8, theta).unwrap();
        let d = random_support(&mut rng, p, 8);
        let one = model.one_step(&d).unwrap();
        let mle = model.mle_restricted(&d, 1e-13, 200).unwrap();
        for (a, b) in one.iter().zip(&mle.theta) {
            worst = worst.max((a - b).abs());
        }
    }
    let t = start.elapsed();
    outcome(worst <= 1e-10 && t < Duration::from_secs(5), format!("max |θ̌ − θ̂| = {worst:.2e} over 200 instances, {t:.2?}"))
}

/// Full Laplace equals the closed-form Gaussian marginal; OLAP differs by ½ log det Ĥ.
fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut e1, mut e2): (f64, f64) = (0.0, 0.0);
    let mut checked = 0;
    for p in [4usize, 6, 8, 10] {
        let n = 40;
        let x = gaussian_matrix(&mut rng, n, p);
        let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] - 0.5 * x[(i, 1)] + rng.sample::<f64, _>(StandardNormal)).collect();
        let theta: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let model = OlapModel::new(Dataset::new(x.clone(), y, GlmFamily::Gaussian).unwrap(), 0.8, theta).unwrap();
        for code in 0..1usize << p {
            let d = Support::from_code(p, code);
            let full = model.full_laplace_log_score(&d).unwrap();
            let exact = model.exact_gaussian_log_marginal(&d).unwrap();
            let olap = model.olap_log_score(&d).unwrap().log_score;
            let cols = d.active();
            let half_logdet = if cols.is_empty() {
                0.0
            } else {
                let xd = x.select_columns(&cols);
                0.5 * log_det_spd(xd.transpose() * &xd + DMatrix::identity(cols.len(), cols.len()))
            };
            e1 = e1.max((full - exact).abs());
            e2 = e2.max((olap - full - half_logdet).abs());
            checked += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        e1 <= 1e-8 && e2 <= 1e-8 && t < Duration::from_secs(30),
        format!("{checked} models: |laplace − exact| ≤ {e1:.2e}, |olap − laplace − ½logdet| ≤ {e2:.2e}, {t:.2?}"),
    )
}

/// J = 1 Gibbs visits match enumeration; the explicit kernel is reversible.
fn criterion_3() -> Outcome {
    let start = Instant::now();
    let sim = simulate(&SimConfig { s_star: 3, signal_low: 0.5, signal_high: 1.0, ..SimConfig::new(60, 8, GlmFamily::Logistic, 303) }).unwrap();
    let init = initial_estimate(&sim.data, &InitSection::default(), 3).unwrap();
    let model = OlapModel::new(sim.data, 0.8, init.theta_tilde).unwrap();
    let table = model.enumerate_posterior(8).unwrap();
    let trace = run_chain(&model, &Support::empty(8), 1_000_000, 1, 33).unwrap();
    let tv = table.tv_to(&trace.empirical_law(8));
    let chain = FiniteChain::from_model(&model, 8).unwrap();
    let db = chain.reversibility_error();
    let t = start.elapsed();
    outcome(
        tv <= 0.05 && db <= 1e-12 && t < Duration::from_secs(120),
        format!("TV(empirical, enumerated) = {tv:.4}, detailed-balance error {db:.2e}, {t:.2?}"),
    )
}

/// Π̌(δ⋆) ≥ 0.9 in ≥ 18 of 20 seeds when u meets the theorem's condition.
fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    let mut notes = Vec::new();
    let mut cond_ss = 0;
    let mut bound_ok = 0;
    for seed in 0..20u64 {
        let sim = simulate(&SimConfig { s_star: 2, ..SimConfig::new(400, 12, GlmFamily::Logistic, 4000 + seed) }).unwrap();
        let init = initial_estimate(&sim.data, &InitSection::default(), seed).unwrap();
        let base = OlapModel::new(sim.data.clone(), 0.8, init.theta_tilde).unwrap();
        let diag = base.consistency_diagnostic(&sim.delta_star, 0, seed).unwrap();
        let u = f64::max(0.8, 2.0 * (1.0 + diag.c1_hat));
        let model = base.with_u(u).unwrap();
        let table = model.enumerate_posterior(12).unwrap();
        let mass = table.prob(&sim.delta_star);
        let bound = diag.concentration_bound(400, 12, u, 0);
        if diag.sample_size_condition(400, 12, u) {
            cond_ss += 1;
            if mass >= bound {
                bound_ok += 1;
            }
        }
        hits += (mass >= 0.9) as usize;
        notes.push(format!("{mass:.3}@u={u:.2}"));
    }
    let t = start.elapsed();
    outcome(
        hits >= 18 && t < Duration::from_secs(120),
        format!(
            "{hits}/20 seeds with Π̌(δ⋆) ≥ 0.9; sample-size condition held in {cond_ss}, theorem bound met in {bound_ok} of those; [{}], {t:.2?}",
            notes.join(" ")
        ),
    )
}

/// Cheeger sandwich, path bounds, composite bound and decay on many chains.
fn criterion_5() -> Outcome {
    let start = Instant::now();
    let eps = [0.02, 0.05];
    let cfg = BoundsConfig::default();
    let mut violations = Vec::new();
    let mut chains = 0;
    let mut applicable = 0;
    let mut check = |name: String, chain: &FiniteChain, star: &Support| {
        let r = chain.verify_bounds(star, &eps, &cfg).unwrap();
        chains += 1;
        applicable += r.assertions.iter().filter(|a| a.pass.is_some()).count();
        for v in r.violations() {
            violations.push(format!("{name}: {} ({} > {}) {:?}", v.name, v.lhs, v.rhs, v.witness));
        }
    };

    let two = FiniteChain::from_dense(&DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.8]), vec![0.5, 0.5], Some(1)).unwrap();
    let hand = (two.spectral_gap().unwrap() - 0.4).abs() < 1e-12
        && (two.conductance(0.0).unwrap().unwrap().value - 0.4).abs() < 1e-12
        && (two.canonical_path_bound(&Support::full(1), &[true, true]).unwrap().m - 2.5).abs() < 1e-12;
    check("two-state".into(), &two, &Support::full(1));

    for seed in 0..100u64 {
        let p = 1 + (seed as usize % 4);
        let kind = if seed % 2 == 0 { LocalKernel::HeatBath } else { LocalKernel::LazyMetropolis };
        let chain = FiniteChain::random(p, 1.5, kind, 500 + seed).unwrap();
        let star = Support::from_code(p, (seed as usize * 7) % (1 << p));
        check(format!("random {seed}"), &chain, &star);
    }
    for seed in 0..10u64 {
        let sim = simulate(&SimConfig { s_star: 1, ..SimConfig::new(50, 3, GlmFamily::Logistic, 550 + seed) }).unwrap();
        let model = OlapModel::new(sim.data, 0.8, vec![0.0; 3]).unwrap();
        let chain = FiniteChain::from_model(&model, 12).unwrap();
        check(format!("olap p=3 {seed}"), &chain, &sim.delta_star);
    }
    let t = start.elapsed();
    outcome(
        hand && violations.is_empty() && t < Duration::from_secs(120),
        format!(
            "hand instance {}; {chains} chains, {applicable} applicable assertions, {} violations{}; {t:.2?}",
            if hand { "λ = Φ = 0.4, m = 2.5" } else { "WRONG" },
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    )
}

/// The coupling estimate dominates the exact TV over the comparison window.
fn criterion_6() -> Outcome {
    let start = Instant::now();
    let seeds = 20u64;
    let mut dominated = 0;
    let mut worst_gap = f64::INFINITY;
    for seed in 0..seeds {
        let p = 4 + (seed as usize % 3);
        let sim = simulate(&SimConfig { s_star: 2, signal_low: 0.5, signal_high: 1.5, ..SimConfig::new(60, p, GlmFamily::Logistic, 600 + seed) }).unwrap();
        let model = OlapModel::new(sim.data, 0.8, vec![0.0; p]).unwrap();
        let chain = FiniteChain::from_model(&model, 12).unwrap();
        let exact: Vec<f64> = chain.tv_curve(&chain.point_mass(0), 5000).unwrap().iter().map(|d| d / 2.0).collect();
        let horizon = exact.iter().position(|&d| d <= 0.01).expect("chain mixes within 5000 steps");
        let base = split_seed(6000, seed);
        let seeds_k: Vec<u64> = (0..1000).map(|k| split_seed(base, k)).collect();
        let records = meeting_records(&model, &InitKind::Null, &MeetingConfig::new(1, 1, 1_000_000), &seeds_k).unwrap();
        let curve = tv_bound_curve(&records, horizon as u64).unwrap();
        let gap = (0..=horizon).map(|t| curve.d_hat[t] - exact[t]).fold(f64::INFINITY, f64::min);
        worst_gap = worst_gap.min(gap);
        dominated += (gap >= 0.0) as u64;
    }
    let frac = dominated as f64 / seeds as f64;
    let t = start.elapsed();
    outcome(
        frac >= 0.95 && t < Duration::from_secs(120),
        format!("d̂ ≥ exact TV on the window in {dominated}/{seeds} seeds (min gap {worst_gap:.4}), {t:.2?}"),
    )
}

fn table1_config(n: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        master_seed: seed,
        replications: 10,
        simulation: SimulationSection { n, p: 1000, family: "logistic".into(), ..SimulationSection::default() },
        prior: Default::default(),
        init: InitSection::default(),
        sampler: SamplerSection { steps: 400, j: 100, ..SamplerSection::default() },
        coupling: CouplingSection::default(),
        da: Default::default(),
        threads: 0,
    }
}

/// Desk-scale Table 1: logistic, p = 1000, lasso init, J = 100.
fn criterion_7() -> Outcome {
    let start = Instant::now();
    let big = run_experiment(&table1_config(1000, 71)).unwrap();
    let small = run_experiment(&table1_config(300, 72)).unwrap();
    let (m1, m2) = (big.summary.median_f1, small.summary.median_f1);
    let t = start.elapsed();
    outcome(
        m1 >= 0.95 && m2 >= 0.9 && big.summary.completed == 10 && small.summary.completed == 10 && t < Duration::from_secs(1800),
        format!(
            "median F1 {m1:.3} (sd {:.3}) at n=1000, {m2:.3} (sd {:.3}) at n=300; {t:.2?}",
            big.summary.sd_f1, small.summary.sd_f1
        ),
    )
}

fn mixing_config(start: &str, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        master_seed: seed,
        replications: 10,
        simulation: SimulationSection { n: 600, p: 200, family: "logistic".into(), ..SimulationSection::default() },
        prior: Default::default(),
        init: InitSection::default(),
        sampler: SamplerSection { steps: 10, j: 100, ..SamplerSection::default() },
        coupling: CouplingSection { enabled: true, records: 30, start: start.into(), false_positives: 10, ..CouplingSection::default() },
        da: Default::default(),
        threads: 0,
    }
}

fn exact_mixing_time(chain: &FiniteChain, law: &[f64]) -> usize {
    let tv = chain.tv_curve(law, 5000).unwrap();
    tv.iter().position(|&d| d / 2.0 <= 0.25).unwrap_or(tv.len())
}

/// Warm start mixes no slower than the null start.
fn criterion_8() -> Outcome {
    let start = Instant::now();
    let warm = run_experiment(&mixing_config("truth_plus_fp", 81)).unwrap();
    let null = run_experiment(&mixing_config("null", 81)).unwrap();
    let times = |r: &olap::experiment::ExperimentReport| r.rows.iter().filter_map(|x| x.mixing_time.map(|t| t as f64)).collect::<Vec<_>>();
    let (tw, tn) = (times(&warm), times(&null));
    let (mw, mn) = (median(&tw), median(&tn));
    let coupled_ok = tw.len() == 10 && tn.len() == 10 && mw <= mn;

    // Exact TV at p = 12, s⋆ = 2, over five datasets.
    let k = (10.0f64 * 12.0 / 200.0).ceil() as usize;
    let (mut ex_null, mut ex_warm, mut ex_lasso, mut ex_full) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let sim = simulate(&SimConfig { s_star: 2, ..SimConfig::new(400, 12, GlmFamily::Logistic, 8000 + seed) }).unwrap();
        let init = initial_estimate(&sim.data, &InitSection::default(), seed).unwrap();
        let model = OlapModel::new(sim.data, 0.8, init.theta_tilde).unwrap();
        let chain = FiniteChain::from_model(&model, 12).unwrap();
        let superset_law = |k: usize| {
            let mut law = vec![0.0; 1 << 12];
            let members: Vec<usize> = (0..1usize << 12)
                .filter(|&c| {
                    let d = Support::from_code(12, c);
                    sim.delta_star.is_subset(&d).unwrap() && d.weight() == 2 + k
                })
                .collect();
            for &c in &members {
                law[c] = 1.0 / members.len() as f64;
            }
            law
        };
        ex_null.push(exact_mixing_time(&chain, &chain.point_mass(0)) as f64);
        ex_warm.push(exact_mixing_time(&chain, &superset_law(k)) as f64);
        ex_full.push(exact_mixing_time(&chain, &superset_law(10)) as f64);
        ex_lasso.push(exact_mixing_time(&chain, &chain.point_mass(init.delta0.code())) as f64);
    }
    let exact_ok = median(&ex_warm) <= median(&ex_null) && median(&ex_lasso) <= median(&ex_null);
    let t = start.elapsed();
    outcome(
        coupled_ok && exact_ok && t < Duration::from_secs(900),
        format!(
            "coupling p=200: median {mw} (truth+10fp) vs {mn} (null) [{tw:?} vs {tn:?}]; exact p=12: truth+{k}fp {} / lasso {} / null {} (truth+10fp = full model: {}); {t:.2?}",
            median(&ex_warm),
            median(&ex_lasso),
            median(&ex_null),
            median(&ex_full)
        ),
    )
}

/// DA sampler's δ-marginal matches the closed-form Gaussian posterior.
fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (n, p) = (40, 5);
    let x = gaussian_matrix(&mut rng, n, p);
    let y: Vec<f64> = (0..n).map(|i| 0.8 * x[(i, 0)] - 0.4 * x[(i, 2)] + rng.sample::<f64, _>(StandardNormal)).collect();
    let model = OlapModel::new(Dataset::new(x, y, GlmFamily::Gaussian).unwrap(), 0.8, vec![0.0; p]).unwrap();
    let exact = model.enumerate_exact_gaussian(p).unwrap();
    let trace = run_da_chain(&model, &vec![0.0; p], &Support::empty(p), 1_000_000, &DaConfig::default(), 99).unwrap();
    let tv = exact.tv_to(&trace.empirical_law(p));
    let t = start.elapsed();
    outcome(
        tv <= 0.1 && t < Duration::from_secs(300),
        format!("TV(DA δ-marginal, exact) = {tv:.4}, MaLA acceptance {:.3}, {t:.2?}", trace.acceptance_rate.unwrap_or(f64::NAN)),
    )
}

/// Self-concordance with c₃ = 1 and the third-order remainder bound.
fn criterion_10() -> Outcome {
    let start = Instant::now();
    let grid: Vec<f64> = (0..=40_000).map(|i| -40.0 + i as f64 * 0.002).collect();
    let mut ok = true;
    let mut detail = Vec::new();
    for fam in [GlmFamily::Logistic, GlmFamily::Poisson] {
        let r = self_concordance_check(fam, &grid, 1.0).unwrap();
        ok &= r.pass;
        let mut rem_fail = 0;
        let mut rem_total = 0;
        for i in 0..=80 {
            let u = -20.0 + i as f64 * 0.5;
            for k in 0..=60 {
                let h = -3.0 + k as f64 * 0.1;
                rem_total += 1;
                rem_fail += (!remainder_bound_check(fam, u, h, 1.0).unwrap().pass) as usize;
            }
        }
        ok &= rem_fail == 0;
        detail.push(format!("{}: max |ψ'''|/ψ'' = {:.6}, remainder {}/{} ok", fam.name(), r.max_ratio, rem_total - rem_fail, rem_total));
    }
    let t = start.elapsed();
    outcome(ok && t < Duration::from_secs(5), format!("{}; {t:.2?}", detail.join("; ")))
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("criterion 1 (quadratic exactness)", criterion_1),
        ("criterion 2 (gaussian oracle identity)", criterion_2),
        ("criterion 3 (sampler correctness)", criterion_3),
        ("criterion 4 (posterior concentration)", criterion_4),
        ("criterion 5 (spectral suite)", criterion_5),
        ("criterion 6 (coupling-bound validity)", criterion_6),
        ("criterion 7 (desk-scale table 1)", criterion_7),
        ("criterion 8 (warm-start effect)", criterion_8),
        ("criterion 9 (DA comparator exactness)", criterion_9),
        ("criterion 10 (self-concordance)", criterion_10),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str())) {
            continue;
        }
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            Outcome { pass: false, detail: format!("panicked: {msg}") }
        });
        println!("{name}: {} — {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += (!o.pass) as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
