//! Experiment configuration (TOML).
//!
//! ```toml
//! schema_version = 1
//! master_seed = 7
//! replications = 10
//!
//! [simulation]
//! n = 1000
//! p = 1000
//! family = "logistic"
//!
//! [sampler]
//! steps = 400
//! j = 100
//! ```
//!
//! Every table and field is optional except `schema_version`.

use olap_core::coupling::{DEFAULT_LAG, DEFAULT_THRESHOLD};
use olap_core::olap::DEFAULT_U;
use olap_core::sampler::DEFAULT_J;
use olap_core::GlmFamily;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub coupling: CouplingSection,
    #[serde(default)]
    pub da: DaSection,
    /// Worker threads; 0 uses rayon's default.
    #[serde(default)]
    pub threads: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub s_star: usize,
    pub signal_low: f64,
    pub signal_high: f64,
    pub family: String,
    /// Size of the independent test set used for RMSE; 0 skips RMSE.
    pub n_test: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection { n: 200, p: 50, rho: 0.0, s_star: 10, signal_low: 2.0, signal_high: 3.0, family: "logistic".into(), n_test: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub u: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        PriorSection { u: DEFAULT_U }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// Cross-validated lasso: θ̃ is the fit, δ⁰ its support.
    Lasso,
    /// θ̃ = 0, δ⁰ = ∅.
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    pub method: InitMethod,
    pub folds: usize,
    pub n_lambda: usize,
    /// Smallest λ as a fraction of λ_max.
    pub lambda_ratio: f64,
    /// Fixed λ₁ (sum-of-losses scale), skipping cross-validation.
    pub lambda1: Option<f64>,
    pub lambda2: f64,
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection { method: InitMethod::Lasso, folds: 5, n_lambda: 20, lambda_ratio: 0.01, lambda1: None, lambda2: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub steps: u64,
    pub j: usize,
    /// Fraction of steps discarded when the coupling estimate is not used.
    pub burnin_fraction: f64,
    /// Use the coupling mixing estimate as burn-in when coupling is enabled.
    pub burnin_from_coupling: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection { steps: 400, j: DEFAULT_J, burnin_fraction: 0.5, burnin_from_coupling: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    pub enabled: bool,
    pub records: usize,
    pub lag: u64,
    pub threshold: f64,
    pub max_steps: u64,
    /// `null`, `init` (the sampler's δ⁰) or `truth_plus_fp`.
    pub start: String,
    pub false_positives: usize,
}

impl Default for CouplingSection {
    fn default() -> Self {
        CouplingSection {
            enabled: false,
            records: 30,
            lag: DEFAULT_LAG,
            threshold: DEFAULT_THRESHOLD,
            max_steps: 10_000,
            start: "null".into(),
            false_positives: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaSection {
    pub enabled: bool,
    pub steps: u64,
    pub adapt_steps: u64,
}

impl Default for DaSection {
    fn default() -> Self {
        DaSection { enabled: false, steps: 2000, adapt_steps: 1000 }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn family(&self) -> Result<GlmFamily> {
        self.simulation.family.parse().map_err(|_| Error::Config(format!("unknown family {:?}", self.simulation.family)))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        self.family()?;
        let s = &self.simulation;
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        if s.n == 0 || s.p == 0 || s.s_star > s.p {
            return bad(format!("need n, p > 0 and s_star ≤ p (n = {}, p = {}, s_star = {})", s.n, s.p, s.s_star));
        }
        if !(0.0..1.0).contains(&s.rho) {
            return bad(format!("rho = {} outside [0, 1)", s.rho));
        }
        if !(self.prior.u > 0.0) {
            return bad("prior.u must be positive".into());
        }
        if self.sampler.j == 0 || self.sampler.steps == 0 {
            return bad("sampler.j and sampler.steps must be positive".into());
        }
        if !(0.0..1.0).contains(&self.sampler.burnin_fraction) {
            return bad("sampler.burnin_fraction outside [0, 1)".into());
        }
        if self.init.method == InitMethod::Lasso && self.init.lambda1.is_none() && (self.init.folds < 2 || self.init.n_lambda == 0) {
            return bad("cross-validation needs folds ≥ 2 and n_lambda ≥ 1".into());
        }
        let c = &self.coupling;
        if c.enabled {
            if c.lag == 0 || c.records == 0 {
                return bad("coupling.lag and coupling.records must be positive".into());
            }
            if !(c.threshold > 0.0 && c.threshold < 1.0) {
                return bad("coupling.threshold outside (0, 1)".into());
            }
            if !matches!(c.start.as_str(), "null" | "init" | "truth_plus_fp") {
                return bad(format!("coupling.start {:?} not one of null, init, truth_plus_fp", c.start));
            }
        }
        Ok(())
    }
}
