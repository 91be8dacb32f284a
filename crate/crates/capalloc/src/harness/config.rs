//! Scenario configuration: a single versioned JSON document that resolves to
//! concrete objectives, capabilities, trainer settings, checks, and frozen
//! numeric assertions.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::capabilities::{Capability, CapabilitySet, LinearCapability};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng, Vector};
use crate::objectives::{Objective, QuadraticObjective};
use crate::trainer::TrainerConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub instance: InstanceSpec,
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    /// Bound checks to run and gate on.
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    /// Frozen numeric assertions evaluated per run.
    #[serde(default)]
    pub assertions: Vec<Assertion>,
    /// Assertions evaluated across the ordered values of a sweep.
    #[serde(default)]
    pub sweep_assertions: Vec<SweepAssertion>,
    /// Built-in sweep executed by the `run` command when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Capability whose underinvestment the mismatch check targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neglected_capability: Option<String>,
    /// Early-prefix fraction for the dispersion-vs-jaggedness correlation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    /// Where the frozen thresholds came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec { n: 1, base_seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Prop1,
    Thm1,
    Thm2,
    Corollary,
    Prop2,
    Prop5,
    GovernanceCaps,
}

/// Per-run numeric assertion against the allocation summary or reports.
/// Threshold values are frozen from oracle runs; the `provenance` field of
/// the config records where they came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Assertion {
    EbarAtLeast { capability: String, value: f64 },
    EbarAtMost { capability: String, value: f64 },
    JaggednessAtLeast { value: f64 },
    JaggednessAtMost { value: f64 },
    /// The jaggedness lower bound's right side must clear this floor.
    Thm1RhsAtLeast { value: f64 },
    /// Spearman correlation (ensemble level) between early energy-weight
    /// dispersion and final jaggedness.
    SpearmanAtLeast { value: f64 },
    /// `J / (mean G)^2` floor (scaling scenarios).
    NormalizedJaggednessAtLeast { value: f64 },
    NormalizedJaggednessAtMost { value: f64 },
    /// `G[numerator] / G[denominator]` ceiling (mismatch scenarios).
    GainRatioAtMost {
        numerator: String,
        denominator: String,
        value: f64,
    },
    /// Re-runs the objective for `extended_factor * horizon` steps and
    /// requires the stationarity residual at the final iterate to fall
    /// below `value`. Needs a composite objective with a variance term.
    StationarityResidualAtMost { value: f64, extended_factor: usize },
}

/// Assertion across the ordered manifests of a parameter sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepAssertion {
    /// Mean cumulative share of one capability strictly increases along the
    /// sweep values.
    EbarStrictlyIncreasing { capability: String },
    /// Mean jaggedness strictly decreases along the sweep values.
    JaggednessStrictlyDecreasing,
    /// Share bound at the first sweep point.
    FirstPointEbarAtMost { capability: String, value: f64 },
    /// Share bound at the last sweep point.
    LastPointEbarAtLeast { capability: String, value: f64 },
}

/// A sweep baked into a scenario: the `run` command executes it instead of a
/// single ensemble when present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<serde_json::Value>,
}

/// How to materialize the objective/capability pair for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    /// One concrete instance shared by every run in the ensemble.
    Fixed {
        objective: Box<Objective>,
        capabilities: Vec<Capability>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta0: Option<Vector>,
    },
    /// Randomized two-mode anisotropy: weak-mode scale and spectral ratio
    /// drawn log-uniformly, target point fixed at (1,1)/sqrt(2), capability
    /// pair rotated by a small random angle. The tighter the ratio range,
    /// the weaker the anisotropy-to-jaggedness signal.
    RandomAnisotropic {
        ratio_min: f64,
        ratio_max: f64,
        sigma_weak_min: f64,
        sigma_weak_max: f64,
        #[serde(default)]
        cap_rotation: f64,
    },
    /// Dominant/weak two-capability design at dimension `d`: one mode at
    /// `spectral_ratio * sigma_weak`, all others at `sigma_weak`, targets at
    /// 1. With `isotropic` every mode sits at `sigma_weak` and the two
    /// capability coordinates become exchangeable.
    ScalingAnisotropic {
        d: usize,
        spectral_ratio: f64,
        sigma_weak: f64,
        #[serde(default)]
        isotropic: bool,
    },
}

impl InstanceSpec {
    /// Builds the concrete (objective, capabilities, theta0) triple for a
    /// run seed. Fixed instances ignore the seed.
    pub fn generate(&self, seed: u64) -> Result<(Objective, CapabilitySet, Vector)> {
        match self {
            InstanceSpec::Fixed {
                objective,
                capabilities,
                theta0,
            } => {
                let capset = CapabilitySet::new(capabilities.clone())?;
                validate_objective(objective)?;
                if capset.dim() != objective.dim() {
                    return Err(Error::config(
                        "instance: capability dimension does not match the objective",
                    ));
                }
                let theta0 = match theta0 {
                    Some(t) => {
                        if t.dim() != objective.dim() {
                            return Err(Error::config("instance: theta0 dimension mismatch"));
                        }
                        t.clone()
                    }
                    None => Vector::zeros(objective.dim()),
                };
                Ok(((**objective).clone(), capset, theta0))
            }
            InstanceSpec::RandomAnisotropic {
                ratio_min,
                ratio_max,
                sigma_weak_min,
                sigma_weak_max,
                cap_rotation,
            } => {
                if !(*ratio_min > 0.0 && ratio_max >= ratio_min) {
                    return Err(Error::config("random instance: bad ratio range"));
                }
                if !(*sigma_weak_min > 0.0 && sigma_weak_max >= sigma_weak_min) {
                    return Err(Error::config("random instance: bad sigma range"));
                }
                let mut rng = SeededRng::new(seed);
                let ratio = rng.next_log_range(*ratio_min, *ratio_max);
                let sigma_weak = rng.next_log_range(*sigma_weak_min, *sigma_weak_max);
                let sigma_strong = ratio * sigma_weak;
                let a = Matrix::diagonal(&[sigma_strong, sigma_weak])?;
                let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
                let theta_star = Vector::new(vec![inv_sqrt2, inv_sqrt2])?;
                let b = a.matvec(&theta_star);
                let objective =
                    Objective::Quadratic(QuadraticObjective::new(a, b)?);
                let phi = rng.next_range(-*cap_rotation, *cap_rotation);
                let (c, s) = (phi.cos(), phi.sin());
                let capset = CapabilitySet::new(vec![
                    Capability::Linear(LinearCapability::new(
                        Vector::new(vec![c, s])?,
                        "strong",
                    )?),
                    Capability::Linear(LinearCapability::new(
                        Vector::new(vec![-s, c])?,
                        "weak",
                    )?),
                ])?;
                Ok((objective, capset, Vector::zeros(2)))
            }
            InstanceSpec::ScalingAnisotropic {
                d,
                spectral_ratio,
                sigma_weak,
                isotropic,
            } => {
                if *d < 2 {
                    return Err(Error::config("scaling instance: d must be at least 2"));
                }
                if !(*sigma_weak > 0.0 && *spectral_ratio >= 1.0) {
                    return Err(Error::config("scaling instance: bad spectrum"));
                }
                let mut diag = vec![*sigma_weak; *d];
                if !*isotropic {
                    diag[0] = spectral_ratio * sigma_weak;
                }
                let a = Matrix::diagonal(&diag)?;
                let b = Vector::new(vec![1.0; *d])?;
                let objective = Objective::Quadratic(QuadraticObjective::new(a, b)?);
                let capset = CapabilitySet::new(vec![
                    Capability::Linear(LinearCapability::new(Vector::basis(*d, 0), "strong")?),
                    Capability::Linear(LinearCapability::new(Vector::basis(*d, 1), "weak")?),
                ])?;
                Ok((objective, capset, Vector::zeros(*d)))
            }
        }
    }
}

/// Re-checks invariants the serde derive cannot enforce on its own.
fn validate_objective(objective: &Objective) -> Result<()> {
    match objective {
        Objective::Quadratic(q) => {
            if q.matrix().rows() != q.offset().dim() {
                return Err(Error::config("quadratic objective: A rows must match b"));
            }
        }
        Objective::Mismatch(m) => {
            if !(0.0..=1.0).contains(&m.epsilon()) {
                return Err(Error::config("mismatch epsilon must lie in [0, 1]"));
            }
        }
        Objective::TanhRegression(_) => {}
        Objective::Composite(c) => {
            if let Some(reg) = c.variance_term() {
                if reg.lambda() < 0.0 || reg.eps_s() <= 0.0 {
                    return Err(Error::config(
                        "variance term needs lambda >= 0 and eps_s > 0",
                    ));
                }
                if reg.capset().dim() != c.base().dim() {
                    return Err(Error::config(
                        "variance term capability set dimension mismatch",
                    ));
                }
            }
            for aux in c.aux_terms() {
                if aux.dim() != c.base().dim() {
                    return Err(Error::config("auxiliary term dimension mismatch"));
                }
            }
        }
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_str(json)
            .map_err(|e| Error::config(format!("cannot parse scenario config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.is_empty() {
            return Err(Error::config("scenario name must be nonempty"));
        }
        if self.ensemble.n == 0 {
            return Err(Error::config("ensemble size n must be at least 1"));
        }
        self.trainer.validate()?;
        if let Some(f) = self.early_fraction {
            if !(0.0 < f && f < 1.0) {
                return Err(Error::config("early_fraction must lie in (0, 1)"));
            }
        }
        // Resolve one instance eagerly so bad specs fail before any run.
        let (objective, capset, theta0) = self.instance.generate(self.ensemble.base_seed)?;
        let _ = objective.loss(&theta0)?;
        if let Some(policy) = &self.trainer.governance {
            policy.validate(capset.len())?;
        }
        if let Some(name) = &self.neglected_capability {
            if !capset.names().iter().any(|n| n == name) {
                return Err(Error::config(format!(
                    "neglected_capability '{name}' is not in the capability set"
                )));
            }
        }
        let known = |name: &str| capset.names().iter().any(|n| n == name);
        for a in &self.assertions {
            match a {
                Assertion::EbarAtLeast { capability, .. }
                | Assertion::EbarAtMost { capability, .. } => {
                    if !known(capability) {
                        return Err(Error::config(format!(
                            "assertion references unknown capability '{capability}'"
                        )));
                    }
                }
                Assertion::GainRatioAtMost {
                    numerator,
                    denominator,
                    ..
                } => {
                    if !known(numerator) || !known(denominator) {
                        return Err(Error::config(
                            "gain ratio assertion references unknown capability",
                        ));
                    }
                }
                Assertion::StationarityResidualAtMost {
                    extended_factor, ..
                } => {
                    if *extended_factor == 0 {
                        return Err(Error::config("extended_factor must be at least 1"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Seed for run `index` within the ensemble.
    pub fn run_seed(&self, index: usize) -> u64 {
        self.ensemble.base_seed.wrapping_add(index as u64)
    }

    /// SHA-256 of the canonical (sorted-key, compact) JSON encoding.
    pub fn config_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
