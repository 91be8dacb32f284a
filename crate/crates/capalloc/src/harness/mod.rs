//! Scenario execution: configs to traces to bound reports to files.
//!
//! A scenario is an (instance, trainer, checks, assertions) bundle run as an
//! ensemble of deterministic seeds. Each run writes its trace CSV, its
//! allocation summary JSON, and its bound reports; the manifest ties the
//! files together and records the exit-status verdict. Everything a run
//! writes is reproducible byte for byte given the config.

pub mod config;
pub mod presets;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capabilities::CapabilitySet;
use crate::error::{Error, Result};
use crate::interventions::GOVERNANCE_TOL;
use crate::numerics::Matrix;
use crate::objectives::Objective;
use crate::telemetry::{
    cumulative, jaggedness, steps_from_csv, trace_to_csv, weights_over_prefix, AllocationSummary,
    Trace,
};
use crate::trainer;
use crate::verifier::{
    check_corollary, check_prop1, check_prop2, check_prop5, check_thm1, check_thm2,
    estimate_sensitivity, measure_mismatch_bounds, BoundReport,
};

use config::{Assertion, CheckKind, ScenarioConfig, SweepAssertion};

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunEntry {
    pub index: usize,
    pub seed: u64,
    pub trace_path: String,
    pub summary_path: String,
    pub bounds_path: String,
    pub wall_clock_secs: f64,
    pub diverged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub bounds_satisfied: bool,
    pub assumption_limited: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub config_hash: String,
    pub runs: Vec<RunEntry>,
    /// Reports computed across the whole ensemble (rank correlations).
    #[serde(default)]
    pub ensemble_reports: Vec<BoundReport>,
    /// Spearman correlation between early energy-weight dispersion and
    /// final jaggedness, when the scenario measures it. `None` means not
    /// applicable (degenerate ranks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spearman: Option<f64>,
    pub all_bounds_satisfied: bool,
    pub any_diverged: bool,
    pub assumption_limited: bool,
}

impl RunManifest {
    /// CLI exit code under the standard contract; `strict` turns
    /// assumption-limited reports into failures.
    pub fn exit_code(&self, strict: bool) -> i32 {
        if self.any_diverged {
            3
        } else if !self.all_bounds_satisfied || (strict && self.assumption_limited) {
            1
        } else {
            0
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

// ---------------------------------------------------------------------------
// Scenario execution
// ---------------------------------------------------------------------------

struct RunProducts {
    entry: RunEntry,
    early_dispersion: Option<f64>,
    final_jaggedness: Option<f64>,
}

/// Runs the full ensemble, writing traces, summaries, and bound reports
/// under `out_dir`, and returns the manifest (also written there).
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<RunManifest> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("config.json"),
        serde_json::to_string_pretty(config)?,
    )?;

    let products: Vec<Result<RunProducts>> = (0..config.ensemble.n)
        .into_par_iter()
        .map(|index| execute_run(config, index, out_dir))
        .collect();

    let mut runs = Vec::with_capacity(products.len());
    let mut early = Vec::new();
    let mut late = Vec::new();
    for p in products {
        let p = p?;
        if let (Some(e), Some(j)) = (p.early_dispersion, p.final_jaggedness) {
            early.push(e);
            late.push(j);
        }
        runs.push(p.entry);
    }
    runs.sort_by_key(|r| r.index);

    let mut ensemble_reports = Vec::new();
    let mut spearman_value = None;
    if let Some(fraction) = config.early_fraction {
        let _ = fraction;
        if early.len() >= 10 {
            spearman_value = spearman(&early, &late);
        }
        for assertion in &config.assertions {
            if let Assertion::SpearmanAtLeast { value } = assertion {
                if early.len() < 10 {
                    return Err(Error::usage(format!(
                        "spearman assertion needs an ensemble of at least 10 runs \
                         (got {})",
                        early.len()
                    )));
                }
                let (lhs, satisfied, applicable) = match spearman_value {
                    Some(r) => (r, r >= *value, true),
                    None => (0.0, true, false),
                };
                ensemble_reports.push(BoundReport {
                    name: "assert_spearman".into(),
                    lhs,
                    rhs: *value,
                    remainder_budget: 0.0,
                    satisfied,
                    margin: lhs - value,
                    steps_used: early.len(),
                    flagged_steps: 0,
                    applicable,
                });
            }
        }
    }
    if !ensemble_reports.is_empty() {
        fs::write(
            out_dir.join("bounds_ensemble.json"),
            serde_json::to_string_pretty(&ensemble_reports)?,
        )?;
    }

    let any_diverged = runs.iter().any(|r| r.diverged);
    let all_bounds_satisfied = runs.iter().all(|r| r.bounds_satisfied)
        && ensemble_reports.iter().all(|r| r.satisfied);
    let assumption_limited = runs.iter().any(|r| r.assumption_limited);
    let manifest = RunManifest {
        scenario: config.name.clone(),
        config_hash: config.config_hash(),
        runs,
        ensemble_reports,
        spearman: spearman_value,
        all_bounds_satisfied,
        any_diverged,
        assumption_limited,
    };
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

fn execute_run(config: &ScenarioConfig, index: usize, out_dir: &Path) -> Result<RunProducts> {
    let started = Instant::now();
    let seed = config.run_seed(index);
    let (objective, capset, theta0) = config.instance.generate(seed)?;
    let mut trainer_config = config.trainer.clone();
    trainer_config.seed = seed;

    let trace_path = format!("trace_{index:03}.csv");
    let summary_path = format!("summary_{index:03}.json");
    let bounds_path = format!("bounds_{index:03}.json");

    let trace = match trainer::run(&trainer_config, &objective, &capset, &theta0) {
        Ok(t) => t,
        Err(Error::Diverged { step, detail }) => {
            let entry = RunEntry {
                index,
                seed,
                trace_path: String::new(),
                summary_path: String::new(),
                bounds_path: String::new(),
                wall_clock_secs: started.elapsed().as_secs_f64(),
                diverged: true,
                error: Some(format!("diverged at step {step}: {detail}")),
                bounds_satisfied: false,
                assumption_limited: false,
            };
            return Ok(RunProducts {
                entry,
                early_dispersion: None,
                final_jaggedness: None,
            });
        }
        Err(e) => return Err(e),
    };

    let summary = cumulative(&trace)?;
    let reports = evaluate_run(config, &trace, &capset, &objective, &summary)?;

    fs::write(out_dir.join(&trace_path), trace_to_csv(&trace))?;
    fs::write(
        out_dir.join(&summary_path),
        serde_json::to_string_pretty(&summary)?,
    )?;
    fs::write(
        out_dir.join(&bounds_path),
        serde_json::to_string_pretty(&reports)?,
    )?;

    let early = config.early_fraction.map(|fraction| {
        let k = ((fraction * trace.horizon() as f64).floor() as usize).max(1);
        let w = weights_over_prefix(&trace, k);
        jaggedness(&w).unwrap_or(0.0)
    });

    let entry = RunEntry {
        index,
        seed,
        trace_path,
        summary_path,
        bounds_path,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        diverged: false,
        error: None,
        bounds_satisfied: reports.iter().all(|r| r.satisfied),
        assumption_limited: reports.iter().any(|r| r.is_assumption_limited()),
    };
    Ok(RunProducts {
        entry,
        early_dispersion: early,
        final_jaggedness: Some(summary.j),
    })
}

/// All bound reports for one run: the configured checks plus the frozen
/// assertions.
pub fn evaluate_run(
    config: &ScenarioConfig,
    trace: &Trace,
    capset: &CapabilitySet,
    objective: &Objective,
    summary: &AllocationSummary,
) -> Result<Vec<BoundReport>> {
    let mut reports = Vec::new();
    for check in &config.checks {
        match check {
            CheckKind::Prop1 => {
                let est = estimate_sensitivity(trace)?;
                reports.extend(check_prop1(trace, capset, &est));
            }
            CheckKind::Thm1 => {
                let est = estimate_sensitivity(trace)?;
                reports.push(check_thm1(trace, capset, &est)?);
            }
            CheckKind::Thm2 => {
                let est = estimate_sensitivity(trace)?;
                reports.push(check_thm2(trace, capset, &est));
            }
            CheckKind::Corollary => reports.push(check_corollary(trace, capset)?),
            CheckKind::Prop5 => reports.push(check_prop5(trace, capset)?),
            CheckKind::Prop2 => {
                let name = config.neglected_capability.as_ref().ok_or_else(|| {
                    Error::config("prop2 check needs neglected_capability")
                })?;
                let cap_index = trace
                    .capability_names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::config("neglected capability not in trace"))?;
                let epsilon = objective
                    .as_mismatch()
                    .map(|m| m.epsilon())
                    .ok_or_else(|| {
                        Error::usage("prop2 check needs a mismatch objective")
                    })?;
                let (delta, m_bound) = measure_mismatch_bounds(trace, cap_index)?;
                reports.push(check_prop2(
                    trace, capset, cap_index, delta, epsilon, m_bound,
                )?);
            }
            CheckKind::GovernanceCaps => {
                let policy = config.trainer.governance.as_ref().ok_or_else(|| {
                    Error::config("governance_caps check needs a governance policy")
                })?;
                let mut worst = 0.0_f64;
                for step in &trace.steps {
                    for (i, &share) in step.shares.iter().enumerate() {
                        worst = worst
                            .max(share - policy.caps[i])
                            .max(policy.floors[i] - share);
                    }
                }
                reports.push(BoundReport {
                    name: "governance_caps".into(),
                    lhs: worst.max(0.0),
                    rhs: GOVERNANCE_TOL,
                    remainder_budget: 0.0,
                    satisfied: worst <= GOVERNANCE_TOL,
                    margin: GOVERNANCE_TOL - worst,
                    steps_used: trace.horizon(),
                    flagged_steps: trace.flagged_count(),
                    applicable: true,
                });
            }
        }
    }
    for assertion in &config.assertions {
        if let Some(report) =
            evaluate_assertion(assertion, config, trace, capset, objective, summary)?
        {
            reports.push(report);
        }
    }
    Ok(reports)
}

fn evaluate_assertion(
    assertion: &Assertion,
    config: &ScenarioConfig,
    trace: &Trace,
    capset: &CapabilitySet,
    objective: &Objective,
    summary: &AllocationSummary,
) -> Result<Option<BoundReport>> {
    let cap_index = |name: &str| -> Result<usize> {
        trace
            .capability_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::config(format!("assertion: unknown capability '{name}'")))
    };
    let mk = |name: String, lhs: f64, rhs: f64, at_least: bool| BoundReport {
        name,
        lhs,
        rhs,
        remainder_budget: 0.0,
        satisfied: if at_least { lhs >= rhs } else { lhs <= rhs },
        margin: if at_least { lhs - rhs } else { rhs - lhs },
        steps_used: trace.horizon(),
        flagged_steps: trace.flagged_count(),
        applicable: true,
    };
    let report = match assertion {
        Assertion::EbarAtLeast { capability, value } => {
            let i = cap_index(capability)?;
            mk(format!("assert_ebar_min[{capability}]"), summary.ebar[i], *value, true)
        }
        Assertion::EbarAtMost { capability, value } => {
            let i = cap_index(capability)?;
            mk(format!("assert_ebar_max[{capability}]"), summary.ebar[i], *value, false)
        }
        Assertion::JaggednessAtLeast { value } => {
            mk("assert_j_min".into(), summary.j, *value, true)
        }
        Assertion::JaggednessAtMost { value } => {
            mk("assert_j_max".into(), summary.j, *value, false)
        }
        Assertion::Thm1RhsAtLeast { value } => {
            let est = estimate_sensitivity(trace)?;
            let thm1 = check_thm1(trace, capset, &est)?;
            mk("assert_thm1_rhs".into(), thm1.rhs, *value, true)
        }
        Assertion::NormalizedJaggednessAtLeast { value } => {
            mk("assert_nj_min".into(), normalized_jaggedness(summary), *value, true)
        }
        Assertion::NormalizedJaggednessAtMost { value } => {
            mk("assert_nj_max".into(), normalized_jaggedness(summary), *value, false)
        }
        Assertion::GainRatioAtMost {
            numerator,
            denominator,
            value,
        } => {
            let ni = cap_index(numerator)?;
            let di = cap_index(denominator)?;
            let den = summary.g[di];
            let ratio = if den.abs() < 1e-30 {
                if summary.g[ni].abs() < 1e-30 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                summary.g[ni] / den
            };
            mk(
                format!("assert_gain_ratio[{numerator}/{denominator}]"),
                ratio,
                *value,
                false,
            )
        }
        Assertion::StationarityResidualAtMost {
            value,
            extended_factor,
        } => {
            let reg = match objective {
                Objective::Composite(c) => c.variance_term().ok_or_else(|| {
                    Error::usage("stationarity assertion needs a variance term")
                })?,
                _ => {
                    return Err(Error::usage(
                        "stationarity assertion needs a composite objective",
                    ))
                }
            };
            let mut extended = config.trainer.clone();
            extended.horizon = config
                .trainer
                .horizon
                .saturating_mul(*extended_factor)
                .max(1);
            let long_trace =
                trainer::run(&extended, objective, capset, &trace.theta_initial)?;
            let residual = crate::interventions::stationarity_residual(
                reg,
                objective,
                &long_trace.theta_final,
            )?;
            mk("assert_stationarity".into(), residual, *value, false)
        }
        Assertion::SpearmanAtLeast { .. } => return Ok(None), // ensemble level
    };
    Ok(Some(report))
}

/// `J / (mean G)^2`; zero when both vanish.
pub fn normalized_jaggedness(summary: &AllocationSummary) -> f64 {
    let mean = summary.g.iter().sum::<f64>() / summary.g.len() as f64;
    if mean.abs() < 1e-30 {
        if summary.j.abs() < 1e-30 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        summary.j / (mean * mean)
    }
}

// ---------------------------------------------------------------------------
// Rank correlation
// ---------------------------------------------------------------------------

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// input has zero rank variance.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Spearman correlation between early-prefix energy-weight dispersion and
/// final jaggedness across an ensemble of traces.
pub fn correlate_early_late(traces: &[Trace], early_fraction: f64) -> Result<Option<f64>> {
    if traces.len() < 10 {
        return Err(Error::usage(format!(
            "correlation needs at least 10 runs, got {}",
            traces.len()
        )));
    }
    if !(0.0 < early_fraction && early_fraction < 1.0) {
        return Err(Error::usage("early_fraction must lie in (0, 1)"));
    }
    let mut early = Vec::with_capacity(traces.len());
    let mut late = Vec::with_capacity(traces.len());
    for trace in traces {
        let k = ((early_fraction * trace.horizon() as f64).floor() as usize).max(1);
        early.push(jaggedness(&weights_over_prefix(trace, k))?);
        late.push(jaggedness(&trace.gains())?);
    }
    Ok(spearman(&early, &late))
}

// ---------------------------------------------------------------------------
// Intervention comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunDelta {
    pub seed: u64,
    pub delta_j: f64,
    pub delta_g: Vec<f64>,
    pub delta_ebar: Vec<f64>,
    /// Change in the baseline's peak coordinate's gain.
    pub delta_peak_gain: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline: String,
    pub treated: String,
    pub runs: Vec<RunDelta>,
    pub mean_delta_j: f64,
    pub mean_delta_peak_gain: f64,
}

/// Per-seed deltas between two matched ensembles (treated minus baseline).
pub fn compare_summaries(
    baseline_name: &str,
    treated_name: &str,
    baseline: &[(u64, AllocationSummary)],
    treated: &[(u64, AllocationSummary)],
) -> Result<ComparisonReport> {
    if baseline.len() != treated.len() {
        return Err(Error::usage("comparison: ensemble sizes differ"));
    }
    let mut runs = Vec::with_capacity(baseline.len());
    for ((seed_b, sb), (seed_t, st)) in baseline.iter().zip(treated) {
        if seed_b != seed_t {
            return Err(Error::usage(format!(
                "comparison: seed mismatch ({seed_b} vs {seed_t})"
            )));
        }
        if sb.g.len() != st.g.len() {
            return Err(Error::usage("comparison: capability counts differ"));
        }
        let peak = sb
            .g
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite gains"))
            .map(|(i, _)| i)
            .unwrap_or(0);
        runs.push(RunDelta {
            seed: *seed_b,
            delta_j: st.j - sb.j,
            delta_g: st.g.iter().zip(&sb.g).map(|(t, b)| t - b).collect(),
            delta_ebar: st.ebar.iter().zip(&sb.ebar).map(|(t, b)| t - b).collect(),
            delta_peak_gain: st.g[peak] - sb.g[peak],
        });
    }
    let n = runs.len() as f64;
    let mean_delta_j = runs.iter().map(|r| r.delta_j).sum::<f64>() / n;
    let mean_delta_peak_gain = runs.iter().map(|r| r.delta_peak_gain).sum::<f64>() / n;
    Ok(ComparisonReport {
        baseline: baseline_name.into(),
        treated: treated_name.into(),
        runs,
        mean_delta_j,
        mean_delta_peak_gain,
    })
}

/// Loads two scenario output directories and compares them seed by seed.
pub fn compare_directories(baseline_dir: &Path, treated_dir: &Path) -> Result<ComparisonReport> {
    let load = |dir: &Path| -> Result<(String, Vec<(u64, AllocationSummary)>)> {
        let manifest = RunManifest::load(&dir.join("manifest.json"))?;
        let mut out = Vec::new();
        for run in &manifest.runs {
            if run.diverged {
                return Err(Error::usage(format!(
                    "comparison: run {} in {} diverged",
                    run.index,
                    dir.display()
                )));
            }
            let summary: AllocationSummary =
                serde_json::from_str(&fs::read_to_string(dir.join(&run.summary_path))?)?;
            out.push((run.seed, summary));
        }
        Ok((manifest.scenario, out))
    };
    let (name_b, base) = load(baseline_dir)?;
    let (name_t, treat) = load(treated_dir)?;
    compare_summaries(&name_b, &name_t, &base, &treat)
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: serde_json::Value,
    pub out_dir: String,
    pub mean_ebar: Vec<f64>,
    pub mean_j: f64,
    pub mean_normalized_j: f64,
    pub all_bounds_satisfied: bool,
    pub any_diverged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub param: String,
    pub points: Vec<SweepPoint>,
    pub sweep_reports: Vec<BoundReport>,
    pub all_satisfied: bool,
    pub any_diverged: bool,
}

/// Sets `path` (dot-separated keys / array indices) in a JSON tree.
fn set_json_path(root: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<()> {
    let mut cursor = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        if last {
            match cursor {
                serde_json::Value::Object(map) => {
                    map.insert((*part).to_string(), value);
                    return Ok(());
                }
                serde_json::Value::Array(arr) => {
                    let idx: usize = part
                        .parse()
                        .map_err(|_| Error::usage(format!("bad array index '{part}'")))?;
                    if idx >= arr.len() {
                        return Err(Error::usage(format!("array index {idx} out of range")));
                    }
                    arr[idx] = value;
                    return Ok(());
                }
                _ => return Err(Error::usage(format!("path '{path}' hits a scalar"))),
            }
        }
        cursor = match cursor {
            serde_json::Value::Object(map) => map
                .get_mut(*part)
                .ok_or_else(|| Error::usage(format!("unknown config key '{part}'")))?,
            serde_json::Value::Array(arr) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::usage(format!("bad array index '{part}'")))?;
                arr.get_mut(idx)
                    .ok_or_else(|| Error::usage(format!("array index {idx} out of range")))?
            }
            _ => return Err(Error::usage(format!("path '{path}' hits a scalar"))),
        };
    }
    Err(Error::usage("empty sweep path"))
}

/// Runs the scenario once per sweep value, patching `param` in the config,
/// then evaluates the config's sweep assertions across the ordered points.
pub fn sweep_scenario(
    base: &ScenarioConfig,
    param: &str,
    values: &[serde_json::Value],
    out_dir: &Path,
) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::usage("sweep needs at least one value"));
    }
    fs::create_dir_all(out_dir)?;
    let base_value = serde_json::to_value(base)?;
    let mut points = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let mut patched = base_value.clone();
        set_json_path(&mut patched, param, v.clone())?;
        let config = ScenarioConfig::from_json(&serde_json::to_string(&patched)?)?;
        let sub = out_dir.join(format!("point_{i:02}"));
        let manifest = run_scenario(&config, &sub)?;
        let mut summaries = Vec::new();
        for run in &manifest.runs {
            if run.diverged {
                continue;
            }
            let summary: AllocationSummary =
                serde_json::from_str(&fs::read_to_string(sub.join(&run.summary_path))?)?;
            summaries.push(summary);
        }
        if summaries.is_empty() {
            return Err(Error::Diagnostic(format!(
                "sweep point {i}: every run diverged"
            )));
        }
        let m = summaries[0].ebar.len();
        let n = summaries.len() as f64;
        let mean_ebar: Vec<f64> = (0..m)
            .map(|c| summaries.iter().map(|s| s.ebar[c]).sum::<f64>() / n)
            .collect();
        let mean_j = summaries.iter().map(|s| s.j).sum::<f64>() / n;
        let mean_nj = summaries
            .iter()
            .map(normalized_jaggedness)
            .sum::<f64>()
            / n;
        points.push(SweepPoint {
            value: v.clone(),
            out_dir: sub.to_string_lossy().into_owned(),
            mean_ebar,
            mean_j,
            mean_normalized_j: mean_nj,
            all_bounds_satisfied: manifest.all_bounds_satisfied,
            any_diverged: manifest.any_diverged,
        });
    }

    let mut sweep_reports = Vec::new();
    let (_, capset, _) = base.instance.generate(base.ensemble.base_seed)?;
    for assertion in &base.sweep_assertions {
        match assertion {
            SweepAssertion::EbarStrictlyIncreasing { capability } => {
                let idx = capset
                    .names()
                    .iter()
                    .position(|n| n == capability)
                    .ok_or_else(|| {
                        Error::config(format!("sweep assertion: unknown capability '{capability}'"))
                    })?;
                let series: Vec<f64> = points.iter().map(|p| p.mean_ebar[idx]).collect();
                let strict = series.windows(2).all(|w| w[1] > w[0]);
                let worst_step = series
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(f64::INFINITY, f64::min);
                sweep_reports.push(BoundReport {
                    name: format!("sweep_ebar_increasing[{capability}]"),
                    lhs: worst_step,
                    rhs: 0.0,
                    remainder_budget: 0.0,
                    satisfied: strict,
                    margin: worst_step,
                    steps_used: points.len(),
                    flagged_steps: 0,
                    applicable: true,
                });
            }
            SweepAssertion::JaggednessStrictlyDecreasing => {
                let series: Vec<f64> = points.iter().map(|p| p.mean_j).collect();
                let strict = series.windows(2).all(|w| w[1] < w[0]);
                let worst_step = series
                    .windows(2)
                    .map(|w| w[0] - w[1])
                    .fold(f64::INFINITY, f64::min);
                sweep_reports.push(BoundReport {
                    name: "sweep_j_decreasing".into(),
                    lhs: worst_step,
                    rhs: 0.0,
                    remainder_budget: 0.0,
                    satisfied: strict,
                    margin: worst_step,
                    steps_used: points.len(),
                    flagged_steps: 0,
                    applicable: true,
                });
            }
            SweepAssertion::FirstPointEbarAtMost { capability, value } => {
                let idx = capset
                    .names()
                    .iter()
                    .position(|n| n == capability)
                    .ok_or_else(|| {
                        Error::config(format!("sweep assertion: unknown capability '{capability}'"))
                    })?;
                let lhs = points.first().map(|p| p.mean_ebar[idx]).unwrap_or(f64::NAN);
                sweep_reports.push(BoundReport {
                    name: format!("sweep_first_ebar_max[{capability}]"),
                    lhs,
                    rhs: *value,
                    remainder_budget: 0.0,
                    satisfied: lhs <= *value,
                    margin: value - lhs,
                    steps_used: points.len(),
                    flagged_steps: 0,
                    applicable: true,
                });
            }
            SweepAssertion::LastPointEbarAtLeast { capability, value } => {
                let idx = capset
                    .names()
                    .iter()
                    .position(|n| n == capability)
                    .ok_or_else(|| {
                        Error::config(format!("sweep assertion: unknown capability '{capability}'"))
                    })?;
                let lhs = points.last().map(|p| p.mean_ebar[idx]).unwrap_or(f64::NAN);
                sweep_reports.push(BoundReport {
                    name: format!("sweep_last_ebar_min[{capability}]"),
                    lhs,
                    rhs: *value,
                    remainder_budget: 0.0,
                    satisfied: lhs >= *value,
                    margin: lhs - value,
                    steps_used: points.len(),
                    flagged_steps: 0,
                    applicable: true,
                });
            }
        }
    }

    let outcome = SweepOutcome {
        param: param.to_string(),
        all_satisfied: points.iter().all(|p| p.all_bounds_satisfied)
            && sweep_reports.iter().all(|r| r.satisfied),
        any_diverged: points.iter().any(|p| p.any_diverged),
        points,
        sweep_reports,
    };
    fs::write(
        out_dir.join("sweep.json"),
        serde_json::to_string_pretty(&outcome)?,
    )?;
    Ok(outcome)
}

/// Scaling study: runs the anisotropic scenario at each dimension, then an
/// isotropic control whose normalized jaggedness must collapse. Per-dimension
/// floors come from the config's assertions; the control's ceiling is fixed
/// here because symmetry makes it exact up to roundoff.
pub fn scaling_sweep(
    config: &ScenarioConfig,
    dims: &[usize],
    out_dir: &Path,
) -> Result<SweepOutcome> {
    if dims.is_empty() {
        return Err(Error::usage("scaling sweep needs at least one dimension"));
    }
    let values: Vec<serde_json::Value> = dims
        .iter()
        .map(|d| serde_json::Value::from(*d))
        .collect();
    let mut outcome = sweep_scenario(config, "instance.d", &values, out_dir)?;
    if dims.len() >= 2 {
        let mut iso = config.clone();
        iso.name = format!("{}-isotropic", config.name);
        if let config::InstanceSpec::ScalingAnisotropic { isotropic, .. } = &mut iso.instance {
            *isotropic = true;
        } else {
            return Err(Error::usage(
                "scaling sweep expects a scaling_anisotropic instance",
            ));
        }
        iso.assertions = vec![Assertion::NormalizedJaggednessAtMost { value: 1e-6 }];
        iso.sweep_assertions.clear();
        let iso_dir = out_dir.join("isotropic_control");
        let manifest = run_scenario(&iso, &iso_dir)?;
        let summary: AllocationSummary = serde_json::from_str(&fs::read_to_string(
            iso_dir.join(&manifest.runs[0].summary_path),
        )?)?;
        let nj = normalized_jaggedness(&summary);
        outcome.sweep_reports.push(BoundReport {
            name: "scaling_isotropic_control".into(),
            lhs: nj,
            rhs: 1e-6,
            remainder_budget: 0.0,
            satisfied: manifest.all_bounds_satisfied && !manifest.any_diverged,
            margin: 1e-6 - nj,
            steps_used: dims.len(),
            flagged_steps: 0,
            applicable: true,
        });
        outcome.all_satisfied &= manifest.all_bounds_satisfied && !manifest.any_diverged;
        outcome.any_diverged |= manifest.any_diverged;
        fs::write(
            out_dir.join("sweep.json"),
            serde_json::to_string_pretty(&outcome)?,
        )?;
    }
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// Report emission (SVG charts)
// ---------------------------------------------------------------------------

/// Renders the run-0 trace of a completed scenario into three SVG charts:
/// cumulative energy shares over time, capability gains over time, and the
/// jaggedness accumulation. Returns the written paths.
pub fn emit_report(out_dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = RunManifest::load(&out_dir.join("manifest.json"))?;
    let run = manifest
        .runs
        .iter()
        .find(|r| !r.diverged)
        .ok_or_else(|| Error::usage("emit_report: no completed run in manifest"))?;
    let config = ScenarioConfig::from_json(&fs::read_to_string(out_dir.join("config.json"))?)?;
    let trace = load_trace(&config, run, out_dir)?;

    let horizon = trace.horizon();
    let m = trace.num_capabilities();
    let names = trace.capability_names.clone();

    // Running cumulative shares Ebar_i(t) = W_i(t) / B(t).
    let mut ebar_series = vec![Vec::with_capacity(horizon); m];
    let mut w = vec![0.0; m];
    let mut b = 0.0;
    for step in &trace.steps {
        let flow = step.eta * step.grad_norm;
        b += flow;
        for i in 0..m {
            w[i] += flow * step.shares[i];
            ebar_series[i].push(if b > 1e-15 { w[i] / b } else { 1.0 / m as f64 });
        }
    }
    // Gains over time and jaggedness accumulation.
    let mut gain_series = vec![Vec::with_capacity(horizon); m];
    let mut j_series = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let gains = trace.gains_over_prefix(t);
        for i in 0..m {
            gain_series[i].push(gains[i]);
        }
        j_series.push(jaggedness(&gains)?);
    }

    let mut written = Vec::new();
    let ebar_svg = svg::line_chart(
        &format!("{}: cumulative energy shares", manifest.scenario),
        "Ebar_i(t)",
        &names
            .iter()
            .zip(&ebar_series)
            .map(|(n, v)| svg::Series {
                label: n,
                values: v,
            })
            .collect::<Vec<_>>(),
    );
    let p = out_dir.join("ebar_over_time.svg");
    fs::write(&p, ebar_svg)?;
    written.push(p);

    let gains_svg = svg::line_chart(
        &format!("{}: capability gains", manifest.scenario),
        "G_i(t)",
        &names
            .iter()
            .zip(&gain_series)
            .map(|(n, v)| svg::Series {
                label: n,
                values: v,
            })
            .collect::<Vec<_>>(),
    );
    let p = out_dir.join("gains_over_time.svg");
    fs::write(&p, gains_svg)?;
    written.push(p);

    let j_svg = svg::line_chart(
        &format!("{}: jaggedness accumulation", manifest.scenario),
        "J(t)",
        &[svg::Series {
            label: "J",
            values: &j_series,
        }],
    );
    let p = out_dir.join("jaggedness_over_time.svg");
    fs::write(&p, j_svg)?;
    written.push(p);
    Ok(written)
}

// ---------------------------------------------------------------------------
// Verification of recorded outputs
// ---------------------------------------------------------------------------

/// Rebuilds a trace from a run's CSV plus its summary and the scenario
/// config. Per-step iterates are not in the files, so curved-capability
/// checks that need them are skipped by the caller.
fn load_trace(config: &ScenarioConfig, run: &RunEntry, dir: &Path) -> Result<Trace> {
    let (_, capset, theta0) = config.instance.generate(run.seed)?;
    let names = capset.names();
    let csv = fs::read_to_string(dir.join(&run.trace_path))?;
    let steps = steps_from_csv(&csv, &names)?;
    let summary: AllocationSummary =
        serde_json::from_str(&fs::read_to_string(dir.join(&run.summary_path))?)?;
    let capability_values_final: Vec<f64> = steps[0]
        .capability_values
        .iter()
        .zip(&summary.g)
        .map(|(c0, g)| c0 + g)
        .collect();
    let m = names.len();
    let kappa_final = Matrix::from_rows(&summary.kappa).unwrap_or_else(|_| Matrix::identity(m));
    Ok(Trace {
        capability_names: names,
        theta_initial: theta0.clone(),
        theta_final: theta0,
        steps,
        capability_values_final,
        kappa_final,
        thetas: vec![],
        governed: config.trainer.governance.is_some(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub scenario: String,
    pub reports: Vec<(usize, Vec<BoundReport>)>,
    pub all_satisfied: bool,
    pub assumption_limited: bool,
}

/// Re-runs every applicable bound check against the recorded traces in a
/// scenario output directory.
pub fn verify_dir(dir: &Path) -> Result<VerifyOutcome> {
    let manifest = RunManifest::load(&dir.join("manifest.json"))?;
    let config = ScenarioConfig::from_json(&fs::read_to_string(dir.join("config.json"))?)?;
    let mut all = Vec::new();
    let mut all_satisfied = true;
    let mut assumption_limited = false;
    for run in &manifest.runs {
        if run.diverged {
            all_satisfied = false;
            continue;
        }
        let (objective, capset, _) = config.instance.generate(run.seed)?;
        let trace = load_trace(&config, run, dir)?;
        let summary = cumulative(&trace)?;
        // Checks that need per-step iterates only work for linear
        // capability sets when reloading from files.
        let mut effective = config.clone();
        if !capset.all_linear() {
            effective.checks.retain(|c| *c != CheckKind::Prop5);
        }
        let reports = evaluate_run(&effective, &trace, &capset, &objective, &summary)?;
        all_satisfied &= reports.iter().all(|r| r.satisfied);
        assumption_limited |= reports.iter().any(|r| r.is_assumption_limited());
        all.push((run.index, reports));
    }
    Ok(VerifyOutcome {
        scenario: manifest.scenario,
        reports: all,
        all_satisfied,
        assumption_limited,
    })
}
