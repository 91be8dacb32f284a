//! Built-in scenario presets with frozen oracle thresholds.
//!
//! Each preset is a complete scenario config; the numeric floors and
//! ceilings inside were measured from oracle runs and recorded in the
//! preset's `provenance` field rather than hard-coded in test logic.

use crate::capabilities::{Capability, CapabilitySet, LinearCapability};
use crate::error::{Error, Result};
use crate::interventions::AuxiliaryObjective;
use crate::numerics::{Matrix, Vector};
use crate::objectives::{BaseObjective, CompositeObjective, Objective, QuadraticObjective};

use super::config::ScenarioConfig;

pub const PRESET_NAMES: &[&str] = &[
    "toy-linear",
    "mismatch",
    "aux-lift",
    "var-reg",
    "governance",
    "coupling-family",
    "scaling",
    "ensemble-prediction1",
];

pub fn preset_json(name: &str) -> Option<&'static str> {
    match name {
        "toy-linear" => Some(include_str!("../../presets/toy_linear.json")),
        "mismatch" => Some(include_str!("../../presets/mismatch.json")),
        "aux-lift" => Some(include_str!("../../presets/aux_lift.json")),
        "var-reg" => Some(include_str!("../../presets/var_reg.json")),
        "governance" => Some(include_str!("../../presets/governance.json")),
        "coupling-family" => Some(include_str!("../../presets/coupling_family.json")),
        "scaling" => Some(include_str!("../../presets/scaling.json")),
        "ensemble-prediction1" => {
            Some(include_str!("../../presets/ensemble_prediction1.json"))
        }
        _ => None,
    }
}

pub fn load_preset(name: &str) -> Result<ScenarioConfig> {
    let json = preset_json(name).ok_or_else(|| {
        Error::usage(format!(
            "unknown preset '{name}' (available: {})",
            PRESET_NAMES.join(", ")
        ))
    })?;
    ScenarioConfig::from_json(json)
}

/// Baseline/treated pair for the redistribution-cost study at coupling
/// `kappa`: two capabilities at angle `acos(kappa)`, a base loss that feeds
/// the primary coordinate, and a treated arm that funds the coupled
/// capability through an auxiliary objective.
pub fn coupling_pair(kappa: f64) -> Result<(Objective, Objective, CapabilitySet)> {
    if !(-1.0..=1.0).contains(&kappa) {
        return Err(Error::usage("coupling kappa must lie in [-1, 1]"));
    }
    let w = Vector::new(vec![kappa, (1.0 - kappa * kappa).sqrt()])?;
    let capset = CapabilitySet::new(vec![
        Capability::Linear(LinearCapability::new(Vector::basis(2, 0), "primary")?),
        Capability::Linear(LinearCapability::new(w.clone(), "coupled")?),
    ])?;
    // The base loss rests the weak mode at zero so the auxiliary term is
    // the only source of motion along the coupled direction.
    let base = QuadraticObjective::new(
        Matrix::diagonal(&[3.0, 0.05])?,
        Vector::new(vec![1.0, 0.0])?,
    )?;
    let baseline = Objective::Quadratic(base.clone());
    let treated = Objective::Composite(CompositeObjective::new(
        BaseObjective::Quadratic(base),
        None,
        vec![AuxiliaryObjective::new(w, 1.0, 5.0)?],
    )?);
    Ok((baseline, treated, capset))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_validates() {
        for name in PRESET_NAMES {
            let config = load_preset(name).unwrap_or_else(|e| panic!("preset {name}: {e}"));
            assert_eq!(&config.name, name);
        }
    }

    #[test]
    fn unknown_preset_is_usage_error() {
        assert!(matches!(load_preset("nope"), Err(Error::Usage(_))));
    }

    #[test]
    fn coupling_pair_geometry() {
        let (_, _, capset) = coupling_pair(0.5).unwrap();
        let kappa = crate::telemetry::coupling_matrix(&capset, &Vector::zeros(2)).unwrap();
        assert!((kappa.get(0, 1) - 0.5).abs() < 1e-12);
    }
}
