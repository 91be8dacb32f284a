//! Deterministic gradient descent with full telemetry.
//!
//! Each step computes the loss gradient, optionally routes it through the
//! governance operator, records the measurement layer (projections, shares,
//! span decomposition, capability values), and advances the parameters. A
//! run is a pure function of its inputs: same configuration, objective,
//! capability set and start point give a bit-identical trace.

use serde::{Deserialize, Serialize};

use crate::capabilities::CapabilitySet;
use crate::error::{Error, Result};
use crate::interventions::{apply_governance, GovernancePolicy};
use crate::numerics::{dot_slices, norm, Vector};
use crate::objectives::Objective;
use crate::telemetry::{
    coupling_matrix, decompose_gradient, energy_shares, StepRecord, Trace, ALIGNMENT_FLAG_TOL,
};

/// Hard cap on the training horizon.
pub const MAX_HORIZON: usize = 10_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaSchedule {
    Constant(f64),
    /// `eta_0 * decay^t` with `decay` in `(0, 1]`.
    Geometric { eta0: f64, decay: f64 },
}

impl EtaSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            EtaSchedule::Constant(eta) if *eta > 0.0 => Ok(()),
            EtaSchedule::Geometric { eta0, decay }
                if *eta0 > 0.0 && *decay > 0.0 && *decay <= 1.0 =>
            {
                Ok(())
            }
            _ => Err(Error::usage(
                "eta schedule needs eta > 0 and decay in (0, 1]",
            )),
        }
    }

    pub fn at(&self, t: usize) -> f64 {
        match self {
            EtaSchedule::Constant(eta) => *eta,
            EtaSchedule::Geometric { eta0, decay } => eta0 * decay.powi(t as i32),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainerConfig {
    /// Training horizon `T >= 1`.
    pub horizon: usize,
    /// Step-size schedule; `None` falls back to a constant
    /// `0.5 / lipschitz_bound(objective)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<EtaSchedule>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub governance: Option<GovernancePolicy>,
    /// Record the coupling matrix every `k` steps; `0` records it only at
    /// the final point.
    #[serde(default)]
    pub record_coupling_every: usize,
}

impl TrainerConfig {
    pub fn new(horizon: usize) -> Self {
        TrainerConfig {
            horizon,
            eta: None,
            seed: 0,
            governance: None,
            record_coupling_every: 0,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(EtaSchedule::Constant(eta));
        self
    }

    pub fn with_governance(mut self, policy: GovernancePolicy) -> Self {
        self.governance = Some(policy);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::usage("horizon must be at least 1"));
        }
        if self.horizon > MAX_HORIZON {
            return Err(Error::usage(format!("horizon is capped at {MAX_HORIZON}")));
        }
        if let Some(eta) = &self.eta {
            eta.validate()?;
        }
        Ok(())
    }

    /// Resolves the schedule, falling back to `0.5 / L`.
    pub fn schedule(&self, objective: &Objective) -> Result<EtaSchedule> {
        match &self.eta {
            Some(s) => Ok(s.clone()),
            None => {
                let l = objective.lipschitz_bound();
                if !(l.is_finite() && l > 0.0) {
                    return Err(Error::usage(
                        "cannot derive a default step size: objective Lipschitz bound \
                         is zero or unbounded; set eta explicitly",
                    ));
                }
                Ok(EtaSchedule::Constant(0.5 / l))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainerState {
    pub theta: Vector,
    pub t: usize,
}

/// One gradient step with telemetry. Returns the advanced state and the
/// record of what the step measured and applied.
pub fn step(
    state: &TrainerState,
    objective: &Objective,
    capset: &CapabilitySet,
    policy: Option<&GovernancePolicy>,
    eta: f64,
) -> Result<(TrainerState, StepRecord)> {
    let theta = &state.theta;
    let t = state.t;
    let g = objective.gradient(theta)?;
    if !g.is_finite() {
        return Err(Error::Diverged {
            step: t,
            detail: format!("non-finite gradient at theta = {:?}", theta.as_slice()),
        });
    }

    let grads = capset.gradients(theta)?;
    let raw_projections: Vec<f64> = grads
        .iter()
        .map(|u| dot_slices(u.as_slice(), g.as_slice()))
        .collect();

    // Measure raw first, then control.
    let (applied, raw_extra) = match policy {
        Some(p) => {
            let (controlled, _) = apply_governance(p, capset, theta, &g)?;
            let raw_shares = energy_shares(&raw_projections)?;
            (controlled, Some((raw_projections.clone(), raw_shares)))
        }
        None => (g, None),
    };

    let projections: Vec<f64> = if raw_extra.is_some() {
        grads
            .iter()
            .map(|u| dot_slices(u.as_slice(), applied.as_slice()))
            .collect()
    } else {
        raw_projections
    };
    let shares = energy_shares(&projections)?;
    let (coeffs, residual) = decompose_gradient(capset, theta, &applied)?;
    let capability_values = capset.values(theta)?;

    let mismatch = objective.as_mismatch().map(|mm| {
        let (gp, gs) = mm
            .component_gradients(theta)
            .expect("component dims match by construction");
        let prox: Vec<f64> = grads
            .iter()
            .map(|u| dot_slices(u.as_slice(), gp.as_slice()))
            .collect();
        let structural: Vec<f64> = grads
            .iter()
            .map(|u| dot_slices(u.as_slice(), gs.as_slice()))
            .collect();
        (prox, structural)
    });

    let flagged = projections.iter().any(|&p| -p < ALIGNMENT_FLAG_TOL);

    let record = StepRecord {
        t,
        eta,
        grad_norm: norm(&applied),
        projections,
        shares,
        coeffs: coeffs.into(),
        residual_norm: norm(&residual),
        capability_values,
        raw_projections: raw_extra.as_ref().map(|(p, _)| p.clone()),
        raw_shares: raw_extra.map(|(_, s)| s),
        mismatch_prox_projections: mismatch.as_ref().map(|(p, _)| p.clone()),
        mismatch_struct_projections: mismatch.map(|(_, s)| s),
        coupling: None,
        flagged,
    };

    let next_theta = theta.add_scaled(-eta, &applied);
    if !next_theta.is_finite() {
        return Err(Error::Diverged {
            step: t,
            detail: format!(
                "non-finite iterate after update from theta = {:?}",
                theta.as_slice()
            ),
        });
    }
    Ok((
        TrainerState {
            theta: next_theta,
            t: t + 1,
        },
        record,
    ))
}

/// Runs `T` sequential steps from `theta_0` and assembles the trace.
pub fn run(
    config: &TrainerConfig,
    objective: &Objective,
    capset: &CapabilitySet,
    theta0: &Vector,
) -> Result<Trace> {
    config.validate()?;
    if theta0.dim() != objective.dim() {
        return Err(Error::usage(format!(
            "theta_0 has dimension {}, objective expects {}",
            theta0.dim(),
            objective.dim()
        )));
    }
    if capset.dim() != objective.dim() {
        return Err(Error::usage(
            "capability set dimension does not match the objective",
        ));
    }
    if let Some(p) = &config.governance {
        p.validate(capset.len())?;
    }
    let schedule = config.schedule(objective)?;

    let mut state = TrainerState {
        theta: theta0.clone(),
        t: 0,
    };
    let mut steps = Vec::with_capacity(config.horizon);
    let mut thetas = Vec::with_capacity(config.horizon);
    for t in 0..config.horizon {
        thetas.push(state.theta.clone());
        let eta = schedule.at(t);
        let (next, mut record) =
            step(&state, objective, capset, config.governance.as_ref(), eta)?;
        if config.record_coupling_every > 0 && t % config.record_coupling_every == 0 {
            record.coupling = Some(coupling_matrix(capset, &state.theta)?);
        }
        steps.push(record);
        state = next;
    }
    let capability_values_final = capset.values(&state.theta)?;
    let kappa_final = coupling_matrix(capset, &state.theta)?;
    Ok(Trace {
        capability_names: capset.names(),
        theta_initial: theta0.clone(),
        theta_final: state.theta,
        steps,
        capability_values_final,
        kappa_final,
        thetas,
        governed: config.governance.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capabilities::{Capability, LinearCapability};
    use crate::numerics::Matrix;
    use crate::objectives::QuadraticObjective;
    use crate::telemetry::{cumulative, trace_to_csv};

    fn anisotropic() -> (Objective, CapabilitySet) {
        let obj = Objective::Quadratic(
            QuadraticObjective::new(
                Matrix::diagonal(&[3.0, 0.1]).unwrap(),
                Vector::new(vec![1.0, 1.0]).unwrap(),
            )
            .unwrap(),
        );
        let capset = CapabilitySet::new(vec![
            Capability::Linear(LinearCapability::new(Vector::basis(2, 0), "u").unwrap()),
            Capability::Linear(LinearCapability::new(Vector::basis(2, 1), "v").unwrap()),
        ])
        .unwrap();
        (obj, capset)
    }

    #[test]
    fn single_step_hand_values() {
        let (obj, capset) = anisotropic();
        let state = TrainerState {
            theta: Vector::zeros(2),
            t: 0,
        };
        let (next, record) = step(&state, &obj, &capset, None, 0.05).unwrap();
        // g = A^T(A*0 - b) = (-3, -0.1), so theta_1 = (0.15, 0.005).
        assert!((next.theta.get(0) - 0.15).abs() < 1e-15);
        assert!((next.theta.get(1) - 0.005).abs() < 1e-15);
        assert!((record.shares[0] - 3.0 / 3.1).abs() < 1e-12);
        assert!(!record.flagged);
    }

    #[test]
    fn zero_gradient_leaves_theta_in_place() {
        let (obj, capset) = anisotropic();
        let theta_star = Vector::new(vec![1.0 / 3.0, 10.0]).unwrap();
        let state = TrainerState {
            theta: theta_star.clone(),
            t: 0,
        };
        let (next, record) = step(&state, &obj, &capset, None, 0.05).unwrap();
        assert!(norm(&next.theta.sub(&theta_star)) < 1e-12);
        assert_eq!(record.shares, vec![0.5, 0.5]);
    }

    #[test]
    fn identity_governance_matches_ungoverned_bitwise() {
        let (obj, capset) = anisotropic();
        let trivial = GovernancePolicy::trivial(2);
        let state = TrainerState {
            theta: Vector::zeros(2),
            t: 0,
        };
        let (plain, rec_plain) = step(&state, &obj, &capset, None, 0.05).unwrap();
        let (gov, rec_gov) = step(&state, &obj, &capset, Some(&trivial), 0.05).unwrap();
        assert_eq!(plain.theta, gov.theta);
        assert_eq!(rec_plain.projections, rec_gov.projections);
        assert_eq!(rec_plain.shares, rec_gov.shares);
    }

    #[test]
    fn run_composes_steps_and_is_deterministic() {
        let (obj, capset) = anisotropic();
        let config = TrainerConfig::new(1).with_eta(0.05);
        let trace = run(&config, &obj, &capset, &Vector::zeros(2)).unwrap();
        assert!((trace.theta_final.get(0) - 0.15).abs() < 1e-15);
        assert!((trace.theta_final.get(1) - 0.005).abs() < 1e-15);

        let config = TrainerConfig::new(200).with_eta(0.05);
        let a = run(&config, &obj, &capset, &Vector::zeros(2)).unwrap();
        let b = run(&config, &obj, &capset, &Vector::zeros(2)).unwrap();
        assert_eq!(trace_to_csv(&a), trace_to_csv(&b));
    }

    #[test]
    fn update_identity_holds_per_step() {
        let (obj, capset) = anisotropic();
        let config = TrainerConfig::new(50).with_eta(0.05);
        let trace = run(&config, &obj, &capset, &Vector::zeros(2)).unwrap();
        for (t, step) in trace.steps.iter().enumerate() {
            let here = &trace.thetas[t];
            let next = if t + 1 < trace.thetas.len() {
                &trace.thetas[t + 1]
            } else {
                &trace.theta_final
            };
            let motion = norm(&next.sub(here));
            assert!(
                (motion - step.eta * step.grad_norm).abs() <= 1e-12 * (1.0 + motion),
                "step {t}"
            );
        }
    }

    #[test]
    fn loss_monotone_under_stable_step() {
        let (obj, capset) = anisotropic();
        let eta = 1.0 / obj.lipschitz_bound();
        let config = TrainerConfig::new(100).with_eta(eta);
        let trace = run(&config, &obj, &capset, &Vector::zeros(2)).unwrap();
        let mut last = obj.loss(&trace.theta_initial).unwrap();
        for theta in trace.thetas.iter().skip(1).chain([&trace.theta_final]) {
            let l = obj.loss(theta).unwrap();
            assert!(l <= last * (1.0 + 1e-12));
            last = l;
        }
    }

    #[test]
    fn anisotropic_run_summary_shape() {
        let (obj, capset) = anisotropic();
        let config = TrainerConfig::new(200).with_eta(0.05);
        let trace = run(&config, &obj, &capset, &Vector::zeros(2)).unwrap();
        let summary = cumulative(&trace).unwrap();
        // Budget conservation.
        assert!(
            (summary.w.iter().sum::<f64>() - summary.b_t).abs() <= 1e-9 * summary.b_t
        );
        // First-step concentration is on u even though the long-horizon
        // weight migrates to the slow coordinate.
        assert!(trace.steps[0].shares[0] > 0.9);
        assert!(summary.j > 0.05, "J = {}", summary.j);
    }

    #[test]
    fn geometric_schedule_decays() {
        let s = EtaSchedule::Geometric {
            eta0: 0.1,
            decay: 0.5,
        };
        assert_eq!(s.at(0), 0.1);
        assert_eq!(s.at(2), 0.025);
        assert!(EtaSchedule::Geometric {
            eta0: 0.1,
            decay: 1.5
        }
        .validate()
        .is_err());
    }

    #[test]
    fn bad_configs_rejected() {
        let (obj, capset) = anisotropic();
        let config = TrainerConfig::new(0);
        assert!(run(&config, &obj, &capset, &Vector::zeros(2)).is_err());
        let config = TrainerConfig::new(1);
        assert!(run(&config, &obj, &capset, &Vector::zeros(3)).is_err());
    }
}
