//! Redistribution and control mechanisms: the energy-variance regularizer,
//! auxiliary capability objectives, and the governance operator that caps or
//! floors per-step energy shares.
//!
//! ## Variance regularizer
//!
//! The penalty is `lambda * Var(E_1(theta), ..., E_m(theta))`, where the
//! shares are computed from the *base* loss gradient with a smoothed
//! absolute value `|x|_eps = sqrt(x^2 + eps_s^2)` so the allocation map is
//! differentiable. Telemetry keeps the exact `|.|`; only the regularizer
//! smooths. Differentiating the shares requires second-order information
//! through the loss gradient, so the closed form is restricted to the
//! quadratic-loss / linear-capability family, where each projection
//! `p_i(theta) = u_i . grad L(theta)` is affine with constant direction
//! `A^T A u_i`. Other families raise an unsupported-family error.
//!
//! ## Governance
//!
//! A policy holds per-capability share caps and floors. Applying it
//! decomposes the update direction over the capability-gradient span,
//! rescales coefficient magnitudes until the achieved shares (recomputed
//! from the reassembled direction's projections) satisfy the constraints,
//! and passes the out-of-span residual through untouched. Constraints are
//! processed simultaneously each iteration, so the operator is
//! deterministic and order-independent.

use serde::{Deserialize, Serialize};

use crate::capabilities::CapabilitySet;
use crate::error::{Error, Result};
use crate::numerics::{dot, dot_slices, norm, Vector};
use crate::objectives::{BaseObjective, QuadraticObjective};
use crate::telemetry::energy_shares;

/// Share-constraint tolerance for the governance fixed point.
pub const GOVERNANCE_TOL: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Variance regularizer
// ---------------------------------------------------------------------------

/// `lambda * Var(E(theta))` with smoothed shares.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceRegularizer {
    lambda: f64,
    capset: CapabilitySet,
    #[serde(default = "default_smoothing")]
    eps_s: f64,
}

fn default_smoothing() -> f64 {
    1e-6
}

impl VarianceRegularizer {
    pub fn new(lambda: f64, capset: CapabilitySet, eps_s: f64) -> Result<Self> {
        if lambda < 0.0 {
            return Err(Error::usage("variance regularizer lambda must be >= 0"));
        }
        if eps_s <= 0.0 {
            return Err(Error::usage("variance smoothing eps_s must be > 0"));
        }
        Ok(VarianceRegularizer {
            lambda,
            capset,
            eps_s,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn capset(&self) -> &CapabilitySet {
        &self.capset
    }

    pub fn eps_s(&self) -> f64 {
        self.eps_s
    }

    /// Penalty value and gradient at `theta`, via [`variance_penalty`].
    pub fn penalty(&self, base: &BaseObjective, theta: &Vector) -> Result<(f64, Vector)> {
        let quad = supported_base(base)?;
        variance_penalty_quadratic(self, quad, theta)
    }

    /// Worst-case curvature of the penalty, chaining bounds at the edge of
    /// the smoothing band (`s_k >= eps_s`, `S >= m * eps_s`). Deliberately
    /// loose; it exists so the composite's Lipschitz bound stays a bound.
    pub fn curvature_bound(&self, base: &BaseObjective) -> f64 {
        let quad = match base {
            BaseObjective::Quadratic(q) => q,
            _ => return f64::INFINITY,
        };
        let m = self.capset.len() as f64;
        let w_frob_sq: f64 = match self.capset.gradients(&Vector::zeros(self.capset.dim())) {
            Ok(grads) => grads
                .iter()
                .map(|u| {
                    let w = quad.normal_matvec(u);
                    dot(&w, &w).unwrap_or(0.0)
                })
                .sum(),
            Err(_) => return f64::INFINITY,
        };
        self.lambda * 18.0 * w_frob_sq / (m * m * self.eps_s * self.eps_s)
    }
}

fn supported_base(base: &BaseObjective) -> Result<&QuadraticObjective> {
    match base {
        BaseObjective::Quadratic(q) => Ok(q),
        other => Err(Error::Unsupported(format!(
            "variance penalty has a closed-form gradient only for quadratic losses \
             with linear capabilities; got a {} base",
            match other {
                BaseObjective::Quadratic(_) => unreachable!(),
                BaseObjective::Mismatch(_) => "mismatch",
                BaseObjective::TanhRegression(_) => "tanh regression",
            }
        ))),
    }
}

/// Penalty value and analytic gradient for the quadratic / linear family.
///
/// Chain: `theta -> p_i = u_i . grad L` (affine, direction `A^T A u_i`),
/// `p -> s_i = sqrt(p_i^2 + eps^2)`, `s -> E_i = s_i / S`, `E -> Var`.
pub fn variance_penalty(
    reg: &VarianceRegularizer,
    objective: &crate::objectives::Objective,
    theta: &Vector,
) -> Result<(f64, Vector)> {
    let base = match objective {
        crate::objectives::Objective::Quadratic(q) => {
            return variance_penalty_quadratic(reg, q, theta)
        }
        crate::objectives::Objective::Composite(c) => c.base(),
        crate::objectives::Objective::Mismatch(_) => {
            return Err(Error::Unsupported(
                "variance penalty: mismatch losses are not in the closed-form family".into(),
            ))
        }
        crate::objectives::Objective::TanhRegression(_) => {
            return Err(Error::Unsupported(
                "variance penalty: tanh losses are not in the closed-form family".into(),
            ))
        }
    };
    let quad = supported_base(base)?;
    variance_penalty_quadratic(reg, quad, theta)
}

fn variance_penalty_quadratic(
    reg: &VarianceRegularizer,
    quad: &QuadraticObjective,
    theta: &Vector,
) -> Result<(f64, Vector)> {
    let d = theta.dim();
    if !reg.capset.all_linear() {
        return Err(Error::Unsupported(
            "variance penalty: all capabilities must be linear".into(),
        ));
    }
    if reg.lambda == 0.0 {
        return Ok((0.0, Vector::zeros(d)));
    }
    let m = reg.capset.len();
    let g_base = quad.gradient(theta)?;
    let dirs = reg.capset.gradients(theta)?;

    let p: Vec<f64> = dirs
        .iter()
        .map(|u| dot(u, &g_base))
        .collect::<Result<_>>()?;
    let eps = reg.eps_s;
    let s: Vec<f64> = p.iter().map(|x| (x * x + eps * eps).sqrt()).collect();
    let total: f64 = s.iter().sum();
    let shares: Vec<f64> = s.iter().map(|x| x / total).collect();

    let mean = 1.0 / m as f64;
    let var: f64 = shares.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / m as f64;
    let value = reg.lambda * var;

    // d Var / d E_i = (2/m)(E_i - mean); d E_i / d s_k = (delta_ik - E_i)/S;
    // d s_k / d p_k = p_k / s_k; d p_k / d theta = A^T A u_k.
    let dvar_de: Vec<f64> = shares.iter().map(|e| 2.0 * (e - mean) / m as f64).collect();
    let mut gradient = Vector::zeros(d);
    for k in 0..m {
        let mut inner = 0.0;
        for i in 0..m {
            let delta = if i == k { 1.0 } else { 0.0 };
            inner += dvar_de[i] * (delta - shares[i]) / total;
        }
        let chain = reg.lambda * inner * (p[k] / s[k]);
        if chain != 0.0 {
            let w_k = quad.normal_matvec(&dirs[k]);
            gradient = gradient.add_scaled(chain, &w_k);
        }
    }
    Ok((value, gradient))
}

/// `|| grad L(theta) + lambda grad Var(E(theta)) ||`: zero exactly at the
/// stationary points Proposition-style balance requires.
pub fn stationarity_residual(
    reg: &VarianceRegularizer,
    objective: &crate::objectives::Objective,
    theta: &Vector,
) -> Result<f64> {
    let (_, reg_grad) = variance_penalty(reg, objective, theta)?;
    let g = objective.base_gradient(theta)?;
    Ok(norm(&g.add_scaled(1.0, &reg_grad)))
}

/// Reports whether `theta` counts as stationary for the composite:
/// residual at or below `1e-6 * (1 + ||grad L||)`.
pub fn is_stationary(
    reg: &VarianceRegularizer,
    objective: &crate::objectives::Objective,
    theta: &Vector,
) -> Result<bool> {
    let residual = stationarity_residual(reg, objective, theta)?;
    let g = objective.base_gradient(theta)?;
    Ok(residual <= 1e-6 * (1.0 + norm(&g)))
}

// ---------------------------------------------------------------------------
// Auxiliary objectives
// ---------------------------------------------------------------------------

/// `L_aux(theta) = 1/2 (v . theta - c)^2` with a unit direction `v` and a
/// weight `gamma` applied by the composite. An auxiliary term creates a
/// direct gradient for a capability the base loss neglects.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuxiliaryObjective {
    direction: Vector,
    target: f64,
    weight: f64,
}

impl AuxiliaryObjective {
    pub fn new(direction: Vector, target: f64, weight: f64) -> Result<Self> {
        let n = norm(&direction);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::usage(format!(
                "auxiliary direction must be unit norm (got {n})"
            )));
        }
        if weight < 0.0 {
            return Err(Error::usage("auxiliary weight must be >= 0"));
        }
        Ok(AuxiliaryObjective {
            direction,
            target,
            weight,
        })
    }

    pub fn dim(&self) -> usize {
        self.direction.dim()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn unweighted_loss(&self, theta: &Vector) -> Result<f64> {
        let r = dot(&self.direction, theta)? - self.target;
        Ok(0.5 * r * r)
    }

    pub fn unweighted_gradient(&self, theta: &Vector) -> Result<Vector> {
        let r = dot(&self.direction, theta)? - self.target;
        Ok(self.direction.scale(r))
    }

    pub fn weighted_loss(&self, theta: &Vector) -> Result<f64> {
        Ok(self.weight * self.unweighted_loss(theta)?)
    }

    pub fn weighted_gradient(&self, theta: &Vector) -> Result<Vector> {
        Ok(self.unweighted_gradient(theta)?.scale(self.weight))
    }
}

// ---------------------------------------------------------------------------
// Governance
// ---------------------------------------------------------------------------

/// Per-capability share caps and floors. Feasibility requires the floors to
/// sum to at most 1 and the caps to sum to at least 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GovernancePolicy {
    /// Upper bounds on achieved shares, in `(0, 1]`.
    pub caps: Vec<f64>,
    /// Lower bounds on achieved shares, in `[0, 1)`.
    pub floors: Vec<f64>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_max_iterations() -> usize {
    100
}

impl GovernancePolicy {
    /// Policy with no active constraints (caps 1, floors 0).
    pub fn trivial(m: usize) -> Self {
        GovernancePolicy {
            caps: vec![1.0; m],
            floors: vec![0.0; m],
            max_iterations: default_max_iterations(),
        }
    }

    /// Trivial policy with a single cap on coordinate `i`.
    pub fn with_cap(m: usize, i: usize, cap: f64) -> Self {
        let mut p = GovernancePolicy::trivial(m);
        p.caps[i] = cap;
        p
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.caps.len() != m || self.floors.len() != m {
            return Err(Error::usage(format!(
                "policy must provide {m} caps and floors"
            )));
        }
        if self.caps.iter().any(|&c| !(0.0..=1.0).contains(&c) || c == 0.0) {
            return Err(Error::usage("caps must lie in (0, 1]"));
        }
        if self.floors.iter().any(|&f| !(0.0..1.0).contains(&f)) {
            return Err(Error::usage("floors must lie in [0, 1)"));
        }
        if self
            .floors
            .iter()
            .zip(&self.caps)
            .any(|(f, c)| f > c)
        {
            return Err(Error::usage("each floor must not exceed its cap"));
        }
        let floor_sum: f64 = self.floors.iter().sum();
        let cap_sum: f64 = self.caps.iter().sum();
        if floor_sum > 1.0 + 1e-12 {
            return Err(Error::usage(format!(
                "infeasible policy: floors sum to {floor_sum} > 1"
            )));
        }
        if cap_sum < 1.0 - 1e-12 {
            return Err(Error::usage(format!(
                "infeasible policy: caps sum to {cap_sum} < 1"
            )));
        }
        Ok(())
    }

    pub fn is_trivial(&self) -> bool {
        self.caps.iter().all(|&c| c >= 1.0) && self.floors.iter().all(|&f| f <= 0.0)
    }

    pub fn satisfied_by(&self, shares: &[f64], tol: f64) -> bool {
        shares
            .iter()
            .zip(self.caps.iter().zip(&self.floors))
            .all(|(&s, (&c, &f))| s <= c + tol && s >= f - tol)
    }
}

/// Projects a share vector onto the box-constrained simplex: clip above
/// caps, lift below floors, rescale unconstrained coordinates proportionally
/// so the total returns to 1, repeating until the clamp set stabilizes.
/// Terminates in at most `m + 1` passes because each rescale either finishes
/// or pins one more coordinate at a bound.
fn project_shares(shares: &[f64], policy: &GovernancePolicy) -> Vec<f64> {
    let m = shares.len();
    let clamp = |t: &mut [f64]| {
        for i in 0..m {
            t[i] = t[i].clamp(policy.floors[i], policy.caps[i]);
        }
    };
    let mut t = shares.to_vec();
    clamp(&mut t);
    for _ in 0..=m {
        let total: f64 = t.iter().sum();
        if (total - 1.0).abs() <= 1e-12 {
            break;
        }
        if total > 1.0 {
            // Shrink coordinates that still sit above their floor.
            let free: Vec<usize> = (0..m)
                .filter(|&i| t[i] > policy.floors[i] + 1e-15)
                .collect();
            let pinned_mass: f64 = (0..m)
                .filter(|i| !free.contains(i))
                .map(|i| t[i])
                .sum();
            let free_mass: f64 = free.iter().map(|&i| t[i]).sum();
            if free_mass <= 0.0 {
                break;
            }
            let k = (1.0 - pinned_mass) / free_mass;
            for &i in &free {
                t[i] *= k;
            }
        } else {
            // Grow coordinates that still sit below their cap.
            let free: Vec<usize> = (0..m)
                .filter(|&i| t[i] < policy.caps[i] - 1e-15)
                .collect();
            if free.is_empty() {
                break;
            }
            let pinned_mass: f64 = (0..m)
                .filter(|i| !free.contains(i))
                .map(|i| t[i])
                .sum();
            let free_mass: f64 = free.iter().map(|&i| t[i]).sum();
            if free_mass <= 0.0 {
                let fill = (1.0 - pinned_mass) / free.len() as f64;
                for &i in &free {
                    t[i] = fill;
                }
            } else {
                let k = (1.0 - pinned_mass) / free_mass;
                for &i in &free {
                    t[i] *= k;
                }
            }
        }
        clamp(&mut t);
    }
    t
}

/// Applies a governance policy to an update direction.
///
/// Returns the controlled direction and the achieved shares. A trivial
/// policy, or one the raw shares already satisfy, returns `g` unchanged
/// (bit for bit), so an inactive controller cannot perturb a trace.
pub fn apply_governance(
    policy: &GovernancePolicy,
    capset: &CapabilitySet,
    theta: &Vector,
    g: &Vector,
) -> Result<(Vector, Vec<f64>)> {
    let m = capset.len();
    policy.validate(m)?;

    let grads = capset.gradients(theta)?;
    let raw_p: Vec<f64> = grads.iter().map(|u| dot_slices(u.as_slice(), g.as_slice())).collect();
    let raw_shares = energy_shares(&raw_p)?;
    if policy.is_trivial() || policy.satisfied_by(&raw_shares, GOVERNANCE_TOL) {
        return Ok((g.clone(), raw_shares));
    }

    let (coeffs, residual) = crate::telemetry::decompose_gradient(capset, theta, g)?;
    let mut a: Vec<f64> = coeffs.as_slice().to_vec();
    let scale: f64 = raw_p.iter().map(|p| p.abs()).sum();

    let mut last_shares = raw_shares;
    for _ in 0..policy.max_iterations {
        let mut controlled = residual.clone();
        for (aj, grad) in a.iter().zip(&grads) {
            controlled = controlled.add_scaled(*aj, grad);
        }
        let p: Vec<f64> = grads
            .iter()
            .map(|u| dot_slices(u.as_slice(), controlled.as_slice()))
            .collect();
        let shares = energy_shares(&p)?;
        if policy.satisfied_by(&shares, GOVERNANCE_TOL) {
            return Ok((controlled, shares));
        }
        let target = project_shares(&shares, policy);
        for j in 0..m {
            if a[j].abs() < 1e-300 || shares[j] < 1e-300 {
                // Nothing to rescale: seed a component along the capability.
                // The negative sign funds it, since a step along -g yields
                // the gain -eta * p_j.
                let nsq = dot_slices(grads[j].as_slice(), grads[j].as_slice());
                a[j] = if nsq > 0.0 {
                    -(target[j] * scale) / nsq
                } else {
                    0.0
                };
            } else {
                a[j] *= target[j] / shares[j];
            }
        }
        last_shares = shares;
    }

    let mut last = residual;
    for (aj, grad) in a.iter().zip(&grads) {
        last = last.add_scaled(*aj, grad);
    }
    let violation = last_shares
        .iter()
        .enumerate()
        .map(|(i, &s)| (s - policy.caps[i]).max(policy.floors[i] - s).max(0.0))
        .fold(0.0, f64::max);
    Err(Error::GovernanceStall {
        iterations: policy.max_iterations,
        violation,
        last_shares,
        last_direction: last.into(),
    })
}

/// Per-step first-order gain cap `eta * (delta + epsilon * M)` under
/// objective mismatch.
pub fn underinvestment_cap(delta: f64, epsilon: f64, m_bound: f64, eta: f64) -> Result<f64> {
    if delta < 0.0 || epsilon < 0.0 || m_bound < 0.0 || eta < 0.0 {
        return Err(Error::usage("underinvestment_cap: all inputs must be >= 0"));
    }
    Ok(eta * (delta + epsilon * m_bound))
}
