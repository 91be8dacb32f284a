//! Training losses with exact gradient oracles.
//!
//! Four families: a quadratic loss `1/2 ||A theta - b||^2`, a mismatch
//! mixture `L_prox + epsilon * L_struct` of two quadratics, a tanh feature
//! regression (the one nonlinear loss, so the smoothness machinery gets
//! exercised beyond affine gradients), and a composite that adds an
//! energy-variance penalty and weighted auxiliary terms on top of a base.
//!
//! All losses are deterministic full-batch functions; gradients are closed
//! form, which is what lets the verifier treat first-order accounting as
//! exact rather than estimated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interventions::{AuxiliaryObjective, VarianceRegularizer};
use crate::numerics::{dot, max_eig_ata, Matrix, Vector};

/// `L(theta) = 1/2 ||A theta - b||^2`, gradient `A^T (A theta - b)`,
/// gradient Lipschitz constant `lambda_max(A^T A)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadraticObjective {
    a: Matrix,
    b: Vector,
}

impl QuadraticObjective {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        if a.rows() != b.dim() {
            return Err(Error::usage(format!(
                "quadratic objective: A has {} rows but b has dimension {}",
                a.rows(),
                b.dim()
            )));
        }
        Ok(QuadraticObjective { a, b })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn offset(&self) -> &Vector {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn loss(&self, theta: &Vector) -> Result<f64> {
        self.check_dim(theta)?;
        let r = self.a.matvec(theta).sub(&self.b);
        Ok(0.5 * dot(&r, &r)?)
    }

    pub fn gradient(&self, theta: &Vector) -> Result<Vector> {
        self.check_dim(theta)?;
        let r = self.a.matvec(theta).sub(&self.b);
        Ok(self.a.transpose_matvec(&r))
    }

    pub fn lipschitz_bound(&self) -> f64 {
        max_eig_ata(&self.a)
    }

    /// `A^T A u`, the gradient of `theta -> u . grad L(theta)`. Used by the
    /// variance regularizer, whose chain rule runs through these affine maps.
    pub(crate) fn normal_matvec(&self, u: &Vector) -> Vector {
        self.a.transpose_matvec(&self.a.matvec(u))
    }

    fn check_dim(&self, theta: &Vector) -> Result<()> {
        if theta.dim() != self.dim() {
            return Err(Error::usage(format!(
                "quadratic objective expects dimension {}, got {}",
                self.dim(),
                theta.dim()
            )));
        }
        Ok(())
    }
}

/// `L = L_prox + epsilon * L_struct`: a dominant short-horizon term plus a
/// small-coefficient structural term. The small coefficient is what starves
/// structurally aligned capabilities of gradient energy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MismatchObjective {
    prox: QuadraticObjective,
    structural: QuadraticObjective,
    epsilon: f64,
}

impl MismatchObjective {
    pub fn new(prox: QuadraticObjective, structural: QuadraticObjective, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::usage("mismatch epsilon must lie in [0, 1]"));
        }
        if prox.dim() != structural.dim() {
            return Err(Error::usage(
                "mismatch components must share the parameter dimension",
            ));
        }
        Ok(MismatchObjective {
            prox,
            structural,
            epsilon,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.prox.dim()
    }

    pub fn loss(&self, theta: &Vector) -> Result<f64> {
        Ok(self.prox.loss(theta)? + self.epsilon * self.structural.loss(theta)?)
    }

    pub fn gradient(&self, theta: &Vector) -> Result<Vector> {
        let gp = self.prox.gradient(theta)?;
        let gs = self.structural.gradient(theta)?;
        Ok(gp.add_scaled(self.epsilon, &gs))
    }

    /// Component gradients `(grad L_prox, grad L_struct)`, unweighted.
    /// The trainer records their capability projections so the mismatch
    /// bound can be checked against measured constants.
    pub fn component_gradients(&self, theta: &Vector) -> Result<(Vector, Vector)> {
        Ok((self.prox.gradient(theta)?, self.structural.gradient(theta)?))
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.prox.lipschitz_bound() + self.epsilon * self.structural.lipschitz_bound()
    }
}

/// `L(theta) = 1/2 sum_k (tanh(x_k . theta) - y_k)^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TanhRegressionObjective {
    x: Matrix,
    y: Vector,
}

impl TanhRegressionObjective {
    pub fn new(x: Matrix, y: Vector) -> Result<Self> {
        if x.rows() != y.dim() {
            return Err(Error::usage(format!(
                "tanh regression: X has {} rows but y has dimension {}",
                x.rows(),
                y.dim()
            )));
        }
        Ok(TanhRegressionObjective { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn loss(&self, theta: &Vector) -> Result<f64> {
        self.check_dim(theta)?;
        let z = self.x.matvec(theta);
        let mut total = 0.0;
        for k in 0..z.dim() {
            let e = z.get(k).tanh() - self.y.get(k);
            total += e * e;
        }
        Ok(0.5 * total)
    }

    pub fn gradient(&self, theta: &Vector) -> Result<Vector> {
        self.check_dim(theta)?;
        let z = self.x.matvec(theta);
        // grad = X^T diag((t_k - y_k)(1 - t_k^2)) 1, with t_k = tanh(z_k).
        let mut w = vec![0.0; z.dim()];
        for k in 0..z.dim() {
            let t = z.get(k).tanh();
            w[k] = (t - self.y.get(k)) * (1.0 - t * t);
        }
        Ok(self
            .x
            .transpose_matvec(&Vector::new(w).expect("weights are finite")))
    }

    /// Conservative closed form `||X||^2 (1 + 2 max|y_k|)`. The per-sample
    /// curvature factor `(1-t^2)(1 - 3t^2 + 2ty)` is bounded in magnitude by
    /// `1 + 2|y|` over `t in (-1,1)`, and the feature part contributes at
    /// most the spectral norm of `X^T X`.
    pub fn lipschitz_bound(&self) -> f64 {
        let x_norm_sq = max_eig_ata(&self.x);
        let y_max = self.y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        x_norm_sq * (1.0 + 2.0 * y_max)
    }

    fn check_dim(&self, theta: &Vector) -> Result<()> {
        if theta.dim() != self.dim() {
            return Err(Error::usage(format!(
                "tanh regression expects dimension {}, got {}",
                self.dim(),
                theta.dim()
            )));
        }
        Ok(())
    }
}

/// Base losses a composite can wrap.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseObjective {
    Quadratic(QuadraticObjective),
    Mismatch(MismatchObjective),
    TanhRegression(TanhRegressionObjective),
}

impl BaseObjective {
    pub fn dim(&self) -> usize {
        match self {
            BaseObjective::Quadratic(o) => o.dim(),
            BaseObjective::Mismatch(o) => o.dim(),
            BaseObjective::TanhRegression(o) => o.dim(),
        }
    }

    pub fn loss(&self, theta: &Vector) -> Result<f64> {
        match self {
            BaseObjective::Quadratic(o) => o.loss(theta),
            BaseObjective::Mismatch(o) => o.loss(theta),
            BaseObjective::TanhRegression(o) => o.loss(theta),
        }
    }

    pub fn gradient(&self, theta: &Vector) -> Result<Vector> {
        match self {
            BaseObjective::Quadratic(o) => o.gradient(theta),
            BaseObjective::Mismatch(o) => o.gradient(theta),
            BaseObjective::TanhRegression(o) => o.gradient(theta),
        }
    }

    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            BaseObjective::Quadratic(o) => o.lipschitz_bound(),
            BaseObjective::Mismatch(o) => o.lipschitz_bound(),
            BaseObjective::TanhRegression(o) => o.lipschitz_bound(),
        }
    }
}

/// `L_tot = L_base + lambda Var(E(theta)) + sum_i gamma_i L_i^aux`.
///
/// The variance term regularizes the allocation map of the *base* loss; its
/// closed-form gradient is only available for the quadratic-base /
/// linear-capability family (see the interventions module).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositeObjective {
    base: BaseObjective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variance_term: Option<VarianceRegularizer>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    aux_terms: Vec<AuxiliaryObjective>,
}

impl CompositeObjective {
    pub fn new(
        base: BaseObjective,
        variance_term: Option<VarianceRegularizer>,
        aux_terms: Vec<AuxiliaryObjective>,
    ) -> Result<Self> {
        let d = base.dim();
        if let Some(reg) = &variance_term {
            if reg.capset().dim() != d {
                return Err(Error::usage(
                    "variance regularizer capability set must match the base dimension",
                ));
            }
        }
        if aux_terms.iter().any(|a| a.dim() != d) {
            return Err(Error::usage(
                "auxiliary objectives must match the base dimension",
            ));
        }
        Ok(CompositeObjective {
            base,
            variance_term,
            aux_terms,
        })
    }

    pub fn base(&self) -> &BaseObjective {
        &self.base
    }

    pub fn variance_term(&self) -> Option<&VarianceRegularizer> {
        self.variance_term.as_ref()
    }

    pub fn aux_terms(&self) -> &[AuxiliaryObjective] {
        &self.aux_terms
    }
}

/// The objective surface the trainer and harness work against.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    Quadratic(QuadraticObjective),
    Mismatch(MismatchObjective),
    TanhRegression(TanhRegressionObjective),
    Composite(CompositeObjective),
}

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Quadratic(o) => o.dim(),
            Objective::Mismatch(o) => o.dim(),
            Objective::TanhRegression(o) => o.dim(),
            Objective::Composite(o) => o.base.dim(),
        }
    }

    pub fn loss(&self, theta: &Vector) -> Result<f64> {
        match self {
            Objective::Quadratic(o) => o.loss(theta),
            Objective::Mismatch(o) => o.loss(theta),
            Objective::TanhRegression(o) => o.loss(theta),
            Objective::Composite(o) => {
                let mut total = o.base.loss(theta)?;
                if let Some(reg) = &o.variance_term {
                    let (value, _) = reg.penalty(&o.base, theta)?;
                    total += value;
                }
                for aux in &o.aux_terms {
                    total += aux.weighted_loss(theta)?;
                }
                Ok(total)
            }
        }
    }

    pub fn gradient(&self, theta: &Vector) -> Result<Vector> {
        match self {
            Objective::Quadratic(o) => o.gradient(theta),
            Objective::Mismatch(o) => o.gradient(theta),
            Objective::TanhRegression(o) => o.gradient(theta),
            Objective::Composite(o) => {
                let mut g = o.base.gradient(theta)?;
                if let Some(reg) = &o.variance_term {
                    let (_, reg_grad) = reg.penalty(&o.base, theta)?;
                    g = g.add_scaled(1.0, &reg_grad);
                }
                for aux in &o.aux_terms {
                    g = g.add_scaled(1.0, &aux.weighted_gradient(theta)?);
                }
                Ok(g)
            }
        }
    }

    /// A valid upper bound on the gradient's Lipschitz constant.
    ///
    /// For composites with a variance term the bound chains worst-case
    /// factors at the smoothing-band edge and is extremely conservative;
    /// scenarios that descend such composites set their step size explicitly
    /// instead of relying on the `0.5 / L` default.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            Objective::Quadratic(o) => o.lipschitz_bound(),
            Objective::Mismatch(o) => o.lipschitz_bound(),
            Objective::TanhRegression(o) => o.lipschitz_bound(),
            Objective::Composite(o) => {
                let mut total = o.base.lipschitz_bound();
                for aux in &o.aux_terms {
                    // Aux Hessian is gamma * v v^T with unit v.
                    total += aux.weight();
                }
                if let Some(reg) = &o.variance_term {
                    total += reg.curvature_bound(&o.base);
                }
                total
            }
        }
    }

    /// The gradient of the loss the allocation map is measured on. For a
    /// composite this is the base gradient; for everything else it is the
    /// gradient itself.
    pub fn base_gradient(&self, theta: &Vector) -> Result<Vector> {
        match self {
            Objective::Composite(o) => o.base.gradient(theta),
            other => other.gradient(theta),
        }
    }

    pub fn as_mismatch(&self) -> Option<&MismatchObjective> {
        match self {
            Objective::Mismatch(o) => Some(o),
            _ => None,
        }
    }
}
