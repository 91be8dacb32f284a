//! Capability functionals: differentiable scalar maps over parameter space
//! whose values track one behavioral competence each.
//!
//! A capability exposes its value, its exact gradient, and a gradient
//! Lipschitz constant. The Lipschitz constant feeds the second-order
//! remainder budgets in the verifier: linear capabilities have constant
//! gradients (remainders vanish identically), quadratic capabilities have
//! curvature equal to the spectral norm of their Hessian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, power_iteration_max_eig, Matrix, Vector};

/// Unit-norm slack accepted on linear capability directions.
const UNIT_NORM_TOL: f64 = 1e-12;

/// Hard cap on the number of capabilities in a set.
pub const MAX_CAPABILITIES: usize = 64;

/// `C(theta) = u . theta` for a unit direction `u`. The unit-norm requirement
/// keeps energy shares and coupling coefficients scale-free.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearCapability {
    u: Vector,
    name: String,
}

impl LinearCapability {
    pub fn new(u: Vector, name: impl Into<String>) -> Result<Self> {
        let n = norm(&u);
        if (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::usage(format!(
                "linear capability direction must be unit norm (got {n})"
            )));
        }
        Ok(LinearCapability {
            u,
            name: name.into(),
        })
    }

    /// Normalizes the direction before construction.
    pub fn from_direction(u: Vector, name: impl Into<String>) -> Result<Self> {
        let unit = u
            .normalized()
            .ok_or_else(|| Error::usage("linear capability direction must be nonzero"))?;
        LinearCapability::new(unit, name)
    }

    pub fn direction(&self) -> &Vector {
        &self.u
    }
}

/// `C(theta) = 1/2 theta^T Q theta + q . theta` for symmetric `Q`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadraticCapability {
    q_matrix: Matrix,
    q_vector: Vector,
    name: String,
}

impl QuadraticCapability {
    pub fn new(q_matrix: Matrix, q_vector: Vector, name: impl Into<String>) -> Result<Self> {
        if q_matrix.rows() != q_matrix.cols() {
            return Err(Error::usage("quadratic capability Q must be square"));
        }
        if q_matrix.rows() != q_vector.dim() {
            return Err(Error::usage(
                "quadratic capability Q and q must share the dimension",
            ));
        }
        if !q_matrix.is_symmetric(1e-12) {
            return Err(Error::usage("quadratic capability Q must be symmetric"));
        }
        Ok(QuadraticCapability {
            q_matrix,
            q_vector,
            name: name.into(),
        })
    }

    /// Spectral norm of `Q` by power iteration.
    pub fn spectral_norm(&self) -> f64 {
        power_iteration_max_eig(self.q_matrix.cols(), |v| self.q_matrix.matvec(v))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Capability {
    Linear(LinearCapability),
    Quadratic(QuadraticCapability),
}

impl Capability {
    pub fn name(&self) -> &str {
        match self {
            Capability::Linear(c) => &c.name,
            Capability::Quadratic(c) => &c.name,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Capability::Linear(c) => c.u.dim(),
            Capability::Quadratic(c) => c.q_vector.dim(),
        }
    }

    pub fn value(&self, theta: &Vector) -> Result<f64> {
        self.check_dim(theta)?;
        match self {
            Capability::Linear(c) => dot(&c.u, theta),
            Capability::Quadratic(c) => {
                let q_theta = c.q_matrix.matvec(theta);
                Ok(0.5 * dot(theta, &q_theta)? + dot(&c.q_vector, theta)?)
            }
        }
    }

    pub fn gradient(&self, theta: &Vector) -> Result<Vector> {
        self.check_dim(theta)?;
        match self {
            Capability::Linear(c) => Ok(c.u.clone()),
            Capability::Quadratic(c) => Ok(c.q_matrix.matvec(theta).add_scaled(1.0, &c.q_vector)),
        }
    }

    /// Exact gradient Lipschitz constant: 0 for linear capabilities, the
    /// spectral norm of `Q` for quadratic ones.
    pub fn lipschitz_constant(&self) -> f64 {
        match self {
            Capability::Linear(_) => 0.0,
            Capability::Quadratic(c) => c.spectral_norm(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Capability::Linear(_))
    }

    /// Re-checks construction invariants. Needed for members that arrived
    /// through deserialization rather than the constructors.
    pub fn validate(&self) -> Result<()> {
        match self {
            Capability::Linear(c) => {
                let n = norm(&c.u);
                if (n - 1.0).abs() > UNIT_NORM_TOL {
                    return Err(Error::usage(format!(
                        "capability '{}': direction must be unit norm (got {n})",
                        c.name
                    )));
                }
            }
            Capability::Quadratic(c) => {
                if c.q_matrix.rows() != c.q_matrix.cols()
                    || c.q_matrix.rows() != c.q_vector.dim()
                {
                    return Err(Error::usage(format!(
                        "capability '{}': Q and q dimensions disagree",
                        c.name
                    )));
                }
                if !c.q_matrix.is_symmetric(1e-12) {
                    return Err(Error::usage(format!(
                        "capability '{}': Q must be symmetric",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_dim(&self, theta: &Vector) -> Result<()> {
        if theta.dim() != self.dim() {
            return Err(Error::usage(format!(
                "capability '{}' expects dimension {}, got {}",
                self.name(),
                self.dim(),
                theta.dim()
            )));
        }
        Ok(())
    }
}

/// An ordered set of capabilities sharing the parameter dimension, with
/// unique names. This is the coordinate system every allocation measurement
/// is reported against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapabilitySet {
    members: Vec<Capability>,
}

impl CapabilitySet {
    pub fn new(members: Vec<Capability>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::usage("capability set must have at least one member"));
        }
        if members.len() > MAX_CAPABILITIES {
            return Err(Error::usage(format!(
                "capability set is capped at {MAX_CAPABILITIES} members"
            )));
        }
        let d = members[0].dim();
        if members.iter().any(|c| c.dim() != d) {
            return Err(Error::usage(
                "all capabilities must share the parameter dimension",
            ));
        }
        for member in &members {
            member.validate()?;
        }
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                if a.name() == b.name() {
                    return Err(Error::usage(format!(
                        "duplicate capability name '{}'",
                        a.name()
                    )));
                }
            }
        }
        Ok(CapabilitySet { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn members(&self) -> &[Capability] {
        &self.members
    }

    pub fn get(&self, i: usize) -> &Capability {
        &self.members[i]
    }

    pub fn names(&self) -> Vec<String> {
        self.members.iter().map(|c| c.name().to_string()).collect()
    }

    pub fn all_linear(&self) -> bool {
        self.members.iter().all(|c| c.is_linear())
    }

    pub fn values(&self, theta: &Vector) -> Result<Vec<f64>> {
        self.members.iter().map(|c| c.value(theta)).collect()
    }

    pub fn gradients(&self, theta: &Vector) -> Result<Vec<Vector>> {
        self.members.iter().map(|c| c.gradient(theta)).collect()
    }

    /// `max_i L_i` over the set.
    pub fn max_lipschitz(&self) -> f64 {
        self.members
            .iter()
            .map(|c| c.lipschitz_constant())
            .fold(0.0, f64::max)
    }
}
