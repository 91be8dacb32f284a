//! The measurement layer: per-step projections and energy shares, cumulative
//! weights and budget, capability gains, jaggedness, coupling, and the
//! capability-span decomposition of the update direction.
//!
//! ## Quantities
//!
//! At step `t` with update direction `g_t` and capability gradients
//! `grad C_i(theta_t)`:
//!
//! - projection `p_i(t) = <grad C_i, g_t>`
//! - energy share `E_i(t) = |p_i| / sum_j |p_j|` (uniform when every
//!   projection is negligible, so the simplex invariant never breaks)
//! - cumulative weight `W_i(T) = sum_t eta_t ||g_t|| E_i(t)`
//! - budget `B_T = sum_t eta_t ||g_t||`, so `sum_i W_i = B_T` by
//!   construction
//! - gain `G_i(T) = C_i(theta_T) - C_i(theta_0)`
//! - jaggedness `J(T)`: population variance of the gains
//! - coupling `kappa_ij`: cosine between capability gradients
//!
//! When a run is governed, the primary per-step fields describe the update
//! that actually moved the parameters (the controlled direction); the
//! pre-control measurement rides along in `raw_projections`/`raw_shares`.

use serde::{Deserialize, Serialize};

use crate::capabilities::CapabilitySet;
use crate::error::{Error, Result};
use crate::numerics::{dot_slices, least_squares, norm, Matrix, Vector};

/// Threshold scale below which a projection total counts as degenerate.
const DEGENERATE_SHARE_TOL: f64 = 1e-12;

/// A step where some signed projection `<grad C_i, -g_t>` falls below this
/// (i.e. a capability is actively harmed) violates the positive-alignment
/// regime and gets flagged.
pub const ALIGNMENT_FLAG_TOL: f64 = -1e-12;

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// Everything measured at one training step. `projections`, `shares`,
/// `coeffs`, `residual_norm` and `grad_norm` describe the applied update
/// direction; `capability_values` holds `C_i(theta_t)` at the step start.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub eta: f64,
    pub grad_norm: f64,
    pub projections: Vec<f64>,
    pub shares: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub residual_norm: f64,
    pub capability_values: Vec<f64>,
    /// Pre-control projections, present when governance rewrote the update.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_projections: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_shares: Option<Vec<f64>>,
    /// Capability projections of the mismatch components
    /// `(<grad C_i, grad L_prox>, <grad C_i, grad L_struct>)`, recorded when
    /// the objective is a mismatch mixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch_prox_projections: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch_struct_projections: Option<Vec<f64>>,
    /// Coupling matrix at this step, when periodic recording is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Matrix>,
    /// True when some signed projection violates the positive-alignment
    /// regime at this step.
    pub flagged: bool,
}

impl StepRecord {
    /// `<grad C_i, -g_t>` for the applied update.
    pub fn aligned_projection(&self, i: usize) -> f64 {
        -self.projections[i]
    }
}

/// A full recorded trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub capability_names: Vec<String>,
    pub theta_initial: Vector,
    pub theta_final: Vector,
    pub steps: Vec<StepRecord>,
    pub capability_values_final: Vec<f64>,
    /// Coupling matrix at `theta_T`.
    pub kappa_final: Matrix,
    /// Per-step parameter iterates `theta_0 .. theta_{T-1}` (the final point
    /// lives in `theta_final`). Not serialized to CSV; checks that need
    /// per-step capability gradients use these in-memory.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thetas: Vec<Vector>,
    pub governed: bool,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn num_capabilities(&self) -> usize {
        self.capability_names.len()
    }

    /// Gains over the full horizon.
    pub fn gains(&self) -> Vec<f64> {
        self.capability_values_final
            .iter()
            .zip(&self.steps[0].capability_values)
            .map(|(end, start)| end - start)
            .collect()
    }

    /// Gains over the prefix `steps[0..k]`, i.e. `C(theta_k) - C(theta_0)`.
    pub fn gains_over_prefix(&self, k: usize) -> Vec<f64> {
        let end = if k >= self.steps.len() {
            &self.capability_values_final
        } else {
            &self.steps[k].capability_values
        };
        end.iter()
            .zip(&self.steps[0].capability_values)
            .map(|(e, s)| e - s)
            .collect()
    }

    /// Index of the first flagged step, or the horizon if none is flagged.
    pub fn unflagged_prefix_len(&self) -> usize {
        self.steps
            .iter()
            .position(|s| s.flagged)
            .unwrap_or(self.steps.len())
    }

    pub fn flagged_count(&self) -> usize {
        self.steps.iter().filter(|s| s.flagged).count()
    }
}

/// Cumulative allocation quantities over a trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationSummary {
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    #[serde(rename = "B_T")]
    pub b_t: f64,
    #[serde(rename = "Ebar")]
    pub ebar: Vec<f64>,
    #[serde(rename = "G")]
    pub g: Vec<f64>,
    #[serde(rename = "J")]
    pub j: f64,
    pub kappa: Vec<Vec<f64>>,
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// `E_i = |p_i| / sum_j |p_j|`, with the uniform fallback when the total is
/// negligible relative to the largest projection. The output always sums
/// to 1.
pub fn energy_shares(projections: &[f64]) -> Result<Vec<f64>> {
    let m = projections.len();
    if m == 0 {
        return Err(Error::usage("energy_shares: need at least one projection"));
    }
    let abs: Vec<f64> = projections.iter().map(|p| p.abs()).collect();
    let total: f64 = abs.iter().sum();
    let max = abs.iter().fold(0.0_f64, |a, &b| a.max(b));
    if total <= DEGENERATE_SHARE_TOL * (1.0 + max) {
        return Ok(vec![1.0 / m as f64; m]);
    }
    Ok(abs.iter().map(|a| a / total).collect())
}

/// Population variance `(1/m) sum_i (x_i - mean)^2`.
pub fn jaggedness(gains: &[f64]) -> Result<f64> {
    if gains.is_empty() {
        return Err(Error::usage("jaggedness: need at least one gain"));
    }
    let m = gains.len() as f64;
    let mean = gains.iter().sum::<f64>() / m;
    Ok(gains.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / m)
}

/// Rolls a trace up into cumulative weights, budget, shares, gains,
/// jaggedness, and the final coupling matrix.
pub fn cumulative(trace: &Trace) -> Result<AllocationSummary> {
    if trace.steps.is_empty() {
        return Err(Error::usage("cumulative: trace has no steps"));
    }
    let m = trace.num_capabilities();
    let mut w = vec![0.0; m];
    let mut b_t = 0.0;
    for step in &trace.steps {
        let flow = step.eta * step.grad_norm;
        b_t += flow;
        for (wi, ei) in w.iter_mut().zip(&step.shares) {
            *wi += flow * ei;
        }
    }
    let ebar = if b_t <= 1e-15 {
        vec![1.0 / m as f64; m]
    } else {
        w.iter().map(|wi| wi / b_t).collect()
    };
    let g = trace.gains();
    let j = jaggedness(&g)?;
    Ok(AllocationSummary {
        w,
        b_t,
        ebar,
        g,
        j,
        kappa: trace.kappa_final.clone().into(),
    })
}

/// Cumulative weights over the prefix `steps[0..k]` only.
pub fn weights_over_prefix(trace: &Trace, k: usize) -> Vec<f64> {
    let m = trace.num_capabilities();
    let mut w = vec![0.0; m];
    for step in trace.steps.iter().take(k) {
        let flow = step.eta * step.grad_norm;
        for (wi, ei) in w.iter_mut().zip(&step.shares) {
            *wi += flow * ei;
        }
    }
    w
}

/// Pairwise cosine matrix between capability gradients at `theta`.
/// Gradients with negligible norm couple to nothing: off-diagonal entries 0,
/// diagonal 1.
pub fn coupling_matrix(capset: &CapabilitySet, theta: &Vector) -> Result<Matrix> {
    let m = capset.len();
    let grads = capset.gradients(theta)?;
    let norms: Vec<f64> = grads.iter().map(norm).collect();
    let mut entries = vec![0.0; m * m];
    for i in 0..m {
        entries[i * m + i] = 1.0;
        for j in (i + 1)..m {
            let v = if norms[i] > DEGENERATE_SHARE_TOL && norms[j] > DEGENERATE_SHARE_TOL {
                let c = dot_slices(grads[i].as_slice(), grads[j].as_slice())
                    / (norms[i] * norms[j]);
                c.clamp(-1.0, 1.0)
            } else {
                0.0
            };
            entries[i * m + j] = v;
            entries[j * m + i] = v;
        }
    }
    Matrix::new(m, m, entries)
}

/// Writes `g` as `sum_j a_j grad C_j(theta) + r` with `r` orthogonal to the
/// capability span.
pub fn decompose_gradient(
    capset: &CapabilitySet,
    theta: &Vector,
    g: &Vector,
) -> Result<(Vector, Vector)> {
    let grads = capset.gradients(theta)?;
    least_squares(&grads, g)
}

/// Coupling-form first-order gain prediction
/// `-eta * sum_j a_j ||grad C_i|| ||grad C_j|| kappa_ij`, evaluated exactly
/// as written. Algebraically this equals `-eta <grad C_i, g - r>`, the
/// in-span first-order gain.
pub fn predicted_gain(
    capset: &CapabilitySet,
    theta: &Vector,
    g: &Vector,
    eta: f64,
) -> Result<Vec<f64>> {
    if eta <= 0.0 {
        return Err(Error::usage("predicted_gain: eta must be positive"));
    }
    let grads = capset.gradients(theta)?;
    let norms: Vec<f64> = grads.iter().map(norm).collect();
    let kappa = coupling_matrix(capset, theta)?;
    let (coeffs, _) = decompose_gradient(capset, theta, g)?;
    let m = capset.len();
    let mut out = vec![0.0; m];
    for i in 0..m {
        let mut acc = 0.0;
        for j in 0..m {
            acc += coeffs.get(j) * norms[i] * norms[j] * kappa.get(i, j);
        }
        out[i] = -eta * acc;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// CSV serialization
// ---------------------------------------------------------------------------

/// One row per step: `t, eta, grad_norm, p_1..p_m, E_1..E_m, C_1..C_m,
/// a_1..a_m, residual_norm`. Governed traces append
/// `achieved_E_1..achieved_E_m` (the shares the controller enforced, equal
/// to the primary share columns) and `raw_p_1..raw_p_m` (pre-control
/// projections). Mismatch traces append `prox_p_*` and `struct_p_*`
/// component projections.
pub fn trace_to_csv(trace: &Trace) -> String {
    let names = &trace.capability_names;
    let m = names.len();
    let mut header: Vec<String> = vec!["t".into(), "eta".into(), "grad_norm".into()];
    for n in names {
        header.push(format!("p_{n}"));
    }
    for n in names {
        header.push(format!("E_{n}"));
    }
    for n in names {
        header.push(format!("C_{n}"));
    }
    for n in names {
        header.push(format!("a_{n}"));
    }
    header.push("residual_norm".into());
    let governed = trace.governed;
    if governed {
        for n in names {
            header.push(format!("achieved_E_{n}"));
        }
        for n in names {
            header.push(format!("raw_p_{n}"));
        }
    }
    let mismatch = trace
        .steps
        .first()
        .map(|s| s.mismatch_prox_projections.is_some())
        .unwrap_or(false);
    if mismatch {
        for n in names {
            header.push(format!("prox_p_{n}"));
        }
        for n in names {
            header.push(format!("struct_p_{n}"));
        }
    }

    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for step in &trace.steps {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        row.push(step.t.to_string());
        row.push(fmt_f64(step.eta));
        row.push(fmt_f64(step.grad_norm));
        for v in &step.projections {
            row.push(fmt_f64(*v));
        }
        for v in &step.shares {
            row.push(fmt_f64(*v));
        }
        for v in &step.capability_values {
            row.push(fmt_f64(*v));
        }
        for v in &step.coeffs {
            row.push(fmt_f64(*v));
        }
        row.push(fmt_f64(step.residual_norm));
        if governed {
            for v in &step.shares {
                row.push(fmt_f64(*v));
            }
            let raw = step
                .raw_projections
                .clone()
                .unwrap_or_else(|| step.projections.clone());
            for &v in &raw {
                row.push(fmt_f64(v));
            }
        }
        if mismatch {
            let zeros = vec![0.0; m];
            for v in step.mismatch_prox_projections.as_ref().unwrap_or(&zeros) {
                row.push(fmt_f64(*v));
            }
            for v in step.mismatch_struct_projections.as_ref().unwrap_or(&zeros) {
                row.push(fmt_f64(*v));
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Shortest round-trip decimal; re-parsing gives back the identical bits.
fn fmt_f64(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// Reconstructs step records from a CSV written by [`trace_to_csv`].
/// Endpoint values, the final coupling matrix, and per-step thetas are not
/// part of the CSV schema; callers that need them attach them from the
/// run's summary and config.
pub fn steps_from_csv(csv: &str, capability_names: &[String]) -> Result<Vec<StepRecord>> {
    let m = capability_names.len();
    let mut lines = csv.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::usage("trace csv is empty"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let base_cols = 3 + 4 * m + 1;
    if cols.len() < base_cols {
        return Err(Error::usage(format!(
            "trace csv has {} columns, expected at least {base_cols}",
            cols.len()
        )));
    }
    let governed = cols.len() >= base_cols + 2 * m
        && cols[base_cols].starts_with("achieved_E_");
    let prox_offset = if governed { base_cols + 2 * m } else { base_cols };
    let has_mismatch = cols.len() >= prox_offset + 2 * m
        && cols
            .get(prox_offset)
            .map(|c| c.starts_with("prox_p_"))
            .unwrap_or(false);

    let mut steps = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::usage(format!(
                "trace csv row {lineno}: {} fields, expected {}",
                fields.len(),
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::usage(format!("trace csv row {lineno}: {e}")))
        };
        let t: usize = fields[0]
            .parse()
            .map_err(|e| Error::usage(format!("trace csv row {lineno}: {e}")))?;
        let eta = parse(fields[1])?;
        let grad_norm = parse(fields[2])?;
        let slice = |start: usize| -> Result<Vec<f64>> {
            fields[start..start + m].iter().map(|s| parse(s)).collect()
        };
        let projections = slice(3)?;
        let shares = slice(3 + m)?;
        let capability_values = slice(3 + 2 * m)?;
        let coeffs = slice(3 + 3 * m)?;
        let residual_norm = parse(fields[3 + 4 * m])?;
        let raw_projections = if governed {
            Some(slice(base_cols + m)?)
        } else {
            None
        };
        let raw_shares = match &raw_projections {
            Some(p) => Some(energy_shares(p)?),
            None => None,
        };
        let (mp, ms) = if has_mismatch {
            (Some(slice(prox_offset)?), Some(slice(prox_offset + m)?))
        } else {
            (None, None)
        };
        let flagged = projections.iter().any(|&p| -p < ALIGNMENT_FLAG_TOL);
        steps.push(StepRecord {
            t,
            eta,
            grad_norm,
            projections,
            shares,
            coeffs,
            residual_norm,
            capability_values,
            raw_projections,
            raw_shares,
            mismatch_prox_projections: mp,
            mismatch_struct_projections: ms,
            coupling: None,
            flagged,
        });
    }
    if steps.is_empty() {
        return Err(Error::usage("trace csv contains no steps"));
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capabilities::{Capability, CapabilitySet, LinearCapability};
    use crate::numerics::{gaussian_vector, SeededRng};
    use proptest::prelude::*;

    fn axis_caps(d: usize, m: usize) -> CapabilitySet {
        CapabilitySet::new(
            (0..m)
                .map(|i| {
                    Capability::Linear(
                        LinearCapability::new(Vector::basis(d, i), format!("c{i}")).unwrap(),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn energy_shares_cases() {
        assert_eq!(energy_shares(&[0.7]).unwrap(), vec![1.0]);
        assert_eq!(energy_shares(&[2.0, -2.0]).unwrap(), vec![0.5, 0.5]);
        let s = energy_shares(&[-3.0, -0.1]).unwrap();
        assert!((s[0] - 3.0 / 3.1).abs() < 1e-12);
        assert!((s[1] - 0.1 / 3.1).abs() < 1e-12);
        assert_eq!(energy_shares(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert!(energy_shares(&[]).is_err());
    }

    #[test]
    fn jaggedness_cases() {
        assert_eq!(jaggedness(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(jaggedness(&[2.0, 0.0]).unwrap(), 1.0);
        assert!((jaggedness(&[1.0, 2.0, 3.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(jaggedness(&[]).is_err());
    }

    fn tiny_trace(shares: Vec<f64>, eta: f64, grad_norm: f64) -> Trace {
        let m = shares.len();
        let step = StepRecord {
            t: 0,
            eta,
            grad_norm,
            projections: shares.iter().map(|s| -s * grad_norm).collect(),
            shares,
            coeffs: vec![0.0; m],
            residual_norm: 0.0,
            capability_values: vec![0.0; m],
            raw_projections: None,
            raw_shares: None,
            mismatch_prox_projections: None,
            mismatch_struct_projections: None,
            coupling: None,
            flagged: false,
        };
        Trace {
            capability_names: (0..m).map(|i| format!("c{i}")).collect(),
            theta_initial: Vector::zeros(2),
            theta_final: Vector::zeros(2),
            steps: vec![step],
            capability_values_final: vec![0.1, 0.3][..m].to_vec(),
            kappa_final: Matrix::identity(m),
            thetas: vec![],
            governed: false,
        }
    }

    #[test]
    fn cumulative_single_step_hand_values() {
        let trace = tiny_trace(vec![0.75, 0.25], 0.1, 2.0);
        let summary = cumulative(&trace).unwrap();
        assert!((summary.w[0] - 0.15).abs() < 1e-15);
        assert!((summary.w[1] - 0.05).abs() < 1e-15);
        assert!((summary.b_t - 0.2).abs() < 1e-15);
        assert!((summary.w.iter().sum::<f64>() - summary.b_t).abs() < 1e-12);
    }

    #[test]
    fn cumulative_zero_gradient_uniform_ebar() {
        let trace = tiny_trace(vec![0.5, 0.5], 0.1, 0.0);
        let summary = cumulative(&trace).unwrap();
        assert_eq!(summary.b_t, 0.0);
        assert_eq!(summary.ebar, vec![0.5, 0.5]);
    }

    #[test]
    fn coupling_matrix_cases() {
        let capset = axis_caps(2, 2);
        let kappa = coupling_matrix(&capset, &Vector::zeros(2)).unwrap();
        assert_eq!(kappa.get(0, 0), 1.0);
        assert_eq!(kappa.get(0, 1), 0.0);

        let s = 1.0 / 2.0_f64.sqrt();
        let capset = CapabilitySet::new(vec![
            Capability::Linear(LinearCapability::new(Vector::basis(2, 0), "u").unwrap()),
            Capability::Linear(
                LinearCapability::new(Vector::new(vec![s, s]).unwrap(), "w").unwrap(),
            ),
        ])
        .unwrap();
        let kappa = coupling_matrix(&capset, &Vector::zeros(2)).unwrap();
        assert!((kappa.get(0, 1) - s).abs() < 1e-12);
        assert_eq!(kappa.get(0, 1), kappa.get(1, 0));
    }

    #[test]
    fn decompose_in_span_and_orthogonal() {
        let capset = axis_caps(3, 2);
        let theta = Vector::zeros(3);
        let g = Vector::basis(3, 0);
        let (a, r) = decompose_gradient(&capset, &theta, &g).unwrap();
        assert!((a.get(0) - 1.0).abs() < 1e-9);
        assert!(a.get(1).abs() < 1e-9);
        assert!(norm(&r) < 1e-9);

        let g = Vector::basis(3, 2);
        let (a, r) = decompose_gradient(&capset, &theta, &g).unwrap();
        assert!(a.get(0).abs() < 1e-9 && a.get(1).abs() < 1e-9);
        assert!((norm(&r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn predicted_gain_identities() {
        let mut rng = SeededRng::new(17);
        // m=1: g = a * grad C_1 gives gain -eta * a * ||grad C_1||^2.
        let capset = axis_caps(2, 1);
        let g = Vector::basis(2, 0).scale(-2.5);
        let pred = predicted_gain(&capset, &Vector::zeros(2), &g, 0.1).unwrap();
        assert!((pred[0] - (-0.1 * -2.5 * 1.0)).abs() < 1e-12);

        // Random instances: coupling form equals -eta <grad C_i, g - r>.
        for _ in 0..50 {
            let d = 4;
            let capset = axis_caps(d, 2);
            let theta = gaussian_vector(&mut rng, d).unwrap();
            let g = gaussian_vector(&mut rng, d).unwrap();
            let eta = 0.05;
            let pred = predicted_gain(&capset, &theta, &g, eta).unwrap();
            let (coeffs, r) = decompose_gradient(&capset, &theta, &g).unwrap();
            let _ = coeffs;
            let grads = capset.gradients(&theta).unwrap();
            for (i, grad) in grads.iter().enumerate() {
                let in_span = g.sub(&r);
                let direct = -eta * dot_slices(grad.as_slice(), in_span.as_slice());
                assert!(
                    (pred[i] - direct).abs() < 1e-10,
                    "prediction {} vs identity {}",
                    pred[i],
                    direct
                );
            }
        }
    }

    #[test]
    fn csv_round_trip_preserves_bits() {
        let mut rng = SeededRng::new(3);
        let m = 2;
        let steps: Vec<StepRecord> = (0..5)
            .map(|t| {
                let p = vec![rng.next_normal(), rng.next_normal()];
                let shares = energy_shares(&p).unwrap();
                StepRecord {
                    t,
                    eta: 0.05,
                    grad_norm: rng.next_normal().abs(),
                    projections: p,
                    shares,
                    coeffs: vec![rng.next_normal(), rng.next_normal()],
                    residual_norm: rng.next_normal().abs(),
                    capability_values: vec![rng.next_normal(), rng.next_normal()],
                    raw_projections: None,
                    raw_shares: None,
                    mismatch_prox_projections: None,
                    mismatch_struct_projections: None,
                    coupling: None,
                    flagged: false,
                }
            })
            .collect();
        let trace = Trace {
            capability_names: vec!["a".into(), "b".into()],
            theta_initial: Vector::zeros(2),
            theta_final: Vector::zeros(2),
            steps,
            capability_values_final: vec![0.0; m],
            kappa_final: Matrix::identity(m),
            thetas: vec![],
            governed: false,
        };
        let csv = trace_to_csv(&trace);
        let parsed = steps_from_csv(&csv, &trace.capability_names).unwrap();
        assert_eq!(parsed.len(), trace.steps.len());
        for (a, b) in parsed.iter().zip(&trace.steps) {
            assert_eq!(a.projections, b.projections);
            assert_eq!(a.shares, b.shares);
            assert_eq!(a.coeffs, b.coeffs);
            assert_eq!(a.grad_norm, b.grad_norm);
            assert_eq!(a.capability_values, b.capability_values);
        }
    }

    proptest! {
        #[test]
        fn shares_live_on_the_simplex(
            ps in proptest::collection::vec(-1e6..1e6f64, 1..10)
        ) {
            let s = energy_shares(&ps).unwrap();
            let total: f64 = s.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            for v in &s {
                prop_assert!((0.0..=1.0 + 1e-12).contains(v));
            }
        }

        #[test]
        fn coupling_matrix_well_formed(seed in 0u64..200) {
            let mut rng = SeededRng::new(seed);
            let d = 4;
            let m = 3;
            let members: Vec<Capability> = (0..m).map(|i| {
                let v = gaussian_vector(&mut rng, d).unwrap();
                Capability::Linear(
                    LinearCapability::from_direction(v, format!("c{i}")).unwrap())
            }).collect();
            let capset = CapabilitySet::new(members).unwrap();
            let theta = gaussian_vector(&mut rng, d).unwrap();
            let kappa = coupling_matrix(&capset, &theta).unwrap();
            for i in 0..m {
                prop_assert_eq!(kappa.get(i, i), 1.0);
                for j in 0..m {
                    prop_assert!((-1.0..=1.0).contains(&kappa.get(i, j)));
                    prop_assert_eq!(kappa.get(i, j), kappa.get(j, i));
                }
            }
        }
    }
}
