//! Underinvestment under objective mismatch: when the loss decomposes as
//! L_prox + eps * L_struct with a small eps, a capability aligned only with
//! the structural term starves. The per-step gain cap eta * (delta + eps*M)
//! is checked with delta and M measured from the recorded component
//! projections.

use capalloc::capabilities::{Capability, CapabilitySet, LinearCapability};
use capalloc::interventions::underinvestment_cap;
use capalloc::numerics::{Matrix, Vector};
use capalloc::objectives::{MismatchObjective, Objective, QuadraticObjective};
use capalloc::telemetry::cumulative;
use capalloc::trainer::{run, TrainerConfig};
use capalloc::verifier::{check_prop2, measure_mismatch_bounds};

fn main() -> capalloc::Result<()> {
    let prox = QuadraticObjective::new(
        Matrix::from_rows(&[vec![3.0, 0.0]])?,
        Vector::new(vec![1.0])?,
    )?;
    let structural = QuadraticObjective::new(
        Matrix::from_rows(&[vec![0.0, 1.0]])?,
        Vector::new(vec![0.05])?,
    )?;
    let epsilon = 0.01;
    let objective = Objective::Mismatch(MismatchObjective::new(prox, structural, epsilon)?);
    let capset = CapabilitySet::new(vec![
        Capability::Linear(LinearCapability::new(Vector::basis(2, 0), "dominant")?),
        Capability::Linear(LinearCapability::new(Vector::basis(2, 1), "neglected")?),
    ])?;

    let config = TrainerConfig::new(500).with_eta(0.05);
    let trace = run(&config, &objective, &capset, &Vector::zeros(2))?;

    let neglected = 1;
    let (delta, m_bound) = measure_mismatch_bounds(&trace, neglected)?;
    println!("measured mismatch constants: delta = {delta:.3e}, M = {m_bound:.3e}");
    println!(
        "per-step gain cap eta*(delta + eps*M) = {:.3e}",
        underinvestment_cap(delta.max(0.0), epsilon, m_bound.max(0.0), 0.05)?
    );

    let report = check_prop2(&trace, &capset, neglected, delta, epsilon, m_bound)?;
    println!("{}", report.one_line());

    let summary = cumulative(&trace)?;
    println!(
        "\ngains after {} steps: dominant = {:.4}, neglected = {:.5}",
        trace.horizon(),
        summary.g[0],
        summary.g[1]
    );
    println!(
        "the neglected capability captured {:.1}% of the dominant one's gain \
         (energy share {:.4})",
        100.0 * summary.g[1] / summary.g[0],
        summary.ebar[1]
    );
    Ok(())
}
