//! Runs the full verifier against a freshly recorded trace and prints each
//! bound report: the energy-to-gain sandwich, the jaggedness lower bound,
//! the finite-budget tradeoff, the coupling-form gain check, and the
//! dominant-share corollary.

use capalloc::capabilities::{Capability, CapabilitySet, LinearCapability, QuadraticCapability};
use capalloc::numerics::{Matrix, Vector};
use capalloc::objectives::{Objective, QuadraticObjective};
use capalloc::trainer::{run, TrainerConfig};
use capalloc::verifier::{
    check_corollary, check_prop1, check_prop5, check_thm1, check_thm2, estimate_sensitivity,
    remainder_budget,
};

fn main() -> capalloc::Result<()> {
    // Persistent-dominance instance with one mildly curved capability so the
    // second-order remainder budget is exercised (nonzero c_T).
    let objective = Objective::Quadratic(QuadraticObjective::new(
        Matrix::diagonal(&[0.3, 2.0, 1.0])?,
        Vector::new(vec![10.0, 0.1, 0.5])?,
    )?);
    let mild_curvature = Matrix::diagonal(&[0.02, -0.01, 0.015])?;
    let capset = CapabilitySet::new(vec![
        Capability::Quadratic(QuadraticCapability::new(
            mild_curvature,
            Vector::basis(3, 0),
            "dominant",
        )?),
        Capability::Linear(LinearCapability::new(Vector::basis(3, 1), "minor")?),
    ])?;

    let config = TrainerConfig::new(300);
    let trace = run(&config, &objective, &capset, &Vector::zeros(3))?;

    let est = estimate_sensitivity(&trace)?;
    println!(
        "sensitivity estimates: alpha_hat = {:.4}, beta_hat = {:.4} over {} steps ({} flagged)",
        est.alpha_hat, est.beta_hat, est.steps_used, est.flagged_steps
    );
    println!(
        "second-order remainder budget c_T = {:.3e}\n",
        remainder_budget(&trace, &capset)
    );

    for report in check_prop1(&trace, &capset, &est) {
        println!("{}", report.one_line());
    }
    println!("{}", check_thm1(&trace, &capset, &est)?.one_line());
    println!("{}", check_thm2(&trace, &capset, &est).one_line());
    println!("{}", check_prop5(&trace, &capset)?.one_line());
    println!("{}", check_corollary(&trace, &capset)?.one_line());
    Ok(())
}
