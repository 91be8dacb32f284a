//! Finite-difference audit of every analytic gradient in the crate: each
//! objective and capability family is sampled at random points and its
//! closed-form gradient compared against central differences.

use capalloc::capabilities::{Capability, CapabilitySet, LinearCapability, QuadraticCapability};
use capalloc::interventions::{AuxiliaryObjective, VarianceRegularizer};
use capalloc::numerics::{gaussian_vector, Matrix, SeededRng, Vector};
use capalloc::objectives::{
    BaseObjective, CompositeObjective, MismatchObjective, Objective, QuadraticObjective,
    TanhRegressionObjective,
};
use capalloc::verifier::{audit_capability, audit_objective};

fn symmetric(rng: &mut SeededRng, d: usize, scale: f64) -> Matrix {
    let raw = gaussian_vector(rng, d * d).unwrap();
    let mut entries = vec![0.0; d * d];
    for r in 0..d {
        for c in r..d {
            let v = scale * 0.5 * (raw.get(r * d + c) + raw.get(c * d + r));
            entries[r * d + c] = v;
            entries[c * d + r] = v;
        }
    }
    Matrix::new(d, d, entries).unwrap()
}

fn main() -> capalloc::Result<()> {
    let mut rng = SeededRng::new(7);
    let d = 4;
    let samples: Vec<Vector> = (0..20)
        .map(|_| gaussian_vector(&mut rng, d).unwrap())
        .collect();

    let quad = QuadraticObjective::new(
        Matrix::new(d, d, gaussian_vector(&mut rng, d * d)?.as_slice().to_vec())?,
        gaussian_vector(&mut rng, d)?,
    )?;
    let mismatch = MismatchObjective::new(
        quad.clone(),
        QuadraticObjective::new(
            Matrix::new(d, d, gaussian_vector(&mut rng, d * d)?.as_slice().to_vec())?,
            gaussian_vector(&mut rng, d)?,
        )?,
        0.25,
    )?;
    let tanh = TanhRegressionObjective::new(
        Matrix::new(6, d, gaussian_vector(&mut rng, 6 * d)?.as_slice().to_vec())?,
        gaussian_vector(&mut rng, 6)?,
    )?;
    let capset = CapabilitySet::new(vec![
        Capability::Linear(LinearCapability::new(Vector::basis(d, 0), "a")?),
        Capability::Linear(LinearCapability::new(Vector::basis(d, 1), "b")?),
    ])?;
    let composite = CompositeObjective::new(
        BaseObjective::Quadratic(quad.clone()),
        Some(VarianceRegularizer::new(0.5, capset, 1e-3)?),
        vec![AuxiliaryObjective::new(Vector::basis(d, 1), 0.3, 1.5)?],
    )?;

    println!("objective family        max relative gradient error");
    for (name, objective) in [
        ("quadratic", Objective::Quadratic(quad)),
        ("mismatch mixture", Objective::Mismatch(mismatch)),
        ("tanh regression", Objective::TanhRegression(tanh)),
        ("composite (var+aux)", Objective::Composite(composite)),
    ] {
        let err = audit_objective(&objective, &samples)?;
        println!("{name:<22}  {err:.3e}");
        assert!(err <= 1e-5);
    }

    let linear = Capability::Linear(LinearCapability::from_direction(
        gaussian_vector(&mut rng, d)?,
        "linear",
    )?);
    let quadratic = Capability::Quadratic(QuadraticCapability::new(
        symmetric(&mut rng, d, 1.0),
        gaussian_vector(&mut rng, d)?,
        "quadratic",
    )?);
    println!("\ncapability family       max relative gradient error");
    for capability in [&linear, &quadratic] {
        let err = audit_capability(capability, &samples)?;
        println!("{:<22}  {err:.3e}", capability.name());
        assert!(err <= 1e-5);
    }
    println!("\nall analytic gradients agree with central differences.");
    Ok(())
}
