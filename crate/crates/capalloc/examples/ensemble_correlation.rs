//! Early concentration predicts later jaggedness: across an ensemble of
//! randomized instances, the dispersion of cumulative energy weights in the
//! first 10% of training rank-correlates with the final gain dispersion.

use capalloc::harness::config::InstanceSpec;
use capalloc::harness::correlate_early_late;
use capalloc::trainer::{run, TrainerConfig};

fn main() -> capalloc::Result<()> {
    let spec = InstanceSpec::RandomAnisotropic {
        ratio_min: 1.0,
        ratio_max: 100.0,
        sigma_weak_min: 0.3,
        sigma_weak_max: 1.0,
        cap_rotation: 0.2,
    };
    let config = TrainerConfig::new(200);

    let mut traces = Vec::new();
    for seed in 1000..1200u64 {
        let (objective, capset, theta0) = spec.generate(seed)?;
        let mut trainer = config.clone();
        trainer.seed = seed;
        traces.push(run(&trainer, &objective, &capset, &theta0)?);
    }

    let r = correlate_early_late(&traces, 0.1)?
        .expect("instances vary, so ranks are defined");
    println!(
        "spearman(early 10% energy-weight dispersion, final jaggedness) over {} runs: {r:.4}",
        traces.len()
    );
    assert!(r > 0.3);
    println!("early allocation imbalance is a usable predictor of final capability dispersion.");
    Ok(())
}
