//! Deterministic training runs with capability-projected gradient-energy
//! telemetry, redistribution interventions, and numerical bound checks.
//!
//! The library trains small differentiable models by plain gradient descent
//! and measures, at every step, how the update direction projects onto a
//! declared set of capability functionals. From those projections it builds
//! energy shares, cumulative weights, a finite optimization budget,
//! capability gains, jaggedness (gain dispersion), and coupling; a verifier
//! then checks quantitative energy-to-gain bounds against the recorded
//! traces, with explicit second-order remainder budgets.
//!
//! ## Modules
//!
//! - [`numerics`]: vectors, matrices, damped least squares, power
//!   iteration, a counter-based deterministic RNG
//! - [`objectives`]: quadratic, mismatch-mixture, tanh-regression and
//!   composite losses with exact gradients
//! - [`capabilities`]: linear and quadratic capability functionals with
//!   exact gradients and Lipschitz constants
//! - [`telemetry`]: per-step and cumulative allocation measurements, CSV
//!   serialization
//! - [`interventions`]: energy-variance regularizer, auxiliary objectives,
//!   governance caps and floors
//! - [`trainer`]: the deterministic descent loop
//! - [`verifier`]: bound reports for the energy-to-gain sandwich, the
//!   jaggedness lower bound, the budget tradeoff, mismatch underinvestment,
//!   and coupling-modified gain predictions
//! - [`harness`]: scenario configs, presets, ensemble execution, reports
//!
//! ## Runnable examples
//!
//! Each major capability of the crate has a runnable example:
//!
//! ```bash
//! cargo run --example toy_linear           # anisotropic two-capability run
//! cargo run --example gradient_audit       # finite-difference gradient audit
//! cargo run --example bound_reports        # verifier on a fresh trace
//! cargo run --example mismatch             # underinvestment under mismatch
//! cargo run --example aux_lift             # auxiliary objectives lift shares
//! cargo run --example variance_penalty     # energy-variance regularization
//! cargo run --example governance           # share caps steer a run
//! cargo run --example coupling             # redistribution cost vs coupling
//! cargo run --example ensemble_correlation # early dispersion predicts J
//! cargo run --example scaling              # jaggedness survives scaling
//! ```
//!
//! The `capalloc` binary wraps the same machinery behind `run`, `verify`,
//! `sweep`, `report`, and `presets` subcommands; see the README.

pub mod capabilities;
pub mod error;
pub mod harness;
pub mod interventions;
pub mod numerics;
pub mod objectives;
pub mod telemetry;
pub mod trainer;
pub mod verifier;

pub use error::{Error, Result};
