//! Channel estimation for IRS-assisted monostatic backscatter links.
//!
//! The crate covers the quadratic reader signal model, the phase-rotated
//! pilot-pair least-squares estimator with its MSE-optimal DFT training
//! design, three comparison schemes, and a seeded Monte Carlo harness that
//! produces effective-SNR sweeps.

pub mod baselines;
pub mod channel;
pub mod estimator;
pub mod experiments;
pub mod linalg;
pub mod rng;
pub mod signal;

pub use channel::{realize_channels, ChannelRealization, ScenarioConfig};
pub use estimator::{build_training_matrix, dft_training, optimal_phase, Estimate, TrainingMatrix, TrainingPlan};
pub use rng::SeededRng;
pub use signal::{LinkBudget, ReflectionVector};
