//! Co-trained compressive sensing for quasi-periodic signals.
//!
//! The pipeline learns a personalized overcomplete dictionary from a user's
//! own recordings (online dictionary learning), then trains a low-rank
//! sensing matrix that acts as a near-isometry on the sparse codes the
//! dictionary actually produces. The pair compresses far below classical
//! rates while keeping l1 reconstruction accurate, and is benchmarked here
//! against random Gaussian sensing and a fixed DCT/wavelet dictionary.
//!
//! Everything numeric is generic over the scalar type via [`Real`]; the
//! aliases below pin the `f64` surface used by the file formats and the CLI.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod lasso;
pub mod model;
pub mod odl;
pub mod recovery;
pub mod rng;
pub mod scalar;
pub mod smt;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

/// Window type at working precision.
pub type SignalWindow = model::SignalWindow<f64>;
/// Dictionary type at working precision.
pub type Dictionary = model::Dictionary<f64>;
/// Sensing matrix type at working precision.
pub type SensingMatrix = model::SensingMatrix<f64>;
/// Sparse code type at working precision.
pub type SparseCode = model::SparseCode<f64>;
/// Measurement type at working precision.
pub type MeasurementVector = model::MeasurementVector<f64>;
/// Bundle type at working precision.
pub type TrainedBundle = model::TrainedBundle<f64>;
/// Recording type at working precision.
pub type RawRecording = ingest::RawRecording<f64>;
/// Dictionary-learning configuration at working precision.
pub type OdlConfig = odl::OdlConfig<f64>;
/// Sensing-matrix training configuration at working precision.
pub type SmtConfig = smt::SmtConfig<f64>;
/// Reconstruction configuration at working precision.
pub type RecoveryConfig = recovery::RecoveryConfig<f64>;
/// Experiment configuration at working precision.
pub type ExperimentConfig = harness::ExperimentConfig<f64>;
