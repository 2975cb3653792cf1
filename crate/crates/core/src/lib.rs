//! Band-wise compressive sampling of hyperspectral cube videos, l1/Haar
//! split Bregman reconstruction, and ACE-based chemical detection.
//!
//! The crate models the full study pipeline on synthetic plume videos:
//!
//! 1. [`synth`] generates a seeded plume scenario with ground truth;
//! 2. [`sampling`] measures each band through a randomized, row-subsampled
//!    Walsh-Hadamard operator (`Y = S X`, applied via the fast transform);
//! 3. [`solver`] reconstructs each band by constrained split Bregman
//!    minimization of the Haar-domain l1 norm subject to `y = S H^{-1} u`;
//! 4. [`detection`] scores raw and reconstructed videos with the adaptive
//!    coherence estimator, bulk coherence, persistence filtering, and
//!    background-calibrated thresholds.
//!
//! [`cube`] holds the data model (cubes, videos, flattening) and the HSC
//! file format; [`wavelet`] the orthonormal 1-D Haar transform both the
//! solver and the compressibility assumptions rest on.

pub mod cube;
pub mod detection;
pub mod error;
pub mod sampling;
pub mod solver;
pub mod synth;
pub mod wavelet;

pub use cube::{CubeVideo, FlatCube, HyperCube, Spectrum};
pub use error::{CoreError, Result};
pub use sampling::{Measurements, MeasurementVideo, SamplingOperator};
pub use solver::{SolverConfig, SolverReport};
pub use detection::{
    BackgroundModel, Centering, DetectionConfig, DetectionMap, DetectionSeries, Statistic,
};
pub use synth::{GroundTruth, SynthConfig};
