//! Nonparametric detection of a spatially correlated random event from
//! sensor observations compressed over a multiple access channel.
//!
//! The pipeline is:
//!
//! 1. [`scenario`] draws raw observations on an equally spaced 1-D array,
//!    with a geometric (power exponential) spatial correlation.
//! 2. [`compression`] projects each snapshot through a random matrix `A`
//!    (orthonormal rows or sparse ternary) and adds fusion-center noise.
//! 3. [`detector`] rebuilds the leading first-row coefficients of the banded
//!    Toeplitz covariance by least squares on the compressed sample
//!    covariance and forms the covariance-ratio statistic. An energy
//!    detector with a closed-form threshold is provided for comparison.
//! 4. [`experiment`] runs Monte Carlo calibration, rate estimation, ROC
//!    curves and sweeps with per-trial deterministic seeding.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod compression;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod scenario;
pub mod stats;

pub use compression::{mac_transmit, ProjectionKind, ProjectionMatrix, SampleBatch};
pub use detector::{BkBasis, DetectorKind, DetectorOutput, DhatK};
pub use error::{Error, Result};
pub use experiment::{ExperimentPlan, MonteCarloResult, ProjectionSpec, RocCurve};
pub use linalg::{DenseMatrix, LowerTriangularFactor, SymmetricMatrix};
pub use scenario::{CorrelationModel, Hypothesis, Scenario, ScenarioConfig, SourceKind, ToeplitzCovariance};
