//! Stochastic local interaction (SLI) models for space-time interpolation.
//!
//! An SLI model couples each observation only to its kernel-weighted space-time
//! neighbors, so the precision matrix of the joint Gaussian is sparse and is
//! assembled directly rather than by inverting a covariance. The crate covers
//! neighborhood geometry, weight and precision assembly, sparse factorization,
//! maximum likelihood fitting, prediction with conditional variances,
//! cross validation and a synthetic field generator.
//!
//! ```no_run
//! use sli::{fit, predict, simulate_grf, FitConfig, GrfSpec, KernelFunction, MetricSpec, STPoint, TrendBasis};
//!
//! let data = simulate_grf(&GrfSpec { seed: 7, ..Default::default() })?;
//! let config = FitConfig::from_ols(&data, TrendBasis::constant(), MetricSpec::separable(), KernelFunction::Quadratic)?;
//! let model = fit(&data, &config)?;
//! let out = predict(&model, &[STPoint::new(vec![50.0, 50.0], 25.5)], 0.95)?;
//! println!("{} +/- {}", out.mean[0], out.variance[0].sqrt());
//! # Ok::<(), sli::SliError>(())
//! ```

pub mod error;
pub mod estimate;
pub mod evaluate;
pub mod geometry;
pub mod kernels;
pub mod optimize;
pub mod precision;
pub mod predict;
pub mod simulate;
pub mod sparse_linalg;
pub mod trend;

pub use error::{Result, SliError};
pub use estimate::{fit, nll, profile_lambda, FitConfig, FitDiagnostics, FittedModel, LambdaMode, ParamBounds, SliParams};
pub use evaluate::{metrics, one_slice_out, CvMode, CvReport, MetricSet};
pub use geometry::{compute_bandwidths, BandwidthSpec, Bandwidths, MetricKind, MetricSpec, STDataset, STPoint};
pub use kernels::{build_weights, DiagonalConvention, KernelFunction, WeightMatrix};
pub use optimize::{minimize_box, BoxOptions, Bounds, Termination};
pub use precision::{assemble_blocks, assemble_j, BlockPrecision, C0Convention, ModelConventions, PrecisionParams};
pub use predict::{predict, predict_slice, predict_with, PredictOptions, PredictionResult, VarianceMode};
pub use simulate::{simulate_grf, GrfSpec};
pub use sparse_linalg::{factorize, CsrMatrix, Factorization, SparseSymMatrix};
pub use trend::{BasisTerm, TrendBasis, TrendModel};
