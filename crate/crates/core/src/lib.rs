//! Mixtures of common skew-t factor analyzers.
//!
//! Model-based clustering where every component shares a `p × q` loading
//! matrix `Λ` and a diagonal noise covariance `Ψ`, while component-specific
//! factor means, skewness vectors, factor covariances and degrees of freedom
//! live in the `q`-dimensional factor space. Parameters are estimated by
//! AECM, models are compared with BIC, and clusterings with the adjusted
//! Rand index.
//!
//! The numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, with `*32` variants for `f32`.

pub mod aecm;
pub mod densities;
pub mod error;
pub mod gig;
pub mod init;
pub mod io;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod simulate;
pub mod specfun;

pub use aecm::{fit, fit_from, FitConfig, SkewMode};
pub use error::{Error, Result};
pub use init::{InitConfig, InitMethod, Linkage};
pub use io::ModelFile;
pub use model::ModelId;
pub use scalar::Scalar;

pub type DataMatrix = model::DataMatrix<f64>;
pub type MixtureParams = model::MixtureParams<f64>;
pub type FitResult = aecm::FitResult<f64>;
pub type SelectionGrid = metrics::SelectionGrid<f64>;
pub type GigParams = gig::GigParams<f64>;

pub type DataMatrix32 = model::DataMatrix<f32>;
pub type MixtureParams32 = model::MixtureParams<f32>;
pub type FitResult32 = aecm::FitResult<f32>;
