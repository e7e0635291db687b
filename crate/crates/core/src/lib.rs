//! Spectral calculus on finite metric measure spaces and numerical checks of heat-kernel,
//! wave-propagation and Riesz-transform estimates.

// `!(x > 0.0)` is the NaN-rejecting guard used throughout; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod bundle;
pub mod cz_riesz;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod models;
pub mod multiplier;
pub mod quadrature;
pub mod report;
pub mod space;
pub mod wave_heat;

pub use bundle::{BlockNorm, BundleOperator, OperatorKernel, SpectralDecomposition, C64};
pub use error::{Error, Result};
pub use report::CheckReport;
pub use space::{DoublingProfile, Edge, MetricMeasureSpace};
