//! Large-time moment statistics of the parabolic Anderson model with
//! spatially correlated Gaussian noise.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod chaos;
pub mod error;
pub mod fk;
pub mod linalg;
pub mod quadrature;
pub mod serde_float;
pub mod special;
pub mod spectral;
pub mod variational;

pub use error::{PamError, Result};
