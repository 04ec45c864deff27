//! Bayesian joint modeling of dynamic multiplex graphs and nodal attributes
//! with neural-network Gaussian-process factor priors.

pub mod align;
pub mod archive;
pub mod diagnostics;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod kernel;
pub mod model;
pub mod polya_gamma;
pub mod predict;
pub mod simulate;

pub use error::{Error, Result};
