//! Numerical lab for sharp bilinear Strichartz estimates: closed-form
//! constants, grid evaluation of both sides, Gaussian closed forms, and the
//! checks built on them.

pub mod ascent;
pub mod datum;
pub mod error;
pub mod grid;
pub mod mb;
pub mod oracle;
pub mod quadrature;
pub mod shell;
pub mod special;
pub mod spectral;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};

/// Version of this library, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
