pub mod circuit;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod models;
pub mod operator;
pub mod spectral;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use models::{ModelKind, ModelSpec};
pub use num_complex::Complex64 as C64;
pub use operator::{Basis, OperatorSum, SiteOp, StateVector};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/circuit.md")]
    mod circuit {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
