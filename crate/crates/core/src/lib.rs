//! Constrained discrete flat flow for anisotropic surface diffusion with
//! elasticity on closed planar curves.

pub mod anisotropy;
pub mod cli;
pub mod config;
pub mod curve;
pub mod elasticity;
pub mod error;
pub mod fields;
pub mod flow;
pub mod hminus;
pub mod io;
pub mod optim;
pub mod quadrature;
pub mod spectral;
pub mod step;
pub mod verify;

pub use anisotropy::Anisotropy;
pub use curve::{ClosedCurve, HeightField};
pub use error::{Error, Result};

/// Planar vector.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2×2 matrix.
pub type Mat2 = nalgebra::Matrix2<f64>;

// The guide's code blocks run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/curves.md")]
    mod curves {}
    #[doc = include_str!("../../../book/src/anisotropy.md")]
    mod anisotropy {}
    #[doc = include_str!("../../../book/src/distance.md")]
    mod distance {}
    #[doc = include_str!("../../../book/src/elasticity.md")]
    mod elasticity {}
    #[doc = include_str!("../../../book/src/step.md")]
    mod step {}
    #[doc = include_str!("../../../book/src/flow.md")]
    mod flow {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
