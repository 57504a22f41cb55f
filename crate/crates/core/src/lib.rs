//! Gaussian-process prolongation for block-structured AMR.
//!
//! The pipeline is split bottom-up: [`smallmat`] and [`kernels`] feed the
//! one-time weight factory in [`weights`], whose output drives the run-time
//! engine in [`prolong`]. [`amr`] and [`solver`] form a small 2-D advection
//! harness that exercises the engine on a real hierarchy.

pub mod error;
pub mod amr;
pub mod kernels;
pub mod prolong;
pub mod smallmat;
pub mod solver;
pub mod stencil;
pub mod weights;

pub use error::{Error, Result};
pub use kernels::KernelParams;
pub use prolong::{CoarseWindow, ProlongMethod, ProlongResult};
pub use stencil::{FinePointSet, StencilGeometry};
pub use weights::{DataMode, GpConfig, ProlongWeights};
