//! Feature-overcorrelation diagnostics and decorrelation training for deep
//! graph neural networks.
//!
//! The crate is `no_std` with `alloc`: everything here is pure computation on
//! in-memory values. File formats, the command-line runner and wall-clock
//! timing live in the `decorr` crate.
//!
//! Layout:
//!
//! - [`tensor`]: row-major [`DenseMatrix`] and [`SparseCsr`].
//! - [`autodiff`]: a define-by-run [`Tape`] with reverse-mode gradients.
//! - [`graph`]: the [`Graph`] type, propagation operators, splits, DropEdge,
//!   largest connected component and synthetic generators.
//! - [`metrics`]: Pearson correlation, `Corr`, `SMV` and the propagation and
//!   transformation studies.
//! - [`model`]: GCN, ChebyNet and MLP stacks with BatchNorm, PairNorm and
//!   residual connections.
//! - [`decorr`]: the explicit decorrelation loss, the mutual-information loss
//!   and the combined training objective.
//! - [`optim`] and [`train`]: Adam and the full training loop.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod decorr;
mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod train;

pub use autodiff::{Gradients, Tape, Var};
pub use error::{Error, Result};
pub use graph::{Graph, Split};
pub use tensor::{DenseMatrix, SparseCsr};
