//! Discrete differential geometry and time integration for the hyperbolic
//! geometric flow `∂²g/∂t² = −2 Ric` on coordinate-chart grids.
//!
//! The crate is `no_std` (with `alloc`). File formats, configuration and the
//! command line live in the companion `hgf-cli` crate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::vec_init_then_push)]
#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod flow;
pub mod grid;
pub mod linalg;
pub mod presets;
mod par;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use field::{Field, Rank};
pub use grid::{BoundaryMode, ChartGrid, Region};
pub use par::pairwise_sum;
