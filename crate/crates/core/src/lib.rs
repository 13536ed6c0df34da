//! Finite elements for transformation-based elastic cloaks in two dimensions.
//!
//! * [`materials`] / [`tensor`]: isotropic tensors and quadratic-form bounds
//! * [`transform`]: Kohn's map, Cosserat and Willis push-forwards
//! * [`layered`]: symmetrized Cosserat tensor, laminate averaging, layered cloaks
//! * [`mesh`]: constrained Delaunay meshes with region and interface tags
//! * [`fem`]: P1/P2 assembly and the boundary-value solvers
//! * [`analysis`]: norms, log-log fits and the sweep runners

// Index loops mirror the tensor notation; `!(x > 0.0)` rejects NaN on purpose.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fem;
pub mod layered;
pub mod materials;
pub mod mesh;
pub mod par;
pub mod tensor;
pub mod transform;

pub use error::{Error, Result};

/// Version of this library.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
