//! Register-level quantum-state simulation and low-depth symmetrization
//! algorithms: quantized sorting networks, the LES/permutation engine,
//! symmetrization of lists with repetitions, conversion between occupation
//! numbers and mode lists, Dicke state preparation, and a multi-photon
//! interferometric-imaging pipeline. Everything runs against brute-force
//! oracles at small sizes.

pub mod convert;
pub mod error;
pub mod interferometry;
pub mod les;
pub mod perm;
pub mod scan;
pub mod sort;
pub mod symmetrize;
pub mod state;

pub use error::{Error, Result};
pub use state::{BasisConfig, DepthReport, Layout, RegisterSpec, SparseState, Val};
