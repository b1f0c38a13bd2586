//! Operational entropies and protocol bound checks over finite-dimensional
//! von Neumann algebras.
//!
//! Algebras are direct sums of matrix blocks with multiplicities. States are
//! stored as one density per block. Every entropy is the value of a small
//! semidefinite program solved by the in-crate interior-point solver.

pub mod algebra;
pub mod entropy;
pub mod hashing;
pub mod linalg;
pub mod metrics;
pub mod protocols;
pub mod rng;
pub mod sdp;
pub mod selftest;
pub mod states;

pub use algebra::{Algebra, AlgebraElement, AlgebraError};
pub use entropy::{EntropyError, EntropyResult};
pub use hashing::{ConcreteHash, HashFamily, HashKind, ToeplitzHash};
pub use linalg::{CMatrix, Keep, C64};
pub use protocols::{DcReport, PaReport, Povm, ProtocolError};
pub use sdp::{SdpProblem, SdpSolution, SdpStatus};
pub use states::{CqState, Purification, State, StateError};

/// Crate version, echoed into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
