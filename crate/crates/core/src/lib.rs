//! Matrix product state time evolution for time-dependent nearest-neighbour
//! spin-1 chains.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! pieces: dense tensor kernels, the MPS itself, the driven NV-chain model,
//! second-order TEBD with left-endpoint and Simpson-averaged Hamiltonians, and
//! a dense state-vector reference integrator. IO, configuration files, timing
//! and the benchmark harness live in the `tdmps` crate.
//!
//! Conventions used throughout:
//!
//! * time in µs, Hamiltonian coefficients in rad/µs (angular MHz);
//! * spin-1 basis ordered `m = +1, 0, -1`;
//! * all dense data is row-major;
//! * sites and bonds are indexed from zero, bond `j` couples sites `j` and
//!   `j + 1`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod oracle;
pub mod tebd;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{BondTerm, Envelope, NvChainModel, PulseSpec, TimeDependentHamiltonian};
pub use mps::MpsState;
pub use tebd::{evolve, step, StepperKind};
pub use tensor::{DenseTensor, SvdTruncation};

/// Complex double used for every amplitude and matrix entry.
pub type C64 = num_complex::Complex64;
