//! Tensor Tikhonov regularization under the t-product.
//!
//! The crate solves
//!
//! ```text
//! min_X ||A * X - B||_F^2 + lambda^2 ||X||_F^2
//! ```
//!
//! for third-order tensors, where `*` is the t-product. Two solvers are
//! provided: a Golub-Kahan-Tikhonov projection method ([`solvers::tgkt_solve`])
//! and an incremental update ([`solvers::irls_update`]) that folds a newly
//! arriving horizontal sample into an existing solution by solving a single
//! one-column subproblem.

pub mod bench;
pub mod error;
pub mod factor;
pub mod io;
pub mod krylov;
pub mod operator;
pub mod problems;
pub mod rng;
pub mod solvers;
pub mod spectral;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use spectral::{dft_tubes, idft_tubes, tprod, SpectralTensor};
pub use tensor::{Tensor3, TubalScalar};
