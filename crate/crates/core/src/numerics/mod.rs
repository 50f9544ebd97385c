//! Dense small-matrix kernel: symmetric and general eigenvalues, SVD, and
//! finite-difference Jacobians.

mod eigen;
mod finite_diff;
mod matrix;
mod svd;
pub mod vector;

pub use eigen::{eig_general, sym_eig, Spectrum};
pub use finite_diff::{default_fd_step, fd_jacobian, fd_jacobian_with_steps};
pub use matrix::Matrix;
pub use svd::{sigma_min, singular_values, spectral_norm, svd, Svd};
