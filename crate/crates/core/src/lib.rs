//! Exact distribution of the number of real eigenvalues of elliptic real
//! Ginibre matrices, computed at arbitrary precision.
//!
//! The pipeline is: [`kernel`] builds the `N/2 × N/2` kernel matrix,
//! [`spectral`] diagonalizes it, and the eigenvalues (all in `(0,1)`) are the
//! Bernoulli parameters of the generating function used by [`distribution`],
//! [`saddle`] and [`gaussian`].

pub mod distribution;
pub mod error;
pub mod gaussian;
pub mod kernel;
pub mod precision;
pub mod quadrature;
pub mod saddle;
pub mod special;
pub mod spectral;

pub use distribution::{probabilities_convolution, probabilities_dft, RealCountDistribution};
pub use error::{Error, Result};
pub use kernel::{
    build_kernel, build_kernel_ginoe, build_kernel_hypergeometric, build_kernel_integral,
    EnsembleParams, KernelMatrix, Provenance,
};
pub use precision::PrecisionContext;
pub use spectral::{eigen_sym, Spectrum};
