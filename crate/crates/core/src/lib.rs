//! Multivariate orthogonal Laurent polynomials on the unit torus.
//!
//! The construction runs through the block Gauss-Borel factorization of a
//! CMV-ordered moment matrix: multi-indices are arranged by longitude shells
//! ([`longilex`]), measures enter through their Fourier coefficients
//! ([`measure`]), the moment matrix and its structural symmetries live in
//! [`moments`], and the factorization itself in [`gaussborel`]. On top of
//! that sit the biorthogonal families and kernel identities ([`opbasis`]),
//! the shift/reversal matrix algebra with orthant kernels ([`spectral`]),
//! Darboux transformations on poised node sets ([`darboux`]), and Toda-type
//! continuous and discrete deformations ([`toda`]). The [`verify`] module
//! bundles the acceptance checks the CLI and test suite both run.

pub mod darboux;
pub mod error;
pub mod gaussborel;
pub mod laurent;
pub mod longilex;
pub mod measure;
pub mod moments;
pub mod opbasis;
pub mod spectral;
pub mod toda;
pub mod verify;

pub use error::{Error, Result};
pub use gaussborel::{factorize, Factorization};
pub use laurent::{LaurentPolynomial, OrthantLabel};
pub use longilex::{enumerate_shell, shell_size, LongilexBasis, MultiIndex};
pub use measure::{DeformedMeasure, FourierOracle, GridOracle, HaarOracle};
pub use moments::{build_moment, MomentMatrix};
