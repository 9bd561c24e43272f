//! Portfolio sets as convex polytopes.
//!
//! The crate covers three connected pieces of work:
//!
//! * geometry of portfolio domains (the long-only simplex and the
//!   norm-constrained fully-invested polytope), exact simplex-section
//!   volumes and quadratic-utility optimization ([`domain`]);
//! * return/volatility copulae over the simplex, the diagonal-band crisis
//!   indicator and copula clustering ([`copula`], [`cluster`], [`market`]);
//! * allocation strategies modelled as truncated log-concave densities,
//!   their mixtures, and the portfolio score obtained by MCMC integration
//!   ([`sampler`], [`strategy`], [`score`]).
//!
//! All numerical code is generic over a [`Scalar`] (implemented for `f32`
//! and `f64`); the `f64` instantiations are re-exported under short aliases.

pub mod cluster;
pub mod copula;
pub mod domain;
mod error;
pub mod linalg;
pub mod lp;
pub mod market;
pub mod sampler;
mod scalar;
pub mod score;
pub mod stats;
pub mod strategy;
pub mod svg;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Long-only or norm-constrained portfolio domain in `f64`.
pub type Domain = domain::PortfolioDomain<f64>;
/// Full-dimensional reduction of a [`Domain`].
pub type FullDim = domain::FullDimDomain<f64>;
/// Return/volatility copula in `f64`.
pub type CopulaF64 = copula::Copula<f64>;
/// Dated asset-return panel in `f64`.
pub type Panel = market::ReturnsPanel<f64>;
/// Covariance estimate in `f64`.
pub type Covariance = market::CovarianceEstimate<f64>;
/// Mixed allocation strategy in `f64`.
pub type Mixture = strategy::MixtureStrategy<f64>;
/// Per-component score integrals in `f64`.
pub type Integrals = score::ComponentIntegrals<f64>;
