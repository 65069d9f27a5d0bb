//! Numerical building blocks: quadrature, normal quantiles, simplex search.

pub mod nelder_mead;
pub mod normal;
pub mod quadrature;

pub use nelder_mead::{minimize, NelderMeadOptions, NelderMeadResult};
pub use normal::{normal_cdf, normal_quantile, normal_sf};
pub use quadrature::{integrate, integrate_scalar, Integral, QuadratureOptions};
