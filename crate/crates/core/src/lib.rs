//! Gaussian approximation diagnostics for randomly weighted sums of
//! independent random vectors.
//!
//! Given independent standardized vectors X₁,…,Xₙ in ℝ^k and a weight vector
//! θ on the unit sphere of ℝⁿ, this crate measures how far the law of
//! Σ θⱼXⱼ is from the standard Gaussian over a class of sets, and provides
//! the constructive machinery behind such bounds: exact moments and
//! cumulants of finite atom laws, Edgeworth correction polynomials,
//! unit-ball truncation with renormalization, sphere-uniform weight
//! sampling, characteristic-function inversion in one dimension, and a
//! deterministic experiment harness that contrasts the typical-weights decay
//! rate with the equal-weights one.

pub mod charfun;
pub mod discrepancy;
pub mod edgeworth;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod fit;
pub mod linalg;
pub mod moments;
pub mod multiindex;
pub mod rng;
pub mod special;
pub mod sphere;
pub mod truncation;

pub use error::{Error, Result};
pub use exec::ExecPolicy;
pub use linalg::SymMat;
pub use moments::{AtomLaw, CumulantTable, DistributionSpec, MomentTable};
pub use multiindex::MultiIndex;
