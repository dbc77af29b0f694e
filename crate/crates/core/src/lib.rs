//! Numerical laboratory for generalised Hermite-Einstein calculus on flat
//! complex tori ℂⁿ/(ℤ+iℤ)ⁿ.
//!
//! The lab pairs a Kähler form ω with a weakly positive, ∂∂̄-closed test form
//! Ω of bidegree (n−m, n−m) and works out the induced calculus: the second
//! order operator P φ = −(i∂∂̄φ ∧ ω^{m−1} ∧ Ω)/dV_ω, conformal rescaling of
//! fibre metrics to constant Einstein factor, (ω, Ω)-degrees and slopes of
//! bundles, curvature of sums and extensions, and the pointwise positivity
//! inequalities behind the slope-semistability of Hermite-Einstein bundles.
//! Everything is sampled on a uniform periodic grid with spectrally exact
//! differentiation, and every claim is checked against residual tolerances.

pub mod bundles;
pub mod config;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod he;
pub mod multi_index;
pub mod operator;
pub mod pointwise;
pub mod report;
pub mod scenarios;
pub mod stability;

pub use error::{Error, Result};



pub use pointwise::{FibreMetric, MatrixPQForm, PQForm};
