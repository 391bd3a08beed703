//! Simple exclusion on random environments.
//!
//! The crate builds finite periodized samples of random environments, solves
//! corrector problems for the effective matrix `D`, runs the exclusion process
//! through its graphical construction and compares empirical densities with
//! the heat semigroup generated by `∇·D∇`.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`). Times, clock
//! events and random draws always use `f64`.

pub mod environment;
pub mod error;
pub mod exclusion;
pub mod homogenization;
pub mod hydrodynamics;
pub mod linalg;
pub mod quadrature;
pub mod random_walk;
pub mod scalar;
pub mod seeds;
pub mod union_find;

pub use error::{Result, SepError};
pub use scalar::Scalar;

pub type Environment64 = environment::Environment<f64>;
pub type Environment32 = environment::Environment<f32>;
