//! Particle gradient flows for two-layer networks in the mean-field
//! scaling.
//!
//! The crate trains ensembles of hidden-unit "particles" by gradient
//! descent, integrates the equivalent radial/angular dynamics on the
//! sphere, evaluates the mean-potential optimality certificate for
//! square-loss runs, and provides the fixed-feature kernel baselines
//! (empirical and closed-form arc-cosine kernel, hard-margin solvers)
//! plus implicit-bias diagnostics used by the experiment harnesses.

pub mod datagen;
pub mod error;
pub mod flow;
pub mod kernel;
pub mod linalg;
pub mod loss;
pub mod margin;
pub mod model;
pub mod potential;
pub mod seeding;
pub mod sphere;
pub mod testing;

pub use error::{Error, Result};
pub use loss::{Dataset, Loss};
pub use model::{Activation, Ensemble, Particle};
