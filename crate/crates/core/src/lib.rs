//! Reinforcement-learning tuning of a smooth-and-clip source finder.
//!
//! The crate bundles everything needed to tune the four key parameters of a
//! SoFiA-2 style pipeline with a Soft Actor-Critic agent:
//!
//! * [`cube`] synthesises HI-like data cubes with an exact truth catalog,
//! * [`finder`] runs noise normalisation, multi-scale smooth-and-clip
//!   finding, linking and reliability filtering,
//! * [`scorer`] cross-matches catalogs and produces a detection score,
//! * [`env`] wraps pipeline evaluation as an RL environment with shaped
//!   rewards,
//! * [`nn`] and [`sac`] provide the agent itself,
//! * [`forest`] ranks parameter importance from training logs.
//!
//! Data-parallel inner loops (smoothing kernels, patches, trees) go through
//! [`exec`], which uses rayon when the `parallel` feature is enabled and
//! falls back to plain iteration otherwise.

// `!(x >= lo)` style comparisons are there to reject NaN along with
// out-of-range values; index loops read better in the matrix code.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod binio;
pub mod cube;
pub mod env;
pub mod error;
pub mod exec;
pub mod finder;
pub mod forest;
pub mod nn;
pub mod sac;
pub mod scorer;
pub mod seed;

pub use error::{Error, Result};
