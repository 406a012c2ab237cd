//! Search-distribution learning for black-box constraint satisfaction.
//!
//! The crate trains a masked autoregressive mixture-density network to put
//! near-uniform probability mass on the region of a design space where a
//! constraint `f(x) <= 0` holds, using an entropy-regularized score-function
//! gradient with a replay buffer. Classic cross-entropy-method baselines
//! (adaptive variance, fixed variance, buffer-based single Gaussian, buffer
//! KDE), the standard benchmark objectives, and the evaluation metrics live
//! alongside it so all algorithms can be compared on identical budgets.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats and the CLI live in
//! the companion `gacem-cli` crate. Wall-clock timing is injected by the
//! caller as a closure so the core stays free of platform dependencies.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod buffer;
pub mod cem;
pub mod error;
pub mod gacem;
pub mod grid;
pub mod masks;
pub mod math;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod optim;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
