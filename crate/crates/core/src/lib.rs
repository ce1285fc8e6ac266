//! Core of the MYOE agent: a recurrent world model with a goal-queried
//! mixture of preference priors, preference-regret actor-critic learning
//! in imagination, behavior-cloning baselines, and the miniature
//! goal-conditioned environments they are trained on.
//!
//! The crate is `no_std` (it needs `alloc`). Transcendental functions go
//! through `libm` so results are identical on every target. File formats,
//! logging and the command line live in the `myoe` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod agent;
pub mod baselines;
pub mod behavior;
pub mod config;
pub mod env;
pub mod harness;
mod error;
pub mod numerics;
pub mod qmop;
pub mod real;
pub mod replay;
pub mod rng;

pub use error::{Error, Result};
pub use real::Real;
