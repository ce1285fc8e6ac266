//! Deterministic numerics: Gaussian algebra, softmax, a reverse-mode tape
//! over small dense matrices, tiny networks, Adam, and a finite-difference
//! gradient checker.

pub mod gaussian;
pub mod gradcheck;
pub mod nn;
pub mod optim;
pub mod params;
pub mod softmax;
pub mod tape;
pub mod tensor;

pub use gaussian::{entropy_diag_gaussian, kl_diag_gaussian, reparameterized_sample, DiagGaussian};
pub use gradcheck::{grad_check, GradCheckReport};
pub use nn::{Dense, GruCell, Mlp};
pub use optim::{Adam, AdamConfig};
pub use params::{GradTable, Owner, OwnerMask, ParamId, ParameterSet};
pub use softmax::{softmax, stable_sum, MixtureGate};
pub use tape::{Tape, Var};
pub use tensor::Matrix;
