//! Solvers for stochastic variational inequalities driven by Markovian noise.
//!
//! The crate is `no_std` compatible (with `alloc`); disable default features to
//! drop the standard library. IO, configuration and the benchmark CLI live in
//! the companion `markov-vi-bench` crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod glm_ar;
pub mod gridworld;
pub mod markov;
pub mod policy_eval;
pub mod solvers;
pub mod vi_core;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
