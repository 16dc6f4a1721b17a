//! Sparse-group boosting with ridge base-learners parameterized by
//! effective degrees of freedom, plus simulation-based balancing of
//! null selection frequencies.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! `std` feature; `std` only adds replicate-level parallelism.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod balance;
pub mod boost;
pub mod error;
pub mod family;
pub mod interpret;
pub mod model;
pub mod ridge;
pub mod rng;
pub mod sim;
pub mod tune;

pub use error::{Error, Result};
