// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reasons vectors, doxastic strengths, and the experiment machinery around
//! them: a small reverse-mode autodiff engine, a sequential network library,
//! activation analysis, activation patching, and reasons-based objectives.
//!
//! The calculus lives in [`reasons`]. Everything else exists to produce
//! reasons vectors from real networks and to act on them.

pub mod analysis;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod interventions;
pub mod nn;
pub mod numeric;
pub mod objectives;
pub mod reasons;
pub mod registry;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
