// SPDX-License-Identifier: MIT OR Apache-2.0

//! The reasons calculus.
//!
//! A finite [`WorldSet`] carries [`Belief`]s (probability vectors) and
//! [`ReasonVector`]s (real vectors indexed by worlds). A reason updates a
//! belief by exponential reweighting, and its doxastic strength for a
//! [`Proposition`] is half the log ratio of posterior odds to prior odds.
//! All arithmetic is `f64`; exponentials are always taken after a max shift,
//! and strengths are evaluated directly in log-space.

mod belief;
mod proposition;
mod reason;
mod strength;
mod worlds;

pub use belief::Belief;
pub use proposition::Proposition;
pub use reason::ReasonVector;
pub use strength::{strength, strength_profile, update};
pub use worlds::{AttrValue, WorldSet};

#[cfg(test)]
mod props;
