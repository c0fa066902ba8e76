//! Secret-key rates for MDIQKD and BB84 with uncharacterized qubit sources.
//!
//! Security rests on mismatched-basis click statistics: the probabilities
//! `p(1|x,y)` observed when the two parties pick different encoding bases
//! constrain how far the basis-1 states can deviate from the basis-0 states,
//! which bounds the phase error rate without trusting the source.

pub mod attack;
pub mod channel;
pub mod commands;
pub mod decoy;
pub mod error;
pub mod quantum;
pub mod security;
pub mod stats;
pub mod sweep;

pub use error::{Error, Result};
