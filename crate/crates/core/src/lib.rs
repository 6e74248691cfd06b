//! Simulation of a three-dimensional air-to-air UAV link.
//!
//! The crate covers link geometry and Euler-angle poses ([`geom`]), short
//! dipole radiation patterns with fabrication impairments ([`antenna`]),
//! Rician small-scale fading with log-distance path loss ([`channel`]),
//! generation and episodic sampling of labeled RSS datasets ([`dataset`]),
//! the non-learning angle estimators ([`estimate`]) and Hoeffding
//! confidence bounds for classifier accuracy ([`bounds`]).
//!
//! Angles are radians everywhere in this crate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antenna;
pub mod bounds;
pub mod channel;
pub mod dataset;
mod error;
pub mod estimate;
pub mod geom;
pub mod rng;

pub use error::{Error, Result};
