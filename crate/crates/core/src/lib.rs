//! Non-equilibrium stationary states of finite quantum systems weakly coupled
//! to bosonic reservoirs.
//!
//! The pipeline is [`model`] (system and baths) → [`rates`] (susceptivities
//! and transition rates) → [`dynamics`] (generators, evolution, stationary
//! state) → [`currents`], [`linear`], [`kms`]. [`three_level`] holds closed
//! forms for the three-level model used as an oracle.

pub mod currents;
pub mod dynamics;
pub mod kms;
pub mod linalg;
pub mod linear;
pub mod model;
pub mod quadrature;
pub mod rates;
pub mod report;
pub mod scenario;
pub mod three_level;
