//! Simulation and analysis library for stimulated photon echoes in a
//! three-level lambda medium whose excited-state coherence is parked in a
//! long-lived spin state by a pair of population-transfer pulses.
//!
//! Two independent views of the same physics live here:
//!
//! * [`quantum`], [`pulse`] and [`ensemble`] integrate the density matrix of
//!   every detuning class through an explicit pulse sequence and assemble
//!   the macroscopic polarization whose rephasing peak is the echo;
//! * [`leakage`] evaluates the closed-form combinatorial model of imperfect
//!   transfer pulses, tracking where population leaks and which part of it
//!   returns with the phase needed to rejoin the echo.
//!
//! The numeric results of one are checked against the other in the
//! integration suites.

pub mod ensemble;
pub mod fmt;
pub mod leakage;
pub mod mat3;
pub mod pulse;
pub mod quantum;

pub use num_complex::Complex64;
