//! Simulation library for a symmetry-protected ring qubit.
//!
//! The library covers the full modelling chain for a four-island
//! superconducting ring device whose two lowest eigenstates form a
//! symmetry-protected qubit manifold:
//!
//! * [`spin`] — the underlying flip-flop spin chain, its protection
//!   diagnostics and phase scans;
//! * [`symmetry`] — excitation-number, translation and inversion operators
//!   and state labelling;
//! * [`circuit`] — charge-basis quantization of the four-node ring circuit;
//! * [`coherence`] — dielectric loss, quasiparticle tunneling with gap
//!   engineering, and 1/f-noise dephasing estimates;
//! * [`disorder`] — Monte Carlo over fabrication disorder;
//! * [`dynamics`] — resonator coupling, Purcell initialization, STIRAP
//!   transfer and dispersive readout;
//! * [`numerics`] — the shared sparse linear algebra and RNG substrate.
//!
//! Energies are frequencies E/h in GHz throughout, rates in Hz, times in
//! seconds, flux in units of Phi0, node charge in Cooper pairs (the
//! quasiparticle module works at electron resolution internally).

pub mod circuit;
pub mod coherence;
pub mod config;
pub mod disorder;
pub mod dynamics;
pub mod error;
pub mod numerics;
pub mod report;
pub mod spin;
pub mod symmetry;
pub mod units;

pub use error::{Error, Result};
