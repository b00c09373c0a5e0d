//! Time-frequency analysis on finite truncations of `Zⁿ × Tⁿ`.
//!
//! Signals live on a box of the integer lattice and the torus is sampled on a
//! uniform grid fine enough that every integral this crate takes is an exact
//! finite sum. On top of that model sit the short-time Fourier transform,
//! Orlicz and modulation-space norms, localization operators with their
//! spectral summaries, and a seeded harness that checks the inequalities
//! between them on random ensembles.

pub mod error;
pub mod io;
pub mod lattice;
pub mod locop;
pub mod modulation;
pub mod orlicz;
pub mod stft;
pub mod verify;
pub mod young;

pub use error::{Error, Result};
pub use lattice::{Cube, LatticeSpec, PhaseSpaceField, Signal, TorusGrid};
