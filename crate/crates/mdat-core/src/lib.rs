//! Core of the many-to-one discrete auditory transform (MDAT).
//!
//! The forward transform maps a real signal, framed into 256-sample blocks,
//! onto critical-band perception variables: per-band energies and band
//! signal-to-noise ratios derived from a two-frame unpredictability measure.
//! The mapping is many-to-one; this crate also provides a closed-form
//! generalized inverse that rebuilds a DFT spectrum preserving each band's
//! energy and its unpredictability-weighted energy, plus an optional
//! constraint-preserving gradient flow that smooths the reconstructed
//! spectrum over the wide high-frequency bands.
//!
//! The crate is `no_std` (with `alloc`); file formats, WAV handling and the
//! command-line driver live in the companion `mdat` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bands;
pub mod forward;
pub mod invert;
pub mod matrix;
pub mod smooth;
pub mod spectrum;

pub use num_complex::Complex64;

pub use bands::{Band, BandTable};
pub use forward::{AnalyzedFrame, Analysis, Analyzer, PerceptionVector, SideInfo};
pub use invert::{InvertOptions, InvertReport, InversionMode};
pub use spectrum::{Frame, SpectralFrame, FRAME_LEN};
