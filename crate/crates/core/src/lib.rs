//! Corpus engineering and evaluation toolkit for text-to-speech pipelines.
//!
//! The crate is organized around five areas:
//!
//! - [`dsp`]: WAV decoding, mel spectrograms, and silence measurement
//! - [`corpus`]: manifest records, transcript segmentation, and filtering
//! - [`metrics`]: objective evaluation metrics (CER, SECS, SpeechBERTScore,
//!   duration equality) and MOS aggregation
//! - [`archkernel`]: toy-scale attention, perceiver resampling, vector
//!   quantization, and sampling kernels
//! - [`losses`]: language-model and GAN training-loss formulas with a
//!   finite-difference gradient checker
//!
//! Batch entry points run data-parallel when the `parallel` feature is
//! enabled (the default) and fall back to sequential loops otherwise.
//! Outputs are identical either way.

pub mod archkernel;
pub mod batch;
pub mod config;
pub mod corpus;
pub mod dsp;
pub mod losses;
pub mod metrics;
pub mod rng;
