//! Core algorithms for a neuromorphic tactile texture pipeline.
//!
//! The crate covers the full signal path from synthetic tactile traces to
//! classified textures:
//!
//! 1. [`texture`] / [`drum`] — parametric texture plates and a rotating-drum
//!    trial simulator producing 18-channel tactile traces.
//! 2. [`encode`] — slowly-adapting (SA) and rapidly-adapting (RA) spike
//!    encoding built on an Izhikevich tonic-spiking neuron ([`neuron`]).
//! 3. [`calibrate`] — per-cell force scaling coefficients solved by binary
//!    search so SA spike rates become contact-force invariant.
//! 4. [`warp`] — spike-time scaling that makes spike trains scanning-speed
//!    invariant, in both offline (constant speed) and streaming (batched
//!    velocity estimate) forms.
//! 5. [`features`] — windowed spike rate / spike count feature vectors.
//! 6. [`pca`] / [`lda`] / [`eval`] / [`stats`] — dimensionality reduction,
//!    classification, cross-validation protocols, and the statistical tests
//!    used for reporting.
//! 7. [`rt`] — building blocks for the simulated real-time scanning system
//!    (velocity profiles, session drift, streaming scans).
//!
//! The crate is `no_std`-compatible (with `alloc`): disable the default
//! `std` feature for embedded use. All floating-point math routes through a
//! small internal shim so the same code builds with or without `std`.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod calibrate;
pub mod drum;
pub mod encode;
pub mod eval;
pub mod features;
pub mod filter;
pub mod lda;
mod math;
pub mod neuron;
pub mod pca;
pub mod rt;
pub mod seeds;
pub mod spike;
pub mod stats;
pub mod texture;
pub mod warp;
