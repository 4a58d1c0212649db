//! Delay-Doppler link-level simulator for joint communication and monostatic
//! sensing.
//!
//! The crate is organised around the delay-Doppler (DD) signal representation:
//! data symbols live on an `M x N` DD grid, propagate through geometric
//! point-scatterer channels as twisted circular convolutions, and come back as
//! radar echoes that the transmitter can matched-filter against its own frame.
//! On top of that sit a tracker that turns echo estimates into position and
//! velocity state, a precompensation step that lets the next frame be
//! pre-shifted so the receiver sees an (almost) clean channel, capacity /
//! error-bound metrics, and a Monte-Carlo harness comparing the
//! sensing-assisted link against ideal and pilot-based baselines.
//!
//! Modules:
//! - [`modem`]: DD grid/frame types and the 2-D symplectic and per-slot
//!   multicarrier transforms.
//! - [`geometry`]: targets, arrays, steering vectors, DD path construction and
//!   channel application.
//! - [`sensing`]: matched filter, LMMSE estimation, peak picking, beam-sweep
//!   angle estimation and estimation error bounds.
//! - [`tracking`]: localisation, velocity estimation, state prediction and
//!   frame precompensation.
//! - [`metrics`]: capacity, BER, BPSK mapping, cross-correlation statistics
//!   and constrained power allocation.
//! - [`harness`]: scenario configuration, per-scheme simulation loops and
//!   result emission (CSV / JSON / SVG).

pub mod fft;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod modem;
pub mod sensing;
pub mod tracking;

pub use geometry::{ArrayConfig, CarrierConfig, DDPath, Target};
pub use harness::{BlockRecord, ScenarioConfig, Scheme};
pub use metrics::DesignResult;
pub use modem::{DDFrame, DDGrid, DDVector, Pulse, TFFrame, TimeSignal};
pub use sensing::SensingEstimate;
pub use tracking::TrackState;

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
