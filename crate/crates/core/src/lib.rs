//! Discrete-time handover simulator and analytical toolkit for dual-band
//! heterogeneous networks built from macrocells (band F1) and low-power
//! phantom cells (band F2).
//!
//! The crate is organised around the simulation pipeline:
//!
//! - [`scenario`] — network geometry, cell placement, user population and
//!   straight-line mobility with boundary reflection.
//! - [`radio`] — path loss, log-normal shadowing and SINR for both tiers
//!   in indoor and outdoor environments.
//! - [`attachment`] — cell association, the three handover procedures of
//!   the dual-attachment scheme, and a single-attachment comparator.
//! - [`analysis`] — closed-form probability toolkit: guard-channel
//!   blocking, dwell-time competition, Gaussian SINR level crossing and a
//!   three-state Markov chain over connection states.
//! - [`engine`] — the deterministic fixed-step simulation loop, metric
//!   collection and CSV emission.
//!
//! Everything is reproducible: all randomness flows from explicit 64-bit
//! seeds through counter-based ChaCha streams, and identical configs
//! produce byte-identical outputs.

pub mod analysis;
pub mod attachment;
pub mod engine;
pub mod error;
pub mod geom;
pub mod radio;
pub mod scenario;

pub use error::Error;

/// Convenience result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
