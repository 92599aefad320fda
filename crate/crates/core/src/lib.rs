//! Completeness laboratory for integer sequences whose gaps are iid.
//!
//! The crate is organized around the objects a completeness experiment
//! touches, bottom-up:
//!
//! * [`gapdist`]: gap laws, seeded sampling, moments and support structure.
//! * [`weights`]: realized weight sequences and the reflection diagnostics
//!   used to certify sums of two weights.
//! * [`sumset`]: the packed-bit representability engine and its brute-force
//!   oracle.
//! * [`density`]: counting functions, Schnirelmann densities and the Mann
//!   inequality checker.
//! * [`renewal`]: delayed renewal coupling and meeting-time estimation.
//! * [`expctl`]: declarative experiments, CSV/JSON output and replay.

pub mod bits;
pub mod density;
pub mod error;
pub mod expctl;
pub mod gapdist;
pub mod renewal;
pub mod seed;
pub mod sumset;
pub mod weights;

pub use error::{Error, Result};
