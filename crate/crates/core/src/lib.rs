//! Multi-area load frequency control (LFC) under load altering attacks.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: matrix exponential, zero-order-hold discretization and a
//!   dense nonsymmetric eigenvalue solver.
//! * [`model`]: per-area LFC state-space matrices.
//! * [`control`]: discrete PID / integral LFC controllers.
//! * [`sim`]: the coupled N-area simulation loop and the attack injectors.
//! * [`network`]: the bus-level descriptor model, angle elimination and the
//!   attack-modified system matrix.
//! * [`stability`]: eigenvalue sweeps and countermeasure searches.
//! * [`gridcode`]: frequency threshold classification and trace metrics.
//! * [`io`]: datasets, scenario fixtures, CSV/SVG output and the run drivers
//!   used by the command-line tool.
//!
//! Attack kinds and controller forms are strategies behind trait objects and
//! are looked up by name in a [`registry::Registry`].

pub mod control;
pub mod error;
pub mod gridcode;
pub mod io;
pub mod model;
pub mod network;
pub mod numerics;
pub mod registry;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
pub use numerics::{Matrix, Spectrum};
