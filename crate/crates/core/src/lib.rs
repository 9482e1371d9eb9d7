//! Simulation and design search for heralded linear-optical Bell-state sources.
//!
//! The crate evolves multi-photon Fock states through parametrized beam-splitter
//! meshes, post-selects on auxiliary-mode detection patterns and searches mesh
//! parameters with a multistart L-BFGS optimizer.
//!
//! Module map:
//!
//! * [`fock`] occupation bases, Fock states, projection and Bell targets
//! * [`permanent`] complex matrices, Ryser permanents and bosonic transition amplitudes
//! * [`interferometer`] beam-splitter gates, rectangular meshes and circuit files
//! * [`simulate`] evolution, heralding, two-stage runs and residual reports
//! * [`schemes`] the six-mode, five-mode and two-stage scheme definitions
//! * [`optimize`] cost function, gradients, L-BFGS, multistart, polishing and certification
//! * [`cli`] the `bellforge` command-line front end

pub mod cli;
pub mod error;
pub mod fock;
pub mod interferometer;
pub mod optimize;
pub mod permanent;
pub mod schemes;
pub mod simulate;

pub use error::{Error, Result};
pub use fock::{BellKind, FockState, Occupation};
pub use interferometer::{Circuit, Gate};
pub use permanent::ComplexMatrix;
pub use schemes::{SchemeKind, SchemeSpec};
