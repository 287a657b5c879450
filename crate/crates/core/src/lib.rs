//! Quantum rigid-rotor simulator for nonspreading "cogwheel" rotational
//! wavepackets: preparation by a two-photon Raman pulse, free rotation,
//! gyroscopic precession in a magnetic field, and a simulated Coulomb-explosion
//! pump–probe measurement that ends in a rotational g-factor estimate.
//!
//! Units: times in seconds, frequencies are cyclic (Hz) at the API surface;
//! Hamiltonians are angular frequencies with ħ = 1.

pub mod basis;
pub mod constants;
pub mod density;
pub mod dynamics;
pub mod error;
pub mod explosion;
pub mod fitting;
pub mod harmonics;
pub mod operators;
pub mod optimize;
pub mod observables;
pub mod preparation;
pub mod rotation;
pub mod textio;

pub use basis::{build_basis, RotorBasis, RotorState};
pub use error::{Result, RotorError};
