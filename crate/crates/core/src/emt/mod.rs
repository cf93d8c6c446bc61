//! Fixed-step electromagnetic-transient engine.
//!
//! Trapezoidal companion models for lumped elements, constant-parameter
//! traveling-wave cable sections, average-value converter units and hybrid
//! breaker state machines, solved by dense LU over the nodal conductance
//! matrix.

pub mod breaker;
pub mod builder;
pub mod converter;
pub mod network;
pub mod sim;

pub use builder::{GridSim, SteadySeed};
pub use network::{Network, SwitchPhase};
pub use sim::{BuiltinFactory, BuiltinSimulator};
