//! Sizing of DC-side protection components for multi-terminal HVDC grids.
//!
//! The crate combines closed-form component constraints with a desk-scale
//! electromagnetic-transient engine: an analytical stage brackets each
//! series DC inductor, iterative simulation refines it until converter and
//! breaker current margins sit just inside the design target.
//!
//! Modules:
//! - [`model`] / [`config`]: grid data model, protection zones, scenarios and
//!   the JSON-compatible configuration format.
//! - [`analytics`]: the sizing relations, current-margin KPIs and
//!   critical-case identification.
//! - [`emt`]: the transient engine (trapezoidal companion models, traveling
//!   wave cables, converter and breaker dynamics).
//! - [`port`]: the simulator interface and engine registry.
//! - [`sizing`]: the per-inductor core loop and the multi-zone design driver.

pub mod analytics;
pub mod config;
pub mod emt;
pub mod error;
pub mod model;
pub mod port;
pub mod sizing;

pub use config::{load_config, parse_config, serialize_config};
pub use model::{DesignScenario, GridModel};
