//! Crop, pest and awareness dynamics under bio-pesticide and awareness
//! campaigns: simulation, steady states, stability, Hopf scans, parameter
//! sweeps and optimal control.

pub mod bifurcation;
pub mod cli;
pub mod equilibria;
pub mod error;
pub mod integrate;
pub mod model;
pub mod optimal_control;
pub mod roots;
pub mod stability;

pub use error::{Error, Result};
pub use model::{ControlValue, Costate, ModelParams, ObjectiveWeights, State};
