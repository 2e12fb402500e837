//! Dynamic occupancy grid mapping with Beta-distributed cell occupancy,
//! particle-based cell dynamics, Monte Carlo beam sensing, cooperative
//! sensor fusion and trajectory collision-risk evaluation.

pub mod beta;
pub mod error;
pub mod filter;
pub mod geom;
pub mod grid;
pub mod risk;
pub mod rng;
pub mod scenarios;
pub mod sensor;
pub mod sim;

pub use beta::{BetaState, SensorModel};
pub use error::{Error, Result};
pub use filter::{CellDynamicState, DynamicGridFilter, FilterConfig, Particle};
pub use geom::Vec2;
pub use grid::{CellIndex, GridMap, GridSpec};
pub use sensor::{BeamReturn, BeamSampling, MeasurementGrid, Pose};
