//! Collision-model simulation of a cavity mode thermalized by a stream of
//! atoms, with the closed-form rate predictions it is checked against.
//!
//! Units: ħ = k_B = 1, energies and temperatures in units of the cavity
//! frequency unless a config says otherwise.

pub mod analytics;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod models;

pub use analytics::{
    fit_decay_rate, g2_zero, mean_photon_number, thermalization_time, DecayFit, RatePair, ThermalizationPrediction,
};
pub use config::{parse_config, SimulationConfig};
pub use dynamics::{run_simulation, Collider, IntegratorSettings, LindbladGenerator, TimeSeries};
pub use error::{Error, Result};
pub use hilbert::FockTruncation;
pub use linalg::{ComplexMatrix, HilbertSpec};
pub use models::{CouplingSpec, FieldSpec, ReservoirKind, ReservoirSpec};
