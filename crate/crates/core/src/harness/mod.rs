//! Scenario harness: drive cycles, vehicle dynamics, TOML scenario configs,
//! graph assembly, energy reports, component sweeps and batch runs.

pub mod assemble;
pub mod batch;
pub mod config;
pub mod cycle;
pub mod report;
pub mod sweep;
pub mod vehicle;

pub use assemble::{run_scenario, Assembly, Plants, ScenarioRun, COMPONENT_IDS};
pub use batch::{run_batch, BatchRow, BatchSummary};
pub use config::{load_config, ScenarioConfig, Variant};
pub use cycle::{load_drive_cycle, parse_drive_cycle, CycleComponent, DriveCycle};
pub use report::{energy_balance, EnergyBalance, EnergyReport, ReportBuilder, Violation};
pub use sweep::{fit_dataset, run_sweep, AxisSpec, GridSpec, SweepComponent};
pub use vehicle::{resistance, vehicle_step, Resistance, VehicleComponent, VehicleParams, GRAVITY};

use crate::plant::PlantError;
use crate::sim::{GraphError, SimError};
use crate::surrogate::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Cycle { path: String, line: u64, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Io(String),
}

impl HarnessError {
    /// 1 for anything detected before stepping, 2 for failures during a run
    /// or while writing results.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Sim(_) | HarnessError::Io(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}
