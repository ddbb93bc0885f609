//! Probabilistic sector-congestion model and bi-objective flow planning.

pub mod error;
pub mod instances;
pub mod moea;
pub mod montecarlo;
pub mod objectives;
pub mod occupancy;
pub mod prob;
pub mod scenario;
pub mod trajectory;

pub use error::{Error, Result};
pub use moea::{MoeaConfig, ParetoArchive, RunResult};
pub use montecarlo::McConfig;
pub use objectives::{dominates, CostConfig, Evaluator, Genome, ObjectivePoint};
pub use occupancy::{CongestionPmf, OccupancyField, PmfConfig, PmfMethod, Sector};
pub use prob::{DiscretePdf, TimeGrid, TriangularSpec};
pub use scenario::{apply_disruption, Disruption, IntentFile, Scenario};
pub use trajectory::{FlightPlan, IntentVector, SpeedEnvelope};
