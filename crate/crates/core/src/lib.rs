//! Analytical energy and delay models for three categories of wireless
//! sensor network MAC protocols (scheduled, common active period, preamble
//! sampling), a combined performance function to rank them, a
//! requirement-driven protocol selector, and a discrete-event simulator used
//! to validate the models.

pub mod category;
pub mod config;
pub mod context;
pub mod cpf;
pub mod delay;
pub mod desim;
pub mod energy;
pub mod error;
pub mod radio;
pub mod registry;

pub use category::CategoryId;
pub use context::{NetworkContext, Violation};
pub use cpf::{evaluate_all, CategoryEvaluation, ModelSet, Weights};
pub use energy::EnergyBreakdown;
pub use error::ModelError;
pub use radio::RadioProfile;
pub use registry::Registry;
