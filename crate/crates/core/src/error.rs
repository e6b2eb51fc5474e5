use thiserror::Error;

use crate::context::Violation;

/// Failures raised by the analytical models, the CPF combiner and the selector.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// The collision fixed point has no root below one: the offered load is
    /// outside the region where the CSMA/CA model is meaningful.
    #[error("saturated: collision probability has no root in [0, {upper:.6}) (offered load {offered_load:.6e})")]
    Saturated { offered_load: f64, upper: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate CPF: weighted denominator is {denominator}")]
    DegenerateCpf { denominator: f64 },

    #[error("no performance model registered for category '{0}'")]
    NoPerformanceModel(String),

    #[error("invalid context: {}", join_violations(.0))]
    InvalidContext(Vec<Violation>),
}

pub(crate) fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
