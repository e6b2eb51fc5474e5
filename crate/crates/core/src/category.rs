//! Category identifiers.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a MAC protocol category, e.g. `ScP`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryId(pub String);

pub const SCHEDULED: &str = "ScP";
pub const COMMON_ACTIVE: &str = "CAP";
pub const PREAMBLE_SAMPLING: &str = "PSP";

/// Built-in categories in tie-break order.
pub const BUILTIN: [&str; 3] = [SCHEDULED, COMMON_ACTIVE, PREAMBLE_SAMPLING];

impl CategoryId {
    pub fn new(s: impl Into<String>) -> Self {
        CategoryId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn scheduled() -> Self {
        CategoryId::new(SCHEDULED)
    }

    pub fn common_active() -> Self {
        CategoryId::new(COMMON_ACTIVE)
    }

    pub fn preamble_sampling() -> Self {
        CategoryId::new(PREAMBLE_SAMPLING)
    }

    /// Position in the built-in tie-break order; custom categories sort after
    /// the built-ins, by name.
    pub fn order_key(&self) -> (usize, &str) {
        let pos = BUILTIN.iter().position(|b| *b == self.0).unwrap_or(BUILTIN.len());
        (pos, &self.0)
    }
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CategoryId {
    fn from(s: &str) -> Self {
        CategoryId::new(s)
    }
}
