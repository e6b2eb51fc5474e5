//! Per-cause energy accumulation.

use serde::{Deserialize, Serialize};

/// Joules (or watts, once divided by the run length) by cause. Payload
/// energy (successful data bits at sender and destination) is kept apart and
/// is not part of `total`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTally {
    pub collision: f64,
    pub overhearing: f64,
    pub idle: f64,
    pub overhead: f64,
    pub payload: f64,
}

impl EnergyTally {
    pub fn total(&self) -> f64 {
        self.collision + self.overhearing + self.idle + self.overhead
    }

    pub fn scaled(&self, k: f64) -> EnergyTally {
        EnergyTally {
            collision: self.collision * k,
            overhearing: self.overhearing * k,
            idle: self.idle * k,
            overhead: self.overhead * k,
            payload: self.payload * k,
        }
    }

    pub fn add(&mut self, other: &EnergyTally) {
        self.collision += other.collision;
        self.overhearing += other.overhearing;
        self.idle += other.idle;
        self.overhead += other.overhead;
        self.payload += other.payload;
    }
}
