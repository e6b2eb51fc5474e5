//! First-order two-regime radio energy model.

use serde::{Deserialize, Serialize};

/// Per-bit radio costs plus idle power and sleep/wake transition energies.
///
/// Defaults are a repo calibration (typical first-order radio figures), not
/// measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioProfile {
    /// Electronics energy, J/bit. Used for reception and as the transmit baseline.
    pub e_elec: f64,
    /// Free-space amplifier coefficient, J/bit/m^2.
    pub amp_fs: f64,
    /// Multi-path amplifier coefficient, J/bit/m^4.
    pub amp_mp: f64,
    /// Idle-listening power, W.
    pub p_idle: f64,
    /// Energy of one sleep-to-active transition, J.
    pub e_on: f64,
    /// Energy of one active-to-sleep transition, J.
    pub e_off: f64,
}

impl Default for RadioProfile {
    fn default() -> Self {
        RadioProfile {
            e_elec: 50e-9,
            amp_fs: 10e-12,
            amp_mp: 0.0013e-12,
            p_idle: 0.02,
            e_on: 10e-6,
            e_off: 10e-6,
        }
    }
}

impl RadioProfile {
    /// Crossover distance between the free-space and multi-path regimes.
    /// `None` when there is no multi-path term.
    pub fn crossover(&self) -> Option<f64> {
        if self.amp_mp > 0.0 {
            Some((self.amp_fs / self.amp_mp).sqrt())
        } else {
            None
        }
    }

    pub fn validate(&self) -> Vec<crate::context::Violation> {
        let fields = [
            ("profile.e_elec", self.e_elec),
            ("profile.amp_fs", self.amp_fs),
            ("profile.amp_mp", self.amp_mp),
            ("profile.p_idle", self.p_idle),
            ("profile.e_on", self.e_on),
            ("profile.e_off", self.e_off),
        ];
        fields
            .iter()
            .filter(|(_, v)| !(v.is_finite() && *v >= 0.0))
            .map(|(f, _)| crate::context::Violation {
                field: (*f).to_string(),
                rule: "must be finite and >= 0".to_string(),
            })
            .collect()
    }
}

/// Energy to transmit one bit over `d` meters, J/bit.
pub fn tx_energy_per_bit(d: f64, prof: &RadioProfile) -> f64 {
    match prof.crossover() {
        Some(d0) if d >= d0 => prof.e_elec + prof.amp_mp * d.powi(4),
        _ => prof.e_elec + prof.amp_fs * d * d,
    }
}

/// Energy to receive one bit, J/bit.
pub fn rx_energy_per_bit(prof: &RadioProfile) -> f64 {
    prof.e_elec
}
