//! Model against simulation over a range of packet rates.
//!
//! The models assume a uniform disk, the simulator a rectangular field, so
//! the model is evaluated at an equivalent radius. For PSA and SMAC that is
//! the radius of the disk with the field's area; for TSMP it is the radius
//! that reproduces the deployment's measured mean degree, and the model slot
//! is set to the simulated one (frame / columns).

use serde::{Deserialize, Serialize};

use super::schedule::build_for_topology;
use super::{run_psa, run_smac, run_tsmp, Protocol, SimConfig, SimError};
use crate::context::NetworkContext;
use crate::delay::{cap_delay, psp_delay, scheduled_delay};
use crate::energy::{cap_energy, psp_energy, scheduled_energy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Energy,
    Delay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergencePoint {
    pub pkt_rate: f64,
    /// W.
    pub model_energy: f64,
    pub sim_energy: f64,
    pub sim_energy_half_width: f64,
    /// Seconds.
    pub model_delay: f64,
    pub sim_delay: Option<f64>,
    /// |model - sim| / sim of the compared metric.
    pub divergence: f64,
    pub energy_divergence: f64,
    pub delay_divergence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub protocol: Protocol,
    pub metric: Metric,
    /// Disk radius the model was evaluated at, m.
    pub model_radius: f64,
    pub points: Vec<DivergencePoint>,
    pub max_divergence: f64,
}

fn rel(model: f64, sim: f64) -> f64 {
    (model - sim).abs() / sim.abs()
}

/// Compares `protocol` with its category model at each packet rate.
/// Energy is compared for PSA and SMAC, delay for TSMP.
pub fn compare_model_sim(protocol: Protocol, cfg: &SimConfig, pkt_rates: &[f64]) -> Result<DivergenceReport, SimError> {
    let invalid = cfg.validate();
    if !invalid.is_empty() {
        return Err(SimError::Invalid(invalid));
    }
    let mut model_ctx = cfg.context.clone();
    let (metric, schedule) = match protocol {
        Protocol::Psa | Protocol::Smac => {
            model_ctx.network_radius = cfg.settings.area.equivalent_radius();
            (Metric::Energy, None)
        }
        Protocol::Tsmp => {
            let topo = cfg.topology(0);
            if !topo.is_connected() {
                return Err(SimError::Disconnected);
            }
            let t = &cfg.settings.tsmp;
            let sched = build_for_topology(&topo, t.rows, t.cols, cfg.settings.seed, t.attempts)?;
            let degree = topo.mean_degree();
            model_ctx.network_radius = cfg.context.tx_range * (f64::from(cfg.context.n_nodes) / degree).sqrt();
            model_ctx.sched.slot_len = cfg.context.sched.frame_len / f64::from(t.cols);
            (Metric::Delay, Some(sched))
        }
    };

    let mut points = Vec::with_capacity(pkt_rates.len());
    for &g in pkt_rates {
        let mut run_cfg = cfg.clone();
        run_cfg.context.pkt_rate = g;
        let ctx = NetworkContext {
            pkt_rate: g,
            ..model_ctx.clone()
        };
        let (stats, model_energy, model_delay) = match protocol {
            Protocol::Psa => (run_psa(&run_cfg)?, psp_energy(&ctx, &cfg.profile).total, psp_delay(&ctx).seconds),
            Protocol::Smac => (
                run_smac(&run_cfg)?,
                cap_energy(&ctx, &cfg.profile)?.total,
                cap_delay(&ctx)?.seconds,
            ),
            Protocol::Tsmp => (
                run_tsmp(&run_cfg, schedule.as_ref().expect("built above"))?,
                scheduled_energy(&ctx, &cfg.profile).total,
                scheduled_delay(&ctx).seconds,
            ),
        };
        let sim_energy = stats.energy_per_second.mean;
        let sim_delay = stats.delay.map(|d| d.mean);
        let energy_divergence = rel(model_energy, sim_energy);
        let delay_divergence = sim_delay.map(|d| rel(model_delay, d));
        let divergence = match metric {
            Metric::Energy => energy_divergence,
            Metric::Delay => delay_divergence.unwrap_or(f64::INFINITY),
        };
        points.push(DivergencePoint {
            pkt_rate: g,
            model_energy,
            sim_energy,
            sim_energy_half_width: stats.energy_per_second.half_width,
            model_delay,
            sim_delay,
            divergence,
            energy_divergence,
            delay_divergence,
        });
    }
    let max_divergence = points.iter().map(|p| p.divergence).fold(0.0, f64::max);
    Ok(DivergenceReport {
        protocol,
        metric,
        model_radius: model_ctx.network_radius,
        points,
        max_divergence,
    })
}
