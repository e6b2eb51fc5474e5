//! Discrete-event simulation of the representative protocols of each
//! category (PSA for preamble sampling, SMAC for common active period, TSMP
//! for scheduled), used to validate the analytical models.

pub mod compare;
pub mod deploy;
pub mod engine;
pub mod psa;
pub mod schedule;
pub mod smac;
pub mod stats;
pub mod tally;
pub mod tsmp;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{NetworkContext, Violation};
use crate::error::join_violations;
use crate::radio::RadioProfile;

pub use compare::{compare_model_sim, DivergencePoint, DivergenceReport};
pub use deploy::{Area, Position, Topology};
pub use schedule::{build_tsmp_schedule, verify_schedule, Schedule, ScheduleError};
pub use stats::{replicate_until_confident, Estimate, StoppingRule};
pub use tally::EnergyTally;

/// Identifier of the pseudo-random generator, recorded with every result.
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Psa,
    Smac,
    Tsmp,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Psa => "psa",
            Protocol::Smac => "smac",
            Protocol::Tsmp => "tsmp",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "psa" => Ok(Protocol::Psa),
            "smac" => Ok(Protocol::Smac),
            "tsmp" => Ok(Protocol::Tsmp),
            _ => Err(format!("unknown protocol '{s}' (expected psa, smac or tsmp)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsmpSettings {
    /// Frequencies (superframe rows).
    pub rows: u32,
    /// Time slots per superframe (columns). The slot length is frame_len / cols.
    pub cols: u32,
    /// Schedule construction attempts before giving up.
    pub attempts: u32,
}

impl Default for TsmpSettings {
    fn default() -> Self {
        TsmpSettings {
            rows: 3,
            cols: 30,
            attempts: 50,
        }
    }
}

/// Simulation-only settings; the network itself comes from the context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub area: Area,
    pub seed: u64,
    /// Simulated seconds per replication.
    pub sim_duration: f64,
    pub confidence: f64,
    pub rel_error: f64,
    pub min_reps: u32,
    pub max_reps: u32,
    /// Wrap the field around at its edges.
    pub toroidal: bool,
    /// Transmission attempts per packet before it is dropped.
    pub max_attempts: u32,
    /// SMAC contention slot, seconds. Defaults to (L_rts / B) / CW_min.
    pub smac_slot: Option<f64>,
    pub tsmp: TsmpSettings,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            area: Area::square(100.0),
            seed: 1,
            sim_duration: 100.0,
            confidence: 0.95,
            rel_error: 0.05,
            min_reps: 3,
            max_reps: 30,
            toroidal: true,
            max_attempts: 8,
            smac_slot: None,
            tsmp: TsmpSettings::default(),
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut check = |ok: bool, field: &str, rule: &str| {
            if !ok {
                v.push(Violation {
                    field: format!("simulation.{field}"),
                    rule: rule.to_string(),
                });
            }
        };
        check(
            self.area.width.is_finite() && self.area.height.is_finite() && self.area.width > 0.0 && self.area.height > 0.0,
            "area",
            "width and height must be > 0",
        );
        check(self.sim_duration.is_finite() && self.sim_duration > 0.0, "sim_duration", "must be > 0");
        check(self.confidence > 0.0 && self.confidence < 1.0, "confidence", "must be in (0, 1)");
        check(self.rel_error.is_finite() && self.rel_error > 0.0, "rel_error", "must be > 0");
        check(self.max_reps >= 1, "max_reps", "must be >= 1");
        check(self.min_reps >= 1, "min_reps", "must be >= 1");
        check(self.max_attempts >= 1, "max_attempts", "must be >= 1");
        if let Some(s) = self.smac_slot {
            check(s.is_finite() && s > 0.0, "smac_slot", "must be > 0");
        }
        check(self.tsmp.rows >= 1, "tsmp.rows", "must be >= 1");
        check(self.tsmp.cols >= 1, "tsmp.cols", "must be >= 1");
        v
    }

    pub fn stopping_rule(&self) -> StoppingRule {
        StoppingRule {
            confidence: self.confidence,
            rel_error: self.rel_error,
            min_reps: self.min_reps,
            max_reps: self.max_reps,
        }
    }
}

/// Everything one simulation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub context: NetworkContext,
    #[serde(default)]
    pub profile: RadioProfile,
    #[serde(default, rename = "simulation")]
    pub settings: SimSettings,
}

impl SimConfig {
    pub fn new(context: NetworkContext, profile: RadioProfile, settings: SimSettings) -> Self {
        SimConfig {
            context,
            profile,
            settings,
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = self.context.validate();
        v.extend(self.profile.validate());
        v.extend(self.settings.validate());
        v
    }

    fn checked(&self) -> Result<(), SimError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(SimError::Invalid(v))
        }
    }

    /// Generator for replication `rep`; `lane` separates independent uses
    /// (placement, traffic) within one replication.
    pub fn rng(&self, rep: u32, lane: u32) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.settings.seed);
        r.set_stream((u64::from(rep) << 8) | u64::from(lane));
        r
    }

    pub fn topology(&self, rep: u32) -> Topology {
        let positions = deploy_rep(self, rep);
        Topology::new(positions, &self.settings.area, self.context.tx_range, self.settings.toroidal)
    }
}

pub(crate) const LANE_PLACEMENT: u32 = 0;
pub(crate) const LANE_DYNAMICS: u32 = 1;

/// Node positions of the first replication.
pub fn deploy(cfg: &SimConfig) -> Vec<Position> {
    deploy_rep(cfg, 0)
}

pub fn deploy_rep(cfg: &SimConfig, rep: u32) -> Vec<Position> {
    let mut rng = cfg.rng(rep, LANE_PLACEMENT);
    deploy::place(&cfg.settings.area, cfg.context.n_nodes as usize, &mut rng)
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("schedule does not match topology: {0}")]
    ScheduleMismatch(String),
    #[error("topology is not connected")]
    Disconnected,
    #[error(transparent)]
    Model(#[from] crate::error::ModelError),
}

/// Raw output of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// Joules over the run.
    pub energy: EnergyTally,
    pub duration: f64,
    pub delay_sum: f64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
    /// Failed transmission attempts.
    pub collisions: u64,
    pub mean_degree: f64,
}

impl RunOutcome {
    pub fn new(duration: f64) -> Self {
        RunOutcome {
            energy: EnergyTally::default(),
            duration,
            delay_sum: 0.0,
            generated: 0,
            delivered: 0,
            dropped: 0,
            in_flight: 0,
            collisions: 0,
            mean_degree: 0.0,
        }
    }

    /// Network-wide W.
    pub fn power(&self) -> f64 {
        self.energy.total() / self.duration
    }

    pub fn mean_delay(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.delay_sum / self.delivered as f64)
    }

    fn metrics(&self) -> Vec<Option<f64>> {
        vec![Some(self.power()), self.mean_delay()]
    }
}

/// Summary over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub protocol: Protocol,
    /// Network-wide W.
    pub energy_per_second: Estimate,
    /// Seconds from MAC hand-off to delivery; `None` if nothing was delivered.
    pub delay: Option<Estimate>,
    /// Mean W per cause; `total` is their sum.
    pub tallies: TallySummary,
    /// Mean W spent on successfully delivered data bits, outside the total.
    pub payload_power: f64,
    pub replications: u32,
    pub converged: bool,
    pub packets_generated: u64,
    pub packets_delivered: u64,
    pub packets_dropped: u64,
    pub packets_in_flight: u64,
    pub collisions: u64,
    pub mean_degree: f64,
    pub rng: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TallySummary {
    pub collision: f64,
    pub overhearing: f64,
    pub idle: f64,
    pub overhead: f64,
    pub total: f64,
}

impl SimStats {
    fn from_runs(protocol: Protocol, cfg: &SimConfig, rep: stats::Replicated<RunOutcome>) -> SimStats {
        let n = rep.runs.len() as f64;
        let mut w = EnergyTally::default();
        for r in &rep.runs {
            w.add(&r.energy.scaled(1.0 / r.duration));
        }
        let w = w.scaled(1.0 / n);
        let sum = |f: fn(&RunOutcome) -> u64| rep.runs.iter().map(f).sum::<u64>();
        SimStats {
            protocol,
            energy_per_second: rep.estimates[0].expect("power is always tracked"),
            delay: rep.estimates[1],
            tallies: TallySummary {
                collision: w.collision,
                overhearing: w.overhearing,
                idle: w.idle,
                overhead: w.overhead,
                total: w.total(),
            },
            payload_power: w.payload,
            replications: rep.runs.len() as u32,
            converged: rep.converged,
            packets_generated: sum(|r| r.generated),
            packets_delivered: sum(|r| r.delivered),
            packets_dropped: sum(|r| r.dropped),
            packets_in_flight: sum(|r| r.in_flight),
            collisions: sum(|r| r.collisions),
            mean_degree: rep.runs.iter().map(|r| r.mean_degree).sum::<f64>() / n,
            rng: RNG_ALGORITHM.to_string(),
            seed: cfg.settings.seed,
        }
    }
}

fn replicate(protocol: Protocol, cfg: &SimConfig, run: impl Fn(u32) -> RunOutcome + Sync) -> SimStats {
    let rep = replicate_until_confident(&cfg.settings.stopping_rule(), run, RunOutcome::metrics);
    if !rep.converged {
        log::warn!(
            "{protocol}: stopping rule not met after {} replications",
            rep.runs.len()
        );
    }
    SimStats::from_runs(protocol, cfg, rep)
}

pub fn run_psa(cfg: &SimConfig) -> Result<SimStats, SimError> {
    cfg.checked()?;
    Ok(replicate(Protocol::Psa, cfg, |rep| psa::run_once(cfg, rep)))
}

pub fn run_smac(cfg: &SimConfig) -> Result<SimStats, SimError> {
    cfg.checked()?;
    Ok(replicate(Protocol::Smac, cfg, |rep| smac::run_once(cfg, rep)))
}

/// Runs TSMP over the first replication's deployment with a fixed schedule.
pub fn run_tsmp(cfg: &SimConfig, sched: &Schedule) -> Result<SimStats, SimError> {
    cfg.checked()?;
    let topo = cfg.topology(0);
    tsmp::check_schedule(&topo, sched)?;
    Ok(replicate(Protocol::Tsmp, cfg, |rep| tsmp::run_once(cfg, &topo, sched, rep)))
}

/// Deploys, builds the schedule and runs TSMP.
pub fn run_tsmp_auto(cfg: &SimConfig) -> Result<(Schedule, SimStats), SimError> {
    cfg.checked()?;
    let topo = cfg.topology(0);
    if !topo.is_connected() {
        return Err(SimError::Disconnected);
    }
    let t = &cfg.settings.tsmp;
    let sched = schedule::build_for_topology(&topo, t.rows, t.cols, cfg.settings.seed, t.attempts)?;
    let stats = run_tsmp(cfg, &sched)?;
    Ok((sched, stats))
}

/// Simulates `protocol`, building a TSMP schedule when needed.
pub fn run(protocol: Protocol, cfg: &SimConfig) -> Result<SimStats, SimError> {
    match protocol {
        Protocol::Psa => run_psa(cfg),
        Protocol::Smac => run_smac(cfg),
        Protocol::Tsmp => run_tsmp_auto(cfg).map(|(_, s)| s),
    }
}

/// The simulation configuration of the TSMP validation run: ten nodes in a
/// 14 m square with 20 m range (a complete graph), a 3 x 30 superframe of
/// 0.58875 s.
pub fn tsmp_reference_config() -> SimConfig {
    let mut ctx = NetworkContext {
        n_nodes: 10,
        ..NetworkContext::default()
    };
    ctx.sched.frame_len = 0.58875;
    ctx.sched.slot_len = 0.58875 / 30.0;
    SimConfig {
        context: ctx,
        profile: RadioProfile::default(),
        settings: SimSettings {
            area: Area::square(14.0),
            toroidal: false,
            sim_duration: 300.0,
            ..SimSettings::default()
        },
    }
}

/// Exponential inter-arrival sampler for one node's Poisson source.
pub(crate) struct Arrivals {
    dist: Option<rand_distr::Exp<f64>>,
}

impl Arrivals {
    pub(crate) fn per_node(ctx: &NetworkContext) -> Arrivals {
        let rate = ctx.pkt_rate / f64::from(ctx.n_nodes);
        Arrivals {
            dist: (rate > 0.0).then(|| rand_distr::Exp::new(rate).expect("positive rate")),
        }
    }

    pub(crate) fn next<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        use rand_distr::Distribution;
        self.dist.as_ref().map(|d| d.sample(rng))
    }
}

/// A packet inside the MAC or waiting above it.
#[derive(Debug, Clone)]
pub(crate) struct Packet {
    pub dest: usize,
    /// When the packet entered the MAC buffer.
    pub handoff: f64,
    pub attempts: u32,
    pub delivered: bool,
}
