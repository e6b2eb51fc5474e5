//! The network situation a MAC category is evaluated in.
//!
//! Units are fixed at the boundary: seconds, meters, bits, bits/second,
//! packets/second. Every numeric default in this module is a repo
//! calibration chosen so that the category rankings reproduce the expected
//! rule-of-thumb behavior; none of them are measured ground truth.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

/// How the CSMA/CA service rate `mu` is derived from the context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceRateMode {
    /// `mu` is numerically the channel bandwidth in bits/second.
    #[default]
    Bandwidth,
    /// `mu` is packets/second: bandwidth over the bits of one full exchange.
    Packet,
}

/// Parameters of the scheduled (TDMA/FDMA superframe) category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduledParams {
    /// Superframe length, seconds.
    pub frame_len: f64,
    /// Guard time, seconds. Receivers idle-listen for twice this when a cell is empty.
    pub guard: f64,
    /// Length of one slot, seconds.
    pub slot_len: f64,
    /// Sync packet length, bits.
    pub sync_len: f64,
    /// ACK length, bits.
    pub ack_len: f64,
    /// Seconds between sync exchanges.
    pub sync_interval: f64,
}

impl Default for ScheduledParams {
    fn default() -> Self {
        ScheduledParams {
            frame_len: 0.125,
            guard: 0.001,
            slot_len: 0.01,
            sync_len: 128.0,
            ack_len: 128.0,
            sync_interval: 48.0,
        }
    }
}

impl ScheduledParams {
    /// Idle-listen window for an empty cell.
    pub fn idle_window(&self) -> f64 {
        2.0 * self.guard
    }
}

/// Parameters of the common-active-period (synchronized duty cycle, CSMA/CA) category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapParams {
    /// Fraction of each one-second period the cluster is awake.
    pub duty_cycle: f64,
    pub rts_len: f64,
    pub cts_len: f64,
    pub ack_len: f64,
    pub sync_len: f64,
    /// Minimum contention window, slots.
    pub cw_min: u32,
    /// Number of window doublings until CW_max.
    pub backoff_stages: u32,
    /// Seconds between sync broadcasts.
    pub sync_interval: f64,
    pub service_rate_mode: ServiceRateMode,
}

impl Default for CapParams {
    fn default() -> Self {
        CapParams {
            duty_cycle: 0.05,
            rts_len: 128.0,
            cts_len: 128.0,
            ack_len: 128.0,
            sync_len: 128.0,
            cw_min: 16,
            backoff_stages: 5,
            sync_interval: 10.0,
            service_rate_mode: ServiceRateMode::Bandwidth,
        }
    }
}

impl CapParams {
    /// Control bits exchanged per message (RTS + CTS + ACK).
    pub fn control_bits(&self) -> f64 {
        self.rts_len + self.cts_len + self.ack_len
    }

    pub fn cw_max(&self) -> u64 {
        u64::from(self.cw_min) << self.backoff_stages.min(32)
    }
}

/// Parameters of the preamble-sampling (low-power listening) category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PspParams {
    /// Preamble length, bits.
    pub preamble_len: f64,
    /// Duration of one channel check, seconds.
    pub check_dur: f64,
    /// Period between channel checks, seconds.
    pub check_interval: f64,
}

impl Default for PspParams {
    fn default() -> Self {
        PspParams {
            preamble_len: 6400.0,
            check_dur: 0.0005,
            check_interval: 0.025,
        }
    }
}

/// The evaluation context: deployment, traffic, channel and per-category MAC settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkContext {
    pub n_nodes: u32,
    /// Radius of the (disk-shaped) deployment field, meters.
    pub network_radius: f64,
    /// Transmission range, meters.
    pub tx_range: f64,
    /// Network-wide packet generation rate, packets/second.
    pub pkt_rate: f64,
    /// Channel bandwidth, bits/second.
    pub bandwidth: f64,
    /// Message length, bits.
    pub msg_len: f64,
    pub sched: ScheduledParams,
    pub cap: CapParams,
    pub psp: PspParams,
}

impl Default for NetworkContext {
    fn default() -> Self {
        NetworkContext {
            n_nodes: 100,
            network_radius: 100.0,
            tx_range: 20.0,
            pkt_rate: 20.0,
            bandwidth: 256_000.0,
            msg_len: 1024.0,
            sched: ScheduledParams::default(),
            cap: CapParams::default(),
            psp: PspParams::default(),
        }
    }
}

/// Node density and expected neighborhood size for a uniform-disk deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedGeometry {
    /// Nodes per square meter.
    pub density: f64,
    /// Expected node count inside one transmission disk (fractional).
    pub neighbors: f64,
}

/// One broken invariant, named by its field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

struct Checker(Vec<Violation>);

impl Checker {
    fn check(&mut self, ok: bool, field: &str, rule: &str) {
        if !ok {
            self.0.push(Violation {
                field: field.to_string(),
                rule: rule.to_string(),
            });
        }
    }

    fn positive(&mut self, v: f64, field: &str) {
        self.check(v.is_finite() && v > 0.0, field, "must be finite and > 0");
    }

    fn non_negative(&mut self, v: f64, field: &str) {
        self.check(v.is_finite() && v >= 0.0, field, "must be finite and >= 0");
    }
}

impl NetworkContext {
    /// Lists every violated invariant. An empty list means every model
    /// operation accepts this context.
    pub fn validate(&self) -> Vec<Violation> {
        let mut c = Checker(Vec::new());
        c.check(self.n_nodes >= 1, "n_nodes", "must be >= 1");
        c.positive(self.network_radius, "network_radius");
        c.positive(self.tx_range, "tx_range");
        c.non_negative(self.pkt_rate, "pkt_rate");
        c.positive(self.bandwidth, "bandwidth");
        c.positive(self.msg_len, "msg_len");

        let s = &self.sched;
        c.positive(s.frame_len, "sched.frame_len");
        c.check(
            s.slot_len.is_finite() && s.slot_len > 0.0 && s.slot_len <= s.frame_len,
            "sched.slot_len",
            "must satisfy 0 < slot_len <= frame_len",
        );
        c.non_negative(s.guard, "sched.guard");
        c.non_negative(s.sync_len, "sched.sync_len");
        c.non_negative(s.ack_len, "sched.ack_len");
        c.positive(s.sync_interval, "sched.sync_interval");

        let k = &self.cap;
        c.check(
            k.duty_cycle.is_finite() && k.duty_cycle > 0.0 && k.duty_cycle <= 1.0,
            "cap.duty_cycle",
            "must be in (0, 1]",
        );
        c.non_negative(k.rts_len, "cap.rts_len");
        c.non_negative(k.cts_len, "cap.cts_len");
        c.non_negative(k.ack_len, "cap.ack_len");
        c.non_negative(k.sync_len, "cap.sync_len");
        c.check(k.cw_min >= 2, "cap.cw_min", "must be >= 2");
        c.check(k.backoff_stages <= 32, "cap.backoff_stages", "must be <= 32");
        c.positive(k.sync_interval, "cap.sync_interval");

        let p = &self.psp;
        c.non_negative(p.preamble_len, "psp.preamble_len");
        c.check(
            p.check_dur.is_finite()
                && p.check_interval.is_finite()
                && p.check_dur > 0.0
                && p.check_dur <= p.check_interval,
            "psp.check_dur",
            "must satisfy 0 < check_dur <= check_interval",
        );
        if self.bandwidth > 0.0 && p.check_interval.is_finite() {
            let preamble_time = p.preamble_len / self.bandwidth;
            // relative slack so that preamble_len = check_interval * bandwidth passes
            c.check(
                preamble_time >= p.check_interval * (1.0 - 1e-12),
                "psp.preamble_len",
                "preamble must last at least one check interval (preamble_len / bandwidth >= check_interval)",
            );
        }
        c.0
    }

    /// Uniform-disk geometry: density = N / (pi R^2), neighbors = density * pi d^2.
    pub fn derive_geometry(&self) -> DerivedGeometry {
        let density = f64::from(self.n_nodes) / (PI * self.network_radius * self.network_radius);
        DerivedGeometry {
            density,
            neighbors: density * PI * self.tx_range * self.tx_range,
        }
    }

    /// Fraction of the field covered by one transmission disk, d^2 / R^2.
    pub fn coverage_ratio(&self) -> f64 {
        (self.tx_range * self.tx_range) / (self.network_radius * self.network_radius)
    }

    /// Airtime of one message, seconds.
    pub fn msg_time(&self) -> f64 {
        self.msg_len / self.bandwidth
    }
}

/// Free-function form of [`NetworkContext::derive_geometry`].
pub fn derive_geometry(ctx: &NetworkContext) -> DerivedGeometry {
    ctx.derive_geometry()
}

/// Free-function form of [`NetworkContext::validate`].
pub fn validate(ctx: &NetworkContext) -> Vec<Violation> {
    ctx.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(n: u32, r: f64, d: f64) -> NetworkContext {
        NetworkContext {
            n_nodes: n,
            network_radius: r,
            tx_range: d,
            ..NetworkContext::default()
        }
    }

    #[test]
    fn geometry_hundred_nodes() {
        let g = ctx(100, 100.0, 20.0).derive_geometry();
        assert!((g.density - 100.0 / (PI * 1e4)).abs() < 1e-15);
        assert!((g.density - 3.1831e-3).abs() < 1e-7);
        assert!((g.neighbors - 4.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_single_node() {
        let g = ctx(1, 1.0, 0.1).derive_geometry();
        assert!((g.density - 1.0 / PI).abs() < 1e-15);
        assert!((g.neighbors - 0.01).abs() < 1e-15);
    }

    #[test]
    fn geometry_ninety_nodes() {
        let g = ctx(90, 100.0, 20.0).derive_geometry();
        assert!((g.neighbors - 3.6).abs() < 1e-12);
    }

    #[test]
    fn neighbors_equal_n_d2_over_r2() {
        for &(n, r, d) in &[(10u32, 50.0, 7.0), (250, 333.0, 41.0), (3, 2.0, 5.0)] {
            let c = ctx(n, r, d);
            let g = c.derive_geometry();
            let expect = f64::from(n) * d * d / (r * r);
            assert!((g.neighbors - expect).abs() <= 1e-12 * expect.max(1.0));
            let g2 = ctx(n, 2.0 * r, 2.0 * d).derive_geometry();
            assert!((g2.neighbors - g.neighbors).abs() <= 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn default_context_is_valid() {
        assert_eq!(NetworkContext::default().validate(), vec![]);
    }

    #[test]
    fn duty_cycle_out_of_range() {
        let mut c = NetworkContext::default();
        c.cap.duty_cycle = 1.5;
        let v = c.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "cap.duty_cycle");
    }

    #[test]
    fn short_preamble_rejected() {
        let mut c = NetworkContext::default();
        c.psp.preamble_len = 0.5 * c.psp.check_interval * c.bandwidth;
        let v = c.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "psp.preamble_len");
        assert!(v[0].rule.contains("check interval"));
    }

    #[test]
    fn several_violations_reported_together() {
        let c = NetworkContext {
            n_nodes: 0,
            bandwidth: 0.0,
            msg_len: -1.0,
            ..NetworkContext::default()
        };
        let fields: Vec<_> = c.validate().into_iter().map(|v| v.field).collect();
        assert!(fields.contains(&"n_nodes".to_string()));
        assert!(fields.contains(&"bandwidth".to_string()));
        assert!(fields.contains(&"msg_len".to_string()));
    }

    #[test]
    fn slot_longer_than_frame() {
        let mut c = NetworkContext::default();
        c.sched.slot_len = 2.0 * c.sched.frame_len;
        assert_eq!(c.validate()[0].field, "sched.slot_len");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = serde_json::from_str::<NetworkContext>(r#"{"n_nodes": 5, "bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn partial_document_fills_defaults() {
        let c: NetworkContext = serde_json::from_str(r#"{"n_nodes": 90, "cap": {"duty_cycle": 0.2}}"#).unwrap();
        assert_eq!(c.n_nodes, 90);
        assert_eq!(c.cap.duty_cycle, 0.2);
        assert_eq!(c.cap.cw_min, CapParams::default().cw_min);
        assert_eq!(c.network_radius, 100.0);
    }
}
