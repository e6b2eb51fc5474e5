//! SMAC in steady state: one synchronized cluster that is awake for the
//! first `duty_cycle` seconds of every one-second period and contends with
//! CSMA/CA plus RTS/CTS/DATA/ACK inside that window.
//!
//! Contention uses slots of `smac_slot` seconds and a uniform back-off in
//! [1, CW]. Carrier sense sees a transmission one slot after it starts. A
//! busy channel or a failed exchange doubles CW, up to `backoff_stages`
//! doublings. An exchange only starts if it fits in the rest of the window.
//!
//! Energy attribution: control frames to overhead, data heard by nodes other
//! than the destination to overhearing, frames that fail at their
//! destination to collision, successful data bits to payload. Idle listening
//! is the awake time a node spends neither sending nor hearing anything.
//! Sync broadcasts and the per-period wake-up are charged to overhead
//! without occupying the channel.

use std::collections::VecDeque;

use rand::Rng;

use super::deploy::Topology;
use super::engine::EventQueue;
use super::{Arrivals, Packet, RunOutcome, SimConfig, LANE_DYNAMICS};
use crate::radio::{rx_energy_per_bit, tx_energy_per_bit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Rts,
    Cts,
    Data,
    Ack,
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Arrival(usize),
    WindowStart,
    WindowEnd,
    Backoff(usize, u64),
    Resume(usize, u64),
    CtsTimeout(usize, u64),
    FrameEnd(usize),
    Sync(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Heard {
    Clean,
    Corrupted,
    /// The node was transmitting and could not hear the frame.
    Deaf,
}

struct Frame {
    kind: Kind,
    sender: usize,
    dest: usize,
    start: f64,
    end: f64,
    /// Reception state per listener, parallel to the sender's neighbor list.
    heard: Vec<Heard>,
}

impl Frame {
    fn state_at(&self, topo: &Topology, node: usize) -> Heard {
        let pos = topo
            .neighbors(self.sender)
            .iter()
            .position(|&k| k == node)
            .expect("listener is a neighbor");
        self.heard[pos]
    }
}

#[derive(Default)]
struct Node {
    queue: VecDeque<Packet>,
    mac: Option<Packet>,
    stage: u32,
    /// In an exchange as sender or responder.
    engaged: bool,
    /// Who this node is responding to, while engaged as a receiver.
    peer: Option<usize>,
    timer: u64,
    nav: f64,
    transmitting: Option<usize>,
    hearing: Vec<usize>,
    activity: u32,
    active_since: f64,
    busy: f64,
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    topo: Topology,
    nodes: Vec<Node>,
    frames: Vec<Frame>,
    q: EventQueue<Event>,
    out: RunOutcome,
    slot: f64,
    t_rts: f64,
    t_cts: f64,
    t_data: f64,
    t_ack: f64,
    e_tx: f64,
    e_rx: f64,
    window_end: f64,
    awake: bool,
}

pub fn contention_slot(cfg: &SimConfig) -> f64 {
    let c = &cfg.context;
    cfg.settings
        .smac_slot
        .unwrap_or(c.cap.rts_len / c.bandwidth / f64::from(c.cap.cw_min))
}

/// One replication.
pub fn run_once(cfg: &SimConfig, rep: u32) -> RunOutcome {
    let ctx = &cfg.context;
    let prof = &cfg.profile;
    let topo = cfg.topology(rep);
    let n = topo.len();
    let mut rng = cfg.rng(rep, LANE_DYNAMICS);
    let arrivals = Arrivals::per_node(ctx);
    let horizon = cfg.settings.sim_duration;
    let b = ctx.bandwidth;

    let mut sim = Sim {
        cfg,
        nodes: (0..n).map(|_| Node::default()).collect(),
        frames: Vec::new(),
        q: EventQueue::new(),
        out: RunOutcome::new(horizon),
        slot: contention_slot(cfg),
        t_rts: ctx.cap.rts_len / b,
        t_cts: ctx.cap.cts_len / b,
        t_data: ctx.msg_len / b,
        t_ack: ctx.cap.ack_len / b,
        e_tx: tx_energy_per_bit(ctx.tx_range, prof),
        e_rx: rx_energy_per_bit(prof),
        window_end: 0.0,
        awake: false,
        topo,
    };
    sim.out.mean_degree = sim.topo.mean_degree();

    sim.q.push(0.0, Event::WindowStart);
    for i in 0..n {
        if let Some(dt) = arrivals.next(&mut rng) {
            sim.q.push(dt, Event::Arrival(i));
        }
        let phase = rng.random::<f64>() * ctx.cap.sync_interval;
        sim.q.push(phase, Event::Sync(i));
    }

    while let Some((t, ev)) = sim.q.pop_until(horizon) {
        match ev {
            Event::Arrival(i) => {
                if let Some(dt) = arrivals.next(&mut rng) {
                    sim.q.push(t + dt, Event::Arrival(i));
                }
                sim.arrival(i, t, &mut rng);
            }
            Event::WindowStart => sim.window_start(t, &mut rng),
            Event::WindowEnd => sim.window_end(t),
            Event::Backoff(i, g) if sim.nodes[i].timer == g => sim.backoff_done(i, t, &mut rng),
            Event::Resume(i, g) if sim.nodes[i].timer == g => {
                let st = &mut sim.nodes[i].stage;
                *st = (*st + 1).min(ctx.cap.backoff_stages);
                sim.contend(i, t, &mut rng);
            }
            Event::CtsTimeout(i, g) if sim.nodes[i].timer == g => sim.fail(i, t, &mut rng),
            Event::Backoff(..) | Event::Resume(..) | Event::CtsTimeout(..) => {}
            Event::FrameEnd(f) => sim.frame_end(f, t, &mut rng),
            Event::Sync(i) => {
                sim.q.push(t + ctx.cap.sync_interval, Event::Sync(i));
                let listeners = sim.topo.neighbors(i).len() as f64;
                sim.out.energy.overhead += ctx.cap.sync_len * (sim.e_tx + listeners * sim.e_rx);
            }
        }
    }
    if sim.awake {
        // charge the partial window cut by the horizon
        let start = sim.window_end - ctx.cap.duty_cycle;
        sim.close_window(horizon, horizon - start);
    }

    for node in &sim.nodes {
        let pending = node.queue.iter().chain(node.mac.iter()).filter(|p| !p.delivered).count();
        sim.out.in_flight += pending as u64;
    }
    sim.out
}

impl Sim<'_> {
    fn arrival<R: Rng>(&mut self, i: usize, t: f64, rng: &mut R) {
        self.out.generated += 1;
        let nb = self.topo.neighbors(i);
        if nb.is_empty() {
            self.out.dropped += 1;
            return;
        }
        let dest = nb[rng.random_range(0..nb.len())];
        let pkt = Packet {
            dest,
            handoff: t,
            attempts: 0,
            delivered: false,
        };
        if self.nodes[i].mac.is_none() {
            self.nodes[i].mac = Some(pkt);
            self.nodes[i].stage = 0;
            if !self.nodes[i].engaged {
                self.contend(i, t, rng);
            }
        } else {
            self.nodes[i].queue.push_back(pkt);
        }
    }

    fn window_start<R: Rng>(&mut self, t: f64, rng: &mut R) {
        let dc = self.cfg.context.cap.duty_cycle;
        let prof = &self.cfg.profile;
        self.awake = true;
        self.window_end = t + dc;
        self.q.push(t + dc, Event::WindowEnd);
        self.q.push(t + 1.0, Event::WindowStart);
        for i in 0..self.nodes.len() {
            self.out.energy.overhead += prof.e_on + prof.e_off;
            let node = &mut self.nodes[i];
            node.busy = 0.0;
            node.active_since = t;
            if node.mac.is_some() && !node.engaged {
                self.contend(i, t, rng);
            }
        }
    }

    fn window_end(&mut self, t: f64) {
        self.awake = false;
        self.close_window(t, self.cfg.context.cap.duty_cycle);
    }

    fn close_window(&mut self, t: f64, awake_time: f64) {
        let p_idle = self.cfg.profile.p_idle;
        for node in &mut self.nodes {
            if node.activity > 0 {
                node.busy += t - node.active_since;
                node.active_since = t;
            }
            self.out.energy.idle += p_idle * (awake_time - node.busy).max(0.0);
            node.busy = 0.0;
        }
    }

    fn exchange_time(&self) -> f64 {
        self.t_rts + self.t_cts + self.t_data + self.t_ack
    }

    fn contend<R: Rng>(&mut self, i: usize, t: f64, rng: &mut R) {
        if !self.awake || t >= self.window_end {
            return;
        }
        let cap = &self.cfg.context.cap;
        let cw = u64::from(cap.cw_min) << self.nodes[i].stage.min(cap.backoff_stages);
        let slots = rng.random_range(1..=cw);
        let node = &mut self.nodes[i];
        node.timer += 1;
        self.q.push(t + slots as f64 * self.slot, Event::Backoff(i, node.timer));
    }

    fn backoff_done<R: Rng>(&mut self, i: usize, t: f64, rng: &mut R) {
        let node = &self.nodes[i];
        if node.engaged || node.transmitting.is_some() || node.mac.is_none() {
            return;
        }
        if !self.awake || t + self.exchange_time() > self.window_end {
            // retried at the next window start
            return;
        }
        let sensed_until = node
            .hearing
            .iter()
            .map(|&f| &self.frames[f])
            .filter(|f| f.start <= t - self.slot + 1e-12)
            .map(|f| f.end)
            .fold(f64::NEG_INFINITY, f64::max);
        let busy_until = sensed_until.max(node.nav);
        if busy_until > t {
            let node = &mut self.nodes[i];
            node.timer += 1;
            self.q.push(busy_until, Event::Resume(i, node.timer));
            return;
        }
        let _ = rng;
        let node = &mut self.nodes[i];
        node.engaged = true;
        let pkt = node.mac.as_mut().expect("checked above");
        pkt.attempts += 1;
        let dest = pkt.dest;
        self.start_frame(Kind::Rts, i, dest, t);
    }

    fn start_frame(&mut self, kind: Kind, s: usize, dest: usize, t: f64) {
        let dur = match kind {
            Kind::Rts => self.t_rts,
            Kind::Cts => self.t_cts,
            Kind::Data => self.t_data,
            Kind::Ack => self.t_ack,
        };
        let id = self.frames.len();
        // the sender stops hearing whatever it was receiving
        let was_hearing = std::mem::take(&mut self.nodes[s].hearing);
        for &f in &was_hearing {
            self.mark(f, s, Heard::Deaf);
        }
        self.nodes[s].hearing = was_hearing;
        let listeners: Vec<usize> = self.topo.neighbors(s).to_vec();
        let mut heard = Vec::with_capacity(listeners.len());
        for &k in &listeners {
            let node = &self.nodes[k];
            let state = if node.transmitting.is_some() {
                Heard::Deaf
            } else if !node.hearing.is_empty() {
                Heard::Corrupted
            } else {
                Heard::Clean
            };
            heard.push(state);
            if node.transmitting.is_none() {
                let others = node.hearing.clone();
                for f in others {
                    self.mark(f, k, Heard::Corrupted);
                }
            }
        }
        self.frames.push(Frame {
            kind,
            sender: s,
            dest,
            start: t,
            end: t + dur,
            heard,
        });
        for &k in &listeners {
            self.nodes[k].hearing.push(id);
            self.bump(k, t, true);
        }
        self.nodes[s].transmitting = Some(id);
        self.bump(s, t, true);
        self.q.push(t + dur, Event::FrameEnd(id));
    }

    fn mark(&mut self, f: usize, node: usize, state: Heard) {
        let frame = &mut self.frames[f];
        if let Some(pos) = self.topo.neighbors(frame.sender).iter().position(|&k| k == node) {
            if frame.heard[pos] != Heard::Deaf {
                frame.heard[pos] = state;
            }
        }
    }

    fn bump(&mut self, k: usize, t: f64, up: bool) {
        let node = &mut self.nodes[k];
        if up {
            if node.activity == 0 {
                node.active_since = t;
            }
            node.activity += 1;
        } else {
            node.activity -= 1;
            if node.activity == 0 {
                node.busy += t - node.active_since;
            }
        }
    }

    fn frame_end<R: Rng>(&mut self, id: usize, t: f64, rng: &mut R) {
        let (kind, s, d) = {
            let f = &self.frames[id];
            (f.kind, f.sender, f.dest)
        };
        let listeners: Vec<usize> = self.topo.neighbors(s).to_vec();
        for &k in &listeners {
            self.nodes[k].hearing.retain(|&f| f != id);
            self.bump(k, t, false);
        }
        self.nodes[s].transmitting = None;
        self.bump(s, t, false);

        let ctx = &self.cfg.context;
        let bits = match kind {
            Kind::Rts => ctx.cap.rts_len,
            Kind::Cts => ctx.cap.cts_len,
            Kind::Data => ctx.msg_len,
            Kind::Ack => ctx.cap.ack_len,
        };
        let frame = &self.frames[id];
        let ok = frame.state_at(&self.topo, d) == Heard::Clean;
        let hearers = frame.heard.iter().filter(|h| **h != Heard::Deaf).count() as f64;
        let dest_heard = frame.state_at(&self.topo, d) != Heard::Deaf;
        let e = &mut self.out.energy;
        if !ok {
            e.collision += bits * (self.e_tx + hearers * self.e_rx);
        } else if kind == Kind::Data {
            let others = hearers - if dest_heard { 1.0 } else { 0.0 };
            e.payload += bits * (self.e_tx + self.e_rx);
            e.overhearing += bits * others * self.e_rx;
        } else {
            e.overhead += bits * (self.e_tx + hearers * self.e_rx);
        }

        // virtual carrier sense for third parties that decoded the frame
        let nav_until = match kind {
            Kind::Rts => Some(t + self.t_cts + self.t_data + self.t_ack),
            Kind::Cts => Some(t + self.t_data + self.t_ack),
            _ => None,
        };
        if let Some(until) = nav_until {
            for (pos, &k) in listeners.iter().enumerate() {
                if k != d && self.frames[id].heard[pos] == Heard::Clean {
                    let node = &mut self.nodes[k];
                    node.nav = node.nav.max(until);
                }
            }
        }

        match kind {
            Kind::Rts => {
                let r = &self.nodes[d];
                let can_respond = ok && !r.engaged && r.transmitting.is_none() && r.nav <= t;
                if can_respond {
                    let r = &mut self.nodes[d];
                    r.engaged = true;
                    r.peer = Some(s);
                    r.timer += 1;
                    self.start_frame(Kind::Cts, d, s, t);
                } else {
                    let node = &mut self.nodes[s];
                    node.timer += 1;
                    self.q.push(t + self.t_cts, Event::CtsTimeout(s, node.timer));
                }
            }
            Kind::Cts => {
                if ok {
                    self.start_frame(Kind::Data, d, s, t);
                } else {
                    self.release(s, t, rng);
                    self.fail(d, t, rng);
                }
            }
            Kind::Data => {
                if ok {
                    if let Some(p) = self.nodes[s].mac.as_mut() {
                        if !p.delivered {
                            p.delivered = true;
                            self.out.delivered += 1;
                            self.out.delay_sum += t - p.handoff;
                        }
                    }
                    self.start_frame(Kind::Ack, d, s, t);
                } else {
                    self.release(d, t, rng);
                    self.fail(s, t, rng);
                }
            }
            Kind::Ack => {
                self.release(s, t, rng);
                if ok {
                    let node = &mut self.nodes[d];
                    node.engaged = false;
                    node.mac = None;
                    node.stage = 0;
                    self.next_packet(d, t, rng);
                } else {
                    self.fail(d, t, rng);
                }
            }
        }
    }

    /// Ends a responder's part in an exchange.
    fn release<R: Rng>(&mut self, r: usize, t: f64, rng: &mut R) {
        let node = &mut self.nodes[r];
        if node.peer.take().is_some() {
            node.engaged = false;
            if node.mac.is_some() {
                self.contend(r, t, rng);
            }
        }
    }

    /// A failed attempt by sender `s`.
    fn fail<R: Rng>(&mut self, s: usize, t: f64, rng: &mut R) {
        self.out.collisions += 1;
        let max_stage = self.cfg.context.cap.backoff_stages;
        let max_attempts = self.cfg.settings.max_attempts;
        let node = &mut self.nodes[s];
        node.engaged = false;
        node.timer += 1;
        let attempts = node.mac.as_ref().map_or(0, |p| p.attempts);
        if attempts >= max_attempts {
            let pkt = node.mac.take().expect("sender holds a packet");
            if !pkt.delivered {
                self.out.dropped += 1;
            }
            node.stage = 0;
            self.next_packet(s, t, rng);
        } else {
            node.stage = (node.stage + 1).min(max_stage);
            self.contend(s, t, rng);
        }
    }

    fn next_packet<R: Rng>(&mut self, s: usize, t: f64, rng: &mut R) {
        if let Some(mut p) = self.nodes[s].queue.pop_front() {
            p.handoff = t;
            self.nodes[s].mac = Some(p);
            self.contend(s, t, rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::NetworkContext;
    use crate::desim::SimSettings;
    use crate::radio::RadioProfile;

    fn cfg(g: f64, duration: f64) -> SimConfig {
        SimConfig::new(
            NetworkContext {
                pkt_rate: g,
                ..NetworkContext::default()
            },
            RadioProfile::default(),
            SimSettings {
                sim_duration: duration,
                ..SimSettings::default()
            },
        )
    }

    #[test]
    fn no_traffic_idles_through_windows() {
        let c = cfg(0.0, 20.0);
        let o = run_once(&c, 0);
        assert_eq!(o.energy.collision, 0.0);
        assert_eq!(o.energy.overhearing, 0.0);
        let idle = 100.0 * c.profile.p_idle * c.context.cap.duty_cycle * 20.0;
        assert!((o.energy.idle - idle).abs() / idle < 1e-9, "{} vs {idle}", o.energy.idle);
    }

    #[test]
    fn packets_are_conserved() {
        let o = run_once(&cfg(20.0, 20.0), 1);
        assert!(o.delivered > 0);
        assert_eq!(o.generated, o.delivered + o.dropped + o.in_flight);
    }

    #[test]
    fn deterministic_per_seed() {
        let c = cfg(10.0, 5.0);
        assert_eq!(run_once(&c, 4), run_once(&c, 4));
    }
}
