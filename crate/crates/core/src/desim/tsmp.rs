//! TSMP over a fixed superframe. Every directed link owns one cell per
//! frame; the receiver wakes for it, the sender only when it has a packet
//! for that receiver. There is no contention, so nothing collides and nobody
//! overhears.
//!
//! Energy attribution per cell:
//! - receiver wake-up: overhead;
//! - empty cell: the receiver listens for twice the guard time (idle);
//! - used cell: the receiver waits out the sender's clock offset, uniform in
//!   [guard, 2 guard] (overhead), data bits go to payload, the ACK and the
//!   sender's wake-up to overhead.
//!
//! Each directed link also exchanges a sync packet pair every sync interval.

use std::collections::VecDeque;

use rand::Rng;

use super::deploy::Topology;
use super::engine::EventQueue;
use super::schedule::{verify_schedule, Link, Schedule};
use super::{Arrivals, Packet, RunOutcome, SimConfig, SimError, LANE_DYNAMICS};
use crate::radio::{rx_energy_per_bit, tx_energy_per_bit};

#[derive(Debug, Clone, Copy)]
enum Event {
    Arrival(usize),
    /// Global slot index; the column is `index % cols`.
    Slot(u64),
    Delivered(usize),
    Sync(usize),
}

#[derive(Default)]
struct Node {
    queue: VecDeque<Packet>,
    mac: Option<Packet>,
}

/// Rejects a schedule that does not fit the topology.
pub fn check_schedule(topo: &Topology, sched: &Schedule) -> Result<(), SimError> {
    verify_schedule(topo, sched).map_err(|p| SimError::ScheduleMismatch(p.join("; ")))
}

/// One replication over the given topology and schedule.
pub fn run_once(cfg: &SimConfig, topo: &Topology, sched: &Schedule, rep: u32) -> RunOutcome {
    let ctx = &cfg.context;
    let prof = &cfg.profile;
    let n = topo.len();
    let mut rng = cfg.rng(rep, LANE_DYNAMICS);
    let arrivals = Arrivals::per_node(ctx);
    let horizon = cfg.settings.sim_duration;
    let cols = sched.cols.max(1) as usize;
    let slot = ctx.sched.frame_len / cols as f64;
    let guard = ctx.sched.guard;
    let e_tx = tx_energy_per_bit(ctx.tx_range, prof);
    let e_rx = rx_energy_per_bit(prof);

    let mut by_col: Vec<Vec<Link>> = vec![Vec::new(); cols];
    for (col, link) in sched.assignments() {
        by_col[col as usize].push(link);
    }
    let links: Vec<(usize, usize)> = topo.links();

    let mut nodes: Vec<Node> = (0..n).map(|_| Node::default()).collect();
    let mut q = EventQueue::new();
    let mut out = RunOutcome::new(horizon);
    out.mean_degree = topo.mean_degree();

    for i in 0..n {
        if let Some(dt) = arrivals.next(&mut rng) {
            q.push(dt, Event::Arrival(i));
        }
    }
    for l in 0..links.len() {
        let phase = rng.random::<f64>() * ctx.sched.sync_interval;
        q.push(phase, Event::Sync(l));
    }
    q.push(0.0, Event::Slot(0));

    while let Some((t, ev)) = q.pop_until(horizon) {
        match ev {
            Event::Arrival(i) => {
                if let Some(dt) = arrivals.next(&mut rng) {
                    q.push(t + dt, Event::Arrival(i));
                }
                out.generated += 1;
                let nb = topo.neighbors(i);
                if nb.is_empty() {
                    out.dropped += 1;
                    continue;
                }
                let pkt = Packet {
                    dest: nb[rng.random_range(0..nb.len())],
                    handoff: t,
                    attempts: 0,
                    delivered: false,
                };
                if nodes[i].mac.is_none() {
                    nodes[i].mac = Some(pkt);
                } else {
                    nodes[i].queue.push_back(pkt);
                }
            }
            Event::Slot(k) => {
                let next = (k + 1) as f64 * slot;
                for link in &by_col[(k % cols as u64) as usize] {
                    out.energy.overhead += prof.e_on + prof.e_off;
                    let sender = &mut nodes[link.sender];
                    let ready = sender
                        .mac
                        .as_ref()
                        .is_some_and(|p| p.dest == link.receiver && p.attempts == 0 && p.handoff <= t);
                    if ready {
                        sender.mac.as_mut().expect("ready").attempts = 1;
                        let wait = guard + rng.random::<f64>() * guard;
                        let e = &mut out.energy;
                        e.overhead += prof.p_idle * wait;
                        e.payload += (e_tx + e_rx) * ctx.msg_len;
                        e.overhead += (e_tx + e_rx) * ctx.sched.ack_len;
                        e.overhead += prof.e_on + prof.e_off;
                        q.push(next, Event::Delivered(link.sender));
                    } else {
                        out.energy.idle += prof.p_idle * 2.0 * guard;
                    }
                }
                // after the deliveries, so a packet queued behind one can use the next cell
                q.push(next, Event::Slot(k + 1));
            }
            Event::Delivered(s) => {
                let pkt = nodes[s].mac.take().expect("packet in flight");
                out.delivered += 1;
                out.delay_sum += t - pkt.handoff;
                if let Some(mut next) = nodes[s].queue.pop_front() {
                    next.handoff = t;
                    nodes[s].mac = Some(next);
                }
            }
            Event::Sync(l) => {
                q.push(t + ctx.sched.sync_interval, Event::Sync(l));
                out.energy.overhead += 2.0 * (e_tx + e_rx) * ctx.sched.sync_len;
            }
        }
    }

    for node in &nodes {
        out.in_flight += (node.queue.len() + usize::from(node.mac.is_some())) as u64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::desim::schedule::build_for_topology;
    use crate::desim::tsmp_reference_config;

    #[test]
    fn reference_network_runs_without_collisions() {
        let cfg = tsmp_reference_config();
        let topo = cfg.topology(0);
        assert_eq!(topo.mean_degree(), 9.0);
        let sched = build_for_topology(&topo, 3, 30, 1, 50).unwrap();
        check_schedule(&topo, &sched).unwrap();
        let o = run_once(&cfg, &topo, &sched, 0);
        assert_eq!(o.collisions, 0);
        assert_eq!(o.energy.collision, 0.0);
        assert_eq!(o.energy.overhearing, 0.0);
        assert_eq!(o.generated, o.delivered + o.dropped + o.in_flight);
        let d = o.mean_delay().unwrap();
        assert!(d > 0.25 && d < 0.4, "{d}");
    }

    #[test]
    fn foreign_schedule_is_rejected() {
        let cfg = tsmp_reference_config();
        let topo = cfg.topology(0);
        let empty = Schedule {
            rows: 3,
            cols: 30,
            cells: Vec::new(),
        };
        assert!(matches!(check_schedule(&topo, &empty), Err(SimError::ScheduleMismatch(_))));
    }
}
