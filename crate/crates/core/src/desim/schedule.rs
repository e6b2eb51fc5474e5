//! TSMP superframe construction: greedy two-hop coloring of directed links
//! over (frequency, slot) cells.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::deploy::{Area, Position, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link {
    pub sender: usize,
    pub receiver: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
    pub links: Vec<Link>,
}

/// Superframe of `rows` frequencies by `cols` slots. A cell may carry
/// several links when they are far enough apart to reuse it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub rows: u32,
    pub cols: u32,
    pub cells: Vec<Cell>,
}

impl Schedule {
    /// All (column, link) assignments, ordered by column.
    pub fn assignments(&self) -> Vec<(u32, Link)> {
        let mut v: Vec<(u32, Link)> = self
            .cells
            .iter()
            .flat_map(|c| c.links.iter().map(move |l| (c.col, *l)))
            .collect();
        v.sort();
        v
    }

    pub fn link_count(&self) -> usize {
        self.cells.iter().map(|c| c.links.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error(
        "insufficient cells: {links} directed links need at least {min_cols} slots (a node has {min_cols} incident links); \
         {rows}x{cols} left {unscheduled} links unscheduled"
    )]
    InsufficientCells {
        links: usize,
        min_cols: usize,
        rows: u32,
        cols: u32,
        unscheduled: usize,
    },
    #[error("communication graph is not connected")]
    Disconnected,
}

/// Whether two links may not share a cell: they share a node or an endpoint
/// of one is within range of an endpoint of the other.
pub fn two_hop_conflict(topo: &Topology, a: Link, b: Link) -> bool {
    let ea = [a.sender, a.receiver];
    let eb = [b.sender, b.receiver];
    ea.iter()
        .any(|&x| eb.iter().any(|&y| x == y || topo.adjacent(x, y)))
}

/// Builds a schedule from positions (plain Euclidean distances).
pub fn build_tsmp_schedule(
    positions: &[Position],
    tx_range: f64,
    rows: u32,
    cols: u32,
    seed: u64,
) -> Result<Schedule, ScheduleError> {
    let area = Area::square(1.0);
    let topo = Topology::new(positions.to_vec(), &area, tx_range, false);
    build_for_topology(&topo, rows, cols, seed, 50)
}

/// Column-by-column greedy fill. The first attempt breaks ties by link
/// order; later attempts break them with a generator seeded from `seed`.
pub fn build_for_topology(
    topo: &Topology,
    rows: u32,
    cols: u32,
    seed: u64,
    attempts: u32,
) -> Result<Schedule, ScheduleError> {
    if !topo.is_connected() {
        return Err(ScheduleError::Disconnected);
    }
    let links: Vec<Link> = topo
        .links()
        .into_iter()
        .map(|(sender, receiver)| Link { sender, receiver })
        .collect();
    let min_cols = (0..topo.len()).map(|v| 2 * topo.neighbors(v).len()).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fewest_left = links.len();
    for attempt in 0..attempts.max(1) {
        match fill(topo, &links, rows, cols, (attempt > 0).then_some(&mut rng)) {
            Ok(s) => return Ok(s),
            Err(left) => fewest_left = fewest_left.min(left),
        }
    }
    Err(ScheduleError::InsufficientCells {
        links: links.len(),
        min_cols,
        rows,
        cols,
        unscheduled: fewest_left,
    })
}

fn fill(
    topo: &Topology,
    links: &[Link],
    rows: u32,
    cols: u32,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Schedule, usize> {
    let mut remaining: BTreeSet<Link> = links.iter().copied().collect();
    let mut incidence = vec![0usize; topo.len()];
    for l in links {
        incidence[l.sender] += 1;
        incidence[l.receiver] += 1;
    }
    let mut cells = Vec::new();
    for col in 0..cols {
        let mut used = vec![false; topo.len()];
        for row in 0..rows {
            let mut cand: Vec<(usize, u64, Link)> = remaining
                .iter()
                .map(|l| {
                    let jitter = rng.as_mut().map_or(0, |r| r.random::<u64>());
                    (incidence[l.sender] + incidence[l.receiver], jitter, *l)
                })
                .collect();
            if let Some(r) = rng.as_mut() {
                cand.shuffle(r);
            }
            cand.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut cell: Vec<Link> = Vec::new();
            for (_, _, l) in cand {
                if used[l.sender] || used[l.receiver] {
                    continue;
                }
                if cell.iter().any(|o| two_hop_conflict(topo, l, *o)) {
                    continue;
                }
                used[l.sender] = true;
                used[l.receiver] = true;
                incidence[l.sender] -= 1;
                incidence[l.receiver] -= 1;
                remaining.remove(&l);
                cell.push(l);
            }
            if !cell.is_empty() {
                cells.push(Cell { row, col, links: cell });
            }
        }
    }
    if remaining.is_empty() {
        Ok(Schedule { rows, cols, cells })
    } else {
        Err(remaining.len())
    }
}

/// Brute-force check of every cell pair. Returns all problems found.
pub fn verify_schedule(topo: &Topology, sched: &Schedule) -> Result<(), Vec<String>> {
    let mut problems = Vec::new();
    let mut seen = BTreeSet::new();
    for c in &sched.cells {
        if c.row >= sched.rows || c.col >= sched.cols {
            problems.push(format!("cell ({}, {}) outside {}x{}", c.row, c.col, sched.rows, sched.cols));
        }
        for l in &c.links {
            if l.sender >= topo.len() || l.receiver >= topo.len() || !topo.adjacent(l.sender, l.receiver) {
                problems.push(format!("link {}->{} is not an edge", l.sender, l.receiver));
            } else {
                seen.insert((l.sender, l.receiver));
            }
        }
    }
    for (s, r) in topo.links() {
        if !seen.contains(&(s, r)) {
            problems.push(format!("link {s}->{r} has no cell"));
        }
    }
    for (i, a) in sched.cells.iter().enumerate() {
        for (j, b) in sched.cells.iter().enumerate() {
            if j < i || a.col != b.col {
                continue;
            }
            for (x, la) in a.links.iter().enumerate() {
                for (y, lb) in b.links.iter().enumerate() {
                    if i == j && y <= x {
                        continue;
                    }
                    let shared = [la.sender, la.receiver]
                        .iter()
                        .any(|n| *n == lb.sender || *n == lb.receiver);
                    if shared {
                        problems.push(format!(
                            "slot {}: links {}->{} and {}->{} share a node",
                            a.col, la.sender, la.receiver, lb.sender, lb.receiver
                        ));
                    } else if i == j && two_hop_conflict(topo, *la, *lb) {
                        problems.push(format!(
                            "cell ({}, {}): links {}->{} and {}->{} are within two hops",
                            a.row, a.col, la.sender, la.receiver, lb.sender, lb.receiver
                        ));
                    }
                }
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_links_sharing_a_node_use_different_slots() {
        let t = Topology::from_edges(3, &[(0, 1), (1, 2)]);
        let s = build_for_topology(&t, 1, 8, 1, 1).unwrap();
        verify_schedule(&t, &s).unwrap();
        let col = |a, b| {
            s.assignments()
                .into_iter()
                .find(|(_, l)| l.sender == a && l.receiver == b)
                .unwrap()
                .0
        };
        assert_ne!(col(0, 1), col(1, 2));
    }

    #[test]
    fn distant_pairs_reuse_one_cell() {
        let pos = vec![(0.0, 0.0), (1.0, 0.0), (100.0, 0.0), (101.0, 0.0)];
        let topo = Topology::new(pos.clone(), &Area::square(1.0), 2.0, false);
        // one direction each so a single slot can hold both
        let t = Topology::from_edges(4, &[(0, 1), (2, 3)]);
        assert!(!two_hop_conflict(&topo, Link { sender: 0, receiver: 1 }, Link { sender: 2, receiver: 3 }));
        let mut s = Schedule {
            rows: 1,
            cols: 2,
            cells: vec![Cell {
                row: 0,
                col: 0,
                links: vec![Link { sender: 0, receiver: 1 }, Link { sender: 2, receiver: 3 }],
            }],
        };
        s.cells.push(Cell {
            row: 0,
            col: 1,
            links: vec![Link { sender: 1, receiver: 0 }, Link { sender: 3, receiver: 2 }],
        });
        verify_schedule(&t, &s).unwrap();
    }

    #[test]
    fn too_few_cells() {
        let t = Topology::from_edges(3, &[(0, 1), (1, 2)]);
        let err = build_for_topology(&t, 1, 3, 1, 3).unwrap_err();
        match err {
            ScheduleError::InsufficientCells { min_cols, .. } => assert_eq!(min_cols, 4),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn verifier_catches_conflicts() {
        let t = Topology::from_edges(3, &[(0, 1), (1, 2)]);
        let bad = Schedule {
            rows: 2,
            cols: 1,
            cells: vec![
                Cell { row: 0, col: 0, links: vec![Link { sender: 0, receiver: 1 }] },
                Cell { row: 1, col: 0, links: vec![Link { sender: 1, receiver: 2 }] },
            ],
        };
        let p = verify_schedule(&t, &bad).unwrap_err();
        assert!(p.iter().any(|m| m.contains("share a node")));
        assert!(p.iter().any(|m| m.contains("has no cell")));
    }
}
