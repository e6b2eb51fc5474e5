//! Node placement and connectivity.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Rectangular deployment field, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub fn square(side: f64) -> Area {
        Area {
            width: side,
            height: side,
        }
    }

    pub fn size(&self) -> f64 {
        self.width * self.height
    }

    /// Radius of the disk with the same area.
    pub fn equivalent_radius(&self) -> f64 {
        (self.size() / std::f64::consts::PI).sqrt()
    }
}

pub type Position = (f64, f64);

/// `n` positions uniform over `area`.
pub fn place<R: Rng + ?Sized>(area: &Area, n: usize, rng: &mut R) -> Vec<Position> {
    (0..n)
        .map(|_| (rng.random::<f64>() * area.width, rng.random::<f64>() * area.height))
        .collect()
}

/// Unit-disk connectivity over a set of positions.
#[derive(Debug, Clone)]
pub struct Topology {
    pub positions: Vec<Position>,
    adj: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Nodes closer than or at `range` are connected. With `toroidal` the
    /// field wraps around, which removes border effects.
    pub fn new(positions: Vec<Position>, area: &Area, range: f64, toroidal: bool) -> Topology {
        let n = positions.len();
        let mut adj = vec![false; n * n];
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let mut dx = (positions[i].0 - positions[j].0).abs();
                let mut dy = (positions[i].1 - positions[j].1).abs();
                if toroidal {
                    dx = dx.min(area.width - dx);
                    dy = dy.min(area.height - dy);
                }
                if dx * dx + dy * dy <= range * range {
                    adj[i * n + j] = true;
                    adj[j * n + i] = true;
                    neighbors[i].push(j);
                    neighbors[j].push(i);
                }
            }
        }
        Topology {
            positions,
            adj,
            neighbors,
        }
    }

    /// Builds a topology from an explicit undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Topology {
        let mut adj = vec![false; n * n];
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b && !adj[a * n + b] {
                adj[a * n + b] = true;
                adj[b * n + a] = true;
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for l in &mut neighbors {
            l.sort_unstable();
        }
        Topology {
            positions: vec![(0.0, 0.0); n],
            adj,
            neighbors,
        }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a * self.len() + b]
    }

    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.neighbors[a]
    }

    pub fn mean_degree(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.neighbors.iter().map(Vec::len).sum::<usize>() as f64 / self.len() as f64
    }

    pub fn is_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Directed links (sender, receiver), ordered.
    pub fn links(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .flat_map(|a| self.neighbors[a].iter().map(move |&b| (a, b)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn placement_is_seeded() {
        let area = Area::square(100.0);
        let a = place(&area, 50, &mut ChaCha8Rng::seed_from_u64(7));
        let b = place(&area, 50, &mut ChaCha8Rng::seed_from_u64(7));
        let c = place(&area, 50, &mut ChaCha8Rng::seed_from_u64(8));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn single_node_inside() {
        let area = Area {
            width: 3.0,
            height: 2.0,
        };
        let p = place(&area, 1, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(p.len(), 1);
        assert!(p[0].0 >= 0.0 && p[0].0 < 3.0 && p[0].1 >= 0.0 && p[0].1 < 2.0);
    }

    #[test]
    fn wraparound_distance() {
        let area = Area::square(100.0);
        let pos = vec![(1.0, 50.0), (99.0, 50.0)];
        assert!(Topology::new(pos.clone(), &area, 5.0, true).adjacent(0, 1));
        assert!(!Topology::new(pos, &area, 5.0, false).adjacent(0, 1));
    }

    #[test]
    fn small_square_is_complete() {
        let area = Area::square(14.0);
        let pos = place(&area, 10, &mut ChaCha8Rng::seed_from_u64(3));
        let t = Topology::new(pos, &area, 20.0, false);
        assert_eq!(t.links().len(), 90);
        assert!(t.is_connected());
    }
}
