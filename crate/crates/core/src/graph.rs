//! Graph families on which the averaging process runs.
//!
//! Vertices are dense indices `0..n`. Edges are never materialized: every
//! family can map an edge index to its endpoints in O(1), which is all the
//! event-driven simulators need and keeps the hypercube usable up to `d = 30`.

use crate::error::{param, Error, Result};

pub const MAX_HYPERCUBE_DIM: u32 = 30;
pub const MAX_VERTICES: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Hypercube { d: u32 },
    /// Parts `C1 = 0..m` and `C2 = m..m+k`, with `m <= k`.
    CompleteBipartite { m: usize, k: usize },
    Complete { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    C1,
    C2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edge_count: usize,
    family: Family,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub degrees: Vec<usize>,
    pub mean: f64,
}

impl Graph {
    pub fn hypercube(d: u32) -> Result<Self> {
        if !(1..=MAX_HYPERCUBE_DIM).contains(&d) {
            return param(format!("hypercube dimension d={d} outside 1..={MAX_HYPERCUBE_DIM}"));
        }
        let n = 1usize << d;
        Ok(Graph { n, edge_count: d as usize * (n / 2), family: Family::Hypercube { d } })
    }

    pub fn complete_bipartite(m: usize, k: usize) -> Result<Self> {
        if m == 0 || k == 0 {
            return param("complete bipartite parts must be nonempty");
        }
        if m > k {
            return param(format!("complete bipartite requires m <= k, got m={m}, k={k}"));
        }
        let n = m.checked_add(k).filter(|&n| n <= MAX_VERTICES);
        let Some(n) = n else {
            return param("complete bipartite graph too large");
        };
        Ok(Graph { n, edge_count: m * k, family: Family::CompleteBipartite { m, k } })
    }

    pub fn complete(n: usize) -> Result<Self> {
        if !(2..=1 << 20).contains(&n) {
            return param(format!("complete graph size n={n} outside 2..=2^20"));
        }
        Ok(Graph { n, edge_count: n * (n - 1) / 2, family: Family::Complete { n } })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Short tag used in CSV output.
    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Hypercube { .. } => "hypercube",
            Family::CompleteBipartite { .. } => "k_bipartite",
            Family::Complete { .. } => "complete",
        }
    }

    /// Endpoints of edge `e`, smaller vertex first.
    ///
    /// Panics if `e >= edge_count()`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        assert!(e < self.edge_count, "edge index {e} out of range");
        match self.family {
            Family::Hypercube { d } => {
                let half = self.n / 2;
                let bit = e / half;
                let rest = e % half;
                // insert a zero at position `bit` of `rest`
                let low = rest & ((1 << bit) - 1);
                let x = ((rest >> bit) << (bit + 1)) | low;
                debug_assert!(bit < d as usize);
                (x, x | (1 << bit))
            }
            Family::CompleteBipartite { m: _, k } => {
                let m_part = self.n - k;
                (e / k, m_part + e % k)
            }
            Family::Complete { n } => {
                // row x holds pairs (x, y) for y > x; row x starts at x*n - x(x+1)/2
                let start = |x: usize| x * n - x * (x + 1) / 2;
                let disc = ((2 * n - 1) as f64).powi(2) - 8.0 * e as f64;
                let mut x = (((2 * n - 1) as f64 - disc.max(0.0).sqrt()) / 2.0).floor() as usize;
                x = x.min(n - 2);
                while start(x) > e {
                    x -= 1;
                }
                while x + 1 < n - 1 && start(x + 1) <= e {
                    x += 1;
                }
                (x, x + 1 + (e - start(x)))
            }
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.edge_count).map(move |e| self.edge(e))
    }

    pub fn degree(&self, x: usize) -> usize {
        match self.family {
            Family::Hypercube { d } => d as usize,
            Family::CompleteBipartite { m, k } => {
                if x < m {
                    k
                } else {
                    m
                }
            }
            Family::Complete { n } => n - 1,
        }
    }

    pub fn neighbors(&self, x: usize) -> Vec<usize> {
        match self.family {
            Family::Hypercube { d } => (0..d).map(|i| x ^ (1 << i)).collect(),
            Family::CompleteBipartite { m, .. } => {
                if x < m {
                    (m..self.n).collect()
                } else {
                    (0..m).collect()
                }
            }
            Family::Complete { n } => (0..n).filter(|&y| y != x).collect(),
        }
    }

    /// The `i`-th neighbor of `x` in the order used by [`Graph::neighbors`].
    pub fn neighbor(&self, x: usize, i: usize) -> usize {
        debug_assert!(i < self.degree(x));
        match self.family {
            Family::Hypercube { .. } => x ^ (1 << i),
            Family::CompleteBipartite { m, .. } => {
                if x < m {
                    m + i
                } else {
                    i
                }
            }
            Family::Complete { .. } => {
                if i < x {
                    i
                } else {
                    i + 1
                }
            }
        }
    }

    pub fn are_adjacent(&self, x: usize, y: usize) -> bool {
        if x == y {
            return false;
        }
        match self.family {
            Family::Hypercube { .. } => (x ^ y).is_power_of_two(),
            Family::CompleteBipartite { m, .. } => (x < m) != (y < m),
            Family::Complete { .. } => true,
        }
    }

    pub fn part_of(&self, x: usize) -> Option<Part> {
        match self.family {
            Family::CompleteBipartite { m, .. } => Some(if x < m { Part::C1 } else { Part::C2 }),
            _ => None,
        }
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees = (0..self.n).map(|x| self.degree(x)).collect();
        DegreeStats { degrees, mean: self.mean_degree() }
    }

    /// `2|E| / n`, computed from exact integers.
    pub fn mean_degree(&self) -> f64 {
        (2 * self.edge_count) as f64 / self.n as f64
    }

    /// Inverse spectral gap of the rate-1/2 simple random walk.
    pub fn relaxation_time(&self) -> Result<f64> {
        match self.family {
            Family::Hypercube { .. } => Ok(1.0),
            // Zero-sum modes on C2 give eigenvalue m/2; with a single vertex
            // on each side only the side-flip mode n/2 = 1 is left.
            Family::CompleteBipartite { m, k } => {
                if k == 1 {
                    Ok(1.0)
                } else {
                    Ok(2.0 / m as f64)
                }
            }
            Family::Complete { n } => Ok(2.0 / n as f64),
        }
    }

    pub fn check_vertex(&self, x: usize) -> Result<()> {
        if x >= self.n {
            return Err(Error::Parameter(format!("vertex {x} out of range for n={}", self.n)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn edge_set(g: &Graph) -> HashSet<(usize, usize)> {
        g.edges().collect()
    }

    #[test]
    fn hypercube_sizes() {
        let g = Graph::hypercube(1).unwrap();
        assert_eq!((g.n(), g.edge_count()), (2, 1));
        let g = Graph::hypercube(3).unwrap();
        assert_eq!((g.n(), g.edge_count()), (8, 12));
        let g = Graph::hypercube(10).unwrap();
        assert_eq!((g.n(), g.edge_count()), (1024, 5120));
        assert!(Graph::hypercube(0).is_err());
        assert!(Graph::hypercube(31).is_err());
    }

    #[test]
    fn hypercube_edges_are_unit_hamming() {
        let g = Graph::hypercube(5).unwrap();
        let set = edge_set(&g);
        assert_eq!(set.len(), g.edge_count());
        for &(x, y) in &set {
            assert!(x < y && (x ^ y).count_ones() == 1);
        }
    }

    #[test]
    fn bipartite_edges_cross() {
        let g = Graph::complete_bipartite(2, 3).unwrap();
        assert_eq!(g.edge_count(), 6);
        let set = edge_set(&g);
        assert_eq!(set.len(), 6);
        for &(x, y) in &set {
            assert_ne!(g.part_of(x), g.part_of(y));
        }
        let star = Graph::complete_bipartite(1, 4).unwrap();
        assert_eq!(star.edge_count(), 4);
        assert!(Graph::complete_bipartite(3, 2).is_err());
    }

    #[test]
    fn complete_edges_enumerate_all_pairs() {
        for n in 2..40 {
            let g = Graph::complete(n).unwrap();
            let set = edge_set(&g);
            assert_eq!(set.len(), n * (n - 1) / 2);
            assert!(set.iter().all(|&(x, y)| x < y && y < n));
        }
    }

    #[test]
    fn degrees() {
        let g = Graph::hypercube(4).unwrap();
        assert_eq!(g.degree_stats().mean, 4.0);
        let g = Graph::complete_bipartite(2, 3).unwrap();
        let s = g.degree_stats();
        assert_eq!(s.degrees, vec![3, 3, 2, 2, 2]);
        assert!((s.mean - 12.0 / 5.0).abs() < 1e-15);
        assert_eq!(Graph::complete(7).unwrap().mean_degree(), 6.0);
    }

    #[test]
    fn indexed_neighbors_agree() {
        for g in [Graph::hypercube(4).unwrap(), Graph::complete_bipartite(2, 5).unwrap(), Graph::complete(6).unwrap()] {
            for x in 0..g.n() {
                let all = g.neighbors(x);
                assert_eq!((0..g.degree(x)).map(|i| g.neighbor(x, i)).collect::<Vec<_>>(), all);
            }
        }
    }

    #[test]
    fn neighbors_match_adjacency() {
        for g in [
            Graph::hypercube(4).unwrap(),
            Graph::complete_bipartite(3, 5).unwrap(),
            Graph::complete(6).unwrap(),
        ] {
            for x in 0..g.n() {
                let nb = g.neighbors(x);
                assert_eq!(nb.len(), g.degree(x));
                for y in 0..g.n() {
                    assert_eq!(nb.contains(&y), g.are_adjacent(x, y));
                }
            }
        }
    }

    #[test]
    fn relaxation_times() {
        assert_eq!(Graph::hypercube(7).unwrap().relaxation_time().unwrap(), 1.0);
        assert_eq!(Graph::complete_bipartite(4, 6).unwrap().relaxation_time().unwrap(), 0.5);
        assert_eq!(Graph::complete(5).unwrap().relaxation_time().unwrap(), 0.4);
    }
}
