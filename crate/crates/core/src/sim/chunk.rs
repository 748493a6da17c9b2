//! Dyadic chunk discretization of the averaging process on complete
//! bipartite graphs.
//!
//! A unit mass is cut into `2^H` chunks that all start on one vertex. Every
//! chunk records its split counter `alpha` (a vertex holding chunks with
//! counter `alpha` carries mass `2^-alpha`) and a flag `beta` marking removal
//! by a collision. Masses are never stored as floats, so conservation is an
//! integer identity.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{for_each_ring, lp_distance, Lp, MassConfig};
use crate::error::{param, Error, Result};
use crate::graph::{Family, Graph};
use crate::mc::{run_replicas, Estimate};

/// Position of chunks that have left the graph.
pub const CEMETERY: u32 = u32::MAX;

/// `floor(log2 n - (ln n)^(1/3))`, floored at 0.
pub fn h_exponent(n: usize) -> u32 {
    let nf = n as f64;
    (nf.log2() - nf.ln().cbrt()).floor().max(0.0) as u32
}

fn gamma(m: usize, n: usize) -> Result<f64> {
    if m == 0 || 2 * m > n {
        return param(format!("need 1 <= m <= n/2, got m={m}, n={n}"));
    }
    Ok(m as f64 * (n - m) as f64 / n as f64)
}

/// `log2(n) / (2 gamma)` with `gamma = m(n-m)/n`.
pub fn t_mix(m: usize, n: usize) -> Result<f64> {
    Ok((n as f64).log2() / (2.0 * gamma(m, n)?))
}

/// `t_mix + lambda sqrt(ln n) / gamma`. May be negative for small `n` and
/// negative `lambda`; callers decide how to treat that.
pub fn t_mix_lambda(m: usize, n: usize, lambda: f64) -> Result<f64> {
    Ok(t_mix(m, n)? + lambda * (n as f64).ln().sqrt() / gamma(m, n)?)
}

#[derive(Debug, Clone)]
pub struct ChunkState {
    h: u32,
    t: f64,
    position: Vec<u32>,
    alpha: Vec<u32>,
    beta: Vec<bool>,
    occupants: HashMap<u32, Vec<u32>>,
    dead: usize,
}

/// What a single ring did to the chunk configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingOutcome {
    Nothing,
    Split,
    Beta,
    Alpha,
}

impl ChunkState {
    /// All `2^H` chunks on `x0`, counters zero. Only complete bipartite
    /// graphs are supported.
    pub fn new(g: &Graph, x0: usize) -> Result<Self> {
        if !matches!(g.family(), Family::CompleteBipartite { .. }) {
            return Err(Error::Capability(format!(
                "chunk process is defined on complete bipartite graphs, got {}",
                g.family_name()
            )));
        }
        g.check_vertex(x0)?;
        let h = h_exponent(g.n());
        if h > 26 {
            return Err(Error::Capability(format!("2^{h} chunks exceed the supported 2^26")));
        }
        let count = 1usize << h;
        let x0 = x0 as u32;
        let mut occupants = HashMap::new();
        occupants.insert(x0, (0..count as u32).collect());
        Ok(ChunkState {
            h,
            t: 0.0,
            position: vec![x0; count],
            alpha: vec![0; count],
            beta: vec![false; count],
            occupants,
            dead: 0,
        })
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn chunk_count(&self) -> usize {
        self.position.len()
    }

    pub fn position(&self, u: usize) -> u32 {
        self.position[u]
    }

    pub fn alpha(&self, u: usize) -> u32 {
        self.alpha[u]
    }

    pub fn beta(&self, u: usize) -> bool {
        self.beta[u]
    }

    pub fn cemetery_count(&self) -> usize {
        self.dead
    }

    pub fn alive_count(&self) -> usize {
        self.chunk_count() - self.dead
    }

    pub fn vertex_chunks(&self, x: usize) -> usize {
        self.occupants.get(&(x as u32)).map_or(0, Vec::len)
    }

    /// `w_t(x)`; exact because chunk counts are powers of two at most `2^H`.
    pub fn vertex_mass(&self, x: usize) -> f64 {
        self.vertex_chunks(x) as f64 / self.chunk_count() as f64
    }

    pub fn cemetery_mass(&self) -> f64 {
        self.dead as f64 / self.chunk_count() as f64
    }

    /// Occupied vertices with their chunk counts, in increasing vertex order.
    pub fn occupied(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = self.occupants.iter().map(|(&x, c)| (x as usize, c.len())).collect();
        v.sort_unstable();
        v
    }

    fn check_vertex_counts(&self, x: u32) -> Result<()> {
        let Some(list) = self.occupants.get(&x) else {
            return Ok(());
        };
        for &u in list {
            let u = u as usize;
            let expected = 1usize.checked_shl(self.h.saturating_sub(self.alpha[u])).unwrap_or(0);
            if self.position[u] != x || self.alpha[u] > self.h || expected != list.len() {
                return Err(Error::Numerical(format!(
                    "chunk {u} at vertex {x}: alpha={} but vertex holds {} chunks",
                    self.alpha[u],
                    list.len()
                )));
            }
        }
        Ok(())
    }

    /// Full invariant check: chunk totals, `count = 2^(H - alpha)` at every
    /// occupied vertex, and `beta = 1` only in the cemetery.
    pub fn check_invariants(&self) -> Result<()> {
        let on_graph: usize = self.occupants.values().map(Vec::len).sum();
        if on_graph + self.dead != self.chunk_count() {
            return Err(Error::Numerical(format!(
                "mass not conserved: {on_graph} chunks on the graph and {} in the cemetery out of {}",
                self.dead,
                self.chunk_count()
            )));
        }
        for &x in self.occupants.keys() {
            self.check_vertex_counts(x)?;
        }
        let buried = self.position.iter().filter(|&&p| p == CEMETERY).count();
        if buried != self.dead {
            return Err(Error::Numerical("cemetery count out of sync".into()));
        }
        if (0..self.chunk_count()).any(|u| self.beta[u] && self.position[u] != CEMETERY) {
            return Err(Error::Numerical("chunk flagged beta outside the cemetery".into()));
        }
        Ok(())
    }

    fn bury(&mut self, x: u32, collision: bool) {
        if let Some(list) = self.occupants.remove(&x) {
            self.dead += list.len();
            for u in list {
                let u = u as usize;
                self.position[u] = CEMETERY;
                if collision {
                    self.beta[u] = true;
                } else {
                    self.alpha[u] = self.h + 1;
                }
            }
        }
    }

    /// Applies one ring of edge `xy`.
    pub fn ring<R: Rng + ?Sized>(&mut self, x: usize, y: usize, rng: &mut R) -> RingOutcome {
        let (x, y) = (x as u32, y as u32);
        let (cx, cy) = (self.vertex_chunks(x as usize), self.vertex_chunks(y as usize));
        match (cx, cy) {
            (0, 0) => RingOutcome::Nothing,
            (a, b) if a > 0 && b > 0 => {
                self.bury(x, true);
                self.bury(y, true);
                RingOutcome::Beta
            }
            _ => {
                let (full, empty) = if cx > 0 { (x, y) } else { (y, x) };
                let c = cx.max(cy);
                if c == 1 {
                    debug_assert_eq!(self.alpha[self.occupants[&full][0] as usize], self.h);
                    self.bury(full, false);
                    return RingOutcome::Alpha;
                }
                let mut list = self.occupants.remove(&full).expect("occupied");
                let half = c / 2;
                for j in 0..half {
                    let r = rng.random_range(j..c);
                    list.swap(j, r);
                }
                let moved: Vec<u32> = list.drain(..half).collect();
                for &u in &moved {
                    self.position[u as usize] = empty;
                }
                for &u in moved.iter().chain(&list) {
                    self.alpha[u as usize] += 1;
                }
                self.occupants.insert(full, list);
                self.occupants.insert(empty, moved);
                RingOutcome::Split
            }
        }
    }

    fn check_ring(&self, x: usize, y: usize) -> Result<()> {
        if self.alive_count() + self.dead != self.chunk_count() {
            return Err(Error::Numerical("chunk count changed".into()));
        }
        let on_graph: usize = self.occupants.values().map(Vec::len).sum();
        if on_graph != self.alive_count() {
            return Err(Error::Numerical("mass not conserved".into()));
        }
        self.check_vertex_counts(x as u32)?;
        self.check_vertex_counts(y as u32)
    }
}

/// Runs the chunk process from `x0` up to time `t`.
pub fn chunk_simulate<R: Rng + ?Sized>(g: &Graph, x0: usize, t: f64, rng: &mut R) -> Result<ChunkState> {
    if !(t >= 0.0) || !t.is_finite() {
        return param(format!("time must be finite and >= 0, got {t}"));
    }
    let mut state = ChunkState::new(g, x0)?;
    let mut split_rng = ChaCha8Rng::seed_from_u64(rng.random());
    for_each_ring(g, t, rng, |x, y| {
        state.ring(x, y, &mut split_rng);
    });
    state.t = t;
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkAliveStats {
    /// Fraction of chunks still on the graph (`beta = 0`, `alpha <= H`).
    pub alive: Estimate,
    /// Fraction of chunks on the graph with `alpha >= log2 n - b sqrt(ln n)`.
    pub alive_in_window: Estimate,
    pub alpha_threshold: f64,
}

pub fn chunk_alive_stats(g: &Graph, x0: usize, t: f64, replicas: usize, seed: u64, b: f64) -> Result<ChunkAliveStats> {
    ChunkState::new(g, x0)?;
    if replicas < 2 {
        return param(format!("at least 2 replicas required, got {replicas}"));
    }
    let n = g.n() as f64;
    let threshold = n.log2() - b * n.ln().sqrt();
    let samples = run_replicas(seed, replicas, |rng, _| {
        let s = chunk_simulate(g, x0, t, rng).expect("validated");
        let total = s.chunk_count() as f64;
        let in_window = (0..s.chunk_count())
            .filter(|&u| s.position(u) != CEMETERY && s.alpha(u) as f64 >= threshold)
            .count();
        (s.alive_count() as f64 / total, in_window as f64 / total)
    });
    let alive: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let window: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(ChunkAliveStats {
        alive: Estimate::from_samples(&alive)?,
        alive_in_window: Estimate::from_samples(&window)?,
        alpha_threshold: threshold,
    })
}

/// Averaging process and chunk process driven by one event stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledChunkStats {
    /// `E sum_x (w_t(x) - 1/n)_+`.
    pub excess_chunk_mass: Estimate,
    /// `E (1/2) ||eta_t/pi - 1||_1`.
    pub half_l1: Estimate,
    /// Largest `w_t(x) - eta_t(x)` seen at any ring endpoint; `<= 0` means
    /// domination held throughout.
    pub max_domination_gap: f64,
    /// Replicas in which an invariant check failed after some ring.
    pub invariant_failures: usize,
    pub events: u64,
}

pub fn coupled_chunk_stats(g: &Graph, x0: usize, t: f64, replicas: usize, seed: u64) -> Result<CoupledChunkStats> {
    ChunkState::new(g, x0)?;
    if !(t >= 0.0) || !t.is_finite() {
        return param(format!("time must be finite and >= 0, got {t}"));
    }
    if replicas < 2 {
        return param(format!("at least 2 replicas required, got {replicas}"));
    }
    let n = g.n();
    let samples = run_replicas(seed, replicas, |rng, _| {
        let mut eta = MassConfig::dirac(n, x0).expect("validated");
        let mut w = ChunkState::new(g, x0).expect("validated");
        let mut split_rng = ChaCha8Rng::seed_from_u64(rng.random());
        let mut gap = f64::NEG_INFINITY;
        let mut failed = false;
        let mut events = 0u64;
        for_each_ring(g, t, rng, |x, y| {
            events += 1;
            eta.average(x, y);
            w.ring(x, y, &mut split_rng);
            if w.check_ring(x, y).is_err() {
                failed = true;
            }
            for z in [x, y] {
                gap = gap.max(w.vertex_mass(z) - eta.as_slice()[z]);
            }
        });
        failed |= w.check_invariants().is_err();
        let inv_n = 1.0 / n as f64;
        let excess: f64 = w.occupied().iter().map(|&(x, _)| (w.vertex_mass(x) - inv_n).max(0.0)).sum();
        let half_l1 = 0.5 * lp_distance(eta.as_slice(), Lp::L1).power;
        (excess, half_l1, gap, failed, events)
    });
    let excess: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let half: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(CoupledChunkStats {
        excess_chunk_mass: Estimate::from_samples(&excess)?,
        half_l1: Estimate::from_samples(&half)?,
        max_domination_gap: samples.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max),
        invariant_failures: samples.iter().filter(|s| s.3).count(),
        events: samples.iter().map(|s| s.4).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::replica_stream;

    #[test]
    fn h_values() {
        assert_eq!(h_exponent(1024), 8);
        assert_eq!(h_exponent(4096), 9);
        assert_eq!(h_exponent(2), 0);
    }

    #[test]
    fn initial_state() {
        let g = Graph::complete_bipartite(2, 30).unwrap();
        let mut rng = replica_stream(0, 0);
        let s = chunk_simulate(&g, 5, 0.0, &mut rng).unwrap();
        assert_eq!(s.chunk_count(), 1 << h_exponent(32));
        assert_eq!(s.vertex_chunks(5), s.chunk_count());
        assert!((0..s.chunk_count()).all(|u| s.alpha(u) == 0 && !s.beta(u)));
        s.check_invariants().unwrap();
    }

    #[test]
    fn rejects_other_families() {
        let g = Graph::hypercube(4).unwrap();
        assert!(matches!(ChunkState::new(&g, 0), Err(Error::Capability(_))));
    }

    #[test]
    fn ring_rules() {
        let g = Graph::complete_bipartite(2, 62).unwrap(); // n = 64, H = 4
        let mut rng = replica_stream(1, 0);
        let mut s = ChunkState::new(&g, 0).unwrap();
        assert_eq!(s.h(), 4);
        assert_eq!(s.ring(1, 2, &mut rng), RingOutcome::Nothing);
        assert_eq!(s.ring(0, 2, &mut rng), RingOutcome::Split);
        assert_eq!((s.vertex_chunks(0), s.vertex_chunks(2)), (8, 8));
        assert!((0..16).all(|u| s.alpha(u) == 1));
        assert_eq!(s.ring(0, 3, &mut rng), RingOutcome::Split);
        assert_eq!(s.ring(1, 3, &mut rng), RingOutcome::Split);
        assert_eq!(s.ring(1, 2, &mut rng), RingOutcome::Beta);
        assert_eq!(s.cemetery_count(), 2 + 8);
        s.check_invariants().unwrap();
        // drive vertex 0 (4 chunks) down to a single chunk, then bury it
        assert_eq!(s.ring(0, 4, &mut rng), RingOutcome::Split);
        assert_eq!(s.ring(0, 5, &mut rng), RingOutcome::Split);
        assert_eq!(s.vertex_chunks(0), 1);
        assert_eq!(s.ring(0, 6, &mut rng), RingOutcome::Alpha);
        let u = (0..16).find(|&u| s.alpha(u) == 5).unwrap();
        assert_eq!(s.position(u), CEMETERY);
        assert!(!s.beta(u));
        s.check_invariants().unwrap();
    }

    #[test]
    fn coupled_run_dominates_and_conserves() {
        let g = Graph::complete_bipartite(3, 61).unwrap();
        let stats = coupled_chunk_stats(&g, 0, 0.5, 50, 3).unwrap();
        assert_eq!(stats.invariant_failures, 0);
        assert!(stats.max_domination_gap <= 0.0);
        assert!(stats.excess_chunk_mass.mean <= stats.half_l1.mean + 1e-12);
    }

    #[test]
    fn alive_stats_at_time_zero() {
        let g = Graph::complete_bipartite(1, 63).unwrap();
        let s = chunk_alive_stats(&g, 0, 0.0, 4, 0, 1.0).unwrap();
        assert_eq!(s.alive.mean, 1.0);
        assert_eq!(s.alive_in_window.mean, 0.0);
    }
}
