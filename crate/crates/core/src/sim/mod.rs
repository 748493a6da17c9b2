//! Event-driven simulation of the averaging process.
//!
//! All edges ring at rate 1, so the superposition is a single Poisson stream
//! of rate `|E|` whose marks are uniform edge indices.

mod chunk;

pub use chunk::{
    chunk_alive_stats, chunk_simulate, coupled_chunk_stats, h_exponent, t_mix, t_mix_lambda, ChunkAliveStats,
    ChunkState, CoupledChunkStats, CEMETERY,
};

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{param, Error, Result};
use crate::graph::Graph;
use crate::mc::{mc_mean, Estimate, Stream};

/// Tolerance on the total mass of a configuration.
pub const MASS_TOL: f64 = 1e-9;

/// A probability mass function on the vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct MassConfig {
    mass: Vec<f64>,
}

impl MassConfig {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return param("mass configuration must be nonempty");
        }
        if let Some(x) = mass.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return param(format!("mass at vertex {x} is {} (must be finite and >= 0)", mass[x]));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return param(format!("total mass {total} differs from 1 by more than {MASS_TOL}"));
        }
        Ok(MassConfig { mass })
    }

    pub fn dirac(n: usize, x: usize) -> Result<Self> {
        if x >= n {
            return param(format!("Dirac vertex {x} out of range for n={n}"));
        }
        let mut mass = vec![0.0; n];
        mass[x] = 1.0;
        Ok(MassConfig { mass })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return param("uniform configuration needs n >= 1");
        }
        Ok(MassConfig { mass: vec![1.0 / n as f64; n] })
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mass
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn check_on(&self, g: &Graph) -> Result<()> {
        if self.n() != g.n() {
            return param(format!("configuration has {} entries, graph has {} vertices", self.n(), g.n()));
        }
        Ok(())
    }

    /// Returns the configuration after averaging across `x` and `y`.
    pub fn pair_update(&self, x: usize, y: usize) -> Result<Self> {
        let n = self.n();
        if x >= n || y >= n {
            return param(format!("update ({x},{y}) out of range for n={n}"));
        }
        if x == y {
            return param(format!("update needs two distinct vertices, got ({x},{x})"));
        }
        let mut next = self.clone();
        next.average(x, y);
        Ok(next)
    }

    /// In-place update; `x != y` is the caller's responsibility.
    #[inline]
    pub fn average(&mut self, x: usize, y: usize) {
        let avg = 0.5 * (self.mass[x] + self.mass[y]);
        self.mass[x] = avg;
        self.mass[y] = avg;
    }
}

/// Drives the global Poisson clock of `g` on `[0, t]`, calling `on_ring`
/// with the endpoints of every edge that rings, in time order.
pub fn for_each_ring<R, F>(g: &Graph, t: f64, rng: &mut R, mut on_ring: F)
where
    R: Rng + ?Sized,
    F: FnMut(usize, usize),
{
    if t <= 0.0 || g.edge_count() == 0 {
        return;
    }
    let gaps = Exp::new(g.edge_count() as f64).expect("positive edge count");
    let mut now = gaps.sample(rng);
    while now <= t {
        let (x, y) = g.edge(rng.random_range(0..g.edge_count()));
        on_ring(x, y);
        now += gaps.sample(rng);
    }
}

/// One draw of `eta_t` started from `xi`.
pub fn simulate<R: Rng + ?Sized>(g: &Graph, xi: &MassConfig, t: f64, rng: &mut R) -> Result<MassConfig> {
    xi.check_on(g)?;
    if !(t >= 0.0) || !t.is_finite() {
        return param(format!("time must be finite and >= 0, got {t}"));
    }
    let mut eta = xi.clone();
    for_each_ring(g, t, rng, |x, y| eta.average(x, y));
    Ok(eta)
}

/// Exponent of the L^p distance; only `p = 1` and `p = 2` are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lp {
    L1,
    L2,
}

impl Lp {
    pub fn from_p(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Lp::L1),
            2 => Ok(Lp::L2),
            _ => Err(Error::Parameter(format!("p must be 1 or 2, got {p}"))),
        }
    }

    pub fn p(self) -> u32 {
        match self {
            Lp::L1 => 1,
            Lp::L2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpDistance {
    /// `(1/n) sum |n eta(x) - 1|^p`.
    pub power: f64,
    /// Its `p`-th root.
    pub norm: f64,
}

pub fn lp_distance(eta: &[f64], p: Lp) -> LpDistance {
    let n = eta.len() as f64;
    let terms = eta.iter().map(|&v| {
        let dev = (n * v - 1.0).abs();
        match p {
            Lp::L1 => dev,
            Lp::L2 => dev * dev,
        }
    });
    let power = crate::linalg::compensated_sum(terms) / n;
    let norm = match p {
        Lp::L1 => power,
        Lp::L2 => power.sqrt(),
    };
    LpDistance { power, norm }
}

/// Monte Carlo estimate of `E ||eta_t/pi - 1||_p^p` over `replicas` runs.
pub fn mean_lp(g: &Graph, xi: &MassConfig, t: f64, p: Lp, replicas: usize, seed: u64) -> Result<Estimate> {
    xi.check_on(g)?;
    if !(t >= 0.0) || !t.is_finite() {
        return param(format!("time must be finite and >= 0, got {t}"));
    }
    mc_mean(seed, replicas, |rng: &mut Stream| {
        let eta = simulate(g, xi, t, rng).expect("inputs validated");
        lp_distance(eta.as_slice(), p).power
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::replica_stream;

    #[test]
    fn pair_update_examples() {
        let eta = MassConfig::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(eta.pair_update(0, 1).unwrap().as_slice(), &[0.5, 0.5]);
        let half = MassConfig::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(half.pair_update(1, 0).unwrap(), half);
        let eta = MassConfig::new(vec![0.25, 0.75, 0.0]).unwrap();
        assert_eq!(eta.pair_update(1, 2).unwrap().as_slice(), &[0.25, 0.375, 0.375]);
        assert!(eta.pair_update(1, 1).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(MassConfig::new(vec![0.5, 0.4]).is_err());
        assert!(MassConfig::new(vec![1.5, -0.5]).is_err());
        assert!(MassConfig::new(vec![f64::NAN, 1.0]).is_err());
        assert!(MassConfig::new(vec![0.5, 0.5 + 1e-10]).is_ok());
    }

    #[test]
    fn distances_of_dirac() {
        let dirac = MassConfig::dirac(4, 2).unwrap();
        assert!((lp_distance(dirac.as_slice(), Lp::L1).norm - 1.5).abs() < 1e-15);
        assert!((lp_distance(dirac.as_slice(), Lp::L2).power - 3.0).abs() < 1e-15);
        let uniform = MassConfig::uniform(4).unwrap();
        assert_eq!(lp_distance(uniform.as_slice(), Lp::L2).power, 0.0);
    }

    #[test]
    fn time_zero_is_identity() {
        let g = Graph::hypercube(3).unwrap();
        let xi = MassConfig::dirac(8, 5).unwrap();
        let mut rng = replica_stream(1, 0);
        assert_eq!(simulate(&g, &xi, 0.0, &mut rng).unwrap(), xi);
        let e = mean_lp(&Graph::complete(4).unwrap(), &MassConfig::dirac(4, 0).unwrap(), 0.0, Lp::L2, 10, 0).unwrap();
        assert_eq!((e.mean, e.stderr), (3.0, 0.0));
    }

    #[test]
    fn mass_is_conserved() {
        let g = Graph::complete_bipartite(3, 7).unwrap();
        let xi = MassConfig::dirac(10, 0).unwrap();
        let mut rng = replica_stream(5, 0);
        let eta = simulate(&g, &xi, 3.0, &mut rng).unwrap();
        assert!((eta.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_edge_renewal() {
        // distance is 1 before the first ring and 0 after
        let g = Graph::complete_bipartite(1, 1).unwrap();
        let xi = MassConfig::dirac(2, 0).unwrap();
        let e = mean_lp(&g, &xi, 1.0, Lp::L2, 20_000, 11).unwrap();
        assert!(e.agrees_with((-1.0f64).exp(), 3.0), "{e:?}");
    }
}
