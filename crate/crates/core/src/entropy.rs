//! Relative entropy of mass configurations and the entropy constant `kappa`.
//!
//! Everything is in nats; base-2 logarithms appear only where a formula is
//! stated in bits, and are converted there.

use std::f64::consts::LN_2;

use crate::error::{param, Error, Result};
use crate::graph::{Family, Graph};
use crate::mc::{mc_means, Estimate, Stream};
use crate::sim::{lp_distance, simulate, Lp, MassConfig};

/// Entries below this are treated as zero inside logarithms by the optimizer.
pub const ETA_FLOOR: f64 = 1e-12;

fn xlogy(x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `D(eta || uniform) = sum eta(x) ln(n eta(x))`, with `0 ln 0 = 0`.
pub fn relative_entropy(eta: &[f64]) -> f64 {
    let n = eta.len() as f64;
    let d: f64 = eta.iter().map(|&v| xlogy(v, n * v)).sum();
    d.max(0.0)
}

/// `ent_xy(eta) = (n/2) [eta(x) ln(eta(x)/a) + eta(y) ln(eta(y)/a)]`, `a` the
/// pair average. Averaging `x` and `y` lowers `D` by exactly `(2/n) ent_xy`.
pub fn local_entropy(eta: &[f64], x: usize, y: usize) -> Result<f64> {
    if x == y {
        return param("local entropy needs two distinct vertices");
    }
    let n = eta.len();
    if x >= n || y >= n {
        return param(format!("vertex out of range for n={n}"));
    }
    let (a, b) = (eta[x], eta[y]);
    let mid = 0.5 * (a + b);
    if mid <= 0.0 {
        return Ok(0.0);
    }
    Ok((0.5 * n as f64 * (xlogy(a, a / mid) + xlogy(b, b / mid))).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport {
    pub relative_entropy: f64,
    /// `(2/n) sum_{xy in E} ent_xy`, the rate at which `D` falls in mean.
    pub production: f64,
    /// `production / relative_entropy`; `None` at the uniform configuration.
    pub ratio: Option<f64>,
}

pub fn entropy_report(g: &Graph, eta: &[f64]) -> Result<EntropyReport> {
    if eta.len() != g.n() {
        return param(format!("configuration has {} entries, graph has {}", eta.len(), g.n()));
    }
    let d = relative_entropy(eta);
    let production = production(g, eta);
    let ratio = (d > 1e-12).then(|| production / d);
    Ok(EntropyReport { relative_entropy: d, production, ratio })
}

fn production(g: &Graph, eta: &[f64]) -> f64 {
    let sum: f64 = g.edges().map(|(x, y)| local_entropy(eta, x, y).expect("edge endpoints are distinct")).sum();
    2.0 * sum / g.n() as f64
}

/// Exact entropy constant where it is known.
pub fn kappa_known(g: &Graph) -> Result<f64> {
    match g.family() {
        Family::Hypercube { .. } => Ok(1.0),
        Family::Complete { n } => Ok((n - 1) as f64 / (n as f64).log2()),
        // K_{1,1} is a single edge
        Family::CompleteBipartite { m: 1, k: 1 } => Ok(1.0),
        Family::CompleteBipartite { .. } => {
            Err(Error::Capability("entropy constant of K_{m,k} is not known in closed form".into()))
        }
    }
}

/// `<deg> / log2 n`.
pub fn kappa_upper(g: &Graph) -> f64 {
    g.mean_degree() / (g.n() as f64).log2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaEstimate {
    pub kappa: f64,
    /// Configuration at which the smallest ratio was found.
    pub eta: Vec<f64>,
}

/// Grid subdivisions used when the caller does not choose.
pub fn default_grid(n: usize) -> usize {
    if n <= 4 {
        50
    } else {
        15
    }
}

fn ratio_objective(g: &Graph, eta: &[f64]) -> Option<f64> {
    let floored: Vec<f64> = eta.iter().map(|&v| if v < ETA_FLOOR { 0.0 } else { v }).collect();
    let d = relative_entropy(&floored);
    (d > 1e-10).then(|| production(g, &floored) / d)
}

fn for_each_composition(total: usize, parts: usize, prefix: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if parts == 1 {
        prefix.push(total);
        f(prefix);
        prefix.pop();
        return;
    }
    for first in 0..=total {
        prefix.push(first);
        for_each_composition(total - first, parts - 1, prefix, f);
        prefix.pop();
    }
}

/// Numerical infimum of `production / D` over the simplex: a barycentric grid
/// with `grid` subdivisions, then pairwise mass transfers with step halving
/// down to `1e-8` from the best grid point.
pub fn kappa_estimate(g: &Graph, grid: Option<usize>) -> Result<KappaEstimate> {
    let n = g.n();
    if n > 6 {
        return Err(Error::Capability(format!("simplex search limited to n <= 6, got {n}")));
    }
    let grid = grid.unwrap_or_else(|| default_grid(n));
    if grid == 0 {
        return param("grid needs at least one subdivision");
    }
    let mut best = (f64::INFINITY, vec![0.0; n]);
    for_each_composition(grid, n, &mut Vec::with_capacity(n), &mut |c| {
        let eta: Vec<f64> = c.iter().map(|&k| k as f64 / grid as f64).collect();
        if let Some(r) = ratio_objective(g, &eta) {
            if r < best.0 {
                best = (r, eta);
            }
        }
    });
    let (mut value, mut eta) = best;
    let mut step = 1.0 / grid as f64;
    while step >= 1e-8 {
        let mut improved = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || eta[i] <= 0.0 {
                    continue;
                }
                let delta = step.min(eta[i]);
                let mut trial = eta.clone();
                trial[i] -= delta;
                trial[j] += delta;
                if let Some(r) = ratio_objective(g, &trial) {
                    if r < value {
                        value = r;
                        eta = trial;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    if !value.is_finite() {
        return Err(Error::Numerical("no configuration with positive entropy on the grid".into()));
    }
    Ok(KappaEstimate { kappa: value, eta })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheck {
    pub mean: Estimate,
    pub bound: f64,
}

impl DecayCheck {
    pub fn holds(&self, sigmas: f64) -> bool {
        self.mean.mean <= self.bound + sigmas * self.mean.stderr + 1e-12
    }
}

/// Monte Carlo `E D(eta_t || pi)` against `e^{-kappa t} D(xi || pi)`, and
/// `E ||eta_t/pi - 1||_1` against `e^{-kappa t/2} sqrt(2 D(xi || pi))`, from
/// the same replicas.
pub fn entropy_decay_check(
    g: &Graph,
    xi: &MassConfig,
    t: f64,
    replicas: usize,
    seed: u64,
    kappa: f64,
) -> Result<(DecayCheck, DecayCheck)> {
    xi.check_on(g)?;
    if !(t >= 0.0) || !t.is_finite() {
        return param(format!("time must be finite and >= 0, got {t}"));
    }
    if !(kappa > 0.0) {
        return param(format!("kappa must be positive, got {kappa}"));
    }
    let est = mc_means(seed, replicas, |rng: &mut Stream| {
        let eta = simulate(g, xi, t, rng).expect("inputs validated");
        vec![relative_entropy(eta.as_slice()), lp_distance(eta.as_slice(), Lp::L1).power]
    })?;
    let d0 = relative_entropy(xi.as_slice());
    Ok((
        DecayCheck { mean: est[0], bound: (-kappa * t).exp() * d0 },
        DecayCheck { mean: est[1], bound: (-kappa * t / 2.0).exp() * (2.0 * d0).sqrt() },
    ))
}

/// `T_eps = (1 - eps) log2 n / <deg>`.
pub fn entropic_lb_time(g: &Graph, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return param(format!("eps must lie in (0,1), got {eps}"));
    }
    Ok((1.0 - eps) * (g.n() as f64).log2() / g.mean_degree())
}

/// `ln n - <deg> t ln 2`, a lower bound on `E D(eta_t)` from a Dirac start.
pub fn entropy_lower_bound(g: &Graph, t: f64) -> f64 {
    (g.n() as f64).ln() - g.mean_degree() * t * LN_2
}

/// `||eta/pi - 1||_1 >= D/ln n - 1/(e ln n)`.
pub fn fannes_audenaert_lb(d_value: f64, n: usize) -> Result<f64> {
    if !(d_value >= 0.0) {
        return param(format!("relative entropy must be >= 0, got {d_value}"));
    }
    if n < 2 {
        return param("need n >= 2");
    }
    let ln_n = (n as f64).ln();
    Ok(d_value / ln_n - 1.0 / (std::f64::consts::E * ln_n))
}

/// `sqrt(2 D)`, an upper bound on `||eta/pi - 1||_1`.
pub fn pinsker_bound(d_value: f64) -> f64 {
    (2.0 * d_value.max(0.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::replica_stream;
    use rand::Rng;

    fn random_eta(n: usize, rng: &mut Stream) -> Vec<f64> {
        // occasional zeros exercise the 0 ln 0 convention
        let raw: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.1 { 0.0 } else { -rng.random::<f64>().ln() }).collect();
        let s: f64 = raw.iter().sum();
        if s == 0.0 {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            return e;
        }
        raw.iter().map(|x| x / s).collect()
    }

    #[test]
    fn relative_entropy_values() {
        assert_eq!(relative_entropy(&[0.25; 4]), 0.0);
        let mut dirac = vec![0.0; 8];
        dirac[3] = 1.0;
        assert!((relative_entropy(&dirac) - 8f64.ln()).abs() < 1e-15);
        let expected = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert!((relative_entropy(&[0.75, 0.25]) - expected).abs() < 1e-15);
    }

    #[test]
    fn local_entropy_values() {
        assert_eq!(local_entropy(&[0.3, 0.3, 0.4], 0, 1).unwrap(), 0.0);
        let e = local_entropy(&[1.0, 0.0], 0, 1).unwrap();
        assert!((e - LN_2).abs() < 1e-15);
        assert!((e - relative_entropy(&[1.0, 0.0])).abs() < 1e-15);
        assert!(local_entropy(&[1.0, 0.0], 1, 1).is_err());
    }

    #[test]
    fn entropy_drop_identity() {
        let mut rng = replica_stream(11, 0);
        for _ in 0..200 {
            let eta = random_eta(5, &mut rng);
            let (x, y) = (rng.random_range(0..5), rng.random_range(0..5));
            if x == y {
                continue;
            }
            let mut after = eta.clone();
            let mid = 0.5 * (eta[x] + eta[y]);
            after[x] = mid;
            after[y] = mid;
            let drop = relative_entropy(&eta) - relative_entropy(&after);
            assert!((drop - 0.4 * local_entropy(&eta, x, y).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn report_on_uniform_and_dirac() {
        let g = Graph::complete(4).unwrap();
        let r = entropy_report(&g, &[0.25; 4]).unwrap();
        assert_eq!((r.relative_entropy, r.production, r.ratio), (0.0, 0.0, None));
        let r = entropy_report(&g, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((r.ratio.unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn known_constants() {
        assert_eq!(kappa_known(&Graph::hypercube(9).unwrap()).unwrap(), 1.0);
        assert!((kappa_known(&Graph::complete(4).unwrap()).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(kappa_known(&Graph::complete_bipartite(1, 1).unwrap()).unwrap(), 1.0);
        assert!(matches!(kappa_known(&Graph::complete_bipartite(2, 3).unwrap()), Err(Error::Capability(_))));
        for d in 1..12 {
            assert!((kappa_upper(&Graph::hypercube(d).unwrap()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_estimates() {
        let k2 = kappa_estimate(&Graph::complete(2).unwrap(), None).unwrap();
        assert!((k2.kappa - 1.0).abs() < 1e-6);
        let g3 = Graph::complete(3).unwrap();
        let k3 = kappa_estimate(&g3, None).unwrap();
        let exact = 2.0 / 3f64.log2();
        assert!((k3.kappa - exact).abs() < 2e-2, "{k3:?}");
        assert!(k3.kappa >= exact - 1e-9);
        for g in [g3, Graph::complete_bipartite(1, 3).unwrap(), Graph::hypercube(2).unwrap()] {
            assert!(kappa_estimate(&g, Some(20)).unwrap().kappa <= kappa_upper(&g) + 1e-6);
        }
        assert!(kappa_estimate(&Graph::hypercube(3).unwrap(), None).is_err());
    }

    #[test]
    fn pinsker_and_fannes_audenaert() {
        let mut rng = replica_stream(12, 0);
        for n in [3usize, 10, 100] {
            for _ in 0..10_000 {
                let eta = random_eta(n, &mut rng);
                let d = relative_entropy(&eta);
                let l1 = lp_distance(&eta, Lp::L1).power;
                assert!(l1 <= pinsker_bound(d) + 1e-12);
                assert!(l1 >= fannes_audenaert_lb(d, n).unwrap() - 1e-12);
            }
        }
        let lb = fannes_audenaert_lb(8f64.ln(), 8).unwrap();
        assert!((lb - (1.0 - 1.0 / (std::f64::consts::E * 8f64.ln()))).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_times() {
        let g = Graph::complete(16).unwrap();
        assert!((entropic_lb_time(&g, 0.25).unwrap() - 0.75 * 4.0 / 15.0).abs() < 1e-15);
        assert!((entropic_lb_time(&Graph::hypercube(7).unwrap(), 0.25).unwrap() - 0.75).abs() < 1e-15);
        assert!(entropic_lb_time(&g, 1.0).is_err());
    }

    #[test]
    fn decay_at_time_zero_is_equality() {
        let g = Graph::hypercube(3).unwrap();
        let xi = MassConfig::dirac(8, 0).unwrap();
        let (ent, l1) = entropy_decay_check(&g, &xi, 0.0, 4, 1, 1.0).unwrap();
        assert!((ent.mean.mean - ent.bound).abs() < 1e-12);
        assert!(l1.mean.mean <= l1.bound);
    }

    #[test]
    fn decay_on_small_hypercube() {
        let g = Graph::hypercube(6).unwrap();
        let xi = MassConfig::dirac(64, 0).unwrap();
        let (ent, l1) = entropy_decay_check(&g, &xi, 1.0, 2000, 5, 1.0).unwrap();
        assert!(ent.holds(3.0) && l1.holds(3.0), "{ent:?} {l1:?}");
    }
}
