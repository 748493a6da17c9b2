//! Random-walk duality: the walk kernel gives the mean of the averaging
//! process, and a coupled pair of walks gives its second moments.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{param, Error, Result};
use crate::graph::{Family, Graph};
use crate::linalg::Generator;
use crate::mc::{mc_mean, Estimate};
use crate::sim::{lp_distance, Lp, MassConfig};

/// Largest graph for the walk kernel by uniformization.
pub const GENERIC_RW_MAX: usize = 4096;
/// Largest graph for pair-chain computations (`n^2` states).
pub const CRW_MAX: usize = 64;
/// Absolute tolerance of the noise-term quadrature.
pub const NOISE_TOL: f64 = 1e-8;
const SIMPSON_DEPTH: u32 = 20;

/// Law of the rate-1/2 random walk at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RwKernel {
    pub probs: Vec<f64>,
    pub t: f64,
}

/// Joint law of the coupled pair at time `t`; `probs[x * n + y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairKernel {
    pub n: usize,
    pub probs: Vec<f64>,
    pub t: f64,
}

impl PairKernel {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.n + y]
    }

    pub fn meeting(&self) -> f64 {
        (0..self.n).map(|x| self.get(x, x)).sum()
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return param(format!("time must be finite and >= 0, got {t}"));
    }
    Ok(())
}

/// Generator of the rate-1/2 simple random walk, for `n <= GENERIC_RW_MAX`.
pub fn rw_generator(g: &Graph) -> Result<Generator> {
    if g.n() > GENERIC_RW_MAX {
        return Err(Error::Capability(format!(
            "walk generator limited to n <= {GENERIC_RW_MAX}, got n={}",
            g.n()
        )));
    }
    let mut gen = Generator::new(g.n());
    for (x, y) in g.edges() {
        gen.add_rate(x, y, 0.5);
        gen.add_rate(y, x, 0.5);
    }
    Ok(gen)
}

/// `xi e^{tL}` by uniformization of the full generator.
pub fn rw_kernel_generic(g: &Graph, xi: &MassConfig, t: f64) -> Result<RwKernel> {
    xi.check_on(g)?;
    check_time(t)?;
    let gen = rw_generator(g)?;
    Ok(RwKernel { probs: gen.evolve_forward(xi.as_slice(), t), t })
}

/// `xi e^{tL}` through the closed form of each family.
pub fn rw_kernel(g: &Graph, xi: &MassConfig, t: f64) -> Result<RwKernel> {
    xi.check_on(g)?;
    check_time(t)?;
    let mut p = xi.as_slice().to_vec();
    let decay = |rate: f64| (-rate * t).exp();
    match g.family() {
        Family::Hypercube { d } => {
            // each coordinate is an independent two-state chain flipping at rate 1/2
            let stay = 0.5 * (1.0 + decay(1.0));
            let flip = 0.5 * (-(-t).exp_m1());
            for i in 0..d {
                let bit = 1usize << i;
                for x in 0..g.n() {
                    if x & bit == 0 {
                        let (a, b) = (p[x], p[x | bit]);
                        p[x] = stay * a + flip * b;
                        p[x | bit] = flip * a + stay * b;
                    }
                }
            }
        }
        Family::CompleteBipartite { m, k } => {
            let n = (m + k) as f64;
            let s1: f64 = p[..m].iter().sum();
            let s2: f64 = p[m..].iter().sum();
            // side masses relax at rate n/2; zero-sum modes within a side at
            // rate k/2 (on C1) and m/2 (on C2)
            let s1_t = m as f64 / n + (s1 - m as f64 / n) * decay(n / 2.0);
            let s2_t = 1.0 - s1_t;
            let (d1, d2) = (decay(k as f64 / 2.0), decay(m as f64 / 2.0));
            for v in &mut p[..m] {
                *v = s1_t / m as f64 + (*v - s1 / m as f64) * d1;
            }
            for v in &mut p[m..] {
                *v = s2_t / k as f64 + (*v - s2 / k as f64) * d2;
            }
        }
        Family::Complete { n } => {
            let e = decay(n as f64 / 2.0);
            let u = 1.0 / n as f64;
            for v in &mut p {
                *v = u + (*v - u) * e;
            }
        }
    }
    Ok(RwKernel { probs: p, t })
}

/// `||pi_t^xi / pi - 1||_2^2` of the walk.
pub fn rw_l2_distance(g: &Graph, xi: &MassConfig, t: f64) -> Result<f64> {
    Ok(lp_distance(&rw_kernel(g, xi, t)?.probs, Lp::L2).power)
}

/// Walk L2 distance on the `d`-cube from a vertex: `(1 + e^{-2t})^d - 1`.
pub fn hypercube_rw_l2_dirac(d: u32, t: f64) -> f64 {
    (d as f64 * (-2.0 * t).exp().ln_1p()).exp_m1()
}

fn check_pair_size(g: &Graph) -> Result<()> {
    if g.n() > CRW_MAX {
        return Err(Error::Capability(format!("pair chain limited to n <= {CRW_MAX}, got n={}", g.n())));
    }
    Ok(())
}

/// Generator of the coupled pair on ordered states `x * n + y`: a ringing
/// edge re-places each particle sitting on it at either endpoint with
/// probability 1/2, independently.
pub fn crw_generator(g: &Graph) -> Result<Generator> {
    check_pair_size(g)?;
    let n = g.n();
    let mut gen = Generator::new(n * n);
    for (a, b) in g.edges() {
        let on = |z: usize| z == a || z == b;
        for x in 0..n {
            for y in 0..n {
                let s = x * n + y;
                match (on(x), on(y)) {
                    (true, true) => {
                        for nx in [a, b] {
                            for ny in [a, b] {
                                gen.add_rate(s, nx * n + ny, 0.25);
                            }
                        }
                    }
                    (true, false) => {
                        for nx in [a, b] {
                            gen.add_rate(s, nx * n + y, 0.5);
                        }
                    }
                    (false, true) => {
                        for ny in [a, b] {
                            gen.add_rate(s, x * n + ny, 0.5);
                        }
                    }
                    (false, false) => {}
                }
            }
        }
    }
    Ok(gen)
}

/// Exact pair-chain computations on one graph, reusing its generator.
#[derive(Debug, Clone)]
pub struct CrwOracle<'g> {
    g: &'g Graph,
    gen: Generator,
}

impl<'g> CrwOracle<'g> {
    pub fn new(g: &'g Graph) -> Result<Self> {
        Ok(CrwOracle { g, gen: crw_generator(g)? })
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    /// Law of the pair started from `xi (x) xi`.
    pub fn pair_kernel(&self, xi: &MassConfig, t: f64) -> Result<PairKernel> {
        xi.check_on(self.g)?;
        check_time(t)?;
        let n = self.g.n();
        let p = xi.as_slice();
        let start: Vec<f64> = (0..n * n).map(|s| p[s / n] * p[s % n]).collect();
        Ok(PairKernel { n, probs: self.gen.evolve_forward(&start, t), t })
    }

    /// `P_{x,y}(X_t = Y_t)` for every starting pair, as an `n x n` table.
    pub fn meeting_table(&self, t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        let n = self.g.n();
        let diag: Vec<f64> = (0..n * n).map(|s| if s / n == s % n { 1.0 } else { 0.0 }).collect();
        Ok(self.gen.evolve_backward(&diag, t))
    }

    fn phi_from_table(&self, table: &[f64], x: usize, y: usize) -> f64 {
        let n = self.g.n();
        0.5 * (table[x * n + x] + table[y * n + y] - 2.0 * table[x * n + y])
    }

    pub fn phi(&self, x: usize, y: usize, t: f64) -> Result<f64> {
        self.g.check_vertex(x)?;
        self.g.check_vertex(y)?;
        let value = self.phi_from_table(&self.meeting_table(t)?, x, y);
        if !(-1e-10..=1.0 + 1e-10).contains(&value) {
            return Err(Error::Numerical(format!("Phi({x},{y}) at t={t} is {value}, outside [0,1]")));
        }
        Ok(value)
    }

    /// `(n/2) int_0^t sum_{xy} (pi_s(x) - pi_s(y))^2 Phi_{t-s}(x,y) ds`.
    pub fn noise_term(&self, xi: &MassConfig, t: f64) -> Result<f64> {
        xi.check_on(self.g)?;
        check_time(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let half_n = self.g.n() as f64 / 2.0;
        let integrand = |s: f64| -> Result<f64> {
            let pi = rw_kernel(self.g, xi, s)?.probs;
            let table = self.meeting_table(t - s)?;
            Ok(self
                .g
                .edges()
                .map(|(x, y)| {
                    let diff = pi[x] - pi[y];
                    diff * diff * self.phi_from_table(&table, x, y)
                })
                .sum())
        };
        Ok(half_n * adaptive_simpson(integrand, 0.0, t, NOISE_TOL / half_n)?)
    }
}

pub fn pair_kernel(g: &Graph, xi: &MassConfig, t: f64) -> Result<PairKernel> {
    CrwOracle::new(g)?.pair_kernel(xi, t)
}

/// Exact `P_{xi (x) xi}(X_t = Y_t)`.
pub fn meeting_probability(g: &Graph, xi: &MassConfig, t: f64) -> Result<f64> {
    Ok(pair_kernel(g, xi, t)?.meeting())
}

/// Monte Carlo meeting probability, usable on any graph size. Only rings of
/// edges touching a particle are generated.
pub fn meeting_probability_mc(g: &Graph, xi: &MassConfig, t: f64, replicas: usize, seed: u64) -> Result<Estimate> {
    xi.check_on(g)?;
    check_time(t)?;
    let cumulative: Vec<f64> = xi
        .as_slice()
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let draw_start = |rng: &mut crate::mc::Stream| {
        let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
        cumulative.partition_point(|&c| c <= u).min(g.n() - 1)
    };
    mc_mean(seed, replicas, |rng| {
        let mut x = draw_start(rng);
        let mut y = draw_start(rng);
        let mut now = 0.0;
        loop {
            let (dx, dy) = (g.degree(x), g.degree(y));
            now += Exp::new((dx + dy) as f64).expect("positive degree").sample(rng);
            if now > t {
                break;
            }
            let pick = rng.random_range(0..dx + dy);
            let (a, b) = if pick < dx { (x, g.neighbor(x, pick)) } else { (y, g.neighbor(y, pick - dx)) };
            let on = |z: usize| z == a || z == b;
            // edges touching both particles were proposed twice
            if on(x) && on(y) && rng.random::<bool>() {
                continue;
            }
            if on(x) {
                x = if rng.random::<bool>() { a } else { b };
            }
            if on(y) {
                y = if rng.random::<bool>() { a } else { b };
            }
        }
        if x == y {
            1.0
        } else {
            0.0
        }
    })
}

pub fn phi(g: &Graph, x: usize, y: usize, t: f64) -> Result<f64> {
    CrwOracle::new(g)?.phi(x, y, t)
}

pub fn noise_term(g: &Graph, xi: &MassConfig, t: f64) -> Result<f64> {
    CrwOracle::new(g)?.noise_term(xi, t)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    fn recurse<F: Fn(f64) -> Result<f64>>(
        f: &F,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(recurse(f, (a, fa), (lm, flm), (m, fm), left, tol / 2.0, depth - 1)?
            + recurse(f, (m, fm), (rm, frm), (b, fb), right, tol / 2.0, depth - 1)?)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&f, (a, fa), (m, fm), (b, fb), whole, tol, SIMPSON_DEPTH)
}
