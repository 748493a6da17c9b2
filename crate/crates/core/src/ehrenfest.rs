//! Ehrenfest urn and its perturbation, the birth-death chains behind the
//! exact L2 distance of the averaging process on the hypercube.
//!
//! The Hamming distance of two independent rate-1/2 walks on `{0,1}^d` is the
//! P-chain (`p_k = d - k`, `q_k = k`); for the coupled pair it is the S-chain,
//! which differs only through `p_0 = d/2` and `q_1 = 1/2`. Both are reversible
//! for the Binomial(d, 1/2) law `nu`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{param, Error, Result};
use crate::linalg::{
    log_sum_exp, tridiagonal_eigen, tridiagonal_eigenvalues, tridiagonal_log_first_weights, Generator, SymEigen,
};

pub const MAX_DIM: u32 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainKind {
    P,
    S,
}

#[derive(Debug)]
pub struct BirthDeathChain {
    d: u32,
    kind: ChainKind,
    birth: Vec<f64>,
    death: Vec<f64>,
    log_nu: Vec<f64>,
    spectrum: OnceLock<SymEigen>,
    values: OnceLock<(Vec<f64>, Vec<f64>)>,
    killed: RwLock<HashMap<usize, Arc<Vec<f64>>>>,
}

/// `ln(C(d,k) 2^-d)` for `k = 0..=d`, by cumulative sums of `ln((d-j+1)/j)`.
pub fn log_binomial_half(d: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(d as usize + 1);
    let mut acc = -(d as f64) * std::f64::consts::LN_2;
    out.push(acc);
    for j in 1..=d {
        acc += ((d - j + 1) as f64 / j as f64).ln();
        out.push(acc);
    }
    out
}

impl BirthDeathChain {
    fn build(d: u32, kind: ChainKind) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            return param(format!("d={d} outside 1..={MAX_DIM}"));
        }
        let df = d as f64;
        let mut birth: Vec<f64> = (0..=d).map(|k| df - k as f64).collect();
        let mut death: Vec<f64> = (0..=d).map(|k| k as f64).collect();
        if kind == ChainKind::S {
            birth[0] = df / 2.0;
            death[1] = 0.5;
        }
        Ok(BirthDeathChain {
            d,
            kind,
            birth,
            death,
            log_nu: log_binomial_half(d),
            spectrum: OnceLock::new(),
            values: OnceLock::new(),
            killed: RwLock::new(HashMap::new()),
        })
    }

    /// The Ehrenfest urn.
    pub fn build_p(d: u32) -> Result<Self> {
        Self::build(d, ChainKind::P)
    }

    /// The perturbed urn seen by the coupled pair.
    pub fn build_s(d: u32) -> Result<Self> {
        Self::build(d, ChainKind::S)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn birth(&self) -> &[f64] {
        &self.birth
    }

    pub fn death(&self) -> &[f64] {
        &self.death
    }

    pub fn log_nu(&self) -> &[f64] {
        &self.log_nu
    }

    pub fn nu(&self) -> Vec<f64> {
        self.log_nu.iter().map(|l| l.exp()).collect()
    }

    /// Exact check of `C(d,k) p_k = C(d,k+1) q_{k+1}` in integers (rates are
    /// half-integers); `None` when `d > 60`.
    pub fn detailed_balance_exact(&self) -> Option<bool> {
        if self.d > 60 {
            return None;
        }
        let d = self.d as u128;
        let mut binom = vec![1u128; self.d as usize + 1];
        for k in 1..=self.d as usize {
            binom[k] = binom[k - 1] * (d - k as u128 + 1) / k as u128;
        }
        let twice = |v: f64| (2.0 * v) as u128;
        Some((0..self.d as usize).all(|k| binom[k] * twice(self.birth[k]) == binom[k + 1] * twice(self.death[k + 1])))
    }

    /// Largest relative violation of `nu(k) p_k = nu(k+1) q_{k+1}`.
    pub fn detailed_balance_violation(&self) -> f64 {
        (0..self.d as usize)
            .map(|k| {
                let lhs = self.log_nu[k] + self.birth[k].ln();
                let rhs = self.log_nu[k + 1] + self.death[k + 1].ln();
                (lhs - rhs).exp_m1().abs()
            })
            .fold(0.0, f64::max)
    }

    /// Diagonal and off-diagonal of `-U L U^{-1}`, `U = diag(sqrt(nu))`. The
    /// off-diagonal entries `-sqrt(p_k q_{k+1})` need no `nu` at all.
    pub fn symmetrized(&self) -> (Vec<f64>, Vec<f64>) {
        let diag = (0..=self.d as usize).map(|k| self.birth[k] + self.death[k]).collect();
        let off = (0..self.d as usize).map(|k| -(self.birth[k] * self.death[k + 1]).sqrt()).collect();
        (diag, off)
    }

    /// Full spectrum of `-L`, computed once.
    pub fn spectrum(&self) -> Result<&SymEigen> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let (diag, off) = self.symmetrized();
        let eig = tridiagonal_eigen(&diag, &off)?;
        Ok(self.spectrum.get_or_init(|| eig))
    }

    /// Largest entry of `|(-L~) v - lambda v|` over all eigenpairs.
    pub fn spectral_residual(&self) -> Result<f64> {
        let (diag, off) = self.symmetrized();
        let eig = self.spectrum()?;
        let n = diag.len();
        let mut worst = 0.0f64;
        for (lam, v) in eig.values.iter().zip(&eig.vectors) {
            for k in 0..n {
                let mut av = diag[k] * v[k];
                if k > 0 {
                    av += off[k - 1] * v[k - 1];
                }
                if k + 1 < n {
                    av += off[k] * v[k + 1];
                }
                worst = worst.max((av - lam * v[k]).abs());
            }
        }
        Ok(worst)
    }

    /// Eigenvalues of `-L` with `ln(v_k(0)^2 / nu(0))`, the log spectral
    /// weights of state 0 relative to its stationary mass. Computed once.
    pub fn weights_at_zero(&self) -> Result<(&[f64], &[f64])> {
        if self.values.get().is_none() {
            let (diag, off) = self.symmetrized();
            let values = tridiagonal_eigenvalues(&diag, &off)?;
            let mut logw = tridiagonal_log_first_weights(&diag, &off, &values)?;
            logw.iter_mut().for_each(|w| *w -= self.log_nu[0]);
            let _ = self.values.set((values, logw));
        }
        let (v, w) = self.values.get().expect("initialized");
        Ok((v, w))
    }

    /// `ln(P_t(0,0)/nu(0) - 1)`: the stationary mode is dropped, so the
    /// remaining sum has only positive terms and no cancellation.
    pub fn log_return_excess(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return param(format!("time must be finite and >= 0, got {t}"));
        }
        let (values, logw) = self.weights_at_zero()?;
        if values[0].abs() > 1e-8 * values[values.len() - 1] {
            return Err(Error::Numerical(format!("lowest eigenvalue {} is not zero", values[0])));
        }
        let terms: Vec<f64> = values[1..].iter().zip(&logw[1..]).map(|(l, w)| w - l * t).collect();
        Ok(log_sum_exp(&terms))
    }

    /// Row `from` of `e^{tL}` from the spectral decomposition.
    pub fn kernel_row(&self, from: usize, t: f64) -> Result<Vec<f64>> {
        if from > self.d as usize {
            return param(format!("state {from} outside 0..={}", self.d));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return param(format!("time must be finite and >= 0, got {t}"));
        }
        let eig = self.spectrum()?;
        let n = self.d as usize + 1;
        let weights: Vec<f64> = eig.values.iter().zip(&eig.vectors).map(|(l, v)| (-l * t).exp() * v[from]).collect();
        Ok((0..n)
            .map(|j| {
                let sym: f64 = weights.iter().zip(&eig.vectors).map(|(w, v)| w * v[j]).sum();
                sym * (0.5 * (self.log_nu[j] - self.log_nu[from])).exp()
            })
            .collect())
    }

    pub fn generator(&self) -> Generator {
        let n = self.d as usize + 1;
        let mut g = Generator::new(n);
        for k in 0..n {
            if k + 1 < n {
                g.add_rate(k, k + 1, self.birth[k]);
            }
            if k > 0 {
                g.add_rate(k, k - 1, self.death[k]);
            }
        }
        g
    }

    /// `ln e^{tL}(0,0)` by uniformization with log-scale renormalization.
    /// Independent of the spectral path; loses relative accuracy once the
    /// chain is close to stationarity at large `d`.
    pub fn log_return_probability(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return param(format!("time must be finite and >= 0, got {t}"));
        }
        let mut e0 = vec![0.0; self.d as usize + 1];
        e0[0] = 1.0;
        let (v, scale) = self.generator().evolve_backward_log_scaled(&e0, t);
        if v[0] <= 0.0 {
            return Err(Error::Numerical(format!("return probability underflowed at t={t}")));
        }
        Ok(v[0].ln() + scale)
    }

    /// Eigenvalues of `-L` killed on leaving `{0, ..., M-1}`, ascending. Cached.
    pub fn killed_eigenvalues(&self, m: usize) -> Result<Arc<Vec<f64>>> {
        if m == 0 || m > self.d as usize {
            return param(format!("M={m} outside 1..={}", self.d));
        }
        if let Some(v) = self.killed.read().expect("cache lock").get(&m) {
            return Ok(Arc::clone(v));
        }
        let (diag, off) = self.symmetrized();
        let vals = Arc::new(tridiagonal_eigenvalues(&diag[..m], &off[..m - 1])?);
        if vals[0] <= 0.0 {
            return Err(Error::Numerical(format!("killed spectrum at M={m} not positive: {}", vals[0])));
        }
        self.killed.write().expect("cache lock").insert(m, Arc::clone(&vals));
        Ok(vals)
    }

    /// Rates of the independent exponentials whose sum is the hitting time
    /// of `M` from 0.
    pub fn hitting_time_law(&self, m: usize) -> Result<Vec<f64>> {
        Ok(self.killed_eigenvalues(m)?.as_ref().clone())
    }

    /// One hitting time drawn as a sum of exponentials.
    pub fn sample_hitting<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<f64> {
        let rates = self.killed_eigenvalues(m)?;
        Ok(rates.iter().map(|&r| Exp::new(r).expect("positive rate").sample(rng)).sum())
    }

    /// One hitting time of `M` from 0 by running the chain.
    pub fn simulate_hitting<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<f64> {
        if m == 0 || m > self.d as usize {
            return param(format!("M={m} outside 1..={}", self.d));
        }
        let (mut k, mut t) = (0usize, 0.0);
        while k < m {
            let (up, down) = (self.birth[k], self.death[k]);
            t += Exp::new(up + down).expect("positive rate").sample(rng);
            if rng.random::<f64>() * (up + down) < up {
                k += 1;
            } else {
                k -= 1;
            }
        }
        Ok(t)
    }
}

/// `2^d S_t(0,0) - 1` and `ln(2^d S_t(0,0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypercubeL2 {
    /// `E ||eta_t/pi - 1||_2^2`; `+inf` when it exceeds binary64.
    pub value: f64,
    /// `ln(1 + value)`, always finite.
    pub log1p_value: f64,
}

/// Exact `E ||eta_t/pi - 1||_2^2` of the averaging process on `{0,1}^d`
/// started from a vertex.
pub fn hypercube_avg_l2_exact(d: u32, t: f64) -> Result<HypercubeL2> {
    hypercube_avg_l2_with(&BirthDeathChain::build_s(d)?, t)
}

pub fn hypercube_avg_l2_with(s_chain: &BirthDeathChain, t: f64) -> Result<HypercubeL2> {
    if s_chain.kind() != ChainKind::S {
        return param("the hypercube identity needs the S-chain");
    }
    let log_value = s_chain.log_return_excess(t)?;
    let log1p_value = if log_value > 0.0 { log_value + (-log_value).exp().ln_1p() } else { log_value.exp().ln_1p() };
    Ok(HypercubeL2 { value: log_value.exp(), log1p_value })
}

/// Time at which the hypercube L2 distance falls to `level`, by bisection.
pub fn hypercube_crossing_time(d: u32, level: f64) -> Result<f64> {
    if !(level > 0.0) {
        return param(format!("crossing level must be positive, got {level}"));
    }
    let chain = BirthDeathChain::build_s(d)?;
    let value = |t: f64| hypercube_avg_l2_with(&chain, t).map(|v| v.value);
    if value(0.0)? <= level {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while value(hi)? > level {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numerical(format!("no crossing of {level} found for d={d}")));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if value(mid)? > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_hardy_range(d: u32, m: usize) -> Result<()> {
    if !(1..=MAX_DIM).contains(&d) {
        return param(format!("d={d} outside 1..={MAX_DIM}"));
    }
    if m == 0 || m > d as usize / 2 {
        return param(format!("M={m} outside 1..={}", d / 2));
    }
    Ok(())
}

/// `C_M = max_{k<M} nu([0,k]) sum_{j=k}^{M-1} 1/(nu(j)(d-j))`, in log space.
pub fn hardy_constant(d: u32, m: usize) -> Result<f64> {
    check_hardy_range(d, m)?;
    let log_nu = log_binomial_half(d);
    let df = d as f64;
    let inv_terms: Vec<f64> = (0..m).map(|j| -log_nu[j] - (df - j as f64).ln()).collect();
    let mut best = f64::NEG_INFINITY;
    for k in 0..m {
        let head = log_sum_exp(&log_nu[..=k]);
        let tail = log_sum_exp(&inv_terms[k..]);
        best = best.max(head + tail);
    }
    Ok(best.exp())
}

/// `Gamma(k) = (1/d) nu([0,k]) ln(1/nu([0,k])) sum_{j=k}^{d/2-1} 1/nu(j)`.
pub fn gamma_k(d: u32, k: usize) -> Result<f64> {
    if !(2..=MAX_DIM).contains(&d) {
        return param(format!("d={d} outside 2..={MAX_DIM}"));
    }
    let half = d as usize / 2;
    if k >= half {
        return param(format!("k={k} must be below d/2={half}"));
    }
    let log_nu = log_binomial_half(d);
    let log_head = log_sum_exp(&log_nu[..=k]);
    let neg: Vec<f64> = log_nu[k..half].iter().map(|l| -l).collect();
    let log_tail = log_sum_exp(&neg);
    // ln(1/nu([0,k])) = -log_head > 0
    Ok((log_head + log_tail - (d as f64).ln()).exp() * (-log_head))
}

/// Two-sample Kolmogorov-Smirnov statistic with its asymptotic 1% critical
/// value `sqrt(-ln(0.005)/2) sqrt((n1+n2)/(n1 n2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub critical_01: f64,
}

impl KsTest {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical_01
    }
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return param("KS test needs two nonempty samples");
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut stat) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        stat = stat.max((i as f64 / na - j as f64 / nb).abs());
    }
    let c = (-(0.005f64).ln() / 2.0).sqrt();
    Ok(KsTest { statistic: stat, critical_01: c * ((na + nb) / (na * nb)).sqrt() })
}
