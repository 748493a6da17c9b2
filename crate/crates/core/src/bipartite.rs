//! Exact L2 distance of the averaging process on `K_{m,n-m}`.
//!
//! The coupled pair of walks lumps to five states
//! `(0_1, 0_2, 1, 2_1, 2_2)`: both particles on one vertex of `C1` or `C2`,
//! one particle per side, or two distinct vertices of the same side. The
//! 5-state chain is reversible, so its spectrum comes from a symmetric 5x5
//! eigenproblem.

use crate::error::{param, Error, Result};
use crate::graph::Part;
use crate::linalg::{jacobi_eigen, Dense, Generator};

pub const STATES: [&str; 5] = ["0_1", "0_2", "1", "2_1", "2_2"];
const O1: usize = 0;
const O2: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LumpedBipartiteChain {
    m: usize,
    n: usize,
    q: [[f64; 5]; 5],
    mu: [f64; 5],
    active: Vec<usize>,
}

/// Eigenpairs of `-Q` with eigenfunctions orthonormal in `L2(mu)`.
/// Entries of `vectors[j]` on inactive states are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomp {
    pub values: Vec<f64>,
    pub vectors: Vec<[f64; 5]>,
}

fn check_sizes(m: usize, n: usize) -> Result<()> {
    if n < 2 || m == 0 || 2 * m > n {
        return param(format!("need 1 <= m <= n/2 and n >= 2, got m={m}, n={n}"));
    }
    Ok(())
}

/// Integer form `4 Q` of the rate matrix, used for exact checks.
fn q_times_four(m: i128, n: i128) -> [[i128; 5]; 5] {
    let k = n - m;
    [
        [-3 * k, k, 2 * k, 0, 0],
        [m, -3 * m, 2 * m, 0, 0],
        [1, 1, -2 * (n - 1), 2 * (m - 1), 2 * (k - 1)],
        [0, 0, 4 * k, -4 * k, 0],
        [0, 0, 4 * m, 0, -4 * m],
    ]
}

/// Integer form `n^2 mu` of the reversible measure.
fn mu_times_n2(m: i128, n: i128) -> [i128; 5] {
    let k = n - m;
    [m, k, 2 * m * k, m * (m - 1), k * (k - 1)]
}

impl LumpedBipartiteChain {
    pub fn build(m: usize, n: usize) -> Result<Self> {
        check_sizes(m, n)?;
        let q4 = q_times_four(m as i128, n as i128);
        let mu_n2 = mu_times_n2(m as i128, n as i128);
        let mut q = [[0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                q[i][j] = q4[i][j] as f64 / 4.0;
            }
        }
        let n2 = (n as f64) * (n as f64);
        let mu = mu_n2.map(|v| v as f64 / n2);
        let active = (0..5).filter(|&i| mu_n2[i] > 0).collect();
        Ok(LumpedBipartiteChain { m, n, q, mu, active })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn q(&self) -> &[[f64; 5]; 5] {
        &self.q
    }

    pub fn mu(&self) -> &[f64; 5] {
        &self.mu
    }

    /// States carrying positive reversible mass.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn max_row_sum(&self) -> f64 {
        self.q.iter().map(|row| row.iter().sum::<f64>().abs()).fold(0.0, f64::max)
    }

    /// Detailed balance and zero row sums in exact integer arithmetic.
    pub fn detailed_balance_exact(&self) -> bool {
        let (m, n) = (self.m as i128, self.n as i128);
        let q4 = q_times_four(m, n);
        let mu = mu_times_n2(m, n);
        let rows_ok = q4.iter().all(|row| row.iter().sum::<i128>() == 0);
        let sum_ok = mu.iter().sum::<i128>() == n * n;
        let balance_ok = (0..5).all(|i| (0..5).all(|j| mu[i] * q4[i][j] == mu[j] * q4[j][i]));
        rows_ok && sum_ok && balance_ok
    }

    /// Largest `|mu(i) Q(i,j) - mu(j) Q(j,i)|` in floating point.
    pub fn detailed_balance_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..5 {
            for j in 0..5 {
                worst = worst.max((self.mu[i] * self.q[i][j] - self.mu[j] * self.q[j][i]).abs());
            }
        }
        worst
    }

    /// `U (-Q) U^{-1}` on the active states, `U = diag(sqrt(mu))`. Off-diagonal
    /// entries are formed as `-sqrt(Q_ij Q_ji)`, which is exactly symmetric.
    pub fn symmetrized(&self) -> Dense {
        let a = &self.active;
        let mut s = Dense::zeros(a.len());
        for (r, &i) in a.iter().enumerate() {
            for (c, &j) in a.iter().enumerate() {
                let v = if i == j { -self.q[i][i] } else { -(self.q[i][j] * self.q[j][i]).sqrt() };
                s.set(r, c, v);
            }
        }
        s
    }

    pub fn spectral(&self) -> Result<SpectralDecomp> {
        let eig = jacobi_eigen(&self.symmetrized())?;
        let mut vectors = Vec::with_capacity(eig.values.len());
        for v in &eig.vectors {
            let mut phi = [0.0; 5];
            for (r, &i) in self.active.iter().enumerate() {
                phi[i] = v[r] / self.mu[i].sqrt();
            }
            // orient so that the constant mode is +1 and the rest are
            // nonnegative at 0_2
            if phi[O2] < 0.0 {
                phi.iter_mut().for_each(|x| *x = -*x);
            }
            vectors.push(phi);
        }
        Ok(SpectralDecomp { values: eig.values, vectors })
    }

    /// `max_j |(-Q phi_j - rho_j phi_j)|` relative to `rho_max * max|phi_j|`,
    /// and the largest deviation from orthonormality in `L2(mu)`.
    pub fn spectral_residuals(&self, spec: &SpectralDecomp) -> (f64, f64) {
        let rho_max = spec.values.iter().copied().fold(1.0, f64::max);
        let mut residual = 0.0f64;
        for (rho, phi) in spec.values.iter().zip(&spec.vectors) {
            let scale = rho_max * phi.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            for &i in &self.active {
                let lhs: f64 = -self.active.iter().map(|&j| self.q[i][j] * phi[j]).sum::<f64>();
                residual = residual.max((lhs - rho * phi[i]).abs() / scale);
            }
        }
        let mut ortho = 0.0f64;
        for (a, pa) in spec.vectors.iter().enumerate() {
            for (b, pb) in spec.vectors.iter().enumerate() {
                let dot: f64 = self.active.iter().map(|&k| self.mu[k] * pa[k] * pb[k]).sum();
                ortho = ortho.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        (residual, ortho)
    }

    /// Rate matrix as a generator on five states (inactive states included).
    pub fn generator(&self) -> Generator {
        let mut g = Generator::new(5);
        for i in 0..5 {
            for j in 0..5 {
                if i != j && self.q[i][j] > 0.0 {
                    g.add_rate(i, j, self.q[i][j]);
                }
            }
        }
        g
    }
}

/// The eigenpair `(n/2, phi)` of `-Q` with
/// `phi = (n-m)^{-1/2} (-(n-m)/m, 1, -(n-2m)/(2m), -(n-m)/m, 1)`.
pub fn explicit_eigenpair(m: usize, n: usize) -> Result<(f64, [f64; 5])> {
    check_sizes(m, n)?;
    let (mf, nf) = (m as f64, n as f64);
    let k = nf - mf;
    let s = 1.0 / k.sqrt();
    Ok((nf / 2.0, [-k / mf * s, s, -(nf - 2.0 * mf) / (2.0 * mf) * s, -k / mf * s, s]))
}

/// Largest entry of `|-Q phi - (n/2) phi|` over active states for the
/// explicit eigenpair.
pub fn explicit_eigenpair_check(chain: &LumpedBipartiteChain) -> Result<f64> {
    let (rho, phi) = explicit_eigenpair(chain.m, chain.n)?;
    let q = chain.q();
    Ok(chain
        .active()
        .iter()
        .map(|&i| {
            let lhs: f64 = -chain.active().iter().map(|&j| q[i][j] * phi[j]).sum::<f64>();
            (lhs - rho * phi[i]).abs()
        })
        .fold(0.0, f64::max))
}

fn start_state(side: Part) -> usize {
    match side {
        Part::C1 => O1,
        Part::C2 => O2,
    }
}

/// `E ||eta_t/pi - 1||_2^2` on `K_{m,n-m}` from a vertex of `side`.
pub fn exact_l2(m: usize, n: usize, side: Part, t: f64) -> Result<f64> {
    let chain = LumpedBipartiteChain::build(m, n)?;
    exact_l2_with(&chain, &chain.spectral()?, side, t)
}

/// As [`exact_l2`], reusing a decomposition.
pub fn exact_l2_with(chain: &LumpedBipartiteChain, spec: &SpectralDecomp, side: Part, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return param(format!("time must be finite and >= 0, got {t}"));
    }
    let b = chain.b();
    let i = start_state(side);
    // skip the constant mode; the remaining terms carry the whole distance
    let terms = spec.values.iter().zip(&spec.vectors).skip(1).map(|(rho, phi)| {
        (-rho * t).exp() * phi[i] * (b * phi[O1] + (1.0 - b) * phi[O2])
    });
    Ok(crate::linalg::compensated_sum(terms))
}

/// The same quantity from `n (e^{tQ}(0_i,0_1) + e^{tQ}(0_i,0_2)) - 1`, by
/// uniformization of the 5-state chain.
pub fn exact_l2_uniformized(m: usize, n: usize, side: Part, t: f64) -> Result<f64> {
    let chain = LumpedBipartiteChain::build(m, n)?;
    let mut start = [0.0; 5];
    start[start_state(side)] = 1.0;
    let row = chain.generator().evolve_forward(&start, t);
    Ok(n as f64 * (row[O1] + row[O2]) - 1.0)
}

fn check_b(b: f64, open_at_zero: bool) -> Result<()> {
    let ok = if open_at_zero { b > 0.0 && b <= 0.5 } else { (0.0..=0.5).contains(&b) };
    if !ok || !b.is_finite() {
        return param(format!("b={b} outside the admissible range"));
    }
    Ok(())
}

/// `theta = (3n/8m)(1 - sqrt(1 - x))`, `x = (32/9)(m/n)((n-m)/n)`, evaluated
/// as `(3n/8m) x / (1 + sqrt(1 - x))` to avoid cancellation for small `m/n`.
pub fn theta(m: usize, n: usize) -> Result<f64> {
    check_sizes(m, n)?;
    let (mf, nf) = (m as f64, n as f64);
    let x = 32.0 / 9.0 * (mf / nf) * ((nf - mf) / nf);
    Ok(3.0 * nf / (8.0 * mf) * x / (1.0 + (1.0 - x).sqrt()))
}

/// `B(b) = sqrt(9 - 32b + 32b^2)` on `[0, 1/2]`.
pub fn big_b(b: f64) -> Result<f64> {
    check_b(b, false)?;
    Ok((9.0 - 32.0 * b * (1.0 - b)).sqrt())
}

/// `C(b) = 4b/(3 - B)`, written as `(3 + B)/(8(1 - b))`; `C(0) = 3/4` is the
/// limit value.
pub fn big_c(b: f64) -> Result<f64> {
    let bb = big_b(b)?;
    Ok((3.0 + bb) / (8.0 * (1.0 - b)))
}

/// `D(b) = (3 - 4b - B)/(2B)`.
pub fn big_d(b: f64) -> Result<f64> {
    let bb = big_b(b)?;
    Ok((3.0 - 4.0 * b - bb) / (2.0 * bb))
}

/// L2 cutoff time `(ln n + a)/(theta m)`; may be negative for very negative `a`.
pub fn cutoff_time_l2_signed(m: usize, n: usize, a: f64) -> Result<f64> {
    Ok(((n as f64).ln() + a) / (theta(m, n)? * m as f64))
}

/// L1 cutoff time `n/(2(n-m)) log2(n)/m + a sqrt(ln n)/m`; may be negative.
pub fn cutoff_time_l1_signed(m: usize, n: usize, a: f64) -> Result<f64> {
    check_sizes(m, n)?;
    let (mf, nf) = (m as f64, n as f64);
    Ok(nf / (2.0 * (nf - mf)) * nf.log2() / mf + a * nf.ln().sqrt() / mf)
}

fn positive_time(t: f64, a: f64) -> Result<f64> {
    if !(t > 0.0) {
        return param(format!("cutoff time at a={a} is {t}, not positive"));
    }
    Ok(t)
}

pub fn cutoff_time_l2(m: usize, n: usize, a: f64) -> Result<f64> {
    positive_time(cutoff_time_l2_signed(m, n, a)?, a)
}

pub fn cutoff_time_l1(m: usize, n: usize, a: f64) -> Result<f64> {
    positive_time(cutoff_time_l1_signed(m, n, a)?, a)
}

/// Cubic factor of the characteristic polynomial of `-Q` left after removing
/// the roots `0` and `n/2`.
pub fn char_poly_q(m: usize, n: usize, lambda: f64) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let c2 = (7.0 * nf - 2.0) / 4.0;
    let c1 = (2.0 * mf * mf + (1.0 - 2.0 * mf) * nf - 3.0 * nf * nf) / 4.0;
    let c0 = mf * nf * (nf - mf) / 2.0;
    ((-lambda + c2) * lambda + c1) * lambda + c0
}

/// Number of bracket doublings tried before giving up.
pub const RHO1_MAX_WIDENINGS: u32 = 6;

/// Smallest positive eigenvalue of `-Q` by bisection on the cubic factor.
///
/// The search starts on `theta m (1 -+ 10/sqrt(n))`, intersected with
/// `(0, 0.4 n]`, where the remaining roots cannot lie. If `q` has no sign
/// change there the half-width is doubled, at most `RHO1_MAX_WIDENINGS`
/// times, after which a numerical error is returned.
pub fn rho1(m: usize, n: usize) -> Result<f64> {
    let center = theta(m, n)? * m as f64;
    let cap = 0.4 * n as f64;
    let mut half = center * 10.0 / (n as f64).sqrt();
    let q = |l: f64| char_poly_q(m, n, l);
    for _ in 0..=RHO1_MAX_WIDENINGS {
        let lo = (center - half).max(0.0);
        let hi = (center + half).min(cap);
        let (mut a, mut b) = (lo, hi);
        let (qa, qb) = (q(a), q(b));
        if qa == 0.0 {
            return Ok(a);
        }
        if qa.signum() != qb.signum() {
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if q(mid).signum() == qa.signum() {
                    a = mid;
                } else {
                    b = mid;
                }
                if b - a <= 1e-12 * b.abs() {
                    break;
                }
            }
            let root = 0.5 * (a + b);
            if root >= cap {
                return Err(Error::Numerical(format!("rho1={root} is not below 0.4 n")));
            }
            return Ok(root);
        }
        half *= 2.0;
    }
    Err(Error::Numerical(format!("no sign change of q around theta*m={center} for m={m}, n={n}")))
}

/// Exact L2 distance at the cutoff time next to the limiting profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub t: f64,
    pub exact: f64,
    pub predicted: f64,
    pub ratio: f64,
}

/// Worst-case start (a vertex of `C2`) at `T(a)`, against `(1 + D(b)) e^{-a}`.
pub fn profile(m: usize, n: usize, a: f64) -> Result<Profile> {
    let chain = LumpedBipartiteChain::build(m, n)?;
    profile_with(&chain, &chain.spectral()?, a)
}

pub fn profile_with(chain: &LumpedBipartiteChain, spec: &SpectralDecomp, a: f64) -> Result<Profile> {
    let t = cutoff_time_l2(chain.m, chain.n, a)?;
    let exact = exact_l2_with(chain, spec, Part::C2, t)?;
    let predicted = (1.0 + big_d(chain.b())?) * (-a).exp();
    Ok(Profile { t, exact, predicted, ratio: exact / predicted })
}

/// Limiting blocks of the rescaled symmetrized chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub s0: Dense,
    pub s1: Dense,
    pub spec0: Vec<f64>,
    pub spec1: Vec<f64>,
}

pub fn symmetrized_blocks(b: f64) -> Result<Blocks> {
    check_b(b, true)?;
    let r = (b * (1.0 - b)).sqrt();
    let s0 = Dense::from_rows(&[
        vec![0.75 * (1.0 - b), -0.25 * r],
        vec![-0.25 * r, 0.75 * b],
    ]);
    let sq2 = std::f64::consts::SQRT_2;
    let e01 = -r * (1.0 + 2.0 * b) / sq2;
    let e02 = -r * (3.0 - 2.0 * b) / sq2;
    let e12 = -b * (1.0 - b);
    let s1 = Dense::from_rows(&[
        vec![(1.0 - 2.0 * b).powi(2) / 2.0, e01, e02],
        vec![e01, 1.0 - b * (1.0 + b), e12],
        vec![e02, e12, b * (3.0 - b) - 1.0],
    ]);
    let spec0 = jacobi_eigen(&s0)?.values;
    let spec1 = jacobi_eigen(&s1)?.values;
    let bb = big_b(b)?;
    let want0 = [(3.0 - bb) / 8.0, (3.0 + bb) / 8.0];
    let want1 = [-1.0, 0.5, 1.0];
    let off0 = spec0.iter().zip(&want0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let off1 = spec1.iter().zip(&want1).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if off0 > 1e-10 || off1 > 1e-10 {
        return Err(Error::Numerical(format!(
            "block spectra {spec0:?}, {spec1:?} disagree with the closed forms at b={b}"
        )));
    }
    Ok(Blocks { s0, s1, spec0, spec1 })
}

/// Eigenvalues of `W = (1/n) U(-Q)U^{-1} - (U phi_0)(U phi_0)^T`, ascending.
pub fn w_eigenvalues(m: usize, n: usize) -> Result<Vec<f64>> {
    let chain = LumpedBipartiteChain::build(m, n)?;
    let mut w = chain.symmetrized();
    let a = chain.active().to_vec();
    let nf = n as f64;
    for r in 0..a.len() {
        for c in 0..a.len() {
            let v = w.get(r, c) / nf - (chain.mu[a[r]] * chain.mu[a[c]]).sqrt();
            w.set(r, c, v);
        }
    }
    Ok(jacobi_eigen(&w)?.values)
}

/// `Psi_j = phi_j(0_2) (b phi_j(0_1) + (1-b) phi_j(0_2))` for `j >= 1`.
pub fn psi(chain: &LumpedBipartiteChain, spec: &SpectralDecomp) -> Vec<f64> {
    let b = chain.b();
    spec.vectors.iter().skip(1).map(|phi| phi[O2] * (b * phi[O1] + (1.0 - b) * phi[O2])).collect()
}
