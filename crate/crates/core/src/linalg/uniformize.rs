use super::Dense;

/// Poisson tail mass left out of each uniformization step.
pub const POISSON_TAIL: f64 = 1e-12;
/// Largest Poisson mean handled in a single uniformization step.
const MAX_STEP_MEAN: f64 = 50.0;

/// Sparse generator of a continuous-time Markov chain on `0..n`.
#[derive(Debug, Clone)]
pub struct Generator {
    rates: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
}

impl Generator {
    pub fn new(n: usize) -> Self {
        Generator { rates: vec![Vec::new(); n], exit: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.exit.len()
    }

    /// Adds jump rate `rate` from `i` to `j`; self-jumps are dropped.
    pub fn add_rate(&mut self, i: usize, j: usize, rate: f64) {
        if i == j || rate == 0.0 {
            return;
        }
        debug_assert!(rate > 0.0);
        self.exit[i] += rate;
        match self.rates[i].iter_mut().find(|(k, _)| *k == j) {
            Some(entry) => entry.1 += rate,
            None => self.rates[i].push((j, rate)),
        }
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return -self.exit[i];
        }
        self.rates[i].iter().find(|(k, _)| *k == j).map_or(0.0, |&(_, r)| r)
    }

    pub fn off_diagonal(&self, i: usize) -> &[(usize, f64)] {
        &self.rates[i]
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Dense {
        let n = self.dim();
        let mut m = Dense::zeros(n);
        for i in 0..n {
            m.set(i, i, -self.exit[i]);
            for &(j, r) in &self.rates[i] {
                m.set(i, j, r);
            }
        }
        m
    }

    /// `(L f)(i)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.rates[i].iter().map(|&(j, r)| r * f[j]).sum::<f64>() - self.exit[i] * f[i])
            .collect()
    }

    fn step_backward(&self, f: &[f64], lambda: f64, out: &mut [f64]) {
        for i in 0..self.dim() {
            let jump: f64 = self.rates[i].iter().map(|&(j, r)| r * f[j]).sum();
            out[i] = f[i] * (1.0 - self.exit[i] / lambda) + jump / lambda;
        }
    }

    fn step_forward(&self, p: &[f64], lambda: f64, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = p[j] * (1.0 - self.exit[j] / lambda);
        }
        for (i, row) in self.rates.iter().enumerate() {
            if p[i] == 0.0 {
                continue;
            }
            for &(j, r) in row {
                out[j] += p[i] * r / lambda;
            }
        }
    }

    fn uniformize<F>(&self, v: &[f64], t: f64, step: F) -> Vec<f64>
    where
        F: Fn(&[f64], f64, &mut [f64]),
    {
        self.uniformize_scaled(v, t, step, false).0
    }

    /// Poisson-weighted powers of `I + L/Λ`, split into pieces with mean at
    /// most `MAX_STEP_MEAN`. With `rescale`, the vector is renormalized by its
    /// maximum after each piece and the accumulated log-scale is returned.
    fn uniformize_scaled<F>(&self, v: &[f64], t: f64, step: F, rescale: bool) -> (Vec<f64>, f64)
    where
        F: Fn(&[f64], f64, &mut [f64]),
    {
        assert!(t >= 0.0 && t.is_finite(), "uniformization needs a finite t >= 0");
        let lambda = self.max_exit_rate();
        let mut cur = v.to_vec();
        let mut log_scale = 0.0;
        if lambda == 0.0 || t == 0.0 {
            return (cur, log_scale);
        }
        let pieces = (lambda * t / MAX_STEP_MEAN).ceil().max(1.0) as usize;
        let mean = lambda * t / pieces as f64;
        let tail = POISSON_TAIL / pieces as f64;
        let n = self.dim();
        let mut term = vec![0.0; n];
        let mut next = vec![0.0; n];
        for _ in 0..pieces {
            let mut weight = (-mean).exp();
            let mut covered = weight;
            term.copy_from_slice(&cur);
            let mut acc: Vec<f64> = term.iter().map(|x| weight * x).collect();
            let mut k = 0usize;
            while 1.0 - covered > tail && k < 10_000 {
                k += 1;
                step(&term, lambda, &mut next);
                std::mem::swap(&mut term, &mut next);
                weight *= mean / k as f64;
                covered += weight;
                for (a, x) in acc.iter_mut().zip(&term) {
                    *a += weight * x;
                }
            }
            cur = acc;
            if rescale {
                let max = cur.iter().copied().fold(0.0, f64::max);
                if max > 0.0 {
                    cur.iter_mut().for_each(|x| *x /= max);
                    log_scale += max.ln();
                }
            }
        }
        (cur, log_scale)
    }

    /// `e^{tL} f`: expectations of `f(X_t)` from every starting state.
    pub fn evolve_backward(&self, f: &[f64], t: f64) -> Vec<f64> {
        self.uniformize(f, t, |a, l, o| self.step_backward(a, l, o))
    }

    /// `p e^{tL}`: the law at time `t` from initial law `p`.
    pub fn evolve_forward(&self, p: &[f64], t: f64) -> Vec<f64> {
        self.uniformize(p, t, |a, l, o| self.step_forward(a, l, o))
    }

    /// `e^{tL} f` for nonnegative `f`, returned as `(v, s)` with
    /// `e^{tL} f = e^s v` and `max(v) = 1`. Keeps relative accuracy for
    /// entries whose absolute size under- or overflows binary64.
    pub fn evolve_backward_log_scaled(&self, f: &[f64], t: f64) -> (Vec<f64>, f64) {
        debug_assert!(f.iter().all(|&x| x >= 0.0));
        let max = f.iter().copied().fold(0.0, f64::max);
        let start: Vec<f64> = if max > 0.0 { f.iter().map(|x| x / max).collect() } else { f.to_vec() };
        let (v, s) = self.uniformize_scaled(&start, t, |a, l, o| self.step_backward(a, l, o), true);
        (v, s + if max > 0.0 { max.ln() } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> Generator {
        let mut g = Generator::new(2);
        g.add_rate(0, 1, a);
        g.add_rate(1, 0, b);
        g
    }

    #[test]
    fn two_state_closed_form() {
        let (a, b) = (0.7, 1.9);
        let g = two_state(a, b);
        for &t in &[0.0, 0.1, 1.0, 7.5, 200.0] {
            let p = g.evolve_forward(&[1.0, 0.0], t);
            let exact = (b + a * (-(a + b) * t).exp()) / (a + b);
            assert!((p[0] - exact).abs() < 1e-12, "t={t}: {} vs {exact}", p[0]);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_is_transpose_of_forward() {
        let mut g = Generator::new(3);
        g.add_rate(0, 1, 1.0);
        g.add_rate(1, 2, 2.0);
        g.add_rate(2, 0, 0.5);
        g.add_rate(1, 0, 0.3);
        let t = 1.3;
        for i in 0..3 {
            let mut e = vec![0.0; 3];
            e[i] = 1.0;
            let row = g.evolve_forward(&e, t);
            for j in 0..3 {
                let mut f = vec![0.0; 3];
                f[j] = 1.0;
                let col = g.evolve_backward(&f, t);
                assert!((row[j] - col[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_scaled_matches_plain() {
        let g = two_state(3.0, 1.0);
        let t = 2.0;
        let plain = g.evolve_backward(&[5.0, 1.0], t);
        let (v, s) = g.evolve_backward_log_scaled(&[5.0, 1.0], t);
        for (a, b) in plain.iter().zip(&v) {
            assert!((a - b * s.exp()).abs() < 1e-12 * a.abs());
        }
    }
}
