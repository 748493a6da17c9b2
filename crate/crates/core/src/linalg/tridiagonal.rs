use super::SymEigen;
use crate::error::{Error, Result};

const MAX_ITER: usize = 60;

/// Implicit-shift QL on a symmetric tridiagonal matrix (`tqli` lineage).
/// `e[i]` couples rows `i` and `i+1`; on entry `e.len() == d.len()` with the
/// last slot unused. When `z` is given it holds an `n x n` row-major basis
/// that is rotated along; `z[k*n + i]` ends up as component `k` of vector `i`.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITER {
                return Err(Error::Numerical(format!("tridiagonal QL: no convergence at index {l}")));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let row = k * n;
                        let f = z[row + i + 1];
                        z[row + i + 1] = s * z[row + i] + c * f;
                        z[row + i] = c * z[row + i] - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

fn prepare(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if off.len() + 1 != n && !(n == 0 && off.is_empty()) {
        return Err(Error::Parameter(format!(
            "tridiagonal: {} diagonal entries need {} off-diagonal entries, got {}",
            n,
            n.saturating_sub(1),
            off.len()
        )));
    }
    let mut e = off.to_vec();
    e.push(0.0);
    Ok((diag.to_vec(), e))
}

pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let (mut d, mut e) = prepare(diag, off)?;
    ql_implicit(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<SymEigen> {
    let (mut d, mut e) = prepare(diag, off)?;
    let n = d.len();
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    ql_implicit(&mut d, &mut e, Some(&mut z))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    Ok(SymEigen {
        values: order.iter().map(|&i| d[i]).collect(),
        vectors: order.iter().map(|&i| (0..n).map(|k| z[k * n + i]).collect()).collect(),
    })
}

/// `ln(v_k(0)^2)` for the unit eigenvectors belonging to `values`, each
/// obtained from a twisted factorization: ratios are propagated from both
/// ends toward the index where the two sweeps meet, so components many orders
/// of magnitude below the largest keep their relative accuracy. Every
/// off-diagonal entry must be nonzero.
pub fn tridiagonal_log_first_weights(diag: &[f64], off: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if off.len() + 1 != n.max(1) {
        return Err(Error::Parameter(format!("off-diagonal length {} for dimension {n}", off.len())));
    }
    if off.iter().any(|&b| b == 0.0 || !b.is_finite()) {
        return Err(Error::Parameter("off-diagonal entries must be nonzero".into()));
    }
    if n <= 1 {
        return Ok(vec![0.0; values.len()]);
    }
    let scale = diag.iter().chain(off).fold(0.0f64, |m, x| m.max(x.abs()));
    let guard = |x: f64| if x == 0.0 { f64::EPSILON * scale } else { x };
    let mut fwd = vec![0.0; n];
    let mut bwd = vec![0.0; n];
    let mut logv = vec![0.0; n];
    let mut out = Vec::with_capacity(values.len());
    for &lam in values {
        fwd[0] = guard(diag[0] - lam);
        for j in 1..n {
            fwd[j] = guard(diag[j] - lam - off[j - 1] * off[j - 1] / fwd[j - 1]);
        }
        bwd[n - 1] = guard(diag[n - 1] - lam);
        for j in (0..n - 1).rev() {
            bwd[j] = guard(diag[j] - lam - off[j] * off[j] / bwd[j + 1]);
        }
        let twist = (0..n)
            .min_by(|&i, &j| {
                let g = |r: usize| (fwd[r] + bwd[r] - (diag[r] - lam)).abs();
                g(i).total_cmp(&g(j))
            })
            .expect("nonempty");
        logv[twist] = 0.0;
        for j in (0..twist).rev() {
            // v_{j+1} / v_j = -fwd_j / b_j
            logv[j] = logv[j + 1] - (fwd[j] / off[j]).abs().ln();
        }
        for j in twist + 1..n {
            // v_{j-1} / v_j = -bwd_j / b_{j-1}
            logv[j] = logv[j - 1] - (bwd[j] / off[j - 1]).abs().ln();
        }
        let sq: Vec<f64> = logv.iter().map(|l| 2.0 * l).collect();
        out.push(sq[0] - super::log_sum_exp(&sq));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_laplacian_spectrum() {
        // path Laplacian with Dirichlet ends: 2 - 2cos(k pi / (n+1))
        let n = 40;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let vals = tridiagonal_eigenvalues(&diag, &off).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12, "{k}: {v} vs {exact}");
        }
    }

    #[test]
    fn vectors_satisfy_eigen_equation() {
        let n = 25;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64).sin() * 3.0 + 5.0).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 0.5 + (i as f64 * 0.3).cos()).collect();
        let eig = tridiagonal_eigen(&diag, &off).unwrap();
        for (lam, v) in eig.values.iter().zip(&eig.vectors) {
            for k in 0..n {
                let mut tv = diag[k] * v[k];
                if k > 0 {
                    tv += off[k - 1] * v[k - 1];
                }
                if k + 1 < n {
                    tv += off[k] * v[k + 1];
                }
                assert!((tv - lam * v[k]).abs() < 1e-12);
            }
            let norm: f64 = v.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_weights_match_vectors() {
        let n = 25;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64).sin() * 3.0 + 5.0).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 0.5 + (i as f64 * 0.3).cos()).collect();
        let eig = tridiagonal_eigen(&diag, &off).unwrap();
        let lw = tridiagonal_log_first_weights(&diag, &off, &eig.values).unwrap();
        for (w, v) in lw.iter().zip(&eig.vectors) {
            assert!((w.exp() - v[0] * v[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_entry() {
        assert_eq!(tridiagonal_eigenvalues(&[4.0], &[]).unwrap(), vec![4.0]);
        assert!(tridiagonal_eigenvalues(&[1.0, 2.0], &[]).is_err());
    }
}
