use super::Dense;
use crate::error::{Error, Result};

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
/// `vectors[j]` is the unit eigenvector for `values[j]`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// `1e-13` times the matrix norm.
pub fn jacobi_eigen(mat: &Dense) -> Result<SymEigen> {
    let n = mat.dim();
    let mut a = mat.clone();
    for i in 0..n {
        for j in 0..i {
            let asym = (a.get(i, j) - a.get(j, i)).abs();
            let scale = a.get(i, j).abs().max(a.get(j, i).abs()).max(1.0);
            if asym > 1e-12 * scale {
                return Err(Error::Numerical(format!("jacobi: matrix not symmetric at ({i},{j})")));
            }
        }
    }
    let mut v = Dense::zeros(n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let norm: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a.get(i, j).powi(2)).sum::<f64>().sqrt();
    let tol = 1e-13 * norm.max(f64::MIN_POSITIVE);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if !converged {
        return Err(Error::Numerical("jacobi: no convergence".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));
    Ok(SymEigen {
        values: order.iter().map(|&j| a.get(j, j)).collect(),
        vectors: order.iter().map(|&j| (0..n).map(|k| v.get(k, j)).collect()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let m = Dense::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = jacobi_eigen(&m).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn residuals_and_orthonormality() {
        let n = 7;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| 1.0 / (1.0 + i as f64 + j as f64) + if i == j { i as f64 } else { 0.0 }).collect())
            .collect();
        let m = Dense::from_rows(&rows);
        let e = jacobi_eigen(&m).unwrap();
        for (lam, v) in e.values.iter().zip(&e.vectors) {
            let mv = m.mul_vec(v);
            let res: f64 = mv.iter().zip(v).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-12);
        }
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = e.vectors[i].iter().zip(&e.vectors[j]).map(|(a, b)| a * b).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let m = Dense::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(jacobi_eigen(&m).is_err());
    }
}
