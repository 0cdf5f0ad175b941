//! Dense symmetric positive-definite solves with diagonal pivoting.

use crate::dd::Scalar;
use crate::error::{Error, Result};

/// `P A Pᵀ = L Lᵀ` with the permutation chosen greedily by largest remaining diagonal.
#[derive(Debug, Clone)]
pub struct PivotedCholesky<S> {
    n: usize,
    perm: Vec<usize>,
    l: Vec<Vec<S>>,
}

impl<S: Scalar> PivotedCholesky<S> {
    pub fn factor(a: &[Vec<S>]) -> Result<Self> {
        let n = a.len();
        if a.iter().any(|row| row.len() != n) {
            return Err(Error::Inconsistent("matrix is not square".into()));
        }
        let mut w: Vec<Vec<S>> = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut l = vec![vec![S::zero(); n]; n];
        for k in 0..n {
            let mut piv = k;
            for i in k + 1..n {
                if w[i][i] > w[piv][piv] {
                    piv = i;
                }
            }
            if piv != k {
                w.swap(k, piv);
                for row in w.iter_mut() {
                    row.swap(k, piv);
                }
                l.swap(k, piv);
                perm.swap(k, piv);
            }
            let d = w[k][k];
            if !(d > S::zero()) {
                return Err(Error::IllConditioned { residual: f64::INFINITY, condition: f64::INFINITY });
            }
            let dk = d.sqrt();
            l[k][k] = dk;
            for i in k + 1..n {
                l[i][k] = w[i][k] / dk;
            }
            for i in k + 1..n {
                let lik = l[i][k];
                for j in k + 1..=i {
                    let v = w[i][j] - lik * l[j][k];
                    w[i][j] = v;
                    w[j][i] = v;
                }
            }
        }
        Ok(PivotedCholesky { n, perm, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.n;
        let mut y: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i][k] * y[k];
            }
            y[i] = s / self.l[i][i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k][i] * y[k];
            }
            y[i] = s / self.l[i][i];
        }
        let mut x = vec![S::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Solve followed by one step of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &[Vec<S>], b: &[S]) -> Vec<S> {
        let mut x = self.solve(b);
        let r = residual(a, &x, b);
        let dx = self.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        x
    }
}

/// `b - A x`.
pub fn residual<S: Scalar>(a: &[Vec<S>], x: &[S], b: &[S]) -> Vec<S> {
    a.iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut s = bi;
            for (aij, &xj) in row.iter().zip(x) {
                s -= *aij * xj;
            }
            s
        })
        .collect()
}

/// Induced 1-norm of a square matrix, in `f64`.
pub fn norm1<S: Scalar>(a: &[Vec<S>]) -> f64 {
    let n = a.len();
    (0..n).map(|j| a.iter().map(|row| row[j].to_f64().abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::DoubleDouble;

    fn hilbert(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| 1.0 / (i + j + 1) as f64).collect()).collect()
    }

    #[test]
    fn solves_small_spd_system() {
        let a = vec![vec![4.0, 2.0, 0.6], vec![2.0, 5.0, 1.0], vec![0.6, 1.0, 3.0]];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = a.iter().map(|r| r.iter().zip(&x_true).map(|(p, q)| p * q).sum()).collect();
        let f = PivotedCholesky::factor(&a).unwrap();
        let x = f.solve_refined(&a, &b);
        for (xi, ti) in x.iter().zip(x_true) {
            assert!((xi - ti).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(PivotedCholesky::factor(&a), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn double_double_beats_f64_on_hilbert() {
        let n = 10;
        let a = hilbert(n);
        let ones = vec![1.0; n];
        let b: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
        let xf = PivotedCholesky::factor(&a).unwrap().solve_refined(&a, &b);
        let err_f: f64 = xf.iter().zip(&ones).map(|(x, o)| (x - o).abs()).fold(0.0, f64::max);

        let ad: Vec<Vec<DoubleDouble>> = (0..n)
            .map(|i| (0..n).map(|j| DoubleDouble::ONE / DoubleDouble::from((i + j + 1) as f64)).collect())
            .collect();
        let bd: Vec<DoubleDouble> = ad.iter().map(|r| r.iter().fold(DoubleDouble::ZERO, |s, &v| s + v)).collect();
        let xd = PivotedCholesky::factor(&ad).unwrap().solve_refined(&ad, &bd);
        let err_d: f64 = xd.iter().map(|x| (*x - DoubleDouble::ONE).to_f64().abs()).fold(0.0, f64::max);
        assert!(err_f > 1e-6, "{err_f}");
        assert!(err_d < 1e-16, "{err_d}");
    }
}
