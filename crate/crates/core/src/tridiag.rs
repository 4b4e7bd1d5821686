//! Thomas algorithm for the constant-coefficient tridiagonal systems that
//! come out of the three-point Laplacian.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Solves `tridiag(off, diag, off) x = rhs` in place, reusing its scratch.
#[derive(Debug, Clone)]
pub struct Toeplitz {
    scratch: Vec<f64>,
}

impl Toeplitz {
    pub fn new(n: usize) -> Self {
        Self {
            scratch: vec![0.0; n],
        }
    }

    pub fn solve(&mut self, diag: f64, off: f64, rhs: &mut [f64]) -> Result<()> {
        let n = rhs.len();
        if self.scratch.len() != n {
            self.scratch.resize(n, 0.0);
        }
        let c = &mut self.scratch;
        if diag == 0.0 {
            return Err(Error::Internal("singular tridiagonal system".into()));
        }
        c[0] = off / diag;
        rhs[0] /= diag;
        for i in 1..n {
            let denom = diag - off * c[i - 1];
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::Internal("singular tridiagonal system".into()));
            }
            c[i] = off / denom;
            rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= c[i] * rhs[i + 1];
        }
        Ok(())
    }
}

/// LU factors of `tridiag(off, diag, off)` for repeated solves with the
/// same matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Factored {
    off: f64,
    /// Super-diagonal of the unit upper factor.
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl Factored {
    pub fn new(diag: f64, off: f64, n: usize) -> Result<Self> {
        let mut upper = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let pivot = diag - off * prev;
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Internal("singular tridiagonal system".into()));
            }
            inv_pivot[i] = 1.0 / pivot;
            upper[i] = off * inv_pivot[i];
            prev = upper[i];
        }
        Ok(Self { off, upper, inv_pivot })
    }

    pub fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        debug_assert_eq!(n, self.upper.len());
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}

/// Solves `K` independent systems of equal size in lockstep, so that their
/// recurrences overlap instead of running back to back.
pub fn solve_interleaved<const K: usize>(factors: [&Factored; K], rhs: [&mut [f64]; K]) {
    let n = rhs[0].len();
    for k in 0..K {
        debug_assert_eq!(rhs[k].len(), n);
        rhs[k][0] *= factors[k].inv_pivot[0];
    }
    for i in 1..n {
        for k in 0..K {
            let f = factors[k];
            rhs[k][i] = (rhs[k][i] - f.off * rhs[k][i - 1]) * f.inv_pivot[i];
        }
    }
    for i in (0..n - 1).rev() {
        for k in 0..K {
            rhs[k][i] -= factors[k].upper[i] * rhs[k][i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_against_dense_product() {
        let n = 7;
        let (diag, off) = (3.5, -1.25);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.1).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = diag * x[i];
                if i > 0 {
                    s += off * x[i - 1];
                }
                if i + 1 < n {
                    s += off * x[i + 1];
                }
                s
            })
            .collect();
        let mut c = b.clone();
        Toeplitz::new(n).solve(diag, off, &mut b).unwrap();
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-14);
        }
        let mut d = c.clone();
        let fac = Factored::new(diag, off, n).unwrap();
        fac.solve(&mut c);
        for (a, e) in c.iter().zip(&x) {
            assert!((a - e).abs() < 1e-14);
        }
        let mut e = d.clone();
        solve_interleaved([&fac, &fac], [&mut d[..], &mut e[..]]);
        assert_eq!(d, c);
        assert_eq!(e, c);
    }
}
