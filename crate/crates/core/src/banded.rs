//! Banded LU with partial pivoting for the solver's sparse linear systems.
//!
//! Row `i` stores columns `i − kl ..= i + ku + kl`; the extra `kl`
//! super-diagonals hold the fill-in created by row interchanges.

use crate::error::{ElasticaError, Result};

#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub(crate) fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[cfg(test)]
    fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` to entry `(i, j)`, which must lie inside the declared band.
    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band"
        );
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[cfg(test)]
    fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl >= i && j <= i + self.ku {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Factorises in place and overwrites `rhs` with the solution.
    pub(crate) fn solve(mut self, rhs: &mut [f64]) -> Result<()> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let span = self.ku + self.kl;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(ElasticaError::SingularSystem);
        }
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + span).min(n - 1);
            let mut piv = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= scale * 1e-300 {
                return Err(ElasticaError::SingularSystem);
            }
            if piv != k {
                for c in k..=last_col {
                    let (a, b) = (self.idx(k, c), self.idx(piv, c));
                    self.data.swap(a, b);
                }
                rhs.swap(k, piv);
            }
            let pivot = self.data[self.idx(k, k)];
            for r in k + 1..=last_row {
                let m = self.data[self.idx(r, k)] / pivot;
                if m == 0.0 {
                    continue;
                }
                let rk = self.idx(r, k);
                self.data[rk] = 0.0;
                for c in k + 1..=last_col {
                    let src = self.data[self.idx(k, c)];
                    let dst = self.idx(r, c);
                    self.data[dst] -= m * src;
                }
                rhs[r] -= m * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + span).min(n - 1);
            let mut acc = rhs[k];
            for c in k + 1..=last_col {
                acc -= self.data[self.idx(k, c)] * rhs[c];
            }
            rhs[k] = acc / self.data[self.idx(k, k)];
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(ElasticaError::SingularSystem);
        }
        Ok(())
    }
}
