use alloc::vec;
use alloc::vec::Vec;

use crate::qvi::{QviError, QviSystem};
use crate::Matrix;

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(j, a)| a * v[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}

/// `G^ρ(u)`: `F(u) - ρ max(Mu - u, 0)` for `n < N`, `u - Mu` at `n = N`,
/// `u - value` on pinned states.
pub fn penalised_residual(sys: &QviSystem, u: &[f64], rho: f64) -> Result<Vec<f64>, QviError> {
    if u.len() != sys.len() {
        return Err(QviError::Layout {
            expected: sys.len(),
            got: u.len(),
        });
    }
    let mu = sys.obstacle(u);
    let mut g = sys.continuation_residuals(u);
    for (i, gi) in g.iter_mut().enumerate() {
        let (n, x, _) = sys.decompose(i);
        if let Some(p) = sys.pinned(x) {
            *gi = u[i] - p;
        } else if n == sys.horizon() {
            *gi = u[i] - mu[i];
        } else {
            *gi -= rho * (mu[i] - u[i]).max(0.0);
        }
    }
    Ok(g)
}

/// Generalized derivative of [`penalised_residual`] at `u`. Rows where
/// `Mu - u > 0` strictly carry the penalty term; the kink selects the
/// inactive branch.
pub fn generalized_jacobian(sys: &QviSystem, u: &[f64], rho: f64) -> Result<CsrMatrix, QviError> {
    if u.len() != sys.len() {
        return Err(QviError::Layout {
            expected: sys.len(),
            got: u.len(),
        });
    }
    let inner = sys.inner_max(u);
    let mu = sys.obstacle_from(&inner);
    let (l, d, big_n, gamma) = (sys.num_states(), sys.num_controls(), sys.horizon(), sys.discount());
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for i in 0..sys.len() {
        let (n, x, a) = sys.decompose(i);
        entries.clear();
        if sys.pinned(x).is_some() {
            entries.push((i, 1.0));
        } else {
            let scatter = if n == big_n {
                entries.push((i, 1.0));
                Some(gamma)
            } else {
                entries.push((i, 1.0));
                entries.push((sys.index(n + 1, x, a), -gamma));
                if rho > 0.0 && mu[i] - u[i] > 0.0 {
                    entries.push((i, rho));
                    Some(rho * gamma)
                } else {
                    None
                }
            };
            if let Some(w) = scatter {
                let k = sys.kernel(a, n);
                for y in 0..l {
                    let p = k[(x, y)];
                    if p != 0.0 {
                        entries.push((sys.index(1, y, inner.argmax[y * d + a]), -w * p));
                    }
                }
            }
        }
        entries.sort_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(j, v) in entries.iter() {
            if last == Some(j) {
                *values.last_mut().expect("merged entry") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                last = Some(j);
            }
        }
        row_ptr.push(col_idx.len());
    }
    Ok(CsrMatrix {
        nrows: sys.len(),
        ncols: sys.len(),
        row_ptr,
        col_idx,
        values,
    })
}
