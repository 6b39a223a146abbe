//! Compressed sparse row matrices and the iterative solver pieces.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero-valued matrix with the given per-row column lists (sorted, unique).
    pub fn from_pattern(n_cols: usize, rows: &[Vec<usize>]) -> Self {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for r in rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]), "row pattern must be sorted and unique");
            col_indices.extend_from_slice(r);
            row_offsets.push(col_indices.len());
        }
        let nnz = col_indices.len();
        CsrMatrix {
            n_rows: rows.len(),
            n_cols,
            row_offsets,
            col_indices,
            values: vec![0.0; nnz],
        }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n_cols = a.first().map_or(0, |r| r.len());
        let rows: Vec<Vec<usize>> = a
            .iter()
            .map(|r| (0..n_cols).filter(|&j| r[j] != 0.0).collect())
            .collect();
        let mut m = Self::from_pattern(n_cols, &rows);
        for (i, r) in a.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    m.add(i, j, v);
                }
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut m = Self::from_pattern(n, &rows);
        m.values.fill(1.0);
        m
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    /// Position of entry `(i, j)` in `values`, if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_offsets[i];
        let cols = &self.col_indices[start..self.row_offsets[i + 1]];
        cols.binary_search(&j).ok().map(|p| start + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Adds to an existing pattern entry; panics if `(i, j)` is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.values[p] += v;
    }

    pub fn clear_values(&mut self) {
        self.values.fill(0.0);
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n_rows) {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// True when `(i, j)` in the pattern implies `(j, i)` is too.
    pub fn pattern_is_symmetric(&self) -> bool {
        (0..self.n_rows).all(|i| self.row(i).0.iter().all(|&j| self.position(j, i).is_some()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Incomplete LU factorization with the sparsity pattern of the input.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = lu.n_rows;
        let diag: Vec<usize> = (0..n)
            .map(|i| lu.position(i, i).ok_or(Error::Singular))
            .collect::<Result<_>>()?;
        for i in 0..n {
            let (start, end) = (lu.row_offsets[i], lu.row_offsets[i + 1]);
            for kk in start..end {
                let k = lu.col_indices[kk];
                if k >= i {
                    break;
                }
                let pivot = lu.values[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::Singular);
                }
                let factor = lu.values[kk] / pivot;
                lu.values[kk] = factor;
                if factor == 0.0 {
                    continue;
                }
                // row_i[j] -= factor * row_k[j] for j > k present in both rows
                let (ks, ke) = (diag[k] + 1, lu.row_offsets[k + 1]);
                let mut p = kk + 1;
                for q in ks..ke {
                    let j = lu.col_indices[q];
                    while p < end && lu.col_indices[p] < j {
                        p += 1;
                    }
                    if p == end {
                        break;
                    }
                    if lu.col_indices[p] == j {
                        lu.values[p] -= factor * lu.values[q];
                    }
                }
            }
            if lu.values[diag[i]] == 0.0 || !lu.values[diag[i]].is_finite() {
                return Err(Error::Singular);
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// `y = (LU)⁻¹ x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.lu.n_rows;
        for i in 0..n {
            let mut s = x[i];
            for p in self.lu.row_offsets[i]..self.diag[i] {
                s -= self.lu.values[p] * y[self.lu.col_indices[p]];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in self.diag[i] + 1..self.lu.row_offsets[i + 1] {
                s -= self.lu.values[p] * y[self.lu.col_indices[p]];
            }
            y[i] = s / self.lu.values[self.diag[i]];
        }
    }
}

/// Restarted GMRES with right ILU(0) preconditioning.
/// Returns the solution and the relative residual history (one entry per restart cycle).
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    restart: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.n_rows;
    let precond = Ilu0::new(a)?;
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], vec![0.0]));
    }
    let m = restart.max(1);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];

    loop {
        a.matvec(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm2(&r);
        let rel = beta / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok((x, history));
        }
        if iterations >= max_iter {
            return Err(Error::Stagnation {
                iterations,
                residual: rel,
                history,
            });
        }

        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;

        for j in 0..m {
            precond.apply(&v[j], &mut z);
            a.matvec(&z, &mut w);
            for (i, vi) in v.iter().enumerate() {
                h[i][j] = dot(&w, vi);
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= h[i][j] * vk;
                }
            }
            h[j + 1][j] = norm2(&w);
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == 0.0 {
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            iterations += 1;
            if (g[j + 1].abs() / bnorm) <= tol || iterations >= max_iter {
                break;
            }
            let hn = w.iter().map(|wk| wk * wk).sum::<f64>().sqrt();
            if hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wk| wk / hn).collect());
        }

        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= h[i][k] * y[k];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            for (u, vk) in update.iter_mut().zip(vi) {
                *u += yi * vk;
            }
        }
        precond.apply(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        if used == 0 {
            return Err(Error::Stagnation {
                iterations,
                residual: rel,
                history,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pattern_and_lookup() {
        let mut m = CsrMatrix::from_pattern(3, &[vec![0, 2], vec![1], vec![0, 2]]);
        m.add(0, 2, 1.5);
        m.add(0, 2, 0.5);
        assert_eq!(m.get(0, 2), 2.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert!(m.pattern_is_symmetric());
        assert_eq!(m.nnz(), 5);
    }

    #[test]
    #[should_panic]
    fn add_outside_pattern_panics() {
        let mut m = CsrMatrix::identity(2);
        m.add(0, 1, 1.0);
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        let n = 6;
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match (i as i64 - j as i64).abs() {
                        0 => 4.0,
                        1 => -1.0,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        let a = CsrMatrix::from_dense(&dense);
        let ilu = Ilu0::new(&a).unwrap();
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let b = a.mul_vec(&x);
        let mut y = vec![0.0; n];
        ilu.apply(&b, &mut y);
        for (yi, xi) in y.iter().zip(&x) {
            assert!((yi - xi).abs() < 1e-13);
        }
    }

    #[test]
    fn gmres_on_random_dominant_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100;
        let mut dense = vec![vec![0.0; n]; n];
        for (i, row) in dense.iter_mut().enumerate() {
            for _ in 0..5 {
                let j = rng.gen_range(0..n);
                row[j] += rng.gen_range(-1.0..1.0);
            }
            let off: f64 = row.iter().map(|v: &f64| v.abs()).sum();
            row[i] = off + 1.0;
        }
        let a = CsrMatrix::from_dense(&dense);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, hist) = gmres(&a, &b, None, 30, 1e-12, 500).unwrap();
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect();
        assert!(norm2(&r) <= 1e-11 * norm2(&b));
        assert!(!hist.is_empty());
    }

    #[test]
    fn gmres_reports_stagnation() {
        // Singular-ish: ILU works but iteration budget is too small.
        let dense = vec![vec![1.0, 2.0, 0.0], vec![3.0, 1.0, 1.0], vec![0.0, 1.0, 5.0]];
        let a = CsrMatrix::from_dense(&dense);
        let err = gmres(&a, &[1.0, 0.0, 0.0], None, 1, 1e-30, 0).unwrap_err();
        assert!(matches!(err, Error::Stagnation { .. }));
    }
}
