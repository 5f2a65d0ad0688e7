//! Sparse symmetric matrices and SPD solvers: an envelope (profile) Cholesky
//! factorization on a reverse Cuthill-McKee ordering, and a Jacobi
//! preconditioned conjugate gradient fallback.

use alloc::collections::VecDeque;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Compressed sparse row pattern with sorted column indices. Symmetric
/// matrices store both triangles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl CsrPattern {
    /// Builds the pattern holding every `(i, j)` in `entries` (duplicates merged).
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j) in entries {
            rows[i].push(j);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend_from_slice(&r);
            row_ptr.push(cols.len());
        }
        CsrPattern { n, row_ptr, cols }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_range(&self, i: usize) -> core::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Storage index of entry `(i, j)`.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        self.row(i).binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub pattern: Arc<CsrPattern>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.pattern.position(i, j).expect("entry outside the sparsity pattern");
        self.values[k] += v;
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.pattern.row_range(i);
        self.pattern.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.row(i).map(|(j, a)| a * x[j]).sum()).collect()
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n()).map(|i| x[i] * self.row(i).map(|(j, a)| a * y[j]).sum::<f64>()).sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n()).all(|i| self.row(i).all(|(j, a)| (a - self.get(j, i)).abs() <= tol))
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        CsrMatrix { pattern: self.pattern.clone(), values: self.values.iter().map(|v| alpha * v).collect() }
    }

    pub fn mul_vec_flops(&self) -> u64 {
        2 * self.pattern.nnz() as u64
    }
}

/// Reverse Cuthill-McKee ordering; returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(pattern: &CsrPattern) -> Vec<usize> {
    let n = pattern.n();
    let degree: Vec<usize> = (0..n).map(|i| pattern.row(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_levels = |start: usize| -> Vec<usize> {
        let mut level = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        level[start] = 0;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for &w in pattern.row(v) {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        level
    };
    while order.len() < n {
        // Pseudo-peripheral start: minimum degree node of the component,
        // then a few sweeps to the farthest minimum-degree node.
        let mut start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i)).unwrap();
        let mut ecc = 0;
        for _ in 0..4 {
            let lv = bfs_levels(start);
            let far = lv.iter().copied().filter(|&l| l != usize::MAX).max().unwrap_or(0);
            if far <= ecc {
                break;
            }
            ecc = far;
            start = (0..n).filter(|&i| lv[i] == far).min_by_key(|&i| (degree[i], i)).unwrap();
        }
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = pattern.row(v).iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Ordering and envelope structure of a symmetric matrix, reusable for any
/// matrix with the same pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSymbolic {
    pub perm: Vec<usize>,
    pub inverse: Vec<usize>,
    /// First stored column of each (permuted) row of the lower triangle.
    pub first: Vec<usize>,
    /// Start of each row in the packed storage; row `i` holds columns `first[i]..=i`.
    pub offset: Vec<usize>,
    pub factor_flops: u64,
    pub solve_flops: u64,
}

impl EnvelopeSymbolic {
    pub fn new(pattern: &CsrPattern) -> Self {
        Self::with_ordering(pattern, reverse_cuthill_mckee(pattern))
    }

    pub fn with_ordering(pattern: &CsrPattern, perm: Vec<usize>) -> Self {
        let n = pattern.n();
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let first: Vec<usize> = (0..n)
            .map(|i| pattern.row(perm[i]).iter().map(|&j| inverse[j]).filter(|&j| j <= i).min().unwrap_or(i))
            .collect();
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut factor_flops = 0u64;
        for i in 0..n {
            for j in first[i]..i {
                let len = j - first[i].max(first[j]);
                factor_flops += 2 * len as u64 + 1;
            }
            factor_flops += 2 * (i - first[i]) as u64 + 1;
        }
        let solve_flops = 2 * (2 * (offset[n] - n) + n) as u64;
        EnvelopeSymbolic { perm, inverse, first, offset, factor_flops, solve_flops }
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn storage(&self) -> usize {
        *self.offset.last().unwrap()
    }
}

/// Lower triangular Cholesky factor `L` with `P A P^T = L L^T`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    symbolic: Arc<EnvelopeSymbolic>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(symbolic: Arc<EnvelopeSymbolic>, a: &CsrMatrix) -> Result<Self> {
        let s = &*symbolic;
        let n = s.n();
        if a.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a.n() });
        }
        let mut l = vec![0.0; s.storage()];
        for i in 0..n {
            for (j_old, v) in a.row(s.perm[i]) {
                let j = s.inverse[j_old];
                if j <= i {
                    l[s.offset[i] + j - s.first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let (fi, oi) = (s.first[i], s.offset[i]);
            for j in fi..i {
                let (fj, oj) = (s.first[j], s.offset[j]);
                let k0 = fi.max(fj);
                let mut sum = l[oi + j - fi];
                for k in k0..j {
                    sum -= l[oi + k - fi] * l[oj + k - fj];
                }
                l[oi + j - fi] = sum / l[oj + j - fj];
            }
            let mut d = l[oi + i - fi];
            for k in fi..i {
                d -= l[oi + k - fi] * l[oi + k - fi];
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { row: s.perm[i], pivot: d });
            }
            l[oi + i - fi] = libm::sqrt(d);
        }
        Ok(EnvelopeCholesky { symbolic, values: l })
    }

    pub fn symbolic(&self) -> &EnvelopeSymbolic {
        &self.symbolic
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let s = &*self.symbolic;
        let n = s.n();
        let l = &self.values;
        let mut y: Vec<f64> = (0..n).map(|i| b[s.perm[i]]).collect();
        for i in 0..n {
            let (fi, oi) = (s.first[i], s.offset[i]);
            let mut sum = y[i];
            for k in fi..i {
                sum -= l[oi + k - fi] * y[k];
            }
            y[i] = sum / l[oi + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, oi) = (s.first[i], s.offset[i]);
            y[i] /= l[oi + i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= l[oi + k - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[s.perm[i]] = y[i];
        }
        x
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct IterativeSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub flops: u64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`.
pub fn pcg(a: &CsrMatrix, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<IterativeSolution> {
    let n = a.n();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::NotPositiveDefinite { row: i, pivot: diag[i] });
    }
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let b_norm = libm::sqrt(dot(b, b));
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(IterativeSolution { x, iterations: 0, relative_residual: 0.0, flops: 0 });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let per_iter = a.mul_vec_flops() + 12 * n as u64;
    let mut flops = 0;
    for it in 1..=max_iter {
        let ap = a.mul_vec(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        flops += per_iter;
        let res = libm::sqrt(dot(&r, &r)) / b_norm;
        if res <= rel_tol {
            return Ok(IterativeSolution { x, iterations: it, relative_residual: res, flops });
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Precondition(alloc::format!(
        "conjugate gradients did not reach relative residual {rel_tol} in {max_iter} iterations"
    )))
}

/// `||A x - b|| / ||b||` (or `||A x||` when `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    let bn: f64 = b.iter().map(|v| v * v).sum();
    if bn == 0.0 {
        libm::sqrt(r)
    } else {
        libm::sqrt(r / bn)
    }
}
