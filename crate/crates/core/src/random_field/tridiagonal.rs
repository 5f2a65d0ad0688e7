//! Lowest eigenpairs of a real symmetric tridiagonal matrix by Sturm-sequence
//! bisection and inverse iteration.

use alloc::vec;
use alloc::vec::Vec;

/// Symmetric tridiagonal matrix: `diag[i]`, and `off[i]` couples `i` and `i + 1`.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1));
        SymTridiagonal { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly less than `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE;
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let e2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            q = self.diag[i] - x - if i > 0 { e2 / q } else { 0.0 };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based), to full working precision.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs());
        while hi - lo > 2.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Unit eigenvector for the (already converged) eigenvalue `mu`.
    fn inverse_iteration(&self, mu: f64, start: &mut [f64]) {
        let n = self.len();
        let norm = self.one_norm();
        // Perturb the shift slightly so the shifted matrix is not exactly singular.
        let shift = mu + 4.0 * f64::EPSILON * norm;
        let lu = ShiftedLu::new(self, shift, norm);
        for _ in 0..3 {
            lu.solve(start);
            let s = libm::sqrt(start.iter().map(|x| x * x).sum::<f64>());
            start.iter_mut().for_each(|x| *x /= s);
        }
        debug_assert_eq!(start.len(), n);
    }

    pub fn one_norm(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                self.diag[i].abs()
                    + if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { self.off[i].abs() } else { 0.0 }
            })
            .fold(0.0, f64::max)
    }

    /// The `count` smallest eigenvalues in increasing order with orthonormal
    /// eigenvectors. Vectors belonging to eigenvalues closer than `1e-3` of
    /// the matrix norm are reorthogonalized against each other.
    pub fn lowest_eigenpairs(&self, count: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.len();
        assert!(count <= n);
        let values: Vec<f64> = (0..count).map(|k| self.eigenvalue(k)).collect();
        let cluster_tol = 1e-3 * self.one_norm();
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
        let mut cluster_start = 0;
        for (k, &mu) in values.iter().enumerate() {
            if k > 0 && mu - values[k - 1] > cluster_tol {
                cluster_start = k;
            }
            // Deterministic, non-degenerate start vector.
            let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * libm::sin(0.7 * i as f64 + 1.3 * k as f64)).collect();
            self.inverse_iteration(mu, &mut v);
            if k > cluster_start {
                for _ in 0..2 {
                    for prev in &vectors[cluster_start..k] {
                        let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
                        v.iter_mut().zip(prev).for_each(|(a, b)| *a -= dot * b);
                    }
                    let s = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
                    v.iter_mut().for_each(|x| *x /= s);
                }
            }
            vectors.push(v);
        }
        (values, vectors)
    }
}

/// LU factorization with partial pivoting of `T - shift I`.
struct ShiftedLu {
    // Row i of U has entries at columns i, i+1, i+2.
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn new(t: &SymTridiagonal, shift: f64, norm: f64) -> Self {
        let n = t.len();
        let tiny = f64::EPSILON * norm.max(f64::MIN_POSITIVE);
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        // Current row being reduced: (a, b, c) at columns (i, i+1, i+2).
        let mut a = t.diag.first().copied().unwrap_or(0.0) - shift;
        let mut b = if n > 1 { t.off[0] } else { 0.0 };
        let mut c = 0.0;
        for i in 0..n {
            if i + 1 < n {
                let sub = t.off[i];
                let next_diag = t.diag[i + 1] - shift;
                let next_sup = if i + 2 < n { t.off[i + 1] } else { 0.0 };
                if sub.abs() > a.abs() {
                    // Swap current row with row i+1.
                    swapped[i] = true;
                    let m = a / sub;
                    u0[i] = sub;
                    u1[i] = next_diag;
                    u2[i] = next_sup;
                    mult[i] = m;
                    a = b - m * next_diag;
                    b = c - m * next_sup;
                    c = 0.0;
                } else {
                    let a_safe = if a == 0.0 { tiny } else { a };
                    let m = sub / a_safe;
                    u0[i] = a_safe;
                    u1[i] = b;
                    u2[i] = c;
                    mult[i] = m;
                    a = next_diag - m * b;
                    b = next_sup - m * c;
                    c = 0.0;
                }
            } else {
                u0[i] = if a == 0.0 { tiny } else { a };
                u1[i] = 0.0;
                u2[i] = 0.0;
            }
        }
        ShiftedLu { u0, u1, u2, mult, swapped }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.mult[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(t: &SymTridiagonal) -> Vec<Vec<f64>> {
        let n = t.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = t.diag[i];
            if i + 1 < n {
                a[i][i + 1] = t.off[i];
                a[i + 1][i] = t.off[i];
            }
        }
        a
    }

    #[test]
    fn second_difference_matrix() {
        // Eigenvalues of tridiag(-1, 2, -1) of size n: 2 - 2 cos(k pi / (n + 1)).
        let n = 50;
        let t = SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]);
        let (vals, vecs) = t.lowest_eigenpairs(10);
        let a = dense(&t);
        for (k, (&mu, v)) in vals.iter().zip(&vecs).enumerate() {
            let exact = 2.0 - 2.0 * libm::cos((k + 1) as f64 * core::f64::consts::PI / (n + 1) as f64);
            assert!((mu - exact).abs() < 1e-13, "{k}: {mu} vs {exact}");
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[i][j] * v[j]).sum();
                assert!((av - mu * v[i]).abs() < 1e-12);
            }
        }
        for i in 0..vecs.len() {
            for j in 0..vecs.len() {
                let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn handles_zero_pivots_and_singletons() {
        let t = SymTridiagonal::new(vec![3.0], vec![]);
        let (vals, vecs) = t.lowest_eigenpairs(1);
        assert!((vals[0] - 3.0).abs() < 1e-15);
        assert!((vecs[0][0].abs() - 1.0).abs() < 1e-15);

        let t = SymTridiagonal::new(vec![0.0, 0.0], vec![1.0]);
        let (vals, _) = t.lowest_eigenpairs(2);
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
    }
}
