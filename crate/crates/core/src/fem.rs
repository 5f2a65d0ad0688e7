//! Piecewise-linear Galerkin discretization of `-div(k grad u) = 0` with
//! Dirichlet data `u = 1` on `x1 = 0`, `u = 0` on `x1 = 1` and natural
//! (zero-flux) conditions elsewhere.
//!
//! The coefficient is taken as one value per element (its value at the
//! centroid). Dirichlet rows and columns are eliminated and the lifting is
//! moved to the right-hand side, which keeps the reduced system SPD.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::cost::OpCount;
use crate::error::{Error, Result};
use crate::mesh::{HierMesh, MeshLevel, VertexParent};
use crate::random_field::{Dimension, FieldRealization};
use crate::sparse::{pcg, relative_residual, CsrMatrix, CsrPattern, EnvelopeCholesky, EnvelopeSymbolic};

/// Relative residual every accepted solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Nodal values of a piecewise-linear function on one level.
#[derive(Debug, Clone, PartialEq)]
pub struct FemSolution {
    pub level: usize,
    pub values: Vec<f64>,
}

impl FemSolution {
    pub fn new(level: usize, values: Vec<f64>) -> Self {
        FemSolution { level, values }
    }

    pub fn zeros(level: usize, n: usize) -> Self {
        FemSolution { level, values: vec![0.0; n] }
    }

    pub fn sub(&self, other: &FemSolution) -> Result<FemSolution> {
        check_level(self.level, other.level)?;
        Ok(FemSolution {
            level: self.level,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }
}

fn check_level(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LevelMismatch { expected, found });
    }
    Ok(())
}

/// Assembled system for one coefficient realization on one level.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub level: usize,
    /// Stiffness matrix over all vertices, before elimination.
    pub full: CsrMatrix,
    /// Stiffness restricted to the free vertices.
    pub reduced: CsrMatrix,
    /// Right-hand side of the reduced system (minus the Dirichlet lifting).
    pub rhs: Vec<f64>,
    pub ops: OpCount,
}

/// Level-wise data shared by every realization: sparsity, local element
/// matrices, the H1 Gram matrix and the ordering of the reduced system.
#[derive(Debug, Clone)]
pub struct FemSpace {
    pub level: usize,
    pub mesh: Arc<MeshLevel>,
    pattern: Arc<CsrPattern>,
    /// For each element, the storage slots of its local matrix (row major).
    element_slots: Vec<usize>,
    /// Stiffness of each element for `k = 1`, row major.
    unit_stiffness: Vec<f64>,
    /// H1 Gram matrix (exact P1 mass plus stiffness with `k = 1`).
    pub gram: CsrMatrix,
    /// Index into the reduced system, or `usize::MAX` for Dirichlet vertices.
    free_index: Vec<usize>,
    free: Vec<usize>,
    dirichlet_values: Vec<Option<f64>>,
    reduced_pattern: Arc<CsrPattern>,
    /// Full storage slot -> reduced storage slot (or `usize::MAX`).
    reduced_slot: Vec<usize>,
    pub symbolic: Arc<EnvelopeSymbolic>,
}

impl FemSpace {
    pub fn new(level: usize, mesh: Arc<MeshLevel>) -> Result<Self> {
        let n = mesh.num_vertices();
        let nl = mesh.dimension.as_usize() + 1;
        let ne = mesh.num_elements();
        let mut entries = Vec::with_capacity(ne * nl * nl);
        for e in 0..ne {
            let c = mesh.element(e);
            for &a in c {
                for &b in c {
                    entries.push((a, b));
                }
            }
        }
        let pattern = Arc::new(CsrPattern::from_entries(n, entries));
        let mut element_slots = Vec::with_capacity(ne * nl * nl);
        let mut unit_stiffness = Vec::with_capacity(ne * nl * nl);
        let mut gram = CsrMatrix::zeros(pattern.clone());
        for e in 0..ne {
            let c = mesh.element(e);
            let (stiff, mass) = local_matrices(&mesh, e);
            for a in 0..nl {
                for b in 0..nl {
                    let slot = pattern.position(c[a], c[b]).unwrap();
                    element_slots.push(slot);
                    unit_stiffness.push(stiff[a * nl + b]);
                    gram.values[slot] += stiff[a * nl + b] + mass[a * nl + b];
                }
            }
        }

        let dirichlet_values: Vec<Option<f64>> = mesh.markers.iter().map(|m| m.dirichlet_value()).collect();
        if dirichlet_values.iter().all(Option::is_none) {
            return Err(Error::invalid("mesh", "no Dirichlet vertices; the problem is singular"));
        }
        let mut free_index = vec![usize::MAX; n];
        let mut free = Vec::new();
        for i in 0..n {
            if dirichlet_values[i].is_none() {
                free_index[i] = free.len();
                free.push(i);
            }
        }
        let reduced_entries = free.iter().flat_map(|&i| {
            pattern
                .row(i)
                .iter()
                .filter(|&&j| free_index[j] != usize::MAX)
                .map(|&j| (free_index[i], free_index[j]))
                .collect::<Vec<_>>()
        });
        let reduced_pattern = Arc::new(CsrPattern::from_entries(free.len(), reduced_entries));
        let mut reduced_slot = vec![usize::MAX; pattern.nnz()];
        for i in 0..n {
            if free_index[i] == usize::MAX {
                continue;
            }
            for (k, &j) in pattern.row_range(i).zip(pattern.row(i)) {
                if free_index[j] != usize::MAX {
                    reduced_slot[k] = reduced_pattern.position(free_index[i], free_index[j]).unwrap();
                }
            }
        }
        let symbolic = Arc::new(EnvelopeSymbolic::new(&reduced_pattern));
        Ok(FemSpace {
            level,
            mesh,
            pattern,
            element_slots,
            unit_stiffness,
            gram,
            free_index,
            free,
            dirichlet_values,
            reduced_pattern,
            reduced_slot,
            symbolic,
        })
    }

    pub fn dofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn free_dofs(&self) -> usize {
        self.free.len()
    }

    pub fn dimension(&self) -> Dimension {
        self.mesh.dimension
    }

    /// Assembles the system for element-wise coefficient values `k`.
    pub fn assemble_with_k(&self, k: &[f64]) -> Result<LinearSystem> {
        let ne = self.mesh.num_elements();
        if k.len() != ne {
            return Err(Error::DimensionMismatch { expected: ne, found: k.len() });
        }
        let nl2 = self.element_slots.len() / ne.max(1);
        let mut full = CsrMatrix::zeros(self.pattern.clone());
        for e in 0..ne {
            let ke = k[e];
            if !(ke > 0.0) || !ke.is_finite() {
                return Err(Error::NonPositiveCoefficient { element: e, value: ke });
            }
            for s in e * nl2..(e + 1) * nl2 {
                full.values[self.element_slots[s]] += ke * self.unit_stiffness[s];
            }
        }
        let mut reduced = CsrMatrix::zeros(self.reduced_pattern.clone());
        let mut rhs = vec![0.0; self.free.len()];
        let mut lifting_flops = 0u64;
        for (r, &i) in self.free.iter().enumerate() {
            for (slot, &j) in self.pattern.row_range(i).zip(self.pattern.row(i)) {
                let rs = self.reduced_slot[slot];
                if rs != usize::MAX {
                    reduced.values[rs] = full.values[slot];
                } else if let Some(g) = self.dirichlet_values[j] {
                    rhs[r] -= full.values[slot] * g;
                    lifting_flops += 2;
                }
            }
        }
        let ops = OpCount { assembly: 2 * (ne * nl2) as u64 + lifting_flops, ..OpCount::default() };
        Ok(LinearSystem { level: self.level, full, reduced, rhs, ops })
    }

    /// Assembles with `k = exp(log k)` taken from a realization evaluated at
    /// the element centroids of this level.
    pub fn assemble(&self, field: &FieldRealization) -> Result<LinearSystem> {
        let k: Vec<f64> = field.k().collect();
        self.assemble_with_k(&k)
    }

    /// Solves by envelope Cholesky, falling back to preconditioned CG if the
    /// factorization breaks down. `sample` is only used in diagnostics.
    pub fn solve(&self, system: &LinearSystem, sample: u64) -> Result<(FemSolution, OpCount)> {
        check_level(self.level, system.level)?;
        let mut ops = OpCount { solves: 1, ..OpCount::default() };
        let x = match EnvelopeCholesky::factor(self.symbolic.clone(), &system.reduced) {
            Ok(chol) => {
                ops.factorization += self.symbolic.factor_flops;
                ops.factorizations += 1;
                ops.solve += self.symbolic.solve_flops;
                chol.solve(&system.rhs)
            }
            Err(_) => {
                let it = pcg(&system.reduced, &system.rhs, 1e-12, 10 * self.free.len() + 100)
                    .map_err(|e| Error::SolverFailure { level: self.level, sample, reason: alloc::format!("{e}") })?;
                ops.solve += it.flops;
                it.x
            }
        };
        let res = relative_residual(&system.reduced, &x, &system.rhs);
        if !(res <= SOLVE_TOLERANCE) {
            return Err(Error::SolverFailure {
                level: self.level,
                sample,
                reason: alloc::format!("relative residual {res:e} exceeds {SOLVE_TOLERANCE:e}"),
            });
        }
        let mut values = vec![0.0; self.dofs()];
        for (i, g) in self.dirichlet_values.iter().enumerate() {
            values[i] = match g {
                Some(g) => *g,
                None => x[self.free_index[i]],
            };
        }
        Ok((FemSolution::new(self.level, values), ops))
    }

    /// `<u, v> = int grad u . grad v + u v`, exact for P1.
    pub fn h1_inner(&self, u: &FemSolution, v: &FemSolution) -> Result<f64> {
        check_level(self.level, u.level)?;
        check_level(self.level, v.level)?;
        Ok(self.gram.bilinear(&u.values, &v.values))
    }

    pub fn h1_norm(&self, u: &FemSolution) -> Result<f64> {
        Ok(libm::sqrt(self.h1_inner(u, u)?.max(0.0)))
    }

    pub fn h1_inner_flops(&self) -> u64 {
        self.gram.mul_vec_flops() + 2 * self.dofs() as u64
    }

    /// `int_D u dx`, exact for P1.
    pub fn integral(&self, values: &[f64]) -> f64 {
        let nl = self.mesh.dimension.as_usize() + 1;
        (0..self.mesh.num_elements())
            .map(|e| {
                let s: f64 = self.mesh.element(e).iter().map(|&i| values[i]).sum();
                self.mesh.measure(e) * s / nl as f64
            })
            .sum()
    }

    pub fn is_free(&self, i: usize) -> bool {
        self.free_index[i] != usize::MAX
    }
}

/// Unit stiffness and exact P1 mass matrices of element `e`, row major.
fn local_matrices(mesh: &MeshLevel, e: usize) -> (Vec<f64>, Vec<f64>) {
    match mesh.dimension {
        Dimension::One => {
            let h = mesh.measure(e);
            (vec![1.0 / h, -1.0 / h, -1.0 / h, 1.0 / h], vec![h / 3.0, h / 6.0, h / 6.0, h / 3.0])
        }
        Dimension::Two => {
            let t = mesh.triangle(e);
            let g = t.barycentric_gradients();
            let mut s = vec![0.0; 9];
            let mut m = vec![0.0; 9];
            for a in 0..3 {
                for b in 0..3 {
                    s[a * 3 + b] = t.area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    m[a * 3 + b] = t.area / 12.0 * if a == b { 2.0 } else { 1.0 };
                }
            }
            (s, m)
        }
    }
}

/// FE spaces on every level of a mesh hierarchy.
#[derive(Debug, Clone)]
pub struct FemHierarchy {
    pub spaces: Vec<FemSpace>,
}

impl FemHierarchy {
    pub fn new(mesh: &HierMesh) -> Result<Self> {
        let spaces = mesh
            .levels
            .iter()
            .enumerate()
            .map(|(l, m)| FemSpace::new(l, Arc::new(m.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(FemHierarchy { spaces })
    }

    pub fn len(&self) -> usize {
        self.spaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spaces.is_empty()
    }

    pub fn space(&self, l: usize) -> &FemSpace {
        &self.spaces[l]
    }

    /// Exact P1 prolongation from level `fine - 1` to level `fine`.
    pub fn prolong_once(&self, fine: usize, coarse_values: &[f64]) -> Result<Vec<f64>> {
        if fine == 0 || fine >= self.spaces.len() {
            return Err(Error::NotNested { coarse: fine.wrapping_sub(1), fine });
        }
        let parent = self.spaces[fine].mesh.parent.as_ref().ok_or(Error::NotNested { coarse: fine - 1, fine })?;
        if coarse_values.len() != self.spaces[fine - 1].dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.spaces[fine - 1].dofs(),
                found: coarse_values.len(),
            });
        }
        Ok(prolong_values(&parent.vertices, coarse_values))
    }

    /// Prolongs `u` to level `to >= u.level`.
    pub fn prolong(&self, u: &FemSolution, to: usize) -> Result<FemSolution> {
        if to < u.level {
            return Err(Error::NotNested { coarse: to, fine: u.level });
        }
        let mut values = u.values.clone();
        for l in u.level + 1..=to {
            values = self.prolong_once(l, &values)?;
        }
        Ok(FemSolution::new(to, values))
    }

    /// H1 distance between `u` and a reference on a level at least as fine.
    pub fn h1_error(&self, u: &FemSolution, reference: &FemSolution) -> Result<f64> {
        let p = self.prolong(u, reference.level)?;
        let d = p.sub(reference)?;
        self.spaces[reference.level].h1_norm(&d)
    }
}

/// Applies a parent map to coarse nodal values.
pub fn prolong_values(parents: &[VertexParent], coarse: &[f64]) -> Vec<f64> {
    parents
        .iter()
        .map(|p| match *p {
            VertexParent::Coarse(i) => coarse[i],
            VertexParent::Midpoint(i, j) => 0.5 * (coarse[i] + coarse[j]),
        })
        .collect()
}
