//! Level transfer `P_l: V_l -> V_{l-1}`, the detail `(I - P_l) u_l` and the
//! sub-triangle calculus used to bound the variance of details.
//!
//! Two transfers are available. [`TransferMode::Interpolation`] keeps the
//! nodal values at the coarse vertices. [`TransferMode::H1`] is the
//! H1-orthogonal projection onto the full coarse P1 space, computed with a
//! coarse Gram matrix that is factored once per level.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::{prolong_values, FemHierarchy, FemSolution};
use crate::mesh::{MeshLevel, TriangleGeometry, VertexParent};
use crate::random_field::Dimension;
use crate::sparse::{EnvelopeCholesky, EnvelopeSymbolic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TransferMode {
    #[default]
    Interpolation,
    H1,
}

impl fmt::Display for TransferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferMode::Interpolation => "interp",
            TransferMode::H1 => "h1",
        })
    }
}

impl FromStr for TransferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interp" | "interpolation" => Ok(TransferMode::Interpolation),
            "h1" => Ok(TransferMode::H1),
            _ => Err(Error::invalid("transfer", alloc::format!("unknown mode `{s}`"))),
        }
    }
}

/// Transfer from level `fine` to level `fine - 1`.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub fine: usize,
    pub mode: TransferMode,
    parents: Arc<[VertexParent]>,
    /// Fine index of every coarse vertex.
    coarse_positions: Vec<usize>,
    coarse_dofs: usize,
    h1: Option<H1Projector>,
}

#[derive(Debug, Clone)]
struct H1Projector {
    fine_gram: crate::sparse::CsrMatrix,
    coarse_gram: EnvelopeCholesky,
}

impl Transfer {
    pub fn new(hier: &FemHierarchy, fine: usize, mode: TransferMode) -> Result<Self> {
        if fine == 0 || fine >= hier.len() {
            return Err(Error::NotNested { coarse: fine.wrapping_sub(1), fine });
        }
        let fs = hier.space(fine);
        let cs = hier.space(fine - 1);
        let parent = fs.mesh.parent.as_ref().ok_or(Error::NotNested { coarse: fine - 1, fine })?;
        let mut coarse_positions = vec![usize::MAX; cs.dofs()];
        for (f, p) in parent.vertices.iter().enumerate() {
            if let VertexParent::Coarse(c) = *p {
                if c >= coarse_positions.len() {
                    return Err(Error::NotNested { coarse: fine - 1, fine });
                }
                coarse_positions[c] = f;
            }
        }
        if coarse_positions.contains(&usize::MAX) {
            return Err(Error::NotNested { coarse: fine - 1, fine });
        }
        let h1 = match mode {
            TransferMode::Interpolation => None,
            TransferMode::H1 => {
                let symbolic = Arc::new(EnvelopeSymbolic::new(&cs.gram.pattern));
                Some(H1Projector {
                    fine_gram: fs.gram.clone(),
                    coarse_gram: EnvelopeCholesky::factor(symbolic, &cs.gram)?,
                })
            }
        };
        Ok(Transfer {
            fine,
            mode,
            parents: parent.vertices.clone().into(),
            coarse_positions,
            coarse_dofs: cs.dofs(),
            h1,
        })
    }

    fn check(&self, u: &FemSolution) -> Result<()> {
        if u.level != self.fine {
            return Err(Error::LevelMismatch { expected: self.fine, found: u.level });
        }
        if u.values.len() != self.parents.len() {
            return Err(Error::DimensionMismatch { expected: self.parents.len(), found: u.values.len() });
        }
        Ok(())
    }

    /// `P_l u` on the coarse level.
    pub fn apply(&self, u: &FemSolution) -> Result<FemSolution> {
        self.check(u)?;
        let values = match &self.h1 {
            None => self.coarse_positions.iter().map(|&f| u.values[f]).collect(),
            // Interpolant plus the projected remainder; exact on V_{l-1}.
            Some(p) => {
                let c: Vec<f64> = self.coarse_positions.iter().map(|&f| u.values[f]).collect();
                let pc = prolong_values(&self.parents, &c);
                let rest: Vec<f64> = u.values.iter().zip(&pc).map(|(a, b)| a - b).collect();
                let b = self.restrict(&p.fine_gram.mul_vec(&rest));
                c.iter().zip(p.coarse_gram.solve(&b)).map(|(a, d)| a + d).collect()
            }
        };
        Ok(FemSolution::new(self.fine - 1, values))
    }

    /// Transpose of prolongation applied to a fine-level vector.
    pub fn restrict(&self, r: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.coarse_dofs];
        for (f, p) in self.parents.iter().enumerate() {
            match *p {
                VertexParent::Coarse(i) => b[i] += r[f],
                VertexParent::Midpoint(i, j) => {
                    b[i] += 0.5 * r[f];
                    b[j] += 0.5 * r[f];
                }
            }
        }
        b
    }

    pub fn prolong(&self, coarse: &FemSolution) -> Result<FemSolution> {
        if coarse.level + 1 != self.fine {
            return Err(Error::LevelMismatch { expected: self.fine - 1, found: coarse.level });
        }
        if coarse.values.len() != self.coarse_dofs {
            return Err(Error::DimensionMismatch { expected: self.coarse_dofs, found: coarse.values.len() });
        }
        Ok(FemSolution::new(self.fine, prolong_values(&self.parents, &coarse.values)))
    }

    /// `(I - P_l) u` on the fine level.
    pub fn detail(&self, u: &FemSolution) -> Result<FemSolution> {
        let p = self.prolong(&self.apply(u)?)?;
        u.sub(&p)
    }

    /// Operation estimate of one [`Transfer::detail`] call.
    pub fn detail_flops(&self) -> u64 {
        let nf = self.parents.len() as u64;
        let midpoints = self.parents.iter().filter(|p| matches!(p, VertexParent::Midpoint(..))).count() as u64;
        // Prolongation (two flops per midpoint) plus the difference.
        let base = 2 * midpoints + nf;
        match &self.h1 {
            None => base,
            Some(p) => {
                let correction = 2 * midpoints + nf + p.fine_gram.mul_vec_flops() + 2 * midpoints;
                base + correction + p.coarse_gram.symbolic().solve_flops + self.coarse_dofs as u64
            }
        }
    }

    pub fn coarse_positions(&self) -> &[usize] {
        &self.coarse_positions
    }
}

/// Transfers for every level pair of a hierarchy; index `l` holds the
/// transfer from `l` to `l - 1` (index 0 is empty).
#[derive(Debug, Clone)]
pub struct TransferSet {
    pub mode: TransferMode,
    transfers: Vec<Option<Transfer>>,
}

impl TransferSet {
    pub fn new(hier: &FemHierarchy, mode: TransferMode) -> Result<Self> {
        let mut transfers = vec![None];
        for l in 1..hier.len() {
            transfers.push(Some(Transfer::new(hier, l, mode)?));
        }
        Ok(TransferSet { mode, transfers })
    }

    pub fn get(&self, fine: usize) -> Result<&Transfer> {
        self.transfers.get(fine).and_then(Option::as_ref).ok_or(Error::NotNested { coarse: fine.wrapping_sub(1), fine })
    }
}

/// Nodal interpolation of `u` onto the next coarser level.
pub fn interpolate_to_coarse(hier: &FemHierarchy, u: &FemSolution) -> Result<FemSolution> {
    Transfer::new(hier, u.level, TransferMode::Interpolation)?.apply(u)
}

/// H1-orthogonal projection of `u` onto the next coarser level.
pub fn h1_project_to_coarse(hier: &FemHierarchy, u: &FemSolution) -> Result<FemSolution> {
    Transfer::new(hier, u.level, TransferMode::H1)?.apply(u)
}

/// `(I - P_l) u` with a one-off transfer.
pub fn detail(hier: &FemHierarchy, u: &FemSolution, mode: TransferMode) -> Result<FemSolution> {
    Transfer::new(hier, u.level, mode)?.detail(u)
}

/// Index of the sub-triangle containing the point with barycentric
/// coordinates `w`: `j < 3` for the corner triangle at `v_j`, 3 for the
/// middle one. Points on shared edges go to the corner triangle.
pub fn subtriangle_index(w: [f64; 3]) -> usize {
    (0..3).find(|&j| w[j] >= 0.5).unwrap_or(3)
}

/// The weight table `w_ij` of the coarse hats restricted to sub-triangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubTriangleWeights {
    /// `table[i][j]`, coarse vertex `i`, sub-triangle `j`.
    pub table: [[f64; 4]; 3],
}

impl SubTriangleWeights {
    pub fn at(w: [f64; 3]) -> Self {
        let j = subtriangle_index(w);
        let mut table = [[0.0; 4]; 3];
        for i in 0..3 {
            table[i][j] = if j < 3 { 2.0 * w[i] - if i == j { 1.0 } else { 0.0 } } else { 1.0 - 2.0 * w[i] };
        }
        SubTriangleWeights { table }
    }

    /// Value of the P1 function on the refined triangle that vanishes at the
    /// coarse vertices and equals `y[i]` at midpoint `m_i`.
    pub fn midpoint_function(w: [f64; 3], y: [f64; 3]) -> f64 {
        match subtriangle_index(w) {
            3 => (0..3).map(|i| y[i] * (1.0 - 2.0 * w[i])).sum(),
            i => {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                2.0 * (y[j] * w[k] + y[k] * w[j])
            }
        }
    }
}

/// `int_{K_i} v^2` for `i = 1..4` and their sum, where `v` vanishes at the
/// vertices of `K` and takes the values `y` at the edge midpoints.
pub fn subtriangle_square_integral(y: [f64; 3], k: &TriangleGeometry) -> Result<([f64; 4], f64)> {
    check_triangle(k)?;
    let c = k.area / 24.0;
    let mut parts = [0.0; 4];
    for i in 0..3 {
        let (yj, yk) = (y[(i + 1) % 3], y[(i + 2) % 3]);
        parts[i] = c * (yj * yj + yk * yk + yj * yk);
    }
    parts[3] = c * (y.iter().map(|v| v * v).sum::<f64>() + y[0] * y[1] + y[0] * y[2] + y[1] * y[2]);
    Ok((parts, parts.iter().sum()))
}

/// `int_K |grad v|^2` for the same `v`, from edge lengths and angles.
pub fn subtriangle_gradient_integral(y: [f64; 3], k: &TriangleGeometry) -> Result<f64> {
    check_triangle(k)?;
    let s = 4.0 * k.area * k.area;
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        g[i][i] = k.edges[i] * k.edges[i] / s;
        let (j, l) = ((i + 1) % 3, (i + 2) % 3);
        g[j][l] = -k.edges[j] * k.edges[l] * libm::cos(k.angles[i]) / s;
        g[l][j] = g[j][l];
    }
    let quad = |a: [f64; 3]| -> f64 { (0..3).map(|p| (0..3).map(|q| a[p] * g[p][q] * a[q]).sum::<f64>()).sum() };
    let sub = k.area / 4.0;
    let mut total = 0.0;
    for i in 0..3 {
        let (j, l) = ((i + 1) % 3, (i + 2) % 3);
        let mut a = [0.0; 3];
        a[l] = 2.0 * y[j];
        a[j] = 2.0 * y[l];
        total += sub * quad(a);
    }
    total += sub * quad([-2.0 * y[0], -2.0 * y[1], -2.0 * y[2]]);
    Ok(total)
}

fn check_triangle(k: &TriangleGeometry) -> Result<()> {
    if !(k.area > 0.0) || !k.area.is_finite() {
        return Err(Error::DegenerateElement { element: 0, measure: k.area });
    }
    Ok(())
}

/// Constant of the detail-variance bound for a coarse mesh.
///
/// On triangles `max(5/48, 6 r)` with `r` the worst diameter to incircle
/// ratio; on intervals `4 / h_min`.
pub fn lemma_constant(coarse: &MeshLevel) -> Result<f64> {
    match coarse.dimension {
        Dimension::Two => Ok((5.0 / 48.0f64).max(6.0 * crate::mesh::regularity_check(coarse)?)),
        Dimension::One => {
            let hmin = (0..coarse.num_elements()).map(|e| coarse.measure(e)).fold(f64::INFINITY, f64::min);
            if !(hmin > 0.0) {
                return Err(Error::DegenerateElement { element: 0, measure: hmin });
            }
            Ok(4.0 / hmin)
        }
    }
}

/// Both sides of the detail-variance bound
/// `Var[u_l - P_l u_l] <= C (diam^2 + 1) sum_K sum_i Var[(u_l - P_l u_l)(m_i)]`
/// for an ensemble of interpolation details on level `fine`.
pub fn midpoint_variance_bound(
    hier: &FemHierarchy,
    fine: usize,
    details: &[FemSolution],
    c_reg: f64,
) -> Result<(f64, f64)> {
    if details.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: details.len() });
    }
    if fine == 0 || fine >= hier.len() {
        return Err(Error::NotNested { coarse: fine.wrapping_sub(1), fine });
    }
    let fs = hier.space(fine);
    let coarse = &hier.space(fine - 1).mesh;
    let n = fs.dofs();
    for d in details {
        if d.level != fine {
            return Err(Error::LevelMismatch { expected: fine, found: d.level });
        }
        if d.values.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: d.values.len() });
        }
    }
    let parent = fs.mesh.parent.as_ref().ok_or(Error::NotNested { coarse: fine - 1, fine })?;
    let midpoint: BTreeMap<(usize, usize), usize> = parent
        .vertices
        .iter()
        .enumerate()
        .filter_map(|(f, p)| match *p {
            VertexParent::Midpoint(a, b) => Some(((a.min(b), a.max(b)), f)),
            VertexParent::Coarse(_) => None,
        })
        .collect();

    let count = details.len() as f64;
    let mut mean = vec![0.0; n];
    for (k, d) in details.iter().enumerate() {
        for (m, v) in mean.iter_mut().zip(&d.values) {
            *m += (v - *m) / (k + 1) as f64;
        }
    }
    let mut lhs = 0.0;
    let mut pointwise = vec![0.0; n];
    for d in details {
        let dev: Vec<f64> = d.values.iter().zip(&mean).map(|(a, b)| a - b).collect();
        lhs += fs.gram.bilinear(&dev, &dev);
        for (p, v) in pointwise.iter_mut().zip(&dev) {
            *p += v * v;
        }
    }
    lhs /= count - 1.0;
    pointwise.iter_mut().for_each(|p| *p /= count - 1.0);

    let mut sum = 0.0;
    let mut diam = 0.0f64;
    for e in 0..coarse.num_elements() {
        diam = diam.max(coarse.diameter(e));
        let c = coarse.element(e);
        for a in 0..c.len() {
            for b in a + 1..c.len() {
                let key = (c[a].min(c[b]), c[a].max(c[b]));
                let f = *midpoint.get(&key).ok_or(Error::NotNested { coarse: fine - 1, fine })?;
                sum += pointwise[f];
            }
        }
    }
    Ok((lhs, c_reg * (diam * diam + 1.0) * sum))
}
