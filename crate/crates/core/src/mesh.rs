//! Nested simplicial meshes of `(0, 1)^d` built by midpoint refinement.
//!
//! Refinement keeps the coarse vertices at their indices and appends one
//! vertex per coarse edge, so a coarse vertex `i` is fine vertex `i` on every
//! finer level. Triangles are split into four as
//!
//! ```text
//!     K1 = (v1, m3, m2)   K2 = (m3, v2, m1)   K3 = (m2, m1, v3)   K4 = (m1, m2, m3)
//! ```
//!
//! with `m_k` the midpoint of the edge opposite `v_k`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::random_field::Dimension;

/// Boundary classification of a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Marker {
    Interior = 0,
    /// `x1 = 0`, where `u = 1`.
    DirichletLeft = 1,
    /// `x1 = 1`, where `u = 0`.
    DirichletRight = 2,
    /// Zero-flux boundary; needs no action in assembly.
    Neumann = 3,
}

impl Marker {
    pub fn from_u8(v: u8) -> Option<Marker> {
        match v {
            0 => Some(Marker::Interior),
            1 => Some(Marker::DirichletLeft),
            2 => Some(Marker::DirichletRight),
            3 => Some(Marker::Neumann),
            _ => None,
        }
    }

    pub fn dirichlet_value(self) -> Option<f64> {
        match self {
            Marker::DirichletLeft => Some(1.0),
            Marker::DirichletRight => Some(0.0),
            _ => None,
        }
    }

    /// Marker implied by the position of a vertex on the unit cube.
    pub fn classify(x: &[f64]) -> Marker {
        if x[0] == 0.0 {
            Marker::DirichletLeft
        } else if x[0] == 1.0 {
            Marker::DirichletRight
        } else if x.len() > 1 && (x[1] == 0.0 || x[1] == 1.0) {
            Marker::Neumann
        } else {
            Marker::Interior
        }
    }
}

/// Where a fine vertex came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexParent {
    Coarse(usize),
    Midpoint(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParentMap {
    pub vertices: Vec<VertexParent>,
    /// `(coarse element, local sub-element index)`; the index is `0..4` in 2D
    /// (K1..K4) and `0..2` in 1D.
    pub elements: Vec<(usize, u8)>,
}

/// One level of the mesh hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshLevel {
    pub dimension: Dimension,
    /// Coordinates; the second entry is zero in 1D.
    pub vertices: Vec<[f64; 2]>,
    /// Flat connectivity with `d + 1` vertices per element.
    pub cells: Vec<usize>,
    pub markers: Vec<Marker>,
    /// Largest element diameter.
    pub h: f64,
    /// Relation to the next coarser level, if any.
    pub parent: Option<ParentMap>,
}

impl MeshLevel {
    pub fn new(dimension: Dimension, vertices: Vec<[f64; 2]>, cells: Vec<usize>, markers: Vec<Marker>) -> Result<Self> {
        let nv = dimension.as_usize() + 1;
        if !cells.len().is_multiple_of(nv) {
            return Err(Error::invalid("cells", "connectivity length is not a multiple of d + 1"));
        }
        if markers.len() != vertices.len() {
            return Err(Error::DimensionMismatch { expected: vertices.len(), found: markers.len() });
        }
        if let Some(bad) = cells.iter().find(|&&c| c >= vertices.len()) {
            return Err(Error::invalid("cells", alloc::format!("vertex index {bad} out of range")));
        }
        let mut level = MeshLevel { dimension, vertices, cells, markers, h: 0.0, parent: None };
        let mut h = 0.0f64;
        for e in 0..level.num_elements() {
            let m = level.measure(e);
            if !(m > 0.0) {
                return Err(Error::DegenerateElement { element: e, measure: m });
            }
            h = h.max(level.diameter(e));
        }
        level.h = h;
        Ok(level)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.cells.len() / (self.dimension.as_usize() + 1)
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let nv = self.dimension.as_usize() + 1;
        &self.cells[e * nv..(e + 1) * nv]
    }

    /// Signed length (1D) or signed area (2D, positive when counterclockwise).
    pub fn signed_measure(&self, e: usize) -> f64 {
        let c = self.element(e);
        match self.dimension {
            Dimension::One => self.vertices[c[1]][0] - self.vertices[c[0]][0],
            Dimension::Two => {
                let [a, b, d] = [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]];
                0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]))
            }
        }
    }

    pub fn measure(&self, e: usize) -> f64 {
        self.signed_measure(e).abs()
    }

    pub fn diameter(&self, e: usize) -> f64 {
        match self.dimension {
            Dimension::One => self.measure(e),
            Dimension::Two => self.triangle(e).diameter(),
        }
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let c = self.element(e);
        let n = c.len() as f64;
        let mut p = [0.0; 2];
        for &v in c {
            p[0] += self.vertices[v][0];
            p[1] += self.vertices[v][1];
        }
        [p[0] / n, p[1] / n]
    }

    pub fn centroids(&self) -> Vec<[f64; 2]> {
        (0..self.num_elements()).map(|e| self.centroid(e)).collect()
    }

    pub fn triangle(&self, e: usize) -> TriangleGeometry {
        assert_eq!(self.dimension, Dimension::Two);
        let c = self.element(e);
        TriangleGeometry::new(self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]])
    }

    /// Unique edges as sorted vertex pairs, in increasing order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.edge_counts().into_keys().collect()
    }

    fn edge_counts(&self) -> BTreeMap<(usize, usize), usize> {
        let mut map = BTreeMap::new();
        for e in 0..self.num_elements() {
            let c = self.element(e);
            let pairs: &[(usize, usize)] = match self.dimension {
                Dimension::One => &[(0, 1)],
                Dimension::Two => &[(0, 1), (1, 2), (2, 0)],
            };
            for &(i, j) in pairs {
                let key = (c[i].min(c[j]), c[i].max(c[j]));
                *map.entry(key).or_insert(0) += 1;
            }
        }
        map
    }

    pub fn dirichlet_vertices(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.markers.iter().enumerate().filter_map(|(i, m)| m.dirichlet_value().map(|g| (i, g)))
    }
}

/// Uniform mesh of `[0, 1]` with spacing `h`.
pub fn uniform_mesh_1d(h: f64) -> Result<MeshLevel> {
    let inv = 1.0 / h;
    let n = libm::round(inv);
    if !(h > 0.0) || n < 1.0 || (inv - n).abs() > 1e-9 * n {
        return Err(Error::NonIntegerMeshSize { inverse: inv });
    }
    let n = n as usize;
    let vertices: Vec<[f64; 2]> = (0..=n).map(|i| [i as f64 / n as f64, 0.0]).collect();
    let cells: Vec<usize> = (0..n).flat_map(|i| [i, i + 1]).collect();
    let markers = vertices.iter().map(|p| Marker::classify(&p[..1])).collect();
    MeshLevel::new(Dimension::One, vertices, cells, markers)
}

/// Structured mesh of `[0, 1]^2` with `n x n` squares, each split into two
/// counterclockwise right triangles along its `(0,0)-(1,1)` diagonal.
pub fn structured_mesh_2d(n: usize) -> Result<MeshLevel> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one square per direction"));
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut cells = Vec::with_capacity(6 * n * n);
    for j in 0..n {
        for i in 0..n {
            cells.extend_from_slice(&[idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            cells.extend_from_slice(&[idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let markers = vertices.iter().map(|p| Marker::classify(p)).collect();
    MeshLevel::new(Dimension::Two, vertices, cells, markers)
}

/// Splits every element at its edge midpoints.
pub fn refine_midpoint(coarse: &MeshLevel) -> MeshLevel {
    let nc = coarse.num_vertices();
    let counts = coarse.edge_counts();
    let edge_index: BTreeMap<(usize, usize), usize> = counts.keys().enumerate().map(|(k, e)| (*e, nc + k)).collect();

    let mut vertices = coarse.vertices.clone();
    let mut markers = coarse.markers.clone();
    let mut parents: Vec<VertexParent> = (0..nc).map(VertexParent::Coarse).collect();
    for (&(a, b), &count) in &counts {
        let (pa, pb) = (coarse.vertices[a], coarse.vertices[b]);
        vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        parents.push(VertexParent::Midpoint(a, b));
        let (ma, mb) = (coarse.markers[a], coarse.markers[b]);
        let on_boundary = coarse.dimension == Dimension::Two && count == 1;
        markers.push(if !on_boundary {
            Marker::Interior
        } else if ma == mb && ma.dirichlet_value().is_some() {
            ma
        } else {
            Marker::Neumann
        });
    }

    let mid = |a: usize, b: usize| edge_index[&(a.min(b), a.max(b))];
    let mut cells = Vec::with_capacity(coarse.cells.len() * 4);
    let mut element_parents = Vec::new();
    for e in 0..coarse.num_elements() {
        let c = coarse.element(e);
        match coarse.dimension {
            Dimension::One => {
                let m = mid(c[0], c[1]);
                cells.extend_from_slice(&[c[0], m, m, c[1]]);
                element_parents.extend_from_slice(&[(e, 0), (e, 1)]);
            }
            Dimension::Two => {
                let (v1, v2, v3) = (c[0], c[1], c[2]);
                let (m1, m2, m3) = (mid(v2, v3), mid(v3, v1), mid(v1, v2));
                cells.extend_from_slice(&[v1, m3, m2, m3, v2, m1, m2, m1, v3, m1, m2, m3]);
                element_parents.extend_from_slice(&[(e, 0), (e, 1), (e, 2), (e, 3)]);
            }
        }
    }
    let mut fine = MeshLevel::new(coarse.dimension, vertices, cells, markers)
        .expect("midpoint refinement of a valid mesh is valid");
    fine.parent = Some(ParentMap { vertices: parents, elements: element_parents });
    fine
}

/// A ladder of nested meshes; level 0 is the coarsest.
#[derive(Debug, Clone, PartialEq)]
pub struct HierMesh {
    pub levels: Vec<MeshLevel>,
}

impl HierMesh {
    /// `base` plus `levels - 1` midpoint refinements.
    pub fn new(base: MeshLevel, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::invalid("levels", "need at least one level"));
        }
        let mut all = Vec::with_capacity(levels);
        all.push(base);
        for l in 1..levels {
            let fine = refine_midpoint(&all[l - 1]);
            all.push(fine);
        }
        Ok(HierMesh { levels: all })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, l: usize) -> &MeshLevel {
        &self.levels[l]
    }

    pub fn finest(&self) -> &MeshLevel {
        self.levels.last().expect("non-empty hierarchy")
    }
}

/// Vertices, edge lengths, angles and area of a triangle. Edge `i` is the
/// edge opposite vertex `i` and `angles[i]` is the interior angle at vertex `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleGeometry {
    pub vertices: [[f64; 2]; 3],
    pub edges: [f64; 3],
    pub angles: [f64; 3],
    pub area: f64,
}

impl TriangleGeometry {
    pub fn new(v1: [f64; 2], v2: [f64; 2], v3: [f64; 2]) -> Self {
        let v = [v1, v2, v3];
        let dist = |a: [f64; 2], b: [f64; 2]| libm::hypot(a[0] - b[0], a[1] - b[1]);
        let edges = [dist(v2, v3), dist(v3, v1), dist(v1, v2)];
        let area = 0.5 * ((v2[0] - v1[0]) * (v3[1] - v1[1]) - (v3[0] - v1[0]) * (v2[1] - v1[1])).abs();
        let mut angles = [0.0; 3];
        for i in 0..3 {
            let (a, b) = (v[(i + 1) % 3], v[(i + 2) % 3]);
            let (ux, uy) = (a[0] - v[i][0], a[1] - v[i][1]);
            let (wx, wy) = (b[0] - v[i][0], b[1] - v[i][1]);
            angles[i] = libm::atan2((ux * wy - uy * wx).abs(), ux * wx + uy * wy);
        }
        TriangleGeometry { vertices: v, edges, angles, area }
    }

    pub fn diameter(&self) -> f64 {
        self.edges[0].max(self.edges[1]).max(self.edges[2])
    }

    /// Diameter of the inscribed circle, `4 |K| / perimeter`.
    pub fn incircle_diameter(&self) -> f64 {
        4.0 * self.area / (self.edges[0] + self.edges[1] + self.edges[2])
    }

    /// Edge midpoints; `m_i` lies on the edge opposite `v_i`.
    pub fn midpoints(&self) -> [[f64; 2]; 3] {
        let v = self.vertices;
        let m = |a: [f64; 2], b: [f64; 2]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        [m(v[1], v[2]), m(v[2], v[0]), m(v[0], v[1])]
    }

    /// Gradients of the barycentric coordinates (constant on the triangle).
    pub fn barycentric_gradients(&self) -> [[f64; 2]; 3] {
        let v = self.vertices;
        let two_area = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        let mut g = [[0.0; 2]; 3];
        for i in 0..3 {
            let (a, b) = (v[(i + 1) % 3], v[(i + 2) % 3]);
            g[i] = [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area];
        }
        g
    }

    /// The sub-triangles K1..K4 of midpoint refinement.
    pub fn subtriangles(&self) -> [TriangleGeometry; 4] {
        let [v1, v2, v3] = self.vertices;
        let [m1, m2, m3] = self.midpoints();
        [
            TriangleGeometry::new(v1, m3, m2),
            TriangleGeometry::new(m3, v2, m1),
            TriangleGeometry::new(m2, m1, v3),
            TriangleGeometry::new(m1, m2, m3),
        ]
    }
}

/// Tolerance below zero accepted for barycentric weights of points on the boundary.
pub const BARYCENTRIC_TOLERANCE: f64 = 1e-12;

/// Barycentric coordinates of `x` in `k`.
pub fn barycentric(k: &TriangleGeometry, x: [f64; 2]) -> Result<[f64; 3]> {
    let [a, b, c] = k.vertices;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    if det == 0.0 {
        return Err(Error::DegenerateElement { element: 0, measure: 0.0 });
    }
    let w2 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
    let w3 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
    let w = [1.0 - w2 - w3, w2, w3];
    if let Some(&bad) = w.iter().find(|&&wi| wi < -BARYCENTRIC_TOLERANCE) {
        return Err(Error::PointOutsideTriangle { weight: bad });
    }
    Ok(w)
}

/// Largest `diam(K) / indiam(K)` over the level (1 for intervals).
pub fn regularity_check(level: &MeshLevel) -> Result<f64> {
    let mut worst = 1.0f64;
    for e in 0..level.num_elements() {
        let m = level.measure(e);
        if !(m > 0.0) {
            return Err(Error::DegenerateElement { element: e, measure: m });
        }
        if level.dimension == Dimension::Two {
            let t = level.triangle(e);
            worst = worst.max(t.diameter() / t.incircle_diameter());
        }
    }
    Ok(worst)
}

/// Sum of element measures (should equal `|D| = 1`).
pub fn total_measure(level: &MeshLevel) -> f64 {
    (0..level.num_elements()).map(|e| level.measure(e)).sum()
}

/// Count of vertices per marker, indexed by the marker's discriminant.
pub fn marker_histogram(level: &MeshLevel) -> [usize; 4] {
    let mut h = [0; 4];
    for m in &level.markers {
        h[*m as usize] += 1;
    }
    h
}

/// Maps every coarse vertex to its index on the fine level.
pub fn coarse_vertex_positions(fine: &MeshLevel) -> Result<Vec<usize>> {
    let parent = fine.parent.as_ref().ok_or(Error::NotNested { coarse: 0, fine: 1 })?;
    let nc = parent.vertices.iter().filter(|p| matches!(p, VertexParent::Coarse(_))).count();
    let mut pos = vec![usize::MAX; nc];
    for (f, p) in parent.vertices.iter().enumerate() {
        if let VertexParent::Coarse(c) = p {
            pos[*c] = f;
        }
    }
    Ok(pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_1d_sizes() {
        assert_eq!(uniform_mesh_1d(1.0 / 2048.0).unwrap().num_vertices(), 2049);
        let m = uniform_mesh_1d(1.0).unwrap();
        assert_eq!(m.num_vertices(), 2);
        assert_eq!(m.num_elements(), 1);
        let m = uniform_mesh_1d(0.5).unwrap();
        let xs: Vec<f64> = m.vertices.iter().map(|v| v[0]).collect();
        assert_eq!(xs, [0.0, 0.5, 1.0]);
        assert_eq!(m.markers, [Marker::DirichletLeft, Marker::Interior, Marker::DirichletRight]);
        assert!(matches!(uniform_mesh_1d(0.3), Err(Error::NonIntegerMeshSize { .. })));
        assert!(uniform_mesh_1d(-0.5).is_err());
    }

    #[test]
    fn refine_1d_doubles_resolution() {
        let coarse = uniform_mesh_1d(1.0 / 2048.0).unwrap();
        let fine = refine_midpoint(&coarse);
        assert_eq!(fine.num_vertices(), 4097);
        assert_eq!(fine.h, 1.0 / 4096.0);
        assert_eq!(coarse.h, 2.0 * fine.h);
        let hist = marker_histogram(&fine);
        assert_eq!(hist, [4095, 1, 1, 0]);
    }

    #[test]
    fn refine_reference_triangle() {
        let base = MeshLevel::new(
            Dimension::Two,
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![0, 1, 2],
            vec![Marker::DirichletLeft, Marker::DirichletRight, Marker::DirichletLeft],
        )
        .unwrap();
        let fine = refine_midpoint(&base);
        assert_eq!(fine.num_elements(), 4);
        for e in 0..4 {
            assert_eq!(fine.signed_measure(e), 0.125);
        }
        let p = fine.parent.as_ref().unwrap();
        assert_eq!(p.elements, [(0, 0), (0, 1), (0, 2), (0, 3)]);
        // K1 = (v1, m3, m2)
        let k1 = fine.element(0);
        assert_eq!(fine.vertices[k1[0]], [0.0, 0.0]);
        assert_eq!(fine.vertices[k1[1]], [0.5, 0.0]);
        assert_eq!(fine.vertices[k1[2]], [0.0, 0.5]);
        // Midpoint of the two left-Dirichlet vertices stays Dirichlet.
        assert_eq!(fine.markers[k1[2]], Marker::DirichletLeft);
        assert_eq!(fine.markers[k1[1]], Marker::Neumann);
    }

    #[test]
    fn refine_2d_counts_and_nesting() {
        let coarse = structured_mesh_2d(5).unwrap();
        let fine = refine_midpoint(&coarse);
        let (v, e, ed) = (coarse.num_vertices(), coarse.num_elements(), coarse.edges().len());
        assert_eq!(fine.num_elements(), 4 * e);
        assert_eq!(fine.num_vertices(), v + ed);
        for i in 0..v {
            assert_eq!(fine.vertices[i], coarse.vertices[i]);
        }
        let parent = fine.parent.as_ref().unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for &(k, j) in &parent.elements {
            assert!(seen.insert((k, j)));
        }
        assert_eq!(seen.len(), 4 * e);
        for k in 0..e {
            let sum: f64 = (0..4).map(|j| fine.measure(4 * k + j)).sum();
            assert!((sum - coarse.measure(k)).abs() < 1e-12 * coarse.measure(k));
            for j in 0..4 {
                assert!(fine.signed_measure(4 * k + j) > 0.0);
            }
        }
        assert!((fine.h - 0.5 * coarse.h).abs() < 1e-15);
        // Boundary markers agree with the geometric classification.
        for (p, m) in fine.vertices.iter().zip(&fine.markers) {
            assert_eq!(*m, Marker::classify(p));
        }
    }

    #[test]
    fn barycentric_examples() {
        let k = TriangleGeometry::new([0.0, 0.0], [2.0, 0.0], [0.5, 1.5]);
        let c = [(0.0 + 2.0 + 0.5) / 3.0, 0.5];
        let w = barycentric(&k, c).unwrap();
        for wi in w {
            assert!((wi - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(barycentric(&k, [0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0]);
        let m3 = k.midpoints()[2];
        let w = barycentric(&k, m3).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15 && w[2].abs() < 1e-15);
        assert!(matches!(barycentric(&k, [3.0, 3.0]), Err(Error::PointOutsideTriangle { .. })));
    }

    #[test]
    fn triangle_geometry_angles_sum_to_pi() {
        let k = TriangleGeometry::new([0.1, 0.2], [1.3, -0.4], [0.7, 0.9]);
        let s: f64 = k.angles.iter().sum();
        assert!((s - core::f64::consts::PI).abs() < 1e-12);
        assert!(k.edges.iter().all(|e| *e > 0.0) && k.area > 0.0);
    }

    #[test]
    fn regularity_examples() {
        let h = 3f64.sqrt() / 2.0;
        let eq = MeshLevel::new(
            Dimension::Two,
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, h]],
            vec![0, 1, 2],
            vec![Marker::Interior; 3],
        )
        .unwrap();
        assert!((regularity_check(&eq).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        let right = MeshLevel::new(
            Dimension::Two,
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![0, 1, 2],
            vec![Marker::Interior; 3],
        )
        .unwrap();
        let expect = 2f64.sqrt() / (2.0 - 2f64.sqrt());
        assert!((regularity_check(&right).unwrap() - expect).abs() < 1e-12);
        assert_eq!(regularity_check(&uniform_mesh_1d(0.25).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_element_is_reported() {
        let err = MeshLevel::new(
            Dimension::Two,
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]],
            vec![0, 1, 3, 0, 1, 2],
            vec![Marker::Interior; 4],
        )
        .unwrap_err();
        assert_eq!(err, Error::DegenerateElement { element: 1, measure: 0.0 });
    }

    #[test]
    fn hierarchy_preserves_area() {
        let h = HierMesh::new(structured_mesh_2d(3).unwrap(), 3).unwrap();
        for l in &h.levels {
            assert!((total_measure(l) - 1.0).abs() < 1e-12);
        }
        assert_eq!(coarse_vertex_positions(h.level(2)).unwrap(), (0..h.level(1).num_vertices()).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn barycentric_round_trip(
            ax in -1.0..1.0f64, ay in -1.0..1.0f64,
            bx in -1.0..1.0f64, by in -1.0..1.0f64,
            cx in -1.0..1.0f64, cy in -1.0..1.0f64,
            s in 0.0..1.0f64, t in 0.0..1.0f64,
        ) {
            let k = TriangleGeometry::new([ax, ay], [bx, by], [cx, cy]);
            prop_assume!(k.area > 1e-3);
            let (s, t) = if s + t > 1.0 { (1.0 - s, 1.0 - t) } else { (s, t) };
            let x = [ax + s * (bx - ax) + t * (cx - ax), ay + s * (by - ay) + t * (cy - ay)];
            let w = barycentric(&k, x).unwrap();
            let rx = w[0] * ax + w[1] * bx + w[2] * cx;
            let ry = w[0] * ay + w[1] * by + w[2] * cy;
            prop_assert!(((rx - x[0]).powi(2) + (ry - x[1]).powi(2)).sqrt() < 1e-12);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
