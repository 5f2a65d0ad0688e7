//! Text file formats: KL cache, meshes, solutions, references and Matrix
//! Market dumps. Floats are written in Rust's shortest round-trip form, so
//! every reader reproduces the written values bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use pmlmc_core::fem::FemSolution;
use pmlmc_core::mesh::{Marker, MeshLevel};
use pmlmc_core::random_field::{Dimension, KlBasis1d, RandomFieldSpec};
use pmlmc_core::sparse::CsrMatrix;
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

fn format_err(path: &Path, reason: impl Into<String>) -> HarnessError {
    HarnessError::Format { path: path.to_path_buf(), reason: reason.into() }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    }
    fs::write(path, text).map_err(HarnessError::io(path))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(HarnessError::io(path))
}

/// Splits `# key=value ...` header lines from the body.
fn split_header(text: &str) -> (Vec<(String, String)>, String) {
    let mut header = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            for kv in rest.split_whitespace() {
                if let Some((k, v)) = kv.split_once('=') {
                    header.push((k.to_string(), v.to_string()));
                }
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    (header, body)
}

fn header_value<T: std::str::FromStr>(path: &Path, header: &[(String, String)], key: &str) -> Result<T> {
    let raw = header
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v)
        .ok_or_else(|| format_err(path, format!("missing header key `{key}`")))?;
    raw.parse().map_err(|_| format_err(path, format!("bad value `{raw}` for `{key}`")))
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| format_err(path, format!("`{s}` is not a number")))
}

/// Writes the 1D eigenpairs behind a KL basis. The header records the field
/// parameters; the `theta` row holds eigenvalues and each further row the
/// eigenfunction values at one grid point, one column per mode.
pub fn write_kl_cache(path: &Path, spec: &RandomFieldSpec, basis: &KlBasis1d) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# variance={} correlation_length={} dimension={} truncation={} dx={} intervals={} modes_1d={}",
        spec.variance,
        spec.correlation_length,
        spec.dimension.as_usize(),
        spec.truncation,
        basis.dx(),
        basis.intervals,
        basis.modes()
    );
    s.push('x');
    for n in 0..basis.modes() {
        let _ = write!(s, ",phi_{n}");
    }
    s.push_str("\ntheta");
    for t in &basis.eigenvalues {
        let _ = write!(s, ",{t}");
    }
    s.push('\n');
    for i in 0..=basis.intervals {
        let _ = write!(s, "{}", i as f64 / basis.intervals as f64);
        for phi in &basis.eigenfunctions {
            let _ = write!(s, ",{}", phi[i]);
        }
        s.push('\n');
    }
    write_text(path, &s)
}

/// Reads a KL cache written for `spec` with `intervals` generation intervals.
pub fn read_kl_cache(path: &Path, spec: &RandomFieldSpec, intervals: usize) -> Result<KlBasis1d> {
    let text = read_text(path)?;
    let (header, body) = split_header(&text);
    let lambda: f64 = header_value(path, &header, "correlation_length")?;
    let cached_intervals: usize = header_value(path, &header, "intervals")?;
    if lambda != spec.correlation_length || cached_intervals != intervals {
        return Err(format_err(
            path,
            format!(
                "cache holds correlation_length={lambda}, intervals={cached_intervals}; \
                 need {}, {intervals} (rebuild with `pmlmc kl-build`)",
                spec.correlation_length
            ),
        ));
    }
    let modes: usize = header_value(path, &header, "modes_1d")?;
    let mut rows = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let mut eigenvalues = Vec::new();
    let mut eigenfunctions = vec![Vec::with_capacity(intervals + 1); modes];
    for (r, rec) in rows.records().enumerate() {
        let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
        if rec.len() != modes + 1 {
            return Err(format_err(path, format!("row {r} has {} fields, expected {}", rec.len(), modes + 1)));
        }
        if r == 0 {
            if &rec[0] != "theta" {
                return Err(format_err(path, "first row must hold the eigenvalues"));
            }
            eigenvalues = (1..=modes).map(|j| parse_f64(path, &rec[j])).collect::<Result<_>>()?;
        } else {
            for j in 0..modes {
                eigenfunctions[j].push(parse_f64(path, &rec[j + 1])?);
            }
        }
    }
    if eigenfunctions.iter().any(|f| f.len() != intervals + 1) {
        return Err(format_err(path, "wrong number of grid rows"));
    }
    Ok(KlBasis1d { correlation_length: lambda, intervals, eigenvalues, eigenfunctions })
}

/// Plain-text mesh: `dim nvert nelem`, then `nvert` coordinate lines,
/// `nelem` element lines with 1-based vertex ids, then one
/// `vertex_id marker` line per boundary vertex.
pub fn mesh_to_string(mesh: &MeshLevel) -> String {
    let d = mesh.dimension.as_usize();
    let mut s = format!("{} {} {}\n", d, mesh.num_vertices(), mesh.num_elements());
    for p in &mesh.vertices {
        if d == 1 {
            let _ = writeln!(s, "{}", p[0]);
        } else {
            let _ = writeln!(s, "{} {}", p[0], p[1]);
        }
    }
    for e in 0..mesh.num_elements() {
        let ids: Vec<String> = mesh.element(e).iter().map(|i| (i + 1).to_string()).collect();
        let _ = writeln!(s, "{}", ids.join(" "));
    }
    for (i, m) in mesh.markers.iter().enumerate() {
        if *m != Marker::Interior {
            let _ = writeln!(s, "{} {}", i + 1, *m as u8);
        }
    }
    s
}

/// Parses the mesh format. Without any marker lines, markers are derived
/// from vertex positions.
pub fn mesh_from_str(path: &Path, text: &str) -> Result<MeshLevel> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let head: Vec<usize> = lines
        .next()
        .ok_or_else(|| format_err(path, "empty mesh file"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format_err(path, format!("bad header token `{t}`"))))
        .collect::<Result<_>>()?;
    let [d, nv, ne] = head[..] else {
        return Err(format_err(path, "header must be `dim nvert nelem`"));
    };
    let dim = Dimension::from_usize(d).map_err(|_| format_err(path, format!("dimension {d}")))?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = lines.next().ok_or_else(|| format_err(path, format!("missing vertex {}", i + 1)))?;
        let x: Vec<f64> = line.split_whitespace().map(|t| parse_f64(path, t)).collect::<Result<_>>()?;
        if x.len() != d {
            return Err(format_err(path, format!("vertex {} needs {d} coordinates", i + 1)));
        }
        vertices.push([x[0], if d == 2 { x[1] } else { 0.0 }]);
    }
    let mut cells = Vec::with_capacity(ne * (d + 1));
    for e in 0..ne {
        let line = lines.next().ok_or_else(|| format_err(path, format!("missing element {}", e + 1)))?;
        let ids: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| format_err(path, format!("bad vertex id `{t}`"))))
            .collect::<Result<_>>()?;
        if ids.len() != d + 1 || ids.iter().any(|&i| i == 0 || i > nv) {
            return Err(format_err(path, format!("element {} is malformed", e + 1)));
        }
        cells.extend(ids.iter().map(|i| i - 1));
    }
    let mut markers = vec![Marker::Interior; nv];
    let mut any = false;
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        let parsed = match t[..] {
            [a, b] => a.parse::<usize>().ok().zip(b.parse::<u8>().ok().and_then(Marker::from_u8)),
            _ => None,
        };
        let (i, m) = parsed
            .filter(|(i, _)| (1..=nv).contains(i))
            .ok_or_else(|| format_err(path, format!("bad marker line `{line}`")))?;
        markers[i - 1] = m;
        any = true;
    }
    if !any {
        for (m, p) in markers.iter_mut().zip(&vertices) {
            *m = Marker::classify(&p[..d]);
        }
    }
    MeshLevel::new(dim, vertices, cells, markers).map_err(|e| format_err(path, e.to_string()))
}

pub fn read_mesh(path: &Path) -> Result<MeshLevel> {
    mesh_from_str(path, &read_text(path)?)
}

pub fn write_mesh(path: &Path, mesh: &MeshLevel) -> Result<()> {
    write_text(path, &mesh_to_string(mesh))
}

/// `vertex,x,y,value` rows.
pub fn solution_csv(mesh: &MeshLevel, u: &FemSolution) -> String {
    let mut s = String::from("vertex,x,y,value\n");
    for (i, (p, v)) in mesh.vertices.iter().zip(&u.values).enumerate() {
        let _ = writeln!(s, "{},{},{},{}", i + 1, p[0], p[1], v);
    }
    s
}

/// Symmetric Matrix Market dump (lower triangle, 1-based).
pub fn matrix_market(a: &CsrMatrix) -> String {
    let n = a.n();
    let entries: Vec<(usize, usize, f64)> =
        (0..n).flat_map(|i| a.row(i).filter(move |&(j, _)| j <= i).map(move |(j, v)| (i, j, v))).collect();
    let mut s = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(s, "{n} {n} {}", entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{} {} {}", i + 1, j + 1, v);
    }
    s
}

/// Fingerprint of everything that determines the reference mean field.
pub fn problem_hash(spec: &RandomFieldSpec, kl_intervals: usize, mesh: &MeshLevel, level: usize) -> String {
    let mut h = Sha256::new();
    h.update(format!(
        "variance={} correlation_length={} mean_log={} truncation={} dimension={} kl_intervals={} level={}\n",
        spec.variance,
        spec.correlation_length,
        spec.mean_log,
        spec.truncation,
        spec.dimension.as_usize(),
        kl_intervals,
        level
    ));
    h.update(mesh_to_string(mesh));
    format!("{:x}", h.finalize())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub hash: String,
    pub seed: u64,
    pub samples: u64,
    pub mean: FemSolution,
}

pub fn write_reference(path: &Path, mesh: &MeshLevel, r: &Reference) -> Result<()> {
    let mut s = format!(
        "# hash={} seed={} samples={} level={} dofs={}\n",
        r.hash,
        r.seed,
        r.samples,
        r.mean.level,
        r.mean.values.len()
    );
    s.push_str(&solution_csv(mesh, &r.mean));
    write_text(path, &s)
}

/// Loads a reference, refusing one built for a different problem.
pub fn read_reference(path: &Path, expected_hash: &str) -> Result<Reference> {
    if !path.exists() {
        return Err(HarnessError::MissingReference { path: path.to_path_buf() });
    }
    let text = read_text(path)?;
    let (header, body) = split_header(&text);
    let hash: String = header_value(path, &header, "hash")?;
    if hash != expected_hash {
        return Err(HarnessError::ReferenceMismatch {
            path: path.to_path_buf(),
            expected: expected_hash.to_string(),
            found: hash,
        });
    }
    let dofs: usize = header_value(path, &header, "dofs")?;
    let mut values = Vec::with_capacity(dofs);
    let mut rows = csv::Reader::from_reader(body.as_bytes());
    for rec in rows.records() {
        let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
        values.push(parse_f64(path, rec.get(3).unwrap_or(""))?);
    }
    if values.len() != dofs {
        return Err(format_err(path, format!("expected {dofs} values, found {}", values.len())));
    }
    Ok(Reference {
        hash,
        seed: header_value(path, &header, "seed")?,
        samples: header_value(path, &header, "samples")?,
        mean: FemSolution::new(header_value(path, &header, "level")?, values),
    })
}

/// Appends a line to a writer, mapping errors to the file path.
pub fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path).map_err(HarnessError::io(path))?;
    writeln!(f, "{line}").map_err(HarnessError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pmlmc_core::mesh::{refine_midpoint, structured_mesh_2d, uniform_mesh_1d};

    #[test]
    fn mesh_round_trip_is_bit_exact() {
        let p = Path::new("mem");
        for mesh in
            [refine_midpoint(&structured_mesh_2d(3).unwrap()), refine_midpoint(&uniform_mesh_1d(1.0 / 3.0).unwrap())]
        {
            let back = mesh_from_str(p, &mesh_to_string(&mesh)).unwrap();
            assert_eq!(back.vertices, mesh.vertices);
            assert_eq!(back.cells, mesh.cells);
            assert_eq!(back.markers, mesh.markers);
            assert_eq!(mesh_to_string(&back), mesh_to_string(&mesh));
        }
    }

    #[test]
    fn mesh_without_markers_is_classified() {
        let m = mesh_from_str(Path::new("m"), "2 3 1\n0 0\n1 0\n0 1\n1 2 3\n").unwrap();
        assert_eq!(m.markers, [Marker::DirichletLeft, Marker::DirichletRight, Marker::DirichletLeft]);
        assert!(mesh_from_str(Path::new("m"), "2 3 1\n0 0\n1 0\n0 1\n1 2 4\n").is_err());
        assert!(mesh_from_str(Path::new("m"), "2 3 1\n0 0\n1 0\n0 1\n1 2 3\n1 9\n").is_err());
        assert!(mesh_from_str(Path::new("m"), "3 1 1\n").is_err());
    }

    #[test]
    fn matrix_market_lower_triangle() {
        let fem = pmlmc_core::fem::FemSpace::new(0, std::sync::Arc::new(uniform_mesh_1d(0.5).unwrap())).unwrap();
        let s = matrix_market(&fem.assemble_with_k(&[1.0, 1.0]).unwrap().full);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[1], "3 3 5");
        assert!(lines.contains(&"2 1 -2"));
        assert!(lines.contains(&"2 2 4"));
    }
}
