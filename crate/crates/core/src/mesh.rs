//! Indexed triangle meshes: loading, validation, normalization and surface
//! sampling.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Longest bounding-box side after normalization. Leaves a 0.05 margin per
/// side inside `[-1, 1]`.
pub const NORMALIZED_EXTENT: f64 = 1.9;

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    areas: Vec<f64>,
    total_area: f64,
}

impl TriangleMesh {
    /// Builds a mesh, validating indices and computing per-triangle areas.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for tri in &triangles {
            for &i in tri {
                if i as usize >= vertices.len() {
                    return Err(Error::InvalidIndex {
                        index: i as i64,
                        count: vertices.len(),
                    });
                }
            }
        }
        let areas: Vec<f64> = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .collect();
        let total_area = areas.iter().sum();
        Ok(TriangleMesh {
            vertices,
            triangles,
            areas,
            total_area,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    #[inline]
    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle(t);
        (a + b + c) / 3.0
    }

    /// Number of triangles with exactly zero area.
    pub fn degenerate_count(&self) -> usize {
        self.areas.iter().filter(|&&a| a == 0.0).count()
    }

    /// Number of triangles whose (unordered) vertex index set repeats an
    /// earlier triangle.
    pub fn duplicate_count(&self) -> usize {
        let mut seen = HashSet::new();
        self.triangles
            .iter()
            .filter(|t| {
                let mut key = **t;
                key.sort_unstable();
                !seen.insert(key)
            })
            .count()
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        let vertices = self.vertices.iter().map(f).collect();
        TriangleMesh::new(vertices, self.triangles.clone()).expect("topology unchanged")
    }

    /// Concatenates meshes into one triangle soup.
    pub fn merge(meshes: &[TriangleMesh]) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for m in meshes {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            triangles.extend(m.triangles.iter().map(|t| t.map(|i| i + base)));
        }
        TriangleMesh::new(vertices, triangles)
    }

    /// Signed enclosed volume (positive for outward-oriented closed meshes).
    pub fn signed_volume(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn to_obj_string(&self) -> String {
        let mut out = String::with_capacity(self.vertices.len() * 40);
        for v in &self.vertices {
            let _ = writeln!(out, "v {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }

    pub fn write_obj(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_obj_string()).map_err(|e| Error::io(path, e))
    }

    pub fn to_stl_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(84 + 50 * self.triangles.len());
        out.extend_from_slice(&[0u8; 80]);
        out.extend_from_slice(&(self.triangles.len() as u32).to_le_bytes());
        for t in 0..self.num_triangles() {
            let [a, b, c] = self.triangle(t);
            let n = (b - a).cross(&(c - a));
            let n = if n.norm() > 0.0 { n.normalize() } else { n };
            for p in [n, a, b, c] {
                for k in 0..3 {
                    out.extend_from_slice(&(p[k] as f32).to_le_bytes());
                }
            }
            out.extend_from_slice(&[0u8; 2]);
        }
        out
    }
}

/// A mesh as loaded from disk together with input diagnostics.
#[derive(Clone, Debug)]
pub struct LoadedMesh {
    pub mesh: TriangleMesh,
    pub degenerate_triangles: usize,
    pub duplicate_triangles: usize,
}

/// Loads an OBJ (ASCII) or binary STL mesh, chosen by file extension.
pub fn load_mesh(path: &Path) -> Result<LoadedMesh> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mesh = match ext.as_str() {
        "obj" => {
            let text =
                String::from_utf8(bytes).map_err(|_| Error::UnsupportedFormat("OBJ file is not UTF-8".into()))?;
            parse_obj(&text)?
        }
        "stl" => parse_stl_binary(&bytes)?,
        other => return Err(Error::UnsupportedFormat(format!("extension '{other}'"))),
    };
    Ok(LoadedMesh {
        degenerate_triangles: mesh.degenerate_count(),
        duplicate_triangles: mesh.duplicate_count(),
        mesh,
    })
}

/// Parses `v` and `f` records; polygonal faces are fanned. Negative (relative)
/// indices are supported, everything else is ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut coords = [0.0; 3];
                for c in coords.iter_mut() {
                    let tok = parts.next().ok_or_else(|| Error::Parse {
                        line: lineno + 1,
                        message: "vertex needs 3 coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad coordinate '{tok}'"),
                    })?;
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in parts {
                    let head = tok.split('/').next().unwrap_or("");
                    let raw: i64 = head.parse().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad face index '{tok}'"),
                    })?;
                    let resolved = if raw > 0 {
                        raw - 1
                    } else if raw < 0 {
                        vertices.len() as i64 + raw
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(Error::InvalidIndex {
                            index: raw,
                            count: vertices.len(),
                        });
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: "face needs at least 3 vertices".into(),
                    });
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}

/// Parses a little-endian binary STL. Vertices are not welded.
pub fn parse_stl_binary(bytes: &[u8]) -> Result<TriangleMesh> {
    if bytes.len() < 84 {
        return Err(Error::UnsupportedFormat("STL shorter than header".into()));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    if bytes.len() < 84 + 50 * count {
        return Err(Error::UnsupportedFormat(format!(
            "binary STL declares {count} triangles but holds {} bytes",
            bytes.len()
        )));
    }
    let f = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64;
    let mut vertices = Vec::with_capacity(3 * count);
    let mut triangles = Vec::with_capacity(count);
    for t in 0..count {
        let rec = 84 + 50 * t;
        for v in 0..3 {
            let off = rec + 12 + 12 * v;
            vertices.push(Vec3::new(f(off), f(off + 4), f(off + 8)));
        }
        let base = 3 * t as u32;
        triangles.push([base, base + 1, base + 2]);
    }
    TriangleMesh::new(vertices, triangles)
}

/// Affine map `normalized = (p - center) * scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub center: [f64; 3],
    pub scale: f64,
}

impl Normalization {
    pub fn identity() -> Self {
        Normalization {
            center: [0.0; 3],
            scale: 1.0,
        }
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.center.iter().all(|c| c.abs() <= tol) && (self.scale - 1.0).abs() <= tol
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p - Vec3::from(self.center)) * self.scale
    }

    pub fn invert(&self, q: &Vec3) -> Vec3 {
        q / self.scale + Vec3::from(self.center)
    }
}

/// Centers the bounding box at the origin and scales the longest side to
/// [`NORMALIZED_EXTENT`].
pub fn normalize_to_unit_cube(mesh: &TriangleMesh) -> Result<(TriangleMesh, Normalization)> {
    let (lo, hi) = mesh.bounding_box();
    let extent = (hi - lo).max();
    if !extent.is_finite() || extent <= 0.0 {
        return Err(Error::ZeroExtent);
    }
    let center = (lo + hi) * 0.5;
    let scale = NORMALIZED_EXTENT / extent;
    let norm = Normalization {
        center: [center.x, center.y, center.z],
        scale,
    };
    Ok((mesh.map_vertices(|p| norm.apply(p)), norm))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample {
    pub triangle: usize,
    pub barycentric: [f64; 3],
    pub position: Vec3,
}

/// Per-triangle sample count `max(1, ceil(n_p * a_t))` with `n_p = 5 N_t / A`.
pub fn samples_per_triangle(mesh: &TriangleMesh) -> Vec<usize> {
    let total_points = 5.0 * mesh.num_triangles() as f64;
    let density = if mesh.total_area() > 0.0 {
        total_points / mesh.total_area()
    } else {
        0.0
    };
    mesh.areas()
        .iter()
        .map(|&a| ((density * a).ceil() as usize).max(1))
        .collect()
}

/// Area-proportional surface samples, grouped by triangle in index order. The
/// first sample of every triangle is its centroid; the rest are uniform over
/// the triangle.
pub fn sample_surface_points<R: Rng>(mesh: &TriangleMesh, rng: &mut R) -> Vec<SurfaceSample> {
    let counts = samples_per_triangle(mesh);
    let mut out = Vec::with_capacity(counts.iter().sum());
    for (t, &n) in counts.iter().enumerate() {
        let [a, b, c] = mesh.triangle(t);
        for k in 0..n {
            let bary = if k == 0 {
                [1.0 / 3.0; 3]
            } else {
                let (mut r1, mut r2): (f64, f64) = (rng.random(), rng.random());
                if r1 + r2 > 1.0 {
                    r1 = 1.0 - r1;
                    r2 = 1.0 - r2;
                }
                [1.0 - r1 - r2, r1, r2]
            };
            out.push(SurfaceSample {
                triangle: t,
                barycentric: bary,
                position: a * bary[0] + b * bary[1] + c * bary[2],
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn obj_single_triangle_area() {
        let m = parse_obj("# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n").unwrap();
        assert_eq!(m.num_triangles(), 1);
        assert!((m.total_area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn obj_quad_is_fanned_and_negative_indices_resolve() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n").unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn obj_index_out_of_range() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n").unwrap_err();
        assert!(err.to_string().contains("invalid index"), "{err}");
    }

    #[test]
    fn obj_without_faces_is_rejected() {
        assert!(matches!(parse_obj("v 0 0 0\n"), Err(Error::EmptyMesh)));
    }

    #[test]
    fn stl_cube_area() {
        let cube = crate::fixtures::box_mesh(Vec3::zeros(), Vec3::repeat(1.0));
        let parsed = parse_stl_binary(&cube.to_stl_bytes()).unwrap();
        assert_eq!(parsed.num_triangles(), 12);
        assert!((parsed.total_area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn stl_truncated_is_rejected() {
        let mut bytes = vec![0u8; 84];
        bytes[80] = 2;
        assert!(parse_stl_binary(&bytes).is_err());
    }

    #[test]
    fn normalize_cube() {
        let cube = crate::fixtures::box_mesh(Vec3::zeros(), Vec3::repeat(2.0));
        let (n, t) = normalize_to_unit_cube(&cube).unwrap();
        let (lo, hi) = n.bounding_box();
        assert!((lo - Vec3::repeat(-0.95)).norm() < 1e-12);
        assert!((hi - Vec3::repeat(0.95)).norm() < 1e-12);
        assert!((t.scale - 0.95).abs() < 1e-15);
        let back = t.invert(&Vec3::repeat(0.95));
        assert!((back - Vec3::repeat(2.0)).norm() < 1e-12);
    }

    #[test]
    fn normalize_already_normalized_is_identity() {
        let cube = crate::fixtures::box_mesh(Vec3::repeat(-0.95), Vec3::repeat(0.95));
        let (_, t) = normalize_to_unit_cube(&cube).unwrap();
        assert!(t.is_identity(1e-12), "{t:?}");
    }

    #[test]
    fn normalize_zero_extent_fails() {
        let p = Vec3::new(0.3, 0.3, 0.3);
        let m = TriangleMesh::new(vec![p, p, p], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(normalize_to_unit_cube(&m), Err(Error::ZeroExtent)));
    }

    #[test]
    fn single_triangle_samples_start_with_centroid() {
        let m = single_triangle();
        let s = sample_surface_points(&m, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(s.len() >= 5);
        assert_eq!(s[0].barycentric, [1.0 / 3.0; 3]);
        for x in &s {
            let sum: f64 = x.barycentric.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12 && x.barycentric.iter().all(|&b| b >= 0.0));
            assert!(x.position.z == 0.0 && x.position.x + x.position.y <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn equal_triangles_get_equal_counts() {
        let m = crate::fixtures::box_mesh(Vec3::zeros(), Vec3::repeat(1.0));
        let two = TriangleMesh::new(m.vertices().to_vec(), m.triangles()[..2].to_vec()).unwrap();
        let c = samples_per_triangle(&two);
        assert_eq!(c[0], c[1]);
    }

    #[test]
    fn area_ratio_drives_counts() {
        // areas 10 and 1: N_p = 10, n_p = 10/11.
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(20.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(2.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let c = samples_per_triangle(&m);
        let expected_big = (10.0_f64 / 11.0 * 10.0).ceil() as usize;
        let expected_small = (10.0_f64 / 11.0).ceil() as usize;
        assert_eq!(c, vec![expected_big, expected_small]);
        assert_eq!(c, vec![10, 1]);
    }

    #[test]
    fn degenerate_triangle_gets_one_sample() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert_eq!(m.degenerate_count(), 1);
        assert_eq!(samples_per_triangle(&m)[1], 1);
    }
}
