//! Explicit geometry from a CN-DHF model: voxelization, marching cubes and
//! per-axis height-field mesh export.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::mesh::{TriangleMesh, Vec3};
use crate::occupancy::CnDhfModel;
use crate::raster::{export_hf_mesh, Which};
use crate::{par, Error, Result};

/// Occupancy sampled at voxel centers.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub dims: [usize; 3],
    /// Center of voxel `(0, 0, 0)`.
    pub origin: Vec3,
    pub spacing: f64,
    /// x-fastest occupancy bits.
    pub bits: Vec<bool>,
}

impl VoxelGrid {
    pub fn new(dims: [usize; 3], origin: Vec3, spacing: f64) -> Self {
        assert!(spacing > 0.0);
        VoxelGrid {
            dims,
            origin,
            spacing,
            bits: vec![false; dims[0] * dims[1] * dims[2]],
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.bits[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.index(i, j, k);
        self.bits[idx] = value;
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.spacing
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupied_count() as f64 / self.bits.len() as f64
    }

    /// Debug dump: magic `CNVX`, dims as 3 x u32, then x-fastest bits packed
    /// LSB-first.
    pub fn to_vox_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.bits.len() / 8 + 1);
        out.extend_from_slice(b"CNVX");
        for d in self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let mut packed = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                packed[i / 8] |= 1 << (i % 8);
            }
        }
        out.extend_from_slice(&packed);
        out
    }
}

/// Samples the intersected occupancy at the centers of a `resolution^3` grid
/// over `[-1, 1]^3`.
pub fn voxelize(model: &CnDhfModel, resolution: usize) -> Result<VoxelGrid> {
    if resolution < 8 {
        return Err(Error::InvalidArgument(format!("voxel resolution {resolution} < 8")));
    }
    let n = resolution;
    let spacing = 2.0 / n as f64;
    let mut grid = VoxelGrid::new([n; 3], Vec3::repeat(-1.0 + 0.5 * spacing), spacing);
    let slabs = par::map_range(n, |k| {
        let mut pts = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                pts.push(grid.center(i, j, k));
            }
        }
        model.occupancy(&pts)
    });
    for (k, slab) in slabs.into_iter().enumerate() {
        let base = k * n * n;
        grid.bits[base..base + n * n].copy_from_slice(&slab);
    }
    Ok(grid)
}

/// Marching cubes on the 0.5 level of a binary grid (edge midpoints). The grid
/// is padded with empty voxels so the output is closed.
pub fn marching_cubes(grid: &VoxelGrid) -> Result<TriangleMesh> {
    if grid.dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidArgument("grid must be at least 2^3".into()));
    }
    let [nx, ny, nz] = grid.dims;
    let dims = [nx + 2, ny + 2, nz + 2];
    let mut values = vec![0.0; dims[0] * dims[1] * dims[2]];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if grid.get(i, j, k) {
                    values[((k + 1) * dims[1] + j + 1) * dims[0] + i + 1] = 1.0;
                }
            }
        }
    }
    let origin = grid.origin - Vec3::repeat(grid.spacing);
    marching_cubes_field(&values, dims, origin, grid.spacing, 0.5)
}

/// Per-case polygon loops over the 12 cube edges. A loop is fanned from
/// its first entry unless `centered`, in which case it is fanned from an
/// extra vertex at its centroid.
struct CaseTable {
    loops: Vec<Vec<Loop>>,
}

struct Loop {
    edges: Vec<u8>,
    centered: bool,
}

/// Edge `e` joins corners `EDGES[e].0` and `EDGES[e].0 | 1 << EDGES[e].1`.
/// Corner `c` sits at `(c & 1, c >> 1 & 1, c >> 2 & 1)`.
fn cube_edges() -> Vec<(u8, u8)> {
    let mut edges = Vec::with_capacity(12);
    for axis in 0..3u8 {
        for c in 0..8u8 {
            if c & (1 << axis) == 0 {
                edges.push((c, axis));
            }
        }
    }
    edges
}

fn corner_pos(c: u8) -> Vec3 {
    Vec3::new((c & 1) as f64, (c >> 1 & 1) as f64, (c >> 2 & 1) as f64)
}

fn edge_between(edges: &[(u8, u8)], a: u8, b: u8) -> u8 {
    let (lo, hi) = (a.min(b), a.max(b));
    let axis = (hi ^ lo).trailing_zeros() as u8;
    edges.iter().position(|&(c, ax)| c == lo && ax == axis).unwrap() as u8
}

/// Builds the case table by tracing face contours. Ambiguous faces separate
/// the inside corners, a rule that depends only on the face so neighbouring
/// cells agree and the surface stays closed. Segments are oriented so the
/// loops wind counter-clockwise seen from outside the solid.
fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let edges = cube_edges();
        let mid = |e: u8| {
            let (c, axis) = edges[e as usize];
            corner_pos(c) + Vec3::from_fn(|k, _| if k == axis as usize { 0.5 } else { 0.0 })
        };
        let mut faces = Vec::new();
        for axis in 0..3u8 {
            for side in 0..2u8 {
                let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
                let base = side << axis;
                let ring = [base, base | 1 << a1, base | 1 << a1 | 1 << a2, base | 1 << a2];
                let mut normal = Vec3::zeros();
                normal[axis as usize] = if side == 0 { -1.0 } else { 1.0 };
                faces.push((ring, normal));
            }
        }
        let mut loops = Vec::with_capacity(256);
        for case in 0..256usize {
            let inside = |c: u8| case >> c & 1 == 1;
            let mut next: HashMap<u8, u8> = HashMap::new();
            for (ring, normal) in &faces {
                let ins: Vec<bool> = ring.iter().map(|&c| inside(c)).collect();
                let cut: Vec<usize> = (0..4).filter(|&i| ins[i] != ins[(i + 1) % 4]).collect();
                let mut segments: Vec<(u8, u8, Vec3)> = Vec::new();
                let ring_edge = |i: usize| edge_between(&edges, ring[i], ring[(i + 1) % 4]);
                match cut.len() {
                    0 => {}
                    2 => {
                        let inside_pts: Vec<Vec3> = (0..4).filter(|&i| ins[i]).map(|i| corner_pos(ring[i])).collect();
                        let centroid = inside_pts.iter().sum::<Vec3>() / inside_pts.len() as f64;
                        segments.push((ring_edge(cut[0]), ring_edge(cut[1]), centroid));
                    }
                    4 => {
                        for i in 0..4 {
                            if ins[i] {
                                segments.push((ring_edge((i + 3) % 4), ring_edge(i), corner_pos(ring[i])));
                            }
                        }
                    }
                    _ => unreachable!(),
                }
                for (e1, e2, inner) in segments {
                    let d = mid(e2) - mid(e1);
                    let m = (mid(e1) + mid(e2)) * 0.5;
                    let (from, to) = if normal.cross(&d).dot(&(m - inner)) > 0.0 {
                        (e1, e2)
                    } else {
                        (e2, e1)
                    };
                    let prev = next.insert(from, to);
                    debug_assert!(prev.is_none());
                }
            }
            let mut case_loops = Vec::new();
            while let Some(&start) = next.keys().min() {
                let mut lp = vec![start];
                let mut cur = next.remove(&start).unwrap();
                while cur != start {
                    lp.push(cur);
                    cur = next.remove(&cur).expect("closed contour");
                }
                case_loops.push(fan_loop(lp, &faces, &edges));
            }
            loops.push(case_loops);
        }
        CaseTable { loops }
    })
}

/// Rotates the loop so that no fan diagonal joins two edges of one cube
/// face. Such a diagonal could coincide with one from the neighbouring cell
/// and leave an edge with four triangles. Falls back to a centroid fan.
fn fan_loop(lp: Vec<u8>, faces: &[([u8; 4], Vec3)], edges: &[(u8, u8)]) -> Loop {
    let share_face = |a: u8, b: u8| {
        faces.iter().any(|(ring, _)| {
            let on = |e: u8| (0..4).any(|i| edge_between(edges, ring[i], ring[(i + 1) % 4]) == e);
            on(a) && on(b)
        })
    };
    let n = lp.len();
    for apex in 0..n {
        if (2..n - 1).all(|m| !share_face(lp[apex], lp[(apex + m) % n])) {
            let mut rotated = lp.clone();
            rotated.rotate_left(apex);
            return Loop {
                edges: rotated,
                centered: false,
            };
        }
    }
    Loop {
        edges: lp,
        centered: true,
    }
}

/// Marching cubes over a scalar lattice (x-fastest) with linear edge
/// interpolation. Points with `value > iso` are inside; triangles face out.
pub fn marching_cubes_field(
    values: &[f64],
    dims: [usize; 3],
    origin: Vec3,
    spacing: f64,
    iso: f64,
) -> Result<TriangleMesh> {
    let table = case_table();
    let edges = cube_edges();
    let [nx, ny, nz] = dims;
    assert_eq!(values.len(), nx * ny * nz);
    let at = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut welded: HashMap<(usize, u8), u32> = HashMap::new();
    for k in 0..nz.saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            for i in 0..nx.saturating_sub(1) {
                let corner_index = |c: u8| {
                    at(
                        i + (c & 1) as usize,
                        j + (c >> 1 & 1) as usize,
                        k + (c >> 2 & 1) as usize,
                    )
                };
                let mut case = 0usize;
                for c in 0..8u8 {
                    if values[corner_index(c)] > iso {
                        case |= 1 << c;
                    }
                }
                let loops = &table.loops[case];
                if loops.is_empty() {
                    continue;
                }
                for lp in loops {
                    let ids: Vec<u32> = lp
                        .edges
                        .iter()
                        .map(|&e| {
                            let (c, axis) = edges[e as usize];
                            let g0 = corner_index(c);
                            *welded.entry((g0, axis)).or_insert_with(|| {
                                let g1 = corner_index(c | 1 << axis);
                                let (v0, v1) = (values[g0], values[g1]);
                                let t = ((iso - v0) / (v1 - v0)).clamp(0.0, 1.0);
                                let p0 = origin
                                    + Vec3::new(
                                        (i + (c & 1) as usize) as f64,
                                        (j + (c >> 1 & 1) as usize) as f64,
                                        (k + (c >> 2 & 1) as usize) as f64,
                                    ) * spacing;
                                let mut p = p0;
                                p[axis as usize] += t * spacing;
                                vertices.push(p);
                                vertices.len() as u32 - 1
                            })
                        })
                        .collect();
                    if lp.centered {
                        let c = ids.iter().map(|&v| vertices[v as usize]).sum::<Vec3>() / ids.len() as f64;
                        vertices.push(c);
                        let apex = vertices.len() as u32 - 1;
                        for m in 0..ids.len() {
                            triangles.push([apex, ids[m], ids[(m + 1) % ids.len()]]);
                        }
                    } else {
                        for m in 1..ids.len() - 1 {
                            triangles.push([ids[0], ids[m], ids[m + 1]]);
                        }
                    }
                }
            }
        }
    }
    if triangles.is_empty() {
        return Err(Error::InvalidArgument("empty grid: no surface to extract".into()));
    }
    TriangleMesh::new(vertices, triangles)
}

/// Near and far height-field meshes for every axis of the model, in entry
/// order: `[axis0 near, axis0 far, axis1 near, ...]`.
pub fn export_model_hf_meshes(model: &CnDhfModel, resolution: usize) -> Result<Vec<TriangleMesh>> {
    let mut out = Vec::with_capacity(2 * model.entries().len());
    for entry in model.entries() {
        let raster = entry.predict_raster(resolution);
        out.push(export_hf_mesh(&raster, &entry.axis, Which::Near)?);
        out.push(export_hf_mesh(&raster, &entry.axis, Which::Far)?);
    }
    Ok(out)
}
