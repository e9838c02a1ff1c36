//! Evaluation: ray-stabbing surface samples, Chamfer-L1, Hausdorff and
//! volumetric IoU.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bvh::{Bvh, Ray};
use crate::mesh::{TriangleMesh, Vec3};
use crate::occupancy::{CnDhfModel, DEFAULT_RAY_STEP};
use crate::{par, Error, Result};

pub const DEFAULT_SAMPLES: usize = 100_000;
/// Radius of the disc line offsets are drawn from; covers `[-1, 1]^3`.
const STAB_RADIUS: f64 = 1.732_050_807_568_877_2;

/// Static 3D kd-tree answering exact nearest-neighbor distance queries.
pub struct KdTree {
    points: Vec<Vec3>,
    split_axes: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut pts = points.to_vec();
        let mut axes = vec![0u8; pts.len()];
        build(&mut pts, &mut axes);
        KdTree {
            points: pts,
            split_axes: axes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance from `q` to its nearest point; infinite when empty.
    pub fn nearest_distance_squared(&self, q: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        self.search(0, self.points.len(), q, &mut best);
        best
    }

    fn search(&self, lo: usize, hi: usize, q: &Vec3, best: &mut f64) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.points[mid];
        *best = best.min((q - p).norm_squared());
        let axis = self.split_axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, best);
        if diff * diff < *best {
            self.search(far.0, far.1, q, best);
        }
    }
}

fn build(pts: &mut [Vec3], axes: &mut [u8]) {
    if pts.is_empty() {
        return;
    }
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts.iter() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let axis = (hi - lo).imax();
    let mid = pts.len() / 2;
    pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    axes[mid] = axis as u8;
    let (pl, pr) = pts.split_at_mut(mid);
    let (al, ar) = axes.split_at_mut(mid);
    build(pl, al);
    build(&mut pr[1..], &mut ar[1..]);
}

/// Nearest-neighbor distance from every point of `queries` into `tree`.
fn nearest_distances(tree: &KdTree, queries: &[Vec3]) -> Vec<f64> {
    const CHUNK: usize = 4096;
    par::map_range(queries.len().div_ceil(CHUNK), |c| {
        queries[c * CHUNK..((c + 1) * CHUNK).min(queries.len())]
            .iter()
            .map(|q| tree.nearest_distance_squared(q).sqrt())
            .collect::<Vec<_>>()
    })
    .concat()
}

fn check_non_empty(a: &[Vec3], b: &[Vec3]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        Err(Error::EmptyPointSet)
    } else {
        Ok(())
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `0.5 * mean_a min_b |a - b| + 0.5 * mean_b min_a |a - b|`.
pub fn chamfer_l1(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    check_non_empty(a, b)?;
    let ab = nearest_distances(&KdTree::new(b), a);
    let ba = nearest_distances(&KdTree::new(a), b);
    Ok(0.5 * mean(&ab) + 0.5 * mean(&ba))
}

/// Symmetric Hausdorff distance between two point sets.
pub fn hausdorff(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    check_non_empty(a, b)?;
    let ab = nearest_distances(&KdTree::new(b), a);
    let ba = nearest_distances(&KdTree::new(a), b);
    Ok(ab.into_iter().chain(ba).fold(0.0, f64::max))
}

/// Something random lines can be intersected with.
pub trait Stabbable: Sync {
    /// Appends every surface crossing of the segment `origin + t d`,
    /// `t` in `[0, length]`.
    fn crossings(&self, origin: &Vec3, direction: &Vec3, length: f64, out: &mut Vec<Vec3>);
}

pub struct MeshSurface {
    bvh: Bvh,
}

impl MeshSurface {
    pub fn new(mesh: &TriangleMesh) -> Self {
        MeshSurface { bvh: Bvh::new(mesh) }
    }
}

impl Stabbable for MeshSurface {
    fn crossings(&self, origin: &Vec3, direction: &Vec3, length: f64, out: &mut Vec<Vec3>) {
        let ray = Ray::new(*origin, *direction);
        let mut hits = Vec::new();
        self.bvh.intersect_all(&ray, 0.0, length, &mut hits);
        hits.sort_by(|a, b| a.t.total_cmp(&b.t));
        out.extend(hits.iter().map(|h| ray.at(h.t)));
    }
}

impl Stabbable for CnDhfModel {
    fn crossings(&self, origin: &Vec3, direction: &Vec3, length: f64, out: &mut Vec<Vec3>) {
        let d = direction.normalize();
        for t in CnDhfModel::crossings(self, origin, &d, 0.0, length, DEFAULT_RAY_STEP) {
            out.push(origin + d * t);
        }
    }
}

/// A random line through the domain: uniform direction, offset uniform over
/// the disc of radius `sqrt(3)` orthogonal to it. Returned as a segment
/// start and direction; the segment has length `2 sqrt(3)`.
pub fn random_line<R: Rng>(rng: &mut R) -> (Vec3, Vec3) {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).max(0.0).sqrt();
    let d = Vec3::new(s * phi.cos(), s * phi.sin(), z);
    let helper = if d.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = d.cross(&helper).normalize();
    let e2 = d.cross(&e1);
    let r = STAB_RADIUS * rng.random::<f64>().sqrt();
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let center = (e1 * theta.cos() + e2 * theta.sin()) * r;
    (center - d * STAB_RADIUS, d)
}

/// Collects surface crossings of random lines until `count` points are
/// gathered, giving up after `10 * count` lines.
pub fn sample_by_ray_stabbing(surface: &impl Stabbable, count: usize, seed: u64) -> Result<Vec<Vec3>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = count.saturating_mul(10);
    let mut out = Vec::with_capacity(count);
    let mut lines_used = 0;
    while out.len() < count && lines_used < budget {
        let batch = ((count - out.len()) / 2).clamp(64, 8192).min(budget - lines_used);
        let lines: Vec<(Vec3, Vec3)> = (0..batch).map(|_| random_line(&mut rng)).collect();
        lines_used += batch;
        let hits = par::map_range(batch, |i| {
            let mut v = Vec::new();
            surface.crossings(&lines[i].0, &lines[i].1, 2.0 * STAB_RADIUS, &mut v);
            v
        });
        for h in hits {
            out.extend(h);
        }
    }
    if out.len() < count {
        return Err(Error::Unstabbable {
            hits: out.len(),
            lines: lines_used,
        });
    }
    out.truncate(count);
    Ok(out)
}

/// In/out oracle evaluated at batches of points.
pub trait OccupancySource: Sync {
    fn occupancy(&self, points: &[Vec3]) -> Vec<bool>;
}

impl OccupancySource for CnDhfModel {
    fn occupancy(&self, points: &[Vec3]) -> Vec<bool> {
        CnDhfModel::occupancy(self, points)
    }
}

/// Ray-parity inside test over three fixed, slightly skewed directions with
/// a majority vote, which tolerates the odd leaky or non-manifold spot.
pub struct MeshInOut {
    bvh: Bvh,
}

const PARITY_DIRECTIONS: [[f64; 3]; 3] = [
    [1.0, 0.312_7, 0.173_1],
    [-0.211_3, 1.0, 0.452_3],
    [0.360_7, -0.274_1, 1.0],
];

impl MeshInOut {
    pub fn new(mesh: &TriangleMesh) -> Self {
        MeshInOut { bvh: Bvh::new(mesh) }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let votes = PARITY_DIRECTIONS
            .iter()
            .filter(|d| self.bvh.count_hits(&Ray::new(*p, Vec3::from(**d)), 0.0, f64::INFINITY) % 2 == 1)
            .count();
        votes >= 2
    }
}

impl OccupancySource for MeshInOut {
    fn occupancy(&self, points: &[Vec3]) -> Vec<bool> {
        const CHUNK: usize = 1024;
        par::map_range(points.len().div_ceil(CHUNK), |c| {
            points[c * CHUNK..((c + 1) * CHUNK).min(points.len())]
                .iter()
                .map(|p| self.contains(p))
                .collect::<Vec<_>>()
        })
        .concat()
    }
}

/// Centers of a `resolution^3` grid over `[-1, 1]^3`, x fastest.
pub fn grid_centers(resolution: usize) -> Vec<Vec3> {
    let h = 2.0 / resolution as f64;
    let c = |i: usize| -1.0 + (i as f64 + 0.5) * h;
    let mut out = Vec::with_capacity(resolution.pow(3));
    for k in 0..resolution {
        for j in 0..resolution {
            for i in 0..resolution {
                out.push(Vec3::new(c(i), c(j), c(k)));
            }
        }
    }
    out
}

/// Intersection over union of two occupancies at voxel centers.
pub fn iou(a: &impl OccupancySource, b: &impl OccupancySource, resolution: usize) -> Result<f64> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("IoU resolution must be positive".into()));
    }
    let pts = grid_centers(resolution);
    let (oa, ob) = (a.occupancy(&pts), b.occupancy(&pts));
    let inter = oa.iter().zip(&ob).filter(|(x, y)| **x && **y).count();
    let union = oa.iter().zip(&ob).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        return Err(Error::BothEmpty);
    }
    Ok(inter as f64 / union as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub chamfer_l1: f64,
    pub chamfer_l1_x1e3: f64,
    pub hausdorff: f64,
    pub iou: f64,
    pub samples: usize,
    pub iou_resolution: usize,
    pub seed: u64,
}

impl MetricReport {
    pub fn csv_header() -> &'static str {
        "chamfer_l1,chamfer_l1_x1e3,hausdorff,iou,samples,iou_resolution,seed"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.9e},{:.6},{:.9e},{:.6},{},{},{}",
            self.chamfer_l1,
            self.chamfer_l1_x1e3,
            self.hausdorff,
            self.iou,
            self.samples,
            self.iou_resolution,
            self.seed
        )
    }
}

/// Chamfer, Hausdorff and IoU of `model` against `reference`.
///
/// Both surfaces are stabbed by the same line sequence. Independent lines
/// would add a sampling floor of about `0.5 * sqrt(area / samples)` to the
/// Chamfer distance even between identical surfaces.
pub fn evaluate(
    model: &CnDhfModel,
    reference: &TriangleMesh,
    samples: usize,
    iou_resolution: usize,
    seed: u64,
) -> Result<MetricReport> {
    let line_seed = crate::stage_seed(seed, "stab");
    let ours = sample_by_ray_stabbing(model, samples, line_seed)?;
    let theirs = sample_by_ray_stabbing(&MeshSurface::new(reference), samples, line_seed)?;
    let chamfer = chamfer_l1(&ours, &theirs)?;
    Ok(MetricReport {
        chamfer_l1: chamfer,
        chamfer_l1_x1e3: chamfer * 1e3,
        hausdorff: hausdorff(&ours, &theirs)?,
        iou: iou(model, &MeshInOut::new(reference), iou_resolution)?,
        samples,
        iou_resolution,
        seed,
    })
}
