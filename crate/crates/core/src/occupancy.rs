//! Per-axis and intersected occupancy, the CN-DHF model container and ray
//! marching against it.

use std::path::Path;

use crate::format::{Reader, Writer};
use crate::mesh::{Normalization, Vec3};
use crate::raster::HeightFieldRaster;
use crate::rotation::DhfAxis;
use crate::siren::SirenModel;
use crate::train::predict_raster;
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"CNDF";
pub const MODEL_VERSION: u32 = 1;

/// Default marching step: one voxel of a 512 grid over `[-1, 1]`.
pub const DEFAULT_RAY_STEP: f64 = 2.0 / 512.0;
pub const BISECTION_STEPS: usize = 20;

/// Closed-form height fields, mostly for tests.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnalyticField {
    /// Ball of this radius centered on the frame origin.
    Sphere {
        radius: f64,
    },
    /// `|z| <= half_thickness` everywhere.
    Slab {
        half_thickness: f64,
    },
    Empty,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HeightField {
    Siren(SirenModel),
    Raster(HeightFieldRaster),
    Analytic(AnalyticField),
}

const OUTSIDE: [f64; 2] = [1.0, -1.0];

impl HeightField {
    /// `(near, far)` at each `(u, v)`; pixels without surface report an
    /// empty interval.
    pub fn eval_batch(&self, uv: &[[f64; 2]]) -> Vec<[f64; 2]> {
        match self {
            HeightField::Siren(net) => net.forward(uv),
            HeightField::Raster(r) => uv
                .iter()
                .map(|p| r.sample(p[0], p[1]).map_or(OUTSIDE, |(n, f)| [n, f]))
                .collect(),
            HeightField::Analytic(a) => uv
                .iter()
                .map(|p| match *a {
                    AnalyticField::Sphere { radius } => {
                        let q = radius * radius - p[0] * p[0] - p[1] * p[1];
                        if q >= 0.0 {
                            [-q.sqrt(), q.sqrt()]
                        } else {
                            OUTSIDE
                        }
                    }
                    AnalyticField::Slab { half_thickness } => [-half_thickness, half_thickness],
                    AnalyticField::Empty => OUTSIDE,
                })
                .collect(),
        }
    }
}

/// One axis of a decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisField {
    pub axis: DhfAxis,
    pub field: HeightField,
}

impl AxisField {
    pub fn new(axis: DhfAxis, field: HeightField) -> Self {
        AxisField { axis, field }
    }

    /// Occupancy of this axis alone: inside iff the frame point lies over
    /// `[-1, 1]^2` and between the two heights.
    pub fn occupancy(&self, points: &[Vec3]) -> Vec<bool> {
        let frame: Vec<Vec3> = points.iter().map(|p| self.axis.to_frame(p)).collect();
        let mut over = Vec::with_capacity(frame.len());
        let mut uv = Vec::with_capacity(frame.len());
        for (k, q) in frame.iter().enumerate() {
            if q.x.abs() <= 1.0 && q.y.abs() <= 1.0 {
                over.push(k);
                uv.push([q.x, q.y]);
            }
        }
        let heights = self.field.eval_batch(&uv);
        let mut out = vec![false; points.len()];
        for (k, h) in over.into_iter().zip(heights) {
            let z = frame[k].z;
            out[k] = h[0] <= z && z <= h[1];
        }
        out
    }

    /// Height raster of this axis at `resolution^2`.
    pub fn predict_raster(&self, resolution: usize) -> HeightFieldRaster {
        match &self.field {
            HeightField::Siren(net) => predict_raster(net, &self.axis, resolution, resolution),
            HeightField::Raster(r) => {
                let mut out = r.resample(resolution, resolution);
                out.axis = self.axis;
                out
            }
            HeightField::Analytic(_) => {
                let mut out = HeightFieldRaster::empty(resolution, resolution, self.axis);
                let mut uv = Vec::with_capacity(resolution * resolution);
                for j in 0..resolution {
                    for i in 0..resolution {
                        let (u, v) = out.uv(i, j);
                        uv.push([u, v]);
                    }
                }
                for (k, h) in self.field.eval_batch(&uv).into_iter().enumerate() {
                    if h[0] <= h[1] {
                        out.near[k] = h[0].clamp(-1.0, 1.0) as f32;
                        out.far[k] = h[1].clamp(-1.0, 1.0) as f32;
                        out.valid[k] = true;
                    }
                }
                out
            }
        }
    }
}

/// A shape represented as the intersection of per-axis double height
/// fields, in normalized coordinates over `[-1, 1]^3`.
#[derive(Clone, Debug, PartialEq)]
pub struct CnDhfModel {
    pub name: String,
    /// Maps original mesh coordinates into the normalized cube.
    pub normalization: Normalization,
    entries: Vec<AxisField>,
}

/// Minimum angle separating two axes of one model.
pub const MIN_AXIS_SEPARATION: f64 = 1e-6;

#[inline]
fn in_cube(p: &Vec3) -> bool {
    p.x.abs() <= 1.0 && p.y.abs() <= 1.0 && p.z.abs() <= 1.0
}

impl CnDhfModel {
    pub fn new(name: impl Into<String>, normalization: Normalization, entries: Vec<AxisField>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("a model needs at least one axis".into()));
        }
        for (i, a) in entries.iter().enumerate() {
            for b in &entries[..i] {
                if a.axis.angle_to(&b.axis) <= MIN_AXIS_SEPARATION {
                    return Err(Error::InvalidArgument("duplicate axis in model".into()));
                }
            }
        }
        Ok(CnDhfModel {
            name: name.into(),
            normalization,
            entries,
        })
    }

    pub fn entries(&self) -> &[AxisField] {
        &self.entries
    }

    pub fn axes(&self) -> Vec<DhfAxis> {
        self.entries.iter().map(|e| e.axis).collect()
    }

    /// Intersected occupancy. Points outside `[-1, 1]^3` are outside; later
    /// axes are evaluated only on points every earlier axis accepted.
    pub fn occupancy(&self, points: &[Vec3]) -> Vec<bool> {
        let mut alive: Vec<usize> = (0..points.len()).filter(|&k| in_cube(&points[k])).collect();
        for entry in &self.entries {
            if alive.is_empty() {
                break;
            }
            let subset: Vec<Vec3> = alive.iter().map(|&k| points[k]).collect();
            let inside = entry.occupancy(&subset);
            alive = alive
                .into_iter()
                .zip(inside)
                .filter_map(|(k, keep)| keep.then_some(k))
                .collect();
        }
        let mut out = vec![false; points.len()];
        for k in alive {
            out[k] = true;
        }
        out
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.occupancy(std::slice::from_ref(p))[0]
    }

    /// First surface crossing along `origin + t * direction` for `t` in
    /// `[0, t_max]`: fixed-step marching refined by bisection. Returns
    /// `Some(0.0)` when the origin is inside.
    pub fn raycast(&self, origin: &Vec3, direction: &Vec3, t_max: f64, step: f64) -> Option<f64> {
        if self.contains(origin) {
            return Some(0.0);
        }
        let d = direction.normalize();
        let (t0, t1) = clip_to_cube(origin, &d, 0.0, t_max)?;
        const BATCH: usize = 64;
        let mut prev = (t0 - step).max(0.0);
        let mut k = 0usize;
        loop {
            let ts: Vec<f64> = (k..k + BATCH)
                .map(|i| t0 + i as f64 * step)
                .take_while(|&t| t <= t1)
                .collect();
            if ts.is_empty() {
                return None;
            }
            let pts: Vec<Vec3> = ts.iter().map(|&t| origin + d * t).collect();
            let occ = self.occupancy(&pts);
            if let Some(i) = occ.iter().position(|&o| o) {
                let lo = if i == 0 { prev } else { ts[i - 1] };
                return Some(self.bisect(origin, &d, lo, ts[i], false));
            }
            prev = *ts.last().unwrap();
            k += BATCH;
        }
    }

    /// Every occupancy transition along the segment `[t_min, t_max]`.
    pub fn crossings(&self, origin: &Vec3, direction: &Vec3, t_min: f64, t_max: f64, step: f64) -> Vec<f64> {
        let d = direction.normalize();
        let Some((t0, t1)) = clip_to_cube(origin, &d, t_min, t_max) else {
            return Vec::new();
        };
        // Pad by one step on each side so boundary contacts register as
        // transitions from the (empty) exterior of the cube.
        let lo = t0 - step;
        let count = ((t1 - lo) / step).ceil() as usize + 2;
        let ts: Vec<f64> = (0..count).map(|i| lo + i as f64 * step).collect();
        let pts: Vec<Vec3> = ts.iter().map(|&t| origin + d * t).collect();
        let occ = self.occupancy(&pts);
        let mut out = Vec::new();
        for i in 1..ts.len() {
            if occ[i] != occ[i - 1] {
                out.push(self.bisect(origin, &d, ts[i - 1], ts[i], occ[i - 1]));
            }
        }
        out
    }

    fn bisect(&self, origin: &Vec3, d: &Vec3, mut lo: f64, mut hi: f64, lo_inside: bool) -> f64 {
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.contains(&(origin + d * mid)) == lo_inside {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Encodes as `.cndhf`. Only network-backed models are serializable.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::new();
        w.bytes(MODEL_MAGIC).u32(MODEL_VERSION);
        for c in self.normalization.center {
            w.f64(c);
        }
        w.f64(self.normalization.scale);
        w.u32(self.name.len() as u32).bytes(self.name.as_bytes());
        w.u32(self.entries.len() as u32);
        for e in &self.entries {
            let HeightField::Siren(net) = &e.field else {
                return Err(Error::InvalidArgument("only network-backed models can be saved".into()));
            };
            let blob = net.to_net_bytes(&e.axis);
            w.u64(blob.len() as u64).bytes(&blob);
        }
        Ok(w.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(MODEL_MAGIC)?;
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported .cndhf version {version}")));
        }
        let center = r.f64_array()?;
        let scale = r.f64()?;
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Format("model name is not UTF-8".into()))?;
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let len = r.u64()? as usize;
            let (axis, net) = SirenModel::from_net_bytes(r.take(len)?)?;
            entries.push(AxisField::new(axis, HeightField::Siren(net)));
        }
        r.finish()?;
        Self::new(name, Normalization { center, scale }, entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Clips `[t_min, t_max]` to the slab intersection with `[-1, 1]^3`.
pub fn clip_to_cube(origin: &Vec3, d: &Vec3, t_min: f64, t_max: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (t_min, t_max);
    for a in 0..3 {
        if d[a] == 0.0 {
            if origin[a].abs() > 1.0 {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[a];
        let (mut ta, mut tb) = ((-1.0 - origin[a]) * inv, (1.0 - origin[a]) * inv);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        lo = lo.max(ta);
        hi = hi.min(tb);
    }
    (lo <= hi).then_some((lo, hi))
}
