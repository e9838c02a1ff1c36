//! Double-height-field rasters: ground-truth baking by ray casting, the
//! numerical Laplacian, resampling and height-field mesh export.

use std::path::Path;

use crate::bvh::{Bvh, Ray};
use crate::format::{Reader, Writer};
use crate::mesh::{TriangleMesh, Vec3};
use crate::rotation::DhfAxis;
use crate::{par, Error, Result};

pub const DHFR_MAGIC: &[u8; 4] = b"DHFR";
pub const DHFR_VERSION: u32 = 1;

/// Heights stored for pixels without a surface: `near = +1`, `far = -1`.
pub const OUTSIDE_NEAR: f32 = 1.0;
pub const OUTSIDE_FAR: f32 = -1.0;

/// Paired near/far height grids over `[-1, 1]^2` in the frame of `axis`.
///
/// Row-major: pixel `(i, j)` lives at `j * width + i` and is centered at
/// `uv = (-1 + (2i + 1) / W, -1 + (2j + 1) / H)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightFieldRaster {
    pub width: usize,
    pub height: usize,
    pub axis: DhfAxis,
    pub near: Vec<f32>,
    pub far: Vec<f32>,
    pub valid: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Near,
    Far,
}

#[inline]
pub fn pixel_center(i: usize, n: usize) -> f64 {
    -1.0 + (2 * i + 1) as f64 / n as f64
}

impl HeightFieldRaster {
    /// All pixels outside.
    pub fn empty(width: usize, height: usize, axis: DhfAxis) -> Self {
        let n = width * height;
        HeightFieldRaster {
            width,
            height,
            axis,
            near: vec![OUTSIDE_NEAR; n],
            far: vec![OUTSIDE_FAR; n],
            valid: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn uv(&self, i: usize, j: usize) -> (f64, f64) {
        (pixel_center(i, self.width), pixel_center(j, self.height))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn heights(&self, which: Which) -> &[f32] {
        match which {
            Which::Near => &self.near,
            Which::Far => &self.far,
        }
    }

    /// Mask-aware bilinear lookup at `(u, v)`. Uses bilinear interpolation
    /// when the four surrounding pixel centers are valid, the nearest pixel
    /// otherwise. Returns `None` outside the domain or on an invalid pixel.
    pub fn sample(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        if !(-1.0..=1.0).contains(&u) || !(-1.0..=1.0).contains(&v) {
            return None;
        }
        let (w, h) = (self.width, self.height);
        let x = ((u + 1.0) * w as f64 * 0.5 - 0.5).clamp(0.0, (w - 1) as f64);
        let y = ((v + 1.0) * h as f64 * 0.5 - 0.5).clamp(0.0, (h - 1) as f64);
        let (i0, j0) = (x.floor() as usize, y.floor() as usize);
        let (i1, j1) = ((i0 + 1).min(w - 1), (j0 + 1).min(h - 1));
        let (fx, fy) = (x - i0 as f64, y - j0 as f64);
        let idx = [j0 * w + i0, j0 * w + i1, j1 * w + i0, j1 * w + i1];
        if idx.iter().all(|&k| self.valid[k]) {
            let wts = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
            let mut near = 0.0;
            let mut far = 0.0;
            for (k, wt) in idx.iter().zip(wts) {
                near += wt * self.near[*k] as f64;
                far += wt * self.far[*k] as f64;
            }
            return Some((near, far));
        }
        let k = (y.round() as usize) * w + x.round() as usize;
        self.valid[k].then(|| (self.near[k] as f64, self.far[k] as f64))
    }

    /// Resamples at the pixel centers of a `width x height` grid with
    /// [`HeightFieldRaster::sample`].
    pub fn resample(&self, width: usize, height: usize) -> Self {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let mut out = HeightFieldRaster::empty(width, height, self.axis);
        for j in 0..height {
            for i in 0..width {
                let (u, v) = (pixel_center(i, width), pixel_center(j, height));
                if let Some((n, f)) = self.sample(u, v) {
                    let k = j * width + i;
                    out.near[k] = n as f32;
                    out.far[k] = f as f32;
                    out.valid[k] = true;
                }
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(DHFR_MAGIC)
            .u32(DHFR_VERSION)
            .u32(self.width as u32)
            .u32(self.height as u32);
        for d in self.axis.direction {
            w.f64(d);
        }
        for r in self.axis.rotation {
            w.f64(r);
        }
        for k in 0..self.len() {
            w.f32(self.near[k]).f32(self.far[k]).u8(self.valid[k] as u8);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(DHFR_MAGIC)?;
        let version = r.u32()?;
        if version != DHFR_VERSION {
            return Err(Error::Format(format!("unsupported .dhfr version {version}")));
        }
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let axis = DhfAxis::from_parts(r.f64_array()?, r.f64_array()?);
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::Format("raster size overflow".into()))?;
        let mut out = HeightFieldRaster::empty(width, height, axis);
        for k in 0..n {
            out.near[k] = r.f32()?;
            out.far[k] = r.f32()?;
            out.valid[k] = match r.u8()? {
                0 => false,
                1 => true,
                other => return Err(Error::Format(format!("bad validity byte {other}"))),
            };
        }
        r.finish()?;
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// A baked raster plus diagnostics.
#[derive(Clone, Debug)]
pub struct Bake {
    pub raster: HeightFieldRaster,
    /// Pixels whose line crossed the surface an odd number of times.
    pub odd_hit_pixels: usize,
    /// Pixels whose line crossed more than two surface points.
    pub multi_interval_pixels: usize,
}

/// Half-length of the line cast through each pixel; normalized geometry lies
/// well within it.
const BAKE_HALF_LENGTH: f64 = 4.0;

/// Bakes a ground-truth raster by casting the full line through every pixel
/// center along `axis` and keeping the outermost crossings. Heights are
/// clamped to `[-1, 1]`.
pub fn bake_raster(mesh: &TriangleMesh, axis: &DhfAxis, width: usize, height: usize) -> Result<Bake> {
    bake_raster_with(&Bvh::new(mesh), axis, width, height)
}

pub fn bake_raster_with(bvh: &Bvh, axis: &DhfAxis, width: usize, height: usize) -> Result<Bake> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidArgument(format!(
            "raster resolution {width}x{height} below 2x2"
        )));
    }
    let dir = axis.direction();
    let rows = par::map_range(height, |j| {
        let mut hits = Vec::new();
        let mut row = Vec::with_capacity(width);
        for i in 0..width {
            let (u, v) = (pixel_center(i, width), pixel_center(j, height));
            let origin = axis.from_frame(&Vec3::new(u, v, -BAKE_HALF_LENGTH));
            hits.clear();
            bvh.intersect_all(&Ray::new(origin, dir), 0.0, 2.0 * BAKE_HALF_LENGTH, &mut hits);
            if hits.is_empty() {
                row.push(None);
                continue;
            }
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for h in &hits {
                lo = lo.min(h.t);
                hi = hi.max(h.t);
            }
            let near = (lo - BAKE_HALF_LENGTH).clamp(-1.0, 1.0);
            let far = (hi - BAKE_HALF_LENGTH).clamp(-1.0, 1.0);
            row.push(Some((near, far, hits.len())));
        }
        row
    });
    let mut raster = HeightFieldRaster::empty(width, height, *axis);
    let mut odd = 0;
    let mut multi = 0;
    for (j, row) in rows.into_iter().enumerate() {
        for (i, px) in row.into_iter().enumerate() {
            if let Some((near, far, count)) = px {
                let k = j * width + i;
                raster.near[k] = near as f32;
                raster.far[k] = far as f32;
                raster.valid[k] = true;
                odd += count % 2;
                multi += (count > 2) as usize;
            }
        }
    }
    Ok(Bake {
        raster,
        odd_hit_pixels: odd,
        multi_interval_pixels: multi,
    })
}

/// Output of the 5-point Laplacian.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    /// Pixels whose center and four neighbours are valid.
    pub support: Vec<bool>,
}

/// Unnormalized 5-point stencil (center -4, neighbours +1), evaluated only
/// where the center and its four neighbours are valid; zero elsewhere.
pub fn numerical_laplacian(image: &[f64], valid: &[bool], width: usize, height: usize) -> LaplacianImage {
    let mut values = vec![0.0; width * height];
    let mut support = vec![false; width * height];
    for j in 1..height.saturating_sub(1) {
        for i in 1..width.saturating_sub(1) {
            let k = j * width + i;
            let nbrs = [k - 1, k + 1, k - width, k + width];
            if valid[k] && nbrs.iter().all(|&n| valid[n]) {
                support[k] = true;
                values[k] = nbrs.iter().map(|&n| image[n]).sum::<f64>() - 4.0 * image[k];
            }
        }
    }
    LaplacianImage {
        width,
        height,
        values,
        support,
    }
}

/// The same stencil applied everywhere with zero padding. This is the
/// adjoint used to back-propagate through [`numerical_laplacian`].
pub fn stencil_zero_padded(image: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    for j in 0..height {
        for i in 0..width {
            let k = j * width + i;
            let mut acc = -4.0 * image[k];
            if i > 0 {
                acc += image[k - 1];
            }
            if i + 1 < width {
                acc += image[k + 1];
            }
            if j > 0 {
                acc += image[k - width];
            }
            if j + 1 < height {
                acc += image[k + width];
            }
            out[k] = acc;
        }
    }
    out
}

/// Triangulates one side of the raster: every 2x2 block of valid pixels
/// gives two triangles. `Far` faces along `+axis`, `Near` along `-axis`.
pub fn export_hf_mesh(raster: &HeightFieldRaster, axis: &DhfAxis, which: Which) -> Result<TriangleMesh> {
    if raster.valid_count() == 0 {
        return Err(Error::NoValidPixels);
    }
    let (w, h) = (raster.width, raster.height);
    let heights = raster.heights(which);
    let mut index = vec![u32::MAX; w * h];
    let mut vertices = Vec::new();
    for j in 0..h {
        for i in 0..w {
            let k = j * w + i;
            if raster.valid[k] {
                let (u, v) = raster.uv(i, j);
                index[k] = vertices.len() as u32;
                vertices.push(axis.from_frame(&Vec3::new(u, v, heights[k] as f64)));
            }
        }
    }
    let mut triangles = Vec::new();
    for j in 0..h - 1 {
        for i in 0..w - 1 {
            let q = [
                index[j * w + i],
                index[j * w + i + 1],
                index[(j + 1) * w + i + 1],
                index[(j + 1) * w + i],
            ];
            if q.contains(&u32::MAX) {
                continue;
            }
            match which {
                Which::Far => {
                    triangles.push([q[0], q[1], q[2]]);
                    triangles.push([q[0], q[2], q[3]]);
                }
                Which::Near => {
                    triangles.push([q[0], q[2], q[1]]);
                    triangles.push([q[0], q[3], q[2]]);
                }
            }
        }
    }
    if triangles.is_empty() {
        return Err(Error::NoValidPixels);
    }
    TriangleMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn z_axis() -> DhfAxis {
        DhfAxis::new(Vec3::z())
    }

    #[test]
    fn box_raster_is_exact() {
        let b = fixtures::box_mesh(Vec3::repeat(-0.5), Vec3::repeat(0.5));
        let bake = bake_raster(&b, &z_axis(), 64, 64).unwrap();
        let r = &bake.raster;
        for j in 0..64 {
            for i in 0..64 {
                let (u, v) = r.uv(i, j);
                let k = j * 64 + i;
                let inside = u.abs() < 0.5 && v.abs() < 0.5;
                assert_eq!(r.valid[k], inside, "pixel {i},{j}");
                if inside {
                    assert_eq!((r.near[k], r.far[k]), (-0.5, 0.5));
                } else {
                    assert_eq!((r.near[k], r.far[k]), (OUTSIDE_NEAR, OUTSIDE_FAR));
                }
            }
        }
        assert_eq!(bake.odd_hit_pixels, 0);
    }

    #[test]
    fn sphere_center_pixel() {
        let s = fixtures::icosphere(0.95, 5);
        let r = bake_raster(&s, &z_axis(), 64, 64).unwrap().raster;
        // Four pixels touch the center; check one adjacent to it.
        let k = 32 * 64 + 32;
        let (u, v) = r.uv(32, 32);
        let exact = (0.95f64 * 0.95 - u * u - v * v).sqrt();
        assert!((r.near[k] as f64 + exact).abs() < 2e-3);
        assert!((r.far[k] as f64 - exact).abs() < 2e-3);
        assert!(!r.valid[0]);
    }

    #[test]
    fn resolution_validation() {
        let b = fixtures::box_mesh(Vec3::repeat(-0.5), Vec3::repeat(0.5));
        assert!(bake_raster(&b, &z_axis(), 1, 8).is_err());
    }

    #[test]
    fn laplacian_constant_and_ramp_vanish() {
        let (w, h) = (7, 6);
        let valid = vec![true; w * h];
        let constant = vec![0.3; w * h];
        let lap = numerical_laplacian(&constant, &valid, w, h);
        assert!(lap.values.iter().all(|&x| x == 0.0));
        let ramp: Vec<f64> = (0..w * h)
            .map(|k| 0.25 * (k % w) as f64 - 0.5 * (k / w) as f64)
            .collect();
        let lap = numerical_laplacian(&ramp, &valid, w, h);
        assert!(lap.values.iter().all(|&x| x.abs() < 1e-12));
        assert_eq!(lap.support.iter().filter(|&&s| s).count(), (w - 2) * (h - 2));
    }

    #[test]
    fn laplacian_of_parabola() {
        let (w, h) = (9, 9);
        let delta = 2.0 / w as f64;
        let img: Vec<f64> = (0..w * h).map(|k| pixel_center(k % w, w).powi(2)).collect();
        let lap = numerical_laplacian(&img, &vec![true; w * h], w, h);
        for k in 0..w * h {
            if lap.support[k] {
                assert!((lap.values[k] - 2.0 * delta * delta).abs() < 1e-12);
            } else {
                assert_eq!(lap.values[k], 0.0);
            }
        }
    }

    #[test]
    fn laplacian_support_respects_mask() {
        let (w, h) = (5, 5);
        let mut valid = vec![true; w * h];
        valid[2 * w + 3] = false;
        let img: Vec<f64> = (0..w * h).map(|k| k as f64 * k as f64).collect();
        let lap = numerical_laplacian(&img, &valid, w, h);
        assert!(!lap.support[2 * w + 2]);
        assert!(!lap.support[2 * w + 3]);
        assert!(lap.support[w + 1]);
        assert_eq!(lap.values[2 * w + 2], 0.0);
    }

    #[test]
    fn export_box_far_is_planar_top() {
        let b = fixtures::box_mesh(Vec3::repeat(-0.5), Vec3::repeat(0.5));
        let r = bake_raster(&b, &z_axis(), 32, 32).unwrap().raster;
        let m = export_hf_mesh(&r, &z_axis(), Which::Far).unwrap();
        assert!(m.vertices().iter().all(|v| (v.z - 0.5).abs() < 1e-9));
        assert!(m.vertices().iter().all(|v| v.x.abs() < 0.5 && v.y.abs() < 0.5));
        for t in 0..m.num_triangles() {
            let [a, b, c] = m.triangle(t);
            assert!((b - a).cross(&(c - a)).z > 0.0);
        }
    }

    #[test]
    fn export_fully_invalid_fails() {
        let r = HeightFieldRaster::empty(8, 8, z_axis());
        assert!(matches!(
            export_hf_mesh(&r, &z_axis(), Which::Near),
            Err(Error::NoValidPixels)
        ));
    }

    #[test]
    fn dhfr_round_trip_and_corruption() {
        let b = fixtures::box_mesh(Vec3::repeat(-0.5), Vec3::repeat(0.5));
        let axis = DhfAxis::new(Vec3::new(0.2, 0.3, 0.9));
        let r = bake_raster(&b, &axis, 16, 12).unwrap().raster;
        let bytes = r.to_bytes();
        assert_eq!(bytes.len(), 4 + 12 + 96 + 16 * 12 * 9);
        let back = HeightFieldRaster::from_bytes(&bytes).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_bytes(), bytes);
        assert!(HeightFieldRaster::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(HeightFieldRaster::from_bytes(&bad).is_err());
    }

    #[test]
    fn bilinear_sample_and_fallback() {
        let mut r = HeightFieldRaster::empty(2, 2, z_axis());
        r.near = vec![0.0, 1.0, 0.0, 1.0];
        r.far = vec![1.0; 4];
        r.valid = vec![true; 4];
        let (n, _) = r.sample(0.0, 0.0).unwrap();
        assert!((n - 0.5).abs() < 1e-12);
        r.valid[3] = false;
        // Nearest pixel to uv (0.4, 0.4) is the invalid one.
        assert!(r.sample(0.4, 0.4).is_none());
        assert!(r.sample(-0.4, -0.4).is_some());
        assert!(r.sample(1.5, 0.0).is_none());
    }
}
