//! Independent reference implementations shared by the integration tests.
//! Everything here is deliberately naive: scalar loops, std `sin`, and
//! brute-force geometry.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use cndhf::mesh::{SurfaceSample, TriangleMesh};
use cndhf::raster::HeightFieldRaster;
use cndhf::rotation::DhfAxis;
use cndhf::siren::{SirenModel, HIDDEN_LAYERS};
use cndhf::train::{OutsideLoss, TrainConfig, TrainTarget};
use cndhf::Vec3;

/// Raster of a ball of radius `r` seen along +z.
pub fn disc_raster(n: usize, r: f64) -> HeightFieldRaster {
    let mut raster = HeightFieldRaster::empty(n, n, DhfAxis::new(Vec3::z()));
    for j in 0..n {
        for i in 0..n {
            let (u, v) = raster.uv(i, j);
            let q = r * r - u * u - v * v;
            if q > 0.0 {
                let k = j * n + i;
                raster.near[k] = -q.sqrt() as f32;
                raster.far[k] = q.sqrt() as f32;
                raster.valid[k] = true;
            }
        }
    }
    raster
}

/// Straightforward scalar forward pass using `f64::sin`.
pub fn reference_forward(model: &SirenModel, u: f64, v: f64) -> [f64; 2] {
    let mut x = vec![u, v];
    for (l, layer) in model.layers.iter().enumerate() {
        let mut y = vec![0.0; layer.rows];
        for r in 0..layer.rows {
            let mut acc = layer.biases[r];
            for c in 0..layer.cols {
                acc += layer.weights[r * layer.cols + c] * x[c];
            }
            y[r] = if l < HIDDEN_LAYERS {
                let omega = if l == 0 { model.first_omega } else { model.hidden_omega };
                (omega * acc).sin()
            } else {
                acc
            };
        }
        x = y;
    }
    [x[0], x[1]]
}

fn kink_sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Training loss recomputed from scratch, plus the sign pattern of every
/// non-smooth term. Two parameter vectors with equal patterns lie on the
/// same smooth piece of the loss.
pub fn reference_loss(model: &SirenModel, target: &TrainTarget, config: &TrainConfig) -> (f64, Vec<i8>) {
    let (w, h) = (target.width, target.height);
    let n = w * h;
    let pred: Vec<[f64; 2]> = (0..n)
        .map(|k| reference_forward(model, target.inputs[2 * k], target.inputs[2 * k + 1]))
        .collect();
    let mut signs = Vec::new();
    let mut reg = 0.0;
    for k in 0..n {
        let [pn, pf] = pred[k];
        let (dn, df) = if target.valid[k] {
            (pn - target.near[k], pf - target.far[k])
        } else if config.outside == OutsideLoss::RegressConstants {
            (pn - 1.0, pf + 1.0)
        } else {
            let slack = pf - pn + config.hinge_margin;
            signs.push(kink_sign(slack));
            reg += slack.max(0.0);
            continue;
        };
        signs.push(kink_sign(dn));
        signs.push(kink_sign(df));
        reg += 0.5 * (dn.abs() + df.abs());
    }
    reg /= n as f64;

    let interior: Vec<usize> = (0..n).filter(|&k| target.support[k]).collect();
    let mut lap = 0.0;
    for c in 0..2 {
        for &k in &interior {
            let f = |q: usize| pred[q][c];
            let value = f(k - 1) + f(k + 1) + f(k - w) + f(k + w) - 4.0 * f(k);
            let gt = if c == 0 { target.lap_near[k] } else { target.lap_far[k] };
            signs.push(kink_sign(value - gt));
            lap += (value - gt).abs();
        }
    }
    if !interior.is_empty() {
        lap /= 2.0 * interior.len() as f64;
    }
    (reg + config.laplacian_weight * lap, signs)
}

/// Plain Möller-Trumbore; returns the hit distance.
pub fn moller_trumbore(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 0.0).then_some(t)
}

fn escapes(mesh: &TriangleMesh, origin: &Vec3, dir: &Vec3) -> bool {
    (0..mesh.num_triangles()).all(|t| moller_trumbore(origin, dir, &mesh.triangle(t)).is_none())
}

/// Visibility of every triangle along `±d`, checking every ray against
/// every triangle.
pub fn brute_force_visibility(mesh: &TriangleMesh, samples: &[SurfaceSample], d: &Vec3) -> Vec<bool> {
    let d = d.normalize();
    let eps = cndhf::axis_select::RAY_OFFSET;
    let mut visible = vec![true; mesh.num_triangles()];
    for s in samples {
        let up = escapes(mesh, &(s.position + d * eps), &d);
        let down = escapes(mesh, &(s.position - d * eps), &-d);
        if !up && !down {
            visible[s.triangle] = false;
        }
    }
    visible
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_cloud<R: Rng>(rng: &mut R, n: usize, offset: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0) + offset))
        .collect()
}

/// Chamfer-L1 and Hausdorff by exhaustive pairwise distances.
pub fn brute_chamfer_hausdorff(a: &[Vec3], b: &[Vec3]) -> (f64, f64) {
    let nearest = |p: &Vec3, set: &[Vec3]| set.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min);
    let ab: Vec<f64> = a.iter().map(|p| nearest(p, b)).collect();
    let ba: Vec<f64> = b.iter().map(|p| nearest(p, a)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let hd = ab.iter().chain(&ba).fold(0.0f64, |m, &x| m.max(x));
    (0.5 * mean(&ab) + 0.5 * mean(&ba), hd)
}

pub fn random_raster<R: Rng>(rng: &mut R) -> HeightFieldRaster {
    let (w, h) = (rng.random_range(2..20), rng.random_range(2..20));
    let mut r = HeightFieldRaster::empty(w, h, DhfAxis::new(random_unit(rng)));
    for k in 0..w * h {
        if rng.random_bool(0.6) {
            let a: f32 = rng.random_range(-1.0..1.0);
            let b: f32 = rng.random_range(-1.0..1.0);
            r.near[k] = a.min(b);
            r.far[k] = a.max(b);
            r.valid[k] = true;
        }
    }
    r
}

/// Small network with weights already representable in `f32`.
pub fn random_net<R: Rng>(rng: &mut R) -> SirenModel {
    let width = rng.random_range(1..9);
    let mut net = SirenModel::with_omegas(width, rng.random_range(1.0..40.0), rng.random_range(1.0..40.0), rng);
    net.round_to_f32();
    net.first_omega = net.first_omega as f32 as f64;
    net.hidden_omega = net.hidden_omega as f32 as f64;
    net
}

/// SHA-256 of every artifact under `dir`. Wall-clock timings are skipped
/// and the seconds column of training logs is dropped before hashing.
pub fn hashed_artifacts(dir: &Path) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == cndhf::pipeline::TIMINGS_FILE {
            continue;
        }
        let bytes = std::fs::read(entry.path()).map_err(|e| e.to_string())?;
        let bytes = if name.starts_with("train_log") {
            String::from_utf8_lossy(&bytes)
                .lines()
                .map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head).to_string() + "\n")
                .collect::<String>()
                .into_bytes()
        } else {
            bytes
        };
        out.insert(name, cndhf::pipeline::sha256_hex(&bytes));
    }
    Ok(out)
}
