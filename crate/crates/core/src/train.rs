//! Fitting a [`SirenModel`] to a ground-truth raster: the loss, its
//! gradient, Adam, and the training loop.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::raster::{
    numerical_laplacian, pixel_center, stencil_zero_padded, HeightFieldRaster, OUTSIDE_FAR, OUTSIDE_NEAR,
};
use crate::rotation::DhfAxis;
use crate::siren::{ForwardCache, SirenModel};
use crate::{par, Error, Result};

/// Penalty on pixels without surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutsideLoss {
    /// `max(0, far - near + margin)`: only asks for an empty interval.
    Hinge,
    /// Regress the stored outside constants `near = 1`, `far = -1`.
    RegressConstants,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batch {
    FullRaster,
    /// A random square patch of this side per iteration.
    Patch(usize),
    /// Every `stride`-th pixel along both directions, starting at a random
    /// phase each iteration. Costs as much as a raster `stride` times
    /// coarser but eventually visits every pixel of the target.
    Subgrid(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Weight of the Laplacian term; zero disables it.
    pub laplacian_weight: f64,
    pub hinge_margin: f64,
    pub outside: OutsideLoss,
    pub batch: Batch,
    pub log_every: usize,
    /// Iteration counts after which the checkpoint callback fires.
    pub milestones: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            laplacian_weight: 10.0,
            hinge_margin: 0.1,
            outside: OutsideLoss::Hinge,
            batch: Batch::FullRaster,
            log_every: 50,
            milestones: Vec::new(),
            seed: 0,
        }
    }
}

/// Ground truth prepared for training at a fixed resolution.
#[derive(Clone, Debug)]
pub struct TrainTarget {
    pub width: usize,
    pub height: usize,
    /// `(u, v)` pixel centers, row-major.
    pub inputs: Vec<f64>,
    pub near: Vec<f64>,
    pub far: Vec<f64>,
    pub valid: Vec<bool>,
    pub lap_near: Vec<f64>,
    pub lap_far: Vec<f64>,
    pub support: Vec<bool>,
}

impl TrainTarget {
    pub fn new(raster: &HeightFieldRaster) -> Self {
        let (w, h) = (raster.width, raster.height);
        let mut inputs = Vec::with_capacity(2 * w * h);
        for j in 0..h {
            for i in 0..w {
                inputs.push(pixel_center(i, w));
                inputs.push(pixel_center(j, h));
            }
        }
        let near: Vec<f64> = raster.near.iter().map(|&x| x as f64).collect();
        let far: Vec<f64> = raster.far.iter().map(|&x| x as f64).collect();
        let ln = numerical_laplacian(&near, &raster.valid, w, h);
        let lf = numerical_laplacian(&far, &raster.valid, w, h);
        TrainTarget {
            width: w,
            height: h,
            inputs,
            near,
            far,
            valid: raster.valid.clone(),
            lap_near: ln.values,
            lap_far: lf.values,
            support: ln.support,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixels `(i0 + stride * a, j0 + stride * b)`, with the Laplacian
    /// recomputed on that coarser grid.
    pub fn subgrid(&self, stride: usize, i0: usize, j0: usize) -> TrainTarget {
        let cols: Vec<usize> = (i0..self.width).step_by(stride).collect();
        let rows: Vec<usize> = (j0..self.height).step_by(stride).collect();
        let (w, h) = (cols.len(), rows.len());
        let mut inputs = Vec::with_capacity(2 * w * h);
        let mut near = Vec::with_capacity(w * h);
        let mut far = Vec::with_capacity(w * h);
        let mut valid = Vec::with_capacity(w * h);
        for &j in &rows {
            for &i in &cols {
                let k = j * self.width + i;
                inputs.extend_from_slice(&self.inputs[2 * k..2 * k + 2]);
                near.push(self.near[k]);
                far.push(self.far[k]);
                valid.push(self.valid[k]);
            }
        }
        let ln = numerical_laplacian(&near, &valid, w, h);
        let lf = numerical_laplacian(&far, &valid, w, h);
        TrainTarget {
            width: w,
            height: h,
            inputs,
            near,
            far,
            valid,
            lap_near: ln.values,
            lap_far: lf.values,
            support: ln.support,
        }
    }

    /// Square sub-window with origin `(i0, j0)`. The Laplacian support is
    /// restricted to the window interior so every stencil stays inside it.
    pub fn patch(&self, i0: usize, j0: usize, size: usize) -> TrainTarget {
        let mut out = TrainTarget {
            width: size,
            height: size,
            inputs: Vec::with_capacity(2 * size * size),
            near: Vec::with_capacity(size * size),
            far: Vec::with_capacity(size * size),
            valid: Vec::with_capacity(size * size),
            lap_near: Vec::with_capacity(size * size),
            lap_far: Vec::with_capacity(size * size),
            support: Vec::with_capacity(size * size),
        };
        for j in 0..size {
            for i in 0..size {
                let k = (j0 + j) * self.width + i0 + i;
                let interior = i > 0 && j > 0 && i + 1 < size && j + 1 < size;
                out.inputs.extend_from_slice(&self.inputs[2 * k..2 * k + 2]);
                out.near.push(self.near[k]);
                out.far.push(self.far[k]);
                out.valid.push(self.valid[k]);
                out.lap_near.push(self.lap_near[k]);
                out.lap_far.push(self.lap_far[k]);
                out.support.push(self.support[k] && interior);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    pub regression: f64,
    pub laplacian: f64,
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Loss value and gradient w.r.t. the network outputs (`n x 2`) for
/// predictions `pred` (`n x 2`). Kinks of the absolute value and the hinge
/// take a zero subgradient.
pub fn loss_and_output_gradient(pred: &[f64], target: &TrainTarget, config: &TrainConfig) -> (LossTerms, Vec<f64>) {
    let n = target.len();
    let inv_n = 1.0 / n as f64;
    let mut grad = vec![0.0; 2 * n];
    let mut reg = 0.0;
    for p in 0..n {
        let (pn, pf) = (pred[2 * p], pred[2 * p + 1]);
        if target.valid[p] {
            let (dn, df) = (pn - target.near[p], pf - target.far[p]);
            reg += 0.5 * (dn.abs() + df.abs());
            grad[2 * p] = 0.5 * sign(dn) * inv_n;
            grad[2 * p + 1] = 0.5 * sign(df) * inv_n;
        } else {
            match config.outside {
                OutsideLoss::Hinge => {
                    let slack = pf - pn + config.hinge_margin;
                    if slack > 0.0 {
                        reg += slack;
                        grad[2 * p] = -inv_n;
                        grad[2 * p + 1] = inv_n;
                    }
                }
                OutsideLoss::RegressConstants => {
                    let (dn, df) = (pn - OUTSIDE_NEAR as f64, pf - OUTSIDE_FAR as f64);
                    reg += 0.5 * (dn.abs() + df.abs());
                    grad[2 * p] = 0.5 * sign(dn) * inv_n;
                    grad[2 * p + 1] = 0.5 * sign(df) * inv_n;
                }
            }
        }
    }
    reg *= inv_n;

    let mut lap = 0.0;
    let support_count = target.support.iter().filter(|&&s| s).count();
    if config.laplacian_weight != 0.0 && support_count > 0 {
        let w = target.width;
        let scale = 1.0 / (2.0 * support_count as f64);
        for (c, gt) in [&target.lap_near, &target.lap_far].into_iter().enumerate() {
            let mut g = vec![0.0; n];
            for k in 0..n {
                if !target.support[k] {
                    continue;
                }
                let at = |q: usize| pred[2 * q + c];
                let lp = at(k - 1) + at(k + 1) + at(k - w) + at(k + w) - 4.0 * at(k);
                let r = lp - gt[k];
                lap += r.abs() * scale;
                g[k] = config.laplacian_weight * sign(r) * scale;
            }
            let back = stencil_zero_padded(&g, w, target.height);
            for k in 0..n {
                grad[2 * k + c] += back[k];
            }
        }
    }
    let total = reg + config.laplacian_weight * lap;
    (
        LossTerms {
            total,
            regression: reg,
            laplacian: lap,
        },
        grad,
    )
}

const CHUNK: usize = 4096;

/// Loss and parameter gradients of `model` on `target`.
pub fn loss_and_gradients(model: &SirenModel, target: &TrainTarget, config: &TrainConfig) -> (LossTerms, SirenModel) {
    let n = target.len();
    let chunks = n.div_ceil(CHUNK);
    let forward = par::map_range(chunks, |c| {
        let range = 2 * c * CHUNK..2 * ((c + 1) * CHUNK).min(n);
        let mut cache = ForwardCache::default();
        let out = model.forward_cached(&target.inputs[range], &mut cache);
        (cache, out)
    });
    let pred: Vec<f64> = forward.iter().flat_map(|(_, o)| o.iter().copied()).collect();
    let (terms, d_out) = loss_and_output_gradient(&pred, target, config);
    let partial = par::map_range(chunks, |c| {
        let mut g = model.zeros_like();
        let range = 2 * c * CHUNK..2 * ((c + 1) * CHUNK).min(n);
        model.backward(&forward[c].0, &d_out[range], &mut g);
        g
    });
    let mut grads = model.zeros_like();
    for g in &partial {
        for (acc, x) in grads.params_mut().zip(g.params()) {
            *acc += x;
        }
    }
    (terms, grads)
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    first: SirenModel,
    second: SirenModel,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    pub fn new(model: &SirenModel, config: &TrainConfig) -> Self {
        Adam {
            first: model.zeros_like(),
            second: model.zeros_like(),
            step: 0,
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
        }
    }

    pub fn step(&mut self, model: &mut SirenModel, grads: &SirenModel) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2) = (self.beta1, self.beta2);
        for (((p, g), m), v) in model
            .params_mut()
            .zip(grads.params())
            .zip(self.first.params_mut())
            .zip(self.second.params_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    pub loss: LossTerms,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub log: Vec<LogRow>,
    pub iterations: usize,
    /// Mean over valid pixels of the averaged near/far absolute error of
    /// the final network on the full target.
    pub final_l1: f64,
    pub seconds: f64,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,total,regression,laplacian,seconds\n");
        for r in &self.log {
            s.push_str(&format!(
                "{},{:.9e},{:.9e},{:.9e},{:.3}\n",
                r.iteration, r.loss.total, r.loss.regression, r.loss.laplacian, r.seconds
            ));
        }
        s
    }
}

/// Trains `model` in place. `on_milestone` receives the model after each
/// iteration count listed in `config.milestones`.
pub fn train(
    model: &mut SirenModel,
    target: &TrainTarget,
    config: &TrainConfig,
    mut on_milestone: impl FnMut(usize, &SirenModel) -> Result<()>,
) -> Result<TrainReport> {
    if !target.valid.iter().any(|&v| v) {
        return Err(Error::NoValidPixels);
    }
    let mut phases = Vec::new();
    match config.batch {
        Batch::FullRaster => {}
        Batch::Patch(size) => {
            if size < 3 || size > target.width || size > target.height {
                return Err(Error::InvalidArgument(format!(
                    "patch size {size} does not fit the target"
                )));
            }
        }
        Batch::Subgrid(stride) => {
            if stride == 0 || !target.width.is_multiple_of(stride) || !target.height.is_multiple_of(stride) {
                return Err(Error::InvalidArgument(format!(
                    "stride {stride} does not divide the {}x{} target",
                    target.width, target.height
                )));
            }
            if target.width / stride < 3 || target.height / stride < 3 {
                return Err(Error::InvalidArgument(format!(
                    "stride {stride} leaves fewer than 3x3 pixels"
                )));
            }
            phases = (0..stride * stride)
                .map(|p| target.subgrid(stride, p % stride, p / stride))
                .collect();
        }
    }
    let start = Instant::now();
    let mut adam = Adam::new(model, config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = TrainReport {
        iterations: config.iterations,
        ..Default::default()
    };
    let log_every = config.log_every.max(1);
    for it in 0..config.iterations {
        let (terms, grads) = match config.batch {
            Batch::FullRaster => loss_and_gradients(model, target, config),
            Batch::Patch(size) => {
                let i0 = rng.random_range(0..=target.width - size);
                let j0 = rng.random_range(0..=target.height - size);
                loss_and_gradients(model, &target.patch(i0, j0, size), config)
            }
            Batch::Subgrid(_) => loss_and_gradients(model, &phases[rng.random_range(0..phases.len())], config),
        };
        if !terms.total.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: it });
        }
        if it % log_every == 0 || it + 1 == config.iterations {
            report.log.push(LogRow {
                iteration: it,
                loss: terms,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        adam.step(model, &grads);
        if config.milestones.contains(&(it + 1)) {
            on_milestone(it + 1, model)?;
        }
    }
    report.final_l1 = valid_l1(model, target);
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Mean over valid pixels of `(|near error| + |far error|) / 2`.
pub fn valid_l1(model: &SirenModel, target: &TrainTarget) -> f64 {
    let pts: Vec<[f64; 2]> = target.inputs.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
    let pred = model.forward(&pts);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, p) in pred.iter().enumerate() {
        if target.valid[k] {
            sum += 0.5 * ((p[0] - target.near[k]).abs() + (p[1] - target.far[k]).abs());
            count += 1;
        }
    }
    sum / count.max(1) as f64
}

/// Evaluates the network on a `width x height` grid. Pixels with
/// `near <= far` are valid and keep their heights clamped to `[-1, 1]`; the
/// rest store the outside constants.
pub fn predict_raster(model: &SirenModel, axis: &DhfAxis, width: usize, height: usize) -> HeightFieldRaster {
    let mut pts = Vec::with_capacity(width * height);
    for j in 0..height {
        for i in 0..width {
            pts.push([pixel_center(i, width), pixel_center(j, height)]);
        }
    }
    let pred = model.forward(&pts);
    let mut out = HeightFieldRaster::empty(width, height, *axis);
    for (k, p) in pred.iter().enumerate() {
        if p[0] <= p[1] {
            out.near[k] = p[0].clamp(-1.0, 1.0) as f32;
            out.far[k] = p[1].clamp(-1.0, 1.0) as f32;
            out.valid[k] = true;
        }
    }
    out
}
