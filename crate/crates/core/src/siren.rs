//! The per-axis neural field: a sine-activated MLP mapping `(u, v)` to
//! `(near, far)` heights, with a batched forward pass, manual
//! back-propagation and the `.cndhf-net` codec.

use std::path::Path;

use rand::Rng;

use crate::fastmath;
use crate::format::{Reader, Writer};
use crate::rotation::DhfAxis;
use crate::{par, Error, Result};

pub const HIDDEN_LAYERS: usize = 5;
pub const DEFAULT_OMEGA: f64 = 30.0;

pub const NET_MAGIC: &[u8; 4] = b"CNDN";
pub const NET_VERSION: u32 = 1;

/// Hidden widths with their exact parameter counts.
pub const WIDTH_PRESETS: [(usize, usize); 6] = [
    (17, 1311),
    (31, 4125),
    (45, 8507),
    (65, 17487),
    (93, 35435),
    (130, 68772),
];

/// Parameters of a `[2, w x 5, 2]` network.
pub const fn param_count(width: usize) -> usize {
    4 * width * width + 9 * width + 2
}

/// Largest preset width whose per-axis parameter count fits in
/// `total / axes`.
pub fn width_for_budget(total: usize, axes: usize) -> Result<usize> {
    if axes == 0 {
        return Err(Error::InvalidArgument("no axes".into()));
    }
    let per_axis = total / axes;
    WIDTH_PRESETS
        .iter()
        .rev()
        .find(|(_, p)| *p <= per_axis)
        .map(|(w, _)| *w)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "budget of {total} parameters over {axes} axes is below the smallest preset ({})",
                WIDTH_PRESETS[0].1
            ))
        })
}

/// Dense layer `y = W x + b` with `W` stored `rows x cols` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            biases: vec![0.0; rows],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SirenModel {
    pub layers: Vec<Layer>,
    /// Frequency applied to the first layer.
    pub first_omega: f64,
    /// Frequency applied to the remaining hidden layers.
    pub hidden_omega: f64,
}

impl SirenModel {
    pub fn new<R: Rng>(width: usize, rng: &mut R) -> Self {
        Self::with_omegas(width, DEFAULT_OMEGA, DEFAULT_OMEGA, rng)
    }

    pub fn with_omegas<R: Rng>(width: usize, first_omega: f64, hidden_omega: f64, rng: &mut R) -> Self {
        assert!(width > 0);
        let mut layers = Vec::with_capacity(HIDDEN_LAYERS + 1);
        for l in 0..=HIDDEN_LAYERS {
            let cols = if l == 0 { 2 } else { width };
            let rows = if l == HIDDEN_LAYERS { 2 } else { width };
            let w_bound = if l == 0 {
                1.0 / cols as f64
            } else {
                (6.0 / cols as f64).sqrt() / hidden_omega
            };
            let b_bound = 1.0 / (cols as f64).sqrt();
            let mut layer = Layer::zeros(rows, cols);
            for w in layer.weights.iter_mut() {
                *w = rng.random_range(-w_bound..=w_bound);
            }
            for b in layer.biases.iter_mut() {
                *b = rng.random_range(-b_bound..=b_bound);
            }
            layers.push(layer);
        }
        SirenModel {
            layers,
            first_omega,
            hidden_omega,
        }
    }

    /// Same shape, all parameters zero. Used for gradient and optimizer
    /// buffers.
    pub fn zeros_like(&self) -> Self {
        SirenModel {
            layers: self.layers.iter().map(|l| Layer::zeros(l.rows, l.cols)).collect(),
            first_omega: self.first_omega,
            hidden_omega: self.hidden_omega,
        }
    }

    pub fn width(&self) -> usize {
        self.layers[0].rows
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn omega(&self, layer: usize) -> f64 {
        if layer == 0 {
            self.first_omega
        } else {
            self.hidden_omega
        }
    }

    /// Flat views over all parameters, layer by layer, weights before biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn round_to_f32(&mut self) {
        for p in self.params_mut() {
            *p = *p as f32 as f64;
        }
    }

    /// Evaluates a single point.
    pub fn eval(&self, u: f64, v: f64) -> [f64; 2] {
        let mut x = vec![u, v];
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = layer.biases.clone();
            for (r, yr) in y.iter_mut().enumerate() {
                let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                *yr += row.iter().zip(&x).map(|(w, xi)| w * xi).sum::<f64>();
            }
            if l < HIDDEN_LAYERS {
                let omega = self.omega(l);
                y.iter_mut().for_each(|t| *t = fastmath::sin(omega * *t));
            }
            x = y;
        }
        [x[0], x[1]]
    }

    /// Batched evaluation; `inputs` holds `(u, v)` pairs, the result holds
    /// `(near, far)` pairs.
    pub fn forward(&self, inputs: &[[f64; 2]]) -> Vec<[f64; 2]> {
        const CHUNK: usize = 2048;
        let chunks = par::map_range(inputs.len().div_ceil(CHUNK), |c| {
            let part = &inputs[c * CHUNK..((c + 1) * CHUNK).min(inputs.len())];
            let flat: Vec<f64> = part.iter().flatten().copied().collect();
            let mut cache = ForwardCache::default();
            self.forward_cached(&flat, &mut cache)
        });
        chunks
            .into_iter()
            .flat_map(|out| out.chunks_exact(2).map(|p| [p[0], p[1]]).collect::<Vec<_>>())
            .collect()
    }

    /// Forward pass over `n = inputs.len() / 2` points that keeps the
    /// activations needed by [`SirenModel::backward`]. Returns `n x 2`
    /// outputs row-major.
    pub fn forward_cached(&self, inputs: &[f64], cache: &mut ForwardCache) -> Vec<f64> {
        let n = inputs.len() / 2;
        cache.inputs.clear();
        cache.inputs.extend_from_slice(inputs);
        cache.sines.resize_with(HIDDEN_LAYERS, Vec::new);
        cache.cosines.resize_with(HIDDEN_LAYERS, Vec::new);
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let x: &[f64] = if l == 0 { &cache.inputs } else { &cache.sines[l - 1] };
            let mut y = vec![0.0; n * layer.rows];
            for row in y.chunks_exact_mut(layer.rows) {
                row.copy_from_slice(&layer.biases);
            }
            gemm_abt(n, layer.cols, layer.rows, x, &layer.weights, &mut y, 1.0);
            if l < HIDDEN_LAYERS {
                let omega = self.omega(l);
                y.iter_mut().for_each(|t| *t *= omega);
                let mut cos = std::mem::take(&mut cache.cosines[l]);
                cos.resize(y.len(), 0.0);
                fastmath::sin_cos_in_place(&mut y, &mut cos);
                cache.cosines[l] = cos;
                cache.sines[l] = y;
            } else {
                out = y;
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grads` given `d_out`
    /// (`n x 2`, the loss gradient w.r.t. the outputs of the last
    /// [`SirenModel::forward_cached`] call).
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grads: &mut SirenModel) {
        let n = cache.inputs.len() / 2;
        let mut delta = d_out.to_vec();
        for l in (0..=HIDDEN_LAYERS).rev() {
            let layer = &self.layers[l];
            if l < HIDDEN_LAYERS {
                let omega = self.omega(l);
                for (d, c) in delta.iter_mut().zip(&cache.cosines[l]) {
                    *d *= omega * c;
                }
            }
            let x: &[f64] = if l == 0 { &cache.inputs } else { &cache.sines[l - 1] };
            let g = &mut grads.layers[l];
            gemm_atb(layer.rows, n, layer.cols, &delta, x, &mut g.weights);
            for row in delta.chunks_exact(layer.rows) {
                for (b, d) in g.biases.iter_mut().zip(row) {
                    *b += d;
                }
            }
            if l > 0 {
                let mut next = vec![0.0; n * layer.cols];
                gemm_ab(n, layer.rows, layer.cols, &delta, &layer.weights, &mut next);
                delta = next;
            }
        }
    }

    /// Encodes the network together with its axis as `.cndhf-net`.
    pub fn to_net_bytes(&self, axis: &DhfAxis) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(NET_MAGIC).u32(NET_VERSION);
        for d in axis.direction {
            w.f64(d);
        }
        for r in axis.rotation {
            w.f64(r);
        }
        w.f64(self.first_omega)
            .f64(self.hidden_omega)
            .u32(self.layers.len() as u32);
        for layer in &self.layers {
            w.u32(layer.rows as u32).u32(layer.cols as u32);
            for &x in &layer.weights {
                w.f32(x as f32);
            }
            for &x in &layer.biases {
                w.f32(x as f32);
            }
        }
        w.finish()
    }

    pub fn from_net_bytes(bytes: &[u8]) -> Result<(DhfAxis, SirenModel)> {
        let mut r = Reader::new(bytes);
        let out = Self::read_net(&mut r)?;
        r.finish()?;
        Ok(out)
    }

    pub(crate) fn read_net(r: &mut Reader<'_>) -> Result<(DhfAxis, SirenModel)> {
        r.expect_magic(NET_MAGIC)?;
        let version = r.u32()?;
        if version != NET_VERSION {
            return Err(Error::Format(format!("unsupported .cndhf-net version {version}")));
        }
        let axis = DhfAxis::from_parts(r.f64_array()?, r.f64_array()?);
        let first_omega = r.f64()?;
        let hidden_omega = r.f64()?;
        let count = r.u32()? as usize;
        if count != HIDDEN_LAYERS + 1 {
            return Err(Error::Format(format!(
                "expected {} layers, found {count}",
                HIDDEN_LAYERS + 1
            )));
        }
        let mut layers = Vec::with_capacity(count);
        let mut prev_rows = 2;
        for l in 0..count {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let expected_rows_ok = if l == HIDDEN_LAYERS { rows == 2 } else { rows > 0 };
            if cols != prev_rows || !expected_rows_ok {
                return Err(Error::Format(format!("layer {l} has inconsistent shape {rows}x{cols}")));
            }
            let mut layer = Layer::zeros(rows, cols);
            for x in layer.weights.iter_mut() {
                *x = r.f32()? as f64;
            }
            for x in layer.biases.iter_mut() {
                *x = r.f32()? as f64;
            }
            prev_rows = rows;
            layers.push(layer);
        }
        Ok((
            axis,
            SirenModel {
                layers,
                first_omega,
                hidden_omega,
            },
        ))
    }

    pub fn save_net(&self, axis: &DhfAxis, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_net_bytes(axis)).map_err(|e| Error::io(path, e))
    }

    pub fn load_net(path: &Path) -> Result<(DhfAxis, SirenModel)> {
        Self::from_net_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Activations kept between the forward and backward passes.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    inputs: Vec<f64>,
    sines: Vec<Vec<f64>>,
    cosines: Vec<Vec<f64>>,
}

/// `c (m x n) = a (m x k) * b^T + beta * c`, with `b` stored `n x k`.
fn gemm_abt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], beta: f64) {
    debug_assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    // SAFETY: the asserted lengths cover every index the strides address.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c (m x n) += a^T * b` with `a` stored `k x m` and `b` stored `k x n`.
fn gemm_atb(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    // SAFETY: see `gemm_abt`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c (m x n) = a (m x k) * b (k x n)`.
fn gemm_ab(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    // SAFETY: see `gemm_abt`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
