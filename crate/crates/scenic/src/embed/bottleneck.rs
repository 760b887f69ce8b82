//! The pixels-to-memory bottleneck network.
//!
//! A small MLP is trained to predict the 128-byte memory window (scaled to
//! [0,1]) from the downsampled screen. Its narrowest layer, a linear
//! bottleneck, becomes the embedding: screens that imply different memory
//! contents are pushed apart even when their pixels barely differ.
//!
//! Layers: input -> tanh hidden -> linear bottleneck -> tanh hidden ->
//! sigmoid output. Sizes are kept generic so tests can gradient-check tiny
//! instances; the real network is 768 -> 64 -> D -> 64 -> 128.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{downsample, EmbedError, Embedder, BOTTLENECK_MAX_DIMS, PIXEL_DIMS};
use crate::env::{Screenshot, MEMORY_SIZE};

pub const MODEL_MAGIC: &[u8; 7] = b"SCNP2M1";
const MODEL_VERSION: u8 = 1;
const HIDDEN_DIMS: usize = 64;
/// Weights and biases start uniform in [-INIT_SPAN, INIT_SPAN].
const INIT_SPAN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: u32,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 50,
            shuffle_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BottleneckModel {
    sizes: [usize; 5],
    /// All parameters flat: for each of the four layers, the out x in
    /// weight matrix row-major, then the bias. Flat storage keeps SGD,
    /// finite differencing, and serialization trivial.
    params: Vec<f64>,
}

fn param_count(sizes: &[usize; 5]) -> usize {
    (0..4).map(|l| sizes[l + 1] * (sizes[l] + 1)).sum()
}

impl BottleneckModel {
    /// Random model with the given layer sizes; used directly only by
    /// tests that need tiny networks.
    pub fn new_random(sizes: [usize; 5], seed: u64) -> BottleneckModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..param_count(&sizes))
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * INIT_SPAN)
            .collect();
        BottleneckModel { sizes, params }
    }

    /// Untrained model with the standard screen-to-memory shape and the
    /// given bottleneck width.
    pub fn fresh(bottleneck_dims: usize, seed: u64) -> Result<BottleneckModel, EmbedError> {
        if bottleneck_dims < 2 {
            return Err(EmbedError::DimensionTooSmall(bottleneck_dims));
        }
        if bottleneck_dims > BOTTLENECK_MAX_DIMS {
            return Err(EmbedError::DimensionTooLarge(bottleneck_dims));
        }
        Ok(Self::new_random(
            [PIXEL_DIMS, HIDDEN_DIMS, bottleneck_dims, HIDDEN_DIMS, MEMORY_SIZE],
            seed,
        ))
    }

    pub fn sizes(&self) -> [usize; 5] {
        self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        self.params[index] = value;
    }

    /// Offset of layer `l`'s weights; biases follow the weights.
    fn layer_offset(&self, l: usize) -> usize {
        (0..l).map(|k| self.sizes[k + 1] * (self.sizes[k] + 1)).sum()
    }

    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (input, output) = (self.sizes[l], self.sizes[l + 1]);
        let off = self.layer_offset(l);
        (
            &self.params[off..off + output * input],
            &self.params[off + output * input..off + output * (input + 1)],
        )
    }

    fn affine(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let (w, b) = self.layer(l);
        let input = self.sizes[l];
        b.iter()
            .enumerate()
            .map(|(o, &bias)| {
                let row = &w[o * input..(o + 1) * input];
                bias + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>()
            })
            .collect()
    }

    /// Activations after each layer: tanh, identity, tanh, sigmoid.
    fn forward(&self, x: &[f64]) -> [Vec<f64>; 4] {
        let mut a1 = self.affine(0, x);
        a1.iter_mut().for_each(|v| *v = v.tanh());
        let a2 = self.affine(1, &a1);
        let mut a3 = self.affine(2, &a2);
        a3.iter_mut().for_each(|v| *v = v.tanh());
        let mut a4 = self.affine(3, &a3);
        a4.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp()));
        [a1, a2, a3, a4]
    }

    /// Output prediction in [0,1] per memory byte.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let [_, _, _, a4] = self.forward(x);
        a4
    }

    /// The embedding: the linear bottleneck activation.
    pub fn embed_vector(&self, x: &[f64]) -> Vec<f64> {
        let mut a1 = self.affine(0, x);
        a1.iter_mut().for_each(|v| *v = v.tanh());
        self.affine(1, &a1)
    }

    /// Mean over examples of the per-example MSE (itself a mean over
    /// output dimensions).
    pub fn loss(&self, data: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        let n = data.len().max(1) as f64;
        data.iter()
            .map(|(x, t)| {
                let y = self.predict(x);
                y.iter().zip(t).map(|(yi, ti)| (yi - ti) * (yi - ti)).sum::<f64>()
                    / t.len() as f64
            })
            .sum::<f64>()
            / n
    }

    /// Loss and the flat gradient over the given examples (their mean).
    pub fn loss_and_gradient(&self, data: &[(Vec<f64>, Vec<f64>)]) -> (f64, Vec<f64>) {
        let idx: Vec<usize> = (0..data.len()).collect();
        self.loss_and_gradient_idx(data, &idx)
    }

    fn loss_and_gradient_idx(
        &self,
        data: &[(Vec<f64>, Vec<f64>)],
        batch: &[usize],
    ) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let out_dims = self.sizes[4] as f64;
        for &i in batch {
            let (x, t) = &data[i];
            let [a1, a2, a3, a4] = self.forward(x);
            loss += a4
                .iter()
                .zip(t)
                .map(|(yi, ti)| (yi - ti) * (yi - ti))
                .sum::<f64>()
                / out_dims;

            // delta4: dL/dz4 with L the per-example MSE and sigmoid output.
            let d4: Vec<f64> = a4
                .iter()
                .zip(t)
                .map(|(yi, ti)| 2.0 * (yi - ti) / out_dims * yi * (1.0 - yi))
                .collect();
            let d3 = self.backprop_delta(3, &d4, &a3, Nonlin::Tanh);
            let d2 = self.backprop_delta(2, &d3, &a2, Nonlin::Identity);
            let d1 = self.backprop_delta(1, &d2, &a1, Nonlin::Tanh);

            self.accumulate(&mut grad, 3, &d4, &a3);
            self.accumulate(&mut grad, 2, &d3, &a2);
            self.accumulate(&mut grad, 1, &d2, &a1);
            self.accumulate(&mut grad, 0, &d1, x);
        }
        let n = batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    /// Propagates dL/dz of layer `l` back to dL/dz of layer `l-1`, whose
    /// activation `a_prev` went through `nonlin`.
    fn backprop_delta(&self, l: usize, delta: &[f64], a_prev: &[f64], nonlin: Nonlin) -> Vec<f64> {
        let (w, _) = self.layer(l);
        let input = self.sizes[l];
        (0..input)
            .map(|i| {
                let upstream: f64 = delta
                    .iter()
                    .enumerate()
                    .map(|(o, d)| d * w[o * input + i])
                    .sum();
                match nonlin {
                    Nonlin::Tanh => upstream * (1.0 - a_prev[i] * a_prev[i]),
                    Nonlin::Identity => upstream,
                }
            })
            .collect()
    }

    fn accumulate(&self, grad: &mut [f64], l: usize, delta: &[f64], a_in: &[f64]) {
        let input = self.sizes[l];
        let output = self.sizes[l + 1];
        let off = self.layer_offset(l);
        for o in 0..output {
            let row = &mut grad[off + o * input..off + (o + 1) * input];
            for (slot, &a) in row.iter_mut().zip(a_in) {
                *slot += delta[o] * a;
            }
        }
        for o in 0..output {
            grad[off + output * input + o] += delta[o];
        }
    }

    /// Mini-batch SGD. Returns the full-dataset loss after each epoch.
    /// Zero epochs leaves the parameters bit-identical. Training always
    /// continues from the current weights, so repeated calls refine the
    /// same model.
    pub fn train(
        &mut self,
        data: &[(Vec<f64>, Vec<f64>)],
        cfg: &TrainConfig,
    ) -> Result<Vec<f64>, EmbedError> {
        if data.is_empty() {
            return Err(EmbedError::NoTrainingData);
        }
        for (x, t) in data {
            if x.len() != self.sizes[0] || t.len() != self.sizes[4] {
                return Err(EmbedError::ShapeMismatch {
                    expected: self.sizes[0],
                    got: x.len().max(t.len()),
                });
            }
        }
        if cfg.batch_size == 0 || !cfg.learning_rate.is_finite() || cfg.learning_rate <= 0.0 {
            return Err(EmbedError::BadTrainConfig(format!(
                "learning rate {}, batch size {}",
                cfg.learning_rate, cfg.batch_size
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut history = Vec::with_capacity(cfg.epochs as usize);
        for epoch in 1..=cfg.epochs {
            for i in (1..order.len()).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            for batch in order.chunks(cfg.batch_size) {
                let (_, grad) = self.loss_and_gradient_idx(data, batch);
                for (p, g) in self.params.iter_mut().zip(&grad) {
                    *p -= cfg.learning_rate * g;
                }
            }
            let loss = self.loss(data);
            if !loss.is_finite() {
                return Err(EmbedError::Diverged { epoch, loss });
            }
            history.push(loss);
        }
        Ok(history)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 20 + self.params.len() * 8);
        out.extend_from_slice(MODEL_MAGIC);
        out.push(MODEL_VERSION);
        for s in self.sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<BottleneckModel, EmbedError> {
        let fail = |msg: &str| EmbedError::ModelFile {
            file: origin.to_path_buf(),
            msg: msg.to_string(),
        };
        if bytes.len() < 28 {
            return Err(fail("truncated header"));
        }
        if &bytes[..7] != MODEL_MAGIC {
            return Err(fail("bad magic"));
        }
        if bytes[7] != MODEL_VERSION {
            return Err(fail(&format!("unsupported version {}", bytes[7])));
        }
        let mut sizes = [0usize; 5];
        for (k, slot) in sizes.iter_mut().enumerate() {
            let off = 8 + 4 * k;
            let v = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
            if v == 0 || v > 1_000_000 {
                return Err(fail(&format!("implausible layer size {v}")));
            }
            *slot = v;
        }
        let count = param_count(&sizes);
        let body = &bytes[28..];
        if body.len() != count * 8 {
            return Err(fail(&format!(
                "expected {} parameter bytes, found {}",
                count * 8,
                body.len()
            )));
        }
        let params: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(fail("non-finite parameter"));
        }
        Ok(BottleneckModel { sizes, params })
    }

    pub fn load(path: &Path) -> Result<BottleneckModel, EmbedError> {
        let bytes = std::fs::read(path).map_err(|e| EmbedError::Io {
            file: path.to_path_buf(),
            source: e,
        })?;
        Self::from_bytes(&bytes, path)
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| EmbedError::Io {
            file: path.to_path_buf(),
            source: e,
        })
    }
}

#[derive(Clone, Copy)]
enum Nonlin {
    Tanh,
    Identity,
}

impl Embedder for BottleneckModel {
    fn dims(&self) -> usize {
        self.sizes[2]
    }

    fn embed(&self, screen: &Screenshot) -> Result<Vec<f64>, EmbedError> {
        if self.sizes[0] != PIXEL_DIMS {
            return Err(EmbedError::ShapeMismatch {
                expected: PIXEL_DIMS,
                got: self.sizes[0],
            });
        }
        Ok(self.embed_vector(&downsample(screen)))
    }
}

/// Converts archive-style pairs into network inputs and targets: the
/// downsampled screen and the memory bytes scaled to [0,1].
pub fn training_data<'a>(
    pairs: impl Iterator<Item = (&'a Screenshot, &'a [u8; MEMORY_SIZE])>,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    pairs
        .map(|(screen, memory)| {
            let x = downsample(screen);
            let t = memory.iter().map(|&b| b as f64 / 255.0).collect();
            (x, t)
        })
        .collect()
}
