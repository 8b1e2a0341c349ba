//! Small MLP that labels individual points from concatenated coarse-prediction
//! and fine-feature vectors.
//!
//! Layer 0 takes `[coarse, fine]`; every later hidden layer takes the previous
//! activation with the coarse vector re-concatenated; the output layer is a
//! single linear unit producing one logit. Hidden activations are ReLU.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-point input: bilinear samples of the coarse logit grid and of the fine
/// feature grid at the same point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFeature {
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
}

/// One dense layer, `weights` row-major with shape `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.in_dim);
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            out.push(acc);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointHeadParams {
    pub coarse_dim: usize,
    pub fine_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub layers: Vec<LayerParams>,
}

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.00025,
            batch_size: 2,
            steps: 1000,
            rng_seed: 0,
        }
    }
}

impl PointHeadParams {
    fn layer_dims(coarse_dim: usize, fine_dim: usize, hidden_sizes: &[usize]) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(hidden_sizes.len() + 1);
        let mut prev = coarse_dim + fine_dim;
        for (i, &h) in hidden_sizes.iter().enumerate() {
            let in_dim = if i == 0 { prev } else { prev + coarse_dim };
            dims.push((in_dim, h));
            prev = h;
        }
        dims.push((prev, 1));
        dims
    }

    pub fn zeros(coarse_dim: usize, fine_dim: usize, hidden_sizes: &[usize]) -> Self {
        let layers = Self::layer_dims(coarse_dim, fine_dim, hidden_sizes)
            .into_iter()
            .map(|(i, o)| LayerParams::zeros(i, o))
            .collect();
        Self {
            coarse_dim,
            fine_dim,
            hidden_sizes: hidden_sizes.to_vec(),
            layers,
        }
    }

    /// Seeded Glorot-uniform initialization: each weight drawn from
    /// `+/- sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(coarse_dim: usize, fine_dim: usize, hidden_sizes: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(coarse_dim, fine_dim, hidden_sizes);
        for layer in &mut params.layers {
            let bound = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        params
    }

    /// Default head: 3 hidden layers of width 64.
    pub fn default_arch(coarse_dim: usize, fine_dim: usize, seed: u64) -> Self {
        Self::init(coarse_dim, fine_dim, &[64, 64, 64], seed)
    }

    pub fn input_dim(&self) -> usize {
        self.coarse_dim + self.fine_dim
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn check_feature(&self, feature: &PointFeature) -> Result<()> {
        if feature.coarse.len() != self.coarse_dim || feature.fine.len() != self.fine_dim {
            return Err(Error::invalid(format!(
                "feature dims ({}, {}) do not match head dims ({}, {})",
                feature.coarse.len(),
                feature.fine.len(),
                self.coarse_dim,
                self.fine_dim
            )));
        }
        Ok(())
    }
}

/// Forward pass returning the point logit.
pub fn forward(params: &PointHeadParams, feature: &PointFeature) -> Result<f64> {
    params.check_feature(feature)?;
    let (logit, _) = forward_trace(params, feature);
    Ok(logit)
}

/// Forward pass that records per-layer inputs and pre-activations for backprop.
fn forward_trace(params: &PointHeadParams, feature: &PointFeature) -> (f64, Vec<(Vec<f64>, Vec<f64>)>) {
    let num_hidden = params.hidden_sizes.len();
    let mut trace: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(params.layers.len());

    let mut input: Vec<f64> = feature
        .coarse
        .iter()
        .chain(feature.fine.iter())
        .copied()
        .collect();
    let mut pre = Vec::new();
    for (l, layer) in params.layers.iter().enumerate() {
        layer.apply(&input, &mut pre);
        trace.push((input.clone(), pre.clone()));
        if l + 1 == params.layers.len() {
            break;
        }
        // ReLU, then re-concatenate the coarse vector for the next hidden layer.
        let mut next: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        if l + 1 < num_hidden {
            next.extend_from_slice(&feature.coarse);
        }
        input = next;
    }
    let logit = trace.last().expect("at least one layer").1[0];
    (logit, trace)
}

fn bce_with_logits(logit: f64, label: f64) -> f64 {
    // Stable form: max(z, 0) - z*y + ln(1 + exp(-|z|)).
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy over the batch and its exact analytic gradient.
pub fn loss_and_grad(
    params: &PointHeadParams,
    batch: &[(PointFeature, f64)],
) -> Result<(f64, PointHeadParams)> {
    if batch.is_empty() {
        return Err(Error::invalid("loss_and_grad on an empty batch"));
    }
    let mut grads = PointHeadParams::zeros(params.coarse_dim, params.fine_dim, &params.hidden_sizes);
    let mut total_loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    let num_hidden = params.hidden_sizes.len();

    for (feature, label) in batch {
        params.check_feature(feature)?;
        let (logit, trace) = forward_trace(params, feature);
        total_loss += bce_with_logits(logit, *label);

        // delta over the current layer's pre-activation.
        let mut delta = vec![(sigmoid(logit) - label) * scale];
        for l in (0..params.layers.len()).rev() {
            let layer = &params.layers[l];
            let (input, _) = &trace[l];
            let g = &mut grads.layers[l];
            for o in 0..layer.out_dim {
                g.biases[o] += delta[o];
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw += delta[o] * x;
                }
            }
            if l == 0 {
                break;
            }
            // Backprop through this layer's input to the previous layer's
            // ReLU output; drop the re-concatenated coarse slice.
            let prev_width = params.layers[l - 1].out_dim;
            let mut upstream = vec![0.0; prev_width];
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (u, w) in upstream.iter_mut().zip(row) {
                    *u += delta[o] * w;
                }
            }
            let prev_pre = &trace[l - 1].1;
            debug_assert!(l - 1 < num_hidden);
            delta = upstream
                .iter()
                .zip(prev_pre)
                .map(|(&u, &z)| if z > 0.0 { u } else { 0.0 })
                .collect();
        }
    }
    Ok((total_loss * scale, grads))
}

/// Plain SGD over seeded mini-batches drawn uniformly with replacement.
pub fn train(
    params: &PointHeadParams,
    dataset: &[(PointFeature, f64)],
    cfg: &TrainConfig,
) -> Result<PointHeadParams> {
    if dataset.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    if cfg.learning_rate <= 0.0 && cfg.learning_rate != 0.0 {
        return Err(Error::invalid("learning_rate must be >= 0"));
    }
    let mut current = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut batch: Vec<(PointFeature, f64)> = Vec::with_capacity(cfg.batch_size);
    for step in 0..cfg.steps {
        batch.clear();
        for _ in 0..cfg.batch_size.max(1) {
            let i = rng.gen_range(0..dataset.len());
            batch.push(dataset[i].clone());
        }
        let (loss, grads) = loss_and_grad(&current, &batch)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { step, loss });
        }
        if cfg.learning_rate == 0.0 {
            continue;
        }
        for (layer, g) in current.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= cfg.learning_rate * gw;
            }
            for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= cfg.learning_rate * gb;
            }
        }
    }
    Ok(current)
}

const PARAMS_MAGIC: &[u8; 4] = b"RSPH";
const PARAMS_VERSION: u32 = 1;

/// Save parameters as a versioned flat binary file:
/// magic `RSPH`, version u32, coarse/fine dims u32, hidden layer count u32,
/// hidden sizes u32 each, then per layer the row-major weights followed by
/// the biases as little-endian f64.
pub fn save_params(params: &PointHeadParams, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(PARAMS_MAGIC);
    buf.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.coarse_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(params.fine_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(params.hidden_sizes.len() as u32).to_le_bytes());
    for &h in &params.hidden_sizes {
        buf.extend_from_slice(&(h as u32).to_le_bytes());
    }
    for layer in &params.layers {
        for v in layer.weights.iter().chain(layer.biases.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<PointHeadParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                message: "truncated parameter file".into(),
            });
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let read_u32 = |pos: &mut usize| -> Result<u32> {
        Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
    };

    if take(&mut pos, 4)? != PARAMS_MAGIC {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: "bad magic, not a point-head parameter file".into(),
        });
    }
    let version = read_u32(&mut pos)?;
    if version != PARAMS_VERSION {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: format!("unsupported parameter file version {version}"),
        });
    }
    let coarse_dim = read_u32(&mut pos)? as usize;
    let fine_dim = read_u32(&mut pos)? as usize;
    let num_hidden = read_u32(&mut pos)? as usize;
    let mut hidden = Vec::with_capacity(num_hidden);
    for _ in 0..num_hidden {
        hidden.push(read_u32(&mut pos)? as usize);
    }
    let mut params = PointHeadParams::zeros(coarse_dim, fine_dim, &hidden);
    for layer in &mut params.layers {
        for v in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
            *v = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        }
    }
    if pos != bytes.len() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: "trailing bytes in parameter file".into(),
        });
    }
    Ok(params)
}
