//! Feed-forward regressor mapping a feature vector to blocked influence.
//!
//! Inputs and labels are z-scored with statistics from the training split;
//! the network works entirely in normalized units and the prediction is
//! mapped back with the stored label statistics.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM};
use crate::graph::Graph;
use crate::io::atomic_write;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Samples per gradient chunk. Fixed so the reduction order, and therefore
/// the trained weights, do not depend on the thread count.
const GRADIENT_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn he_uniform<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        DenseLayer {
            inputs,
            outputs,
            weights,
            biases: vec![0.0; outputs],
        }
    }

    #[inline]
    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, &b) in self.weights.chunks_exact(self.inputs).zip(&self.biases) {
            out.push(b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }

    fn add_scaled(&mut self, other: &DenseLayer, scale: f64) {
        self.weights.iter_mut().zip(&other.weights).for_each(|(a, b)| *a += scale * b);
        self.biases.iter_mut().zip(&other.biases).for_each(|(a, b)| *a += scale * b);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    pub layers: Vec<DenseLayer>,
    pub feature_means: [f64; FEATURE_DIM],
    pub feature_stds: [f64; FEATURE_DIM],
    pub label_mean: f64,
    pub label_std: f64,
    pub h_radius: u32,
    pub graph_fingerprint: String,
}

/// Data carried by the model that is not learned.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelMeta {
    pub h_radius: u32,
    pub graph_fingerprint: String,
}

impl MlpModel {
    /// A model with every weight and bias zero and identity normalization.
    pub fn zeros(hidden: &[usize], meta: ModelMeta) -> Self {
        let layer_dims = dims_with(hidden);
        let layers = layer_dims.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect();
        MlpModel {
            layer_dims,
            layers,
            feature_means: [0.0; FEATURE_DIM],
            feature_stds: [1.0; FEATURE_DIM],
            label_mean: 0.0,
            label_std: 1.0,
            h_radius: meta.h_radius,
            graph_fingerprint: meta.graph_fingerprint,
        }
    }

    /// He-uniform hidden layers and a zero output layer, so an untrained
    /// model predicts the label mean.
    fn initialized<R: Rng>(hidden: &[usize], meta: ModelMeta, rng: &mut R) -> Self {
        let mut model = Self::zeros(hidden, meta);
        let last = model.layers.len() - 1;
        for (i, w) in model.layer_dims.clone().windows(2).enumerate().take(last) {
            model.layers[i] = DenseLayer::he_uniform(w[0], w[1], rng);
        }
        model
    }

    pub fn validate(&self) -> Result<()> {
        let dims = &self.layer_dims;
        let bad = |msg: String| Err(Error::CorruptModel(msg));
        if dims.len() < 2 || dims[0] != FEATURE_DIM || *dims.last().unwrap() != 1 {
            return bad(format!("layer dims {dims:?} must run from {FEATURE_DIM} to 1"));
        }
        if self.layers.len() != dims.len() - 1 {
            return bad(format!("{} layers for dims {dims:?}", self.layers.len()));
        }
        for (i, (layer, w)) in self.layers.iter().zip(dims.windows(2)).enumerate() {
            if layer.inputs != w[0]
                || layer.outputs != w[1]
                || layer.weights.len() != w[0] * w[1]
                || layer.biases.len() != w[1]
            {
                return bad(format!("layer {i} does not match dims {}x{}", w[0], w[1]));
            }
        }
        let params = self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases));
        let stats = self.feature_means.iter().chain(&self.feature_stds);
        if !params.chain(stats).chain([&self.label_mean, &self.label_std]).all(|v| v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        if self.feature_stds.iter().chain([&self.label_std]).any(|&s| s <= 0.0) {
            return bad("normalization std must be positive".into());
        }
        Ok(())
    }

    fn normalize(&self, x: &[f64; FEATURE_DIM]) -> [f64; FEATURE_DIM] {
        std::array::from_fn(|i| (x[i] - self.feature_means[i]) / self.feature_stds[i])
    }

    /// Network output in normalized label units.
    fn network(&self, z: &[f64], a: &mut Vec<f64>, b: &mut Vec<f64>) -> f64 {
        a.clear();
        a.extend_from_slice(z);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(a, b);
            if i < last {
                b.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(a, b);
        }
        a[0]
    }

    pub fn predict(&self, x: &[f64; FEATURE_DIM]) -> f64 {
        let z = self.normalize(x);
        let (mut a, mut b) = (Vec::with_capacity(128), Vec::with_capacity(128));
        self.network(&z, &mut a, &mut b) * self.label_std + self.label_mean
    }

    /// Predicted blocked influence.
    pub fn forward(&self, features: &FeatureVector) -> f64 {
        self.predict(&features.to_array())
    }

    /// Like [`MlpModel::predict`] for an unchecked slice.
    pub fn predict_slice(&self, x: &[f64]) -> Result<f64> {
        let x: [f64; FEATURE_DIM] = x.try_into().map_err(|_| {
            Error::CorruptModel(format!("expected {FEATURE_DIM} inputs, got {}", x.len()))
        })?;
        Ok(self.predict(&x))
    }

    /// Mean squared error in normalized label units, the training objective.
    pub fn normalized_loss(&self, inputs: &[[f64; FEATURE_DIM]], labels: &[f64]) -> f64 {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let sum: f64 = inputs
            .iter()
            .zip(labels)
            .map(|(x, &y)| {
                let t = (y - self.label_mean) / self.label_std;
                let e = self.network(&self.normalize(x), &mut a, &mut b) - t;
                e * e
            })
            .sum();
        sum / inputs.len() as f64
    }

    /// Mean squared error of predictions in label units.
    pub fn mse(&self, inputs: &[[f64; FEATURE_DIM]], labels: &[f64]) -> f64 {
        let sum: f64 = inputs
            .iter()
            .zip(labels)
            .map(|(x, &y)| (self.predict(x) - y).powi(2))
            .sum();
        sum / inputs.len() as f64
    }

    /// Gradient of [`MlpModel::normalized_loss`] with respect to every
    /// weight and bias, in the same layout as `self.layers`.
    pub fn gradients(&self, inputs: &[[f64; FEATURE_DIM]], labels: &[f64]) -> Vec<DenseLayer> {
        let scale = 2.0 / inputs.len() as f64;
        let mut grads = self.zero_grads();
        let mut work = Backprop::default();
        for (x, &y) in inputs.iter().zip(labels) {
            let t = (y - self.label_mean) / self.label_std;
            work.accumulate(self, &self.normalize(x), t, scale, &mut grads);
        }
        grads
    }

    fn zero_grads(&self) -> Vec<DenseLayer> {
        self.layers.iter().map(|l| DenseLayer::zeros(l.inputs, l.outputs)).collect()
    }
}

fn dims_with(hidden: &[usize]) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(FEATURE_DIM);
    dims.extend_from_slice(hidden);
    dims.push(1);
    dims
}

#[derive(Default)]
struct Backprop {
    /// Post-activation outputs per layer, input first.
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    prev: Vec<f64>,
}

impl Backprop {
    /// Adds `scale * d(loss_sample)/d(param)` into `grads`, where the sample
    /// loss is `(out - target)^2 / 2`.
    fn accumulate(&mut self, model: &MlpModel, z: &[f64], target: f64, scale: f64, grads: &mut [DenseLayer]) {
        let nl = model.layers.len();
        self.acts.resize_with(nl + 1, Vec::new);
        self.acts[0].clear();
        self.acts[0].extend_from_slice(z);
        for (i, layer) in model.layers.iter().enumerate() {
            let (head, tail) = self.acts.split_at_mut(i + 1);
            layer.apply(&head[i], &mut tail[0]);
            if i + 1 < nl {
                tail[0].iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        self.delta.clear();
        self.delta.push(self.acts[nl][0] - target);
        for i in (0..nl).rev() {
            let layer = &model.layers[i];
            let input = &self.acts[i];
            let g = &mut grads[i];
            for (o, &d) in self.delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let sd = scale * d;
                g.biases[o] += sd;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(w, &a)| *w += sd * a);
            }
            if i == 0 {
                break;
            }
            self.prev.clear();
            self.prev.resize(layer.inputs, 0.0);
            for (o, &d) in self.delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                self.prev.iter_mut().zip(row).for_each(|(p, &w)| *p += w * d);
            }
            // ReLU derivative: the stored activation is zero where the unit was off
            self.prev.iter_mut().zip(input).for_each(|(p, &a)| {
                if a <= 0.0 {
                    *p = 0.0
                }
            });
            std::mem::swap(&mut self.delta, &mut self.prev);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 512,
            learning_rate: 0.05,
            max_epochs: 200,
            patience: 10,
            val_fraction: 0.1,
            hidden: vec![128, 128],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Per-epoch MSE in label units, measured after the epoch's updates.
    pub train_mse: Vec<f64>,
    pub validation_mse: Vec<f64>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn column_stats(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

/// Mini-batch SGD on MSE with early stopping on a held-out split.
///
/// The split, the initial weights and the per-epoch shuffles all come from
/// `seed`. The weights from the epoch with the lowest validation MSE are
/// returned.
pub fn train(
    inputs: &[[f64; FEATURE_DIM]],
    labels: &[f64],
    config: &TrainConfig,
    meta: ModelMeta,
    seed: u64,
) -> Result<(MlpModel, TrainReport)> {
    if inputs.len() != labels.len() {
        return Err(Error::InvalidInput("inputs and labels differ in length".into()));
    }
    if inputs.len() < 2 {
        return Err(Error::InvalidInput("training needs at least 2 records".into()));
    }
    if !(config.val_fraction > 0.0 && config.val_fraction < 1.0) {
        return Err(Error::InvalidParameter("val_fraction must lie in (0, 1)".into()));
    }
    if config.batch_size == 0 || config.max_epochs == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::InvalidParameter(
            "batch size, epochs and learning rate must be positive".into(),
        ));
    }
    if let Some(i) = labels.iter().position(|y| !y.is_finite()) {
        return Err(Error::InvalidInput(format!("label {i} is not finite")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((inputs.len() as f64 * config.val_fraction).round() as usize).clamp(1, inputs.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let gather = |idx: &[usize]| -> (Vec<[f64; FEATURE_DIM]>, Vec<f64>) {
        (idx.iter().map(|&i| inputs[i]).collect(), idx.iter().map(|&i| labels[i]).collect())
    };
    let (train_x, train_y) = gather(train_idx);
    let (val_x, val_y) = gather(val_idx);

    let mut model = MlpModel::initialized(&config.hidden, meta, &mut rng);
    for j in 0..FEATURE_DIM {
        let (m, s) = column_stats(train_x.iter().map(|x| x[j]));
        model.feature_means[j] = m;
        model.feature_stds[j] = s;
    }
    (model.label_mean, model.label_std) = column_stats(train_y.iter().copied());

    let z: Vec<[f64; FEATURE_DIM]> = train_x.iter().map(|x| model.normalize(x)).collect();
    let t: Vec<f64> = train_y.iter().map(|y| (y - model.label_mean) / model.label_std).collect();

    let mut report = TrainReport {
        epochs_run: 0,
        train_mse: Vec::new(),
        validation_mse: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best: Option<(f64, Vec<DenseLayer>)> = None;
    let mut stale = 0;
    let mut perm: Vec<usize> = (0..z.len()).collect();

    for epoch in 1..=config.max_epochs {
        perm.shuffle(&mut rng);
        for batch in perm.chunks(config.batch_size) {
            let scale = 2.0 / batch.len() as f64;
            let partials: Vec<Vec<DenseLayer>> = batch
                .par_chunks(GRADIENT_CHUNK)
                .map(|chunk| {
                    let mut grads = model.zero_grads();
                    let mut work = Backprop::default();
                    for &i in chunk {
                        work.accumulate(&model, &z[i], t[i], scale, &mut grads);
                    }
                    grads
                })
                .collect();
            let mut total = model.zero_grads();
            for part in &partials {
                total.iter_mut().zip(part).for_each(|(a, b)| a.add_scaled(b, 1.0));
            }
            model
                .layers
                .iter_mut()
                .zip(&total)
                .for_each(|(l, g)| l.add_scaled(g, -config.learning_rate));
        }

        let train_mse = model.mse(&train_x, &train_y);
        let val_mse = model.mse(&val_x, &val_y);
        report.epochs_run = epoch;
        report.train_mse.push(train_mse);
        report.validation_mse.push(val_mse);
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        log::debug!("epoch {epoch}: train mse {train_mse:.6}, validation mse {val_mse:.6}");

        if best.as_ref().is_none_or(|(b, _)| val_mse < *b) {
            best = Some((val_mse, model.layers.clone()));
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, layers)) = best {
        model.layers = layers;
    }
    Ok((model, report))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    feature_means: [f64; FEATURE_DIM],
    feature_stds: [f64; FEATURE_DIM],
    label_mean: f64,
    label_std: f64,
    h_radius: u32,
    graph_fingerprint: String,
}

pub fn save_model<W: Write>(model: &MlpModel, mut sink: W) -> Result<()> {
    sink.write_all(&model_bytes(model)?)?;
    Ok(())
}

pub fn save_model_path(model: &MlpModel, path: &Path) -> Result<()> {
    atomic_write(path, &model_bytes(model)?)
}

fn model_bytes(model: &MlpModel) -> Result<Vec<u8>> {
    model.validate()?;
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        layer_dims: model.layer_dims.clone(),
        weights: model.layers.iter().map(|l| l.weights.clone()).collect(),
        biases: model.layers.iter().map(|l| l.biases.clone()).collect(),
        feature_means: model.feature_means,
        feature_stds: model.feature_stds,
        label_mean: model.label_mean,
        label_std: model.label_std,
        h_radius: model.h_radius,
        graph_fingerprint: model.graph_fingerprint.clone(),
    };
    let mut bytes = serde_json::to_vec(&file)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Reads a model written by [`save_model`]. Nothing is returned unless the
/// whole file parses and validates.
pub fn load_model<R: Read>(mut source: R) -> Result<MlpModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let probe: serde_json::Value = serde_json::from_slice(&bytes)?;
    let found = probe.get("format_version").and_then(|v| v.as_u64());
    if found != Some(MODEL_FORMAT_VERSION as u64) {
        return Err(Error::VersionMismatch {
            expected: MODEL_FORMAT_VERSION,
            found: found.unwrap_or(0) as u32,
        });
    }
    let file: ModelFile = serde_json::from_value(probe)?;
    if file.weights.len() != file.biases.len() || file.layer_dims.len() != file.weights.len() + 1 {
        return Err(Error::CorruptModel("layer count does not match dims".into()));
    }
    let layers = file
        .layer_dims
        .windows(2)
        .zip(file.weights.into_iter().zip(file.biases))
        .map(|(w, (weights, biases))| DenseLayer {
            inputs: w[0],
            outputs: w[1],
            weights,
            biases,
        })
        .collect();
    let model = MlpModel {
        layer_dims: file.layer_dims,
        layers,
        feature_means: file.feature_means,
        feature_stds: file.feature_stds,
        label_mean: file.label_mean,
        label_std: file.label_std,
        h_radius: file.h_radius,
        graph_fingerprint: file.graph_fingerprint,
    };
    model.validate()?;
    Ok(model)
}

/// Loads a model and refuses it unless it was trained for `graph`.
pub fn load_model_for_graph(path: &Path, graph: &Graph) -> Result<MlpModel> {
    let model = load_model(std::fs::File::open(path)?)?;
    if model.graph_fingerprint != graph.fingerprint() {
        return Err(Error::FingerprintMismatch {
            expected: model.graph_fingerprint,
            found: graph.fingerprint().to_string(),
        });
    }
    Ok(model)
}
