//! Recurrent path scorer trained from pairwise judgments.
//!
//! Each feature of a vertex or edge passes through its own ReLU dense layer to
//! width `l_f`; the item code is the mean of those outputs. An LSTM reads the
//! `2n - 1` item codes and its last hidden state is mapped linearly to the
//! naturalness score `m`. A pair is scored as `σ(m₁ - m₂)`, the probability
//! that the first path is preferred, and trained with mean negative
//! log-likelihood and Adam.

use std::io::{Read, Write};
use std::path::Path as FsPath;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Choice;
use crate::error::{Error, Result};
use crate::features::{FeatureDims, FeatureMask, FeaturizedPath, Item, EDGE_FEATURES, VERTEX_FEATURES};

/// Layer widths of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub dims: FeatureDims,
    /// Width `l_f` of transformed features and item codes.
    pub feature_len: usize,
    /// Width `h` of the LSTM state, i.e. the path code length.
    pub code_len: usize,
}

/// Dense layer `y = W x + b`, `W` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(rows: usize, cols: usize) -> Self {
        Dense {
            rows,
            cols,
            weight: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    /// `W x + b`, skipping zero inputs (one-hot features are mostly zeros).
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (c, &xc) in x.iter().enumerate() {
            if xc == 0.0 {
                continue;
            }
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.weight[r * self.cols + c] * xc;
            }
        }
    }
}

/// All trainable tensors. Gradients and Adam moments reuse this layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParameters {
    pub shape: ModelShape,
    pub vertex: Vec<Dense>,
    pub edge: Vec<Dense>,
    /// `4h × l_f`, gate blocks in (input, forget, output, candidate) order.
    pub lstm_input: Vec<f64>,
    /// `4h × h`.
    pub lstm_hidden: Vec<f64>,
    /// `4h`.
    pub lstm_bias: Vec<f64>,
    pub score_weight: Vec<f64>,
    pub score_bias: f64,
}

fn glorot(rng: &mut ChaCha8Rng, data: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for x in data {
        *x = rng.gen_range(-limit..limit);
    }
}

impl ModelParameters {
    pub fn zeros(shape: ModelShape) -> Self {
        let lf = shape.feature_len;
        let h = shape.code_len;
        ModelParameters {
            shape,
            vertex: shape.dims.vertex.iter().map(|&d| Dense::zeros(lf, d)).collect(),
            edge: shape.dims.edge.iter().map(|&d| Dense::zeros(lf, d)).collect(),
            lstm_input: vec![0.0; 4 * h * lf],
            lstm_hidden: vec![0.0; 4 * h * h],
            lstm_bias: vec![0.0; 4 * h],
            score_weight: vec![0.0; h],
            score_bias: 0.0,
        }
    }

    /// Glorot-uniform weights, zero biases, forget-gate bias 1.
    pub fn init(shape: ModelShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(shape, &mut rng)
    }

    fn init_with(shape: ModelShape, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(shape);
        let lf = shape.feature_len;
        let h = shape.code_len;
        for layer in p.vertex.iter_mut().chain(p.edge.iter_mut()) {
            glorot(rng, &mut layer.weight, layer.cols, layer.rows);
        }
        glorot(rng, &mut p.lstm_input, lf, 4 * h);
        glorot(rng, &mut p.lstm_hidden, h, 4 * h);
        p.lstm_bias[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
        glorot(rng, &mut p.score_weight, h, 1);
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape)
    }

    /// Every tensor, in checkpoint order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in self.vertex.iter().chain(&self.edge) {
            out.push(&layer.weight);
            out.push(&layer.bias);
        }
        out.push(&self.lstm_input);
        out.push(&self.lstm_hidden);
        out.push(&self.lstm_bias);
        out.push(&self.score_weight);
        out.push(std::slice::from_ref(&self.score_bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in self.vertex.iter_mut().chain(self.edge.iter_mut()) {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out.push(&mut self.lstm_input);
        out.push(&mut self.lstm_hidden);
        out.push(&mut self.lstm_bias);
        out.push(&mut self.score_weight);
        out.push(std::slice::from_mut(&mut self.score_bias));
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (kind, n) in [("vertex", VERTEX_FEATURES), ("edge", EDGE_FEATURES)] {
            for j in 0..n {
                out.push(format!("{kind}{j}.weight"));
                out.push(format!("{kind}{j}.bias"));
            }
        }
        out.extend(
            ["lstm.input", "lstm.hidden", "lstm.bias", "score.weight", "score.bias"].map(String::from),
        );
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn check_path(&self, path: &FeaturizedPath) -> Result<()> {
        if path.is_empty() {
            return Err(Error::Shape("empty item sequence".into()));
        }
        path.check_dims(&self.shape.dims)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(x)`, stable for large `|x|`.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Probability that the first path is chosen, from the score difference `m₁ - m₂`.
pub fn pair_probability(score_diff: f64) -> f64 {
    sigmoid(score_diff)
}

/// `e^{m₁} / (e^{m₁} + e^{m₂})`, evaluated as `σ(m₁ - m₂)`.
pub fn predict_pair(m1: f64, m2: f64) -> f64 {
    pair_probability(m1 - m2)
}

/// Mean NLL of observed choices given the predicted probability of `First`.
pub fn nll_loss(predictions: &[f64], labels: &[Choice]) -> Result<f64> {
    if predictions.len() != labels.len() || predictions.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, label)| match label {
            Choice::First => -(p - 1.0).ln_1p(),
            Choice::Second => -(-p).ln_1p(),
        })
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Mean NLL from score differences, computed without leaving log space.
pub fn nll_from_score_diffs(diffs: &[f64], labels: &[Choice]) -> Result<f64> {
    if diffs.len() != labels.len() || diffs.is_empty() {
        return Err(Error::Shape(format!("{} scores for {} labels", diffs.len(), labels.len())));
    }
    let total: f64 = diffs
        .iter()
        .zip(labels)
        .map(|(&d, label)| neg_log_sigmoid(label.sign() * d))
        .sum();
    Ok(total / diffs.len() as f64)
}

struct ItemTrace {
    /// Pre-activation of each feature transform.
    pre: Vec<Vec<f64>>,
    code: Vec<f64>,
    vertex: bool,
}

struct StepTrace {
    /// Gate activations (input, forget, output, candidate), each of width h.
    gates: Vec<f64>,
    cell: Vec<f64>,
    hidden: Vec<f64>,
}

struct PathTrace {
    items: Vec<ItemTrace>,
    steps: Vec<StepTrace>,
    score: f64,
}

fn feature_slices(item: Item<'_>) -> (bool, Vec<&[f64]>) {
    match item {
        Item::Vertex(v) => (true, v.slices().to_vec()),
        Item::Edge(e) => (false, e.slices().to_vec()),
    }
}

fn encode_item_trace(params: &ModelParameters, item: Item<'_>) -> ItemTrace {
    let lf = params.shape.feature_len;
    let (vertex, slices) = feature_slices(item);
    let layers = if vertex { &params.vertex } else { &params.edge };
    let mut code = vec![0.0; lf];
    let mut pre = Vec::with_capacity(slices.len());
    for (layer, x) in layers.iter().zip(&slices) {
        let mut z = vec![0.0; lf];
        layer.apply(x, &mut z);
        for (c, &zi) in code.iter_mut().zip(&z) {
            *c += zi.max(0.0);
        }
        pre.push(z);
    }
    let n = slices.len() as f64;
    code.iter_mut().for_each(|c| *c /= n);
    ItemTrace { pre, code, vertex }
}

fn lstm_step(params: &ModelParameters, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepTrace {
    let h = params.shape.code_len;
    let lf = params.shape.feature_len;
    let mut z = params.lstm_bias.clone();
    for (r, zr) in z.iter_mut().enumerate() {
        let wx = &params.lstm_input[r * lf..(r + 1) * lf];
        let wh = &params.lstm_hidden[r * h..(r + 1) * h];
        *zr += wx.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        *zr += wh.iter().zip(h_prev).map(|(a, b)| a * b).sum::<f64>();
    }
    let mut gates = z;
    for (k, g) in gates.iter_mut().enumerate() {
        *g = if k < 3 * h { sigmoid(*g) } else { g.tanh() };
    }
    let mut cell = vec![0.0; h];
    let mut hidden = vec![0.0; h];
    for k in 0..h {
        let (i, f, o, g) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
        cell[k] = f * c_prev[k] + i * g;
        hidden[k] = o * cell[k].tanh();
    }
    StepTrace { gates, cell, hidden }
}

fn forward(params: &ModelParameters, path: &FeaturizedPath) -> PathTrace {
    let h = params.shape.code_len;
    let items: Vec<ItemTrace> = path.items().map(|it| encode_item_trace(params, it)).collect();
    let mut steps: Vec<StepTrace> = Vec::with_capacity(items.len());
    let zeros = vec![0.0; h];
    for item in &items {
        let (hp, cp) = match steps.last() {
            Some(s) => (&s.hidden, &s.cell),
            None => (&zeros, &zeros),
        };
        let step = lstm_step(params, &item.code, hp, cp);
        steps.push(step);
    }
    let last = &steps.last().expect("non-empty path").hidden;
    let score = params.score_bias
        + params
            .score_weight
            .iter()
            .zip(last)
            .map(|(w, x)| w * x)
            .sum::<f64>();
    PathTrace { items, steps, score }
}

/// Code of one vertex or edge: mean over features of `ReLU(W_j x_j + b_j)`.
pub fn encode_item(item: Item<'_>, params: &ModelParameters) -> Vec<f64> {
    encode_item_trace(params, item).code
}

/// Final LSTM hidden state over the item codes, from a zero initial state.
pub fn encode_path(path: &FeaturizedPath, params: &ModelParameters) -> Result<Vec<f64>> {
    params.check_path(path)?;
    let trace = forward(params, path);
    Ok(trace.steps.last().expect("non-empty").hidden.clone())
}

/// Naturalness score `m = w · code + b`.
pub fn score_path(path: &FeaturizedPath, params: &ModelParameters) -> Result<f64> {
    params.check_path(path)?;
    Ok(forward(params, path).score)
}

/// Backpropagates `d loss / d m` through one path trace into `grads`.
fn backward_path(
    params: &ModelParameters,
    path: &FeaturizedPath,
    trace: &PathTrace,
    dscore: f64,
    grads: &mut ModelParameters,
) {
    let h = params.shape.code_len;
    let lf = params.shape.feature_len;
    let t_len = trace.steps.len();
    let last = &trace.steps[t_len - 1].hidden;

    grads.score_bias += dscore;
    for (g, x) in grads.score_weight.iter_mut().zip(last) {
        *g += dscore * x;
    }
    let mut dh: Vec<f64> = params.score_weight.iter().map(|w| dscore * w).collect();
    let mut dc_next = vec![0.0; h];
    let zeros = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];

    for t in (0..t_len).rev() {
        let step = &trace.steps[t];
        let (h_prev, c_prev) = if t > 0 {
            (&trace.steps[t - 1].hidden, &trace.steps[t - 1].cell)
        } else {
            (&zeros, &zeros)
        };
        let x = &trace.items[t].code;
        for k in 0..h {
            let (i, f, o, g) = (
                step.gates[k],
                step.gates[h + k],
                step.gates[2 * h + k],
                step.gates[3 * h + k],
            );
            let tc = step.cell[k].tanh();
            let d_o = dh[k] * tc;
            let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
            let d_i = dc * g;
            let d_g = dc * i;
            let d_f = dc * c_prev[k];
            dc_next[k] = dc * f;
            dz[k] = d_i * i * (1.0 - i);
            dz[h + k] = d_f * f * (1.0 - f);
            dz[2 * h + k] = d_o * o * (1.0 - o);
            dz[3 * h + k] = d_g * (1.0 - g * g);
        }
        let mut dx = vec![0.0; lf];
        let mut dh_prev = vec![0.0; h];
        for (r, &dzr) in dz.iter().enumerate() {
            grads.lstm_bias[r] += dzr;
            if dzr == 0.0 {
                continue;
            }
            let gx = &mut grads.lstm_input[r * lf..(r + 1) * lf];
            let wx = &params.lstm_input[r * lf..(r + 1) * lf];
            for c in 0..lf {
                gx[c] += dzr * x[c];
                dx[c] += wx[c] * dzr;
            }
            let gh = &mut grads.lstm_hidden[r * h..(r + 1) * h];
            let wh = &params.lstm_hidden[r * h..(r + 1) * h];
            for c in 0..h {
                gh[c] += dzr * h_prev[c];
                dh_prev[c] += wh[c] * dzr;
            }
        }
        dh = dh_prev;

        let item = &trace.items[t];
        let (_, slices) = feature_slices(path.item(t));
        let layers = if item.vertex { &mut grads.vertex } else { &mut grads.edge };
        let n = slices.len() as f64;
        for ((layer, pre), xj) in layers.iter_mut().zip(&item.pre).zip(&slices) {
            for r in 0..lf {
                if pre[r] <= 0.0 {
                    continue;
                }
                let dpre = dx[r] / n;
                layer.bias[r] += dpre;
                let row = &mut layer.weight[r * layer.cols..(r + 1) * layer.cols];
                for (w, &xc) in row.iter_mut().zip(xj.iter()) {
                    if xc != 0.0 {
                        *w += dpre * xc;
                    }
                }
            }
        }
    }
}

/// A judged comparison between two featurized paths, by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub first: usize,
    pub second: usize,
    pub label: Choice,
}

fn example_gradient(
    params: &ModelParameters,
    paths: &[FeaturizedPath],
    ex: &Example,
    scale: f64,
) -> (f64, ModelParameters) {
    let a = forward(params, &paths[ex.first]);
    let b = forward(params, &paths[ex.second]);
    let diff = a.score - b.score;
    let loss = neg_log_sigmoid(ex.label.sign() * diff);
    let target = if ex.label == Choice::First { 1.0 } else { 0.0 };
    let g = (sigmoid(diff) - target) * scale;
    let mut grads = params.zeros_like();
    backward_path(params, &paths[ex.first], &a, g, &mut grads);
    backward_path(params, &paths[ex.second], &b, -g, &mut grads);
    (loss, grads)
}

fn check_batch(params: &ModelParameters, paths: &[FeaturizedPath], batch: &[Example]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    for ex in batch {
        for &i in &[ex.first, ex.second] {
            let p = paths
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("path index {i} out of range")))?;
            params.check_path(p)?;
        }
    }
    Ok(())
}

/// Mean NLL over `batch`, forward only.
pub fn batch_loss(params: &ModelParameters, paths: &[FeaturizedPath], batch: &[Example]) -> Result<f64> {
    check_batch(params, paths, batch)?;
    let diffs: Vec<f64> = batch
        .iter()
        .map(|ex| forward(params, &paths[ex.first]).score - forward(params, &paths[ex.second]).score)
        .collect();
    let labels: Vec<Choice> = batch.iter().map(|ex| ex.label).collect();
    nll_from_score_diffs(&diffs, &labels)
}

/// Mean NLL over `batch` and its exact gradient with respect to every parameter.
///
/// Per-example gradients are summed in batch order whether or not `parallel`
/// is set, so both modes give bit-identical results.
pub fn backward(
    params: &ModelParameters,
    paths: &[FeaturizedPath],
    batch: &[Example],
    parallel: bool,
) -> Result<(f64, ModelParameters)> {
    check_batch(params, paths, batch)?;
    let scale = 1.0 / batch.len() as f64;
    let parts: Vec<(f64, ModelParameters)> = if parallel {
        batch
            .par_iter()
            .map(|ex| example_gradient(params, paths, ex, scale))
            .collect()
    } else {
        batch
            .iter()
            .map(|ex| example_gradient(params, paths, ex, scale))
            .collect()
    };
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        grads.add_assign(g);
    }
    Ok((loss * scale, grads))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first: ModelParameters,
    pub second: ModelParameters,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParameters) -> Self {
        AdamState {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update on flat slices; `t` is the 1-based step.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    first: &mut [f64],
    second: &mut [f64],
    t: u64,
    config: &AdamConfig,
) {
    assert!(t >= 1, "Adam steps are 1-based");
    let c1 = 1.0 - config.beta1.powi(t as i32);
    let c2 = 1.0 - config.beta2.powi(t as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(first.iter_mut()).zip(second.iter_mut()) {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

pub fn adam_step(params: &mut ModelParameters, grads: &ModelParameters, state: &mut AdamState, config: &AdamConfig) {
    state.step += 1;
    let t = state.step;
    let (first, second) = (&mut state.first, &mut state.second);
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(first.tensors_mut())
        .zip(second.tensors_mut())
    {
        adam_update(p, g, m, v, t, config);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// `l_f`.
    pub feature_len: usize,
    /// `h`.
    pub code_len: usize,
    /// Vertex embedding width `d′` (PCA target); `None` keeps raw vectors.
    pub embedding_dim: Option<usize>,
    pub mask: FeatureMask,
    /// Compute per-example gradients on the rayon pool. Not stored in checkpoints.
    #[serde(skip)]
    pub parallel: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainingConfig {
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            feature_len: 64,
            code_len: 10,
            embedding_dim: None,
            mask: FeatureMask::all(),
            parallel: false,
        }
    }
}

impl TrainingConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("epsilon", self.epsilon),
            ("epochs", self.epochs as f64),
            ("batch_size", self.batch_size as f64),
            ("feature_len", self.feature_len as f64),
            ("code_len", self.code_len as f64),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1)")));
            }
        }
        if self.embedding_dim == Some(0) {
            return Err(Error::InvalidArgument("embedding_dim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training NLL over the epoch's batches.
    pub loss: f64,
    pub heldout_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\tloss\theldout_accuracy\n");
        for r in &self.epochs {
            let acc = r.heldout_accuracy.map(|a| a.to_string()).unwrap_or_else(|| "NA".into());
            out.push_str(&format!("{}\t{}\t{}\n", r.epoch, r.loss, acc));
        }
        out
    }
}

/// Held-out data scored after every epoch.
pub struct Heldout<'a> {
    pub paths: &'a [FeaturizedPath],
    pub examples: &'a [Example],
}

/// Trains from scratch. Deterministic for a fixed seed: the shuffle order and
/// gradient accumulation order depend on nothing else.
pub fn train(
    dims: FeatureDims,
    paths: &[FeaturizedPath],
    examples: &[Example],
    heldout: Option<Heldout<'_>>,
    config: &TrainingConfig,
) -> Result<(ModelParameters, TrainingLog)> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let shape = ModelShape {
        dims,
        feature_len: config.feature_len,
        code_len: config.code_len,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParameters::init_with(shape, &mut rng);
    check_batch(&params, paths, examples)?;
    if let Some(h) = &heldout {
        check_batch(&params, h.paths, h.examples)?;
    }
    let adam = config.adam();
    let mut state = AdamState::new(&params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut log = TrainingLog::default();
    let mut batch = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i]));
            let (loss, grads) = backward(&params, paths, &batch, config.parallel)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss * batch.len() as f64;
            adam_step(&mut params, &grads, &mut state, &adam);
        }
        let loss = total / examples.len() as f64;
        if !loss.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        let heldout_accuracy = match &heldout {
            Some(h) => Some(evaluate_accuracy(&params, h.paths, h.examples)?),
            None => None,
        };
        log.epochs.push(EpochRecord {
            epoch,
            loss,
            heldout_accuracy,
        });
    }
    Ok((params, log))
}

/// Fraction of judged pairs whose higher-scored path was the chosen one; ties count half.
pub fn accuracy_from_scores(scored: &[(f64, f64, Choice)]) -> Result<f64> {
    if scored.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let hits: f64 = scored
        .iter()
        .map(|&(m1, m2, label)| {
            if m1 == m2 {
                0.5
            } else if (m1 > m2) == (label == Choice::First) {
                1.0
            } else {
                0.0
            }
        })
        .sum();
    Ok(hits / scored.len() as f64)
}

pub fn evaluate_accuracy(params: &ModelParameters, paths: &[FeaturizedPath], examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    check_batch(params, paths, examples)?;
    let mut cache: Vec<Option<f64>> = vec![None; paths.len()];
    let mut score = |i: usize| *cache[i].get_or_insert_with(|| forward(params, &paths[i]).score);
    let scored: Vec<(f64, f64, Choice)> = examples
        .iter()
        .map(|ex| (score(ex.first), score(ex.second), ex.label))
        .collect();
    accuracy_from_scores(&scored)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"PNATCKPT";
const CHECKPOINT_VERSION: u32 = 1;

/// Parameters plus free-form metadata (training config, featurization).
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub params: ModelParameters,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    shape: ModelShape,
    meta: serde_json::Value,
}

impl Checkpoint {
    /// Layout: magic, `u32` version, `u64` header length, JSON header (shape and
    /// metadata), `u32` tensor count, then per tensor a `u64` length followed by
    /// that many little-endian `f64`s in [`ModelParameters::tensors`] order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&CheckpointHeader {
            shape: self.params.shape,
            meta: self.meta.clone(),
        })
        .expect("checkpoint header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in tensors {
            out.extend_from_slice(&(t.len() as u64).to_le_bytes());
            for x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut r)?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let header_len = u64::from_le_bytes(read_array(&mut r)?) as usize;
        if header_len > r.len() {
            return Err(Error::Checkpoint("truncated header".into()));
        }
        let header: CheckpointHeader = serde_json::from_slice(&r[..header_len])
            .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
        r = &r[header_len..];
        let mut params = ModelParameters::zeros(header.shape);
        let count = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let mut tensors = params.tensors_mut();
        if count != tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {count}",
                tensors.len()
            )));
        }
        for t in tensors.iter_mut() {
            let len = u64::from_le_bytes(read_array(&mut r)?) as usize;
            if len != t.len() {
                return Err(Error::Checkpoint(format!("tensor length {len}, expected {}", t.len())));
            }
            for x in t.iter_mut() {
                *x = f64::from_le_bytes(read_array(&mut r)?);
            }
        }
        if !r.is_empty() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint {
            meta: header.meta,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    if r.len() < buf.len() {
        return Err(Error::Checkpoint("truncated file".into()));
    }
    buf.copy_from_slice(&r[..buf.len()]);
    *r = &r[buf.len()..];
    Ok(())
}

fn read_array<const N: usize>(r: &mut &[u8]) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{EdgeFeatures, VertexFeatures};
    use proptest::prelude::*;
    use rand::Rng;

    pub(crate) fn tiny_dims() -> FeatureDims {
        FeatureDims {
            vertex: [2, 1, 1, 1],
            edge: [1, 3, 4, 6, 1],
        }
    }

    fn random_path(rng: &mut ChaCha8Rng, dims: &FeatureDims, nodes: usize) -> FeaturizedPath {
        let mut r = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let vertices = (0..nodes)
            .map(|_| VertexFeatures {
                embedding: r(dims.vertex[0]),
                frequency: r(1)[0],
                degree: r(1)[0],
                sense_score: r(1)[0],
            })
            .collect();
        let edges = (0..nodes - 1)
            .map(|_| EdgeFeatures {
                ends_similarity: r(1)[0],
                direction: r(3).try_into().unwrap(),
                relation: r(dims.edge[2]),
                provenance: r(6).try_into().unwrap(),
                sense_score: r(1)[0],
            })
            .collect();
        FeaturizedPath { vertices, edges }
    }

    fn unit_path(value: f64) -> FeaturizedPath {
        // h = 1, l_f = 1 toy: every feature is a scalar
        FeaturizedPath {
            vertices: vec![
                VertexFeatures { embedding: vec![value], frequency: value, degree: value, sense_score: value };
                2
            ],
            edges: vec![EdgeFeatures {
                ends_similarity: value,
                direction: [0.0; 3],
                relation: vec![0.0],
                provenance: [0.0; 6],
                sense_score: value,
            }],
        }
    }

    #[test]
    fn zero_params_give_zero_code_and_score() {
        let dims = tiny_dims();
        let shape = ModelShape { dims, feature_len: 3, code_len: 2 };
        let params = ModelParameters::zeros(shape);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_path(&mut rng, &dims, 3);
        assert!(encode_item(p.item(0), &params).iter().all(|&x| x == 0.0));
        assert!(encode_path(&p, &params).unwrap().iter().all(|&x| x == 0.0));
        assert_eq!(score_path(&p, &params).unwrap(), 0.0);
    }

    #[test]
    fn item_encoder_identity_and_average() {
        let dims = FeatureDims { vertex: [1, 1, 1, 1], edge: [1, 3, 1, 6, 1] };
        let mut params = ModelParameters::zeros(ModelShape { dims, feature_len: 2, code_len: 1 });
        let v = VertexFeatures { embedding: vec![0.7], frequency: 2.0, degree: -1.0, sense_score: 0.0 };
        // single active feature with identity-like weights: the mean spreads it over 4 features
        params.vertex[0].weight = vec![1.0, 0.0];
        let code = encode_item(Item::Vertex(&v), &params);
        assert_eq!(code, vec![0.7 / 4.0, 0.0]);

        // two features with hand-set 2x1 weights
        params.vertex[1].weight = vec![0.5, -1.0];
        params.vertex[1].bias = vec![0.1, 0.3];
        params.vertex[2].weight = vec![-2.0, 3.0];
        // feature 0: relu(0.7, 0) ; feature 1: relu(1.1, -1.7) ; feature 2: relu(2, -3) ; feature 3: 0
        let want = [(0.7 + 1.1 + 2.0) / 4.0, 0.0];
        let code = encode_item(Item::Vertex(&v), &params);
        assert!((code[0] - want[0]).abs() < 1e-12 && (code[1] - want[1]).abs() < 1e-12);
    }

    #[test]
    fn single_step_lstm_matches_hand_evaluation() {
        let dims = FeatureDims { vertex: [1, 1, 1, 1], edge: [1, 3, 1, 6, 1] };
        let mut params = ModelParameters::zeros(ModelShape { dims, feature_len: 1, code_len: 1 });
        // candidate pre-activation 1, every gate pre-activation 0
        params.lstm_bias = vec![0.0, 0.0, 0.0, 1.0];
        let step = lstm_step(&params, &[0.0], &[0.0], &[0.0]);
        let want = 0.5 * (0.5 * 1f64.tanh()).tanh();
        assert!((step.hidden[0] - want).abs() < 1e-9);
    }

    #[test]
    fn order_sensitivity() {
        let dims = tiny_dims();
        let params = ModelParameters::init(ModelShape { dims, feature_len: 4, code_len: 3 }, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_path(&mut rng, &dims, 3);
        let mut q = p.clone();
        q.vertices.swap(0, 2);
        assert_ne!(encode_path(&p, &params).unwrap(), encode_path(&q, &params).unwrap());
        assert_eq!(score_path(&p, &params).unwrap(), score_path(&p.clone(), &params).unwrap());
    }

    #[test]
    fn hand_forward_pass_score() {
        let dims = FeatureDims { vertex: [1, 1, 1, 1], edge: [1, 3, 1, 6, 1] };
        let mut params = ModelParameters::zeros(ModelShape { dims, feature_len: 1, code_len: 1 });
        params.vertex[0].weight = vec![1.0];
        params.lstm_input = vec![0.0, 0.0, 0.0, 1.0];
        params.score_weight = vec![2.0];
        params.score_bias = -0.5;
        let path = unit_path(0.8);
        // vertex codes 0.8/4 = 0.2, edge code 0; all gates 0.5
        let mut h = 0.0;
        let mut c = 0.0;
        for x in [0.2, 0.0, 0.2] {
            c = 0.5 * c + 0.5 * f64::tanh(x);
            h = 0.5 * c.tanh();
        }
        let want = 2.0 * h - 0.5;
        assert!((score_path(&path, &params).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn pair_probabilities() {
        assert_eq!(predict_pair(0.3, 0.3), 0.5);
        assert!((predict_pair(3f64.ln(), 0.0) - 0.75).abs() < 1e-15);
        for (a, b) in [(1.0, -2.0), (40.0, -40.0), (0.1, 0.2)] {
            assert!((predict_pair(a, b) + predict_pair(b, a) - 1.0).abs() < 1e-12);
        }
        assert!(predict_pair(800.0, -800.0) <= 1.0 && predict_pair(-800.0, 800.0) >= 0.0);
    }

    #[test]
    fn nll_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((nll_loss(&[0.5], &[Choice::First]).unwrap() - ln2).abs() < 1e-15);
        assert!((nll_loss(&[0.5], &[Choice::Second]).unwrap() - ln2).abs() < 1e-15);
        let tiny = nll_loss(&[1.0 - 1e-12], &[Choice::First]).unwrap();
        assert!((tiny - 1e-12).abs() < 1e-15);
        let two = nll_loss(&[0.5, 0.75], &[Choice::First, Choice::First]).unwrap();
        assert!((two - (ln2 + (4.0f64 / 3.0).ln()) / 2.0).abs() < 1e-12);
        assert!(nll_from_score_diffs(&[1e6], &[Choice::Second]).unwrap().is_finite());
        assert!(nll_loss(&[], &[]).is_err());
    }

    #[test]
    fn scorer_bias_gradient_is_mean_residual() {
        let dims = tiny_dims();
        let params = ModelParameters::init(ModelShape { dims, feature_len: 4, code_len: 3 }, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let paths: Vec<_> = (0..4).map(|i| random_path(&mut rng, &dims, 2 + i % 3)).collect();
        let batch = [
            Example { first: 0, second: 1, label: Choice::First },
            Example { first: 2, second: 3, label: Choice::Second },
            Example { first: 1, second: 2, label: Choice::First },
        ];
        let (_, grads) = backward(&params, &paths, &batch, false).unwrap();
        // m₁ and m₂ share the bias, so its gradient cancels within each pair
        assert!(grads.score_bias.abs() < 1e-15);
        // the score weight gradient is mean((p - y)(code₁ - code₂))
        let mut want = vec![0.0; 3];
        for ex in &batch {
            let c1 = encode_path(&paths[ex.first], &params).unwrap();
            let c2 = encode_path(&paths[ex.second], &params).unwrap();
            let p = predict_pair(score_path(&paths[ex.first], &params).unwrap(), score_path(&paths[ex.second], &params).unwrap());
            let y = if ex.label == Choice::First { 1.0 } else { 0.0 };
            for k in 0..3 {
                want[k] += (p - y) * (c1[k] - c2[k]) / 3.0;
            }
        }
        for k in 0..3 {
            assert!((grads.score_weight[k] - want[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn one_parameter_optimum_has_zero_gradient() {
        // two identical paths judged both ways: the loss is minimal at any parameters
        let dims = FeatureDims { vertex: [1, 1, 1, 1], edge: [1, 3, 1, 6, 1] };
        let params = ModelParameters::init(ModelShape { dims, feature_len: 1, code_len: 1 }, 0);
        let paths = vec![unit_path(0.3), unit_path(0.9)];
        let batch = [
            Example { first: 0, second: 1, label: Choice::First },
            Example { first: 0, second: 1, label: Choice::Second },
        ];
        let mut p = params.clone();
        // scan the score weight for the strict optimum m₁ = m₂ (weight 0 collapses both scores)
        p.score_weight = vec![0.0];
        let (_, g) = backward(&p, &paths, &batch, false).unwrap();
        assert!(g.score_weight[0].abs() < 1e-8);
    }

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let dims = tiny_dims();
        let params = ModelParameters::init(ModelShape { dims, feature_len: 5, code_len: 4 }, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let paths: Vec<_> = (0..10).map(|i| random_path(&mut rng, &dims, 2 + i % 3)).collect();
        let batch: Vec<Example> = (0..9)
            .map(|i| Example { first: i, second: i + 1, label: if i % 2 == 0 { Choice::First } else { Choice::Second } })
            .collect();
        let a = backward(&params, &paths, &batch, false).unwrap();
        let b = backward(&params, &paths, &batch, true).unwrap();
        assert_eq!(a, b);
        // the batch loss is the mean of per-example losses
        let each: f64 = batch.iter().map(|ex| batch_loss(&params, &paths, &[*ex]).unwrap()).sum::<f64>() / 9.0;
        assert!((a.0 - each).abs() < 1e-12);
        assert!((a.0 - batch_loss(&params, &paths, &batch).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut p = vec![1.0, -2.0];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_update(&mut p, &[0.0, 0.0], &mut m, &mut v, 1, &AdamConfig::default());
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.0, 0.0];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_update(&mut p, &[3.0, -0.02], &mut m, &mut v, 1, &cfg);
        assert!((p[0] + cfg.learning_rate).abs() < 1e-10);
        assert!((p[1] - cfg.learning_rate).abs() < 1e-8);
    }

    #[test]
    fn adam_three_hand_iterations() {
        let cfg = AdamConfig { learning_rate: 0.1, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 };
        let grads = [0.5, -0.25, 1.0];
        // hand simulation written out step by step
        let mut theta = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut expected = Vec::new();
        for (t, g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            theta -= 0.1 * mh / (vh.sqrt() + 1e-8);
            expected.push(theta);
        }
        let mut p = vec![1.0];
        let (mut mm, mut vv) = (vec![0.0], vec![0.0]);
        for (t, g) in grads.iter().enumerate() {
            adam_update(&mut p, &[*g], &mut mm, &mut vv, t as u64 + 1, &cfg);
            assert!((p[0] - expected[t]).abs() < 1e-10);
        }
        // first step: -lr·sign(g)
        assert!((expected[0] - 0.9).abs() < 1e-7);
    }

    #[test]
    fn training_on_one_pair_converges() {
        let dims = tiny_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let paths = vec![random_path(&mut rng, &dims, 3), random_path(&mut rng, &dims, 3)];
        let examples = vec![Example { first: 0, second: 1, label: Choice::First }; 8];
        let cfg = TrainingConfig { epochs: 40, batch_size: 8, feature_len: 8, code_len: 4, ..Default::default() };
        let (params, log) = train(dims, &paths, &examples, None, &cfg).unwrap();
        for w in log.epochs[..10].windows(2) {
            assert!(w[1].loss < w[0].loss, "{:?}", log.epochs);
        }
        let p = predict_pair(score_path(&paths[0], &params).unwrap(), score_path(&paths[1], &params).unwrap());
        assert!(p > 0.5);
        assert!(log.epochs.last().unwrap().loss < log.epochs[0].loss);
    }

    #[test]
    fn training_is_deterministic() {
        let dims = tiny_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let paths: Vec<_> = (0..6).map(|i| random_path(&mut rng, &dims, 2 + i % 3)).collect();
        let examples: Vec<Example> = (0..5)
            .map(|i| Example { first: i, second: 5 - i, label: Choice::First })
            .collect();
        let cfg = TrainingConfig { epochs: 3, batch_size: 2, feature_len: 4, code_len: 3, seed: 77, ..Default::default() };
        let a = train(dims, &paths, &examples, None, &cfg).unwrap();
        let b = train(dims, &paths, &examples, None, &TrainingConfig { parallel: true, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        let ca = Checkpoint { meta: serde_json::json!({"seed": 77}), params: a.0 };
        let cb = Checkpoint { meta: serde_json::json!({"seed": 77}), params: b.0 };
        assert_eq!(ca.to_bytes(), cb.to_bytes());
    }

    #[test]
    fn training_errors() {
        let dims = tiny_dims();
        let cfg = TrainingConfig::default();
        assert!(train(dims, &[], &[], None, &cfg).is_err());
        let bad = TrainingConfig { batch_size: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let dims = tiny_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut paths = vec![random_path(&mut rng, &dims, 2), random_path(&mut rng, &dims, 2)];
        paths[0].vertices[0].degree = f64::INFINITY;
        let examples = vec![Example { first: 0, second: 1, label: Choice::First }];
        let cfg = TrainingConfig { epochs: 2, feature_len: 2, code_len: 2, ..Default::default() };
        assert!(matches!(train(dims, &paths, &examples, None, &cfg), Err(Error::Diverged { epoch: 1, .. })));
    }

    #[test]
    fn accuracy_rules() {
        let all = [(1.0, 0.0, Choice::First), (2.0, -1.0, Choice::First)];
        assert_eq!(accuracy_from_scores(&all).unwrap(), 1.0);
        assert_eq!(accuracy_from_scores(&[(0.0, 0.0, Choice::Second)]).unwrap(), 0.5);
        assert!(accuracy_from_scores(&[]).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dims = tiny_dims();
        let params = ModelParameters::init(ModelShape { dims, feature_len: 3, code_len: 2 }, 42);
        let ck = Checkpoint { meta: serde_json::json!({"note": "x"}), params };
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = random_path(&mut rng, &dims, 4);
        assert_eq!(
            score_path(&p, &ck.params).unwrap().to_bits(),
            score_path(&p, &back.params).unwrap().to_bits()
        );
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(b"garbage!").is_err());
    }

    proptest! {
        #[test]
        fn shift_invariance_on_exact_grid(a in -64i32..64, b in -64i32..64, c in -1024i32..1024) {
            let (m1, m2, s) = (a as f64 / 8.0, b as f64 / 8.0, c as f64);
            prop_assert_eq!(predict_pair(m1 + s, m2 + s), predict_pair(m1, m2));
        }

        #[test]
        fn accuracy_invariant_under_monotone_rescaling(
            scores in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, any::<bool>()), 1..40),
            scale in 0.1f64..10.0,
            shift in -3.0f64..3.0,
        ) {
            let base: Vec<_> = scores.iter().map(|&(a, b, f)| (a, b, if f { Choice::First } else { Choice::Second })).collect();
            let mapped: Vec<_> = base.iter().map(|&(a, b, l)| ((a * scale + shift).exp(), (b * scale + shift).exp(), l)).collect();
            prop_assert_eq!(accuracy_from_scores(&base).unwrap(), accuracy_from_scores(&mapped).unwrap());
        }
    }

    #[test]
    fn constant_scorer_on_random_labels_is_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scored: Vec<_> = (0..2000)
            .map(|_| (1.0, 0.0, if rng.gen_bool(0.5) { Choice::First } else { Choice::Second }))
            .collect();
        let acc = accuracy_from_scores(&scored).unwrap();
        assert!((acc - 0.5).abs() < 0.05, "{acc}");
    }
}
