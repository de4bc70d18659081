//! A small convolutional encoder trained by softmax regression on
//! pseudo-labels. All arithmetic is f64 and fully deterministic for a
//! given seed.

pub mod params_io;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LmsFeature;
use crate::matrix::Matrix;

/// Row-per-item embedding matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    vectors: Matrix,
}

impl EmbeddingSet {
    pub fn new(vectors: Matrix) -> Result<EmbeddingSet> {
        if vectors.rows() == 0 || vectors.cols() == 0 {
            return Err(Error::InvalidInput("embedding set is empty".into()));
        }
        if !vectors.is_finite() {
            return Err(Error::InvalidInput("embedding set has non-finite entries".into()));
        }
        Ok(EmbeddingSet { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel: usize,
    pub out_channels: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// (channels, bands, frames) of one input tensor.
    pub input_shape: (usize, usize, usize),
    /// Each convolution is followed by a ReLU and a 2x2 max-pool.
    pub conv_layers: Vec<ConvSpec>,
    /// Fully connected widths; the last one is the embedding dimension.
    pub fc_sizes: Vec<usize>,
    pub n_output_classes: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Upper bound on SGD steps per training call.
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> NetworkConfig {
        NetworkConfig {
            input_shape: (1, 64, 128),
            conv_layers: vec![
                ConvSpec { kernel: 3, out_channels: 5, stride: 1 },
                ConvSpec { kernel: 3, out_channels: 5, stride: 1 },
            ],
            fc_sizes: vec![32],
            n_output_classes: 2,
            learning_rate: 1e-3,
            weight_decay: 0.1,
            batch_size: 16,
            max_iterations: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    /// [out_ch][in_ch][kernel][kernel], row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// [out_dim][in_dim], row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub input_shape: (usize, usize, usize),
    pub conv: Vec<ConvLayer>,
    pub fc: Vec<FcLayer>,
    /// Softmax layer sized to the current number of pseudo-classes.
    pub head: FcLayer,
}

/// A (channels, height, width) tensor stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(c: usize, h: usize, w: usize) -> Tensor {
        Tensor { c, h, w, data: vec![0.0; c * h * w] }
    }

    #[inline]
    pub fn idx(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.h + y) * self.w + x
    }
}

fn init_fc(rng: &mut ChaCha8Rng, in_dim: usize, out_dim: usize) -> FcLayer {
    let bound = 1.0 / (in_dim as f64).sqrt();
    let w = (0..out_dim * in_dim).map(|_| rng.random_range(-bound..bound)).collect();
    FcLayer { in_dim, out_dim, w, b: vec![0.0; out_dim] }
}

fn init_conv(rng: &mut ChaCha8Rng, in_ch: usize, spec: ConvSpec) -> ConvLayer {
    let fan_in = (in_ch * spec.kernel * spec.kernel) as f64;
    let bound = 1.0 / fan_in.sqrt();
    let len = spec.out_channels * in_ch * spec.kernel * spec.kernel;
    let w = (0..len).map(|_| rng.random_range(-bound..bound)).collect();
    ConvLayer {
        in_ch,
        out_ch: spec.out_channels,
        kernel: spec.kernel,
        stride: spec.stride,
        w,
        b: vec![0.0; spec.out_channels],
    }
}

/// Shape of each stage given a config; errors when a layer underflows.
fn check_shapes(cfg: &NetworkConfig) -> Result<usize> {
    let (mut ch, mut h, mut w) = cfg.input_shape;
    if ch == 0 || h == 0 || w == 0 {
        return Err(Error::InvalidInput("input shape has a zero dimension".into()));
    }
    for (idx, spec) in cfg.conv_layers.iter().enumerate() {
        if spec.kernel == 0 || spec.stride == 0 || spec.out_channels == 0 {
            return Err(Error::InvalidInput(format!("conv layer {idx} has a zero field")));
        }
        if h < spec.kernel || w < spec.kernel {
            return Err(Error::InvalidInput(format!(
                "conv layer {idx} input {h}x{w} is smaller than its {k}x{k} kernel",
                k = spec.kernel
            )));
        }
        h = (h - spec.kernel) / spec.stride + 1;
        w = (w - spec.kernel) / spec.stride + 1;
        if h < 2 || w < 2 {
            return Err(Error::InvalidInput(format!(
                "pooling after conv layer {idx} would empty the {h}x{w} map"
            )));
        }
        h /= 2;
        w /= 2;
        ch = spec.out_channels;
    }
    Ok(ch * h * w)
}

pub fn init_network(cfg: &NetworkConfig) -> Result<NetworkParams> {
    if cfg.fc_sizes.is_empty() {
        return Err(Error::InvalidInput("fc_sizes must not be empty".into()));
    }
    if cfg.fc_sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidInput("fc_sizes must be positive".into()));
    }
    if cfg.n_output_classes == 0 {
        return Err(Error::InvalidInput("n_output_classes must be at least 1".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidInput("batch_size must be at least 1".into()));
    }
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::InvalidInput("learning rate must be finite and non-negative".into()));
    }
    if !(cfg.weight_decay >= 0.0 && cfg.weight_decay.is_finite()) {
        return Err(Error::InvalidInput("weight decay must be finite and non-negative".into()));
    }
    let flat = check_shapes(cfg)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut conv = Vec::with_capacity(cfg.conv_layers.len());
    let mut in_ch = cfg.input_shape.0;
    for &spec in &cfg.conv_layers {
        conv.push(init_conv(&mut rng, in_ch, spec));
        in_ch = spec.out_channels;
    }
    let mut fc = Vec::with_capacity(cfg.fc_sizes.len());
    let mut in_dim = flat;
    for &out_dim in &cfg.fc_sizes {
        fc.push(init_fc(&mut rng, in_dim, out_dim));
        in_dim = out_dim;
    }
    let head = init_fc(&mut rng, in_dim, cfg.n_output_classes);
    Ok(NetworkParams { input_shape: cfg.input_shape, conv, fc, head })
}

impl NetworkParams {
    pub fn head_width(&self) -> usize {
        self.head.out_dim
    }

    pub fn embedding_dim(&self) -> usize {
        self.head.in_dim
    }

    /// Replace the softmax layer with a freshly initialized one of a new
    /// width, keeping the encoder untouched.
    pub fn re_head(&mut self, n_classes: usize, seed: u64) -> Result<()> {
        if n_classes == 0 {
            return Err(Error::InvalidInput("head width must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.head = init_fc(&mut rng, self.head.in_dim, n_classes);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let conv: usize = self.conv.iter().map(|l| l.w.len() + l.b.len()).sum();
        let fc: usize = self.fc.iter().map(|l| l.w.len() + l.b.len()).sum();
        conv + fc + self.head.w.len() + self.head.b.len()
    }
}

fn conv_forward(layer: &ConvLayer, x: &Tensor) -> Tensor {
    let oh = (x.h - layer.kernel) / layer.stride + 1;
    let ow = (x.w - layer.kernel) / layer.stride + 1;
    let mut out = Tensor::zeros(layer.out_ch, oh, ow);
    let k = layer.kernel;
    for oc in 0..layer.out_ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut sum = layer.b[oc];
                for ic in 0..layer.in_ch {
                    for ky in 0..k {
                        let iy = oy * layer.stride + ky;
                        let xrow = (ic * x.h + iy) * x.w + ox * layer.stride;
                        let wrow = ((oc * layer.in_ch + ic) * k + ky) * k;
                        for kx in 0..k {
                            sum += layer.w[wrow + kx] * x.data[xrow + kx];
                        }
                    }
                }
                out.data[(oc * oh + oy) * ow + ox] = sum;
            }
        }
    }
    out
}

/// 2x2 max-pool with stride 2; ties keep the first cell in scan order.
fn maxpool2(x: &Tensor) -> (Tensor, Vec<usize>) {
    let oh = x.h / 2;
    let ow = x.w / 2;
    let mut out = Tensor::zeros(x.c, oh, ow);
    let mut argmax = vec![0usize; x.c * oh * ow];
    for c in 0..x.c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_idx = x.idx(c, oy * 2, ox * 2);
                let mut best = x.data[best_idx];
                for dy in 0..2 {
                    for dx in 0..2 {
                        let idx = x.idx(c, oy * 2 + dy, ox * 2 + dx);
                        if x.data[idx] > best {
                            best = x.data[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (c * oh + oy) * ow + ox;
                out.data[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
    (out, argmax)
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn fc_forward(layer: &FcLayer, x: &[f64]) -> Vec<f64> {
    (0..layer.out_dim)
        .map(|o| {
            let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
            layer.b[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect()
}

/// Intermediate activations of one forward pass, kept for backprop.
struct ForwardCache {
    /// Pre-ReLU output of each conv layer.
    conv_pre: Vec<Tensor>,
    /// Post-pool activations; slot 0 is the input itself.
    stage_inputs: Vec<Tensor>,
    pool_argmax: Vec<Vec<usize>>,
    /// Pre-ReLU output of each fc layer.
    fc_pre: Vec<Vec<f64>>,
    /// Post-ReLU fc activations; slot 0 is the flattened conv output.
    fc_inputs: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

fn check_input_shape(params: &NetworkParams, x: &Tensor) -> Result<()> {
    if (x.c, x.h, x.w) != params.input_shape {
        return Err(Error::InvalidInput(format!(
            "input tensor {}x{}x{} does not match network input {}x{}x{}",
            x.c, x.h, x.w, params.input_shape.0, params.input_shape.1, params.input_shape.2
        )));
    }
    Ok(())
}

fn forward_one(params: &NetworkParams, x: &Tensor) -> Result<ForwardCache> {
    check_input_shape(params, x)?;
    let mut conv_pre = Vec::with_capacity(params.conv.len());
    let mut stage_inputs = vec![x.clone()];
    let mut pool_argmax = Vec::with_capacity(params.conv.len());
    for layer in &params.conv {
        let pre = conv_forward(layer, stage_inputs.last().unwrap());
        let mut post = pre.clone();
        relu_in_place(&mut post.data);
        let (pooled, argmax) = maxpool2(&post);
        conv_pre.push(pre);
        pool_argmax.push(argmax);
        stage_inputs.push(pooled);
    }

    let flat = stage_inputs.last().unwrap().data.clone();
    let mut fc_pre = Vec::with_capacity(params.fc.len());
    let mut fc_inputs = vec![flat];
    for layer in &params.fc {
        let pre = fc_forward(layer, fc_inputs.last().unwrap());
        let mut post = pre.clone();
        relu_in_place(&mut post);
        fc_pre.push(pre);
        fc_inputs.push(post);
    }
    let logits = fc_forward(&params.head, fc_inputs.last().unwrap());
    Ok(ForwardCache { conv_pre, stage_inputs, pool_argmax, fc_pre, fc_inputs, logits })
}

/// Embedding (the last fc activation) and logits for one input.
pub fn forward(params: &NetworkParams, x: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
    let cache = forward_one(params, x)?;
    Ok((cache.fc_inputs.last().unwrap().clone(), cache.logits))
}

pub fn extract_embeddings(params: &NetworkParams, data: &[Tensor]) -> Result<EmbeddingSet> {
    if data.is_empty() {
        return Err(Error::InvalidInput("no inputs to embed".into()));
    }
    let rows = data
        .iter()
        .map(|x| forward(params, x).map(|(emb, _)| emb))
        .collect::<Result<Vec<_>>>()?;
    EmbeddingSet::new(Matrix::from_rows(&rows)?)
}

fn softmax_ce(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label] - max);
    let mut dlogits: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    dlogits[label] -= 1.0;
    (loss, dlogits)
}

#[derive(Debug, Clone)]
struct Gradients {
    conv: Vec<(Vec<f64>, Vec<f64>)>,
    fc: Vec<(Vec<f64>, Vec<f64>)>,
    head: (Vec<f64>, Vec<f64>),
}

impl Gradients {
    fn zeros_like(p: &NetworkParams) -> Gradients {
        Gradients {
            conv: p.conv.iter().map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()])).collect(),
            fc: p.fc.iter().map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()])).collect(),
            head: (vec![0.0; p.head.w.len()], vec![0.0; p.head.b.len()]),
        }
    }

    fn scale(&mut self, s: f64) {
        for (w, b) in self.conv.iter_mut().chain(self.fc.iter_mut()) {
            w.iter_mut().for_each(|v| *v *= s);
            b.iter_mut().for_each(|v| *v *= s);
        }
        self.head.0.iter_mut().for_each(|v| *v *= s);
        self.head.1.iter_mut().for_each(|v| *v *= s);
    }

    /// Adds the gradient of 0.5 * wd * ||weights||^2; biases stay undecayed.
    fn add_weight_decay(&mut self, p: &NetworkParams, wd: f64) {
        for (layer, (gw, _)) in p.conv.iter().zip(&mut self.conv) {
            for (g, w) in gw.iter_mut().zip(&layer.w) {
                *g += wd * w;
            }
        }
        for (layer, (gw, _)) in p.fc.iter().zip(&mut self.fc) {
            for (g, w) in gw.iter_mut().zip(&layer.w) {
                *g += wd * w;
            }
        }
        for (g, w) in self.head.0.iter_mut().zip(&p.head.w) {
            *g += wd * w;
        }
    }
}

fn fc_backward(layer: &FcLayer, input: &[f64], d_out: &[f64], gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
    let mut d_in = vec![0.0; layer.in_dim];
    for o in 0..layer.out_dim {
        let d = d_out[o];
        gb[o] += d;
        if d == 0.0 {
            continue;
        }
        let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
        let grow = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
        for i in 0..layer.in_dim {
            grow[i] += d * input[i];
            d_in[i] += row[i] * d;
        }
    }
    d_in
}

fn conv_backward(
    layer: &ConvLayer,
    input: &Tensor,
    d_pre: &Tensor,
    gw: &mut [f64],
    gb: &mut [f64],
) -> Tensor {
    let mut d_in = Tensor::zeros(input.c, input.h, input.w);
    let k = layer.kernel;
    for oc in 0..layer.out_ch {
        for oy in 0..d_pre.h {
            for ox in 0..d_pre.w {
                let g = d_pre.data[(oc * d_pre.h + oy) * d_pre.w + ox];
                if g == 0.0 {
                    continue;
                }
                gb[oc] += g;
                for ic in 0..layer.in_ch {
                    for ky in 0..k {
                        let iy = oy * layer.stride + ky;
                        let irow = (ic * input.h + iy) * input.w + ox * layer.stride;
                        let wrow = ((oc * layer.in_ch + ic) * k + ky) * k;
                        for kx in 0..k {
                            gw[wrow + kx] += g * input.data[irow + kx];
                            d_in.data[irow + kx] += layer.w[wrow + kx] * g;
                        }
                    }
                }
            }
        }
    }
    d_in
}

/// Accumulates gradients for one item; returns its cross-entropy loss.
fn backward_one(
    params: &NetworkParams,
    x: &Tensor,
    label: usize,
    grads: &mut Gradients,
) -> Result<f64> {
    let cache = forward_one(params, x)?;
    let (loss, dlogits) = softmax_ce(&cache.logits, label);

    let mut d = fc_backward(
        &params.head,
        cache.fc_inputs.last().unwrap(),
        &dlogits,
        &mut grads.head.0,
        &mut grads.head.1,
    );
    for l in (0..params.fc.len()).rev() {
        for (dv, pre) in d.iter_mut().zip(&cache.fc_pre[l]) {
            if *pre <= 0.0 {
                *dv = 0.0;
            }
        }
        let (gw, gb) = &mut grads.fc[l];
        d = fc_backward(&params.fc[l], &cache.fc_inputs[l], &d, gw, gb);
    }

    let last_pooled = &cache.stage_inputs[params.conv.len()];
    let mut d_pooled =
        Tensor { c: last_pooled.c, h: last_pooled.h, w: last_pooled.w, data: d };
    for l in (0..params.conv.len()).rev() {
        let pre = &cache.conv_pre[l];
        let mut d_pre = Tensor::zeros(pre.c, pre.h, pre.w);
        for (o, &src) in cache.pool_argmax[l].iter().enumerate() {
            d_pre.data[src] += d_pooled.data[o];
        }
        for (dv, p) in d_pre.data.iter_mut().zip(&pre.data) {
            if *p <= 0.0 {
                *dv = 0.0;
            }
        }
        let (gw, gb) = &mut grads.conv[l];
        d_pooled = conv_backward(&params.conv[l], &cache.stage_inputs[l], &d_pre, gw, gb);
    }
    Ok(loss)
}

fn apply_sgd(params: &mut NetworkParams, grads: &Gradients, lr: f64) {
    let step = |w: &mut [f64], g: &[f64]| {
        for (wv, gv) in w.iter_mut().zip(g) {
            *wv -= lr * gv;
        }
    };
    for (layer, (gw, gb)) in params.conv.iter_mut().zip(&grads.conv) {
        step(&mut layer.w, gw);
        step(&mut layer.b, gb);
    }
    for (layer, (gw, gb)) in params.fc.iter_mut().zip(&grads.fc) {
        step(&mut layer.w, gw);
        step(&mut layer.b, gb);
    }
    step(&mut params.head.w, &grads.head.0);
    step(&mut params.head.b, &grads.head.1);
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOutcome {
    /// Mean cross-entropy per sample over all processed batches.
    pub mean_loss: f64,
    /// SGD steps actually taken.
    pub iterations: usize,
}

/// Train with plain mini-batch SGD on the given pseudo-labels.
/// `epoch_offset` shifts the shuffle stream so consecutive calls see
/// different batch orders under the same seed.
pub fn train_epochs(
    params: &mut NetworkParams,
    data: &[Tensor],
    labels: &[usize],
    cfg: &NetworkConfig,
    n_epochs: usize,
    epoch_offset: usize,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if data.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} inputs but {} labels",
            data.len(),
            labels.len()
        )));
    }
    if n_epochs == 0 {
        return Err(Error::InvalidInput("n_epochs must be at least 1".into()));
    }
    let width = params.head_width();
    if let Some(&bad) = labels.iter().find(|&&l| l >= width) {
        return Err(Error::InvalidInput(format!(
            "label {bad} is out of range for a {width}-way head"
        )));
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut total_loss = 0.0;
    let mut total_samples = 0usize;
    let mut iterations = 0usize;
    'epochs: for e in 0..n_epochs {
        let mut rng = epoch_rng(cfg.seed, epoch_offset + e);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut grads = Gradients::zeros_like(params);
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += backward_one(params, &data[i], labels[i], &mut grads)?;
            }
            iterations += 1;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { iteration: iterations });
            }
            grads.scale(1.0 / batch.len() as f64);
            grads.add_weight_decay(params, cfg.weight_decay);
            apply_sgd(params, &grads, cfg.learning_rate);
            total_loss += batch_loss;
            total_samples += batch.len();
            if iterations >= cfg.max_iterations {
                break 'epochs;
            }
        }
    }
    Ok(TrainOutcome { mean_loss: total_loss / total_samples as f64, iterations })
}

/// Mean cross-entropy over a batch plus the weight-decay penalty, the
/// quantity whose gradient the training step follows.
pub fn full_loss(
    params: &NetworkParams,
    data: &[Tensor],
    labels: &[usize],
    weight_decay: f64,
) -> Result<f64> {
    if data.is_empty() || data.len() != labels.len() {
        return Err(Error::InvalidInput("batch and labels must be non-empty and equal".into()));
    }
    let mut ce = 0.0;
    for (x, &y) in data.iter().zip(labels) {
        if y >= params.head_width() {
            return Err(Error::InvalidInput(format!("label {y} out of range")));
        }
        let cache = forward_one(params, x)?;
        ce += softmax_ce(&cache.logits, y).0;
    }
    let mut penalty = 0.0;
    for layer in &params.conv {
        penalty += layer.w.iter().map(|w| w * w).sum::<f64>();
    }
    for layer in &params.fc {
        penalty += layer.w.iter().map(|w| w * w).sum::<f64>();
    }
    penalty += params.head.w.iter().map(|w| w * w).sum::<f64>();
    Ok(ce / data.len() as f64 + 0.5 * weight_decay * penalty)
}

fn flat_slots<'p>(params: &'p NetworkParams) -> Vec<&'p [f64]> {
    let mut slots: Vec<&[f64]> = Vec::new();
    for l in &params.conv {
        slots.push(&l.w);
        slots.push(&l.b);
    }
    for l in &params.fc {
        slots.push(&l.w);
        slots.push(&l.b);
    }
    slots.push(&params.head.w);
    slots.push(&params.head.b);
    slots
}

fn param_get(params: &NetworkParams, mut idx: usize) -> f64 {
    for slot in flat_slots(params) {
        if idx < slot.len() {
            return slot[idx];
        }
        idx -= slot.len();
    }
    panic!("parameter index out of range");
}

fn param_set(params: &mut NetworkParams, mut idx: usize, value: f64) {
    let mut slots: Vec<&mut [f64]> = Vec::new();
    for l in &mut params.conv {
        slots.push(&mut l.w);
        slots.push(&mut l.b);
    }
    for l in &mut params.fc {
        slots.push(&mut l.w);
        slots.push(&mut l.b);
    }
    slots.push(&mut params.head.w);
    slots.push(&mut params.head.b);
    for slot in slots {
        if idx < slot.len() {
            slot[idx] = value;
            return;
        }
        idx -= slot.len();
    }
    panic!("parameter index out of range");
}

fn grad_get(grads: &Gradients, mut idx: usize) -> f64 {
    let mut slots: Vec<&[f64]> = Vec::new();
    for (w, b) in &grads.conv {
        slots.push(w);
        slots.push(b);
    }
    for (w, b) in &grads.fc {
        slots.push(w);
        slots.push(b);
    }
    slots.push(&grads.head.0);
    slots.push(&grads.head.1);
    for slot in slots {
        if idx < slot.len() {
            return slot[idx];
        }
        idx -= slot.len();
    }
    panic!("gradient index out of range");
}

/// Compare analytic gradients against central finite differences on
/// `n_probes` randomly chosen parameters; returns the largest relative
/// error observed.
pub fn gradient_check(
    params: &NetworkParams,
    data: &[Tensor],
    labels: &[usize],
    weight_decay: f64,
    n_probes: usize,
    seed: u64,
) -> Result<f64> {
    if n_probes == 0 {
        return Err(Error::InvalidInput("n_probes must be at least 1".into()));
    }
    let mut grads = Gradients::zeros_like(params);
    for (x, &y) in data.iter().zip(labels) {
        backward_one(params, x, y, &mut grads)?;
    }
    grads.scale(1.0 / data.len() as f64);
    grads.add_weight_decay(params, weight_decay);

    let n_params = params.param_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probed = params.clone();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..n_probes {
        let idx = rng.random_range(0..n_params);
        let original = param_get(params, idx);
        param_set(&mut probed, idx, original + h);
        let plus = full_loss(&probed, data, labels, weight_decay)?;
        param_set(&mut probed, idx, original - h);
        let minus = full_loss(&probed, data, labels, weight_decay)?;
        param_set(&mut probed, idx, original);
        let numeric = (plus - minus) / (2.0 * h);
        let analytic = grad_get(&grads, idx);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Turn log mel features into fixed-size standardized tensors. The time
/// axis is center-cropped or silence-padded to `channels * frames` columns
/// and split into consecutive channel planes; the whole dataset is then
/// shifted and scaled to zero mean and unit variance.
pub fn prepare_dataset(features: &[LmsFeature], cfg: &NetworkConfig) -> Result<Vec<Tensor>> {
    if features.is_empty() {
        return Err(Error::InvalidInput("no features to prepare".into()));
    }
    let (channels, bands, frames) = cfg.input_shape;
    let total = channels * frames;
    let mut tensors = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        if f.n_bands() != bands {
            return Err(Error::InvalidInput(format!(
                "feature {i} has {} bands, the network expects {bands}",
                f.n_bands()
            )));
        }
        if f.n_frames() == 0 {
            return Err(Error::InvalidInput(format!("feature {i} has no frames")));
        }
        let silence = f.config.log_floor.ln();
        let n = f.n_frames();
        let offset = if n >= total { (n - total) / 2 } else { 0 };
        let pad_left = if n < total { (total - n) / 2 } else { 0 };
        let mut t = Tensor::zeros(channels, bands, frames);
        for col in 0..total {
            let value_col = if n >= total {
                Some(offset + col)
            } else if col >= pad_left && col < pad_left + n {
                Some(col - pad_left)
            } else {
                None
            };
            let (ch, x) = (col / frames, col % frames);
            for b in 0..bands {
                let v = match value_col {
                    Some(c) => f.values.get(b, c),
                    None => silence,
                };
                let idx = t.idx(ch, b, x);
                t.data[idx] = v;
            }
        }
        tensors.push(t);
    }

    let count = tensors.iter().map(|t| t.data.len()).sum::<usize>() as f64;
    let mean = tensors.iter().flat_map(|t| t.data.iter()).sum::<f64>() / count;
    let var = tensors
        .iter()
        .flat_map(|t| t.data.iter())
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / count;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    for t in &mut tensors {
        for v in &mut t.data {
            *v = (*v - mean) / std;
        }
    }
    Ok(tensors)
}
