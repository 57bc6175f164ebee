//! The part-fusion subnet: per-part conv maps concatenated along channels,
//! then FC6 -> ReLU -> FC7 -> FC8 -> softmax, trained with mini-batch SGD and
//! Nesterov momentum. FC7 outputs are the learned features handed to the
//! classifier.

mod stub;

pub use stub::{MeanImage, StubEncoder, STAT_DIM};

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{FeatureTensor, TensorFile};

/// Spatial size and channel depth of one part's conv feature map.
pub const CONV_DIMS: [usize; 3] = [6, 6, 512];
pub const FUSED_DIMS: [usize; 3] = [6, 6, 2048];
pub const NUM_CLASSES: usize = 6;

pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Send + Sync + Debug + Default + 'static {}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
fn cast<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("finite constant")
}

/// Dot product with eight independent accumulators so the loop vectorizes;
/// the summation order is fixed, keeping results reproducible.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Fully connected layer; `weight` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn he(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Dense {
            inputs,
            outputs,
            weight: he_init(inputs, outputs, rng),
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.weight
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, &b)| dot(row, x) + b)
            .collect()
    }

    /// `W^T g`
    fn backward_input(&self, grad_out: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.inputs];
        for (row, &g) in self.weight.chunks_exact(self.inputs).zip(grad_out) {
            if g != T::zero() {
                axpy(g, row, &mut out);
            }
        }
        out
    }

    fn accumulate(&mut self, grad_out: &[T], x: &[T]) {
        for ((row, b), &g) in self.weight.chunks_exact_mut(self.inputs).zip(&mut self.bias).zip(grad_out) {
            if g != T::zero() {
                axpy(g, x, row);
                *b = *b + g;
            }
        }
    }
}

/// Zero-mean Gaussian weights with standard deviation `sqrt(2 / fan_in)`,
/// laid out `fan_out x fan_in`.
pub fn he_init<T: Real>(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Vec<T> {
    assert!(fan_in >= 1, "fan_in must be positive");
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
    (0..fan_in * fan_out).map(|_| cast(normal.sample(rng))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input: usize,
    pub fc6: usize,
    pub fc7: usize,
    pub classes: usize,
}

impl NetShape {
    /// Four concatenated 6x6x512 part maps.
    pub const PARTS: NetShape = NetShape {
        input: 6 * 6 * 2048,
        fc6: 4096,
        fc7: 2048,
        classes: NUM_CLASSES,
    };

    /// A single 6x6x512 map (whole face or one part).
    pub const SINGLE_BRANCH: NetShape = NetShape {
        input: 6 * 6 * 512,
        fc6: 4096,
        fc7: 2048,
        classes: NUM_CLASSES,
    };

    pub fn with_widths(self, fc6: usize, fc7: usize) -> NetShape {
        NetShape { fc6, fc7, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionNet<T> {
    pub fc6: Dense<T>,
    pub fc7: Dense<T>,
    pub fc8: Dense<T>,
}

/// Velocity buffers; same layout as the network parameters.
pub type OptState<T> = FusionNet<T>;
/// Gradients; same layout as the network parameters.
pub type Grads<T> = FusionNet<T>;

#[derive(Debug, Clone, PartialEq)]
pub struct Output<T> {
    /// FC7 affine output, before any nonlinearity.
    pub fc7: Vec<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

struct Trace<T> {
    hidden: Vec<T>,
    out: Output<T>,
}

impl<T: Real> FusionNet<T> {
    pub fn zeros(shape: NetShape) -> Self {
        FusionNet {
            fc6: Dense::zeros(shape.input, shape.fc6),
            fc7: Dense::zeros(shape.fc6, shape.fc7),
            fc8: Dense::zeros(shape.fc7, shape.classes),
        }
    }

    /// He-initialized weights, zero biases.
    pub fn init(shape: NetShape, rng: &mut impl Rng) -> Self {
        FusionNet {
            fc6: Dense::he(shape.input, shape.fc6, rng),
            fc7: Dense::he(shape.fc6, shape.fc7, rng),
            fc8: Dense::he(shape.fc7, shape.classes, rng),
        }
    }

    pub fn shape(&self) -> NetShape {
        NetShape {
            input: self.fc6.inputs,
            fc6: self.fc6.outputs,
            fc7: self.fc7.outputs,
            classes: self.fc8.outputs,
        }
    }

    fn params(&self) -> [&Vec<T>; 6] {
        [&self.fc6.weight, &self.fc6.bias, &self.fc7.weight, &self.fc7.bias, &self.fc8.weight, &self.fc8.bias]
    }

    fn params_mut(&mut self) -> [&mut Vec<T>; 6] {
        [
            &mut self.fc6.weight,
            &mut self.fc6.bias,
            &mut self.fc7.weight,
            &mut self.fc7.bias,
            &mut self.fc8.weight,
            &mut self.fc8.bias,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.fc6.inputs {
            return Err(Error::ShapeMismatch(format!("network expects {} inputs, got {}", self.fc6.inputs, x.len())));
        }
        Ok(())
    }

    fn trace(&self, x: &[T]) -> Trace<T> {
        let mut hidden = self.fc6.forward(x);
        for h in &mut hidden {
            *h = h.max(T::zero());
        }
        let fc7 = self.fc7.forward(&hidden);
        let logits = self.fc8.forward(&fc7);
        let probs = softmax(&logits);
        Trace {
            hidden,
            out: Output { fc7, logits, probs },
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Output<T>> {
        self.check_input(x)?;
        Ok(self.trace(x).out)
    }

    pub fn predict(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?.logits))
    }

    pub fn to_tensor_file(&self) -> TensorFile {
        let mut f = TensorFile::new();
        let to32 = |v: &[T]| v.iter().map(|x| x.to_f32().unwrap_or(f32::NAN)).collect::<Vec<f32>>();
        for (name, layer) in [("fc6", &self.fc6), ("fc7", &self.fc7), ("fc8", &self.fc8)] {
            f.insert(
                format!("{name}.weight"),
                FeatureTensor::new(vec![layer.outputs, layer.inputs], to32(&layer.weight)).expect("finite parameters"),
            );
            f.insert(
                format!("{name}.bias"),
                FeatureTensor::new(vec![layer.outputs], to32(&layer.bias)).expect("finite parameters"),
            );
        }
        f
    }

    pub fn from_tensor_file(file: &TensorFile) -> Result<Self> {
        let layer = |name: &str| -> Result<Dense<T>> {
            let w = file.require(&format!("{name}.weight"))?;
            let b = file.require(&format!("{name}.bias"))?;
            let [outputs, inputs] = w.dims() else {
                return Err(Error::ShapeMismatch(format!("{name}.weight must be 2-D, got {:?}", w.dims())));
            };
            b.expect_dims(&[*outputs])?;
            let conv = |v: &[f32]| v.iter().map(|&x| cast::<T>(x as f64)).collect();
            Ok(Dense {
                inputs: *inputs,
                outputs: *outputs,
                weight: conv(w.data()),
                bias: conv(b.data()),
            })
        };
        let net = FusionNet {
            fc6: layer("fc6")?,
            fc7: layer("fc7")?,
            fc8: layer("fc8")?,
        };
        if net.fc7.inputs != net.fc6.outputs || net.fc8.inputs != net.fc7.outputs {
            return Err(Error::ShapeMismatch("checkpoint layers do not chain".into()));
        }
        Ok(net)
    }
}

pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over `batch` plus `weight_decay / 2 * |W|^2` over the
/// weight matrices (biases are not decayed), with its exact gradient.
pub fn loss_and_grads<T: Real>(net: &FusionNet<T>, batch: &[(&[T], usize)], weight_decay: T) -> Result<(T, Grads<T>)> {
    if batch.is_empty() {
        return Err(Error::EmptySet("batch"));
    }
    let shape = net.shape();
    let mut grads = FusionNet::zeros(shape);
    let scale = T::one() / cast(batch.len() as f64);
    let mut loss = T::zero();
    for &(x, label) in batch {
        net.check_input(x)?;
        if label >= shape.classes {
            return Err(Error::ShapeMismatch(format!("label {label} outside 0..{}", shape.classes)));
        }
        let t = net.trace(x);
        let logits = &t.out.logits;
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
        loss = loss + (lse - logits[label]) * scale;

        let mut d_logits: Vec<T> = t.out.probs.iter().map(|&p| p * scale).collect();
        d_logits[label] = d_logits[label] - scale;
        grads.fc8.accumulate(&d_logits, &t.out.fc7);
        let d_fc7 = net.fc8.backward_input(&d_logits);
        grads.fc7.accumulate(&d_fc7, &t.hidden);
        let mut d_hidden = net.fc7.backward_input(&d_fc7);
        for (d, &h) in d_hidden.iter_mut().zip(&t.hidden) {
            if h <= T::zero() {
                *d = T::zero();
            }
        }
        grads.fc6.accumulate(&d_hidden, x);
    }
    if weight_decay != T::zero() {
        let half = cast::<T>(0.5);
        for (g, w) in [
            (&mut grads.fc6.weight, &net.fc6.weight),
            (&mut grads.fc7.weight, &net.fc7.weight),
            (&mut grads.fc8.weight, &net.fc8.weight),
        ] {
            let sq: T = w.iter().map(|&v| v * v).sum();
            loss = loss + half * weight_decay * sq;
            axpy(weight_decay, w, g);
        }
    }
    Ok((loss, grads))
}

/// Nesterov momentum in the form that keeps the look-ahead point as the
/// stored parameters:
/// `v <- mu v - lr g; theta <- theta - mu v_prev + (1 + mu) v`.
pub fn nesterov_step<T: Real>(net: &mut FusionNet<T>, grads: &Grads<T>, state: &mut OptState<T>, lr: T, momentum: T) {
    let one_plus = T::one() + momentum;
    for ((theta, g), v) in net.params_mut().into_iter().zip(grads.params()).zip(state.params_mut()) {
        assert_eq!(theta.len(), g.len(), "gradient shape mismatch");
        for ((t, &gi), vi) in theta.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
            let prev = *vi;
            *vi = momentum * prev - lr * gi;
            *t = *t - momentum * prev + one_plus * *vi;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub epochs: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 12,
            lr_start: 2e-4,
            lr_end: 2e-5,
            epochs: 150,
            momentum: 0.9,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size >= 1
            && self.epochs >= 1
            && self.lr_end > 0.0
            && self.lr_start >= self.lr_end
            && (0.0..1.0).contains(&self.momentum)
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration {self:?}")))
        }
    }

    /// Geometric interpolation from `lr_start` (first epoch) to `lr_end`
    /// (last epoch).
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.lr_start;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.lr_start * (self.lr_end / self.lr_start).powf(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_error: f64,
}

pub fn epoch_log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,lr,train_loss,val_error\n");
    for e in log {
        s.push_str(&format!("{},{},{},{}\n", e.epoch, e.lr, e.train_loss, e.val_error));
    }
    s
}

/// Index of the lowest validation error; ties go to the later epoch.
pub fn select_epoch(val_errors: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &e) in val_errors.iter().enumerate() {
        if best.is_none_or(|b| e <= val_errors[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub net: FusionNet<T>,
    pub log: Vec<EpochLog>,
    /// 0-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

pub fn error_rate<T: Real>(net: &FusionNet<T>, set: &[(Vec<T>, usize)]) -> Result<f64> {
    let mut wrong = 0usize;
    for (x, label) in set {
        if net.predict(x)? != *label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / set.len() as f64)
}

/// Trains a freshly initialized net and returns the snapshot from the epoch
/// with the lowest validation error (latest on ties). All randomness comes
/// from `cfg.seed`.
pub fn train<T: Real>(
    shape: NetShape,
    train_set: &[(Vec<T>, usize)],
    val_set: &[(Vec<T>, usize)],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptySet("training"));
    }
    if val_set.is_empty() {
        return Err(Error::EmptySet("validation"));
    }
    if let Some((_, l)) = train_set.iter().chain(val_set).find(|(_, l)| *l >= shape.classes) {
        return Err(Error::ShapeMismatch(format!("label {l} outside 0..{}", shape.classes)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = FusionNet::<T>::init(shape, &mut rng);
    let mut velocity = FusionNet::zeros(shape);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, FusionNet<T>)> = None;
    let momentum = cast::<T>(cfg.momentum);
    let decay = cast::<T>(cfg.weight_decay);

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[T], usize)> = chunk.iter().map(|&i| (train_set[i].0.as_slice(), train_set[i].1)).collect();
            let (loss, grads) = loss_and_grads(&net, &batch, decay)?;
            let loss = loss.to_f64().unwrap_or(f64::NAN);
            if !loss.is_finite() {
                return Err(Error::DivergedLoss { epoch: epoch + 1, loss });
            }
            loss_sum += loss * chunk.len() as f64;
            nesterov_step(&mut net, &grads, &mut velocity, cast(lr), momentum);
        }
        if !net.is_finite() {
            return Err(Error::DivergedLoss {
                epoch: epoch + 1,
                loss: f64::NAN,
            });
        }
        let val_error = error_rate(&net, val_set)?;
        log.push(EpochLog {
            epoch: epoch + 1,
            lr,
            train_loss: loss_sum / train_set.len() as f64,
            val_error,
        });
        log::debug!("epoch {} lr {lr:.3e} loss {:.5} val_error {val_error:.4}", epoch + 1, loss_sum / train_set.len() as f64);
        if best.as_ref().is_none_or(|(e, _, _)| val_error <= *e) {
            best = Some((val_error, epoch, net.clone()));
        }
    }
    let (_, best_epoch, net) = best.expect("at least one epoch");
    debug_assert_eq!(Some(best_epoch), select_epoch(&log.iter().map(|e| e.val_error).collect::<Vec<_>>()));
    Ok(TrainOutcome { net, log, best_epoch })
}

pub fn extract_fc7<T: Real>(net: &FusionNet<T>, x: &[T]) -> Result<Vec<T>> {
    Ok(net.forward(x)?.fc7)
}

/// FC7 features with an optional ReLU applied after extraction.
pub fn extract_fc7_with<T: Real>(net: &FusionNet<T>, x: &[T], relu: bool) -> Result<Vec<T>> {
    let mut v = extract_fc7(net, x)?;
    if relu {
        v.iter_mut().for_each(|a| *a = a.max(T::zero()));
    }
    Ok(v)
}

/// Texture features first, then depth.
pub fn fuse_modalities<T: Real>(texture: &[T], depth: &[T]) -> Result<Vec<T>> {
    if texture.len() != depth.len() {
        return Err(Error::ShapeMismatch(format!("texture {} vs depth {} features", texture.len(), depth.len())));
    }
    Ok(texture.iter().chain(depth).copied().collect())
}

/// Concatenates `(H, W, C_i)` maps along the channel axis.
pub fn concat_channels(maps: &[&FeatureTensor]) -> Result<FeatureTensor> {
    let first = maps.first().ok_or(Error::EmptySet("feature map"))?;
    let [h, w, _] = first.dims() else {
        return Err(Error::ShapeMismatch(format!("expected (H, W, C) maps, got {:?}", first.dims())));
    };
    let mut channels = Vec::with_capacity(maps.len());
    for m in maps {
        match m.dims() {
            [mh, mw, c] if mh == h && mw == w => channels.push(*c),
            other => return Err(Error::ShapeMismatch(format!("map {other:?} does not match ({h}, {w}, _)"))),
        }
    }
    let total: usize = channels.iter().sum();
    let mut data = Vec::with_capacity(h * w * total);
    for cell in 0..h * w {
        for (m, &c) in maps.iter().zip(&channels) {
            data.extend_from_slice(&m.data()[cell * c..(cell + 1) * c]);
        }
    }
    FeatureTensor::new(vec![*h, *w, total], data)
}

/// Fuses the four part maps (Eyebrows, Eyes, Nose, Mouth) into one
/// 6x6x2048 map.
pub fn concat_parts(parts: &[FeatureTensor]) -> Result<FeatureTensor> {
    if parts.len() != 4 {
        return Err(Error::ShapeMismatch(format!("expected 4 part maps, got {}", parts.len())));
    }
    for p in parts {
        p.expect_dims(&CONV_DIMS)?;
    }
    concat_channels(&parts.iter().collect::<Vec<_>>())
}
