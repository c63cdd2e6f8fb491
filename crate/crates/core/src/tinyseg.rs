//! A three-layer fully convolutional per-pixel classifier.
//!
//! ```text
//! input (1 x H x W, pixels / 255)
//!   -> conv 3x3, 1 -> 8, zero padded  -> ReLU
//!   -> conv 3x3, 8 -> 16, zero padded -> ReLU
//!   -> conv 1x1, 16 -> num_classes    -> per-pixel softmax
//! ```
//!
//! Gradients are derived by hand. Weights are initialised from
//! `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))` with `fan_in = in_channels * k * k`
//! drawn from `ChaCha8Rng::seed_from_u64(seed)` in tensor declaration order;
//! biases start at zero. Training shuffles a canonically sorted corpus with
//! `rand` 0.8's `SliceRandom::shuffle` on a `ChaCha8Rng` seeded from the
//! training seed, so the result does not depend on the order the corpus was
//! supplied in.
//!
//! The network is generic over the float type: `f32` is used for training,
//! `f64` for gradient checking.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::iter::Sum;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sched::{OneCycleParams, Policy, PolyParams};
use crate::types::{LabelSchema, Radargram, SemanticMap, BACKGROUND};
use crate::{Error, Result};

pub trait Scalar: Float + Sum + Debug + Default + 'static {}
impl Scalar for f32 {}
impl Scalar for f64 {}

#[inline]
fn lit<T: Scalar>(x: f64) -> T {
    T::from(x).expect("f64 literal fits every scalar type")
}

pub const HIDDEN1: usize = 8;
pub const HIDDEN2: usize = 16;

/// A bank of `out x in x k x k` kernels with one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv<T> {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv<T> {
    fn zeros(out_channels: usize, in_channels: usize, kernel: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel,
            weight: vec![T::zero(); out_channels * in_channels * kernel * kernel],
            bias: vec![T::zero(); out_channels],
        }
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.out_channels == other.out_channels
            && self.in_channels == other.in_channels
            && self.kernel == other.kernel
            && self.weight.len() == other.weight.len()
            && self.bias.len() == other.bias.len()
    }

    #[inline]
    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> T {
        self.weight[((o * self.in_channels + i) * self.kernel + ky) * self.kernel + kx]
    }

    /// Zero-padded "same" convolution; `input` is `in x h x w`.
    fn forward(&self, input: &[T], h: usize, w: usize) -> Vec<T> {
        let plane = h * w;
        let pad = (self.kernel / 2) as isize;
        let mut out = vec![T::zero(); self.out_channels * plane];
        for o in 0..self.out_channels {
            let dst = &mut out[o * plane..(o + 1) * plane];
            dst.fill(self.bias[o]);
            for i in 0..self.in_channels {
                let src = &input[i * plane..(i + 1) * plane];
                for ky in 0..self.kernel {
                    let dy = ky as isize - pad;
                    for kx in 0..self.kernel {
                        let dx = kx as isize - pad;
                        let wt = self.w(o, i, ky, kx);
                        let (y0, y1) = valid_range(dy, h);
                        let (x0, x1) = valid_range(dx, w);
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let d = &mut dst[y * w + x0..y * w + x1];
                            let s = &src[sy * w + (x0 as isize + dx) as usize..];
                            for (a, &b) in d.iter_mut().zip(s) {
                                *a = *a + wt * b;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the input when `want_input` is set.
    fn backward(
        &self,
        input: &[T],
        h: usize,
        w: usize,
        grad_out: &[T],
        grad: &mut Conv<T>,
        want_input: bool,
    ) -> Option<Vec<T>> {
        let plane = h * w;
        let pad = (self.kernel / 2) as isize;
        let mut grad_in = want_input.then(|| vec![T::zero(); self.in_channels * plane]);
        for o in 0..self.out_channels {
            let go = &grad_out[o * plane..(o + 1) * plane];
            grad.bias[o] = grad.bias[o] + go.iter().copied().sum();
            for i in 0..self.in_channels {
                let src = &input[i * plane..(i + 1) * plane];
                for ky in 0..self.kernel {
                    let dy = ky as isize - pad;
                    for kx in 0..self.kernel {
                        let dx = kx as isize - pad;
                        let (y0, y1) = valid_range(dy, h);
                        let (x0, x1) = valid_range(dx, w);
                        let wt = self.w(o, i, ky, kx);
                        let mut acc = T::zero();
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let sx = (x0 as isize + dx) as usize;
                            let g = &go[y * w + x0..y * w + x1];
                            let s = &src[sy * w + sx..sy * w + sx + (x1 - x0)];
                            for (&a, &b) in g.iter().zip(s) {
                                acc = acc + a * b;
                            }
                            if let Some(gi) = grad_in.as_mut() {
                                let gi = &mut gi[i * plane + sy * w + sx..][..x1 - x0];
                                for (d, &a) in gi.iter_mut().zip(g) {
                                    *d = *d + wt * a;
                                }
                            }
                        }
                        let idx =
                            ((o * self.in_channels + i) * self.kernel + ky) * self.kernel + kx;
                        grad.weight[idx] = grad.weight[idx] + acc;
                    }
                }
            }
        }
        grad_in
    }
}

/// Output positions `y` for which `y + offset` stays inside `0..len`.
#[inline]
fn valid_range(offset: isize, len: usize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi = (len as isize - offset.max(0)).max(0) as usize;
    (lo.min(len), hi.max(lo.min(len)))
}

/// Per-pixel class scores, `num_classes x height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores<T> {
    pub num_classes: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Scores<T> {
    #[inline]
    pub fn get(&self, class: usize, row: usize, col: usize) -> T {
        self.data[(class * self.height + row) * self.width + col]
    }

    /// Softmax over classes at one pixel.
    pub fn softmax_at(&self, row: usize, col: usize) -> Vec<T> {
        let logits: Vec<T> = (0..self.num_classes)
            .map(|c| self.get(c, row, col))
            .collect();
        softmax(&logits)
    }

    /// Argmax per pixel; ties go to the smaller class id.
    pub fn argmax(&self) -> SemanticMap {
        let plane = self.height * self.width;
        let classes = (0..plane)
            .map(|p| {
                let mut best = 0usize;
                for c in 1..self.num_classes {
                    if self.data[c * plane + p] > self.data[best * plane + p] {
                        best = c;
                    }
                }
                best as u8
            })
            .collect();
        SemanticMap::new(self.height, self.width, classes).expect("scores are non-empty")
    }
}

fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Borrowed view of one parameter tensor.
#[derive(Debug)]
pub struct Tensor<'a, T> {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}

pub const TENSOR_NAMES: [&str; 6] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "conv3.weight",
    "conv3.bias",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TinyNet<T = f32> {
    pub conv1: Conv<T>,
    pub conv2: Conv<T>,
    pub conv3: Conv<T>,
    num_classes: usize,
}

/// Gradients share the network's layout.
pub type Gradients<T> = TinyNet<T>;

struct Activations<T> {
    z1: Vec<T>,
    a1: Vec<T>,
    z2: Vec<T>,
    a2: Vec<T>,
    scores: Vec<T>,
}

fn relu<T: Scalar>(z: &[T]) -> Vec<T> {
    z.iter().map(|&v| v.max(T::zero())).collect()
}

impl<T: Scalar> TinyNet<T> {
    pub fn zeros(num_classes: usize) -> Result<Self> {
        LabelSchema::new(num_classes)?;
        Ok(Self {
            conv1: Conv::zeros(HIDDEN1, 1, 3),
            conv2: Conv::zeros(HIDDEN2, HIDDEN1, 3),
            conv3: Conv::zeros(num_classes, HIDDEN2, 1),
            num_classes,
        })
    }

    /// Fan-in scaled uniform weights, zero biases.
    pub fn init(num_classes: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(num_classes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for conv in [&mut net.conv1, &mut net.conv2, &mut net.conv3] {
            let bound = init_bound(conv);
            for w in conv.weight.iter_mut() {
                *w = lit(bound * (2.0 * rng.gen::<f64>() - 1.0));
            }
        }
        Ok(net)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn convs(&self) -> [&Conv<T>; 3] {
        [&self.conv1, &self.conv2, &self.conv3]
    }

    fn convs_mut(&mut self) -> [&mut Conv<T>; 3] {
        [&mut self.conv1, &mut self.conv2, &mut self.conv3]
    }

    /// Parameter tensors in declaration order (see [`TENSOR_NAMES`]).
    pub fn tensors(&self) -> Vec<Tensor<'_, T>> {
        let mut out = Vec::with_capacity(6);
        for (i, conv) in self.convs().into_iter().enumerate() {
            out.push(Tensor {
                name: TENSOR_NAMES[2 * i],
                shape: vec![
                    conv.out_channels,
                    conv.in_channels,
                    conv.kernel,
                    conv.kernel,
                ],
                data: &conv.weight,
            });
            out.push(Tensor {
                name: TENSOR_NAMES[2 * i + 1],
                shape: vec![conv.out_channels],
                data: &conv.bias,
            });
        }
        out
    }

    /// Mutable parameter slices in declaration order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(6);
        for conv in self.convs_mut() {
            out.push(conv.weight.as_mut_slice());
            out.push(conv.bias.as_mut_slice());
        }
        out
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.num_classes == other.num_classes
            && self.conv1.same_shape(&other.conv1)
            && self.conv2.same_shape(&other.conv2)
            && self.conv3.same_shape(&other.conv3)
    }

    fn activations(&self, input: &[T], h: usize, w: usize) -> Activations<T> {
        let z1 = self.conv1.forward(input, h, w);
        let a1 = relu(&z1);
        let z2 = self.conv2.forward(&a1, h, w);
        let a2 = relu(&z2);
        let scores = self.conv3.forward(&a2, h, w);
        Activations {
            z1,
            a1,
            z2,
            a2,
            scores,
        }
    }

    /// Scores for an arbitrary single-channel plane (`h * w` values).
    pub fn forward_plane(&self, input: &[T], h: usize, w: usize) -> Result<Scores<T>> {
        check_plane(input.len(), h, w)?;
        Ok(Scores {
            num_classes: self.num_classes,
            height: h,
            width: w,
            data: self.activations(input, h, w).scores,
        })
    }

    pub fn forward(&self, image: &Radargram) -> Scores<T> {
        let input = scale_input(image);
        self.forward_plane(&input, image.height(), image.width())
            .expect("radargrams are non-empty")
    }

    /// Mean cross-entropy over counted pixels and its gradient.
    pub fn loss_and_grad_plane(
        &self,
        input: &[T],
        h: usize,
        w: usize,
        target: &[u8],
        ignore_background: bool,
    ) -> Result<(T, Gradients<T>)> {
        check_plane(input.len(), h, w)?;
        if target.len() != h * w {
            return Err(Error::Dimensions(alloc::format!(
                "target has {} pixels, input has {}",
                target.len(),
                h * w
            )));
        }
        if let Some(&class) = target.iter().find(|&&c| c as usize >= self.num_classes) {
            return Err(Error::ClassOutOfRange {
                class,
                num_classes: self.num_classes,
            });
        }
        let counted = target
            .iter()
            .filter(|&&c| !(ignore_background && c == BACKGROUND))
            .count();
        if counted == 0 {
            return Err(Error::Empty("counted pixels"));
        }

        let plane = h * w;
        let act = self.activations(input, h, w);
        let inv_n = T::one() / lit(counted as f64);
        let mut loss = T::zero();
        let mut grad_scores = vec![T::zero(); self.num_classes * plane];
        let mut logits = vec![T::zero(); self.num_classes];
        for p in 0..plane {
            let t = target[p];
            if ignore_background && t == BACKGROUND {
                continue;
            }
            for (c, l) in logits.iter_mut().enumerate() {
                *l = act.scores[c * plane + p];
            }
            let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
            let sum: T = logits.iter().map(|&l| (l - max).exp()).sum();
            let log_sum = max + sum.ln();
            loss = loss + (log_sum - logits[t as usize]);
            for (c, &l) in logits.iter().enumerate() {
                let mut g = (l - log_sum).exp();
                if c == t as usize {
                    g = g - T::one();
                }
                grad_scores[c * plane + p] = g * inv_n;
            }
        }
        loss = loss * inv_n;

        let mut grads = Self::zeros(self.num_classes)?;
        let mut d = self
            .conv3
            .backward(&act.a2, h, w, &grad_scores, &mut grads.conv3, true)
            .unwrap_or_default();
        for (g, &z) in d.iter_mut().zip(&act.z2) {
            if z <= T::zero() {
                *g = T::zero();
            }
        }
        let mut d = self
            .conv2
            .backward(&act.a1, h, w, &d, &mut grads.conv2, true)
            .unwrap_or_default();
        for (g, &z) in d.iter_mut().zip(&act.z1) {
            if z <= T::zero() {
                *g = T::zero();
            }
        }
        self.conv1
            .backward(input, h, w, &d, &mut grads.conv1, false);
        Ok((loss, grads))
    }

    pub fn loss_and_grad(
        &self,
        image: &Radargram,
        target: &SemanticMap,
        ignore_background: bool,
    ) -> Result<(T, Gradients<T>)> {
        if image.height() != target.height() || image.width() != target.width() {
            return Err(Error::Dimensions(alloc::format!(
                "image is {}x{}, target is {}x{}",
                image.height(),
                image.width(),
                target.height(),
                target.width()
            )));
        }
        let input = scale_input(image);
        self.loss_and_grad_plane(
            &input,
            image.height(),
            image.width(),
            target.classes(),
            ignore_background,
        )
    }

    /// One SGD update with momentum; weight decay applies to weights only.
    ///
    /// `velocity = momentum * velocity - lr * (grad + weight_decay * weight)`,
    /// then `weight += velocity`.
    pub fn sgd_step(
        &mut self,
        grads: &Gradients<T>,
        lr: T,
        momentum: T,
        weight_decay: T,
        state: &mut SgdState<T>,
    ) -> Result<()> {
        if !self.same_shape(grads) || !self.same_shape(&state.velocity) {
            return Err(Error::Dimensions(
                "gradient or optimizer state does not match the network".into(),
            ));
        }
        let params = self.tensors_mut();
        let velocity = state.velocity.tensors_mut();
        let grads = grads.tensors();
        for (i, ((param, vel), grad)) in params.into_iter().zip(velocity).zip(grads).enumerate() {
            // Even tensors are weights, odd ones biases.
            let decay = if i % 2 == 0 { weight_decay } else { T::zero() };
            for ((p, v), &g) in param.iter_mut().zip(vel.iter_mut()).zip(grad.data) {
                *v = momentum * *v - lr * (g + decay * *p);
                *p = *p + *v;
            }
        }
        Ok(())
    }

    /// Per-pixel argmax, ties toward the smaller class id.
    pub fn predict(&self, image: &Radargram) -> SemanticMap {
        self.forward(image).argmax()
    }
}

fn init_bound<T>(conv: &Conv<T>) -> f64 {
    let fan_in = (conv.in_channels * conv.kernel * conv.kernel) as f64;
    Float::sqrt(6.0 / fan_in)
}

/// Largest magnitude `init` can draw for each convolution.
pub fn init_bounds<T>(net: &TinyNet<T>) -> [f64; 3] {
    [
        init_bound(&net.conv1),
        init_bound(&net.conv2),
        init_bound(&net.conv3),
    ]
}

fn check_plane(len: usize, h: usize, w: usize) -> Result<()> {
    if h == 0 || w == 0 || len != h * w {
        return Err(Error::Dimensions(alloc::format!(
            "input has {len} values for a {h}x{w} plane"
        )));
    }
    Ok(())
}

/// Intensities scaled to `[0, 1]`.
pub fn scale_input<T: Scalar>(image: &Radargram) -> Vec<T> {
    let inv = lit::<T>(1.0 / 255.0);
    image
        .pixels()
        .iter()
        .map(|&p| lit::<T>(p as f64) * inv)
        .collect()
}

/// Momentum buffers, one per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState<T> {
    pub velocity: TinyNet<T>,
}

impl<T: Scalar> SgdState<T> {
    pub fn new(net: &TinyNet<T>) -> Self {
        Self {
            velocity: TinyNet::zeros(net.num_classes()).expect("network class count is valid"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchedulerKind {
    #[default]
    Poly,
    OneCycle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub weight_decay: f64,
    /// Constant momentum for poly; peak momentum for one-cycle.
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub scheduler: SchedulerKind,
    pub seed: u64,
    pub ignore_background: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            base_lr: 0.01,
            weight_decay: 1e-4,
            momentum: 0.9,
            batch_size: 8,
            epochs: 200,
            scheduler: SchedulerKind::Poly,
            seed: 0,
            ignore_background: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.base_lr)
            || !(self.weight_decay >= 0.0 && self.weight_decay.is_finite())
            || !(0.0..1.0).contains(&self.momentum)
            || self.batch_size == 0
            || self.epochs == 0
        {
            return Err(Error::InvalidArgument(alloc::format!(
                "invalid training configuration {self:?}"
            )));
        }
        Ok(())
    }

    pub fn policy(&self) -> Policy {
        match self.scheduler {
            SchedulerKind::Poly => Policy::Poly(PolyParams {
                base_lr: self.base_lr,
                momentum: self.momentum,
                ..PolyParams::default()
            }),
            SchedulerKind::OneCycle => Policy::OneCycle(OneCycleParams {
                base_lr: self.base_lr,
                m_high: self.momentum,
                ..OneCycleParams::default()
            }),
        }
    }

    pub fn steps_per_epoch(&self, corpus_len: usize) -> usize {
        corpus_len.div_ceil(self.batch_size)
    }

    pub fn total_steps(&self, corpus_len: usize) -> usize {
        self.epochs * self.steps_per_epoch(corpus_len)
    }
}

/// Mini-batch SGD over `corpus`. Returns the trained network and the mean
/// batch loss of every step.
pub fn train<T: Scalar>(
    mut net: TinyNet<T>,
    corpus: &[(Radargram, SemanticMap)],
    cfg: &TrainConfig,
) -> Result<(TinyNet<T>, Vec<f64>)> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| {
        let (ia, ta) = &corpus[a];
        let (ib, tb) = &corpus[b];
        (ia.height(), ia.width(), ia.pixels(), ta.classes()).cmp(&(
            ib.height(),
            ib.width(),
            ib.pixels(),
            tb.classes(),
        ))
    });

    let policy = cfg.policy();
    let total = cfg.total_steps(corpus.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = SgdState::new(&net);
    let mut history = Vec::with_capacity(total);
    let mut step = 0usize;
    for _ in 0..cfg.epochs {
        let mut epoch = order.clone();
        epoch.shuffle(&mut rng);
        for batch in epoch.chunks(cfg.batch_size) {
            let fraction = if total > 1 {
                step as f64 / (total - 1) as f64
            } else {
                0.0
            };
            let (lr, momentum) = policy.eval(fraction)?;
            let mut sum = TinyNet::zeros(net.num_classes())?;
            let mut loss = T::zero();
            for &i in batch {
                let (image, target) = &corpus[i];
                let (l, g) = net.loss_and_grad(image, target, cfg.ignore_background)?;
                loss = loss + l;
                for (acc, part) in sum.tensors_mut().into_iter().zip(g.tensors()) {
                    for (a, &b) in acc.iter_mut().zip(part.data) {
                        *a = *a + b;
                    }
                }
            }
            let scale = T::one() / lit(batch.len() as f64);
            for t in sum.tensors_mut() {
                for v in t.iter_mut() {
                    *v = *v * scale;
                }
            }
            net.sgd_step(
                &sum,
                lit(lr),
                lit(momentum),
                lit(cfg.weight_decay),
                &mut state,
            )?;
            history.push((loss * scale).to_f64().unwrap_or(f64::NAN));
            step += 1;
        }
    }
    Ok((net, history))
}
