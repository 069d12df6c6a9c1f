//! CNN-3: two strided convolutions with rectifiers, then a dense softmax
//! layer.
//!
//! ```text
//! input  n x 8 x 1
//! conv1  F1 filters, 7 x 3, stride (4, 1)  -> h1 x 6 x F1, ReLU
//! conv2  F2 filters, 5 x 3, stride (4, 1)  -> h2 x 4 x F2, ReLU
//! dense  (h2 * 4 * F2) x C                 -> softmax
//! ```
//!
//! No padding and no pooling. Activations are kept channels-last, which turns
//! both convolutions into one im2col GEMM each.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scalar::{gemm, Op, Scalar};
use crate::seed::{self, tag};
use crate::session::NUM_COLUMNS;
use crate::{Error, Result};

pub const CONV1_KERNEL: (usize, usize) = (7, 3);
pub const CONV2_KERNEL: (usize, usize) = (5, 3);
pub const ROW_STRIDE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cnn3Spec {
    pub n_rows: usize,
    pub filters1: usize,
    pub filters2: usize,
    pub num_classes: usize,
}

impl Cnn3Spec {
    /// The reference network: 64 filters in both convolutions.
    pub fn reference(n_rows: usize, num_classes: usize) -> Self {
        Self {
            n_rows,
            filters1: 64,
            filters2: 64,
            num_classes,
        }
    }

    /// Smallest row count for which both convolutions produce output.
    pub const MIN_ROWS: usize = CONV1_KERNEL.0 + ROW_STRIDE * (CONV2_KERNEL.0 - 1);

    pub fn validate(&self) -> Result<()> {
        if self.n_rows < Self::MIN_ROWS {
            return Err(Error::Shape(format!(
                "CNN-3 needs at least {} input rows, got {}",
                Self::MIN_ROWS,
                self.n_rows
            )));
        }
        if self.filters1 == 0 || self.filters2 == 0 || self.num_classes == 0 {
            return Err(Error::invalid(
                "Cnn3Spec",
                "filter and class counts must be positive",
            ));
        }
        Ok(())
    }

    pub fn h1(&self) -> usize {
        (self.n_rows - CONV1_KERNEL.0) / ROW_STRIDE + 1
    }
    pub fn w1(&self) -> usize {
        NUM_COLUMNS - CONV1_KERNEL.1 + 1
    }
    pub fn h2(&self) -> usize {
        (self.h1() - CONV2_KERNEL.0) / ROW_STRIDE + 1
    }
    pub fn w2(&self) -> usize {
        self.w1() - CONV2_KERNEL.1 + 1
    }
    pub fn k1(&self) -> usize {
        CONV1_KERNEL.0 * CONV1_KERNEL.1
    }
    pub fn k2(&self) -> usize {
        CONV2_KERNEL.0 * CONV2_KERNEL.1 * self.filters1
    }
    pub fn flat_dim(&self) -> usize {
        self.h2() * self.w2() * self.filters2
    }
    pub fn input_len(&self) -> usize {
        self.n_rows * NUM_COLUMNS
    }

    pub fn layout(&self) -> ParamLayout {
        let sizes = [
            self.k1() * self.filters1,
            self.filters1,
            self.k2() * self.filters2,
            self.filters2,
            self.flat_dim() * self.num_classes,
            self.num_classes,
        ];
        let mut offsets = [0usize; 7];
        for i in 0..6 {
            offsets[i + 1] = offsets[i] + sizes[i];
        }
        ParamLayout { offsets }
    }
}

/// Offsets of each parameter tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    offsets: [usize; 7],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tensor {
    Conv1W,
    Conv1B,
    Conv2W,
    Conv2B,
    DenseW,
    DenseB,
}

impl Tensor {
    pub const ALL: [Tensor; 6] = [
        Tensor::Conv1W,
        Tensor::Conv1B,
        Tensor::Conv2W,
        Tensor::Conv2B,
        Tensor::DenseW,
        Tensor::DenseB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tensor::Conv1W => "conv1.weight",
            Tensor::Conv1B => "conv1.bias",
            Tensor::Conv2W => "conv2.weight",
            Tensor::Conv2B => "conv2.bias",
            Tensor::DenseW => "dense.weight",
            Tensor::DenseB => "dense.bias",
        }
    }
}

impl ParamLayout {
    pub fn range(&self, t: Tensor) -> std::ops::Range<usize> {
        let i = t as usize;
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn total(&self) -> usize {
        self.offsets[6]
    }
}

/// Split borrows of the six parameter tensors.
struct Parts<'a, T> {
    w1: &'a [T],
    b1: &'a [T],
    w2: &'a [T],
    b2: &'a [T],
    wd: &'a [T],
    bd: &'a [T],
}

struct PartsMut<'a, T> {
    w1: &'a mut [T],
    b1: &'a mut [T],
    w2: &'a mut [T],
    b2: &'a mut [T],
    wd: &'a mut [T],
    bd: &'a mut [T],
}

fn split<'a, T>(layout: &ParamLayout, p: &'a [T]) -> Parts<'a, T> {
    let o = layout.offsets;
    Parts {
        w1: &p[o[0]..o[1]],
        b1: &p[o[1]..o[2]],
        w2: &p[o[2]..o[3]],
        b2: &p[o[3]..o[4]],
        wd: &p[o[4]..o[5]],
        bd: &p[o[5]..o[6]],
    }
}

fn split_mut<'a, T>(layout: &ParamLayout, p: &'a mut [T]) -> PartsMut<'a, T> {
    let o = layout.offsets;
    let (w1, rest) = p[..o[6]].split_at_mut(o[1]);
    let (b1, rest) = rest.split_at_mut(o[2] - o[1]);
    let (w2, rest) = rest.split_at_mut(o[3] - o[2]);
    let (b2, rest) = rest.split_at_mut(o[4] - o[3]);
    let (wd, bd) = rest.split_at_mut(o[5] - o[4]);
    PartsMut {
        w1,
        b1,
        w2,
        b2,
        wd,
        bd,
    }
}

/// Intermediate buffers for one example's forward and backward pass.
#[derive(Debug, Clone)]
pub struct Workspace<T> {
    patches1: Vec<T>,
    z1: Vec<T>,
    patches2: Vec<T>,
    z2: Vec<T>,
    logits: Vec<T>,
    probs: Vec<T>,
    d_flat: Vec<T>,
    d_patches2: Vec<T>,
    d_a1: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn new(spec: &Cnn3Spec) -> Self {
        let p1 = spec.h1() * spec.w1();
        let p2 = spec.h2() * spec.w2();
        Self {
            patches1: vec![T::ZERO; p1 * spec.k1()],
            z1: vec![T::ZERO; p1 * spec.filters1],
            patches2: vec![T::ZERO; p2 * spec.k2()],
            z2: vec![T::ZERO; p2 * spec.filters2],
            logits: vec![T::ZERO; spec.num_classes],
            probs: vec![T::ZERO; spec.num_classes],
            d_flat: vec![T::ZERO; p2 * spec.filters2],
            d_patches2: vec![T::ZERO; p2 * spec.k2()],
            d_a1: vec![T::ZERO; p1 * spec.filters1],
        }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn logits(&self) -> &[T] {
        &self.logits
    }
}

#[inline]
fn relu<T: Scalar>(x: T) -> T {
    if x > T::ZERO {
        x
    } else {
        T::ZERO
    }
}

/// Numerically stable softmax of `logits` into `out`.
pub fn softmax<T: Scalar>(logits: &[T], out: &mut [T]) {
    let mut max = logits[0];
    for &l in &logits[1..] {
        if l > max {
            max = l;
        }
    }
    let mut sum = T::ZERO;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cnn3<T> {
    spec: Cnn3Spec,
    layout: ParamLayout,
    params: Vec<T>,
}

impl<T: Scalar> Cnn3<T> {
    pub fn zeros(spec: Cnn3Spec) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        Ok(Self {
            spec,
            layout,
            params: vec![T::ZERO; layout.total()],
        })
    }

    /// Fan-in scaled uniform initialization: every weight and bias of a
    /// layer is drawn from `U[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init(spec: Cnn3Spec, init_seed: u64) -> Result<Self> {
        let mut model = Self::zeros(spec)?;
        let mut rng = seed::derived_stream(init_seed, &[tag::INIT]);
        let fan_in = [spec.k1(), spec.k2(), spec.flat_dim()];
        let groups = [
            (Tensor::Conv1W, Tensor::Conv1B),
            (Tensor::Conv2W, Tensor::Conv2B),
            (Tensor::DenseW, Tensor::DenseB),
        ];
        for (fan, (w, b)) in fan_in.iter().zip(groups) {
            let bound = 1.0 / (*fan as f64).sqrt();
            for t in [w, b] {
                for v in &mut model.params[model.layout.range(t)] {
                    *v = T::from_f64((rng.random::<f64>() * 2.0 - 1.0) * bound);
                }
            }
        }
        Ok(model)
    }

    pub fn from_params(spec: Cnn3Spec, params: Vec<T>) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        if params.len() != layout.total() {
            return Err(Error::Shape(format!(
                "spec needs {} parameters, got {}",
                layout.total(),
                params.len()
            )));
        }
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    pub fn spec(&self) -> &Cnn3Spec {
        &self.spec
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn tensor(&self, t: Tensor) -> &[T] {
        &self.params[self.layout.range(t)]
    }

    /// Converts parameters to another precision.
    pub fn cast<U: Scalar>(&self) -> Cnn3<U> {
        Cnn3 {
            spec: self.spec,
            layout: self.layout,
            params: self
                .params
                .iter()
                .map(|v| U::from_f64(v.to_f64()))
                .collect(),
        }
    }

    pub fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.spec.input_len() {
            return Err(Error::Shape(format!(
                "model expects {} x {NUM_COLUMNS} inputs ({} values), got {} values",
                self.spec.n_rows,
                self.spec.input_len(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Forward pass for one example; probabilities end up in `ws.probs()`.
    pub fn forward_into(&self, x: &[T], ws: &mut Workspace<T>) -> Result<()> {
        self.check_input(x)?;
        let s = &self.spec;
        let p = split(&self.layout, &self.params);
        let (h1, w1, h2, w2) = (s.h1(), s.w1(), s.h2(), s.w2());
        let (k1, k2, f1, f2) = (s.k1(), s.k2(), s.filters1, s.filters2);

        // conv1 im2col: row (h, w), column (i, j)
        for h in 0..h1 {
            for w in 0..w1 {
                let row = &mut ws.patches1[(h * w1 + w) * k1..(h * w1 + w + 1) * k1];
                for i in 0..CONV1_KERNEL.0 {
                    let src = (ROW_STRIDE * h + i) * NUM_COLUMNS + w;
                    row[i * CONV1_KERNEL.1..(i + 1) * CONV1_KERNEL.1]
                        .copy_from_slice(&x[src..src + CONV1_KERNEL.1]);
                }
            }
        }
        for r in ws.z1.chunks_exact_mut(f1) {
            r.copy_from_slice(p.b1);
        }
        gemm(
            h1 * w1,
            k1,
            f1,
            &ws.patches1,
            Op::N,
            p.w1,
            Op::N,
            T::ONE,
            &mut ws.z1,
        );

        // conv2 im2col over rectified conv1 output, channels innermost
        for h in 0..h2 {
            for w in 0..w2 {
                let base = (h * w2 + w) * k2;
                for i in 0..CONV2_KERNEL.0 {
                    for j in 0..CONV2_KERNEL.1 {
                        let src = ((ROW_STRIDE * h + i) * w1 + w + j) * f1;
                        let dst = base + (i * CONV2_KERNEL.1 + j) * f1;
                        for c in 0..f1 {
                            ws.patches2[dst + c] = relu(ws.z1[src + c]);
                        }
                    }
                }
            }
        }
        for r in ws.z2.chunks_exact_mut(f2) {
            r.copy_from_slice(p.b2);
        }
        gemm(
            h2 * w2,
            k2,
            f2,
            &ws.patches2,
            Op::N,
            p.w2,
            Op::N,
            T::ONE,
            &mut ws.z2,
        );

        // dense on rectified conv2 output; z2 is rectified in place
        for v in ws.z2.iter_mut() {
            *v = relu(*v);
        }
        ws.logits.copy_from_slice(p.bd);
        gemm(
            1,
            s.flat_dim(),
            s.num_classes,
            &ws.z2,
            Op::N,
            p.wd,
            Op::N,
            T::ONE,
            &mut ws.logits,
        );
        softmax(&ws.logits, &mut ws.probs);
        Ok(())
    }

    /// Class probabilities for one example.
    pub fn forward_one(&self, x: &[T]) -> Result<Vec<T>> {
        let mut ws = Workspace::new(&self.spec);
        self.forward_into(x, &mut ws)?;
        Ok(ws.probs)
    }

    /// Class probabilities for a batch stored back to back, `B x n x 8`.
    pub fn forward(&self, batch: &[T], parallel: bool) -> Result<Vec<Vec<T>>> {
        let len = self.spec.input_len();
        if batch.is_empty() || !batch.len().is_multiple_of(len) {
            return Err(Error::Shape(format!(
                "batch of {} values is not a whole number of {} x {NUM_COLUMNS} examples",
                batch.len(),
                self.spec.n_rows
            )));
        }
        let examples: Vec<&[T]> = batch.chunks_exact(len).collect();
        crate::par::map(&examples, parallel, |x| self.forward_one(x))
            .into_iter()
            .collect()
    }

    /// Forward plus backward for one labelled example. Adds
    /// `scale * d(cross_entropy)/d(params)` into `grad` and returns the
    /// unscaled cross-entropy.
    pub fn accumulate_gradient(
        &self,
        x: &[T],
        label: usize,
        scale: T,
        ws: &mut Workspace<T>,
        grad: &mut [T],
    ) -> Result<T> {
        let s = &self.spec;
        if label >= s.num_classes {
            return Err(Error::Shape(format!(
                "label {label} outside [0, {})",
                s.num_classes
            )));
        }
        if grad.len() != self.layout.total() {
            return Err(Error::Shape("gradient buffer has the wrong length".into()));
        }
        self.forward_into(x, ws)?;
        let loss = -(ws.probs[label].to_f64().max(f64::MIN_POSITIVE)).ln();

        let p = split(&self.layout, &self.params);
        let g = split_mut(&self.layout, grad);
        let (h1, w1, h2, w2) = (s.h1(), s.w1(), s.h2(), s.w2());
        let (k1, k2, f1, f2) = (s.k1(), s.k2(), s.filters1, s.filters2);
        let c = s.num_classes;
        let flat = s.flat_dim();

        // d logits = scale * (softmax - one_hot)
        let mut d_logits = vec![T::ZERO; c];
        for (j, d) in d_logits.iter_mut().enumerate() {
            let target = if j == label { T::ONE } else { T::ZERO };
            *d = scale * (ws.probs[j] - target);
        }
        for (gb, d) in g.bd.iter_mut().zip(&d_logits) {
            *gb += *d;
        }
        // dense weight: outer product of rectified features and d logits
        for (i, &a) in ws.z2.iter().enumerate() {
            if a != T::ZERO {
                let row = &mut g.wd[i * c..(i + 1) * c];
                for (gw, d) in row.iter_mut().zip(&d_logits) {
                    *gw += a * *d;
                }
            }
        }
        // back through dense and the conv2 rectifier (z2 holds relu output)
        gemm(
            flat,
            c,
            1,
            p.wd,
            Op::N,
            &d_logits,
            Op::N,
            T::ZERO,
            &mut ws.d_flat,
        );
        for (d, &a) in ws.d_flat.iter_mut().zip(&ws.z2) {
            if a <= T::ZERO {
                *d = T::ZERO;
            }
        }
        for r in ws.d_flat.chunks_exact(f2) {
            for (gb, d) in g.b2.iter_mut().zip(r) {
                *gb += *d;
            }
        }
        gemm(
            k2,
            h2 * w2,
            f2,
            &ws.patches2,
            Op::T,
            &ws.d_flat,
            Op::N,
            T::ONE,
            g.w2,
        );
        gemm(
            h2 * w2,
            f2,
            k2,
            &ws.d_flat,
            Op::N,
            p.w2,
            Op::T,
            T::ZERO,
            &mut ws.d_patches2,
        );

        // col2im into d a1, then through the conv1 rectifier
        ws.d_a1.iter_mut().for_each(|v| *v = T::ZERO);
        for h in 0..h2 {
            for w in 0..w2 {
                let base = (h * w2 + w) * k2;
                for i in 0..CONV2_KERNEL.0 {
                    for j in 0..CONV2_KERNEL.1 {
                        let dst = ((ROW_STRIDE * h + i) * w1 + w + j) * f1;
                        let src = base + (i * CONV2_KERNEL.1 + j) * f1;
                        for ch in 0..f1 {
                            ws.d_a1[dst + ch] += ws.d_patches2[src + ch];
                        }
                    }
                }
            }
        }
        for (d, &z) in ws.d_a1.iter_mut().zip(&ws.z1) {
            if z <= T::ZERO {
                *d = T::ZERO;
            }
        }
        for r in ws.d_a1.chunks_exact(f1) {
            for (gb, d) in g.b1.iter_mut().zip(r) {
                *gb += *d;
            }
        }
        gemm(
            k1,
            h1 * w1,
            f1,
            &ws.patches1,
            Op::T,
            &ws.d_a1,
            Op::N,
            T::ONE,
            g.w1,
        );

        Ok(T::from_f64(loss))
    }

    /// Mean cross-entropy of a labelled set.
    pub fn loss(&self, inputs: &[&[T]], labels: &[usize]) -> Result<f64> {
        let mut ws = Workspace::new(&self.spec);
        let mut total = 0.0;
        for (x, &y) in inputs.iter().zip(labels) {
            self.forward_into(x, &mut ws)?;
            total -= ws.probs[y].to_f64().max(f64::MIN_POSITIVE).ln();
        }
        Ok(total / inputs.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Cnn3Spec {
        Cnn3Spec {
            n_rows: 36,
            filters1: 2,
            filters2: 3,
            num_classes: 4,
        }
    }

    #[test]
    fn reference_dimensions() {
        let s = Cnn3Spec::reference(1000, 30);
        assert_eq!((s.h1(), s.w1(), s.h2(), s.w2()), (249, 6, 62, 4));
        assert_eq!(s.flat_dim(), 62 * 4 * 64);
        assert_eq!(
            s.layout().total(),
            21 * 64 + 64 + 960 * 64 + 64 + 15872 * 30 + 30
        );
        assert_eq!(Cnn3Spec::MIN_ROWS, 23);
        assert!(Cnn3Spec::reference(22, 2).validate().is_err());
        assert!(Cnn3Spec::reference(23, 2).validate().is_ok());
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let m = Cnn3::<f64>::zeros(tiny()).unwrap();
        let x: Vec<f64> = (0..36 * 8).map(|i| (i as f64).sin()).collect();
        let p = m.forward_one(&x).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_is_normalized_and_stable() {
        let mut out = [0.0f32; 3];
        softmax(&[1000.0, 1000.0, -1000.0], &mut out);
        assert!((out.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        assert!((out[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn batch_rows_are_independent() {
        let m = Cnn3::<f32>::init(tiny(), 3).unwrap();
        let a: Vec<f32> = (0..36 * 8).map(|i| (i as f32 * 0.3).sin()).collect();
        let b: Vec<f32> = (0..36 * 8).map(|i| (i as f32 * 0.7).cos()).collect();
        let ab: Vec<f32> = a.iter().chain(&b).copied().collect();
        let ba: Vec<f32> = b.iter().chain(&a).copied().collect();
        let pab = m.forward(&ab, true).unwrap();
        let pba = m.forward(&ba, false).unwrap();
        assert_eq!(pab[0], pba[1]);
        assert_eq!(pab[1], pba[0]);
        for row in &pab {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let m = Cnn3::<f32>::init(tiny(), 3).unwrap();
        assert!(matches!(m.forward_one(&[0.0; 10]), Err(Error::Shape(_))));
        assert!(matches!(
            m.forward(&[0.0; 36 * 8 + 1], false),
            Err(Error::Shape(_))
        ));
        let mut ws = Workspace::new(m.spec());
        let mut g = vec![0.0; m.num_params()];
        let x = vec![0.0; 36 * 8];
        assert!(m.accumulate_gradient(&x, 4, 1.0, &mut ws, &mut g).is_err());
    }

    #[test]
    fn init_respects_fan_in_bounds_and_seed() {
        let s = tiny();
        let m = Cnn3::<f64>::init(s, 1).unwrap();
        let bound = 1.0 / (s.k2() as f64).sqrt();
        assert!(m.tensor(Tensor::Conv2W).iter().all(|v| v.abs() <= bound));
        assert_eq!(m, Cnn3::<f64>::init(s, 1).unwrap());
        assert_ne!(m, Cnn3::<f64>::init(s, 2).unwrap());
    }
}
