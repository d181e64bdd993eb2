//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! A [`Graph`] is a tape of nodes built afresh for every forward pass.
//! Node order is construction order, which is already topological, so the
//! backward sweep is a single reverse iteration. Gradients accumulate (`+=`)
//! into every `requires_grad` tensor reachable from the loss; calling
//! [`Graph::backward`] twice without zeroing doubles them.

use super::kernels::{col2im_acc, col_sums_acc, im2col, matmul_nn_acc, matmul_nt_acc, matmul_tn_acc};
use super::{Param, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rayon::prelude::*;
use std::collections::HashMap;

/// Negative-side slope for leaky ReLU activations.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Handle to a node in one specific [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu,
    /// Normalizes over the last axis.
    Softmax,
}

enum Op<F: Scalar> {
    Leaf,
    Elem(ElemOp, Var, Var),
    Matmul(Var, Var),
    /// Fused `x · wᵀ + b` with `w` stored (out, in) and `b` (out,).
    Linear { x: Var, w: Var, b: Var },
    Act(Activation, Var),
    BceWithLogits { logits: Var, targets: Var },
    SoftmaxCrossEntropy { logits: Var, probs: Vec<F>, labels: Vec<usize> },
    SumAll(Var),
    MeanAll(Var),
    Scale(Var, F),
    Reshape(Var),
    Concat { axis: usize, parts: Vec<Var> },
    Narrow { x: Var, axis: usize, start: usize, len: usize },
    CausalConv1d { x: Var, w: Var, b: Var, dilation: usize },
    Conv2d { x: Var, w: Var, b: Var, stride: usize, padding: usize },
    ConvTranspose2d { x: Var, w: Var, b: Var, stride: usize, padding: usize },
}

struct Node<F: Scalar> {
    value: Tensor<F>,
    op: Op<F>,
    param: Option<Param<F>>,
}

/// Reverse-mode tape. Confined to one thread; the kernels it calls may be
/// internally data-parallel but are bit-deterministic.
pub struct Graph<F: Scalar> {
    nodes: Vec<Node<F>>,
    registered: HashMap<(usize, bool), Var>,
    frozen: bool,
}

impl<F: Scalar> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Graph<F> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), registered: HashMap::new(), frozen: false }
    }

    /// While set, `param()` registers parameters as constants: gradients still
    /// flow *through* the ops that use them, but none are accumulated for the
    /// parameters themselves (frozen-discriminator generator updates).
    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, param: Option<Param<F>>) -> Var {
        self.nodes.push(Node { value, op, param });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn grad(&self, v: Var) -> Option<&[F]> {
        self.nodes[v.0].value.grad.as_deref()
    }

    // ---- leaves ------------------------------------------------------

    pub fn constant(&mut self, mut t: Tensor<F>) -> Var {
        t.requires_grad = false;
        t.grad = None;
        self.push(t, Op::Leaf, None)
    }

    pub fn constant_from(&mut self, shape: Vec<usize>, data: Vec<F>) -> Result<Var> {
        Ok(self.constant(Tensor::new(shape, data)?))
    }

    /// Registers a trainable parameter, copying its current value in. The
    /// same parameter registers once per graph; later calls return the
    /// existing node.
    pub fn param(&mut self, p: &Param<F>) -> Var {
        let key = (p.id(), self.frozen);
        if let Some(&v) = self.registered.get(&key) {
            return v;
        }
        let mut value = p.value_clone();
        let var = if self.frozen {
            value.requires_grad = false;
            value.grad = None;
            self.push(value, Op::Leaf, None)
        } else {
            value.requires_grad = true;
            value.grad = None;
            self.push(value, Op::Leaf, Some(p.clone()))
        };
        self.registered.insert(key, var);
        var
    }

    // ---- elementwise ---------------------------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(ElemOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(ElemOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(ElemOp::Mul, a, b)
    }

    /// Binary elementwise op. Shapes must match, or one operand must equal a
    /// trailing suffix of the other, in which case it broadcasts over the
    /// leading axes and its gradient sums over them.
    pub fn elementwise(&mut self, op: ElemOp, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (da, db) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let apply = |x: F, y: F| match op {
            ElemOp::Add => x + y,
            ElemOp::Sub => x - y,
            ElemOp::Mul => x * y,
        };
        let (shape, data) = if sa == sb {
            let out: Vec<F> =
                da.data().iter().zip(db.data()).map(|(&x, &y)| apply(x, y)).collect();
            (sa, out)
        } else if is_suffix(&sb, &sa) {
            // b broadcasts across a's leading axes
            let nb = db.numel();
            let mut out = Vec::with_capacity(da.numel());
            for chunk in da.data().chunks_exact(nb) {
                out.extend(chunk.iter().zip(db.data()).map(|(&x, &y)| apply(x, y)));
            }
            (sa, out)
        } else if is_suffix(&sa, &sb) {
            let na = da.numel();
            let mut out = Vec::with_capacity(db.numel());
            for chunk in db.data().chunks_exact(na) {
                out.extend(da.data().iter().zip(chunk).map(|(&x, &y)| apply(x, y)));
            }
            (sb, out)
        } else {
            return Err(Error::shape(format!(
                "elementwise {op:?}: shapes {sa:?} and {sb:?} are not broadcast-compatible"
            )));
        };
        let mut t = Tensor::new(shape, data)?;
        t.requires_grad = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(t, Op::Elem(op, a, b), None))
    }

    // ---- linear algebra -------------------------------------------------

    /// Rank-2 product `a · b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 {
            return Err(Error::shape(format!("matmul expects rank-2 tensors, got {sa:?} and {sb:?}")));
        }
        if sa[1] != sb[0] {
            return Err(Error::shape(format!(
                "matmul inner dimensions disagree: {sa:?} vs {sb:?}"
            )));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![F::zero(); m * n];
        matmul_nn_acc(&mut out, self.nodes[a.0].value.data(), self.nodes[b.0].value.data(), m, k, n);
        let mut t = Tensor::new(vec![m, n], out)?;
        t.requires_grad = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(t, Op::Matmul(a, b), None))
    }

    /// Fused dense map `x · wᵀ + b` for `x` (batch, in), `w` (out, in), `b` (out,).
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (sx, sw, sb) = (self.shape(x), self.shape(w), self.shape(b));
        if sx.len() != 2 || sw.len() != 2 || sb.len() != 1 {
            return Err(Error::shape(format!(
                "linear expects x rank-2, w rank-2, b rank-1; got {sx:?}, {sw:?}, {sb:?}"
            )));
        }
        if sx[1] != sw[1] || sw[0] != sb[0] {
            return Err(Error::shape(format!(
                "linear dimensions disagree: x {sx:?}, w {sw:?}, b {sb:?}"
            )));
        }
        let (m, k, n) = (sx[0], sx[1], sw[0]);
        let bias = self.nodes[b.0].value.data();
        let mut out = Vec::with_capacity(m * n);
        for _ in 0..m {
            out.extend_from_slice(bias);
        }
        matmul_nt_acc(&mut out, self.nodes[x.0].value.data(), self.nodes[w.0].value.data(), m, k, n);
        let mut t = Tensor::new(vec![m, n], out)?;
        t.requires_grad =
            self.requires_grad(x) || self.requires_grad(w) || self.requires_grad(b);
        Ok(self.push(t, Op::Linear { x, w, b }, None))
    }

    // ---- activations ------------------------------------------------------

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.activation(Activation::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.activation(Activation::Tanh, x)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.activation(Activation::Relu, x)
    }

    pub fn leaky_relu(&mut self, x: Var) -> Result<Var> {
        self.activation(Activation::LeakyRelu, x)
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        self.activation(Activation::Softmax, x)
    }

    pub fn activation(&mut self, tag: Activation, x: Var) -> Result<Var> {
        let input = &self.nodes[x.0].value;
        if !input.is_finite() {
            return Err(Error::numeric(format!("non-finite input to {tag:?}")));
        }
        let slope = F::from_config(LEAKY_SLOPE);
        let data: Vec<F> = match tag {
            Activation::Sigmoid => input.data().iter().map(|&v| stable_sigmoid(v)).collect(),
            Activation::Tanh => input.data().iter().map(|&v| v.tanh()).collect(),
            Activation::Relu => {
                input.data().iter().map(|&v| if v > F::zero() { v } else { F::zero() }).collect()
            }
            Activation::LeakyRelu => input
                .data()
                .iter()
                .map(|&v| if v > F::zero() { v } else { slope * v })
                .collect(),
            Activation::Softmax => {
                let cols = *input.shape().last().ok_or_else(|| {
                    Error::shape("softmax needs rank >= 1".to_string())
                })?;
                let mut out = Vec::with_capacity(input.numel());
                for row in input.data().chunks_exact(cols) {
                    let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
                    let exps: Vec<F> = row.iter().map(|&v| (v - max).exp()).collect();
                    let total: F = exps.iter().cloned().sum();
                    out.extend(exps.into_iter().map(|e| e / total));
                }
                out
            }
        };
        let mut t = Tensor::new(input.shape().to_vec(), data)?;
        t.requires_grad = self.requires_grad(x);
        Ok(self.push(t, Op::Act(tag, x), None))
    }

    // ---- losses -----------------------------------------------------------

    /// Mean binary cross entropy on logits, computed in log-sum-exp form so
    /// saturated logits cannot overflow.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Var) -> Result<Var> {
        let (sl, st) = (self.shape(logits), self.shape(targets));
        if sl != st {
            return Err(Error::shape(format!(
                "bce_with_logits: logits {sl:?} and targets {st:?} differ"
            )));
        }
        let tv = self.nodes[targets.0].value.data();
        if tv.iter().any(|&t| !(t == F::zero() || t == F::one())) {
            return Err(Error::domain("bce_with_logits targets must be 0 or 1".to_string()));
        }
        let lv = self.nodes[logits.0].value.data();
        let n = F::from_config(lv.len() as f64);
        let total: F = lv
            .iter()
            .zip(tv)
            .map(|(&l, &t)| l.max(F::zero()) - l * t + (-(l.abs())).exp().ln_1p())
            .sum();
        let mut t = Tensor::scalar(total / n);
        t.requires_grad = self.requires_grad(logits);
        Ok(self.push(t, Op::BceWithLogits { logits, targets }, None))
    }

    /// Mean softmax cross entropy against integer class labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let sl = self.shape(logits).to_vec();
        if sl.len() != 2 {
            return Err(Error::shape(format!("softmax_cross_entropy expects rank-2 logits, got {sl:?}")));
        }
        let (batch, classes) = (sl[0], sl[1]);
        if labels.len() != batch {
            return Err(Error::shape(format!(
                "softmax_cross_entropy: {batch} logit rows but {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= classes) {
            return Err(Error::domain(format!("label {bad} out of range for {classes} classes")));
        }
        let lv = self.nodes[logits.0].value.data();
        let mut probs = Vec::with_capacity(batch * classes);
        let mut total = F::zero();
        for (row, &label) in lv.chunks_exact(classes).zip(labels) {
            let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<F>().ln();
            total += lse - row[label];
            probs.extend(row.iter().map(|&v| (v - lse).exp()));
        }
        let mut t = Tensor::scalar(total / F::from_config(batch as f64));
        t.requires_grad = self.requires_grad(logits);
        Ok(self.push(
            t,
            Op::SoftmaxCrossEntropy { logits, probs, labels: labels.to_vec() },
            None,
        ))
    }

    // ---- reductions, scaling, shape --------------------------------------

    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        let total: F = self.nodes[x.0].value.data().iter().cloned().sum();
        let mut t = Tensor::scalar(total);
        t.requires_grad = self.requires_grad(x);
        Ok(self.push(t, Op::SumAll(x), None))
    }

    pub fn mean_all(&mut self, x: Var) -> Result<Var> {
        let v = &self.nodes[x.0].value;
        let total: F = v.data().iter().cloned().sum();
        let mut t = Tensor::scalar(total / F::from_config(v.numel() as f64));
        t.requires_grad = self.requires_grad(x);
        Ok(self.push(t, Op::MeanAll(x), None))
    }

    pub fn scale(&mut self, x: Var, factor: F) -> Result<Var> {
        let v = &self.nodes[x.0].value;
        let data: Vec<F> = v.data().iter().map(|&a| a * factor).collect();
        let mut t = Tensor::new(v.shape().to_vec(), data)?;
        t.requires_grad = self.requires_grad(x);
        Ok(self.push(t, Op::Scale(x, factor), None))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let v = &self.nodes[x.0].value;
        let n: usize = shape.iter().product();
        if n != v.numel() {
            return Err(Error::shape(format!(
                "reshape {:?} -> {shape:?} changes element count",
                v.shape()
            )));
        }
        let mut t = Tensor::new(shape, v.data().to_vec())?;
        t.requires_grad = self.requires_grad(x);
        Ok(self.push(t, Op::Reshape(x), None))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, axis: usize, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat of zero parts".to_string()));
        }
        let first = self.shape(parts[0]).to_vec();
        if axis >= first.len() {
            return Err(Error::shape(format!("concat axis {axis} out of range for {first:?}")));
        }
        let mut axis_total = 0usize;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != first.len()
                || s.iter().zip(&first).enumerate().any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(Error::shape(format!(
                    "concat along {axis}: {s:?} incompatible with {first:?}"
                )));
            }
            axis_total += s[axis];
        }
        let mut shape = first.clone();
        shape[axis] = axis_total;
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * axis_total * inner);
        for o in 0..outer {
            for &p in parts {
                let v = &self.nodes[p.0].value;
                let block = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * block..(o + 1) * block]);
            }
        }
        let mut t = Tensor::new(shape, data)?;
        t.requires_grad = parts.iter().any(|&p| self.requires_grad(p));
        Ok(self.push(t, Op::Concat { axis, parts: parts.to_vec() }, None))
    }

    /// Slice of `len` extents along `axis` starting at `start`.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let v = &self.nodes[x.0].value;
        let s = v.shape().to_vec();
        if axis >= s.len() {
            return Err(Error::shape(format!("narrow axis {axis} out of range for {s:?}")));
        }
        if start + len > s[axis] || len == 0 {
            return Err(Error::shape(format!(
                "narrow [{start}, {start}+{len}) out of range for axis extent {}",
                s[axis]
            )));
        }
        let outer: usize = s[..axis].iter().product();
        let inner: usize = s[axis + 1..].iter().product();
        let mut shape = s.clone();
        shape[axis] = len;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * s[axis] + start) * inner;
            data.extend_from_slice(&v.data()[base..base + len * inner]);
        }
        let mut t = Tensor::new(shape, data)?;
        t.requires_grad = self.requires_grad(x);
        Ok(self.push(t, Op::Narrow { x, axis, start, len }, None))
    }

    // ---- convolutions ----------------------------------------------------

    /// Dilated causal 1-D convolution: `x` (batch, in_ch, T), `w`
    /// (out_ch, in_ch, k), `b` (out_ch,). Output keeps length T via implicit
    /// left zero-padding of (k−1)·dilation, so output t never reads past t.
    pub fn causal_conv1d(&mut self, x: Var, w: Var, b: Var, dilation: usize) -> Result<Var> {
        let (sx, sw, sb) = (self.shape(x), self.shape(w), self.shape(b));
        if sx.len() != 3 || sw.len() != 3 || sb.len() != 1 {
            return Err(Error::shape(format!(
                "causal_conv1d expects x rank-3, w rank-3, b rank-1; got {sx:?}, {sw:?}, {sb:?}"
            )));
        }
        if sx[1] != sw[1] || sw[0] != sb[0] {
            return Err(Error::shape(format!(
                "causal_conv1d channels disagree: x {sx:?}, w {sw:?}, b {sb:?}"
            )));
        }
        if dilation == 0 {
            return Err(Error::shape("causal_conv1d dilation must be >= 1".to_string()));
        }
        let (batch, ci, t_len) = (sx[0], sx[1], sx[2]);
        let (co, k) = (sw[0], sw[2]);
        let xv = self.nodes[x.0].value.data();
        let wv = self.nodes[w.0].value.data();
        let bias = self.nodes[b.0].value.data();
        let mut out = vec![F::zero(); batch * co * t_len];
        for bi in 0..batch {
            for o in 0..co {
                let out_row = &mut out[(bi * co + o) * t_len..(bi * co + o + 1) * t_len];
                out_row.iter_mut().for_each(|v| *v = bias[o]);
                for i in 0..ci {
                    let x_row = &xv[(bi * ci + i) * t_len..(bi * ci + i + 1) * t_len];
                    for tap in 0..k {
                        // out[t] += w[o,i,tap] * x[t - (k-1-tap)*dilation]
                        let shift = (k - 1 - tap) * dilation;
                        if shift >= t_len {
                            continue;
                        }
                        let wv_tap = wv[(o * ci + i) * k + tap];
                        for (ov, xvv) in out_row[shift..].iter_mut().zip(&x_row[..t_len - shift]) {
                            *ov = wv_tap.mul_add_fast(*xvv, *ov);
                        }
                    }
                }
            }
        }
        let mut t = Tensor::new(vec![batch, co, t_len], out)?;
        t.requires_grad =
            self.requires_grad(x) || self.requires_grad(w) || self.requires_grad(b);
        Ok(self.push(t, Op::CausalConv1d { x, w, b, dilation }, None))
    }

    /// 2-D convolution: `x` (batch, in_ch, H, W), `w` (out_ch, in_ch, kh, kw).
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, padding: usize) -> Result<Var> {
        let (sx, sw, sb) = (self.shape(x).to_vec(), self.shape(w).to_vec(), self.shape(b).to_vec());
        if sx.len() != 4 || sw.len() != 4 || sb.len() != 1 {
            return Err(Error::shape(format!(
                "conv2d expects x rank-4, w rank-4, b rank-1; got {sx:?}, {sw:?}, {sb:?}"
            )));
        }
        if sx[1] != sw[1] || sw[0] != sb[0] {
            return Err(Error::shape(format!(
                "conv2d channels disagree: x {sx:?}, w {sw:?}, b {sb:?}"
            )));
        }
        let (batch, ci, h, wd) = (sx[0], sx[1], sx[2], sx[3]);
        let (co, kh, kw) = (sw[0], sw[2], sw[3]);
        let oh = conv_out(h, kh, stride, padding)
            .ok_or_else(|| Error::shape(format!("conv2d: height {h} too small for kernel {kh} with padding {padding}")))?;
        let ow = conv_out(wd, kw, stride, padding)
            .ok_or_else(|| Error::shape(format!("conv2d: width {wd} too small for kernel {kw} with padding {padding}")))?;
        let xv = self.nodes[x.0].value.data();
        let wv = self.nodes[w.0].value.data();
        let bias = self.nodes[b.0].value.data();
        let patch = ci * kh * kw;
        let mut out = vec![F::zero(); batch * co * oh * ow];
        out.par_chunks_mut(co * oh * ow)
            .zip(xv.par_chunks(ci * h * wd))
            .for_each(|(out_img, x_img)| {
                let mut col = vec![F::zero(); patch * oh * ow];
                im2col(&mut col, x_img, ci, h, wd, kh, kw, stride, padding, oh, ow);
                for (o, plane) in out_img.chunks_exact_mut(oh * ow).enumerate() {
                    plane.iter_mut().for_each(|v| *v = bias[o]);
                }
                matmul_nn_acc(out_img, wv, &col, co, patch, oh * ow);
            });
        let mut t = Tensor::new(vec![batch, co, oh, ow], out)?;
        t.requires_grad =
            self.requires_grad(x) || self.requires_grad(w) || self.requires_grad(b);
        Ok(self.push(t, Op::Conv2d { x, w, b, stride, padding }, None))
    }

    /// Transposed 2-D convolution (the gradient map of `conv2d`): `x`
    /// (batch, in_ch, H, W), `w` (in_ch, out_ch, kh, kw); output spatial size
    /// is (H−1)·stride − 2·padding + k.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let (sx, sw, sb) = (self.shape(x).to_vec(), self.shape(w).to_vec(), self.shape(b).to_vec());
        if sx.len() != 4 || sw.len() != 4 || sb.len() != 1 {
            return Err(Error::shape(format!(
                "conv_transpose2d expects x rank-4, w rank-4, b rank-1; got {sx:?}, {sw:?}, {sb:?}"
            )));
        }
        if sx[1] != sw[0] || sw[1] != sb[0] {
            return Err(Error::shape(format!(
                "conv_transpose2d channels disagree: x {sx:?}, w {sw:?}, b {sb:?}"
            )));
        }
        let (batch, ci, h, wd) = (sx[0], sx[1], sx[2], sx[3]);
        let (co, kh, kw) = (sw[1], sw[2], sw[3]);
        let oh = deconv_out(h, kh, stride, padding).ok_or_else(|| {
            Error::shape(format!(
                "conv_transpose2d: height {h} with kernel {kh}, stride {stride}, padding {padding} yields no output"
            ))
        })?;
        let ow = deconv_out(wd, kw, stride, padding).ok_or_else(|| {
            Error::shape(format!(
                "conv_transpose2d: width {wd} with kernel {kw}, stride {stride}, padding {padding} yields no output"
            ))
        })?;
        let xv = self.nodes[x.0].value.data();
        let wv = self.nodes[w.0].value.data();
        let bias = self.nodes[b.0].value.data();
        let patch = co * kh * kw;
        let mut out = vec![F::zero(); batch * co * oh * ow];
        out.par_chunks_mut(co * oh * ow)
            .zip(xv.par_chunks(ci * h * wd))
            .for_each(|(out_img, x_img)| {
                let mut tmp = vec![F::zero(); patch * h * wd];
                matmul_tn_acc(&mut tmp, wv, x_img, patch, ci, h * wd);
                col2im_acc(out_img, &tmp, co, oh, ow, kh, kw, stride, padding, h, wd);
                for (o, plane) in out_img.chunks_exact_mut(oh * ow).enumerate() {
                    let bo = bias[o];
                    plane.iter_mut().for_each(|v| *v += bo);
                }
            });
        let mut t = Tensor::new(vec![batch, co, oh, ow], out)?;
        t.requires_grad =
            self.requires_grad(x) || self.requires_grad(w) || self.requires_grad(b);
        Ok(self.push(t, Op::ConvTranspose2d { x, w, b, stride, padding }, None))
    }

    // ---- backward ---------------------------------------------------------

    fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad
    }

    /// Reverse sweep from a scalar loss. Each call computes one fresh
    /// adjoint pass and adds it into node and parameter gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut adj: Vec<Option<Vec<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[loss.0] = Some(vec![F::one()]);
        for id in (0..=loss.0).rev() {
            if !self.nodes[id].value.requires_grad {
                adj[id] = None;
                continue;
            }
            let Some(g) = adj[id].take() else { continue };
            self.propagate(id, &g, &mut adj);
            let node = &mut self.nodes[id];
            node.value.accumulate_grad(&g);
            if let Some(p) = &node.param {
                p.accumulate_grad(&g);
            }
        }
        Ok(())
    }

    fn slot<'a>(&self, adj: &'a mut [Option<Vec<F>>], v: Var) -> &'a mut [F] {
        let n = self.nodes[v.0].value.numel();
        adj[v.0].get_or_insert_with(|| vec![F::zero(); n]).as_mut_slice()
    }

    fn propagate(&self, id: usize, g: &[F], adj: &mut [Option<Vec<F>>]) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Elem(op, a, b) => self.backward_elem(*op, *a, *b, g, adj),
            Op::Matmul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                if self.requires_grad(*a) {
                    let bv = self.nodes[b.0].value.data();
                    matmul_nt_acc(self.slot(adj, *a), g, bv, m, n, k);
                }
                if self.requires_grad(*b) {
                    let av = self.nodes[a.0].value.data();
                    matmul_tn_acc(self.slot(adj, *b), av, g, k, m, n);
                }
            }
            Op::Linear { x, w, b } => {
                let (sx, sw) = (self.shape(*x), self.shape(*w));
                let (m, k, n) = (sx[0], sx[1], sw[0]);
                if self.requires_grad(*x) {
                    let wv = self.nodes[w.0].value.data();
                    matmul_nn_acc(self.slot(adj, *x), g, wv, m, n, k);
                }
                if self.requires_grad(*w) {
                    let xv = self.nodes[x.0].value.data();
                    matmul_tn_acc(self.slot(adj, *w), g, xv, n, m, k);
                }
                if self.requires_grad(*b) {
                    col_sums_acc(self.slot(adj, *b), g, n);
                }
            }
            Op::Act(tag, x) => {
                if !self.requires_grad(*x) {
                    return;
                }
                let y = self.nodes[id].value.data();
                let slope = F::from_config(LEAKY_SLOPE);
                match tag {
                    Activation::Sigmoid => {
                        for ((dst, &yv), &gv) in self.slot(adj, *x).iter_mut().zip(y).zip(g) {
                            *dst += gv * yv * (F::one() - yv);
                        }
                    }
                    Activation::Tanh => {
                        for ((dst, &yv), &gv) in self.slot(adj, *x).iter_mut().zip(y).zip(g) {
                            *dst += gv * (F::one() - yv * yv);
                        }
                    }
                    Activation::Relu => {
                        for ((dst, &yv), &gv) in self.slot(adj, *x).iter_mut().zip(y).zip(g) {
                            if yv > F::zero() {
                                *dst += gv;
                            }
                        }
                    }
                    Activation::LeakyRelu => {
                        for ((dst, &yv), &gv) in self.slot(adj, *x).iter_mut().zip(y).zip(g) {
                            *dst += if yv > F::zero() { gv } else { gv * slope };
                        }
                    }
                    Activation::Softmax => {
                        let cols = *self.nodes[id].value.shape().last().unwrap();
                        let dst = self.slot(adj, *x);
                        for ((d_row, y_row), g_row) in
                            dst.chunks_exact_mut(cols).zip(y.chunks_exact(cols)).zip(g.chunks_exact(cols))
                        {
                            let inner: F =
                                g_row.iter().zip(y_row).map(|(&gv, &yv)| gv * yv).sum();
                            for ((d, &yv), &gv) in d_row.iter_mut().zip(y_row).zip(g_row) {
                                *d += yv * (gv - inner);
                            }
                        }
                    }
                }
            }
            Op::BceWithLogits { logits, targets } => {
                if !self.requires_grad(*logits) {
                    return;
                }
                let lv = self.nodes[logits.0].value.data();
                let tv = self.nodes[targets.0].value.data();
                let scale = g[0] / F::from_config(lv.len() as f64);
                for ((dst, &l), &t) in self.slot(adj, *logits).iter_mut().zip(lv).zip(tv) {
                    *dst += scale * (stable_sigmoid(l) - t);
                }
            }
            Op::SoftmaxCrossEntropy { logits, probs, labels } => {
                if !self.requires_grad(*logits) {
                    return;
                }
                let classes = self.shape(*logits)[1];
                let scale = g[0] / F::from_config(labels.len() as f64);
                let dst = self.slot(adj, *logits);
                for ((d_row, p_row), &label) in
                    dst.chunks_exact_mut(classes).zip(probs.chunks_exact(classes)).zip(labels)
                {
                    for (c, (d, &p)) in d_row.iter_mut().zip(p_row).enumerate() {
                        let target = if c == label { F::one() } else { F::zero() };
                        *d += scale * (p - target);
                    }
                }
            }
            Op::SumAll(x) => {
                if self.requires_grad(*x) {
                    let gv = g[0];
                    self.slot(adj, *x).iter_mut().for_each(|d| *d += gv);
                }
            }
            Op::MeanAll(x) => {
                if self.requires_grad(*x) {
                    let n = self.nodes[x.0].value.numel();
                    let gv = g[0] / F::from_config(n as f64);
                    self.slot(adj, *x).iter_mut().for_each(|d| *d += gv);
                }
            }
            Op::Scale(x, factor) => {
                if self.requires_grad(*x) {
                    let f = *factor;
                    for (d, &gv) in self.slot(adj, *x).iter_mut().zip(g) {
                        *d += f * gv;
                    }
                }
            }
            Op::Reshape(x) => {
                if self.requires_grad(*x) {
                    for (d, &gv) in self.slot(adj, *x).iter_mut().zip(g) {
                        *d += gv;
                    }
                }
            }
            Op::Concat { axis, parts } => {
                let shape = self.nodes[id].value.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[*axis + 1..].iter().product();
                let total_block = shape[*axis] * inner;
                let mut offset = 0usize;
                for &p in parts {
                    let block = self.shape(p)[*axis] * inner;
                    if self.requires_grad(p) {
                        let dst = self.slot(adj, p);
                        for o in 0..outer {
                            let src = &g[o * total_block + offset..o * total_block + offset + block];
                            for (d, &gv) in dst[o * block..(o + 1) * block].iter_mut().zip(src) {
                                *d += gv;
                            }
                        }
                    }
                    offset += block;
                }
            }
            Op::Narrow { x, axis, start, len } => {
                if !self.requires_grad(*x) {
                    return;
                }
                let s = self.shape(*x).to_vec();
                let outer: usize = s[..*axis].iter().product();
                let inner: usize = s[*axis + 1..].iter().product();
                let dst = self.slot(adj, *x);
                for o in 0..outer {
                    let base = (o * s[*axis] + start) * inner;
                    let src = &g[o * len * inner..(o + 1) * len * inner];
                    for (d, &gv) in dst[base..base + len * inner].iter_mut().zip(src) {
                        *d += gv;
                    }
                }
            }
            Op::CausalConv1d { x, w, b, dilation } => {
                self.backward_causal_conv1d(*x, *w, *b, *dilation, g, adj)
            }
            Op::Conv2d { x, w, b, stride, padding } => {
                self.backward_conv2d(id, *x, *w, *b, *stride, *padding, g, adj)
            }
            Op::ConvTranspose2d { x, w, b, stride, padding } => {
                self.backward_conv_transpose2d(*x, *w, *b, *stride, *padding, g, adj)
            }
        }
    }

    fn backward_elem(&self, op: ElemOp, a: Var, b: Var, g: &[F], adj: &mut [Option<Vec<F>>]) {
        let (na, nb) = (self.nodes[a.0].value.numel(), self.nodes[b.0].value.numel());
        let (av, bv) = (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
        // The output matches the larger operand; the smaller one (if any)
        // broadcast over leading axes and its gradient sums over them.
        match op {
            ElemOp::Add | ElemOp::Sub => {
                let sign =
                    if op == ElemOp::Sub { F::zero() - F::one() } else { F::one() };
                if self.requires_grad(a) {
                    let dst = self.slot(adj, a);
                    if na == g.len() {
                        for (d, &gv) in dst.iter_mut().zip(g) {
                            *d += gv;
                        }
                    } else {
                        for chunk in g.chunks_exact(na) {
                            for (d, &gv) in dst.iter_mut().zip(chunk) {
                                *d += gv;
                            }
                        }
                    }
                }
                if self.requires_grad(b) {
                    let dst = self.slot(adj, b);
                    if nb == g.len() {
                        for (d, &gv) in dst.iter_mut().zip(g) {
                            *d += sign * gv;
                        }
                    } else {
                        for chunk in g.chunks_exact(nb) {
                            for (d, &gv) in dst.iter_mut().zip(chunk) {
                                *d += sign * gv;
                            }
                        }
                    }
                }
            }
            ElemOp::Mul => {
                if self.requires_grad(a) {
                    let dst = self.slot(adj, a);
                    if na == g.len() {
                        // b may still broadcast across a
                        if nb == g.len() {
                            for ((d, &gv), &ov) in dst.iter_mut().zip(g).zip(bv) {
                                *d += gv * ov;
                            }
                        } else {
                            for (d_chunk, g_chunk) in
                                dst.chunks_exact_mut(nb).zip(g.chunks_exact(nb))
                            {
                                for ((d, &gv), &ov) in d_chunk.iter_mut().zip(g_chunk).zip(bv) {
                                    *d += gv * ov;
                                }
                            }
                        }
                    } else {
                        for (g_chunk, b_chunk) in g.chunks_exact(na).zip(bv.chunks_exact(na)) {
                            for ((d, &gv), &ov) in dst.iter_mut().zip(g_chunk).zip(b_chunk) {
                                *d += gv * ov;
                            }
                        }
                    }
                }
                if self.requires_grad(b) {
                    let dst = self.slot(adj, b);
                    if nb == g.len() {
                        if na == g.len() {
                            for ((d, &gv), &ov) in dst.iter_mut().zip(g).zip(av) {
                                *d += gv * ov;
                            }
                        } else {
                            for (d_chunk, g_chunk) in
                                dst.chunks_exact_mut(na).zip(g.chunks_exact(na))
                            {
                                for ((d, &gv), &ov) in d_chunk.iter_mut().zip(g_chunk).zip(av) {
                                    *d += gv * ov;
                                }
                            }
                        }
                    } else {
                        for (g_chunk, a_chunk) in g.chunks_exact(nb).zip(av.chunks_exact(nb)) {
                            for ((d, &gv), &ov) in dst.iter_mut().zip(g_chunk).zip(a_chunk) {
                                *d += gv * ov;
                            }
                        }
                    }
                }
            }
        }
    }

    fn backward_causal_conv1d(
        &self,
        x: Var,
        w: Var,
        b: Var,
        dilation: usize,
        g: &[F],
        adj: &mut [Option<Vec<F>>],
    ) {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        let (batch, ci, t_len) = (sx[0], sx[1], sx[2]);
        let (co, k) = (sw[0], sw[2]);
        let xv = self.nodes[x.0].value.data();
        let wv = self.nodes[w.0].value.data();
        if self.requires_grad(x) {
            let dst = self.slot(adj, x);
            for bi in 0..batch {
                for o in 0..co {
                    let g_row = &g[(bi * co + o) * t_len..(bi * co + o + 1) * t_len];
                    for i in 0..ci {
                        let x_grad =
                            &mut dst[(bi * ci + i) * t_len..(bi * ci + i + 1) * t_len];
                        for tap in 0..k {
                            let shift = (k - 1 - tap) * dilation;
                            if shift >= t_len {
                                continue;
                            }
                            let wv_tap = wv[(o * ci + i) * k + tap];
                            for (d, &gv) in
                                x_grad[..t_len - shift].iter_mut().zip(&g_row[shift..])
                            {
                                *d = wv_tap.mul_add_fast(gv, *d);
                            }
                        }
                    }
                }
            }
        }
        if self.requires_grad(w) {
            let dst = self.slot(adj, w);
            for bi in 0..batch {
                for o in 0..co {
                    let g_row = &g[(bi * co + o) * t_len..(bi * co + o + 1) * t_len];
                    for i in 0..ci {
                        let x_row = &xv[(bi * ci + i) * t_len..(bi * ci + i + 1) * t_len];
                        for tap in 0..k {
                            let shift = (k - 1 - tap) * dilation;
                            if shift >= t_len {
                                continue;
                            }
                            let mut acc = F::zero();
                            for (&gv, &xvv) in g_row[shift..].iter().zip(&x_row[..t_len - shift]) {
                                acc = gv.mul_add_fast(xvv, acc);
                            }
                            dst[(o * ci + i) * k + tap] += acc;
                        }
                    }
                }
            }
        }
        if self.requires_grad(b) {
            let dst = self.slot(adj, b);
            for bi in 0..batch {
                for o in 0..co {
                    let g_row = &g[(bi * co + o) * t_len..(bi * co + o + 1) * t_len];
                    dst[o] += g_row.iter().cloned().sum();
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_conv2d(
        &self,
        id: usize,
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        padding: usize,
        g: &[F],
        adj: &mut [Option<Vec<F>>],
    ) {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        let so = self.nodes[id].value.shape().to_vec();
        let (batch, ci, h, wd) = (sx[0], sx[1], sx[2], sx[3]);
        let (co, kh, kw) = (sw[0], sw[2], sw[3]);
        let (oh, ow) = (so[2], so[3]);
        let patch = ci * kh * kw;
        let xv = self.nodes[x.0].value.data();
        let wv = self.nodes[w.0].value.data();
        if self.requires_grad(x) {
            let dst = self.slot(adj, x);
            dst.par_chunks_mut(ci * h * wd).zip(g.par_chunks(co * oh * ow)).for_each(
                |(x_grad, g_img)| {
                    let mut gcol = vec![F::zero(); patch * oh * ow];
                    matmul_tn_acc(&mut gcol, wv, g_img, patch, co, oh * ow);
                    col2im_acc(x_grad, &gcol, ci, h, wd, kh, kw, stride, padding, oh, ow);
                },
            );
        }
        if self.requires_grad(w) {
            // Fixed-size image groups keep the partial-sum order independent
            // of thread count.
            const GROUP: usize = 8;
            let partials: Vec<Vec<F>> = xv
                .par_chunks(GROUP * ci * h * wd)
                .zip(g.par_chunks(GROUP * co * oh * ow))
                .map(|(x_group, g_group)| {
                    let mut acc = vec![F::zero(); co * patch];
                    let mut col = vec![F::zero(); patch * oh * ow];
                    for (x_img, g_img) in
                        x_group.chunks_exact(ci * h * wd).zip(g_group.chunks_exact(co * oh * ow))
                    {
                        col.iter_mut().for_each(|v| *v = F::zero());
                        im2col(&mut col, x_img, ci, h, wd, kh, kw, stride, padding, oh, ow);
                        matmul_nt_acc(&mut acc, g_img, &col, co, oh * ow, patch);
                    }
                    acc
                })
                .collect();
            let dst = self.slot(adj, w);
            for part in partials {
                for (d, v) in dst.iter_mut().zip(part) {
                    *d += v;
                }
            }
        }
        if self.requires_grad(b) {
            let dst = self.slot(adj, b);
            for g_img in g.chunks_exact(co * oh * ow) {
                for (o, plane) in g_img.chunks_exact(oh * ow).enumerate() {
                    dst[o] += plane.iter().cloned().sum();
                }
            }
        }
        let _ = batch;
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_conv_transpose2d(
        &self,
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        padding: usize,
        g: &[F],
        adj: &mut [Option<Vec<F>>],
    ) {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        let (ci, h, wd) = (sx[1], sx[2], sx[3]);
        let (co, kh, kw) = (sw[1], sw[2], sw[3]);
        let oh = deconv_out(h, kh, stride, padding).unwrap();
        let ow = deconv_out(wd, kw, stride, padding).unwrap();
        let patch = co * kh * kw;
        let xv = self.nodes[x.0].value.data();
        let wv = self.nodes[w.0].value.data();
        if self.requires_grad(x) {
            let dst = self.slot(adj, x);
            dst.par_chunks_mut(ci * h * wd).zip(g.par_chunks(co * oh * ow)).for_each(
                |(x_grad, g_img)| {
                    let mut gcol = vec![F::zero(); patch * h * wd];
                    im2col(&mut gcol, g_img, co, oh, ow, kh, kw, stride, padding, h, wd);
                    matmul_nn_acc(x_grad, wv, &gcol, ci, patch, h * wd);
                },
            );
        }
        if self.requires_grad(w) {
            const GROUP: usize = 8;
            let partials: Vec<Vec<F>> = xv
                .par_chunks(GROUP * ci * h * wd)
                .zip(g.par_chunks(GROUP * co * oh * ow))
                .map(|(x_group, g_group)| {
                    let mut acc = vec![F::zero(); ci * patch];
                    let mut gcol = vec![F::zero(); patch * h * wd];
                    for (x_img, g_img) in
                        x_group.chunks_exact(ci * h * wd).zip(g_group.chunks_exact(co * oh * ow))
                    {
                        gcol.iter_mut().for_each(|v| *v = F::zero());
                        im2col(&mut gcol, g_img, co, oh, ow, kh, kw, stride, padding, h, wd);
                        matmul_nt_acc(&mut acc, x_img, &gcol, ci, h * wd, patch);
                    }
                    acc
                })
                .collect();
            let dst = self.slot(adj, w);
            for part in partials {
                for (d, v) in dst.iter_mut().zip(part) {
                    *d += v;
                }
            }
        }
        if self.requires_grad(b) {
            let dst = self.slot(adj, b);
            for g_img in g.chunks_exact(co * oh * ow) {
                for (o, plane) in g_img.chunks_exact(oh * ow).enumerate() {
                    dst[o] += plane.iter().cloned().sum();
                }
            }
        }
    }
}

fn is_suffix(candidate: &[usize], of: &[usize]) -> bool {
    candidate.len() < of.len() && of[of.len() - candidate.len()..] == *candidate
}

fn conv_out(extent: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = extent + 2 * padding;
    if padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

fn deconv_out(extent: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let grown = (extent - 1) * stride + kernel;
    if grown <= 2 * padding {
        return None;
    }
    Some(grown - 2 * padding)
}

fn stable_sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}
