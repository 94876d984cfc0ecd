//! Wengert-list reverse-mode autodiff.
//!
//! Every forward op appends a node holding its output value; `backward` walks
//! the list once in reverse, accumulating adjoints. Leaves are trainable
//! (gradients collected), constants are not (gradients structurally absent),
//! which is how frozen networks are kept out of an update without masking.

use super::conv::{
    conv2d_grads, conv2d_raw, transposed_conv2d_grads, transposed_conv2d_raw,
    upsample_bilinear_backward, upsample_bilinear_raw,
};
use super::{Real, Shape4, Tensor4};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TensorId(usize);

#[derive(Clone, Copy, Debug)]
enum Op<T: Real> {
    Leaf,
    Constant,
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    ScalarMul(TensorId, T),
    RsubScalar(T, TensorId),
    ClampMin(TensorId, T),
    Clamp(TensorId, T, T),
    Ln(TensorId),
    LeakyRelu(TensorId, T),
    Sigmoid(TensorId),
    Conv2d {
        input: TensorId,
        kernel: TensorId,
        bias: Option<TensorId>,
        stride: usize,
        padding: usize,
    },
    ConvT2d {
        input: TensorId,
        kernel: TensorId,
        bias: Option<TensorId>,
        stride: usize,
        padding: usize,
    },
    Upsample(TensorId),
    ConcatC(TensorId, TensorId),
    Mean(TensorId),
    Sum(TensorId),
}

struct Node<T: Real> {
    op: Op<T>,
    value: Tensor4<T>,
    needs_grad: bool,
}

pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
}

/// Adjoints from one reverse sweep, indexed by the ids the forward produced.
pub struct Gradients<T: Real> {
    grads: Vec<Option<Tensor4<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, id: TensorId) -> Option<&Tensor4<T>> {
        self.grads[id.0].as_ref()
    }

    pub fn take(&mut self, id: TensorId) -> Option<Tensor4<T>> {
        self.grads[id.0].take()
    }
}

fn add_in_place<T: Real>(acc: &mut Tensor4<T>, delta: &Tensor4<T>) {
    debug_assert_eq!(acc.shape, delta.shape);
    for (a, d) in acc.data.iter_mut().zip(&delta.data) {
        *a = *a + *d;
    }
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: TensorId) -> &Tensor4<T> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: TensorId) -> Shape4 {
        self.nodes[id.0].value.shape
    }

    fn push(&mut self, op: Op<T>, value: Tensor4<T>, needs_grad: bool) -> TensorId {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn needs(&self, id: TensorId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Trainable input: participates in the reverse sweep.
    pub fn leaf(&mut self, value: Tensor4<T>) -> TensorId {
        self.push(Op::Leaf, value, true)
    }

    /// Non-trainable input: adjoints never reach it.
    pub fn constant(&mut self, value: Tensor4<T>) -> TensorId {
        self.push(Op::Constant, value, false)
    }

    fn binary_same_shape(
        &mut self,
        context: &'static str,
        a: TensorId,
        b: TensorId,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<TensorId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.shape != vb.shape {
            return Err(Error::ShapeMismatch {
                context,
                left: va.shape.to_string(),
                right: vb.shape.to_string(),
            });
        }
        let data = va.data.iter().zip(&vb.data).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor4 {
            shape: va.shape,
            data,
        };
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(op, value, needs))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.binary_same_shape("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.binary_same_shape("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.binary_same_shape("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, a: TensorId, f: impl Fn(T) -> T, op: Op<T>) -> TensorId {
        let value = self.nodes[a.0].value.map(f);
        let needs = self.needs(a);
        self.push(op, value, needs)
    }

    pub fn scalar_mul(&mut self, a: TensorId, s: T) -> TensorId {
        self.unary(a, |x| s * x, Op::ScalarMul(a, s))
    }

    /// s - x elementwise (used for 1 - p).
    pub fn rsub_scalar(&mut self, s: T, a: TensorId) -> TensorId {
        self.unary(a, |x| s - x, Op::RsubScalar(s, a))
    }

    /// max(x, m) elementwise; the log-argument floor.
    pub fn clamp_min(&mut self, a: TensorId, m: T) -> TensorId {
        self.unary(a, |x| x.max(m), Op::ClampMin(a, m))
    }

    /// min(max(x, lo), hi) elementwise; the probability corridor before logs.
    pub fn clamp(&mut self, a: TensorId, lo: T, hi: T) -> Result<TensorId> {
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "clamp bounds inverted: {lo} > {hi}"
            )));
        }
        Ok(self.unary(a, |x| x.max(lo).min(hi), Op::Clamp(a, lo, hi)))
    }

    pub fn ln(&mut self, a: TensorId) -> TensorId {
        self.unary(a, |x| x.ln(), Op::Ln(a))
    }

    pub fn leaky_relu(&mut self, a: TensorId, slope: T) -> Result<TensorId> {
        if slope < T::zero() || slope >= T::one() {
            return Err(Error::InvalidArgument(format!(
                "leaky_relu slope must be in [0,1), got {slope}"
            )));
        }
        Ok(self.unary(
            a,
            |x| if x > T::zero() { x } else { slope * x },
            Op::LeakyRelu(a, slope),
        ))
    }

    pub fn sigmoid(&mut self, a: TensorId) -> TensorId {
        self.unary(a, |x| T::one() / (T::one() + (-x).exp()), Op::Sigmoid(a))
    }

    pub fn conv2d(
        &mut self,
        input: TensorId,
        kernel: TensorId,
        bias: Option<TensorId>,
        stride: usize,
        padding: usize,
    ) -> Result<TensorId> {
        let value = conv2d_raw(
            &self.nodes[input.0].value,
            &self.nodes[kernel.0].value,
            bias.map(|b| &self.nodes[b.0].value),
            stride,
            padding,
        )?;
        let needs = self.needs(input)
            || self.needs(kernel)
            || bias.is_some_and(|b| self.needs(b));
        Ok(self.push(
            Op::Conv2d {
                input,
                kernel,
                bias,
                stride,
                padding,
            },
            value,
            needs,
        ))
    }

    pub fn transposed_conv2d(
        &mut self,
        input: TensorId,
        kernel: TensorId,
        bias: Option<TensorId>,
        stride: usize,
        padding: usize,
    ) -> Result<TensorId> {
        let value = transposed_conv2d_raw(
            &self.nodes[input.0].value,
            &self.nodes[kernel.0].value,
            bias.map(|b| &self.nodes[b.0].value),
            stride,
            padding,
            None,
        )?;
        let needs = self.needs(input)
            || self.needs(kernel)
            || bias.is_some_and(|b| self.needs(b));
        Ok(self.push(
            Op::ConvT2d {
                input,
                kernel,
                bias,
                stride,
                padding,
            },
            value,
            needs,
        ))
    }

    pub fn upsample_bilinear(
        &mut self,
        input: TensorId,
        out_h: usize,
        out_w: usize,
    ) -> Result<TensorId> {
        let value = upsample_bilinear_raw(&self.nodes[input.0].value, out_h, out_w)?;
        let needs = self.needs(input);
        Ok(self.push(Op::Upsample(input), value, needs))
    }

    /// Channel concatenation, the U-Net skip join.
    pub fn concat_c(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.n != sb.n || sa.h != sb.h || sa.w != sb.w {
            return Err(Error::ShapeMismatch {
                context: "concat_c",
                left: sa.to_string(),
                right: sb.to_string(),
            });
        }
        let os = Shape4::new(sa.n, sa.c + sb.c, sa.h, sa.w);
        let mut value = Tensor4::zeros(os);
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        for n in 0..os.n {
            for c in 0..sa.c {
                for h in 0..os.h {
                    for w in 0..os.w {
                        *value.at_mut(n, c, h, w) = va.at(n, c, h, w);
                    }
                }
            }
            for c in 0..sb.c {
                for h in 0..os.h {
                    for w in 0..os.w {
                        *value.at_mut(n, sa.c + c, h, w) = vb.at(n, c, h, w);
                    }
                }
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::ConcatC(a, b), value, needs))
    }

    /// Mean over all elements. Accumulates left to right in storage order so
    /// the result is a reproducible, order-fixed reduction.
    pub fn mean(&mut self, a: TensorId) -> TensorId {
        let v = &self.nodes[a.0].value;
        let mut acc = T::zero();
        for &x in &v.data {
            acc = acc + x;
        }
        let m = acc / T::from_usize(v.len()).expect("len fits in T");
        let needs = self.needs(a);
        self.push(Op::Mean(a), Tensor4::scalar(m), needs)
    }

    pub fn sum(&mut self, a: TensorId) -> TensorId {
        let v = &self.nodes[a.0].value;
        let mut acc = T::zero();
        for &x in &v.data {
            acc = acc + x;
        }
        let needs = self.needs(a);
        self.push(Op::Sum(a), Tensor4::scalar(acc), needs)
    }

    /// Reverse sweep from a scalar root. Gradients exist only for nodes that
    /// both need gradients and are reachable from the root.
    pub fn backward(&self, root: TensorId) -> Result<Gradients<T>> {
        let root_val = &self.nodes[root.0].value;
        if !root_val.shape.is_scalar() {
            return Err(Error::NonScalarRoot(root_val.shape.to_string()));
        }
        let mut grads: Vec<Option<Tensor4<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor4::scalar(T::one()));

        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].needs_grad {
                grads[i] = None;
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            // Re-store for callers; taken back out per-branch where needed.
            match node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                Op::Constant => {}
                Op::Add(a, b) => {
                    self.accum(&mut grads, a, &g, |gv, _| gv);
                    self.accum(&mut grads, b, &g, |gv, _| gv);
                    grads[i] = Some(g);
                }
                Op::Sub(a, b) => {
                    self.accum(&mut grads, a, &g, |gv, _| gv);
                    self.accum(&mut grads, b, &g, |gv, _| -gv);
                    grads[i] = Some(g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    self.accum_zip(&mut grads, a, &g, vb, |gv, o| gv * o);
                    self.accum_zip(&mut grads, b, &g, va, |gv, o| gv * o);
                    grads[i] = Some(g);
                }
                Op::ScalarMul(a, s) => {
                    self.accum(&mut grads, a, &g, |gv, _| s * gv);
                    grads[i] = Some(g);
                }
                Op::RsubScalar(_, a) => {
                    self.accum(&mut grads, a, &g, |gv, _| -gv);
                    grads[i] = Some(g);
                }
                Op::ClampMin(a, m) => {
                    let va = &self.nodes[a.0].value;
                    self.accum_zip(&mut grads, a, &g, va, |gv, x| {
                        if x >= m {
                            gv
                        } else {
                            T::zero()
                        }
                    });
                    grads[i] = Some(g);
                }
                Op::Clamp(a, lo, hi) => {
                    let va = &self.nodes[a.0].value;
                    self.accum_zip(&mut grads, a, &g, va, |gv, x| {
                        if x >= lo && x <= hi {
                            gv
                        } else {
                            T::zero()
                        }
                    });
                    grads[i] = Some(g);
                }
                Op::Ln(a) => {
                    let va = &self.nodes[a.0].value;
                    self.accum_zip(&mut grads, a, &g, va, |gv, x| gv / x);
                    grads[i] = Some(g);
                }
                Op::LeakyRelu(a, slope) => {
                    let va = &self.nodes[a.0].value;
                    self.accum_zip(&mut grads, a, &g, va, |gv, x| {
                        if x > T::zero() {
                            gv
                        } else {
                            slope * gv
                        }
                    });
                    grads[i] = Some(g);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    self.accum_zip(&mut grads, a, &g, y, |gv, yv| gv * yv * (T::one() - yv));
                    grads[i] = Some(g);
                }
                Op::Conv2d {
                    input,
                    kernel,
                    bias,
                    stride,
                    padding,
                } => {
                    let need = (
                        self.needs(input),
                        self.needs(kernel),
                        bias.is_some_and(|b| self.needs(b)),
                    );
                    let parts = conv2d_grads(
                        &self.nodes[input.0].value,
                        &self.nodes[kernel.0].value,
                        &g,
                        stride,
                        padding,
                        need,
                    );
                    if let Some(gi) = parts.input {
                        self.accum_tensor(&mut grads, input, gi);
                    }
                    if let Some(gk) = parts.kernel {
                        self.accum_tensor(&mut grads, kernel, gk);
                    }
                    if let (Some(b), Some(gb)) = (bias, parts.bias) {
                        self.accum_tensor(&mut grads, b, gb);
                    }
                    grads[i] = Some(g);
                }
                Op::ConvT2d {
                    input,
                    kernel,
                    bias,
                    stride,
                    padding,
                } => {
                    let need = (
                        self.needs(input),
                        self.needs(kernel),
                        bias.is_some_and(|b| self.needs(b)),
                    );
                    let parts = transposed_conv2d_grads(
                        &self.nodes[input.0].value,
                        &self.nodes[kernel.0].value,
                        &g,
                        stride,
                        padding,
                        need,
                    );
                    if let Some(gi) = parts.input {
                        self.accum_tensor(&mut grads, input, gi);
                    }
                    if let Some(gk) = parts.kernel {
                        self.accum_tensor(&mut grads, kernel, gk);
                    }
                    if let (Some(b), Some(gb)) = (bias, parts.bias) {
                        self.accum_tensor(&mut grads, b, gb);
                    }
                    grads[i] = Some(g);
                }
                Op::Upsample(a) => {
                    let sa = self.shape(a);
                    let gi = upsample_bilinear_backward(&g, sa.h, sa.w);
                    self.accum_tensor(&mut grads, a, gi);
                    grads[i] = Some(g);
                }
                Op::ConcatC(a, b) => {
                    let (sa, sb) = (self.shape(a), self.shape(b));
                    let gs = g.shape;
                    let mut ga = Tensor4::zeros(sa);
                    let mut gb = Tensor4::zeros(sb);
                    for n in 0..gs.n {
                        for c in 0..sa.c {
                            for h in 0..gs.h {
                                for w in 0..gs.w {
                                    *ga.at_mut(n, c, h, w) = g.at(n, c, h, w);
                                }
                            }
                        }
                        for c in 0..sb.c {
                            for h in 0..gs.h {
                                for w in 0..gs.w {
                                    *gb.at_mut(n, c, h, w) = g.at(n, sa.c + c, h, w);
                                }
                            }
                        }
                    }
                    self.accum_tensor(&mut grads, a, ga);
                    self.accum_tensor(&mut grads, b, gb);
                    grads[i] = Some(g);
                }
                Op::Mean(a) => {
                    let sa = self.shape(a);
                    let scale = g.data[0] / T::from_usize(sa.len()).expect("len fits in T");
                    self.accum_tensor(&mut grads, a, Tensor4::full(sa, scale));
                    grads[i] = Some(g);
                }
                Op::Sum(a) => {
                    let sa = self.shape(a);
                    self.accum_tensor(&mut grads, a, Tensor4::full(sa, g.data[0]));
                    grads[i] = Some(g);
                }
            }
        }
        Ok(Gradients { grads })
    }

    /// g mapped elementwise (optionally against `other`'s elements) into the
    /// slot for `target`.
    fn accum(
        &self,
        grads: &mut [Option<Tensor4<T>>],
        target: TensorId,
        g: &Tensor4<T>,
        f: impl Fn(T, T) -> T,
    ) {
        if !self.needs(target) {
            return;
        }
        let delta = Tensor4 {
            shape: g.shape,
            data: g.data.iter().map(|&gv| f(gv, T::zero())).collect(),
        };
        self.accum_tensor(grads, target, delta);
    }

    fn accum_zip(
        &self,
        grads: &mut [Option<Tensor4<T>>],
        target: TensorId,
        g: &Tensor4<T>,
        other: &Tensor4<T>,
        f: impl Fn(T, T) -> T,
    ) {
        if !self.needs(target) {
            return;
        }
        let delta = Tensor4 {
            shape: g.shape,
            data: g
                .data
                .iter()
                .zip(&other.data)
                .map(|(&gv, &ov)| f(gv, ov))
                .collect(),
        };
        self.accum_tensor(grads, target, delta);
    }

    fn accum_tensor(&self, grads: &mut [Option<Tensor4<T>>], target: TensorId, delta: Tensor4<T>) {
        if !self.needs(target) {
            return;
        }
        match &mut grads[target.0] {
            Some(acc) => add_in_place(acc, &delta),
            slot @ None => *slot = Some(delta),
        }
    }
}
