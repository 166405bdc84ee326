//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every primitive in execution order, so the node list is
//! already topologically sorted. [`Tape::backward`] walks it once in reverse
//! and accumulates gradients additively into each input, which means a node
//! used twice receives the sum of both contributions.
//!
//! ```
//! use icicle::tensor::{Tape, Tensor};
//!
//! let tape = Tape::new();
//! let x = tape.leaf(Tensor::scalar(2.0));
//! let y = tape.leaf(Tensor::scalar(3.0));
//! let loss = x.mul(y).unwrap().sum().unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.wrt(x).item(), 3.0);
//! assert_eq!(grads.wrt(y).item(), 2.0);
//! ```

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use super::array::Tensor;
use super::gemm::gemm;
use crate::error::{Error, Result};
use crate::optim::Parameter;

/// Rows with Euclidean norm below this are rejected by normalization.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    AddBias(usize, usize),
    Relu(usize),
    Exp(usize),
    Ln(usize),
    Powf(usize, f64),
    Sum(usize),
    SumRows(usize),
    SumCols(usize),
    RowSoftmax(usize),
    LogRowSoftmax(usize),
    RowLogSumExp(usize),
    L2NormalizeRows(usize, Vec<f64>),
    RowNormalize(usize, Vec<f64>),
    Transpose(usize),
    Diag(usize),
    ConcatCols(usize, usize),
    Reshape(usize),
    PairwiseSqDist(usize, usize),
    Conv2d {
        input: usize,
        kernel: usize,
        stride: usize,
    },
    MaxPool2 {
        input: usize,
        argmax: Vec<usize>,
    },
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Operation recorder for one forward/backward pass.
///
/// A tape is single-threaded; build a fresh one per optimizer step.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<HashMap<String, usize>>,
    grad_enabled: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.value())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            params: RefCell::new(HashMap::new()),
            grad_enabled: true,
        }
    }

    /// A tape on which nothing requires gradients, for evaluation passes.
    pub fn inference() -> Self {
        Self {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Differentiable leaf.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.record(Rc::new(value), Op::Leaf, self.grad_enabled)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.record(Rc::new(value), Op::Leaf, false)
    }

    /// Binds a named parameter. Binding the same name twice returns the same
    /// leaf so that shared weights accumulate into one gradient.
    pub fn param(&self, p: &Parameter) -> Var<'_> {
        if let Some(&id) = self.params.borrow().get(p.name()) {
            return Var { tape: self, id };
        }
        let v = self.leaf(p.value().clone());
        self.params.borrow_mut().insert(p.name().to_owned(), v.id);
        v
    }

    fn record(&self, value: Rc<Tensor>, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn push(&self, name: &'static str, value: Tensor, op: Op, inputs: &[usize]) -> Result<Var<'_>> {
        if !value.all_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = {
            let nodes = self.nodes.borrow();
            inputs.iter().any(|&i| nodes[i].requires_grad)
        };
        Ok(self.record(Rc::new(value), op, requires_grad))
    }

    fn value(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Propagates d`loss`/d(node) back to every differentiable leaf.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if !root.value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.id + 1];
        let mut leaves: Vec<Option<Tensor>> = vec![None; loss.id + 1];
        if root.requires_grad {
            grads[loss.id] = Some(Tensor::full(root.value.shape(), 1.0));
        }
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            backprop(&nodes, id, g, &mut grads, &mut leaves);
        }
        Ok(Gradients {
            grads: leaves,
            params: self.params.borrow().clone(),
        })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], nodes: &[Node], id: usize, g: Tensor) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn same_shape(shape: &[usize], data: Vec<f64>) -> Tensor {
    Tensor::new(shape.to_vec(), data).expect("gradient shape follows value shape")
}

fn backprop(
    nodes: &[Node],
    id: usize,
    g: Tensor,
    grads: &mut [Option<Tensor>],
    leaves: &mut [Option<Tensor>],
) {
    let out = &nodes[id].value;
    let val = |i: usize| -> &Tensor { &nodes[i].value };
    let needs = |i: usize| nodes[i].requires_grad;
    match &nodes[id].op {
        Op::Leaf => leaves[id] = Some(g),
        &Op::MatMul(a, b) => {
            let (av, bv) = (val(a), val(b));
            let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
            if needs(a) {
                let mut da = vec![0.0; m * k];
                gemm(m, n, k, g.data(), false, bv.data(), true, &mut da, false);
                accumulate(grads, nodes, a, same_shape(av.shape(), da));
            }
            if needs(b) {
                let mut db = vec![0.0; k * n];
                gemm(k, m, n, av.data(), true, g.data(), false, &mut db, false);
                accumulate(grads, nodes, b, same_shape(bv.shape(), db));
            }
        }
        &Op::Add(a, b) => {
            accumulate(grads, nodes, a, g.clone());
            accumulate(grads, nodes, b, g);
        }
        &Op::Sub(a, b) => {
            accumulate(grads, nodes, b, g.map(|v| -v));
            accumulate(grads, nodes, a, g);
        }
        &Op::Mul(a, b) => {
            let (av, bv) = (val(a), val(b));
            if needs(a) {
                let d = g.data().iter().zip(bv.data()).map(|(g, y)| g * y).collect();
                accumulate(grads, nodes, a, same_shape(av.shape(), d));
            }
            if needs(b) {
                let d = g.data().iter().zip(av.data()).map(|(g, x)| g * x).collect();
                accumulate(grads, nodes, b, same_shape(bv.shape(), d));
            }
        }
        &Op::Scale(a, c) => accumulate(grads, nodes, a, g.map(|v| v * c)),
        &Op::AddScalar(a) => accumulate(grads, nodes, a, g),
        &Op::AddBias(x, b) => {
            let bv = val(b);
            if needs(b) {
                let d = bv.len();
                let mut db = vec![0.0; d];
                for row in g.data().chunks(d) {
                    for (acc, v) in db.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
                accumulate(grads, nodes, b, same_shape(bv.shape(), db));
            }
            accumulate(grads, nodes, x, g);
        }
        &Op::Relu(a) => {
            let d = g
                .data()
                .iter()
                .zip(val(a).data())
                .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                .collect();
            accumulate(grads, nodes, a, same_shape(out.shape(), d));
        }
        &Op::Exp(a) => {
            let d = g.data().iter().zip(out.data()).map(|(g, y)| g * y).collect();
            accumulate(grads, nodes, a, same_shape(out.shape(), d));
        }
        &Op::Ln(a) => {
            let d = g.data().iter().zip(val(a).data()).map(|(g, x)| g / x).collect();
            accumulate(grads, nodes, a, same_shape(out.shape(), d));
        }
        &Op::Powf(a, p) => {
            let d = g
                .data()
                .iter()
                .zip(val(a).data())
                .map(|(g, x)| g * p * x.powf(p - 1.0))
                .collect();
            accumulate(grads, nodes, a, same_shape(out.shape(), d));
        }
        &Op::Sum(a) => {
            let av = val(a);
            accumulate(grads, nodes, a, Tensor::full(av.shape(), g.item()));
        }
        &Op::SumRows(a) => {
            let av = val(a);
            let cols = av.cols();
            let mut d = Vec::with_capacity(av.len());
            for &gi in g.data() {
                d.extend(std::iter::repeat_n(gi, cols));
            }
            accumulate(grads, nodes, a, same_shape(av.shape(), d));
        }
        &Op::SumCols(a) => {
            let av = val(a);
            let d = (0..av.rows()).flat_map(|_| g.data().iter().copied()).collect();
            accumulate(grads, nodes, a, same_shape(av.shape(), d));
        }
        &Op::RowSoftmax(a) => {
            let cols = out.cols();
            let mut d = vec![0.0; out.len()];
            for ((dr, yr), gr) in d
                .chunks_mut(cols)
                .zip(out.data().chunks(cols))
                .zip(g.data().chunks(cols))
            {
                let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                for ((dv, y), gv) in dr.iter_mut().zip(yr).zip(gr) {
                    *dv = y * (gv - dot);
                }
            }
            accumulate(grads, nodes, a, same_shape(out.shape(), d));
        }
        &Op::LogRowSoftmax(a) => {
            let cols = out.cols();
            let mut d = vec![0.0; out.len()];
            for ((dr, yr), gr) in d
                .chunks_mut(cols)
                .zip(out.data().chunks(cols))
                .zip(g.data().chunks(cols))
            {
                let total: f64 = gr.iter().sum();
                for ((dv, y), gv) in dr.iter_mut().zip(yr).zip(gr) {
                    *dv = gv - y.exp() * total;
                }
            }
            accumulate(grads, nodes, a, same_shape(out.shape(), d));
        }
        &Op::RowLogSumExp(a) => {
            let av = val(a);
            let cols = av.cols();
            let mut d = vec![0.0; av.len()];
            for (i, (dr, xr)) in d.chunks_mut(cols).zip(av.data().chunks(cols)).enumerate() {
                let lse = out.data()[i];
                let gi = g.data()[i];
                for (dv, x) in dr.iter_mut().zip(xr) {
                    *dv = gi * (x - lse).exp();
                }
            }
            accumulate(grads, nodes, a, same_shape(av.shape(), d));
        }
        Op::L2NormalizeRows(a, norms) => {
            let cols = out.cols();
            let mut d = vec![0.0; out.len()];
            for (i, ((dr, yr), gr)) in d
                .chunks_mut(cols)
                .zip(out.data().chunks(cols))
                .zip(g.data().chunks(cols))
                .enumerate()
            {
                let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                for ((dv, y), gv) in dr.iter_mut().zip(yr).zip(gr) {
                    *dv = (gv - y * dot) / norms[i];
                }
            }
            accumulate(grads, nodes, *a, same_shape(out.shape(), d));
        }
        Op::RowNormalize(a, sums) => {
            let cols = out.cols();
            let mut d = vec![0.0; out.len()];
            for (i, ((dr, yr), gr)) in d
                .chunks_mut(cols)
                .zip(out.data().chunks(cols))
                .zip(g.data().chunks(cols))
                .enumerate()
            {
                let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                for (dv, gv) in dr.iter_mut().zip(gr) {
                    *dv = (gv - dot) / sums[i];
                }
            }
            accumulate(grads, nodes, *a, same_shape(out.shape(), d));
        }
        &Op::Transpose(a) => {
            accumulate(grads, nodes, a, g.transpose().expect("2-D gradient"));
        }
        &Op::Diag(a) => {
            let n = out.rows();
            let mut d = Tensor::zeros(&[n, n]);
            for i in 0..n {
                d.data_mut()[i * n + i] = g.data()[i];
            }
            accumulate(grads, nodes, a, d);
        }
        &Op::ConcatCols(a, b) => {
            let (av, bv) = (val(a), val(b));
            let (p, q) = (av.cols(), bv.cols());
            let mut da = Vec::with_capacity(av.len());
            let mut db = Vec::with_capacity(bv.len());
            for row in g.data().chunks(p + q) {
                da.extend_from_slice(&row[..p]);
                db.extend_from_slice(&row[p..]);
            }
            accumulate(grads, nodes, a, same_shape(av.shape(), da));
            accumulate(grads, nodes, b, same_shape(bv.shape(), db));
        }
        &Op::Reshape(a) => {
            let shape = val(a).shape().to_vec();
            accumulate(grads, nodes, a, same_shape(&shape, g.into_data()));
        }
        &Op::PairwiseSqDist(a, b) => {
            let (av, bv) = (val(a), val(b));
            let (n, m, dim) = (av.rows(), bv.rows(), av.cols());
            let mut da = vec![0.0; av.len()];
            let mut db = vec![0.0; bv.len()];
            for i in 0..n {
                for j in 0..m {
                    let gij = 2.0 * g.data()[i * m + j];
                    for c in 0..dim {
                        let diff = av.data()[i * dim + c] - bv.data()[j * dim + c];
                        da[i * dim + c] += gij * diff;
                        db[j * dim + c] -= gij * diff;
                    }
                }
            }
            if needs(a) {
                accumulate(grads, nodes, a, same_shape(av.shape(), da));
            }
            if needs(b) {
                accumulate(grads, nodes, b, same_shape(bv.shape(), db));
            }
        }
        &Op::Conv2d {
            input,
            kernel,
            stride,
        } => {
            let (xv, kv) = (val(input), val(kernel));
            let geo = ConvGeometry::new(xv.shape(), kv.shape(), stride).expect("validated in forward");
            let (dx, dk) = geo.backward(xv.data(), kv.data(), g.data());
            if needs(input) {
                accumulate(grads, nodes, input, same_shape(xv.shape(), dx));
            }
            if needs(kernel) {
                accumulate(grads, nodes, kernel, same_shape(kv.shape(), dk));
            }
        }
        Op::MaxPool2 { input, argmax } => {
            let xv = val(*input);
            let mut d = vec![0.0; xv.len()];
            for (&src, gv) in argmax.iter().zip(g.data()) {
                d[src] += gv;
            }
            accumulate(grads, nodes, *input, same_shape(xv.shape(), d));
        }
    }
}

/// Leaf gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: HashMap<String, usize>,
}

impl Gradients {
    pub fn get(&self, v: Var<'_>) -> Option<&Tensor> {
        self.grads.get(v.id).and_then(Option::as_ref)
    }

    /// Gradient of `v`, zero when the loss does not depend on it.
    pub fn wrt(&self, v: Var<'_>) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(v.value().shape()))
    }

    /// Gradient of a parameter bound with [`Tape::param`].
    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params
            .get(name)
            .and_then(|&id| self.grads.get(id))
            .and_then(Option::as_ref)
    }
}

struct ConvGeometry {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
}

impl ConvGeometry {
    fn new(input: &[usize], kernel: &[usize], stride: usize) -> Result<Self> {
        if input.len() != 4 || kernel.len() != 4 || input[1] != kernel[1] {
            return Err(Error::dim("conv2d", input, kernel));
        }
        if stride == 0 {
            return Err(Error::Contract("conv2d stride must be positive".into()));
        }
        let (n, c, h, w) = (input[0], input[1], input[2], input[3]);
        let (f, kh, kw) = (kernel[0], kernel[2], kernel[3]);
        if kh > h || kw > w {
            return Err(Error::dim("conv2d", input, kernel));
        }
        Ok(Self {
            n,
            c,
            h,
            w,
            f,
            kh,
            kw,
            oh: (h - kh) / stride + 1,
            ow: (w - kw) / stride + 1,
            stride,
        })
    }

    fn out_shape(&self) -> Vec<usize> {
        vec![self.n, self.f, self.oh, self.ow]
    }

    fn forward(&self, x: &[f64], k: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.f * self.oh * self.ow];
        for b in 0..self.n {
            for f in 0..self.f {
                for oy in 0..self.oh {
                    for ox in 0..self.ow {
                        let mut acc = 0.0;
                        for c in 0..self.c {
                            for ky in 0..self.kh {
                                let iy = oy * self.stride + ky;
                                let xrow = ((b * self.c + c) * self.h + iy) * self.w + ox * self.stride;
                                let krow = ((f * self.c + c) * self.kh + ky) * self.kw;
                                for kx in 0..self.kw {
                                    acc += x[xrow + kx] * k[krow + kx];
                                }
                            }
                        }
                        out[((b * self.f + f) * self.oh + oy) * self.ow + ox] = acc;
                    }
                }
            }
        }
        out
    }

    fn backward(&self, x: &[f64], k: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut dx = vec![0.0; x.len()];
        let mut dk = vec![0.0; k.len()];
        for b in 0..self.n {
            for f in 0..self.f {
                for oy in 0..self.oh {
                    for ox in 0..self.ow {
                        let gv = g[((b * self.f + f) * self.oh + oy) * self.ow + ox];
                        if gv == 0.0 {
                            continue;
                        }
                        for c in 0..self.c {
                            for ky in 0..self.kh {
                                let iy = oy * self.stride + ky;
                                let xrow = ((b * self.c + c) * self.h + iy) * self.w + ox * self.stride;
                                let krow = ((f * self.c + c) * self.kh + ky) * self.kw;
                                for kx in 0..self.kw {
                                    dx[xrow + kx] += gv * k[krow + kx];
                                    dk[krow + kx] += gv * x[xrow + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        (dx, dk)
    }
}

fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(op, a.shape(), b.shape()));
    }
    Ok(())
}

fn check_matrix(op: &'static str, a: &Tensor) -> Result<()> {
    if a.shape().len() != 2 {
        return Err(Error::dim(op, a.shape(), &[]));
    }
    Ok(())
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    /// Same value recorded as a constant; gradients stop here.
    pub fn detach(&self) -> Var<'t> {
        self.tape.record(self.value(), Op::Leaf, false)
    }

    fn unary(
        self,
        name: &'static str,
        f: impl Fn(f64) -> f64,
        op: impl FnOnce(usize) -> Op,
    ) -> Result<Var<'t>> {
        let out = self.value().map(f);
        self.tape.push(name, out, op(self.id), &[self.id])
    }

    fn zip(
        self,
        other: Var<'t>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        check_same(name, &a, &b)?;
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(a.shape().to_vec(), data)?;
        self.tape.push(name, out, op, &[self.id, other.id])
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        if a.shape().len() != 2 || b.shape().len() != 2 || a.shape()[1] != b.shape()[0] {
            return Err(Error::dim("matmul", a.shape(), b.shape()));
        }
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut c = vec![0.0; m * n];
        gemm(m, k, n, a.data(), false, b.data(), false, &mut c, false);
        let out = Tensor::matrix(m, n, c)?;
        self.tape
            .push("matmul", out, Op::MatMul(self.id, other.id), &[self.id, other.id])
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.zip(other, "add", |x, y| x + y, Op::Add(self.id, other.id))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.zip(other, "sub", |x, y| x - y, Op::Sub(self.id, other.id))
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.zip(other, "mul", |x, y| x * y, Op::Mul(self.id, other.id))
    }

    pub fn scale(self, c: f64) -> Result<Var<'t>> {
        self.unary("scale", |x| x * c, |id| Op::Scale(id, c))
    }

    pub fn add_scalar(self, c: f64) -> Result<Var<'t>> {
        self.unary("add_scalar", |x| x + c, Op::AddScalar)
    }

    pub fn square(self) -> Result<Var<'t>> {
        self.mul(self)
    }

    /// Adds a length-`D` bias to every row of an `N×D` matrix.
    pub fn add_bias(self, bias: Var<'t>) -> Result<Var<'t>> {
        let (x, b) = (self.value(), bias.value());
        check_matrix("add_bias", &x)?;
        let d = x.shape()[1];
        if b.len() != d {
            return Err(Error::dim("add_bias", x.shape(), b.shape()));
        }
        let mut out = (*x).clone();
        for row in out.data_mut().chunks_mut(d) {
            for (v, bv) in row.iter_mut().zip(b.data()) {
                *v += bv;
            }
        }
        self.tape
            .push("add_bias", out, Op::AddBias(self.id, bias.id), &[self.id, bias.id])
    }

    pub fn relu(self) -> Result<Var<'t>> {
        self.unary("relu", |x| x.max(0.0), Op::Relu)
    }

    pub fn exp(self) -> Result<Var<'t>> {
        self.unary("exp", f64::exp, Op::Exp)
    }

    pub fn ln(self) -> Result<Var<'t>> {
        self.unary("ln", f64::ln, Op::Ln)
    }

    pub fn powf(self, p: f64) -> Result<Var<'t>> {
        self.unary("powf", |x| x.powf(p), |id| Op::Powf(id, p))
    }

    /// Sum of every entry, as a scalar.
    pub fn sum(self) -> Result<Var<'t>> {
        let total = self.value().data().iter().sum();
        self.tape
            .push("sum", Tensor::scalar(total), Op::Sum(self.id), &[self.id])
    }

    pub fn mean(self) -> Result<Var<'t>> {
        let n = self.value().len() as f64;
        self.sum()?.scale(1.0 / n)
    }

    /// `N×K -> N×1`.
    pub fn sum_rows(self) -> Result<Var<'t>> {
        let x = self.value();
        check_matrix("sum_rows", &x)?;
        let out: Vec<f64> = x.data().chunks(x.cols()).map(|r| r.iter().sum()).collect();
        let out = Tensor::matrix(x.rows(), 1, out)?;
        self.tape.push("sum_rows", out, Op::SumRows(self.id), &[self.id])
    }

    /// `N×K -> 1×K`.
    pub fn sum_cols(self) -> Result<Var<'t>> {
        let x = self.value();
        check_matrix("sum_cols", &x)?;
        let k = x.cols();
        let mut out = vec![0.0; k];
        for row in x.data().chunks(k) {
            for (acc, v) in out.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let out = Tensor::matrix(1, k, out)?;
        self.tape.push("sum_cols", out, Op::SumCols(self.id), &[self.id])
    }

    /// Max-shifted softmax over each row.
    pub fn row_softmax(self) -> Result<Var<'t>> {
        let x = self.value();
        check_matrix("row_softmax", &x)?;
        let mut out = (*x).clone();
        for row in out.data_mut().chunks_mut(x.cols()) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        self.tape
            .push("row_softmax", out, Op::RowSoftmax(self.id), &[self.id])
    }

    pub fn log_row_softmax(self) -> Result<Var<'t>> {
        let x = self.value();
        check_matrix("log_row_softmax", &x)?;
        let mut out = (*x).clone();
        for row in out.data_mut().chunks_mut(x.cols()) {
            let lse = logsumexp(row);
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        self.tape
            .push("log_row_softmax", out, Op::LogRowSoftmax(self.id), &[self.id])
    }

    /// `N×K -> N×1` stable `ln Σ_j exp(x_ij)`.
    pub fn row_logsumexp(self) -> Result<Var<'t>> {
        let x = self.value();
        check_matrix("row_logsumexp", &x)?;
        let out: Vec<f64> = x.data().chunks(x.cols()).map(logsumexp).collect();
        let out = Tensor::matrix(x.rows(), 1, out)?;
        self.tape
            .push("row_logsumexp", out, Op::RowLogSumExp(self.id), &[self.id])
    }

    /// Scales every row to unit Euclidean norm.
    pub fn l2_normalize_rows(self) -> Result<Var<'t>> {
        let x = self.value();
        check_matrix("l2_normalize_rows", &x)?;
        let mut out = (*x).clone();
        let mut norms = Vec::with_capacity(x.rows());
        for (i, row) in out.data_mut().chunks_mut(x.cols()).enumerate() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < NORM_EPS {
                return Err(Error::DegenerateRow {
                    op: "l2_normalize_rows",
                    row: i,
                    norm,
                });
            }
            row.iter_mut().for_each(|v| *v /= norm);
            norms.push(norm);
        }
        self.tape.push(
            "l2_normalize_rows",
            out,
            Op::L2NormalizeRows(self.id, norms),
            &[self.id],
        )
    }

    /// Divides every row by its sum. Row sums must be positive.
    pub fn row_normalize(self) -> Result<Var<'t>> {
        let x = self.value();
        check_matrix("row_normalize", &x)?;
        let mut out = (*x).clone();
        let mut sums = Vec::with_capacity(x.rows());
        for (i, row) in out.data_mut().chunks_mut(x.cols()).enumerate() {
            let s: f64 = row.iter().sum();
            if s <= 0.0 {
                return Err(Error::DegenerateRow {
                    op: "row_normalize",
                    row: i,
                    norm: s,
                });
            }
            row.iter_mut().for_each(|v| *v /= s);
            sums.push(s);
        }
        self.tape
            .push("row_normalize", out, Op::RowNormalize(self.id, sums), &[self.id])
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        let out = self.value().transpose()?;
        self.tape.push("transpose", out, Op::Transpose(self.id), &[self.id])
    }

    /// Diagonal of a square matrix as an `N×1` column.
    pub fn diag(self) -> Result<Var<'t>> {
        let x = self.value();
        if x.shape().len() != 2 || x.shape()[0] != x.shape()[1] {
            return Err(Error::dim("diag", x.shape(), &[]));
        }
        let n = x.rows();
        let out = Tensor::matrix(n, 1, (0..n).map(|i| x.at(i, i)).collect())?;
        self.tape.push("diag", out, Op::Diag(self.id), &[self.id])
    }

    /// `[self | other]` along columns.
    pub fn concat_cols(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        check_matrix("concat_cols", &a)?;
        check_matrix("concat_cols", &b)?;
        if a.rows() != b.rows() {
            return Err(Error::dim("concat_cols", a.shape(), b.shape()));
        }
        let mut data = Vec::with_capacity(a.len() + b.len());
        for i in 0..a.rows() {
            data.extend_from_slice(a.row(i));
            data.extend_from_slice(b.row(i));
        }
        let out = Tensor::matrix(a.rows(), a.cols() + b.cols(), data)?;
        self.tape.push(
            "concat_cols",
            out,
            Op::ConcatCols(self.id, other.id),
            &[self.id, other.id],
        )
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let out = self.value().reshape(shape)?;
        self.tape.push("reshape", out, Op::Reshape(self.id), &[self.id])
    }

    /// Collapses every trailing axis: `N×… -> N×D`.
    pub fn flatten(self) -> Result<Var<'t>> {
        let x = self.value();
        self.reshape(&[x.rows(), x.cols()])
    }

    /// `D_ij = ‖a_i − b_j‖²` for `a: N×D`, `b: M×D`.
    pub fn pairwise_sq_dist(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        check_matrix("pairwise_sq_dist", &a)?;
        check_matrix("pairwise_sq_dist", &b)?;
        if a.cols() != b.cols() {
            return Err(Error::dim("pairwise_sq_dist", a.shape(), b.shape()));
        }
        let (n, m) = (a.rows(), b.rows());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[i * m + j] = a
                    .row(i)
                    .iter()
                    .zip(b.row(j))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
            }
        }
        let out = Tensor::matrix(n, m, out)?;
        self.tape.push(
            "pairwise_sq_dist",
            out,
            Op::PairwiseSqDist(self.id, other.id),
            &[self.id, other.id],
        )
    }

    /// Valid (unpadded) cross-correlation of `N×C×H×W` input with an
    /// `F×C×h×w` kernel.
    pub fn conv2d(self, kernel: Var<'t>, stride: usize) -> Result<Var<'t>> {
        let (x, k) = (self.value(), kernel.value());
        let geo = ConvGeometry::new(x.shape(), k.shape(), stride)?;
        let out = Tensor::new(geo.out_shape(), geo.forward(x.data(), k.data()))?;
        self.tape.push(
            "conv2d",
            out,
            Op::Conv2d {
                input: self.id,
                kernel: kernel.id,
                stride,
            },
            &[self.id, kernel.id],
        )
    }

    /// 2×2 max-pooling with stride 2; odd trailing rows/columns are dropped.
    pub fn max_pool2(self) -> Result<Var<'t>> {
        let x = self.value();
        let s = x.shape();
        if s.len() != 4 || s[2] < 2 || s[3] < 2 {
            return Err(Error::dim("max_pool2", s, &[2, 2]));
        }
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if x.data()[idx] > x.data()[best] {
                            best = idx;
                        }
                    }
                    out.push(x.data()[best]);
                    argmax.push(best);
                }
            }
        }
        let out = Tensor::new(vec![n, c, oh, ow], out)?;
        self.tape.push(
            "max_pool2",
            out,
            Op::MaxPool2 {
                input: self.id,
                argmax,
            },
            &[self.id],
        )
    }
}

fn logsumexp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
