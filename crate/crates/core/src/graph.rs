//! Dynamic computation graphs with reverse-mode differentiation.
//!
//! A [`Graph`] is built fresh for every sentence. Each operation appends a
//! node whose inputs are strictly earlier nodes, so construction order is a
//! topological order and [`Graph::backward`] simply walks the nodes in reverse.
//!
//! Parameters are borrowed from a [`ParamStore`] and never copied into the
//! graph; gradients come back as a [`Gradients`] value indexed by
//! [`ParamId`]. `backward` does not mutate the graph, so calling it twice on
//! the same loss yields identical gradients.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Lookup { param: ParamId, row: usize },
    Affine { w: NodeId, x: NodeId, b: Option<NodeId> },
    Add(Vec<NodeId>),
    Scale(NodeId, f64),
    Activate(Activation, NodeId),
    Hadamard(NodeId, NodeId),
    Concat(Vec<NodeId>),
    Mean(Vec<NodeId>),
    Sum(NodeId),
    Mask(NodeId, Vec<f64>),
    PickNegLogSoftmax { logits: NodeId, gold: usize, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    // Empty for `Op::Param`; the value lives in the store.
    value: Tensor,
    needs_grad: bool,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: BTreeMap<ParamId, NodeId>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph { params, nodes: Vec::new(), param_nodes: BTreeMap::new() }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        match self.nodes[id.0].op {
            Op::Param(p) => self.params.value(p),
            _ => &self.nodes[id.0].value,
        }
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id).data()[0]
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let needs_grad = match &op {
            Op::Input => false,
            Op::Param(_) | Op::Lookup { .. } => true,
            Op::Affine { w, x, b } => {
                self.needs(*w) || self.needs(*x) || b.is_some_and(|b| self.needs(b))
            }
            Op::Add(xs) | Op::Concat(xs) | Op::Mean(xs) => xs.iter().any(|&x| self.needs(x)),
            Op::Scale(x, _)
            | Op::Activate(_, x)
            | Op::Sum(x)
            | Op::Mask(x, _)
            | Op::PickNegLogSoftmax { logits: x, .. } => self.needs(*x),
            Op::Hadamard(a, b) => self.needs(*a) || self.needs(*b),
        };
        self.nodes.push(Node { op, value, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn describe(&self, id: NodeId) -> alloc::string::String {
        match self.nodes[id.0].op {
            Op::Param(p) => format!("parameter {}", self.params.name(p)),
            _ => format!("node {}", id.0),
        }
    }

    /// A constant input; receives no gradient.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, value)
    }

    /// The node standing for a whole parameter tensor. Repeated calls return
    /// the same node, so every use of a parameter shares one gradient buffer.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_nodes.get(&id) {
            return node;
        }
        let node = self.push(Op::Param(id), Tensor::zeros(0, 0));
        self.param_nodes.insert(id, node);
        node
    }

    /// Row `row` of an embedding table, as a vector.
    pub fn lookup(&mut self, param: ParamId, row: usize) -> Result<NodeId> {
        let table = self.params.value(param);
        if row >= table.rows() {
            return Err(Error::IndexOutOfRange {
                what: "embedding row",
                index: row,
                len: table.rows(),
            });
        }
        let value = Tensor::vector(table.row(row).to_vec());
        Ok(self.push(Op::Lookup { param, row }, value))
    }

    /// `W x + b`; `b` may be omitted for a plain matrix-vector product.
    pub fn affine(&mut self, w: NodeId, x: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let (wv, xv) = (self.value(w), self.value(x));
        let (m, n) = wv.shape();
        if xv.shape() != (n, 1) {
            return Err(Error::Shape {
                what: format!("affine input for {}", self.describe(w)),
                expected: (n, 1),
                found: xv.shape(),
            });
        }
        let mut out = match b {
            Some(b) => {
                let bv = self.value(b);
                if bv.shape() != (m, 1) {
                    return Err(Error::Shape {
                        what: format!("affine bias {}", self.describe(b)),
                        expected: (m, 1),
                        found: bv.shape(),
                    });
                }
                bv.data().to_vec()
            }
            None => vec![0.0; m],
        };
        let (wd, xd) = (wv.data(), xv.data());
        for (r, o) in out.iter_mut().enumerate() {
            let row = &wd[r * n..(r + 1) * n];
            *o += row.iter().zip(xd).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(self.push(Op::Affine { w, x, b }, Tensor::vector(out)))
    }

    /// Element-wise sum of equally shaped nodes.
    pub fn add(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let first = *xs.first().ok_or(Error::Empty("add"))?;
        let shape = self.value(first).shape();
        let mut out = self.value(first).data().to_vec();
        for &x in &xs[1..] {
            let v = self.value(x);
            if v.shape() != shape {
                return Err(Error::Shape { what: "add".into(), expected: shape, found: v.shape() });
            }
            for (o, a) in out.iter_mut().zip(v.data()) {
                *o += a;
            }
        }
        let value = Tensor::from_vec(shape.0, shape.1, out)?;
        Ok(self.push(Op::Add(xs.to_vec()), value))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let v = self.value(x);
        let data = v.data().iter().map(|a| a * factor).collect();
        let value = Tensor::from_vec(v.rows(), v.cols(), data).expect("same shape");
        self.push(Op::Scale(x, factor), value)
    }

    pub fn activate(&mut self, kind: Activation, x: NodeId) -> NodeId {
        let v = self.value(x);
        let f = match kind {
            Activation::Sigmoid => math::sigmoid,
            Activation::Tanh => math::tanh,
        };
        let data = v.data().iter().map(|&a| f(a)).collect();
        let value = Tensor::from_vec(v.rows(), v.cols(), data).expect("same shape");
        self.push(Op::Activate(kind, x), value)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.activate(Activation::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.activate(Activation::Tanh, x)
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::Shape {
                what: "hadamard".into(),
                expected: av.shape(),
                found: bv.shape(),
            });
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::from_vec(av.rows(), av.cols(), data)?;
        Ok(self.push(Op::Hadamard(a, b), value))
    }

    /// Stacks vectors end to end.
    pub fn concat(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(Error::Empty("concat"));
        }
        let mut out = Vec::new();
        for &x in xs {
            let v = self.value(x);
            if !v.is_vector() {
                return Err(Error::Shape {
                    what: "concat operand".into(),
                    expected: (v.len(), 1),
                    found: v.shape(),
                });
            }
            out.extend_from_slice(v.data());
        }
        Ok(self.push(Op::Concat(xs.to_vec()), Tensor::vector(out)))
    }

    /// Element-wise mean of equally shaped vectors.
    pub fn mean(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let first = *xs.first().ok_or(Error::Empty("mean"))?;
        let len = self.value(first).len();
        let mut out = vec![0.0; len];
        for &x in xs {
            let v = self.value(x);
            if v.shape() != (len, 1) {
                return Err(Error::Shape { what: "mean".into(), expected: (len, 1), found: v.shape() });
            }
            add_into(&mut out, v.data());
        }
        let n = xs.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        Ok(self.push(Op::Mean(xs.to_vec()), Tensor::vector(out)))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total = self.value(x).data().iter().sum();
        self.push(Op::Sum(x), Tensor::scalar(total))
    }

    /// Inverted dropout. Each element is zeroed with probability `p` and the
    /// survivors are scaled by `1 / (1 - p)`. With `rng == None` (inference)
    /// or `p == 0` the input node is returned unchanged.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: NodeId,
        p: f64,
        rng: Option<&mut R>,
    ) -> Result<NodeId> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "dropout probability must lie in [0, 1), got {p}"
            )));
        }
        let Some(rng) = rng else { return Ok(x) };
        if p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let v = self.value(x);
        let mask: Vec<f64> =
            (0..v.len()).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
        let data = v.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let value = Tensor::from_vec(v.rows(), v.cols(), data)?;
        Ok(self.push(Op::Mask(x, mask), value))
    }

    /// `-log softmax(logits)[gold]`, computed with max subtraction.
    pub fn pick_neg_log_softmax(&mut self, logits: NodeId, gold: usize) -> Result<NodeId> {
        let v = self.value(logits);
        if gold >= v.len() {
            return Err(Error::IndexOutOfRange { what: "gold class", index: gold, len: v.len() });
        }
        let probs = softmax(v.data());
        let max = v.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + math::ln(v.data().iter().map(|a| math::exp(a - max)).sum());
        let loss = log_z - v.data()[gold];
        Ok(self.push(Op::PickNegLogSoftmax { logits, gold, probs }, Tensor::scalar(loss)))
    }

    /// Gradients of the scalar `loss` with respect to every parameter. Nodes
    /// after `loss` are ignored; parameters with no path to `loss` get no
    /// entry (read as zero).
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::NonScalarLoss { rows: lv.rows(), cols: lv.cols() });
        }
        let mut out = Gradients::zeros_like(self.params);
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    let dst = out.entry(*p, self.params);
                    for (d, s) in dst.data_mut().iter_mut().zip(&g) {
                        *d += s;
                    }
                }
                Op::Lookup { param, row } => {
                    let dst = out.entry(*param, self.params);
                    for (d, s) in dst.row_mut(*row).iter_mut().zip(&g) {
                        *d += s;
                    }
                }
                Op::Affine { w, x, b } => {
                    let wv = self.value(*w);
                    let xv = self.value(*x);
                    let n = wv.cols();
                    if self.needs(*w) {
                        let gw = acc(&mut grads, *w, wv.len());
                        for (r, gr) in g.iter().enumerate() {
                            if *gr == 0.0 {
                                continue;
                            }
                            for (d, xc) in gw[r * n..(r + 1) * n].iter_mut().zip(xv.data()) {
                                *d += gr * xc;
                            }
                        }
                    }
                    if self.needs(*x) {
                        let gx = acc(&mut grads, *x, n);
                        let wd = wv.data();
                        for (r, gr) in g.iter().enumerate() {
                            if *gr == 0.0 {
                                continue;
                            }
                            for (d, wrc) in gx.iter_mut().zip(&wd[r * n..(r + 1) * n]) {
                                *d += gr * wrc;
                            }
                        }
                    }
                    if let Some(b) = b {
                        if self.needs(*b) {
                            add_into(acc(&mut grads, *b, g.len()), &g);
                        }
                    }
                }
                Op::Add(xs) => {
                    for &x in xs {
                        if self.needs(x) {
                            add_into(acc(&mut grads, x, g.len()), &g);
                        }
                    }
                }
                Op::Scale(x, f) => {
                    let gx = acc(&mut grads, *x, g.len());
                    for (d, s) in gx.iter_mut().zip(&g) {
                        *d += f * s;
                    }
                }
                Op::Activate(kind, x) => {
                    let y = node.value.data();
                    let gx = acc(&mut grads, *x, g.len());
                    match kind {
                        Activation::Sigmoid => {
                            for ((d, s), y) in gx.iter_mut().zip(&g).zip(y) {
                                *d += s * y * (1.0 - y);
                            }
                        }
                        Activation::Tanh => {
                            for ((d, s), y) in gx.iter_mut().zip(&g).zip(y) {
                                *d += s * (1.0 - y * y);
                            }
                        }
                    }
                }
                Op::Hadamard(a, b) => {
                    if self.needs(*a) {
                        let bv = self.value(*b).data();
                        let ga = acc(&mut grads, *a, g.len());
                        for ((d, s), o) in ga.iter_mut().zip(&g).zip(bv) {
                            *d += s * o;
                        }
                    }
                    if self.needs(*b) {
                        let av = self.value(*a).data();
                        let gb = acc(&mut grads, *b, g.len());
                        for ((d, s), o) in gb.iter_mut().zip(&g).zip(av) {
                            *d += s * o;
                        }
                    }
                }
                Op::Concat(xs) => {
                    let mut offset = 0;
                    for &x in xs {
                        let len = self.value(x).len();
                        if self.needs(x) {
                            add_into(acc(&mut grads, x, len), &g[offset..offset + len]);
                        }
                        offset += len;
                    }
                }
                Op::Mean(xs) => {
                    let inv = 1.0 / xs.len() as f64;
                    for &x in xs {
                        if self.needs(x) {
                            let gx = acc(&mut grads, x, g.len());
                            for (d, s) in gx.iter_mut().zip(&g) {
                                *d += s * inv;
                            }
                        }
                    }
                }
                Op::Sum(x) => {
                    let len = self.value(*x).len();
                    for d in acc(&mut grads, *x, len).iter_mut() {
                        *d += g[0];
                    }
                }
                Op::Mask(x, mask) => {
                    let gx = acc(&mut grads, *x, g.len());
                    for ((d, s), m) in gx.iter_mut().zip(&g).zip(mask) {
                        *d += s * m;
                    }
                }
                Op::PickNegLogSoftmax { logits, gold, probs } => {
                    let gl = acc(&mut grads, *logits, probs.len());
                    for (k, (d, p)) in gl.iter_mut().zip(probs).enumerate() {
                        let target = if k == *gold { 1.0 } else { 0.0 };
                        *d += g[0] * (p - target);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|a| math::exp(a - max)).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Per-parameter gradients produced by [`Graph::backward`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamStore) -> Self {
        Gradients { grads: vec![None; params.len()] }
    }

    fn entry(&mut self, id: ParamId, params: &ParamStore) -> &mut Tensor {
        self.grads[id.0].get_or_insert_with(|| {
            let (r, c) = params.value(id).shape();
            Tensor::zeros(r, c)
        })
    }

    /// Gradient of a parameter, or `None` when it was not reached.
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient element, zero when the parameter was not reached.
    pub fn element(&self, id: ParamId, index: usize) -> f64 {
        self.get(id).map_or(0.0, |t| t.data()[index])
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().enumerate().filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Tensor)> {
        self.grads
            .iter_mut()
            .enumerate()
            .filter_map(|(i, g)| g.as_mut().map(|g| (ParamId(i), g)))
    }

    /// Sets the gradient of one parameter (used by tests and the optimizer).
    pub fn set(&mut self, id: ParamId, grad: Tensor) {
        self.grads[id.0] = Some(grad);
    }

    /// Euclidean norm over all parameters jointly.
    pub fn global_norm(&self) -> f64 {
        math::sqrt(self.iter().map(|(_, g)| g.squared_norm()).sum())
    }
}
