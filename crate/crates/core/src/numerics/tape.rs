//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends one node whose inputs were recorded earlier, so the
//! node list is already in topological order and [`Tape::backward`] is a single
//! reverse sweep. The tape is not consumed by `backward`: the same recording
//! can be differentiated again from another root, and each call returns a fresh
//! [`Gradients`] table. Drop the tape to release its memory.

use super::rng::Rng;
use super::tensor::{
    axis_split, check_finite, gemm, layer_norm_forward, log_softmax_in_place, softmax_in_place,
    Layout, Tensor,
};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Storage<'a> {
    Owned(Vec<f64>),
    Borrowed(&'a [f64]),
}

impl Storage<'_> {
    fn as_slice(&self) -> &[f64] {
        match self {
            Storage::Owned(v) => v,
            Storage::Borrowed(s) => s,
        }
    }
}

/// Batched attention geometry: `batch` independent blocks of `q_len` queries
/// over `k_len` keys, with an `allowed[b][i][j]` visibility table.
#[derive(Debug, Clone)]
pub struct AttentionGeometry {
    pub batch: usize,
    pub q_len: usize,
    pub k_len: usize,
    pub heads: usize,
    pub allowed: Vec<bool>,
}

enum Op {
    Leaf,
    MatMul { a: Var, b: Var, b_layout: Layout },
    Add { a: Var, b: Var },
    AddRow { x: Var, row: Var },
    Mul { a: Var, b: Var },
    Scale { x: Var, factor: f64 },
    Relu { x: Var },
    Sum { x: Var },
    Softmax { x: Var, axis: usize },
    LogSoftmax { x: Var, axis: usize },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Attention { q: Var, k: Var, v: Var, geometry: AttentionGeometry, probs: Vec<f64> },
    Gather { table: Var, ids: Vec<usize> },
    MaskMul { x: Var, mask: Vec<f64> },
    SmoothedCe { logits: Var, targets: Vec<usize>, epsilon: f64, pad_id: usize, denom: f64, probs: Vec<f64> },
}

struct Node<'a> {
    shape: Vec<usize>,
    value: Storage<'a>,
    op: Op,
    requires_grad: bool,
}

/// Recording of primitive applications. Leaves may borrow parameter storage
/// for the lifetime `'a`, so binding a large parameter store costs no copies.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients produced by one backward sweep, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            shape,
            value: Storage::Owned(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.as_slice()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        Tensor::from_parts_unchecked(self.shape(v).to_vec(), self.value(v).to_vec())
    }

    fn dims2(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        match *self.shape(v) {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Dimension {
                op,
                lhs: self.shape(v).to_vec(),
                rhs: vec![],
            }),
        }
    }

    /// Owned leaf.
    pub fn leaf(&mut self, t: Tensor, requires_grad: bool) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t, false)
    }

    /// Leaf that borrows `t` and requests a gradient.
    pub fn param(&mut self, t: &'a Tensor) -> Var {
        self.borrowed(t, true)
    }

    pub fn borrowed(&mut self, t: &'a Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            shape: t.shape().to_vec(),
            value: Storage::Borrowed(t.data()),
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, Layout::Normal)
    }

    /// `a · bᵀ` with `b` stored row-major as `n x k`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, Layout::Transposed)
    }

    fn matmul_impl(&mut self, a: Var, b: Var, b_layout: Layout) -> Result<Var> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (br, bc) = self.dims2(b, "matmul")?;
        let (k2, n) = match b_layout {
            Layout::Normal => (br, bc),
            Layout::Transposed => (bc, br),
        };
        if k != k2 {
            return Err(Error::Dimension {
                op: "matmul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a), Layout::Normal, self.value(b), b_layout, &mut out, 0.0);
        check_finite("matmul", &out)?;
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(vec![m, n], out, Op::MatMul { a, b, b_layout }, rg))
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        check_finite("add", &out)?;
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add { a, b }, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        check_finite("mul", &out)?;
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Mul { a, b }, rg))
    }

    /// Adds a length-`d` vector to every row of an `n x d` matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (_, d) = self.dims2(x, "add_row")?;
        let rv = self.value(row);
        if rv.len() != d {
            return Err(Error::Dimension {
                op: "add_row",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(row).to_vec(),
            });
        }
        let mut out = self.value(x).to_vec();
        for chunk in out.chunks_exact_mut(d) {
            for (o, r) in chunk.iter_mut().zip(rv) {
                *o += r;
            }
        }
        check_finite("add_row", &out)?;
        let rg = self.requires_grad(x) || self.requires_grad(row);
        Ok(self.push(self.shape(x).to_vec(), out, Op::AddRow { x, row }, rg))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let out: Vec<f64> = self.value(x).iter().map(|v| v * factor).collect();
        check_finite("scale", &out)?;
        let rg = self.requires_grad(x);
        Ok(self.push(self.shape(x).to_vec(), out, Op::Scale { x, factor }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out: Vec<f64> = self.value(x).iter().map(|&v| v.max(0.0)).collect();
        let rg = self.requires_grad(x);
        self.push(self.shape(x).to_vec(), out, Op::Relu { x }, rg)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s: f64 = self.value(x).iter().sum();
        check_finite("sum", &[s])?;
        let rg = self.requires_grad(x);
        Ok(self.push(vec![1], vec![s], Op::Sum { x }, rg))
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let (outer, len, inner) = axis_split(self.shape(x), axis)?;
        let mut out = self.value(x).to_vec();
        softmax_in_place(&mut out, outer, len, inner);
        check_finite("softmax", &out)?;
        let rg = self.requires_grad(x);
        Ok(self.push(self.shape(x).to_vec(), out, Op::Softmax { x, axis }, rg))
    }

    pub fn log_softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let (outer, len, inner) = axis_split(self.shape(x), axis)?;
        let mut out = self.value(x).to_vec();
        log_softmax_in_place(&mut out, outer, len, inner);
        check_finite("log_softmax", &out)?;
        let rg = self.requires_grad(x);
        Ok(self.push(self.shape(x).to_vec(), out, Op::LogSoftmax { x, axis }, rg))
    }

    /// Row-wise layer normalisation of an `n x d` matrix.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (n, d) = self.dims2(x, "layer_norm")?;
        if self.value(gain).len() != d || self.value(bias).len() != d {
            return Err(Error::Dimension {
                op: "layer_norm",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(gain).to_vec(),
            });
        }
        let mut out = vec![0.0; n * d];
        let mut xhat = vec![0.0; n * d];
        let mut inv_std = vec![0.0; n];
        layer_norm_forward(
            self.value(x),
            self.value(gain),
            self.value(bias),
            eps,
            d,
            &mut out,
            &mut xhat,
            &mut inv_std,
        );
        check_finite("layer_norm", &out)?;
        let rg = self.requires_grad(x) || self.requires_grad(gain) || self.requires_grad(bias);
        Ok(self.push(
            vec![n, d],
            out,
            Op::LayerNorm { x, gain, bias, xhat, inv_std },
            rg,
        ))
    }

    /// Multi-head scaled dot-product attention.
    ///
    /// `q` is `(batch·q_len) x d`, `k` and `v` are `(batch·k_len) x d`; heads split
    /// the feature axis into contiguous blocks of `d / heads`. Disallowed keys get
    /// probability exactly zero; a query with no allowed key outputs zeros.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, geometry: AttentionGeometry) -> Result<Var> {
        let (qr, d) = self.dims2(q, "attention")?;
        let (kr, kd) = self.dims2(k, "attention")?;
        let AttentionGeometry { batch, q_len, k_len, heads, .. } = geometry;
        if self.shape(k) != self.shape(v)
            || kd != d
            || qr != batch * q_len
            || kr != batch * k_len
            || heads == 0
            || d % heads != 0
            || geometry.allowed.len() != batch * q_len * k_len
        {
            return Err(Error::Dimension {
                op: "attention",
                lhs: self.shape(q).to_vec(),
                rhs: self.shape(k).to_vec(),
            });
        }
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let mut probs = vec![0.0; batch * heads * q_len * k_len];
        let mut out = vec![0.0; qr * d];
        let mut scores = vec![0.0; k_len];
        for b in 0..batch {
            for h in 0..heads {
                let off = h * dh;
                for i in 0..q_len {
                    let qrow = &qv[(b * q_len + i) * d + off..][..dh];
                    let allowed = &geometry.allowed[(b * q_len + i) * k_len..][..k_len];
                    let mut max = f64::NEG_INFINITY;
                    for j in 0..k_len {
                        if allowed[j] {
                            let krow = &kv[(b * k_len + j) * d + off..][..dh];
                            let s = scale * dot(qrow, krow);
                            scores[j] = s;
                            max = max.max(s);
                        }
                    }
                    if max == f64::NEG_INFINITY {
                        continue;
                    }
                    let p = &mut probs[((b * heads + h) * q_len + i) * k_len..][..k_len];
                    let mut z = 0.0;
                    for j in 0..k_len {
                        if allowed[j] {
                            let e = (scores[j] - max).exp();
                            p[j] = e;
                            z += e;
                        }
                    }
                    let orow = &mut out[(b * q_len + i) * d + off..][..dh];
                    for j in 0..k_len {
                        if allowed[j] {
                            p[j] /= z;
                            let vrow = &vv[(b * k_len + j) * d + off..][..dh];
                            axpy(p[j], vrow, orow);
                        }
                    }
                }
            }
        }
        check_finite("attention", &out)?;
        let rg = self.requires_grad(q) || self.requires_grad(k) || self.requires_grad(v);
        Ok(self.push(vec![qr, d], out, Op::Attention { q, k, v, geometry, probs }, rg))
    }

    /// Row lookup: output row `r` is `table[ids[r]]`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (vocab, d) = self.dims2(table, "gather_rows")?;
        if ids.is_empty() {
            return Err(Error::Empty("gather_rows ids"));
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= vocab {
                return Err(Error::IdOutOfRange { id, size: vocab });
            }
            out.extend_from_slice(&tv[id * d..(id + 1) * d]);
        }
        let rg = self.requires_grad(table);
        Ok(self.push(vec![ids.len(), d], out, Op::Gather { table, ids: ids.to_vec() }, rg))
    }

    /// Inverted dropout. Returns `x` itself when inactive, so inference mode is
    /// bitwise the identity.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: &mut Rng, training: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep_scale = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(x).len())
            .map(|_| if rng.uniform() < rate { 0.0 } else { keep_scale })
            .collect();
        let out: Vec<f64> = self.value(x).iter().zip(&mask).map(|(a, m)| a * m).collect();
        let rg = self.requires_grad(x);
        Ok(self.push(self.shape(x).to_vec(), out, Op::MaskMul { x, mask }, rg))
    }

    /// Label-smoothed cross-entropy averaged over the non-pad positions.
    pub fn label_smoothed_cross_entropy(
        &mut self,
        logits: Var,
        targets: &[usize],
        epsilon: f64,
        pad_id: usize,
    ) -> Result<Var> {
        let count = targets.iter().filter(|&&t| t != pad_id).count();
        if count == 0 {
            return Err(Error::Empty("cross-entropy targets (all padding)"));
        }
        self.smoothed_ce(logits, targets, epsilon, pad_id, count as f64)
    }

    /// Label-smoothed cross-entropy summed over non-pad positions and divided by
    /// an explicit `denom` (used to normalise over a whole batch).
    pub fn smoothed_ce(
        &mut self,
        logits: Var,
        targets: &[usize],
        epsilon: f64,
        pad_id: usize,
        denom: f64,
    ) -> Result<Var> {
        let (rows, vocab) = self.dims2(logits, "cross_entropy")?;
        if targets.len() != rows {
            return Err(Error::Dimension {
                op: "cross_entropy",
                lhs: self.shape(logits).to_vec(),
                rhs: vec![targets.len()],
            });
        }
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::invalid(format!("label smoothing {epsilon} outside [0, 1)")));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= vocab) {
            return Err(Error::IdOutOfRange { id: bad, size: vocab });
        }
        let mut probs = self.value(logits).to_vec();
        let uniform = epsilon / vocab as f64;
        let mut total = 0.0;
        for (r, row) in probs.chunks_exact_mut(vocab).enumerate() {
            let t = targets[r];
            if t == pad_id {
                continue;
            }
            log_softmax_in_place(row, 1, vocab, 1);
            let sum_logp: f64 = row.iter().sum();
            total += -(1.0 - epsilon) * row[t] - uniform * sum_logp;
            row.iter_mut().for_each(|v| *v = v.exp());
        }
        let loss = total / denom;
        check_finite("cross_entropy", &[loss])?;
        let rg = self.requires_grad(logits);
        Ok(self.push(
            vec![1],
            vec![loss],
            Op::SmoothedCe { logits, targets: targets.to_vec(), epsilon, pad_id, denom, probs },
            rg,
        ))
    }

    /// Reverse sweep from a single-element `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).len() != 1 {
            return Err(Error::invalid(format!(
                "backward requires a scalar root, got shape {:?}",
                self.shape(root)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::new();
        grads.resize_with(root.0 + 1, || None);
        grads[root.0] = Some(vec![1.0]);

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<'a>, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, b_layout } => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = node.shape[1];
                if self.requires_grad(*a) {
                    // dA = G · op(B)ᵀ
                    let bl = match b_layout {
                        Layout::Normal => Layout::Transposed,
                        Layout::Transposed => Layout::Normal,
                    };
                    let ga = slot(grads, *a, m * k);
                    gemm(m, n, k, g, Layout::Normal, self.value(*b), bl, ga, 1.0);
                }
                if self.requires_grad(*b) {
                    let gb = slot(grads, *b, k * n);
                    match b_layout {
                        // dB = Aᵀ · G   (k x n)
                        Layout::Normal => {
                            gemm(k, m, n, self.value(*a), Layout::Transposed, g, Layout::Normal, gb, 1.0)
                        }
                        // dB = Gᵀ · A   (n x k)
                        Layout::Transposed => {
                            gemm(n, m, k, g, Layout::Transposed, self.value(*a), Layout::Normal, gb, 1.0)
                        }
                    }
                }
            }
            Op::Add { a, b } => {
                for v in [*a, *b] {
                    if self.requires_grad(v) {
                        add_into(slot(grads, v, g.len()), g);
                    }
                }
            }
            Op::AddRow { x, row } => {
                if self.requires_grad(*x) {
                    add_into(slot(grads, *x, g.len()), g);
                }
                if self.requires_grad(*row) {
                    let d = self.value(*row).len();
                    let gr = slot(grads, *row, d);
                    for chunk in g.chunks_exact(d) {
                        add_into(gr, chunk);
                    }
                }
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.requires_grad(*a) {
                    let ga = slot(grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                }
                if self.requires_grad(*b) {
                    let gb = slot(grads, *b, g.len());
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                }
            }
            Op::Scale { x, factor } => {
                let gx = slot(grads, *x, g.len());
                for (o, gi) in gx.iter_mut().zip(g) {
                    *o += gi * factor;
                }
            }
            Op::Relu { x } => {
                let xv = self.value(*x);
                let gx = slot(grads, *x, g.len());
                for i in 0..g.len() {
                    if xv[i] > 0.0 {
                        gx[i] += g[i];
                    }
                }
            }
            Op::Sum { x } => {
                let n = self.value(*x).len();
                let gx = slot(grads, *x, n);
                gx.iter_mut().for_each(|o| *o += g[0]);
            }
            Op::Softmax { x, axis } => {
                let (outer, len, inner) = axis_split(&node.shape, *axis).expect("validated");
                let y = node.value.as_slice();
                let gx = slot(grads, *x, y.len());
                for o in 0..outer {
                    for i in 0..inner {
                        let base = o * len * inner + i;
                        let dot: f64 = (0..len).map(|j| g[base + j * inner] * y[base + j * inner]).sum();
                        for j in 0..len {
                            let p = base + j * inner;
                            gx[p] += y[p] * (g[p] - dot);
                        }
                    }
                }
            }
            Op::LogSoftmax { x, axis } => {
                let (outer, len, inner) = axis_split(&node.shape, *axis).expect("validated");
                let y = node.value.as_slice();
                let gx = slot(grads, *x, y.len());
                for o in 0..outer {
                    for i in 0..inner {
                        let base = o * len * inner + i;
                        let gsum: f64 = (0..len).map(|j| g[base + j * inner]).sum();
                        for j in 0..len {
                            let p = base + j * inner;
                            gx[p] += g[p] - y[p].exp() * gsum;
                        }
                    }
                }
            }
            Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                let d = node.shape[1];
                let gv = self.value(*gain);
                if self.requires_grad(*gain) {
                    let gg = slot(grads, *gain, d);
                    for (r, grow) in g.chunks_exact(d).enumerate() {
                        for j in 0..d {
                            gg[j] += grow[j] * xhat[r * d + j];
                        }
                    }
                }
                if self.requires_grad(*bias) {
                    let gb = slot(grads, *bias, d);
                    for grow in g.chunks_exact(d) {
                        add_into(gb, grow);
                    }
                }
                if self.requires_grad(*x) {
                    let gx = slot(grads, *x, g.len());
                    let mut dxhat = vec![0.0; d];
                    for (r, grow) in g.chunks_exact(d).enumerate() {
                        let xh = &xhat[r * d..(r + 1) * d];
                        for j in 0..d {
                            dxhat[j] = grow[j] * gv[j];
                        }
                        let mean_d = dxhat.iter().sum::<f64>() / d as f64;
                        let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                        for j in 0..d {
                            gx[r * d + j] += inv_std[r] * (dxhat[j] - mean_d - xh[j] * mean_dx);
                        }
                    }
                }
            }
            Op::Attention { q, k, v, geometry, probs } => {
                self.attention_backward(*q, *k, *v, geometry, probs, g, grads);
            }
            Op::Gather { table, ids } => {
                let d = node.shape[1];
                let n = self.value(*table).len();
                let gt = slot(grads, *table, n);
                for (r, &id) in ids.iter().enumerate() {
                    add_into(&mut gt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                }
            }
            Op::MaskMul { x, mask } => {
                let gx = slot(grads, *x, g.len());
                for i in 0..g.len() {
                    gx[i] += g[i] * mask[i];
                }
            }
            Op::SmoothedCe { logits, targets, epsilon, pad_id, denom, probs } => {
                let vocab = self.shape(*logits)[1];
                let gl = slot(grads, *logits, probs.len());
                let scale = g[0] / denom;
                let uniform = epsilon / vocab as f64;
                for (r, &t) in targets.iter().enumerate() {
                    if t == *pad_id {
                        continue;
                    }
                    let p = &probs[r * vocab..(r + 1) * vocab];
                    let out = &mut gl[r * vocab..(r + 1) * vocab];
                    for j in 0..vocab {
                        let q = uniform + if j == t { 1.0 - epsilon } else { 0.0 };
                        out[j] += scale * (p[j] - q);
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn attention_backward(
        &self,
        q: Var,
        k: Var,
        v: Var,
        geo: &AttentionGeometry,
        probs: &[f64],
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
    ) {
        let d = self.shape(q)[1];
        let dh = d / geo.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let (need_q, need_k, need_v) = (self.requires_grad(q), self.requires_grad(k), self.requires_grad(v));
        let mut gq = vec![0.0; if need_q { qv.len() } else { 0 }];
        let mut gk = vec![0.0; if need_k { kv.len() } else { 0 }];
        let mut gv = vec![0.0; if need_v { vv.len() } else { 0 }];
        let (tq, tk) = (geo.q_len, geo.k_len);
        let mut dp = vec![0.0; tk];
        for b in 0..geo.batch {
            for h in 0..geo.heads {
                let off = h * dh;
                for i in 0..tq {
                    let p = &probs[((b * geo.heads + h) * tq + i) * tk..][..tk];
                    let grow = &g[(b * tq + i) * d + off..][..dh];
                    let allowed = &geo.allowed[(b * tq + i) * tk..][..tk];
                    let mut pdp = 0.0;
                    for j in 0..tk {
                        if allowed[j] && p[j] != 0.0 {
                            let vrow = &vv[(b * tk + j) * d + off..][..dh];
                            dp[j] = dot(grow, vrow);
                            pdp += p[j] * dp[j];
                        } else {
                            dp[j] = 0.0;
                        }
                    }
                    let qrow = &qv[(b * tq + i) * d + off..][..dh];
                    for j in 0..tk {
                        if !allowed[j] || p[j] == 0.0 {
                            continue;
                        }
                        if need_v {
                            axpy(p[j], grow, &mut gv[(b * tk + j) * d + off..][..dh]);
                        }
                        let ds = p[j] * (dp[j] - pdp) * scale;
                        if need_q {
                            let krow = &kv[(b * tk + j) * d + off..][..dh];
                            axpy(ds, krow, &mut gq[(b * tq + i) * d + off..][..dh]);
                        }
                        if need_k {
                            axpy(ds, qrow, &mut gk[(b * tk + j) * d + off..][..dh]);
                        }
                    }
                }
            }
        }
        if need_q {
            add_into(slot(grads, q, gq.len()), &gq);
        }
        if need_k {
            add_into(slot(grads, k, gk.len()), &gk);
        }
        if need_v {
            add_into(slot(grads, v, gv.len()), &gv);
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl std::fmt::Debug for Tape<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tape").field("nodes", &self.nodes.len()).finish()
    }
}
