//! Per-forward-pass computation graph with reverse-mode differentiation.
//!
//! Nodes are appended in creation order, so every node's inputs precede it and
//! a single reverse sweep over the node list is a valid topological backward
//! pass. The graph is built fresh for each forward pass and dropped after
//! `backward`.

use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value inside a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Geometry of a fused multi-head attention call.
#[derive(Clone, Debug)]
pub struct AttnSpec {
    pub batch: usize,
    pub heads: usize,
    pub q_len: usize,
    pub k_len: usize,
    /// `batch * k_len` flags; `false` marks a padded key.
    pub key_valid: Vec<bool>,
    /// Query `i` may only attend keys `j <= i`.
    pub causal: bool,
}

impl AttnSpec {
    fn allowed(&self, b: usize, i: usize, j: usize) -> bool {
        self.key_valid[b * self.k_len + j] && (!self.causal || j <= i)
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Param { set: u32, index: usize },
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    AddRow { a: Var, row: Var },
    Scale { a: Var, factor: f64 },
    Relu { a: Var },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    Embedding { table: Var, ids: Vec<usize> },
    Attention { q: Var, k: Var, v: Var, spec: Box<AttnSpec>, probs: Vec<f64> },
    CrossEntropy { logits: Var, targets: Vec<Option<usize>>, probs: Vec<f64>, count: usize },
    SelectRows { a: Var, rows: Vec<usize> },
    Dropout { a: Var, mask: Vec<f64> },
    Sum { a: Var },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every graph node that feeds it.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(u32, usize, usize)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// `(set, index, gradient)` for every parameter leaf of `set` that was reached.
    pub fn params_of(&self, set: u32) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        self.params
            .iter()
            .filter(move |p| p.0 == set)
            .filter_map(move |&(_, index, node)| self.grads[node].as_deref().map(|g| (index, g)))
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// `c += op(a) · op(b)` where `op` optionally transposes a stored row-major
/// matrix. `a` is `m×k` after op, `b` is `k×n`, `c` is written through the
/// provided strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    // SAFETY: all strides describe in-bounds accesses of the given slices,
    // and `c` never aliases `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

const LN_EPS: f64 = 1e-5;

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node { shape, value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn rows_cols(&self, v: Var) -> (usize, usize) {
        let s = &self.nodes[v.0].shape;
        let c = *s.last().unwrap();
        (self.nodes[v.0].value.len() / c, c)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Constant, false)
    }

    /// A trainable leaf; its gradient is reported under `(set, index)`.
    pub fn param(&mut self, set: u32, index: usize, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Param { set, index }, true)
    }

    /// Graph-free copy of a value: the returned tensor has no link back into
    /// this graph, so anything computed from it cannot reach `v`'s inputs.
    pub fn detach(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node shapes are valid")
    }

    /// `op(a) · op(b)` for 2-D operands, transposing when `ta`/`tb` is set.
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Var {
        let (ar, ac) = self.rows_cols(a);
        let (br, bc) = self.rows_cols(b);
        let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if tb { (bc, br) } else { (br, bc) };
        assert_eq!(k, k2, "matmul inner dims {k} vs {k2}");
        let mut out = vec![0.0; m * n];
        let sa = if ta { (1, ac) } else { (ac, 1) };
        let sb = if tb { (1, bc) } else { (bc, 1) };
        gemm(m, k, n, self.value(a), sa, self.value(b), sb, &mut out, (n, 1));
        let rg = self.rg(a) || self.rg(b);
        self.push(vec![m, n], out, Op::MatMul { a, b, ta, tb }, rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, b, false, false)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let out: Vec<f64> = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let rg = self.rg(a) || self.rg(b);
        let shape = self.shape(a).to_vec();
        self.push(shape, out, Op::Add { a, b }, rg)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let out: Vec<f64> = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        let rg = self.rg(a) || self.rg(b);
        let shape = self.shape(a).to_vec();
        self.push(shape, out, Op::Mul { a, b }, rg)
    }

    /// Adds a length-`d` row vector to every row of an `n×d` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (_, c) = self.rows_cols(a);
        assert_eq!(self.value(row).len(), c, "add_row width mismatch");
        let r = self.value(row).to_vec();
        let out: Vec<f64> = self.value(a).chunks(c).flat_map(|x| x.iter().zip(&r).map(|(p, q)| p + q)).collect();
        let rg = self.rg(a) || self.rg(row);
        let shape = self.shape(a).to_vec();
        self.push(shape, out, Op::AddRow { a, row }, rg)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * factor).collect();
        let rg = self.rg(a);
        let shape = self.shape(a).to_vec();
        self.push(shape, out, Op::Scale { a, factor }, rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| x.max(0.0)).collect();
        let rg = self.rg(a);
        let shape = self.shape(a).to_vec();
        self.push(shape, out, Op::Relu { a }, rg)
    }

    /// Row-wise layer normalization with learned gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let (r, c) = self.rows_cols(x);
        assert_eq!(self.value(gain).len(), c);
        assert_eq!(self.value(bias).len(), c);
        let xv = self.value(x);
        let gv = self.value(gain);
        let bv = self.value(bias);
        let mut xhat = vec![0.0; r * c];
        let mut rstd = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &xv[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let rs = 1.0 / (var + LN_EPS).sqrt();
            rstd[i] = rs;
            for j in 0..c {
                let h = (row[j] - mean) * rs;
                xhat[i * c + j] = h;
                out[i * c + j] = h * gv[j] + bv[j];
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        let shape = self.shape(x).to_vec();
        self.push(shape, out, Op::LayerNorm { x, gain, bias, xhat, rstd }, rg)
    }

    /// Gathers rows of a `V×d` table.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Var {
        let (v, d) = self.rows_cols(table);
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            assert!(id < v, "embedding id {id} out of range {v}");
            out.extend_from_slice(&tv[id * d..(id + 1) * d]);
        }
        let rg = self.rg(table);
        self.push(vec![ids.len(), d], out, Op::Embedding { table, ids: ids.to_vec() }, rg)
    }

    /// Scaled dot-product multi-head attention over flattened `(batch·len)×d`
    /// operands. Query rows with no admissible key produce zeros.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, spec: AttnSpec) -> Var {
        let (qr, d) = self.rows_cols(q);
        let (kr, dk) = self.rows_cols(k);
        assert_eq!(d, dk);
        assert_eq!(self.rows_cols(v), (kr, d));
        assert_eq!(qr, spec.batch * spec.q_len);
        assert_eq!(kr, spec.batch * spec.k_len);
        assert_eq!(spec.key_valid.len(), kr);
        assert_eq!(d % spec.heads, 0);
        let dh = d / spec.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let (lq, lk) = (spec.q_len, spec.k_len);
        let mut probs = vec![0.0; spec.batch * spec.heads * lq * lk];
        let mut out = vec![0.0; qr * d];
        let mut scores = vec![0.0; lk];
        for b in 0..spec.batch {
            for h in 0..spec.heads {
                let off = h * dh;
                for i in 0..lq {
                    let qrow = &qv[(b * lq + i) * d + off..(b * lq + i) * d + off + dh];
                    let mut max = f64::NEG_INFINITY;
                    for j in 0..lk {
                        if spec.allowed(b, i, j) {
                            let krow = &kv[(b * lk + j) * d + off..(b * lk + j) * d + off + dh];
                            let s: f64 = qrow.iter().zip(krow).map(|(x, y)| x * y).sum::<f64>() * scale;
                            scores[j] = s;
                            max = max.max(s);
                        }
                    }
                    if max == f64::NEG_INFINITY {
                        continue;
                    }
                    let p = &mut probs[((b * spec.heads + h) * lq + i) * lk..][..lk];
                    let mut z = 0.0;
                    for j in 0..lk {
                        if spec.allowed(b, i, j) {
                            p[j] = (scores[j] - max).exp();
                            z += p[j];
                        }
                    }
                    let orow = &mut out[(b * lq + i) * d + off..(b * lq + i) * d + off + dh];
                    for j in 0..lk {
                        if p[j] != 0.0 {
                            p[j] /= z;
                            let vrow = &vv[(b * lk + j) * d + off..(b * lk + j) * d + off + dh];
                            for c in 0..dh {
                                orow[c] += p[j] * vrow[c];
                            }
                        }
                    }
                }
            }
        }
        let rg = self.rg(q) || self.rg(k) || self.rg(v);
        self.push(vec![qr, d], out, Op::Attention { q, k, v, spec: Box::new(spec), probs }, rg)
    }

    /// Mean token-level cross-entropy of row-wise logits; `None` targets are
    /// ignored. An all-ignored batch yields a zero loss.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Var {
        let (r, c) = self.rows_cols(logits);
        assert_eq!(r, targets.len(), "cross_entropy target count");
        let lv = self.value(logits);
        let mut probs = vec![0.0; r * c];
        let mut loss = 0.0;
        let mut count = 0;
        for (i, t) in targets.iter().enumerate() {
            let Some(t) = *t else { continue };
            assert!(t < c, "target {t} out of range {c}");
            let row = &lv[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p = &mut probs[i * c..(i + 1) * c];
            let mut z = 0.0;
            for j in 0..c {
                p[j] = (row[j] - max).exp();
                z += p[j];
            }
            p.iter_mut().for_each(|x| *x /= z);
            loss += -(row[t] - max - z.ln());
            count += 1;
        }
        if count > 0 {
            loss /= count as f64;
        }
        let rg = self.rg(logits);
        self.push(vec![1], vec![loss], Op::CrossEntropy { logits, targets: targets.to_vec(), probs, count }, rg)
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Var {
        let (r, c) = self.rows_cols(a);
        let av = self.value(a);
        let mut out = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            assert!(i < r, "row {i} out of range {r}");
            out.extend_from_slice(&av[i * c..(i + 1) * c]);
        }
        let rg = self.rg(a);
        self.push(vec![rows.len(), c], out, Op::SelectRows { a, rows: rows.to_vec() }, rg)
    }

    /// Inverted dropout; `p == 0` returns `a` untouched without consuming `rng`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, p: f64, rng: &mut R) -> Var {
        if p <= 0.0 {
            return a;
        }
        let keep = 1.0 - p;
        let mask: Vec<f64> =
            (0..self.value(a).len()).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
        let out = self.value(a).iter().zip(&mask).map(|(x, m)| x * m).collect();
        let rg = self.rg(a);
        let shape = self.shape(a).to_vec();
        self.push(shape, out, Op::Dropout { a, mask }, rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        let rg = self.rg(a);
        self.push(vec![1], vec![s], Op::Sum { a }, rg)
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rn = &self.nodes[root.0];
        if rn.value.len() != 1 {
            return Err(Error::Shape(format!("backward root must be scalar, got {:?}", rn.shape)));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param { set, index } => Some((set, index, i)),
                _ => None,
            })
            .collect();
        if rn.requires_grad {
            grads[root.0] = Some(vec![1.0]);
        }
        for id in (0..=root.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads, params })
    }

    fn grad_buf<'a>(&self, grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let n = self.nodes[v.0].value.len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Constant | Op::Param { .. } => {}
            Op::MatMul { a, b, ta, tb } => {
                let (ar, ac) = self.rows_cols(*a);
                let (br, bc) = self.rows_cols(*b);
                let (m, k) = if *ta { (ac, ar) } else { (ar, ac) };
                let n = if *tb { br } else { bc };
                let av = self.value(*a);
                let bv = self.value(*b);
                if let Some(da) = self.grad_buf(grads, *a) {
                    // d op(A) = dC · op(B)^T
                    let sbt = if *tb { (bc, 1) } else { (1, bc) };
                    let sc = if *ta { (1, ac) } else { (ac, 1) };
                    gemm(m, n, k, g, (n, 1), bv, sbt, da, sc);
                }
                if let Some(db) = self.grad_buf(grads, *b) {
                    // d op(B) = op(A)^T · dC
                    let sat = if *ta { (ac, 1) } else { (1, ac) };
                    let sc = if *tb { (1, bc) } else { (bc, 1) };
                    gemm(k, m, n, av, sat, g, (n, 1), db, sc);
                }
            }
            Op::Add { a, b } => {
                if let Some(da) = self.grad_buf(grads, *a) {
                    add_into(da, g);
                }
                if let Some(db) = self.grad_buf(grads, *b) {
                    add_into(db, g);
                }
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(da) = self.grad_buf(grads, *a) {
                    for ((d, x), y) in da.iter_mut().zip(g).zip(bv) {
                        *d += x * y;
                    }
                }
                if let Some(db) = self.grad_buf(grads, *b) {
                    for ((d, x), y) in db.iter_mut().zip(g).zip(av) {
                        *d += x * y;
                    }
                }
            }
            Op::AddRow { a, row } => {
                if let Some(da) = self.grad_buf(grads, *a) {
                    add_into(da, g);
                }
                let c = self.value(*row).len();
                if let Some(dr) = self.grad_buf(grads, *row) {
                    for chunk in g.chunks(c) {
                        add_into(dr, chunk);
                    }
                }
            }
            Op::Scale { a, factor } => {
                if let Some(da) = self.grad_buf(grads, *a) {
                    for (d, x) in da.iter_mut().zip(g) {
                        *d += x * factor;
                    }
                }
            }
            Op::Relu { a } => {
                let av = self.value(*a);
                if let Some(da) = self.grad_buf(grads, *a) {
                    for ((d, x), y) in da.iter_mut().zip(g).zip(av) {
                        if *y > 0.0 {
                            *d += x;
                        }
                    }
                }
            }
            Op::LayerNorm { x, gain, bias, xhat, rstd } => {
                let c = self.value(*gain).len();
                let gv = self.value(*gain);
                if let Some(dgain) = self.grad_buf(grads, *gain) {
                    for (gr, hr) in g.chunks(c).zip(xhat.chunks(c)) {
                        for j in 0..c {
                            dgain[j] += gr[j] * hr[j];
                        }
                    }
                }
                if let Some(dbias) = self.grad_buf(grads, *bias) {
                    for gr in g.chunks(c) {
                        add_into(dbias, gr);
                    }
                }
                if let Some(dx) = self.grad_buf(grads, *x) {
                    let inv_c = 1.0 / c as f64;
                    for (i, (gr, hr)) in g.chunks(c).zip(xhat.chunks(c)).enumerate() {
                        let mut s1 = 0.0;
                        let mut s2 = 0.0;
                        for j in 0..c {
                            let dh = gr[j] * gv[j];
                            s1 += dh;
                            s2 += dh * hr[j];
                        }
                        let row = &mut dx[i * c..(i + 1) * c];
                        for j in 0..c {
                            let dh = gr[j] * gv[j];
                            row[j] += rstd[i] * (dh - s1 * inv_c - hr[j] * s2 * inv_c);
                        }
                    }
                }
            }
            Op::Embedding { table, ids } => {
                let d = self.rows_cols(*table).1;
                if let Some(dt) = self.grad_buf(grads, *table) {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut dt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                }
            }
            Op::Attention { q, k, v, spec, probs } => {
                self.attention_backward(*q, *k, *v, spec, probs, g, grads);
            }
            Op::CrossEntropy { logits, targets, probs, count } => {
                if *count == 0 {
                    return;
                }
                let c = self.rows_cols(*logits).1;
                let w = g[0] / *count as f64;
                if let Some(dl) = self.grad_buf(grads, *logits) {
                    for (i, t) in targets.iter().enumerate() {
                        let Some(t) = *t else { continue };
                        let row = &mut dl[i * c..(i + 1) * c];
                        for j in 0..c {
                            row[j] += w * probs[i * c + j];
                        }
                        row[t] -= w;
                    }
                }
            }
            Op::SelectRows { a, rows } => {
                let c = self.rows_cols(*a).1;
                if let Some(da) = self.grad_buf(grads, *a) {
                    for (r, &i) in rows.iter().enumerate() {
                        add_into(&mut da[i * c..(i + 1) * c], &g[r * c..(r + 1) * c]);
                    }
                }
            }
            Op::Dropout { a, mask } => {
                if let Some(da) = self.grad_buf(grads, *a) {
                    for ((d, x), m) in da.iter_mut().zip(g).zip(mask) {
                        *d += x * m;
                    }
                }
            }
            Op::Sum { a } => {
                if let Some(da) = self.grad_buf(grads, *a) {
                    da.iter_mut().for_each(|d| *d += g[0]);
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
        spec: &AttnSpec,
        probs: &[f64],
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
    ) {
        let d = self.rows_cols(q).1;
        let dh = d / spec.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (lq, lk) = (spec.q_len, spec.k_len);
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let mut dq = vec![0.0; qv.len()];
        let mut dk = vec![0.0; kv.len()];
        let mut dv = vec![0.0; vv.len()];
        let mut dp = vec![0.0; lk];
        for b in 0..spec.batch {
            for h in 0..spec.heads {
                let off = h * dh;
                for i in 0..lq {
                    let p = &probs[((b * spec.heads + h) * lq + i) * lk..][..lk];
                    let grow = &g[(b * lq + i) * d + off..][..dh];
                    let mut dot = 0.0;
                    for j in 0..lk {
                        if p[j] == 0.0 {
                            dp[j] = 0.0;
                            continue;
                        }
                        let vrow = &vv[(b * lk + j) * d + off..][..dh];
                        let s: f64 = grow.iter().zip(vrow).map(|(x, y)| x * y).sum();
                        dp[j] = s;
                        dot += s * p[j];
                        let dvrow = &mut dv[(b * lk + j) * d + off..][..dh];
                        for c in 0..dh {
                            dvrow[c] += p[j] * grow[c];
                        }
                    }
                    let qrow = &qv[(b * lq + i) * d + off..][..dh];
                    for j in 0..lk {
                        if p[j] == 0.0 {
                            continue;
                        }
                        let ds = p[j] * (dp[j] - dot) * scale;
                        let krow = &kv[(b * lk + j) * d + off..][..dh];
                        let dqrow = &mut dq[(b * lq + i) * d + off..][..dh];
                        for c in 0..dh {
                            dqrow[c] += ds * krow[c];
                        }
                        let dkrow = &mut dk[(b * lk + j) * d + off..][..dh];
                        for c in 0..dh {
                            dkrow[c] += ds * qrow[c];
                        }
                    }
                }
            }
        }
        for (var, buf) in [(q, dq), (k, dk), (v, dv)] {
            if let Some(dst) = self.grad_buf(grads, var) {
                add_into(dst, &buf);
            }
        }
    }
}
