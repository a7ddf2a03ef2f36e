//! Reverse-mode autodiff over row-major 2-D tensors with fused ops.

use super::kernels::{self, AttnSpec, View};

pub(crate) type NodeId = usize;

enum Op {
    /// Constant input or parameter (`Some(index)` routes its gradient).
    Leaf(Option<usize>),
    Embed {
        table: NodeId,
        ids: Vec<u32>,
    },
    Add(NodeId, NodeId),
    /// `x[n×c] + b[1×c]`.
    AddRow(NodeId, NodeId),
    /// Adds a constant `[period×c]` table to each block of `period` rows.
    AddConst(NodeId),
    MatMul(NodeId, NodeId),
    LayerNorm {
        x: NodeId,
        g: NodeId,
        b: NodeId,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    Gelu(NodeId),
    Attention {
        q: NodeId,
        k: NodeId,
        v: NodeId,
        spec: AttnSpec,
        probs: Vec<f64>,
    },
    Reshape(NodeId),
    MeanPool {
        x: NodeId,
        period: usize,
        lens: Vec<usize>,
    },
    L2Normalize {
        x: NodeId,
        norms: Vec<f64>,
    },
    Dropout {
        x: NodeId,
        mask: Vec<f64>,
    },
    /// Scalar loss whose input gradient was computed in the forward pass.
    Loss {
        x: NodeId,
        dx: Vec<f64>,
    },
    WeightedSum(Vec<(NodeId, f64)>),
}

struct Node {
    value: Vec<f64>,
    rows: usize,
    cols: usize,
    op: Op,
}

#[derive(Default)]
pub(crate) struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Vec<f64>, rows: usize, cols: usize, op: Op) -> NodeId {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node { value, rows, cols, op });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        (self.nodes[id].rows, self.nodes[id].cols)
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id].value[0]
    }

    pub fn input(&mut self, value: Vec<f64>, rows: usize, cols: usize) -> NodeId {
        self.push(value, rows, cols, Op::Leaf(None))
    }

    pub fn param(&mut self, index: usize, value: Vec<f64>, rows: usize, cols: usize) -> NodeId {
        self.push(value, rows, cols, Op::Leaf(Some(index)))
    }

    pub fn embed(&mut self, table: NodeId, ids: &[u32]) -> NodeId {
        let cols = self.nodes[table].cols;
        let t = &self.nodes[table].value;
        let mut out = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            let id = id as usize;
            out.extend_from_slice(&t[id * cols..(id + 1) * cols]);
        }
        self.push(out, ids.len(), cols, Op::Embed { table, ids: ids.to_vec() })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let v: Vec<f64> = self.nodes[a].value.iter().zip(&self.nodes[b].value).map(|(x, y)| x + y).collect();
        let (r, c) = self.shape(a);
        self.push(v, r, c, Op::Add(a, b))
    }

    pub fn add_row(&mut self, x: NodeId, b: NodeId) -> NodeId {
        let (r, c) = self.shape(x);
        assert_eq!(self.shape(b), (1, c), "bias shape mismatch");
        let bias = &self.nodes[b].value;
        let mut v = self.nodes[x].value.clone();
        for row in v.chunks_mut(c) {
            for (o, bb) in row.iter_mut().zip(bias) {
                *o += bb;
            }
        }
        self.push(v, r, c, Op::AddRow(x, b))
    }

    /// Adds `table[(row % period)]` to every row; `table` is a `[period×c]` constant.
    pub fn add_const_periodic(&mut self, x: NodeId, table: &[f64], period: usize) -> NodeId {
        let (r, c) = self.shape(x);
        let mut v = self.nodes[x].value.clone();
        for (i, row) in v.chunks_mut(c).enumerate() {
            let t = &table[(i % period) * c..(i % period + 1) * c];
            for (o, tt) in row.iter_mut().zip(t) {
                *o += tt;
            }
        }
        self.push(v, r, c, Op::AddConst(x))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul inner dimension mismatch");
        let v = kernels::linear(&self.nodes[a].value, m, k, &self.nodes[b].value, n, None);
        self.push(v, m, n, Op::MatMul(a, b))
    }

    /// `x·w + b`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let y = self.matmul(x, w);
        self.add_row(y, b)
    }

    pub fn layer_norm(&mut self, x: NodeId, g: NodeId, b: NodeId) -> NodeId {
        let (r, c) = self.shape(x);
        let (y, xhat, rstd) = kernels::layer_norm(&self.nodes[x].value, c, &self.nodes[g].value, &self.nodes[b].value);
        self.push(y, r, c, Op::LayerNorm { x, g, b, xhat, rstd })
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let (r, c) = self.shape(x);
        let v = self.nodes[x].value.iter().map(|&t| kernels::gelu(t)).collect();
        self.push(v, r, c, Op::Gelu(x))
    }

    pub fn attention(&mut self, q: NodeId, k: NodeId, v: NodeId, spec: AttnSpec) -> NodeId {
        assert_eq!(self.shape(q), (spec.batch * spec.lq, spec.width));
        assert_eq!(self.shape(k), (spec.batch * spec.lk, spec.width));
        assert_eq!(self.shape(v), (spec.batch * spec.lk, spec.width));
        let (out, probs) =
            kernels::attention_forward(&self.nodes[q].value, &self.nodes[k].value, &self.nodes[v].value, &spec);
        let rows = spec.batch * spec.lq;
        let width = spec.width;
        self.push(out, rows, width, Op::Attention { q, k, v, spec, probs })
    }

    pub fn reshape(&mut self, x: NodeId, rows: usize, cols: usize) -> NodeId {
        assert_eq!(self.nodes[x].value.len(), rows * cols, "reshape size mismatch");
        let v = self.nodes[x].value.clone();
        self.push(v, rows, cols, Op::Reshape(x))
    }

    /// Mean of the first `lens[b]` rows of every `period`-row block.
    pub fn mean_pool(&mut self, x: NodeId, period: usize, lens: &[usize]) -> NodeId {
        let (r, c) = self.shape(x);
        assert_eq!(r, period * lens.len(), "pool shape mismatch");
        let xv = &self.nodes[x].value;
        let mut out = vec![0.0; lens.len() * c];
        for (b, &len) in lens.iter().enumerate() {
            assert!(len >= 1 && len <= period, "pool length out of range");
            let o = &mut out[b * c..(b + 1) * c];
            for t in 0..len {
                for (acc, v) in o.iter_mut().zip(&xv[(b * period + t) * c..(b * period + t + 1) * c]) {
                    *acc += v;
                }
            }
            for acc in o.iter_mut() {
                *acc /= len as f64;
            }
        }
        self.push(out, lens.len(), c, Op::MeanPool { x, period, lens: lens.to_vec() })
    }

    pub fn l2_normalize(&mut self, x: NodeId) -> NodeId {
        let (r, c) = self.shape(x);
        let mut v = self.nodes[x].value.clone();
        let mut norms = Vec::with_capacity(r);
        for row in v.chunks_mut(c) {
            let n = row.iter().map(|t| t * t).sum::<f64>().sqrt().max(1e-12);
            norms.push(n);
            for t in row.iter_mut() {
                *t /= n;
            }
        }
        self.push(v, r, c, Op::L2Normalize { x, norms })
    }

    /// Inverted dropout with a precomputed keep mask of 0 / 1/(1−p) entries.
    pub fn dropout(&mut self, x: NodeId, mask: Vec<f64>) -> NodeId {
        let (r, c) = self.shape(x);
        let v = self.nodes[x].value.iter().zip(&mask).map(|(a, m)| a * m).collect();
        self.push(v, r, c, Op::Dropout { x, mask })
    }

    /// Scalar loss node with a forward-computed input gradient.
    pub fn loss(&mut self, x: NodeId, value: f64, dx: Vec<f64>) -> NodeId {
        assert_eq!(dx.len(), self.nodes[x].value.len());
        self.push(vec![value], 1, 1, Op::Loss { x, dx })
    }

    pub fn weighted_sum(&mut self, terms: Vec<(NodeId, f64)>) -> NodeId {
        let v = terms.iter().map(|&(id, w)| w * self.scalar(id)).sum();
        self.push(vec![v], 1, 1, Op::WeightedSum(terms))
    }

    /// Backpropagates from a scalar node; returns gradients of parameter leaves
    /// as `(param index, gradient)`.
    pub fn backward(&self, root: NodeId) -> Vec<(usize, Vec<f64>)> {
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root] = Some(vec![1.0]);
        let mut out = Vec::new();
        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf(Some(p)) => out.push((*p, g)),
                Op::Leaf(None) => {}
                Op::Embed { table, ids } => {
                    let c = node.cols;
                    let dt = self.grad_buf(&mut grads, *table);
                    for (r, &tok) in ids.iter().enumerate() {
                        let tok = tok as usize;
                        for j in 0..c {
                            dt[tok * c + j] += g[r * c + j];
                        }
                    }
                }
                Op::Add(a, b) => {
                    accumulate(self.grad_buf(&mut grads, *a), &g);
                    accumulate(self.grad_buf(&mut grads, *b), &g);
                }
                Op::AddRow(x, b) => {
                    let c = node.cols;
                    let db = self.grad_buf(&mut grads, *b);
                    for row in g.chunks(c) {
                        accumulate(db, row);
                    }
                    accumulate(self.grad_buf(&mut grads, *x), &g);
                }
                Op::AddConst(x) | Op::Reshape(x) => accumulate(self.grad_buf(&mut grads, *x), &g),
                Op::MatMul(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = node.cols;
                    if self.needs_grad(*a) {
                        let bv = &self.nodes[*b].value;
                        let da = self.grad_buf(&mut grads, *a);
                        kernels::gemm(m, n, k, 1.0, &g, View::rows(0, n), bv, View::t(0, n), 1.0, da, View::rows(0, k));
                    }
                    if self.needs_grad(*b) {
                        let av = &self.nodes[*a].value;
                        let db = self.grad_buf(&mut grads, *b);
                        kernels::gemm(k, m, n, 1.0, av, View::t(0, k), &g, View::rows(0, n), 1.0, db, View::rows(0, n));
                    }
                }
                Op::LayerNorm { x, g: gamma, b, xhat, rstd } => {
                    let c = node.cols;
                    let gv = self.nodes[*gamma].value.clone();
                    {
                        let dg = self.grad_buf(&mut grads, *gamma);
                        for (row_g, row_h) in g.chunks(c).zip(xhat.chunks(c)) {
                            for j in 0..c {
                                dg[j] += row_g[j] * row_h[j];
                            }
                        }
                    }
                    {
                        let db = self.grad_buf(&mut grads, *b);
                        for row in g.chunks(c) {
                            accumulate(db, row);
                        }
                    }
                    let dx = self.grad_buf(&mut grads, *x);
                    let mut dxhat = vec![0.0; c];
                    for (r, rs) in rstd.iter().enumerate() {
                        let gr = &g[r * c..(r + 1) * c];
                        let hr = &xhat[r * c..(r + 1) * c];
                        for j in 0..c {
                            dxhat[j] = gr[j] * gv[j];
                        }
                        let mean_d = dxhat.iter().sum::<f64>() / c as f64;
                        let mean_dh = dxhat.iter().zip(hr).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                        for j in 0..c {
                            dx[r * c + j] += rs * (dxhat[j] - mean_d - hr[j] * mean_dh);
                        }
                    }
                }
                Op::Gelu(x) => {
                    let xv = &self.nodes[*x].value;
                    let dx = self.grad_buf(&mut grads, *x);
                    for ((d, gi), xi) in dx.iter_mut().zip(&g).zip(xv) {
                        *d += gi * kernels::gelu_grad(*xi);
                    }
                }
                Op::Attention { q, k, v, spec, probs } => {
                    let mut dq = vec![0.0; self.nodes[*q].value.len()];
                    let mut dk = vec![0.0; self.nodes[*k].value.len()];
                    let mut dv = vec![0.0; self.nodes[*v].value.len()];
                    kernels::attention_backward(
                        &self.nodes[*q].value,
                        &self.nodes[*k].value,
                        &self.nodes[*v].value,
                        probs,
                        &g,
                        spec,
                        &mut dq,
                        &mut dk,
                        &mut dv,
                    );
                    accumulate(self.grad_buf(&mut grads, *q), &dq);
                    accumulate(self.grad_buf(&mut grads, *k), &dk);
                    accumulate(self.grad_buf(&mut grads, *v), &dv);
                }
                Op::MeanPool { x, period, lens } => {
                    let c = node.cols;
                    let dx = self.grad_buf(&mut grads, *x);
                    for (b, &len) in lens.iter().enumerate() {
                        for t in 0..len {
                            for j in 0..c {
                                dx[(b * period + t) * c + j] += g[b * c + j] / len as f64;
                            }
                        }
                    }
                }
                Op::L2Normalize { x, norms } => {
                    let c = node.cols;
                    let y = &node.value;
                    let dx = self.grad_buf(&mut grads, *x);
                    for (r, n) in norms.iter().enumerate() {
                        let yr = &y[r * c..(r + 1) * c];
                        let gr = &g[r * c..(r + 1) * c];
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            dx[r * c + j] += (gr[j] - yr[j] * dot) / n;
                        }
                    }
                }
                Op::Dropout { x, mask } => {
                    let dx = self.grad_buf(&mut grads, *x);
                    for ((d, gi), m) in dx.iter_mut().zip(&g).zip(mask) {
                        *d += gi * m;
                    }
                }
                Op::Loss { x, dx } => {
                    let s = g[0];
                    let buf = self.grad_buf(&mut grads, *x);
                    for (d, v) in buf.iter_mut().zip(dx) {
                        *d += s * v;
                    }
                }
                Op::WeightedSum(terms) => {
                    for &(t, w) in terms {
                        self.grad_buf(&mut grads, t)[0] += w * g[0];
                    }
                }
            }
        }
        out.sort_by_key(|(p, _)| *p);
        out
    }

    /// Inputs never need gradients; everything else might.
    fn needs_grad(&self, id: NodeId) -> bool {
        !matches!(self.nodes[id].op, Op::Leaf(None))
    }

    fn grad_buf<'a>(&self, grads: &'a mut [Option<Vec<f64>>], id: NodeId) -> &'a mut Vec<f64> {
        let len = self.nodes[id].value.len();
        grads[id].get_or_insert_with(|| vec![0.0; len])
    }
}

fn accumulate(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
