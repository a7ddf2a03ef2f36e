//! Parameters, tape-built forward passes, optimizer and training step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, TrainConfig};
use super::kernels::{positional_table, AttnSpec};
use super::loss::{self, Membership};
use super::tape::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::smiles::{TokenSequence, PAD};

/// A named row-major parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AttnIdx {
    pub wq: usize,
    pub bq: usize,
    pub wk: usize,
    pub bk: usize,
    pub wv: usize,
    pub bv: usize,
    pub wo: usize,
    pub bo: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct FfIdx {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LnIdx {
    pub g: usize,
    pub b: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct EncLayer {
    pub ln1: LnIdx,
    pub attn: AttnIdx,
    pub ln2: LnIdx,
    pub ff: FfIdx,
}

#[derive(Debug, Clone)]
pub(crate) struct DecLayer {
    pub ln1: LnIdx,
    pub self_attn: AttnIdx,
    pub ln2: LnIdx,
    pub cross: AttnIdx,
    pub ln3: LnIdx,
    pub ff: FfIdx,
}

/// Positions of every parameter in `Model::tensors`.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub embed: usize,
    pub enc: Vec<EncLayer>,
    pub enc_ln: LnIdx,
    pub pool_w: usize,
    pub pool_b: usize,
    pub up_w: usize,
    pub up_b: usize,
    pub dec: Vec<DecLayer>,
    pub dec_ln: LnIdx,
    pub out_w: usize,
    pub out_b: usize,
}

#[derive(Clone, Copy)]
enum Init {
    Zeros,
    Ones,
    /// Uniform in ±limit.
    Uniform(f64),
}

struct Builder {
    tensors: Vec<Tensor>,
    inits: Vec<Init>,
}

impl Builder {
    fn add(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        self.tensors.push(Tensor { name, rows, cols, data: Vec::new() });
        self.inits.push(init);
        self.tensors.len() - 1
    }

    fn glorot(fan_in: usize, fan_out: usize) -> Init {
        Init::Uniform((6.0 / (fan_in + fan_out) as f64).sqrt())
    }

    fn ln(&mut self, prefix: &str, h: usize) -> LnIdx {
        LnIdx {
            g: self.add(format!("{prefix}.g"), 1, h, Init::Ones),
            b: self.add(format!("{prefix}.b"), 1, h, Init::Zeros),
        }
    }

    fn attn(&mut self, prefix: &str, h: usize) -> AttnIdx {
        let mut pair = |n: &str| {
            (
                self.add(format!("{prefix}.w{n}"), h, h, Self::glorot(h, h)),
                self.add(format!("{prefix}.b{n}"), 1, h, Init::Zeros),
            )
        };
        let (wq, bq) = pair("q");
        let (wk, bk) = pair("k");
        let (wv, bv) = pair("v");
        let (wo, bo) = pair("o");
        AttnIdx { wq, bq, wk, bk, wv, bv, wo, bo }
    }

    fn ff(&mut self, prefix: &str, h: usize, f: usize) -> FfIdx {
        FfIdx {
            w1: self.add(format!("{prefix}.w1"), h, f, Self::glorot(h, f)),
            b1: self.add(format!("{prefix}.b1"), 1, f, Init::Zeros),
            w2: self.add(format!("{prefix}.w2"), f, h, Self::glorot(f, h)),
            b2: self.add(format!("{prefix}.b2"), 1, h, Init::Zeros),
        }
    }
}

fn build_layout(c: &ModelConfig) -> (Layout, Vec<Tensor>, Vec<Init>) {
    let (h, f) = (c.hidden, c.hidden * c.ff_mult);
    let mut b = Builder { tensors: Vec::new(), inits: Vec::new() };
    let embed = b.add("embed".into(), c.vocab, h, Init::Uniform(3f64.sqrt()));
    let enc = (0..c.layers)
        .map(|i| EncLayer {
            ln1: b.ln(&format!("enc.{i}.ln1"), h),
            attn: b.attn(&format!("enc.{i}.attn"), h),
            ln2: b.ln(&format!("enc.{i}.ln2"), h),
            ff: b.ff(&format!("enc.{i}.ff"), h, f),
        })
        .collect();
    let enc_ln = b.ln("enc.ln", h);
    let pool_w = b.add("pool.w".into(), h, c.latent, Builder::glorot(h, c.latent));
    let pool_b = b.add("pool.b".into(), 1, c.latent, Init::Zeros);
    let up_w = b.add("up.w".into(), c.latent, c.max_len * h, Builder::glorot(c.latent, h));
    let up_b = b.add("up.b".into(), 1, c.max_len * h, Init::Zeros);
    let dec = (0..c.layers)
        .map(|i| DecLayer {
            ln1: b.ln(&format!("dec.{i}.ln1"), h),
            self_attn: b.attn(&format!("dec.{i}.self"), h),
            ln2: b.ln(&format!("dec.{i}.ln2"), h),
            cross: b.attn(&format!("dec.{i}.cross"), h),
            ln3: b.ln(&format!("dec.{i}.ln3"), h),
            ff: b.ff(&format!("dec.{i}.ff"), h, f),
        })
        .collect();
    let dec_ln = b.ln("dec.ln", h);
    let out_w = b.add("out.w".into(), h, c.vocab, Builder::glorot(h, c.vocab));
    let out_b = b.add("out.b".into(), 1, c.vocab, Init::Zeros);
    let layout = Layout { embed, enc, enc_ln, pool_w, pool_b, up_w, up_b, dec, dec_ln, out_w, out_b };
    (layout, b.tensors, b.inits)
}

/// Transformer autoencoder with a unit-sphere latent code.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub(crate) tensors: Vec<Tensor>,
    pub(crate) layout: Layout,
}

impl Model {
    /// Fresh parameters drawn from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (layout, mut tensors, inits) = build_layout(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for (t, init) in tensors.iter_mut().zip(inits) {
            let n = t.rows * t.cols;
            t.data = match init {
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
                Init::Uniform(a) => (0..n).map(|_| rng.gen_range(-a..a)).collect(),
            };
        }
        Ok(Model { config, tensors, layout })
    }

    /// Rebuilds a model from named tensors; names and shapes must match `config`.
    pub fn from_tensors(config: ModelConfig, tensors: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let (layout, expected, _) = build_layout(&config);
        if expected.len() != tensors.len() {
            return Err(Error::Checkpoint(format!("expected {} tensors, found {}", expected.len(), tensors.len())));
        }
        for (e, t) in expected.iter().zip(&tensors) {
            if e.name != t.name || e.rows != t.rows || e.cols != t.cols || t.data.len() != t.rows * t.cols {
                return Err(Error::Checkpoint(format!(
                    "tensor {} ({}x{}) does not match expected {} ({}x{})",
                    t.name, t.rows, t.cols, e.name, e.rows, e.cols
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("tensor {}", t.name)));
            }
        }
        Ok(Model { config, tensors, layout })
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub(crate) fn data(&self, idx: usize) -> &[f64] {
        &self.tensors[idx].data
    }
}

/// Token ids padded to a common length.
pub(crate) struct Padded {
    pub ids: Vec<u32>,
    pub lens: Vec<usize>,
    pub width: usize,
}

fn pad(rows: &[&[u32]]) -> Padded {
    let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut ids = Vec::with_capacity(rows.len() * width);
    for r in rows {
        ids.extend_from_slice(r);
        ids.extend(std::iter::repeat_n(PAD, width - r.len()));
    }
    Padded { ids, lens: rows.iter().map(|r| r.len()).collect(), width }
}

pub(crate) fn check_sequences(config: &ModelConfig, seqs: &[TokenSequence]) -> Result<()> {
    if seqs.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    for s in seqs {
        if s.len() < 2 || s.len() > config.max_len {
            return Err(Error::Shape(format!("sequence length {} outside 2..={}", s.len(), config.max_len)));
        }
        if s.ids.iter().any(|&t| t as usize >= config.vocab) {
            return Err(Error::Shape("token id outside the vocabulary".into()));
        }
    }
    Ok(())
}

/// Builds forward graphs on a tape, binding each parameter once.
pub(crate) struct Graph<'m> {
    pub tape: Tape,
    model: &'m Model,
    bound: Vec<Option<NodeId>>,
    dropout: Option<&'m mut ChaCha8Rng>,
}

impl<'m> Graph<'m> {
    pub fn new(model: &'m Model, dropout: Option<&'m mut ChaCha8Rng>) -> Self {
        let dropout = if model.config.dropout > 0.0 { dropout } else { None };
        Graph { tape: Tape::new(), model, bound: vec![None; model.tensors.len()], dropout }
    }

    fn p(&mut self, idx: usize) -> NodeId {
        if let Some(id) = self.bound[idx] {
            return id;
        }
        let t = &self.model.tensors[idx];
        let id = self.tape.param(idx, t.data.clone(), t.rows, t.cols);
        self.bound[idx] = Some(id);
        id
    }

    fn drop(&mut self, x: NodeId) -> NodeId {
        let p = self.model.config.dropout;
        let Some(rng) = self.dropout.as_deref_mut() else { return x };
        let len = self.tape.value(x).len();
        let keep = 1.0 / (1.0 - p);
        let mask = (0..len).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
        self.tape.dropout(x, mask)
    }

    fn linear(&mut self, x: NodeId, w: usize, b: usize) -> NodeId {
        let (w, b) = (self.p(w), self.p(b));
        self.tape.linear(x, w, b)
    }

    fn ln(&mut self, x: NodeId, ln: LnIdx) -> NodeId {
        let (g, b) = (self.p(ln.g), self.p(ln.b));
        self.tape.layer_norm(x, g, b)
    }

    #[allow(clippy::too_many_arguments)]
    fn attn(
        &mut self,
        xq: NodeId,
        xkv: NodeId,
        a: AttnIdx,
        batch: usize,
        lq: usize,
        lk: usize,
        causal: bool,
        key_lens: Option<Vec<usize>>,
    ) -> NodeId {
        let q = self.linear(xq, a.wq, a.bq);
        let k = self.linear(xkv, a.wk, a.bk);
        let v = self.linear(xkv, a.wv, a.bv);
        let c = &self.model.config;
        let spec = AttnSpec { batch, lq, lk, heads: c.heads, width: c.hidden, causal, key_lens };
        let o = self.tape.attention(q, k, v, spec);
        self.linear(o, a.wo, a.bo)
    }

    fn ff(&mut self, x: NodeId, f: FfIdx) -> NodeId {
        let h = self.linear(x, f.w1, f.b1);
        let h = self.tape.gelu(h);
        self.linear(h, f.w2, f.b2)
    }

    fn embed(&mut self, p: &Padded) -> NodeId {
        let table = self.p(self.model.layout.embed);
        let x = self.tape.embed(table, &p.ids);
        let pe = positional_table(p.width, self.model.config.hidden);
        let x = self.tape.add_const_periodic(x, &pe, p.width);
        self.drop(x)
    }

    /// Unit-norm codes `[batch × latent]`.
    pub fn encode(&mut self, seqs: &[&[u32]]) -> NodeId {
        let p = pad(seqs);
        let batch = seqs.len();
        let layout = self.model.layout.clone();
        let mut x = self.embed(&p);
        for layer in &layout.enc {
            let h = self.ln(x, layer.ln1);
            let a = self.attn(h, h, layer.attn, batch, p.width, p.width, false, Some(p.lens.clone()));
            let a = self.drop(a);
            x = self.tape.add(x, a);
            let h = self.ln(x, layer.ln2);
            let f = self.ff(h, layer.ff);
            let f = self.drop(f);
            x = self.tape.add(x, f);
        }
        let x = self.ln(x, layout.enc_ln);
        let pooled = self.tape.mean_pool(x, p.width, &p.lens);
        let proj = self.linear(pooled, layout.pool_w, layout.pool_b);
        self.tape.l2_normalize(proj)
    }

    /// Logits `[batch·width × vocab]` for decoder inputs `inputs` given codes `z`.
    pub fn decode(&mut self, z: NodeId, inputs: &[&[u32]]) -> (NodeId, usize) {
        let p = pad(inputs);
        let batch = inputs.len();
        let layout = self.model.layout.clone();
        let c = self.model.config.clone();
        let up = self.linear(z, layout.up_w, layout.up_b);
        let memory = self.tape.reshape(up, batch * c.max_len, c.hidden);
        let mut y = self.embed(&p);
        for layer in &layout.dec {
            let h = self.ln(y, layer.ln1);
            let a = self.attn(h, h, layer.self_attn, batch, p.width, p.width, true, Some(p.lens.clone()));
            let a = self.drop(a);
            y = self.tape.add(y, a);
            let h = self.ln(y, layer.ln2);
            let a = self.attn(h, memory, layer.cross, batch, p.width, c.max_len, false, None);
            let a = self.drop(a);
            y = self.tape.add(y, a);
            let h = self.ln(y, layer.ln3);
            let f = self.ff(h, layer.ff);
            let f = self.drop(f);
            y = self.tape.add(y, f);
        }
        let y = self.ln(y, layout.dec_ln);
        (self.linear(y, layout.out_w, layout.out_b), p.width)
    }
}

/// Latent codes for a list of sequences, computed in chunks (eval mode).
pub fn encode(model: &Model, seqs: &[TokenSequence]) -> Result<Vec<Vec<f64>>> {
    check_sequences(&model.config, seqs)?;
    let s = model.config.latent;
    let mut out = Vec::with_capacity(seqs.len());
    for chunk in seqs.chunks(64) {
        let rows: Vec<&[u32]> = chunk.iter().map(|t| t.ids.as_slice()).collect();
        let mut g = Graph::new(model, None);
        let z = g.encode(&rows);
        out.extend(g.tape.value(z).chunks(s).map(<[f64]>::to_vec));
    }
    Ok(out)
}

/// Decoder logits for full sequences `START … END`: row `t` of each block
/// scores `ids[t + 1]` from `z` and `ids[..=t]`. Returns `[len−1 × vocab]`
/// per sequence, concatenated.
pub fn decode_logits(model: &Model, z: &[Vec<f64>], seqs: &[TokenSequence]) -> Result<Vec<Vec<f64>>> {
    check_sequences(&model.config, seqs)?;
    let c = &model.config;
    if z.len() != seqs.len() || z.iter().any(|r| r.len() != c.latent) {
        return Err(Error::Shape("one latent code of the configured width per sequence".into()));
    }
    let mut g = Graph::new(model, None);
    let flat: Vec<f64> = z.iter().flatten().copied().collect();
    let zn = g.tape.input(flat, z.len(), c.latent);
    let inputs: Vec<&[u32]> = seqs.iter().map(|s| &s.ids[..s.len() - 1]).collect();
    let (logits, width) = g.decode(zn, &inputs);
    let v = g.tape.value(logits);
    Ok(seqs
        .iter()
        .enumerate()
        .map(|(b, s)| v[b * width * c.vocab..(b * width + s.len() - 1) * c.vocab].to_vec())
        .collect())
}

/// Rows of anchors and their mutants with contrastive grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub tokens: Vec<TokenSequence>,
    pub membership: Membership,
}

impl TrainingBatch {
    /// Every row is its own anchor with no positives (reconstruction only).
    pub fn reconstruction_only(tokens: Vec<TokenSequence>) -> Self {
        let n = tokens.len();
        TrainingBatch { tokens, membership: Membership { anchor: (0..n).collect(), is_anchor: vec![false; n] } }
    }

    fn has_groups(&self) -> bool {
        self.membership.is_anchor.iter().any(|&a| a)
    }
}

/// Loss components of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub contrastive: f64,
    pub reconstruction: f64,
}

struct Forward<'m> {
    graph: Graph<'m>,
    root: NodeId,
    stats: StepStats,
}

fn forward<'m>(model: &'m Model, batch: &TrainingBatch, rng: Option<&'m mut ChaCha8Rng>) -> Result<Forward<'m>> {
    let c = &model.config;
    check_sequences(c, &batch.tokens)?;
    if batch.membership.len() != batch.tokens.len() {
        return Err(Error::Shape("membership length differs from batch size".into()));
    }
    let lambda = c.lambda;
    let mut g = Graph::new(model, rng);
    let rows: Vec<&[u32]> = batch.tokens.iter().map(|t| t.ids.as_slice()).collect();
    let z = g.encode(&rows);

    let contrastive = if batch.has_groups() {
        let (lc, dz) = loss::supcon_with_grad(g.tape.value(z), c.latent, &batch.membership, c.tau)?;
        Some((lc, dz))
    } else if lambda > 0.0 {
        return Err(Error::Data("contrastive weight is positive but the batch has no anchors".into()));
    } else {
        None
    };

    let inputs: Vec<&[u32]> = rows.iter().map(|r| &r[..r.len() - 1]).collect();
    let (logits, width) = g.decode(z, &inputs);
    let mut targets = Vec::with_capacity(rows.len() * width);
    for r in &rows {
        targets.extend_from_slice(&r[1..]);
        targets.extend(std::iter::repeat_n(PAD, width - (r.len() - 1)));
    }
    let (lr, dlogits) = loss::reconstruction_with_grad(g.tape.value(logits), c.vocab, &targets, width)?;

    let mut terms = Vec::new();
    let lc = match contrastive {
        Some((lc, dz)) => {
            if lambda > 0.0 {
                let node = g.tape.loss(z, lc, dz);
                terms.push((node, lambda));
            }
            lc
        }
        None => 0.0,
    };
    if lambda < 1.0 {
        let node = g.tape.loss(logits, lr, dlogits);
        terms.push((node, 1.0 - lambda));
    }
    let root = g.tape.weighted_sum(terms);
    let total = loss::combined_loss(lc, lr, lambda);
    if !total.is_finite() {
        return Err(Error::NonFinite(format!("loss {total} (contrastive {lc}, reconstruction {lr})")));
    }
    Ok(Forward { graph: g, root, stats: StepStats { loss: total, contrastive: lc, reconstruction: lr } })
}

/// Loss components without updating anything (eval mode).
pub fn evaluate_loss(model: &Model, batch: &TrainingBatch) -> Result<StepStats> {
    Ok(forward(model, batch, None)?.stats)
}

/// Gradients of the combined loss, indexed like `Model::tensors`
/// (`None` for tensors the loss does not reach).
pub fn gradients(model: &Model, batch: &TrainingBatch) -> Result<(StepStats, Vec<Option<Vec<f64>>>)> {
    let f = forward(model, batch, None)?;
    let mut grads = vec![None; model.tensors.len()];
    for (idx, g) in f.graph.tape.backward(f.root) {
        grads[idx] = Some(g);
    }
    Ok((f.stats, grads))
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(model: &Model) -> Self {
        let zeros: Vec<Vec<f64>> = model.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect();
        Adam { m: zeros.clone(), v: zeros, t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One optimizer step on `batch`. Dropout masks are drawn from `rng`.
pub fn train_step(
    model: &mut Model,
    opt: &mut Adam,
    batch: &TrainingBatch,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<StepStats> {
    let (stats, grads) = {
        let f = forward(model, batch, Some(rng))?;
        let grads = f.graph.tape.backward(f.root);
        (f.stats, grads)
    };
    let norm = grads.iter().flat_map(|(_, g)| g.iter()).map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::NonFinite(format!("gradient norm {norm} at step {}", opt.t + 1)));
    }
    let scale = if cfg.grad_clip > 0.0 && norm > cfg.grad_clip { cfg.grad_clip / norm } else { 1.0 };
    opt.t += 1;
    let t = opt.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (idx, g) in grads {
        let (m, v) = (&mut opt.m[idx], &mut opt.v[idx]);
        for (((p, gi), mi), vi) in model.tensors[idx].data.iter_mut().zip(&g).zip(m.iter_mut()).zip(v.iter_mut()) {
            let gi = gi * scale;
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            *p -= cfg.lr * (*mi / bc1) / ((*vi / bc2).sqrt() + cfg.adam_eps);
        }
    }
    Ok(stats)
}

/// Central-difference check of analytic gradients on a tiny model
/// (1 layer, H = 8, 2 heads, S = 4). Returns the largest relative error
/// over `samples` random parameter entries.
pub fn gradient_check(lambda: f64, samples: usize, seed: u64) -> Result<f64> {
    let config = ModelConfig {
        layers: 1,
        hidden: 8,
        heads: 2,
        latent: 4,
        max_len: 9,
        lambda,
        tau: 0.5,
        seed,
        ..ModelConfig::default()
    };
    let mut model = Model::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut tokens = Vec::new();
    let mut anchor = Vec::new();
    let mut is_anchor = Vec::new();
    for a in 0..2 {
        for r in 0..3 {
            let len = rng.gen_range(1..=7);
            let mut ids = vec![crate::smiles::START];
            ids.extend((0..len).map(|_| rng.gen_range(4..model.config.vocab as u32)));
            ids.push(crate::smiles::END);
            tokens.push(TokenSequence { ids });
            anchor.push(a);
            is_anchor.push(r == 0);
        }
    }
    let batch = TrainingBatch { tokens, membership: Membership { anchor, is_anchor } };
    let (_, grads) = gradients(&model, &batch)?;
    let total: usize = model.tensors.iter().map(|t| t.data.len()).sum();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut flat = rng.gen_range(0..total);
        let mut idx = 0;
        while flat >= model.tensors[idx].data.len() {
            flat -= model.tensors[idx].data.len();
            idx += 1;
        }
        let analytic = grads[idx].as_ref().map_or(0.0, |g| g[flat]);
        let orig = model.tensors[idx].data[flat];
        model.tensors[idx].data[flat] = orig + h;
        let up = evaluate_loss(&model, &batch)?.loss;
        model.tensors[idx].data[flat] = orig - h;
        let down = evaluate_loss(&model, &batch)?.loss;
        model.tensors[idx].data[flat] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Gradients below this magnitude are compared in absolute terms. Round-off
/// in a step-1e−5 difference of an O(1) loss is about 1e−10, so a smaller
/// floor would measure noise rather than the analytic gradient.
pub const GRAD_CHECK_FLOOR: f64 = 1e-4;
