//! Autoregressive generation with per-layer key/value caches.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::kernels::{self, layer_norm, linear, positional_table, softmax_prefix, AttnSpec};
use super::net::{AttnIdx, FfIdx, LnIdx, Model};
use crate::error::{Error, Result};
use crate::smiles::{TokenSequence, END, PAD, START, UNK};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    Greedy,
    Sample { temperature: f64 },
}

impl Model {
    fn lin(&self, x: &[f64], rows: usize, w: usize, b: usize) -> Vec<f64> {
        let (wt, bt) = (&self.tensors[w], &self.tensors[b]);
        linear(x, rows, wt.rows, &wt.data, wt.cols, Some(&bt.data))
    }

    fn norm(&self, x: &[f64], ln: LnIdx) -> Vec<f64> {
        layer_norm(x, self.config.hidden, self.data(ln.g), self.data(ln.b)).0
    }

    fn feed_forward(&self, x: &[f64], rows: usize, f: FfIdx) -> Vec<f64> {
        let mut h = self.lin(x, rows, f.w1, f.b1);
        for v in &mut h {
            *v = kernels::gelu(*v);
        }
        self.lin(&h, rows, f.w2, f.b2)
    }
}

struct LayerCache {
    /// Self-attention keys/values per row, `[t × H]` each, growing.
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    /// Cross-attention keys/values over the memory, `[batch·M × H]`.
    mem_k: Vec<f64>,
    mem_v: Vec<f64>,
}

/// Single-query attention of each row against its own `[len × H]` keys.
fn attend_rows(model: &Model, q: &[f64], keys: &[&[f64]], values: &[&[f64]], lens: &[usize]) -> Vec<f64> {
    let h = model.config.hidden;
    let mut out = vec![0.0; q.len()];
    for (b, &len) in lens.iter().enumerate() {
        let spec =
            AttnSpec { batch: 1, lq: 1, lk: len, heads: model.config.heads, width: h, causal: false, key_lens: None };
        let (o, _) = kernels::attention_forward(&q[b * h..(b + 1) * h], keys[b], values[b], &spec);
        out[b * h..(b + 1) * h].copy_from_slice(&o);
    }
    out
}

fn attn_out(model: &Model, o: &[f64], rows: usize, a: AttnIdx) -> Vec<f64> {
    model.lin(o, rows, a.wo, a.bo)
}

fn add_into(x: &mut [f64], y: &[f64]) {
    for (a, b) in x.iter_mut().zip(y) {
        *a += b;
    }
}

/// Decodes one sequence per code. Generation stops at END or when a
/// sequence reaches `max_len` tokens (START included).
pub fn generate_batch(
    model: &Model,
    zs: &[Vec<f64>],
    mode: DecodeMode,
    rng: &mut ChaCha8Rng,
    max_len: usize,
) -> Result<Vec<TokenSequence>> {
    let c = &model.config;
    let lay = &model.layout;
    if zs.iter().any(|z| z.len() != c.latent) {
        return Err(Error::Shape(format!("latent codes must have width {}", c.latent)));
    }
    if let DecodeMode::Sample { temperature } = mode {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
        }
    }
    let max_len = max_len.min(c.max_len);
    let (batch, h, v) = (zs.len(), c.hidden, c.vocab);
    if batch == 0 {
        return Ok(Vec::new());
    }
    let flat: Vec<f64> = zs.iter().flatten().copied().collect();
    let memory = model.lin(&flat, batch, lay.up_w, lay.up_b); // [batch × M·H] == [batch·M × H]
    let mut caches: Vec<LayerCache> = lay
        .dec
        .iter()
        .map(|l| LayerCache {
            keys: vec![Vec::new(); batch],
            values: vec![Vec::new(); batch],
            mem_k: model.lin(&memory, batch * c.max_len, l.cross.wk, l.cross.bk),
            mem_v: model.lin(&memory, batch * c.max_len, l.cross.wv, l.cross.bv),
        })
        .collect();
    let pe = positional_table(max_len, h);
    let embed = model.data(lay.embed);
    let mut seqs: Vec<Vec<u32>> = vec![vec![START]; batch];
    let mut done = vec![false; batch];
    for t in 0..max_len - 1 {
        let mut x = vec![0.0; batch * h];
        for b in 0..batch {
            let tok = *seqs[b].last().expect("non-empty") as usize;
            for j in 0..h {
                x[b * h + j] = embed[tok * h + j] + pe[t * h + j];
            }
        }
        for (l, cache) in lay.dec.iter().zip(caches.iter_mut()) {
            let n = model.norm(&x, l.ln1);
            let q = model.lin(&n, batch, l.self_attn.wq, l.self_attn.bq);
            let k = model.lin(&n, batch, l.self_attn.wk, l.self_attn.bk);
            let vv = model.lin(&n, batch, l.self_attn.wv, l.self_attn.bv);
            for b in 0..batch {
                cache.keys[b].extend_from_slice(&k[b * h..(b + 1) * h]);
                cache.values[b].extend_from_slice(&vv[b * h..(b + 1) * h]);
            }
            let ks: Vec<&[f64]> = cache.keys.iter().map(Vec::as_slice).collect();
            let vs: Vec<&[f64]> = cache.values.iter().map(Vec::as_slice).collect();
            let o = attend_rows(model, &q, &ks, &vs, &vec![t + 1; batch]);
            add_into(&mut x, &attn_out(model, &o, batch, l.self_attn));

            let n = model.norm(&x, l.ln2);
            let q = model.lin(&n, batch, l.cross.wq, l.cross.bq);
            let m = c.max_len * h;
            let ks: Vec<&[f64]> = (0..batch).map(|b| &cache.mem_k[b * m..(b + 1) * m]).collect();
            let vs: Vec<&[f64]> = (0..batch).map(|b| &cache.mem_v[b * m..(b + 1) * m]).collect();
            let o = attend_rows(model, &q, &ks, &vs, &vec![c.max_len; batch]);
            add_into(&mut x, &attn_out(model, &o, batch, l.cross));

            let n = model.norm(&x, l.ln3);
            add_into(&mut x, &model.feed_forward(&n, batch, l.ff));
        }
        let n = model.norm(&x, lay.dec_ln);
        let logits = model.lin(&n, batch, lay.out_w, lay.out_b);
        for b in 0..batch {
            if done[b] {
                continue;
            }
            let row = &logits[b * v..(b + 1) * v];
            let tok = match mode {
                DecodeMode::Greedy => greedy(row),
                DecodeMode::Sample { temperature } => sample(row, temperature, rng),
            };
            seqs[b].push(tok);
            if tok == END {
                done[b] = true;
            }
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    Ok(seqs.into_iter().map(|ids| TokenSequence { ids }).collect())
}

pub fn generate(
    model: &Model,
    z: &[f64],
    mode: DecodeMode,
    rng: &mut ChaCha8Rng,
    max_len: usize,
) -> Result<TokenSequence> {
    Ok(generate_batch(model, &[z.to_vec()], mode, rng, max_len)?.remove(0))
}

fn emittable(id: usize) -> bool {
    let id = id as u32;
    id != PAD && id != START && id != UNK
}

fn greedy(row: &[f64]) -> u32 {
    let mut best = END as usize;
    for (i, &v) in row.iter().enumerate() {
        if emittable(i) && v > row[best] {
            best = i;
        }
    }
    best as u32
}

fn sample(row: &[f64], temperature: f64, rng: &mut ChaCha8Rng) -> u32 {
    let mut p: Vec<f64> =
        row.iter().enumerate().map(|(i, &v)| if emittable(i) { v / temperature } else { f64::NEG_INFINITY }).collect();
    let n = p.len();
    softmax_prefix(&mut p, n);
    let mut u = rng.gen::<f64>();
    for (i, &pi) in p.iter().enumerate() {
        u -= pi;
        if u < 0.0 {
            return i as u32;
        }
    }
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(END as usize) as u32
}
