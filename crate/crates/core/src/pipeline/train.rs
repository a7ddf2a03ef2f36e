//! Batch construction and the training loop.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::data::{stream_rng, Purpose};
use crate::descriptors::{fingerprint, tanimoto_distance, Fingerprint};
use crate::error::{Error, Result};
use crate::model::{train_step, Adam, Membership, Model, StepStats, TrainConfig, TrainingBatch};
use crate::smiles::{self, TokenSequence};

/// Tokenized anchor groups: element 0 is the anchor, the rest its positives.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    groups: Vec<Vec<TokenSequence>>,
    fingerprints: Vec<Fingerprint>,
}

impl TrainingSet {
    /// Keeps groups with at least one positive; sequences longer than
    /// `max_len` tokens are dropped.
    pub fn new(groups: &[Vec<String>], max_len: usize) -> Result<Self> {
        let mut kept = Vec::new();
        let mut fingerprints = Vec::new();
        for g in groups {
            let toks: Vec<TokenSequence> = g.iter().map(|s| smiles::tokenize(s)).collect();
            if toks[0].len() > max_len {
                continue;
            }
            let toks: Vec<TokenSequence> = toks.into_iter().filter(|t| t.len() <= max_len).collect();
            if toks.len() >= 2 {
                fingerprints.push(fingerprint(&smiles::parse(&g[0])?));
                kept.push(toks);
            }
        }
        if kept.is_empty() {
            return Err(Error::Data("no anchor has a usable positive".into()));
        }
        Ok(TrainingSet { groups: kept, fingerprints })
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// The `k` nearest other anchors of each anchor by Tanimoto distance,
    /// ties broken by index.
    fn nearest(&self, k: usize) -> Vec<Vec<usize>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut d: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (tanimoto_distance(&self.fingerprints[i], &self.fingerprints[j]), j))
                    .collect();
                let k = k.min(d.len());
                if k < d.len() {
                    d.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    d.truncate(k);
                }
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                d.into_iter().map(|(_, j)| j).collect()
            })
            .collect()
    }
}

/// Yields batches of up to `batch_anchors` groups. Centres follow a fresh
/// shuffle every epoch. A sequence appears at most once per batch, so a
/// mutant that equals another group's member cannot be both positive and
/// negative; groups left without positives are dropped.
pub struct Batcher<'a> {
    set: &'a TrainingSet,
    nearest: Option<Vec<Vec<usize>>>,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
    batch_anchors: usize,
    positives: usize,
}

impl<'a> Batcher<'a> {
    pub fn new(set: &'a TrainingSet, cfg: &TrainConfig, seed: u64) -> Self {
        Batcher {
            set,
            nearest: (cfg.neighbourhood > 0).then(|| set.nearest(cfg.neighbourhood)),
            order: Vec::new(),
            cursor: 0,
            rng: stream_rng(seed, Purpose::Batches, 0),
            batch_anchors: cfg.batch_anchors.min(set.len()).max(1),
            positives: cfg.positives,
        }
    }

    fn next_in_order(&mut self) -> usize {
        if self.cursor == self.order.len() {
            self.order = (0..self.set.len()).collect();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }

    fn pick_groups(&mut self) -> Vec<usize> {
        let centre = self.next_in_order();
        let mut chosen = vec![centre];
        if let Some(nearest) = &self.nearest {
            let mut pool = nearest[centre].clone();
            pool.shuffle(&mut self.rng);
            chosen.extend(pool.into_iter().take(self.batch_anchors - 1));
        }
        while chosen.len() < self.batch_anchors {
            let g = self.next_in_order();
            if !chosen.contains(&g) {
                chosen.push(g);
            }
        }
        chosen
    }

    pub fn next_batch(&mut self) -> TrainingBatch {
        let chosen = self.pick_groups();
        let set = self.set;
        let mut seen: HashSet<&[u32]> = chosen.iter().map(|&g| set.groups[g][0].ids.as_slice()).collect();
        let mut tokens = Vec::new();
        let mut membership = Membership { anchor: Vec::new(), is_anchor: Vec::new() };
        let mut slot = 0;
        for g in chosen {
            let group = &set.groups[g];
            let mut pos: Vec<usize> = (1..group.len()).filter(|&i| !seen.contains(group[i].ids.as_slice())).collect();
            if pos.len() > self.positives {
                pos.shuffle(&mut self.rng);
                pos.truncate(self.positives);
                pos.sort_unstable();
            }
            if pos.is_empty() {
                continue;
            }
            for (k, idx) in std::iter::once(0).chain(pos).enumerate() {
                seen.insert(group[idx].ids.as_slice());
                tokens.push(group[idx].clone());
                membership.anchor.push(slot);
                membership.is_anchor.push(k == 0);
            }
            slot += 1;
        }
        TrainingBatch { tokens, membership }
    }
}

/// Runs `cfg.steps` optimizer steps, calling `progress` after each one.
pub fn train_model(
    model: &mut Model,
    set: &TrainingSet,
    cfg: &TrainConfig,
    seed: u64,
    mut progress: impl FnMut(usize, &StepStats),
) -> Result<Vec<StepStats>> {
    let mut batcher = Batcher::new(set, cfg, seed);
    let mut dropout = stream_rng(seed, Purpose::Dropout, 0);
    let mut opt = Adam::new(model);
    let mut log = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch = batcher.next_batch();
        let stats = train_step(model, &mut opt, &batch, cfg, &mut dropout)?;
        progress(step + 1, &stats);
        log.push(stats);
    }
    Ok(log)
}

/// `step,loss,contrastive,reconstruction` rows.
pub fn training_log_csv(log: &[StepStats]) -> String {
    let mut out = String::from("step,loss,contrastive,reconstruction\n");
    for (i, s) in log.iter().enumerate() {
        out.push_str(&format!("{},{},{},{}\n", i + 1, s.loss, s.contrastive, s.reconstruction));
    }
    out
}

/// Fraction of `seqs` whose greedy decode reproduces the input exactly.
pub fn greedy_reconstruction_rate(model: &Model, seqs: &[TokenSequence]) -> Result<f64> {
    if seqs.is_empty() {
        return Ok(1.0);
    }
    let codes = crate::model::encode(model, seqs)?;
    let mut rng = stream_rng(0, Purpose::Dropout, u64::MAX);
    let out =
        crate::model::generate_batch(model, &codes, crate::model::DecodeMode::Greedy, &mut rng, model.config.max_len)?;
    let hits = out.iter().zip(seqs).filter(|(o, s)| o.ids == s.ids).count();
    Ok(hits as f64 / seqs.len() as f64)
}
