//! Toy corpora, per-anchor seeded dataset generation, JSON-lines I/O and
//! faulty-positive filtering.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descriptors::{compute_properties, filter_faulty_positives, fit_covariance, CovarianceModel};
use crate::error::{Error, Result};
use crate::eval::Chain;
use crate::molgraph::MolGraph;
use crate::mutation::{
    generate_positive_set, generate_supermutant_chain, sample_mutant, AtomDistribution, GenerationConfig, MutantRecord,
    Verdict,
};
use crate::smiles;

/// Small drug-like molecules that toy corpora are grown from.
pub const SEED_SMILES: &str = include_str!("../../data/seeds.smi");

/// Independent RNG streams derived from one global seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Corpus,
    Positives,
    Chains,
    Split,
    Batches,
    Dropout,
    Interpolation,
    Properties,
}

impl Purpose {
    fn salt(self) -> u64 {
        match self {
            Purpose::Corpus => 0x636f_7270,
            Purpose::Positives => 0x706f_7369,
            Purpose::Chains => 0x6368_6169,
            Purpose::Split => 0x7370_6c69,
            Purpose::Batches => 0x6261_7463,
            Purpose::Dropout => 0x6472_6f70,
            Purpose::Interpolation => 0x696e_7465,
            Purpose::Properties => 0x7072_6f70,
        }
    }
}

/// Stream `id` of the generator for (`seed`, `purpose`). Streams never
/// overlap, so per-anchor output does not depend on processing order.
pub fn stream_rng(seed: u64, purpose: Purpose, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.salt().rotate_left(32));
    rng.set_stream(id);
    rng
}

/// Size bounds on corpus molecules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusLimits {
    pub min_atoms: usize,
    pub max_atoms: usize,
    pub max_chars: usize,
}

impl CorpusLimits {
    fn admits(&self, g: &MolGraph, canonical: &str) -> bool {
        (self.min_atoms..=self.max_atoms).contains(&g.atom_count()) && canonical.len() <= self.max_chars
    }
}

/// Canonical forms of the bundled seed molecules.
pub fn seed_molecules() -> Result<Vec<String>> {
    SEED_SMILES.lines().filter(|l| !l.trim().is_empty()).map(|l| smiles::canonicalize(l.trim())).collect()
}

/// Reads a newline-delimited SMILES corpus, canonicalizing every entry.
pub fn read_corpus(text: &str) -> Result<Vec<String>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| smiles::canonicalize(l.trim()).map_err(|e| Error::Data(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn write_corpus(molecules: &[String]) -> String {
    molecules.iter().map(|s| format!("{s}\n")).collect()
}

/// Grows `count` distinct canonical molecules from the seed set by short
/// random mutation walks, keeping only those inside `limits`.
pub fn toy_corpus(count: usize, limits: CorpusLimits, seed: u64) -> Result<Vec<String>> {
    let seeds = seed_molecules()?;
    let graphs: Vec<MolGraph> = seeds.iter().map(|s| smiles::parse(s)).collect::<Result<_>>()?;
    let dist = AtomDistribution::from_corpus(&graphs)?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut pool: Vec<(String, MolGraph)> = Vec::new();
    for (s, g) in seeds.into_iter().zip(graphs) {
        if limits.admits(&g, &s) && seen.insert(s.clone()) {
            pool.push((s, g));
        }
    }
    if pool.is_empty() {
        return Err(Error::Data("no seed molecule fits the corpus limits".into()));
    }
    let mut rng = stream_rng(seed, Purpose::Corpus, 0);
    let budget = count.saturating_mul(200).max(10_000);
    let mut attempts = 0;
    while pool.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(Error::Data(format!("could only grow {} of {count} corpus molecules", pool.len())));
        }
        let mut g = pool[rng.gen_range(0..pool.len())].1.clone();
        for _ in 0..rng.gen_range(1..=3) {
            match sample_mutant(&g, &mut rng, &dist) {
                Ok((next, _)) => g = next,
                Err(Error::NoLegalMutation) => break,
                Err(e) => return Err(e),
            }
        }
        let s = smiles::write(&g)?;
        if limits.admits(&g, &s) && seen.insert(s.clone()) {
            // store the re-parsed canonical graph so atom order matches the string
            let g = smiles::parse(&s)?;
            pool.push((s, g));
        }
    }
    let mut out: Vec<String> = pool.into_iter().map(|(s, _)| s).take(count).collect();
    out.shuffle(&mut rng);
    Ok(out)
}

/// Splits `0..n` into (training, held-out) index sets, each sorted.
pub fn split_indices(n: usize, heldout: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, Purpose::Split, 0));
    let mut held: Vec<usize> = idx[..heldout.min(n)].to_vec();
    let mut train: Vec<usize> = idx[heldout.min(n)..].to_vec();
    held.sort_unstable();
    train.sort_unstable();
    (train, held)
}

/// Element frequencies of a corpus of SMILES.
pub fn corpus_distribution(molecules: &[String]) -> Result<AtomDistribution> {
    let graphs: Vec<MolGraph> = molecules.iter().map(|s| smiles::parse(s)).collect::<Result<_>>()?;
    AtomDistribution::from_corpus(&graphs)
}

/// Anchor records (`j = 0`) each followed by up to `k` one-edit mutants.
/// Anchor `i` gets id `i` and its own RNG stream.
pub fn generate_dataset(
    anchors: &[String],
    k: usize,
    seed: u64,
    dist: &AtomDistribution,
    cfg: &GenerationConfig,
) -> Result<Vec<MutantRecord>> {
    let mut out = Vec::with_capacity(anchors.len() * (k + 1));
    for (i, s) in anchors.iter().enumerate() {
        let canonical = smiles::canonicalize(s)?;
        let g = smiles::parse(&canonical)?;
        let id = i as u64;
        out.push(MutantRecord::anchor(id, canonical));
        match generate_positive_set(id, &g, k, &mut stream_rng(seed, Purpose::Positives, id), dist, cfg) {
            Ok(records) => out.extend(records),
            Err(Error::NoLegalMutation) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// One supermutant chain of length up to `n` per anchor, anchor record first.
pub fn generate_chains(
    anchors: &[(u64, String)],
    n: usize,
    seed: u64,
    dist: &AtomDistribution,
    cfg: &GenerationConfig,
) -> Result<Vec<MutantRecord>> {
    let mut out = Vec::new();
    for (id, s) in anchors {
        let canonical = smiles::canonicalize(s)?;
        let g = smiles::parse(&canonical)?;
        out.push(MutantRecord::anchor(*id, canonical));
        match generate_supermutant_chain(*id, &g, n, &mut stream_rng(seed, Purpose::Chains, *id), dist, cfg) {
            Ok(records) => out.extend(records),
            Err(Error::NoLegalMutation) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn to_jsonl(records: &[MutantRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_jsonl(text: &str) -> Result<Vec<MutantRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Data(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Records grouped by anchor id, each group starting with its anchor.
pub fn group_records(records: &[MutantRecord]) -> Result<Vec<(MutantRecord, Vec<MutantRecord>)>> {
    let mut groups: BTreeMap<u64, (Option<MutantRecord>, Vec<MutantRecord>)> = BTreeMap::new();
    for r in records {
        let entry = groups.entry(r.anchor_id).or_default();
        if r.is_anchor() {
            if entry.0.replace(r.clone()).is_some() {
                return Err(Error::Data(format!("anchor {} appears twice", r.anchor_id)));
            }
        } else {
            entry.1.push(r.clone());
        }
    }
    groups
        .into_iter()
        .map(|(id, (a, ms))| {
            a.map(|a| (a, ms)).ok_or_else(|| Error::Data(format!("mutants of anchor {id} lack an anchor record")))
        })
        .collect()
}

/// Covariance of the anchors' property vectors.
pub fn fit_anchor_covariance(records: &[MutantRecord]) -> Result<CovarianceModel> {
    let props = records
        .iter()
        .filter(|r| r.is_anchor())
        .map(|r| compute_properties(&smiles::parse(&r.smiles)?))
        .collect::<Result<Vec<_>>>()?;
    fit_covariance(&props)
}

/// Counts of filter verdicts over mutant records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterSummary {
    pub kept: usize,
    pub faulty: usize,
}

impl FilterSummary {
    pub fn kept_fraction(&self) -> f64 {
        let total = self.kept + self.faulty;
        if total == 0 {
            1.0
        } else {
            self.kept as f64 / total as f64
        }
    }
}

/// Assigns KEPT/FAULTY to every mutant; record order is preserved.
pub fn filter_dataset(
    records: &[MutantRecord],
    model: &CovarianceModel,
    threshold: f64,
) -> Result<(Vec<MutantRecord>, FilterSummary)> {
    let mut anchors: BTreeMap<u64, MolGraph> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_anchor()) {
        anchors.insert(r.anchor_id, smiles::parse(&r.smiles)?);
    }
    let mut out = Vec::with_capacity(records.len());
    let mut summary = FilterSummary::default();
    for r in records {
        if r.is_anchor() {
            out.push(r.clone());
            continue;
        }
        let anchor = anchors
            .get(&r.anchor_id)
            .ok_or_else(|| Error::Data(format!("mutant of anchor {} without anchor record", r.anchor_id)))?;
        let judged = filter_faulty_positives(anchor, std::slice::from_ref(r), model, threshold)?.remove(0);
        match judged.verdict {
            Verdict::Faulty => summary.faulty += 1,
            _ => summary.kept += 1,
        }
        out.push(judged);
    }
    Ok((out, summary))
}

/// Evaluation chains from chain records (anchor plus members in order).
pub fn chains_from_records(records: &[MutantRecord]) -> Result<Vec<Chain>> {
    Ok(group_records(records)?
        .into_iter()
        .map(|(a, ms)| Chain { anchor: a.smiles, members: ms.into_iter().map(|m| (m.ged_nominal, m.smiles)).collect() })
        .collect())
}

/// Anchor SMILES with their non-faulty mutants, for training.
pub fn training_groups(records: &[MutantRecord]) -> Result<Vec<Vec<String>>> {
    Ok(group_records(records)?
        .into_iter()
        .map(|(a, ms)| {
            std::iter::once(a.smiles)
                .chain(ms.into_iter().filter(|m| m.verdict != Verdict::Faulty).map(|m| m.smiles))
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIMITS: CorpusLimits = CorpusLimits { min_atoms: 3, max_atoms: 10, max_chars: 30 };

    #[test]
    fn seeds_parse() {
        let seeds = seed_molecules().unwrap();
        assert!(seeds.len() > 100);
        for s in &seeds {
            assert!(smiles::parse(s).unwrap().is_valid());
        }
    }

    #[test]
    fn toy_corpus_is_distinct_bounded_and_reproducible() {
        let a = toy_corpus(150, LIMITS, 5).unwrap();
        assert_eq!(a, toy_corpus(150, LIMITS, 5).unwrap());
        assert_ne!(a, toy_corpus(150, LIMITS, 6).unwrap());
        let set: HashSet<&String> = a.iter().collect();
        assert_eq!(set.len(), 150);
        for s in &a {
            let g = smiles::parse(s).unwrap();
            assert!(g.is_valid() && g.is_connected());
            assert!((3..=10).contains(&g.atom_count()) && s.len() <= 30);
            assert_eq!(&smiles::canonicalize(s).unwrap(), s);
        }
    }

    #[test]
    fn dataset_streams_are_per_anchor() {
        let corpus = toy_corpus(20, LIMITS, 1).unwrap();
        let dist = corpus_distribution(&corpus).unwrap();
        let cfg = GenerationConfig::default();
        let full = generate_dataset(&corpus, 4, 9, &dist, &cfg).unwrap();
        assert_eq!(to_jsonl(&full).unwrap(), to_jsonl(&generate_dataset(&corpus, 4, 9, &dist, &cfg).unwrap()).unwrap());
        // anchor 3's records do not depend on the anchors before it
        let alone = generate_dataset(&corpus[3..4], 4, 9, &dist, &cfg).unwrap();
        let from_full: Vec<&MutantRecord> = full.iter().filter(|r| r.anchor_id == 3).collect();
        let regen = generate_positive_set(
            3,
            &smiles::parse(&corpus[3]).unwrap(),
            4,
            &mut stream_rng(9, Purpose::Positives, 3),
            &dist,
            &cfg,
        )
        .unwrap();
        assert_eq!(
            from_full[1..].iter().map(|r| &r.smiles).collect::<Vec<_>>(),
            regen.iter().map(|r| &r.smiles).collect::<Vec<_>>()
        );
        assert_eq!(alone[0].smiles, corpus[3]);
        let back = from_jsonl(&to_jsonl(&full).unwrap()).unwrap();
        assert_eq!(back, full);
        assert!(full.iter().filter(|r| r.is_anchor()).all(|r| r.ops.is_empty() && r.ged_nominal == 0));
    }

    #[test]
    fn filter_thresholds() {
        let corpus = toy_corpus(40, LIMITS, 2).unwrap();
        let dist = corpus_distribution(&corpus).unwrap();
        let data = generate_dataset(&corpus, 5, 3, &dist, &GenerationConfig::default()).unwrap();
        let cov = fit_anchor_covariance(&data).unwrap();
        let (all, s) = filter_dataset(&data, &cov, f64::INFINITY).unwrap();
        assert_eq!(s.faulty, 0);
        assert_eq!(all.len(), data.len());
        let (_, none) = filter_dataset(&data, &cov, 0.0).unwrap();
        assert_eq!(none.kept, 0, "every mutant changes some property");
        let mut last = usize::MAX;
        for t in [8.0, 6.0, 4.0, 3.0, 2.0, 1.0, 0.5] {
            let (_, s) = filter_dataset(&data, &cov, t).unwrap();
            assert!(s.kept <= last);
            last = s.kept;
        }
    }

    #[test]
    fn chains_group_by_anchor() {
        let corpus = toy_corpus(10, LIMITS, 4).unwrap();
        let dist = corpus_distribution(&corpus).unwrap();
        let anchors: Vec<(u64, String)> = corpus.iter().cloned().enumerate().map(|(i, s)| (i as u64 * 2, s)).collect();
        let recs = generate_chains(&anchors, 3, 1, &dist, &GenerationConfig::default()).unwrap();
        let chains = chains_from_records(&recs).unwrap();
        assert_eq!(chains.len(), 10);
        for c in &chains {
            assert!(c.members.iter().enumerate().all(|(i, (n, _))| *n == i + 1));
        }
    }

    #[test]
    fn split_is_a_partition() {
        let (train, held) = split_indices(50, 7, 3);
        assert_eq!(held.len(), 7);
        let mut all: Vec<usize> = train.iter().chain(&held).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }
}
