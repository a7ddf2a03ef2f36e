//! Single node-edit mutations, positive sets and supermutant chains.
//!
//! The edit algebra is self-inverse: `add` attaches a non-aromatic atom by a
//! single bond and `remove` deletes a non-aromatic leaf held by a single
//! bond when the neighbour is left with a hydrogen to re-attach it; `replace` swaps an element at a site where both elements fit the
//! current bonds. Aromatic sites only toggle between `c` (two ring bonds)
//! and pyridine-type `n`.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::molgraph::{element_index, Atom, BondOrder, Element, MolGraph};
use crate::smiles::{self, MAX_SMILES_CHARS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutationKind {
    Add,
    Replace,
    Remove,
}

impl MutationKind {
    pub const ALL: [MutationKind; 3] = [MutationKind::Add, MutationKind::Replace, MutationKind::Remove];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MutationOp {
    pub kind: MutationKind,
    /// Atom id in the graph the op is applied to (pre-edit numbering).
    pub site: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<Element>,
}

/// Probabilities over the ten concrete elements, indexed like `Element::CONCRETE`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomDistribution {
    probs: [f64; 10],
}

impl AtomDistribution {
    pub fn uniform() -> Self {
        AtomDistribution { probs: [0.1; 10] }
    }

    /// Normalizes non-negative weights indexed like `Element::CONCRETE`.
    pub fn from_weights(weights: [f64; 10]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || total <= 0.0 {
            return Err(Error::Data("atom weights must be non-negative with positive sum".into()));
        }
        Ok(AtomDistribution { probs: weights.map(|w| w / total) })
    }

    /// Relative frequencies of concrete elements; `Other` atoms are ignored.
    pub fn from_corpus<'a>(corpus: impl IntoIterator<Item = &'a MolGraph>) -> Result<Self> {
        let mut counts = [0.0; 10];
        for g in corpus {
            for a in g.atoms() {
                if a.element != Element::Other {
                    counts[element_index(a.element)] += 1.0;
                }
            }
        }
        if counts.iter().sum::<f64>() == 0.0 {
            return Err(Error::EmptyCorpus);
        }
        Self::from_weights(counts)
    }

    pub fn prob(&self, e: Element) -> f64 {
        match e {
            Element::Other => 0.0,
            e => self.probs[element_index(e)],
        }
    }

    pub fn probs(&self) -> &[f64; 10] {
        &self.probs
    }

    /// Draws from the distribution restricted to `allowed`; `None` if the
    /// restriction has no mass.
    fn sample_from(&self, allowed: &[Element], rng: &mut ChaCha8Rng) -> Option<Element> {
        let total: f64 = allowed.iter().map(|&e| self.prob(e)).sum();
        if total <= 0.0 {
            return None;
        }
        let mut u = rng.gen::<f64>() * total;
        for &e in allowed {
            u -= self.prob(e);
            if u < 0.0 {
                return Some(e);
            }
        }
        allowed.iter().rev().copied().find(|&e| self.prob(e) > 0.0)
    }
}

/// Elements that may replace the atom at `site`.
fn replacement_elements(g: &MolGraph, site: usize) -> Vec<Element> {
    if g.atom_count() < 2 {
        return Vec::new();
    }
    let atom = g.atom(site);
    if atom.element == Element::Other {
        return Vec::new();
    }
    if atom.aromatic {
        let ring_only = g.neighbors(site).all(|(_, o)| o == BondOrder::Aromatic) && g.degree(site) == 2;
        return match atom.element {
            Element::C if ring_only && atom.explicit_h.is_none_or(|h| h == 1) => vec![Element::N],
            Element::N if ring_only && g.hydrogen_count(site) == 0 => vec![Element::C],
            _ => Vec::new(),
        };
    }
    let used = g.bond_order_sum(site);
    Element::CONCRETE
        .iter()
        .copied()
        .filter(|&e| e != atom.element && e.max_valence().is_some_and(|m| m >= used))
        .collect()
}

fn can_add(g: &MolGraph, site: usize) -> bool {
    g.atom(site).element != Element::Other && g.hydrogen_count(site) > 0
}

/// Hydrogens a fresh atom of `e` carries on a single bond.
fn fresh_leaf_hydrogens(e: Element) -> u8 {
    e.valences().iter().find(|&&v| v >= 1).map_or(0, |&v| v - 1)
}

/// Hydrogens on `nbr` once one of its single-bonded leaves is gone.
fn hydrogens_after_leaf_loss(g: &MolGraph, nbr: usize) -> u8 {
    let a = g.atom(nbr);
    if a.aromatic || a.explicit_h.is_some() {
        return g.hydrogen_count(nbr) + 1;
    }
    let used = g.bond_order_sum(nbr) - 1;
    a.element.valences().iter().find(|&&v| v >= used).map_or(0, |&v| v - used)
}

/// A leaf may go only if adding it back is legal and restores the graph,
/// which keeps the edit algebra self-inverse.
fn can_remove(g: &MolGraph, site: usize) -> bool {
    let atom = g.atom(site);
    g.atom_count() >= 2
        && g.degree(site) == 1
        && !atom.aromatic
        && atom.element != Element::Other
        && g.hydrogen_count(site) == fresh_leaf_hydrogens(atom.element)
        && g.neighbors(site).all(|(nbr, o)| {
            o == BondOrder::Single && g.atom(nbr).element != Element::Other && hydrogens_after_leaf_loss(g, nbr) > 0
        })
}

/// Every legal fully specified op of one kind.
pub fn enumerate_sites(graph: &MolGraph, kind: MutationKind) -> Vec<MutationOp> {
    let mut ops = Vec::new();
    for site in 0..graph.atom_count() {
        match kind {
            MutationKind::Add if can_add(graph, site) => {
                ops.extend(Element::CONCRETE.iter().map(|&e| MutationOp { kind, site, element: Some(e) }));
            }
            MutationKind::Replace => {
                ops.extend(replacement_elements(graph, site).into_iter().map(|e| MutationOp {
                    kind,
                    site,
                    element: Some(e),
                }));
            }
            MutationKind::Remove if can_remove(graph, site) => {
                ops.push(MutationOp { kind, site, element: None });
            }
            _ => {}
        }
    }
    ops
}

fn is_legal(graph: &MolGraph, op: &MutationOp) -> bool {
    if op.site >= graph.atom_count() {
        return false;
    }
    match (op.kind, op.element) {
        (MutationKind::Add, Some(e)) => e != Element::Other && can_add(graph, op.site),
        (MutationKind::Replace, Some(e)) => replacement_elements(graph, op.site).contains(&e),
        (MutationKind::Remove, None) => can_remove(graph, op.site),
        _ => false,
    }
}

/// Applies a legal op. The result is valid and not isomorphic to the input.
pub fn apply(graph: &MolGraph, op: &MutationOp) -> Result<MolGraph> {
    if !is_legal(graph, op) {
        return Err(Error::IllegalMutation(format!("{op:?}")));
    }
    let mut out = graph.clone();
    match op.kind {
        MutationKind::Add => {
            let e = op.element.expect("checked legal");
            let site = out.atom_mut(op.site);
            if let Some(h) = site.explicit_h.as_mut() {
                *h -= 1;
            }
            let new = out.add_atom(Atom::new(e));
            out.add_bond(op.site, new, BondOrder::Single)?;
        }
        MutationKind::Replace => {
            let e = op.element.expect("checked legal");
            let atom = out.atom_mut(op.site);
            atom.element = e;
            // an aromatic site turning into c keeps its bracket H count
            if !atom.aromatic || e == Element::N {
                atom.explicit_h = None;
            }
        }
        MutationKind::Remove => {
            let (nbr, _) = graph.neighbors(op.site).next().expect("leaf has a neighbour");
            let h_before = graph.hydrogen_count(nbr);
            let n_atom = out.atom_mut(nbr);
            if n_atom.aromatic && n_atom.element == Element::N {
                // pyrrole-type nitrogen keeps its lone pair in the ring and gains an H
                n_atom.explicit_h = Some(h_before + 1);
            } else if let Some(h) = n_atom.explicit_h.as_mut() {
                *h += 1;
            }
            out = out.without_atom(op.site);
        }
    }
    if let Some(v) = out.validate().first() {
        return Err(Error::InvalidGraph(format!("mutation {op:?} produced an invalid graph: {v}")));
    }
    Ok(out)
}

/// All graphs one legal edit away (duplicates possible).
pub fn neighbors(graph: &MolGraph) -> Vec<MolGraph> {
    MutationKind::ALL
        .iter()
        .flat_map(|&k| enumerate_sites(graph, k))
        .map(|op| apply(graph, &op).expect("enumerated ops are legal"))
        .collect()
}

/// Atoms that later chain steps may not replace or remove, and sites that
/// may not receive a new atom.
#[derive(Debug, Clone, Default)]
struct Touched {
    edited: Vec<bool>,
    no_add: Vec<bool>,
}

impl Touched {
    fn new(n: usize) -> Self {
        Touched { edited: vec![false; n], no_add: vec![false; n] }
    }

    fn allows(&self, op: &MutationOp) -> bool {
        match op.kind {
            MutationKind::Add => !self.no_add[op.site],
            MutationKind::Replace | MutationKind::Remove => !self.edited[op.site],
        }
    }

    fn record(&mut self, graph: &MolGraph, op: &MutationOp) {
        match op.kind {
            MutationKind::Add => {
                self.edited.push(true);
                self.no_add.push(false);
            }
            MutationKind::Replace => self.edited[op.site] = true,
            MutationKind::Remove => {
                let (nbr, _) = graph.neighbors(op.site).next().expect("leaf has a neighbour");
                self.no_add[nbr] = true;
                self.edited.remove(op.site);
                self.no_add.remove(op.site);
            }
        }
    }
}

/// Samples one op: kind uniform over kinds with a usable site, site uniform,
/// incoming element from `dist` restricted to the legal ones.
fn sample_op(
    graph: &MolGraph,
    rng: &mut ChaCha8Rng,
    dist: &AtomDistribution,
    allow: impl Fn(&MutationOp) -> bool,
) -> Option<MutationOp> {
    let mut per_kind: Vec<(MutationKind, Vec<(usize, Vec<Element>)>)> = Vec::new();
    for kind in MutationKind::ALL {
        let mut sites: Vec<(usize, Vec<Element>)> = Vec::new();
        for op in enumerate_sites(graph, kind).into_iter().filter(|op| allow(op)) {
            match sites.last_mut() {
                Some((s, els)) if *s == op.site => els.extend(op.element),
                _ => sites.push((op.site, op.element.into_iter().collect())),
            }
        }
        if kind != MutationKind::Remove {
            sites.retain(|(_, els)| els.iter().any(|&e| dist.prob(e) > 0.0));
        }
        if !sites.is_empty() {
            per_kind.push((kind, sites));
        }
    }
    if per_kind.is_empty() {
        return None;
    }
    let (kind, sites) = &per_kind[rng.gen_range(0..per_kind.len())];
    let (site, elements) = &sites[rng.gen_range(0..sites.len())];
    let element = match kind {
        MutationKind::Remove => None,
        _ => Some(dist.sample_from(elements, rng).expect("site kept only with positive mass")),
    };
    Some(MutationOp { kind: *kind, site: *site, element })
}

/// One random mutant and the op that produced it.
pub fn sample_mutant(
    graph: &MolGraph,
    rng: &mut ChaCha8Rng,
    dist: &AtomDistribution,
) -> Result<(MolGraph, MutationOp)> {
    let op = sample_op(graph, rng, dist, |_| true).ok_or(Error::NoLegalMutation)?;
    Ok((apply(graph, &op)?, op))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Kept,
    Faulty,
    Unverified,
}

/// Provenance of one anchor (`j == 0`, no ops) or mutant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutantRecord {
    pub anchor_id: u64,
    pub j: usize,
    pub ops: Vec<MutationOp>,
    pub smiles: String,
    pub ged_nominal: usize,
    pub verdict: Verdict,
}

impl MutantRecord {
    pub fn anchor(anchor_id: u64, smiles: String) -> Self {
        MutantRecord { anchor_id, j: 0, ops: Vec::new(), smiles, ged_nominal: 0, verdict: Verdict::Kept }
    }

    pub fn is_anchor(&self) -> bool {
        self.j == 0
    }
}

/// Generation knobs shared by positive sets and chains.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    /// Sampling attempts per slot before falling back to enumeration.
    pub retry_budget: usize,
    /// Mutants with a longer canonical SMILES are discarded.
    pub max_chars: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig { retry_budget: 50, max_chars: MAX_SMILES_CHARS }
    }
}

/// Up to `k` distinct one-edit mutants of `anchor`.
pub fn generate_positive_set(
    anchor_id: u64,
    anchor: &MolGraph,
    k: usize,
    rng: &mut ChaCha8Rng,
    dist: &AtomDistribution,
    cfg: &GenerationConfig,
) -> Result<Vec<MutantRecord>> {
    let anchor_smiles = smiles::write(anchor)?;
    if sample_op(anchor, rng, dist, |_| true).is_none() {
        return Err(Error::NoLegalMutation);
    }
    let mut seen: HashSet<String> = HashSet::from([anchor_smiles]);
    let mut out = Vec::with_capacity(k);
    'slots: while out.len() < k {
        for _ in 0..cfg.retry_budget {
            let op = sample_op(anchor, rng, dist, |_| true).expect("anchor has legal ops");
            let g = apply(anchor, &op)?;
            let s = smiles::write_unchecked(&g);
            if s.len() <= cfg.max_chars && seen.insert(s.clone()) {
                out.push(record(anchor_id, out.len() + 1, vec![op], s));
                continue 'slots;
            }
        }
        // sampling keeps hitting duplicates: pick uniformly among unseen neighbours
        let mut fresh: Vec<(MutationOp, String)> = Vec::new();
        for kind in MutationKind::ALL {
            for op in enumerate_sites(anchor, kind) {
                if op.element.is_some_and(|e| dist.prob(e) == 0.0) {
                    continue;
                }
                let s = smiles::write_unchecked(&apply(anchor, &op)?);
                if s.len() <= cfg.max_chars && !seen.contains(&s) && !fresh.iter().any(|(_, f)| *f == s) {
                    fresh.push((op, s));
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        let (op, s) = fresh.swap_remove(rng.gen_range(0..fresh.len()));
        seen.insert(s.clone());
        out.push(record(anchor_id, out.len() + 1, vec![op], s));
    }
    Ok(out)
}

fn record(anchor_id: u64, j: usize, ops: Vec<MutationOp>, smiles: String) -> MutantRecord {
    let ged_nominal = ops.len();
    MutantRecord { anchor_id, j, ops, smiles, ged_nominal, verdict: Verdict::Unverified }
}

/// Successive mutants g(1)..g(n), each one edit from the previous.
///
/// No step may replace or remove an atom created or edited by an earlier
/// step, nor add onto the neighbour of a removed leaf; every member must be
/// non-isomorphic to the anchor and all earlier members. The chain is
/// truncated if a step cannot be completed within the retry budget.
pub fn generate_supermutant_chain(
    anchor_id: u64,
    anchor: &MolGraph,
    n: usize,
    rng: &mut ChaCha8Rng,
    dist: &AtomDistribution,
    cfg: &GenerationConfig,
) -> Result<Vec<MutantRecord>> {
    let mut seen: HashSet<String> = HashSet::from([smiles::write(anchor)?]);
    let mut current = anchor.clone();
    let mut touched = Touched::new(anchor.atom_count());
    let mut ops: Vec<MutationOp> = Vec::new();
    let mut out = Vec::with_capacity(n);
    'steps: for step in 1..=n {
        for _ in 0..cfg.retry_budget {
            let Some(op) = sample_op(&current, rng, dist, |op| touched.allows(op)) else {
                if step == 1 {
                    return Err(Error::NoLegalMutation);
                }
                break 'steps;
            };
            let next = apply(&current, &op)?;
            let s = smiles::write_unchecked(&next);
            if s.len() <= cfg.max_chars && seen.insert(s.clone()) {
                touched.record(&current, &op);
                ops.push(op);
                out.push(MutantRecord {
                    anchor_id,
                    j: step,
                    ops: ops.clone(),
                    smiles: s,
                    ged_nominal: step,
                    verdict: Verdict::Unverified,
                });
                current = next;
                continue 'steps;
            }
        }
        break;
    }
    Ok(out)
}

/// Replays a record's ops from the anchor graph.
pub fn replay(anchor: &MolGraph, ops: &[MutationOp]) -> Result<MolGraph> {
    ops.iter().try_fold(anchor.clone(), |g, op| apply(&g, op))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{ged_exact, is_isomorphic, GedOutcome};
    use crate::smiles::{canonicalize, parse};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn remove_sites() {
        assert!(enumerate_sites(&parse("C").unwrap(), MutationKind::Remove).is_empty());
        let ops = enumerate_sites(&parse("CC").unwrap(), MutationKind::Remove);
        assert_eq!(ops.iter().map(|o| o.site).collect::<Vec<_>>(), vec![0, 1]);
        // double-bonded and aromatic leaves stay
        assert_eq!(enumerate_sites(&parse("CC=O").unwrap(), MutationKind::Remove).len(), 1);
        assert_eq!(enumerate_sites(&parse("c1ccccc1").unwrap(), MutationKind::Remove).len(), 0);
        // losing an OH would leave P(III) without the hydrogen needed to undo it
        assert!(enumerate_sites(&parse("O=P(O)O").unwrap(), MutationKind::Remove).is_empty());
    }

    #[test]
    fn every_edit_can_be_undone() {
        for s in ["O=P(O)OO", "CS(=O)(=O)N", "Cc1cc[nH]c1", "Cc1ccncc1", "CC(Cl)C#N", "OB(O)c1ccccc1", "C[PH2]", "CSC"]
        {
            let g = parse(s).unwrap();
            for n in neighbors(&g) {
                assert!(
                    neighbors(&n).iter().any(|back| is_isomorphic(back, &g)),
                    "{s} -> {}",
                    smiles::write(&n).unwrap()
                );
            }
        }
    }

    #[test]
    fn replace_sites_follow_valence_table() {
        let g = parse("C#N").unwrap();
        let mut at_n: Vec<Element> = enumerate_sites(&g, MutationKind::Replace)
            .into_iter()
            .filter(|o| o.site == 1)
            .filter_map(|o| o.element)
            .collect();
        at_n.sort();
        assert!(at_n.contains(&Element::P));
        assert_eq!(at_n, vec![Element::C, Element::S, Element::P, Element::B]);
        assert!(enumerate_sites(&parse("C").unwrap(), MutationKind::Replace).is_empty());
    }

    #[test]
    fn aromatic_replacement_toggles_c_and_n() {
        let g = parse("Cc1ccccc1").unwrap();
        let ops = enumerate_sites(&g, MutationKind::Replace);
        assert!(ops.iter().filter(|o| g.atom(o.site).aromatic).all(|o| o.element == Some(Element::N)));
        // the substituted ring carbon is not a site
        assert!(!ops.iter().any(|o| o.site == 1));
        let pyridine = parse("c1ccncc1").unwrap();
        let back =
            apply(&pyridine, &MutationOp { kind: MutationKind::Replace, site: 3, element: Some(Element::C) }).unwrap();
        assert_eq!(smiles::write(&back).unwrap(), "c1ccccc1");
    }

    #[test]
    fn apply_examples() {
        let cc = parse("CC").unwrap();
        let add = apply(&cc, &MutationOp { kind: MutationKind::Add, site: 0, element: Some(Element::O) }).unwrap();
        assert_eq!(smiles::write(&add).unwrap(), canonicalize("CCO").unwrap());
        assert_eq!(ged_exact(&cc, &add, 2).unwrap(), GedOutcome::Distance(1));

        let cco = parse("CCO").unwrap();
        let rem = apply(&cco, &MutationOp { kind: MutationKind::Remove, site: 2, element: None }).unwrap();
        assert_eq!(smiles::write(&rem).unwrap(), "CC");

        let rep = apply(&cc, &MutationOp { kind: MutationKind::Replace, site: 1, element: Some(Element::N) }).unwrap();
        assert_eq!(smiles::write(&rep).unwrap(), canonicalize("CN").unwrap());
        assert!(!is_isomorphic(&cc, &rep));
        assert_eq!(ged_exact(&cc, &rep, 2).unwrap(), GedOutcome::Distance(1));
    }

    #[test]
    fn illegal_ops_rejected() {
        let g = parse("CC=O").unwrap();
        let bad = [
            MutationOp { kind: MutationKind::Remove, site: 2, element: None },
            MutationOp { kind: MutationKind::Add, site: 2, element: Some(Element::C) },
            MutationOp { kind: MutationKind::Replace, site: 2, element: Some(Element::F) },
            MutationOp { kind: MutationKind::Replace, site: 1, element: Some(Element::C) },
            MutationOp { kind: MutationKind::Add, site: 9, element: Some(Element::C) },
        ];
        for op in bad {
            assert!(matches!(apply(&g, &op), Err(Error::IllegalMutation(_))), "{op:?}");
        }
    }

    #[test]
    fn pyrrole_nitrogen_round_trip() {
        let g = parse("Cn1cccc1").unwrap();
        let stripped = apply(&g, &MutationOp { kind: MutationKind::Remove, site: 0, element: None }).unwrap();
        assert_eq!(smiles::write(&stripped).unwrap(), canonicalize("c1cc[nH]c1").unwrap());
        let nh = stripped.atoms().iter().position(|a| a.element == Element::N).unwrap();
        let back =
            apply(&stripped, &MutationOp { kind: MutationKind::Add, site: nh, element: Some(Element::C) }).unwrap();
        assert!(is_isomorphic(&back, &g));
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = parse("CC").unwrap();
        let dist = AtomDistribution::uniform();
        let a = sample_mutant(&g, &mut rng(11), &dist).unwrap();
        let b = sample_mutant(&g, &mut rng(11), &dist).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn methane_only_grows() {
        let mut w = [0.0; 10];
        w[element_index(Element::O)] = 1.0;
        let dist = AtomDistribution::from_weights(w).unwrap();
        let (g, op) = sample_mutant(&parse("C").unwrap(), &mut rng(3), &dist).unwrap();
        assert_eq!(op.kind, MutationKind::Add);
        assert_eq!(smiles::write(&g).unwrap(), canonicalize("CO").unwrap());
    }

    #[test]
    fn no_legal_mutation_for_lone_unknown_atom() {
        let g = crate::smiles::parse_with("*", crate::smiles::ParseMode::Lenient).unwrap();
        assert!(matches!(sample_mutant(&g, &mut rng(0), &AtomDistribution::uniform()), Err(Error::NoLegalMutation)));
    }

    #[test]
    fn kind_frequencies_are_uniform_over_legal_kinds() {
        // 10,000 draws; each of three legal kinds has p = 1/3
        let g = parse("CCO").unwrap();
        let dist = AtomDistribution::uniform();
        let mut r = rng(2024);
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            let (_, op) = sample_mutant(&g, &mut r, &dist).unwrap();
            counts[MutationKind::ALL.iter().position(|&k| k == op.kind).unwrap()] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn positive_set_of_ethane() {
        let g = parse("CC").unwrap();
        let set =
            generate_positive_set(1, &g, 10, &mut rng(5), &AtomDistribution::uniform(), &Default::default()).unwrap();
        assert_eq!(set.len(), 10);
        let distinct: HashSet<_> = set.iter().map(|r| r.smiles.clone()).collect();
        assert_eq!(distinct.len(), 10);
        for r in &set {
            let m = parse(&r.smiles).unwrap();
            assert_eq!(ged_exact(&g, &m, 2).unwrap(), GedOutcome::Distance(1), "{}", r.smiles);
            assert_eq!(canonicalize(&r.smiles).unwrap(), r.smiles);
            assert_eq!(smiles::write(&replay(&g, &r.ops).unwrap()).unwrap(), r.smiles);
        }
    }

    #[test]
    fn positive_set_of_methane_is_its_add_neighbourhood() {
        let g = parse("C").unwrap();
        let neighbourhood: HashSet<String> = neighbors(&g).iter().map(|m| smiles::write(m).unwrap()).collect();
        assert_eq!(neighbourhood.len(), 10);
        let set =
            generate_positive_set(0, &g, 10, &mut rng(1), &AtomDistribution::uniform(), &Default::default()).unwrap();
        assert!(set.len() <= neighbourhood.len());
        assert_eq!(set.len(), 10, "enumeration fallback fills the whole neighbourhood");
    }

    #[test]
    fn chains_are_bounded_by_their_length() {
        let g = parse("CCO").unwrap();
        let dist = AtomDistribution::uniform();
        let chain = generate_supermutant_chain(0, &g, 3, &mut rng(9), &dist, &Default::default()).unwrap();
        assert_eq!(chain.iter().map(|r| r.ged_nominal).collect::<Vec<_>>(), vec![1, 2, 3]);
        for r in &chain {
            let m = parse(&r.smiles).unwrap();
            let d = ged_exact(&g, &m, r.ged_nominal).unwrap().distance().expect("within nominal");
            assert!(d <= r.ged_nominal);
        }
        let again = generate_supermutant_chain(0, &g, 3, &mut rng(9), &dist, &Default::default()).unwrap();
        assert_eq!(chain, again);
    }

    #[test]
    fn atom_distribution_counts() {
        let corpus = [parse("CC").unwrap(), parse("CO").unwrap()];
        let d = AtomDistribution::from_corpus(&corpus).unwrap();
        assert!((d.prob(Element::C) - 0.75).abs() < 1e-15);
        assert!((d.prob(Element::O) - 0.25).abs() < 1e-15);
        assert!(matches!(AtomDistribution::from_corpus(&[]), Err(Error::EmptyCorpus)));
        let benz = [parse("c1ccccc1").unwrap()];
        assert_eq!(AtomDistribution::from_corpus(&benz).unwrap().prob(Element::C), 1.0);
    }
}
