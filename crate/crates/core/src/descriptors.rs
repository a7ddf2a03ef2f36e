//! Property vectors, Mahalanobis faulty-positive filtering, circular
//! fingerprints and Tanimoto distance.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::molgraph::{element_index, BondOrder, Element, MolGraph};
use crate::mutation::{MutantRecord, Verdict};
use crate::smiles;

pub const PROPERTY_COUNT: usize = 10;

pub const PROPERTY_NAMES: [&str; PROPERTY_COUNT] = [
    "molecular_weight",
    "heavy_atom_count",
    "ring_count",
    "aromatic_ring_count",
    "hbd_count",
    "hba_count",
    "rotatable_bond_count",
    "fraction_csp3",
    "halogen_count",
    "heteroatom_fraction",
];

const HYDROGEN_WEIGHT: f64 = 1.008;

/// Ten physicochemical properties in `PROPERTY_NAMES` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyVector(pub [f64; PROPERTY_COUNT]);

impl PropertyVector {
    pub fn values(&self) -> &[f64; PROPERTY_COUNT] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        PROPERTY_NAMES.iter().position(|n| *n == name).map(|i| self.0[i])
    }

    fn as_vector(&self) -> SVector<f64, PROPERTY_COUNT> {
        SVector::from(self.0)
    }
}

/// Bonds whose removal disconnects the graph (i.e. not on any ring).
fn bridges(graph: &MolGraph) -> Vec<bool> {
    let n = graph.atom_count();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut is_bridge = vec![false; graph.bond_count()];
    let bond_index = |a: usize, b: usize| {
        graph.bonds().iter().position(|bd| (bd.a == a && bd.b == b) || (bd.a == b && bd.b == a)).expect("bond")
    };
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // iterative DFS: (atom, parent, neighbour cursor)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (u, parent, ref mut cursor)) = stack.last_mut() {
            let nbrs: Vec<usize> = graph.neighbors(u).map(|(v, _)| v).collect();
            if *cursor < nbrs.len() {
                let v = nbrs[*cursor];
                *cursor += 1;
                if v == parent {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, u, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if parent != usize::MAX {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > disc[parent] {
                        is_bridge[bond_index(parent, u)] = true;
                    }
                }
            }
        }
    }
    is_bridge
}

/// Cyclomatic number of the subgraph formed by aromatic bonds.
fn aromatic_ring_count(graph: &MolGraph) -> usize {
    let n = graph.atom_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut cycles = 0;
    for b in graph.bonds().iter().filter(|b| b.order == BondOrder::Aromatic) {
        let (ra, rb) = (find(&mut parent, b.a), find(&mut parent, b.b));
        if ra == rb {
            cycles += 1;
        } else {
            parent[ra] = rb;
        }
    }
    cycles
}

pub fn compute_properties(graph: &MolGraph) -> Result<PropertyVector> {
    if let Some(v) = graph.validate().first() {
        return Err(Error::InvalidGraph(v.to_string()));
    }
    let n = graph.atom_count();
    // per-element sums keep the result independent of atom order
    let mut element_counts = [0usize; 11];
    let mut hydrogens = 0usize;
    let (mut hbd, mut hba, mut halogens, mut hetero) = (0usize, 0usize, 0usize, 0usize);
    let (mut carbons, mut sp3) = (0usize, 0usize);
    for (i, atom) in graph.atoms().iter().enumerate() {
        let h = graph.hydrogen_count(i);
        element_counts[element_index(atom.element)] += 1;
        hydrogens += usize::from(h);
        match atom.element {
            Element::N | Element::O => {
                hba += 1;
                if h > 0 {
                    hbd += 1;
                }
            }
            Element::C => {
                carbons += 1;
                if !atom.aromatic && graph.neighbors(i).all(|(_, o)| o == BondOrder::Single) {
                    sp3 += 1;
                }
            }
            _ => {}
        }
        if atom.element.is_halogen() {
            halogens += 1;
        }
        if atom.element != Element::C {
            hetero += 1;
        }
    }
    let mw =
        Element::CONCRETE.iter().map(|&e| e.atomic_weight() * element_counts[element_index(e)] as f64).sum::<f64>()
            + HYDROGEN_WEIGHT * hydrogens as f64;
    let is_bridge = bridges(graph);
    let rotatable = graph
        .bonds()
        .iter()
        .zip(&is_bridge)
        .filter(|(b, &br)| br && b.order == BondOrder::Single && graph.degree(b.a) >= 2 && graph.degree(b.b) >= 2)
        .count();
    let rings = graph.bond_count() + 1 - n;
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(PropertyVector([
        mw,
        n as f64,
        rings as f64,
        aromatic_ring_count(graph) as f64,
        hbd as f64,
        hba as f64,
        rotatable as f64,
        ratio(sp3, carbons),
        halogens as f64,
        ratio(hetero, n),
    ]))
}

/// CSV with a `smiles` key column followed by the ten property columns.
pub fn properties_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a PropertyVector)>) -> String {
    let mut out = String::from("smiles");
    for name in PROPERTY_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (smiles, props) in rows {
        out.push_str(smiles);
        for v in props.values() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

type Mat = SMatrix<f64, PROPERTY_COUNT, PROPERTY_COUNT>;

/// Sample mean and ridge-regularized covariance of property vectors.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    mean: SVector<f64, PROPERTY_COUNT>,
    cov: Mat,
    eps: f64,
    /// Lower Cholesky factor of Σ + εI.
    chol_l: Mat,
}

/// Smallest ridge used when the sample covariance vanishes.
pub const MIN_RIDGE: f64 = 1e-12;

impl CovarianceModel {
    /// Builds a model from explicit parts; fails unless Σ + εI is positive definite.
    pub fn from_parts(
        mean: [f64; PROPERTY_COUNT],
        cov: [[f64; PROPERTY_COUNT]; PROPERTY_COUNT],
        eps: f64,
    ) -> Result<Self> {
        let cov = Mat::from_fn(|r, c| cov[r][c]);
        if (cov - cov.transpose()).abs().max() > 1e-12 * cov.abs().max().max(1.0) {
            return Err(Error::Data("covariance matrix is not symmetric".into()));
        }
        let reg = cov + Mat::identity() * eps;
        let chol = reg.cholesky().ok_or_else(|| Error::Data("covariance is not positive definite".into()))?;
        Ok(CovarianceModel { mean: SVector::from(mean), cov, eps, chol_l: chol.l() })
    }

    pub fn mean(&self) -> [f64; PROPERTY_COUNT] {
        self.mean.into()
    }

    pub fn covariance(&self) -> [[f64; PROPERTY_COUNT]; PROPERTY_COUNT] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.cov[(r, c)]))
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }
}

/// Mean and unbiased covariance with ridge ε = 1e−6·trace(Σ)/10.
pub fn fit_covariance(vectors: &[PropertyVector]) -> Result<CovarianceModel> {
    let needed = PROPERTY_COUNT + 1;
    if vectors.len() < needed {
        return Err(Error::TooFewSamples { needed, got: vectors.len() });
    }
    let n = vectors.len() as f64;
    let mean = vectors.iter().map(PropertyVector::as_vector).sum::<SVector<f64, PROPERTY_COUNT>>() / n;
    let mut cov = Mat::zeros();
    for v in vectors {
        let d = v.as_vector() - mean;
        cov += d * d.transpose();
    }
    cov /= n - 1.0;
    let eps = (1e-6 * cov.trace() / PROPERTY_COUNT as f64).max(MIN_RIDGE);
    CovarianceModel::from_parts(mean.into(), std::array::from_fn(|r| std::array::from_fn(|c| cov[(r, c)])), eps)
}

/// sqrt((x−y)ᵀ(Σ+εI)⁻¹(x−y)) via the Cholesky factor.
pub fn mahalanobis(x: &PropertyVector, y: &PropertyVector, model: &CovarianceModel) -> f64 {
    let d = x.as_vector() - y.as_vector();
    let w = model.chol_l.solve_lower_triangular(&d).expect("Cholesky factor has a positive diagonal");
    w.norm()
}

/// sqrt of the chi-square quantile `q` with ten degrees of freedom.
pub fn chi2_threshold(q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Config(format!("chi-square quantile must lie in [0, 1), got {q}")));
    }
    let dist = ChiSquared::new(PROPERTY_COUNT as f64).expect("positive degrees of freedom");
    Ok(dist.inverse_cdf(q).sqrt())
}

pub const DEFAULT_CHI2_QUANTILE: f64 = 0.99;

pub fn default_threshold() -> f64 {
    chi2_threshold(DEFAULT_CHI2_QUANTILE).expect("valid quantile")
}

/// Marks each mutant KEPT or FAULTY by its Mahalanobis distance to the anchor.
/// Order is preserved.
pub fn filter_faulty_positives(
    anchor: &MolGraph,
    mutants: &[MutantRecord],
    model: &CovarianceModel,
    threshold: f64,
) -> Result<Vec<MutantRecord>> {
    let a = compute_properties(anchor)?;
    mutants
        .iter()
        .map(|r| {
            let m = compute_properties(&smiles::parse(&r.smiles)?)?;
            let verdict = if mahalanobis(&a, &m, model) > threshold { Verdict::Faulty } else { Verdict::Kept };
            Ok(MutantRecord { verdict, ..r.clone() })
        })
        .collect()
}

pub const FINGERPRINT_BITS: usize = 2048;
pub const FINGERPRINT_RADIUS: usize = 2;
const FINGERPRINT_SEED: u64 = 0x005e_ed0f_c12c_u64;

/// Fixed-length bit vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
}

impl Fingerprint {
    pub fn empty(nbits: usize) -> Self {
        Fingerprint { words: vec![0; nbits.div_ceil(64)] }
    }

    pub fn from_bits(nbits: usize, bits: impl IntoIterator<Item = usize>) -> Self {
        let mut fp = Self::empty(nbits);
        for b in bits {
            fp.set(b % nbits);
        }
        fp
    }

    pub fn nbits(&self) -> usize {
        self.words.len() * 64
    }

    pub fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// FNV-1a over 64-bit words, finished with splitmix64.
fn hash_words(words: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ FINGERPRINT_SEED;
    for w in words {
        for byte in w.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    splitmix64(h)
}

fn bond_code(o: BondOrder) -> u64 {
    match o {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

/// Circular fingerprint: atom invariants (element, degree, aromaticity,
/// hydrogens) refined over `radius` rounds of neighbour aggregation; every
/// identifier from every round sets one bit.
pub fn morgan_fingerprint(graph: &MolGraph, radius: usize, nbits: usize) -> Fingerprint {
    let n = graph.atom_count();
    let mut ids: Vec<u64> = (0..n)
        .map(|i| {
            let a = graph.atom(i);
            hash_words(&[
                element_index(a.element) as u64,
                graph.degree(i) as u64,
                u64::from(a.aromatic),
                u64::from(graph.hydrogen_count(i)),
            ])
        })
        .collect();
    let mut fp = Fingerprint::empty(nbits);
    for &id in &ids {
        fp.set((id % nbits as u64) as usize);
    }
    for round in 1..=radius {
        ids = (0..n)
            .map(|i| {
                let mut env: Vec<(u64, u64)> = graph.neighbors(i).map(|(j, o)| (bond_code(o), ids[j])).collect();
                env.sort_unstable();
                let mut words = vec![round as u64, ids[i]];
                words.extend(env.into_iter().flat_map(|(b, id)| [b, id]));
                hash_words(&words)
            })
            .collect();
        for &id in &ids {
            fp.set((id % nbits as u64) as usize);
        }
    }
    fp
}

pub fn fingerprint(graph: &MolGraph) -> Fingerprint {
    morgan_fingerprint(graph, FINGERPRINT_RADIUS, FINGERPRINT_BITS)
}

/// 1 − |a∧b|/|a∨b|; zero when both are empty.
pub fn tanimoto_distance(a: &Fingerprint, b: &Fingerprint) -> f64 {
    assert_eq!(a.words.len(), b.words.len(), "fingerprint lengths differ");
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        0.0
    } else {
        1.0 - f64::from(inter) / f64::from(union)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mutation::MutantRecord;
    use crate::smiles::parse;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn props(s: &str) -> PropertyVector {
        compute_properties(&parse(s).unwrap()).unwrap()
    }

    #[test]
    fn methane() {
        let p = props("C");
        assert!((p.0[0] - 16.043).abs() < 0.01);
        assert_eq!(&p.0[1..], &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn benzene_and_ethanol() {
        let b = props("c1ccccc1");
        assert_eq!(b.get("aromatic_ring_count"), Some(1.0));
        assert_eq!(b.get("ring_count"), Some(1.0));
        assert_eq!(b.get("fraction_csp3"), Some(0.0));
        let e = props("CCO");
        assert_eq!(e.get("hbd_count"), Some(1.0));
        assert_eq!(e.get("hba_count"), Some(1.0));
    }

    #[test]
    fn ring_and_rotor_counts() {
        // naphthalene: two fused aromatic rings
        assert_eq!(props("c1ccc2ccccc2c1").get("aromatic_ring_count"), Some(2.0));
        // biphenyl: one rotatable bond between the rings
        let bp = props("c1ccccc1-c1ccccc1");
        assert_eq!(bp.get("rotatable_bond_count"), Some(1.0));
        assert_eq!(bp.get("aromatic_ring_count"), Some(2.0));
        assert_eq!(props("CCCC").get("rotatable_bond_count"), Some(1.0));
        assert_eq!(props("C1CCCCC1").get("rotatable_bond_count"), Some(0.0));
        let ibu = props("CC(C)Cc1ccc(cc1)C(C)C(=O)O");
        assert!((ibu.0[0] - 206.285).abs() < 0.02);
        assert_eq!(ibu.get("rotatable_bond_count"), Some(4.0));
        assert_eq!(props("FC(F)(F)Cl").get("halogen_count"), Some(4.0));
    }

    #[test]
    fn properties_ignore_atom_order() {
        assert_eq!(props("OCC(N)c1ccccc1"), props("c1ccc(cc1)C(N)CO"));
    }

    #[test]
    fn csv_schema() {
        let p = props("C");
        let csv = properties_csv([("C", &p)]);
        let header = csv.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 11);
        assert_eq!(csv.lines().count(), 2);
    }

    fn identity() -> [[f64; 10]; 10] {
        std::array::from_fn(|r| std::array::from_fn(|c| if r == c { 1.0 } else { 0.0 }))
    }

    #[test]
    fn covariance_guards() {
        let v = PropertyVector([1.0; 10]);
        assert!(matches!(fit_covariance(&[v; 10]), Err(Error::TooFewSamples { needed: 11, got: 10 })));
        let m = fit_covariance(&[v; 20]).unwrap();
        assert_eq!(m.covariance(), [[0.0; 10]; 10]);
        assert!(m.epsilon() > 0.0);
        assert_eq!(mahalanobis(&v, &v, &m), 0.0);
    }

    #[test]
    fn covariance_recovers_axis_variances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sd: [f64; 10] = std::array::from_fn(|i| 0.5 + i as f64);
        let normal = rand_distr_normal();
        let vs: Vec<PropertyVector> =
            (0..10_000).map(|_| PropertyVector(std::array::from_fn(|i| sd[i] * normal(&mut rng)))).collect();
        let m = fit_covariance(&vs).unwrap();
        for i in 0..10 {
            let var = m.covariance()[i][i];
            assert!((var / (sd[i] * sd[i]) - 1.0).abs() < 0.05, "axis {i}: {var}");
        }
    }

    /// Box–Muller standard normal.
    fn rand_distr_normal() -> impl Fn(&mut ChaCha8Rng) -> f64 {
        |rng: &mut ChaCha8Rng| {
            let u1: f64 = 1.0 - rng.gen::<f64>();
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        }
    }

    #[test]
    fn mahalanobis_closed_forms() {
        let mut cov = identity();
        cov[0][0] = 4.0;
        let m = CovarianceModel::from_parts([0.0; 10], cov, 0.0).unwrap();
        let mut x = [0.0; 10];
        x[0] = 2.0;
        assert!((mahalanobis(&PropertyVector(x), &PropertyVector([0.0; 10]), &m) - 1.0).abs() < 1e-15);
        let id = CovarianceModel::from_parts([0.0; 10], identity(), 0.0).unwrap();
        let a = PropertyVector(std::array::from_fn(|i| i as f64));
        let b = PropertyVector(std::array::from_fn(|i| (i * i) as f64 * 0.3));
        let eu: f64 = a.0.iter().zip(&b.0).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!((mahalanobis(&a, &b, &id) - eu).abs() < 1e-12);
        assert!(CovarianceModel::from_parts([0.0; 10], [[0.0; 10]; 10], 0.0).is_err());
    }

    #[test]
    fn default_threshold_value() {
        assert!((default_threshold() - 23.209_251_158_954_36_f64.sqrt()).abs() < 1e-6);
        assert!(chi2_threshold(1.0).is_err());
    }

    #[test]
    fn filter_extremes() {
        let anchor = parse("CCO").unwrap();
        let recs: Vec<MutantRecord> = ["CCCO", "CCN", "CC"]
            .iter()
            .enumerate()
            .map(|(j, s)| MutantRecord {
                anchor_id: 0,
                j: j + 1,
                ops: vec![],
                smiles: smiles::canonicalize(s).unwrap(),
                ged_nominal: 1,
                verdict: Verdict::Unverified,
            })
            .collect();
        let model = CovarianceModel::from_parts([0.0; 10], identity(), 0.0).unwrap();
        let kept = filter_faulty_positives(&anchor, &recs, &model, f64::INFINITY).unwrap();
        assert!(kept.iter().all(|r| r.verdict == Verdict::Kept));
        let none = filter_faulty_positives(&anchor, &recs, &model, 0.0).unwrap();
        assert!(none.iter().all(|r| r.verdict == Verdict::Faulty));
        assert_eq!(none.iter().map(|r| r.j).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn fingerprints() {
        let a = fingerprint(&parse("CC").unwrap());
        assert_eq!(a, fingerprint(&parse("CC").unwrap()));
        assert!(a.popcount() >= 1);
        let b = fingerprint(&parse("c1ccccc1").unwrap());
        assert_ne!(a, b);
        assert_eq!(fingerprint(&parse("OCC").unwrap()), fingerprint(&parse("CCO").unwrap()));
        assert_eq!(tanimoto_distance(&a, &a), 0.0);
    }

    #[test]
    fn tanimoto_arithmetic() {
        let a = Fingerprint::from_bits(64, [0, 1, 2, 3, 4]);
        let b = Fingerprint::from_bits(64, [3, 4, 5, 6, 7]);
        assert!((tanimoto_distance(&a, &b) - 0.75).abs() < 1e-15);
        let c = Fingerprint::from_bits(64, [10]);
        assert_eq!(tanimoto_distance(&a, &c), 1.0);
        let e = Fingerprint::empty(64);
        assert_eq!(tanimoto_distance(&e, &e), 0.0);
    }
}
