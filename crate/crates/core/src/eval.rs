//! Latent-space evaluation: edit-distance/latent-distance rank correlation,
//! slerp interpolation studies and property-difference correlation.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descriptors::{compute_properties, fingerprint, tanimoto_distance, PropertyVector, PROPERTY_NAMES};
use crate::error::{Error, Result};
use crate::model::{self, DecodeMode, Model};
use crate::smiles::{self, TokenSequence};

/// Maps SMILES to latent codes.
pub trait Encoder {
    fn encode(&self, smiles: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// Draws SMILES strings from a latent code.
pub trait Decoder {
    fn sample(&self, z: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<String>>;
}

/// Temperature for interpolant sampling.
pub const SAMPLE_TEMPERATURE: f64 = 1.0;

impl Encoder for Model {
    fn encode(&self, smiles: &[String]) -> Result<Vec<Vec<f64>>> {
        let seqs: Vec<TokenSequence> = smiles.iter().map(|s| smiles::tokenize(s)).collect();
        model::encode(self, &seqs)
    }
}

impl Decoder for Model {
    fn sample(&self, z: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
        let zs = vec![z.to_vec(); n];
        let mode = DecodeMode::Sample { temperature: SAMPLE_TEMPERATURE };
        let out = model::generate_batch(self, &zs, mode, rng, self.config.max_len)?;
        Ok(out.iter().map(smiles::detokenize).collect())
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        pairwise_sum(xs) / xs.len() as f64
    }
}

/// Sample standard deviation (n − 1); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&sq) / (xs.len() - 1) as f64).sqrt()
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("lengths {} and {} differ", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: xs.len() });
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN in rank statistic input".into()));
    }
    Ok(())
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman ρ: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

fn tie_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` in place and returns the number of inversions.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall τ-b in O(n log n) (Knight's algorithm).
pub fn kendall(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    let n = xs.len() as u64;
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(ys[a].total_cmp(&ys[b])));
    let sx: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
    let mut sy: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    let n0 = n * (n - 1) / 2;
    let n1 = tie_pairs(&sx);
    // pairs tied in both coordinates
    let mut n3 = 0u64;
    let mut run = 1u64;
    for k in 1..idx.len() {
        if sx[k] == sx[k - 1] && sy[k] == sy[k - 1] {
            run += 1;
        } else {
            n3 += run * (run - 1) / 2;
            run = 1;
        }
    }
    n3 += run * (run - 1) / 2;
    let swaps = merge_count(&mut sy, &mut Vec::with_capacity(idx.len()));
    let n2 = tie_pairs(&sy);
    if n0 == n1 || n0 == n2 {
        return Err(Error::Undefined("zero variance".into()));
    }
    let num = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    let den = ((n0 - n1) as f64).sqrt() * ((n0 - n2) as f64).sqrt();
    Ok((num / den).clamp(-1.0, 1.0))
}

/// A held-out anchor with its supermutants at nominal edit distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub anchor: String,
    /// (nominal edit distance, SMILES), in chain order.
    pub members: Vec<(usize, String)>,
}

/// Per-anchor rank correlation between edit distance and latent distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub model_tag: String,
    pub latent_dim: usize,
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
    /// Anchors skipped because their latent distances had no variance.
    pub excluded: usize,
    pub mean_rho: f64,
    pub std_rho: f64,
    pub mean_tau: f64,
    pub std_tau: f64,
}

/// Machine-readable run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub model_tag: String,
    pub latent_dim: usize,
    pub mean_rho: f64,
    pub std_rho: f64,
    pub mean_tau: f64,
    pub std_tau: f64,
}

impl CorrelationReport {
    pub fn summary(&self) -> CorrelationSummary {
        CorrelationSummary {
            model_tag: self.model_tag.clone(),
            latent_dim: self.latent_dim,
            mean_rho: self.mean_rho,
            std_rho: self.std_rho,
            mean_tau: self.mean_tau,
            std_tau: self.std_tau,
        }
    }

    /// `anchor_index,rho,tau` rows for the anchors that were scored.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("anchor_index,rho,tau\n");
        for (i, (r, t)) in self.rho.iter().zip(&self.tau).enumerate() {
            out.push_str(&format!("{i},{r},{t}\n"));
        }
        out
    }
}

/// Correlates nominal distance against latent distance to the anchor code,
/// one correlation per chain.
pub fn ged_eud_report(chains: &[Chain], encoder: &dyn Encoder, model_tag: &str) -> Result<CorrelationReport> {
    let mut all = Vec::new();
    for c in chains {
        all.push(c.anchor.clone());
        all.extend(c.members.iter().map(|(_, s)| s.clone()));
    }
    let codes = encoder.encode(&all)?;
    if codes.len() != all.len() {
        return Err(Error::Shape(format!("encoder returned {} codes for {} molecules", codes.len(), all.len())));
    }
    let latent_dim = codes.first().map_or(0, Vec::len);
    let (mut rho, mut tau, mut excluded) = (Vec::new(), Vec::new(), 0);
    let mut at = 0;
    for c in chains {
        let anchor = &codes[at];
        let xs: Vec<f64> = c.members.iter().map(|(n, _)| *n as f64).collect();
        let ys: Vec<f64> = (0..c.members.len()).map(|k| euclidean(anchor, &codes[at + 1 + k])).collect();
        at += 1 + c.members.len();
        match (spearman(&xs, &ys), kendall(&xs, &ys)) {
            (Ok(r), Ok(t)) => {
                rho.push(r);
                tau.push(t);
            }
            (Err(Error::Undefined(_)), _) | (_, Err(Error::Undefined(_))) | (Err(Error::TooFewSamples { .. }), _) => {
                excluded += 1
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(CorrelationReport {
        model_tag: model_tag.to_owned(),
        latent_dim,
        mean_rho: mean(&rho),
        std_rho: std_dev(&rho),
        mean_tau: mean(&tau),
        std_tau: std_dev(&tau),
        rho,
        tau,
        excluded,
    })
}

/// Angles within this distance of 0 or π are treated as degenerate.
pub const SLERP_ANGLE_TOL: f64 = 1e-6;

/// Spherical linear interpolation between unit vectors.
pub fn slerp(z1: &[f64], z2: &[f64], t: f64) -> Result<Vec<f64>> {
    if z1.len() != z2.len() {
        return Err(Error::Shape("slerp endpoints differ in length".into()));
    }
    let dot = z1.iter().zip(z2).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0);
    let omega = dot.acos();
    if omega > std::f64::consts::PI - SLERP_ANGLE_TOL {
        return Err(Error::Undefined("slerp between antipodal points".into()));
    }
    let raw: Vec<f64> = if omega < SLERP_ANGLE_TOL {
        z1.iter().zip(z2).map(|(a, b)| (1.0 - t) * a + t * b).collect()
    } else {
        let (wa, wb) = (((1.0 - t) * omega).sin() / omega.sin(), (t * omega).sin() / omega.sin());
        z1.iter().zip(z2).map(|(a, b)| wa * a + wb * b).collect()
    };
    let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(raw.into_iter().map(|v| v / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationResult {
    pub endpoints: (String, String),
    pub midpoint: Vec<f64>,
    /// Canonical valid interpolants with their counts, most frequent first.
    pub counts: Vec<(String, usize)>,
    pub samples: usize,
    pub modal: Option<String>,
    /// Tanimoto distance of the modal interpolant to each endpoint.
    pub tanimoto: Option<(f64, f64)>,
}

impl InterpolationResult {
    pub fn valid(&self) -> usize {
        self.counts.iter().map(|(_, c)| c).sum()
    }

    pub fn mean_tanimoto(&self) -> Option<f64> {
        self.tanimoto.map(|(a, b)| (a + b) / 2.0)
    }
}

/// Decodes `n_samples` strings from each slerp midpoint and scores the
/// most common valid one against the endpoints.
pub fn interpolation_study(
    pairs: &[(String, String)],
    encoder: &dyn Encoder,
    decoder: &dyn Decoder,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<InterpolationResult>> {
    let mut out = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let ga = smiles::parse(a)?;
        let gb = smiles::parse(b)?;
        let (fa, fb) = (fingerprint(&ga), fingerprint(&gb));
        let codes = encoder.encode(&[a.clone(), b.clone()])?;
        let mid = slerp(&codes[0], &codes[1], 0.5)?;
        let mut counts: HashMap<String, usize> = HashMap::new();
        for s in decoder.sample(&mid, n_samples, rng)? {
            if let Ok(canon) = smiles::canonicalize(&s) {
                *counts.entry(canon).or_default() += 1;
            }
        }
        let mut scored: Vec<(String, usize, f64, f64)> = counts
            .into_iter()
            .map(|(s, c)| {
                let f = fingerprint(&smiles::parse(&s).expect("canonical strings parse"));
                (s, c, tanimoto_distance(&f, &fa), tanimoto_distance(&f, &fb))
            })
            .collect();
        // most frequent first; ties by lower mean distance, then by string
        scored.sort_by(|x, y| y.1.cmp(&x.1).then((x.2 + x.3).total_cmp(&(y.2 + y.3))).then_with(|| x.0.cmp(&y.0)));
        let modal = scored.first().map(|s| s.0.clone());
        let tanimoto = scored.first().map(|s| (s.2, s.3));
        out.push(InterpolationResult {
            endpoints: (a.clone(), b.clone()),
            midpoint: mid,
            counts: scored.into_iter().map(|(s, c, _, _)| (s, c)).collect(),
            samples: n_samples,
            modal,
            tanimoto,
        });
    }
    Ok(out)
}

/// Mean over pairs of the modal interpolant's mean endpoint distance,
/// skipping pairs without a valid decode. Returns (mean, pairs used).
pub fn mean_interpolant_distance(results: &[InterpolationResult]) -> (f64, usize) {
    let vals: Vec<f64> = results.iter().filter_map(InterpolationResult::mean_tanimoto).collect();
    (mean(&vals), vals.len())
}

/// `pair,endpoint_a,endpoint_b,modal,count,valid,samples,tanimoto_a,tanimoto_b,mean_tanimoto`.
pub fn interpolation_csv(results: &[InterpolationResult]) -> String {
    let mut out =
        String::from("pair,endpoint_a,endpoint_b,modal,count,valid,samples,tanimoto_a,tanimoto_b,mean_tanimoto\n");
    for (i, r) in results.iter().enumerate() {
        let count = r.counts.first().map_or(0, |c| c.1);
        let (ta, tb) = r.tanimoto.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
        let m = r.mean_tanimoto().map_or(String::new(), |m| m.to_string());
        out.push_str(&format!(
            "{i},{},{},{},{count},{},{},{ta},{tb},{m}\n",
            r.endpoints.0,
            r.endpoints.1,
            r.modal.as_deref().unwrap_or(""),
            r.valid(),
            r.samples
        ));
    }
    out
}

/// Mean ± standard error of per-draw Spearman ρ between latent distance
/// and absolute property difference, per property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCorrelation {
    pub property: String,
    /// `None` when the property had no variance in any draw.
    pub mean_rho: Option<f64>,
    pub std_err: Option<f64>,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub model_tag: String,
    pub rows: Vec<PropertyCorrelation>,
    /// First two principal-component coordinates of the first draw.
    pub projection: Vec<(String, f64, f64)>,
}

impl PropertyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("property,mean_rho,std_err,draws\n");
        let f = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.property, f(r.mean_rho), f(r.std_err), r.draws));
        }
        out
    }

    pub fn projection_csv(&self) -> String {
        let mut out = String::from("smiles,pc1,pc2\n");
        for (s, a, b) in &self.projection {
            out.push_str(&format!("{s},{a},{b}\n"));
        }
        out
    }
}

/// Two leading principal-component scores of the rows of `codes`.
pub fn pca_2d(codes: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let n = codes.len();
    let d = codes.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Vec::new();
    }
    let x = DMatrix::from_fn(n, d, |r, c| codes[r][c]);
    let means: Vec<f64> = (0..d).map(|c| x.column(c).mean()).collect();
    let centered = DMatrix::from_fn(n, d, |r, c| x[(r, c)] - means[c]);
    let cov = centered.transpose() * &centered / (n.max(2) - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axis = |k: usize| {
        let v = eig.eigenvectors.column(order[k.min(d - 1)]).clone_owned();
        // fix the sign so the largest-magnitude loading is positive
        let (imax, _) =
            v.iter().enumerate().fold((0, 0.0), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
        if v[imax] < 0.0 {
            -v
        } else {
            v
        }
    };
    let (a1, a2) = (axis(0), axis(1));
    (0..n)
        .map(|r| {
            let row = centered.row(r);
            let p1 = if d >= 1 { row.dot(&a1.transpose()) } else { 0.0 };
            let p2 = if d >= 2 { row.dot(&a2.transpose()) } else { 0.0 };
            (p1, p2)
        })
        .collect()
}

pub fn property_correlation_report(
    molecules: &[String],
    encoder: &dyn Encoder,
    model_tag: &str,
    n_draws: usize,
    draw_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PropertyReport> {
    if draw_size > molecules.len() {
        return Err(Error::TooFewSamples { needed: draw_size, got: molecules.len() });
    }
    if draw_size < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: draw_size });
    }
    let mut per_prop: Vec<Vec<f64>> = vec![Vec::new(); PROPERTY_NAMES.len()];
    let mut projection = Vec::new();
    for draw in 0..n_draws {
        let sample: Vec<String> = molecules.choose_multiple(rng, draw_size).cloned().collect();
        let props: Vec<PropertyVector> =
            sample.iter().map(|s| compute_properties(&smiles::parse(s)?)).collect::<Result<_>>()?;
        let codes = encoder.encode(&sample)?;
        if draw == 0 {
            projection = sample.iter().zip(pca_2d(&codes)).map(|(s, (a, b))| (s.clone(), a, b)).collect();
        }
        let mut dist = Vec::with_capacity(draw_size * (draw_size - 1) / 2);
        for i in 0..draw_size {
            for j in i + 1..draw_size {
                dist.push(euclidean(&codes[i], &codes[j]));
            }
        }
        for (p, acc) in per_prop.iter_mut().enumerate() {
            let mut delta = Vec::with_capacity(dist.len());
            for i in 0..draw_size {
                for j in i + 1..draw_size {
                    delta.push((props[i].0[p] - props[j].0[p]).abs());
                }
            }
            match spearman(&dist, &delta) {
                Ok(r) => acc.push(r),
                Err(Error::Undefined(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let rows = PROPERTY_NAMES
        .iter()
        .zip(per_prop)
        .map(|(name, rs)| PropertyCorrelation {
            property: (*name).to_owned(),
            mean_rho: (!rs.is_empty()).then(|| mean(&rs)),
            std_err: (!rs.is_empty()).then(|| std_dev(&rs) / (rs.len() as f64).sqrt()),
            draws: rs.len(),
        })
        .collect();
    Ok(PropertyReport { model_tag: model_tag.to_owned(), rows, projection })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(euclidean(&[1.0, 0.0], &[-1.0, 0.0]), 2.0);
        assert!((euclidean(&[1.0, 0.0], &[0.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rank_statistic_examples() {
        let up = [1.0, 2.0, 3.0, 4.0, 5.0];
        let inc = [0.1, 0.5, 0.7, 2.0, 9.0];
        let dec: Vec<f64> = inc.iter().rev().copied().collect();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(spearman(&up, &inc).unwrap(), 1.0));
        assert!(close(kendall(&up, &inc).unwrap(), 1.0));
        assert!(close(spearman(&up, &dec).unwrap(), -1.0));
        assert!(close(kendall(&up, &dec).unwrap(), -1.0));
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((kendall(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(spearman(&up, &[1.0; 5]), Err(Error::Undefined(_))));
        assert!(matches!(kendall(&[2.0; 5], &up), Err(Error::Undefined(_))));
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    struct Planted(HashMap<String, Vec<f64>>);

    impl Encoder for Planted {
        fn encode(&self, smiles: &[String]) -> Result<Vec<Vec<f64>>> {
            Ok(smiles.iter().map(|s| self.0[s].clone()).collect())
        }
    }

    fn chain(prefix: &str, n: usize) -> Chain {
        Chain { anchor: format!("{prefix}0"), members: (1..=n).map(|k| (k, format!("{prefix}{k}"))).collect() }
    }

    #[test]
    fn planted_monotone_encoder_scores_one() {
        let chains: Vec<Chain> = (0..4).map(|i| chain(&format!("a{i}_"), 5)).collect();
        let mut codes = HashMap::new();
        for c in &chains {
            codes.insert(c.anchor.clone(), vec![0.0, 0.0]);
            for (k, s) in &c.members {
                codes.insert(s.clone(), vec![*k as f64, 0.0]);
            }
        }
        let r = ged_eud_report(&chains, &Planted(codes.clone()), "planted").unwrap();
        assert!((r.mean_rho - 1.0).abs() < 1e-12 && (r.mean_tau - 1.0).abs() < 1e-12);
        assert_eq!(r.rho.len(), 4);
        // order of anchors does not matter
        let mut rev = chains.clone();
        rev.reverse();
        let r2 = ged_eud_report(&rev, &Planted(codes), "planted").unwrap();
        assert_eq!(r.mean_rho, r2.mean_rho);
    }

    #[test]
    fn degenerate_chains_are_excluded() {
        let c = chain("x", 3);
        let codes: HashMap<String, Vec<f64>> =
            std::iter::once(&c.anchor).chain(c.members.iter().map(|m| &m.1)).map(|s| (s.clone(), vec![1.0])).collect();
        let r = ged_eud_report(&[c], &Planted(codes), "flat").unwrap();
        assert_eq!(r.excluded, 1);
        assert!(r.rho.is_empty());
    }

    #[test]
    fn random_encoder_is_near_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chains: Vec<Chain> = (0..400).map(|i| chain(&format!("r{i}_"), 5)).collect();
        let mut codes = HashMap::new();
        for c in &chains {
            codes.insert(c.anchor.clone(), (0..4).map(|_| rng.gen::<f64>()).collect());
            for (_, s) in &c.members {
                codes.insert(s.clone(), (0..4).map(|_| rng.gen::<f64>()).collect());
            }
        }
        let r = ged_eud_report(&chains, &Planted(codes), "random").unwrap();
        // null sd of Spearman with n = 5 is 1/2; of the mean over 400 anchors, 1/40
        assert!(r.mean_rho.abs() < 3.0 / 40.0, "{}", r.mean_rho);
    }

    #[test]
    fn slerp_properties() {
        let e1 = [1.0, 0.0];
        let e2 = [0.0, 1.0];
        assert_eq!(slerp(&e1, &e2, 0.0).unwrap(), e1.to_vec());
        let end = slerp(&e1, &e2, 1.0).unwrap();
        assert!((end[0]).abs() < 1e-15 && (end[1] - 1.0).abs() < 1e-15);
        let mid = slerp(&e1, &e2, 0.5).unwrap();
        let h = 0.5f64.sqrt();
        assert!((mid[0] - h).abs() < 1e-15 && (mid[1] - h).abs() < 1e-15);
        assert!(slerp(&e1, &[-1.0, 0.0], 0.5).is_err());
        assert_eq!(slerp(&e1, &e1, 0.3).unwrap(), e1.to_vec());
    }

    struct Fixed(String);

    impl Decoder for Fixed {
        fn sample(&self, _: &[f64], n: usize, _: &mut ChaCha8Rng) -> Result<Vec<String>> {
            Ok(vec![self.0.clone(); n])
        }
    }

    #[test]
    fn stub_decoder_returns_endpoint() {
        let pairs = vec![("CCO".to_owned(), "c1ccccc1".to_owned())];
        let mut codes = HashMap::new();
        codes.insert("CCO".to_owned(), vec![1.0, 0.0]);
        codes.insert("c1ccccc1".to_owned(), vec![0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = interpolation_study(&pairs, &Planted(codes), &Fixed("OCC".into()), 10, &mut rng).unwrap();
        assert_eq!(r[0].modal.as_deref(), Some("CCO"));
        assert_eq!(r[0].tanimoto.unwrap().0, 0.0);
        assert_eq!(r[0].valid(), 10);
        let bad = interpolation_study(
            &pairs,
            &Planted(HashMap::from([("CCO".to_owned(), vec![1.0, 0.0]), ("c1ccccc1".to_owned(), vec![0.0, 1.0])])),
            &Fixed("C(".into()),
            5,
            &mut rng,
        )
        .unwrap();
        assert_eq!(bad[0].modal, None);
        assert_eq!(mean_interpolant_distance(&bad).1, 0);
    }

    #[test]
    fn planted_weight_signal() {
        // alkanols of growing length: only weight-like properties vary
        let mols: Vec<String> = (1..=12).map(|n| format!("{}O", "C".repeat(n))).collect();
        let codes: HashMap<String, Vec<f64>> = mols
            .iter()
            .map(|s| {
                let mw = compute_properties(&smiles::parse(s).unwrap()).unwrap().0[0];
                (s.clone(), vec![mw / 100.0, 0.0])
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = property_correlation_report(&mols, &Planted(codes), "planted", 3, 12, &mut rng).unwrap();
        assert_eq!(r.rows.len(), 10);
        assert_eq!(r.rows.iter().map(|p| p.property.as_str()).collect::<Vec<_>>(), PROPERTY_NAMES);
        assert!(r.rows[0].mean_rho.unwrap() > 0.99);
        assert_eq!(r.rows[2].mean_rho, None, "ring count is constant");
        assert_eq!(r.projection.len(), 12);
        assert!(property_correlation_report(&mols, &Planted(HashMap::new()), "x", 1, 13, &mut rng).is_err());
    }

    #[test]
    fn pca_orders_axes_by_variance() {
        let codes: Vec<Vec<f64>> = (0..10).map(|i| vec![0.1 * i as f64, 5.0 * i as f64, 1.0]).collect();
        let p = pca_2d(&codes);
        let spread1 = p.iter().map(|x| x.0.abs()).fold(0.0, f64::max);
        let spread2 = p.iter().map(|x| x.1.abs()).fold(0.0, f64::max);
        assert!(spread1 > 10.0 && spread2 < 1e-9);
    }
}
