//! Contrastive and reconstruction losses with their input gradients.

use crate::error::{Error, Result};
use crate::smiles::PAD;

/// Row grouping for the contrastive loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Membership {
    /// Anchor index of every row.
    pub anchor: Vec<usize>,
    /// Whether the row is the anchor itself.
    pub is_anchor: Vec<bool>,
}

impl Membership {
    pub fn len(&self) -> usize {
        self.anchor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchor.is_empty()
    }

    /// Rows sharing the anchor of row `i`, excluding anchor rows.
    fn positives(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&j| j != i && !self.is_anchor[j] && self.anchor[j] == self.anchor[i])
    }
}

/// Supervised contrastive loss summed over anchor rows, and its gradient
/// w.r.t. the `[rows×dim]` codes.
///
/// For anchor `i`: −1/|P(i)| Σ_p log(exp(z_i·z_p/τ) / Σ_{a≠i} exp(z_i·z_a/τ)).
pub fn supcon_with_grad(z: &[f64], dim: usize, groups: &Membership, tau: f64) -> Result<(f64, Vec<f64>)> {
    let n = groups.len();
    if z.len() != n * dim {
        return Err(Error::Shape(format!("{} codes for {n} rows of width {dim}", z.len())));
    }
    if tau <= 0.0 {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    let row = |i: usize| &z[i * dim..(i + 1) * dim];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut loss = 0.0;
    let mut grad = vec![0.0; z.len()];
    let mut logits = vec![0.0; n];
    for i in (0..n).filter(|&i| groups.is_anchor[i]) {
        let pos: Vec<usize> = groups.positives(i).collect();
        if pos.is_empty() {
            return Err(Error::Data(format!("anchor row {i} has no positive in the batch")));
        }
        let zi = row(i);
        let mut max = f64::NEG_INFINITY;
        for a in (0..n).filter(|&a| a != i) {
            logits[a] = dot(zi, row(a)) / tau;
            max = max.max(logits[a]);
        }
        let sum: f64 = (0..n).filter(|&a| a != i).map(|a| (logits[a] - max).exp()).sum();
        let lse = max + sum.ln();
        let inv_p = 1.0 / pos.len() as f64;
        loss -= inv_p * pos.iter().map(|&p| logits[p] - lse).sum::<f64>();
        // ∂/∂s_a = softmax_a − [a ∈ P]/|P|
        for a in (0..n).filter(|&a| a != i) {
            let mut ds = (logits[a] - lse).exp();
            if pos.contains(&a) {
                ds -= inv_p;
            }
            let ds = ds / tau;
            for k in 0..dim {
                grad[i * dim + k] += ds * z[a * dim + k];
                grad[a * dim + k] += ds * zi[k];
            }
        }
    }
    Ok((loss, grad))
}

pub fn supcon_loss(z: &[f64], dim: usize, groups: &Membership, tau: f64) -> Result<f64> {
    supcon_with_grad(z, dim, groups, tau).map(|(l, _)| l)
}

/// Mean token cross-entropy per sequence, averaged over sequences, and its
/// gradient w.r.t. the `[batch·len × vocab]` logits. PAD targets are ignored.
pub fn reconstruction_with_grad(logits: &[f64], vocab: usize, targets: &[u32], len: usize) -> Result<(f64, Vec<f64>)> {
    if logits.len() != targets.len() * vocab || len == 0 || !targets.len().is_multiple_of(len) {
        return Err(Error::Shape(format!(
            "{} logits for {} targets, vocab {vocab}, sequence length {len}",
            logits.len(),
            targets.len()
        )));
    }
    let batch = targets.len() / len;
    let mut grad = vec![0.0; logits.len()];
    let mut total = 0.0;
    for b in 0..batch {
        let seq = &targets[b * len..(b + 1) * len];
        let count = seq.iter().filter(|&&t| t != PAD).count();
        if count == 0 {
            return Err(Error::Data(format!("sequence {b} has no target tokens")));
        }
        let w = 1.0 / (count as f64 * batch as f64);
        for (t, &target) in seq.iter().enumerate() {
            if target == PAD {
                continue;
            }
            let r = b * len + t;
            let row = &logits[r * vocab..(r + 1) * vocab];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            total += w * (lse - row[target as usize]);
            let g = &mut grad[r * vocab..(r + 1) * vocab];
            for (gv, lv) in g.iter_mut().zip(row) {
                *gv = w * (lv - lse).exp();
            }
            g[target as usize] -= w;
        }
    }
    Ok((total, grad))
}

pub fn reconstruction_loss(logits: &[f64], vocab: usize, targets: &[u32], len: usize) -> Result<f64> {
    reconstruction_with_grad(logits, vocab, targets, len).map(|(l, _)| l)
}

/// λ·L_c + (1−λ)·L_r.
pub fn combined_loss(contrastive: f64, reconstruction: f64, lambda: f64) -> f64 {
    lambda * contrastive + (1.0 - lambda) * reconstruction
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups(anchor: &[usize], is_anchor: &[bool]) -> Membership {
        Membership { anchor: anchor.to_vec(), is_anchor: is_anchor.to_vec() }
    }

    #[test]
    fn closed_form_three_rows() {
        let z = [1.0, 0.0, 1.0, 0.0, -1.0, 0.0];
        let g = groups(&[0, 0, 1], &[true, false, false]);
        let l = supcon_loss(&z, 2, &g, 1.0).unwrap();
        let expected = -(1f64.exp() / (1f64.exp() + (-1f64).exp())).ln();
        assert!((l - expected).abs() < 1e-15);
        assert!((l - 0.126928).abs() < 1e-6);
    }

    #[test]
    fn single_positive_only() {
        let z = [0.6, 0.8, 0.6, 0.8];
        let l = supcon_loss(&z, 2, &groups(&[0, 0], &[true, false]), 0.7).unwrap();
        assert!(l.abs() < 1e-15);
    }

    #[test]
    fn missing_positive_is_an_error() {
        let z = [1.0, 0.0, 0.0, 1.0];
        assert!(supcon_loss(&z, 2, &groups(&[0, 1], &[true, true]), 1.0).is_err());
    }

    #[test]
    fn supcon_gradient_matches_differences() {
        let z: Vec<f64> = (0..12).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let g = groups(&[0, 0, 0, 1, 1, 1], &[true, false, false, true, false, false]);
        let (_, grad) = supcon_with_grad(&z, 2, &g, 0.5).unwrap();
        for k in 0..z.len() {
            let h = 1e-6;
            let mut zp = z.clone();
            zp[k] += h;
            let mut zm = z.clone();
            zm[k] -= h;
            let fd = (supcon_loss(&zp, 2, &g, 0.5).unwrap() - supcon_loss(&zm, 2, &g, 0.5).unwrap()) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-7, "{k}: {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn uniform_logits_give_log_vocab() {
        let targets = [5u32, 6, 2, PAD];
        let logits = vec![0.25; 4 * 39];
        let l = reconstruction_loss(&logits, 39, &targets, 4).unwrap();
        assert!((l - 39f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn pad_tail_does_not_change_loss() {
        let short = [7u32, 2];
        let long = [7u32, 2, PAD, PAD];
        let mut lg_short = vec![0.0; 2 * 39];
        lg_short[7] = 3.0;
        lg_short[39 + 2] = 1.0;
        let mut lg_long = lg_short.clone();
        lg_long.extend(vec![9.0; 2 * 39]);
        let a = reconstruction_loss(&lg_short, 39, &short, 2).unwrap();
        let b = reconstruction_loss(&lg_long, 39, &long, 4).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn perfect_logits_approach_zero() {
        let mut lg = vec![-1e3; 39];
        lg[4] = 1e3;
        assert!(reconstruction_loss(&lg, 39, &[4], 1).unwrap() < 1e-12);
    }

    #[test]
    fn combined_weights() {
        assert_eq!(combined_loss(2.0, 4.0, 0.0), 4.0);
        assert_eq!(combined_loss(2.0, 4.0, 1.0), 2.0);
        assert_eq!(combined_loss(2.0, 4.0, 0.5), 3.0);
    }
}
