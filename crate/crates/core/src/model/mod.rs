//! Transformer autoencoder: pooled unit-sphere latent, memory upsampling,
//! contrastive + reconstruction training and autoregressive generation.

pub mod checkpoint;
mod config;
mod infer;
mod kernels;
mod loss;
mod net;
mod tape;

pub use config::{from_text as config_from_text, to_text as config_to_text, ModelConfig, TrainConfig};
pub use infer::{generate, generate_batch, DecodeMode};
pub use loss::{
    combined_loss, reconstruction_loss, reconstruction_with_grad, supcon_loss, supcon_with_grad, Membership,
};
pub use net::{
    decode_logits, encode, evaluate_loss, gradient_check, gradients, train_step, Adam, Model, StepStats, Tensor,
    TrainingBatch, GRAD_CHECK_FLOOR,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::{tokenize, END, START};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> Model {
        Model::new(ModelConfig {
            layers: 1,
            hidden: 16,
            heads: 2,
            latent: 4,
            max_len: 24,
            seed: 3,
            ..Default::default()
        })
        .unwrap()
    }

    fn seqs(items: &[&str]) -> Vec<crate::smiles::TokenSequence> {
        items.iter().map(|s| tokenize(s)).collect()
    }

    #[test]
    fn codes_are_unit_norm_and_deterministic() {
        let m = small();
        let z = encode(&m, &seqs(&["CCO", "c1ccccc1", "CCO", "C"])).unwrap();
        for row in &z {
            let n: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
        assert_eq!(z[0], z[2]);
        // padding with longer neighbours does not change a code
        let alone = encode(&m, &seqs(&["CCO"])).unwrap();
        for (a, b) in alone[0].iter().zip(&z[0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decoder_is_causal() {
        let m = small();
        let z = encode(&m, &seqs(&["CCO"])).unwrap();
        let a = tokenize("CCOCC");
        let mut b = a.clone();
        // perturb target position 3 (token ids[4])
        b.ids[4] = 9;
        let la = &decode_logits(&m, &z, &[a]).unwrap()[0];
        let lb = &decode_logits(&m, &z, &[b]).unwrap()[0];
        let v = m.config.vocab;
        assert_eq!(&la[..4 * v], &lb[..4 * v]);
        assert_ne!(&la[4 * v..5 * v], &lb[4 * v..5 * v]);
    }

    #[test]
    fn logits_are_finite_probability_rows() {
        let m = small();
        let s = seqs(&["CC(=O)O"]);
        let z = encode(&m, &s).unwrap();
        let l = &decode_logits(&m, &z, &s).unwrap()[0];
        for row in l.chunks(m.config.vocab) {
            assert!(row.iter().all(|v| v.is_finite()));
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let p: f64 = row.iter().map(|v| (v - max).exp() / sum).sum();
            assert!((p - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn cached_generation_matches_full_decoder() {
        let m = small();
        let z = encode(&m, &seqs(&["CCN"])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g1 = generate(&m, &z[0], DecodeMode::Greedy, &mut rng, 12).unwrap();
        let g2 = generate(&m, &z[0], DecodeMode::Greedy, &mut rng, 12).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(g1.ids[0], START);
        // every greedy choice is the argmax of the full (uncached) decoder
        let mut full = g1.clone();
        if *full.ids.last().unwrap() != END {
            full.ids.push(END);
        }
        let logits = &decode_logits(&m, &z, &[full]).unwrap()[0];
        for (t, &tok) in g1.ids[1..].iter().enumerate() {
            let row = &logits[t * m.config.vocab..(t + 1) * m.config.vocab];
            let best = (0..row.len()).filter(|&i| i > 3 || i == 2).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(best as u32, tok, "position {t}");
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = small();
        let z = encode(&m, &seqs(&["CCN"])).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            generate_batch(&m, &[z[0].clone(), z[0].clone()], DecodeMode::Sample { temperature: 1.0 }, &mut rng, 20)
                .unwrap()
        };
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn gradients_agree_with_finite_differences() {
        for lambda in [0.0, 0.5, 1.0] {
            let err = gradient_check(lambda, 200, 11).unwrap();
            assert!(err <= 1e-5, "lambda {lambda}: {err}");
        }
    }

    fn grouped_batch() -> TrainingBatch {
        TrainingBatch {
            tokens: seqs(&["CCO", "CCCO", "CCN", "c1ccccc1", "Cc1ccccc1", "c1ccncc1"]),
            membership: Membership {
                anchor: vec![0, 0, 0, 1, 1, 1],
                is_anchor: vec![true, false, false, true, false, false],
            },
        }
    }

    #[test]
    fn lambda_zero_has_no_contrastive_gradient() {
        let m = Model::new(ModelConfig { lambda: 0.0, ..small().config }).unwrap();
        let (stats, grads) = gradients(&m, &grouped_batch()).unwrap();
        assert!(stats.contrastive > 0.0);
        assert_eq!(stats.loss, stats.reconstruction);
        // pooling head is reached only through the decoder path
        assert!(grads[m.layout.pool_w].is_some());
        let m1 = Model::new(ModelConfig { lambda: 1.0, ..small().config }).unwrap();
        let (stats1, grads1) = gradients(&m1, &grouped_batch()).unwrap();
        assert_eq!(stats1.loss, stats1.contrastive);
        assert!(grads1[m1.layout.out_w].is_none(), "decoder untouched at lambda = 1");
    }

    #[test]
    fn repeated_batch_overfits() {
        let mut m = Model::new(ModelConfig { lambda: 0.0, ..small().config }).unwrap();
        let mut opt = Adam::new(&m);
        let cfg = TrainConfig { lr: 3e-3, ..Default::default() };
        let batch = TrainingBatch::reconstruction_only(seqs(&["CCO", "CCN", "c1ccccc1", "CC(=O)O"]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let losses: Vec<f64> =
            (0..200).map(|_| train_step(&mut m, &mut opt, &batch, &cfg, &mut rng).unwrap().reconstruction).collect();
        let decreasing = losses.windows(2).filter(|w| w[1] < w[0]).count();
        assert!(decreasing as f64 >= 0.9 * 199.0, "{decreasing} of 199 steps decreased");
    }

    #[test]
    fn training_is_bit_reproducible() {
        let run = || {
            let mut m = small();
            let mut opt = Adam::new(&m);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            (0..3)
                .map(|_| {
                    train_step(&mut m, &mut opt, &grouped_batch(), &TrainConfig::default(), &mut rng).unwrap().loss
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = small();
        let t = TrainConfig::default();
        let bytes = checkpoint::to_bytes(&m, &t);
        let (m2, t2) = checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(m.tensors(), m2.tensors());
        assert_eq!(m.config, m2.config);
        assert_eq!(t, t2);
        assert!(checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(checkpoint::from_bytes(&bad).is_err());
    }

    #[test]
    fn overlong_sequences_rejected() {
        let m = small();
        let long = "C".repeat(40);
        assert!(encode(&m, &seqs(&[&long])).is_err());
    }
}
