//! End-to-end desk-scale run: toy corpus, dataset, filtering, held-out
//! chains, three λ settings trained from one seed, and side-by-side reports.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::{
    chains_from_records, corpus_distribution, filter_dataset, fit_anchor_covariance, generate_chains, generate_dataset,
    split_indices, stream_rng, to_jsonl, toy_corpus, training_groups, write_corpus, CorpusLimits, FilterSummary,
    Purpose,
};
use super::manifest::Manifest;
use super::train::{train_model, training_log_csv, TrainingSet};
use crate::descriptors::{chi2_threshold, DEFAULT_CHI2_QUANTILE};
use crate::error::{Error, Result};
use crate::eval::{
    ged_eud_report, interpolation_csv, interpolation_study, mean_interpolant_distance, property_correlation_report,
    CorrelationSummary, PropertyCorrelation,
};
use crate::model::{checkpoint, config_to_text, Model, ModelConfig, TrainConfig};
use crate::mutation::GenerationConfig;

/// Report tag for a loss weighting.
pub fn model_tag(lambda: f64) -> &'static str {
    if lambda == 0.0 {
        "naive"
    } else if lambda == 1.0 {
        "contrastive"
    } else {
        "combined"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeskConfig {
    pub seed: u64,
    /// Toy corpus size, held-out anchors included.
    pub anchors: usize,
    pub heldout: usize,
    pub limits: CorpusLimits,
    /// Positives per anchor.
    pub k: usize,
    /// Supermutant chain length for the held-out anchors.
    pub chain_n: usize,
    pub chi2_quantile: f64,
    pub lambdas: Vec<f64>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub interp_pairs: usize,
    pub interp_samples: usize,
    pub prop_draws: usize,
    pub prop_draw_size: usize,
}

impl DeskConfig {
    pub fn desk(seed: u64) -> Self {
        let limits = CorpusLimits { min_atoms: 4, max_atoms: 16, max_chars: 34 };
        DeskConfig {
            seed,
            anchors: 2000,
            heldout: 200,
            limits,
            k: 10,
            chain_n: 5,
            chi2_quantile: DEFAULT_CHI2_QUANTILE,
            lambdas: vec![0.0, 0.5, 1.0],
            // a low temperature keeps the contrastive term informative with only
            // eight anchors per batch
            model: ModelConfig { max_len: limits.max_chars + 2, tau: 0.1, seed, ..ModelConfig::default() },
            train: TrainConfig {
                lr: 1e-3,
                steps: 600,
                batch_anchors: 8,
                positives: 10,
                neighbourhood: 16,
                ..TrainConfig::default()
            },
            interp_pairs: 20,
            interp_samples: 100,
            prop_draws: 5,
            prop_draw_size: 300,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let l = &self.limits;
        let lambdas: Vec<String> = self.lambdas.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "seed = {}\nanchors = {}\nheldout = {}", self.seed, self.anchors, self.heldout);
        let _ = writeln!(s, "min_atoms = {}\nmax_atoms = {}\nmax_chars = {}", l.min_atoms, l.max_atoms, l.max_chars);
        let _ = writeln!(s, "k = {}\nchain_n = {}\nchi2_quantile = {}", self.k, self.chain_n, self.chi2_quantile);
        let _ = writeln!(s, "lambdas = {}", lambdas.join(","));
        let _ = writeln!(s, "interp_pairs = {}\ninterp_samples = {}", self.interp_pairs, self.interp_samples);
        let _ = writeln!(s, "prop_draws = {}\nprop_draw_size = {}", self.prop_draws, self.prop_draw_size);
        s + &config_to_text(&self.model, &self.train)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationSummary {
    /// `None` when no pair produced a valid interpolant.
    pub mean_tanimoto: Option<f64>,
    pub pairs_used: usize,
    /// Mean endpoint distance of each pair's modal interpolant; `None`
    /// when no sample decoded to a valid molecule.
    pub per_pair: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub model_tag: String,
    pub lambda: f64,
    pub final_loss: f64,
    pub final_contrastive: f64,
    pub final_reconstruction: f64,
    pub ged: CorrelationSummary,
    pub excluded_anchors: usize,
    pub interpolation: Option<InterpolationSummary>,
    pub properties: Vec<PropertyCorrelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskReport {
    pub seed: u64,
    pub config_hash: String,
    pub corpus_size: usize,
    pub train_anchors: usize,
    pub heldout_anchors: usize,
    pub dataset_records: usize,
    pub filter: FilterSummary,
    pub filter_threshold: f64,
    pub chain_members: usize,
    pub untrained: CorrelationSummary,
    pub models: Vec<ModelOutcome>,
}

impl DeskReport {
    pub fn model(&self, tag: &str) -> Option<&ModelOutcome> {
        self.models.iter().find(|m| m.model_tag == tag)
    }

    /// Human-readable side-by-side table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed {}  config {}", self.seed, &self.config_hash[..16]);
        let _ = writeln!(
            s,
            "corpus {} ({} train, {} held out)  dataset {} records  kept {} / faulty {}  chains {} members",
            self.corpus_size,
            self.train_anchors,
            self.heldout_anchors,
            self.dataset_records,
            self.filter.kept,
            self.filter.faulty,
            self.chain_members
        );
        let _ = writeln!(s, "\n{:<12} {:>6} {:>16} {:>16} {:>12}", "model", "lambda", "rho", "tau", "interp");
        let u = &self.untrained;
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>16} {:>16} {:>12}",
            "untrained",
            "-",
            format!("{:.4}±{:.4}", u.mean_rho, u.std_rho),
            format!("{:.4}±{:.4}", u.mean_tau, u.std_tau),
            "-"
        );
        for m in &self.models {
            let interp =
                m.interpolation.as_ref().and_then(|i| i.mean_tanimoto).map_or("-".to_owned(), |v| format!("{v:.4}"));
            let _ = writeln!(
                s,
                "{:<12} {:>6} {:>16} {:>16} {:>12}",
                m.model_tag,
                m.lambda,
                format!("{:.4}±{:.4}", m.ged.mean_rho, m.ged.std_rho),
                format!("{:.4}±{:.4}", m.ged.mean_tau, m.ged.std_tau),
                interp
            );
        }
        let _ = writeln!(s, "\nproperty correlation (mean rho)");
        let _ = write!(s, "{:<22}", "property");
        for m in &self.models {
            let _ = write!(s, " {:>12}", m.model_tag);
        }
        s.push('\n');
        if let Some(first) = self.models.first() {
            for (i, p) in first.properties.iter().enumerate() {
                let _ = write!(s, "{:<22}", p.property);
                for m in &self.models {
                    let v = m.properties[i].mean_rho.map_or("-".to_owned(), |v| format!("{v:.4}"));
                    let _ = write!(s, " {v:>12}");
                }
                s.push('\n');
            }
        }
        s
    }
}

struct Out<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl Out<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.manifest.output(name, bytes);
        Ok(())
    }
}

/// Runs the whole desk pipeline, writing every artifact into `out_dir`.
/// `log` receives progress lines (with timings, which never enter artifacts).
pub fn reproduce(cfg: &DeskConfig, out_dir: &Path, log: &mut dyn FnMut(&str)) -> Result<DeskReport> {
    cfg.model.validate()?;
    if cfg.limits.max_chars + 2 > cfg.model.max_len {
        return Err(Error::Config(format!(
            "max_len {} cannot hold molecules of {} characters",
            cfg.model.max_len, cfg.limits.max_chars
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let config_text = cfg.to_text();
    let mut out = Out { dir: out_dir, manifest: Manifest::new("reproduce", Some(cfg.seed), &config_text) };
    out.write("config.txt", config_text.as_bytes())?;
    let seed = cfg.seed;

    let corpus = toy_corpus(cfg.anchors, cfg.limits, seed)?;
    out.write("corpus.smi", write_corpus(&corpus).as_bytes())?;
    let (train_idx, held_idx) = split_indices(corpus.len(), cfg.heldout, seed);
    let train_anchors: Vec<String> = train_idx.iter().map(|&i| corpus[i].clone()).collect();
    out.write("anchors.smi", write_corpus(&train_anchors).as_bytes())?;
    let dist = corpus_distribution(&train_anchors)?;
    let gen = GenerationConfig { max_chars: cfg.limits.max_chars, ..GenerationConfig::default() };

    let dataset = generate_dataset(&train_anchors, cfg.k, seed, &dist, &gen)?;
    out.write("dataset.jsonl", to_jsonl(&dataset)?.as_bytes())?;
    let threshold = chi2_threshold(cfg.chi2_quantile)?;
    let cov = fit_anchor_covariance(&dataset)?;
    let (filtered, filter) = filter_dataset(&dataset, &cov, threshold)?;
    out.write("filtered.jsonl", to_jsonl(&filtered)?.as_bytes())?;

    let held: Vec<(u64, String)> = held_idx.iter().map(|&i| (i as u64, corpus[i].clone())).collect();
    let chain_records = generate_chains(&held, cfg.chain_n, seed, &dist, &gen)?;
    out.write("chains.jsonl", to_jsonl(&chain_records)?.as_bytes())?;
    let chains = chains_from_records(&chain_records)?;
    let chain_members = chains.iter().map(|c| c.members.len()).sum();
    log(&format!(
        "data: {} anchors, {} records ({} kept, {} faulty), {} chain members [{:.1}s]",
        train_anchors.len(),
        dataset.len(),
        filter.kept,
        filter.faulty,
        chain_members,
        started.elapsed().as_secs_f64()
    ));

    let set = TrainingSet::new(&training_groups(&filtered)?, cfg.model.max_len)?;
    let mut pair_rng = stream_rng(seed, Purpose::Interpolation, 0);
    let mut pairs = Vec::with_capacity(cfg.interp_pairs);
    while pairs.len() < cfg.interp_pairs.min(train_anchors.len() * (train_anchors.len() - 1) / 2) {
        let (a, b) = (pair_rng.gen_range(0..train_anchors.len()), pair_rng.gen_range(0..train_anchors.len()));
        let pair = (train_anchors[a.min(b)].clone(), train_anchors[a.max(b)].clone());
        if a != b && !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }

    let untrained =
        Model::new(ModelConfig { lambda: cfg.lambdas.first().copied().unwrap_or(0.5), ..cfg.model.clone() })?;
    let base = ged_eud_report(&chains, &untrained, "untrained")?;
    out.write("ged_untrained.csv", base.to_csv().as_bytes())?;
    out.write("ged_untrained.json", (serde_json::to_string_pretty(&base.summary())? + "\n").as_bytes())?;
    log(&format!("untrained: rho {:.4} tau {:.4}", base.mean_rho, base.mean_tau));

    let mut models = Vec::new();
    for &lambda in &cfg.lambdas {
        let tag = model_tag(lambda);
        let t0 = Instant::now();
        let mut model = Model::new(ModelConfig { lambda, ..cfg.model.clone() })?;
        let steps = cfg.train.steps;
        let stats = train_model(&mut model, &set, &cfg.train, seed, |step, s| {
            if step % 100 == 0 || step == steps {
                log(&format!(
                    "{tag}: step {step}/{steps} loss {:.4} (con {:.4}, rec {:.4}) [{:.0}s]",
                    s.loss,
                    s.contrastive,
                    s.reconstruction,
                    t0.elapsed().as_secs_f64()
                ));
            }
        })?;
        out.write(&format!("train_{tag}.csv"), training_log_csv(&stats).as_bytes())?;
        out.write(&format!("{tag}.ckpt"), &checkpoint::to_bytes(&model, &cfg.train))?;

        let ged = ged_eud_report(&chains, &model, tag)?;
        out.write(&format!("ged_{tag}.csv"), ged.to_csv().as_bytes())?;
        out.write(&format!("ged_{tag}.json"), (serde_json::to_string_pretty(&ged.summary())? + "\n").as_bytes())?;

        // the decoder is never trained at lambda = 1
        let interpolation = if lambda < 1.0 {
            let mut rng = stream_rng(seed, Purpose::Interpolation, 1);
            let results = interpolation_study(&pairs, &model, &model, cfg.interp_samples, &mut rng)?;
            out.write(&format!("interp_{tag}.csv"), interpolation_csv(&results).as_bytes())?;
            let (mean_tanimoto, pairs_used) = mean_interpolant_distance(&results);
            Some(InterpolationSummary {
                mean_tanimoto: (pairs_used > 0).then_some(mean_tanimoto),
                pairs_used,
                per_pair: results.iter().map(|r| r.mean_tanimoto()).collect(),
            })
        } else {
            None
        };

        let mut rng = stream_rng(seed, Purpose::Properties, 0);
        let draw = cfg.prop_draw_size.min(train_anchors.len());
        let props = property_correlation_report(&train_anchors, &model, tag, cfg.prop_draws, draw, &mut rng)?;
        out.write(&format!("prop_{tag}.csv"), props.to_csv().as_bytes())?;
        out.write(&format!("pca_{tag}.csv"), props.projection_csv().as_bytes())?;

        let last = stats.last().copied().unwrap_or(crate::model::StepStats {
            loss: f64::NAN,
            contrastive: f64::NAN,
            reconstruction: f64::NAN,
        });
        log(&format!(
            "{tag}: rho {:.4} tau {:.4} interp {} [{:.0}s]",
            ged.mean_rho,
            ged.mean_tau,
            interpolation.as_ref().map_or("-".into(), |i| format!("{:?} over {} pairs", i.mean_tanimoto, i.pairs_used)),
            t0.elapsed().as_secs_f64()
        ));
        models.push(ModelOutcome {
            model_tag: tag.into(),
            lambda,
            final_loss: last.loss,
            final_contrastive: last.contrastive,
            final_reconstruction: last.reconstruction,
            ged: ged.summary(),
            excluded_anchors: ged.excluded,
            interpolation,
            properties: props.rows,
        });
    }

    let report = DeskReport {
        seed,
        config_hash: out.manifest.config_hash.clone(),
        corpus_size: corpus.len(),
        train_anchors: train_anchors.len(),
        heldout_anchors: held.len(),
        dataset_records: dataset.len(),
        filter,
        filter_threshold: threshold,
        chain_members,
        untrained: base.summary(),
        models,
    };
    out.write("report.json", (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    out.write("report.txt", report.to_text().as_bytes())?;
    let manifest = out.manifest.to_json()?;
    std::fs::write(out_dir.join("manifest.json"), manifest)?;
    log(&format!("done [{:.0}s]", started.elapsed().as_secs_f64()));
    Ok(report)
}
