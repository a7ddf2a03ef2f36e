//! Reproducible dataset generation, training and the desk-scale run.

mod data;
mod desk;
mod manifest;
mod train;

pub use data::{
    chains_from_records, corpus_distribution, filter_dataset, fit_anchor_covariance, from_jsonl, generate_chains,
    generate_dataset, group_records, read_corpus, seed_molecules, split_indices, stream_rng, to_jsonl, toy_corpus,
    training_groups, write_corpus, CorpusLimits, FilterSummary, Purpose, SEED_SMILES,
};
pub use desk::{model_tag, reproduce, DeskConfig, DeskReport, InterpolationSummary, ModelOutcome};
pub use manifest::{check_sidecar, manifest_path, sha256_hex, Manifest, TOOL, TOOL_VERSION};
pub use train::{greedy_reconstruction_rate, train_model, training_log_csv, Batcher, TrainingSet};
