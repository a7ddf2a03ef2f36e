use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use molspace::descriptors::{chi2_threshold, default_threshold, DEFAULT_CHI2_QUANTILE};
use molspace::eval::{
    ged_eud_report, interpolation_csv, interpolation_study, mean_interpolant_distance, property_correlation_report,
    slerp,
};
use molspace::model::{self, checkpoint, DecodeMode, Model, ModelConfig, TrainConfig};
use molspace::mutation::GenerationConfig;
use molspace::pipeline::{
    self, check_sidecar, corpus_distribution, manifest_path, model_tag, stream_rng, DeskConfig, Manifest, Purpose,
    TrainingSet,
};
use molspace::smiles::{self, MAX_SMILES_CHARS};
use molspace::{ged_exact, Error, GedOutcome};

#[derive(Parser)]
#[command(name = "molspace", version, about = "Mutation-labeled molecular datasets and latent-space models")]
struct Cli {
    /// Directory for written artifacts.
    #[arg(long, global = true, env = "MOLSPACE_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical form of each SMILES.
    Canon { smiles: Vec<String> },
    /// Exact node-edit distance between two molecules.
    Ged {
        #[arg(long, default_value_t = 5)]
        max: usize,
        a: String,
        b: String,
    },
    /// Anchors plus k one-edit mutants each, as JSON lines.
    GenDataset {
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = MAX_SMILES_CHARS)]
        max_chars: usize,
        #[arg(long, default_value = "dataset.jsonl")]
        output: String,
    },
    /// One supermutant chain of length n per anchor, as JSON lines.
    GenSupermutants {
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = MAX_SMILES_CHARS)]
        max_chars: usize,
        #[arg(long, default_value = "chains.jsonl")]
        output: String,
    },
    /// Mark mutants too far from their anchor in property space as faulty.
    Filter {
        #[arg(long)]
        dataset: PathBuf,
        /// Mahalanobis distance cut-off.
        #[arg(long, conflicts_with = "chi2_q")]
        threshold: Option<f64>,
        /// Chi-square quantile (10 degrees of freedom) whose square root is the cut-off.
        #[arg(long)]
        chi2_q: Option<f64>,
        #[arg(long, default_value = "filtered.jsonl")]
        output: String,
    },
    /// Train an autoencoder on a (filtered) dataset.
    Train(TrainArgs),
    /// Latent codes of the molecules in a corpus file, as CSV.
    Encode {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, visible_alias = "in")]
        input: PathBuf,
        #[arg(long, visible_alias = "out", default_value = "codes.csv")]
        output: String,
    },
    /// Decode molecules from the code of a SMILES.
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        smiles: String,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        /// Sampling temperature; greedy decoding when omitted.
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Greedy decodes along the great circle between two molecules.
    Interpolate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        a: String,
        b: String,
    },
    /// Rank correlation of chain edit distance against latent distance.
    EvalGed {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        chains: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Modal midpoint interpolants for endpoint pairs (two SMILES per line).
    EvalInterp {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rank correlation of latent distance against property differences.
    EvalProp {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        draws: usize,
        #[arg(long, default_value_t = 2000)]
        draw_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Toy corpus, dataset, three trained models and all reports.
    Reproduce {
        #[arg(long, value_enum, default_value_t = Scale::Desk)]
        scale: Scale,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Override the number of training steps per model.
        #[arg(long)]
        steps: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Desk,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, visible_alias = "data")]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    latent: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_anchors: Option<usize>,
    #[arg(long)]
    positives: Option<usize>,
    #[arg(long, default_value = "model.ckpt")]
    output: String,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => 1,
            Error::NonFinite(_) | Error::Undefined(_) => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message.lines().next().unwrap_or(""));
            ExitCode::from(f.code)
        }
    }
}

/// Reads an input file after checking any sidecar manifest's vocabulary.
fn read_input(path: &Path) -> CliResult<String> {
    check_sidecar(path)?;
    std::fs::read_to_string(path).map_err(|e| Failure { code: 2, message: format!("{}: {e}", path.display()) })
}

fn load_model(path: &Path) -> CliResult<(Model, TrainConfig)> {
    checkpoint::load(path).map_err(|e| Failure { code: 2, message: format!("{}: {e}", path.display()) })
}

struct Outputs {
    dir: PathBuf,
    inputs: Vec<PathBuf>,
    manifest: Manifest,
}

impl Outputs {
    fn new(dir: &Path, command: &str, seed: Option<u64>, config: &str) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_owned(), inputs: Vec::new(), manifest: Manifest::new(command, seed, config) })
    }

    fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(path.to_owned());
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.manifest.input(&name, bytes);
    }

    /// Writes an artifact plus its manifest; refuses to overwrite an input.
    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        for input in &self.inputs {
            if same_file(input, &path) {
                return Err(usage(format!("output {} would overwrite an input", path.display())));
            }
        }
        std::fs::write(&path, bytes)?;
        let mut m = self.manifest.clone();
        m.output(name, bytes);
        std::fs::write(manifest_path(&path), m.to_json()?)?;
        Ok(path)
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn run(cli: Cli) -> CliResult {
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Canon { smiles } => {
            for s in smiles {
                println!("{}", smiles::canonicalize(&s)?);
            }
        }
        Command::Ged { max, a, b } => {
            let (ga, gb) = (smiles::parse(&a)?, smiles::parse(&b)?);
            match ged_exact(&ga, &gb, max)? {
                GedOutcome::Distance(d) => println!("{d}"),
                GedOutcome::Exceeds => println!(">{max}"),
            }
        }
        Command::GenDataset { anchors, k, seed, max_chars, output } => {
            let text = read_input(&anchors)?;
            let corpus = pipeline::read_corpus(&text)?;
            let dist = corpus_distribution(&corpus)?;
            let gen = GenerationConfig { max_chars, ..GenerationConfig::default() };
            let records = pipeline::generate_dataset(&corpus, k, seed, &dist, &gen)?;
            let mut o = Outputs::new(out, "gen-dataset", Some(seed), &format!("k = {k}\nmax_chars = {max_chars}\n"))?;
            o.input(&anchors, text.as_bytes());
            let path = o.write(&output, pipeline::to_jsonl(&records)?.as_bytes())?;
            eprintln!("wrote {} records to {}", records.len(), path.display());
        }
        Command::GenSupermutants { anchors, n, seed, max_chars, output } => {
            let text = read_input(&anchors)?;
            let corpus = pipeline::read_corpus(&text)?;
            let dist = corpus_distribution(&corpus)?;
            let gen = GenerationConfig { max_chars, ..GenerationConfig::default() };
            let ids: Vec<(u64, String)> = corpus.into_iter().enumerate().map(|(i, s)| (i as u64, s)).collect();
            let records = pipeline::generate_chains(&ids, n, seed, &dist, &gen)?;
            let mut o =
                Outputs::new(out, "gen-supermutants", Some(seed), &format!("n = {n}\nmax_chars = {max_chars}\n"))?;
            o.input(&anchors, text.as_bytes());
            let path = o.write(&output, pipeline::to_jsonl(&records)?.as_bytes())?;
            eprintln!("wrote {} records to {}", records.len(), path.display());
        }
        Command::Filter { dataset, threshold, chi2_q, output } => {
            let threshold = match (threshold, chi2_q) {
                (Some(t), _) if t.is_nan() || t < 0.0 => return Err(usage("threshold must be non-negative")),
                (Some(t), _) => t,
                (None, Some(q)) => chi2_threshold(q)?,
                (None, None) => default_threshold(),
            };
            let text = read_input(&dataset)?;
            let records = pipeline::from_jsonl(&text)?;
            let cov = pipeline::fit_anchor_covariance(&records)?;
            let (judged, summary) = pipeline::filter_dataset(&records, &cov, threshold)?;
            let mut o = Outputs::new(
                out,
                "filter",
                None,
                &format!("threshold = {threshold}\nchi2_q = {}\n", chi2_q.unwrap_or(DEFAULT_CHI2_QUANTILE)),
            )?;
            o.input(&dataset, text.as_bytes());
            o.write(&output, pipeline::to_jsonl(&judged)?.as_bytes())?;
            println!(
                "threshold {threshold:.6}: kept {} faulty {} (kept fraction {:.4})",
                summary.kept,
                summary.faulty,
                summary.kept_fraction()
            );
        }
        Command::Train(args) => train(out, args)?,
        Command::Encode { ckpt, input, output } => {
            let (model, _) = load_model(&ckpt)?;
            let text = read_input(&input)?;
            let corpus = pipeline::read_corpus(&text)?;
            let codes = molspace::eval::Encoder::encode(&model, &corpus)?;
            let mut csv = String::from("smiles");
            for i in 0..model.config.latent {
                csv.push_str(&format!(",z{i}"));
            }
            csv.push('\n');
            for (s, z) in corpus.iter().zip(&codes) {
                csv.push_str(s);
                for v in z {
                    csv.push_str(&format!(",{v}"));
                }
                csv.push('\n');
            }
            let mut o =
                Outputs::new(out, "encode", None, &model::config_to_text(&model.config, &TrainConfig::default()))?;
            o.input(&input, text.as_bytes());
            o.input(&ckpt, &std::fs::read(&ckpt)?);
            o.write(&output, csv.as_bytes())?;
        }
        Command::Generate { ckpt, smiles: s, samples, temperature, seed } => {
            let (model, _) = load_model(&ckpt)?;
            let z = model::encode(&model, &[smiles::tokenize(&smiles::canonicalize(&s)?)])?;
            let mode = match temperature {
                Some(t) => DecodeMode::Sample { temperature: t },
                None => DecodeMode::Greedy,
            };
            let mut rng = stream_rng(seed, Purpose::Interpolation, 2);
            let zs = vec![z[0].clone(); if temperature.is_some() { samples } else { 1 }];
            for seq in model::generate_batch(&model, &zs, mode, &mut rng, model.config.max_len)? {
                let text = smiles::detokenize(&seq);
                let valid = if smiles::parse(&text).is_ok() { "valid" } else { "invalid" };
                println!("{text}\t{valid}");
            }
        }
        Command::Interpolate { ckpt, steps, a, b } => {
            let (model, _) = load_model(&ckpt)?;
            let seqs = [smiles::tokenize(&smiles::canonicalize(&a)?), smiles::tokenize(&smiles::canonicalize(&b)?)];
            let z = model::encode(&model, &seqs)?;
            let steps = steps.max(1);
            let mut rng = stream_rng(0, Purpose::Interpolation, 3);
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let zt = slerp(&z[0], &z[1], t)?;
                let seq = model::generate(&model, &zt, DecodeMode::Greedy, &mut rng, model.config.max_len)?;
                println!("{t:.3}\t{}", smiles::detokenize(&seq));
            }
        }
        Command::EvalGed { ckpt, chains, seed } => {
            let (model, _) = load_model(&ckpt)?;
            let text = read_input(&chains)?;
            let chains_parsed = pipeline::chains_from_records(&pipeline::from_jsonl(&text)?)?;
            let tag = model_tag(model.config.lambda);
            let report = ged_eud_report(&chains_parsed, &model, tag)?;
            let mut o = Outputs::new(
                out,
                "eval-ged",
                Some(seed),
                &model::config_to_text(&model.config, &TrainConfig::default()),
            )?;
            o.input(&chains, text.as_bytes());
            o.write(&format!("ged_{tag}.csv"), report.to_csv().as_bytes())?;
            let json = serde_json::to_string_pretty(&report.summary())? + "\n";
            o.write(&format!("ged_{tag}.json"), json.as_bytes())?;
            print!("{json}");
            if report.excluded > 0 {
                eprintln!("{} anchors excluded (no latent-distance variance)", report.excluded);
            }
        }
        Command::EvalInterp { ckpt, pairs, samples, seed } => {
            let (model, _) = load_model(&ckpt)?;
            let text = read_input(&pairs)?;
            let mut list = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let parts: Vec<&str> =
                    line.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
                if parts.len() != 2 {
                    return Err(Failure {
                        code: 2,
                        message: format!("{} line {}: expected two SMILES", pairs.display(), i + 1),
                    });
                }
                list.push((smiles::canonicalize(parts[0])?, smiles::canonicalize(parts[1])?));
            }
            let mut rng = stream_rng(seed, Purpose::Interpolation, 1);
            let results = interpolation_study(&list, &model, &model, samples, &mut rng)?;
            let tag = model_tag(model.config.lambda);
            let mut o = Outputs::new(out, "eval-interp", Some(seed), &format!("samples = {samples}\n"))?;
            o.input(&pairs, text.as_bytes());
            o.write(&format!("interp_{tag}.csv"), interpolation_csv(&results).as_bytes())?;
            let (mean, used) = mean_interpolant_distance(&results);
            println!("mean modal-interpolant Tanimoto distance {mean:.6} over {used} of {} pairs", results.len());
        }
        Command::EvalProp { ckpt, input, draws, draw_size, seed } => {
            let (model, _) = load_model(&ckpt)?;
            let text = read_input(&input)?;
            let corpus = pipeline::read_corpus(&text)?;
            let tag = model_tag(model.config.lambda);
            let mut rng = stream_rng(seed, Purpose::Properties, 0);
            let report =
                property_correlation_report(&corpus, &model, tag, draws, draw_size.min(corpus.len()), &mut rng)?;
            let mut o =
                Outputs::new(out, "eval-prop", Some(seed), &format!("draws = {draws}\ndraw_size = {draw_size}\n"))?;
            o.input(&input, text.as_bytes());
            o.write(&format!("prop_{tag}.csv"), report.to_csv().as_bytes())?;
            o.write(&format!("pca_{tag}.csv"), report.projection_csv().as_bytes())?;
            print!("{}", report.to_csv());
        }
        Command::Reproduce { scale: Scale::Desk, seed, steps } => {
            let mut cfg = DeskConfig::desk(seed);
            if let Some(s) = steps {
                cfg.train.steps = s;
            }
            let report = pipeline::reproduce(&cfg, out, &mut |line| eprintln!("{line}"))?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn train(out: &Path, a: TrainArgs) -> CliResult {
    let defaults = ModelConfig::default();
    let config = ModelConfig {
        layers: a.layers.unwrap_or(defaults.layers),
        hidden: a.hidden.unwrap_or(defaults.hidden),
        heads: a.heads.unwrap_or(defaults.heads),
        latent: a.latent.unwrap_or(defaults.latent),
        max_len: a.max_len.unwrap_or(defaults.max_len),
        tau: a.tau.unwrap_or(defaults.tau),
        dropout: a.dropout.unwrap_or(defaults.dropout),
        lambda: a.lambda,
        seed: a.seed,
        ..defaults
    };
    let td = TrainConfig::default();
    let tc = TrainConfig {
        steps: a.steps.unwrap_or(td.steps),
        lr: a.lr.unwrap_or(td.lr),
        batch_anchors: a.batch_anchors.unwrap_or(td.batch_anchors),
        positives: a.positives.unwrap_or(td.positives),
        ..td
    };
    tc.validate()?;
    let text = read_input(&a.dataset)?;
    let records = pipeline::from_jsonl(&text)?;
    let set = TrainingSet::new(&pipeline::training_groups(&records)?, config.max_len)?;
    let mut model = Model::new(config)?;
    let steps = tc.steps;
    let log = pipeline::train_model(&mut model, &set, &tc, a.seed, |step, s| {
        if step % 100 == 0 || step == steps {
            eprintln!("step {step}/{steps} loss {:.4} (con {:.4}, rec {:.4})", s.loss, s.contrastive, s.reconstruction);
        }
    })?;
    let mut o = Outputs::new(out, "train", Some(a.seed), &model::config_to_text(&model.config, &tc))?;
    o.input(&a.dataset, text.as_bytes());
    let name = a.output.trim_end_matches(".ckpt");
    o.write(&format!("{name}.log.csv"), pipeline::training_log_csv(&log).as_bytes())?;
    let path = o.write(&a.output, &checkpoint::to_bytes(&model, &tc))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}
