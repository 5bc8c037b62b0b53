use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gcn_core::baselines::Baseline;
use gcn_core::checks::{run_grad_check_suite, GRAD_CHECK_TOLERANCE};
use gcn_core::config::ExperimentConfig;
use gcn_core::harness::{
    encode, export_gate_heatmap, format_timing_table, generate_synthetic, run_matrix, run_pair, train_on_source,
    write_timing_csv, ModelSpec, PairMode, RunManifest, SyntheticCorpusSpec, TrainedModel,
};
use gcn_core::model::{gate_activations, load_checkpoint, save_checkpoint, GateKind, GcnParams, CHECKPOINT_MAGIC};
use gcn_core::text::{tokenize, write_jsonl, DomainDataset, Review, Split, Vocabulary};
use gcn_core::train::evaluate;
use gcn_core::Error;

/// Gated convolutional sentiment classifiers and cross-domain experiments.
#[derive(Parser)]
#[command(name = "gcn", version)]
struct Cli {
    /// Log progress (per-epoch losses) to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on a source domain.
    Train(TrainArgs),
    /// Score a trained model on a target domain.
    Eval(EvalArgs),
    /// Train on every domain, test on every other one.
    Matrix(MatrixArgs),
    /// Write a synthetic multi-domain corpus as JSONL files.
    SynthGen(SynthArgs),
    /// Export gate activations for one sentence.
    InspectGates(InspectArgs),
    /// Run the finite-difference gradient checks.
    GradCheck(GradCheckArgs),
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// JSON config file; command-line flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gate: Option<GateKind>,
    #[arg(long, value_delimiter = ',')]
    kernel_sizes: Option<Vec<usize>>,
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    dropout_embed: Option<f64>,
    #[arg(long)]
    dropout_dense: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// 0 disables early stopping.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seeds per matrix cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Fine-tune the embedding table.
    #[arg(long)]
    train_embeddings: bool,
    /// Pretrained vectors, one word per line followed by its values.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Minimum corpus frequency for bag-of-words terms.
    #[arg(long)]
    min_freq: Option<usize>,
}

macro_rules! set {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = v; })*
    };
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        set!(c, self, gate, kernel_sizes, filters, embed_dim, max_len, vocab_size, dropout_embed,
             dropout_dense, batch_size, epochs, patience, rho, eps, seed, runs, min_freq);
        if self.train_embeddings {
            c.train_embeddings = true;
        }
        if self.embeddings.is_some() {
            c.embeddings = self.embeddings.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output directory.
    #[arg(long, env = "GCN_OUT_DIR", default_value = "gcn-out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Labeled reviews, one JSON object per line.
    #[arg(long)]
    source: PathBuf,
    /// Domain name; defaults to the file stem.
    #[arg(long)]
    domain: Option<String>,
    /// Model to train; defaults to the configured gate.
    #[arg(long)]
    model: Option<ModelSpec>,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EvalSplit {
    Test,
    All,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Neural checkpoint or baseline JSON written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Vocabulary of a neural checkpoint; defaults to vocab.json beside it.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    domain: Option<String>,
    /// Which reviews of the target to score.
    #[arg(long, value_enum, default_value = "test")]
    split: EvalSplit,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct MatrixArgs {
    /// One JSONL file per domain.
    #[arg(long, num_args = 2.., required = true)]
    domains: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "glu,gtu,gtru,none")]
    models: Vec<ModelSpec>,
    /// Also train and test within each domain, written to in_domain.csv.
    #[arg(long)]
    in_domain: bool,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_delimiter = ',', default_value = "alpha,beta")]
    domains: Vec<String>,
    /// Sentences per domain.
    #[arg(long, default_value_t = 2000)]
    size: usize,
    /// Share of polarity words taken from the domain's own lexicon.
    #[arg(long, default_value_t = 0.5)]
    mix_ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    text: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct GradCheckArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
}

/// Failures split by exit code.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Matrix(a) => cmd_matrix(a),
        Command::SynthGen(a) => cmd_synth(a),
        Command::InspectGates(a) => cmd_inspect(a),
        Command::GradCheck(a) => cmd_grad_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn out_dir(o: &OutArgs) -> Result<&Path, Failure> {
    std::fs::create_dir_all(&o.out).map_err(|e| Error::Io {
        path: o.out.clone(),
        source: e,
    })?;
    Ok(&o.out)
}

fn domain_name(path: &Path, given: Option<&String>) -> String {
    given.cloned().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "domain".into())
    })
}

fn manifest(command: &str, cfg: &ExperimentConfig, seeds: Vec<u64>) -> Result<RunManifest, Failure> {
    let resolved = serde_json::to_value(cfg).map_err(Error::from)?;
    let defaults = serde_json::to_value(ExperimentConfig::default()).map_err(Error::from)?;
    let mut m = RunManifest::new(command, resolved.clone(), seeds);
    if let (Some(r), Some(d)) = (resolved.as_object(), defaults.as_object()) {
        for (k, v) in r {
            if d.get(k) != Some(v) {
                m.overrides.insert(k.clone(), v.clone());
            }
        }
    }
    if let Some(p) = &cfg.embeddings {
        m.add_input(p)?;
    }
    Ok(m)
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    let cfg = a.cfg.resolve().map_err(usage)?;
    let dir = out_dir(&a.out)?;
    let domain = domain_name(&a.source, a.domain.as_ref());
    let data = DomainDataset::load(&a.source, &domain, cfg.seed)?;
    let spec = a.model.unwrap_or(ModelSpec::Gcn(cfg.gate));
    let mut m = manifest("train", &cfg, vec![cfg.seed])?;
    m.add_input(&a.source)?;

    let trained = train_on_source(&data, spec, &cfg.settings(), cfg.seed)?;
    let test_acc = trained.accuracy(&data.split(Split::Test))?;
    match &trained {
        TrainedModel::Gcn { params, vocab, report } => {
            save_checkpoint(params, dir.join("model.gcnc"))?;
            vocab.save(dir.join("vocab.json"))?;
            report.write_json(dir.join("train_report.json"))?;
            report.write_csv(dir.join("train_report.csv"))?;
            m.outputs.extend(["model.gcnc", "vocab.json", "train_report.json", "train_report.csv"].map(PathBuf::from));
            println!(
                "{spec} on {domain}: {} epochs, best epoch {} (val loss {:.4}), {:.3} s/epoch",
                report.stopped_epoch,
                report.best_epoch,
                report.best_val_loss,
                report.mean_epoch_seconds()
            );
        }
        TrainedModel::Baseline(b) => {
            b.save(dir.join("baseline.json"))?;
            m.outputs.push("baseline.json".into());
            println!("{spec} on {domain}: {} features", b.vocab.len());
        }
    }
    println!("{domain} test accuracy: {:.2}%", 100.0 * test_acc);
    m.write(dir.join("manifest.json"))?;
    Ok(())
}

fn read_model(checkpoint: &Path, vocab: Option<&PathBuf>) -> Result<TrainedModel, Failure> {
    let bytes = std::fs::read(checkpoint).map_err(|e| Error::Io {
        path: checkpoint.to_path_buf(),
        source: e,
    })?;
    if !bytes.starts_with(&CHECKPOINT_MAGIC) && bytes.first() == Some(&b'{') {
        return Ok(TrainedModel::Baseline(Baseline::load(checkpoint)?));
    }
    let params = load_checkpoint(checkpoint)?;
    let vocab = load_vocab(checkpoint, vocab, &params)?;
    Ok(TrainedModel::Gcn {
        params,
        vocab,
        report: gcn_core::train::TrainReport {
            epochs: vec![],
            stopped_epoch: 0,
            best_epoch: 0,
            best_val_loss: f64::NAN,
            early_stopped: false,
        },
    })
}

fn load_vocab(checkpoint: &Path, vocab: Option<&PathBuf>, params: &GcnParams) -> Result<Vocabulary, Failure> {
    let path = vocab
        .cloned()
        .unwrap_or_else(|| checkpoint.with_file_name("vocab.json"));
    let v = Vocabulary::load(&path)?;
    if v.content_hash() != params.meta.vocab_hash {
        return Err(Failure::Runtime(format!(
            "{} is not the vocabulary this checkpoint was trained with",
            path.display()
        )));
    }
    Ok(v)
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    let cfg = a.cfg.resolve().map_err(usage)?;
    let dir = out_dir(&a.out)?;
    let domain = domain_name(&a.target, a.domain.as_ref());
    let data = DomainDataset::load(&a.target, &domain, cfg.seed)?;
    let model = read_model(&a.checkpoint, a.vocab.as_ref())?;
    let reviews: Vec<&Review> = match a.split {
        EvalSplit::Test => data.split(Split::Test),
        EvalSplit::All => data.all_reviews().iter().collect(),
    };
    let accuracy = model.accuracy(&reviews)?;
    let loss = match &model {
        TrainedModel::Gcn { params, vocab, .. } => {
            Some(evaluate(params, &encode(vocab, &reviews, params.config.max_len))?.loss)
        }
        TrainedModel::Baseline(_) => None,
    };
    let result = json!({
        "target": domain,
        "split": format!("{:?}", a.split).to_lowercase(),
        "examples": reviews.len(),
        "accuracy": accuracy,
        "loss": loss,
    });
    let path = dir.join("eval.json");
    std::fs::write(&path, serde_json::to_string_pretty(&result).map_err(Error::from)?)
        .map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let mut m = manifest("eval", &cfg, vec![cfg.seed])?;
    m.add_input(&a.checkpoint)?;
    m.add_input(&a.target)?;
    m.outputs.push("eval.json".into());
    m.write(dir.join("manifest.json"))?;
    println!("{domain} ({} reviews): accuracy {:.2}%", reviews.len(), 100.0 * accuracy);
    Ok(())
}

fn cmd_matrix(a: MatrixArgs) -> Result<(), Failure> {
    let cfg = a.cfg.resolve().map_err(usage)?;
    let dir = out_dir(&a.out)?;
    let mut m = manifest("matrix", &cfg, cfg.seeds())?;
    let mut datasets = Vec::new();
    for p in &a.domains {
        datasets.push(DomainDataset::load(p, &domain_name(p, None), cfg.seed)?);
        m.add_input(p)?;
    }
    m.config["models"] = json!(a.models.iter().map(|s| s.name()).collect::<Vec<_>>());
    let settings = cfg.settings();
    let seeds = cfg.seeds();
    let matrix = run_matrix(&datasets, &a.models, &settings, &seeds)?;
    matrix.write_csv(dir.join("matrix.csv"))?;
    matrix.write_runs_csv(dir.join("runs.csv"))?;
    let timing = matrix.timing();
    write_timing_csv(&timing, dir.join("timing.csv"))?;
    m.outputs.extend(["matrix.csv", "runs.csv", "timing.csv"].map(PathBuf::from));

    println!("{:<12} {:<12} {:<6} {:>9}", "source", "target", "model", "accuracy");
    for r in &matrix.rows {
        let acc = r.accuracy.map(|x| format!("{x:.2}")).unwrap_or_else(|| "FAILED".into());
        println!("{:<12} {:<12} {:<6} {:>9}", r.source, r.target, r.model, acc);
    }
    if !timing.is_empty() {
        print!("\n{}", format_timing_table(&timing));
    }

    if a.in_domain {
        let path = dir.join("in_domain.csv");
        let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
        w.write_record(["domain", "model", "seed", "accuracy"]).map_err(Error::from)?;
        for &model in &a.models {
            for d in &datasets {
                for &seed in &seeds {
                    let r = run_pair(d, d, model, &settings, seed, PairMode::InDomainSanity)?;
                    w.write_record([d.domain(), model.name(), &seed.to_string(), &format!("{:.2}", 100.0 * r.accuracy)])
                        .map_err(Error::from)?;
                }
            }
        }
        w.flush().map_err(|e| Error::Io { path: path.clone(), source: e })?;
        m.outputs.push("in_domain.csv".into());
    }
    m.write(dir.join("manifest.json"))?;
    if matrix.has_failures() {
        return Err(Failure::Runtime("some matrix cells failed; see matrix.csv".into()));
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<(), Failure> {
    let spec = SyntheticCorpusSpec::with_domains(&a.domains, a.size, a.mix_ratio, a.seed);
    spec.validate().map_err(usage)?;
    let dir = out_dir(&a.out)?;
    let data = generate_synthetic(&spec)?;
    for d in &data {
        write_jsonl(dir.join(format!("{}.jsonl", d.domain())), d.domain(), d.all_reviews())?;
    }
    let path = dir.join("synthetic_spec.json");
    std::fs::write(&path, serde_json::to_string_pretty(&spec).map_err(Error::from)?)
        .map_err(|e| Error::Io { path: path.clone(), source: e })?;
    println!("wrote {} domains of {} sentences to {}", data.len(), a.size, dir.display());
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Result<(), Failure> {
    let params = load_checkpoint(&a.checkpoint)?;
    let vocab = load_vocab(&a.checkpoint, a.vocab.as_ref(), &params)?;
    let tokens = tokenize(&a.text);
    if tokens.is_empty() {
        return Err(Failure::Usage("--text contains no tokens".into()));
    }
    let dir = out_dir(&a.out)?;
    let paths = export_gate_heatmap(&params, &vocab, &tokens, dir, "gates")?;
    for (map, path) in gate_activations(&params, &vocab, &tokens)?.iter().zip(&paths) {
        let mut rows: Vec<(usize, f64)> = map.mean.iter().copied().enumerate().take(tokens.len()).collect();
        rows.sort_by(|x, y| y.1.total_cmp(&x.1));
        println!("width {} -> {}", map.kernel_size, path.display());
        for (i, v) in rows.iter().take(5) {
            println!("  {v:.4}  {}", map.ngrams[*i]);
        }
    }
    Ok(())
}

fn cmd_grad_check(a: GradCheckArgs) -> Result<(), Failure> {
    let report = run_grad_check_suite(&a.seeds)?;
    for r in &report.results {
        println!("{:<40} seed {:<3} max rel err {:.3e}", r.name, r.seed, r.max_rel_error);
    }
    let worst = report.max_rel_error();
    println!("max relative error {worst:.3e} (tolerance {GRAD_CHECK_TOLERANCE:.0e})");
    if !report.passed() {
        return Err(Failure::Runtime("gradient check failed".into()));
    }
    Ok(())
}
