use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use depsearch::ingest::{build_vocabulary, load_corpus, Split, VocabKind, Vocabulary};
use depsearch::model::{Checkpoint, DependencyEmbedding};
use depsearch::pdg::{build_matrix, export_dot, DependencyMode};
use depsearch::pystmt::segment_with_id;
use depsearch::search::{build_index, evaluate_records, query, EvalOptions, Index};
use depsearch::trainer::{FeatureCaps, FeatureStore, TrainConfig};

const CODE_VOCAB: &str = "code.vocab";
const DESC_VOCAB: &str = "desc.vocab";
const FEATURES: &str = "features";

#[derive(Parser)]
#[command(version, about = "Code search with statement semantics and dependency structure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build vocabularies and the feature store from JSON-lines corpus files.
    Preprocess(PreprocessArgs),
    /// Print the statement tree of a Python function as JSON.
    Segment {
        /// Python source file, or `-` for stdin.
        file: PathBuf,
    },
    /// Print the dependency matrix of a Python function.
    Pdg {
        /// Python source file, or `-` for stdin.
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = PdgFormat::Dot)]
        format: PdgFormat,
        #[arg(long, default_value_t = DependencyMode::Full)]
        mode: DependencyMode,
        #[arg(long, default_value_t = TrainConfig::default().max_statements)]
        max_statements: usize,
    },
    /// Train a model on the preprocessed train split.
    Train(TrainArgs),
    /// Encode a split's snippets into a search index.
    Index {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = Split::Test)]
        split: Split,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer a natural-language query from an index.
    Search {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
    /// Rank every pair of a split against seeded distractors.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = Split::Test)]
        split: Split,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = depsearch::search::DEFAULT_DISTRACTORS)]
        distractors: usize,
        /// Also write the report as JSON to this file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PdgFormat {
    Dot,
    Json,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Output directory for vocabularies and features.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().max_statements)]
    max_statements: usize,
    #[arg(long, default_value_t = TrainConfig::default().max_tokens)]
    max_tokens: usize,
    #[arg(long, default_value_t = TrainConfig::default().max_desc_len)]
    max_desc_len: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory written by `preprocess`.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint path to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().lr)]
    lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().dropout)]
    dropout: f64,
    #[arg(long, default_value_t = TrainConfig::default().margin)]
    margin: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    max_epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    patience: usize,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().dependency_mode)]
    dependency_mode: DependencyMode,
    #[arg(long, default_value_t = TrainConfig::default().embedding)]
    embedding: DependencyEmbedding,
    #[arg(long, default_value_t = TrainConfig::default().weight_decay)]
    weight_decay: f64,
    /// Use plain Adam with L2 instead of decoupled weight decay.
    #[arg(long)]
    plain_adam: bool,
    #[arg(long, default_value_t = TrainConfig::default().embed_dim)]
    embed_dim: usize,
    #[arg(long, default_value_t = TrainConfig::default().dep_dim)]
    dep_dim: usize,
    #[arg(long, default_value_t = TrainConfig::default().hidden)]
    hidden: usize,
    #[arg(long, default_value_t = TrainConfig::default().valid_queries)]
    valid_queries: usize,
    #[arg(long, default_value_t = TrainConfig::default().valid_distractors)]
    valid_distractors: usize,
    #[arg(long, default_value_t = TrainConfig::default().chunk_size)]
    chunk_size: usize,
}

fn read_source(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn load_vocabs(data: &Path) -> Result<(Vocabulary, Vocabulary)> {
    Ok((Vocabulary::load(&data.join(CODE_VOCAB))?, Vocabulary::load(&data.join(DESC_VOCAB))?))
}

fn load_split(data: &Path, split: Split) -> Result<FeatureStore> {
    let (store, _) = FeatureStore::load(&data.join(FEATURES), split)
        .with_context(|| format!("loading {split} features; run `preprocess` first"))?;
    Ok(store)
}

fn median(mut xs: Vec<usize>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_unstable();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2] as f64
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) as f64 / 2.0
    }
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    std::fs::create_dir_all(a.out.join(FEATURES)).with_context(|| format!("creating {}", a.out.display()))?;
    let train = load_corpus(&a.train, Split::Train)?;
    let code_vocab = build_vocabulary(&train.pairs, VocabKind::Code);
    let desc_vocab = build_vocabulary(&train.pairs, VocabKind::Description);
    code_vocab.save(&a.out.join(CODE_VOCAB))?;
    desc_vocab.save(&a.out.join(DESC_VOCAB))?;
    info!("vocabularies: {} code, {} description", code_vocab.len(), desc_vocab.len());
    let caps = FeatureCaps { max_statements: a.max_statements, max_tokens: a.max_tokens, max_desc_len: a.max_desc_len };
    let mut corpora = vec![(Split::Train, train)];
    for (split, path) in [(Split::Valid, a.valid), (Split::Test, a.test)] {
        if let Some(p) = path {
            corpora.push((split, load_corpus(&p, split)?));
        }
    }
    println!("{:<6} {:>9} {:>8} {:>9} {:>10}", "split", "pairs", "skipped", "unparsed", "med.stmts");
    for (split, corpus) in corpora {
        let (store, reused) =
            FeatureStore::open_or_build(&a.out.join(FEATURES), split, &corpus.pairs, &code_vocab, &desc_vocab, caps)?;
        let med = median(store.records.iter().map(|r| r.statement_count()).collect());
        println!(
            "{:<6} {:>9} {:>8} {:>9} {:>10.1}{}",
            split.to_string(),
            store.records.len(),
            corpus.skipped.len(),
            store.skipped.len(),
            med,
            if reused { "  (reused)" } else { "" }
        );
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let config = TrainConfig {
        lr: a.lr,
        dropout: a.dropout,
        margin: a.margin,
        batch_size: a.batch_size,
        max_epochs: a.max_epochs,
        patience: a.patience,
        seed: a.seed,
        dependency_mode: a.dependency_mode,
        embedding: a.embedding,
        weight_decay: a.weight_decay,
        adamw: !a.plain_adam,
        embed_dim: a.embed_dim,
        dep_dim: a.dep_dim,
        hidden: a.hidden,
        valid_queries: a.valid_queries,
        valid_distractors: a.valid_distractors,
        chunk_size: a.chunk_size,
        ..TrainConfig::default()
    };
    let (cv, dv) = load_vocabs(&a.data)?;
    let train = load_split(&a.data, Split::Train)?;
    let valid = match FeatureStore::load(&a.data.join(FEATURES), Split::Valid) {
        Ok((s, _)) => s,
        Err(_) => FeatureStore { records: Vec::new(), skipped: Vec::new(), caps: train.caps },
    };
    if train.caps.max_statements != config.max_statements {
        bail!("features were built with max_statements {}", train.caps.max_statements);
    }
    let config = TrainConfig { max_tokens: train.caps.max_tokens, max_desc_len: train.caps.max_desc_len, ..config };
    let outcome = depsearch::trainer::train(&config, &train.records, &valid.records, &cv, &dv)?;
    outcome.checkpoint.save(&a.out)?;
    let history = a.out.with_extension("history.json");
    std::fs::write(&history, serde_json::to_string_pretty(&outcome.history)?)?;
    println!(
        "stopped: {:?}; best epoch {:?} with validation MRR {:.4}; checkpoint {}",
        outcome.stop,
        outcome.best_epoch,
        outcome.best_mrr,
        a.out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Preprocess(a) => preprocess(a)?,
        Command::Segment { file } => {
            let tree = segment_with_id(&read_source(&file)?, &file.display().to_string())?;
            println!("{}", serde_json::to_string_pretty(&tree.to_json())?);
        }
        Command::Pdg { file, format, mode, max_statements } => {
            let tree = segment_with_id(&read_source(&file)?, &file.display().to_string())?;
            let matrix = build_matrix(&tree, mode, max_statements);
            match format {
                PdgFormat::Dot => println!("{}", export_dot(&matrix, &tree)),
                PdgFormat::Json => println!("{}", serde_json::to_string_pretty(&matrix.to_json())?),
            }
        }
        Command::Train(a) => train(a)?,
        Command::Index { data, checkpoint, split, out } => {
            let (cv, dv) = load_vocabs(&data)?;
            let ck = Checkpoint::load(&checkpoint, &cv, &dv)?;
            let index = build_index(&load_split(&data, split)?.records, &ck)?;
            index.save(&out)?;
            println!("indexed {} snippets into {}", index.len(), out.display());
        }
        Command::Search { data, checkpoint, index, query: text, k } => {
            let (cv, dv) = load_vocabs(&data)?;
            let ck = Checkpoint::load(&checkpoint, &cv, &dv)?;
            let index = Index::load(&index)?;
            for hit in query(&index, &ck, &dv, &text, k)? {
                println!("{:>3}  {:>8.4}  {}", hit.rank, hit.score, hit.id);
            }
        }
        Command::Eval { data, checkpoint, split, seed, distractors, json } => {
            let (cv, dv) = load_vocabs(&data)?;
            let ck = Checkpoint::load(&checkpoint, &cv, &dv)?;
            let records = load_split(&data, split)?.records;
            let report = evaluate_records(ck.model(), &records, &EvalOptions { seed, distractors, max_queries: None })?;
            println!("{report}");
            let record = serde_json::to_string(&report.to_json())?;
            println!("{record}");
            if let Some(path) = json {
                std::fs::write(&path, record).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}
