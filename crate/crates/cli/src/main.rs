//! `anchorvec`: train and evaluate anchored cross-lingual word embeddings.
//!
//! Randomized commands are bit-reproducible for a fixed `--seed` with
//! `--threads 1`; with more threads training is asynchronous and runs vary.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anchorvec::eval::{self, FilterScope, GoldDictionary};
use anchorvec::pipeline::{self, Mode, PipelineConfig, SeedMode, Target};
use anchorvec::synth::{self, SynthSpec};
use anchorvec::{
    dictionary, retrieval, trainer, Corpus, CslsParams, EmbeddingMatrix, EmbeddingPair, TrainingConfig, Vocabulary,
};
use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "anchorvec", version, about, args_override_self = true)]
struct Cli {
    /// TOML file whose keys supply default flag values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads; only 1 is bit-reproducible
    #[arg(long, global = true, env = "ANCHORVEC_THREADS", default_value_t = 1)]
    threads: usize,

    /// Random seed (no effect on deterministic commands)
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train monolingual skip-gram embeddings
    TrainMono(TrainMono),
    /// Train source embeddings anchored to a target language
    TrainAnchored(Box<TrainAnchored>),
    /// Build a seed dictionary from two vocabularies
    SeedDict(SeedDict),
    /// Induce a dictionary from two embedding files
    Induce(Induce),
    /// Evaluate bilingual lexicon induction against a gold dictionary
    EvalBli(EvalBli),
    /// Generate a synthetic parallel corpus pair with its gold dictionary
    Synth(Synth),
}

#[derive(Args, Debug, Clone)]
struct TrainingArgs {
    /// Negative samples per positive pair
    #[arg(long, default_value_t = 10)]
    negatives: usize,
    /// Embedding dimensionality
    #[arg(long, default_value_t = 300)]
    dim: usize,
    /// Subsampling threshold
    #[arg(long, default_value_t = 1e-5)]
    subsample_t: f64,
    /// Passes over the (target) corpus
    #[arg(long, default_value_t = 10.0)]
    epochs: f64,
    /// Maximum context window
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 0.025)]
    lr_start: f64,
    /// Final learning rate as a fraction of the initial one
    #[arg(long, default_value_t = 1e-4)]
    lr_min_fraction: f64,
    /// Exponent of the unigram noise distribution
    #[arg(long, default_value_t = 0.75)]
    noise_alpha: f64,
    /// Most frequent words kept in each vocabulary
    #[arg(long, default_value_t = 200_000)]
    max_vocab: usize,
    /// Log progress every N updates
    #[arg(long, default_value_t = 1_000_000)]
    log_every: u64,
}

impl TrainingArgs {
    fn config(&self, seed: u64, threads: usize) -> TrainingConfig {
        TrainingConfig {
            negatives: self.negatives,
            dim: self.dim,
            subsample_t: self.subsample_t,
            epochs: self.epochs,
            window: self.window,
            lr_start: self.lr_start,
            lr_min_fraction: self.lr_min_fraction,
            noise_alpha: self.noise_alpha,
            seed,
            threads,
        }
    }
}

#[derive(Args, Debug)]
struct TrainMono {
    /// Tokenized corpus, one sentence per line
    #[arg(long)]
    corpus: PathBuf,
    /// Output word vectors (word2vec text format)
    #[arg(long)]
    out_emb: PathBuf,
    /// Output context vectors, needed to anchor another language to this one
    #[arg(long)]
    out_ctx: Option<PathBuf>,
    /// Vocabulary with counts, as TSV
    #[arg(long)]
    vocab_out: Option<PathBuf>,
    /// JSON training summary
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Args, Debug)]
struct TrainAnchored {
    #[arg(long)]
    src_corpus: PathBuf,
    /// Target corpus; target embeddings are trained on it first
    #[arg(long, conflicts_with_all = ["tgt_emb", "tgt_ctx"], required_unless_present = "tgt_emb")]
    tgt_corpus: Option<PathBuf>,
    /// Pretrained target word vectors
    #[arg(long, visible_alias = "tgt-embeddings", requires = "tgt_ctx")]
    tgt_emb: Option<PathBuf>,
    /// Pretrained target context vectors
    #[arg(long, requires = "tgt_emb")]
    tgt_ctx: Option<PathBuf>,
    /// Initial dictionary: identical, numerals or file:PATH
    #[arg(long, default_value = "identical")]
    seed_dict: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    mode: ModeArg,
    /// Training runs R
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    /// Dictionary re-inductions per run K
    #[arg(long, default_value_t = 50)]
    reinductions: usize,
    /// CSLS neighborhood size
    #[arg(long, default_value_t = 10)]
    csls_k: usize,
    /// Only induce translations for the N most frequent source words
    #[arg(long)]
    induce_top_n: Option<usize>,
    /// Source epochs; default scales --epochs by target/source sentences
    #[arg(long)]
    source_epochs: Option<f64>,
    /// Gold dictionary for P@1 at every re-induction
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Evaluate on the N gold entries with the most frequent source words
    #[arg(long, requires = "gold")]
    gold_top: Option<usize>,
    /// Output source word vectors
    #[arg(long)]
    out_emb: PathBuf,
    /// Output source context vectors
    #[arg(long)]
    out_ctx: Option<PathBuf>,
    /// Output target word vectors (useful with --tgt-corpus)
    #[arg(long)]
    tgt_out_emb: Option<PathBuf>,
    /// Output target context vectors
    #[arg(long)]
    tgt_out_ctx: Option<PathBuf>,
    /// Final induced dictionary, as TSV
    #[arg(long)]
    dict_out: Option<PathBuf>,
    /// JSON run report
    #[arg(long)]
    report: Option<PathBuf>,
    /// Include wall-clock timings in the report
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Basic,
    SelfLearning,
    Full,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Basic => Mode::Basic,
            ModeArg::SelfLearning => Mode::SelfLearning,
            ModeArg::Full => Mode::Full,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SeedKind {
    Identical,
    Numerals,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("src").required(true).args(["src_corpus", "src_emb"])))]
#[command(group(ArgGroup::new("tgt").required(true).args(["tgt_corpus", "tgt_emb"])))]
struct SeedDict {
    #[arg(long, value_enum, default_value_t = SeedKind::Identical)]
    mode: SeedKind,
    #[arg(long)]
    src_corpus: Option<PathBuf>,
    #[arg(long)]
    src_emb: Option<PathBuf>,
    #[arg(long)]
    tgt_corpus: Option<PathBuf>,
    #[arg(long)]
    tgt_emb: Option<PathBuf>,
    /// Most frequent words kept when reading a corpus
    #[arg(long, default_value_t = 200_000)]
    max_vocab: usize,
    /// Output TSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct Induce {
    #[arg(long)]
    src_emb: PathBuf,
    #[arg(long)]
    tgt_emb: PathBuf,
    #[arg(long, default_value_t = 10)]
    csls_k: usize,
    /// Only induce translations for the N first source words
    #[arg(long)]
    induce_top_n: Option<usize>,
    /// Output TSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalBli {
    #[arg(long)]
    src_emb: PathBuf,
    #[arg(long)]
    tgt_emb: PathBuf,
    /// Gold dictionary, "src tgt" per line
    #[arg(long)]
    gold: PathBuf,
    /// Evaluate on the N entries with the most frequent source words
    #[arg(long)]
    gold_top: Option<usize>,
    /// Drop entries a string copy would solve and skip identical predictions
    #[arg(long)]
    filter_identical: bool,
    /// What counts as an identical entry for --filter-identical
    #[arg(long, value_enum, default_value_t = ScopeArg::GoldEntry)]
    filter_scope: ScopeArg,
    #[arg(long, default_value_t = 10)]
    csls_k: usize,
    /// JSON result
    #[arg(long)]
    json: Option<PathBuf>,
    /// Include per-word predictions in the JSON result
    #[arg(long)]
    predictions: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScopeArg {
    GoldEntry,
    TargetVocabulary,
}

#[derive(Args, Debug)]
struct Synth {
    /// Latent vocabulary size
    #[arg(long, default_value_t = 2000)]
    vocab: usize,
    #[arg(long, default_value_t = 200_000)]
    sentences: usize,
    #[arg(long, default_value_t = 6)]
    min_len: usize,
    #[arg(long, default_value_t = 14)]
    max_len: usize,
    /// Zipf exponent of word frequencies
    #[arg(long, default_value_t = 1.0)]
    zipf_s: f64,
    /// Fraction of words spelled differently in the two languages
    #[arg(long, default_value_t = 0.9)]
    translate_fraction: f64,
    #[arg(long, default_value_t = 20)]
    topic_clusters: usize,
    /// Untranslated words written as digit strings
    #[arg(long, default_value_t = 16)]
    numerals: usize,
    /// Fixed associates per word
    #[arg(long, default_value_t = 4)]
    associates: usize,
    /// Probability that a token follows an associate of the previous one
    #[arg(long, default_value_t = 0.5)]
    association_prob: f64,
    /// Fraction of source tokens replaced by noise words
    #[arg(long, default_value_t = 0.0)]
    swap_fraction: f64,
    /// Directory for src.txt, tgt.txt and gold.tsv
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::expand(argv) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainMono(cmd) => train_mono(cmd, cli.seed, cli.threads),
        Command::TrainAnchored(cmd) => train_anchored(*cmd, cli.seed, cli.threads),
        Command::SeedDict(cmd) => seed_dict(cmd),
        Command::Induce(cmd) => induce(cmd),
        Command::EvalBli(cmd) => eval_bli(cmd),
        Command::Synth(cmd) => synth(cmd, cli.seed),
    }
}

fn load_corpus(path: &Path, max_vocab: usize) -> Result<(Arc<Vocabulary>, Corpus)> {
    let vocab = Arc::new(Vocabulary::build(path, max_vocab)?);
    let corpus = Corpus::load(path, &vocab)?;
    eprintln!(
        "{}: {} sentences, {} tokens, {} types",
        path.display(),
        corpus.sentences(),
        vocab.total_tokens(),
        vocab.len()
    );
    Ok((vocab, corpus))
}

fn load_matrix(path: &Path) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::load_text(path).with_context(|| format!("reading embeddings {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MonoReport {
    vocab_size: usize,
    sentences: usize,
    pairs_per_epoch: u64,
    total_updates: u64,
    mean_objective: f64,
}

fn train_mono(cmd: TrainMono, seed: u64, threads: usize) -> Result<()> {
    let config = cmd.training.config(seed, threads);
    config.validate()?;
    let (vocab, corpus) = load_corpus(&cmd.corpus, cmd.training.max_vocab)?;
    let mut pair = anchorvec::embeddings::init_random(vocab.clone(), config.dim, config.seed);
    let mut session = trainer::TrainingSession::new(&corpus, &vocab, &config)?;
    let total = session.total_updates();
    let mut objective = 0.0;
    while session.updates_done() < total {
        let start = session.updates_done();
        let p = session.run_until(&mut pair, &trainer::Monolingual, start.saturating_add(cmd.training.log_every.max(1)))?;
        objective += p.mean_objective * (p.updates - start) as f64;
        eprintln!(
            "{}/{} updates, lr {:.6}, objective {:.4}",
            p.updates, p.total_updates, p.learning_rate, p.mean_objective
        );
    }
    pair.input.save_text(&cmd.out_emb)?;
    if let Some(path) = &cmd.out_ctx {
        pair.output.save_text(path)?;
    }
    if let Some(path) = &cmd.vocab_out {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        vocab.write_tsv(BufWriter::new(file))?;
    }
    if let Some(path) = &cmd.report {
        write_json(
            path,
            &MonoReport {
                vocab_size: vocab.len(),
                sentences: corpus.sentences(),
                pairs_per_epoch: session.pairs_per_epoch(),
                total_updates: total,
                mean_objective: objective / total as f64,
            },
        )?;
    }
    Ok(())
}

fn train_anchored(cmd: TrainAnchored, seed: u64, threads: usize) -> Result<()> {
    let seed_mode: SeedMode = cmd.seed_dict.parse()?;
    let config = PipelineConfig {
        restarts: cmd.restarts,
        reinductions: cmd.reinductions,
        training: cmd.training.config(seed, threads),
        seed_mode,
        mode: cmd.mode.into(),
        csls: CslsParams {
            neighborhood_k: cmd.csls_k,
            source_limit: cmd.induce_top_n,
            ..CslsParams::default()
        },
        source_epochs: cmd.source_epochs,
    };
    config.validate()?;

    let (src_vocab, src_corpus) = load_corpus(&cmd.src_corpus, cmd.training.max_vocab)?;
    let tgt_data;
    let target = match (&cmd.tgt_corpus, &cmd.tgt_emb, &cmd.tgt_ctx) {
        (Some(path), _, _) => {
            tgt_data = load_corpus(path, cmd.training.max_vocab)?;
            Target::Corpus {
                corpus: &tgt_data.1,
                vocab: tgt_data.0.clone(),
            }
        }
        (None, Some(emb), Some(ctx)) => Target::Pretrained(EmbeddingPair::new(load_matrix(emb)?, load_matrix(ctx)?)?),
        _ => bail!("give either --tgt-corpus or both --tgt-emb and --tgt-ctx"),
    };

    let gold = match &cmd.gold {
        Some(path) => {
            let gold = GoldDictionary::load(path)?;
            Some(match cmd.gold_top {
                Some(n) => gold.most_frequent(&src_vocab, n),
                None => gold,
            })
        }
        None => None,
    };

    let out = pipeline::run(
        &src_corpus,
        src_vocab.clone(),
        target,
        &config,
        gold.as_ref(),
        &mut |msg| eprintln!("{msg}"),
    )?;
    for w in &out.report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(p) = out.report.final_p_at_1 {
        println!("P@1 {p:.4}");
    }

    out.source.input.save_text(&cmd.out_emb)?;
    if let Some(path) = &cmd.out_ctx {
        out.source.output.save_text(path)?;
    }
    if let Some(path) = &cmd.tgt_out_emb {
        out.target.input.save_text(path)?;
    }
    if let Some(path) = &cmd.tgt_out_ctx {
        out.target.output.save_text(path)?;
    }
    if let Some(path) = &cmd.dict_out {
        out.dictionary.save_tsv(path, &src_vocab, out.target.vocab())?;
    }
    if let Some(path) = &cmd.report {
        let report = if cmd.timings {
            out.report
        } else {
            out.report.without_timings()
        };
        write_json(path, &report)?;
    }
    Ok(())
}

fn vocabulary(corpus: &Option<PathBuf>, emb: &Option<PathBuf>, max_vocab: usize) -> Result<Arc<Vocabulary>> {
    match (corpus, emb) {
        (Some(path), _) => Ok(Arc::new(Vocabulary::build(path, max_vocab)?)),
        (None, Some(path)) => Ok(load_matrix(path)?.vocab().clone()),
        (None, None) => bail!("no vocabulary source given"),
    }
}

fn seed_dict(cmd: SeedDict) -> Result<()> {
    let src = vocabulary(&cmd.src_corpus, &cmd.src_emb, cmd.max_vocab)?;
    let tgt = vocabulary(&cmd.tgt_corpus, &cmd.tgt_emb, cmd.max_vocab)?;
    let d = match cmd.mode {
        SeedKind::Identical => dictionary::seed_identical(&src, &tgt),
        SeedKind::Numerals => dictionary::seed_numerals(&src, &tgt),
    };
    d.save_tsv(&cmd.out, &src, &tgt)?;
    eprintln!("{} entries", d.len());
    Ok(())
}

fn induce(cmd: Induce) -> Result<()> {
    let src = load_matrix(&cmd.src_emb)?;
    let tgt = load_matrix(&cmd.tgt_emb)?;
    let params = CslsParams {
        neighborhood_k: cmd.csls_k,
        source_limit: cmd.induce_top_n,
        ..CslsParams::default()
    };
    let d = retrieval::induce(&src, &tgt, &params)?;
    d.save_tsv(&cmd.out, src.vocab(), tgt.vocab())?;
    eprintln!("{} entries", d.len());
    Ok(())
}

#[derive(Serialize)]
struct BliSummary<'a> {
    p_at_1: f64,
    total: usize,
    hits: usize,
    covered: usize,
    copied_backoff: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    predictions: Option<&'a [eval::Prediction]>,
}

fn eval_bli(cmd: EvalBli) -> Result<()> {
    let src = load_matrix(&cmd.src_emb)?;
    let tgt = load_matrix(&cmd.tgt_emb)?;
    let mut gold = GoldDictionary::load(&cmd.gold)?;
    if let Some(n) = cmd.gold_top {
        gold = gold.most_frequent(src.vocab(), n);
    }
    let params = CslsParams {
        neighborhood_k: cmd.csls_k,
        ..CslsParams::default()
    };
    let result = if cmd.filter_identical {
        let scope = match cmd.filter_scope {
            ScopeArg::GoldEntry => FilterScope::GoldEntry,
            ScopeArg::TargetVocabulary => FilterScope::TargetVocabulary,
        };
        eval::bli_eval_filtered(&src, &tgt, &gold, &params, scope)?
    } else {
        eval::bli_eval(&src, &tgt, &gold, &params)?
    };
    println!(
        "P@1 {:.4} ({}/{}, {} copied)",
        result.p_at_1, result.hits, result.total, result.copied_backoff
    );
    if let Some(path) = &cmd.json {
        write_json(
            path,
            &BliSummary {
                p_at_1: result.p_at_1,
                total: result.total,
                hits: result.hits,
                covered: result.covered,
                copied_backoff: result.copied_backoff,
                predictions: cmd.predictions.then_some(result.predictions.as_slice()),
            },
        )?;
    }
    Ok(())
}

fn synth(cmd: Synth, seed: u64) -> Result<()> {
    let spec = SynthSpec {
        vocab_size: cmd.vocab,
        sentences: cmd.sentences,
        sentence_len: (cmd.min_len, cmd.max_len),
        zipf_s: cmd.zipf_s,
        translate_fraction: cmd.translate_fraction,
        topic_clusters: cmd.topic_clusters,
        numerals: cmd.numerals,
        associates: cmd.associates,
        association_prob: cmd.association_prob,
        seed,
    };
    let mut data = synth::generate(&spec)?;
    if cmd.swap_fraction != 0.0 {
        data.source = synth::perturb_text(&data.source, cmd.swap_fraction, seed)?;
    }
    let paths = data.write_to(&cmd.out_dir)?;
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}
