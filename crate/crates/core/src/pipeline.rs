//! The full training loop: monolingual target embeddings, then `R` anchored
//! source runs with `K` dictionary re-inductions each.
//!
//! Every restart re-initializes the source embeddings and the learning-rate
//! schedule but keeps the dictionary induced at the end of the previous run.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::anchoring::AnchoredResolver;
use crate::corpus::{Corpus, Vocabulary};
use crate::dictionary::{self, Dictionary};
use crate::embeddings::{self, EmbeddingPair};
use crate::error::{Error, Result};
use crate::eval::{self, BliResult, GoldDictionary};
use crate::retrieval::{self, CslsIndex, CslsParams, UnitRows};
use crate::trainer::{self, Progress, TrainingConfig, TrainingSession};
use crate::util::Clock;

/// Ablation switch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Seed dictionary only: one run, no re-induction.
    Basic,
    /// One run with re-induction.
    #[serde(alias = "self_learning")]
    SelfLearning,
    /// Re-induction and restarts.
    #[default]
    Full,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(Mode::Basic),
            "self-learning" | "self_learning" => Ok(Mode::SelfLearning),
            "full" => Ok(Mode::Full),
            _ => Err(Error::Config(format!("unknown mode {s:?} (basic, self-learning, full)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Basic => "basic",
            Mode::SelfLearning => "self-learning",
            Mode::Full => "full",
        })
    }
}

/// Where the initial dictionary comes from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SeedMode {
    #[default]
    Identical,
    Numerals,
    External(PathBuf),
}

impl SeedMode {
    pub fn build(&self, src: &Vocabulary, tgt: &Vocabulary) -> Result<Dictionary> {
        match self {
            SeedMode::Identical => Ok(dictionary::seed_identical(src, tgt)),
            SeedMode::Numerals => Ok(dictionary::seed_numerals(src, tgt)),
            SeedMode::External(path) => Ok(dictionary::load_external(path, src, tgt)?.0),
        }
    }
}

impl FromStr for SeedMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identical" => Ok(SeedMode::Identical),
            "numerals" => Ok(SeedMode::Numerals),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(SeedMode::External(path.into())),
                _ => Err(Error::Config(format!(
                    "unknown seed {s:?} (identical, numerals, file:PATH)"
                ))),
            },
        }
    }
}

impl TryFrom<String> for SeedMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SeedMode> for String {
    fn from(mode: SeedMode) -> String {
        mode.to_string()
    }
}

impl fmt::Display for SeedMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedMode::Identical => f.write_str("identical"),
            SeedMode::Numerals => f.write_str("numerals"),
            SeedMode::External(path) => write!(f, "file:{}", path.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub restarts: usize,
    pub reinductions: usize,
    pub training: TrainingConfig,
    pub seed_mode: SeedMode,
    pub mode: Mode,
    pub csls: CslsParams,
    /// Source epochs; by default `training.epochs` scaled by the ratio of
    /// target to source sentences.
    pub source_epochs: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            restarts: 3,
            reinductions: 50,
            training: TrainingConfig::default(),
            seed_mode: SeedMode::default(),
            mode: Mode::default(),
            csls: CslsParams::default(),
            source_epochs: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if let Some(e) = self.source_epochs {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Config("source_epochs must be positive".into()));
            }
        }
        self.training.validate()
    }

    pub fn effective_restarts(&self) -> usize {
        match self.mode {
            Mode::Full => self.restarts,
            Mode::Basic | Mode::SelfLearning => 1,
        }
    }

    pub fn effective_reinductions(&self) -> usize {
        match self.mode {
            Mode::Basic => 0,
            Mode::SelfLearning | Mode::Full => self.reinductions,
        }
    }
}

/// Update indices at which the dictionary is re-induced: multiples of
/// `floor(T / K)`. The remainder of `T / K` gets no extra event.
pub fn reinduction_schedule(total_updates: u64, k: usize) -> Result<Vec<u64>> {
    let k = k as u64;
    if k == 0 {
        return Ok(Vec::new());
    }
    if k > total_updates {
        return Err(Error::Config(format!(
            "{k} re-inductions exceed the {total_updates} scheduled updates"
        )));
    }
    let step = total_updates / k;
    Ok((1..=k).map(|i| i * step).collect())
}

/// Target side of a run.
pub enum Target<'a> {
    /// Train target embeddings on this corpus first.
    Corpus { corpus: &'a Corpus, vocab: Arc<Vocabulary> },
    /// Use existing target input and output vectors.
    Pretrained(EmbeddingPair),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reinduction {
    /// Zero-based restart index.
    pub restart: usize,
    pub update: u64,
    pub dictionary_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_at_1: Option<f64>,
    /// Share of induced entries covered by the gold dictionary that it
    /// accepts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dictionary_precision: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Phase {
    pub name: String,
    /// Seconds since the run started, at the end of the phase.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: Mode,
    pub restarts: usize,
    pub reinductions_per_run: usize,
    pub seed_entries: usize,
    pub target_updates: Option<u64>,
    pub source_epochs: f64,
    pub source_updates_per_run: u64,
    pub reinductions: Vec<Reinduction>,
    pub final_dictionary_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_p_at_1: Option<f64>,
    pub target_output_checksum: u64,
    pub phases: Vec<Phase>,
    pub warnings: Vec<String>,
}

impl RunReport {
    /// Drops wall-clock readings so reports of identical runs are equal.
    pub fn without_timings(mut self) -> Self {
        for phase in &mut self.phases {
            phase.finished_at = None;
        }
        self
    }
}

pub struct RunOutput {
    pub source: EmbeddingPair,
    pub target: EmbeddingPair,
    pub dictionary: Dictionary,
    pub report: RunReport,
    /// Evaluation of the final embeddings when a gold dictionary was given.
    pub final_bli: Option<BliResult>,
}

/// Runs the pipeline with the seed dictionary named by `config.seed_mode`.
pub fn run(
    src_corpus: &Corpus,
    src_vocab: Arc<Vocabulary>,
    target: Target<'_>,
    config: &PipelineConfig,
    gold: Option<&GoldDictionary>,
    log: &mut dyn FnMut(&str),
) -> Result<RunOutput> {
    let tgt_vocab = match &target {
        Target::Corpus { vocab, .. } => vocab.clone(),
        Target::Pretrained(pair) => pair.vocab().clone(),
    };
    let seed = config.seed_mode.build(&src_vocab, &tgt_vocab)?;
    run_with_seed(src_corpus, src_vocab, target, seed, config, gold, log)
}

/// Runs the pipeline from an explicit seed dictionary.
pub fn run_with_seed(
    src_corpus: &Corpus,
    src_vocab: Arc<Vocabulary>,
    target: Target<'_>,
    seed: Dictionary,
    config: &PipelineConfig,
    gold: Option<&GoldDictionary>,
    log: &mut dyn FnMut(&str),
) -> Result<RunOutput> {
    config.validate()?;
    let clock = Clock::start();
    let mut phases = Vec::new();
    let phase = |name: String, phases: &mut Vec<Phase>| {
        phases.push(Phase {
            name,
            finished_at: clock.elapsed_secs(),
        })
    };

    let training = &config.training;
    let (target, target_updates, tgt_sentences) = match target {
        Target::Corpus { corpus, vocab } => {
            log(&format!("training target embeddings on {} sentences", corpus.sentences()));
            let mut last = None;
            let pair = trainer::train_monolingual(corpus, vocab, training, 1_000_000, |p: Progress| {
                log(&format!("target {}/{} updates, lr {:.6}", p.updates, p.total_updates, p.learning_rate));
                last = Some(p.total_updates);
            })?;
            (pair, last, Some(corpus.sentences() as u64))
        }
        Target::Pretrained(pair) => (pair, None, None),
    };
    phase("target".into(), &mut phases);

    if target.dim() != training.dim {
        return Err(Error::Config(format!(
            "target embeddings have dimension {}, configuration says {}",
            target.dim(),
            training.dim
        )));
    }
    if seed.is_empty() {
        return Err(Error::EmptySeed(format!(
            "{} seed dictionary has no entries in the source ({} words) and target ({} words) vocabularies",
            seed.provenance(),
            src_vocab.len(),
            target.vocab().len()
        )));
    }
    let seed_entries = seed.len();
    log(&format!("seed dictionary: {seed_entries} entries ({})", seed.provenance()));

    let source_epochs = match (config.source_epochs, tgt_sentences) {
        (Some(e), _) => e,
        (None, Some(tgt)) => trainer::source_epochs(tgt, src_corpus.sentences() as u64, training.epochs)?,
        (None, None) => training.epochs,
    };

    let anchors = Arc::new(target.output.clone());
    let checksum = anchors.checksum();
    let resolver = AnchoredResolver::new(&seed, src_vocab.len(), anchors.clone())?;
    let tgt_unit = UnitRows::normalize(&target.input)?;
    let induce_params = &config.csls;
    let eval_params = CslsParams {
        source_limit: None,
        ..config.csls.clone()
    };

    let restarts = config.effective_restarts();
    let k = config.effective_reinductions();
    let mut reinductions = Vec::new();
    let mut dictionary = seed;
    let mut source = None;
    let mut source_updates = 0;

    for r in 0..restarts {
        let run_config = TrainingConfig {
            epochs: source_epochs,
            seed: training.seed.wrapping_add(r as u64),
            ..training.clone()
        };
        let mut pair = embeddings::init_random(src_vocab.clone(), run_config.dim, run_config.seed);
        let mut session = TrainingSession::new(src_corpus, &src_vocab, &run_config)?;
        let total = session.total_updates();
        source_updates = total;
        log(&format!(
            "run {}/{restarts}: {total} updates, {} dictionary entries",
            r + 1,
            resolver.dictionary_len()
        ));

        for at in reinduction_schedule(total, k)? {
            session.run_until(&mut pair, &resolver, at)?;
            let src_unit = UnitRows::normalize(&pair.input)?;
            let index = CslsIndex::build(src_unit.clone(), tgt_unit.clone(), induce_params)?;
            dictionary = retrieval::induce_from_index(&index);
            resolver.replace_dictionary(&dictionary)?;

            let dictionary_precision = gold.and_then(|g| g.precision(&dictionary, &src_vocab, target.vocab()));
            let p_at_1 = match gold {
                Some(gold) => {
                    let index = if induce_params.source_limit.is_some() {
                        CslsIndex::build(src_unit, tgt_unit.clone(), &eval_params)?
                    } else {
                        index
                    };
                    Some(eval::score(&index, &src_vocab, target.vocab(), gold, None)?.p_at_1)
                }
                None => None,
            };
            log(&format!(
                "run {} update {at}/{total}: {} entries{}{}",
                r + 1,
                dictionary.len(),
                dictionary_precision.map_or(String::new(), |p| format!(", precision {p:.4}")),
                p_at_1.map_or(String::new(), |p| format!(", P@1 {p:.4}"))
            ));
            reinductions.push(Reinduction {
                restart: r,
                update: at,
                dictionary_size: dictionary.len(),
                p_at_1,
                dictionary_precision,
            });
        }
        session.run_until(&mut pair, &resolver, total)?;
        phase(format!("run {}", r + 1), &mut phases);
        source = Some(pair);
    }
    let source = source.expect("at least one restart");

    let final_bli = match gold {
        Some(gold) => Some(eval::bli_eval(&source.input, &target.input, gold, &eval_params)?),
        None => None,
    };
    phase("evaluation".into(), &mut phases);

    let mut warnings = Vec::new();
    if let Some(w) = growth_warning(&reinductions) {
        warnings.push(w);
    }
    if anchors.checksum() != checksum || target.output.checksum() != checksum {
        warnings.push("target output vectors changed during source training".into());
    }

    let report = RunReport {
        mode: config.mode,
        restarts,
        reinductions_per_run: k,
        seed_entries,
        target_updates,
        source_epochs,
        source_updates_per_run: source_updates,
        final_dictionary_size: dictionary.len(),
        reinductions,
        final_p_at_1: final_bli.as_ref().map(|b| b.p_at_1),
        target_output_checksum: checksum,
        phases,
        warnings,
    };
    Ok(RunOutput {
        source,
        target,
        dictionary,
        report,
        final_bli,
    })
}

/// Soft convergence check on the first run: after its first quarter, the
/// dictionary should not shrink in more than one step out of five.
fn growth_warning(events: &[Reinduction]) -> Option<String> {
    let first: Vec<usize> = events.iter().filter(|e| e.restart == 0).map(|e| e.dictionary_size).collect();
    let tail = &first[first.len() / 4..];
    if tail.len() < 2 {
        return None;
    }
    let steps = tail.len() - 1;
    let growing = tail.windows(2).filter(|w| w[1] >= w[0]).count();
    if (growing as f64) < 0.8 * steps as f64 {
        Some(format!(
            "dictionary size grew or held in only {growing} of {steps} re-inductions after the first quarter of run 1"
        ))
    } else {
        None
    }
}
