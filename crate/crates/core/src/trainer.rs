//! Skip-gram training with a pluggable context resolver.
//!
//! A [`ContextResolver`] decides, for every context word, which output
//! vector the objective uses: the word's own trainable output vector, or a
//! frozen row from another matrix. [`Monolingual`] is plain SGNS; the
//! anchored resolver lives in [`crate::anchoring`].
//!
//! Training runs `T = epochs × pairs(epoch 1)` updates with a linearly
//! decaying learning rate. With more than one thread, workers own disjoint
//! corpus shards and update the shared matrices without locks. With one
//! thread the run is bit-for-bit reproducible from the seed.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, Corpus, NoiseTable, Vocabulary, DEFAULT_NOISE_ALPHA};
use crate::embeddings::{self, EmbeddingMatrix, EmbeddingPair};
use crate::error::{Error, Result};
use crate::hogwild::SharedRows;
use crate::sgns::{sgns_update, OutputRows, Scratch};
use crate::util;

/// SGNS hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Negative samples per positive pair.
    pub negatives: usize,
    pub dim: usize,
    /// Subsampling threshold.
    pub subsample_t: f64,
    /// Passes over the corpus; a fractional part trains on a prefix.
    pub epochs: f64,
    /// Maximum skip-gram window; the effective window is drawn per center.
    pub window: usize,
    pub lr_start: f64,
    /// The learning rate never decays below `lr_start * lr_min_fraction`.
    pub lr_min_fraction: f64,
    pub noise_alpha: f64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            negatives: 10,
            dim: 300,
            subsample_t: 1e-5,
            epochs: 10.0,
            window: 5,
            lr_start: 0.025,
            lr_min_fraction: 1e-4,
            noise_alpha: DEFAULT_NOISE_ALPHA,
            seed: 1,
            threads: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_owned()));
        if self.negatives < 1 {
            return fail("negatives must be at least 1");
        }
        if self.dim < 1 {
            return fail("dim must be at least 1");
        }
        if !(self.epochs > 0.0 && self.epochs.is_finite()) {
            return fail("epochs must be positive");
        }
        if !(self.lr_start > 0.0 && self.lr_start.is_finite()) {
            return fail("lr_start must be positive");
        }
        if !(self.lr_min_fraction > 0.0 && self.lr_min_fraction <= 1.0) {
            return fail("lr_min_fraction must be in (0, 1]");
        }
        if self.subsample_t.is_nan() || self.subsample_t <= 0.0 {
            return fail("subsample_t must be positive");
        }
        if self.window < 1 {
            return fail("window must be at least 1");
        }
        if self.threads < 1 {
            return fail("threads must be at least 1");
        }
        if !(self.noise_alpha >= 0.0 && self.noise_alpha.is_finite()) {
            return fail("noise_alpha must be non-negative");
        }
        Ok(())
    }
}

/// Epochs that give the source language about as many updates as
/// `base_epochs` passes over the target corpus.
pub fn source_epochs(tgt_sentences: u64, src_sentences: u64, base_epochs: f64) -> Result<f64> {
    if src_sentences == 0 {
        return Err(Error::Config("source corpus has no sentences".into()));
    }
    if tgt_sentences == 0 {
        return Err(Error::Config("target corpus has no sentences".into()));
    }
    Ok(base_epochs * tgt_sentences as f64 / src_sentences as f64)
}

/// Which output vector a context word uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Context {
    /// Row of the model's own output matrix; updated by training.
    Trainable(u32),
    /// Row of the resolver's frozen matrix; read-only.
    Frozen(u32),
}

impl Context {
    pub fn is_frozen(self) -> bool {
        matches!(self, Context::Frozen(_))
    }
}

/// A consistent snapshot of a resolver's mapping.
pub trait ContextView {
    fn resolve(&self, word: u32) -> Context;
}

pub trait ContextResolver: Sync {
    type View: ContextView;

    /// Snapshot used for all lookups of one or more consecutive steps.
    fn view(&self) -> Self::View;

    /// Matrix that [`Context::Frozen`] rows index into.
    fn frozen_rows(&self) -> Option<&EmbeddingMatrix>;
}

/// Regular SGNS: every context word uses its own output vector.
#[derive(Clone, Copy, Debug, Default)]
pub struct Monolingual;

impl ContextView for Monolingual {
    #[inline]
    fn resolve(&self, word: u32) -> Context {
        Context::Trainable(word)
    }
}

impl ContextResolver for Monolingual {
    type View = Monolingual;

    fn view(&self) -> Monolingual {
        Monolingual
    }

    fn frozen_rows(&self) -> Option<&EmbeddingMatrix> {
        None
    }
}

impl<R: ContextResolver + Send> ContextResolver for Arc<R> {
    type View = R::View;

    fn view(&self) -> R::View {
        (**self).view()
    }

    fn frozen_rows(&self) -> Option<&EmbeddingMatrix> {
        (**self).frozen_rows()
    }
}

/// State reported after a stretch of training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Progress {
    pub updates: u64,
    pub total_updates: u64,
    pub learning_rate: f64,
    /// Mean objective value over the updates of the last stretch.
    pub mean_objective: f64,
}

struct TrainRows<'m, 'a> {
    own: &'m SharedRows<'a>,
    frozen: Option<&'m EmbeddingMatrix>,
}

impl OutputRows<f32> for TrainRows<'_, '_> {
    type Slot = Context;

    #[inline]
    fn row(&self, slot: Context) -> &[f32] {
        match slot {
            Context::Trainable(w) => self.own.row(w as usize),
            Context::Frozen(j) => self
                .frozen
                .expect("resolver returned a frozen context without frozen rows")
                .row(j as usize),
        }
    }

    #[inline]
    fn row_mut(&mut self, slot: Context) -> Option<&mut [f32]> {
        match slot {
            // SAFETY: `sgns_update` holds at most one row reference at a time
            // and the center row lives in a different matrix.
            Context::Trainable(w) => Some(unsafe { self.own.row_mut(w as usize) }),
            Context::Frozen(_) => None,
        }
    }
}

const MAX_RESAMPLE: usize = 64;

/// Draws `k` negatives (redrawing collisions with the positive context),
/// resolves all contexts and applies one update. Returns the objective.
#[allow(clippy::too_many_arguments)]
fn step<V: ContextView, R: Rng + ?Sized>(
    input: &SharedRows<'_>,
    rows: &mut TrainRows<'_, '_>,
    view: &V,
    noise: &NoiseTable,
    rng: &mut R,
    negatives: usize,
    (center, context): (u32, u32),
    lr: f32,
    scratch: &mut Scratch<f32>,
    targets: &mut Vec<(Context, bool)>,
) -> f32 {
    targets.clear();
    targets.push((view.resolve(context), true));
    for _ in 0..negatives {
        let mut n = noise.sample(rng);
        if noise.len() > 1 {
            let mut tries = 0;
            while n == context && tries < MAX_RESAMPLE {
                n = noise.sample(rng);
                tries += 1;
            }
        }
        targets.push((view.resolve(n), false));
    }
    // SAFETY: the input matrix is only referenced through this row here.
    let center_row = unsafe { input.row_mut(center as usize) };
    sgns_update(center_row, targets, rows, lr, scratch)
}

/// A single SGNS update of `pair` for the given pair of word ids, drawing
/// negatives from `noise` with `rng`. Returns the pre-step objective.
#[allow(clippy::too_many_arguments)]
pub fn sgns_step<C: ContextResolver, R: Rng + ?Sized>(
    pair: &mut EmbeddingPair,
    resolver: &C,
    noise: &NoiseTable,
    rng: &mut R,
    negatives: usize,
    center: u32,
    context: u32,
    lr: f32,
) -> f32 {
    let dim = pair.dim();
    let input = SharedRows::new(pair.input.as_mut_slice(), dim);
    let output = SharedRows::new(pair.output.as_mut_slice(), dim);
    let mut rows = TrainRows {
        own: &output,
        frozen: resolver.frozen_rows(),
    };
    step(
        &input,
        &mut rows,
        &resolver.view(),
        noise,
        rng,
        negatives,
        (center, context),
        lr,
        &mut Scratch::default(),
        &mut Vec::new(),
    )
}

struct Worker {
    id: u64,
    shard: Range<usize>,
    epoch: u64,
    next_sentence: usize,
    stream: ChaCha8Rng,
    negatives: ChaCha8Rng,
    sentence: Vec<u32>,
    pending: Vec<(u32, u32)>,
    pending_pos: usize,
    pairs_this_epoch: u64,
    exhausted: bool,
    scratch: Scratch<f32>,
    targets: Vec<(Context, bool)>,
}

impl Worker {
    fn new(id: u64, shard: Range<usize>, seed: u64) -> Self {
        Worker {
            id,
            next_sentence: shard.start,
            shard,
            epoch: 0,
            stream: corpus::stream_rng(seed, 0, id),
            negatives: util::rng(seed, &[0x4e45_4753, id]),
            sentence: Vec::new(),
            pending: Vec::new(),
            pending_pos: 0,
            pairs_this_epoch: 0,
            exhausted: false,
            scratch: Scratch::default(),
            targets: Vec::new(),
        }
    }

    /// Loads the next sentence with at least one pair, moving on to the next
    /// epoch at the end of the shard.
    fn refill(&mut self, corpus: &Corpus, keep: &[f64], window: usize, seed: u64) -> bool {
        loop {
            if self.next_sentence >= self.shard.end {
                if self.pairs_this_epoch == 0 {
                    self.exhausted = true;
                    return false;
                }
                self.epoch += 1;
                self.next_sentence = self.shard.start;
                self.stream = corpus::stream_rng(seed, self.epoch, self.id);
                self.pairs_this_epoch = 0;
            }
            corpus::subsample_into(corpus.sentence(self.next_sentence), keep, &mut self.stream, &mut self.sentence);
            self.next_sentence += 1;
            corpus::window_pairs(&self.sentence, window, &mut self.stream, &mut self.pending);
            self.pending_pos = 0;
            self.pairs_this_epoch += self.pending.len() as u64;
            if !self.pending.is_empty() {
                return true;
            }
        }
    }
}

fn claim(counter: &AtomicU64, stop: u64) -> Option<u64> {
    let mut current = counter.load(Ordering::Relaxed);
    loop {
        if current >= stop {
            return None;
        }
        match counter.compare_exchange_weak(current, current + 1, Ordering::Relaxed, Ordering::Relaxed) {
            Ok(_) => return Some(current),
            Err(actual) => current = actual,
        }
    }
}

/// Resumable training run over one corpus.
///
/// The update budget is fixed at construction: the pairs of the first epoch
/// are counted with the same random streams training will use, and
/// `T = ceil(epochs × pairs)`. [`TrainingSession::run_until`] advances the
/// run to a given update index, which lets callers pause at exact update
/// boundaries (e.g. to re-induce a dictionary) and resume.
pub struct TrainingSession<'c> {
    corpus: &'c Corpus,
    config: TrainingConfig,
    vocab_len: usize,
    keep: Vec<f64>,
    noise: NoiseTable,
    workers: Vec<Worker>,
    pairs_per_epoch: u64,
    total_updates: u64,
    done: u64,
}

impl<'c> TrainingSession<'c> {
    pub fn new(corpus: &'c Corpus, vocab: &Vocabulary, config: &TrainingConfig) -> Result<Self> {
        config.validate()?;
        let keep = corpus::keep_probabilities(vocab, config.subsample_t);
        let noise = NoiseTable::new(vocab, config.noise_alpha)?;
        let workers: Vec<Worker> = corpus
            .shards(config.threads)
            .into_iter()
            .enumerate()
            .map(|(id, shard)| Worker::new(id as u64, shard, config.seed))
            .collect();

        let mut pairs_per_epoch = 0u64;
        let (mut sentence, mut pairs) = (Vec::new(), Vec::new());
        for worker in &workers {
            let mut rng = corpus::stream_rng(config.seed, 0, worker.id);
            for s in worker.shard.clone() {
                corpus::subsample_into(corpus.sentence(s), &keep, &mut rng, &mut sentence);
                corpus::window_pairs(&sentence, config.window, &mut rng, &mut pairs);
                pairs_per_epoch += pairs.len() as u64;
            }
        }
        if pairs_per_epoch == 0 {
            return Err(Error::Config("corpus yields no training pairs".into()));
        }
        let total_updates = (config.epochs * pairs_per_epoch as f64).ceil().max(1.0) as u64;

        Ok(TrainingSession {
            corpus,
            config: config.clone(),
            vocab_len: vocab.len(),
            keep,
            noise,
            workers,
            pairs_per_epoch,
            total_updates,
            done: 0,
        })
    }

    pub fn total_updates(&self) -> u64 {
        self.total_updates
    }

    pub fn pairs_per_epoch(&self) -> u64 {
        self.pairs_per_epoch
    }

    pub fn updates_done(&self) -> u64 {
        self.done
    }

    pub fn learning_rate(&self, update: u64) -> f64 {
        let c = &self.config;
        let remaining = 1.0 - update as f64 / self.total_updates as f64;
        c.lr_start * remaining.max(c.lr_min_fraction)
    }

    /// Trains until `stop` updates (capped at the total) have been applied.
    pub fn run_until<R: ContextResolver>(
        &mut self,
        pair: &mut EmbeddingPair,
        resolver: &R,
        stop: u64,
    ) -> Result<Progress> {
        if pair.vocab().len() != self.vocab_len {
            return Err(Error::Config(format!(
                "embeddings have {} rows, corpus vocabulary has {}",
                pair.vocab().len(),
                self.vocab_len
            )));
        }
        if pair.dim() != self.config.dim {
            return Err(Error::Config(format!(
                "embeddings have dimension {}, configuration says {}",
                pair.dim(),
                self.config.dim
            )));
        }
        if let Some(frozen) = resolver.frozen_rows() {
            if frozen.dim() != pair.dim() {
                return Err(Error::Config("frozen anchors have a different dimension".into()));
            }
        }

        let stop = stop.min(self.total_updates);
        let start = self.done;
        if stop <= start {
            return Ok(self.progress(0.0));
        }

        let dim = pair.dim();
        let input = SharedRows::new(pair.input.as_mut_slice(), dim);
        let output = SharedRows::new(pair.output.as_mut_slice(), dim);
        let counter = AtomicU64::new(start);
        let shared = Shared {
            corpus: self.corpus,
            keep: &self.keep,
            noise: &self.noise,
            config: &self.config,
            total: self.total_updates,
            input: &input,
            output: &output,
            frozen: resolver.frozen_rows(),
            counter: &counter,
            stop,
        };

        let objective = if self.workers.len() == 1 {
            shared.work(&mut self.workers[0], resolver)
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = self
                    .workers
                    .iter_mut()
                    .map(|worker| {
                        let shared = &shared;
                        scope.spawn(move || shared.work(worker, resolver))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .sum()
            })
        };

        self.done = counter.load(Ordering::Relaxed).min(stop);
        if self.workers.iter().all(|w| w.exhausted) {
            // Nothing left to train on; treat the budget as spent.
            self.done = stop;
        }
        let n = (self.done - start).max(1);
        Ok(self.progress(objective / n as f64))
    }

    fn progress(&self, mean_objective: f64) -> Progress {
        Progress {
            updates: self.done,
            total_updates: self.total_updates,
            learning_rate: self.learning_rate(self.done),
            mean_objective,
        }
    }
}

struct Shared<'s, 'a> {
    corpus: &'s Corpus,
    keep: &'s [f64],
    noise: &'s NoiseTable,
    config: &'s TrainingConfig,
    total: u64,
    input: &'s SharedRows<'a>,
    output: &'s SharedRows<'a>,
    frozen: Option<&'s EmbeddingMatrix>,
    counter: &'s AtomicU64,
    stop: u64,
}

impl Shared<'_, '_> {
    fn work<R: ContextResolver>(&self, worker: &mut Worker, resolver: &R) -> f64 {
        let config = self.config;
        let mut rows = TrainRows {
            own: self.output,
            frozen: self.frozen,
        };
        let mut view = resolver.view();
        let mut objective = 0.0f64;
        while !worker.exhausted {
            if worker.pending_pos == worker.pending.len() {
                if !worker.refill(self.corpus, self.keep, config.window, config.seed) {
                    break;
                }
                view = resolver.view();
            }
            let Some(it) = claim(self.counter, self.stop) else {
                break;
            };
            let remaining = 1.0 - it as f64 / self.total as f64;
            let lr = config.lr_start * remaining.max(config.lr_min_fraction);
            let pair = worker.pending[worker.pending_pos];
            worker.pending_pos += 1;
            objective += f64::from(step(
                self.input,
                &mut rows,
                &view,
                self.noise,
                &mut worker.negatives,
                config.negatives,
                pair,
                lr as f32,
                &mut worker.scratch,
                &mut worker.targets,
            ));
        }
        objective
    }
}

/// Trains `pair` for the full budget, calling `progress` roughly every
/// `report_every` updates.
pub fn train<R: ContextResolver>(
    corpus: &Corpus,
    vocab: &Vocabulary,
    pair: &mut EmbeddingPair,
    resolver: &R,
    config: &TrainingConfig,
    report_every: u64,
    mut progress: impl FnMut(Progress),
) -> Result<Progress> {
    let mut session = TrainingSession::new(corpus, vocab, config)?;
    let every = report_every.max(1);
    loop {
        let next = session.updates_done().saturating_add(every);
        let p = session.run_until(pair, resolver, next)?;
        progress(p);
        if p.updates >= p.total_updates {
            return Ok(p);
        }
    }
}

/// Random initialization followed by monolingual SGNS.
pub fn train_monolingual(
    corpus: &Corpus,
    vocab: Arc<Vocabulary>,
    config: &TrainingConfig,
    report_every: u64,
    progress: impl FnMut(Progress),
) -> Result<EmbeddingPair> {
    config.validate()?;
    let mut pair = embeddings::init_random(vocab.clone(), config.dim, config.seed);
    train(corpus, &vocab, &mut pair, &Monolingual, config, report_every, progress)?;
    Ok(pair)
}
