//! Corpus ingestion: vocabulary construction, frequency subsampling, the
//! unigram noise distribution and skip-gram pair streams.
//!
//! Input corpora are pre-tokenized UTF-8 text, one sentence per line, tokens
//! separated by whitespace. Out-of-vocabulary tokens are silently dropped.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::util;

/// Default vocabulary cap (most frequent words per language).
pub const DEFAULT_MAX_VOCAB: usize = 200_000;

/// Default noise distribution exponent.
pub const DEFAULT_NOISE_ALPHA: f64 = 0.75;

/// Frequency-ranked word table.
///
/// Ids are dense, ordered by non-increasing count; ties keep the order of
/// first occurrence in the corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_tokens: u64,
    total_sentences: u64,
}

impl Vocabulary {
    /// Count a tokenized corpus file and keep the `max_vocab` most frequent
    /// words.
    pub fn build(path: impl AsRef<Path>, max_vocab: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::from_reader(BufReader::new(file), max_vocab)
    }

    pub fn from_reader<R: BufRead>(reader: R, max_vocab: usize) -> Result<Self> {
        let mut counter = Counter::default();
        for line in reader.lines() {
            counter.add_sentence(&line?);
        }
        counter.finish(max_vocab)
    }

    pub fn from_lines<I, S>(lines: I, max_vocab: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counter = Counter::default();
        for line in lines {
            counter.add_sentence(line.as_ref());
        }
        counter.finish(max_vocab)
    }

    /// A vocabulary without frequency information, e.g. read from an
    /// embedding file. Words keep the given order.
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (id, word) in words.iter().enumerate() {
            if index.insert(word.clone(), id as u32).is_some() {
                return Err(Error::Format(format!("duplicate word {word:?}")));
            }
        }
        let counts = vec![0; words.len()];
        Ok(Vocabulary {
            words,
            counts,
            index,
            total_tokens: 0,
            total_sentences: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    /// Sum of the counts of the retained words.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Number of non-empty sentences in the counted corpus.
    pub fn total_sentences(&self) -> u64 {
        self.total_sentences
    }

    /// Write `word<TAB>count` lines in rank order.
    pub fn write_tsv<W: Write>(&self, mut writer: W) -> Result<()> {
        for (word, count) in self.words.iter().zip(&self.counts) {
            writeln!(writer, "{word}\t{count}")?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Read a vocabulary written by [`Vocabulary::write_tsv`].
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("vocabulary line {}: expected word<TAB>count", lineno + 1)))?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("vocabulary line {}: bad count {count:?}", lineno + 1)))?;
            words.push(word.to_owned());
            counts.push(count);
        }
        let mut vocab = Self::from_words(words)?;
        vocab.total_tokens = counts.iter().sum();
        vocab.counts = counts;
        Ok(vocab)
    }
}

#[derive(Default)]
struct Counter {
    // word -> (count, first occurrence)
    counts: HashMap<String, (u64, u64)>,
    seen: u64,
    sentences: u64,
}

impl Counter {
    fn add_sentence(&mut self, line: &str) {
        let mut any = false;
        for token in line.split_whitespace() {
            any = true;
            let seen = self.seen;
            let entry = self.counts.entry(token.to_owned()).or_insert((0, seen));
            entry.0 += 1;
            self.seen += 1;
        }
        if any {
            self.sentences += 1;
        }
    }

    fn finish(self, max_vocab: usize) -> Result<Vocabulary> {
        if max_vocab == 0 {
            return Err(Error::Config("max_vocab must be at least 1".into()));
        }
        if self.seen == 0 {
            return Err(Error::EmptyCorpus);
        }
        let mut ranked: Vec<(String, u64, u64)> = self
            .counts
            .into_iter()
            .map(|(w, (c, first))| (w, c, first))
            .collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        ranked.truncate(max_vocab);

        let mut index = HashMap::with_capacity(ranked.len());
        let mut words = Vec::with_capacity(ranked.len());
        let mut counts = Vec::with_capacity(ranked.len());
        for (id, (word, count, _)) in ranked.into_iter().enumerate() {
            index.insert(word.clone(), id as u32);
            words.push(word);
            counts.push(count);
        }
        Ok(Vocabulary {
            total_tokens: counts.iter().sum(),
            words,
            counts,
            index,
            total_sentences: self.sentences,
        })
    }
}

/// Probability of keeping a token during frequency subsampling.
///
/// Uses the word2vec implementation formula: with relative frequency
/// `f = count / total_tokens`, the token is kept with probability
/// `(sqrt(f / t) + 1) * t / f`, capped at 1.
pub fn subsample_keep_prob(count: u64, total_tokens: u64, t: f64) -> f64 {
    let f = count as f64 / total_tokens as f64;
    let ratio = t / f;
    (((f / t).sqrt() + 1.0) * ratio).min(1.0)
}

/// Per-word keep probabilities for a vocabulary.
pub fn keep_probabilities(vocab: &Vocabulary, t: f64) -> Vec<f64> {
    let total = vocab.total_tokens();
    vocab
        .counts()
        .iter()
        .map(|&c| {
            if c == 0 || total == 0 {
                1.0
            } else {
                subsample_keep_prob(c, total, t)
            }
        })
        .collect()
}

/// Noise distribution `P_n(w) ∝ count(w)^alpha`, sampled in O(1) with
/// Walker's alias method.
#[derive(Clone, Debug)]
pub struct NoiseTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
    weights: Vec<f64>,
    alpha: f64,
}

impl NoiseTable {
    /// Builds the table from vocabulary counts. A vocabulary without counts
    /// yields the uniform distribution.
    pub fn new(vocab: &Vocabulary, alpha: f64) -> Result<Self> {
        Self::from_counts(vocab.counts(), alpha)
    }

    pub fn from_counts(counts: &[u64], alpha: f64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Config("noise table needs a non-empty vocabulary".into()));
        }
        let mut weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(alpha)).collect();
        let sum: f64 = weights.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            weights.iter_mut().for_each(|w| *w /= sum);
        } else {
            let u = 1.0 / counts.len() as f64;
            weights.iter_mut().for_each(|w| *w = u);
        }

        // Vose's construction.
        let n = weights.len();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding.
        for i in small.into_iter().chain(large) {
            prob[i] = 1.0;
        }

        Ok(NoiseTable {
            prob,
            alias,
            weights,
            alpha,
        })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Target probability of drawing `word`.
    pub fn probability(&self, word: u32) -> f64 {
        self.weights[word as usize]
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let i = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[i] {
            i as u32
        } else {
            self.alias[i]
        }
    }
}

/// A corpus encoded as vocabulary ids, held in memory.
///
/// Out-of-vocabulary tokens are dropped; sentences that end up empty are
/// kept so that sentence positions match the input lines that had tokens.
#[derive(Clone, Debug)]
pub struct Corpus {
    tokens: Vec<u32>,
    offsets: Vec<usize>,
}

impl Corpus {
    pub fn load(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::from_reader(BufReader::new(file), vocab)
    }

    pub fn from_reader<R: BufRead>(reader: R, vocab: &Vocabulary) -> Result<Self> {
        let mut corpus = Corpus {
            tokens: Vec::new(),
            offsets: vec![0],
        };
        for line in reader.lines() {
            corpus.push_line(&line?, vocab);
        }
        Ok(corpus)
    }

    pub fn from_lines<I, S>(lines: I, vocab: &Vocabulary) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut corpus = Corpus {
            tokens: Vec::new(),
            offsets: vec![0],
        };
        for line in lines {
            corpus.push_line(line.as_ref(), vocab);
        }
        corpus
    }

    fn push_line(&mut self, line: &str, vocab: &Vocabulary) {
        let mut any = false;
        for token in line.split_whitespace() {
            any = true;
            if let Some(id) = vocab.id(token) {
                self.tokens.push(id);
            }
        }
        if any {
            self.offsets.push(self.tokens.len());
        }
    }

    pub fn sentences(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn sentence(&self, idx: usize) -> &[u32] {
        &self.tokens[self.offsets[idx]..self.offsets[idx + 1]]
    }

    pub fn tokens(&self) -> usize {
        self.tokens.len()
    }

    /// Splits sentence indices into `n` contiguous, nearly equal shards.
    pub fn shards(&self, n: usize) -> Vec<Range<usize>> {
        let n = n.max(1).min(self.sentences().max(1));
        let len = self.sentences();
        (0..n).map(|i| (i * len / n)..((i + 1) * len / n)).collect()
    }
}

/// Applies subsampling to one sentence. Draws exactly one uniform number per
/// token so that the random stream does not depend on the keep probabilities.
pub(crate) fn subsample_into<R: Rng + ?Sized>(sentence: &[u32], keep: &[f64], rng: &mut R, out: &mut Vec<u32>) {
    out.clear();
    for &w in sentence {
        let u: f64 = rng.gen();
        if u < keep[w as usize] {
            out.push(w);
        }
    }
}

/// Emits every `(center, context)` pair whose distance is at most the span
/// returned by `span` for that center.
pub fn window_pairs_with<F>(sentence: &[u32], mut span: F, out: &mut Vec<(u32, u32)>)
where
    F: FnMut() -> usize,
{
    for (i, &center) in sentence.iter().enumerate() {
        let b = span();
        let lo = i.saturating_sub(b);
        let hi = (i + b).min(sentence.len().saturating_sub(1));
        for (j, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
            if j != i {
                out.push((center, context));
            }
        }
    }
}

/// Skip-gram pairs with a dynamic window: each center draws its span
/// uniformly from `1..=window`.
pub(crate) fn window_pairs<R: Rng + ?Sized>(sentence: &[u32], window: usize, rng: &mut R, out: &mut Vec<(u32, u32)>) {
    out.clear();
    window_pairs_with(sentence, || rng.gen_range(1..=window), out);
}

pub(crate) fn stream_rng(seed: u64, epoch: u64, shard: u64) -> ChaCha8Rng {
    util::rng(seed, &[0x5354_5245_414d, epoch, shard])
}

/// Subsampled sentence stream over (a shard of) a corpus.
///
/// The same corpus, keep probabilities and seed always produce the same
/// sequence of sentences.
pub struct CorpusStream<'a> {
    corpus: &'a Corpus,
    keep: &'a [f64],
    range: Range<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl<'a> CorpusStream<'a> {
    pub fn new(corpus: &'a Corpus, keep: &'a [f64], seed: u64) -> Self {
        Self::shard(corpus, keep, 0..corpus.sentences(), seed, 0, 0)
    }

    pub(crate) fn shard(
        corpus: &'a Corpus,
        keep: &'a [f64],
        range: Range<usize>,
        seed: u64,
        epoch: u64,
        shard: u64,
    ) -> Self {
        CorpusStream {
            corpus,
            keep,
            pos: range.start,
            range,
            rng: stream_rng(seed, epoch, shard),
        }
    }

    /// Next subsampled sentence written into `buf`; `false` at the end.
    pub fn next_into(&mut self, buf: &mut Vec<u32>) -> bool {
        if self.pos >= self.range.end {
            return false;
        }
        subsample_into(self.corpus.sentence(self.pos), self.keep, &mut self.rng, buf);
        self.pos += 1;
        true
    }

    /// Turns the sentence stream into a stream of skip-gram pairs.
    pub fn pairs(self, window: usize) -> PairStream<'a> {
        assert!(window >= 1, "window must be at least 1");
        PairStream {
            stream: self,
            window,
            sentence: Vec::new(),
            pairs: Vec::new(),
            pos: 0,
        }
    }
}

impl Iterator for CorpusStream<'_> {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let mut buf = Vec::new();
        self.next_into(&mut buf).then_some(buf)
    }
}

/// `(center, context)` pairs of a [`CorpusStream`].
pub struct PairStream<'a> {
    stream: CorpusStream<'a>,
    window: usize,
    sentence: Vec<u32>,
    pairs: Vec<(u32, u32)>,
    pos: usize,
}

impl Iterator for PairStream<'_> {
    type Item = (u32, u32);

    fn next(&mut self) -> Option<(u32, u32)> {
        while self.pos == self.pairs.len() {
            if !self.stream.next_into(&mut self.sentence) {
                return None;
            }
            window_pairs(&self.sentence, self.window, &mut self.stream.rng, &mut self.pairs);
            self.pos = 0;
        }
        let pair = self.pairs[self.pos];
        self.pos += 1;
        Some(pair)
    }
}
