//! Synthetic parallel corpora with a known translation dictionary.
//!
//! A latent token stream is sampled once and rendered twice, through a
//! source and a target naming of the latent words, so both corpora have the
//! same co-occurrence statistics up to renaming.
//!
//! The latent model: word `i` (0-based, rank `i + 1`) has Zipf weight
//! `(i + 1)^-s` and belongs to topic `i mod C`. A sentence picks a topic in
//! proportion to its mass, then each token either follows an association of
//! the previous token (probability `association_prob`) or is drawn from the
//! topic. Every word has a few fixed random associates of similar frequency,
//! which gives each word a distinctive context signature while keeping the
//! Zipf marginal.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{NoiseTable, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::GoldDictionary;
use crate::util;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub vocab_size: usize,
    pub sentences: usize,
    /// Inclusive bounds on tokens per sentence.
    pub sentence_len: (usize, usize),
    pub zipf_s: f64,
    /// Fraction of words with distinct source and target forms; the rest
    /// are spelled the same in both languages.
    pub translate_fraction: f64,
    pub topic_clusters: usize,
    /// Untranslated words rendered as digit strings.
    pub numerals: usize,
    /// Fixed associates per word.
    pub associates: usize,
    pub association_prob: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            vocab_size: 2000,
            sentences: 200_000,
            sentence_len: (6, 14),
            zipf_s: 1.0,
            translate_fraction: 0.9,
            topic_clusters: 20,
            numerals: 16,
            associates: 4,
            association_prob: 0.5,
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_owned()));
        if self.vocab_size < 2 {
            return fail("vocab_size must be at least 2");
        }
        if self.topic_clusters < 1 || self.topic_clusters > self.vocab_size {
            return fail("topic_clusters must be in 1..=vocab_size");
        }
        let (lo, hi) = self.sentence_len;
        if lo < 1 || lo > hi {
            return fail("sentence_len must be a non-empty range of positive lengths");
        }
        if !(0.0..=1.0).contains(&self.translate_fraction) {
            return fail("translate_fraction must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.association_prob) {
            return fail("association_prob must be in [0, 1]");
        }
        if !(self.zipf_s >= 0.0 && self.zipf_s.is_finite()) {
            return fail("zipf_s must be non-negative");
        }
        Ok(())
    }

    fn translated_count(&self) -> usize {
        (self.translate_fraction * self.vocab_size as f64).round() as usize
    }
}

/// A generated corpus pair and its gold dictionary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthCorpus {
    pub source: String,
    pub target: String,
    /// `(source form, target form)` for every latent word, by latent rank.
    pub gold: Vec<(String, String)>,
}

impl SynthCorpus {
    pub fn gold_dictionary(&self) -> GoldDictionary {
        GoldDictionary::from_pairs(self.gold.iter().cloned())
    }

    pub fn gold_tsv(&self) -> String {
        self.gold.iter().map(|(s, t)| format!("{s}\t{t}\n")).collect()
    }

    /// Writes `src.txt`, `tgt.txt` and `gold.tsv` into `dir`, creating it if
    /// needed, and returns the three paths.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<[PathBuf; 3]> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let paths = [dir.join("src.txt"), dir.join("tgt.txt"), dir.join("gold.tsv")];
        let gold = self.gold_tsv();
        for (path, text) in paths.iter().zip([&self.source, &self.target, &gold]) {
            fs::write(path, text).map_err(|e| Error::file(path, e))?;
        }
        Ok(paths)
    }
}

const SOURCE_CONSONANTS: &[u8] = b"bdfgklm";
const TARGET_CONSONANTS: &[u8] = b"nprstvz";
const SHARED_CONSONANTS: &[u8] = b"chjqwx";
const VOWELS: &[u8] = b"aeiou";

/// Random pronounceable forms over one consonant set; distinct sets never
/// produce the same string.
fn forms<R: Rng>(n: usize, consonants: &[u8], rng: &mut R) -> Vec<String> {
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let mut syllables = 2;
    let mut misses = 0;
    while out.len() < n {
        let mut w = String::with_capacity(2 * syllables + 1);
        for _ in 0..rng.gen_range(syllables..=syllables + 1) {
            w.push(*consonants.choose(rng).unwrap() as char);
            w.push(*VOWELS.choose(rng).unwrap() as char);
        }
        if seen.insert(w.clone()) {
            out.push(w);
            misses = 0;
        } else {
            misses += 1;
            if misses > 32 {
                syllables += 1;
                misses = 0;
            }
        }
    }
    out
}

fn numeral_forms<R: Rng>(n: usize, rng: &mut R) -> Vec<String> {
    let bound = (10 * n).max(100) as u64;
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = rng.gen_range(0..bound);
        if seen.insert(v) {
            out.push(v.to_string());
        }
    }
    out
}

/// Surface forms `(source, target)` for each latent word.
fn surface_forms(spec: &SynthSpec) -> Vec<(String, String)> {
    let v = spec.vocab_size;
    let mut rng = util::rng(spec.seed, &[1]);
    let translated: Vec<usize> = index::sample(&mut rng, v, spec.translated_count().min(v)).into_vec();
    let mut is_translated = vec![false; v];
    for &i in &translated {
        is_translated[i] = true;
    }
    let mut untranslated: Vec<usize> = (0..v).filter(|&i| !is_translated[i]).collect();
    untranslated.shuffle(&mut rng);
    let numerals = spec.numerals.min(untranslated.len());

    let src = forms(translated.len(), SOURCE_CONSONANTS, &mut rng);
    let tgt = forms(translated.len(), TARGET_CONSONANTS, &mut rng);
    let shared = forms(untranslated.len() - numerals, SHARED_CONSONANTS, &mut rng);
    let digits = numeral_forms(numerals, &mut rng);

    let mut out = vec![(String::new(), String::new()); v];
    for ((&i, s), t) in translated.iter().zip(src).zip(tgt) {
        out[i] = (s, t);
    }
    for (&i, w) in untranslated.iter().zip(digits.into_iter().chain(shared)) {
        out[i] = (w.clone(), w);
    }
    out
}

/// Associates of each word: distinct random words with rank in
/// `[r / 2, 2r]`, excluding the word itself.
fn associates<R: Rng>(spec: &SynthSpec, rng: &mut R) -> Vec<Vec<u32>> {
    let v = spec.vocab_size;
    (0..v)
        .map(|i| {
            let rank = i + 1;
            let lo = (rank / 2).max(1) - 1;
            let hi = (2 * rank).min(v);
            let pool: Vec<u32> = (lo..hi).filter(|&j| j != i).map(|j| j as u32).collect();
            let m = spec.associates.min(pool.len());
            index::sample(rng, pool.len(), m).into_iter().map(|k| pool[k]).collect()
        })
        .collect()
}

/// Latent sentences as word indices.
fn latent<R: Rng>(spec: &SynthSpec, rng: &mut R) -> Vec<Vec<u32>> {
    let v = spec.vocab_size;
    let c = spec.topic_clusters;
    let weights: Vec<f64> = (0..v).map(|i| ((i + 1) as f64).powf(-spec.zipf_s)).collect();
    let members: Vec<Vec<u32>> = (0..c).map(|t| (t..v).step_by(c).map(|i| i as u32).collect()).collect();
    let within: Vec<WeightedIndex<f64>> = members
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&i| weights[i as usize])).expect("positive weights"))
        .collect();
    let topic = WeightedIndex::new(members.iter().map(|m| m.iter().map(|&i| weights[i as usize]).sum::<f64>()))
        .expect("positive weights");
    let assoc = associates(spec, rng);

    let (lo, hi) = spec.sentence_len;
    (0..spec.sentences)
        .map(|_| {
            let t = topic.sample(rng);
            let len = rng.gen_range(lo..=hi);
            let mut sentence = Vec::with_capacity(len);
            let mut prev: Option<u32> = None;
            for _ in 0..len {
                let follow = rng.gen_bool(spec.association_prob);
                let next = match prev {
                    Some(p) if follow && !assoc[p as usize].is_empty() => *assoc[p as usize].choose(rng).unwrap(),
                    _ => members[t][within[t].sample(rng)],
                };
                sentence.push(next);
                prev = Some(next);
            }
            sentence
        })
        .collect()
}

fn render(sentences: &[Vec<u32>], names: impl Fn(u32) -> String) -> String {
    let mut out = String::new();
    for s in sentences {
        for (k, &w) in s.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            out.push_str(&names(w));
        }
        out.push('\n');
    }
    out
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let names = surface_forms(spec);
    let mut rng = util::rng(spec.seed, &[2]);
    let sentences = latent(spec, &mut rng);
    let source = render(&sentences, |w| names[w as usize].0.clone());
    let target = render(&sentences, |w| names[w as usize].1.clone());
    Ok(SynthCorpus {
        source,
        target,
        gold: names,
    })
}

/// Replaces each token, with probability `swap_fraction`, by a different
/// word drawn from the text's own unigram^0.75 distribution.
pub fn perturb_text(text: &str, swap_fraction: f64, seed: u64) -> Result<String> {
    if !(0.0..1.0).contains(&swap_fraction) {
        return Err(Error::Config("swap_fraction must be in [0, 1)".into()));
    }
    if swap_fraction == 0.0 {
        return Ok(text.to_owned());
    }
    let vocab = Vocabulary::from_lines(text.lines(), usize::MAX)?;
    let noise = NoiseTable::new(&vocab, 0.75)?;
    let mut rng = util::rng(seed, &[3]);
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        for (k, token) in line.split_whitespace().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            let id = vocab.id(token).expect("token is in the text's own vocabulary");
            if vocab.len() > 1 && rng.gen_bool(swap_fraction) {
                let mut draw = noise.sample(&mut rng);
                while draw == id {
                    draw = noise.sample(&mut rng);
                }
                out.push_str(vocab.word(draw));
            } else {
                out.push_str(token);
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// File version of [`perturb_text`].
pub fn perturb(input: impl AsRef<Path>, output: impl AsRef<Path>, swap_fraction: f64, seed: u64) -> Result<()> {
    let (input, output) = (input.as_ref(), output.as_ref());
    let text = fs::read_to_string(input).map_err(|e| Error::file(input, e))?;
    let perturbed = perturb_text(&text, swap_fraction, seed)?;
    fs::write(output, perturbed).map_err(|e| Error::file(output, e))
}
