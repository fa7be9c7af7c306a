//! Bilingual lexicon induction: precision at 1 under CSLS retrieval.
//!
//! Source words missing from the source vocabulary are translated by copying
//! the string, which scores a hit only when the gold entry lists the same
//! string. Gold targets outside the target vocabulary can never be
//! retrieved; they stay in the denominator.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::dictionary::{split_pair, Dictionary, Provenance};
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::retrieval::{CslsIndex, CslsParams, UnitRows};

/// Test dictionary: each source word with its acceptable translations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoldDictionary {
    entries: Vec<(String, Vec<String>)>,
}

impl GoldDictionary {
    /// Groups pairs by source word; entry order is first appearance.
    pub fn from_pairs<S: Into<String>, T: Into<String>>(pairs: impl IntoIterator<Item = (S, T)>) -> Self {
        let mut entries: Vec<(String, Vec<String>)> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for (s, t) in pairs {
            let (s, t) = (s.into(), t.into());
            let slot = *index.entry(s.clone()).or_insert_with(|| {
                entries.push((s, Vec::new()));
                entries.len() - 1
            });
            let targets = &mut entries[slot].1;
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        GoldDictionary { entries }
    }

    /// Reads `src tgt` lines separated by a tab or spaces.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (s, t) = split_pair(&line)
                .ok_or_else(|| Error::Eval(format!("gold line {}: expected two words, got {line:?}", lineno + 1)))?;
            pairs.push((s.to_owned(), t.to_owned()));
        }
        Ok(GoldDictionary::from_pairs(pairs))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        GoldDictionary::read(BufReader::new(file))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, Vec<String>)] {
        &self.entries
    }

    /// The `n` entries whose source words rank highest in `src`; entries
    /// with out-of-vocabulary sources come last, in file order.
    pub fn most_frequent(&self, src: &Vocabulary, n: usize) -> GoldDictionary {
        let mut ranked: Vec<(usize, &(String, Vec<String>))> = self
            .entries
            .iter()
            .map(|e| (src.id(&e.0).map_or(usize::MAX, |id| id as usize), e))
            .collect();
        ranked.sort_by_key(|(rank, _)| *rank);
        GoldDictionary {
            entries: ranked.into_iter().take(n).map(|(_, e)| e.clone()).collect(),
        }
    }

    /// First listed translation of every entry whose words are in both
    /// vocabularies, as an id dictionary.
    pub fn to_dictionary(&self, src: &Vocabulary, tgt: &Vocabulary) -> Dictionary {
        let pairs = self.entries.iter().filter_map(|(s, ts)| {
            let s = src.id(s)?;
            ts.iter().find_map(|t| tgt.id(t)).map(|t| (s, t))
        });
        Dictionary::from_pairs(pairs, Provenance::External)
    }
}

impl GoldDictionary {
    /// Fraction of the `dictionary` entries with a gold source word that
    /// the gold dictionary accepts; `None` if no entry has one.
    pub fn precision(&self, dictionary: &Dictionary, src: &Vocabulary, tgt: &Vocabulary) -> Option<f64> {
        let lookup: HashMap<&str, &[String]> = self.entries.iter().map(|(s, ts)| (s.as_str(), ts.as_slice())).collect();
        let (mut judged, mut correct) = (0usize, 0usize);
        for (s, t) in dictionary.iter() {
            if let Some(ts) = lookup.get(src.word(s)) {
                judged += 1;
                correct += usize::from(ts.iter().any(|w| w == tgt.word(t)));
            }
        }
        (judged > 0).then(|| correct as f64 / judged as f64)
    }
}

/// Which gold entries the identical-word filter removes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterScope {
    /// Entries whose source word is one of their own gold translations.
    #[default]
    GoldEntry,
    /// Entries whose source word exists in the target vocabulary.
    TargetVocabulary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub source: String,
    pub predicted: String,
    pub hit: bool,
    /// Predicted by copying an out-of-vocabulary source word.
    pub copied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BliResult {
    pub p_at_1: f64,
    pub total: usize,
    pub hits: usize,
    /// Entries whose source word is in the source vocabulary.
    pub covered: usize,
    pub copied_backoff: usize,
    pub predictions: Vec<Prediction>,
}

/// P@1 of CSLS retrieval against `gold`.
pub fn bli_eval(src: &EmbeddingMatrix, tgt: &EmbeddingMatrix, gold: &GoldDictionary, params: &CslsParams) -> Result<BliResult> {
    let index = eval_index(src, tgt, params)?;
    score(&index, src.vocab(), tgt.vocab(), gold, None)
}

/// P@1 with identical-word entries removed; a top prediction equal to the
/// source string is replaced by the runner-up.
pub fn bli_eval_filtered(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    gold: &GoldDictionary,
    params: &CslsParams,
    scope: FilterScope,
) -> Result<BliResult> {
    let index = eval_index(src, tgt, params)?;
    score(&index, src.vocab(), tgt.vocab(), gold, Some(scope))
}

fn eval_index(src: &EmbeddingMatrix, tgt: &EmbeddingMatrix, params: &CslsParams) -> Result<CslsIndex> {
    let params = CslsParams {
        source_limit: None,
        ..params.clone()
    };
    CslsIndex::build(UnitRows::normalize(src)?, UnitRows::normalize(tgt)?, &params)
}

/// Scores an index built over the full source vocabulary.
pub(crate) fn score(
    index: &CslsIndex,
    src: &Vocabulary,
    tgt: &Vocabulary,
    gold: &GoldDictionary,
    filter: Option<FilterScope>,
) -> Result<BliResult> {
    if gold.is_empty() {
        return Err(Error::Eval("gold dictionary is empty".into()));
    }
    let mut predictions = Vec::with_capacity(gold.len());
    let (mut hits, mut covered, mut copied_backoff) = (0, 0, 0);
    for (source, targets) in gold.entries() {
        let removed = match filter {
            None => false,
            Some(FilterScope::GoldEntry) => targets.contains(source),
            Some(FilterScope::TargetVocabulary) => tgt.id(source).is_some(),
        };
        if removed {
            continue;
        }
        let (predicted, copied) = match src.id(source).filter(|&i| (i as usize) < index.source_rows()) {
            Some(i) => {
                covered += 1;
                let mut j = index.argmax(i as usize);
                if filter.is_some() && tgt.word(j) == source {
                    j = index.argmax_excluding(i as usize, j).unwrap_or(j);
                }
                (tgt.word(j).to_owned(), false)
            }
            None => {
                copied_backoff += 1;
                (source.clone(), true)
            }
        };
        let hit = targets.contains(&predicted);
        hits += usize::from(hit);
        predictions.push(Prediction {
            source: source.clone(),
            predicted,
            hit,
            copied,
        });
    }
    let total = predictions.len();
    if total == 0 {
        return Err(Error::Eval("filtering removed every gold entry".into()));
    }
    Ok(BliResult {
        p_at_1: hits as f64 / total as f64,
        total,
        hits,
        covered,
        copied_backoff,
        predictions,
    })
}
