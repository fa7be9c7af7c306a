//! Cross-lingual context resolution.
//!
//! A source context word `w` that the dictionary translates as `D(w)` is
//! represented by the frozen target output vector `ỹ_D(w)`; any other word
//! uses its own trainable output vector `x̃_w`. Source words that currently
//! have a translation keep their own output vector allocated; it is simply
//! not selected until the dictionary drops the entry again.

use std::sync::{Arc, RwLock};

use crate::dictionary::Dictionary;
use crate::embeddings::EmbeddingMatrix;
use crate::error::Result;
use crate::trainer::{Context, ContextResolver, ContextView};

const NO_ANCHOR: u32 = u32::MAX;

/// Dense source-id → target-id table; immutable once published.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchorTable {
    targets: Vec<u32>,
    entries: usize,
}

impl AnchorTable {
    fn new(dictionary: &Dictionary, src_len: usize, tgt_len: usize) -> Result<Self> {
        dictionary.validate(src_len, tgt_len)?;
        let mut targets = vec![NO_ANCHOR; src_len];
        for (s, t) in dictionary.iter() {
            targets[s as usize] = t;
        }
        Ok(AnchorTable {
            targets,
            entries: dictionary.len(),
        })
    }

    pub fn target(&self, word: u32) -> Option<u32> {
        match self.targets[word as usize] {
            NO_ANCHOR => None,
            t => Some(t),
        }
    }

    pub fn len(&self) -> usize {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }
}

impl ContextView for Arc<AnchorTable> {
    #[inline]
    fn resolve(&self, word: u32) -> Context {
        match self.targets[word as usize] {
            NO_ANCHOR => Context::Trainable(word),
            t => Context::Frozen(t),
        }
    }
}

/// Resolver that anchors dictionary words to frozen target output vectors.
///
/// The dictionary can be replaced while training workers run; each step
/// works on one snapshot, so it sees either the old or the new dictionary in
/// full.
#[derive(Debug)]
pub struct AnchoredResolver {
    table: RwLock<Arc<AnchorTable>>,
    anchors: Arc<EmbeddingMatrix>,
    src_len: usize,
}

impl AnchoredResolver {
    /// `tgt_outputs` are the target-language output vectors; they are only
    /// ever read.
    pub fn new(dictionary: &Dictionary, src_len: usize, tgt_outputs: Arc<EmbeddingMatrix>) -> Result<Self> {
        let table = AnchorTable::new(dictionary, src_len, tgt_outputs.len())?;
        Ok(AnchoredResolver {
            table: RwLock::new(Arc::new(table)),
            anchors: tgt_outputs,
            src_len,
        })
    }

    /// Publishes a new dictionary for all subsequent steps.
    pub fn replace_dictionary(&self, dictionary: &Dictionary) -> Result<()> {
        let table = Arc::new(AnchorTable::new(dictionary, self.src_len, self.anchors.len())?);
        *self.table.write().expect("anchor table lock poisoned") = table;
        Ok(())
    }

    pub fn snapshot(&self) -> Arc<AnchorTable> {
        self.table.read().expect("anchor table lock poisoned").clone()
    }

    pub fn resolve(&self, word: u32) -> Context {
        if word as usize >= self.src_len {
            panic!("word id {word} outside source vocabulary of {}", self.src_len);
        }
        self.snapshot().resolve(word)
    }

    /// Vector used for `word`, and whether it is frozen.
    pub fn vector<'a>(&'a self, word: u32, src_outputs: &'a EmbeddingMatrix) -> (&'a [f32], bool) {
        match self.resolve(word) {
            Context::Trainable(w) => (src_outputs.row(w as usize), false),
            Context::Frozen(t) => (self.anchors.row(t as usize), true),
        }
    }

    pub fn anchors(&self) -> &Arc<EmbeddingMatrix> {
        &self.anchors
    }

    pub fn dictionary_len(&self) -> usize {
        self.snapshot().len()
    }
}

impl ContextResolver for AnchoredResolver {
    type View = Arc<AnchorTable>;

    fn view(&self) -> Arc<AnchorTable> {
        self.snapshot()
    }

    fn frozen_rows(&self) -> Option<&EmbeddingMatrix> {
        Some(&self.anchors)
    }
}

#[cfg(test)]
mod tests {
    use crate::corpus::Vocabulary;
    use crate::dictionary::Provenance;
    use crate::embeddings::Role;

    use super::*;

    fn anchors(n: usize, dim: usize) -> Arc<EmbeddingMatrix> {
        let vocab = Arc::new(Vocabulary::from_words((0..n).map(|i| format!("t{i}")).collect()).unwrap());
        let data = (0..n * dim).map(|i| i as f32 * 0.1).collect();
        Arc::new(EmbeddingMatrix::from_data(vocab, dim, data, Role::Output).unwrap())
    }

    #[test]
    fn resolves_both_branches() {
        let d = Dictionary::from_pairs([(1, 2)], Provenance::External);
        let r = AnchoredResolver::new(&d, 3, anchors(4, 2)).unwrap();
        assert_eq!(r.resolve(1), Context::Frozen(2));
        assert_eq!(r.resolve(0), Context::Trainable(0));

        let src = EmbeddingMatrix::zeros(
            Arc::new(Vocabulary::from_words(vec!["a".into(), "b".into(), "c".into()]).unwrap()),
            2,
            Role::Output,
        );
        let (v, frozen) = r.vector(1, &src);
        assert!(frozen);
        assert_eq!(v, r.anchors().row(2));
        let (v, frozen) = r.vector(2, &src);
        assert!(!frozen);
        assert_eq!(v, [0.0, 0.0]);
    }

    #[test]
    fn replacing_dictionary() {
        let r = AnchoredResolver::new(&Dictionary::empty(Provenance::Induced), 3, anchors(3, 2)).unwrap();
        assert_eq!(r.resolve(2), Context::Trainable(2));
        r.replace_dictionary(&Dictionary::from_pairs([(2, 0)], Provenance::Induced)).unwrap();
        assert_eq!(r.resolve(2), Context::Frozen(0));
        r.replace_dictionary(&Dictionary::empty(Provenance::Induced)).unwrap();
        assert!((0..3).all(|w| r.resolve(w) == Context::Trainable(w)));
    }

    #[test]
    fn invalid_indices_rejected() {
        let r = AnchoredResolver::new(&Dictionary::empty(Provenance::Induced), 3, anchors(3, 2)).unwrap();
        assert!(r
            .replace_dictionary(&Dictionary::from_pairs([(0, 3)], Provenance::Induced))
            .is_err());
        assert!(r
            .replace_dictionary(&Dictionary::from_pairs([(3, 0)], Provenance::Induced))
            .is_err());
        assert!(AnchoredResolver::new(&Dictionary::from_pairs([(5, 0)], Provenance::Induced), 3, anchors(3, 2)).is_err());
    }
}
