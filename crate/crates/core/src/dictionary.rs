//! Bilingual dictionaries: seed construction and TSV I/O.
//!
//! Re-induction from embeddings lives in [`crate::retrieval`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Identical,
    Numeral,
    External,
    Induced,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::Identical => "identical",
            Provenance::Numeral => "numeral",
            Provenance::External => "external",
            Provenance::Induced => "induced",
        };
        f.write_str(s)
    }
}

/// Partial map from source word ids to target word ids; every source id
/// occurs at most once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dictionary {
    entries: BTreeMap<u32, u32>,
    provenance: Provenance,
}

impl Dictionary {
    pub fn empty(provenance: Provenance) -> Self {
        Dictionary {
            entries: BTreeMap::new(),
            provenance,
        }
    }

    /// Builds a dictionary from pairs; for a repeated source id the first
    /// pair wins.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u32)>, provenance: Provenance) -> Self {
        let mut d = Dictionary::empty(provenance);
        for (s, t) in pairs {
            d.insert(s, t);
        }
        d
    }

    /// Inserts unless `source` already has an entry; returns whether it did.
    pub fn insert(&mut self, source: u32, target: u32) -> bool {
        use std::collections::btree_map::Entry;
        match self.entries.entry(source) {
            Entry::Vacant(v) => {
                v.insert(target);
                true
            }
            Entry::Occupied(_) => false,
        }
    }

    pub fn get(&self, source: u32) -> Option<u32> {
        self.entries.get(&source).copied()
    }

    pub fn contains(&self, source: u32) -> bool {
        self.entries.contains_key(&source)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Entries in increasing source id order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.iter().map(|(&s, &t)| (s, t))
    }

    pub fn validate(&self, src_len: usize, tgt_len: usize) -> Result<()> {
        for (s, t) in self.iter() {
            if s as usize >= src_len || t as usize >= tgt_len {
                return Err(Error::Dictionary(format!(
                    "entry {s} -> {t} outside vocabularies of size {src_len} and {tgt_len}"
                )));
            }
        }
        Ok(())
    }

    /// Writes `src_word<TAB>tgt_word` lines in source id order.
    pub fn write_tsv<W: Write>(&self, mut writer: W, src: &Vocabulary, tgt: &Vocabulary) -> Result<()> {
        self.validate(src.len(), tgt.len())?;
        for (s, t) in self.iter() {
            writeln!(writer, "{}\t{}", src.word(s), tgt.word(t))?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>, src: &Vocabulary, tgt: &Vocabulary) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_tsv(std::io::BufWriter::new(file), src, tgt)
    }
}

/// Every surface form present in both vocabularies, mapped to itself.
pub fn seed_identical(src: &Vocabulary, tgt: &Vocabulary) -> Dictionary {
    seed_filtered(src, tgt, Provenance::Identical, |_| true)
}

/// Identical words that consist of ASCII digits only.
pub fn seed_numerals(src: &Vocabulary, tgt: &Vocabulary) -> Dictionary {
    seed_filtered(src, tgt, Provenance::Numeral, is_numeral)
}

/// `^[0-9]+$`
pub fn is_numeral(word: &str) -> bool {
    !word.is_empty() && word.bytes().all(|b| b.is_ascii_digit())
}

fn seed_filtered(src: &Vocabulary, tgt: &Vocabulary, provenance: Provenance, keep: impl Fn(&str) -> bool) -> Dictionary {
    let pairs = src.words().iter().enumerate().filter_map(|(s, word)| {
        if !keep(word) {
            return None;
        }
        tgt.id(word).map(|t| (s as u32, t))
    });
    Dictionary::from_pairs(pairs, provenance)
}

/// Outcome of reading an external dictionary file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub entries: usize,
    /// Lines with a word outside either vocabulary.
    pub skipped_oov: usize,
    /// Lines whose source word already had an entry.
    pub duplicates: usize,
}

/// Reads `src<TAB>tgt` lines (any whitespace is accepted as separator).
/// Pairs with an out-of-vocabulary word are skipped and counted; for a
/// repeated source word the first mapping is kept.
pub fn read_external<R: BufRead>(reader: R, src: &Vocabulary, tgt: &Vocabulary) -> Result<(Dictionary, LoadReport)> {
    let mut dictionary = Dictionary::empty(Provenance::External);
    let mut report = LoadReport {
        entries: 0,
        skipped_oov: 0,
        duplicates: 0,
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (s, t) = split_pair(&line)
            .ok_or_else(|| Error::Dictionary(format!("line {}: expected two words, got {line:?}", lineno + 1)))?;
        match (src.id(s), tgt.id(t)) {
            (Some(s), Some(t)) => {
                if !dictionary.insert(s, t) {
                    report.duplicates += 1;
                }
            }
            _ => report.skipped_oov += 1,
        }
    }
    report.entries = dictionary.len();
    Ok((dictionary, report))
}

pub fn load_external(path: impl AsRef<Path>, src: &Vocabulary, tgt: &Vocabulary) -> Result<(Dictionary, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_external(BufReader::new(file), src, tgt)
}

pub(crate) fn split_pair(line: &str) -> Option<(&str, &str)> {
    let mut fields = line.split_whitespace();
    match (fields.next(), fields.next(), fields.next()) {
        (Some(s), Some(t), None) => Some((s, t)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(words: &[&str]) -> Vocabulary {
        Vocabulary::from_words(words.iter().map(|w| w.to_string()).collect()).unwrap()
    }

    #[test]
    fn identical_words() {
        let d = seed_identical(&vocab(&["casa", "pink"]), &vocab(&["pink", "house"]));
        assert_eq!(d.iter().collect::<Vec<_>>(), [(1, 0)]);
        assert_eq!(d.provenance(), Provenance::Identical);
        assert!(seed_identical(&vocab(&["a"]), &vocab(&["b"])).is_empty());
    }

    #[test]
    fn numerals_only() {
        let src = vocab(&["1990", "1990s", "x", "07"]);
        let tgt = vocab(&["1990s", "1990", "07"]);
        let d = seed_numerals(&src, &tgt);
        assert_eq!(d.iter().collect::<Vec<_>>(), [(0, 1), (3, 2)]);
        assert!(seed_numerals(&vocab(&["a", "1990s"]), &vocab(&["a", "1990s"])).is_empty());
        assert!(!is_numeral(""));
        assert!(!is_numeral("١٢")); // non-ASCII digits
    }

    #[test]
    fn external_file() {
        let src = vocab(&["perro", "gato", "casa"]);
        let tgt = vocab(&["dog", "cat", "house"]);
        let text = "perro\tdog\ngato\tcat\nraton\tmouse\n";
        let (d, report) = read_external(text.as_bytes(), &src, &tgt).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(report.skipped_oov, 1);

        let (d, report) = read_external("perro\tdog\nperro\tcat\n".as_bytes(), &src, &tgt).unwrap();
        assert_eq!(d.get(0), Some(0));
        assert_eq!(report.duplicates, 1);

        let (d, _) = read_external("".as_bytes(), &src, &tgt).unwrap();
        assert!(d.is_empty());

        assert!(read_external("perro\n".as_bytes(), &src, &tgt).is_err());
        assert!(read_external("a b c\n".as_bytes(), &src, &tgt).is_err());
    }

    #[test]
    fn tsv_output() {
        let src = vocab(&["a", "b"]);
        let tgt = vocab(&["x", "y"]);
        let d = Dictionary::from_pairs([(1, 0), (0, 1)], Provenance::Induced);
        let mut buf = Vec::new();
        d.write_tsv(&mut buf, &src, &tgt).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a\ty\nb\tx\n");
        let bad = Dictionary::from_pairs([(5, 0)], Provenance::Induced);
        assert!(bad.write_tsv(Vec::new(), &src, &tgt).is_err());
    }
}
