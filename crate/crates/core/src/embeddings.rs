//! Embedding matrices and the word2vec text format.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::util;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    Output,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Input => f.write_str("input"),
            Role::Output => f.write_str("output"),
        }
    }
}

/// A `V x dim` matrix of word vectors, row `i` belonging to word `i` of the
/// vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Arc<Vocabulary>,
    dim: usize,
    data: Vec<f32>,
    role: Role,
    language: String,
}

impl EmbeddingMatrix {
    pub fn zeros(vocab: Arc<Vocabulary>, dim: usize, role: Role) -> Self {
        let data = vec![0.0; vocab.len() * dim];
        EmbeddingMatrix {
            vocab,
            dim,
            data,
            role,
            language: String::new(),
        }
    }

    /// Wraps row-major data; `data.len()` must equal `vocab.len() * dim`.
    pub fn from_data(vocab: Arc<Vocabulary>, dim: usize, data: Vec<f32>, role: Role) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("dimensionality must be at least 1".into()));
        }
        if data.len() != vocab.len() * dim {
            return Err(Error::Format(format!(
                "{} values do not fill {} rows of dimension {dim}",
                data.len(),
                vocab.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite value for word {:?}",
                vocab.word((pos / dim) as u32)
            )));
        }
        Ok(EmbeddingMatrix {
            vocab,
            dim,
            data,
            role,
            language: String::new(),
        })
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language = language.into();
        self
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    #[inline]
    pub fn row(&self, id: usize) -> &[f32] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, id: usize) -> &mut [f32] {
        &mut self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// FNV-1a over the bit patterns of all entries.
    pub fn checksum(&self) -> u64 {
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        for v in &self.data {
            for b in v.to_bits().to_le_bytes() {
                hash ^= u64::from(b);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        hash
    }

    /// Copy with every row scaled to unit L2 norm.
    pub fn unit_normalize_copy(&self) -> Result<EmbeddingMatrix> {
        let mut copy = self.clone();
        for (id, row) in copy.data.chunks_exact_mut(self.dim).enumerate() {
            let norm = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector(self.vocab.word(id as u32).to_owned()));
            }
            row.iter_mut().for_each(|v| *v = (f64::from(*v) / norm) as f32);
        }
        Ok(copy)
    }

    /// Writes the word2vec text format: a `V dim` header followed by one
    /// `word v1 .. vdim` line per row. Values use the shortest decimal
    /// representation that reads back to the same `f32`.
    pub fn write_text<W: Write>(&self, writer: W) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Format("refusing to write an empty matrix".into()));
        }
        let mut writer = BufWriter::new(writer);
        writeln!(writer, "{} {}", self.len(), self.dim)?;
        for (word, row) in self.vocab.words().iter().zip(self.rows()) {
            write!(writer, "{word}")?;
            for v in row {
                write!(writer, " {v}")?;
            }
            writeln!(writer)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_text(file)
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<EmbeddingMatrix> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Format("missing header".into()))?;
        let mut parts = header.split_whitespace();
        let (rows, dim) = match (parts.next(), parts.next(), parts.next()) {
            (Some(r), Some(d), None) => (
                r.parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad header {header:?}")))?,
                d.parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad header {header:?}")))?,
            ),
            _ => return Err(Error::Format(format!("bad header {header:?}"))),
        };
        if dim == 0 {
            return Err(Error::Format("dimensionality 0 in header".into()));
        }

        let mut words = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * dim);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap_or_default().to_owned();
            let before = data.len();
            for field in fields {
                let v: f32 = field
                    .parse()
                    .map_err(|_| Error::Format(format!("line {}: bad value {field:?}", lineno + 2)))?;
                if !v.is_finite() {
                    return Err(Error::Format(format!("line {}: non-finite value", lineno + 2)));
                }
                data.push(v);
            }
            if data.len() - before != dim {
                return Err(Error::Format(format!(
                    "line {}: expected {dim} values, found {}",
                    lineno + 2,
                    data.len() - before
                )));
            }
            words.push(word);
        }
        if words.len() != rows {
            return Err(Error::Format(format!(
                "header announces {rows} rows, found {}",
                words.len()
            )));
        }
        let vocab = Arc::new(Vocabulary::from_words(words)?);
        EmbeddingMatrix::from_data(vocab, dim, data, Role::Input)
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_text(BufReader::new(file))
    }
}

/// Input and output vectors of one language.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingPair {
    pub input: EmbeddingMatrix,
    pub output: EmbeddingMatrix,
}

impl EmbeddingPair {
    pub fn new(input: EmbeddingMatrix, output: EmbeddingMatrix) -> Result<Self> {
        if input.dim() != output.dim() || input.vocab().words() != output.vocab().words() {
            return Err(Error::Format(
                "input and output matrices must share vocabulary and dimensionality".into(),
            ));
        }
        Ok(EmbeddingPair {
            input: input.with_role(Role::Input),
            output: output.with_role(Role::Output),
        })
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        self.input.vocab()
    }

    pub fn dim(&self) -> usize {
        self.input.dim()
    }
}

/// word2vec initialization: input components uniform in
/// `[-0.5/dim, 0.5/dim]`, output vectors zero.
pub fn init_random(vocab: Arc<Vocabulary>, dim: usize, seed: u64) -> EmbeddingPair {
    assert!(dim >= 1, "dimensionality must be at least 1");
    let mut rng = util::rng(seed, &[0x494e_4954]);
    let bound = 0.5 / dim as f32;
    let mut input = EmbeddingMatrix::zeros(vocab.clone(), dim, Role::Input);
    for v in input.as_mut_slice() {
        *v = rng.gen_range(-bound..=bound);
    }
    let output = EmbeddingMatrix::zeros(vocab, dim, Role::Output);
    EmbeddingPair { input, output }
}
