//! Cosine and CSLS retrieval, dictionary induction and the cyclic
//! consistency filter.
//!
//! CSLS (cross-domain similarity local scaling) penalizes cosine similarity
//! by how close each side is to its own neighborhood in the other space:
//!
//! ```text
//! CSLS(x, y) = 2 cos(x, y) - r_T(x) - r_S(y)
//! ```
//!
//! where `r_T(x)` is the mean cosine of `x` to its `k` nearest target
//! vectors and `r_S(y)` the mean cosine of `y` to its `k` nearest source
//! vectors. All retrieval runs on unit-normalized `f64` copies; the training
//! matrices are never touched. Ties always go to the lowest id.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, Provenance};
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Default CSLS neighborhood size.
pub const DEFAULT_CSLS_K: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CslsParams {
    pub neighborhood_k: usize,
    /// Source rows scored per block.
    pub batch: usize,
    /// Restrict the source side to the first `n` (most frequent) words.
    pub source_limit: Option<usize>,
}

impl Default for CslsParams {
    fn default() -> Self {
        CslsParams {
            neighborhood_k: DEFAULT_CSLS_K,
            batch: 256,
            source_limit: None,
        }
    }
}

/// Unit-normalized rows in double precision.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitRows {
    dim: usize,
    data: Vec<f64>,
}

impl UnitRows {
    /// Normalizes every row; a zero row is an error naming its word.
    pub fn normalize(matrix: &EmbeddingMatrix) -> Result<Self> {
        let dim = matrix.dim();
        let mut data = Vec::with_capacity(matrix.len() * dim);
        for (id, row) in matrix.rows().enumerate() {
            let norm = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector(matrix.vocab().word(id as u32).to_owned()));
            }
            data.extend(row.iter().map(|&v| f64::from(v) / norm));
        }
        Ok(UnitRows { dim, data })
    }

    /// Takes rows that are already unit length as they are.
    pub fn from_normalized(matrix: &EmbeddingMatrix) -> Self {
        UnitRows {
            dim: matrix.dim(),
            data: matrix.as_slice().iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn desc(a: &f64, b: &f64) -> Ordering {
    b.total_cmp(a)
}

/// Mean of the `k` largest values; the values are summed in descending
/// order.
fn top_k_mean(values: &mut [f64], k: usize) -> f64 {
    if k < values.len() {
        values.select_nth_unstable_by(k - 1, desc);
    }
    let top = &mut values[..k];
    top.sort_unstable_by(desc);
    top.iter().sum::<f64>() / k as f64
}

/// Bounded buffer of the `k` largest values seen.
struct TopK<'a> {
    values: &'a mut [f64],
    filled: usize,
    min_pos: usize,
}

impl TopK<'_> {
    #[inline]
    fn push(&mut self, v: f64) {
        let k = self.values.len();
        if self.filled < k {
            self.values[self.filled] = v;
            self.filled += 1;
            if self.filled == k {
                self.refresh_min();
            }
        } else if v > self.values[self.min_pos] {
            self.values[self.min_pos] = v;
            self.refresh_min();
        }
    }

    fn refresh_min(&mut self) {
        let mut pos = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v < self.values[pos] {
                pos = i;
            }
        }
        self.min_pos = pos;
    }
}

fn check_dims(src: &UnitRows, tgt: &UnitRows) -> Result<()> {
    if src.dim() != tgt.dim() {
        return Err(Error::Retrieval(format!(
            "source dimension {} differs from target dimension {}",
            src.dim(),
            tgt.dim()
        )));
    }
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::Retrieval("empty embedding matrix".into()));
    }
    Ok(())
}

fn source_rows(src: &UnitRows, limit: Option<usize>) -> usize {
    limit.map_or(src.len(), |n| n.min(src.len()))
}

fn block_rows(batch: usize, tgt_len: usize) -> usize {
    batch.clamp(1, ((1 << 22) / tgt_len.max(1)).max(1))
}

/// CSLS penalty terms plus cosine nearest neighbors in both directions.
#[derive(Clone, Debug)]
pub struct CslsIndex {
    src: UnitRows,
    tgt: UnitRows,
    src_rows: usize,
    k: usize,
    /// `r_T(x_i)`: mean cosine of source `i` to its `k` nearest targets.
    src_penalty: Vec<f64>,
    /// `r_S(y_j)`: mean cosine of target `j` to its `k` nearest sources.
    tgt_penalty: Vec<f64>,
    forward_nn: Vec<u32>,
    backward_nn: Vec<u32>,
}

impl CslsIndex {
    pub fn build(src: UnitRows, tgt: UnitRows, params: &CslsParams) -> Result<Self> {
        check_dims(&src, &tgt)?;
        let src_rows = source_rows(&src, params.source_limit);
        let tgt_rows = tgt.len();
        let k = params.neighborhood_k;
        if k == 0 || k > src_rows.min(tgt_rows) {
            return Err(Error::Retrieval(format!(
                "neighborhood k = {k} must be in 1..={}",
                src_rows.min(tgt_rows)
            )));
        }

        let block = block_rows(params.batch, tgt_rows);
        let mut sims = vec![0.0f64; block * tgt_rows];
        let mut src_penalty = Vec::with_capacity(src_rows);
        let mut forward_nn = Vec::with_capacity(src_rows);
        let mut col_values = vec![0.0f64; tgt_rows * k];
        let mut col_state = vec![(0usize, 0usize); tgt_rows];
        let mut backward_nn = vec![0u32; tgt_rows];
        let mut backward_best = vec![f64::NEG_INFINITY; tgt_rows];

        for start in (0..src_rows).step_by(block) {
            let end = (start + block).min(src_rows);
            let n = end - start;
            for j in 0..tgt_rows {
                let y = tgt.row(j);
                for i in 0..n {
                    sims[i * tgt_rows + j] = dot(src.row(start + i), y);
                }
            }
            for i in 0..n {
                let row = &mut sims[i * tgt_rows..(i + 1) * tgt_rows];
                let mut best = 0;
                for (j, &s) in row.iter().enumerate() {
                    if s > row[best] {
                        best = j;
                    }
                    let (filled, min_pos) = col_state[j];
                    let mut top = TopK {
                        values: &mut col_values[j * k..(j + 1) * k],
                        filled,
                        min_pos,
                    };
                    top.push(s);
                    col_state[j] = (top.filled, top.min_pos);
                    if s > backward_best[j] {
                        backward_best[j] = s;
                        backward_nn[j] = (start + i) as u32;
                    }
                }
                forward_nn.push(best as u32);
                src_penalty.push(top_k_mean(row, k));
            }
        }

        let tgt_penalty = col_values
            .chunks_exact_mut(k)
            .map(|values| top_k_mean(values, k))
            .collect();

        Ok(CslsIndex {
            src,
            tgt,
            src_rows,
            k,
            src_penalty,
            tgt_penalty,
            forward_nn,
            backward_nn,
        })
    }

    pub fn source_rows(&self) -> usize {
        self.src_rows
    }

    pub fn target_rows(&self) -> usize {
        self.tgt.len()
    }

    pub fn neighborhood_k(&self) -> usize {
        self.k
    }

    pub fn cosine(&self, i: usize, j: usize) -> f64 {
        dot(self.src.row(i), self.tgt.row(j))
    }

    pub fn score(&self, i: usize, j: usize) -> f64 {
        2.0 * self.cosine(i, j) - self.src_penalty[i] - self.tgt_penalty[j]
    }

    pub fn source_penalty(&self, i: usize) -> f64 {
        self.src_penalty[i]
    }

    pub fn target_penalty(&self, j: usize) -> f64 {
        self.tgt_penalty[j]
    }

    /// All CSLS scores of source `i`.
    pub fn scores(&self, i: usize) -> Vec<f64> {
        (0..self.tgt.len()).map(|j| self.score(i, j)).collect()
    }

    /// Target with the highest CSLS score for source `i`.
    pub fn argmax(&self, i: usize) -> u32 {
        self.best_where(i, |_| true).expect("target side is never empty")
    }

    /// Best target other than `excluded`; `None` if there is no other.
    pub fn argmax_excluding(&self, i: usize, excluded: u32) -> Option<u32> {
        self.best_where(i, |j| j != excluded as usize)
    }

    fn best_where(&self, i: usize, allowed: impl Fn(usize) -> bool) -> Option<u32> {
        let x = self.src.row(i);
        let base = self.src_penalty[i];
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for j in 0..self.tgt.len() {
            if !allowed(j) {
                continue;
            }
            let s = 2.0 * dot(x, self.tgt.row(j)) - base - self.tgt_penalty[j];
            if best.is_none() || s > best_score {
                best_score = s;
                best = Some(j as u32);
            }
        }
        best
    }

    /// The `n` best targets for source `i`, best first.
    pub fn top(&self, i: usize, n: usize) -> Vec<(u32, f64)> {
        let mut ranked: Vec<(u32, f64)> = (0..self.tgt.len()).map(|j| (j as u32, self.score(i, j))).collect();
        ranked.sort_by(|a, b| desc(&a.1, &b.1).then(a.0.cmp(&b.0)));
        ranked.truncate(n);
        ranked
    }

    /// Nearest target of source `i` by cosine.
    pub fn forward_neighbor(&self, i: usize) -> u32 {
        self.forward_nn[i]
    }

    /// Nearest source (within the source limit) of target `j` by cosine.
    pub fn backward_neighbor(&self, j: usize) -> u32 {
        self.backward_nn[j]
    }

    /// Whether forward-then-backward cosine retrieval returns to `i`.
    pub fn is_cycle_consistent(&self, i: usize) -> bool {
        self.backward_nn[self.forward_nn[i] as usize] as usize == i
    }
}

/// CSLS score structure for two unit-normalized matrices.
pub fn csls_scores(src_norm: &EmbeddingMatrix, tgt_norm: &EmbeddingMatrix, params: &CslsParams) -> Result<CslsIndex> {
    CslsIndex::build(
        UnitRows::from_normalized(src_norm),
        UnitRows::from_normalized(tgt_norm),
        params,
    )
}

/// Translates every source word (within the source limit) to its CSLS
/// nearest target and keeps the cycle-consistent entries.
pub fn induce(src: &EmbeddingMatrix, tgt: &EmbeddingMatrix, params: &CslsParams) -> Result<Dictionary> {
    let index = CslsIndex::build(UnitRows::normalize(src)?, UnitRows::normalize(tgt)?, params)?;
    Ok(induce_from_index(&index))
}

pub fn induce_from_index(index: &CslsIndex) -> Dictionary {
    let pairs = (0..index.source_rows())
        .filter(|&i| index.is_cycle_consistent(i))
        .map(|i| (i as u32, index.argmax(i)));
    Dictionary::from_pairs(pairs, Provenance::Induced)
}

/// Keeps the entries `i -> j` of `candidate` for which the cosine nearest
/// source of the cosine nearest target of `i` is `i` itself. The candidate
/// target `j` plays no role in the test.
pub fn cyclic_filter(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    candidate: &Dictionary,
    params: &CslsParams,
) -> Result<Dictionary> {
    let mut kept = Dictionary::empty(candidate.provenance());
    if candidate.is_empty() {
        return Ok(kept);
    }
    candidate.validate(src.len(), tgt.len())?;
    let src_n = UnitRows::normalize(src)?;
    let tgt_n = UnitRows::normalize(tgt)?;
    check_dims(&src_n, &tgt_n)?;
    let src_rows = source_rows(&src_n, params.source_limit);

    let nearest_target = |i: usize| {
        let x = src_n.row(i);
        let mut best = (0usize, f64::NEG_INFINITY);
        for j in 0..tgt_n.len() {
            let s = dot(x, tgt_n.row(j));
            if s > best.1 {
                best = (j, s);
            }
        }
        best.0
    };
    let nearest_source = |j: usize| {
        let y = tgt_n.row(j);
        let mut best = (0usize, f64::NEG_INFINITY);
        for i in 0..src_rows {
            let s = dot(src_n.row(i), y);
            if s > best.1 {
                best = (i, s);
            }
        }
        best.0
    };

    let mut backward = std::collections::HashMap::new();
    for (i, j) in candidate.iter() {
        let fwd = nearest_target(i as usize);
        let back = *backward.entry(fwd).or_insert_with(|| nearest_source(fwd));
        if back == i as usize {
            kept.insert(i, j);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use crate::corpus::Vocabulary;
    use crate::embeddings::Role;

    use super::*;

    fn matrix(rows: &[&[f32]]) -> EmbeddingMatrix {
        let dim = rows[0].len();
        let vocab = Arc::new(Vocabulary::from_words((0..rows.len()).map(|i| format!("w{i}")).collect()).unwrap());
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        EmbeddingMatrix::from_data(vocab, dim, data, Role::Input).unwrap()
    }

    #[test]
    fn identical_matrices_give_identity() {
        let m = matrix(&[&[1.0, 0.1], &[0.2, 1.0], &[-1.0, 0.3]]);
        let params = CslsParams {
            neighborhood_k: 1,
            ..CslsParams::default()
        };
        let index = csls_scores(&m.unit_normalize_copy().unwrap(), &m.unit_normalize_copy().unwrap(), &params).unwrap();
        for i in 0..3 {
            assert_eq!(index.argmax(i), i as u32);
        }
        let d = induce(&m, &m, &params).unwrap();
        assert_eq!(d.iter().collect::<Vec<_>>(), [(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn all_identical_vectors_tie_to_lowest_id() {
        let m = matrix(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        let params = CslsParams {
            neighborhood_k: 2,
            ..CslsParams::default()
        };
        let index = csls_scores(&m, &m, &params).unwrap();
        let s = index.score(0, 0);
        assert!((0..3).all(|i| (0..3).all(|j| index.score(i, j) == s)));
        assert!((0..3).all(|i| index.argmax(i) == 0));
    }

    #[test]
    fn k_larger_than_vocab_is_an_error() {
        let m = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let params = CslsParams {
            neighborhood_k: 3,
            ..CslsParams::default()
        };
        assert!(csls_scores(&m, &m, &params).is_err());
    }

    #[test]
    fn cycle_breaks_drop_the_entry() {
        // x0 and x1 both sit closest to y0, and y0's nearest source is x1.
        let src = matrix(&[&[1.0, 0.3], &[1.0, 0.05], &[0.0, 1.0]]);
        let tgt = matrix(&[&[1.0, 0.0], &[-0.2, 1.0]]);
        let candidate = Dictionary::from_pairs([(0, 0), (1, 0), (2, 1)], Provenance::Induced);
        let kept = cyclic_filter(&src, &tgt, &candidate, &CslsParams::default()).unwrap();
        assert_eq!(kept.iter().collect::<Vec<_>>(), [(1, 0), (2, 1)]);

        let empty = Dictionary::empty(Provenance::Induced);
        assert!(cyclic_filter(&src, &tgt, &empty, &CslsParams::default()).unwrap().is_empty());
    }

    #[test]
    fn zero_rows_are_reported() {
        let m = matrix(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(matches!(induce(&m, &m, &CslsParams::default()), Err(Error::ZeroVector(w)) if w == "w1"));
    }

    #[test]
    fn top_k_buffer_keeps_largest() {
        let mut storage = [0.0; 3];
        let mut top = TopK {
            values: &mut storage,
            filled: 0,
            min_pos: 0,
        };
        for v in [0.5, -1.0, 2.0, 0.1, 3.0, 0.7] {
            top.push(v);
        }
        let mut got = storage.to_vec();
        got.sort_by(desc);
        assert_eq!(got, [3.0, 2.0, 0.7]);
    }
}
