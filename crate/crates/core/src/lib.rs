//! Cross-lingual word embeddings learned by anchoring a source-language
//! skip-gram model to frozen target-language output vectors.
//!
//! The target language is trained first with ordinary skip-gram with
//! negative sampling. Source-language embeddings are then learned from
//! scratch, with every source context word that has a dictionary
//! translation replaced by the (frozen) output vector of that translation.
//! The dictionary is periodically re-induced from the current embeddings
//! and the whole source training is restarted a few times, each restart
//! seeded with the previous run's dictionary.
//!
//! Module map:
//!
//! * [`corpus`]: vocabulary, subsampling, noise distribution, pair streams.
//! * [`embeddings`]: embedding matrices and word2vec text I/O.
//! * [`sgns`] and [`trainer`]: the negative-sampling objective and the
//!   asynchronous SGD driver with pluggable context resolution.
//! * [`anchoring`]: the cross-lingual context resolver.
//! * [`dictionary`] and [`retrieval`]: seed dictionaries, CSLS retrieval and
//!   dictionary re-induction with the cyclic-consistency filter.
//! * [`pipeline`]: the restart/re-induction loop.
//! * [`eval`]: bilingual lexicon induction scoring.
//! * [`synth`]: synthetic parallel corpora with known translations.

pub mod anchoring;
pub mod corpus;
pub mod dictionary;
pub mod embeddings;
mod error;
pub mod eval;
mod hogwild;
pub mod pipeline;
pub mod retrieval;
pub mod sgns;
pub mod synth;
pub mod trainer;
mod util;

pub use anchoring::AnchoredResolver;
pub use corpus::{Corpus, NoiseTable, Vocabulary};
pub use dictionary::{Dictionary, Provenance};
pub use embeddings::{EmbeddingMatrix, EmbeddingPair, Role};
pub use error::{Error, Result};
pub use eval::{BliResult, GoldDictionary};
pub use pipeline::{Mode, PipelineConfig, RunReport};
pub use retrieval::CslsParams;
pub use trainer::{ContextResolver, Monolingual, TrainingConfig};
