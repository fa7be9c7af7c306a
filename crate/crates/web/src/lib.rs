//! WebAssembly bindings for the demo page in `www/`. Every export takes
//! plain numbers or strings and returns a JSON string.

use std::sync::Arc;

use anchorvec::corpus::subsample_keep_prob;
use anchorvec::pipeline::{self, Mode, PipelineConfig, SeedMode, Target};
use anchorvec::retrieval::{CslsIndex, UnitRows};
use anchorvec::synth::{self, SynthSpec};
use anchorvec::{Corpus, CslsParams, EmbeddingMatrix, NoiseTable, Role, TrainingConfig, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn json(value: &impl Serialize) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

#[derive(Serialize)]
pub struct CurvePoint {
    pub restart: usize,
    pub update: u64,
    pub dictionary_size: usize,
    pub p_at_1: Option<f64>,
}

#[derive(Serialize)]
pub struct AlignDemo {
    pub seed_entries: usize,
    pub updates_per_run: u64,
    pub curve: Vec<CurvePoint>,
    pub final_p_at_1: Option<f64>,
    /// A few (source, predicted, correct) triples.
    pub examples: Vec<(String, String, bool)>,
}

/// Generates a small synthetic pair and runs the whole pipeline on it.
#[wasm_bindgen]
pub fn align(vocab: u32, sentences: u32, dim: u32, seed_dict: &str, mode: &str, seed: u32) -> Result<String, JsValue> {
    run_align(vocab as usize, sentences as usize, dim as usize, seed_dict, mode, u64::from(seed))
        .map(|d| json(&d))
        .map_err(js)
}

pub fn run_align(
    vocab: usize,
    sentences: usize,
    dim: usize,
    seed_dict: &str,
    mode: &str,
    seed: u64,
) -> anchorvec::Result<AlignDemo> {
    let spec = SynthSpec {
        vocab_size: vocab,
        sentences,
        seed,
        ..SynthSpec::default()
    };
    let data = synth::generate(&spec)?;
    let source = synth::perturb_text(&data.source, 0.1, seed)?;
    let load = |text: &str| -> anchorvec::Result<(Arc<Vocabulary>, Corpus)> {
        let v = Arc::new(Vocabulary::from_lines(text.lines(), vocab * 2)?);
        let c = Corpus::from_lines(text.lines(), &v);
        Ok((v, c))
    };
    let (src_vocab, src) = load(&source)?;
    let (tgt_vocab, tgt) = load(&data.target)?;
    let gold = data.gold_dictionary().most_frequent(&src_vocab, vocab / 2);

    let config = PipelineConfig {
        restarts: 2,
        reinductions: 10,
        mode: mode.parse::<Mode>()?,
        seed_mode: seed_dict.parse::<SeedMode>()?,
        training: TrainingConfig {
            dim,
            subsample_t: 1e-3,
            epochs: 5.0,
            negatives: 5,
            seed,
            ..TrainingConfig::default()
        },
        ..PipelineConfig::default()
    };
    let target = Target::Corpus {
        corpus: &tgt,
        vocab: tgt_vocab,
    };
    let out = pipeline::run(&src, src_vocab, target, &config, Some(&gold), &mut |_| {})?;
    let examples = out
        .final_bli
        .as_ref()
        .map(|b| b.predictions.iter().take(12).map(|p| (p.source.clone(), p.predicted.clone(), p.hit)).collect())
        .unwrap_or_default();
    Ok(AlignDemo {
        seed_entries: out.report.seed_entries,
        updates_per_run: out.report.source_updates_per_run,
        curve: out
            .report
            .reinductions
            .iter()
            .map(|r| CurvePoint {
                restart: r.restart,
                update: r.update,
                dictionary_size: r.dictionary_size,
                p_at_1: r.p_at_1,
            })
            .collect(),
        final_p_at_1: out.report.final_p_at_1,
        examples,
    })
}

#[derive(Serialize)]
pub struct Retrieval {
    pub correct: usize,
    pub max_in_degree: usize,
    /// `histogram[d]`: targets retrieved by exactly `d` queries.
    pub histogram: Vec<usize>,
}

#[derive(Serialize)]
pub struct HubnessDemo {
    pub queries: usize,
    pub cosine: Retrieval,
    pub csls: Retrieval,
}

/// Nearest-neighbor retrieval between noisy copies of random points, with
/// `hubs` extra targets placed near the centroid.
#[wasm_bindgen]
pub fn hubness(n: u32, hubs: u32, noise: f32, k: u32, seed: u32) -> Result<String, JsValue> {
    run_hubness(n as usize, hubs as usize, noise, k as usize, u64::from(seed))
        .map(|d| json(&d))
        .map_err(js)
}

pub fn run_hubness(n: usize, hubs: usize, noise: f32, k: usize, seed: u64) -> anchorvec::Result<HubnessDemo> {
    let dim = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = |scale: f32| -> f32 { ((0..12).map(|_| rng.gen::<f32>()).sum::<f32>() - 6.0) * scale };
    let centre: Vec<f32> = (0..dim).map(|_| gauss(1.0)).collect();
    let mut src = Vec::with_capacity(n * dim);
    for _ in 0..n {
        src.extend(centre.iter().map(|c| c + gauss(1.0)));
    }
    let mut tgt: Vec<f32> = src.iter().map(|x| x + gauss(noise)).collect();
    for _ in 0..hubs {
        tgt.extend(centre.iter().map(|c| c + gauss(0.2)));
    }
    let matrix = |prefix: &str, rows: usize, data: Vec<f32>| -> anchorvec::Result<EmbeddingMatrix> {
        let v = Vocabulary::from_words((0..rows).map(|i| format!("{prefix}{i}")).collect())?;
        EmbeddingMatrix::from_data(Arc::new(v), dim, data, Role::Input)
    };
    let s = matrix("s", n, src)?;
    let t = matrix("t", n + hubs, tgt)?;
    let params = CslsParams {
        neighborhood_k: k,
        ..CslsParams::default()
    };
    let index = CslsIndex::build(UnitRows::normalize(&s)?, UnitRows::normalize(&t)?, &params)?;

    let summarize = |pick: &dyn Fn(usize) -> usize| {
        let mut degree = vec![0usize; n + hubs];
        let mut correct = 0;
        for i in 0..n {
            let j = pick(i);
            degree[j] += 1;
            correct += usize::from(j == i);
        }
        let max_in_degree = degree.iter().copied().max().unwrap_or(0);
        let mut histogram = vec![0; max_in_degree + 1];
        for d in degree {
            histogram[d] += 1;
        }
        Retrieval {
            correct,
            max_in_degree,
            histogram,
        }
    };
    Ok(HubnessDemo {
        queries: n,
        cosine: summarize(&|i| index.forward_neighbor(i) as usize),
        csls: summarize(&|i| index.argmax(i) as usize),
    })
}

#[derive(Serialize)]
pub struct Curves {
    pub rank: Vec<usize>,
    pub unigram: Vec<f64>,
    pub noise: Vec<f64>,
    pub keep: Vec<f64>,
    /// Share of all tokens that survives subsampling.
    pub kept_tokens: f64,
}

/// Noise and subsampling probabilities over a Zipfian vocabulary.
#[wasm_bindgen]
pub fn curves(vocab: u32, zipf_s: f64, alpha: f64, t: f64) -> Result<String, JsValue> {
    run_curves(vocab as usize, zipf_s, alpha, t).map(|d| json(&d)).map_err(js)
}

pub fn run_curves(vocab: usize, zipf_s: f64, alpha: f64, t: f64) -> anchorvec::Result<Curves> {
    let counts: Vec<u64> = (1..=vocab).map(|r| ((1e8 / (r as f64).powf(zipf_s)).round() as u64).max(1)).collect();
    let total: u64 = counts.iter().sum();
    let table = NoiseTable::from_counts(&counts, alpha)?;
    let keep: Vec<f64> = counts.iter().map(|&c| subsample_keep_prob(c, total, t)).collect();
    let kept = counts.iter().zip(&keep).map(|(&c, p)| c as f64 * p).sum::<f64>() / total as f64;
    Ok(Curves {
        rank: (1..=vocab).collect(),
        unigram: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        noise: (0..vocab as u32).map(|w| table.probability(w)).collect(),
        keep,
        kept_tokens: kept,
    })
}
