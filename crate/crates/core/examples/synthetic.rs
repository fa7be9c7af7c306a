//! End-to-end run on a generated corpus pair.
//!
//! `cargo run --release --example synthetic -- [mode] [seed] [dim] [subsample_t]`

use std::sync::Arc;

use anchorvec::pipeline::{self, Mode, PipelineConfig, SeedMode, Target};
use anchorvec::synth::{self, SynthSpec};
use anchorvec::{Corpus, Vocabulary};

fn main() -> anchorvec::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_owned());
    let mode: Mode = arg(0, "full").parse()?;
    let seed = arg(1, "identical");
    let dim: usize = arg(2, "300").parse().unwrap();
    let t: f64 = arg(3, "1e-5").parse().unwrap();

    let data = synth::generate(&SynthSpec::default())?;
    let source_text = synth::perturb_text(&data.source, 0.1, 7)?;
    let gold = data.gold_dictionary();

    let src_vocab = Arc::new(Vocabulary::from_lines(source_text.lines(), 200_000)?);
    let tgt_vocab = Arc::new(Vocabulary::from_lines(data.target.lines(), 200_000)?);
    let src = Corpus::from_lines(source_text.lines(), &src_vocab);
    let tgt = Corpus::from_lines(data.target.lines(), &tgt_vocab);

    let mut config = PipelineConfig {
        mode,
        ..PipelineConfig::default()
    };
    config.training.dim = dim;
    config.training.subsample_t = t;
    let top = gold.most_frequent(&src_vocab, 500);
    let target = Target::Corpus {
        corpus: &tgt,
        vocab: tgt_vocab.clone(),
    };
    let mut log = |m: &str| eprintln!("{m}");
    let out = if seed == "gold" {
        let d = gold.to_dictionary(&src_vocab, &tgt_vocab);
        pipeline::run_with_seed(&src, src_vocab.clone(), target, d, &config, Some(&top), &mut log)?
    } else {
        config.seed_mode = seed.parse::<SeedMode>()?;
        pipeline::run(&src, src_vocab.clone(), target, &config, Some(&top), &mut log)?
    };
    println!("{}", serde_json::to_string_pretty(&out.report).unwrap());
    Ok(())
}
