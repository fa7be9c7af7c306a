use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anchorvec::embeddings::init_random;
use anchorvec::pipeline::{self, Mode, PipelineConfig, Target};
use anchorvec::retrieval::{CslsIndex, UnitRows};
use anchorvec::synth::{self, SynthSpec};
use anchorvec::trainer::{train, train_monolingual, Context};
use anchorvec::{
    AnchoredResolver, Corpus, CslsParams, Dictionary, EmbeddingMatrix, EmbeddingPair, Monolingual, Provenance, Role,
    TrainingConfig, Vocabulary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus(text: &str) -> (Arc<Vocabulary>, Corpus) {
    let vocab = Arc::new(Vocabulary::from_lines(text.lines(), 100_000).unwrap());
    let corpus = Corpus::from_lines(text.lines(), &vocab);
    (vocab, corpus)
}

fn small() -> (synth::SynthCorpus, TrainingConfig) {
    let spec = SynthSpec {
        vocab_size: 200,
        sentences: 6_000,
        seed: 4,
        ..SynthSpec::default()
    };
    let config = TrainingConfig {
        dim: 24,
        subsample_t: 1e-3,
        epochs: 4.0,
        negatives: 5,
        ..TrainingConfig::default()
    };
    (synth::generate(&spec).unwrap(), config)
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
    let n = |v: &[f32]| v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    dot / (n(a) * n(b))
}

#[test]
fn empty_dictionary_reduces_to_monolingual_training() {
    let (data, config) = small();
    let (vocab, src) = corpus(&data.source);
    let (tgt_vocab, _) = corpus(&data.target);
    let anchors = Arc::new(EmbeddingMatrix::zeros(tgt_vocab, config.dim, Role::Output));
    let resolver = AnchoredResolver::new(&Dictionary::empty(Provenance::External), vocab.len(), anchors).unwrap();

    let mut plain = init_random(vocab.clone(), config.dim, 9);
    let mut anchored = plain.clone();
    train(&src, &vocab, &mut plain, &Monolingual, &config, u64::MAX, |_| {}).unwrap();
    train(&src, &vocab, &mut anchored, &resolver, &config, u64::MAX, |_| {}).unwrap();
    assert_eq!(plain.input.as_slice(), anchored.input.as_slice());
    assert_eq!(plain.output.as_slice(), anchored.output.as_slice());
}

#[test]
fn dictionary_swaps_are_atomic_for_readers() {
    let n = 5_000u32;
    let anchors = Arc::new(EmbeddingMatrix::zeros(
        Arc::new(Vocabulary::from_words((0..n).map(|i| format!("t{i}")).collect()).unwrap()),
        2,
        Role::Output,
    ));
    // even generation: every word anchored to itself; odd: every word free
    let full = Dictionary::from_pairs((0..n).map(|i| (i, i)), Provenance::Induced);
    let none = Dictionary::empty(Provenance::Induced);
    let resolver = Arc::new(AnchoredResolver::new(&full, n as usize, anchors).unwrap());
    let stop = Arc::new(AtomicBool::new(false));

    let readers: Vec<_> = (0..3)
        .map(|r| {
            let resolver = resolver.clone();
            let stop = stop.clone();
            std::thread::spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(r);
                let mut checked = 0u64;
                while !stop.load(Ordering::Relaxed) {
                    let snap = resolver.snapshot();
                    let first = snap.target(0).is_some();
                    for _ in 0..64 {
                        let w = rng.gen_range(0..n);
                        assert_eq!(snap.target(w).is_some(), first, "mixed snapshot");
                    }
                    assert_eq!(snap.len(), if first { n as usize } else { 0 });
                    checked += 1;
                }
                checked
            })
        })
        .collect();
    for i in 0..2_000 {
        resolver.replace_dictionary(if i % 2 == 0 { &none } else { &full }).unwrap();
    }
    stop.store(true, Ordering::Relaxed);
    for r in readers {
        assert!(r.join().unwrap() > 0);
    }
    assert_eq!(resolver.resolve(7), Context::Frozen(7));
}

#[test]
fn anchoring_pulls_translations_together() {
    let (data, config) = small();
    let (src_vocab, src) = corpus(&data.source);
    let (tgt_vocab, tgt) = corpus(&data.target);
    let target = train_monolingual(&tgt, tgt_vocab.clone(), &config, u64::MAX, |_| {}).unwrap();
    let gold = data.gold_dictionary().to_dictionary(&src_vocab, &tgt_vocab);
    let resolver = AnchoredResolver::new(&gold, src_vocab.len(), Arc::new(target.output.clone())).unwrap();
    let mut source = init_random(src_vocab.clone(), config.dim, 2);
    train(&src, &src_vocab, &mut source, &resolver, &config, u64::MAX, |_| {}).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut matched, mut random) = (0.0, 0.0);
    for (s, t) in gold.iter() {
        let x = source.input.row(s as usize);
        matched += cosine(x, target.input.row(t as usize));
        random += cosine(x, target.input.row(rng.gen_range(0..tgt_vocab.len())));
    }
    let n = gold.len() as f64;
    let (matched, random) = (matched / n, random / n);
    assert!(matched - random > 0.3, "translations {matched:.3} vs random pairs {random:.3}");
}

#[test]
fn one_run_without_reinduction_is_the_basic_mode() {
    let (data, config) = small();
    let (src_vocab, src) = corpus(&data.source);
    let (tgt_vocab, tgt) = corpus(&data.target);
    let target = train_monolingual(&tgt, tgt_vocab, &config, u64::MAX, |_| {}).unwrap();
    let run = |mode: Mode, restarts: usize, reinductions: usize| {
        let cfg = PipelineConfig {
            mode,
            restarts,
            reinductions,
            training: config.clone(),
            ..PipelineConfig::default()
        };
        pipeline::run(&src, src_vocab.clone(), Target::Pretrained(target.clone()), &cfg, None, &mut |_| {}).unwrap()
    };
    let basic = run(Mode::Basic, 3, 50);
    let full = run(Mode::Full, 1, 0);
    assert_eq!(basic.source, full.source);
    assert_eq!(basic.dictionary.iter().collect::<Vec<_>>(), full.dictionary.iter().collect::<Vec<_>>());
    assert_eq!(basic.report.reinductions.len(), 0);
}

#[test]
fn csls_reduces_hubness() {
    // Targets are noisy copies of the sources; a few extra targets sit near
    // the centroid and are close to everything.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, hubs, dim) = (300usize, 5usize, 20usize);
    let mut gauss = |scale: f32| -> f32 { ((0..12).map(|_| rng.gen::<f32>()).sum::<f32>() - 6.0) * scale };
    let centre: Vec<f32> = (0..dim).map(|_| gauss(1.0)).collect();
    let src: Vec<f32> = (0..n).flat_map(|_| centre.iter().map(|c| c + gauss(1.0)).collect::<Vec<_>>()).collect();
    let mut tgt: Vec<f32> = src.iter().map(|x| x + gauss(0.9)).collect();
    for _ in 0..hubs {
        tgt.extend(centre.iter().map(|c| c + gauss(0.2)));
    }
    let mat = |p: &str, rows: usize, data: Vec<f32>| {
        let v = Arc::new(Vocabulary::from_words((0..rows).map(|i| format!("{p}{i}")).collect()).unwrap());
        EmbeddingMatrix::from_data(v, dim, data, Role::Input).unwrap()
    };
    let (s, t) = (mat("s", n, src), mat("t", n + hubs, tgt));
    let index = CslsIndex::build(
        UnitRows::normalize(&s).unwrap(),
        UnitRows::normalize(&t).unwrap(),
        &CslsParams::default(),
    )
    .unwrap();

    let stats = |pick: &dyn Fn(usize) -> usize| {
        let mut in_degree = vec![0usize; n + hubs];
        let mut correct = 0;
        for i in 0..n {
            let j = pick(i);
            in_degree[j] += 1;
            correct += usize::from(j == i);
        }
        (in_degree.into_iter().max().unwrap(), correct)
    };
    let (cos_hub, cos_ok) = stats(&|i| index.forward_neighbor(i) as usize);
    let (csls_hub, csls_ok) = stats(&|i| index.argmax(i) as usize);
    assert!(csls_hub < cos_hub, "largest in-degree: csls {csls_hub}, cosine {cos_hub}");
    assert!(csls_ok > cos_ok, "correct: csls {csls_ok}, cosine {cos_ok}");
}

#[test]
fn target_pair_is_returned_untouched() {
    let (data, config) = small();
    let (src_vocab, src) = corpus(&data.source);
    let (tgt_vocab, tgt) = corpus(&data.target);
    let target: EmbeddingPair = train_monolingual(&tgt, tgt_vocab, &config, u64::MAX, |_| {}).unwrap();
    let cfg = PipelineConfig {
        restarts: 2,
        reinductions: 3,
        training: TrainingConfig { threads: 3, ..config },
        ..PipelineConfig::default()
    };
    let out = pipeline::run(&src, src_vocab, Target::Pretrained(target.clone()), &cfg, None, &mut |_| {}).unwrap();
    assert_eq!(out.target, target);
    assert_eq!(out.report.target_output_checksum, target.output.checksum());
}
