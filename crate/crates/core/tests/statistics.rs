//! Distributional checks with fixed seeds.

use anchorvec::corpus::keep_probabilities;
use anchorvec::synth::{self, SynthSpec};
use anchorvec::{NoiseTable, Vocabulary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn noise_samples_follow_the_table() {
    let counts: Vec<u64> = (1..=60u64).map(|r| 60_000 / r).collect();
    let table = NoiseTable::from_counts(&counts, 0.75).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 300_000;
    let mut seen = vec![0u64; counts.len()];
    for _ in 0..draws {
        seen[table.sample(&mut rng) as usize] += 1;
    }
    let stat: f64 = seen
        .iter()
        .enumerate()
        .map(|(w, &o)| {
            let e = draws as f64 * table.probability(w as u32);
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    let p = 1.0 - dist.cdf(stat);
    assert!(p > 1e-3, "chi-square {stat:.1}, p = {p:.2e}");

    // the closed form, checked by hand for two words
    let z: f64 = counts.iter().map(|&c| (c as f64).powf(0.75)).sum();
    assert!((table.probability(0) - 60_000f64.powf(0.75) / z).abs() < 1e-12);
    assert!((table.probability(59) - 1_000f64.powf(0.75) / z).abs() < 1e-12);
}

#[test]
fn synthetic_frequencies_are_zipfian() {
    let spec = SynthSpec {
        vocab_size: 1000,
        sentences: 60_000,
        ..SynthSpec::default()
    };
    let data = synth::generate(&spec).unwrap();
    let vocab = Vocabulary::from_lines(data.target.lines(), 10_000).unwrap();
    let points: Vec<(f64, f64)> = vocab.counts()[..100]
        .iter()
        .enumerate()
        .map(|(r, &c)| (((r + 1) as f64).ln(), (c as f64).ln()))
        .collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((slope + 1.0).abs() <= 0.1, "log-log slope {slope:.3}");
}

#[test]
fn perturbation_swaps_the_requested_fraction() {
    let spec = SynthSpec {
        vocab_size: 500,
        sentences: 20_000,
        ..SynthSpec::default()
    };
    let text = synth::generate(&spec).unwrap().source;
    let out = synth::perturb_text(&text, 0.2, 9).unwrap();
    let (mut total, mut changed) = (0usize, 0usize);
    for (a, b) in text.lines().zip(out.lines()) {
        let (a, b): (Vec<&str>, Vec<&str>) = (a.split(' ').collect(), b.split(' ').collect());
        assert_eq!(a.len(), b.len());
        total += a.len();
        changed += a.iter().zip(&b).filter(|(x, y)| x != y).count();
    }
    let frac = changed as f64 / total as f64;
    assert!((frac - 0.2).abs() <= 0.01, "swapped {frac:.4}");
}

#[test]
fn subsampling_keeps_the_expected_share() {
    // one very frequent word among rare ones
    let mut lines = Vec::new();
    for i in 0..2_000 {
        lines.push(format!("the w{} the w{}", i % 500, (i + 7) % 500));
    }
    let vocab = Vocabulary::from_lines(&lines, 10_000).unwrap();
    let t = 1e-2;
    let keep = keep_probabilities(&vocab, t);
    let the = vocab.id("the").unwrap() as usize;
    let f = 0.5;
    let expected = ((t / f).sqrt() + t / f).min(1.0);
    assert!((keep[the] - expected).abs() < 1e-12);
    let rare = vocab.id("w3").unwrap() as usize;
    assert_eq!(keep[rare], 1.0);
}
