use std::sync::Arc;

use anchorvec::corpus::{keep_probabilities, subsample_keep_prob};
use anchorvec::dictionary::{seed_identical, seed_numerals};
use anchorvec::eval::{bli_eval, GoldDictionary};
use anchorvec::pipeline::reinduction_schedule;
use anchorvec::retrieval::{cyclic_filter, induce, CslsIndex, UnitRows};
use anchorvec::sgns::{sgns_gradients, sgns_loss, sgns_update, OutputRows, Scratch};
use anchorvec::trainer::source_epochs;
use anchorvec::{CslsParams, Dictionary, EmbeddingMatrix, NoiseTable, Provenance, Role, Vocabulary};
use proptest::collection::vec;
use proptest::prelude::*;

fn vocab(prefix: &str, n: usize) -> Arc<Vocabulary> {
    Arc::new(Vocabulary::from_words((0..n).map(|i| format!("{prefix}{i}")).collect()).unwrap())
}

fn matrix(prefix: &str, rows: usize, dim: usize, data: Vec<f32>) -> EmbeddingMatrix {
    EmbeddingMatrix::from_data(vocab(prefix, rows), dim, data, Role::Input).unwrap()
}

/// Two matrices with a shared dimension and rows bounded away from zero.
fn matrix_pair(max_rows: usize, max_dim: usize) -> impl Strategy<Value = (EmbeddingMatrix, EmbeddingMatrix)> {
    (3..=max_rows, 3..=max_rows, 1..=max_dim).prop_flat_map(|(ns, nt, d)| {
        let entry = prop_oneof![-1.0f32..-0.05, 0.05f32..1.0];
        (vec(entry.clone(), ns * d), vec(entry, nt * d))
            .prop_map(move |(a, b)| (matrix("s", ns, d, a), matrix("t", nt, d, b)))
    })
}

fn central_difference(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    (0..at.len())
        .map(|i| {
            let mut p = at.to_vec();
            p[i] += h;
            let up = f(&p);
            p[i] = at[i] - h;
            (up - f(&p)) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-300)
}

struct Rows(Vec<Vec<f64>>, Vec<bool>);

impl OutputRows<f64> for Rows {
    type Slot = usize;

    fn row(&self, slot: usize) -> &[f64] {
        &self.0[slot]
    }

    fn row_mut(&mut self, slot: usize) -> Option<&mut [f64]> {
        (!self.1[slot]).then(|| self.0[slot].as_mut_slice())
    }
}

proptest! {
    #[test]
    fn small_step_does_not_decrease_the_objective(
        (x, rows, frozen) in (1usize..=8, 2usize..=4).prop_flat_map(|(d, n)| (
            vec(-2.0f64..2.0, d),
            vec(vec(-2.0f64..2.0, d), n),
            vec(any::<bool>(), n),
        ))
    ) {
        let mut center = x.clone();
        let mut outputs = Rows(rows.clone(), frozen);
        let targets: Vec<(usize, bool)> = (0..rows.len()).map(|i| (i, i == 0)).collect();
        let objective = |c: &[f64], r: &[Vec<f64>]| {
            let negs: Vec<&[f64]> = r[1..].iter().map(Vec::as_slice).collect();
            sgns_loss(c, &r[0], &negs)
        };
        let before = sgns_update(&mut center, &targets, &mut outputs, 1e-4, &mut Scratch::default());
        prop_assert!((before - objective(&x, &rows)).abs() < 1e-12);
        let after = objective(&center, &outputs.0);
        prop_assert!(after >= before - 1e-12, "{before} -> {after}");
        for (i, r) in outputs.0.iter().enumerate() {
            if outputs.1[i] {
                prop_assert_eq!(r, &rows[i]);
            }
        }
    }

    #[test]
    // Entries in [-1, 1] keep |dot| <= 8; far out in the saturated tail the
    // gradient drops below what a difference quotient can resolve.
    fn sgns_gradient_matches_finite_differences(
        (x, c, negs) in (1usize..=8, 1usize..=3).prop_flat_map(|(d, k)| (
            vec(-1.0f64..1.0, d),
            vec(-1.0f64..1.0, d),
            vec(vec(-1.0f64..1.0, d), k),
        ))
    ) {
        let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        let g = sgns_gradients(&x, &c, &refs);
        let h = 1e-5;

        let fd = central_difference(|p| sgns_loss(p, &c, &refs), &x, h);
        prop_assert!(rel_err(&g.center, &fd) < 1e-6);
        let fd = central_difference(|p| sgns_loss(&x, p, &refs), &c, h);
        prop_assert!(rel_err(&g.context, &fd) < 1e-6);
        for (n, grad) in g.negatives.iter().enumerate() {
            let fd = central_difference(
                |p| {
                    let mut r = refs.clone();
                    r[n] = p;
                    sgns_loss(&x, &c, &r)
                },
                &negs[n],
                h,
            );
            prop_assert!(rel_err(grad, &fd) < 1e-6);
        }
    }

    #[test]
    fn loss_is_never_positive(
        (x, c, negs) in (1usize..=16, 0usize..=5).prop_flat_map(|(d, k)| (
            vec(-10.0f64..10.0, d),
            vec(-10.0f64..10.0, d),
            vec(vec(-10.0f64..10.0, d), k),
        ))
    ) {
        let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        let l = sgns_loss(&x, &c, &refs);
        prop_assert!(l <= 0.0 && l.is_finite());
    }

    #[test]
    fn induce_is_scale_invariant((src, tgt) in matrix_pair(40, 6), scales in vec(0.01f32..100.0, 80), k in 1usize..=3) {
        let params = CslsParams { neighborhood_k: k, ..CslsParams::default() };
        let base = induce(&src, &tgt, &params).unwrap();
        let mut scaled = src.clone();
        for i in 0..scaled.len() {
            let f = scales[i % scales.len()];
            scaled.row_mut(i).iter_mut().for_each(|a| *a *= f);
        }
        prop_assert_eq!(base, induce(&scaled, &tgt, &params).unwrap());
    }

    #[test]
    fn induced_entries_are_cycle_consistent((src, tgt) in matrix_pair(40, 6)) {
        let params = CslsParams { neighborhood_k: 3, ..CslsParams::default() };
        let induced = induce(&src, &tgt, &params).unwrap();
        let everything = Dictionary::from_pairs((0..src.len() as u32).map(|i| (i, 0)), Provenance::External);
        let kept = cyclic_filter(&src, &tgt, &everything, &params).unwrap();
        let induced_sources: Vec<u32> = induced.iter().map(|(s, _)| s).collect();
        let kept_sources: Vec<u32> = kept.iter().map(|(s, _)| s).collect();
        prop_assert_eq!(induced_sources, kept_sources);
        // distinct sources can only survive through distinct targets
        let mut fwd: Vec<u32> = Vec::new();
        let index = CslsIndex::build(UnitRows::normalize(&src).unwrap(), UnitRows::normalize(&tgt).unwrap(), &params).unwrap();
        for (s, _) in induced.iter() {
            fwd.push(index.forward_neighbor(s as usize));
        }
        let n = fwd.len();
        fwd.sort_unstable();
        fwd.dedup();
        prop_assert_eq!(fwd.len(), n);
    }

    #[test]
    fn csls_score_is_bounded((src, tgt) in matrix_pair(30, 5), k in 1usize..=3) {
        let params = CslsParams { neighborhood_k: k, ..CslsParams::default() };
        let index = CslsIndex::build(UnitRows::normalize(&src).unwrap(), UnitRows::normalize(&tgt).unwrap(), &params).unwrap();
        for i in 0..index.source_rows() {
            let scores = index.scores(i);
            prop_assert!(scores.iter().all(|s| (-4.0 - 1e-9..=4.0 + 1e-9).contains(s)));
            let best = index.argmax(i) as usize;
            prop_assert!(scores.iter().all(|&s| s <= scores[best]));
            prop_assert!(scores[..best].iter().all(|&s| s < scores[best]));
        }
    }

    #[test]
    fn bli_ignores_row_scaling((src, tgt) in matrix_pair(30, 6), scales in vec(0.01f32..100.0, 60)) {
        let gold = GoldDictionary::from_pairs(
            (0..src.len().min(tgt.len())).map(|i| (format!("s{i}"), format!("t{i}"))),
        );
        let params = CslsParams { neighborhood_k: 2, ..CslsParams::default() };
        let base = bli_eval(&src, &tgt, &gold, &params).unwrap();
        let mut t2 = tgt.clone();
        for i in 0..t2.len() {
            let f = scales[i % scales.len()];
            t2.row_mut(i).iter_mut().for_each(|a| *a *= f);
        }
        prop_assert_eq!(base, bli_eval(&src, &t2, &gold, &params).unwrap());
    }

    #[test]
    fn numeral_seed_is_within_identical_seed(
        src in proptest::collection::btree_set("[0-9a-c]{1,3}", 1..40),
        tgt in proptest::collection::btree_set("[0-9a-c]{1,3}", 1..40),
    ) {
        let sv = Vocabulary::from_words(src.into_iter().collect()).unwrap();
        let tv = Vocabulary::from_words(tgt.into_iter().collect()).unwrap();
        let ident = seed_identical(&sv, &tv);
        let nums = seed_numerals(&sv, &tv);
        for (s, t) in nums.iter() {
            prop_assert_eq!(ident.get(s), Some(t));
            prop_assert!(sv.word(s).bytes().all(|b| b.is_ascii_digit()));
        }
        for (s, t) in ident.iter() {
            prop_assert_eq!(sv.word(s), tv.word(t));
        }
    }

    #[test]
    fn noise_distribution_sums_to_one(counts in vec(1u64..10_000, 1..200), alpha in 0.0f64..1.5) {
        let table = NoiseTable::from_counts(&counts, alpha).unwrap();
        let total: f64 = (0..counts.len() as u32).map(|w| table.probability(w)).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        // a more frequent word is never less likely
        for a in 0..counts.len() {
            for b in 0..counts.len() {
                if counts[a] > counts[b] {
                    prop_assert!(table.probability(a as u32) >= table.probability(b as u32));
                }
            }
        }
    }

    #[test]
    fn keep_probability_is_monotone(count in 1u64..1_000_000, extra in 1u64..1_000_000, t in 1e-6f64..1e-2) {
        let total = 10_000_000;
        let p = subsample_keep_prob(count, total, t);
        let q = subsample_keep_prob(count + extra, total, t);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(q <= p);
    }

    #[test]
    fn keep_probabilities_cover_the_vocabulary(lines in vec("[a-e]( [a-e]){0,6}", 1..30)) {
        let v = Vocabulary::from_lines(&lines, 100).unwrap();
        let keep = keep_probabilities(&v, 1e-3);
        prop_assert_eq!(keep.len(), v.len());
        prop_assert!(keep.iter().all(|p| *p > 0.0 && *p <= 1.0));
    }

    #[test]
    fn schedule_is_evenly_spaced(total in 1u64..10_000_000, k in 1usize..200) {
        let points = reinduction_schedule(total, k).unwrap();
        prop_assert_eq!(points.len(), k);
        let step = total / k as u64;
        for (i, p) in points.iter().enumerate() {
            prop_assert_eq!(*p, (i as u64 + 1) * step);
            prop_assert!(*p <= total);
        }
    }

    #[test]
    fn equal_corpora_keep_the_epoch_count(n in 1u64..1_000_000_000, epochs in 0.1f64..50.0) {
        prop_assert!((source_epochs(n, n, epochs).unwrap() - epochs).abs() < 1e-9);
    }

    #[test]
    fn text_format_round_trips(rows in 1usize..20, dim in 1usize..8, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * dim).map(|_| rng.gen::<f32>() * 10f32.powi(rng.gen_range(-30..30))).collect();
        let m = matrix("w", rows, dim, data);
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = EmbeddingMatrix::read_text(buf.as_slice()).unwrap();
        prop_assert_eq!(back.as_slice(), m.as_slice());
        prop_assert_eq!(back.vocab().words(), m.vocab().words());
    }
}
