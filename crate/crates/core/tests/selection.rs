mod common;

use std::collections::HashSet;

use common::*;
use ndarray::Array2;
use polar::select::{
    projection_variance, projection_variances, select_orthogonal, select_random, select_variance,
};
use polar::{normalize_rows, DirectionMatrix, EmbeddingSet, SelectOptions};
use proptest::prelude::*;

fn fixture(n_words: usize, n_pairs: usize, d: usize, seed: u64) -> (EmbeddingSet, DirectionMatrix) {
    let e = normalize_rows(embeddings(gaussian(n_words, d, seed))).unwrap();
    let dm = direction(gaussian(n_pairs, d, seed ^ 0x5eed));
    (e, dm)
}

#[test]
fn orthogonal_matches_brute_force_on_small_pool() {
    for seed in 0..20 {
        let (e, dm) = fixture(60, 8, 5, seed);
        let got = select_orthogonal(&dm, &e, 4, SelectOptions::default()).unwrap();
        assert_eq!(got.chosen, greedy_oracle(&dm, &e, 4, false), "seed {seed}");
    }
}

#[test]
fn signed_overlap_matches_signed_oracle() {
    for seed in 0..10 {
        let (e, dm) = fixture(40, 10, 4, seed);
        let opts = SelectOptions { signed_overlap: true, ..Default::default() };
        let got = select_orthogonal(&dm, &e, 6, opts).unwrap();
        assert_eq!(got.chosen, greedy_oracle(&dm, &e, 6, true), "seed {seed}");
    }
}

#[test]
fn variance_matches_two_pass_oracle() {
    let (e, dm) = fixture(100, 12, 10, 3);
    let vars = projection_variances(&dm, &e, None).unwrap();
    for i in 0..dm.len() {
        let oracle = variance_oracle(&e, dm.row(i));
        assert!((vars[i] - oracle).abs() < 1e-10, "pair {i}");
        assert!((projection_variance(&dm, &e, i).unwrap() - oracle).abs() < 1e-10);
    }
}

#[test]
fn variance_selection_matches_sort_oracle() {
    let (e, dm) = fixture(80, 10, 6, 4);
    let order = variance_order_oracle(&dm, &e);
    for k in 1..=10 {
        let got = select_variance(&dm, &e, k, SelectOptions::default()).unwrap();
        assert_eq!(got.chosen, order[..k]);
    }
}

#[test]
fn vocab_cap_restricts_variance_to_leading_words() {
    let (e, dm) = fixture(50, 5, 4, 5);
    let head = e.truncated(20).unwrap();
    let capped = projection_variances(&dm, &e, Some(20)).unwrap();
    let full_head = projection_variances(&dm, &head, None).unwrap();
    for (a, b) in capped.iter().zip(&full_head) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn random_selection_is_seeded() {
    let dm = direction(gaussian(20, 3, 6));
    let a = select_random(&dm, 5, 99).unwrap();
    let b = select_random(&dm, 5, 99).unwrap();
    assert_eq!(a.chosen, b.chosen);
    let c = select_random(&dm, 5, 100).unwrap();
    assert_ne!(a.chosen, c.chosen);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn orthogonal_pick_is_optimal_at_every_step(n in 2usize..=20, d in 2usize..8, k in 1usize..=20, seed in any::<u64>()) {
        let k = k.min(n);
        let (e, dm) = fixture(30, n, d, seed);
        let got = select_orthogonal(&dm, &e, k, SelectOptions::default()).unwrap();
        let scores = got.scores.as_ref().unwrap();
        prop_assert_eq!(scores[0], 0.0);
        for i in 1..k {
            let pick = mean_overlap(&dm, &got.chosen[..i], got.chosen[i], false);
            prop_assert!((pick - scores[i]).abs() < 1e-12);
            for c in (0..n).filter(|c| !got.chosen[..=i].contains(c)) {
                let other = mean_overlap(&dm, &got.chosen[..i], c, false);
                prop_assert!(other >= pick - 1e-12, "step {} candidate {} beats pick", i, c);
            }
        }
    }

    #[test]
    fn selections_are_unique_and_rebuild_chosen_rows(n in 1usize..15, k in 1usize..15, seed in any::<u64>()) {
        let k = k.min(n);
        let (e, dm) = fixture(25, n, 4, seed);
        for r in [
            select_random(&dm, k, seed).unwrap(),
            select_variance(&dm, &e, k, SelectOptions::default()).unwrap(),
            select_orthogonal(&dm, &e, k, SelectOptions::default()).unwrap(),
        ] {
            prop_assert_eq!(r.chosen.len(), k);
            prop_assert_eq!(r.chosen.iter().collect::<HashSet<_>>().len(), k);
            prop_assert!(r.chosen.iter().all(|&i| i < n));
            let sub = dm.select(&r.chosen).unwrap();
            for (j, &i) in r.chosen.iter().enumerate() {
                prop_assert_eq!(sub.row(j), dm.row(i));
                prop_assert_eq!(&sub.pairs()[j], &dm.pairs()[i]);
            }
        }
    }

    #[test]
    fn variance_scores_are_non_increasing(n in 1usize..15, seed in any::<u64>()) {
        let (e, dm) = fixture(25, n, 5, seed);
        let r = select_variance(&dm, &e, n, SelectOptions::default()).unwrap();
        let s = r.scores.unwrap();
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn full_random_sample_is_a_permutation(n in 1usize..30, seed in any::<u64>()) {
        let dm = direction(gaussian(n, 2, seed));
        let mut chosen = select_random(&dm, n, seed).unwrap().chosen;
        chosen.sort_unstable();
        prop_assert_eq!(chosen, (0..n).collect::<Vec<_>>());
    }
}

/// Embeddings whose words are exactly the pair words of `dm`, with
/// `pos - neg` equal to each direction row.
fn e_with_pairs(dm: &DirectionMatrix) -> EmbeddingSet {
    let d = dm.source_dim();
    let mut vocab = Vec::new();
    let mut m = Array2::zeros((2 * dm.len(), d));
    for (i, p) in dm.pairs().iter().enumerate() {
        vocab.push(p.positive().to_string());
        vocab.push(p.negative().to_string());
        m.row_mut(2 * i).assign(&dm.row(i));
    }
    EmbeddingSet::new(vocab, m).unwrap()
}

#[test]
fn rebuilding_from_chosen_pairs_reproduces_rows() {
    let (e, dm) = fixture(30, 9, 4, 8);
    let source = e_with_pairs(&dm);
    let full = DirectionMatrix::build(&source, dm.pairs()).unwrap();
    let r = select_orthogonal(&full, &e, 5, SelectOptions::default()).unwrap();
    let chosen_pairs: Vec<_> = r.chosen.iter().map(|&i| full.pairs()[i].clone()).collect();
    let rebuilt = DirectionMatrix::build(&source, &chosen_pairs).unwrap();
    for (j, &i) in r.chosen.iter().enumerate() {
        assert_eq!(rebuilt.row(j), full.row(i));
    }
}
