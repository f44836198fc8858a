mod common;

use common::*;
use ndarray::Array2;
use polar::eval::{
    evaluate_analogy, evaluate_discriminative, evaluate_similarity, spearman_rho, top_k_dimensions,
    AnalogyDataset, AnalogyOptions, AnalogyRecord, DiscriminativeDataset, DiscriminativeRecord,
    SimilarityDataset, SimilarityRecord,
};
use polar::{EmbeddingSet, PolarEmbeddingSet, PolarPair};
use proptest::prelude::*;

fn tied_scores() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..50).prop_flat_map(|n| {
        (
            prop::collection::vec((0i32..8).prop_map(f64::from), n),
            prop::collection::vec(-1000.0f64..1000.0, n),
        )
    })
}

fn non_constant(v: &[f64]) -> bool {
    v.iter().any(|&x| x != v[0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn spearman_matches_oracle_with_ties((xs, ys) in tied_scores()) {
        prop_assume!(non_constant(&xs) && non_constant(&ys));
        let got = spearman_rho(&xs, &ys).unwrap();
        prop_assert!((got - spearman_oracle(&xs, &ys)).abs() < 1e-12);
    }

    #[test]
    fn spearman_is_symmetric((xs, ys) in tied_scores()) {
        prop_assume!(non_constant(&xs) && non_constant(&ys));
        let a = spearman_rho(&xs, &ys).unwrap();
        let b = spearman_rho(&ys, &xs).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn spearman_ignores_monotone_transforms((xs, ys) in tied_scores()) {
        prop_assume!(non_constant(&xs) && non_constant(&ys));
        let warped: Vec<f64> = ys.iter().map(|y| y * y * y + 5.0 * y).collect();
        let a = spearman_rho(&xs, &ys).unwrap();
        let b = spearman_rho(&xs, &warped).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }
}

fn analogy_fixture(seed: u64) -> (EmbeddingSet, AnalogyDataset) {
    let e = embeddings(gaussian(40, 6, seed));
    let mut r = rng(seed ^ 7);
    let records = (0..50)
        .map(|_| {
            let pick = rand::seq::index::sample(&mut r, 40, 4);
            AnalogyRecord {
                a: format!("w{}", pick.index(0)),
                b: format!("w{}", pick.index(1)),
                a2: format!("w{}", pick.index(2)),
                expected: format!("w{}", pick.index(3)),
                category: "capital-world".into(),
            }
        })
        .collect();
    (e, AnalogyDataset { records })
}

#[test]
fn analogy_matches_full_scan_oracle() {
    for seed in 0..5 {
        let (e, ds) = analogy_fixture(seed);
        let report = evaluate_analogy(&e, &ds, AnalogyOptions::default()).unwrap();
        let mut correct = 0;
        for (r, p) in ds.records.iter().zip(&report.predictions) {
            let idx = |w: &str| e.lookup(w).unwrap();
            let expected = analogy_oracle(&e, idx(&r.a), idx(&r.b), idx(&r.a2));
            assert_eq!(*p, Some(expected));
            correct += usize::from(e.vocab()[expected] == r.expected);
        }
        assert_eq!(report.correct, correct);
        assert_eq!(report.n_used + report.n_skipped, ds.records.len());
    }
}

#[test]
fn analogy_is_invariant_to_row_scaling() {
    let (e, ds) = analogy_fixture(11);
    let mut r = rng(12);
    let scales: Vec<f64> = (0..e.len()).map(|_| rand::Rng::random_range(&mut r, 0.1..10.0)).collect();
    let mut m = e.matrix().to_owned();
    for (mut row, s) in m.rows_mut().into_iter().zip(&scales) {
        row *= *s;
    }
    let scaled = EmbeddingSet::new(e.vocab().to_vec(), m).unwrap();
    let a = evaluate_analogy(&e, &ds, AnalogyOptions::default()).unwrap();
    let b = evaluate_analogy(&scaled, &ds, AnalogyOptions::default()).unwrap();
    assert_eq!(a.predictions, b.predictions);
}

#[test]
fn analogy_counts_out_of_vocabulary_records_as_skipped() {
    let (e, mut ds) = analogy_fixture(13);
    ds.records[3].b = "missing".into();
    ds.records[7].expected = "missing".into();
    let report = evaluate_analogy(&e, &ds, AnalogyOptions::default()).unwrap();
    assert_eq!(report.n_skipped, 2);
    assert_eq!(report.n_used + report.n_skipped, ds.records.len());
    assert_eq!(report.predictions[3], None);
}

#[test]
fn discriminative_matches_per_triple_oracle() {
    let e = embeddings(gaussian(30, 5, 21));
    let mut r = rng(22);
    let records: Vec<DiscriminativeRecord> = (0..60)
        .map(|i| {
            let pick = rand::seq::index::sample(&mut r, 30, 3);
            DiscriminativeRecord {
                concept1: format!("w{}", pick.index(0)),
                concept2: format!("w{}", pick.index(1)),
                attribute: if i % 13 == 0 { "oov".into() } else { format!("w{}", pick.index(2)) },
                label: i % 3 != 0,
            }
        })
        .collect();
    let ds = DiscriminativeDataset { records: records.clone() };
    let report = evaluate_discriminative(&e, &ds).unwrap();

    let (mut used, mut correct) = (0, 0);
    for rec in &records {
        let (Some(c1), Some(c2), Some(at)) =
            (e.vector(&rec.concept1), e.vector(&rec.concept2), e.vector(&rec.attribute))
        else {
            continue;
        };
        used += 1;
        let predicted = cosine(c1, at) > cosine(c2, at);
        correct += usize::from(predicted == rec.label);
    }
    assert_eq!(report.n_used, used);
    assert_eq!(report.n_used + report.n_skipped, records.len());
    assert!((report.accuracy - correct as f64 / used as f64).abs() < 1e-15);
}

#[test]
fn similarity_counts_and_matches_oracle() {
    let e = embeddings(gaussian(20, 4, 31));
    let mut r = rng(32);
    let records: Vec<SimilarityRecord> = (0..25)
        .map(|i| {
            let pick = rand::seq::index::sample(&mut r, 20, 2);
            SimilarityRecord {
                word1: format!("w{}", pick.index(0)),
                word2: if i % 6 == 0 { "absent".into() } else { format!("w{}", pick.index(1)) },
                score: f64::from(i % 7),
            }
        })
        .collect();
    let ds = SimilarityDataset::new(records.clone()).unwrap();
    let report = evaluate_similarity(&e, &ds).unwrap();
    let kept: Vec<&SimilarityRecord> = records.iter().filter(|r| r.word2 != "absent").collect();
    let human: Vec<f64> = kept.iter().map(|r| r.score).collect();
    let model: Vec<f64> = kept
        .iter()
        .map(|r| cosine(e.vector(&r.word1).unwrap(), e.vector(&r.word2).unwrap()))
        .collect();
    assert_eq!(report.n_used, kept.len());
    assert_eq!(report.n_used + report.n_skipped, records.len());
    assert!((report.rho - spearman_oracle(&human, &model)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn top_k_matches_sort_oracle(values in prop::collection::vec(-3i32..4, 1..30), k in 1usize..30) {
        // Small integers force ties in |value|.
        let n = values.len();
        let k = k.min(n);
        let row: Vec<f64> = values.iter().map(|&v| f64::from(v) * 0.25).collect();
        let dims: Vec<PolarPair> = (0..n).map(|i| PolarPair::new(format!("p{i}"), format!("n{i}")).unwrap()).collect();
        let m = Array2::from_shape_vec((1, n), row.clone()).unwrap();
        let pe = PolarEmbeddingSet::new(EmbeddingSet::new(vec!["x".into()], m).unwrap(), dims).unwrap();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| row[b].abs().partial_cmp(&row[a].abs()).unwrap().then(a.cmp(&b)));
        let got = top_k_dimensions(&pe, "x", k).unwrap();
        prop_assert_eq!(got.iter().map(|d| d.index).collect::<Vec<_>>(), order[..k].to_vec());
        for d in &got {
            prop_assert_eq!(d.value, row[d.index]);
            prop_assert_eq!(&d.pair, &pe.dims()[d.index]);
        }
    }
}
