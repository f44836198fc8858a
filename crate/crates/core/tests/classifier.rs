mod common;

use common::*;
use ndarray::{array, Array1, Array2};
use polar::downstream::{
    contributions, evaluate_classifier, explain_prediction, featurize, loss_and_gradient, train,
    Document, LabeledTextDataset, LinearClassifier, TrainConfig,
};
use polar::{EmbeddingSet, PolarEmbeddingSet, PolarPair};
use proptest::prelude::*;

fn doc(tokens: &[&str], label: usize) -> Document {
    Document {
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
        label,
    }
}

#[test]
fn gradient_matches_central_differences() {
    let x = gaussian(5, 4, 1);
    let labels = [0, 2, 1, 2, 0];
    let w = gaussian(3, 4, 2) * 0.5;
    let b = gaussian_vec(3, 3) * 0.1;
    let l2 = 1e-2;
    let (_, gw, gb) = loss_and_gradient(w.view(), b.view(), x.view(), &labels, l2);
    let h = 1e-5;
    let loss = |w: &Array2<f64>, b: &Array1<f64>| loss_and_gradient(w.view(), b.view(), x.view(), &labels, l2).0;
    let close = |analytic: f64, numeric: f64| {
        (analytic - numeric).abs() <= 1e-6 * analytic.abs().max(numeric.abs()).max(1e-3)
    };
    for i in 0..3 {
        for j in 0..4 {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[[i, j]] += h;
            wm[[i, j]] -= h;
            let numeric = (loss(&wp, &b) - loss(&wm, &b)) / (2.0 * h);
            assert!(close(gw[[i, j]], numeric), "w[{i},{j}]: {} vs {numeric}", gw[[i, j]]);
        }
        let (mut bp, mut bm) = (b.clone(), b.clone());
        bp[i] += h;
        bm[i] -= h;
        let numeric = (loss(&w, &bp) - loss(&w, &bm)) / (2.0 * h);
        assert!(close(gb[i], numeric), "b[{i}]: {} vs {numeric}", gb[i]);
    }
}

/// Three noisy word clusters; documents draw tokens from one cluster.
fn cluster_task(seed: u64) -> (EmbeddingSet, LabeledTextDataset) {
    let centers = gaussian(3, 6, seed) * 2.0;
    let noise = gaussian(60, 6, seed ^ 1);
    let mut m = Array2::zeros((60, 6));
    for i in 0..60 {
        m.row_mut(i).assign(&(&centers.row(i % 3) + &noise.row(i)));
    }
    let e = EmbeddingSet::new(words("t", 60), m).unwrap();
    let mut r = rng(seed ^ 2);
    let mut split = |n: usize| -> Vec<Document> {
        (0..n)
            .map(|i| {
                let label = i % 3;
                let tokens = (0..5)
                    .map(|_| format!("t{}", 3 * rand::Rng::random_range(&mut r, 0..20) + label))
                    .collect();
                Document { tokens, label }
            })
            .collect()
    };
    let ds = LabeledTextDataset {
        class_names: vec!["a".into(), "b".into(), "c".into()],
        train: split(30),
        validation: split(9),
        test: split(12),
    };
    (e, ds)
}

#[test]
fn loss_never_increases_with_a_small_step() {
    let (e, ds) = cluster_task(5);
    let cfg = TrainConfig { learning_rate: 0.01, epochs: 100, ..Default::default() };
    let out = train(&ds, &e, &cfg).unwrap();
    for w in out.history.windows(2) {
        assert!(w[1].loss <= w[0].loss, "epoch {}: {} > {}", w[1].epoch, w[1].loss, w[0].loss);
    }
}

#[test]
fn training_is_bit_reproducible() {
    let (e, ds) = cluster_task(6);
    let a = train(&ds, &e, &TrainConfig::default()).unwrap();
    let b = train(&ds, &e, &TrainConfig::default()).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.best_epoch, b.best_epoch);
    let bits = |m: &LinearClassifier| m.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.model), bits(&b.model));
}

#[test]
fn best_checkpoint_has_the_highest_validation_accuracy() {
    let (e, ds) = cluster_task(7);
    let out = train(&ds, &e, &TrainConfig::default()).unwrap();
    let best = out.history[out.best_epoch - 1].validation_accuracy.unwrap();
    for s in &out.history {
        assert!(s.validation_accuracy.unwrap() <= best);
        if s.epoch < out.best_epoch {
            assert!(s.validation_accuracy.unwrap() < best, "earliest best epoch is kept");
        }
    }
}

#[test]
fn confusion_matrix_matches_hand_count() {
    // One-hot words make each prediction readable off the weights.
    let e = EmbeddingSet::new(
        vec!["x".into(), "y".into(), "z".into()],
        Array2::eye(3),
    )
    .unwrap();
    // Scores: x -> class 0, y -> class 1, z -> class 2 (bias breaks nothing).
    let m = LinearClassifier::new(
        vec!["p".into(), "q".into(), "r".into()],
        Array2::eye(3),
        Array1::zeros(3),
        TrainConfig::default(),
    )
    .unwrap();
    let docs = vec![
        doc(&["x"], 0),
        doc(&["x", "x", "y"], 0),
        doc(&["y"], 0),
        doc(&["y"], 1),
        doc(&["y", "z", "z"], 1),
        doc(&["x"], 1),
        doc(&["z"], 2),
        doc(&["z", "y", "z"], 2),
        doc(&["nothing"], 2),
        doc(&["y"], 2),
    ];
    // predictions: 0 0 1 | 1 2 0 | 2 2 0(all-oov: ties to class 0) 1
    let expected = vec![vec![2, 1, 0], vec![1, 1, 1], vec![1, 1, 2]];
    let r = evaluate_classifier(&m, &docs, &e).unwrap();
    assert_eq!(r.confusion, expected);
    assert_eq!(r.n_documents, 10);
    assert_eq!(r.n_all_oov, 1);
    assert!((r.accuracy - 0.5).abs() < 1e-15);
    let hand = [(2.0 / 4.0, 2.0 / 3.0), (1.0 / 3.0, 1.0 / 3.0), (2.0 / 3.0, 2.0 / 4.0)];
    for (k, (p, rc)) in hand.iter().enumerate() {
        assert!((r.per_class[k].precision - p).abs() < 1e-15, "class {k}");
        assert!((r.per_class[k].recall - rc).abs() < 1e-15, "class {k}");
    }
    assert_eq!(r.per_class.iter().map(|c| c.support).collect::<Vec<_>>(), [3, 3, 4]);
}

#[test]
fn featurize_matches_elementwise_mean() {
    let e = EmbeddingSet::new(words("v", 8), gaussian(8, 5, 9)).unwrap();
    let tokens: Vec<String> = ["v1", "V2", "v3", "oov", "v1", "v7", "v0", "v5", "?", "v3", "v6", "V1"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let f = featurize(&tokens, &e);
    let mut sum = [0.0; 5];
    let mut n = 0;
    for t in &tokens {
        if let Some(v) = e.vector(&t.to_lowercase()) {
            for j in 0..5 {
                sum[j] += v[j];
            }
            n += 1;
        }
    }
    assert_eq!(f.n_in_vocab, n);
    for j in 0..5 {
        assert!((f.vector[j] - sum[j] / n as f64).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn featurize_ignores_token_order(idx in prop::collection::vec(0usize..12, 1..20), seed in any::<u64>()) {
        let e = EmbeddingSet::new(words("v", 10), gaussian(10, 4, seed)).unwrap();
        let tokens: Vec<String> = idx.iter().map(|i| format!("v{i}")).collect();
        let mut shuffled = tokens.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng(seed));
        prop_assert_eq!(featurize(&tokens, &e), featurize(&shuffled, &e));
    }
}

fn polar_fixture() -> (PolarEmbeddingSet, LinearClassifier) {
    let dims: Vec<PolarPair> = (0..7).map(|i| PolarPair::new(format!("p{i}"), format!("n{i}")).unwrap()).collect();
    let e = EmbeddingSet::new(words("w", 15), gaussian(15, 7, 41)).unwrap();
    let pe = PolarEmbeddingSet::new(e, dims).unwrap();
    let m = LinearClassifier::new(
        vec!["christian".into(), "atheist".into()],
        gaussian(2, 7, 42),
        array![0.3, -0.2],
        TrainConfig::default(),
    )
    .unwrap();
    (pe, m)
}

#[test]
fn contributions_reconstruct_the_logit() {
    let (pe, m) = polar_fixture();
    let tokens: Vec<String> = ["w1", "w4", "w4", "w9", "w13", "unknown"].iter().map(|s| s.to_string()).collect();
    let ex = contributions(&m, &tokens, &pe).unwrap();
    let logits = m.logits(featurize(&tokens, pe.embeddings()).vector.view()).unwrap();
    let total: f64 = ex.contributions.iter().map(|c| c.contribution).sum::<f64>() + ex.bias;
    assert_eq!(ex.contributions.len(), 7);
    assert!((total - ex.logit).abs() < 1e-10);
    assert!((ex.logit - logits[ex.predicted_index]).abs() < 1e-10);
    assert_eq!(ex.predicted_index, m.predict(featurize(&tokens, pe.embeddings()).vector.view()).unwrap());
    for c in &ex.contributions {
        assert!((c.contribution - c.weight * c.feature_value).abs() < 1e-15);
    }
    let top = explain_prediction(&m, &tokens, &pe, 3).unwrap();
    assert_eq!(top.contributions[..], ex.contributions[..3]);
    assert!(top.contributions.windows(2).all(|w| w[0].contribution.abs() >= w[1].contribution.abs()));
}

#[test]
fn explanation_rejects_mismatched_features() {
    let (pe, _) = polar_fixture();
    let m = LinearClassifier::new(vec!["a".into(), "b".into()], Array2::zeros((2, 3)), Array1::zeros(2), TrainConfig::default()).unwrap();
    assert!(contributions(&m, &["w1".to_string()], &pe).is_err());
}
