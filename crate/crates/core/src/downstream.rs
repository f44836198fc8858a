//! Document classification on averaged word vectors.
//!
//! Documents become the mean of their in-vocabulary token vectors, and a
//! multinomial logistic regression is fit by full-batch gradient descent on
//! L2-penalized cross-entropy. Because the model is linear, a prediction on
//! polar features decomposes exactly into per-dimension contributions.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{PolarError, Result};
use crate::polar::{PolarEmbeddingSet, PolarPair};

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}' | '\u{00ab}' | '\u{00bb}'
                | '\u{2026}' | '\u{2013}' | '\u{2014}' | '\u{00bf}' | '\u{00a1}'
        )
}

/// Splits on Unicode whitespace and strips leading/trailing punctuation.
/// Case is kept; [`resolve_token`] folds it at lookup time.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(is_punctuation))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Lowercased lookup first, then the token as written.
pub fn resolve_token(e: &EmbeddingSet, token: &str) -> Option<usize> {
    e.lookup(&token.to_lowercase()).or_else(|| e.lookup(token))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub vector: Array1<f64>,
    pub n_in_vocab: usize,
}

impl Features {
    /// Set when no token was in vocabulary; the vector is then all zeros.
    pub fn all_oov(&self) -> bool {
        self.n_in_vocab == 0
    }
}

/// Mean of the in-vocabulary token vectors. Rows are summed in vocabulary
/// order, so the result does not depend on token order at all.
pub fn featurize<S: AsRef<str>>(tokens: &[S], e: &EmbeddingSet) -> Features {
    let mut rows: Vec<usize> = tokens
        .iter()
        .filter_map(|t| resolve_token(e, t.as_ref()))
        .collect();
    rows.sort_unstable();
    let mut vector = Array1::<f64>::zeros(e.dim());
    for &r in &rows {
        vector += &e.row(r);
    }
    if !rows.is_empty() {
        vector /= rows.len() as f64;
    }
    Features {
        vector,
        n_in_vocab: rows.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub tokens: Vec<String>,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTextDataset {
    pub class_names: Vec<String>,
    pub train: Vec<Document>,
    pub validation: Vec<Document>,
    pub test: Vec<Document>,
}

fn read_split<R: BufRead>(
    reader: R,
    name: &str,
    classes: &mut Vec<String>,
    class_ids: &mut HashMap<String, usize>,
    may_add: bool,
) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let bad = |message: String| PolarError::Format(format!("{name} line {}: {message}", i + 1));
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected label<TAB>text".into()))?;
        let id = match class_ids.get(label) {
            Some(&id) => id,
            None if may_add => {
                classes.push(label.to_owned());
                class_ids.insert(label.to_owned(), classes.len() - 1);
                classes.len() - 1
            }
            None => return Err(bad(format!("label {label:?} does not occur in train.tsv"))),
        };
        docs.push(Document {
            tokens: tokenize(text),
            label: id,
        });
    }
    Ok(docs)
}

impl LabeledTextDataset {
    pub fn from_readers<R: BufRead>(train: R, validation: Option<R>, test: Option<R>) -> Result<Self> {
        let mut classes = Vec::new();
        let mut ids = HashMap::new();
        let train = read_split(train, "train.tsv", &mut classes, &mut ids, true)?;
        if train.is_empty() {
            return Err(PolarError::InsufficientData("empty training split".into()));
        }
        let validation = match validation {
            Some(r) => read_split(r, "valid.tsv", &mut classes, &mut ids, false)?,
            None => Vec::new(),
        };
        let test = match test {
            Some(r) => read_split(r, "test.tsv", &mut classes, &mut ids, false)?,
            None => Vec::new(),
        };
        Ok(LabeledTextDataset {
            class_names: classes,
            train,
            validation,
            test,
        })
    }

    /// Reads `train.tsv`, and `valid.tsv` / `test.tsv` when present.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let open = |name: &str, required: bool| -> Result<Option<BufReader<File>>> {
            let path = dir.join(name);
            match File::open(&path) {
                Ok(f) => Ok(Some(BufReader::new(f))),
                Err(e) if !required && e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(PolarError::io(path, e)),
            }
        };
        let train = open("train.tsv", true)?.expect("required");
        Self::from_readers(train, open("valid.tsv", false)?, open("test.tsv", false)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Multiplied into the learning rate after every epoch.
    pub decay: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            decay: 0.99,
            epochs: 200,
            l2: 1e-4,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearClassifier {
    class_names: Vec<String>,
    weights: Array2<f64>,
    bias: Array1<f64>,
    config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    class_names: Vec<String>,
    feature_dim: usize,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    config: TrainConfig,
}

impl LinearClassifier {
    pub fn new(
        class_names: Vec<String>,
        weights: Array2<f64>,
        bias: Array1<f64>,
        config: TrainConfig,
    ) -> Result<Self> {
        if weights.nrows() != class_names.len() || bias.len() != class_names.len() {
            return Err(PolarError::DimensionMismatch {
                expected: class_names.len(),
                found: weights.nrows(),
            });
        }
        if weights.iter().chain(bias.iter()).any(|x| !x.is_finite()) {
            return Err(PolarError::Numeric("non-finite model parameter".into()));
        }
        Ok(LinearClassifier {
            class_names,
            weights,
            bias,
            config,
        })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn bias(&self) -> ArrayView1<'_, f64> {
        self.bias.view()
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.feature_dim() {
            return Err(PolarError::DimensionMismatch {
                expected: self.feature_dim(),
                found,
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(x.len())?;
        Ok(self.weights.dot(&x) + &self.bias)
    }

    /// Argmax class, ties to the lower class id.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        Ok(argmax(self.logits(x)?.view()))
    }

    fn model_file(&self) -> ModelFile {
        ModelFile {
            class_names: self.class_names.clone(),
            feature_dim: self.feature_dim(),
            weights: self.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
            bias: self.bias.to_vec(),
            config: self.config.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.model_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        let c = file.class_names.len();
        if file.weights.len() != c || file.weights.iter().any(|r| r.len() != file.feature_dim) {
            return Err(PolarError::Format("weight matrix does not match declared shape".into()));
        }
        let weights = Array2::from_shape_vec(
            (c, file.feature_dim),
            file.weights.into_iter().flatten().collect(),
        )
        .map_err(|e| PolarError::Format(e.to_string()))?;
        LinearClassifier::new(file.class_names, weights, Array1::from(file.bias), file.config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| PolarError::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &self.model_file())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PolarError::io(path, e))?;
        Self::from_json(&text)
    }
}

fn argmax(v: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy plus `l2 / 2 * ||W||^2` (bias unpenalized), and its
/// gradient with respect to the weights and bias.
pub fn loss_and_gradient(
    weights: ArrayView2<'_, f64>,
    bias: ArrayView1<'_, f64>,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    l2: f64,
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mut probs = x.dot(&weights.t()) + bias;
    let mut loss = 0.0;
    for (mut row, &y) in probs.axis_iter_mut(Axis(0)).zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let z = row.sum();
        loss -= (row[y] / z).ln();
        row /= z;
        row[y] -= 1.0;
    }
    loss /= n;
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    // probs now holds (P - Y)
    let grad_w = probs.t().dot(&x) / n + &weights * l2;
    let grad_b = probs.sum_axis(Axis(0)) / n;
    (loss, grad_w, grad_b)
}

fn feature_matrix(docs: &[Document], e: &EmbeddingSet) -> (Array2<f64>, usize) {
    let mut x = Array2::zeros((docs.len(), e.dim()));
    let mut all_oov = 0;
    for (mut row, doc) in x.axis_iter_mut(Axis(0)).zip(docs) {
        let f = featurize(&doc.tokens, e);
        all_oov += usize::from(f.all_oov());
        row.assign(&f.vector);
    }
    (x, all_oov)
}

fn accuracy(weights: &Array2<f64>, bias: &Array1<f64>, x: &Array2<f64>, labels: &[usize]) -> f64 {
    let logits = x.dot(&weights.t()) + bias;
    let hits = logits
        .axis_iter(Axis(0))
        .zip(labels)
        .filter(|(row, &y)| argmax(row.view()) == y)
        .count();
    hits as f64 / labels.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: LinearClassifier,
    /// 1-based epoch the returned parameters come from.
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
    pub n_all_oov_train: usize,
}

/// Fits the classifier and keeps the checkpoint with the best validation
/// accuracy (earliest on ties), or the last epoch without a validation split.
pub fn train(ds: &LabeledTextDataset, e: &EmbeddingSet, config: &TrainConfig) -> Result<TrainOutcome> {
    if ds.train.is_empty() {
        return Err(PolarError::InsufficientData("empty training split".into()));
    }
    let classes = ds.class_names.len();
    let mut present = vec![false; classes];
    for d in &ds.train {
        present[d.label] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(PolarError::DegenerateData(
            "training data contains a single class".into(),
        ));
    }
    let (x, n_all_oov_train) = feature_matrix(&ds.train, e);
    let y: Vec<usize> = ds.train.iter().map(|d| d.label).collect();
    let (xv, _) = feature_matrix(&ds.validation, e);
    let yv: Vec<usize> = ds.validation.iter().map(|d| d.label).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = Array2::from_shape_simple_fn((classes, e.dim()), || rng.random_range(-0.01..0.01));
    let mut bias = Array1::<f64>::zeros(classes);

    let mut lr = config.learning_rate;
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Array2<f64>, Array1<f64>)> = None;
    for epoch in 1..=config.epochs {
        let (loss, gw, gb) = loss_and_gradient(weights.view(), bias.view(), x.view(), &y, config.l2);
        weights.scaled_add(-lr, &gw);
        bias.scaled_add(-lr, &gb);
        lr *= config.decay;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(PolarError::Numeric(format!("training diverged at epoch {epoch}")));
        }
        let validation_accuracy = (!yv.is_empty()).then(|| accuracy(&weights, &bias, &xv, &yv));
        history.push(EpochStats {
            epoch,
            loss,
            train_accuracy: accuracy(&weights, &bias, &x, &y),
            validation_accuracy,
        });
        if let Some(acc) = validation_accuracy {
            if best.as_ref().is_none_or(|(b, ..)| acc > *b) {
                best = Some((acc, epoch, weights.clone(), bias.clone()));
            }
        }
    }
    let (best_epoch, weights, bias) = match best {
        Some((_, epoch, w, b)) => (epoch, w, b),
        None => (config.epochs, weights, bias),
    };
    Ok(TrainOutcome {
        model: LinearClassifier::new(ds.class_names.clone(), weights, bias, config.clone())?,
        best_epoch,
        history,
        n_all_oov_train,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub n_documents: usize,
    pub n_all_oov: usize,
    pub per_class: Vec<ClassMetrics>,
    /// confusion[true][predicted]
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate_classifier(m: &LinearClassifier, docs: &[Document], e: &EmbeddingSet) -> Result<ClassificationReport> {
    m.check_dim(e.dim())?;
    if docs.is_empty() {
        return Err(PolarError::InsufficientData("no documents to evaluate".into()));
    }
    let c = m.class_names.len();
    let mut confusion = vec![vec![0usize; c]; c];
    let mut n_all_oov = 0;
    for doc in docs {
        if doc.label >= c {
            return Err(PolarError::OutOfBounds {
                what: "label",
                value: doc.label,
                limit: c,
            });
        }
        let f = featurize(&doc.tokens, e);
        n_all_oov += usize::from(f.all_oov());
        confusion[doc.label][m.predict(f.vector.view())?] += 1;
    }
    let correct: usize = (0..c).map(|i| confusion[i][i]).sum();
    let per_class = (0..c)
        .map(|k| {
            let predicted: usize = (0..c).map(|t| confusion[t][k]).sum();
            let support: usize = confusion[k].iter().sum();
            let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
            ClassMetrics {
                class: m.class_names[k].clone(),
                precision: ratio(confusion[k][k], predicted),
                recall: ratio(confusion[k][k], support),
                support,
            }
        })
        .collect();
    Ok(ClassificationReport {
        accuracy: correct as f64 / docs.len() as f64,
        n_documents: docs.len(),
        n_all_oov,
        per_class,
        confusion,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub index: usize,
    pub pair: PolarPair,
    pub feature_value: f64,
    pub weight: f64,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub predicted_class: String,
    pub predicted_index: usize,
    pub logit: f64,
    pub bias: f64,
    /// Sorted by |contribution| descending, ties to the lower dimension.
    pub contributions: Vec<Contribution>,
}

/// Every polar dimension's share `weight * feature` of the predicted-class
/// logit; these plus the bias sum to the logit.
pub fn contributions(m: &LinearClassifier, tokens: &[String], pe: &PolarEmbeddingSet) -> Result<Explanation> {
    m.check_dim(pe.dims().len())?;
    let f = featurize(tokens, pe.embeddings());
    let logits = m.logits(f.vector.view())?;
    let class = argmax(logits.view());
    let w = m.weights.row(class);
    let mut contributions: Vec<Contribution> = (0..f.vector.len())
        .map(|i| Contribution {
            index: i,
            pair: pe.dims()[i].clone(),
            feature_value: f.vector[i],
            weight: w[i],
            contribution: w[i] * f.vector[i],
        })
        .collect();
    contributions.sort_by(|a, b| {
        b.contribution
            .abs()
            .total_cmp(&a.contribution.abs())
            .then(a.index.cmp(&b.index))
    });
    Ok(Explanation {
        predicted_class: m.class_names[class].clone(),
        predicted_index: class,
        logit: logits[class],
        bias: m.bias[class],
        contributions,
    })
}

/// The `k` strongest contributions to the predicted class.
pub fn explain_prediction(
    m: &LinearClassifier,
    tokens: &[String],
    pe: &PolarEmbeddingSet,
    k: usize,
) -> Result<Explanation> {
    let mut ex = contributions(m, tokens, pe)?;
    ex.contributions.truncate(k);
    Ok(ex)
}
