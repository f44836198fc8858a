//! Intrinsic evaluations: word similarity, 3CosAdd analogies, discriminative
//! attributes, and inspection of a word's strongest polar dimensions.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{PolarError, Result};
use crate::polar::{PolarEmbeddingSet, PolarPair};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| PolarError::io(path, e))
}

fn read_lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, Result<String>)> {
    reader.lines().enumerate().map(|(i, l)| {
        (
            i + 1,
            l.map_err(|e| PolarError::FormatAtLine {
                line: i + 1,
                message: e.to_string(),
            }),
        )
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRecord {
    pub word1: String,
    pub word2: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDataset {
    pub records: Vec<SimilarityRecord>,
}

impl SimilarityDataset {
    pub fn new(records: Vec<SimilarityRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(PolarError::InsufficientData("empty similarity dataset".into()));
        }
        if let Some(r) = records.iter().find(|r| !r.score.is_finite()) {
            return Err(PolarError::InvalidArgument(format!(
                "non-finite score for ({}, {})",
                r.word1, r.word2
            )));
        }
        Ok(SimilarityDataset { records })
    }

    /// `word1 word2 score` per line, tab or space separated. A first line whose
    /// score field is not numeric is taken as a header.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut records = Vec::new();
        let mut seen_data = false;
        for (line_no, line) in read_lines(reader) {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() || fields[0].starts_with('#') {
                continue;
            }
            if fields.len() < 3 {
                return Err(PolarError::FormatAtLine {
                    line: line_no,
                    message: "expected word1, word2 and score".into(),
                });
            }
            let score = match fields[2].parse::<f64>() {
                Ok(s) => s,
                Err(_) if !seen_data => {
                    seen_data = true;
                    continue;
                }
                Err(_) => {
                    return Err(PolarError::FormatAtLine {
                        line: line_no,
                        message: format!("unparsable score {:?}", fields[2]),
                    })
                }
            };
            seen_data = true;
            records.push(SimilarityRecord {
                word1: fields[0].to_owned(),
                word2: fields[1].to_owned(),
                score,
            });
        }
        SimilarityDataset::new(records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(open(path.as_ref())?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalogyRecord {
    pub a: String,
    pub b: String,
    pub a2: String,
    pub expected: String,
    pub category: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalogyDataset {
    pub records: Vec<AnalogyRecord>,
}

impl AnalogyDataset {
    /// The `: section` format: a header line names the category of the
    /// four-word records that follow it.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut records = Vec::new();
        let mut category = String::from("default");
        for (line_no, line) in read_lines(reader) {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix(':') {
                category = name.trim().to_owned();
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(PolarError::FormatAtLine {
                    line: line_no,
                    message: format!("expected 4 words, found {}", fields.len()),
                });
            }
            records.push(AnalogyRecord {
                a: fields[0].to_owned(),
                b: fields[1].to_owned(),
                a2: fields[2].to_owned(),
                expected: fields[3].to_owned(),
                category: category.clone(),
            });
        }
        Ok(AnalogyDataset { records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(open(path.as_ref())?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminativeRecord {
    pub concept1: String,
    pub concept2: String,
    pub attribute: String,
    pub label: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminativeDataset {
    pub records: Vec<DiscriminativeRecord>,
}

impl DiscriminativeDataset {
    /// `concept1,concept2,attribute,label` with label `1`/`0` or `true`/`false`.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut records = Vec::new();
        for (line_no, line) in read_lines(reader) {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(PolarError::FormatAtLine {
                    line: line_no,
                    message: format!("expected 4 comma-separated fields, found {}", fields.len()),
                });
            }
            let label = match fields[3].to_ascii_lowercase().as_str() {
                "1" | "true" => true,
                "0" | "false" => false,
                other => {
                    return Err(PolarError::FormatAtLine {
                        line: line_no,
                        message: format!("invalid label {other:?}"),
                    })
                }
            };
            records.push(DiscriminativeRecord {
                concept1: fields[0].to_owned(),
                concept2: fields[1].to_owned(),
                attribute: fields[2].to_owned(),
                label,
            });
        }
        if records.is_empty() {
            return Err(PolarError::InsufficientData("empty discriminative dataset".into()));
        }
        Ok(DiscriminativeDataset { records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(open(path.as_ref())?)
    }
}

/// Average ("fractional") ranks, 1-based.
fn fractional_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j share ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho: the Pearson correlation of fractional ranks.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(PolarError::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(PolarError::InvalidArgument(
            "spearman correlation needs at least two observations".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(PolarError::InvalidArgument("NaN in correlation input".into()));
    }
    pearson(&fractional_ranks(xs), &fractional_ranks(ys))
        .ok_or_else(|| PolarError::UndefinedCorrelation("one list has constant ranks".into()))
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> f64 {
    let denom = u.dot(&u).sqrt() * v.dot(&v).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        u.dot(&v) / denom
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub rho: f64,
    pub n_used: usize,
    pub n_skipped: usize,
}

pub fn evaluate_similarity(e: &EmbeddingSet, ds: &SimilarityDataset) -> Result<SimilarityReport> {
    let mut human = Vec::new();
    let mut model = Vec::new();
    for r in &ds.records {
        if let (Some(u), Some(v)) = (e.vector(&r.word1), e.vector(&r.word2)) {
            human.push(r.score);
            model.push(cosine(u, v));
        }
    }
    if human.len() < 2 {
        return Err(PolarError::InsufficientData(format!(
            "only {} similarity pairs are in vocabulary",
            human.len()
        )));
    }
    Ok(SimilarityReport {
        rho: spearman_rho(&model, &human)?,
        n_used: human.len(),
        n_skipped: ds.records.len() - human.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalogyOptions {
    /// Fold case when matching words (exact match is the fallback).
    pub case_insensitive: bool,
    /// Only the first `n` vocabulary rows take part, as queries and candidates.
    pub topn_vocab: Option<usize>,
}

impl Default for AnalogyOptions {
    fn default() -> Self {
        AnalogyOptions {
            case_insensitive: true,
            topn_vocab: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalogyReport {
    pub accuracy: f64,
    pub correct: usize,
    pub n_used: usize,
    pub n_skipped: usize,
    pub per_category: BTreeMap<String, CategoryScore>,
    /// Pooled over categories whose name starts with `gram`.
    pub syntactic: Option<CategoryScore>,
    pub semantic: Option<CategoryScore>,
    /// Predicted vocabulary row for each record, `None` when skipped.
    #[serde(skip)]
    pub predictions: Vec<Option<usize>>,
}

struct AnalogyIndex<'a> {
    e: &'a EmbeddingSet,
    opts: AnalogyOptions,
    limit: usize,
    folded: HashMap<String, usize>,
    candidates: Vec<usize>,
    unit: Array2<f64>,
}

impl<'a> AnalogyIndex<'a> {
    fn new(e: &'a EmbeddingSet, opts: AnalogyOptions) -> Self {
        let limit = opts.topn_vocab.map_or(e.len(), |n| n.min(e.len()));
        let mut folded = HashMap::new();
        let mut candidates = Vec::with_capacity(limit);
        for (i, w) in e.vocab()[..limit].iter().enumerate() {
            if opts.case_insensitive {
                // first (most frequent) spelling wins
                if let Entry::Vacant(slot) = folded.entry(w.to_lowercase()) {
                    slot.insert(i);
                    candidates.push(i);
                }
            } else {
                candidates.push(i);
            }
        }
        let mut unit = e.matrix().slice(ndarray::s![..limit, ..]).to_owned();
        for mut row in unit.axis_iter_mut(Axis(0)) {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|x| x / norm);
            }
        }
        AnalogyIndex {
            e,
            opts,
            limit,
            folded,
            candidates,
            unit,
        }
    }

    fn resolve(&self, word: &str) -> Option<usize> {
        let exact = self.e.lookup(word).filter(|&i| i < self.limit);
        if self.opts.case_insensitive {
            self.folded.get(&word.to_lowercase()).copied().or(exact)
        } else {
            exact
        }
    }

    fn matches(&self, predicted: usize, expected: &str) -> bool {
        let token = &self.e.vocab()[predicted];
        if self.opts.case_insensitive {
            token.to_lowercase() == expected.to_lowercase()
        } else {
            token == expected
        }
    }

    /// argmax over candidates of cos(x, b - a + a2) on unit vectors, ties to
    /// the lower row.
    fn predict(&self, a: usize, b: usize, a2: usize) -> Option<usize> {
        let target: Array1<f64> = &self.unit.row(b) - &self.unit.row(a) + self.unit.row(a2);
        let norm = target.dot(&target).sqrt();
        let mut best: Option<(usize, f64)> = None;
        for &c in &self.candidates {
            if c == a || c == b || c == a2 {
                continue;
            }
            let score = if norm > 0.0 {
                self.unit.row(c).dot(&target) / norm
            } else {
                0.0
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((c, score));
            }
        }
        best.map(|(c, _)| c)
    }
}

pub fn evaluate_analogy(
    e: &EmbeddingSet,
    ds: &AnalogyDataset,
    opts: AnalogyOptions,
) -> Result<AnalogyReport> {
    let index = AnalogyIndex::new(e, opts);
    let outcomes: Vec<Option<(usize, bool)>> = ds
        .records
        .par_iter()
        .map(|r| {
            let a = index.resolve(&r.a)?;
            let b = index.resolve(&r.b)?;
            let a2 = index.resolve(&r.a2)?;
            index.resolve(&r.expected)?;
            let p = index.predict(a, b, a2)?;
            Some((p, index.matches(p, &r.expected)))
        })
        .collect();

    let mut per_category: BTreeMap<String, CategoryScore> = BTreeMap::new();
    let mut syntactic = CategoryScore { correct: 0, total: 0, accuracy: 0.0 };
    let mut semantic = syntactic.clone();
    let (mut correct, mut used) = (0, 0);
    for (r, o) in ds.records.iter().zip(&outcomes) {
        let Some((_, hit)) = o else { continue };
        used += 1;
        correct += usize::from(*hit);
        let group = if r.category.starts_with("gram") {
            &mut syntactic
        } else {
            &mut semantic
        };
        for s in [
            per_category
                .entry(r.category.clone())
                .or_insert(CategoryScore { correct: 0, total: 0, accuracy: 0.0 }),
            group,
        ] {
            s.total += 1;
            s.correct += usize::from(*hit);
        }
    }
    if used == 0 {
        return Err(PolarError::InsufficientData("no analogy record is fully in vocabulary".into()));
    }
    let finish = |s: &mut CategoryScore| s.accuracy = s.correct as f64 / s.total as f64;
    per_category.values_mut().for_each(finish);
    let wrap = |mut s: CategoryScore| {
        (s.total > 0).then(|| {
            finish(&mut s);
            s
        })
    };
    Ok(AnalogyReport {
        accuracy: correct as f64 / used as f64,
        correct,
        n_used: used,
        n_skipped: ds.records.len() - used,
        per_category,
        syntactic: wrap(syntactic),
        semantic: wrap(semantic),
        predictions: outcomes.iter().map(|o| o.map(|(p, _)| p)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminativeReport {
    pub accuracy: f64,
    pub n_used: usize,
    pub n_skipped: usize,
}

/// Predicts the attribute discriminates iff cos(concept1, attribute) > cos(concept2, attribute).
pub fn evaluate_discriminative(e: &EmbeddingSet, ds: &DiscriminativeDataset) -> Result<DiscriminativeReport> {
    let (mut used, mut correct) = (0usize, 0usize);
    for r in &ds.records {
        let (Some(c1), Some(c2), Some(at)) = (
            e.vector(&r.concept1),
            e.vector(&r.concept2),
            e.vector(&r.attribute),
        ) else {
            continue;
        };
        used += 1;
        let predicted = cosine(c1, at) > cosine(c2, at);
        correct += usize::from(predicted == r.label);
    }
    if used == 0 {
        return Err(PolarError::InsufficientData(
            "no discriminative triple is fully in vocabulary".into(),
        ));
    }
    Ok(DiscriminativeReport {
        accuracy: correct as f64 / used as f64,
        n_used: used,
        n_skipped: ds.records.len() - used,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionScore {
    pub index: usize,
    pub pair: PolarPair,
    /// Signed coordinate: positive leans to `pair.positive()`, negative to `pair.negative()`.
    pub value: f64,
}

/// The `k` polar dimensions with the largest absolute coordinate for `word`.
pub fn top_k_dimensions(pe: &PolarEmbeddingSet, word: &str, k: usize) -> Result<Vec<DimensionScore>> {
    let n = pe.dims().len();
    if k > n {
        return Err(PolarError::OutOfBounds {
            what: "k",
            value: k,
            limit: n,
        });
    }
    let coords = pe
        .embeddings()
        .vector(word)
        .ok_or_else(|| PolarError::NotFound(word.to_owned()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| coords[b].abs().total_cmp(&coords[a].abs()).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| DimensionScore {
            index: i,
            pair: pe.dims()[i].clone(),
            value: coords[i],
        })
        .collect())
}
