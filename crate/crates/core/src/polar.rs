//! Polar-opposite direction matrices and the change of basis into polar space.
//!
//! Each polar pair `(positive, negative)` contributes one direction row
//! `w(positive) - w(negative)`. Stacking the rows gives an `N x d` matrix
//! `dir`, and a word vector `w` is expressed in polar coordinates `x` by
//! solving `dir^T x = w` in the least-squares sense, i.e. `x = (dir^T)^+ w`.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{self, EmbeddingSet};
use crate::error::{PolarError, Result};

pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_WARN_THRESHOLD: f64 = 1e6;

/// Rows per block in the batched projection. Fixed so results do not depend
/// on the worker count.
pub const TRANSFORM_BLOCK_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolarPair {
    positive: String,
    negative: String,
}

impl PolarPair {
    pub fn new(positive: impl Into<String>, negative: impl Into<String>) -> Result<Self> {
        let (positive, negative) = (positive.into(), negative.into());
        if positive.is_empty() || negative.is_empty() {
            return Err(PolarError::InvalidArgument(
                "polar pair words must be non-empty".into(),
            ));
        }
        if positive == negative {
            return Err(PolarError::InvalidArgument(format!(
                "polar pair uses {positive:?} for both poles"
            )));
        }
        Ok(PolarPair { positive, negative })
    }

    pub fn positive(&self) -> &str {
        &self.positive
    }

    pub fn negative(&self) -> &str {
        &self.negative
    }
}

impl fmt::Display for PolarPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.positive, self.negative)
    }
}

/// Parses pair lists: one pair per line, the first two tab-separated fields
/// (or whitespace-separated when the line has no tab). Blank lines and `#`
/// comments are ignored.
pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<PolarPair>> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| PolarError::FormatAtLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if trimmed.contains('\t') {
            trimmed.split('\t').map(str::trim).collect()
        } else {
            trimmed.split_whitespace().collect()
        };
        if fields.len() < 2 {
            return Err(PolarError::FormatAtLine {
                line: i + 1,
                message: "expected two words per line".into(),
            });
        }
        let pair = PolarPair::new(fields[0], fields[1]).map_err(|e| PolarError::FormatAtLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<PolarPair>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| PolarError::io(path, e))?;
    read_pairs(BufReader::new(file))
}

/// Writes the dimension-name file: `positive<TAB>negative` per line.
pub fn write_pairs<W: Write>(pairs: &[PolarPair], mut w: W) -> std::io::Result<()> {
    for p in pairs {
        writeln!(w, "{}\t{}", p.positive, p.negative)?;
    }
    w.flush()
}

pub fn save_pairs(pairs: &[PolarPair], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| PolarError::io(path, e))?;
    write_pairs(pairs, BufWriter::new(file)).map_err(|e| PolarError::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    MissingPositive,
    MissingNegative,
    MissingBoth,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SkipReason::MissingPositive => "missing_positive",
            SkipReason::MissingNegative => "missing_negative",
            SkipReason::MissingBoth => "missing_both",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub pair: PolarPair,
    pub reason: SkipReason,
}

/// Writes the skipped-pair report: `positive<TAB>negative<TAB>reason`.
pub fn write_skipped<W: Write>(skipped: &[SkippedPair], mut w: W) -> std::io::Result<()> {
    for s in skipped {
        writeln!(w, "{}\t{}\t{}", s.pair.positive, s.pair.negative, s.reason)?;
    }
    w.flush()
}

/// The stacked polar direction vectors, one row per retained pair.
#[derive(Clone, Debug)]
pub struct DirectionMatrix {
    pairs: Vec<PolarPair>,
    dir: Array2<f64>,
    skipped: Vec<SkippedPair>,
}

impl DirectionMatrix {
    /// Builds `dir` from `pairs`. Pairs with an out-of-vocabulary word are
    /// recorded in [`DirectionMatrix::skipped`]; the rest keep input order.
    ///
    /// The embeddings are expected to be unit-normalized, though this is not
    /// enforced.
    pub fn build(e: &EmbeddingSet, pairs: &[PolarPair]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(PolarError::InvalidArgument("no polar pairs given".into()));
        }
        let mut kept = Vec::with_capacity(pairs.len());
        let mut skipped = Vec::new();
        for pair in pairs {
            match (e.lookup(&pair.positive), e.lookup(&pair.negative)) {
                (Some(p), Some(n)) => kept.push((pair.clone(), p, n)),
                (p, n) => skipped.push(SkippedPair {
                    pair: pair.clone(),
                    reason: match (p, n) {
                        (None, None) => SkipReason::MissingBoth,
                        (None, _) => SkipReason::MissingPositive,
                        _ => SkipReason::MissingNegative,
                    },
                }),
            }
        }
        if kept.is_empty() {
            return Err(PolarError::NoUsablePairs);
        }
        let mut dir = Array2::zeros((kept.len(), e.dim()));
        for (mut row, (pair, p, n)) in dir.axis_iter_mut(Axis(0)).zip(&kept) {
            row.assign(&(&e.row(*p) - &e.row(*n)));
            if row.iter().all(|&x| x == 0.0) {
                return Err(PolarError::DegeneratePair {
                    positive: pair.positive.clone(),
                    negative: pair.negative.clone(),
                });
            }
        }
        Ok(DirectionMatrix {
            pairs: kept.into_iter().map(|(pair, _, _)| pair).collect(),
            dir,
            skipped,
        })
    }

    /// Wraps an explicit direction matrix. Used for synthetic bases.
    pub fn from_rows(pairs: Vec<PolarPair>, dir: Array2<f64>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(PolarError::NoUsablePairs);
        }
        if pairs.len() != dir.nrows() {
            return Err(PolarError::DimensionMismatch {
                expected: pairs.len(),
                found: dir.nrows(),
            });
        }
        for (pair, row) in pairs.iter().zip(dir.rows()) {
            if row.iter().all(|&x| x == 0.0) {
                return Err(PolarError::DegeneratePair {
                    positive: pair.positive.clone(),
                    negative: pair.negative.clone(),
                });
            }
        }
        Ok(DirectionMatrix {
            pairs,
            dir,
            skipped: Vec::new(),
        })
    }

    /// The sub-matrix of the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<DirectionMatrix> {
        if indices.is_empty() {
            return Err(PolarError::NoUsablePairs);
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(PolarError::OutOfBounds {
                what: "pair index",
                value: bad,
                limit: self.len(),
            });
        }
        Ok(DirectionMatrix {
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
            dir: self.dir.select(Axis(0), indices),
            skipped: self.skipped.clone(),
        })
    }

    /// The sub-matrix for a list of pairs, which must all be retained rows.
    pub fn select_pairs(&self, subset: &[PolarPair]) -> Result<DirectionMatrix> {
        let indices = subset
            .iter()
            .map(|p| {
                self.pairs.iter().position(|q| q == p).ok_or_else(|| {
                    PolarError::InvalidArgument(format!("pair {p} is not among the retained pairs"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.select(&indices)
    }

    /// Copy with every direction row scaled to unit length.
    pub fn with_unit_rows(&self) -> DirectionMatrix {
        let mut dir = self.dir.clone();
        for mut row in dir.axis_iter_mut(Axis(0)) {
            let norm = row.dot(&row).sqrt();
            row.mapv_inplace(|x| x / norm);
        }
        DirectionMatrix {
            pairs: self.pairs.clone(),
            dir,
            skipped: self.skipped.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn source_dim(&self) -> usize {
        self.dir.ncols()
    }

    pub fn pairs(&self) -> &[PolarPair] {
        &self.pairs
    }

    pub fn skipped(&self) -> &[SkippedPair] {
        &self.skipped
    }

    pub fn dir(&self) -> ArrayView2<'_, f64> {
        self.dir.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.dir.row(i)
    }
}

/// The pseudoinverse `(dir^T)^+`, an `N x d` matrix, with its spectrum.
#[derive(Clone, Debug)]
pub struct PolarTransform {
    pinv: Array2<f64>,
    singular_values: Vec<f64>,
    rank: usize,
    condition_number: f64,
    rank_tolerance: f64,
}

/// Computes `(dir^T)^+` from the SVD `dir = U S V^T`, giving `U S^+ V^T`.
/// Singular values below `rank_tolerance * s_max` are treated as zero.
pub fn compute_transform(dm: &DirectionMatrix, rank_tolerance: f64) -> Result<PolarTransform> {
    if dm.is_empty() {
        return Err(PolarError::NoUsablePairs);
    }
    if !(0.0..1.0).contains(&rank_tolerance) {
        return Err(PolarError::InvalidArgument(format!(
            "rank tolerance must lie in [0, 1), got {rank_tolerance}"
        )));
    }
    if dm.dir.iter().any(|x| !x.is_finite()) {
        return Err(PolarError::Numeric(
            "direction matrix contains non-finite values".into(),
        ));
    }
    let (n, d) = dm.dir.dim();
    let a = faer::Mat::<f64>::from_fn(n, d, |i, j| dm.dir[[i, j]]);
    let svd = a
        .thin_svd()
        .map_err(|_| PolarError::Numeric("singular value decomposition did not converge".into()))?;
    let (u, v) = (svd.U(), svd.V());
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();

    let s_max = sv.iter().copied().fold(0.0_f64, f64::max);
    let cutoff = rank_tolerance * s_max;
    let retained: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > cutoff && sv[i] > 0.0).collect();
    if retained.is_empty() {
        return Err(PolarError::Numeric("direction matrix has rank zero".into()));
    }
    let s_min = retained.iter().map(|&i| sv[i]).fold(f64::INFINITY, f64::min);

    // U[:, r] diag(1/s_r) V[:, r]^T
    let scaled_u = Array2::from_shape_fn((n, retained.len()), |(i, k)| {
        u[(i, retained[k])] / sv[retained[k]]
    });
    let v_r = Array2::from_shape_fn((d, retained.len()), |(j, k)| v[(j, retained[k])]);
    let pinv = scaled_u.dot(&v_r.t());

    let mut singular_values = sv;
    singular_values.sort_by(|a, b| b.total_cmp(a));
    Ok(PolarTransform {
        pinv,
        singular_values,
        rank: retained.len(),
        condition_number: s_max / s_min,
        rank_tolerance,
    })
}

impl PolarTransform {
    pub fn pinv(&self) -> ArrayView2<'_, f64> {
        self.pinv.view()
    }

    pub fn source_dim(&self) -> usize {
        self.pinv.ncols()
    }

    pub fn n_dims(&self) -> usize {
        self.pinv.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    /// All singular values of `dir`, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    /// Polar coordinates of a single vector.
    pub fn project(&self, w: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if w.len() != self.source_dim() {
            return Err(PolarError::DimensionMismatch {
                expected: self.source_dim(),
                found: w.len(),
            });
        }
        Ok(self.pinv.dot(&w))
    }

    /// Fails with [`PolarError::IllConditioned`] when the report is not `ok`.
    pub fn ensure_reliable(&self, warn_threshold: f64) -> Result<ConditioningReport> {
        let report = conditioning_report(self, warn_threshold);
        if report.severity == Severity::Unreliable {
            return Err(PolarError::IllConditioned {
                condition_number: report.condition_number,
                rank: report.rank,
                n_dims: report.n_dims,
            });
        }
        Ok(report)
    }
}

/// Embeddings in polar coordinates; column `j` is named by `dims[j]`.
#[derive(Clone, Debug)]
pub struct PolarEmbeddingSet {
    embeddings: EmbeddingSet,
    dims: Vec<PolarPair>,
}

impl PolarEmbeddingSet {
    pub fn new(embeddings: EmbeddingSet, dims: Vec<PolarPair>) -> Result<Self> {
        if embeddings.dim() != dims.len() {
            return Err(PolarError::DimensionMismatch {
                expected: dims.len(),
                found: embeddings.dim(),
            });
        }
        Ok(PolarEmbeddingSet { embeddings, dims })
    }

    pub fn embeddings(&self) -> &EmbeddingSet {
        &self.embeddings
    }

    pub fn dims(&self) -> &[PolarPair] {
        &self.dims
    }

    /// Writes the embeddings as GloVe text plus the dimension-name file.
    pub fn save(&self, path: impl AsRef<Path>, precision: usize) -> Result<()> {
        let path = path.as_ref();
        embedding::save_embeddings_text(&self.embeddings, path, precision)?;
        save_pairs(&self.dims, dims_path(path))
    }

    /// Loads embeddings saved by [`PolarEmbeddingSet::save`].
    pub fn load(path: impl AsRef<Path>, dims: Option<&Path>) -> Result<Self> {
        let path = path.as_ref();
        let embeddings = embedding::load_glove_text(path)?;
        let dims = match dims {
            Some(p) => load_pairs(p)?,
            None => load_pairs(dims_path(path))?,
        };
        PolarEmbeddingSet::new(embeddings, dims)
    }
}

impl AsRef<EmbeddingSet> for PolarEmbeddingSet {
    fn as_ref(&self) -> &EmbeddingSet {
        &self.embeddings
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(suffix);
    PathBuf::from(os)
}

/// `<embeddings>.dims.tsv`
pub fn dims_path(path: &Path) -> PathBuf {
    with_suffix(path, ".dims.tsv")
}

/// `<embeddings>.skipped.tsv`
pub fn skipped_path(path: &Path) -> PathBuf {
    with_suffix(path, ".skipped.tsv")
}

/// Projects every vocabulary row: `E = W * pinv^T`, blockwise over rows.
pub fn transform_all(
    e: &EmbeddingSet,
    t: &PolarTransform,
    dm: &DirectionMatrix,
) -> Result<PolarEmbeddingSet> {
    if e.dim() != t.source_dim() {
        return Err(PolarError::DimensionMismatch {
            expected: t.source_dim(),
            found: e.dim(),
        });
    }
    if dm.len() != t.n_dims() {
        return Err(PolarError::DimensionMismatch {
            expected: t.n_dims(),
            found: dm.len(),
        });
    }
    let w = e.matrix();
    let pinv_t = t.pinv.t();
    let mut out = Array2::<f64>::zeros((e.len(), t.n_dims()));
    out.axis_chunks_iter_mut(Axis(0), TRANSFORM_BLOCK_ROWS)
        .into_par_iter()
        .enumerate()
        .for_each(|(b, mut block)| {
            let start = b * TRANSFORM_BLOCK_ROWS;
            let rows = w.slice(s![start..start + block.nrows(), ..]);
            block.assign(&rows.dot(&pinv_t));
        });
    let embeddings = EmbeddingSet::new(e.vocab().to_vec(), out)?;
    PolarEmbeddingSet::new(embeddings, dm.pairs.clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Ok,
    Unreliable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    pub condition_number: f64,
    pub rank: usize,
    pub n_dims: usize,
    pub source_dim: usize,
    pub warn_threshold: f64,
    pub severity: Severity,
}

pub fn conditioning_report(t: &PolarTransform, warn_threshold: f64) -> ConditioningReport {
    let full_rank = t.n_dims().min(t.source_dim());
    let severity = if t.condition_number > warn_threshold || t.rank < full_rank {
        Severity::Unreliable
    } else {
        Severity::Ok
    };
    ConditioningReport {
        condition_number: t.condition_number,
        rank: t.rank,
        n_dims: t.n_dims(),
        source_dim: t.source_dim(),
        warn_threshold,
        severity,
    }
}
