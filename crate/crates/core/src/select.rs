//! Choosing `K` polar dimensions out of a larger candidate pool.
//!
//! Three strategies: a seeded uniform sample, the `K` directions along which
//! the vocabulary has the largest projection variance, and a greedy pass that
//! starts from the highest-variance direction and repeatedly adds the
//! candidate with the smallest mean absolute cosine to everything picked so far.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{PolarError, Result};
use crate::polar::{DirectionMatrix, PolarPair};

const VARIANCE_BLOCK_ROWS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "rand")]
    Random,
    #[serde(rename = "var")]
    Variance,
    #[serde(rename = "orth")]
    Orthogonality,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Random, Strategy::Variance, Strategy::Orthogonality];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "rand",
            Strategy::Variance => "var",
            Strategy::Orthogonality => "orth",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = PolarError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rand" | "random" => Ok(Strategy::Random),
            "var" | "variance" => Ok(Strategy::Variance),
            "orth" | "orthogonality" => Ok(Strategy::Orthogonality),
            other => Err(PolarError::InvalidArgument(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub strategy: Strategy,
    /// Indices into the candidate [`DirectionMatrix`], in pick order.
    pub chosen: Vec<usize>,
    /// Variance (for `var`) or mean overlap at pick time (for `orth`).
    /// The first `orth` pick has no predecessors and scores 0.
    pub scores: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SelectOptions {
    /// Compute variances over the first `n` vocabulary rows only.
    pub vocab_cap: Option<usize>,
    /// Score candidates with the signed mean cosine instead of its absolute value.
    pub signed_overlap: bool,
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(PolarError::InvalidArgument("k must be at least 1".into()));
    }
    if k > n {
        return Err(PolarError::OutOfBounds {
            what: "k",
            value: k,
            limit: n,
        });
    }
    Ok(())
}

pub fn select_random(dm: &DirectionMatrix, k: usize, seed: u64) -> Result<SelectionResult> {
    check_k(k, dm.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, dm.len(), k).into_vec();
    Ok(SelectionResult {
        strategy: Strategy::Random,
        chosen,
        scores: None,
        seed: Some(seed),
    })
}

fn unit_rows(dm: &DirectionMatrix) -> Array2<f64> {
    dm.with_unit_rows().dir().to_owned()
}

/// Population variance, over the vocabulary, of the projections onto every
/// unit direction. Streams through the vocabulary in blocks with Welford
/// updates, so memory stays at `O(block * N)`.
pub fn projection_variances(
    dm: &DirectionMatrix,
    e: &EmbeddingSet,
    vocab_cap: Option<usize>,
) -> Result<Vec<f64>> {
    if e.dim() != dm.source_dim() {
        return Err(PolarError::DimensionMismatch {
            expected: dm.source_dim(),
            found: e.dim(),
        });
    }
    let rows = vocab_cap.map_or(e.len(), |cap| cap.min(e.len()));
    if rows == 0 {
        return Err(PolarError::InsufficientData("variance over zero words".into()));
    }
    let dirs_t = unit_rows(dm).reversed_axes();
    let w = e.matrix();
    let n = dm.len();
    let mut mean = Array1::<f64>::zeros(n);
    let mut m2 = Array1::<f64>::zeros(n);
    let mut count = 0.0_f64;
    for start in (0..rows).step_by(VARIANCE_BLOCK_ROWS) {
        let end = (start + VARIANCE_BLOCK_ROWS).min(rows);
        let proj = w.slice(s![start..end, ..]).dot(&dirs_t);
        for row in proj.axis_iter(Axis(0)) {
            count += 1.0;
            for ((m, s2), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(row) {
                let delta = x - *m;
                *m += delta / count;
                *s2 += delta * (x - *m);
            }
        }
    }
    Ok(m2.iter().map(|s2| s2 / count).collect())
}

pub fn projection_variance(dm: &DirectionMatrix, e: &EmbeddingSet, pair_index: usize) -> Result<f64> {
    if pair_index >= dm.len() {
        return Err(PolarError::OutOfBounds {
            what: "pair index",
            value: pair_index,
            limit: dm.len(),
        });
    }
    let single = dm.select(&[pair_index])?;
    Ok(projection_variances(&single, e, None)?[0])
}

/// Indices sorted by descending score, ties to the lower index.
fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

pub fn select_variance(
    dm: &DirectionMatrix,
    e: &EmbeddingSet,
    k: usize,
    opts: SelectOptions,
) -> Result<SelectionResult> {
    check_k(k, dm.len())?;
    let variances = projection_variances(dm, e, opts.vocab_cap)?;
    let chosen: Vec<usize> = rank_descending(&variances).into_iter().take(k).collect();
    let scores = chosen.iter().map(|&i| variances[i]).collect();
    Ok(SelectionResult {
        strategy: Strategy::Variance,
        chosen,
        scores: Some(scores),
        seed: None,
    })
}

pub fn select_orthogonal(
    dm: &DirectionMatrix,
    e: &EmbeddingSet,
    k: usize,
    opts: SelectOptions,
) -> Result<SelectionResult> {
    check_k(k, dm.len())?;
    let variances = projection_variances(dm, e, opts.vocab_cap)?;
    let first = rank_descending(&variances)[0];
    let units = unit_rows(dm);
    let n = dm.len();

    let mut chosen = vec![first];
    let mut scores = vec![0.0];
    let mut available = vec![true; n];
    available[first] = false;
    // overlap_sum[c] = sum over chosen o of overlap(o, c), accumulated in pick order.
    let mut overlap_sum = vec![0.0_f64; n];
    let mut last = first;
    while chosen.len() < k {
        let anchor = units.row(last);
        for c in (0..n).filter(|&c| available[c]) {
            let cos = anchor.dot(&units.row(c));
            overlap_sum[c] += if opts.signed_overlap { cos } else { cos.abs() };
        }
        let picked = chosen.len() as f64;
        let (best, best_score) = (0..n)
            .filter(|&c| available[c])
            .map(|c| (c, overlap_sum[c] / picked))
            .fold(None, |acc: Option<(usize, f64)>, (c, score)| match acc {
                Some((_, s)) if s <= score => acc,
                _ => Some((c, score)),
            })
            .expect("k <= N leaves a candidate");
        available[best] = false;
        chosen.push(best);
        scores.push(best_score);
        last = best;
    }
    Ok(SelectionResult {
        strategy: Strategy::Orthogonality,
        chosen,
        scores: Some(scores),
        seed: None,
    })
}

pub fn select(
    strategy: Strategy,
    dm: &DirectionMatrix,
    e: &EmbeddingSet,
    k: usize,
    seed: u64,
    opts: SelectOptions,
) -> Result<SelectionResult> {
    match strategy {
        Strategy::Random => select_random(dm, k, seed),
        Strategy::Variance => select_variance(dm, e, k, opts),
        Strategy::Orthogonality => select_orthogonal(dm, e, k, opts),
    }
}

/// Writes `rank<TAB>positive<TAB>negative<TAB>score` rows (rank is 1-based;
/// score is empty for random selections).
pub fn write_selection<W: Write>(
    result: &SelectionResult,
    dm: &DirectionMatrix,
    mut w: W,
) -> std::io::Result<()> {
    for (rank, &i) in result.chosen.iter().enumerate() {
        let pair = &dm.pairs()[i];
        let score = result
            .scores
            .as_ref()
            .map(|s| format!("{:.17e}", s[rank]))
            .unwrap_or_default();
        writeln!(w, "{}\t{}\t{}\t{}", rank + 1, pair.positive(), pair.negative(), score)?;
    }
    w.flush()
}

pub fn save_selection(result: &SelectionResult, dm: &DirectionMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| PolarError::io(path, e))?;
    write_selection(result, dm, BufWriter::new(file)).map_err(|e| PolarError::io(path, e))
}

/// Reads the pairs (in rank order) back out of a selection file.
pub fn read_selection<R: BufRead>(reader: R) -> Result<Vec<PolarPair>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| PolarError::FormatAtLine {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |message: String| PolarError::FormatAtLine { line: line_no, message };
        if fields.len() < 3 {
            return Err(bad("expected rank, positive, negative[, score]".into()));
        }
        let rank: usize = fields[0]
            .parse()
            .map_err(|_| bad(format!("invalid rank {:?}", fields[0])))?;
        let pair = PolarPair::new(fields[1], fields[2]).map_err(|e| bad(e.to_string()))?;
        rows.push((rank, pair));
    }
    rows.sort_by_key(|(rank, _)| *rank);
    Ok(rows.into_iter().map(|(_, p)| p).collect())
}

pub fn load_selection(path: impl AsRef<Path>) -> Result<Vec<PolarPair>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| PolarError::io(path, e))?;
    read_selection(BufReader::new(file))
}
