#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use polar::{DirectionMatrix, EmbeddingSet, PolarPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((rows, cols), |_| r.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vec(len: usize, seed: u64) -> Array1<f64> {
    let mut r = rng(seed);
    Array1::from_shape_fn(len, |_| r.sample::<f64, _>(StandardNormal))
}

pub fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn embeddings(matrix: Array2<f64>) -> EmbeddingSet {
    let n = matrix.nrows();
    EmbeddingSet::new(words("w", n), matrix).unwrap()
}

/// A direction matrix with synthetic pair names `p{i}`/`n{i}`.
pub fn direction(dir: Array2<f64>) -> DirectionMatrix {
    let pairs = (0..dir.nrows())
        .map(|i| PolarPair::new(format!("p{i}"), format!("n{i}")).unwrap())
        .collect();
    DirectionMatrix::from_rows(pairs, dir).unwrap()
}

pub fn fro(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||a - b||_F / max(||b||_F, tiny)`
pub fn rel_fro(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    fro((&a - &b).view()) / fro(b).max(1e-300)
}

pub fn moore_penrose_residuals(a: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> [f64; 4] {
    let ax = a.dot(&x);
    let xa = x.dot(&a);
    [
        rel_fro(ax.dot(&a).view(), a),
        rel_fro(xa.dot(&x).view(), x),
        rel_fro(ax.t(), ax.view()),
        rel_fro(xa.t(), xa.view()),
    ]
}

/// Solves the square system `m x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut m: Array2<f64>, mut b: Array1<f64>) -> Array1<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .unwrap();
        if pivot != col {
            for k in 0..n {
                m.swap([col, k], [pivot, k]);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = m[[row, col]] / m[[col, col]];
            for k in col..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[[row, k]] * x[k]).sum();
        x[row] = (b[row] - s) / m[[row, row]];
    }
    x
}

// ---- independent oracles -------------------------------------------------

pub fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt())
}

/// Rank = (#smaller) + (#equal + 1) / 2.
pub fn rank_oracle(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Pearson on oracle ranks, via raw sums.
pub fn spearman_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (rank_oracle(xs), rank_oracle(ys));
    let n = xs.len() as f64;
    let (sx, sy) = (rx.iter().sum::<f64>(), ry.iter().sum::<f64>());
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
    let sxx: f64 = rx.iter().map(|a| a * a).sum();
    let syy: f64 = ry.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Two-pass population variance of `w . r / |r|` over every word.
pub fn variance_oracle(e: &EmbeddingSet, row: ArrayView1<'_, f64>) -> f64 {
    let norm = row.dot(&row).sqrt();
    let proj: Vec<f64> = e.matrix().rows().into_iter().map(|w| w.dot(&row) / norm).collect();
    let mean = proj.iter().sum::<f64>() / proj.len() as f64;
    proj.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / proj.len() as f64
}

/// Indices sorted by oracle variance, descending, ties to the lower index.
pub fn variance_order_oracle(dm: &DirectionMatrix, e: &EmbeddingSet) -> Vec<usize> {
    let vars: Vec<f64> = (0..dm.len()).map(|i| variance_oracle(e, dm.row(i))).collect();
    let mut order: Vec<usize> = (0..dm.len()).collect();
    order.sort_by(|&a, &b| vars[b].partial_cmp(&vars[a]).unwrap().then(a.cmp(&b)));
    order
}

/// Mean overlap of candidate `c` against `chosen`, recomputed from scratch.
pub fn mean_overlap(dm: &DirectionMatrix, chosen: &[usize], c: usize, signed: bool) -> f64 {
    let total: f64 = chosen
        .iter()
        .map(|&o| {
            let cos = cosine(dm.row(o), dm.row(c));
            if signed { cos } else { cos.abs() }
        })
        .sum();
    total / chosen.len() as f64
}

/// Step-by-step greedy: every remaining candidate is rescored at every step.
pub fn greedy_oracle(dm: &DirectionMatrix, e: &EmbeddingSet, k: usize, signed: bool) -> Vec<usize> {
    let n = dm.len();
    let mut chosen = vec![variance_order_oracle(dm, e)[0]];
    while chosen.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..n {
            if chosen.contains(&c) {
                continue;
            }
            let score = mean_overlap(dm, &chosen, c, signed);
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((c, score));
            }
        }
        chosen.push(best.unwrap().0);
    }
    chosen
}

/// Full vocabulary scan of 3CosAdd on unit vectors, excluding the three query words.
pub fn analogy_oracle(e: &EmbeddingSet, a: usize, b: usize, a2: usize) -> usize {
    let unit = |i: usize| {
        let r = e.row(i);
        &r / r.dot(&r).sqrt()
    };
    let target: Array1<f64> = unit(b) - unit(a) + unit(a2);
    let mut best = usize::MAX;
    let mut best_score = f64::NEG_INFINITY;
    for c in 0..e.len() {
        if c == a || c == b || c == a2 {
            continue;
        }
        let s = cosine(e.row(c), target.view());
        if s > best_score {
            best = c;
            best_score = s;
        }
    }
    best
}
