//! Interpretable "polar" word embeddings.
//!
//! Given pre-trained word vectors and a list of polar-opposite word pairs
//! (antonyms such as hot/cold), this crate re-expresses every word in a basis
//! whose axes are the pair directions, so each coordinate reads as a position
//! between two named poles. Around that transform it provides:
//!
//! * [`embedding`]: word2vec binary and GloVe text I/O, row normalization.
//! * [`polar`]: direction matrices, the pseudoinverse change of basis, and
//!   conditioning diagnostics.
//! * [`select`]: random, variance and orthogonality-based choice of `K` axes.
//! * [`eval`]: word similarity, analogy, discriminative-attribute and top-k
//!   dimension inspection.
//! * [`downstream`]: averaged-vector document classification with a linear
//!   model whose predictions decompose over polar dimensions.

pub mod downstream;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod polar;
pub mod report;
pub mod select;

pub use embedding::{normalize_rows, EmbeddingFormat, EmbeddingSet};
pub use error::{ErrorCategory, PolarError, Result};
pub use polar::{
    compute_transform, conditioning_report, transform_all, ConditioningReport, DirectionMatrix,
    PolarEmbeddingSet, PolarPair, PolarTransform, Severity,
};
pub use select::{SelectOptions, SelectionResult, Strategy};
