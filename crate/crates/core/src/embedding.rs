//! Word embedding storage and the word2vec binary / GloVe text interchange formats.
//!
//! Vectors are held as 64-bit floats regardless of the on-disk precision. Rows
//! follow file order, which for the common distributions is frequency order;
//! vocabulary caps elsewhere in the crate rely on that.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{PolarError, Result};

/// A vocabulary-indexed dense matrix of word vectors.
#[derive(Clone, Debug)]
pub struct EmbeddingSet {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Array2<f64>,
    normalized: bool,
}

impl EmbeddingSet {
    /// Builds a set from a vocabulary and a `V x d` matrix whose rows follow it.
    pub fn new(vocab: Vec<String>, matrix: Array2<f64>) -> Result<Self> {
        if vocab.is_empty() {
            return Err(PolarError::InvalidArgument(
                "embedding set must contain at least one word".into(),
            ));
        }
        if matrix.ncols() == 0 {
            return Err(PolarError::InvalidArgument(
                "embedding dimension must be at least 1".into(),
            ));
        }
        if matrix.nrows() != vocab.len() {
            return Err(PolarError::DimensionMismatch {
                expected: vocab.len(),
                found: matrix.nrows(),
            });
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, word) in vocab.iter().enumerate() {
            if word.is_empty() {
                return Err(PolarError::InvalidArgument(format!(
                    "empty token at row {i}"
                )));
            }
            if index.insert(word.clone(), i).is_some() {
                return Err(PolarError::DuplicateToken(word.clone()));
            }
        }
        Ok(EmbeddingSet {
            vocab,
            index,
            matrix,
            normalized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn row(&self, index: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(index)
    }

    pub fn vector(&self, token: &str) -> Option<ArrayView1<'_, f64>> {
        self.lookup(token).map(|i| self.matrix.row(i))
    }

    /// Keeps only the first `n` words (frequency order for the usual distributions).
    pub fn truncated(&self, n: usize) -> Result<EmbeddingSet> {
        let n = n.min(self.len());
        let mut set = EmbeddingSet::new(
            self.vocab[..n].to_vec(),
            self.matrix.slice(ndarray::s![..n, ..]).to_owned(),
        )?;
        set.normalized = self.normalized;
        Ok(set)
    }

    pub fn into_parts(self) -> (Vec<String>, Array2<f64>) {
        (self.vocab, self.matrix)
    }
}

/// Scales every row to unit Euclidean norm.
pub fn normalize_rows(mut e: EmbeddingSet) -> Result<EmbeddingSet> {
    for (i, mut row) in e.matrix.axis_iter_mut(Axis(0)).enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(PolarError::ZeroVector(e.vocab[i].clone()));
        }
        row.mapv_inplace(|x| x / norm);
    }
    e.normalized = true;
    Ok(e)
}

struct OffsetReader<R> {
    inner: R,
    offset: u64,
}

impl<R: BufRead> OffsetReader<R> {
    fn truncated(&self, what: &str) -> PolarError {
        PolarError::FormatAtOffset {
            offset: self.offset,
            message: format!("unexpected end of file while reading {what}"),
        }
    }

    /// Reads up to (and consuming) `delim`. Returns `None` on a clean EOF
    /// before any byte was read.
    fn read_until(&mut self, delim: u8, buf: &mut Vec<u8>) -> io::Result<Option<bool>> {
        buf.clear();
        let n = self.inner.read_until(delim, buf)?;
        self.offset += n as u64;
        if n == 0 {
            return Ok(None);
        }
        let terminated = buf.last() == Some(&delim);
        if terminated {
            buf.pop();
        }
        Ok(Some(terminated))
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        self.offset += filled as u64;
        Ok(filled)
    }

    fn skip_byte_if(&mut self, byte: u8) -> io::Result<()> {
        let buf = self.inner.fill_buf()?;
        if buf.first() == Some(&byte) {
            self.inner.consume(1);
            self.offset += 1;
        }
        Ok(())
    }
}

/// Reads the word2vec binary format: an ASCII `"V d\n"` header followed by
/// `V` records of a space-terminated token and `d` little-endian `f32`s,
/// each optionally followed by a single newline.
pub fn read_word2vec_binary<R: BufRead>(reader: R) -> Result<EmbeddingSet> {
    let mut r = OffsetReader {
        inner: reader,
        offset: 0,
    };
    let io_err = |e: io::Error| PolarError::Format(format!("read failure: {e}"));

    let mut buf = Vec::new();
    match r.read_until(b'\n', &mut buf).map_err(io_err)? {
        Some(true) => {}
        _ => return Err(r.truncated("header")),
    }
    let header = std::str::from_utf8(&buf).map_err(|_| PolarError::FormatAtOffset {
        offset: 0,
        message: "header is not ASCII".into(),
    })?;
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    let parse = |s: &str| -> Result<usize> {
        s.parse().map_err(|_| PolarError::FormatAtOffset {
            offset: 0,
            message: format!("non-numeric header field {s:?}"),
        })
    };
    if fields.len() != 2 {
        return Err(PolarError::FormatAtOffset {
            offset: 0,
            message: format!("expected header \"V d\", found {header:?}"),
        });
    }
    let (n_words, dim) = (parse(fields[0])?, parse(fields[1])?);
    if n_words == 0 || dim == 0 {
        return Err(PolarError::FormatAtOffset {
            offset: 0,
            message: "header declares an empty embedding set".into(),
        });
    }

    let mut vocab = Vec::with_capacity(n_words);
    let mut matrix = Array2::<f64>::zeros((n_words, dim));
    let mut raw = vec![0u8; dim * 4];
    for row in 0..n_words {
        let token_start = r.offset;
        match r.read_until(b' ', &mut buf).map_err(io_err)? {
            Some(true) => {}
            _ => return Err(r.truncated("token")),
        }
        let token = String::from_utf8(buf.clone()).map_err(|e| PolarError::FormatAtOffset {
            offset: token_start + e.utf8_error().valid_up_to() as u64,
            message: "token is not valid UTF-8".into(),
        })?;
        if token.is_empty() {
            return Err(PolarError::FormatAtOffset {
                offset: token_start,
                message: "empty token".into(),
            });
        }
        let got = r.read_exact(&mut raw).map_err(io_err)?;
        if got < raw.len() {
            return Err(r.truncated(&format!("vector for {token:?}")));
        }
        for (dst, chunk) in matrix.row_mut(row).iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f64::from(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
        }
        r.skip_byte_if(b'\n').map_err(io_err)?;
        vocab.push(token);
    }
    EmbeddingSet::new(vocab, matrix)
}

pub fn load_word2vec_binary(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| PolarError::io(path, e))?;
    read_word2vec_binary(BufReader::with_capacity(1 << 20, file))
}

/// Writes the word2vec binary format (values are narrowed to `f32`).
pub fn write_word2vec_binary<W: Write>(e: &EmbeddingSet, mut w: W) -> io::Result<()> {
    writeln!(w, "{} {}", e.len(), e.dim())?;
    for (word, row) in e.vocab.iter().zip(e.matrix.rows()) {
        w.write_all(word.as_bytes())?;
        w.write_all(b" ")?;
        for &x in row {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Reads GloVe text: one `token v1 ... vd` line per word, single-space
/// separated, no header. The dimension comes from the first line.
pub fn read_glove_text<R: BufRead>(reader: R) -> Result<EmbeddingSet> {
    let mut vocab = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut dim = None;
    let mut pending_blank = None;
    for (i, line) in reader.split(b'\n').enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| PolarError::FormatAtLine {
            line: line_no,
            message: format!("read failure: {e}"),
        })?;
        let line = String::from_utf8(line).map_err(|_| PolarError::FormatAtLine {
            line: line_no,
            message: "line is not valid UTF-8".into(),
        })?;
        if line.is_empty() {
            pending_blank.get_or_insert(line_no);
            continue;
        }
        if let Some(blank) = pending_blank {
            return Err(PolarError::FormatAtLine {
                line: blank,
                message: "empty line".into(),
            });
        }
        let mut fields = line.split(' ');
        let token = fields.next().unwrap_or_default();
        if token.is_empty() {
            return Err(PolarError::FormatAtLine {
                line: line_no,
                message: "empty token".into(),
            });
        }
        let start = values.len();
        for field in fields {
            let x: f64 = field.parse().map_err(|_| PolarError::FormatAtLine {
                line: line_no,
                message: format!("unparsable number {field:?}"),
            })?;
            values.push(x);
        }
        let found = values.len() - start;
        let expected = *dim.get_or_insert(found);
        if found != expected || found == 0 {
            return Err(PolarError::FormatAtLine {
                line: line_no,
                message: format!("expected {expected} components, found {found}"),
            });
        }
        vocab.push(token.to_owned());
    }
    let dim = dim.ok_or_else(|| PolarError::Format("no embedding lines".into()))?;
    let matrix = Array2::from_shape_vec((vocab.len(), dim), values)
        .map_err(|e| PolarError::Format(e.to_string()))?;
    EmbeddingSet::new(vocab, matrix)
}

pub fn load_glove_text(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| PolarError::io(path, e))?;
    read_glove_text(BufReader::with_capacity(1 << 20, file))
}

pub fn write_glove_text<W: Write>(e: &EmbeddingSet, mut w: W, precision: usize) -> Result<()> {
    for word in &e.vocab {
        if word.contains([' ', '\n', '\t', '\r']) {
            return Err(PolarError::InvalidArgument(format!(
                "token {word:?} contains whitespace and cannot be saved"
            )));
        }
    }
    let io_err = |e: io::Error| PolarError::Format(format!("write failure: {e}"));
    for (word, row) in e.vocab.iter().zip(e.matrix.rows()) {
        w.write_all(word.as_bytes()).map_err(io_err)?;
        for &x in row {
            write!(w, " {x:.precision$}").map_err(io_err)?;
        }
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Saves in GloVe text format with `precision` digits after the decimal point.
pub fn save_embeddings_text(e: &EmbeddingSet, path: impl AsRef<Path>, precision: usize) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|err| PolarError::io(path, err))?;
    write_glove_text(e, BufWriter::new(file), precision).map_err(|err| match err {
        PolarError::Format(msg) => PolarError::io(path, io::Error::other(msg)),
        other => other,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Word2VecBinary,
    GloveText,
}

impl std::str::FromStr for EmbeddingFormat {
    type Err = PolarError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word2vec-bin" => Ok(EmbeddingFormat::Word2VecBinary),
            "glove-txt" => Ok(EmbeddingFormat::GloveText),
            other => Err(PolarError::InvalidArgument(format!(
                "unknown embedding format {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for EmbeddingFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EmbeddingFormat::Word2VecBinary => "word2vec-bin",
            EmbeddingFormat::GloveText => "glove-txt",
        })
    }
}

pub fn load_embeddings(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<EmbeddingSet> {
    match format {
        EmbeddingFormat::Word2VecBinary => load_word2vec_binary(path),
        EmbeddingFormat::GloveText => load_glove_text(path),
    }
}
