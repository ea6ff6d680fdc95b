//! Word-vector storage and cross-lingual linear projection.
//!
//! Vectors load from the word2vec text format. A source-language space is
//! mapped onto the target (English) space by a least-squares linear
//! projection fit on a bilingual lexicon.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("vector file line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("averaging over an empty token list")]
    EmptyTokenList,
    #[error("projection fit needs at least {needed} usable lexicon pairs, found {found}")]
    TooFewPairs { needed: usize, found: usize },
    #[error("projection normal equations are singular")]
    SingularSystem,
    #[error("dimension mismatch: projection expects {expected}, store has {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Immutable word → vector map with a fixed dimension.
#[derive(Debug, Clone)]
pub struct VectorStore {
    dimension: usize,
    vocabulary: HashMap<String, Vec<f64>>,
    duplicates_skipped: usize,
}

impl VectorStore {
    pub fn new(dimension: usize) -> Self {
        VectorStore {
            dimension,
            vocabulary: HashMap::new(),
            duplicates_skipped: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    /// Number of duplicate vocabulary entries skipped at load time.
    pub fn duplicates_skipped(&self) -> usize {
        self.duplicates_skipped
    }

    /// Insert a vector, keeping the first occurrence on duplicates.
    pub fn insert(&mut self, word: String, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dimension, "vector dimension mismatch");
        match self.vocabulary.entry(word) {
            Entry::Occupied(_) => self.duplicates_skipped += 1,
            Entry::Vacant(slot) => {
                slot.insert(vector);
            }
        }
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vocabulary.get(word).map(|v| v.as_slice())
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.vocabulary.keys().map(|w| w.as_str())
    }

    /// Exact match, then lowercase match, then the zero vector. Total.
    pub fn lookup(&self, word: &str) -> Vec<f64> {
        if let Some(v) = self.vocabulary.get(word) {
            return v.clone();
        }
        let lower = word.to_lowercase();
        if let Some(v) = self.vocabulary.get(&lower) {
            return v.clone();
        }
        vec![0.0; self.dimension]
    }

    /// Arithmetic mean of the lookups; zero vectors for unknown words are
    /// included in the mean.
    pub fn average_embedding(&self, tokens: &[&str]) -> Result<Vec<f64>, EmbeddingError> {
        if tokens.is_empty() {
            return Err(EmbeddingError::EmptyTokenList);
        }
        let mut acc = vec![0.0; self.dimension];
        for token in tokens {
            let v = self.lookup(token);
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += x;
            }
        }
        let n = tokens.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(acc)
    }
}

/// Load a word2vec-style text file. The first line may be a "<count> <dim>"
/// header; otherwise the dimension is inferred from the first vector line.
pub fn load_word_vectors<R: BufRead>(reader: R) -> Result<VectorStore, EmbeddingError> {
    let mut store: Option<VectorStore> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        if idx == 0 {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() == 2 {
                if let (Ok(_count), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    store = Some(VectorStore::new(dim));
                    continue;
                }
            }
        }
        let word = parts
            .next()
            .ok_or_else(|| EmbeddingError::Format {
                line: line_no,
                reason: "missing word".into(),
            })?
            .to_string();
        let mut values = Vec::new();
        for p in parts {
            let v: f64 = p.parse().map_err(|_| EmbeddingError::Format {
                line: line_no,
                reason: format!("non-numeric component `{p}`"),
            })?;
            if !v.is_finite() {
                return Err(EmbeddingError::Format {
                    line: line_no,
                    reason: format!("non-finite component `{p}`"),
                });
            }
            values.push(v);
        }
        let store = store.get_or_insert_with(|| VectorStore::new(values.len()));
        if values.len() != store.dimension() {
            return Err(EmbeddingError::Format {
                line: line_no,
                reason: format!(
                    "expected {} components, found {}",
                    store.dimension(),
                    values.len()
                ),
            });
        }
        store.insert(word, values);
    }
    Ok(store.unwrap_or_else(|| VectorStore::new(0)))
}

/// Write a store in the same text format, with a count/dim header.
/// Words are emitted in sorted order so output is reproducible.
pub fn write_word_vectors<W: Write>(store: &VectorStore, out: &mut W) -> Result<(), EmbeddingError> {
    writeln!(out, "{} {}", store.len(), store.dimension())?;
    let mut words: Vec<&str> = store.words().collect();
    words.sort_unstable();
    for word in words {
        write!(out, "{word}")?;
        for v in store.get(word).unwrap() {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Word pairs used to fit the projection.
#[derive(Debug, Clone, Default)]
pub struct BilingualLexicon {
    pub pairs: Vec<(String, String)>,
}

impl BilingualLexicon {
    /// Parse a TSV lexicon, one "<source>\t<target>" pair per line.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut pairs = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.splitn(2, '\t');
            let src = it.next().unwrap_or("").trim();
            let tgt = it.next().unwrap_or("").trim();
            if src.is_empty() || tgt.is_empty() {
                return Err(EmbeddingError::Format {
                    line: idx + 1,
                    reason: "lexicon line must be `<source>\\t<target>`".into(),
                });
            }
            pairs.push((src.to_string(), tgt.to_string()));
        }
        Ok(BilingualLexicon { pairs })
    }
}

/// Linear map from the source space onto the target space,
/// shape (target_dim × source_dim).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    pub matrix: DMatrix<f64>,
}

impl ProjectionMatrix {
    pub fn target_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn source_dim(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Result of a projection fit, with diagnostics for reporting.
#[derive(Debug, Clone)]
pub struct ProjectionFit {
    pub projection: ProjectionMatrix,
    pub usable_pairs: usize,
    /// Sum of squared residuals ||W x_i - z_i||^2 over the usable pairs.
    pub residual: f64,
}

/// Fit W minimizing sum ||W x_i - z_i||^2 over lexicon pairs found in both
/// stores, via regularized normal equations (ridge scaled by the trace of
/// the Gram matrix to guard rank deficiency).
pub fn fit_projection(
    lexicon: &BilingualLexicon,
    src: &VectorStore,
    tgt: &VectorStore,
) -> Result<ProjectionFit, EmbeddingError> {
    let d_src = src.dimension();
    let d_tgt = tgt.dimension();
    let usable: Vec<(&[f64], &[f64])> = lexicon
        .pairs
        .iter()
        .filter_map(|(s, t)| Some((src.get(s)?, tgt.get(t)?)))
        .collect();
    if usable.len() < d_src {
        return Err(EmbeddingError::TooFewPairs {
            needed: d_src,
            found: usable.len(),
        });
    }

    let n = usable.len();
    let x = DMatrix::from_fn(d_src, n, |r, c| usable[c].0[r]);
    let z = DMatrix::from_fn(d_tgt, n, |r, c| usable[c].1[r]);

    let mut gram = &x * x.transpose();
    let lambda = 1e-8 * gram.trace() / d_src as f64;
    for i in 0..d_src {
        gram[(i, i)] += lambda;
    }
    // (X X^T + lambda I) W^T = X Z^T
    let rhs = &x * z.transpose();
    let chol = gram.cholesky().ok_or(EmbeddingError::SingularSystem)?;
    let w_t = chol.solve(&rhs);
    let w = w_t.transpose();

    let residual = (&w * &x - &z).iter().map(|e| e * e).sum();
    Ok(ProjectionFit {
        projection: ProjectionMatrix { matrix: w },
        usable_pairs: n,
        residual,
    })
}

/// Apply W to every vector in the store.
pub fn project_store(src: &VectorStore, w: &ProjectionMatrix) -> Result<VectorStore, EmbeddingError> {
    if w.source_dim() != src.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: w.source_dim(),
            found: src.dimension(),
        });
    }
    let mut out = VectorStore::new(w.target_dim());
    for word in src.words() {
        let v = nalgebra::DVector::from_column_slice(src.get(word).unwrap());
        let projected = &w.matrix * v;
        out.insert(word.to_string(), projected.iter().copied().collect());
    }
    Ok(out)
}
