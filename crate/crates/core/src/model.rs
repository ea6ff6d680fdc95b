//! The neural entity-pair scorer.
//!
//! Mention-pair feature vectors are embedded and concatenated, passed
//! through a ReLU layer, pooled into an entity-pair embedding by m_type
//! attention, squashed by a sigmoid layer and scored by a logistic output.
//! Gradients are derived by hand and checked against finite differences in
//! the test suite.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Document, Entity};
use crate::embeddings::VectorStore;
use crate::features::{
    MentionPairFeatures, SpeechLexicon, CATEGORICAL_CARDINALITIES, NUM_CATEGORICAL_FEATURES,
};
use crate::metrics::{score_corpus, ScoreReport};
use crate::resolver::{self, DecoderConfig};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, found {found} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("attention pooling over an empty mention-pair list")]
    EmptyPairList,
    #[error("mention `{0}` not found in document; entities must come from one document")]
    CrossDocumentEntity(String),
    #[error("non-finite gradient encountered during SGD")]
    NonFiniteGradient,
    #[error("no training triplets could be generated")]
    EmptyTrainingData,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("model file: {0}")]
    BadModelFile(String),
    #[error("model file version {found} unsupported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub feature_embed_dim: usize,
    pub word_dim: usize,
    pub relu_dim: usize,
    pub sigmoid_dim: usize,
    pub learning_rate_start: f64,
    pub learning_rate_end: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub decode_threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_embed_dim: 50,
            word_dim: 300,
            relu_dim: 100,
            sigmoid_dim: 500,
            learning_rate_start: 0.05,
            learning_rate_end: 0.0001,
            batch_size: 32,
            epochs: 50,
            seed: 0,
            decode_threshold: 0.5,
        }
    }
}

impl ModelConfig {
    pub fn input_dim(&self) -> usize {
        NUM_CATEGORICAL_FEATURES * self.feature_embed_dim + 2 * self.word_dim
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.feature_embed_dim == 0
            || self.word_dim == 0
            || self.relu_dim == 0
            || self.sigmoid_dim == 0
            || self.batch_size == 0
        {
            return Err(ModelError::InvalidConfig("all dimensions must be positive".into()));
        }
        if !(self.learning_rate_end > 0.0 && self.learning_rate_end <= self.learning_rate_start) {
            return Err(ModelError::InvalidConfig(
                "need 0 < learning_rate_end <= learning_rate_start".into(),
            ));
        }
        if !(self.decode_threshold > 0.0 && self.decode_threshold < 1.0) {
            return Err(ModelError::InvalidConfig("decode_threshold must be in (0,1)".into()));
        }
        Ok(())
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// self * v
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// self^T * v
    pub fn tr_matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, vr) in v.iter().enumerate() {
            for (o, m) in out.iter_mut().zip(self.row(r)) {
                *o += vr * m;
            }
        }
        out
    }

    /// self += scale * u v^T
    pub fn add_outer(&mut self, u: &[f64], v: &[f64], scale: f64) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (r, ur) in u.iter().enumerate() {
            let factor = scale * ur;
            if factor == 0.0 {
                continue;
            }
            for (m, x) in self.row_mut(r).iter_mut().zip(v) {
                *m += factor * x;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// One embedding table per categorical feature, cardinality x embed_dim.
    pub tables: Vec<Mat>,
    /// relu_dim x input_dim.
    pub w1: Mat,
    /// Attention weights keyed by m_type pair: (name,name), (name,nominal),
    /// (nominal,nominal), (nominal,name).
    pub attention: [f64; 4],
    /// sigmoid_dim x relu_dim.
    pub w2: Mat,
    /// sigmoid_dim.
    pub ws: Vec<f64>,
}

impl ModelParams {
    pub fn zeros_like(config: &ModelConfig) -> Self {
        ModelParams {
            tables: CATEGORICAL_CARDINALITIES
                .iter()
                .map(|&card| Mat::zeros(card, config.feature_embed_dim))
                .collect(),
            w1: Mat::zeros(config.relu_dim, config.input_dim()),
            attention: [0.0; 4],
            w2: Mat::zeros(config.sigmoid_dim, config.relu_dim),
            ws: vec![0.0; config.sigmoid_dim],
        }
    }

    fn scale(&mut self, factor: f64) {
        for t in &mut self.tables {
            t.data.iter_mut().for_each(|x| *x *= factor);
        }
        self.w1.data.iter_mut().for_each(|x| *x *= factor);
        self.attention.iter_mut().for_each(|x| *x *= factor);
        self.w2.data.iter_mut().for_each(|x| *x *= factor);
        self.ws.iter_mut().for_each(|x| *x *= factor);
    }

    fn add(&mut self, other: &ModelParams) {
        for (a, b) in self.tables.iter_mut().zip(&other.tables) {
            a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += y);
        }
        self.w1.data.iter_mut().zip(&other.w1.data).for_each(|(x, y)| *x += y);
        self.attention.iter_mut().zip(&other.attention).for_each(|(x, y)| *x += y);
        self.w2.data.iter_mut().zip(&other.w2.data).for_each(|(x, y)| *x += y);
        self.ws.iter_mut().zip(&other.ws).for_each(|(x, y)| *x += y);
    }

    fn all_finite(&self) -> bool {
        self.tables.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
            && self.w1.data.iter().all(|x| x.is_finite())
            && self.attention.iter().all(|x| x.is_finite())
            && self.w2.data.iter().all(|x| x.is_finite())
            && self.ws.iter().all(|x| x.is_finite())
    }
}

/// Initialize parameters from the config seed: uniform fan-based for the
/// matrices, +-0.01 for the embedding tables, 1.0 for the attention
/// weights (so initial pooling is a plain normalized sum).
pub fn init_model(config: &ModelConfig) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::zeros_like(config);

    for table in &mut params.tables {
        for x in &mut table.data {
            *x = rng.gen_range(-0.01..0.01);
        }
    }
    let bound1 = (6.0 / (config.input_dim() + config.relu_dim) as f64).sqrt();
    for x in &mut params.w1.data {
        *x = rng.gen_range(-bound1..bound1);
    }
    params.attention = [1.0; 4];
    let bound2 = (6.0 / (config.relu_dim + config.sigmoid_dim) as f64).sqrt();
    for x in &mut params.w2.data {
        *x = rng.gen_range(-bound2..bound2);
    }
    let bound_s = (6.0 / (config.sigmoid_dim + 1) as f64).sqrt();
    for x in &mut params.ws {
        *x = rng.gen_range(-bound_s..bound_s);
    }
    params
}

/// Concatenate the embedding rows of the categorical features with the two
/// averaged word embeddings, in the fixed field order.
pub fn embed_pair(
    f: &MentionPairFeatures,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<Vec<f64>, ModelError> {
    for (name, emb) in [("avg_embedding_i", &f.avg_embedding_i), ("avg_embedding_j", &f.avg_embedding_j)] {
        if emb.len() != config.word_dim {
            return Err(ModelError::DimensionMismatch {
                what: name,
                expected: config.word_dim,
                found: emb.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(config.input_dim());
    for (table, &idx) in params.tables.iter().zip(&f.categorical_indices()) {
        out.extend_from_slice(table.row(idx));
    }
    out.extend_from_slice(&f.avg_embedding_i);
    out.extend_from_slice(&f.avg_embedding_j);
    Ok(out)
}

/// v^r = max(0, W1 v)
pub fn relu_layer(v: &[f64], params: &ModelParams) -> Result<Vec<f64>, ModelError> {
    if v.len() != params.w1.cols {
        return Err(ModelError::DimensionMismatch {
            what: "relu input",
            expected: params.w1.cols,
            found: v.len(),
        });
    }
    Ok(params.w1.matvec(v).into_iter().map(|x| x.max(0.0)).collect())
}

/// Attention-pool per-pair ReLU outputs into the entity-pair embedding:
/// v^a = sum a_t / N * v^r with N = sqrt(sum a_t^2) over the same pairs.
pub fn attention_pool(
    pairs: &[(Vec<f64>, usize)],
    params: &ModelParams,
) -> Result<Vec<f64>, ModelError> {
    let Some(dim) = pairs.first().map(|(v, _)| v.len()) else {
        return Err(ModelError::EmptyPairList);
    };
    let norm_sq: f64 = pairs.iter().map(|(_, t)| params.attention[*t].powi(2)).sum();
    let norm = norm_sq.sqrt();
    if norm < 1e-12 {
        return Ok(vec![0.0; dim]);
    }
    let mut out = vec![0.0; dim];
    for (vr, t) in pairs {
        let coef = params.attention[*t] / norm;
        for (o, x) in out.iter_mut().zip(vr) {
            *o += coef * x;
        }
    }
    Ok(out)
}

/// Per-pair activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct PairCache {
    pub cat_indices: [usize; NUM_CATEGORICAL_FEATURES],
    pub input: Vec<f64>,
    pub pre_relu: Vec<f64>,
    pub relu: Vec<f64>,
    pub m_type_pair: usize,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub pairs: Vec<PairCache>,
    pub norm: f64,
    pub pooled: Vec<f64>,
    pub sig: Vec<f64>,
    pub prob: f64,
}

/// Score a list of mention-pair feature vectors as one entity pair.
pub fn forward_features(
    features: &[MentionPairFeatures],
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<(f64, ForwardCache), ModelError> {
    if features.is_empty() {
        return Err(ModelError::EmptyPairList);
    }
    let mut pairs = Vec::with_capacity(features.len());
    for f in features {
        let input = embed_pair(f, params, config)?;
        let pre_relu = params.w1.matvec(&input);
        let relu: Vec<f64> = pre_relu.iter().map(|x| x.max(0.0)).collect();
        pairs.push(PairCache {
            cat_indices: f.categorical_indices(),
            input,
            pre_relu,
            relu,
            m_type_pair: f.m_type_pair,
        });
    }

    let norm_sq: f64 = pairs
        .iter()
        .map(|p| params.attention[p.m_type_pair].powi(2))
        .sum();
    let norm = norm_sq.sqrt();
    let mut pooled = vec![0.0; config.relu_dim];
    if norm >= 1e-12 {
        for p in &pairs {
            let coef = params.attention[p.m_type_pair] / norm;
            for (o, x) in pooled.iter_mut().zip(&p.relu) {
                *o += coef * x;
            }
        }
    }

    let sig: Vec<f64> = params.w2.matvec(&pooled).into_iter().map(sigmoid).collect();
    let prob = sigmoid(dot(&params.ws, &sig));
    let cache = ForwardCache {
        pairs,
        norm,
        pooled,
        sig,
        prob,
    };
    Ok((prob, cache))
}

/// Feature vectors for the full cross product of two entities' mentions.
pub fn entity_pair_features(
    e1: &Entity,
    e2: &Entity,
    doc: &Document,
    store: &VectorStore,
    speech: &SpeechLexicon,
) -> Result<Vec<MentionPairFeatures>, ModelError> {
    let resolve = |id: &str| {
        doc.mention_by_id(id)
            .ok_or_else(|| ModelError::CrossDocumentEntity(id.to_string()))
    };
    let mut features = Vec::with_capacity(e1.mention_ids.len() * e2.mention_ids.len());
    for id_i in &e1.mention_ids {
        let mi = resolve(id_i)?;
        for id_j in &e2.mention_ids {
            let mj = resolve(id_j)?;
            features.push(crate::features::extract_pair_features(mi, mj, doc, store, speech)?);
        }
    }
    Ok(features)
}

/// P(y=1 | e1, e2) for two partially built entities of one document.
pub fn forward(
    e1: &Entity,
    e2: &Entity,
    doc: &Document,
    store: &VectorStore,
    speech: &SpeechLexicon,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<(f64, ForwardCache), ModelError> {
    let features = entity_pair_features(e1, e2, doc, store, speech)?;
    forward_features(&features, params, config)
}

/// Gradients of -log P(y | e1, e2) with respect to every trainable tensor.
/// Word-embedding input slices receive no parameter gradient.
pub fn backward(
    cache: &ForwardCache,
    label: u8,
    params: &ModelParams,
    config: &ModelConfig,
) -> ModelParams {
    let mut grads = ModelParams::zeros_like(config);
    let y = label as f64;
    let d_logit = cache.prob - y;

    // output layer
    for (g_ws, s) in grads.ws.iter_mut().zip(&cache.sig) {
        *g_ws = d_logit * s;
    }
    let d_sig: Vec<f64> = params
        .ws
        .iter()
        .zip(&cache.sig)
        .map(|(w, s)| d_logit * w * s * (1.0 - s))
        .collect();

    // sigmoid layer
    grads.w2.add_outer(&d_sig, &cache.pooled, 1.0);
    let d_pooled = params.w2.tr_matvec(&d_sig);

    // attention layer
    if cache.norm >= 1e-12 {
        let norm = cache.norm;
        // s_k = d_pooled . v^r_k
        let scores: Vec<f64> = cache.pairs.iter().map(|p| dot(&d_pooled, &p.relu)).collect();
        let weighted_total: f64 = cache
            .pairs
            .iter()
            .zip(&scores)
            .map(|(p, s)| params.attention[p.m_type_pair] * s)
            .sum();
        let mut per_type_score = [0.0; 4];
        let mut per_type_count = [0usize; 4];
        for (p, s) in cache.pairs.iter().zip(&scores) {
            per_type_score[p.m_type_pair] += s;
            per_type_count[p.m_type_pair] += 1;
        }
        for t in 0..4 {
            // d v^a / d a_t through both the numerator and the normalizer
            grads.attention[t] = per_type_score[t] / norm
                - params.attention[t] * per_type_count[t] as f64 * weighted_total / norm.powi(3);
        }

        // relu layer and embedding tables, per pair
        let embed_dim = config.feature_embed_dim;
        for p in &cache.pairs {
            let coef = params.attention[p.m_type_pair] / norm;
            let d_pre: Vec<f64> = d_pooled
                .iter()
                .zip(&p.pre_relu)
                .map(|(d, pre)| if *pre > 0.0 { coef * d } else { 0.0 })
                .collect();
            grads.w1.add_outer(&d_pre, &p.input, 1.0);
            let d_input = params.w1.tr_matvec(&d_pre);
            for (feat, &row) in p.cat_indices.iter().enumerate() {
                let slice = &d_input[feat * embed_dim..(feat + 1) * embed_dim];
                for (g, d) in grads.tables[feat].row_mut(row).iter_mut().zip(slice) {
                    *g += d;
                }
            }
            // trailing word-embedding slices: inputs are constants
        }
    }

    grads
}

/// Negative log-likelihood of one scored triplet.
pub fn nll(prob: f64, label: u8) -> f64 {
    let p = prob.clamp(1e-15, 1.0 - 1e-15);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// p <- p - lr * g for every trainable scalar.
pub fn sgd_step(params: &mut ModelParams, grads: &ModelParams, lr: f64) -> Result<(), ModelError> {
    if !grads.all_finite() {
        return Err(ModelError::NonFiniteGradient);
    }
    let mut step = grads.clone();
    step.scale(-lr);
    params.add(&step);
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev_report: Option<ScoreReport>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub epoch_logs: Vec<EpochLog>,
    /// Epoch whose parameters were kept (best dev CoNLL), if dev was scored.
    pub best_epoch: Option<usize>,
}

/// Train on gold documents, tracking dev CoNLL after each epoch and keeping
/// the epoch-best parameters. Deterministic for a fixed seed.
pub fn train(
    train_docs: &[Document],
    dev_docs: &[Document],
    store: &VectorStore,
    speech: &SpeechLexicon,
    config: &ModelConfig,
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    if train_docs.is_empty() {
        return Err(ModelError::EmptyTrainingData);
    }

    // Generate triplets once and precompute their feature vectors; the
    // entities are gold snapshots, so features never change across epochs.
    let mut examples: Vec<(Vec<MentionPairFeatures>, u8)> = Vec::new();
    for doc in train_docs {
        for triplet in resolver::generate_training_triplets(doc)? {
            let features =
                entity_pair_features(&triplet.entity_a, &triplet.entity_b, doc, store, speech)?;
            examples.push((features, triplet.label));
        }
    }
    if examples.is_empty() {
        return Err(ModelError::EmptyTrainingData);
    }

    let gold: Vec<_> = dev_docs
        .iter()
        .map(crate::corpus::gold_clustering)
        .collect::<Result<_, _>>()?;
    let decoder = DecoderConfig {
        threshold: config.decode_threshold,
    };

    let mut params = init_model(config);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut logs = Vec::with_capacity(config.epochs);

    let steps_per_epoch = examples.len().div_ceil(config.batch_size);
    let total_steps = config.epochs * steps_per_epoch;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        shuffle(&mut order, &mut rng);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let lr = if total_steps <= 1 {
                config.learning_rate_start
            } else {
                let t = step as f64 / (total_steps - 1) as f64;
                config.learning_rate_start + t * (config.learning_rate_end - config.learning_rate_start)
            };
            let mut grads = ModelParams::zeros_like(config);
            for &idx in batch {
                let (features, label) = &examples[idx];
                let (prob, cache) = forward_features(features, &params, config)?;
                epoch_loss += nll(prob, *label);
                grads.add(&backward(&cache, *label, &params, config));
            }
            grads.scale(1.0 / batch.len() as f64);
            sgd_step(&mut params, &grads, lr)?;
            step += 1;
        }
        let mean_loss = epoch_loss / examples.len() as f64;

        let dev_report = if dev_docs.is_empty() {
            None
        } else {
            let sys: Vec<_> = dev_docs
                .iter()
                .map(|d| resolver::decode(d, &params, store, speech, config, &decoder))
                .collect::<Result<_, _>>()?;
            let report = score_corpus(&gold, &sys).map_err(|e| ModelError::BadModelFile(e.to_string()))?;
            if best.as_ref().is_none_or(|(score, _, _)| report.conll > *score) {
                best = Some((report.conll, epoch, params.clone()));
            }
            Some(report)
        };
        logs.push(EpochLog {
            epoch,
            mean_loss,
            dev_report,
        });
    }

    let (params, best_epoch) = match best {
        Some((_, epoch, best_params)) => (best_params, Some(epoch)),
        None => (params, None),
    };
    Ok(TrainOutcome {
        params,
        epoch_logs: logs,
        best_epoch,
    })
}

// Fisher-Yates; kept local so the training trajectory does not depend on
// rand's shuffle implementation details across versions.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

const MODEL_MAGIC: &[u8; 4] = b"XLCF";
const MODEL_VERSION: u32 = 1;

fn write_tensor(buf: &mut Vec<u8>, rows: usize, cols: usize, data: &[f64]) {
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    for x in data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

struct TensorReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> TensorReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.pos + n > self.buf.len() {
            return Err(ModelError::BadModelFile("truncated file".into()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn read_u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn read_u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn read_tensor(&mut self, rows: usize, cols: usize, what: &'static str) -> Result<Vec<f64>, ModelError> {
        let r = self.read_u64()? as usize;
        let c = self.read_u64()? as usize;
        if r != rows || c != cols {
            return Err(ModelError::BadModelFile(format!(
                "{what}: saved shape {r}x{c} does not match config shape {rows}x{cols}"
            )));
        }
        let bytes = self.take(rows * cols * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}

/// Serialize the model to a single self-describing file. Layout is
/// documented in the README; all floats are little-endian f64 and the file
/// ends with a SHA-256 checksum of everything before it.
pub fn save_model(params: &ModelParams, config: &ModelConfig, path: &Path) -> Result<(), ModelError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    let config_json = serde_json::to_vec(config).expect("config serializes");
    buf.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config_json);
    for table in &params.tables {
        write_tensor(&mut buf, table.rows, table.cols, &table.data);
    }
    write_tensor(&mut buf, params.w1.rows, params.w1.cols, &params.w1.data);
    write_tensor(&mut buf, 1, 4, &params.attention);
    write_tensor(&mut buf, params.w2.rows, params.w2.cols, &params.w2.data);
    write_tensor(&mut buf, 1, params.ws.len(), &params.ws);
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);

    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(ModelParams, ModelConfig), ModelError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 32 {
        return Err(ModelError::BadModelFile("truncated file".into()));
    }
    let (body, checksum) = buf.split_at(buf.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != checksum {
        return Err(ModelError::BadModelFile("checksum mismatch".into()));
    }

    let mut r = TensorReader { buf: body, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(ModelError::BadModelFile("bad magic".into()));
    }
    let version = r.read_u32()?;
    if version != MODEL_VERSION {
        return Err(ModelError::VersionMismatch {
            expected: MODEL_VERSION,
            found: version,
        });
    }
    let config_len = r.read_u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| ModelError::BadModelFile(format!("bad config: {e}")))?;
    config.validate()?;

    let mut params = ModelParams::zeros_like(&config);
    for (table, &card) in params.tables.iter_mut().zip(&CATEGORICAL_CARDINALITIES) {
        table.data = r.read_tensor(card, config.feature_embed_dim, "embedding table")?;
    }
    params.w1.data = r.read_tensor(config.relu_dim, config.input_dim(), "W1")?;
    let attention = r.read_tensor(1, 4, "attention")?;
    params.attention.copy_from_slice(&attention);
    params.w2.data = r.read_tensor(config.sigmoid_dim, config.relu_dim, "W2")?;
    params.ws = r.read_tensor(1, config.sigmoid_dim, "ws")?;
    if r.pos != body.len() {
        return Err(ModelError::BadModelFile("trailing bytes".into()));
    }
    Ok((params, config))
}
