//! Command-line pipeline: embedding projection, training, decoding and
//! scoring, driven by a single TOML config with flag overrides.
//!
//! Logs go to standard error; data artifacts go to files (or stdout for
//! `score`), so outputs stay machine-consumable.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::corpus::{gold_clustering, parse_document, Clustering, Document};
use crate::embeddings::{
    fit_projection, load_word_vectors, project_store, write_word_vectors, BilingualLexicon,
    VectorStore,
};
use crate::features::SpeechLexicon;
use crate::metrics::{score_corpus, ScoreReport};
use crate::model::{load_model, save_model, train, ModelConfig};
use crate::resolver::{decode, DecoderConfig};

/// Error classification for process exit codes: user/input problems exit
/// with 2, internal failures with 1.
#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::User(msg) | CliError::Internal(msg) => write!(f, "{msg}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    fn user(err: impl std::fmt::Display) -> CliError {
        CliError::User(err.to_string())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub train_docs: Option<PathBuf>,
    pub dev_docs: Option<PathBuf>,
    pub test_docs: Option<PathBuf>,
    /// Vector file used for training and decoding.
    pub embeddings: Option<PathBuf>,
    /// Source-language vectors for `project`.
    pub source_embeddings: Option<PathBuf>,
    /// Target-language (English) vectors for `project`.
    pub target_embeddings: Option<PathBuf>,
    /// TSV bilingual lexicon for `project`.
    pub lexicon: Option<PathBuf>,
    pub speech_lexicon: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Where `project` writes the projected vectors.
    pub projected_embeddings: Option<PathBuf>,
    /// Where `decode` writes clusterings.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub model: ModelConfig,
    pub decoder: DecoderConfig,
    /// Worker threads for document-parallel decode; 1 keeps everything
    /// sequential.
    pub jobs: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::User(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::User(format!("bad config: {e}")))
    }
}

fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::User(format!("missing required path: {what}")))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::User(format!("cannot open {}: {e}", path.display())))
}

pub fn load_documents(path: &Path) -> Result<Vec<Document>, CliError> {
    let reader = open(path)?;
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Internal(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        docs.push(parse_document(&line).map_err(|e| {
            CliError::User(format!("{}:{}: {e}", path.display(), idx + 1))
        })?);
    }
    Ok(docs)
}

fn load_store(path: &Path) -> Result<VectorStore, CliError> {
    let store = load_word_vectors(open(path)?).map_err(CliError::user)?;
    if store.duplicates_skipped() > 0 {
        eprintln!(
            "warning: {} duplicate vocabulary entries skipped in {}",
            store.duplicates_skipped(),
            path.display()
        );
    }
    Ok(store)
}

fn load_speech(path: &Option<PathBuf>) -> Result<SpeechLexicon, CliError> {
    match path {
        None => Ok(SpeechLexicon::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::User(format!("cannot read {}: {e}", p.display())))?;
            Ok(SpeechLexicon::from_lines(text.lines()))
        }
    }
}

fn load_clusterings(path: &Path) -> Result<Vec<Clustering>, CliError> {
    let reader = open(path)?;
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Internal(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let clustering: Clustering = serde_json::from_str(&line).map_err(|e| {
            CliError::User(format!("{}:{}: {e}", path.display(), idx + 1))
        })?;
        out.push(clustering);
    }
    Ok(out)
}

/// Fit the cross-lingual projection and write the projected source store.
pub fn cmd_project(config: &RunConfig) -> Result<(), CliError> {
    let src = load_store(require(&config.paths.source_embeddings, "paths.source_embeddings")?)?;
    let tgt = load_store(require(&config.paths.target_embeddings, "paths.target_embeddings")?)?;
    let lexicon =
        BilingualLexicon::from_tsv(open(require(&config.paths.lexicon, "paths.lexicon")?)?)
            .map_err(CliError::user)?;
    let out_path = require(&config.paths.projected_embeddings, "paths.projected_embeddings")?;

    let fit = fit_projection(&lexicon, &src, &tgt).map_err(CliError::user)?;
    eprintln!(
        "projection fit: {} usable pairs, residual {:.6e}",
        fit.usable_pairs, fit.residual
    );
    let projected = project_store(&src, &fit.projection).map_err(CliError::user)?;
    let mut out = BufWriter::new(
        File::create(out_path)
            .map_err(|e| CliError::User(format!("cannot write {}: {e}", out_path.display())))?,
    );
    write_word_vectors(&projected, &mut out).map_err(CliError::user)?;
    Ok(())
}

/// Train on the configured corpus and write the dev-best model.
pub fn cmd_train(config: &RunConfig) -> Result<(), CliError> {
    let train_docs = load_documents(require(&config.paths.train_docs, "paths.train_docs")?)?;
    let dev_docs = match &config.paths.dev_docs {
        Some(p) => load_documents(p)?,
        None => Vec::new(),
    };
    let store = load_store(require(&config.paths.embeddings, "paths.embeddings")?)?;
    let speech = load_speech(&config.paths.speech_lexicon)?;
    let model_path = require(&config.paths.model, "paths.model")?;

    let outcome = train(&train_docs, &dev_docs, &store, &speech, &config.model)
        .map_err(CliError::user)?;
    for log in &outcome.epoch_logs {
        match &log.dev_report {
            Some(r) => eprintln!(
                "epoch {} loss {:.6} dev MUC {:.4} B3 {:.4} CEAFe {:.4} CoNLL {:.4}",
                log.epoch, log.mean_loss, r.muc.f1, r.b_cubed.f1, r.ceaf_e.f1, r.conll
            ),
            None => eprintln!("epoch {} loss {:.6}", log.epoch, log.mean_loss),
        }
    }
    if let Some(best) = outcome.best_epoch {
        eprintln!("keeping parameters from epoch {best}");
    }
    save_model(&outcome.params, &config.model, model_path).map_err(CliError::user)?;
    Ok(())
}

/// Decode the configured documents with a trained model, one JSON
/// clustering per line, in input order.
pub fn cmd_decode(config: &RunConfig) -> Result<(), CliError> {
    let docs = load_documents(require(&config.paths.test_docs, "paths.test_docs")?)?;
    let (params, model_config) =
        load_model(require(&config.paths.model, "paths.model")?).map_err(CliError::user)?;
    let store = load_store(require(&config.paths.embeddings, "paths.embeddings")?)?;
    let speech = load_speech(&config.paths.speech_lexicon)?;
    let out_path = require(&config.paths.output, "paths.output")?;

    if store.dimension() != model_config.word_dim {
        return Err(CliError::User(format!(
            "embedding dimension {} does not match model word_dim {}",
            store.dimension(),
            model_config.word_dim
        )));
    }

    let decode_one = |doc: &Document| {
        decode(doc, &params, &store, &speech, &model_config, &config.decoder)
            .map_err(|e| CliError::User(format!("doc {}: {e}", doc.doc_id)))
    };
    let clusterings: Vec<Clustering> = if config.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?;
        pool.install(|| {
            use rayon::prelude::*;
            docs.par_iter().map(decode_one).collect::<Result<_, _>>()
        })?
    } else {
        docs.iter().map(decode_one).collect::<Result<_, _>>()?
    };

    let mut out = BufWriter::new(
        File::create(out_path)
            .map_err(|e| CliError::User(format!("cannot write {}: {e}", out_path.display())))?,
    );
    for clustering in &clusterings {
        serde_json::to_writer(&mut out, clustering).map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(out).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(())
}

pub fn format_report(report: &ScoreReport) -> String {
    format!(
        "MUC {:.4} {:.4} {:.4}\nB3 {:.4} {:.4} {:.4}\nCEAFe {:.4} {:.4} {:.4}\nCoNLL {:.4}\n",
        report.muc.precision,
        report.muc.recall,
        report.muc.f1,
        report.b_cubed.precision,
        report.b_cubed.recall,
        report.b_cubed.f1,
        report.ceaf_e.precision,
        report.ceaf_e.recall,
        report.ceaf_e.f1,
        report.conll
    )
}

/// Score a system clustering file against a gold one and print the report.
pub fn cmd_score(gold_path: &Path, sys_path: &Path) -> Result<ScoreReport, CliError> {
    let gold = load_clusterings(gold_path)?;
    let sys = load_clusterings(sys_path)?;
    let report = score_corpus(&gold, &sys).map_err(CliError::user)?;
    Ok(report)
}

/// Derive the gold clustering file for a document file; convenience for
/// preparing `score` inputs.
pub fn write_gold_clusterings(docs: &[Document], out: &mut impl Write) -> Result<(), CliError> {
    for doc in docs {
        let clustering = gold_clustering(doc).map_err(CliError::user)?;
        serde_json::to_writer(&mut *out, &clustering).map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(out).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(())
}
