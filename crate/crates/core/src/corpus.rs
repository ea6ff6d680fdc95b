//! Document data model and ingestion.
//!
//! Documents arrive pre-tokenized as one JSON object per line with gold
//! mention boundaries and types. Spans in the file are sentence-relative and
//! are converted to document-level token indices at parse time.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("doc {doc_id}: malformed record: {reason}")]
    Malformed { doc_id: String, reason: String },
    #[error("invalid JSON record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("doc {doc_id}: duplicate mention id `{mention_id}`")]
    DuplicateMentionId { doc_id: String, mention_id: String },
    #[error("doc {doc_id}: mention `{mention_id}` out of bounds: {reason}")]
    SpanOutOfBounds {
        doc_id: String,
        mention_id: String,
        reason: String,
    },
    #[error("doc {doc_id}: mention `{mention_id}` has no gold entity label")]
    MissingGold { doc_id: String, mention_id: String },
    #[error("doc {doc_id}: invalid clustering: {reason}")]
    InvalidClustering { doc_id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionType {
    Name,
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityType {
    PER,
    ORG,
    GPE,
    LOC,
    FAC,
}

impl EntityType {
    pub const ALL: [EntityType; 5] = [
        EntityType::PER,
        EntityType::ORG,
        EntityType::GPE,
        EntityType::LOC,
        EntityType::FAC,
    ];

    /// Stable index in 0..5, used to key the e_type-pair feature.
    pub fn index(self) -> usize {
        match self {
            EntityType::PER => 0,
            EntityType::ORG => 1,
            EntityType::GPE => 2,
            EntityType::LOC => 3,
            EntityType::FAC => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub sentence_index: usize,
    pub token_index_in_doc: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub id: String,
    /// Document-level token index of the first token (inclusive).
    pub start_token: usize,
    /// Document-level token index of the last token (inclusive).
    pub end_token: usize,
    pub m_type: MentionType,
    pub e_type: EntityType,
    pub gold_entity_id: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Document {
    pub doc_id: String,
    pub language: String,
    pub tokens: Vec<Token>,
    pub mentions: Vec<Mention>,
}

/// A partially constructed cluster of mentions, built during merging.
#[derive(Debug, Clone)]
pub struct Entity {
    pub id: usize,
    /// Mention ids in the order they joined the entity.
    pub mention_ids: Vec<String>,
    pub e_type: EntityType,
}

/// A partition of a document's mentions, carrier for both gold and system
/// output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Clustering {
    pub doc_id: String,
    pub clusters: Vec<Vec<String>>,
}

impl Clustering {
    /// All mention ids covered, or an error if any id appears twice or a
    /// cluster is empty.
    pub fn validate(&self) -> Result<HashSet<&str>, CorpusError> {
        let mut seen = HashSet::new();
        for cluster in &self.clusters {
            if cluster.is_empty() {
                return Err(CorpusError::InvalidClustering {
                    doc_id: self.doc_id.clone(),
                    reason: "empty cluster".into(),
                });
            }
            for id in cluster {
                if !seen.insert(id.as_str()) {
                    return Err(CorpusError::InvalidClustering {
                        doc_id: self.doc_id.clone(),
                        reason: format!("mention id `{id}` appears twice"),
                    });
                }
            }
        }
        Ok(seen)
    }
}

#[derive(Deserialize)]
struct RawMention {
    id: String,
    sent: usize,
    start: usize,
    end: usize,
    m_type: MentionType,
    e_type: EntityType,
    #[serde(default)]
    gold_entity: Option<String>,
}

#[derive(Deserialize)]
struct RawDocument {
    doc_id: String,
    language: String,
    sentences: Vec<Vec<String>>,
    mentions: Vec<RawMention>,
}

/// Parse one line of the document file into a validated [`Document`].
pub fn parse_document(record: &str) -> Result<Document, CorpusError> {
    let raw: RawDocument = serde_json::from_str(record)?;
    let doc_id = raw.doc_id;

    let mut tokens = Vec::new();
    // first document-level token index of each sentence
    let mut sentence_offsets = Vec::with_capacity(raw.sentences.len());
    for (sent_idx, sentence) in raw.sentences.iter().enumerate() {
        sentence_offsets.push(tokens.len());
        for word in sentence {
            tokens.push(Token {
                text: word.clone(),
                sentence_index: sent_idx,
                token_index_in_doc: tokens.len(),
            });
        }
    }

    let mut mentions = Vec::with_capacity(raw.mentions.len());
    let mut seen_ids = HashSet::new();
    for m in raw.mentions {
        if !seen_ids.insert(m.id.clone()) {
            return Err(CorpusError::DuplicateMentionId {
                doc_id,
                mention_id: m.id,
            });
        }
        let sentence = raw.sentences.get(m.sent).ok_or_else(|| CorpusError::SpanOutOfBounds {
            doc_id: doc_id.clone(),
            mention_id: m.id.clone(),
            reason: format!("sentence index {} out of range", m.sent),
        })?;
        if m.start > m.end {
            return Err(CorpusError::SpanOutOfBounds {
                doc_id,
                mention_id: m.id,
                reason: format!("start {} > end {}", m.start, m.end),
            });
        }
        if m.end >= sentence.len() {
            return Err(CorpusError::SpanOutOfBounds {
                doc_id,
                mention_id: m.id,
                reason: format!(
                    "end token {} outside sentence of length {}",
                    m.end,
                    sentence.len()
                ),
            });
        }
        let offset = sentence_offsets[m.sent];
        mentions.push(Mention {
            id: m.id,
            start_token: offset + m.start,
            end_token: offset + m.end,
            m_type: m.m_type,
            e_type: m.e_type,
            gold_entity_id: m.gold_entity,
        });
    }

    Ok(Document {
        doc_id,
        language: raw.language,
        tokens,
        mentions,
    })
}

impl Document {
    /// Token texts of a mention span.
    pub fn mention_tokens(&self, m: &Mention) -> Vec<&str> {
        self.tokens[m.start_token..=m.end_token]
            .iter()
            .map(|t| t.text.as_str())
            .collect()
    }

    /// Sentence index of a mention (taken from its first token).
    pub fn mention_sentence(&self, m: &Mention) -> usize {
        self.tokens[m.start_token].sentence_index
    }

    pub fn mention_by_id(&self, id: &str) -> Option<&Mention> {
        self.mentions.iter().find(|m| m.id == id)
    }
}

/// Sort mentions into processing order: all names before all nominals,
/// within each group ascending by start token, ties broken by shorter span.
pub fn sort_mentions(doc: &Document) -> Vec<Mention> {
    let mut out = doc.mentions.clone();
    out.sort_by_key(|m| (m.m_type, m.start_token, m.end_token));
    out
}

/// Group mentions by their gold entity label.
pub fn gold_clustering(doc: &Document) -> Result<Clustering, CorpusError> {
    let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for m in &doc.mentions {
        let gold = m.gold_entity_id.as_deref().ok_or_else(|| CorpusError::MissingGold {
            doc_id: doc.doc_id.clone(),
            mention_id: m.id.clone(),
        })?;
        groups.entry(gold).or_default().push(m.id.clone());
    }
    Ok(Clustering {
        doc_id: doc.doc_id.clone(),
        clusters: groups.into_values().collect(),
    })
}
