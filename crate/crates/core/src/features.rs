//! Language-independent mention-pair features.
//!
//! Every feature here is computable from token strings, span positions and
//! the mention/entity types alone; nothing inspects the document language.

use std::collections::HashSet;

use thiserror::Error;

use crate::corpus::{Document, EntityType, Mention, MentionType};
use crate::embeddings::VectorStore;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("mention `{0}` does not belong to the document")]
    ForeignMention(String),
}

/// Number of categorical features, in the fixed order of
/// [`MentionPairFeatures::categorical_indices`].
pub const NUM_CATEGORICAL_FEATURES: usize = 11;

/// Cardinality of each categorical feature, same order.
pub const CATEGORICAL_CARDINALITIES: [usize; NUM_CATEGORICAL_FEATURES] =
    [2, 2, 2, WORD_DISTANCE_BINS, SENTENCE_DISTANCE_BINS, 4, 25, 2, 2, 2, 2];

/// Upper edges of the word-distance bins; a distance d falls in the first
/// bin whose edge is >= d. The last bin is unbounded.
pub const WORD_DISTANCE_EDGES: [usize; 9] = [0, 1, 2, 3, 4, 7, 15, 31, 63];
pub const WORD_DISTANCE_BINS: usize = WORD_DISTANCE_EDGES.len() + 1;

pub const SENTENCE_DISTANCE_EDGES: [usize; 4] = [0, 1, 2, 3];
pub const SENTENCE_DISTANCE_BINS: usize = SENTENCE_DISTANCE_EDGES.len() + 1;

/// Index in 0..4 for an ordered (m_type, m_type) pair, matching the order
/// of the model's four attention weights.
pub fn m_type_pair_index(t1: MentionType, t2: MentionType) -> usize {
    match (t1, t2) {
        (MentionType::Name, MentionType::Name) => 0,
        (MentionType::Name, MentionType::Nominal) => 1,
        (MentionType::Nominal, MentionType::Nominal) => 2,
        (MentionType::Nominal, MentionType::Name) => 3,
    }
}

/// The feature vector for an ordered mention pair (mi, mj).
#[derive(Debug, Clone, PartialEq)]
pub struct MentionPairFeatures {
    pub substring_ij: bool,
    pub substring_ji: bool,
    pub exact_match: bool,
    pub word_distance_bin: usize,
    pub sentence_distance_bin: usize,
    pub m_type_pair: usize,
    pub e_type_pair: usize,
    pub acronym: bool,
    pub first_name_mismatch: bool,
    pub speaker_i: bool,
    pub speaker_j: bool,
    pub avg_embedding_i: Vec<f64>,
    pub avg_embedding_j: Vec<f64>,
}

impl MentionPairFeatures {
    /// The categorical feature values as row indices into the model's
    /// embedding tables, in the fixed field order.
    pub fn categorical_indices(&self) -> [usize; NUM_CATEGORICAL_FEATURES] {
        [
            self.substring_ij as usize,
            self.substring_ji as usize,
            self.exact_match as usize,
            self.word_distance_bin,
            self.sentence_distance_bin,
            self.m_type_pair,
            self.e_type_pair,
            self.acronym as usize,
            self.first_name_mismatch as usize,
            self.speaker_i as usize,
            self.speaker_j as usize,
        ]
    }
}

/// Words whose nearby presence marks a mention as appearing in a speech
/// context.
#[derive(Debug, Clone)]
pub struct SpeechLexicon {
    words: HashSet<String>,
}

impl Default for SpeechLexicon {
    fn default() -> Self {
        let words = [
            "say", "says", "said", "saying", "tell", "tells", "told", "ask", "asks", "asked",
            "speak", "speaks", "spoke", "according",
        ];
        SpeechLexicon {
            words: words.iter().map(|w| w.to_string()).collect(),
        }
    }
}

impl SpeechLexicon {
    pub fn empty() -> Self {
        SpeechLexicon {
            words: HashSet::new(),
        }
    }

    /// One lowercase word per line.
    pub fn from_lines<'a>(lines: impl Iterator<Item = &'a str>) -> Self {
        SpeechLexicon {
            words: lines
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }
}

/// Window, in tokens on each side of a span, searched for speech words.
pub const SPEAKER_WINDOW: usize = 5;

fn joined_text(doc: &Document, m: &Mention) -> String {
    doc.mention_tokens(m).join(" ").to_lowercase()
}

/// True iff `a` is a single all-uppercase token of length >= 2 matching the
/// initials of `b`'s tokens, or those initials each doubled (so "EEUU"
/// matches "Estados Unidos"). `b` must have at least two tokens.
pub fn is_acronym(a: &[&str], b: &[&str]) -> bool {
    if a.len() != 1 || b.len() < 2 {
        return false;
    }
    let cand = a[0];
    if cand.chars().count() < 2 || !cand.chars().all(|c| c.is_uppercase() && c.is_alphabetic()) {
        return false;
    }
    let initials: Vec<char> = b
        .iter()
        .filter_map(|t| t.chars().next())
        .flat_map(|c| c.to_uppercase())
        .collect();
    let plain: String = initials.iter().collect();
    let doubled: String = initials.iter().flat_map(|c| [*c, *c]).collect();
    cand == plain || cand == doubled
}

/// True iff both mentions are PER, both spans have >= 2 tokens, the last
/// tokens match case-insensitively and the first tokens differ.
pub fn first_name_mismatch(mi: &Mention, mj: &Mention, doc: &Document) -> bool {
    if mi.e_type != EntityType::PER || mj.e_type != EntityType::PER {
        return false;
    }
    let a = doc.mention_tokens(mi);
    let b = doc.mention_tokens(mj);
    if a.len() < 2 || b.len() < 2 {
        return false;
    }
    let same_last = a.last().unwrap().to_lowercase() == b.last().unwrap().to_lowercase();
    let diff_first = a[0].to_lowercase() != b[0].to_lowercase();
    same_last && diff_first
}

/// True iff a speech word occurs within [`SPEAKER_WINDOW`] tokens on either
/// side of the span, excluding the span itself.
pub fn speaker_context(m: &Mention, doc: &Document, lexicon: &SpeechLexicon) -> bool {
    let lo = m.start_token.saturating_sub(SPEAKER_WINDOW);
    let hi = (m.end_token + SPEAKER_WINDOW).min(doc.tokens.len().saturating_sub(1));
    doc.tokens[lo..=hi]
        .iter()
        .filter(|t| t.token_index_in_doc < m.start_token || t.token_index_in_doc > m.end_token)
        .any(|t| lexicon.contains(&t.text))
}

fn bin_index(distance: usize, edges: &[usize]) -> usize {
    edges
        .iter()
        .position(|&edge| distance <= edge)
        .unwrap_or(edges.len())
}

/// Word and sentence distance bins for a mention pair. Distances are
/// measured between start tokens and are symmetric in the arguments.
pub fn distance_bins(mi: &Mention, mj: &Mention, doc: &Document) -> (usize, usize) {
    let word_dist = mi.start_token.abs_diff(mj.start_token);
    let sent_dist = doc.mention_sentence(mi).abs_diff(doc.mention_sentence(mj));
    (
        bin_index(word_dist, &WORD_DISTANCE_EDGES),
        bin_index(sent_dist, &SENTENCE_DISTANCE_EDGES),
    )
}

/// Compute the full feature vector for the ordered pair (mi, mj).
pub fn extract_pair_features(
    mi: &Mention,
    mj: &Mention,
    doc: &Document,
    store: &VectorStore,
    speech: &SpeechLexicon,
) -> Result<MentionPairFeatures, FeatureError> {
    for m in [mi, mj] {
        if doc.mention_by_id(&m.id) != Some(m) {
            return Err(FeatureError::ForeignMention(m.id.clone()));
        }
    }

    let text_i = joined_text(doc, mi);
    let text_j = joined_text(doc, mj);
    let tokens_i = doc.mention_tokens(mi);
    let tokens_j = doc.mention_tokens(mj);
    let (word_bin, sent_bin) = distance_bins(mi, mj, doc);

    Ok(MentionPairFeatures {
        substring_ij: text_j.contains(&text_i),
        substring_ji: text_i.contains(&text_j),
        exact_match: text_i == text_j,
        word_distance_bin: word_bin,
        sentence_distance_bin: sent_bin,
        m_type_pair: m_type_pair_index(mi.m_type, mj.m_type),
        e_type_pair: mi.e_type.index() * 5 + mj.e_type.index(),
        acronym: is_acronym(&tokens_i, &tokens_j) || is_acronym(&tokens_j, &tokens_i),
        first_name_mismatch: first_name_mismatch(mi, mj, doc),
        speaker_i: speaker_context(mi, doc, speech),
        speaker_j: speaker_context(mj, doc, speech),
        avg_embedding_i: store
            .average_embedding(&tokens_i)
            .expect("mention spans are nonempty"),
        avg_embedding_j: store
            .average_embedding(&tokens_j)
            .expect("mention spans are nonempty"),
    })
}
