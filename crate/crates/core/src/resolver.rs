//! Entity-centric incremental merging.
//!
//! Mentions are seeded as singleton entities in processing order and merged
//! in three phases: names against earlier names, nominals against entities
//! sharing a sentence, then nominals with no sentence restriction. Training
//! uses gold merges (teacher forcing); decoding merges the best-scoring
//! antecedent above a threshold, in place, so later comparisons see merged
//! entities.

use std::collections::BTreeSet;

use crate::corpus::{sort_mentions, CorpusError, Document, Entity, MentionType};
use crate::embeddings::VectorStore;
use crate::features::SpeechLexicon;
use crate::model::{forward, ModelConfig, ModelError, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergePhase {
    /// Names against earlier names.
    Names,
    /// Nominals against entities with a mention in a shared sentence.
    NominalsSameSentence,
    /// Remaining nominals, no sentence restriction.
    NominalsAnywhere,
}

#[derive(Debug, Clone)]
pub struct TrainingTriplet {
    pub entity_a: Entity,
    pub entity_b: Entity,
    pub label: u8,
    pub doc_id: String,
    pub phase: MergePhase,
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    /// Merge only when the best antecedent scores strictly above this.
    pub threshold: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig { threshold: 0.5 }
    }
}

/// Scoring interface for decoding; the production implementation wraps the
/// neural model, tests may substitute fixed scores.
pub trait EntityScorer {
    fn score(&self, current: &Entity, antecedent: &Entity, doc: &Document) -> Result<f64, ModelError>;
}

pub struct ModelScorer<'a> {
    pub params: &'a ModelParams,
    pub store: &'a VectorStore,
    pub speech: &'a SpeechLexicon,
    pub config: &'a ModelConfig,
}

impl EntityScorer for ModelScorer<'_> {
    fn score(&self, current: &Entity, antecedent: &Entity, doc: &Document) -> Result<f64, ModelError> {
        let (prob, _) = forward(
            current,
            antecedent,
            doc,
            self.store,
            self.speech,
            self.params,
            self.config,
        )?;
        Ok(prob)
    }
}

/// One partially built entity during merging.
#[derive(Debug, Clone)]
struct Slot {
    entity: Entity,
    sentences: BTreeSet<usize>,
    earliest_start: usize,
    gold: Option<String>,
    alive: bool,
}

struct MergeState {
    slots: Vec<Slot>,
    names: usize,
}

impl MergeState {
    fn new(doc: &Document) -> Self {
        let sorted = sort_mentions(doc);
        let names = sorted.iter().filter(|m| m.m_type == MentionType::Name).count();
        let slots = sorted
            .iter()
            .enumerate()
            .map(|(i, m)| Slot {
                entity: Entity {
                    id: i,
                    mention_ids: vec![m.id.clone()],
                    e_type: m.e_type,
                },
                sentences: BTreeSet::from([doc.mention_sentence(m)]),
                earliest_start: m.start_token,
                gold: m.gold_entity_id.clone(),
                alive: true,
            })
            .collect();
        MergeState { slots, names }
    }

    /// Merge the entity at `from` into the entity at `into`.
    fn merge(&mut self, from: usize, into: usize) {
        let (mention_ids, sentences, earliest) = {
            let slot = &mut self.slots[from];
            slot.alive = false;
            (
                std::mem::take(&mut slot.entity.mention_ids),
                std::mem::take(&mut slot.sentences),
                slot.earliest_start,
            )
        };
        let target = &mut self.slots[into];
        target.entity.mention_ids.extend(mention_ids);
        target.sentences.extend(sentences);
        target.earliest_start = target.earliest_start.min(earliest);
    }

    /// Alive antecedents of slot `i` that share its e_type, optionally
    /// restricted to entities with a mention in one of its sentences.
    fn candidates(&self, i: usize, same_sentence: bool) -> Vec<usize> {
        let focus = &self.slots[i];
        (0..i)
            .filter(|&j| {
                let s = &self.slots[j];
                s.alive
                    && s.entity.e_type == focus.entity.e_type
                    && (!same_sentence || !s.sentences.is_disjoint(&focus.sentences))
            })
            .collect()
    }

    fn phases(&self) -> [(MergePhase, std::ops::Range<usize>, bool); 3] {
        let n = self.slots.len();
        [
            (MergePhase::Names, 0..self.names, false),
            (MergePhase::NominalsSameSentence, self.names..n, true),
            (MergePhase::NominalsAnywhere, self.names..n, false),
        ]
    }

    fn into_clustering(self, doc_id: String) -> crate::corpus::Clustering {
        crate::corpus::Clustering {
            doc_id,
            clusters: self
                .slots
                .into_iter()
                .filter(|s| s.alive)
                .map(|s| s.entity.mention_ids)
                .collect(),
        }
    }
}

/// Generate gold-labelled training triplets with the three-phase schedule,
/// merging gold-coreferent entities as they are encountered so snapshots
/// reflect partially built entities.
pub fn generate_training_triplets(doc: &Document) -> Result<Vec<TrainingTriplet>, CorpusError> {
    let mut state = MergeState::new(doc);
    for slot in &state.slots {
        if slot.gold.is_none() {
            return Err(CorpusError::MissingGold {
                doc_id: doc.doc_id.clone(),
                mention_id: slot.entity.mention_ids[0].clone(),
            });
        }
    }

    let mut triplets = Vec::new();
    for (phase, range, same_sentence) in state.phases() {
        for i in range {
            if !state.slots[i].alive {
                continue;
            }
            let mut merge_into = None;
            for j in state.candidates(i, same_sentence) {
                let label = (state.slots[i].gold == state.slots[j].gold) as u8;
                triplets.push(TrainingTriplet {
                    entity_a: state.slots[i].entity.clone(),
                    entity_b: state.slots[j].entity.clone(),
                    label,
                    doc_id: doc.doc_id.clone(),
                    phase,
                });
                if label == 1 {
                    // gold-pure entities: at most one coreferent antecedent
                    merge_into = Some(j);
                }
            }
            if let Some(j) = merge_into {
                state.merge(i, j);
            }
        }
    }
    Ok(triplets)
}

/// Decode a document with an arbitrary scorer: per phase, each entity
/// merges with its highest-scoring candidate antecedent when the score is
/// above the threshold. Ties go to the antecedent nearest in word distance,
/// then to the later-seeded one.
pub fn decode_with_scorer<S: EntityScorer>(
    doc: &Document,
    scorer: &S,
    config: &DecoderConfig,
) -> Result<crate::corpus::Clustering, ModelError> {
    let mut state = MergeState::new(doc);
    for (_phase, range, same_sentence) in state.phases() {
        for i in range {
            if !state.slots[i].alive {
                continue;
            }
            let mut best: Option<(f64, usize, usize)> = None; // (prob, distance, j)
            for j in state.candidates(i, same_sentence) {
                let prob = scorer.score(&state.slots[i].entity, &state.slots[j].entity, doc)?;
                let dist = state.slots[i]
                    .earliest_start
                    .abs_diff(state.slots[j].earliest_start);
                let better = match &best {
                    None => true,
                    Some((bp, bd, _)) => prob > *bp || (prob == *bp && dist <= *bd),
                };
                if better {
                    best = Some((prob, dist, j));
                }
            }
            if let Some((prob, _, j)) = best {
                if prob > config.threshold {
                    state.merge(i, j);
                }
            }
        }
    }
    Ok(state.into_clustering(doc.doc_id.clone()))
}

/// Decode with the trained neural scorer.
pub fn decode(
    doc: &Document,
    params: &ModelParams,
    store: &VectorStore,
    speech: &SpeechLexicon,
    model_config: &ModelConfig,
    config: &DecoderConfig,
) -> Result<crate::corpus::Clustering, ModelError> {
    let scorer = ModelScorer {
        params,
        store,
        speech,
        config: model_config,
    };
    decode_with_scorer(doc, &scorer, config)
}
