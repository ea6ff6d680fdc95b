//! Shared fixtures for the integration and acceptance suites: synthetic
//! corpora with known structure, plus brute-force metric oracles.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xlcoref::corpus::{Clustering, Document, EntityType, Mention, MentionType, Token};
use xlcoref::embeddings::VectorStore;
use xlcoref::features::MentionPairFeatures;

/// Build a document where every mention is a single-token span occupying
/// its own sentence. `surfaces[i]` is mention i's token text,
/// `golds[i]` its gold entity label.
pub fn one_token_per_sentence_doc(
    doc_id: &str,
    language: &str,
    surfaces: &[String],
    golds: &[&str],
    m_types: &[MentionType],
    e_types: &[EntityType],
) -> Document {
    let tokens: Vec<Token> = surfaces
        .iter()
        .enumerate()
        .map(|(i, text)| Token {
            text: text.clone(),
            sentence_index: i,
            token_index_in_doc: i,
        })
        .collect();
    let mentions: Vec<Mention> = surfaces
        .iter()
        .enumerate()
        .map(|(i, _)| Mention {
            id: format!("m{i}"),
            start_token: i,
            end_token: i,
            m_type: m_types[i],
            e_type: e_types[i],
            gold_entity_id: Some(golds[i].to_string()),
        })
        .collect();
    Document {
        doc_id: doc_id.to_string(),
        language: language.to_string(),
        tokens,
        mentions,
    }
}

/// Toy corpus separable through string features alone: coreferent mentions
/// share their surface form, distinct entities never do. Surfaces are
/// globally unique fixed-length words so no accidental substring fires.
pub fn string_toy_docs(n_docs: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut surface_counter = seed as usize * 1000;
    let mut docs = Vec::new();
    for d in 0..n_docs {
        let n_entities = rng.gen_range(2..=3);
        let mut slots: Vec<(String, String)> = Vec::new(); // (surface, gold)
        for e in 0..n_entities {
            let surface = format!("ent{surface_counter:05}");
            surface_counter += 1;
            let mentions = rng.gen_range(2..=3);
            for _ in 0..mentions {
                slots.push((surface.clone(), format!("E{e}")));
            }
        }
        // interleave entities
        shuffle(&mut slots, &mut rng);
        let surfaces: Vec<String> = slots.iter().map(|(s, _)| s.clone()).collect();
        let golds: Vec<&str> = slots.iter().map(|(_, g)| g.as_str()).collect();
        let n = surfaces.len();
        docs.push(one_token_per_sentence_doc(
            &format!("toy{seed}_{d}"),
            "en",
            &surfaces,
            &golds,
            &vec![MentionType::Name; n],
            &vec![EntityType::PER; n],
        ));
    }
    docs
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

pub const EMBED_TOY_DIM: usize = 8;
pub const EMBED_TOY_CONCEPTS: usize = 4;

/// Two synthetic "languages" whose embeddings differ by a known orthogonal
/// map. Mention surfaces are globally unique so string features carry no
/// signal; only embedding similarity distinguishes coreferent mentions.
pub struct CrossLingualToy {
    pub en_store: VectorStore,
    pub src_store: VectorStore,
    /// The map applied to English vectors to produce source vectors; the
    /// projection fit should recover its inverse (= transpose).
    pub map: DMatrix<f64>,
    pub lexicon: xlcoref::embeddings::BilingualLexicon,
    pub en_docs: Vec<Document>,
    pub src_docs: Vec<Document>,
}

pub fn cross_lingual_toy(seed: u64) -> CrossLingualToy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = EMBED_TOY_DIM;

    // orthogonal map between the two spaces
    let raw = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    let map = raw.qr().q();

    let concept_vec = |c: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[c] = 1.0;
        for x in v.iter_mut() {
            *x += rng.gen_range(-0.02..0.02);
        }
        v
    };
    let apply = |m: &DMatrix<f64>, v: &[f64]| -> Vec<f64> {
        (m * nalgebra::DVector::from_column_slice(v)).iter().copied().collect()
    };

    let mut en_store = VectorStore::new(d);
    let mut src_store = VectorStore::new(d);
    let mut lexicon = xlcoref::embeddings::BilingualLexicon::default();

    // 200 lexicon pairs with random vectors, linked exactly by the map
    for i in 0..200 {
        let en_word = format!("lex{i:03}");
        let src_word = format!("blx{i:03}");
        let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = apply(&map, &z);
        en_store.insert(en_word.clone(), z);
        src_store.insert(src_word.clone(), x);
        lexicon.pairs.push((src_word, en_word));
    }

    // per-concept vocabularies, one unique word per mention slot
    let words_per_concept = 24;
    for c in 0..EMBED_TOY_CONCEPTS {
        for k in 0..words_per_concept {
            let z = concept_vec(c, &mut rng);
            en_store.insert(format!("enw{c}{k:02}"), z);
            let z = concept_vec(c, &mut rng);
            src_store.insert(format!("srw{c}{k:02}"), apply(&map, &z));
        }
    }

    let make_docs = |prefix: &str, lang: &str, n_docs: usize, rng: &mut ChaCha8Rng| -> Vec<Document> {
        let mut docs = Vec::new();
        let mut next_word: Vec<usize> = vec![0; EMBED_TOY_CONCEPTS];
        for doc_idx in 0..n_docs {
            let mut concepts: Vec<usize> = (0..EMBED_TOY_CONCEPTS).collect();
            shuffle(&mut concepts, rng);
            concepts.truncate(3);
            let mut slots: Vec<(String, String)> = Vec::new();
            for &c in &concepts {
                for _ in 0..3 {
                    let k = next_word[c];
                    next_word[c] = (k + 1) % words_per_concept;
                    slots.push((format!("{prefix}{c}{k:02}"), format!("C{c}")));
                }
            }
            shuffle(&mut slots, rng);
            let surfaces: Vec<String> = slots.iter().map(|(s, _)| s.clone()).collect();
            let golds: Vec<&str> = slots.iter().map(|(_, g)| g.as_str()).collect();
            let n = surfaces.len();
            docs.push(one_token_per_sentence_doc(
                &format!("{lang}doc{doc_idx}"),
                lang,
                &surfaces,
                &golds,
                &vec![MentionType::Name; n],
                &vec![EntityType::PER; n],
            ));
        }
        docs
    };

    let en_docs = make_docs("enw", "en", 12, &mut rng);
    let src_docs = make_docs("srw", "xx", 6, &mut rng);

    CrossLingualToy {
        en_store,
        src_store,
        map,
        lexicon,
        en_docs,
        src_docs,
    }
}

pub fn random_features(rng: &mut ChaCha8Rng, word_dim: usize) -> MentionPairFeatures {
    MentionPairFeatures {
        substring_ij: rng.gen(),
        substring_ji: rng.gen(),
        exact_match: false,
        word_distance_bin: rng.gen_range(0..xlcoref::features::WORD_DISTANCE_BINS),
        sentence_distance_bin: rng.gen_range(0..xlcoref::features::SENTENCE_DISTANCE_BINS),
        m_type_pair: rng.gen_range(0..4),
        e_type_pair: rng.gen_range(0..25),
        acronym: rng.gen(),
        first_name_mismatch: rng.gen(),
        speaker_i: rng.gen(),
        speaker_j: rng.gen(),
        avg_embedding_i: (0..word_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        avg_embedding_j: (0..word_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

/// Random partition of `n_mentions` into at most `max_clusters` parts.
pub fn random_clustering(
    doc_id: &str,
    n_mentions: usize,
    max_clusters: usize,
    rng: &mut ChaCha8Rng,
) -> Clustering {
    let k = rng.gen_range(1..=max_clusters);
    let mut clusters: Vec<Vec<String>> = vec![Vec::new(); k];
    for m in 0..n_mentions {
        let c = rng.gen_range(0..k);
        clusters[c].push(format!("m{m}"));
    }
    clusters.retain(|c| !c.is_empty());
    Clustering {
        doc_id: doc_id.to_string(),
        clusters,
    }
}

/// Serialize a document into the on-disk JSONL record shape, with
/// sentence-relative mention spans.
pub fn doc_to_json(doc: &Document) -> String {
    let mut sentences: Vec<Vec<String>> = Vec::new();
    let mut sentence_offsets: Vec<usize> = Vec::new();
    for token in &doc.tokens {
        if token.sentence_index == sentences.len() {
            sentences.push(Vec::new());
            sentence_offsets.push(token.token_index_in_doc);
        }
        sentences[token.sentence_index].push(token.text.clone());
    }
    let mentions: Vec<serde_json::Value> = doc
        .mentions
        .iter()
        .map(|m| {
            let sent = doc.tokens[m.start_token].sentence_index;
            let offset = sentence_offsets[sent];
            serde_json::json!({
                "id": m.id,
                "sent": sent,
                "start": m.start_token - offset,
                "end": m.end_token - offset,
                "m_type": match m.m_type {
                    MentionType::Name => "name",
                    MentionType::Nominal => "nominal",
                },
                "e_type": match m.e_type {
                    EntityType::PER => "PER",
                    EntityType::ORG => "ORG",
                    EntityType::GPE => "GPE",
                    EntityType::LOC => "LOC",
                    EntityType::FAC => "FAC",
                },
                "gold_entity": m.gold_entity_id,
            })
        })
        .collect();
    serde_json::json!({
        "doc_id": doc.doc_id,
        "language": doc.language,
        "sentences": sentences,
        "mentions": mentions,
    })
    .to_string()
}

/// Random but structurally valid document for decoder stress tests.
pub fn fuzz_document(doc_id: &str, rng: &mut ChaCha8Rng) -> Document {
    let e_types = [
        EntityType::PER,
        EntityType::ORG,
        EntityType::GPE,
        EntityType::LOC,
        EntityType::FAC,
    ];
    let words = ["aa", "bb", "cc", "Aa", "AA", "BB", "aa bb", "x"];
    let n_sentences = rng.gen_range(1..=4);
    let mut tokens = Vec::new();
    let mut sentence_spans: Vec<(usize, usize)> = Vec::new();
    for s in 0..n_sentences {
        let start = tokens.len();
        for _ in 0..rng.gen_range(1..=6) {
            tokens.push(Token {
                text: words[rng.gen_range(0..words.len())].to_string(),
                sentence_index: s,
                token_index_in_doc: tokens.len(),
            });
        }
        sentence_spans.push((start, tokens.len() - 1));
    }
    let n_mentions = rng.gen_range(0..=10);
    let mentions = (0..n_mentions)
        .map(|i| {
            let (lo, hi) = sentence_spans[rng.gen_range(0..sentence_spans.len())];
            let start = rng.gen_range(lo..=hi);
            let end = rng.gen_range(start..=hi);
            Mention {
                id: format!("m{i}"),
                start_token: start,
                end_token: end,
                m_type: if rng.gen() { MentionType::Name } else { MentionType::Nominal },
                e_type: e_types[rng.gen_range(0..e_types.len())],
                gold_entity_id: Some(format!("E{}", rng.gen_range(0..4))),
            }
        })
        .collect();
    Document {
        doc_id: doc_id.to_string(),
        language: "xx".to_string(),
        tokens,
        mentions,
    }
}

// ---- brute-force metric oracles, independent of the implementation ----

fn co_cluster(clustering: &Clustering, a: &str, b: &str) -> bool {
    clustering
        .clusters
        .iter()
        .any(|c| c.iter().any(|x| x == a) && c.iter().any(|x| x == b))
}

/// MUC recall numerator/denominator by explicit link counting: for each
/// key cluster, count the links of a spanning tree and how many survive in
/// the response (via union-find over response co-membership).
pub fn oracle_muc_fraction(key: &Clustering, response: &Clustering) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for cluster in &key.clusters {
        den += (cluster.len() as f64) - 1.0;
        // connected components of the cluster under response equivalence
        let n = cluster.len();
        let mut component: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                if co_cluster(response, &cluster[i], &cluster[j]) {
                    let (a, b) = (component[i], component[j]);
                    if a != b {
                        for c in component.iter_mut() {
                            if *c == b {
                                *c = a;
                            }
                        }
                    }
                }
            }
        }
        let distinct: std::collections::HashSet<usize> = component.into_iter().collect();
        num += (n - distinct.len()) as f64;
    }
    (num, den)
}

/// Per-mention B³ recall numerator (denominator is the mention count).
pub fn oracle_b3_numerator(key: &Clustering, response: &Clustering) -> f64 {
    let mentions: Vec<&String> = key.clusters.iter().flatten().collect();
    let mut num = 0.0;
    for m in &mentions {
        let key_cluster: Vec<&String> = mentions
            .iter()
            .copied()
            .filter(|x| co_cluster(key, m, x))
            .collect();
        let both = key_cluster
            .iter()
            .filter(|x| co_cluster(response, m, x))
            .count();
        num += both as f64 / key_cluster.len() as f64;
    }
    num
}

fn oracle_phi4(a: &[String], b: &[String]) -> f64 {
    let overlap = a.iter().filter(|x| b.contains(x)).count();
    2.0 * overlap as f64 / (a.len() + b.len()) as f64
}

/// Best total phi4 over all one-to-one alignments, by exhaustive
/// enumeration.
pub fn oracle_ceaf_phi(gold: &Clustering, sys: &Clustering) -> f64 {
    fn recurse(gold: &[Vec<String>], sys: &[Vec<String>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == gold.len() {
            return 0.0;
        }
        // leaving this row unmatched is allowed
        let mut best = recurse(gold, sys, row + 1, used);
        for (c, u) in used.clone().iter().enumerate() {
            if !u {
                used[c] = true;
                let total = oracle_phi4(&gold[row], &sys[c]) + recurse(gold, sys, row + 1, used);
                used[c] = false;
                best = best.max(total);
            }
        }
        best
    }
    let mut used = vec![false; sys.clusters.len()];
    recurse(&gold.clusters, &sys.clusters, 0, &mut used)
}

/// Best assignment total by exhaustive search, matching every row when
/// rows <= cols.
pub fn oracle_assignment_total(matrix: &[Vec<f64>]) -> f64 {
    fn recurse(matrix: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == matrix.len() {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                best = best.max(matrix[row][c] + recurse(matrix, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    let cols = matrix.first().map_or(0, |r| r.len());
    if matrix.is_empty() || cols == 0 {
        return 0.0;
    }
    let mut used = vec![false; cols];
    recurse(matrix, 0, &mut used)
}
