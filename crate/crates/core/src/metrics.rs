//! Coreference evaluation: MUC, B³, CEAF-e and their average (the CoNLL
//! score). Corpus scores are micro-averaged by accumulating numerators and
//! denominators over documents.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::corpus::Clustering;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("doc {doc_id}: gold and system mention universes differ")]
    UniverseMismatch { doc_id: String },
    #[error("document `{doc_id}` present in only one of the two inputs")]
    DocMismatch { doc_id: String },
    #[error(transparent)]
    InvalidClustering(#[from] crate::corpus::CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_fractions(p_num: f64, p_den: f64, r_num: f64, r_den: f64) -> Prf {
        let precision = ratio(p_num, p_den);
        let recall = ratio(r_num, r_den);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_e: Prf,
    pub conll: f64,
}

/// Arithmetic mean of the three F1 values.
pub fn conll_score(muc: &Prf, b_cubed: &Prf, ceaf_e: &Prf) -> f64 {
    (muc.f1 + b_cubed.f1 + ceaf_e.f1) / 3.0
}

/// Numerator/denominator accumulator for micro-averaged corpus scores.
#[derive(Debug, Clone, Default)]
pub struct ScoreAccumulator {
    muc_r_num: f64,
    muc_r_den: f64,
    muc_p_num: f64,
    muc_p_den: f64,
    b3_r_num: f64,
    b3_p_num: f64,
    mentions: f64,
    ceaf_phi: f64,
    ceaf_gold: f64,
    ceaf_sys: f64,
}

fn cluster_index(clustering: &Clustering) -> HashMap<&str, usize> {
    let mut index = HashMap::new();
    for (c, cluster) in clustering.clusters.iter().enumerate() {
        for id in cluster {
            index.insert(id.as_str(), c);
        }
    }
    index
}

/// MUC link numerator: sum over key clusters of |K| - (number of response
/// clusters K intersects).
fn muc_numerator(key: &Clustering, response_index: &HashMap<&str, usize>) -> f64 {
    let mut num = 0.0;
    for cluster in &key.clusters {
        let partitions: HashSet<usize> = cluster
            .iter()
            .map(|id| response_index[id.as_str()])
            .collect();
        num += (cluster.len() - partitions.len()) as f64;
    }
    num
}

fn muc_denominator(key: &Clustering) -> f64 {
    key.clusters.iter().map(|c| (c.len() - 1) as f64).sum()
}

/// B³ recall numerator (with gold as key): sum over mentions of
/// |K(m) ∩ R(m)| / |K(m)|.
fn b3_numerator(key: &Clustering, response_index: &HashMap<&str, usize>) -> f64 {
    let mut num = 0.0;
    for cluster in &key.clusters {
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        for id in cluster {
            *overlap.entry(response_index[id.as_str()]).or_default() += 1;
        }
        for id in cluster {
            let r = response_index[id.as_str()];
            num += overlap[&r] as f64 / cluster.len() as f64;
        }
    }
    num
}

/// phi4 similarity between two clusters.
fn phi4(a: &[String], b: &[String]) -> f64 {
    let a_set: HashSet<&str> = a.iter().map(|s| s.as_str()).collect();
    let overlap = b.iter().filter(|id| a_set.contains(id.as_str())).count();
    2.0 * overlap as f64 / (a.len() + b.len()) as f64
}

/// Result of the assignment solver: which column each row was matched to
/// (None when the row fell on padding) and the total score.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub row_to_col: Vec<Option<usize>>,
    pub total: f64,
}

/// Maximum-score one-to-one assignment of rows to columns (every row of the
/// smaller side is matched), via Kuhn-Munkres on the negated, zero-padded
/// square matrix.
pub fn optimal_assignment(score_matrix: &[Vec<f64>]) -> Assignment {
    let rows = score_matrix.len();
    let cols = score_matrix.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Assignment {
            row_to_col: vec![None; rows],
            total: 0.0,
        };
    }
    let n = rows.max(cols);
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -score_matrix[i][j]
        } else {
            0.0
        }
    };

    // Kuhn-Munkres with potentials, 1-indexed.
    const INF: f64 = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j] = row matched to column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            row_to_col[i - 1] = Some(j - 1);
            total += score_matrix[i - 1][j - 1];
        }
    }
    Assignment { row_to_col, total }
}

fn check_universe(gold: &Clustering, sys: &Clustering) -> Result<(), MetricsError> {
    let g = gold.validate()?;
    let s = sys.validate()?;
    if g != s {
        return Err(MetricsError::UniverseMismatch {
            doc_id: gold.doc_id.clone(),
        });
    }
    Ok(())
}

impl ScoreAccumulator {
    pub fn add_document(&mut self, gold: &Clustering, sys: &Clustering) -> Result<(), MetricsError> {
        check_universe(gold, sys)?;
        let gold_index = cluster_index(gold);
        let sys_index = cluster_index(sys);

        self.muc_r_num += muc_numerator(gold, &sys_index);
        self.muc_r_den += muc_denominator(gold);
        self.muc_p_num += muc_numerator(sys, &gold_index);
        self.muc_p_den += muc_denominator(sys);

        self.b3_r_num += b3_numerator(gold, &sys_index);
        self.b3_p_num += b3_numerator(sys, &gold_index);
        self.mentions += gold.clusters.iter().map(|c| c.len() as f64).sum::<f64>();

        let matrix: Vec<Vec<f64>> = gold
            .clusters
            .iter()
            .map(|g| sys.clusters.iter().map(|s| phi4(g, s)).collect())
            .collect();
        self.ceaf_phi += optimal_assignment(&matrix).total;
        self.ceaf_gold += gold.clusters.len() as f64;
        self.ceaf_sys += sys.clusters.len() as f64;
        Ok(())
    }

    pub fn report(&self) -> ScoreReport {
        let muc = Prf::from_fractions(self.muc_p_num, self.muc_p_den, self.muc_r_num, self.muc_r_den);
        let b_cubed = Prf::from_fractions(self.b3_p_num, self.mentions, self.b3_r_num, self.mentions);
        let ceaf_e = Prf::from_fractions(self.ceaf_phi, self.ceaf_sys, self.ceaf_phi, self.ceaf_gold);
        ScoreReport {
            muc,
            b_cubed,
            ceaf_e,
            conll: conll_score(&muc, &b_cubed, &ceaf_e),
        }
    }
}

pub fn muc(gold: &Clustering, sys: &Clustering) -> Result<Prf, MetricsError> {
    check_universe(gold, sys)?;
    let gold_index = cluster_index(gold);
    let sys_index = cluster_index(sys);
    Ok(Prf::from_fractions(
        muc_numerator(sys, &gold_index),
        muc_denominator(sys),
        muc_numerator(gold, &sys_index),
        muc_denominator(gold),
    ))
}

pub fn b_cubed(gold: &Clustering, sys: &Clustering) -> Result<Prf, MetricsError> {
    check_universe(gold, sys)?;
    let gold_index = cluster_index(gold);
    let sys_index = cluster_index(sys);
    let mentions: f64 = gold.clusters.iter().map(|c| c.len() as f64).sum();
    Ok(Prf::from_fractions(
        b3_numerator(sys, &gold_index),
        mentions,
        b3_numerator(gold, &sys_index),
        mentions,
    ))
}

pub fn ceaf_e(gold: &Clustering, sys: &Clustering) -> Result<Prf, MetricsError> {
    check_universe(gold, sys)?;
    let matrix: Vec<Vec<f64>> = gold
        .clusters
        .iter()
        .map(|g| sys.clusters.iter().map(|s| phi4(g, s)).collect())
        .collect();
    let phi = optimal_assignment(&matrix).total;
    Ok(Prf::from_fractions(
        phi,
        sys.clusters.len() as f64,
        phi,
        gold.clusters.len() as f64,
    ))
}

/// Micro-averaged corpus score. Documents are matched by doc_id; both
/// inputs must cover the same documents.
pub fn score_corpus(gold: &[Clustering], sys: &[Clustering]) -> Result<ScoreReport, MetricsError> {
    let sys_by_id: HashMap<&str, &Clustering> =
        sys.iter().map(|c| (c.doc_id.as_str(), c)).collect();
    if sys.len() != gold.len() {
        for s in sys {
            if !gold.iter().any(|g| g.doc_id == s.doc_id) {
                return Err(MetricsError::DocMismatch {
                    doc_id: s.doc_id.clone(),
                });
            }
        }
    }
    let mut acc = ScoreAccumulator::default();
    for g in gold {
        let s = sys_by_id.get(g.doc_id.as_str()).ok_or_else(|| MetricsError::DocMismatch {
            doc_id: g.doc_id.clone(),
        })?;
        acc.add_document(g, s)?;
    }
    Ok(acc.report())
}
