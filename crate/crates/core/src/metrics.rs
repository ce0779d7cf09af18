//! Evaluation: NPMI topic coherence over sliding-window co-occurrence
//! statistics, topic uniqueness, and clustering accuracy via an optimal
//! cluster-to-label assignment.

use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::model::{encode_eval, top_words, ModelParams};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {clusters} cluster ids vs {labels} labels")]
    LengthMismatch { clusters: usize, labels: usize },
    #[error("empty input: need at least one document")]
    EmptyInput,
}

/// Sliding-window co-occurrence statistics over a reference corpus.
///
/// A window of length `window` slides with stride 1 over each document's
/// token sequence; documents shorter than the window contribute one window.
/// A word (or pair) counts at most once per window position.
#[derive(Debug, Clone)]
pub struct CooccurrenceTable {
    pub window: usize,
    pub n_windows: u64,
    word_occ: Vec<u64>,
    pair_occ: HashMap<(u32, u32), u64>,
}

impl CooccurrenceTable {
    pub fn word_prob(&self, w: usize) -> f64 {
        self.word_occ[w] as f64 / self.n_windows as f64
    }

    /// Symmetric pair probability; zero for never co-windowed pairs.
    pub fn pair_prob(&self, a: usize, b: usize) -> f64 {
        let key = (a.min(b) as u32, a.max(b) as u32);
        *self.pair_occ.get(&key).unwrap_or(&0) as f64 / self.n_windows as f64
    }
}

/// Boolean window counting: each distinct word and unordered pair of
/// distinct words counts once per window position.
pub fn cooccurrence_counts(
    token_seqs: &[Vec<u32>],
    vocab_size: usize,
    window: usize,
) -> CooccurrenceTable {
    assert!(window >= 2, "window must be >= 2");
    let mut word_occ = vec![0u64; vocab_size];
    let mut pair_occ: HashMap<(u32, u32), u64> = HashMap::new();
    let mut n_windows = 0u64;
    let mut distinct: Vec<u32> = Vec::with_capacity(window);
    for seq in token_seqs {
        let starts = if seq.len() <= window {
            1
        } else {
            seq.len() - window + 1
        };
        for s in 0..starts {
            let end = (s + window).min(seq.len());
            n_windows += 1;
            distinct.clear();
            distinct.extend_from_slice(&seq[s..end]);
            distinct.sort_unstable();
            distinct.dedup();
            for (i, &a) in distinct.iter().enumerate() {
                word_occ[a as usize] += 1;
                for &b in &distinct[i + 1..] {
                    *pair_occ.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
    }
    CooccurrenceTable {
        window,
        n_windows,
        word_occ,
        pair_occ,
    }
}

/// Normalization of the per-topic NPMI sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairNorm {
    /// Divide by M, the number of top words.
    TopWords,
    /// Divide by the number of unordered pairs, M(M-1)/2.
    PairCount,
}

/// Per-topic values plus their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub per_topic: Vec<f64>,
    pub mean: f64,
}

impl MetricBlock {
    fn from_values(per_topic: Vec<f64>) -> Self {
        let mean = per_topic.iter().sum::<f64>() / per_topic.len().max(1) as f64;
        Self { per_topic, mean }
    }
}

fn npmi_pair_term(table: &CooccurrenceTable, a: usize, b: usize, eps: f64) -> f64 {
    let p_ab = table.pair_prob(a, b);
    let denom = -(p_ab + eps).ln();
    if denom <= 0.0 {
        return 0.0;
    }
    let p_a = table.word_prob(a);
    let p_b = table.word_prob(b);
    ((p_ab + eps) / (p_a * p_b + eps)).ln() / denom
}

/// NPMI coherence per topic: sum over unordered pairs of top words of
/// ln((p_ij + eps) / (p_i p_j + eps)) / -ln(p_ij + eps), normalized per
/// `norm`. The eps guard in the denominator keeps absent words finite and
/// makes exactly independent pairs score exactly zero.
pub fn npmi(
    topics: &[Vec<usize>],
    table: &CooccurrenceTable,
    eps: f64,
    norm: PairNorm,
) -> MetricBlock {
    let per_topic = topics
        .iter()
        .map(|words| {
            let m = words.len();
            let mut sum = 0.0;
            for i in 0..m {
                for j in i + 1..m {
                    sum += npmi_pair_term(table, words[i], words[j], eps);
                }
            }
            let denom = match norm {
                PairNorm::TopWords => m as f64,
                PairNorm::PairCount => (m * (m - 1)) as f64 / 2.0,
            };
            sum / denom
        })
        .collect();
    MetricBlock::from_values(per_topic)
}

/// Topic uniqueness: TU(k) = (1/M) sum_i 1/cnt(i,k) where cnt counts how
/// many topics list that word among their top M. Ranges over [1/K, 1].
pub fn topic_uniqueness(topics: &[Vec<usize>]) -> MetricBlock {
    let mut occurrences: HashMap<usize, u32> = HashMap::new();
    for words in topics {
        for &w in words {
            *occurrences.entry(w).or_insert(0) += 1;
        }
    }
    let per_topic = topics
        .iter()
        .map(|words| {
            words
                .iter()
                .map(|w| 1.0 / occurrences[w] as f64)
                .sum::<f64>()
                / words.len() as f64
        })
        .collect();
    MetricBlock::from_values(per_topic)
}

/// Eval-mode topic assignment: argmax of theta per document, ties to the
/// lowest topic. Documents dropped during preprocessing are recorded by
/// original line id in `skipped`.
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    pub clusters: Vec<usize>,
    pub skipped: Vec<usize>,
}

pub fn assign_clusters(params: &ModelParams, corpus: &Corpus) -> ClusterAssignment {
    let v = corpus.vocab.len();
    let mut freqs = Array2::zeros((corpus.n_docs(), v));
    for (i, doc) in corpus.docs.iter().enumerate() {
        freqs.row_mut(i).assign(&doc.freq_vector(v));
    }
    let enc = encode_eval(&freqs, &params.encoder);
    let clusters = enc
        .theta
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    ClusterAssignment {
        clusters,
        skipped: corpus.skipped.clone(),
    }
}

/// Min-cost perfect assignment on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns the column assigned to each row.
fn hungarian_min(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    debug_assert_eq!(n, cost.ncols());
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
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
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Best-case label agreement over injective cluster-to-label mappings,
/// solved as a max-weight assignment on the confusion matrix.
pub fn clustering_accuracy(clusters: &[usize], labels: &[usize]) -> Result<f64, MetricsError> {
    if clusters.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            clusters: clusters.len(),
            labels: labels.len(),
        });
    }
    if clusters.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let compact = |ids: &[usize]| -> (Vec<usize>, usize) {
        let mut uniq: Vec<usize> = ids.to_vec();
        uniq.sort_unstable();
        uniq.dedup();
        let map: HashMap<usize, usize> = uniq.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        (ids.iter().map(|x| map[x]).collect(), uniq.len())
    };
    let (c, nc) = compact(clusters);
    let (l, nl) = compact(labels);
    let n = nc.max(nl);
    let mut confusion = Array2::<f64>::zeros((n, n));
    for (&ci, &li) in c.iter().zip(&l) {
        confusion[[ci, li]] += 1.0;
    }
    let max_entry = confusion.iter().cloned().fold(0.0f64, f64::max);
    let cost = confusion.mapv(|x| max_entry - x);
    let assign = hungarian_min(&cost);
    let matched: f64 = assign
        .iter()
        .enumerate()
        .map(|(row, &col)| confusion[[row, col]])
        .sum();
    Ok(matched / clusters.len() as f64)
}

/// Everything the evaluation emits, serialized as the metrics JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub npmi: MetricBlock,
    pub tu: MetricBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acc: Option<f64>,
    pub top_words: Vec<Vec<String>>,
    pub config: MetricsConfigEcho,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfigEcho {
    pub topics: usize,
    pub top_m: usize,
    pub window: usize,
    pub eps: f64,
    pub pair_norm: PairNorm,
}

#[derive(Debug, Clone, Copy)]
pub struct MetricsConfig {
    pub top_m: usize,
    pub window: usize,
    pub eps: f64,
    pub pair_norm: PairNorm,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            top_m: 10,
            window: 10,
            eps: 1e-12,
            pair_norm: PairNorm::TopWords,
        }
    }
}

/// Scores a trained model against a reference corpus: NPMI over the corpus
/// windows, topic uniqueness of the top-M lists, and clustering accuracy
/// when every document carries a label.
pub fn evaluate(
    params: &ModelParams,
    corpus: &Corpus,
    cfg: &MetricsConfig,
) -> Result<MetricsReport, MetricsError> {
    if corpus.n_docs() == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let k = params.dims.topics;
    let m = cfg.top_m.min(params.dims.vocab);
    let topic_indices: Vec<Vec<usize>> =
        (0..k).map(|t| top_words(&params.decoder, t, m)).collect();
    let table = cooccurrence_counts(&corpus.token_seqs, corpus.vocab.len(), cfg.window);
    let npmi_block = npmi(&topic_indices, &table, cfg.eps, cfg.pair_norm);
    let tu_block = topic_uniqueness(&topic_indices);
    let acc = match corpus.labels() {
        Some(labels) => {
            let assignment = assign_clusters(params, corpus);
            let labels_usize: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
            Some(clustering_accuracy(&assignment.clusters, &labels_usize)?)
        }
        None => None,
    };
    let top_word_strings = topic_indices
        .iter()
        .map(|ws| ws.iter().map(|&w| corpus.vocab.word(w).to_string()).collect())
        .collect();
    Ok(MetricsReport {
        npmi: npmi_block,
        tu: tu_block,
        acc,
        top_words: top_word_strings,
        config: MetricsConfigEcho {
            topics: k,
            top_m: m,
            window: cfg.window,
            eps: cfg.eps,
            pair_norm: cfg.pair_norm,
        },
    })
}

/// Human-readable table for standard output.
pub fn render_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "topic  npmi      tu        top words");
    for (k, words) in report.top_words.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k:<6} {:<9.4} {:<9.4} {}",
            report.npmi.per_topic[k],
            report.tu.per_topic[k],
            words.join(" ")
        );
    }
    let _ = writeln!(
        out,
        "mean   {:<9.4} {:<9.4}",
        report.npmi.mean, report.tu.mean
    );
    if let Some(acc) = report.acc {
        let _ = writeln!(out, "acc    {acc:.4}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn single_short_doc_is_one_window() {
        let table = cooccurrence_counts(&[vec![0, 1]], 2, 10);
        assert_eq!(table.n_windows, 1);
        assert_abs_diff_eq!(table.word_prob(0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(table.word_prob(1), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(table.pair_prob(0, 1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn distant_words_never_co_window() {
        // a x x x b with window 2: windows {a,x},{x,x},{x,x},{x,b}
        let table = cooccurrence_counts(&[vec![0, 2, 2, 2, 1]], 3, 2);
        assert_eq!(table.n_windows, 4);
        assert_abs_diff_eq!(table.pair_prob(0, 1), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(table.pair_prob(0, 2), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn duplicate_words_count_once_per_window() {
        let table = cooccurrence_counts(&[vec![0, 0, 0]], 1 + 1, 3);
        assert_eq!(table.n_windows, 1);
        assert_abs_diff_eq!(table.word_prob(0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(table.pair_prob(0, 0), 0.0, epsilon = 1e-12);
    }

    /// Brute-force oracle: per word/pair, scan every window by membership.
    fn brute_force_probs(
        token_seqs: &[Vec<u32>],
        vocab_size: usize,
        window: usize,
    ) -> (u64, Vec<f64>, Vec<Vec<f64>>) {
        let mut windows: Vec<Vec<u32>> = Vec::new();
        for seq in token_seqs {
            if seq.len() <= window {
                windows.push(seq.clone());
            } else {
                for s in 0..=(seq.len() - window) {
                    windows.push(seq[s..s + window].to_vec());
                }
            }
        }
        let n = windows.len() as u64;
        let mut word = vec![0.0; vocab_size];
        let mut pair = vec![vec![0.0; vocab_size]; vocab_size];
        for (w, p) in word.iter_mut().enumerate() {
            *p = windows.iter().filter(|win| win.contains(&(w as u32))).count() as f64 / n as f64;
        }
        for a in 0..vocab_size {
            for b in 0..vocab_size {
                if a == b {
                    continue;
                }
                pair[a][b] = windows
                    .iter()
                    .filter(|win| win.contains(&(a as u32)) && win.contains(&(b as u32)))
                    .count() as f64
                    / n as f64;
            }
        }
        (n, word, pair)
    }

    #[test]
    fn counts_match_brute_force_enumeration() {
        let seqs = vec![
            vec![0, 1, 2, 0, 3],
            vec![3, 3, 1],
            vec![2],
            vec![4, 0, 4, 1, 2, 3, 4, 0],
        ];
        let table = cooccurrence_counts(&seqs, 5, 3);
        let (n, word, pair) = brute_force_probs(&seqs, 5, 3);
        assert_eq!(table.n_windows, n);
        for w in 0..5 {
            assert_abs_diff_eq!(table.word_prob(w), word[w], epsilon = 1e-12);
        }
        for a in 0..5 {
            for b in 0..5 {
                if a != b {
                    assert_abs_diff_eq!(table.pair_prob(a, b), pair[a][b], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn npmi_perfect_coherence_pair_term_is_one() {
        // two words always together: p(i) = p(j) = p(i,j) = 0.5
        let table = cooccurrence_counts(&[vec![0, 1], vec![2]], 3, 5);
        let term = npmi_pair_term(&table, 0, 1, 1e-12);
        assert_abs_diff_eq!(term, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn npmi_independent_words_score_zero() {
        // p(0)=p(1)=1/2, p(0,1)=1/4 over 4 windows
        let seqs = vec![vec![0, 1], vec![0], vec![1], vec![2]];
        let table = cooccurrence_counts(&seqs, 3, 4);
        let term = npmi_pair_term(&table, 0, 1, 1e-12);
        assert_abs_diff_eq!(term, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn npmi_hand_built_corpus_matches_brute_force() {
        let seqs = vec![
            vec![0, 1, 2, 3],
            vec![0, 1, 4],
            vec![2, 3, 4, 0, 1],
            vec![4, 4, 2],
        ];
        let table = cooccurrence_counts(&seqs, 5, 3);
        let topic = vec![0usize, 1, 2];
        let eps = 1e-12;
        let got = npmi(&[topic.clone()], &table, eps, PairNorm::TopWords);
        let (_, word, pair) = brute_force_probs(&seqs, 5, 3);
        let mut expect = 0.0;
        for i in 0..3 {
            for j in i + 1..3 {
                let (a, b) = (topic[i], topic[j]);
                let denom = -(pair[a][b] + eps).ln();
                if denom > 0.0 {
                    expect += ((pair[a][b] + eps) / (word[a] * word[b] + eps)).ln() / denom;
                }
            }
        }
        expect /= 3.0;
        assert_abs_diff_eq!(got.per_topic[0], expect, epsilon = 1e-9);
    }

    #[test]
    fn npmi_pair_terms_bounded() {
        let seqs = vec![vec![0, 1, 2], vec![0, 2], vec![1], vec![2, 0]];
        let table = cooccurrence_counts(&seqs, 3, 2);
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    let t = npmi_pair_term(&table, a, b, 1e-12);
                    assert!((-1.0 - 1e-6..=1.0 + 1e-6).contains(&t), "term {t}");
                }
            }
        }
    }

    #[test]
    fn tu_identical_topics_hit_lower_bound() {
        let topics = vec![vec![0, 1, 2]; 4];
        let tu = topic_uniqueness(&topics);
        for &v in &tu.per_topic {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn tu_disjoint_topics_hit_upper_bound() {
        let topics = vec![vec![0, 1], vec![2, 3], vec![4, 5]];
        let tu = topic_uniqueness(&topics);
        for &v in &tu.per_topic {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn tu_partial_overlap_direct_value() {
        // {a,b} and {a,c}: TU = (1/2)(1/2 + 1) = 0.75 each
        let topics = vec![vec![0, 1], vec![0, 2]];
        let tu = topic_uniqueness(&topics);
        assert_abs_diff_eq!(tu.per_topic[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(tu.per_topic[1], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(tu.mean, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn accuracy_perfect_under_relabeling() {
        let labels = vec![0, 0, 1, 1, 2, 2];
        let clusters = vec![2, 2, 0, 0, 1, 1];
        assert_abs_diff_eq!(
            clustering_accuracy(&clusters, &labels).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn accuracy_documented_example() {
        let labels = vec![0, 0, 1, 1];
        let clusters = vec![1, 1, 0, 2];
        assert_abs_diff_eq!(
            clustering_accuracy(&clusters, &labels).unwrap(),
            0.75,
            epsilon = 1e-12
        );
    }

    #[test]
    fn accuracy_single_cluster_balanced_labels() {
        let labels = vec![0, 1, 2, 0, 1, 2];
        let clusters = vec![7; 6];
        assert_abs_diff_eq!(
            clustering_accuracy(&clusters, &labels).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn accuracy_length_mismatch() {
        assert_eq!(
            clustering_accuracy(&[0, 1], &[0]),
            Err(MetricsError::LengthMismatch {
                clusters: 2,
                labels: 1
            })
        );
        assert_eq!(clustering_accuracy(&[], &[]), Err(MetricsError::EmptyInput));
    }

    /// Exhaustive oracle over injective cluster -> label mappings.
    fn exhaustive_accuracy(clusters: &[usize], labels: &[usize]) -> f64 {
        fn compact(ids: &[usize]) -> Vec<usize> {
            let mut uniq: Vec<usize> = ids.to_vec();
            uniq.sort_unstable();
            uniq.dedup();
            ids.iter()
                .map(|x| uniq.iter().position(|u| u == x).unwrap())
                .collect()
        }
        let c = compact(clusters);
        let l = compact(labels);
        let nc = c.iter().max().unwrap() + 1;
        let nl = l.iter().max().unwrap() + 1;
        let mut best = 0usize;
        // assign each cluster a distinct label or none
        fn rec(
            k: usize,
            nc: usize,
            nl: usize,
            used: &mut Vec<bool>,
            map: &mut Vec<Option<usize>>,
            c: &[usize],
            l: &[usize],
            best: &mut usize,
        ) {
            if k == nc {
                let matches = c
                    .iter()
                    .zip(l)
                    .filter(|&(&ci, &li)| map[ci] == Some(li))
                    .count();
                *best = (*best).max(matches);
                return;
            }
            map[k] = None;
            rec(k + 1, nc, nl, used, map, c, l, best);
            for lab in 0..nl {
                if !used[lab] {
                    used[lab] = true;
                    map[k] = Some(lab);
                    rec(k + 1, nc, nl, used, map, c, l, best);
                    map[k] = None;
                    used[lab] = false;
                }
            }
        }
        rec(
            0,
            nc,
            nl,
            &mut vec![false; nl],
            &mut vec![None; nc],
            &c,
            &l,
            &mut best,
        );
        best as f64 / clusters.len() as f64
    }

    proptest! {
        /// Hungarian accuracy equals exhaustive search on small instances.
        #[test]
        fn hungarian_matches_exhaustive(
            pairs in proptest::collection::vec((0usize..6, 0usize..6), 1..40)
        ) {
            let clusters: Vec<usize> = pairs.iter().map(|&(c, _)| c).collect();
            let labels: Vec<usize> = pairs.iter().map(|&(_, l)| l).collect();
            let fast = clustering_accuracy(&clusters, &labels).unwrap();
            let slow = exhaustive_accuracy(&clusters, &labels);
            prop_assert!((fast - slow).abs() < 1e-12, "fast {fast} slow {slow}");
        }

        /// Accuracy is invariant under relabeling either side.
        #[test]
        fn accuracy_relabel_invariant(
            pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..30),
            cl_perm in 7usize..97,
            la_perm in 3usize..91,
        ) {
            let clusters: Vec<usize> = pairs.iter().map(|&(c, _)| c).collect();
            let labels: Vec<usize> = pairs.iter().map(|&(_, l)| l).collect();
            let base = clustering_accuracy(&clusters, &labels).unwrap();
            // apply injective relabelings c -> (c * p + q) with small moduli
            let clusters2: Vec<usize> = clusters.iter().map(|&c| c * cl_perm + 1).collect();
            let labels2: Vec<usize> = labels.iter().map(|&l| l * la_perm + 3).collect();
            let re = clustering_accuracy(&clusters2, &labels2).unwrap();
            prop_assert!((base - re).abs() < 1e-12);
        }

        /// TU stays within [1/K, 1].
        #[test]
        fn tu_bounds(
            topics in proptest::collection::vec(
                proptest::collection::hash_set(0usize..20, 3), 1..6)
        ) {
            let topics: Vec<Vec<usize>> = topics
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect();
            let k = topics.len() as f64;
            let tu = topic_uniqueness(&topics);
            for &v in &tu.per_topic {
                prop_assert!(v >= 1.0 / k - 1e-12 && v <= 1.0 + 1e-12);
            }
        }
    }
}
