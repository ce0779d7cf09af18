//! Negative example selection for the discriminators: negative documents for
//! the global term (random or most-dissimilar by TF-IDF cosine) and negative
//! words for the local term.

use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tfidf_component, BowDocument, Corpus};

#[derive(Debug, Error, PartialEq)]
pub enum NegativesError {
    #[error("corpus too small: need at least {need} documents, have {have}")]
    CorpusTooSmall { need: usize, have: usize },
    #[error("no negative words available: document covers the whole vocabulary")]
    NoNegativeWordsAvailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegStrategyKind {
    Random,
    Similarity,
}

/// How negatives are drawn each step. `pool_size` only matters for the
/// similarity strategy: the most-dissimilar candidates cached per document.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NegativeStrategy {
    pub kind: NegStrategyKind,
    pub n_neg_docs: usize,
    pub n_neg_words: usize,
    pub pool_size: usize,
}

impl Default for NegativeStrategy {
    fn default() -> Self {
        Self {
            kind: NegStrategyKind::Similarity,
            n_neg_docs: 1,
            n_neg_words: 1,
            pool_size: 50,
        }
    }
}

impl NegativeStrategy {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_neg_docs < 1 || self.n_neg_words < 1 {
            return Err("need at least one negative document and word".into());
        }
        if self.kind == NegStrategyKind::Similarity && self.pool_size < self.n_neg_docs {
            return Err("pool_size must be >= n_neg_docs for similarity selection".into());
        }
        Ok(())
    }
}

/// `n` distinct document ids != `doc_id`, uniform without replacement.
pub fn select_negatives_random<R: Rng + ?Sized>(
    n_docs: usize,
    doc_id: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>, NegativesError> {
    if n_docs < n + 1 {
        return Err(NegativesError::CorpusTooSmall {
            need: n + 1,
            have: n_docs,
        });
    }
    // Sample from the other docs, skipping over doc_id.
    let picks = sample(rng, n_docs - 1, n);
    Ok(picks
        .iter()
        .map(|i| if i >= doc_id { i + 1 } else { i })
        .collect())
}

/// Sparse TF-IDF rows with precomputed norms, for cosine similarity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TfidfIndex {
    rows: Vec<Vec<(u32, f64)>>,
    norms: Vec<f64>,
}

impl TfidfIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let n_docs = corpus.n_docs();
        let mut rows = Vec::with_capacity(n_docs);
        let mut norms = Vec::with_capacity(n_docs);
        for doc in &corpus.docs {
            let mut row: Vec<(u32, f64)> = doc
                .counts
                .iter()
                .map(|&(i, c)| {
                    let v = tfidf_component(
                        c,
                        doc.token_count,
                        n_docs,
                        corpus.vocab.doc_freq(i as usize),
                    );
                    (i, v)
                })
                .filter(|&(_, v)| v != 0.0)
                .collect();
            row.sort_unstable_by_key(|&(i, _)| i);
            let norm = row.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
            rows.push(row);
            norms.push(norm);
        }
        Self { rows, norms }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Cosine similarity between two documents; zero-norm documents have
    /// similarity 0 with everything.
    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        if self.norms[a] == 0.0 || self.norms[b] == 0.0 {
            return 0.0;
        }
        let (ra, rb) = (&self.rows[a], &self.rows[b]);
        let mut dot = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < ra.len() && j < rb.len() {
            match ra[i].0.cmp(&rb[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += ra[i].1 * rb[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        dot / (self.norms[a] * self.norms[b])
    }
}

/// The `n` documents least cosine-similar to `doc_id`, ties broken by
/// ascending document id. Deterministic: no randomness involved.
pub fn select_negatives_dissimilar(
    index: &TfidfIndex,
    doc_id: usize,
    n: usize,
) -> Result<Vec<usize>, NegativesError> {
    let n_docs = index.len();
    if n_docs < n + 1 {
        return Err(NegativesError::CorpusTooSmall {
            need: n + 1,
            have: n_docs,
        });
    }
    let mut scored: Vec<(f64, usize)> = (0..n_docs)
        .filter(|&d| d != doc_id)
        .map(|d| (index.cosine(doc_id, d), d))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite cosine").then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(n).map(|(_, d)| d).collect())
}

/// Per-document pools of the most dissimilar candidates, precomputed once so
/// training steps draw negatives in O(1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DissimilarityPools {
    pub corpus_hash: String,
    pub pools: Vec<Vec<u32>>,
}

impl DissimilarityPools {
    pub fn build(corpus: &Corpus, pool_size: usize) -> Result<Self, NegativesError> {
        let index = TfidfIndex::build(corpus);
        let cap = pool_size.min(corpus.n_docs().saturating_sub(1));
        if cap == 0 {
            return Err(NegativesError::CorpusTooSmall {
                need: 2,
                have: corpus.n_docs(),
            });
        }
        let pools = (0..corpus.n_docs())
            .map(|d| {
                select_negatives_dissimilar(&index, d, cap)
                    .map(|v| v.into_iter().map(|x| x as u32).collect())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            corpus_hash: corpus.vocab.hash(),
            pools,
        })
    }

    /// Draw `n` negatives for `doc_id` uniformly from its pool, without
    /// replacement.
    pub fn draw<R: Rng + ?Sized>(&self, doc_id: usize, n: usize, rng: &mut R) -> Vec<usize> {
        let pool = &self.pools[doc_id];
        let n = n.min(pool.len());
        sample(rng, pool.len(), n)
            .iter()
            .map(|i| pool[i] as usize)
            .collect()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, serde_json::to_string(self).expect("serializable pools"))
    }

    /// Loads cached pools; `None` when the file is missing, unreadable or
    /// belongs to a different corpus.
    pub fn load(path: &Path, corpus_hash: &str) -> Option<Self> {
        let text = fs::read_to_string(path).ok()?;
        let pools: Self = serde_json::from_str(&text).ok()?;
        (pools.corpus_hash == corpus_hash).then_some(pools)
    }
}

/// `n` distinct word indices sampled uniformly from the vocabulary words NOT
/// present in the document.
pub fn sample_negative_words<R: Rng + ?Sized>(
    doc: &BowDocument,
    vocab_size: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>, NegativesError> {
    let complement = word_complement(doc, vocab_size);
    if complement.is_empty() {
        return Err(NegativesError::NoNegativeWordsAvailable);
    }
    let n = n.min(complement.len());
    Ok(sample(rng, complement.len(), n)
        .iter()
        .map(|i| complement[i] as usize)
        .collect())
}

/// Vocabulary indices absent from the document, ascending.
pub fn word_complement(doc: &BowDocument, vocab_size: usize) -> Vec<u32> {
    let mut present = vec![false; vocab_size];
    for idx in doc.word_types() {
        present[idx as usize] = true;
    }
    (0..vocab_size as u32)
        .filter(|&i| !present[i as usize])
        .collect()
}
