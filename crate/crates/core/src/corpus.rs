//! Text preprocessing: tokenization, vocabulary construction, bag-of-words
//! vectors and TF-IDF.
//!
//! Corpus input is either a UTF-8 text file with one document per line
//! (labels optionally in a separate aligned file, one integer per line) or a
//! JSON-lines file with fields `text` and optional `label`.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array1;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Small bundled English stopword list (~150 words), overridable by file.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "cannot", "could", "did", "do", "does", "doing", "down", "during", "each", "few",
    "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of",
    "off", "on", "once", "only", "or", "other", "ought", "our", "ours", "ourselves", "out",
    "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their",
    "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those", "through",
    "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where",
    "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours",
    "yourself", "yourselves", "also", "although", "among", "anyone", "anything", "became",
    "become", "becomes", "else", "ever", "every", "everyone", "everything", "get", "gets", "got",
    "however", "like", "made", "make", "many", "may", "might", "much", "must", "neither", "one",
    "onto", "per", "rather", "said", "say", "says", "shall", "since", "still", "though", "thus",
    "upon", "us", "went", "yet",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty vocabulary: no token survived document-frequency filtering")]
    EmptyVocabulary,
    #[error("empty document: no token maps into the vocabulary")]
    EmptyDocument,
    #[error("label file has {labels} lines but corpus has {docs} documents")]
    LabelMismatch { labels: usize, docs: usize },
    #[error("bad label on line {line}: {msg}")]
    BadLabel { line: usize, msg: String },
    #[error("bad JSON document on line {line}: {msg}")]
    BadJson { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Preprocessing knobs. Tokens containing digits are always dropped whole;
/// punctuation acts as a separator.
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
    pub min_token_len: usize,
    pub stemming: bool,
    pub min_df: usize,
    pub max_df_ratio: f64,
    pub max_vocab: Option<usize>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            min_token_len: 2,
            stemming: false,
            min_df: 1,
            max_df_ratio: 1.0,
            max_vocab: None,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_df < 1 {
            return Err("min_df must be >= 1".into());
        }
        if !(self.max_df_ratio > 0.0 && self.max_df_ratio <= 1.0) {
            return Err("max_df_ratio must lie in (0, 1]".into());
        }
        if self.min_token_len < 1 {
            return Err("min_token_len must be >= 1".into());
        }
        Ok(())
    }

    pub fn stopwords_from_file(&mut self, path: &Path) -> Result<(), CorpusError> {
        let text = fs::read_to_string(path)?;
        self.stopwords = text
            .lines()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Ok(())
    }
}

/// Very small deterministic suffix stripper, used only when
/// `PreprocessConfig::stemming` is on.
fn stem(word: &str) -> String {
    let w = word;
    if let Some(base) = w.strip_suffix("ies") {
        if base.len() >= 2 {
            return format!("{base}y");
        }
    }
    if let Some(base) = w.strip_suffix("sses") {
        return format!("{base}ss");
    }
    for suf in ["ing", "ed"] {
        if let Some(base) = w.strip_suffix(suf) {
            if base.len() >= 3 {
                return base.to_string();
            }
        }
    }
    if w.ends_with('s') && !w.ends_with("ss") && w.len() >= 4 {
        return w[..w.len() - 1].to_string();
    }
    w.to_string()
}

/// Splits raw text into cleaned tokens.
///
/// Punctuation separates tokens, tokens containing digits are dropped whole,
/// stopwords and tokens shorter than `min_token_len` are removed. Empty
/// output is allowed.
pub fn tokenize(raw: &str, cfg: &PreprocessConfig) -> Vec<String> {
    let mut out = Vec::new();
    for piece in raw.split(|c: char| !c.is_alphanumeric()) {
        if piece.is_empty() || piece.chars().any(|c| c.is_ascii_digit()) {
            continue;
        }
        let tok = if cfg.lowercase {
            piece.to_lowercase()
        } else {
            piece.to_string()
        };
        if cfg.stopwords.contains(&tok) {
            continue;
        }
        let tok = if cfg.stemming { stem(&tok) } else { tok };
        if tok.chars().count() < cfg.min_token_len {
            continue;
        }
        out.push(tok);
    }
    out
}

/// Word <-> index bijection with document frequencies.
///
/// Order is canonical: descending document frequency, ties broken
/// lexicographically, so builds are reproducible under input permutation.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
    doc_freq: Vec<u32>,
}

impl Vocabulary {
    fn from_parts(words: Vec<String>, doc_freq: Vec<u32>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Self {
            words,
            index,
            doc_freq,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn doc_freq(&self, idx: usize) -> u32 {
        self.doc_freq[idx]
    }

    /// SHA-256 over the newline-joined word list, hex encoded. Used for
    /// checkpoint compatibility checks.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for w in &self.words {
            hasher.update(w.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Rebuild from an ordered word list (e.g. a vocabulary file). Document
    /// frequencies start at zero until [`Vocabulary::recount_doc_freq`].
    pub fn from_words(words: Vec<String>) -> Self {
        let n = words.len();
        Self::from_parts(words, vec![0; n])
    }

    /// Recompute document frequencies over tokenized documents.
    pub fn recount_doc_freq<S: AsRef<str>>(&mut self, docs: &[Vec<S>]) {
        self.doc_freq = vec![0; self.words.len()];
        for doc in docs {
            let mut seen = BTreeSet::new();
            for tok in doc {
                if let Some(i) = self.get(tok.as_ref()) {
                    seen.insert(i);
                }
            }
            for i in seen {
                self.doc_freq[i as usize] += 1;
            }
        }
    }

    pub fn write_file(&self, path: &Path, provenance: &[String]) -> Result<(), CorpusError> {
        let mut f = fs::File::create(path)?;
        for line in provenance {
            writeln!(f, "# {line}")?;
        }
        for w in &self.words {
            writeln!(f, "{w}")?;
        }
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path)?;
        let words: Vec<String> = text
            .lines()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_string())
            .collect();
        Ok(Self::from_words(words))
    }
}

/// Builds the vocabulary from tokenized documents: keeps tokens with
/// document frequency in `[min_df, max_df_ratio * n_docs]`, ordered by
/// descending frequency then lexicographically, truncated to `max_vocab`.
pub fn build_vocabulary<S: AsRef<str>>(
    docs: &[Vec<S>],
    cfg: &PreprocessConfig,
) -> Result<Vocabulary, CorpusError> {
    let mut df: HashMap<&str, u32> = HashMap::new();
    for doc in docs {
        let mut seen = BTreeSet::new();
        for tok in doc {
            seen.insert(tok.as_ref());
        }
        for tok in seen {
            *df.entry(tok).or_insert(0) += 1;
        }
    }
    let n_docs = docs.len() as f64;
    let mut kept: Vec<(&str, u32)> = df
        .into_iter()
        .filter(|&(_, c)| c as usize >= cfg.min_df && c as f64 / n_docs <= cfg.max_df_ratio)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if let Some(cap) = cfg.max_vocab {
        kept.truncate(cap);
    }
    if kept.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    let words = kept.iter().map(|(w, _)| w.to_string()).collect();
    let doc_freq = kept.iter().map(|&(_, c)| c).collect();
    Ok(Vocabulary::from_parts(words, doc_freq))
}

/// Sparse count vector over the vocabulary with an optional class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BowDocument {
    /// (word index, count) pairs sorted by index; all counts positive.
    pub counts: Vec<(u32, u32)>,
    pub token_count: u32,
    pub label: Option<u32>,
}

impl BowDocument {
    /// Distinct in-vocabulary word types, ascending.
    pub fn word_types(&self) -> impl Iterator<Item = u32> + '_ {
        self.counts.iter().map(|&(i, _)| i)
    }

    pub fn n_types(&self) -> usize {
        self.counts.len()
    }

    /// Dense count-normalized frequency vector (sums to 1).
    pub fn freq_vector(&self, vocab_size: usize) -> Array1<f64> {
        let mut v = Array1::zeros(vocab_size);
        let total = self.token_count as f64;
        for &(i, c) in &self.counts {
            v[i as usize] = c as f64 / total;
        }
        v
    }
}

/// Counts in-vocabulary tokens; out-of-vocabulary tokens are dropped
/// silently. Errors when nothing maps into the vocabulary.
pub fn vectorize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Result<BowDocument, CorpusError> {
    let mut counts: HashMap<u32, u32> = HashMap::new();
    for tok in tokens {
        if let Some(i) = vocab.get(tok.as_ref()) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(CorpusError::EmptyDocument);
    }
    let mut counts: Vec<(u32, u32)> = counts.into_iter().collect();
    counts.sort_unstable_by_key(|&(i, _)| i);
    let token_count = counts.iter().map(|&(_, c)| c).sum();
    Ok(BowDocument {
        counts,
        token_count,
        label: None,
    })
}

pub(crate) fn tfidf_component(count: u32, token_count: u32, n_docs: usize, doc_freq: u32) -> f64 {
    if count == 0 || doc_freq == 0 {
        return 0.0;
    }
    (count as f64 / token_count as f64) * (n_docs as f64 / doc_freq as f64).ln()
}

/// Dense TF-IDF vector: component w = (count_w / token_count) * ln(n_docs / df_w).
pub fn tfidf(doc: &BowDocument, vocab: &Vocabulary, n_docs: usize) -> Array1<f64> {
    let mut v = Array1::zeros(vocab.len());
    for &(i, c) in &doc.counts {
        v[i as usize] = tfidf_component(c, doc.token_count, n_docs, vocab.doc_freq(i as usize));
    }
    v
}

/// A fully preprocessed corpus: vocabulary, bag-of-words documents and the
/// in-vocabulary token sequences (used for co-occurrence windows).
#[derive(Debug, Clone)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub docs: Vec<BowDocument>,
    /// In-vocabulary word indices in original token order, aligned with `docs`.
    pub token_seqs: Vec<Vec<u32>>,
    /// Original line number of each kept document.
    pub line_ids: Vec<usize>,
    /// Original line numbers dropped because no token survived.
    pub skipped: Vec<usize>,
}

impl Corpus {
    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn labels(&self) -> Option<Vec<u32>> {
        if self.docs.iter().all(|d| d.label.is_some()) && !self.docs.is_empty() {
            Some(self.docs.iter().map(|d| d.label.unwrap()).collect())
        } else {
            None
        }
    }

    /// Builds vocabulary and vectors from raw document texts.
    pub fn from_texts<S: AsRef<str>>(
        texts: &[S],
        labels: Option<&[u32]>,
        cfg: &PreprocessConfig,
    ) -> Result<Self, CorpusError> {
        if let Some(l) = labels {
            if l.len() != texts.len() {
                return Err(CorpusError::LabelMismatch {
                    labels: l.len(),
                    docs: texts.len(),
                });
            }
        }
        let tokenized: Vec<Vec<String>> =
            texts.iter().map(|t| tokenize(t.as_ref(), cfg)).collect();
        let vocab = build_vocabulary(&tokenized, cfg)?;
        Self::assemble(tokenized, vocab, labels)
    }

    /// Vectorizes texts against an existing vocabulary (document frequencies
    /// are recounted over these texts).
    pub fn from_texts_with_vocab<S: AsRef<str>>(
        texts: &[S],
        labels: Option<&[u32]>,
        mut vocab: Vocabulary,
        cfg: &PreprocessConfig,
    ) -> Result<Self, CorpusError> {
        let tokenized: Vec<Vec<String>> =
            texts.iter().map(|t| tokenize(t.as_ref(), cfg)).collect();
        vocab.recount_doc_freq(&tokenized);
        Self::assemble(tokenized, vocab, labels)
    }

    fn assemble(
        tokenized: Vec<Vec<String>>,
        vocab: Vocabulary,
        labels: Option<&[u32]>,
    ) -> Result<Self, CorpusError> {
        let mut docs = Vec::new();
        let mut token_seqs = Vec::new();
        let mut line_ids = Vec::new();
        let mut skipped = Vec::new();
        for (i, toks) in tokenized.iter().enumerate() {
            match vectorize(toks, &vocab) {
                Ok(mut bow) => {
                    bow.label = labels.map(|l| l[i]);
                    let seq = toks.iter().filter_map(|t| vocab.get(t)).collect();
                    docs.push(bow);
                    token_seqs.push(seq);
                    line_ids.push(i);
                }
                Err(CorpusError::EmptyDocument) => skipped.push(i),
                Err(e) => return Err(e),
            }
        }
        Ok(Self {
            vocab,
            docs,
            token_seqs,
            line_ids,
            skipped,
        })
    }
}

#[derive(Deserialize)]
struct JsonDoc {
    text: String,
    label: Option<u32>,
}

/// Reads raw document texts (and labels when present) from a corpus file.
/// Files ending in `.jsonl`/`.ndjson` are parsed as JSON-lines with fields
/// `text` and optional `label`; anything else is one plain-text document per
/// line.
pub fn read_corpus_file(path: &Path) -> Result<(Vec<String>, Option<Vec<u32>>), CorpusError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let reader = BufReader::new(fs::File::open(path)?);
    if ext == "jsonl" || ext == "ndjson" {
        let mut texts = Vec::new();
        let mut labels = Vec::new();
        let mut any_label = false;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: JsonDoc = serde_json::from_str(&line).map_err(|e| CorpusError::BadJson {
                line: i + 1,
                msg: e.to_string(),
            })?;
            texts.push(doc.text);
            any_label |= doc.label.is_some();
            labels.push(doc.label.unwrap_or(0));
        }
        let labels = if any_label { Some(labels) } else { None };
        Ok((texts, labels))
    } else {
        let texts = reader.lines().collect::<Result<Vec<_>, _>>()?;
        Ok((texts, None))
    }
}

/// Reads one integer label per line, aligned with the corpus by line number.
pub fn read_labels_file(path: &Path) -> Result<Vec<u32>, CorpusError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            l.trim().parse::<u32>().map_err(|e| CorpusError::BadLabel {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Loads a corpus file (plus optional label file) and preprocesses it.
pub fn load_corpus(
    path: &Path,
    labels_path: Option<&Path>,
    cfg: &PreprocessConfig,
) -> Result<Corpus, CorpusError> {
    let (texts, inline_labels) = read_corpus_file(path)?;
    let labels = match labels_path {
        Some(p) => Some(read_labels_file(p)?),
        None => inline_labels,
    };
    Corpus::from_texts(&texts, labels.as_deref(), cfg)
}
