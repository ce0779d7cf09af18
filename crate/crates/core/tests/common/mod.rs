//! Shared test fixtures: synthetic planted-topic corpora.

use mitopic::corpus::{Corpus, PreprocessConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Word lists for a two-topic planted corpus: two disjoint topic
/// vocabularies plus a small pool of shared noise words. All words are
/// alphabetic, lowercase and collide with no stopword.
pub fn planted_word_pools(words_per_topic: usize, n_noise: usize) -> (Vec<String>, Vec<String>, Vec<String>) {
    let make = |prefix: &str, n: usize| -> Vec<String> {
        (0..n)
            .map(|i| format!("{prefix}{}{}", (b'a' + (i / 26) as u8) as char, (b'a' + (i % 26) as u8) as char))
            .collect()
    };
    (
        make("zqa", words_per_topic),
        make("zqb", words_per_topic),
        make("zqn", n_noise),
    )
}

/// Draws `n_docs` documents: each from one of two disjoint topic
/// vocabularies, with `noise_frac` of tokens replaced by shared noise words.
/// Returns raw texts plus binary labels.
pub fn planted_texts(
    n_docs: usize,
    words_per_topic: usize,
    n_noise: usize,
    noise_frac: f64,
    doc_len: std::ops::Range<usize>,
    seed: u64,
) -> (Vec<String>, Vec<u32>) {
    let (topic_a, topic_b, noise) = planted_word_pools(words_per_topic, n_noise);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut texts = Vec::with_capacity(n_docs);
    let mut labels = Vec::with_capacity(n_docs);
    for d in 0..n_docs {
        let label = (d % 2) as u32;
        let pool = if label == 0 { &topic_a } else { &topic_b };
        let len = rng.gen_range(doc_len.clone());
        let tokens: Vec<&str> = (0..len)
            .map(|_| {
                if rng.gen_bool(noise_frac) {
                    noise[rng.gen_range(0..noise.len())].as_str()
                } else {
                    pool[rng.gen_range(0..pool.len())].as_str()
                }
            })
            .collect();
        texts.push(tokens.join(" "));
        labels.push(label);
    }
    (texts, labels)
}

/// The planted corpus the acceptance suite trains on: 400 documents over two
/// disjoint 20-word topic vocabularies with 10% shared noise words.
pub fn planted_corpus_400(seed: u64) -> Corpus {
    let (texts, labels) = planted_texts(400, 20, 4, 0.10, 15..26, seed);
    Corpus::from_texts(&texts, Some(&labels), &PreprocessConfig::default())
        .expect("planted corpus builds")
}
