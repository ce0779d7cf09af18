//! End-to-end training: seeded batching, negative selection, one Adam step
//! per minibatch over all parameter groups, the JSON-lines training log, and
//! checkpointing.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Vocabulary};
use crate::model::{GumbelConfig, ModelDims, ModelError, ModelParams, ParamNodes};
use crate::negatives::{
    word_complement, DissimilarityPools, NegStrategyKind, NegativeStrategy, NegativesError,
};
use crate::numkernel::tape::Tape;
use crate::numkernel::{adam_step, AdamState};
use crate::objective::{assemble_losses, Ablation, BatchInputs, LossBreakdown, LossWeights};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("corpus is empty after preprocessing")]
    EmptyCorpus,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("non-finite parameters after epoch {epoch}")]
    NonFiniteParams { epoch: usize },
    #[error(transparent)]
    Negatives(#[from] NegativesError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Full training configuration. `paper` mirrors the published settings;
/// `desk` is the small-scale preset the test suite uses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub topics: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weights: LossWeights,
    pub gumbel: GumbelConfig,
    pub strategy: NegativeStrategy,
    pub ablation: Ablation,
    pub seed: u64,
    pub hidden: usize,
    pub embed_dim: usize,
    pub disc_hidden: usize,
    /// When set, the training log, periodic checkpoints and the final
    /// checkpoint are written here.
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
    /// Write `ckpt_epoch<N>` every N epochs; 0 writes only `final`.
    pub checkpoint_every: usize,
    /// Optional cache file for the similarity pools, keyed by corpus hash.
    #[serde(skip)]
    pub pool_cache: Option<PathBuf>,
}

impl TrainConfig {
    /// Published defaults: 100 epochs, batch 128, lr 1e-4.
    pub fn paper(topics: usize) -> Self {
        Self {
            topics,
            epochs: 100,
            batch_size: 128,
            lr: 1e-4,
            weights: LossWeights::default(),
            gumbel: GumbelConfig::default(),
            strategy: NegativeStrategy::default(),
            ablation: Ablation::default(),
            seed: 1,
            hidden: 256,
            embed_dim: 64,
            disc_hidden: 128,
            out_dir: None,
            checkpoint_every: 0,
            pool_cache: None,
        }
    }

    /// Desk-scale preset: 50 epochs, batch 32, smaller widths, faster lr.
    pub fn desk(topics: usize) -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            lr: 1e-3,
            hidden: 64,
            embed_dim: 32,
            disc_hidden: 64,
            ..Self::paper(topics)
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.epochs < 1 {
            return fail("epochs must be >= 1");
        }
        if self.batch_size < 2 {
            return fail("batch_size must be >= 2 (batch norm)");
        }
        if self.topics < 2 {
            return fail("topics must be >= 2");
        }
        if !(self.lr > 0.0) {
            return fail("lr must be positive");
        }
        if !(self.gumbel.temperature > 0.0) {
            return fail("temperature must be positive");
        }
        if let Some(t) = self.gumbel.anneal_to {
            if !(t > 0.0) {
                return fail("anneal target must be positive");
            }
        }
        if !(0.0..=1.0).contains(&self.weights.mu) {
            return fail("mu must lie in [0, 1]");
        }
        if self.weights.beta < 0.0 || self.weights.gamma < 0.0 {
            return fail("beta and gamma must be nonnegative");
        }
        if self.hidden < 1 || self.embed_dim < 1 || self.disc_hidden < 1 {
            return fail("network widths must be >= 1");
        }
        self.strategy
            .validate()
            .map_err(TrainError::InvalidConfig)?;
        Ok(())
    }

    fn dims(&self, vocab: usize) -> ModelDims {
        ModelDims {
            vocab,
            topics: self.topics,
            hidden: self.hidden,
            embed: self.embed_dim,
            disc_hidden: self.disc_hidden,
        }
    }

    /// Per-epoch temperature under optional linear annealing.
    fn temperature_at(&self, epoch: usize) -> f64 {
        match self.gumbel.anneal_to {
            None => self.gumbel.temperature,
            Some(target) => {
                if self.epochs <= 1 {
                    self.gumbel.temperature
                } else {
                    let frac = epoch as f64 / (self.epochs - 1) as f64;
                    self.gumbel.temperature + (target - self.gumbel.temperature) * frac
                }
            }
        }
    }
}

/// One training-log record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_global: f64,
    pub l_local: f64,
    pub l_kl: f64,
    pub l_e: f64,
    pub l_r: f64,
    pub l_total: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Batch-averaged loss parts, one entry per epoch.
    pub epochs: Vec<LossBreakdown>,
    pub seconds: f64,
    pub final_checkpoint: Option<PathBuf>,
}

/// Trains a model on the corpus. Deterministic under a fixed seed: batch
/// shuffling, Gumbel noise and negative selection all draw from one seeded
/// generator in a fixed order.
pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<(ModelParams, TrainReport), TrainError> {
    config.validate()?;
    let n_docs = corpus.n_docs();
    if n_docs == 0 {
        return Err(TrainError::EmptyCorpus);
    }
    if config.ablation.use_global && n_docs < config.strategy.n_neg_docs + 1 {
        return Err(TrainError::Negatives(NegativesError::CorpusTooSmall {
            need: config.strategy.n_neg_docs + 1,
            have: n_docs,
        }));
    }
    let vocab_size = corpus.vocab.len();
    let started = Instant::now();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(config.dims(vocab_size), &mut rng);
    let mut adam = AdamState::new(params.flat_len(), config.lr);

    let pools = if config.ablation.use_global && config.strategy.kind == NegStrategyKind::Similarity
    {
        let hash = corpus.vocab.hash();
        let cached = config
            .pool_cache
            .as_deref()
            .and_then(|p| DissimilarityPools::load(p, &hash));
        let pools = match cached {
            Some(p) if p.pools.len() == n_docs => p,
            _ => {
                let built = DissimilarityPools::build(corpus, config.strategy.pool_size)?;
                if let Some(path) = config.pool_cache.as_deref() {
                    built.save(path)?;
                }
                built
            }
        };
        Some(pools)
    } else {
        None
    };

    // Per-document word complements, needed for local negatives.
    let complements: Vec<Vec<u32>> = if config.ablation.use_local {
        corpus
            .docs
            .iter()
            .map(|d| word_complement(d, vocab_size))
            .collect()
    } else {
        Vec::new()
    };
    if config.ablation.use_local {
        if let Some(doc) = complements.iter().position(|c| c.is_empty()) {
            let _ = doc;
            return Err(TrainError::Negatives(
                NegativesError::NoNegativeWordsAvailable,
            ));
        }
    }

    let mut out = match &config.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let log = fs::File::create(dir.join("log.jsonl"))?;
            Some((dir.clone(), BufWriter::new(log)))
        }
        None => None,
    };

    let mut order: Vec<usize> = (0..n_docs).collect();
    let mut epoch_reports = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let epoch_start = Instant::now();
        let gumbel_cfg = GumbelConfig {
            temperature: config.temperature_at(epoch),
            ..config.gumbel.clone()
        };
        order.shuffle(&mut rng);

        let mut sums = LossBreakdown::default();
        let mut n_batches = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            // batch norm needs >= 2 rows; drop a trailing singleton
            if chunk.len() < 2 {
                continue;
            }
            let b = chunk.len();
            let mut freqs = Array2::zeros((b, vocab_size));
            for (row, &doc_id) in chunk.iter().enumerate() {
                freqs
                    .row_mut(row)
                    .assign(&corpus.docs[doc_id].freq_vector(vocab_size));
            }
            let gumbel = crate::numkernel::gumbel_noise(b, config.topics, &mut rng);

            let (neg_docs, neg_doc_anchor) = if config.ablation.use_global {
                let mut rows = Array2::zeros((b * config.strategy.n_neg_docs, vocab_size));
                let mut anchors = Vec::with_capacity(b * config.strategy.n_neg_docs);
                let mut r = 0;
                for (row, &doc_id) in chunk.iter().enumerate() {
                    let picks = match (&pools, config.strategy.kind) {
                        (Some(p), NegStrategyKind::Similarity) => {
                            p.draw(doc_id, config.strategy.n_neg_docs, &mut rng)
                        }
                        _ => crate::negatives::select_negatives_random(
                            n_docs,
                            doc_id,
                            config.strategy.n_neg_docs,
                            &mut rng,
                        )?,
                    };
                    for neg_id in picks {
                        rows.row_mut(r)
                            .assign(&corpus.docs[neg_id].freq_vector(vocab_size));
                        anchors.push(row);
                        r += 1;
                    }
                }
                (rows, anchors)
            } else {
                (Array2::zeros((0, vocab_size)), Vec::new())
            };

            let mut pos_words = Vec::new();
            let mut neg_words = Vec::new();
            if config.ablation.use_local {
                for (row, &doc_id) in chunk.iter().enumerate() {
                    let comp = &complements[doc_id];
                    for w in corpus.docs[doc_id].word_types() {
                        pos_words.push((row, w as usize));
                        for _ in 0..config.strategy.n_neg_words {
                            let pick = comp[rng.gen_range(0..comp.len())];
                            neg_words.push((row, pick as usize));
                        }
                    }
                }
            }

            let inputs = BatchInputs {
                freqs: &freqs,
                gumbel: &gumbel,
                neg_docs: &neg_docs,
                neg_doc_anchor: &neg_doc_anchor,
                pos_words: &pos_words,
                neg_words: &neg_words,
            };

            let mut tape = Tape::new();
            let pnodes = ParamNodes::insert(&mut tape, &params);
            let (nodes, bn_mean, bn_var) = assemble_losses(
                &mut tape,
                &pnodes,
                &inputs,
                &config.weights,
                &config.ablation,
                &gumbel_cfg,
            );
            let bd = nodes.breakdown(&tape);
            if !bd.l_total.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            let grads = tape.backward(nodes.l_total);
            let flat_grads = pnodes.flat_grads(&tape, &grads);
            let mut flat_params = params.to_flat();
            adam_step(&mut flat_params, &flat_grads, &mut adam);
            params.set_from_flat(&flat_params);
            params.encoder.bn.update_running(&bn_mean, &bn_var);

            sums.l_global += bd.l_global;
            sums.l_local += bd.l_local;
            sums.l_kl += bd.l_kl;
            sums.l_e += bd.l_e;
            sums.l_r += bd.l_r;
            sums.l_total += bd.l_total;
            n_batches += 1;
        }

        if !params.all_finite() {
            return Err(TrainError::NonFiniteParams { epoch });
        }
        let nb = n_batches.max(1) as f64;
        let mean = LossBreakdown {
            l_global: sums.l_global / nb,
            l_local: sums.l_local / nb,
            l_kl: sums.l_kl / nb,
            l_e: sums.l_e / nb,
            l_r: sums.l_r / nb,
            l_total: sums.l_total / nb,
        };
        epoch_reports.push(mean);

        if let Some((dir, log)) = out.as_mut() {
            let record = EpochRecord {
                epoch,
                l_global: mean.l_global,
                l_local: mean.l_local,
                l_kl: mean.l_kl,
                l_e: mean.l_e,
                l_r: mean.l_r,
                l_total: mean.l_total,
                seconds: epoch_start.elapsed().as_secs_f64(),
            };
            writeln!(log, "{}", serde_json::to_string(&record).expect("serializable record"))?;
            if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 {
                let path = dir.join(format!("ckpt_epoch{}", epoch + 1));
                save_checkpoint(&params, &corpus.vocab, config, &path)?;
            }
        }
    }

    let final_checkpoint = match out.as_mut() {
        Some((dir, log)) => {
            log.flush()?;
            let path = dir.join("final");
            save_checkpoint(&params, &corpus.vocab, config, &path)?;
            corpus
                .vocab
                .write_file(&dir.join("vocab.txt"), &[format!("seed {}", config.seed)])
                .ok();
            Some(path)
        }
        None => None,
    };

    Ok((
        params,
        TrainReport {
            epochs: epoch_reports,
            seconds: started.elapsed().as_secs_f64(),
            final_checkpoint,
        },
    ))
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("incompatible vocabulary: checkpoint hash {found} != expected {expected}")]
    IncompatibleVocabulary { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const CHECKPOINT_FORMAT: &str = "mitopic-checkpoint-v1";

/// Self-describing checkpoint: config echo, vocabulary (words + hash) and
/// every parameter tensor with its shape.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: CheckpointConfig,
    pub vocab_hash: String,
    pub vocab_words: Vec<String>,
    pub model: ModelParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub topics: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub disc_hidden: usize,
    pub vocab_size: usize,
    pub temperature: f64,
    pub seed: u64,
}

pub fn save_checkpoint(
    params: &ModelParams,
    vocab: &Vocabulary,
    config: &TrainConfig,
    path: &Path,
) -> Result<(), CheckpointError> {
    let ckpt = Checkpoint {
        format: CHECKPOINT_FORMAT.to_string(),
        config: CheckpointConfig {
            topics: params.dims.topics,
            hidden: params.dims.hidden,
            embed_dim: params.dims.embed,
            disc_hidden: params.dims.disc_hidden,
            vocab_size: vocab.len(),
            temperature: config.gumbel.temperature,
            seed: config.seed,
        },
        vocab_hash: vocab.hash(),
        vocab_words: vocab.words().to_vec(),
        model: params.clone(),
    };
    let json = serde_json::to_string(&ckpt).expect("serializable checkpoint");
    fs::write(path, json)?;
    Ok(())
}

/// Loads a checkpoint; when `expected_vocab_hash` is given it must match the
/// stored hash.
pub fn load_checkpoint(
    path: &Path,
    expected_vocab_hash: Option<&str>,
) -> Result<Checkpoint, CheckpointError> {
    let text = fs::read_to_string(path)?;
    let ckpt: Checkpoint =
        serde_json::from_str(&text).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    if ckpt.format != CHECKPOINT_FORMAT {
        return Err(CheckpointError::Corrupt(format!(
            "unknown format {:?}",
            ckpt.format
        )));
    }
    if ckpt.model.dims.vocab != ckpt.vocab_words.len() {
        return Err(CheckpointError::Corrupt(
            "vocabulary length disagrees with model dims".into(),
        ));
    }
    if let Some(expected) = expected_vocab_hash {
        if expected != ckpt.vocab_hash {
            return Err(CheckpointError::IncompatibleVocabulary {
                expected: expected.to_string(),
                found: ckpt.vocab_hash,
            });
        }
    }
    Ok(ckpt)
}
