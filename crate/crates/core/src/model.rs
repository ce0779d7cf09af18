//! The topic model network: document-topic encoder with batch normalization
//! and Gumbel-Softmax sampling, linear topic-word decoder, and the global and
//! local pair discriminators.
//!
//! Every forward path exists twice: a plain version for inference and unit
//! checks, and a tape version ([`ParamNodes`], `*_nodes`) that the trainer
//! differentiates through. Parameters are enumerated in one canonical order
//! (see [`ModelParams::to_flat`]) shared by the optimizer, checkpoints and
//! gradient checks.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::tape::{NodeId, Tape};
use crate::numkernel::{
    batch_norm, batch_norm_eval, softmax_rows, softplus, BatchNormState, KernelError, Mode,
};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("word index {0} is outside the vocabulary (size {1})")]
    IndexOutOfVocabulary(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Softplus,
}

/// Fully connected layer, weight is `out_dim x in_dim`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Symmetric uniform init with a = sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn init<R: Rng + ?Sized>(
        out_dim: usize,
        in_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let a = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((out_dim, in_dim), |_| rng.gen_range(-a..a)),
            bias: Array1::zeros(out_dim),
            activation,
        }
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut out = self.weight.dot(&x) + &self.bias;
        if self.activation == Activation::Softplus {
            out.mapv_inplace(softplus);
        }
        out
    }
}

/// Two dense layers scoring a concatenated pair: softplus hidden, linear
/// scalar output (the pre-sigmoid discriminator score T).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoLayerNet {
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

impl TwoLayerNet {
    pub fn init<R: Rng + ?Sized>(in_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        Self {
            hidden: DenseLayer::init(hidden_dim, in_dim, Activation::Softplus, rng),
            output: DenseLayer::init(1, hidden_dim, Activation::Identity, rng),
        }
    }

    pub fn score(&self, input: ArrayView1<f64>) -> f64 {
        self.output.forward(self.hidden.forward(input).view())[0]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncoderParams {
    pub fc1: DenseLayer,
    pub fc2: DenseLayer,
    pub bn: BatchNormState,
}

/// Topic-word matrix (`vocab x topics`; column k holds topic k's word
/// scores) plus output bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecoderParams {
    pub topic_word: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscriminatorParams {
    /// Scores concat(doc frequency vector, z).
    pub global_net: TwoLayerNet,
    /// Scores concat(word embedding, z).
    pub local_net: TwoLayerNet,
    /// Learned word embeddings, `vocab x embed`.
    pub word_embed: Array2<f64>,
}

/// Gumbel-Softmax sampling configuration. `hard` snaps samples to one-hot
/// with straight-through gradients. `anneal_to` linearly moves the
/// temperature there over the training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GumbelConfig {
    pub temperature: f64,
    pub hard: bool,
    pub anneal_to: Option<f64>,
}

impl Default for GumbelConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            hard: false,
            anneal_to: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub topics: usize,
    pub hidden: usize,
    pub embed: usize,
    pub disc_hidden: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
    pub disc: DiscriminatorParams,
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(dims: ModelDims, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, 0.1).expect("valid stddev");
        // Symmetric init assumes unit-variance inputs; the document inputs
        // are frequency vectors with ~1/V amplitude, so layers reading them
        // get the standard input-scale correction. Without it the encoder
        // can cancel the whole document signal within a few dozen steps and
        // theta collapses to uniform before the discriminators see anything.
        let doc_gain = dims.vocab as f64;
        let mut fc1 = DenseLayer::init(dims.hidden, dims.vocab, Activation::Softplus, rng);
        fc1.weight.mapv_inplace(|w| w * doc_gain);
        let mut global_net = TwoLayerNet::init(dims.vocab + dims.topics, dims.disc_hidden, rng);
        global_net
            .hidden
            .weight
            .slice_mut(ndarray::s![.., ..dims.vocab])
            .mapv_inplace(|w| w * doc_gain);
        Self {
            dims,
            encoder: EncoderParams {
                fc1,
                fc2: DenseLayer::init(dims.topics, dims.hidden, Activation::Identity, rng),
                bn: BatchNormState::new(dims.topics),
            },
            decoder: DecoderParams {
                topic_word: {
                    let a = (6.0 / (dims.vocab + dims.topics) as f64).sqrt();
                    Array2::from_shape_fn((dims.vocab, dims.topics), |_| rng.gen_range(-a..a))
                },
                bias: Array1::zeros(dims.vocab),
            },
            disc: DiscriminatorParams {
                global_net,
                local_net: TwoLayerNet::init(dims.embed + dims.topics, dims.disc_hidden, rng),
                word_embed: Array2::from_shape_fn((dims.vocab, dims.embed), |_| {
                    normal.sample(rng)
                }),
            },
        }
    }

    /// Trainable tensors in canonical order. Batch-norm state is a buffer,
    /// not a parameter: a learnable scale would let the encoder zero out the
    /// normalized activations and collapse theta to uniform, which the batch
    /// norm layer exists to prevent.
    fn tensor_views(&self) -> Vec<TensorView<'_>> {
        use TensorView::*;
        vec![
            M(&self.encoder.fc1.weight),
            V(&self.encoder.fc1.bias),
            M(&self.encoder.fc2.weight),
            V(&self.encoder.fc2.bias),
            M(&self.decoder.topic_word),
            V(&self.decoder.bias),
            M(&self.disc.global_net.hidden.weight),
            V(&self.disc.global_net.hidden.bias),
            M(&self.disc.global_net.output.weight),
            V(&self.disc.global_net.output.bias),
            M(&self.disc.local_net.hidden.weight),
            V(&self.disc.local_net.hidden.bias),
            M(&self.disc.local_net.output.weight),
            V(&self.disc.local_net.output.bias),
            M(&self.disc.word_embed),
        ]
    }

    fn tensor_views_mut(&mut self) -> Vec<TensorViewMut<'_>> {
        use TensorViewMut::*;
        vec![
            M(&mut self.encoder.fc1.weight),
            V(&mut self.encoder.fc1.bias),
            M(&mut self.encoder.fc2.weight),
            V(&mut self.encoder.fc2.bias),
            M(&mut self.decoder.topic_word),
            V(&mut self.decoder.bias),
            M(&mut self.disc.global_net.hidden.weight),
            V(&mut self.disc.global_net.hidden.bias),
            M(&mut self.disc.global_net.output.weight),
            V(&mut self.disc.global_net.output.bias),
            M(&mut self.disc.local_net.hidden.weight),
            V(&mut self.disc.local_net.hidden.bias),
            M(&mut self.disc.local_net.output.weight),
            V(&mut self.disc.local_net.output.bias),
            M(&mut self.disc.word_embed),
        ]
    }

    pub fn flat_len(&self) -> usize {
        self.tensor_views().iter().map(|t| t.len()).sum()
    }

    /// All trainable parameters as one flat vector, canonical order,
    /// row-major within each tensor.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for t in self.tensor_views() {
            match t {
                TensorView::M(m) => out.extend(m.iter()),
                TensorView::V(v) => out.extend(v.iter()),
            }
        }
        out
    }

    /// Inverse of [`ModelParams::to_flat`].
    pub fn set_from_flat(&mut self, flat: &[f64]) {
        let mut pos = 0;
        for t in self.tensor_views_mut() {
            match t {
                TensorViewMut::M(m) => {
                    for v in m.iter_mut() {
                        *v = flat[pos];
                        pos += 1;
                    }
                }
                TensorViewMut::V(v) => {
                    for x in v.iter_mut() {
                        *x = flat[pos];
                        pos += 1;
                    }
                }
            }
        }
        assert_eq!(pos, flat.len(), "flat parameter length mismatch");
    }

    pub fn all_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
            && self.encoder.bn.running_mean.iter().all(|v| v.is_finite())
            && self.encoder.bn.running_var.iter().all(|v| v.is_finite())
    }
}

enum TensorView<'a> {
    M(&'a Array2<f64>),
    V(&'a Array1<f64>),
}

impl TensorView<'_> {
    fn len(&self) -> usize {
        match self {
            TensorView::M(m) => m.len(),
            TensorView::V(v) => v.len(),
        }
    }
}

enum TensorViewMut<'a> {
    M(&'a mut Array2<f64>),
    V(&'a mut Array1<f64>),
}

/// Encoder output: `theta` rows on the topic simplex and the
/// pre-normalization activations `theta_hat`.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub theta: Array2<f64>,
    pub theta_hat: Array2<f64>,
}

/// Encoder forward pass on count-normalized frequency rows.
///
/// Train mode standardizes with batch statistics (batch of >= 2) and updates
/// the running statistics; eval mode uses the stored running statistics.
pub fn encode(
    freqs: &Array2<f64>,
    params: &mut EncoderParams,
    mode: Mode,
) -> Result<Encoded, ModelError> {
    let theta_hat = encode_pre_bn(freqs, params);
    let bn_out = batch_norm(&theta_hat, &mut params.bn, mode)?;
    Ok(Encoded {
        theta: softmax_rows(&bn_out),
        theta_hat,
    })
}

/// Read-only eval-mode encoder forward pass.
pub fn encode_eval(freqs: &Array2<f64>, params: &EncoderParams) -> Encoded {
    let theta_hat = encode_pre_bn(freqs, params);
    let bn_out = batch_norm_eval(&theta_hat, &params.bn);
    Encoded {
        theta: softmax_rows(&bn_out),
        theta_hat,
    }
}

fn encode_pre_bn(freqs: &Array2<f64>, params: &EncoderParams) -> Array2<f64> {
    let fc1 = &params.fc1;
    let mut h = freqs.dot(&fc1.weight.t()) + &fc1.bias;
    h.mapv_inplace(softplus);
    let fc2 = &params.fc2;
    h.dot(&fc2.weight.t()) + &fc2.bias
}

/// One Gumbel-Softmax sample per row: softmax((ln theta + g) / temperature),
/// theta clamped at 1e-12 before the log. With `hard`, rows snap to one-hot
/// at the argmax.
pub fn gumbel_softmax_sample<R: Rng + ?Sized>(
    theta: &Array2<f64>,
    cfg: &GumbelConfig,
    rng: &mut R,
) -> Array2<f64> {
    let noise = crate::numkernel::gumbel_noise(theta.nrows(), theta.ncols(), rng);
    gumbel_softmax_with_noise(theta, &noise, cfg)
}

/// Deterministic part of the Gumbel-Softmax sample, given the noise.
pub fn gumbel_softmax_with_noise(
    theta: &Array2<f64>,
    noise: &Array2<f64>,
    cfg: &GumbelConfig,
) -> Array2<f64> {
    let mut logits = theta.mapv(|t| t.max(1e-12).ln()) + noise;
    logits.mapv_inplace(|x| x / cfg.temperature);
    let soft = softmax_rows(&logits);
    if !cfg.hard {
        return soft;
    }
    let mut hard = Array2::zeros(soft.dim());
    for (i, row) in soft.rows().into_iter().enumerate() {
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        hard[[i, best]] = 1.0;
    }
    hard
}

/// Decoder: x_hat = softmax(topic_word . z + bias), a vocabulary simplex
/// vector.
pub fn decode(z: ArrayView1<f64>, params: &DecoderParams) -> Array1<f64> {
    let logits = params.topic_word.dot(&z) + &params.bias;
    crate::numkernel::softmax(logits.view())
}

/// Batch decoder over rows of `z`.
pub fn decode_batch(z: &Array2<f64>, params: &DecoderParams) -> Array2<f64> {
    let logits = z.dot(&params.topic_word.t()) + &params.bias;
    softmax_rows(&logits)
}

/// Pre-sigmoid discriminator score for a (document, topic vector) pair.
pub fn discriminate_global(
    doc_freq: ArrayView1<f64>,
    z: ArrayView1<f64>,
    params: &DiscriminatorParams,
) -> f64 {
    let mut input = Array1::zeros(doc_freq.len() + z.len());
    input.slice_mut(ndarray::s![..doc_freq.len()]).assign(&doc_freq);
    input.slice_mut(ndarray::s![doc_freq.len()..]).assign(&z);
    params.global_net.score(input.view())
}

/// Pre-sigmoid discriminator score for a (word, topic vector) pair.
pub fn discriminate_local(
    word_index: usize,
    z: ArrayView1<f64>,
    params: &DiscriminatorParams,
) -> Result<f64, ModelError> {
    let vocab = params.word_embed.nrows();
    if word_index >= vocab {
        return Err(ModelError::IndexOutOfVocabulary(word_index, vocab));
    }
    let embed = params.word_embed.row(word_index);
    let mut input = Array1::zeros(embed.len() + z.len());
    input.slice_mut(ndarray::s![..embed.len()]).assign(&embed);
    input.slice_mut(ndarray::s![embed.len()..]).assign(&z);
    Ok(params.local_net.score(input.view()))
}

/// Indices of the `m` largest entries of topic `k`'s column, descending,
/// ties broken by ascending index.
pub fn top_words(params: &DecoderParams, k: usize, m: usize) -> Vec<usize> {
    let col = params.topic_word.index_axis(Axis(1), k);
    let mut idx: Vec<usize> = (0..col.len()).collect();
    idx.sort_by(|&a, &b| {
        col[b]
            .partial_cmp(&col[a])
            .expect("finite topic-word entries")
            .then(a.cmp(&b))
    });
    idx.truncate(m);
    idx
}

/// Tape leaves for the model tensors. The batch-norm scale/shift are leaves
/// too (the graph needs them) but are buffers, excluded from the trainable
/// flat order.
pub struct ParamNodes {
    pub fc1_w: NodeId,
    pub fc1_b: NodeId,
    pub fc2_w: NodeId,
    pub fc2_b: NodeId,
    pub bn_gamma: NodeId,
    pub bn_beta: NodeId,
    pub topic_word: NodeId,
    pub dec_bias: NodeId,
    pub g_hidden_w: NodeId,
    pub g_hidden_b: NodeId,
    pub g_out_w: NodeId,
    pub g_out_b: NodeId,
    pub l_hidden_w: NodeId,
    pub l_hidden_b: NodeId,
    pub l_out_w: NodeId,
    pub l_out_b: NodeId,
    pub word_embed: NodeId,
    bn_eps: f64,
}

impl ParamNodes {
    pub fn insert(tape: &mut Tape, params: &ModelParams) -> Self {
        let e = &params.encoder;
        let d = &params.decoder;
        let ds = &params.disc;
        Self {
            fc1_w: tape.leaf(e.fc1.weight.clone()),
            fc1_b: tape.row_leaf(&e.fc1.bias),
            fc2_w: tape.leaf(e.fc2.weight.clone()),
            fc2_b: tape.row_leaf(&e.fc2.bias),
            bn_gamma: tape.row_leaf(&e.bn.gamma),
            bn_beta: tape.row_leaf(&e.bn.beta),
            topic_word: tape.leaf(d.topic_word.clone()),
            dec_bias: tape.row_leaf(&d.bias),
            g_hidden_w: tape.leaf(ds.global_net.hidden.weight.clone()),
            g_hidden_b: tape.row_leaf(&ds.global_net.hidden.bias),
            g_out_w: tape.leaf(ds.global_net.output.weight.clone()),
            g_out_b: tape.row_leaf(&ds.global_net.output.bias),
            l_hidden_w: tape.leaf(ds.local_net.hidden.weight.clone()),
            l_hidden_b: tape.row_leaf(&ds.local_net.hidden.bias),
            l_out_w: tape.leaf(ds.local_net.output.weight.clone()),
            l_out_b: tape.row_leaf(&ds.local_net.output.bias),
            word_embed: tape.leaf(ds.word_embed.clone()),
            bn_eps: e.bn.eps,
        }
    }

    /// Node ids of the trainable tensors in the canonical flat order.
    pub fn ids(&self) -> [NodeId; 15] {
        [
            self.fc1_w,
            self.fc1_b,
            self.fc2_w,
            self.fc2_b,
            self.topic_word,
            self.dec_bias,
            self.g_hidden_w,
            self.g_hidden_b,
            self.g_out_w,
            self.g_out_b,
            self.l_hidden_w,
            self.l_hidden_b,
            self.l_out_w,
            self.l_out_b,
            self.word_embed,
        ]
    }

    /// Gradients of every parameter flattened into the canonical order.
    pub fn flat_grads(&self, tape: &Tape, grads: &crate::numkernel::tape::Gradients) -> Vec<f64> {
        let mut out = Vec::new();
        for id in self.ids() {
            debug_assert_eq!(tape.value(id).dim(), grads.wrt(id).dim());
            out.extend(grads.wrt(id).iter());
        }
        out
    }
}

/// Tape-based encoder forward pass (train-mode batch norm). Returns theta,
/// theta_hat and the batch statistics for running-stat updates.
pub fn encode_nodes(
    tape: &mut Tape,
    x_freq: NodeId,
    p: &ParamNodes,
) -> (NodeId, NodeId, Array1<f64>, Array1<f64>) {
    debug_assert!(tape.value(x_freq).nrows() >= 2, "train-mode encode needs a batch");
    let w1t = tape.transpose(p.fc1_w);
    let h1 = tape.matmul(x_freq, w1t);
    let h1 = tape.add_row(h1, p.fc1_b);
    let h1 = tape.softplus(h1);
    let w2t = tape.transpose(p.fc2_w);
    let theta_hat = tape.matmul(h1, w2t);
    let theta_hat = tape.add_row(theta_hat, p.fc2_b);
    let (bn_out, mean, var) = tape.batch_norm(theta_hat, p.bn_gamma, p.bn_beta, p.bn_eps);
    let theta = tape.softmax_rows(bn_out);
    (theta, theta_hat, mean, var)
}

/// Tape-based Gumbel-Softmax sample with externally supplied noise.
pub fn gumbel_nodes(tape: &mut Tape, theta: NodeId, noise: &Array2<f64>, cfg: &GumbelConfig) -> NodeId {
    let ln = tape.ln_clamped(theta, 1e-12);
    let g = tape.leaf(noise.clone());
    let sum = tape.add(ln, g);
    let scaled = tape.scale(sum, 1.0 / cfg.temperature);
    let soft = tape.softmax_rows(scaled);
    if cfg.hard {
        tape.hardmax_rows(soft)
    } else {
        soft
    }
}

/// Tape-based batch decoder.
pub fn decode_nodes(tape: &mut Tape, z: NodeId, p: &ParamNodes) -> NodeId {
    let twt = tape.transpose(p.topic_word);
    let logits = tape.matmul(z, twt);
    let logits = tape.add_row(logits, p.dec_bias);
    tape.softmax_rows(logits)
}

/// Tape-based two-layer discriminator scores for a batch of inputs
/// (`n x in_dim` -> `n x 1`).
pub fn net_score_nodes(
    tape: &mut Tape,
    input: NodeId,
    hidden_w: NodeId,
    hidden_b: NodeId,
    out_w: NodeId,
    out_b: NodeId,
) -> NodeId {
    let w1t = tape.transpose(hidden_w);
    let h = tape.matmul(input, w1t);
    let h = tape.add_row(h, hidden_b);
    let h = tape.softplus(h);
    let w2t = tape.transpose(out_w);
    let s = tape.matmul(h, w2t);
    tape.add_row(s, out_b)
}
