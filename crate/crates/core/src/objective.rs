//! Training losses: variational-JS global and local mutual-information terms
//! with negative examples, KL to the uniform prior, Frobenius reconstruction,
//! and the weighted total.
//!
//! [`compute_losses`] evaluates everything on a throwaway tape;
//! [`assemble_losses`] builds the same graph on a caller-owned tape so the
//! trainer can differentiate through it.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::model::{decode_nodes, encode_nodes, gumbel_nodes, GumbelConfig, ModelParams, ParamNodes};
use crate::numkernel::sigmoid;
use crate::numkernel::tape::{NodeId, Tape, SIGMA_CLAMP};

/// Loss weights: `beta` scales both MI terms, `gamma` the KL regularizer,
/// `mu` blends reconstruction against the encoder loss.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossWeights {
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            beta: 1.0,
            gamma: 1.0,
            mu: 0.4,
        }
    }
}

/// Gates for the ablation variants: dropping the global and/or local
/// mutual-information terms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Ablation {
    pub use_global: bool,
    pub use_local: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            use_global: true,
            use_local: true,
        }
    }
}

/// Scalar loss parts for one batch (or one epoch when averaged). Disabled
/// ablation terms are reported as zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_global: f64,
    pub l_local: f64,
    pub l_kl: f64,
    pub l_e: f64,
    pub l_r: f64,
    pub l_total: f64,
}

fn ln_clamped_sigmoid(t: f64) -> f64 {
    sigmoid(t).clamp(SIGMA_CLAMP, 1.0 - SIGMA_CLAMP).ln()
}

/// Variational JS bound term: mean over positive scores of ln(sigma(T)) plus
/// mean over negative scores of ln(1 - sigma(T)). Sigmoid outputs are
/// clamped to keep the logs finite; the term is always <= 0 with supremum 0
/// and equals -2 ln 2 for an uninformative discriminator.
pub fn js_mi_term(pos_scores: &[f64], neg_scores: &[f64]) -> f64 {
    assert!(!pos_scores.is_empty() && !neg_scores.is_empty());
    let pos: f64 =
        pos_scores.iter().map(|&t| ln_clamped_sigmoid(t)).sum::<f64>() / pos_scores.len() as f64;
    let neg: f64 = neg_scores
        .iter()
        .map(|&t| ln_clamped_sigmoid(-t))
        .sum::<f64>()
        / neg_scores.len() as f64;
    pos + neg
}

/// KL(theta || uniform) = sum_k theta_k ln(K theta_k), with 0 ln 0 := 0 and
/// the log argument clamped at 1e-12. Lies in [0, ln K].
pub fn kl_to_uniform(theta: &[f64]) -> f64 {
    let k = theta.len() as f64;
    theta
        .iter()
        .map(|&t| if t > 0.0 { t * (k * t.max(1e-12)).ln() } else { 0.0 })
        .sum()
}

/// Squared Euclidean distance between the reconstruction and the observed
/// frequency vector.
pub fn reconstruction_loss(x_hat: &[f64], x_freq: &[f64]) -> f64 {
    assert_eq!(x_hat.len(), x_freq.len());
    x_hat
        .iter()
        .zip(x_freq)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum()
}

/// Weighted total: mu * l_r + (1 - mu) * l_e.
pub fn total_loss(l_r: f64, l_e: f64, weights: &LossWeights) -> f64 {
    weights.mu * l_r + (1.0 - weights.mu) * l_e
}

/// Encoder loss from its stored parts; the identity the reported breakdown
/// must satisfy. Disabled terms contribute nothing.
pub fn encoder_loss_from_parts(
    l_global: f64,
    l_local: f64,
    l_kl: f64,
    weights: &LossWeights,
    ablation: &Ablation,
) -> f64 {
    let mut l_e = weights.gamma * l_kl;
    if ablation.use_global {
        l_e -= weights.beta * l_global;
    }
    if ablation.use_local {
        l_e -= weights.beta * l_local;
    }
    l_e
}

/// Everything one loss evaluation needs besides the parameters. Negative
/// pairings and Gumbel noise are supplied by the caller so evaluations are
/// deterministic.
pub struct BatchInputs<'a> {
    /// Count-normalized document rows, `B x V`.
    pub freqs: &'a Array2<f64>,
    /// Gumbel noise for the one z sample per document, `B x K`.
    pub gumbel: &'a Array2<f64>,
    /// Frequency rows of the negative documents, `R x V`.
    pub neg_docs: &'a Array2<f64>,
    /// Anchor batch row for each negative document row.
    pub neg_doc_anchor: &'a [usize],
    /// Positive (batch row, word index) pairs: each document's distinct
    /// in-vocabulary word types.
    pub pos_words: &'a [(usize, usize)],
    /// Negative (batch row, word index) pairs: words absent from the anchor
    /// document.
    pub neg_words: &'a [(usize, usize)],
}

/// Graph handles for the assembled batch loss.
pub struct LossNodes {
    pub theta: NodeId,
    pub z: NodeId,
    pub x_hat: NodeId,
    pub l_global: Option<NodeId>,
    pub l_local: Option<NodeId>,
    pub l_kl: NodeId,
    pub l_e: NodeId,
    pub l_r: NodeId,
    pub l_total: NodeId,
}

impl LossNodes {
    pub fn breakdown(&self, tape: &Tape) -> LossBreakdown {
        LossBreakdown {
            l_global: self.l_global.map_or(0.0, |n| tape.scalar(n)),
            l_local: self.l_local.map_or(0.0, |n| tape.scalar(n)),
            l_kl: tape.scalar(self.l_kl),
            l_e: tape.scalar(self.l_e),
            l_r: tape.scalar(self.l_r),
            l_total: tape.scalar(self.l_total),
        }
    }
}

/// Every theta, z and x_hat row must stay on its simplex to 1e-9; checked
/// inline on every batch in debug builds.
#[inline]
fn debug_assert_simplex(m: &Array2<f64>) {
    if cfg!(debug_assertions) {
        for row in m.rows() {
            debug_assert!(
                (row.sum() - 1.0).abs() < 1e-9 && row.iter().all(|&v| v >= 0.0),
                "row left the simplex: sum {}",
                row.sum()
            );
        }
    }
}

/// Per-document weights that turn a flat row list into "mean over documents
/// of the per-document mean": the row for document d weighs 1 / (B * rows_d).
fn per_doc_mean_weights(pairs: &[(usize, usize)], batch_size: usize) -> Array2<f64> {
    let mut counts = vec![0usize; batch_size];
    for &(d, _) in pairs {
        counts[d] += 1;
    }
    let mut w = Array2::zeros((pairs.len(), 1));
    for (r, &(d, _)) in pairs.iter().enumerate() {
        w[[r, 0]] = 1.0 / (batch_size as f64 * counts[d] as f64);
    }
    w
}

/// Builds the full loss graph for one batch. Returns the handles plus the
/// encoder batch-norm statistics for running-stat updates.
pub fn assemble_losses(
    tape: &mut Tape,
    p: &ParamNodes,
    inputs: &BatchInputs,
    weights: &LossWeights,
    ablation: &Ablation,
    gumbel_cfg: &GumbelConfig,
) -> (LossNodes, Array1<f64>, Array1<f64>) {
    let batch_size = inputs.freqs.nrows();
    let topics = inputs.gumbel.ncols();

    let x = tape.leaf(inputs.freqs.clone());
    let (theta, _theta_hat, bn_mean, bn_var) = encode_nodes(tape, x, p);
    let z = gumbel_nodes(tape, theta, inputs.gumbel, gumbel_cfg);
    let x_hat = decode_nodes(tape, z, p);
    debug_assert_simplex(tape.value(theta));
    debug_assert_simplex(tape.value(z));
    debug_assert_simplex(tape.value(x_hat));

    // Reconstruction: squared Frobenius norm of the batch residual matrix
    // (sums over documents, unlike the per-document means of the MI and KL
    // terms; this keeps reconstruction competitive with the prior pressure).
    let diff = tape.sub(x_hat, x);
    let sq = tape.mul_elem(diff, diff);
    let l_r = tape.sum_all(sq);

    // KL to the uniform categorical, mean over documents.
    let ln_theta = tape.ln_clamped(theta, 1e-12);
    let ln_k_theta = tape.add_scalar(ln_theta, (topics as f64).ln());
    let kl_terms = tape.mul_elem(theta, ln_k_theta);
    let kl_sum = tape.sum_all(kl_terms);
    let l_kl = tape.scale(kl_sum, 1.0 / batch_size as f64);

    let l_global = if ablation.use_global {
        debug_assert!(!inputs.neg_doc_anchor.is_empty(), "global term needs negatives");
        let pos_in = tape.concat_cols(x, z);
        let pos_scores = crate::model::net_score_nodes(
            tape, pos_in, p.g_hidden_w, p.g_hidden_b, p.g_out_w, p.g_out_b,
        );
        let pos_ls = tape.log_sigmoid(pos_scores);
        let pos_mean = tape.mean_all(pos_ls);

        let negs = tape.leaf(inputs.neg_docs.clone());
        let z_anchor = tape.gather_rows(z, inputs.neg_doc_anchor.to_vec());
        let neg_in = tape.concat_cols(negs, z_anchor);
        let neg_scores = crate::model::net_score_nodes(
            tape, neg_in, p.g_hidden_w, p.g_hidden_b, p.g_out_w, p.g_out_b,
        );
        let neg_neg = tape.scale(neg_scores, -1.0);
        let neg_ls = tape.log_sigmoid(neg_neg);
        let neg_mean = tape.mean_all(neg_ls);
        Some(tape.add(pos_mean, neg_mean))
    } else {
        None
    };

    let l_local = if ablation.use_local {
        debug_assert!(
            !inputs.pos_words.is_empty() && !inputs.neg_words.is_empty(),
            "local term needs word pairs"
        );
        let build = |tape: &mut Tape, pairs: &[(usize, usize)], negate: bool| {
            let word_rows: Vec<usize> = pairs.iter().map(|&(_, w)| w).collect();
            let doc_rows: Vec<usize> = pairs.iter().map(|&(d, _)| d).collect();
            let embeds = tape.gather_rows(p.word_embed, word_rows);
            let z_rows = tape.gather_rows(z, doc_rows);
            let input = tape.concat_cols(embeds, z_rows);
            let scores = crate::model::net_score_nodes(
                tape, input, p.l_hidden_w, p.l_hidden_b, p.l_out_w, p.l_out_b,
            );
            let scores = if negate { tape.scale(scores, -1.0) } else { scores };
            let ls = tape.log_sigmoid(scores);
            let w = per_doc_mean_weights(pairs, batch_size);
            tape.weighted_sum_all(ls, w)
        };
        let pos = build(tape, inputs.pos_words, false);
        let neg = build(tape, inputs.neg_words, true);
        Some(tape.add(pos, neg))
    } else {
        None
    };

    // l_e = -beta * l_global - beta * l_local + gamma * l_kl
    let mut l_e = tape.scale(l_kl, weights.gamma);
    if let Some(g) = l_global {
        let t = tape.scale(g, -weights.beta);
        l_e = tape.add(l_e, t);
    }
    if let Some(l) = l_local {
        let t = tape.scale(l, -weights.beta);
        l_e = tape.add(l_e, t);
    }

    let wr = tape.scale(l_r, weights.mu);
    let we = tape.scale(l_e, 1.0 - weights.mu);
    let l_total = tape.add(wr, we);

    (
        LossNodes {
            theta,
            z,
            x_hat,
            l_global,
            l_local,
            l_kl,
            l_e,
            l_r,
            l_total,
        },
        bn_mean,
        bn_var,
    )
}

/// Evaluates the batch losses without keeping the graph around.
///
/// Uses train-mode batch normalization (the batch must have >= 2 rows) but
/// leaves running statistics untouched.
pub fn compute_losses(
    params: &ModelParams,
    inputs: &BatchInputs,
    weights: &LossWeights,
    ablation: &Ablation,
    gumbel_cfg: &GumbelConfig,
) -> LossBreakdown {
    let mut tape = Tape::new();
    let p = ParamNodes::insert(&mut tape, params);
    let (nodes, _, _) = assemble_losses(&mut tape, &p, inputs, weights, ablation, gumbel_cfg);
    nodes.breakdown(&tape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelDims, TwoLayerNet};
    use ndarray::Array1;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn js_uninformative_discriminator() {
        let v = js_mi_term(&[0.0], &[0.0]);
        assert_abs_diff_eq!(v, -2.0 * 2.0f64.ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(v, -1.38629, epsilon = 1e-5);
    }

    #[test]
    fn js_saturated_optimum_is_near_zero() {
        let v = js_mi_term(&[40.0], &[-40.0]);
        assert!(v.abs() < 1e-6, "saturated js {v}");
    }

    #[test]
    fn js_direct_value() {
        let v = js_mi_term(&[2.0], &[-1.0]);
        assert_abs_diff_eq!(v, -0.44019, epsilon = 1e-5);
    }

    #[test]
    fn kl_uniform_is_zero() {
        for k in [2, 4, 7] {
            let theta = vec![1.0 / k as f64; k];
            assert_abs_diff_eq!(kl_to_uniform(&theta), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn kl_one_hot_is_ln_k() {
        let theta = [1.0, 0.0, 0.0, 0.0];
        assert_abs_diff_eq!(kl_to_uniform(&theta), 4.0f64.ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(kl_to_uniform(&theta), 1.38629, epsilon = 1e-5);
    }

    #[test]
    fn kl_half_support() {
        let theta = [0.5, 0.5, 0.0, 0.0];
        assert_abs_diff_eq!(kl_to_uniform(&theta), 2.0f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn reconstruction_examples() {
        assert_abs_diff_eq!(
            reconstruction_loss(&[0.3, 0.7], &[0.3, 0.7]),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            reconstruction_loss(&[0.5, 0.5], &[1.0, 0.0]),
            0.5,
            epsilon = 1e-12
        );
        // symmetry
        assert_abs_diff_eq!(
            reconstruction_loss(&[0.2, 0.8], &[0.6, 0.4]),
            reconstruction_loss(&[0.6, 0.4], &[0.2, 0.8]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn total_loss_examples() {
        let w = LossWeights::default();
        assert_abs_diff_eq!(total_loss(1.0, 2.0, &w), 1.6, epsilon = 1e-12);
        let w1 = LossWeights { mu: 1.0, ..w };
        assert_abs_diff_eq!(total_loss(3.0, 9.0, &w1), 3.0, epsilon = 1e-12);
        let w0 = LossWeights { mu: 0.0, ..w };
        assert_abs_diff_eq!(total_loss(3.0, 9.0, &w0), 9.0, epsilon = 1e-12);
    }

    /// Model with zeroed parameters: theta exactly uniform (gamma = 0 kills
    /// the batch-norm output), all discriminator scores exactly zero.
    fn zeroed_model(dims: ModelDims) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = ModelParams::init(dims, &mut rng);
        let flat = vec![0.0; m.flat_len()];
        m.set_from_flat(&flat);
        m
    }

    fn toy_inputs() -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let freqs = array![[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]];
        let gumbel = Array2::zeros((2, 2));
        let neg_docs = array![[0.0, 0.0, 0.5, 0.5], [0.5, 0.5, 0.0, 0.0]];
        (freqs, gumbel, neg_docs)
    }

    fn toy_dims() -> ModelDims {
        ModelDims {
            vocab: 4,
            topics: 2,
            hidden: 3,
            embed: 2,
            disc_hidden: 3,
        }
    }

    #[test]
    fn encoder_loss_zero_scores_uniform_theta() {
        let params = zeroed_model(toy_dims());
        let (freqs, gumbel, neg_docs) = toy_inputs();
        let inputs = BatchInputs {
            freqs: &freqs,
            gumbel: &gumbel,
            neg_docs: &neg_docs,
            neg_doc_anchor: &[0, 1],
            pos_words: &[(0, 0), (0, 1), (1, 2), (1, 3)],
            neg_words: &[(0, 2), (0, 3), (1, 0), (1, 1)],
        };
        let bd = compute_losses(
            &params,
            &inputs,
            &LossWeights::default(),
            &Ablation::default(),
            &GumbelConfig::default(),
        );
        assert_abs_diff_eq!(bd.l_global, -2.0 * 2.0f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(bd.l_local, -2.0 * 2.0f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(bd.l_kl, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bd.l_e, 2.77259, epsilon = 1e-5);
        assert_abs_diff_eq!(bd.l_e, 4.0 * 2.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn encoder_loss_beta_zero_uniform_theta_is_zero() {
        let params = zeroed_model(toy_dims());
        let (freqs, gumbel, neg_docs) = toy_inputs();
        let inputs = BatchInputs {
            freqs: &freqs,
            gumbel: &gumbel,
            neg_docs: &neg_docs,
            neg_doc_anchor: &[0, 1],
            pos_words: &[(0, 0), (1, 2)],
            neg_words: &[(0, 2), (1, 0)],
        };
        let w = LossWeights {
            beta: 0.0,
            ..LossWeights::default()
        };
        let bd = compute_losses(
            &params,
            &inputs,
            &w,
            &Ablation::default(),
            &GumbelConfig::default(),
        );
        assert_abs_diff_eq!(bd.l_e, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn encoder_loss_from_parts_one_hot_kl() {
        // beta = 0, theta one-hot with K = 4 leaves only the KL term.
        let w = LossWeights {
            beta: 0.0,
            gamma: 1.0,
            mu: 0.4,
        };
        let kl = kl_to_uniform(&[1.0, 0.0, 0.0, 0.0]);
        let l_e = encoder_loss_from_parts(-1.0, -0.5, kl, &w, &Ablation::default());
        assert_abs_diff_eq!(l_e, 4.0f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn breakdown_satisfies_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let params = ModelParams::init(toy_dims(), &mut rng);
        let (freqs, _, neg_docs) = toy_inputs();
        let gumbel = crate::numkernel::gumbel_noise(2, 2, &mut rng);
        let inputs = BatchInputs {
            freqs: &freqs,
            gumbel: &gumbel,
            neg_docs: &neg_docs,
            neg_doc_anchor: &[0, 1],
            pos_words: &[(0, 0), (0, 1), (1, 2), (1, 3)],
            neg_words: &[(0, 2), (0, 3), (1, 0), (1, 1)],
        };
        let w = LossWeights::default();
        let ab = Ablation::default();
        let bd = compute_losses(&params, &inputs, &w, &ab, &GumbelConfig::default());
        let l_e = encoder_loss_from_parts(bd.l_global, bd.l_local, bd.l_kl, &w, &ab);
        assert_abs_diff_eq!(bd.l_e, l_e, epsilon = 1e-12);
        assert_abs_diff_eq!(bd.l_total, total_loss(bd.l_r, bd.l_e, &w), epsilon = 1e-12);
    }

    #[test]
    fn ablated_terms_report_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let params = ModelParams::init(toy_dims(), &mut rng);
        let (freqs, gumbel, neg_docs) = toy_inputs();
        let inputs = BatchInputs {
            freqs: &freqs,
            gumbel: &gumbel,
            neg_docs: &neg_docs,
            neg_doc_anchor: &[0, 1],
            pos_words: &[(0, 0), (1, 2)],
            neg_words: &[(0, 2), (1, 0)],
        };
        let ab = Ablation {
            use_global: false,
            use_local: false,
        };
        let w = LossWeights::default();
        let bd = compute_losses(&params, &inputs, &w, &ab, &GumbelConfig::default());
        assert_eq!(bd.l_global, 0.0);
        assert_eq!(bd.l_local, 0.0);
        assert_abs_diff_eq!(bd.l_e, w.gamma * bd.l_kl, epsilon = 1e-12);
    }

    #[test]
    fn discriminator_training_drives_js_upward() {
        // z is a deterministic function of x (one-hot per prototype); train
        // only the discriminator by full-batch gradient ascent on the js
        // term and require a non-strict upward trend over 20 epochs.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = TwoLayerNet::init(4 + 2, 8, &mut rng);
        let x = array![[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        let z = array![[1.0, 0.0], [0.0, 1.0]];
        let z_swapped = array![[0.0, 1.0], [1.0, 0.0]];

        let lr = 0.3;
        let mut history = Vec::new();
        for _ in 0..20 {
            let mut tape = Tape::new();
            let hw = tape.leaf(net.hidden.weight.clone());
            let hb = tape.row_leaf(&net.hidden.bias);
            let ow = tape.leaf(net.output.weight.clone());
            let ob = tape.row_leaf(&net.output.bias);
            let xl = tape.leaf(x.clone());
            let zl = tape.leaf(z.clone());
            let z_neg = tape.leaf(z_swapped.clone());
            let pos_in = tape.concat_cols(xl, zl);
            let neg_in = tape.concat_cols(xl, z_neg);
            let ps = crate::model::net_score_nodes(&mut tape, pos_in, hw, hb, ow, ob);
            let ns = crate::model::net_score_nodes(&mut tape, neg_in, hw, hb, ow, ob);
            let pls = tape.log_sigmoid(ps);
            let nneg = tape.scale(ns, -1.0);
            let nls = tape.log_sigmoid(nneg);
            let pm = tape.mean_all(pls);
            let nm = tape.mean_all(nls);
            let js = tape.add(pm, nm);
            history.push(tape.scalar(js));
            let neg_js = tape.scale(js, -1.0);
            let grads = tape.backward(neg_js);
            let mut flat_p: Vec<f64> = net
                .hidden
                .weight
                .iter()
                .chain(net.hidden.bias.iter())
                .chain(net.output.weight.iter())
                .chain(net.output.bias.iter())
                .cloned()
                .collect();
            let flat_g: Vec<f64> = grads
                .wrt(hw)
                .iter()
                .chain(grads.wrt(hb).iter())
                .chain(grads.wrt(ow).iter())
                .chain(grads.wrt(ob).iter())
                .cloned()
                .collect();
            for (p, g) in flat_p.iter_mut().zip(&flat_g) {
                *p -= lr * g;
            }
            let (hw_len, hb_len) = (net.hidden.weight.len(), net.hidden.bias.len());
            let ow_len = net.output.weight.len();
            net.hidden.weight =
                ndarray::Array2::from_shape_vec(net.hidden.weight.dim(), flat_p[..hw_len].to_vec())
                    .unwrap();
            net.hidden.bias = Array1::from_vec(flat_p[hw_len..hw_len + hb_len].to_vec());
            net.output.weight = ndarray::Array2::from_shape_vec(
                net.output.weight.dim(),
                flat_p[hw_len + hb_len..hw_len + hb_len + ow_len].to_vec(),
            )
            .unwrap();
            net.output.bias = Array1::from_vec(flat_p[hw_len + hb_len + ow_len..].to_vec());
        }
        for w in history.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-9,
                "js decreased: {} -> {} over history {history:?}",
                w[0],
                w[1]
            );
        }
        assert!(history.last().unwrap() > &history[0]);
    }

    proptest! {
        /// js term is bounded above by zero.
        #[test]
        fn js_term_nonpositive(
            pos in proptest::collection::vec(-50.0f64..50.0, 1..8),
            neg in proptest::collection::vec(-50.0f64..50.0, 1..8),
        ) {
            prop_assert!(js_mi_term(&pos, &neg) <= 1e-12);
        }

        /// KL to uniform lies in [0, ln K] on the simplex.
        #[test]
        fn kl_bounds(raw in proptest::collection::vec(0.0f64..1.0, 2..8)) {
            let sum: f64 = raw.iter().sum();
            prop_assume!(sum > 1e-6);
            let theta: Vec<f64> = raw.iter().map(|&x| x / sum).collect();
            let kl = kl_to_uniform(&theta);
            prop_assert!(kl >= -1e-12);
            prop_assert!(kl <= (theta.len() as f64).ln() + 1e-12);
        }
    }
}
