//! Full-model forward pass.
//!
//! Per-document work (embedding, LSTM, attention, aggregation) is independent
//! and may be sharded across threads; the batch-level tail (normalization,
//! inference heads, sampling, decoding, losses) is a handful of small matrix
//! products. The forward never mutates parameters — train-mode batch
//! statistics are surfaced in the trace for the trainer to fold into the
//! running moments after the step.

use alloc::vec;
use alloc::vec::Vec;

use crate::batch::Batch;
use crate::config::{ModelConfig, Variant};
use crate::error::CoreError;
use crate::mat::{matmul, Mat};
use crate::model::norm::{bn_forward, BnCache};
use crate::model::ops;
use crate::model::params::ModelParams;
use crate::numeric::exp;
use crate::prior::{kl_diag_gaussian, symmetric_dirichlet_prior, PriorParams};
use crate::rng::Rng;

/// Forward-pass regime.
pub enum Mode<'a> {
    /// Batch statistics, dropout, sampled latent noise.
    Train(&'a mut Rng),
    /// Running statistics, no dropout, `z = z_mu`.
    Eval,
    /// Running statistics, no dropout, `z = z_mu + sigma ⊙ noise` with the
    /// supplied noise. Deterministic path for gradient verification.
    FixedNoise(&'a Mat),
}

#[derive(Clone, Debug)]
pub struct Losses {
    /// Per-document reconstruction terms.
    pub recon: Vec<f64>,
    /// Per-document KL terms.
    pub kl: Vec<f64>,
    /// Batch mean of `recon + kl`.
    pub total: f64,
}

impl Losses {
    pub fn mean_recon(&self) -> f64 {
        self.recon.iter().sum::<f64>() / self.recon.len() as f64
    }

    pub fn mean_kl(&self) -> f64 {
        self.kl.iter().sum::<f64>() / self.kl.len() as f64
    }
}

/// Per-document intermediates. Matrices cover real token positions only;
/// padded positions carry no state (equivalently, zero).
#[derive(Clone, Debug)]
pub struct DocTrace {
    /// Hidden-state memory bank, `len x H`.
    pub hidden: Mat,
    pub h_final: Vec<f64>,
    /// Alignment over positions, `len x K` (TAN) or `len x 1` (vanilla).
    pub alignment: Option<Mat>,
    /// Per-query context rows, `K x H` or `1 x H`.
    pub context_rows: Option<Mat>,
    /// Document-topic proportions `t_d` (TAN variants).
    pub topic_proportions: Option<Vec<f64>>,
    /// Normalized-BoW document embedding `x_emb` (TAN variants).
    pub doc_embedding: Option<Vec<f64>>,
    /// Selected topic row (top-topic variant).
    pub selected_topic: Option<usize>,
    /// Aggregated context vector fed to the inference heads.
    pub context: Vec<f64>,
}

pub(crate) struct Internals {
    pub u_proj: Option<Mat>, // projected topic queries, K x P
    pub bn_mu_cache: BnCache,
    pub bn_mu_out: Mat,
    pub bn_lv_cache: BnCache,
    pub bn_lv_out: Mat,
    pub noise: Option<Mat>,
    pub drop_mask: Option<Mat>,
    pub bn_dec_cache: BnCache,
    pub u_dec: Mat,
    pub prior: PriorParams,
}

pub struct ForwardTrace {
    pub docs: Vec<DocTrace>,
    /// Topic-word distribution used this pass (TAN variants).
    pub topic_word: Option<Mat>,
    /// Topic embeddings used this pass (TAN variants).
    pub topic_embed: Option<Mat>,
    pub z_mu: Mat,
    pub z_logvar: Mat,
    pub z: Mat,
    pub x_rec: Mat,
    pub losses: Losses,
    pub(crate) internals: Internals,
}

impl ForwardTrace {
    /// Batch-normalization statistics observed during a train-mode pass, in
    /// the order (mu head, logvar head, decoder input). `None` outside train
    /// mode. The trainer folds these into the running moments.
    pub fn batch_stats(&self) -> Option<[(&[f64], &[f64]); 3]> {
        if !self.internals.bn_mu_cache.batch_stats {
            return None;
        }
        Some([
            (
                &self.internals.bn_mu_cache.mean,
                &self.internals.bn_mu_cache.var,
            ),
            (
                &self.internals.bn_lv_cache.mean,
                &self.internals.bn_lv_cache.var,
            ),
            (
                &self.internals.bn_dec_cache.mean,
                &self.internals.bn_dec_cache.var,
            ),
        ])
    }
}

/// Runs `f` over `0..n` split into at most `threads` contiguous chunks,
/// returning per-chunk results in chunk order. Sequential without `std`.
pub(crate) fn run_chunks<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(core::ops::Range<usize>) -> T + Sync,
{
    let threads = threads.max(1).min(n.max(1));
    if threads <= 1 || n == 0 {
        return if n == 0 { Vec::new() } else { vec![f(0..n)] };
    }
    #[cfg(feature = "std")]
    {
        let chunk = n.div_ceil(threads);
        let ranges: Vec<core::ops::Range<usize>> = (0..threads)
            .map(|i| (i * chunk).min(n)..((i + 1) * chunk).min(n))
            .filter(|r| !r.is_empty())
            .collect();
        let mut out: Vec<Option<T>> = ranges.iter().map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for range in &ranges {
                let range = range.clone();
                let f = &f;
                handles.push(scope.spawn(move || f(range)));
            }
            for (slot, handle) in out.iter_mut().zip(handles) {
                *slot = Some(handle.join().expect("worker thread panicked"));
            }
        });
        out.into_iter().map(|x| x.unwrap()).collect()
    }
    #[cfg(not(feature = "std"))]
    {
        vec![f(0..n)]
    }
}

fn doc_forward(
    batch: &Batch,
    d: usize,
    params: &ModelParams,
    cfg: &ModelConfig,
    shared: Option<(&Mat, &Mat)>, // (t_e, u_proj)
) -> Result<DocTrace, CoreError> {
    let len = batch.len_of(d);
    if len == 0 {
        return Err(CoreError::AllPositionsPadded);
    }
    let ids = &batch.ids(d)[..len];
    let x = ops::embed_sequence(ids, &params.embedding)?;
    let (m, h_final) = ops::encode_sequence(&x, &params.lstm, cfg.hidden_dim);

    match cfg.variant {
        Variant::OnlyLstm => Ok(DocTrace {
            context: h_final.clone(),
            hidden: m,
            h_final,
            alignment: None,
            context_rows: None,
            topic_proportions: None,
            doc_embedding: None,
            selected_topic: None,
        }),
        Variant::VanillaAttn => {
            let attn = params.attn.as_ref().expect("attention params");
            let query = Mat::from_vec(1, cfg.hidden_dim, h_final.clone());
            let u = matmul(&query, false, &attn.w_query, false);
            let mut a = ops::attention_scores(&u, &attn.v, &m, &attn.w_key);
            ops::column_softmax_in_place(&mut a);
            let c_t = ops::topic_context_matrix(&a, &m);
            Ok(DocTrace {
                context: c_t.row(0).to_vec(),
                hidden: m,
                h_final,
                alignment: Some(a),
                context_rows: Some(c_t),
                topic_proportions: None,
                doc_embedding: None,
                selected_topic: None,
            })
        }
        Variant::WTan | Variant::TTan => {
            let attn = params.attn.as_ref().expect("attention params");
            let (t_e, u_proj) = shared.expect("topic queries");
            let mut a = ops::attention_scores(u_proj, &attn.v, &m, &attn.w_key);
            ops::column_softmax_in_place(&mut a);
            let c_t = ops::topic_context_matrix(&a, &m);
            let (t_d, x_emb) =
                ops::document_topic_proportions(batch.bow(d), t_e, &params.embedding.words)?;
            let (context, selected) = ops::aggregate_context(&c_t, &t_d, cfg.variant);
            Ok(DocTrace {
                context,
                hidden: m,
                h_final,
                alignment: Some(a),
                context_rows: Some(c_t),
                selected_topic: (cfg.variant == Variant::TTan).then_some(selected),
                topic_proportions: Some(t_d),
                doc_embedding: Some(x_emb),
            })
        }
    }
}

/// Full forward pass over a padded batch.
pub fn forward(
    batch: &Batch,
    params: &ModelParams,
    cfg: &ModelConfig,
    mode: Mode<'_>,
    threads: usize,
) -> Result<ForwardTrace, CoreError> {
    cfg.validate()?;
    let b = batch.size();
    assert!(b > 0, "empty batch");
    let k = cfg.topics;
    let h = cfg.hidden_dim;

    // Shared topic queries for the TAN variants, recomputed from the live
    // decoder every pass.
    let (topic_word, topic_embed, u_proj) = if cfg.variant.uses_topic_attention() {
        let t_w = ops::topic_word_distribution(&params.decoder.w);
        let t_e = ops::topic_embeddings(&t_w, &params.embedding.words);
        let attn = params.attn.as_ref().expect("attention params");
        let u = matmul(&t_e, false, &attn.w_query, false);
        (Some(t_w), Some(t_e), Some(u))
    } else {
        (None, None, None)
    };

    let shared = match (&topic_embed, &u_proj) {
        (Some(t_e), Some(u)) => Some((t_e, u)),
        _ => None,
    };

    let chunk_results = run_chunks(b, threads, |range| {
        range
            .map(|d| doc_forward(batch, d, params, cfg, shared))
            .collect::<Vec<_>>()
    });
    let mut docs = Vec::with_capacity(b);
    for chunk in chunk_results {
        for doc in chunk {
            docs.push(doc?);
        }
    }

    let mut c_mat = Mat::zeros(b, h);
    for (d, doc) in docs.iter().enumerate() {
        c_mat.row_mut(d).copy_from_slice(&doc.context);
    }

    let (batch_stats, mut rng_opt, fixed_noise) = match mode {
        Mode::Train(rng) => (true, Some(rng), None),
        Mode::Eval => (false, None, None),
        Mode::FixedNoise(noise) => {
            assert_eq!(
                (noise.rows(), noise.cols()),
                (b, k),
                "fixed noise shape mismatch"
            );
            (false, None, Some(noise))
        }
    };

    let (bn_mu_out, bn_mu_cache) = bn_forward(&c_mat, &params.bn_mu, batch_stats);
    let z_mu = ops::affine(&bn_mu_out, &params.head_mu);
    let (bn_lv_out, bn_lv_cache) = bn_forward(&c_mat, &params.bn_logvar, batch_stats);
    let z_logvar = ops::affine(&bn_lv_out, &params.head_logvar);

    let noise: Option<Mat> = if let Some(rng) = rng_opt.as_deref_mut() {
        Some(Mat::from_fn(b, k, |_, _| rng.normal()))
    } else {
        fixed_noise.cloned()
    };

    let mut z = z_mu.clone();
    if let Some(n) = &noise {
        for r in 0..b {
            let lv = z_logvar.row(r);
            let nr = n.row(r);
            let zr = z.row_mut(r);
            for c in 0..k {
                zr[c] += exp(0.5 * lv[c]) * nr[c];
            }
        }
    }

    let drop_mask: Option<Mat> = match rng_opt {
        Some(rng) if cfg.dropout_rate > 0.0 => {
            Some(ops::dropout_mask(b, k, cfg.dropout_rate, rng))
        }
        _ => None,
    };
    let mut dropped = z.clone();
    if let Some(mask) = &drop_mask {
        for (v, m) in dropped.data_mut().iter_mut().zip(mask.data().iter()) {
            *v *= m;
        }
    }

    let (u_dec, bn_dec_cache) = bn_forward(&dropped, &params.bn_dec, batch_stats);
    let mut x_rec = ops::affine(&u_dec, &params.decoder);
    for r in 0..b {
        crate::numeric::softmax_in_place(x_rec.row_mut(r));
    }

    let prior = symmetric_dirichlet_prior(cfg.prior_alpha, k);
    let mut recon = Vec::with_capacity(b);
    let mut kl = Vec::with_capacity(b);
    let mut total = 0.0;
    for d in 0..b {
        let r = ops::recon_loss(batch.bow(d), x_rec.row(d));
        let kd = kl_diag_gaussian(z_mu.row(d), z_logvar.row(d), &prior);
        total += r + kd;
        recon.push(r);
        kl.push(kd);
    }
    total /= b as f64;
    if !total.is_finite() {
        return Err(CoreError::NonFinite("batch loss"));
    }

    Ok(ForwardTrace {
        docs,
        topic_word,
        topic_embed,
        z_mu,
        z_logvar,
        z,
        x_rec,
        losses: Losses { recon, kl, total },
        internals: Internals {
            u_proj,
            bn_mu_cache,
            bn_mu_out,
            bn_lv_cache,
            bn_lv_out,
            noise,
            drop_mask,
            bn_dec_cache,
            u_dec,
            prior,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::EncodedDoc;
    use alloc::vec;
    use alloc::vec::Vec;

    fn tiny(variant: Variant, vocab: usize, topics: usize) -> (ModelConfig, ModelParams) {
        let cfg = ModelConfig {
            vocab_size: vocab,
            topics,
            embed_dim: 4,
            hidden_dim: 5,
            attn_dim: 3,
            variant,
            dropout_rate: 0.6,
            prior_alpha: 1.0 / topics as f64,
        };
        let params = ModelParams::init(&cfg, &mut Rng::seed_from_u64(11));
        (cfg, params)
    }

    fn batch_of(rng: &mut Rng, vocab: usize, n: usize, len: usize, max_len: usize) -> Batch {
        let docs: Vec<EncodedDoc> = (0..n)
            .map(|_| {
                let ids: Vec<u32> = (0..len).map(|_| 1 + rng.next_below(vocab) as u32).collect();
                EncodedDoc::from_ids(ids, None)
            })
            .collect();
        let refs: Vec<&EncodedDoc> = docs.iter().collect();
        Batch::from_docs(&refs, max_len)
    }

    #[test]
    fn zero_decoder_gives_uniform_reconstruction_in_eval() {
        let (cfg, mut params) = tiny(Variant::TTan, 9, 3);
        params.decoder.w.fill(0.0);
        params.decoder.b.iter_mut().for_each(|b| *b = 0.0);
        let mut rng = Rng::seed_from_u64(5);
        let batch = batch_of(&mut rng, 9, 2, 4, 6);
        let trace = forward(&batch, &params, &cfg, Mode::Eval, 1).unwrap();
        for d in 0..2 {
            for &p in trace.x_rec.row(d) {
                assert!((p - 1.0 / 9.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_heads_give_zero_latent_parameters() {
        let (cfg, mut params) = tiny(Variant::WTan, 9, 3);
        params.head_mu.w.fill(0.0);
        params.head_mu.b.iter_mut().for_each(|b| *b = 0.0);
        params.head_logvar.w.fill(0.0);
        params.head_logvar.b.iter_mut().for_each(|b| *b = 0.0);
        let mut rng = Rng::seed_from_u64(6);
        let batch = batch_of(&mut rng, 9, 2, 4, 6);
        let trace = forward(&batch, &params, &cfg, Mode::Eval, 1).unwrap();
        assert!(trace.z_mu.data().iter().all(|&x| x == 0.0));
        assert!(trace.z_logvar.data().iter().all(|&x| x == 0.0));
    }

    // With frozen normalization statistics the head is affine:
    // f(x1) + f(x2) - f(0) == f(x1 + x2).
    #[test]
    fn inference_head_affine_on_frozen_stats() {
        let (cfg, mut params) = tiny(Variant::OnlyLstm, 9, 3);
        let mut rng = Rng::seed_from_u64(7);
        for v in params.bn_mu.running_mean.iter_mut() {
            *v = rng.uniform(-0.5, 0.5);
        }
        for v in params.bn_mu.running_var.iter_mut() {
            *v = rng.uniform(0.5, 2.0);
        }
        let head = |x: &[f64]| -> Vec<f64> {
            let m = Mat::from_vec(1, cfg.hidden_dim, x.to_vec());
            let (y, _) = bn_forward(&m, &params.bn_mu, false);
            ops::affine(&y, &params.head_mu).row(0).to_vec()
        };
        let x1: Vec<f64> = (0..cfg.hidden_dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let x2: Vec<f64> = (0..cfg.hidden_dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let sum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        let lhs: Vec<f64> = head(&x1)
            .iter()
            .zip(head(&x2).iter())
            .zip(head(&vec![0.0; cfg.hidden_dim]).iter())
            .map(|((a, b), z)| a + b - z)
            .collect();
        for (l, r) in lhs.iter().zip(head(&sum).iter()) {
            assert!((l - r).abs() < 1e-9);
        }
    }

    #[test]
    fn latent_shape_follows_batch_and_topics() {
        let (cfg, params) = tiny(Variant::TTan, 60, 50);
        let mut rng = Rng::seed_from_u64(8);
        let batch = batch_of(&mut rng, 60, 100, 3, 4);
        let trace = forward(&batch, &params, &cfg, Mode::Eval, 2).unwrap();
        assert_eq!((trace.z.rows(), trace.z.cols()), (100, 50));
        assert_eq!((trace.z_mu.rows(), trace.z_mu.cols()), (100, 50));
    }

    // Monte-Carlo over dropout masks with frozen statistics: the expected
    // pre-softmax logits equal the eval-mode logits under inverted dropout.
    #[test]
    fn dropout_expectation_matches_eval_logits() {
        let (cfg, params) = tiny(Variant::WTan, 9, 3);
        let mut rng = Rng::seed_from_u64(9);
        let batch = batch_of(&mut rng, 9, 1, 4, 4);
        // Eval logits reconstructed from the eval trace.
        let eval = forward(&batch, &params, &cfg, Mode::Eval, 1).unwrap();
        let z = eval.z.row(0).to_vec();
        let logits_of = |dropped: &[f64]| -> Vec<f64> {
            let m = Mat::from_vec(1, cfg.topics, dropped.to_vec());
            let (u, _) = bn_forward(&m, &params.bn_dec, false);
            ops::affine(&u, &params.decoder).row(0).to_vec()
        };
        let eval_logits = logits_of(&z);
        let n = 200_000;
        let keep = 1.0 - cfg.dropout_rate;
        let mut mean = vec![0.0; cfg.vocab_size];
        for _ in 0..n {
            let dropped: Vec<f64> = z
                .iter()
                .map(|&v| {
                    if rng.next_f64() < keep {
                        v / keep
                    } else {
                        0.0
                    }
                })
                .collect();
            for (m, l) in mean.iter_mut().zip(logits_of(&dropped)) {
                *m += l;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        for (avg, ev) in mean.iter().zip(eval_logits.iter()) {
            assert!(
                (avg - ev).abs() < 0.02,
                "expected logit {avg} vs eval {ev}"
            );
        }
    }

    #[test]
    fn non_finite_parameters_abort_with_diagnostic() {
        let (cfg, mut params) = tiny(Variant::TTan, 9, 3);
        params.decoder.w.set(0, 0, f64::NAN);
        let mut rng = Rng::seed_from_u64(10);
        let batch = batch_of(&mut rng, 9, 2, 4, 4);
        assert!(matches!(
            forward(&batch, &params, &cfg, Mode::Eval, 1),
            Err(CoreError::NonFinite(_))
        ));
    }
}
