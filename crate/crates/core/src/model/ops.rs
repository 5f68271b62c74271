//! The individual model operations. The fused forward/backward passes reuse
//! these so there is a single definition of each piece of math.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::Variant;
use crate::error::CoreError;
use crate::mat::{matmul, Mat};
use crate::model::params::{AttnParams, Dense, Embedding, LstmParams};
use crate::numeric::{argmax, exp, ln, sigmoid, softmax_in_place, tanh};
use crate::rng::Rng;

/// Numerical floor inside the reconstruction log.
pub const EPS_RECON: f64 = 1e-10;

/// Looks up embedding rows for an id sequence. Pad (id 0) maps to the
/// trainable pad row; it is the caller's job to mask pad positions downstream.
pub fn embed_sequence(ids: &[u32], emb: &Embedding) -> Result<Mat, CoreError> {
    let e = emb.words.cols();
    let limit = emb.words.rows() + 1;
    let mut x = Mat::zeros(ids.len(), e);
    for (j, &id) in ids.iter().enumerate() {
        if (id as usize) >= limit {
            return Err(CoreError::IndexOutOfRange { index: id, limit });
        }
        x.row_mut(j).copy_from_slice(emb.row(id));
    }
    Ok(x)
}

/// Per-step LSTM internals kept for backpropagation through time.
/// Gate order along the 4H axis is `[i | f | g | o]`, post-activation.
pub(crate) struct LstmTrace {
    pub m: Mat,     // len x H hidden states
    pub cells: Mat, // len x H cell states
    pub gates: Mat, // len x 4H activated gates
}

pub(crate) fn lstm_forward(x: &Mat, lstm: &LstmParams, hidden: usize) -> LstmTrace {
    let len = x.rows();
    let h = hidden;
    // Input contributions for every step in one product.
    let mut pre = matmul(x, false, &lstm.w_x, false); // len x 4H
    for j in 0..len {
        let row = pre.row_mut(j);
        for (r, &b) in row.iter_mut().zip(lstm.b.iter()) {
            *r += b;
        }
    }
    let mut m = Mat::zeros(len, h);
    let mut cells = Mat::zeros(len, h);
    let mut gates = Mat::zeros(len, 4 * h);
    let mut h_prev = vec![0.0; h];
    let mut s_prev = vec![0.0; h];
    for t in 0..len {
        let rec = lstm.w_h.matvec_t(&h_prev); // 4H
        let pre_t = pre.row(t);
        let g_row = gates.row_mut(t);
        for o in 0..4 * h {
            let a = pre_t[o] + rec[o];
            g_row[o] = if o / h == 2 { tanh(a) } else { sigmoid(a) };
        }
        let (m_row, c_row) = (t, t);
        for i in 0..h {
            let gi = gates.get(t, i);
            let gf = gates.get(t, h + i);
            let gg = gates.get(t, 2 * h + i);
            let go = gates.get(t, 3 * h + i);
            let s = gf * s_prev[i] + gi * gg;
            cells.set(c_row, i, s);
            m.set(m_row, i, go * tanh(s));
        }
        h_prev.copy_from_slice(m.row(t));
        s_prev.copy_from_slice(cells.row(t));
    }
    LstmTrace { m, cells, gates }
}

/// Unidirectional LSTM encoding with zero initial state. Returns the memory
/// bank (one row per real token) and the final hidden state; a zero-length
/// input yields an empty bank and a zero state.
pub fn encode_sequence(x: &Mat, lstm: &LstmParams, hidden: usize) -> (Mat, Vec<f64>) {
    if x.rows() == 0 {
        return (Mat::zeros(0, hidden), vec![0.0; hidden]);
    }
    let trace = lstm_forward(x, lstm, hidden);
    let h_final = trace.m.row(trace.m.rows() - 1).to_vec();
    (trace.m, h_final)
}

/// Row-stochastic topic-word distribution: softmax of each decoder row over
/// the vocabulary.
pub fn topic_word_distribution(decoder_w: &Mat) -> Mat {
    let mut t_w = decoder_w.clone();
    for k in 0..t_w.rows() {
        softmax_in_place(t_w.row_mut(k));
    }
    t_w
}

/// Topic embeddings `T_E = T_w x words`; each row is the distribution-weighted
/// mean of the word embeddings.
pub fn topic_embeddings(t_w: &Mat, words: &Mat) -> Mat {
    matmul(t_w, false, words, false)
}

/// Additive attention scores: `score[j][k] = v . tanh(u[k] + keys[j])` where
/// `u` holds the projected queries and `keys = m x w_key`.
pub(crate) fn attention_scores(u: &Mat, v: &[f64], m: &Mat, w_key: &Mat) -> Mat {
    let keys = matmul(m, false, w_key, false); // len x P
    let len = m.rows();
    let kq = u.rows();
    let p = v.len();
    let mut scores = Mat::zeros(len, kq);
    for j in 0..len {
        let key = keys.row(j);
        let row = scores.row_mut(j);
        for k in 0..kq {
            let uk = u.row(k);
            let mut s = 0.0;
            for i in 0..p {
                s += v[i] * tanh(uk[i] + key[i]);
            }
            row[k] = s;
        }
    }
    scores
}

/// Softmax over token positions, independently per column (per query/topic).
pub(crate) fn column_softmax_in_place(scores: &mut Mat) {
    let (len, kq) = (scores.rows(), scores.cols());
    for k in 0..kq {
        let mut max = f64::NEG_INFINITY;
        for j in 0..len {
            max = max.max(scores.get(j, k));
        }
        let mut sum = 0.0;
        for j in 0..len {
            let e = exp(scores.get(j, k) - max);
            scores.set(j, k, e);
            sum += e;
        }
        let inv = 1.0 / sum;
        for j in 0..len {
            scores.set(j, k, scores.get(j, k) * inv);
        }
    }
}

/// Alignment over real token positions: column `k` is a distribution over the
/// rows of `m`. `m` must contain only real (unpadded) positions; padded rows
/// are excluded before this point, which is equivalent to giving them −∞
/// score.
pub fn alignment_matrix(queries: &Mat, m: &Mat, attn: &AttnParams) -> Result<Mat, CoreError> {
    if m.rows() == 0 {
        return Err(CoreError::AllPositionsPadded);
    }
    let u = matmul(queries, false, &attn.w_query, false);
    let mut scores = attention_scores(&u, &attn.v, m, &attn.w_key);
    column_softmax_in_place(&mut scores);
    Ok(scores)
}

/// Topic-wise context matrix `C_T = A^T M`, the sum of per-position outer
/// products of alignment rows with hidden states.
pub fn topic_context_matrix(a: &Mat, m: &Mat) -> Mat {
    matmul(a, true, m, false)
}

/// Document-topic proportions from the normalized BoW:
/// `t_d = softmax(T_E x_emb)` with `x_emb = x_norm^T words`.
/// Returns `(t_d, x_emb)`; errors on an empty bag.
pub fn document_topic_proportions(
    bow: &[(u32, u32)],
    t_e: &Mat,
    words: &Mat,
) -> Result<(Vec<f64>, Vec<f64>), CoreError> {
    let total: u64 = bow.iter().map(|&(_, c)| c as u64).sum();
    if total == 0 {
        return Err(CoreError::EmptyBagOfWords);
    }
    let inv = 1.0 / total as f64;
    let mut x_emb = vec![0.0; words.cols()];
    for &(v, c) in bow {
        let row = words.row((v - 1) as usize);
        crate::numeric::axpy(c as f64 * inv, row, &mut x_emb);
    }
    let mut t_d = t_e.matvec(&x_emb);
    softmax_in_place(&mut t_d);
    Ok((t_d, x_emb))
}

/// Aggregates the per-topic context rows into one context vector.
/// Weighted variant: `c = sum_k t_d[k] * C_T[k]`; top variant: the row of the
/// most probable topic (ties to the lowest index). Returns the selected index
/// for the top variant.
pub fn aggregate_context(c_t: &Mat, t_d: &[f64], variant: Variant) -> (Vec<f64>, usize) {
    match variant {
        Variant::WTan => (c_t.matvec_t(t_d), 0),
        Variant::TTan => {
            let m = argmax(t_d);
            (c_t.row(m).to_vec(), m)
        }
        _ => panic!("aggregate_context is only defined for the TAN variants"),
    }
}

/// Reparameterized sample `z = mu + exp(0.5 logvar) ⊙ eps` with `eps` drawn
/// row-major from the generator.
pub fn sample_latent(z_mu: &Mat, z_logvar: &Mat, rng: &mut Rng) -> Mat {
    debug_assert_eq!((z_mu.rows(), z_mu.cols()), (z_logvar.rows(), z_logvar.cols()));
    let mut z = z_mu.clone();
    for r in 0..z.rows() {
        let lv = z_logvar.row(r);
        let zr = z.row_mut(r);
        for c in 0..zr.len() {
            zr[c] += exp(0.5 * lv[c]) * rng.normal();
        }
    }
    z
}

/// Affine layer `y = x W + b`.
pub fn affine(x: &Mat, dense: &Dense) -> Mat {
    let mut y = matmul(x, false, &dense.w, false);
    for r in 0..y.rows() {
        let row = y.row_mut(r);
        for (v, &b) in row.iter_mut().zip(dense.b.iter()) {
            *v += b;
        }
    }
    y
}

/// Categorical cross entropy of a reconstructed distribution against sparse
/// BoW counts: `-sum_v bow[v] ln(x_rec[v] + eps)`.
pub fn recon_loss(bow: &[(u32, u32)], x_rec: &[f64]) -> f64 {
    let mut loss = 0.0;
    for &(v, c) in bow {
        loss -= c as f64 * ln(x_rec[(v - 1) as usize] + EPS_RECON);
    }
    loss
}

/// Inverted-dropout mask with entries `0` or `1/(1-rate)`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Mat {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    Mat::from_fn(rows, cols, |_, _| {
        if rng.next_f64() < keep {
            scale
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::model::params::ModelParams;

    fn tiny_params(variant: Variant) -> (ModelConfig, ModelParams) {
        let cfg = ModelConfig {
            vocab_size: 12,
            topics: 3,
            embed_dim: 4,
            hidden_dim: 5,
            attn_dim: 4,
            variant,
            dropout_rate: 0.5,
            prior_alpha: 1.0 / 3.0,
        };
        let params = ModelParams::init(&cfg, &mut Rng::seed_from_u64(21));
        (cfg, params)
    }

    #[test]
    fn embed_rows_match_table() {
        let (_, params) = tiny_params(Variant::TTan);
        let x = embed_sequence(&[3, 3, 0], &params.embedding).unwrap();
        assert_eq!(x.row(0), params.embedding.words.row(2));
        assert_eq!(x.row(0), x.row(1));
        assert_eq!(x.row(2), params.embedding.pad.as_slice());
        assert!(matches!(
            embed_sequence(&[13], &params.embedding),
            Err(CoreError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn encode_empty_and_order_sensitivity() {
        let (cfg, params) = tiny_params(Variant::TTan);
        let (m, h_final) = encode_sequence(&Mat::zeros(0, cfg.embed_dim), &params.lstm, cfg.hidden_dim);
        assert_eq!(m.rows(), 0);
        assert!(h_final.iter().all(|&x| x == 0.0));

        let a = embed_sequence(&[1, 2, 3], &params.embedding).unwrap();
        let b = embed_sequence(&[2, 1, 3], &params.embedding).unwrap();
        let (ma, _) = encode_sequence(&a, &params.lstm, cfg.hidden_dim);
        let (mb, _) = encode_sequence(&b, &params.lstm, cfg.hidden_dim);
        assert_ne!(ma, mb, "permuting a non-equal prefix must change the encoding");
    }

    #[test]
    fn topic_word_rows_stochastic() {
        let zeros = Mat::zeros(3, 7);
        let t_w = topic_word_distribution(&zeros);
        for k in 0..3 {
            for v in 0..7 {
                assert!((t_w.get(k, v) - 1.0 / 7.0).abs() < 1e-12);
            }
        }
        // shift invariance per row
        let mut d = Mat::from_fn(2, 5, |r, c| (r * 5 + c) as f64 * 0.3);
        let base = topic_word_distribution(&d);
        for c in 0..5 {
            let v = d.get(1, c);
            d.set(1, c, v + 7.5);
        }
        let shifted = topic_word_distribution(&d);
        for c in 0..5 {
            assert!((base.get(1, c) - shifted.get(1, c)).abs() < 1e-9);
        }
        for k in 0..2 {
            let s: f64 = base.row(k).iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn topic_embeddings_one_hot_and_toy_product() {
        let words = Mat::from_fn(4, 2, |r, c| (r * 2 + c) as f64);
        let mut t_w = Mat::zeros(3, 4);
        t_w.set(0, 2, 1.0); // one-hot at word 2
        for c in 0..4 {
            t_w.set(1, c, 0.25); // uniform row
        }
        t_w.set(2, 0, 0.5);
        t_w.set(2, 3, 0.5);
        let t_e = topic_embeddings(&t_w, &words);
        assert_eq!(t_e.row(0), words.row(2));
        let mean: Vec<f64> = (0..2)
            .map(|c| (0..4).map(|r| words.get(r, c)).sum::<f64>() / 4.0)
            .collect();
        assert_eq!(t_e.row(1), mean.as_slice());

        // independent hand-computed 3x4 * 4x2 product
        let a = Mat::from_vec(3, 4, vec![1.0, 0.0, 2.0, -1.0, 0.5, 0.5, 0.5, 0.5, 0.0, 1.0, 0.0, 0.0]);
        let b = Mat::from_vec(4, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let prod = topic_embeddings(&a, &b);
        let mut expect = Mat::zeros(3, 2);
        for i in 0..3 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += a.get(i, k) * b.get(k, j);
                }
                expect.set(i, j, s);
            }
        }
        for (x, y) in prod.data().iter().zip(expect.data().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn alignment_columns_are_distributions() {
        let (cfg, params) = tiny_params(Variant::TTan);
        let attn = params.attn.as_ref().unwrap();
        let t_w = topic_word_distribution(&params.decoder.w);
        let t_e = topic_embeddings(&t_w, &params.embedding.words);
        let x = embed_sequence(&[1, 5, 9, 2], &params.embedding).unwrap();
        let (m, _) = encode_sequence(&x, &params.lstm, cfg.hidden_dim);
        let a = alignment_matrix(&t_e, &m, attn).unwrap();
        assert_eq!((a.rows(), a.cols()), (4, cfg.topics));
        for k in 0..cfg.topics {
            let s: f64 = (0..4).map(|j| a.get(j, k)).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        // single real token -> column of ones
        let x1 = embed_sequence(&[7], &params.embedding).unwrap();
        let (m1, _) = encode_sequence(&x1, &params.lstm, cfg.hidden_dim);
        let a1 = alignment_matrix(&t_e, &m1, attn).unwrap();
        for k in 0..cfg.topics {
            assert!((a1.get(0, k) - 1.0).abs() < 1e-12);
        }
        // identical hidden rows -> uniform columns
        let mut m_same = Mat::zeros(3, cfg.hidden_dim);
        for j in 0..3 {
            m_same.row_mut(j).copy_from_slice(m.row(0));
        }
        let au = alignment_matrix(&t_e, &m_same, attn).unwrap();
        for k in 0..cfg.topics {
            for j in 0..3 {
                assert!((au.get(j, k) - 1.0 / 3.0).abs() < 1e-9);
            }
        }
        assert!(matches!(
            alignment_matrix(&t_e, &Mat::zeros(0, cfg.hidden_dim), attn),
            Err(CoreError::AllPositionsPadded)
        ));
    }

    // Explicit outer-product loop as an independent oracle for C_T = A^T M.
    #[test]
    fn context_matrix_matches_outer_product_loop() {
        let mut rng = Rng::seed_from_u64(30);
        let a = Mat::from_fn(5, 3, |_, _| rng.uniform(0.0, 1.0));
        let m = Mat::from_fn(5, 4, |_, _| rng.uniform(-1.0, 1.0));
        let c_t = topic_context_matrix(&a, &m);
        let mut oracle = Mat::zeros(3, 4);
        for j in 0..5 {
            for k in 0..3 {
                for h in 0..4 {
                    let v = oracle.get(k, h) + a.get(j, k) * m.get(j, h);
                    oracle.set(k, h, v);
                }
            }
        }
        for (x, y) in c_t.data().iter().zip(oracle.data().iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn context_rows_are_convex_combinations() {
        // A's columns lie on the simplex, so each C_T row stays inside the
        // per-column range of M.
        let mut rng = Rng::seed_from_u64(31);
        let mut a = Mat::from_fn(6, 4, |_, _| rng.uniform(0.0, 1.0));
        column_softmax_in_place(&mut a);
        let m = Mat::from_fn(6, 3, |_, _| rng.uniform(-2.0, 2.0));
        let c_t = topic_context_matrix(&a, &m);
        for k in 0..4 {
            for h in 0..3 {
                let col: Vec<f64> = (0..6).map(|j| m.get(j, h)).collect();
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let v = c_t.get(k, h);
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn context_rows_single_token() {
        let a = Mat::from_vec(1, 3, vec![1.0, 1.0, 1.0]);
        let m = Mat::from_vec(1, 2, vec![0.3, -0.7]);
        let c_t = topic_context_matrix(&a, &m);
        for k in 0..3 {
            assert_eq!(c_t.row(k), m.row(0));
        }
    }

    #[test]
    fn proportions_normalization_invariance() {
        let (_, params) = tiny_params(Variant::TTan);
        let t_w = topic_word_distribution(&params.decoder.w);
        let t_e = topic_embeddings(&t_w, &params.embedding.words);
        let bow1: Vec<(u32, u32)> = vec![(1, 2), (5, 1)];
        let bow3: Vec<(u32, u32)> = vec![(1, 6), (5, 3)]; // scaled by 3
        let (t1, _) = document_topic_proportions(&bow1, &t_e, &params.embedding.words).unwrap();
        let (t3, _) = document_topic_proportions(&bow3, &t_e, &params.embedding.words).unwrap();
        for (a, b) in t1.iter().zip(t3.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let s: f64 = t1.iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
        assert!(t1.iter().all(|&p| p > 0.0));
        assert!(matches!(
            document_topic_proportions(&[], &t_e, &params.embedding.words),
            Err(CoreError::EmptyBagOfWords)
        ));
    }

    #[test]
    fn aggregate_variants_agree_on_one_hot() {
        let c_t = Mat::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let one_hot = [0.0, 1.0, 0.0];
        let (w, _) = aggregate_context(&c_t, &one_hot, Variant::WTan);
        let (t, m) = aggregate_context(&c_t, &one_hot, Variant::TTan);
        assert_eq!(w, t);
        assert_eq!(m, 1);
        // uniform weights -> mean row for the weighted variant
        let uni = [1.0 / 3.0; 3];
        let (w2, _) = aggregate_context(&c_t, &uni, Variant::WTan);
        assert!((w2[0] - 3.0).abs() < 1e-12 && (w2[1] - 4.0).abs() < 1e-12);
        // top variant always returns exactly one row
        let (t2, m2) = aggregate_context(&c_t, &[0.2, 0.3, 0.5], Variant::TTan);
        assert_eq!(t2, c_t.row(m2).to_vec());
    }

    #[test]
    fn sample_latent_fixed_seed_and_shrinking_variance() {
        let mu = Mat::from_vec(2, 3, vec![1.0, -1.0, 0.0, 2.0, 0.5, -0.5]);
        let lv = Mat::from_vec(2, 3, vec![-60.0; 6]);
        let z = sample_latent(&mu, &lv, &mut Rng::seed_from_u64(5));
        for (a, b) in z.data().iter().zip(mu.data().iter()) {
            assert!((a - b).abs() < 1e-9, "z should collapse to mu for tiny variance");
        }
        let lv2 = Mat::from_vec(2, 3, vec![0.3; 6]);
        let z1 = sample_latent(&mu, &lv2, &mut Rng::seed_from_u64(7));
        let z2 = sample_latent(&mu, &lv2, &mut Rng::seed_from_u64(7));
        assert_eq!(z1, z2);
    }

    // Monte-Carlo oracle: the sample mean approaches mu at the 3 sigma / sqrt(N) rate.
    #[test]
    fn sample_latent_mean_matches_mu() {
        let mu = Mat::from_vec(1, 2, vec![0.7, -1.3]);
        let lv = Mat::from_vec(1, 2, vec![0.4, -0.8]);
        let n = 100_000;
        let mut rng = Rng::seed_from_u64(17);
        let mut sums = [0.0f64; 2];
        for _ in 0..n {
            let z = sample_latent(&mu, &lv, &mut rng);
            sums[0] += z.get(0, 0);
            sums[1] += z.get(0, 1);
        }
        for c in 0..2 {
            let mean = sums[c] / n as f64;
            let sd = exp(0.5 * lv.get(0, c));
            let bound = 3.0 * sd / (n as f64).sqrt();
            assert!(
                (mean - mu.get(0, c)).abs() < bound,
                "mean {mean} vs mu {} (bound {bound})",
                mu.get(0, c)
            );
        }
    }

    #[test]
    fn recon_loss_uniform_reconstruction() {
        // x_rec uniform -> loss = sum(bow) * ln|V|
        let v = 8;
        let x_rec = vec![1.0 / v as f64; v];
        let bow = vec![(1u32, 3u32), (5, 2)];
        let loss = recon_loss(&bow, &x_rec);
        let expect = 5.0 * ln(v as f64);
        assert!((loss - expect).abs() < 1e-6);
    }

    #[test]
    fn dropout_mask_inverted_scaling() {
        let mut rng = Rng::seed_from_u64(3);
        let mask = dropout_mask(200, 50, 0.6, &mut rng);
        let scale = 1.0 / 0.4;
        let mut kept = 0usize;
        for &x in mask.data() {
            assert!(x == 0.0 || (x - scale).abs() < 1e-12);
            if x != 0.0 {
                kept += 1;
            }
        }
        let frac = kept as f64 / mask.data().len() as f64;
        assert!((frac - 0.4).abs() < 0.02, "keep fraction {frac}");
    }
}
