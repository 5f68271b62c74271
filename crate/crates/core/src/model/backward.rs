//! Hand-derived backward pass for the full model.
//!
//! The batch-level tail is unwound first to obtain `dL/dc` per document; the
//! per-document encoder/attention work is then sharded like the forward pass,
//! rematerializing LSTM gates and attention tanh activations instead of
//! storing them. Chunk gradients are merged in chunk order so a fixed thread
//! count gives bit-identical results.
//!
//! The decoder weight accumulates two contributions: the reconstruction layer
//! itself and, for the TAN variants, the topic-word softmax that feeds the
//! attention queries and document-topic proportions.

use alloc::vec;
use alloc::vec::Vec;

use crate::batch::Batch;
use crate::config::{ModelConfig, Variant};
use crate::mat::{gemm, matmul, Mat};
use crate::model::forward::{run_chunks, DocTrace, ForwardTrace};
use crate::model::norm::bn_backward;
use crate::model::ops::{self, EPS_RECON};
use crate::model::params::{Grads, ModelParams};
use crate::numeric::{axpy, exp, softmax_backward, tanh};
use crate::prior::kl_backward;

/// Per-chunk gradient partials from the per-document stage.
struct StageGrads {
    lstm_w_x: Mat,
    lstm_w_h: Mat,
    lstm_b: Vec<f64>,
    words: Mat,
    w_query: Option<Mat>,
    w_key: Option<Mat>,
    v: Option<Vec<f64>>,
    /// Accumulated `dL/dU` over documents (TAN variants); resolved against the
    /// shared topic queries once per batch.
    du_sum: Option<Mat>,
    /// Accumulated `dL/dT_E` from the document-topic path.
    dte: Option<Mat>,
}

impl StageGrads {
    fn zeros(cfg: &ModelConfig) -> Self {
        let e = cfg.embed_dim;
        let h = cfg.hidden_dim;
        let p = cfg.attn_dim;
        let k = cfg.topics;
        let attn = cfg.variant.uses_attention();
        let tan = cfg.variant.uses_topic_attention();
        Self {
            lstm_w_x: Mat::zeros(e, 4 * h),
            lstm_w_h: Mat::zeros(h, 4 * h),
            lstm_b: vec![0.0; 4 * h],
            words: Mat::zeros(cfg.vocab_size, e),
            w_query: (cfg.variant == Variant::VanillaAttn).then(|| Mat::zeros(h, p)),
            w_key: attn.then(|| Mat::zeros(h, p)),
            v: attn.then(|| vec![0.0; p]),
            du_sum: tan.then(|| Mat::zeros(k, p)),
            dte: tan.then(|| Mat::zeros(k, e)),
        }
    }

    fn merge(&mut self, other: StageGrads) {
        self.lstm_w_x.add_assign(&other.lstm_w_x);
        self.lstm_w_h.add_assign(&other.lstm_w_h);
        for (a, b) in self.lstm_b.iter_mut().zip(other.lstm_b.iter()) {
            *a += b;
        }
        self.words.add_assign(&other.words);
        if let (Some(a), Some(b)) = (&mut self.w_query, &other.w_query) {
            a.add_assign(b);
        }
        if let (Some(a), Some(b)) = (&mut self.w_key, &other.w_key) {
            a.add_assign(b);
        }
        if let (Some(a), Some(b)) = (&mut self.v, &other.v) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
        }
        if let (Some(a), Some(b)) = (&mut self.du_sum, &other.du_sum) {
            a.add_assign(b);
        }
        if let (Some(a), Some(b)) = (&mut self.dte, &other.dte) {
            a.add_assign(b);
        }
    }
}

fn column_softmax_backward(a: &Mat, da: &Mat) -> Mat {
    let (len, kq) = (a.rows(), a.cols());
    let mut dscore = Mat::zeros(len, kq);
    let mut col_a = vec![0.0; len];
    let mut col_d = vec![0.0; len];
    let mut col_out = vec![0.0; len];
    for k in 0..kq {
        for j in 0..len {
            col_a[j] = a.get(j, k);
            col_d[j] = da.get(j, k);
        }
        softmax_backward(&col_a, &col_d, &mut col_out);
        for j in 0..len {
            dscore.set(j, k, col_out[j]);
        }
    }
    dscore
}

#[allow(clippy::too_many_arguments)]
fn doc_backward(
    batch: &Batch,
    d: usize,
    dc: &[f64],
    doc: &DocTrace,
    params: &ModelParams,
    cfg: &ModelConfig,
    shared: Option<(&Mat, &Mat)>, // (t_e, u_proj)
    sg: &mut StageGrads,
) {
    let len = batch.len_of(d);
    let ids = &batch.ids(d)[..len];
    let h = cfg.hidden_dim;
    let k = cfg.topics;
    let m = &doc.hidden;

    let mut d_m = Mat::zeros(len, h);
    let mut dh_final_extra = vec![0.0; h];

    if cfg.variant == Variant::OnlyLstm {
        axpy(1.0, dc, &mut dh_final_extra);
    } else {
        let attn = params.attn.as_ref().expect("attention params");
        let a = doc.alignment.as_ref().expect("alignment");
        let c_t = doc.context_rows.as_ref().expect("context rows");
        let kq = a.cols();

        // Aggregation backward: dC_T plus (W-TAN only) the proportions path.
        let mut d_ct = Mat::zeros(kq, h);
        match cfg.variant {
            Variant::VanillaAttn => {
                d_ct.row_mut(0).copy_from_slice(dc);
            }
            Variant::WTan => {
                let t_d = doc.topic_proportions.as_ref().expect("t_d");
                for kk in 0..kq {
                    axpy(t_d[kk], dc, d_ct.row_mut(kk));
                }
                let mut dt_d = vec![0.0; k];
                for kk in 0..k {
                    dt_d[kk] = crate::numeric::dot(c_t.row(kk), dc);
                }
                let mut dtheta = vec![0.0; k];
                softmax_backward(t_d, &dt_d, &mut dtheta);
                let (t_e, _) = shared.expect("topic queries");
                let x_emb = doc.doc_embedding.as_ref().expect("x_emb");
                let dte = sg.dte.as_mut().expect("dte");
                for kk in 0..k {
                    axpy(dtheta[kk], x_emb, dte.row_mut(kk));
                }
                let dx_emb = t_e.matvec_t(&dtheta);
                let inv_sum = 1.0 / batch.bow_sum(d);
                for &(v, c) in batch.bow(d) {
                    axpy(
                        c as f64 * inv_sum,
                        &dx_emb,
                        sg.words.row_mut((v - 1) as usize),
                    );
                }
            }
            Variant::TTan => {
                // The selected row passes the gradient through unchanged; the
                // argmax itself contributes none almost everywhere.
                let sel = doc.selected_topic.expect("selected topic");
                d_ct.row_mut(sel).copy_from_slice(dc);
            }
            Variant::OnlyLstm => unreachable!(),
        }

        // C_T = A^T M
        let mut d_a = matmul(m, false, &d_ct, true); // len x Kq
        gemm(1.0, a, false, &d_ct, false, 1.0, &mut d_m);

        // Softmax over positions, per query column.
        let dscore = column_softmax_backward(a, &d_a);
        d_a = dscore;

        // score[j][k] = v . tanh(u[k] + keys[j])
        let keys = matmul(m, false, &attn.w_key, false); // len x P
        let p = cfg.attn_dim;
        let query_local; // vanilla query projection, built on demand
        let u: &Mat = if cfg.variant.uses_topic_attention() {
            shared.expect("topic queries").1
        } else {
            let query = Mat::from_vec(1, h, doc.h_final.clone());
            query_local = matmul(&query, false, &attn.w_query, false);
            &query_local
        };
        let mut f_mat = Mat::zeros(len, p);
        let mut du_local = Mat::zeros(kq, p);
        let dv = sg.v.as_mut().expect("attn v grad");
        for j in 0..len {
            let key = keys.row(j);
            let f_row = f_mat.row_mut(j);
            for kk in 0..kq {
                let e = d_a.get(j, kk);
                if e == 0.0 {
                    continue;
                }
                let uk = u.row(kk);
                let du_row = du_local.row_mut(kk);
                for i in 0..p {
                    let t = tanh(uk[i] + key[i]);
                    dv[i] += e * t;
                    let coef = e * (1.0 - t * t) * attn.v[i];
                    f_row[i] += coef;
                    du_row[i] += coef;
                }
            }
        }
        gemm(1.0, &f_mat, false, &attn.w_key, true, 1.0, &mut d_m);
        gemm(
            1.0,
            m,
            true,
            &f_mat,
            false,
            1.0,
            sg.w_key.as_mut().expect("w_key grad"),
        );
        if cfg.variant.uses_topic_attention() {
            sg.du_sum.as_mut().expect("du_sum").add_assign(&du_local);
        } else {
            let du_row = du_local.row(0);
            axpy(1.0, &attn.w_query.matvec(du_row), &mut dh_final_extra);
            let wq = sg.w_query.as_mut().expect("w_query grad");
            for hh in 0..h {
                axpy(doc.h_final[hh], du_row, wq.row_mut(hh));
            }
        }
    }

    // h_final is the last memory-bank row.
    axpy(1.0, &dh_final_extra, d_m.row_mut(len - 1));

    // Backprop through time, rematerializing gates and cells.
    let x = ops::embed_sequence(ids, &params.embedding).expect("ids validated in forward");
    let lt = ops::lstm_forward(&x, &params.lstm, h);
    let mut da_mat = Mat::zeros(len, 4 * h);
    let mut ds_carry = vec![0.0; h];
    let mut dh_carry = vec![0.0; h];
    let zeros = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    for t in (0..len).rev() {
        let s_t = lt.cells.row(t);
        let s_prev = if t > 0 { lt.cells.row(t - 1) } else { &zeros[..] };
        let gates = lt.gates.row(t);
        let dm_row = d_m.row(t);
        for i in 0..h {
            let dh = dm_row[i] + dh_carry[i];
            let gi = gates[i];
            let gf = gates[h + i];
            let gg = gates[2 * h + i];
            let go = gates[3 * h + i];
            let ts = tanh(s_t[i]);
            let d_o = dh * ts;
            let ds = ds_carry[i] + dh * go * (1.0 - ts * ts);
            let d_i = ds * gg;
            let d_g = ds * gi;
            let d_f = ds * s_prev[i];
            ds_carry[i] = ds * gf;
            da[i] = d_i * gi * (1.0 - gi);
            da[h + i] = d_f * gf * (1.0 - gf);
            da[2 * h + i] = d_g * (1.0 - gg * gg);
            da[3 * h + i] = d_o * go * (1.0 - go);
        }
        dh_carry = params.lstm.w_h.matvec(&da);
        da_mat.row_mut(t).copy_from_slice(&da);
    }
    for t in 0..len {
        axpy(1.0, da_mat.row(t), &mut sg.lstm_b);
    }
    gemm(1.0, &x, true, &da_mat, false, 1.0, &mut sg.lstm_w_x);
    // Hidden-state inputs are the previous rows of the memory bank (zero at t=0).
    let mut m_prev = Mat::zeros(len, h);
    for t in 1..len {
        m_prev.row_mut(t).copy_from_slice(lt.m.row(t - 1));
    }
    gemm(1.0, &m_prev, true, &da_mat, false, 1.0, &mut sg.lstm_w_h);
    let de = matmul(&da_mat, false, &params.lstm.w_x, true); // len x E
    for (j, &id) in ids.iter().enumerate() {
        debug_assert!(id != 0, "pad inside true length");
        axpy(1.0, de.row(j), sg.words.row_mut((id - 1) as usize));
    }
}

fn col_sums(m: &Mat, out: &mut [f64]) {
    for r in 0..m.rows() {
        axpy(1.0, m.row(r), out);
    }
}

/// Gradients of the batch-mean loss w.r.t. every trainable tensor, for the
/// exact stochastic path recorded in `trace` (noise, dropout mask, and
/// normalization statistics are reused, not re-sampled).
pub fn backward(
    batch: &Batch,
    params: &ModelParams,
    cfg: &ModelConfig,
    trace: &ForwardTrace,
    threads: usize,
) -> Grads {
    let b = batch.size();
    let v = cfg.vocab_size;
    let k = cfg.topics;
    let inv_b = 1.0 / b as f64;
    let mut grads = Grads::zeros(cfg);
    let internals = &trace.internals;

    // Reconstruction softmax + cross entropy, exact w.r.t. the epsilon floor.
    let mut dlogits = Mat::zeros(b, v);
    for d in 0..b {
        let p = trace.x_rec.row(d);
        let mut dot = 0.0;
        for &(vv, c) in batch.bow(d) {
            let pv = p[(vv - 1) as usize];
            let g = -(c as f64) * inv_b / (pv + EPS_RECON);
            dot += g * pv;
        }
        let row = dlogits.row_mut(d);
        for w in 0..v {
            row[w] = -dot * p[w];
        }
        for &(vv, c) in batch.bow(d) {
            let idx = (vv - 1) as usize;
            let g = -(c as f64) * inv_b / (p[idx] + EPS_RECON);
            row[idx] += p[idx] * g;
        }
    }

    gemm(
        1.0,
        &internals.u_dec,
        true,
        &dlogits,
        false,
        1.0,
        &mut grads.decoder_w,
    );
    col_sums(&dlogits, &mut grads.decoder_b);

    let du_dec = matmul(&dlogits, false, &params.decoder.w, true); // B x K
    let d_dropped = bn_backward(
        &du_dec,
        &internals.bn_dec_cache,
        &params.bn_dec,
        &mut grads.bn_dec_gamma,
        &mut grads.bn_dec_beta,
    );

    let mut dz = d_dropped;
    if let Some(mask) = &internals.drop_mask {
        for (g, m) in dz.data_mut().iter_mut().zip(mask.data().iter()) {
            *g *= m;
        }
    }

    let mut dz_mu = dz.clone();
    let mut dz_lv = Mat::zeros(b, k);
    if let Some(noise) = &internals.noise {
        for r in 0..b {
            let lv = trace.z_logvar.row(r);
            let nr = noise.row(r);
            let dzr = dz.row(r);
            let out = dz_lv.row_mut(r);
            for c in 0..k {
                out[c] = dzr[c] * 0.5 * exp(0.5 * lv[c]) * nr[c];
            }
        }
    }
    for r in 0..b {
        let (mu, lv) = (trace.z_mu.row(r), trace.z_logvar.row(r));
        // split borrows: rows are disjoint
        let dmu_row = dz_mu.row_mut(r);
        let mut tmp_lv = vec![0.0; k];
        kl_backward(mu, lv, &internals.prior, inv_b, dmu_row, &mut tmp_lv);
        axpy(1.0, &tmp_lv, dz_lv.row_mut(r));
    }

    // Inference heads and their normalization layers.
    gemm(
        1.0,
        &internals.bn_mu_out,
        true,
        &dz_mu,
        false,
        1.0,
        &mut grads.head_mu_w,
    );
    col_sums(&dz_mu, &mut grads.head_mu_b);
    let d_bn_mu = matmul(&dz_mu, false, &params.head_mu.w, true);
    let dc_mu = bn_backward(
        &d_bn_mu,
        &internals.bn_mu_cache,
        &params.bn_mu,
        &mut grads.bn_mu_gamma,
        &mut grads.bn_mu_beta,
    );

    gemm(
        1.0,
        &internals.bn_lv_out,
        true,
        &dz_lv,
        false,
        1.0,
        &mut grads.head_logvar_w,
    );
    col_sums(&dz_lv, &mut grads.head_logvar_b);
    let d_bn_lv = matmul(&dz_lv, false, &params.head_logvar.w, true);
    let dc_lv = bn_backward(
        &d_bn_lv,
        &internals.bn_lv_cache,
        &params.bn_logvar,
        &mut grads.bn_logvar_gamma,
        &mut grads.bn_logvar_beta,
    );

    let mut d_c = dc_mu;
    d_c.add_assign(&dc_lv);

    // Per-document encoder/attention stage.
    let shared = match (&trace.topic_embed, &internals.u_proj) {
        (Some(t_e), Some(u)) => Some((t_e, u)),
        _ => None,
    };
    let chunk_grads = run_chunks(b, threads, |range| {
        let mut sg = StageGrads::zeros(cfg);
        for d in range {
            doc_backward(
                batch,
                d,
                d_c.row(d),
                &trace.docs[d],
                params,
                cfg,
                shared,
                &mut sg,
            );
        }
        sg
    });
    let mut stage = StageGrads::zeros(cfg);
    for sg in chunk_grads {
        stage.merge(sg);
    }

    grads.lstm_w_x.add_assign(&stage.lstm_w_x);
    grads.lstm_w_h.add_assign(&stage.lstm_w_h);
    for (a, bb) in grads.lstm_b.iter_mut().zip(stage.lstm_b.iter()) {
        *a += bb;
    }
    grads.embedding_words.add_assign(&stage.words);
    if let (Some(g), Some(s)) = (&mut grads.attn_w_key, &stage.w_key) {
        g.add_assign(s);
    }
    if let (Some(g), Some(s)) = (&mut grads.attn_v, &stage.v) {
        for (a, bb) in g.iter_mut().zip(s.iter()) {
            *a += bb;
        }
    }
    if let (Some(g), Some(s)) = (&mut grads.attn_w_query, &stage.w_query) {
        g.add_assign(s);
    }

    // Shared topic-query resolution: U = T_E w_query, T_E = T_w words,
    // T_w = rowsoftmax(decoder.w).
    if cfg.variant.uses_topic_attention() {
        let t_e = trace.topic_embed.as_ref().expect("t_e");
        let t_w = trace.topic_word.as_ref().expect("t_w");
        let attn = params.attn.as_ref().expect("attention params");
        let mut dte = stage.dte.expect("dte");
        let du_sum = stage.du_sum.expect("du_sum");
        gemm(1.0, &du_sum, false, &attn.w_query, true, 1.0, &mut dte);
        gemm(
            1.0,
            t_e,
            true,
            &du_sum,
            false,
            1.0,
            grads.attn_w_query.as_mut().expect("w_query grad"),
        );

        let dt_w = matmul(&dte, false, &params.embedding.words, true); // K x V
        gemm(
            1.0,
            t_w,
            true,
            &dte,
            false,
            1.0,
            &mut grads.embedding_words,
        );
        let mut row_out = vec![0.0; v];
        for kk in 0..k {
            softmax_backward(t_w.row(kk), dt_w.row(kk), &mut row_out);
            axpy(1.0, &row_out, grads.decoder_w.row_mut(kk));
        }
    }

    grads
}
