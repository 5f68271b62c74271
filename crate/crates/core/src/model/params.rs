//! Trainable tensors, initialization, and the matching gradient container.
//!
//! Tensor traversal order is fixed and shared by the optimizer, checkpointing
//! and the finite-difference tests; `trainable` on params and grads must stay
//! in lockstep.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::ModelConfig;
use crate::mat::Mat;
use crate::numeric::sqrt;
use crate::rng::Rng;

/// Word embeddings, split so the padding row and the vocabulary block can be
/// addressed (and matrix-multiplied) separately. Vocabulary index `v >= 1`
/// lives at `words` row `v - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub pad: Vec<f64>,
    pub words: Mat,
}

impl Embedding {
    pub fn row(&self, id: u32) -> &[f64] {
        if id == 0 {
            &self.pad
        } else {
            self.words.row((id - 1) as usize)
        }
    }
}

/// Affine map stored input-major: `y = x W + b` with `W: in x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Mat,
    pub b: Vec<f64>,
}

/// LSTM cell parameters. Gate order along the `4H` axis is `[i | f | g | o]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w_x: Mat, // E x 4H
    pub w_h: Mat, // H x 4H
    pub b: Vec<f64>, // 4H
}

/// Additive attention parameters; the concatenated projection is stored as
/// separate query/key blocks (`W_A = [w_query | w_key]` along the input axis).
#[derive(Clone, Debug, PartialEq)]
pub struct AttnParams {
    pub w_query: Mat, // query_dim x P
    pub w_key: Mat,   // H x P
    pub v: Vec<f64>,  // P
}

/// Feature-normalization layer: trainable scale/shift plus running moments.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNorm {
    pub fn identity(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
        }
    }

    /// `running = decay * running + (1 - decay) * batch`
    pub fn update_running(&mut self, mean: &[f64], var: &[f64], decay: f64) {
        for (r, &m) in self.running_mean.iter_mut().zip(mean.iter()) {
            *r = decay * *r + (1.0 - decay) * m;
        }
        for (r, &v) in self.running_var.iter_mut().zip(var.iter()) {
            *r = decay * *r + (1.0 - decay) * v;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub embedding: Embedding,
    pub lstm: LstmParams,
    pub attn: Option<AttnParams>,
    pub bn_mu: BatchNorm,
    pub head_mu: Dense, // H -> K
    pub bn_logvar: BatchNorm,
    pub head_logvar: Dense, // H -> K
    pub bn_dec: BatchNorm,  // over K features
    pub decoder: Dense,     // K -> |V|; its weight is the topic-word logit matrix
}

fn xavier(rng: &mut Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Mat {
    let limit = sqrt(6.0 / (fan_in + fan_out) as f64);
    Mat::from_fn(rows, cols, |_, _| rng.uniform(-limit, limit))
}

impl ModelParams {
    /// Fresh parameters: embeddings uniform in (-0.05, 0.05), dense weights
    /// Xavier-initialized, biases zero, normalization layers at identity.
    /// Draw order is fixed so a seed pins every tensor.
    pub fn init(cfg: &ModelConfig, rng: &mut Rng) -> Self {
        let v = cfg.vocab_size;
        let e = cfg.embed_dim;
        let h = cfg.hidden_dim;
        let p = cfg.attn_dim;
        let k = cfg.topics;

        let pad: Vec<f64> = (0..e).map(|_| rng.uniform(-0.05, 0.05)).collect();
        let words = Mat::from_fn(v, e, |_, _| rng.uniform(-0.05, 0.05));

        // The LSTM kernel is logically one ((E+H) x 4H) matrix; both blocks
        // share its Xavier limit.
        let w_x = xavier(rng, e, 4 * h, e + h, 4 * h);
        let w_h = xavier(rng, h, 4 * h, e + h, 4 * h);
        let lstm = LstmParams {
            w_x,
            w_h,
            b: vec![0.0; 4 * h],
        };

        let attn = if cfg.variant.uses_attention() {
            let q = cfg.query_dim();
            let w_query = xavier(rng, q, p, q + h, p);
            let w_key = xavier(rng, h, p, q + h, p);
            let limit = sqrt(6.0 / (p + 1) as f64);
            let v_vec: Vec<f64> = (0..p).map(|_| rng.uniform(-limit, limit)).collect();
            Some(AttnParams {
                w_query,
                w_key,
                v: v_vec,
            })
        } else {
            None
        };

        let head_mu = Dense {
            w: xavier(rng, h, k, h, k),
            b: vec![0.0; k],
        };
        let head_logvar = Dense {
            w: xavier(rng, h, k, h, k),
            b: vec![0.0; k],
        };
        let decoder = Dense {
            w: xavier(rng, k, v, k, v),
            b: vec![0.0; v],
        };

        Self {
            embedding: Embedding { pad, words },
            lstm,
            attn,
            bn_mu: BatchNorm::identity(h),
            head_mu,
            bn_logvar: BatchNorm::identity(h),
            head_logvar,
            bn_dec: BatchNorm::identity(k),
            decoder,
        }
    }

    /// Trainable tensors in canonical order as `(name, rows, cols, data)`.
    pub fn trainable(&self) -> Vec<(&'static str, usize, usize, &[f64])> {
        let mut out: Vec<(&'static str, usize, usize, &[f64])> = Vec::new();
        let e = self.embedding.words.cols();
        out.push(("embedding.pad", 1, e, &self.embedding.pad));
        out.push((
            "embedding.words",
            self.embedding.words.rows(),
            e,
            self.embedding.words.data(),
        ));
        out.push((
            "lstm.w_x",
            self.lstm.w_x.rows(),
            self.lstm.w_x.cols(),
            self.lstm.w_x.data(),
        ));
        out.push((
            "lstm.w_h",
            self.lstm.w_h.rows(),
            self.lstm.w_h.cols(),
            self.lstm.w_h.data(),
        ));
        out.push(("lstm.b", 1, self.lstm.b.len(), &self.lstm.b));
        if let Some(attn) = &self.attn {
            out.push((
                "attn.w_query",
                attn.w_query.rows(),
                attn.w_query.cols(),
                attn.w_query.data(),
            ));
            out.push((
                "attn.w_key",
                attn.w_key.rows(),
                attn.w_key.cols(),
                attn.w_key.data(),
            ));
            out.push(("attn.v", 1, attn.v.len(), &attn.v));
        }
        out.push(("bn_mu.gamma", 1, self.bn_mu.gamma.len(), &self.bn_mu.gamma));
        out.push(("bn_mu.beta", 1, self.bn_mu.beta.len(), &self.bn_mu.beta));
        out.push((
            "head_mu.w",
            self.head_mu.w.rows(),
            self.head_mu.w.cols(),
            self.head_mu.w.data(),
        ));
        out.push(("head_mu.b", 1, self.head_mu.b.len(), &self.head_mu.b));
        out.push((
            "bn_logvar.gamma",
            1,
            self.bn_logvar.gamma.len(),
            &self.bn_logvar.gamma,
        ));
        out.push((
            "bn_logvar.beta",
            1,
            self.bn_logvar.beta.len(),
            &self.bn_logvar.beta,
        ));
        out.push((
            "head_logvar.w",
            self.head_logvar.w.rows(),
            self.head_logvar.w.cols(),
            self.head_logvar.w.data(),
        ));
        out.push((
            "head_logvar.b",
            1,
            self.head_logvar.b.len(),
            &self.head_logvar.b,
        ));
        out.push(("bn_dec.gamma", 1, self.bn_dec.gamma.len(), &self.bn_dec.gamma));
        out.push(("bn_dec.beta", 1, self.bn_dec.beta.len(), &self.bn_dec.beta));
        out.push((
            "decoder.w",
            self.decoder.w.rows(),
            self.decoder.w.cols(),
            self.decoder.w.data(),
        ));
        out.push(("decoder.b", 1, self.decoder.b.len(), &self.decoder.b));
        out
    }

    /// Mutable view of the trainable tensors, same order as [`trainable`].
    pub fn trainable_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out: Vec<(&'static str, &mut [f64])> =
            vec![("embedding.pad", self.embedding.pad.as_mut_slice())];
        out.push(("embedding.words", self.embedding.words.data_mut()));
        out.push(("lstm.w_x", self.lstm.w_x.data_mut()));
        out.push(("lstm.w_h", self.lstm.w_h.data_mut()));
        out.push(("lstm.b", self.lstm.b.as_mut_slice()));
        if let Some(attn) = &mut self.attn {
            out.push(("attn.w_query", attn.w_query.data_mut()));
            out.push(("attn.w_key", attn.w_key.data_mut()));
            out.push(("attn.v", attn.v.as_mut_slice()));
        }
        out.push(("bn_mu.gamma", self.bn_mu.gamma.as_mut_slice()));
        out.push(("bn_mu.beta", self.bn_mu.beta.as_mut_slice()));
        out.push(("head_mu.w", self.head_mu.w.data_mut()));
        out.push(("head_mu.b", self.head_mu.b.as_mut_slice()));
        out.push(("bn_logvar.gamma", self.bn_logvar.gamma.as_mut_slice()));
        out.push(("bn_logvar.beta", self.bn_logvar.beta.as_mut_slice()));
        out.push(("head_logvar.w", self.head_logvar.w.data_mut()));
        out.push(("head_logvar.b", self.head_logvar.b.as_mut_slice()));
        out.push(("bn_dec.gamma", self.bn_dec.gamma.as_mut_slice()));
        out.push(("bn_dec.beta", self.bn_dec.beta.as_mut_slice()));
        out.push(("decoder.w", self.decoder.w.data_mut()));
        out.push(("decoder.b", self.decoder.b.as_mut_slice()));
        out
    }

    /// Every tensor needed to reconstruct the model, running statistics
    /// included — this is the checkpoint payload.
    pub fn state_tensors(&self) -> Vec<(&'static str, usize, usize, &[f64])> {
        let mut out = self.trainable();
        for (name, bn) in [
            ("bn_mu", &self.bn_mu),
            ("bn_logvar", &self.bn_logvar),
            ("bn_dec", &self.bn_dec),
        ] {
            let (mean_name, var_name) = match name {
                "bn_mu" => ("bn_mu.running_mean", "bn_mu.running_var"),
                "bn_logvar" => ("bn_logvar.running_mean", "bn_logvar.running_var"),
                _ => ("bn_dec.running_mean", "bn_dec.running_var"),
            };
            out.push((mean_name, 1, bn.running_mean.len(), &bn.running_mean));
            out.push((var_name, 1, bn.running_var.len(), &bn.running_var));
        }
        out
    }

    /// Mutable counterpart of [`state_tensors`], used when loading checkpoints.
    pub fn state_tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out: Vec<(&'static str, &mut [f64])> =
            vec![("embedding.pad", self.embedding.pad.as_mut_slice())];
        out.push(("embedding.words", self.embedding.words.data_mut()));
        out.push(("lstm.w_x", self.lstm.w_x.data_mut()));
        out.push(("lstm.w_h", self.lstm.w_h.data_mut()));
        out.push(("lstm.b", self.lstm.b.as_mut_slice()));
        if let Some(attn) = &mut self.attn {
            out.push(("attn.w_query", attn.w_query.data_mut()));
            out.push(("attn.w_key", attn.w_key.data_mut()));
            out.push(("attn.v", attn.v.as_mut_slice()));
        }
        out.push(("bn_mu.gamma", self.bn_mu.gamma.as_mut_slice()));
        out.push(("bn_mu.beta", self.bn_mu.beta.as_mut_slice()));
        out.push(("head_mu.w", self.head_mu.w.data_mut()));
        out.push(("head_mu.b", self.head_mu.b.as_mut_slice()));
        out.push(("bn_logvar.gamma", self.bn_logvar.gamma.as_mut_slice()));
        out.push(("bn_logvar.beta", self.bn_logvar.beta.as_mut_slice()));
        out.push(("head_logvar.w", self.head_logvar.w.data_mut()));
        out.push(("head_logvar.b", self.head_logvar.b.as_mut_slice()));
        out.push(("bn_dec.gamma", self.bn_dec.gamma.as_mut_slice()));
        out.push(("bn_dec.beta", self.bn_dec.beta.as_mut_slice()));
        out.push(("decoder.w", self.decoder.w.data_mut()));
        out.push(("decoder.b", self.decoder.b.as_mut_slice()));
        out.push(("bn_mu.running_mean", self.bn_mu.running_mean.as_mut_slice()));
        out.push(("bn_mu.running_var", self.bn_mu.running_var.as_mut_slice()));
        out.push((
            "bn_logvar.running_mean",
            self.bn_logvar.running_mean.as_mut_slice(),
        ));
        out.push((
            "bn_logvar.running_var",
            self.bn_logvar.running_var.as_mut_slice(),
        ));
        out.push(("bn_dec.running_mean", self.bn_dec.running_mean.as_mut_slice()));
        out.push(("bn_dec.running_var", self.bn_dec.running_var.as_mut_slice()));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.trainable()
            .iter()
            .all(|(_, _, _, data)| data.iter().all(|x| x.is_finite()))
    }
}

/// Gradient accumulator mirroring [`ModelParams`].
#[derive(Clone, Debug)]
pub struct Grads {
    pub embedding_pad: Vec<f64>,
    pub embedding_words: Mat,
    pub lstm_w_x: Mat,
    pub lstm_w_h: Mat,
    pub lstm_b: Vec<f64>,
    pub attn_w_query: Option<Mat>,
    pub attn_w_key: Option<Mat>,
    pub attn_v: Option<Vec<f64>>,
    pub bn_mu_gamma: Vec<f64>,
    pub bn_mu_beta: Vec<f64>,
    pub head_mu_w: Mat,
    pub head_mu_b: Vec<f64>,
    pub bn_logvar_gamma: Vec<f64>,
    pub bn_logvar_beta: Vec<f64>,
    pub head_logvar_w: Mat,
    pub head_logvar_b: Vec<f64>,
    pub bn_dec_gamma: Vec<f64>,
    pub bn_dec_beta: Vec<f64>,
    pub decoder_w: Mat,
    pub decoder_b: Vec<f64>,
}

impl Grads {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let v = cfg.vocab_size;
        let e = cfg.embed_dim;
        let h = cfg.hidden_dim;
        let p = cfg.attn_dim;
        let k = cfg.topics;
        let attn = cfg.variant.uses_attention();
        Self {
            embedding_pad: vec![0.0; e],
            embedding_words: Mat::zeros(v, e),
            lstm_w_x: Mat::zeros(e, 4 * h),
            lstm_w_h: Mat::zeros(h, 4 * h),
            lstm_b: vec![0.0; 4 * h],
            attn_w_query: attn.then(|| Mat::zeros(cfg.query_dim(), p)),
            attn_w_key: attn.then(|| Mat::zeros(h, p)),
            attn_v: attn.then(|| vec![0.0; p]),
            bn_mu_gamma: vec![0.0; h],
            bn_mu_beta: vec![0.0; h],
            head_mu_w: Mat::zeros(h, k),
            head_mu_b: vec![0.0; k],
            bn_logvar_gamma: vec![0.0; h],
            bn_logvar_beta: vec![0.0; h],
            head_logvar_w: Mat::zeros(h, k),
            head_logvar_b: vec![0.0; k],
            bn_dec_gamma: vec![0.0; k],
            bn_dec_beta: vec![0.0; k],
            decoder_w: Mat::zeros(k, v),
            decoder_b: vec![0.0; v],
        }
    }

    /// Tensor views in the same canonical order as
    /// [`ModelParams::trainable`].
    pub fn trainable(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = vec![("embedding.pad", &self.embedding_pad)];
        out.push(("embedding.words", self.embedding_words.data()));
        out.push(("lstm.w_x", self.lstm_w_x.data()));
        out.push(("lstm.w_h", self.lstm_w_h.data()));
        out.push(("lstm.b", &self.lstm_b));
        if let (Some(q), Some(kk), Some(v)) = (&self.attn_w_query, &self.attn_w_key, &self.attn_v)
        {
            out.push(("attn.w_query", q.data()));
            out.push(("attn.w_key", kk.data()));
            out.push(("attn.v", v));
        }
        out.push(("bn_mu.gamma", &self.bn_mu_gamma));
        out.push(("bn_mu.beta", &self.bn_mu_beta));
        out.push(("head_mu.w", self.head_mu_w.data()));
        out.push(("head_mu.b", &self.head_mu_b));
        out.push(("bn_logvar.gamma", &self.bn_logvar_gamma));
        out.push(("bn_logvar.beta", &self.bn_logvar_beta));
        out.push(("head_logvar.w", self.head_logvar_w.data()));
        out.push(("head_logvar.b", &self.head_logvar_b));
        out.push(("bn_dec.gamma", &self.bn_dec_gamma));
        out.push(("bn_dec.beta", &self.bn_dec_beta));
        out.push(("decoder.w", self.decoder_w.data()));
        out.push(("decoder.b", &self.decoder_b));
        out
    }

    pub fn add_assign(&mut self, other: &Grads) {
        fn addv(a: &mut [f64], b: &[f64]) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
        }
        addv(&mut self.embedding_pad, &other.embedding_pad);
        self.embedding_words.add_assign(&other.embedding_words);
        self.lstm_w_x.add_assign(&other.lstm_w_x);
        self.lstm_w_h.add_assign(&other.lstm_w_h);
        addv(&mut self.lstm_b, &other.lstm_b);
        if let (Some(a), Some(b)) = (&mut self.attn_w_query, &other.attn_w_query) {
            a.add_assign(b);
        }
        if let (Some(a), Some(b)) = (&mut self.attn_w_key, &other.attn_w_key) {
            a.add_assign(b);
        }
        if let (Some(a), Some(b)) = (&mut self.attn_v, &other.attn_v) {
            addv(a, b);
        }
        addv(&mut self.bn_mu_gamma, &other.bn_mu_gamma);
        addv(&mut self.bn_mu_beta, &other.bn_mu_beta);
        self.head_mu_w.add_assign(&other.head_mu_w);
        addv(&mut self.head_mu_b, &other.head_mu_b);
        addv(&mut self.bn_logvar_gamma, &other.bn_logvar_gamma);
        addv(&mut self.bn_logvar_beta, &other.bn_logvar_beta);
        self.head_logvar_w.add_assign(&other.head_logvar_w);
        addv(&mut self.head_logvar_b, &other.head_logvar_b);
        addv(&mut self.bn_dec_gamma, &other.bn_dec_gamma);
        addv(&mut self.bn_dec_beta, &other.bn_dec_beta);
        self.decoder_w.add_assign(&other.decoder_w);
        addv(&mut self.decoder_b, &other.decoder_b);
    }
}
