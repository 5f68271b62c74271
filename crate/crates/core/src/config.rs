//! Model configuration and the ablation variant switch.

use crate::error::CoreError;

/// Which encoder/aggregation path the model runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Final LSTM hidden state feeds the inference heads directly.
    OnlyLstm,
    /// Additive attention over hidden states with the final hidden state as
    /// query; the single context vector feeds the heads.
    VanillaAttn,
    /// Topic-guided attention; context rows aggregated by the document-topic
    /// proportions.
    WTan,
    /// Topic-guided attention; the context row of the most probable topic is
    /// selected (ties to the lowest index).
    TTan,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::OnlyLstm,
        Variant::VanillaAttn,
        Variant::WTan,
        Variant::TTan,
    ];

    /// Attention parameters exist for every variant except the plain LSTM.
    pub fn uses_attention(self) -> bool {
        !matches!(self, Variant::OnlyLstm)
    }

    /// Topic embeddings serve as attention queries.
    pub fn uses_topic_attention(self) -> bool {
        matches!(self, Variant::WTan | Variant::TTan)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::OnlyLstm => "lstm",
            Variant::VanillaAttn => "attn",
            Variant::WTan => "wtan",
            Variant::TTan => "ttan",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "lstm" => Some(Variant::OnlyLstm),
            "attn" => Some(Variant::VanillaAttn),
            "wtan" => Some(Variant::WTan),
            "ttan" => Some(Variant::TTan),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Vocabulary size |V|, excluding the padding index 0.
    pub vocab_size: usize,
    /// Number of topics K.
    pub topics: usize,
    /// Word embedding dimension E.
    pub embed_dim: usize,
    /// LSTM hidden dimension H.
    pub hidden_dim: usize,
    /// Attention projection dimension P.
    pub attn_dim: usize,
    pub variant: Variant,
    /// Dropout rate applied to z before the decoder (train mode only).
    pub dropout_rate: f64,
    /// Symmetric Dirichlet concentration for the latent prior.
    pub prior_alpha: f64,
}

impl ModelConfig {
    /// Paper-scale defaults: K=50, E=200, H=450, P=350, dropout 0.6, alpha 1/K.
    pub fn new(vocab_size: usize, variant: Variant) -> Self {
        let topics = 50;
        Self {
            vocab_size,
            topics,
            embed_dim: 200,
            hidden_dim: 450,
            attn_dim: 350,
            variant,
            dropout_rate: 0.6,
            prior_alpha: 1.0 / topics as f64,
        }
    }

    pub fn with_topics(mut self, topics: usize) -> Self {
        self.topics = topics;
        self.prior_alpha = 1.0 / topics as f64;
        self
    }

    /// Dimension of the attention query: topic embeddings for the TAN
    /// variants, the final hidden state for vanilla attention.
    pub fn query_dim(&self) -> usize {
        if self.variant.uses_topic_attention() {
            self.embed_dim
        } else {
            self.hidden_dim
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.vocab_size == 0 {
            return Err(CoreError::InvalidConfig("vocab_size must be positive"));
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.attn_dim == 0 {
            return Err(CoreError::InvalidConfig("all dimensions must be positive"));
        }
        if self.topics < 2 {
            return Err(CoreError::InvalidConfig("at least two topics required"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(CoreError::InvalidConfig("dropout_rate must be in [0,1)"));
        }
        if self.prior_alpha.is_nan() || self.prior_alpha <= 0.0 {
            return Err(CoreError::InvalidConfig("prior_alpha must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_training_setup() {
        let cfg = ModelConfig::new(1995, Variant::TTan);
        assert_eq!(cfg.topics, 50);
        assert_eq!(cfg.embed_dim, 200);
        assert_eq!(cfg.hidden_dim, 450);
        assert_eq!(cfg.attn_dim, 350);
        assert!((cfg.dropout_rate - 0.6).abs() < 1e-12);
        assert!((cfg.prior_alpha - 0.02).abs() < 1e-12);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn query_dim_by_variant() {
        let mut cfg = ModelConfig::new(100, Variant::TTan);
        assert_eq!(cfg.query_dim(), cfg.embed_dim);
        cfg.variant = Variant::VanillaAttn;
        assert_eq!(cfg.query_dim(), cfg.hidden_dim);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.as_str()), Some(v));
        }
        assert_eq!(Variant::parse("bogus"), None);
    }

    #[test]
    fn rejects_bad_dropout() {
        let mut cfg = ModelConfig::new(10, Variant::WTan);
        cfg.dropout_rate = 1.0;
        assert!(cfg.validate().is_err());
    }
}
