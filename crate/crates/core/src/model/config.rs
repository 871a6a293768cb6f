use crate::error::{Error, Result};
use crate::kv::KvText;

/// Architecture hyper-parameters shared by the encoder, the two-stream decoder
/// and the self-estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub layers_enc: usize,
    pub layers_dec: usize,
    pub layers_est: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub src_vocab_size: usize,
    pub tgt_vocab_size: usize,
    pub max_len: usize,
    pub dropout_rate: f64,
    pub label_smoothing: f64,
    pub share_embeddings: bool,
}

impl ModelConfig {
    /// Desk-scale defaults: 2/2/2 layers, d=64, 4 heads, ffn 128.
    pub fn desk(src_vocab_size: usize, tgt_vocab_size: usize) -> Self {
        Self {
            layers_enc: 2,
            layers_dec: 2,
            layers_est: 2,
            model_dim: 64,
            heads: 4,
            ffn_dim: 128,
            src_vocab_size,
            tgt_vocab_size,
            max_len: 32,
            dropout_rate: 0.1,
            label_smoothing: 0.1,
            share_embeddings: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("layers_enc", self.layers_enc),
            ("layers_dec", self.layers_dec),
            ("layers_est", self.layers_est),
            ("model_dim", self.model_dim),
            ("heads", self.heads),
            ("ffn_dim", self.ffn_dim),
            ("src_vocab_size", self.src_vocab_size),
            ("tgt_vocab_size", self.tgt_vocab_size),
            ("max_len", self.max_len),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.model_dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "model_dim {} not divisible by heads {}",
                self.model_dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config("dropout_rate must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config("label_smoothing must lie in [0, 1)".into()));
        }
        if self.share_embeddings && self.src_vocab_size != self.tgt_vocab_size {
            return Err(Error::Config(
                "share_embeddings requires equal source and target vocabularies".into(),
            ));
        }
        Ok(())
    }

    /// Number of learned scalars implied by this configuration.
    pub fn parameter_count(&self) -> usize {
        let d = self.model_dim;
        let f = self.ffn_dim;
        let attn = 4 * (d * d + d);
        let ffn = d * f + f + f * d + d;
        let ln = 2 * d;
        let enc = self.layers_enc * (attn + ffn + 2 * ln) + ln;
        let dec = self.layers_dec * (2 * attn + ffn + 3 * ln) + ln;
        let est = self.layers_est * (2 * attn + ffn + 3 * ln) + ln;
        let embeddings = if self.share_embeddings {
            self.src_vocab_size * d
        } else {
            // source/target embeddings plus two output projections
            2 * (self.src_vocab_size * d + self.tgt_vocab_size * d)
        };
        enc + dec + est + embeddings
    }

    /// Canonical key-value rendering; also the basis of the config fingerprint.
    pub fn to_kv(&self) -> KvText {
        let mut kv = KvText::new();
        kv.push("layers_enc", self.layers_enc)
            .push("layers_dec", self.layers_dec)
            .push("layers_est", self.layers_est)
            .push("model_dim", self.model_dim)
            .push("heads", self.heads)
            .push("ffn_dim", self.ffn_dim)
            .push("src_vocab_size", self.src_vocab_size)
            .push("tgt_vocab_size", self.tgt_vocab_size)
            .push("max_len", self.max_len)
            .push("dropout_rate", format_f64(self.dropout_rate))
            .push("label_smoothing", format_f64(self.label_smoothing))
            .push("share_embeddings", self.share_embeddings);
        kv
    }

    pub fn from_kv(kv: &KvText) -> Result<Self> {
        let cfg = Self {
            layers_enc: kv.require("layers_enc")?,
            layers_dec: kv.require("layers_dec")?,
            layers_est: kv.require("layers_est")?,
            model_dim: kv.require("model_dim")?,
            heads: kv.require("heads")?,
            ffn_dim: kv.require("ffn_dim")?,
            src_vocab_size: kv.require("src_vocab_size")?,
            tgt_vocab_size: kv.require("tgt_vocab_size")?,
            max_len: kv.require("max_len")?,
            dropout_rate: kv.require("dropout_rate")?,
            label_smoothing: kv.require("label_smoothing")?,
            share_embeddings: kv.require("share_embeddings")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint(self.to_kv().render().as_bytes())
    }
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:?}")
}
