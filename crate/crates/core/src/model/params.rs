use std::collections::BTreeMap;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    Xavier,
    Zeros,
    Ones,
}

/// Named parameter tensors for the encoder, the shared decoder, the estimator
/// and the embeddings, plus the fixed sinusoidal position table.
///
/// Both decoder streams resolve the same `dec.*` names: there is exactly one
/// copy of every decoder weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    config: ModelConfig,
    tensors: BTreeMap<String, Tensor>,
    positions: Tensor,
}

pub const EMBED_SHARED: &str = "embed.shared";
pub const EMBED_SRC: &str = "embed.src";
pub const EMBED_TGT: &str = "embed.tgt";
pub const PROJ_SRC: &str = "proj.src";
pub const PROJ_TGT: &str = "proj.tgt";

fn attention_block(out: &mut Vec<(String, Vec<usize>, Init)>, prefix: &str, d: usize) {
    for w in ["q", "k", "v", "o"] {
        out.push((format!("{prefix}.w{w}"), vec![d, d], Init::Xavier));
        out.push((format!("{prefix}.b{w}"), vec![d], Init::Zeros));
    }
}

fn norm(out: &mut Vec<(String, Vec<usize>, Init)>, prefix: &str, d: usize) {
    out.push((format!("{prefix}.gain"), vec![d], Init::Ones));
    out.push((format!("{prefix}.bias"), vec![d], Init::Zeros));
}

fn ffn(out: &mut Vec<(String, Vec<usize>, Init)>, prefix: &str, d: usize, f: usize) {
    out.push((format!("{prefix}.w1"), vec![d, f], Init::Xavier));
    out.push((format!("{prefix}.b1"), vec![f], Init::Zeros));
    out.push((format!("{prefix}.w2"), vec![f, d], Init::Xavier));
    out.push((format!("{prefix}.b2"), vec![d], Init::Zeros));
}

fn decoder_like(out: &mut Vec<(String, Vec<usize>, Init)>, stack: &str, layers: usize, d: usize, f: usize) {
    for i in 0..layers {
        let p = format!("{stack}.layer{i}");
        norm(out, &format!("{p}.ln_self"), d);
        attention_block(out, &format!("{p}.self_attn"), d);
        norm(out, &format!("{p}.ln_cross"), d);
        attention_block(out, &format!("{p}.cross_attn"), d);
        norm(out, &format!("{p}.ln_ffn"), d);
        ffn(out, &format!("{p}.ffn"), d, f);
    }
    norm(out, &format!("{stack}.ln_out"), d);
}

fn layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let (d, f) = (cfg.model_dim, cfg.ffn_dim);
    let mut out = Vec::new();
    if cfg.share_embeddings {
        out.push((EMBED_SHARED.to_string(), vec![cfg.src_vocab_size, d], Init::Xavier));
    } else {
        out.push((EMBED_SRC.to_string(), vec![cfg.src_vocab_size, d], Init::Xavier));
        out.push((EMBED_TGT.to_string(), vec![cfg.tgt_vocab_size, d], Init::Xavier));
        out.push((PROJ_SRC.to_string(), vec![d, cfg.src_vocab_size], Init::Xavier));
        out.push((PROJ_TGT.to_string(), vec![d, cfg.tgt_vocab_size], Init::Xavier));
    }
    for i in 0..cfg.layers_enc {
        let p = format!("enc.layer{i}");
        norm(&mut out, &format!("{p}.ln_self"), d);
        attention_block(&mut out, &format!("{p}.self_attn"), d);
        norm(&mut out, &format!("{p}.ln_ffn"), d);
        ffn(&mut out, &format!("{p}.ffn"), d, f);
    }
    norm(&mut out, "enc.ln_out", d);
    decoder_like(&mut out, "dec", cfg.layers_dec, d, f);
    decoder_like(&mut out, "est", cfg.layers_est, d, f);
    out
}

/// Sinusoidal position table of shape `max_len x d`.
pub fn sinusoidal_positions(max_len: usize, d: usize) -> Tensor {
    let mut data = vec![0.0; max_len * d];
    let half = d / 2;
    for pos in 0..max_len {
        for i in 0..half {
            let rate = (-(10_000f64.ln()) * i as f64 / half.max(1) as f64).exp();
            data[pos * d + i] = (pos as f64 * rate).sin();
            data[pos * d + half + i] = (pos as f64 * rate).cos();
        }
    }
    Tensor::from_parts_unchecked(vec![max_len, d], data)
}

/// Xavier-uniform weights, zero biases and norm offsets, unit norm gains.
pub fn init_parameters(config: &ModelConfig, seed: u64) -> Result<ParameterStore> {
    config.validate()?;
    let mut rng = Rng::new(seed);
    let mut tensors = BTreeMap::new();
    for (name, shape, init) in layout(config) {
        let n: usize = shape.iter().product();
        let data = match init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Xavier => {
                let bound = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                (0..n).map(|_| (rng.uniform() * 2.0 - 1.0) * bound).collect()
            }
        };
        tensors.insert(name, Tensor::from_parts_unchecked(shape, data));
    }
    Ok(ParameterStore {
        positions: sinusoidal_positions(config.max_len, config.model_dim),
        config: config.clone(),
        tensors,
    })
}

impl ParameterStore {
    /// Builds a store from explicit tensors, checking names and shapes against
    /// the layout implied by `config`.
    pub fn from_tensors(config: &ModelConfig, tensors: BTreeMap<String, Tensor>) -> Result<Self> {
        config.validate()?;
        let expected = layout(config);
        if expected.len() != tensors.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for (name, shape, _) in &expected {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Dimension {
                    op: "parameter shape",
                    lhs: shape.clone(),
                    rhs: t.shape().to_vec(),
                });
            }
        }
        Ok(Self {
            positions: sinusoidal_positions(config.max_len, config.model_dim),
            config: config.clone(),
            tensors,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn positions(&self) -> &Tensor {
        &self.positions
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub(crate) fn entry(&self, name: &str) -> Result<(&String, &Tensor)> {
        self.tensors
            .get_key_value(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub(crate) fn src_embedding_name(&self) -> &'static str {
        if self.config.share_embeddings {
            EMBED_SHARED
        } else {
            EMBED_SRC
        }
    }

    pub(crate) fn tgt_embedding_name(&self) -> &'static str {
        if self.config.share_embeddings {
            EMBED_SHARED
        } else {
            EMBED_TGT
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            layers_enc: 1,
            layers_dec: 1,
            layers_est: 1,
            model_dim: 4,
            heads: 2,
            ffn_dim: 8,
            src_vocab_size: 10,
            tgt_vocab_size: 10,
            max_len: 8,
            dropout_rate: 0.0,
            label_smoothing: 0.1,
            share_embeddings: false,
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = init_parameters(&tiny(), 7).unwrap();
        let b = init_parameters(&tiny(), 7).unwrap();
        let c = init_parameters(&tiny(), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn manual_parameter_census() {
        // d=4, ffn=8, V=10 for both sides, one layer per stack.
        let attn = 4 * (4 * 4 + 4); // 80
        let ffn = 4 * 8 + 8 + 8 * 4 + 4; // 76
        let ln = 2 * 4; // 8
        let encoder = attn + ffn + 2 * ln + ln; // 180
        let decoder = 2 * attn + ffn + 3 * ln + ln; // 268
        let estimator = decoder; // 268
        let embeddings = 10 * 4 + 10 * 4; // 80
        let projections = 4 * 10 + 4 * 10; // 80
        let hand = encoder + decoder + estimator + embeddings + projections;
        assert_eq!(hand, 876);
        let store = init_parameters(&tiny(), 0).unwrap();
        assert_eq!(store.parameter_count(), hand);
        assert_eq!(tiny().parameter_count(), hand);
    }

    #[test]
    fn shapes_and_init_values() {
        let cfg = tiny();
        let store = init_parameters(&cfg, 1).unwrap();
        assert_eq!(store.get("dec.layer0.self_attn.wq").unwrap().shape(), &[4, 4]);
        assert_eq!(store.get("enc.layer0.ffn.w1").unwrap().shape(), &[4, 8]);
        assert_eq!(store.get(PROJ_TGT).unwrap().shape(), &[4, 10]);
        assert!(store.get("dec.ln_out.gain").unwrap().data().iter().all(|&v| v == 1.0));
        assert!(store.get("est.layer0.ffn.b2").unwrap().data().iter().all(|&v| v == 0.0));
        let bound = (6.0f64 / 8.0).sqrt();
        assert!(store.get("enc.layer0.self_attn.wv").unwrap().data().iter().all(|v| v.abs() <= bound));
        assert_eq!(store.positions().shape(), &[8, 4]);
    }

    #[test]
    fn shared_embeddings_layout() {
        let mut cfg = tiny();
        cfg.share_embeddings = true;
        let store = init_parameters(&cfg, 0).unwrap();
        assert!(store.get(EMBED_SHARED).is_some());
        assert!(store.get(PROJ_SRC).is_none());
        assert_eq!(store.parameter_count(), cfg.parameter_count());
    }

    #[test]
    fn no_stream_specific_decoder_copies() {
        let store = init_parameters(&tiny(), 0).unwrap();
        for name in store.names().filter(|n| n.starts_with("dec.")) {
            assert!(!name.contains("recon") && !name.contains("transl"), "{name}");
        }
    }

    #[test]
    fn from_tensors_validates() {
        let store = init_parameters(&tiny(), 0).unwrap();
        let mut t = store.tensors().clone();
        assert!(ParameterStore::from_tensors(&tiny(), t.clone()).is_ok());
        t.insert("enc.ln_out.gain".into(), Tensor::zeros(&[5]));
        assert!(ParameterStore::from_tensors(&tiny(), t).is_err());
    }
}
