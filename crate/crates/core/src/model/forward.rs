//! Transformer blocks recorded on a [`Tape`]. Pre-norm residual layers, ReLU
//! feed-forward, sinusoidal positions.

use std::collections::BTreeMap;

use super::batch::PairBatch;
use super::mask::{AttentionMask, TokenBatch};
use super::params::{ParameterStore, PROJ_SRC, PROJ_TGT};
use crate::data::PAD_ID;
use crate::error::{Error, Result};
use crate::numerics::{AttentionGeometry, Rng, Tape, Tensor, Var};

const LN_EPS: f64 = 1e-5;

/// Builder for one forward pass over a parameter store.
///
/// Parameters are bound to the tape on first use; [`Forward::bound`] exposes
/// which names a computation actually touched.
pub struct Forward<'t, 'a> {
    tape: &'t mut Tape<'a>,
    params: &'a ParameterStore,
    bound: BTreeMap<&'a str, Var>,
    trainable: bool,
    dropout: Option<(f64, Rng)>,
}

impl<'t, 'a> Forward<'t, 'a> {
    pub fn new(tape: &'t mut Tape<'a>, params: &'a ParameterStore) -> Self {
        Self { tape, params, bound: BTreeMap::new(), trainable: false, dropout: None }
    }

    /// Bind parameters as gradient-requiring leaves.
    pub fn trainable(mut self) -> Self {
        self.trainable = true;
        self
    }

    /// Enable inverted dropout at `rate`, drawing masks from `rng`.
    pub fn with_dropout(mut self, rate: f64, rng: Rng) -> Self {
        if rate > 0.0 {
            self.dropout = Some((rate, rng));
        }
        self
    }

    pub fn tape(&mut self) -> &mut Tape<'a> {
        self.tape
    }

    pub fn tape_ref(&self) -> &Tape<'a> {
        self.tape
    }

    pub fn params(&self) -> &'a ParameterStore {
        self.params
    }

    pub fn bound(&self) -> &BTreeMap<&'a str, Var> {
        &self.bound
    }

    fn p(&mut self, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let (key, tensor) = self.params.entry(name)?;
        let v = self.tape.borrowed(tensor, self.trainable);
        self.bound.insert(key.as_str(), v);
        Ok(v)
    }

    fn drop(&mut self, x: Var) -> Result<Var> {
        match &mut self.dropout {
            Some((rate, rng)) => self.tape.dropout(x, *rate, rng, true),
            None => Ok(x),
        }
    }

    fn embed(&mut self, table: &str, batch: &TokenBatch) -> Result<Var> {
        let cfg = self.params.config();
        if batch.len > cfg.max_len {
            return Err(Error::TooLong { len: batch.len, max: cfg.max_len });
        }
        let d = cfg.model_dim;
        let t = self.p(table)?;
        let e = self.tape.gather_rows(t, &batch.ids)?;
        let e = self.tape.scale(e, (d as f64).sqrt())?;
        let table = self.params.positions().data();
        let mut pos = Vec::with_capacity(batch.ids.len() * d);
        for _ in 0..batch.rows {
            pos.extend_from_slice(&table[..batch.len * d]);
        }
        let pos = self.tape.constant(Tensor::from_parts_unchecked(vec![batch.ids.len(), d], pos));
        let x = self.tape.add(e, pos)?;
        self.drop(x)
    }

    fn linear(&mut self, x: Var, w: &str, b: &str) -> Result<Var> {
        let w = self.p(w)?;
        let b = self.p(b)?;
        let y = self.tape.matmul(x, w)?;
        self.tape.add_row(y, b)
    }

    fn norm(&mut self, prefix: &str, x: Var) -> Result<Var> {
        let g = self.p(&format!("{prefix}.gain"))?;
        let b = self.p(&format!("{prefix}.bias"))?;
        self.tape.layer_norm(x, g, b, LN_EPS)
    }

    fn mha(&mut self, prefix: &str, xq: Var, xkv: Var, geometry: AttentionGeometry) -> Result<Var> {
        let q = self.linear(xq, &format!("{prefix}.wq"), &format!("{prefix}.bq"))?;
        let k = self.linear(xkv, &format!("{prefix}.wk"), &format!("{prefix}.bk"))?;
        let v = self.linear(xkv, &format!("{prefix}.wv"), &format!("{prefix}.bv"))?;
        let a = self.tape.attention(q, k, v, geometry)?;
        self.linear(a, &format!("{prefix}.wo"), &format!("{prefix}.bo"))
    }

    fn ffn(&mut self, prefix: &str, x: Var) -> Result<Var> {
        let h = self.linear(x, &format!("{prefix}.w1"), &format!("{prefix}.b1"))?;
        let h = self.tape.relu(h);
        self.linear(h, &format!("{prefix}.w2"), &format!("{prefix}.b2"))
    }

    fn residual(&mut self, x: Var, sub: Var) -> Result<Var> {
        let sub = self.drop(sub)?;
        self.tape.add(x, sub)
    }

    /// `C_X`: encoder states, `(rows·len) x d`.
    pub fn encode(&mut self, src: &TokenBatch) -> Result<Var> {
        let heads = self.params.config().heads;
        let mut x = self.embed(self.params.src_embedding_name(), src)?;
        let mask = AttentionMask::full(src);
        for i in 0..self.params.config().layers_enc {
            let p = format!("enc.layer{i}");
            let h = self.norm(&format!("{p}.ln_self"), x)?;
            let a = self.mha(&format!("{p}.self_attn"), h, h, mask.geometry(src.len, heads))?;
            x = self.residual(x, a)?;
            let h = self.norm(&format!("{p}.ln_ffn"), x)?;
            let f = self.ffn(&format!("{p}.ffn"), h)?;
            x = self.residual(x, f)?;
        }
        self.norm("enc.ln_out", x)
    }

    /// Decoder-shaped stack (`dec` or `est`). With `cross = None` the
    /// cross-attention sub-layer is skipped entirely.
    fn decoder_stack(
        &mut self,
        stack: &str,
        layers: usize,
        mut x: Var,
        q_len: usize,
        self_mask: &AttentionMask,
        cross: Option<(Var, &AttentionMask)>,
    ) -> Result<Var> {
        let heads = self.params.config().heads;
        for i in 0..layers {
            let p = format!("{stack}.layer{i}");
            let h = self.norm(&format!("{p}.ln_self"), x)?;
            let a = self.mha(&format!("{p}.self_attn"), h, h, self_mask.geometry(q_len, heads))?;
            x = self.residual(x, a)?;
            if let Some((memory, mask)) = cross {
                let h = self.norm(&format!("{p}.ln_cross"), x)?;
                let c = self.mha(&format!("{p}.cross_attn"), h, memory, mask.geometry(q_len, heads))?;
                x = self.residual(x, c)?;
            }
            let h = self.norm(&format!("{p}.ln_ffn"), x)?;
            let f = self.ffn(&format!("{p}.ffn"), h)?;
            x = self.residual(x, f)?;
        }
        self.norm(&format!("{stack}.ln_out"), x)
    }

    fn project(&mut self, h: Var, proj: &str) -> Result<Var> {
        if self.params.config().share_embeddings {
            let e = self.p(self.params.src_embedding_name())?;
            self.tape.matmul_bt(h, e)
        } else {
            let w = self.p(proj)?;
            self.tape.matmul(h, w)
        }
    }

    fn check_memory(&self, memory: Var, keys: &TokenBatch, what: &'static str) -> Result<()> {
        let d = self.params.config().model_dim;
        if self.tape.shape(memory) != [keys.rows * keys.len, d] {
            return Err(Error::Dimension {
                op: what,
                lhs: self.tape.shape(memory).to_vec(),
                rhs: vec![keys.rows * keys.len, d],
            });
        }
        Ok(())
    }

    /// Translation stream: causal self-attention, cross-attention to `C_X`,
    /// projection to target-vocabulary logits.
    pub fn decode_translation(&mut self, tgt_in: &TokenBatch, c_x: Var, src: &TokenBatch) -> Result<Var> {
        if tgt_in.rows != src.rows {
            return Err(Error::invalid("translation stream: row count differs from source"));
        }
        self.check_memory(c_x, src, "cross-attention memory (C_X)")?;
        let x = self.embed(self.params.tgt_embedding_name(), tgt_in)?;
        let causal = AttentionMask::causal(tgt_in);
        let cross = AttentionMask::full(src);
        let layers = self.params.config().layers_dec;
        let h = self.decoder_stack("dec", layers, x, tgt_in.len, &causal, Some((c_x, &cross)))?;
        self.project(h, PROJ_TGT)
    }

    /// Reconstruction stream: same `dec.*` weights, full self-attention, no
    /// cross-attention. Returns `C_Y`. Takes no source-derived input.
    pub fn decode_reconstruction(&mut self, tgt: &TokenBatch) -> Result<Var> {
        let x = self.embed(self.params.tgt_embedding_name(), tgt)?;
        let full = AttentionMask::full(tgt);
        let layers = self.params.config().layers_dec;
        self.decoder_stack("dec", layers, x, tgt.len, &full, None)
    }

    /// Self-estimator: causal self-attention over the shifted source,
    /// cross-attention to `C_Y`, projection to source-vocabulary logits.
    pub fn estimate(&mut self, src_in: &TokenBatch, c_y: Var, tgt: &TokenBatch) -> Result<Var> {
        if src_in.rows != tgt.rows {
            return Err(Error::invalid("estimator: row count differs from target"));
        }
        self.check_memory(c_y, tgt, "cross-attention memory (C_Y)")?;
        let x = self.embed(self.params.src_embedding_name(), src_in)?;
        let causal = AttentionMask::causal(src_in);
        let cross = AttentionMask::full(tgt);
        let layers = self.params.config().layers_est;
        let h = self.decoder_stack("est", layers, x, src_in.len, &causal, Some((c_y, &cross)))?;
        self.project(h, PROJ_SRC)
    }

    /// Forward translation loss only.
    pub fn translation_loss(&mut self, batch: &PairBatch, epsilon: f64) -> Result<Var> {
        let c_x = self.encode(&batch.src)?;
        let logits = self.decode_translation(&batch.tgt_in, c_x, &batch.src)?;
        self.tape.label_smoothed_cross_entropy(logits, &batch.tgt_out, epsilon, PAD_ID)
    }

    /// Reconstruction loss only: estimator force-decodes the source from `C_Y`.
    pub fn reconstruction_loss(&mut self, batch: &PairBatch, epsilon: f64) -> Result<Var> {
        let c_y = self.decode_reconstruction(&batch.tgt_full)?;
        let logits = self.estimate(&batch.src_in, c_y, &batch.tgt_full)?;
        self.tape.label_smoothed_cross_entropy(logits, &batch.src_out, epsilon, PAD_ID)
    }
}
