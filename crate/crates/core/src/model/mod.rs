//! The competency-aware architecture: encoder, a two-stream decoder whose
//! streams share one set of weights, and a self-estimator that reconstructs the
//! source from the reconstruction stream's states.

mod batch;
mod config;
mod forward;
mod mask;
mod params;

pub use batch::PairBatch;
pub use config::ModelConfig;
pub(crate) use config::format_f64;
pub use forward::Forward;
pub use mask::{AttentionMask, MaskKind, TokenBatch};
pub use params::{
    init_parameters, sinusoidal_positions, ParameterStore, EMBED_SHARED, EMBED_SRC, EMBED_TGT,
    PROJ_SRC, PROJ_TGT,
};

use crate::error::Result;
use crate::numerics::{Rng, Tape, Tensor};

/// `C_X` for a (possibly padded) batch of `BOS x EOS` sequences.
pub fn encode(params: &ParameterStore, src: &TokenBatch) -> Result<Tensor> {
    let mut tape = Tape::new();
    let mut f = Forward::new(&mut tape, params);
    let out = f.encode(src)?;
    Ok(tape.tensor(out))
}

/// Translation-stream logits, `(rows·len) x V_tgt`.
pub fn decode_translation(
    params: &ParameterStore,
    tgt_in: &TokenBatch,
    c_x: &Tensor,
    src: &TokenBatch,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let mem = tape.borrowed(c_x, false);
    let mut f = Forward::new(&mut tape, params);
    let out = f.decode_translation(tgt_in, mem, src)?;
    Ok(tape.tensor(out))
}

/// Reconstruction-stream states `C_Y`, `(rows·len) x d`.
pub fn decode_reconstruction(params: &ParameterStore, tgt: &TokenBatch) -> Result<Tensor> {
    let mut tape = Tape::new();
    let mut f = Forward::new(&mut tape, params);
    let out = f.decode_reconstruction(tgt)?;
    Ok(tape.tensor(out))
}

/// Estimator logits, `(rows·len) x V_src`.
pub fn estimate(
    params: &ParameterStore,
    src_in: &TokenBatch,
    c_y: &Tensor,
    tgt: &TokenBatch,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let mem = tape.borrowed(c_y, false);
    let mut f = Forward::new(&mut tape, params);
    let out = f.estimate(src_in, mem, tgt)?;
    Ok(tape.tensor(out))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLoss {
    pub forward: f64,
    pub reconstruction: f64,
}

impl JointLoss {
    pub fn total(&self) -> f64 {
        self.forward + self.reconstruction
    }
}

/// Teacher-forced forward and reconstruction losses on one batch.
///
/// With `dropout` set, masks are drawn from `rng` at the configured rate.
pub fn joint_forward(
    params: &ParameterStore,
    batch: &PairBatch,
    epsilon: f64,
    dropout: bool,
    rng: &Rng,
) -> Result<JointLoss> {
    let mut tape = Tape::new();
    let mut f = Forward::new(&mut tape, params);
    if dropout {
        f = f.with_dropout(params.config().dropout_rate, rng.clone());
    }
    let fwd = f.translation_loss(batch, epsilon)?;
    let rec = f.reconstruction_loss(batch, epsilon)?;
    Ok(JointLoss { forward: tape.value(fwd)[0], reconstruction: tape.value(rec)[0] })
}
