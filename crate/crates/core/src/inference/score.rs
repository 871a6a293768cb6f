use super::beam::{beam_search, BeamConfig};
use crate::data::PAD_ID;
use crate::error::{Error, Result};
use crate::eval::sentence_bleu;
use crate::model::{Forward, PairBatch, ParameterStore};
use crate::numerics::{Rng, Tape, Tensor};

/// A translation with its length-penalized model score and self-estimated quality.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTranslation {
    pub hypothesis: Vec<usize>,
    pub model_score: f64,
    pub quality: f64,
}

/// Intermediate values of one quality computation.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityTrace {
    /// Reconstruction-stream states for `BOS y EOS`.
    pub c_y: Tensor,
    /// Natural-log probability of each of `x EOS` under the estimator.
    pub token_log_probs: Vec<f64>,
    pub quality: f64,
}

fn check_pairs(pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Empty("scoring batch"));
    }
    if pairs.iter().any(|(s, h)| s.is_empty() || h.is_empty()) {
        return Err(Error::Empty("source or hypothesis"));
    }
    Ok(())
}

/// Per-row log-probabilities of non-pad `targets` under `logits`.
fn row_log_probs(logits: &Tensor, targets: &[usize], rows: usize) -> Result<Vec<Vec<f64>>> {
    let lsm = logits.log_softmax(1)?;
    let len = targets.len() / rows;
    Ok((0..rows)
        .map(|r| {
            (0..len)
                .filter(|&t| targets[r * len + t] != PAD_ID)
                .map(|t| lsm.at(r * len + t, targets[r * len + t]))
                .collect()
        })
        .collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Estimator token log-probabilities of each source given its hypothesis,
/// with the reconstruction states of the whole batch.
fn estimator_log_probs(params: &ParameterStore, batch: &PairBatch) -> Result<(Tensor, Vec<Vec<f64>>)> {
    let mut tape = Tape::new();
    let mut f = Forward::new(&mut tape, params);
    let c_y = f.decode_reconstruction(&batch.tgt_full)?;
    let logits = f.estimate(&batch.src_in, c_y, &batch.tgt_full)?;
    let c_y = tape.tensor(c_y);
    let lp = row_log_probs(&tape.tensor(logits), &batch.src_out, batch.rows())?;
    Ok((c_y, lp))
}

fn translation_log_probs(params: &ParameterStore, batch: &PairBatch, dropout: Option<(f64, Rng)>) -> Result<Vec<Vec<f64>>> {
    let mut tape = Tape::new();
    let mut f = Forward::new(&mut tape, params);
    if let Some((rate, rng)) = dropout {
        f = f.with_dropout(rate, rng);
    }
    let c_x = f.encode(&batch.src)?;
    let logits = f.decode_translation(&batch.tgt_in, c_x, &batch.src)?;
    row_log_probs(&tape.tensor(logits), &batch.tgt_out, batch.rows())
}

/// Self-estimated quality `Q` of `hyp` as a translation of `src` (content ids).
pub fn quality_score(params: &ParameterStore, src: &[usize], hyp: &[usize]) -> Result<f64> {
    Ok(quality_trace(params, src, hyp)?.quality)
}

pub fn quality_trace(params: &ParameterStore, src: &[usize], hyp: &[usize]) -> Result<QualityTrace> {
    let pairs = [(src.to_vec(), hyp.to_vec())];
    check_pairs(&pairs)?;
    let batch = PairBatch::from_pairs(&pairs)?;
    let (c_y, mut lp) = estimator_log_probs(params, &batch)?;
    let token_log_probs = lp.remove(0);
    Ok(QualityTrace { c_y, quality: mean(&token_log_probs), token_log_probs })
}

/// `Q` for many `(source, hypothesis)` pairs scored as one padded batch.
pub fn quality_scores(params: &ParameterStore, pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<Vec<f64>> {
    check_pairs(pairs)?;
    let batch = PairBatch::from_pairs(pairs)?;
    let (_, lp) = estimator_log_probs(params, &batch)?;
    Ok(lp.iter().map(|r| mean(r)).collect())
}

/// Length-normalized log-probability of `hyp EOS` given `src` on the translation stream.
pub fn tp_score(params: &ParameterStore, src: &[usize], hyp: &[usize]) -> Result<f64> {
    Ok(tp_scores(params, &[(src.to_vec(), hyp.to_vec())])?[0])
}

pub fn tp_scores(params: &ParameterStore, pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<Vec<f64>> {
    check_pairs(pairs)?;
    let batch = PairBatch::from_pairs(pairs)?;
    Ok(translation_log_probs(params, &batch, None)?.iter().map(|r| mean(r)).collect())
}

/// Mean TP over `k` passes with dropout at `rate`; pass `j` of item `item_id`
/// draws its masks from sub-stream `(seed, item_id, j)`.
pub fn dtp_score(
    params: &ParameterStore,
    src: &[usize],
    hyp: &[usize],
    k: usize,
    rate: f64,
    seed: u64,
    item_id: u64,
) -> Result<f64> {
    if k < 1 {
        return Err(Error::invalid("D-TP needs at least one pass"));
    }
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
    }
    let pairs = [(src.to_vec(), hyp.to_vec())];
    check_pairs(&pairs)?;
    let batch = PairBatch::from_pairs(&pairs)?;
    let item = Rng::new(seed).substream(item_id);
    let passes = (0..k)
        .map(|pass| Ok(mean(&translation_log_probs(params, &batch, Some((rate, item.substream(pass as u64))))?[0])))
        .collect::<Result<Vec<f64>>>()?;
    // offsets from the first pass keep the mean exact when all passes agree
    let first = passes[0];
    Ok(first + passes.iter().map(|v| v - first).sum::<f64>() / k as f64)
}

/// Sentence BLEU between `src` and the backward model's beam translation of `hyp`.
pub fn rtt_sentbleu(backward: &ParameterStore, src: &[usize], hyp: &[usize], cfg: &BeamConfig) -> Result<f64> {
    if src.is_empty() {
        return Err(Error::Empty("source sentence"));
    }
    let best = beam_search(backward, hyp, cfg)?;
    Ok(sentence_bleu(&best[0].tokens, src))
}

/// Top beam hypothesis and its quality, scored on the generated translation.
pub fn translate_and_score(params: &ParameterStore, src: &[usize], cfg: &BeamConfig) -> Result<ScoredTranslation> {
    let best = beam_search(params, src, cfg)?.remove(0);
    let quality = quality_score(params, src, &best.tokens)?;
    Ok(ScoredTranslation { hypothesis: best.tokens, model_score: best.score, quality })
}
