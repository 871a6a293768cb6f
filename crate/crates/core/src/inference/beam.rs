use std::cmp::Ordering;

use crate::data::{BOS_ID, EOS_ID, PAD_ID};
use crate::error::{Error, Result};
use crate::model::{decode_translation, encode, ParameterStore, TokenBatch};
use crate::numerics::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    pub beam_size: usize,
    pub length_penalty: f64,
    /// Longest decoder sequence, `BOS y EOS` included.
    pub max_len: usize,
}

impl BeamConfig {
    pub fn new(beam_size: usize, length_penalty: f64, max_len: usize) -> Self {
        Self { beam_size, length_penalty, max_len }
    }

    pub fn validate(&self, model_max_len: usize) -> Result<()> {
        if self.beam_size < 1 {
            return Err(Error::invalid("beam size must be at least 1"));
        }
        if self.length_penalty < 0.0 || !self.length_penalty.is_finite() {
            return Err(Error::invalid("length penalty must be finite and non-negative"));
        }
        if self.max_len < 3 || self.max_len > model_max_len {
            return Err(Error::invalid(format!(
                "beam max_len {} outside [3, {model_max_len}]",
                self.max_len
            )));
        }
        Ok(())
    }
}

/// `((5 + len) / 6)^alpha`.
pub fn length_penalty(len: usize, alpha: f64) -> f64 {
    ((5.0 + len as f64) / 6.0).powf(alpha)
}

/// A finished hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Content ids, without BOS or EOS.
    pub tokens: Vec<usize>,
    /// Summed log-probability, EOS included.
    pub log_prob: f64,
    /// `log_prob / length_penalty(tokens.len() + 1)`.
    pub score: f64,
    /// Decoding step at which EOS was chosen.
    pub finished_at: usize,
}

fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.finished_at.cmp(&b.finished_at))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search over an arbitrary next-token scorer.
///
/// `next_log_probs` receives the live content prefixes (all of equal length)
/// and returns one log-probability row per prefix. Candidates are ranked by
/// summed log-probability; a candidate ending in EOS leaves the beam, which
/// shrinks accordingly. Hypotheses hold at least one content token, and EOS
/// is forced once a prefix reaches `max_content`.
/// Finished hypotheses are ranked by length-penalized score, then earlier
/// completion, then lexicographic ids.
pub fn beam_search_with<F>(mut next_log_probs: F, beam_size: usize, alpha: f64, max_content: usize) -> Result<Vec<Hypothesis>>
where
    F: FnMut(&[Vec<usize>]) -> Result<Vec<Vec<f64>>>,
{
    if beam_size < 1 || max_content < 1 {
        return Err(Error::invalid("beam size and content length must be at least 1"));
    }
    let mut live: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 0.0)];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut step = 0;
    while !live.is_empty() {
        let prefixes: Vec<Vec<usize>> = live.iter().map(|(t, _)| t.clone()).collect();
        let rows = next_log_probs(&prefixes)?;
        let forced = step >= max_content;
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (h, row) in rows.iter().enumerate() {
            let base = live[h].1;
            if forced {
                candidates.push((base + row[EOS_ID], h, EOS_ID));
                continue;
            }
            for (v, &lp) in row.iter().enumerate() {
                let empty_eos = v == EOS_ID && step == 0;
                if v != PAD_ID && v != BOS_ID && !empty_eos && lp > f64::NEG_INFINITY {
                    candidates.push((base + lp, h, v));
                }
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        candidates.truncate(beam_size - finished.len());
        let mut next = Vec::new();
        for (lp, h, v) in candidates {
            let tokens = &live[h].0;
            if v == EOS_ID {
                finished.push(Hypothesis {
                    tokens: tokens.clone(),
                    log_prob: lp,
                    score: lp / length_penalty(tokens.len() + 1, alpha),
                    finished_at: step,
                });
            } else {
                let mut t = tokens.clone();
                t.push(v);
                next.push((t, lp));
            }
        }
        live = next;
        step += 1;
    }
    finished.sort_by(rank);
    Ok(finished)
}

fn repeat_rows(t: &Tensor, block: usize, times: usize) -> Tensor {
    let cols = t.shape()[1];
    let mut data = Vec::with_capacity(t.numel() * times);
    for _ in 0..times {
        data.extend_from_slice(&t.data()[..block * cols]);
    }
    Tensor::new(vec![block * times, cols], data).expect("consistent shape")
}

/// Ranked hypotheses for one source sentence (content ids).
pub fn beam_search(params: &ParameterStore, src: &[usize], cfg: &BeamConfig) -> Result<Vec<Hypothesis>> {
    if src.is_empty() {
        return Err(Error::Empty("source sentence"));
    }
    cfg.validate(params.config().max_len)?;
    let mut wrapped = vec![BOS_ID];
    wrapped.extend_from_slice(src);
    wrapped.push(EOS_ID);
    let src_batch = TokenBatch::single(&wrapped)?;
    let c_x = encode(params, &src_batch)?;
    let vocab = params.config().tgt_vocab_size;
    beam_search_with(
        |prefixes| {
            let rows = prefixes.len();
            let seqs: Vec<Vec<usize>> = prefixes
                .iter()
                .map(|p| std::iter::once(BOS_ID).chain(p.iter().copied()).collect())
                .collect();
            let len = seqs[0].len();
            let tgt_in = TokenBatch::from_sequences(&seqs)?;
            let logits = decode_translation(
                params,
                &tgt_in,
                &repeat_rows(&c_x, src_batch.len, rows),
                &src_batch.repeat_rows(rows),
            )?;
            let mut out = Vec::with_capacity(rows);
            for r in 0..rows {
                let last = Tensor::new(vec![1, vocab], logits.row(r * len + len - 1).to_vec())?;
                out.push(last.log_softmax(1)?.into_data());
            }
            Ok(out)
        },
        cfg.beam_size,
        cfg.length_penalty,
        cfg.max_len - 2,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Next-token table over ids {EOS, 4, 5}: a first step that favours 4,
    /// after which 4 leads to an even split while 5 leads to a confident EOS.
    fn table(prefix: &[usize]) -> Vec<f64> {
        let mut row = vec![f64::NEG_INFINITY; 6];
        let set = |row: &mut Vec<f64>, probs: [f64; 3]| {
            row[EOS_ID] = probs[0].ln();
            row[4] = probs[1].ln();
            row[5] = probs[2].ln();
        };
        match prefix {
            [] => set(&mut row, [0.05, 0.55, 0.40]),
            [4] => set(&mut row, [0.34, 0.33, 0.33]),
            [5] => set(&mut row, [0.9, 0.05, 0.05]),
            _ => set(&mut row, [0.6, 0.2, 0.2]),
        }
        row
    }

    fn run(beam: usize, alpha: f64, max_content: usize) -> Vec<Hypothesis> {
        beam_search_with(|ps| Ok(ps.iter().map(|p| table(p)).collect()), beam, alpha, max_content).unwrap()
    }

    fn enumerate(max_content: usize, alpha: f64) -> Hypothesis {
        let mut best: Option<Hypothesis> = None;
        let mut stack: Vec<(Vec<usize>, f64)> = vec![(vec![], 0.0)];
        while let Some((prefix, lp)) = stack.pop() {
            let row = table(&prefix);
            let done = lp + row[EOS_ID];
            let h = Hypothesis {
                tokens: prefix.clone(),
                log_prob: done,
                score: done / length_penalty(prefix.len() + 1, alpha),
                finished_at: prefix.len(),
            };
            if !prefix.is_empty() && best.as_ref().is_none_or(|b| h.score > b.score) {
                best = Some(h);
            }
            if prefix.len() < max_content {
                for v in [4, 5] {
                    let mut p = prefix.clone();
                    p.push(v);
                    stack.push((p, lp + row[v]));
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn greedy_misses_what_beam_two_finds() {
        let greedy = run(1, 0.0, 2);
        assert_eq!(greedy.len(), 1);
        assert_eq!(greedy[0].tokens[0], 4);
        let beam = run(2, 0.0, 2);
        let oracle = enumerate(2, 0.0);
        assert_eq!(beam[0].tokens, oracle.tokens);
        assert_eq!(beam[0].tokens, vec![5]);
        assert!((beam[0].score - (0.4f64 * 0.9).ln()).abs() < 1e-12);
    }

    #[test]
    fn beam_one_is_stepwise_argmax() {
        let h = &run(1, 0.6, 4)[0];
        let mut prefix = vec![];
        loop {
            let row = table(&prefix);
            let (arg, _) = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))).unwrap();
            if arg == EOS_ID || prefix.len() == 4 {
                break;
            }
            prefix.push(arg);
        }
        assert_eq!(h.tokens, prefix);
    }

    #[test]
    fn zero_alpha_ranks_by_log_probability() {
        for h in run(3, 0.0, 3) {
            assert_eq!(h.score, h.log_prob);
        }
        let ranked = run(3, 0.0, 3);
        assert!(ranked.windows(2).all(|w| w[0].log_prob >= w[1].log_prob));
    }

    #[test]
    fn eos_forced_at_length_limit() {
        let always_more = |ps: &[Vec<usize>]| -> Result<Vec<Vec<f64>>> {
            Ok(ps.iter().map(|_| vec![f64::NEG_INFINITY, f64::NEG_INFINITY, -20.0, -0.01, -5.0]).collect())
        };
        let out = beam_search_with(always_more, 2, 0.6, 3).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|h| h.tokens.len() <= 3));
        assert_eq!(out[0].tokens, vec![3, 3, 3]);
    }

    #[test]
    fn length_penalty_values() {
        assert_eq!(length_penalty(1, 0.6), 1.0);
        assert!((length_penalty(7, 1.0) - 2.0).abs() < 1e-15);
        assert_eq!(length_penalty(30, 0.0), 1.0);
    }
}
