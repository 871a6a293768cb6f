//! Beam-search translation, self-estimated quality by forced decoding, and the
//! unsupervised comparator scores (TP, D-TP, round-trip BLEU).

mod beam;
mod io;
mod score;

pub use beam::{beam_search, beam_search_with, length_penalty, BeamConfig, Hypothesis};
pub use io::{read_score_tsv, write_score_tsv, ScoreRow};
pub use score::{
    dtp_score, quality_score, quality_scores, quality_trace, rtt_sentbleu, tp_score, tp_scores,
    translate_and_score, QualityTrace, ScoredTranslation,
};

#[cfg(test)]
mod tests;
