//! Correlation, BLEU, binning, sampling and score-combination utilities.

mod bins;
mod bleu;
mod edit;
mod report;
mod sampling;
mod stats;

pub use bins::{bin_report, bin_sizes, oracle_nondecreasing, Bin};
pub use bleu::{corpus_bleu, sentence_bleu, BleuStats};
pub use edit::edit_distance;
pub use report::{DriftRow, EvaluationReport, MethodReport};
pub use sampling::{level_weights, levels_from_oracle, quality_biased_sample, LEVELS};
pub use stats::{average_ranks, pearson, pearson_series, spearman, spearman_series, znorm_combine, ScoreSeries};
