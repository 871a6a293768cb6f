//! Correlate self-estimated quality with a known oracle on degraded references.
//!
//! Each test reference is corrupted with k random edits; the oracle is the
//! negative edit distance normalized by reference length. Q and plain
//! translation probability (TP) are compared against it, per method and by
//! quantile bins.

use canmt::data::{gen_synthetic, DegradedSet, TaskKind, TaskSpec, Vocabulary};
use canmt::eval::{EvaluationReport, ScoreSeries};
use canmt::inference::{quality_scores, tp_scores};
use canmt::model::ModelConfig;
use canmt::training::{train, TrainConfig};

fn main() -> canmt::Result<()> {
    let mut spec = TaskSpec::new(TaskKind::CipherReverse);
    spec.content_tokens = 20;
    spec.min_len = 3;
    spec.max_len = 8;
    let (corpus, task) = gen_synthetic(&spec, 4000, 7)?;
    let src_vocab = Vocabulary::from_content_tokens(task.source_alphabet())?;
    let tgt_vocab = Vocabulary::from_content_tokens(task.target_alphabet())?;
    let mut cfg = TrainConfig::desk(1);
    cfg.max_steps = 500;
    cfg.warmup_steps = 100;
    println!("training 500 steps on cipher-reverse...");
    let model = ModelConfig::desk(src_vocab.len(), tgt_vocab.len());
    let params = train(&corpus, &src_vocab, &tgt_vocab, &model, &cfg)?.averaged()?;

    let test = task.sample(200, 99)?;
    let pairs: Vec<_> = test.pairs().iter().map(|p| (p.source.clone(), p.target.clone())).collect();
    let ks: Vec<usize> = (0..=6).collect();
    let set = DegradedSet::build(&pairs, 200, &ks, tgt_vocab.content_tokens(), 13)?;
    let encoded: Vec<_> =
        set.items.iter().map(|d| (src_vocab.lookup(&d.src_tokens()), tgt_vocab.lookup(&d.hyp_tokens()))).collect();

    let ids: Vec<u64> = set.items.iter().map(|d| d.id).collect();
    let series = |name: &str, values: &[f64]| -> canmt::Result<ScoreSeries> {
        let mut s = ScoreSeries::new(name);
        for (id, v) in ids.iter().zip(values) {
            s.insert(*id, *v)?;
        }
        Ok(s)
    };
    let oracle: Vec<f64> = set.items.iter().map(|d| d.oracle_norm).collect();
    let methods =
        [series("canmt-q", &quality_scores(&params, &encoded)?)?, series("tp", &tp_scores(&params, &encoded)?)?];
    let report = EvaluationReport::build(&methods, &series("oracle", &oracle)?, 5, 10_000, 0)?;

    for m in report.methods.iter().chain(&report.combinations) {
        println!("{:<12} pearson {:>7.4}  spearman {:>7.4}", m.method, m.pearson.unwrap_or(f64::NAN), m.spearman.unwrap_or(f64::NAN));
        for b in &m.bins {
            println!("    bin of {:>3}: mean score {:>8.4}  mean oracle {:>7.4}", b.count, b.mean_pred, b.mean_oracle);
        }
    }
    println!("quality drift under biased test sets:");
    for row in &report.drift {
        println!("  target level {}: oracle {:.4}  {:?}", row.target_level, row.mean_oracle, row.mean_pred);
    }
    Ok(())
}
