//! Dropout-averaged translation probability (D-TP): mean TP over K stochastic
//! passes. At rate 0 it equals TP; more passes give a steadier estimate.

use canmt::data::{gen_synthetic, TaskKind, TaskSpec, Vocabulary};
use canmt::inference::{dtp_score, tp_score};
use canmt::model::ModelConfig;
use canmt::training::{train, TrainConfig};

fn main() -> canmt::Result<()> {
    let mut spec = TaskSpec::new(TaskKind::Copy);
    spec.content_tokens = 20;
    spec.min_len = 3;
    spec.max_len = 8;
    let (corpus, task) = gen_synthetic(&spec, 2000, 7)?;
    let vocab = Vocabulary::from_content_tokens(task.source_alphabet())?;
    let mut cfg = TrainConfig::desk(1);
    cfg.max_steps = 200;
    cfg.warmup_steps = 100;
    println!("training 200 steps...");
    let params = train(&corpus, &vocab, &vocab, &ModelConfig::desk(vocab.len(), vocab.len()), &cfg)?.last.params;

    let sample = task.sample(1, 99)?;
    let pair = &sample.pairs()[0];
    let (x, y) = (vocab.lookup(&pair.source), vocab.lookup(&pair.target));
    println!("TP {:.6}", tp_score(&params, &x, &y)?);
    println!("D-TP at rate 0, K=5: {:.6}", dtp_score(&params, &x, &y, 5, 0.0, 1, 0)?);
    for k in [1, 5, 30] {
        let draws: Vec<f64> = (0..20).map(|s| dtp_score(&params, &x, &y, k, 0.1, s, 0)).collect::<Result<_, _>>()?;
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 19.0).sqrt();
        println!("K={k:>2}, rate 0.1: mean over 20 seeds {mean:.4}, std {sd:.4}");
    }
    Ok(())
}
