//! Translate with beam search and attach the model's own quality estimate Q.
//!
//! Q is the mean log-probability of reconstructing the source from the
//! hypothesis alone, so a source that no longer matches the hypothesis scores
//! lower even though the hypothesis is unchanged.

use canmt::data::{degrade, gen_synthetic, TaskKind, TaskSpec, Vocabulary};
use canmt::inference::{quality_score, quality_trace, translate_and_score, BeamConfig};
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
    cfg.max_steps = 400;
    cfg.warmup_steps = 100;
    println!("training 400 steps...");
    let params = train(&corpus, &vocab, &vocab, &ModelConfig::desk(vocab.len(), vocab.len()), &cfg)?.last.params;

    let beam = BeamConfig::new(4, 0.6, 32);
    let pool: Vec<usize> = (4..vocab.len()).collect();
    for (i, pair) in task.sample(6, 99)?.pairs().iter().enumerate() {
        let x = vocab.lookup(&pair.source);
        let out = translate_and_score(&params, &x, &beam)?;
        let noisy = degrade(&x, 2, &pool, i as u64);
        println!("src  {}", pair.source.join(" "));
        println!("hyp  {}", vocab.decode_ids(&out.hypothesis)?.join(" "));
        println!(
            "     model score {:.3}  Q {:.3}  Q with 2 source tokens corrupted {:.3}",
            out.model_score,
            out.quality,
            quality_score(&params, &noisy, &out.hypothesis)?
        );
    }

    let sample = task.sample(1, 5)?;
    let pair = &sample.pairs()[0];
    let x = vocab.lookup(&pair.source);
    let trace = quality_trace(&params, &x, &x)?;
    println!("per-token reconstruction log-probs for {}:", pair.source.join(" "));
    for (tok, lp) in pair.source.iter().map(String::as_str).chain(["</s>"]).zip(&trace.token_log_probs) {
        println!("  {tok:>5} {lp:.4}");
    }
    Ok(())
}
