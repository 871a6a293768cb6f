//! Round-trip translation as a quality baseline: translate the hypothesis back
//! with a reverse-direction model and score it against the source with
//! sentence BLEU.

use canmt::data::{degrade, gen_synthetic, TaskKind, TaskSpec, Vocabulary};
use canmt::inference::{rtt_sentbleu, BeamConfig};
use canmt::model::ModelConfig;
use canmt::training::{train, Objective, TrainConfig};

fn main() -> canmt::Result<()> {
    let mut spec = TaskSpec::new(TaskKind::Copy);
    spec.content_tokens = 20;
    spec.min_len = 3;
    spec.max_len = 8;
    let (corpus, task) = gen_synthetic(&spec, 2000, 7)?;
    let vocab = Vocabulary::from_content_tokens(task.source_alphabet())?;
    let mut cfg = TrainConfig::desk(2);
    cfg.max_steps = 400;
    cfg.warmup_steps = 100;
    cfg.objective = Objective::TranslationOnly;
    println!("training a reverse-direction model for 400 steps...");
    let backward = train(&corpus.reversed(), &vocab, &vocab, &ModelConfig::desk(vocab.len(), vocab.len()), &cfg)?.last.params;

    let beam = BeamConfig::new(4, 0.6, 32);
    let pool: Vec<usize> = (4..vocab.len()).collect();
    for (i, p) in task.sample(5, 99)?.pairs().iter().enumerate() {
        let x = vocab.lookup(&p.source);
        let y = vocab.lookup(&p.target);
        let bad = degrade(&y, 3, &pool, i as u64);
        println!(
            "{:<28} RTT BLEU exact hyp {:>6.2}  hyp with 3 edits {:>6.2}",
            p.source.join(" "),
            rtt_sentbleu(&backward, &x, &y, &beam)?,
            rtt_sentbleu(&backward, &x, &bad, &beam)?
        );
    }
    Ok(())
}
