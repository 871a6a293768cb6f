//! Train a desk-size model on a small copy task and watch both losses fall.
//!
//! Checkpoints are reported as they are emitted; the last few are averaged
//! into the final parameters.
//!
//!     cargo run --release --example train_copy_task -- [steps]

use canmt::data::{gen_synthetic, TaskKind, TaskSpec, Vocabulary};
use canmt::model::ModelConfig;
use canmt::training::{train_with, TrainConfig};

fn main() -> canmt::Result<()> {
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);

    let mut spec = TaskSpec::new(TaskKind::Copy);
    spec.content_tokens = 20;
    spec.min_len = 3;
    spec.max_len = 8;
    let (corpus, task) = gen_synthetic(&spec, 2000, 7)?;
    let vocab = Vocabulary::from_content_tokens(task.source_alphabet())?;

    let model = ModelConfig::desk(vocab.len(), vocab.len());
    let mut cfg = TrainConfig::desk(1);
    cfg.max_steps = steps;
    cfg.warmup_steps = 100;
    cfg.checkpoint_every = 50;

    println!("{} pairs, vocab {}, model {} parameters", corpus.len(), vocab.len(), {
        canmt::model::init_parameters(&model, 0)?.parameter_count()
    });
    let out = train_with(&corpus, &vocab, &vocab, &model, &cfg, |ck| {
        println!("  checkpoint at step {}", ck.step);
        Ok(())
    })?;

    println!("step      lr   loss_fwd  loss_rec");
    for r in out.history.iter().step_by(25).chain(out.history.last()) {
        println!("{:>4}  {:.5}  {:>8.4}  {:>8.4}", r.step, r.lr, r.loss_fwd, r.loss_rec.unwrap_or(f64::NAN));
    }
    let averaged = out.averaged()?;
    println!("averaged {} checkpoints into {} tensors", out.recent.len(), averaged.tensors().len());
    Ok(())
}
