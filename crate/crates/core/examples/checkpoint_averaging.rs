//! Save checkpoints during training, reload them and average their parameters.

use canmt::data::{gen_synthetic, TaskKind, TaskSpec, Vocabulary};
use canmt::inference::quality_score;
use canmt::model::ModelConfig;
use canmt::training::{average_checkpoints, load_checkpoint, save_checkpoint, train_with, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("canmt-checkpoint-averaging");
    std::fs::create_dir_all(&dir)?;

    let mut spec = TaskSpec::new(TaskKind::Copy);
    spec.content_tokens = 20;
    spec.min_len = 3;
    spec.max_len = 8;
    let (corpus, task) = gen_synthetic(&spec, 2000, 7)?;
    let vocab = Vocabulary::from_content_tokens(task.source_alphabet())?;
    let mut cfg = TrainConfig::desk(1);
    cfg.max_steps = 200;
    cfg.warmup_steps = 100;
    cfg.checkpoint_every = 40;

    let mut paths = Vec::new();
    train_with(&corpus, &vocab, &vocab, &ModelConfig::desk(vocab.len(), vocab.len()), &cfg, |ck| {
        let path = dir.join(format!("ckpt-{:06}.ckpt", ck.step));
        save_checkpoint(ck, &path)?;
        println!("saved {}", path.display());
        paths.push(path);
        Ok(())
    })?;

    let loaded = paths.iter().map(|p| load_checkpoint(p)).collect::<canmt::Result<Vec<_>>>()?;
    for ck in &loaded {
        ck.check_vocabularies(&vocab, &vocab)?;
    }
    let last3: Vec<_> = loaded[loaded.len() - 3..].iter().map(|c| &c.params).collect();
    let averaged = average_checkpoints(&last3)?;

    let test = task.sample(100, 99)?;
    let mean_q = |params: &canmt::model::ParameterStore| -> canmt::Result<f64> {
        let mut total = 0.0;
        for p in test.pairs() {
            let x = vocab.lookup(&p.source);
            total += quality_score(params, &x, &x)?;
        }
        Ok(total / test.len() as f64)
    };
    println!("mean Q of reference copies, last checkpoint: {:.4}", mean_q(&loaded.last().unwrap().params)?);
    println!("mean Q of reference copies, average of last 3: {:.4}", mean_q(&averaged)?);
    Ok(())
}
