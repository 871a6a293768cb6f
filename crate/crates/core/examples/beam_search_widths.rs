//! Beam search over a toy next-token distribution and over a trained model,
//! showing the effect of beam width and length penalty.

use canmt::data::{gen_synthetic, TaskKind, TaskSpec, Vocabulary, EOS_ID};
use canmt::inference::{beam_search, beam_search_with, length_penalty, BeamConfig};
use canmt::model::ModelConfig;
use canmt::training::{train, TrainConfig};

fn main() -> canmt::Result<()> {
    // Greedy picks token 4 first, but 5 followed by EOS is more probable overall.
    let table = |prefix: &[usize]| -> Vec<f64> {
        let mut p = [1e-9f64; 6];
        match prefix {
            [] => {
                p[4] = 0.55;
                p[5] = 0.45;
            }
            [4] => {
                p[4] = 0.35;
                p[5] = 0.35;
                p[EOS_ID] = 0.3;
            }
            _ => p[EOS_ID] = 1.0,
        }
        p.iter().map(|x| x.ln()).collect()
    };
    for beam in [1, 2, 4] {
        let hyps = beam_search_with(|prefixes| Ok(prefixes.iter().map(|p| table(p)).collect()), beam, 0.0, 4)?;
        println!("toy beam {beam}: best {:?} log-prob {:.4}", hyps[0].tokens, hyps[0].log_prob);
    }
    for alpha in [0.0, 0.6, 1.0] {
        println!("length penalty at alpha {alpha}: lp(3) {:.4}  lp(10) {:.4}", length_penalty(3, alpha), length_penalty(10, alpha));
    }

    let mut spec = TaskSpec::new(TaskKind::Copy);
    spec.content_tokens = 20;
    spec.min_len = 3;
    spec.max_len = 8;
    let (corpus, task) = gen_synthetic(&spec, 2000, 7)?;
    let vocab = Vocabulary::from_content_tokens(task.source_alphabet())?;
    let mut cfg = TrainConfig::desk(1);
    cfg.max_steps = 250;
    cfg.warmup_steps = 100;
    println!("training 250 steps (deliberately undertrained)...");
    let params = train(&corpus, &vocab, &vocab, &ModelConfig::desk(vocab.len(), vocab.len()), &cfg)?.last.params;

    let test = task.sample(50, 99)?;
    for beam in [1, 2, 4, 8] {
        let cfg = BeamConfig::new(beam, 0.6, 32);
        let (mut exact, mut score) = (0, 0.0);
        for p in test.pairs() {
            let x = vocab.lookup(&p.source);
            let best = beam_search(&params, &x, &cfg)?.remove(0);
            exact += usize::from(best.tokens == x);
            score += best.score;
        }
        println!("beam {beam}: {exact}/50 exact copies, mean best score {:.4}", score / 50.0);
    }
    Ok(())
}
