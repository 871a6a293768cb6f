//! Training and inference on a small copy task, with models trained once per
//! test binary.

use std::sync::OnceLock;

use canmt::data::{degrade, gen_synthetic, ParallelCorpus, TaskKind, TaskSpec, Vocabulary};
use canmt::inference::{beam_search, quality_score, rtt_sentbleu, translate_and_score, BeamConfig};
use canmt::model::{ModelConfig, ParameterStore};
use canmt::training::{train, Objective, TrainConfig};

struct Fixture {
    vocab: Vocabulary,
    test: ParallelCorpus,
    forward: ParameterStore,
    backward: ParameterStore,
}

fn spec() -> TaskSpec {
    let mut spec = TaskSpec::new(TaskKind::Copy);
    spec.content_tokens = 20;
    spec.min_len = 3;
    spec.max_len = 8;
    spec
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let (corpus, task) = gen_synthetic(&spec(), 2000, 7).unwrap();
        let vocab = Vocabulary::from_content_tokens(task.source_alphabet()).unwrap();
        let model = ModelConfig::desk(vocab.len(), vocab.len());
        let mut cfg = TrainConfig::desk(1);
        cfg.max_steps = 600;
        cfg.warmup_steps = 100;
        let forward = train(&corpus, &vocab, &vocab, &model, &cfg).unwrap().last.params;
        cfg.seed = 2;
        cfg.objective = Objective::TranslationOnly;
        let backward = train(&corpus.reversed(), &vocab, &vocab, &model, &cfg).unwrap().last.params;
        let test = task.sample(100, 99).unwrap();
        Fixture { vocab, test, forward, backward }
    })
}

fn sources(f: &Fixture) -> Vec<Vec<usize>> {
    f.test.pairs().iter().map(|p| f.vocab.lookup(&p.source)).collect()
}

#[test]
fn both_losses_halve_within_200_steps() {
    let (corpus, task) = gen_synthetic(&spec(), 2000, 11).unwrap();
    let vocab = Vocabulary::from_content_tokens(task.source_alphabet()).unwrap();
    let model = ModelConfig::desk(vocab.len(), vocab.len());
    let mut cfg = TrainConfig::desk(5);
    cfg.max_steps = 200;
    let h = train(&corpus, &vocab, &vocab, &model, &cfg).unwrap().history;
    let (first, last) = (h[0], h[h.len() - 1]);
    assert!(last.loss_fwd < 0.5 * first.loss_fwd, "fwd {} -> {}", first.loss_fwd, last.loss_fwd);
    let (r0, r1) = (first.loss_rec.unwrap(), last.loss_rec.unwrap());
    assert!(r1 < 0.5 * r0, "rec {r0} -> {r1}");
}

#[test]
fn clean_sources_score_higher_than_corrupted_ones() {
    let f = fixture();
    let cfg = BeamConfig::new(4, 0.6, 32);
    let pool: Vec<usize> = (4..f.vocab.len()).collect();
    let (mut clean, mut corrupted) = (0.0, 0.0);
    for (i, x) in sources(f).iter().enumerate() {
        let st = translate_and_score(&f.forward, x, &cfg).unwrap();
        clean += st.quality;
        let noisy = degrade(x, 3, &pool, 1000 + i as u64);
        corrupted += quality_score(&f.forward, &noisy, &st.hypothesis).unwrap();
    }
    let n = f.test.len() as f64;
    assert!(clean / n > corrupted / n, "clean {} corrupted {}", clean / n, corrupted / n);
}

#[test]
fn converged_copy_model_translates_and_scores_deterministically() {
    let f = fixture();
    let cfg = BeamConfig::new(4, 0.6, 32);
    let xs = sources(f);
    let exact = xs.iter().filter(|x| beam_search(&f.forward, x, &cfg).unwrap()[0].tokens == **x).count();
    assert!(exact >= 90, "only {exact}/100 copied exactly");
    let a = translate_and_score(&f.forward, &xs[0], &cfg).unwrap();
    let b = translate_and_score(&f.forward, &xs[0], &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.quality <= 0.0);
}

#[test]
fn round_trip_of_an_exact_copy_scores_100() {
    let f = fixture();
    let cfg = BeamConfig::new(4, 0.6, 32);
    let mut perfect = 0;
    for x in sources(f) {
        let back = beam_search(&f.backward, &x, &cfg).unwrap().remove(0).tokens;
        let bleu = rtt_sentbleu(&f.backward, &x, &x, &cfg).unwrap();
        if back == x {
            assert_eq!(bleu, 100.0);
            perfect += 1;
        } else {
            assert!(bleu < 100.0);
        }
    }
    assert!(perfect >= 90, "backward model reproduced only {perfect}/100");
}

#[test]
fn wider_beams_never_lower_the_top_score_on_a_trained_model() {
    let f = fixture();
    for x in sources(f) {
        let mut prev = f64::NEG_INFINITY;
        for b in 1..=6 {
            let top = beam_search(&f.forward, &x, &BeamConfig::new(b, 0.6, 32)).unwrap()[0].score;
            assert!(top >= prev, "beam {b}: {top} < {prev} on {x:?}");
            prev = top;
        }
    }
}
