use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::checkpoint::{Checkpoint, Provenance};
use super::optim::{adam_step, lr_at, AdamConfig, AdamState};
use crate::data::{batchify, pair_tokens, Batch, ParallelCorpus, Vocabulary, UNK_ID};
use crate::error::{Error, Result};
use crate::kv::KvText;
use crate::model::{format_f64, init_parameters, Forward, ModelConfig, ParameterStore};
use crate::numerics::{Rng, Tape};

/// Which loss the optimizer minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `L_fwd + L_rec`: the competency-aware model.
    Joint,
    /// `L_fwd` alone: a plain encoder-decoder; estimator weights stay frozen.
    TranslationOnly,
}

impl Objective {
    fn trains(self, name: &str) -> bool {
        match self {
            Objective::Joint => true,
            Objective::TranslationOnly => !name.starts_with("est.") && name != crate::model::PROJ_SRC,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Joint => "joint",
            Objective::TranslationOnly => "translation-only",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Objective::Joint),
            "translation-only" => Ok(Objective::TranslationOnly),
            other => Err(Error::Parse(format!("unknown objective `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr_factor: f64,
    pub warmup_steps: u64,
    pub adam: AdamConfig,
    pub max_tokens: usize,
    pub max_steps: u64,
    pub checkpoint_every: u64,
    pub keep_last: usize,
    pub seed: u64,
    pub label_smoothing: f64,
    pub dropout_rate: f64,
    pub objective: Objective,
}

impl TrainConfig {
    pub fn desk(seed: u64) -> Self {
        Self {
            lr_factor: 1.0,
            warmup_steps: 400,
            adam: AdamConfig::default(),
            max_tokens: 1024,
            max_steps: 3000,
            checkpoint_every: 200,
            keep_last: 5,
            seed,
            label_smoothing: 0.1,
            dropout_rate: 0.1,
            objective: Objective::Joint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.warmup_steps < 1 {
            return Err(Error::Config("warmup_steps must be at least 1".into()));
        }
        if self.checkpoint_every < 1 {
            return Err(Error::Config("checkpoint_every must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) || !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config("label_smoothing and dropout_rate must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvText {
        let mut kv = KvText::new();
        kv.push("lr_factor", format_f64(self.lr_factor))
            .push("warmup_steps", self.warmup_steps)
            .push("adam_beta1", format_f64(self.adam.beta1))
            .push("adam_beta2", format_f64(self.adam.beta2))
            .push("adam_eps", format_f64(self.adam.eps))
            .push("max_tokens", self.max_tokens)
            .push("max_steps", self.max_steps)
            .push("checkpoint_every", self.checkpoint_every)
            .push("keep_last", self.keep_last)
            .push("seed", self.seed)
            .push("label_smoothing", format_f64(self.label_smoothing))
            .push("dropout_rate", format_f64(self.dropout_rate))
            .push("objective", self.objective);
        kv
    }

    /// Overrides fields present in `kv`; absent keys keep their current value.
    pub fn apply_kv(&mut self, kv: &KvText) -> Result<()> {
        fn set<T: FromStr>(kv: &KvText, key: &str, slot: &mut T) -> Result<()> {
            if kv.get(key).is_some() {
                *slot = kv.require(key)?;
            }
            Ok(())
        }
        set(kv, "lr_factor", &mut self.lr_factor)?;
        set(kv, "warmup_steps", &mut self.warmup_steps)?;
        set(kv, "adam_beta1", &mut self.adam.beta1)?;
        set(kv, "adam_beta2", &mut self.adam.beta2)?;
        set(kv, "adam_eps", &mut self.adam.eps)?;
        set(kv, "max_tokens", &mut self.max_tokens)?;
        set(kv, "max_steps", &mut self.max_steps)?;
        set(kv, "checkpoint_every", &mut self.checkpoint_every)?;
        set(kv, "keep_last", &mut self.keep_last)?;
        set(kv, "seed", &mut self.seed)?;
        set(kv, "label_smoothing", &mut self.label_smoothing)?;
        set(kv, "dropout_rate", &mut self.dropout_rate)?;
        set(kv, "objective", &mut self.objective)?;
        self.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub step: u64,
    pub lr: f64,
    pub loss_fwd: f64,
    /// `None` when the objective does not include reconstruction.
    pub loss_rec: Option<f64>,
}

impl LossRecord {
    pub fn total(&self) -> f64 {
        self.loss_fwd + self.loss_rec.unwrap_or(0.0)
    }
}

/// `step,lr,loss_fwd,loss_rec`; `loss_rec` is empty for translation-only runs.
pub fn loss_curve_csv(history: &[LossRecord]) -> String {
    let mut out = String::from("step,lr,loss_fwd,loss_rec\n");
    for r in history {
        let rec = r.loss_rec.map(format_f64).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.step, format_f64(r.lr), format_f64(r.loss_fwd), rec));
    }
    out
}

pub fn write_loss_curve(history: &[LossRecord], path: &Path) -> Result<()> {
    std::fs::write(path, loss_curve_csv(history)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ParameterStore,
    pub adam: AdamState,
    pub history: Vec<LossRecord>,
}

impl TrainState {
    pub fn step(&self) -> u64 {
        self.adam.step
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint after the last step (the initial one when `max_steps = 0`).
    pub last: Checkpoint,
    /// Up to `keep_last` most recent checkpoints, oldest first.
    pub recent: Vec<Checkpoint>,
    pub history: Vec<LossRecord>,
}

impl TrainOutcome {
    pub fn averaged(&self) -> Result<ParameterStore> {
        let stores: Vec<&ParameterStore> = self.recent.iter().map(|c| &c.params).collect();
        super::checkpoint::average_checkpoints(&stores)
    }
}

fn encode_checked(
    corpus: &ParallelCorpus,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    model: &ModelConfig,
    max_tokens: usize,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    if model.src_vocab_size != src_vocab.len() || model.tgt_vocab_size != tgt_vocab.len() {
        return Err(Error::Config(format!(
            "model vocab sizes {}/{} differ from vocabularies {}/{}",
            model.src_vocab_size,
            model.tgt_vocab_size,
            src_vocab.len(),
            tgt_vocab.len()
        )));
    }
    let encoded = corpus.encode(src_vocab, tgt_vocab);
    for (i, (s, t)) in encoded.iter().enumerate() {
        if s.contains(&UNK_ID) || t.contains(&UNK_ID) {
            return Err(Error::invalid(format!("pair {i} has tokens outside the vocabularies")));
        }
        let longest = s.len().max(t.len()) + 2;
        if longest > model.max_len {
            return Err(Error::TooLong { len: longest, max: model.max_len });
        }
        if pair_tokens(s, t) > max_tokens {
            return Err(Error::Config(format!(
                "max_tokens {max_tokens} below the {} tokens of pair {i}",
                pair_tokens(s, t)
            )));
        }
    }
    Ok(encoded)
}

/// One optimizer step on `batch`. Returns the logged loss components.
pub fn train_step(state: &mut TrainState, batch: &Batch, cfg: &TrainConfig, rng: Rng) -> Result<LossRecord> {
    let step = state.adam.step + 1;
    let lr = lr_at(step, state.params.config().model_dim, cfg.warmup_steps, cfg.lr_factor)?;
    let (record, grads) = {
        let mut tape = Tape::new();
        let mut f = Forward::new(&mut tape, &state.params).trainable().with_dropout(cfg.dropout_rate, rng);
        let fwd = f.translation_loss(&batch.pairs, cfg.label_smoothing)?;
        let (root, rec) = match cfg.objective {
            Objective::Joint => {
                let rec = f.reconstruction_loss(&batch.pairs, cfg.label_smoothing)?;
                (f.tape().add(fwd, rec)?, Some(rec))
            }
            Objective::TranslationOnly => (fwd, None),
        };
        let bound: Vec<(String, crate::numerics::Var)> =
            f.bound().iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let mut g = tape.backward(root)?;
        let grads: BTreeMap<String, Vec<f64>> =
            bound.into_iter().filter_map(|(name, v)| g.take(v).map(|x| (name, x))).collect();
        let record = LossRecord {
            step,
            lr,
            loss_fwd: tape.value(fwd)[0],
            loss_rec: rec.map(|r| tape.value(r)[0]),
        };
        (record, grads)
    };
    let trainable: Vec<String> =
        state.params.names().filter(|n| cfg.objective.trains(n)).map(str::to_string).collect();
    adam_step(&mut state.params, &mut state.adam, &grads, &trainable, lr, cfg.adam)?;
    state.history.push(record);
    Ok(record)
}

/// Trains from a fresh initialization seeded by `cfg.seed`, calling `on_checkpoint`
/// for every emitted checkpoint (every `checkpoint_every` steps and the last one).
pub fn train_with(
    corpus: &ParallelCorpus,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    model: &ModelConfig,
    cfg: &TrainConfig,
    mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let encoded = encode_checked(corpus, src_vocab, tgt_vocab, model, cfg.max_tokens)?;
    let provenance = Provenance {
        corpus: corpus.fingerprint(),
        src_vocab: src_vocab.fingerprint(),
        tgt_vocab: tgt_vocab.fingerprint(),
    };
    let root = Rng::new(cfg.seed);
    let batch_root = root.substream(1);
    let dropout_root = root.substream(2);
    let mut state = TrainState {
        params: init_parameters(model, root.substream(0).seed())?,
        adam: AdamState::new(),
        history: Vec::new(),
    };
    let keep = cfg.keep_last.max(1);
    let mut recent: VecDeque<Checkpoint> = VecDeque::new();
    let mut emit = |state: &TrainState, recent: &mut VecDeque<Checkpoint>| -> Result<Checkpoint> {
        let ck = Checkpoint { params: state.params.clone(), step: state.step(), provenance: provenance.clone() };
        on_checkpoint(&ck)?;
        recent.push_back(ck.clone());
        while recent.len() > keep {
            recent.pop_front();
        }
        Ok(ck)
    };

    let mut epoch = 0u64;
    let mut batches = batchify(&encoded, cfg.max_tokens, batch_root.substream(epoch).seed())?;
    let mut cursor = 0;
    while state.step() < cfg.max_steps {
        if cursor == batches.len() {
            epoch += 1;
            batches = batchify(&encoded, cfg.max_tokens, batch_root.substream(epoch).seed())?;
            cursor = 0;
        }
        let step = state.step() + 1;
        train_step(&mut state, &batches[cursor], cfg, dropout_root.substream(step))?;
        cursor += 1;
        if state.step().is_multiple_of(cfg.checkpoint_every) && state.step() < cfg.max_steps {
            emit(&state, &mut recent)?;
        }
    }
    let last = emit(&state, &mut recent)?;
    Ok(TrainOutcome { last, recent: recent.into(), history: state.history })
}

pub fn train(
    corpus: &ParallelCorpus,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(corpus, src_vocab, tgt_vocab, model, cfg, |_| Ok(()))
}
