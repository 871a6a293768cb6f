use std::collections::{BTreeSet, VecDeque};
use std::path::{Path, PathBuf};

use super::manifest::{manifest_path_for, ManifestBuilder, RunManifest};
use super::{AvgArgs, BeamArgs, CombineArgs, DataArgs, DegradeArgs, DtpArgs, EvaluateArgs, GenDataArgs, Method};
use super::{SampleArgs, ScoreArgs, TrainArgs, TranslateArgs};
use crate::data::{tokenize, DegradedSet, ParallelCorpus, SyntheticTask, TaskSpec, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{levels_from_oracle, quality_biased_sample, sentence_bleu, znorm_combine, EvaluationReport, ScoreSeries};
use crate::inference::{
    beam_search, dtp_score, quality_score, quality_scores, read_score_tsv, rtt_sentbleu, tp_scores, write_score_tsv,
    BeamConfig, ScoreRow,
};
use crate::kv::KvText;
use crate::model::{ModelConfig, ParameterStore};
use crate::numerics::Rng;
use crate::training::{
    average_checkpoints, load_checkpoint, save_checkpoint, train_with, write_loss_curve, Checkpoint, TrainConfig,
};

const SCORE_CHUNK: usize = 64;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Vocabs {
    src: Vocabulary,
    tgt: Vocabulary,
    src_path: PathBuf,
    tgt_path: PathBuf,
}

impl DataArgs {
    fn vocabs(&self) -> Result<Vocabs> {
        let (mut src_path, mut tgt_path) = (self.data.join("src.vocab"), self.data.join("tgt.vocab"));
        if self.reverse {
            std::mem::swap(&mut src_path, &mut tgt_path);
        }
        Ok(Vocabs { src: Vocabulary::load(&src_path)?, tgt: Vocabulary::load(&tgt_path)?, src_path, tgt_path })
    }

    fn corpus(&self, explicit: Option<&PathBuf>, default_name: &str) -> Result<(ParallelCorpus, PathBuf)> {
        let path = explicit.cloned().unwrap_or_else(|| self.data.join(default_name));
        let corpus = ParallelCorpus::load(&path)?;
        Ok((if self.reverse { corpus.reversed() } else { corpus }, path))
    }

    fn record(&self, m: &mut ManifestBuilder, v: &Vocabs) {
        m.input("src_vocab", &v.src_path).input("tgt_vocab", &v.tgt_path).config("reverse", self.reverse);
    }
}

impl BeamArgs {
    fn config(&self, model: &ModelConfig) -> Result<BeamConfig> {
        let cfg = BeamConfig::new(self.beam, self.length_penalty, self.max_len.unwrap_or(model.max_len));
        cfg.validate(model.max_len)?;
        Ok(cfg)
    }

    fn record(&self, m: &mut ManifestBuilder) {
        m.config("beam", self.beam).config("length_penalty", format!("{:?}", self.length_penalty));
        if let Some(l) = self.max_len {
            m.config("max_len", l);
        }
    }
}

fn load_checked(path: &Path, src: &Vocabulary, tgt: &Vocabulary) -> Result<Checkpoint> {
    let ck = load_checkpoint(path)?;
    ck.check_vocabularies(src, tgt)?;
    Ok(ck)
}

pub(super) fn gen_data(a: &GenDataArgs) -> Result<RunManifest> {
    let mut m = ManifestBuilder::new("gen-data");
    let spec = TaskSpec { kind: a.task, content_tokens: a.content_tokens, min_len: a.min_len, max_len: a.max_len };
    let task = SyntheticTask::new(spec, a.seed)?;
    create_dir(&a.out)?;
    let train = task.sample(a.n, a.seed)?;
    let train_path = a.out.join("train.tsv");
    train.save(&train_path)?;
    m.output("train", &train_path);
    if a.test_n > 0 {
        let test_seed = Rng::new(a.seed).substream(2).seed();
        let test = task.sample(a.test_n, test_seed)?;
        let test_path = a.out.join("test.tsv");
        test.save(&test_path)?;
        m.output("test", &test_path).seed("test", test_seed);
    }
    let src_path = a.out.join("src.vocab");
    let tgt_path = a.out.join("tgt.vocab");
    Vocabulary::from_content_tokens(task.source_alphabet())?.save(&src_path)?;
    Vocabulary::from_content_tokens(task.target_alphabet())?.save(&tgt_path)?;
    let task_path = a.out.join("task.kv");
    write_text(&task_path, &task.to_kv().render())?;
    m.output("src_vocab", &src_path).output("tgt_vocab", &tgt_path).output("task", &task_path);
    m.config("task", a.task)
        .config("n", a.n)
        .config("test_n", a.test_n)
        .config("content_tokens", a.content_tokens)
        .config("min_len", a.min_len)
        .config("max_len", a.max_len)
        .seed("task", a.seed);
    m.finish(&a.out.join("gen-data.manifest.json"))
}

/// Defaults, then the config file, then `--set` pairs, then explicit flags.
fn resolve_train_config(a: &TrainArgs, v: &Vocabs) -> Result<(ModelConfig, TrainConfig, KvText)> {
    let mut kv = ModelConfig::desk(v.src.len(), v.tgt.len()).to_kv();
    kv.extend(&TrainConfig::desk(0).to_kv());
    let known: BTreeSet<String> = kv.keys().map(str::to_string).collect();
    let check = |layer: &KvText, origin: &str| -> Result<()> {
        match layer.keys().find(|k| !known.contains(*k)) {
            Some(k) => Err(Error::Config(format!("unknown setting `{k}` in {origin}"))),
            None => Ok(()),
        }
    };
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file = KvText::parse(&text)?;
        check(&file, &path.display().to_string())?;
        kv.extend(&file);
    }
    let overrides = KvText::parse(&a.overrides.join("\n"))?;
    check(&overrides, "--set")?;
    kv.extend(&overrides);
    let mut flags = KvText::new();
    if let Some(x) = a.objective {
        flags.push("objective", x);
    }
    if let Some(x) = a.seed {
        flags.push("seed", x);
    }
    if let Some(x) = a.max_steps {
        flags.push("max_steps", x);
    }
    if let Some(x) = a.max_tokens {
        flags.push("max_tokens", x);
    }
    if let Some(x) = a.warmup_steps {
        flags.push("warmup_steps", x);
    }
    if let Some(x) = a.lr_factor {
        flags.push("lr_factor", format!("{x:?}"));
    }
    if let Some(x) = a.checkpoint_every {
        flags.push("checkpoint_every", x);
    }
    if let Some(x) = a.keep_last {
        flags.push("keep_last", x);
    }
    if let Some(x) = a.label_smoothing {
        flags.push("label_smoothing", format!("{x:?}"));
    }
    if let Some(x) = a.dropout_rate {
        flags.push("dropout_rate", format!("{x:?}"));
    }
    kv.extend(&flags);
    let model = ModelConfig::from_kv(&kv)?;
    let mut train = TrainConfig::desk(0);
    train.apply_kv(&kv)?;
    Ok((model, train, kv))
}

pub(super) fn train(a: &TrainArgs) -> Result<RunManifest> {
    let mut m = ManifestBuilder::new("train");
    let v = a.data.vocabs()?;
    let (corpus, corpus_path) = a.data.corpus(a.corpus.as_ref(), "train.tsv")?;
    let (model, cfg, kv) = resolve_train_config(a, &v)?;
    create_dir(&a.out)?;
    a.data.record(&mut m, &v);
    m.input("corpus", &corpus_path);
    if let Some(c) = &a.config {
        m.input("config", c);
    }
    for (k, val) in kv.to_map() {
        m.config(&k, val);
    }
    m.seed("train", cfg.seed);

    let keep = cfg.keep_last.max(1);
    let mut retained: VecDeque<PathBuf> = VecDeque::new();
    let outcome = train_with(&corpus, &v.src, &v.tgt, &model, &cfg, |ck| {
        let path = a.out.join(format!("ckpt-{:06}.ckpt", ck.step));
        save_checkpoint(ck, &path)?;
        eprintln!("step {}: wrote {}", ck.step, path.display());
        retained.push_back(path);
        while retained.len() > keep {
            let old = retained.pop_front().expect("non-empty");
            std::fs::remove_file(&old).map_err(|e| Error::io(&old, e))?;
        }
        Ok(())
    })?;
    let last_path = a.out.join("last.ckpt");
    save_checkpoint(&outcome.last, &last_path)?;
    let curve_path = a.out.join("loss.csv");
    write_loss_curve(&outcome.history, &curve_path)?;
    for p in &retained {
        let key = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        m.output(&key, p);
    }
    m.output("last", &last_path).output("loss_curve", &curve_path);
    m.finish(&a.out.join("train.manifest.json"))
}

pub(super) fn avg_checkpoints(a: &AvgArgs) -> Result<RunManifest> {
    let mut m = ManifestBuilder::new("avg-checkpoints");
    let cks = a.checkpoints.iter().map(|p| load_checkpoint(p)).collect::<Result<Vec<_>>>()?;
    let first = &cks[0];
    for (ck, path) in cks.iter().zip(&a.checkpoints).skip(1) {
        ck.check_config(first.config())?;
        if ck.provenance != first.provenance {
            return Err(Error::FingerprintMismatch {
                what: "checkpoint provenance",
                expected: format!("{:?}", first.provenance),
                found: format!("{}: {:?}", path.display(), ck.provenance),
            });
        }
    }
    let stores: Vec<&ParameterStore> = cks.iter().map(|c| &c.params).collect();
    let averaged = Checkpoint {
        params: average_checkpoints(&stores)?,
        step: cks.iter().map(|c| c.step).max().unwrap_or(0),
        provenance: first.provenance.clone(),
    };
    save_checkpoint(&averaged, &a.out)?;
    for (i, p) in a.checkpoints.iter().enumerate() {
        m.input(&format!("checkpoint_{i}"), p);
    }
    m.config("count", cks.len()).output("checkpoint", &a.out);
    m.finish(&manifest_path_for(&a.out))
}

pub(super) fn translate(a: &TranslateArgs) -> Result<RunManifest> {
    let mut m = ManifestBuilder::new("translate");
    let v = a.data.vocabs()?;
    let ck = load_checked(&a.ckpt, &v.src, &v.tgt)?;
    let beam = a.beam.config(ck.config())?;
    let input = a.input.clone().unwrap_or_else(|| a.data.data.join("test.tsv"));
    let text = std::fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
    let mut rows = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split('\t').collect();
        let source = if a.data.reverse && fields.len() > 1 { fields[1] } else { fields[0] };
        let src = v.src.lookup(&tokenize(source));
        let best = beam_search(&ck.params, &src, &beam)?.remove(0);
        let quality = quality_score(&ck.params, &src, &best.tokens)?;
        rows.push(ScoreRow {
            id: rows.len() as u64,
            source: tokenize(source).join(" "),
            hypothesis: v.tgt.decode_ids(&best.tokens)?.join(" "),
            score: quality,
        });
    }
    if rows.is_empty() {
        return Err(Error::Empty("translation input"));
    }
    write_score_tsv(&rows, &a.out)?;
    a.data.record(&mut m, &v);
    a.beam.record(&mut m);
    m.input("checkpoint", &a.ckpt).input("input", &input).output("translations", &a.out);
    m.finish(&manifest_path_for(&a.out))
}

struct Item {
    id: u64,
    src: Vec<usize>,
    hyp: Vec<usize>,
    hyp_tokens: Vec<String>,
    reference: Option<Vec<String>>,
}

struct Scorer<'a> {
    params: &'a ParameterStore,
    backward: Option<&'a ParameterStore>,
    beam: &'a BeamArgs,
    dtp: &'a DtpArgs,
    seed: u64,
}

impl Scorer<'_> {
    fn score(&self, method: Method, items: &[Item]) -> Result<Vec<f64>> {
        let pairs = |chunk: &[Item]| -> Vec<(Vec<usize>, Vec<usize>)> {
            chunk.iter().map(|i| (i.src.clone(), i.hyp.clone())).collect()
        };
        match method {
            Method::CanmtQ => {
                let mut out = Vec::with_capacity(items.len());
                for chunk in items.chunks(SCORE_CHUNK) {
                    out.extend(quality_scores(self.params, &pairs(chunk))?);
                }
                Ok(out)
            }
            Method::Tp => {
                let mut out = Vec::with_capacity(items.len());
                for chunk in items.chunks(SCORE_CHUNK) {
                    out.extend(tp_scores(self.params, &pairs(chunk))?);
                }
                Ok(out)
            }
            Method::Dtp => items
                .iter()
                .map(|i| dtp_score(self.params, &i.src, &i.hyp, self.dtp.dtp_k, self.dtp.dtp_rate, self.seed, i.id))
                .collect(),
            Method::Rtt => {
                let backward = self.backward.ok_or_else(|| Error::invalid("method rtt requires --backward-ckpt"))?;
                let cfg = self.beam.config(backward.config())?;
                items.iter().map(|i| rtt_sentbleu(backward, &i.src, &i.hyp, &cfg)).collect()
            }
            Method::Sentbleu => items
                .iter()
                .map(|i| {
                    let reference = i.reference.as_ref().ok_or_else(|| Error::invalid("sentbleu needs references"))?;
                    Ok(sentence_bleu(&i.hyp_tokens, reference))
                })
                .collect(),
        }
    }
}

/// Rows `id<TAB>source<TAB>hypothesis[<TAB>...]`; extra columns are ignored.
fn read_hypotheses(path: &Path) -> Result<Vec<(u64, String, String)>> {
    let mut r = csv::ReaderBuilder::new().delimiter(b'\t').has_headers(false).flexible(true).from_path(path)?;
    let mut rows = Vec::new();
    for (lineno, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() < 3 {
            return Err(Error::Parse(format!("{}:{}: expected id, source, hypothesis", path.display(), lineno + 1)));
        }
        let id = rec[0]
            .parse()
            .map_err(|_| Error::Parse(format!("{}:{}: bad id `{}`", path.display(), lineno + 1, &rec[0])))?;
        rows.push((id, rec[1].to_string(), rec[2].to_string()));
    }
    Ok(rows)
}

fn load_backward(path: Option<&PathBuf>, v: &Vocabs, m: &mut ManifestBuilder) -> Result<Option<Checkpoint>> {
    path.map(|p| {
        m.input("backward_checkpoint", p);
        load_checked(p, &v.tgt, &v.src)
    })
    .transpose()
}

pub(super) fn score(a: &ScoreArgs) -> Result<RunManifest> {
    let mut m = ManifestBuilder::new("score");
    if a.method == Method::Rtt && a.backward_ckpt.is_none() {
        return Err(Error::invalid("method rtt requires --backward-ckpt"));
    }
    let v = a.data.vocabs()?;
    let ck = load_checked(&a.ckpt, &v.src, &v.tgt)?;
    let backward = load_backward(a.backward_ckpt.as_ref(), &v, &mut m)?;
    let rows = read_hypotheses(&a.hyps)?;
    let items: Vec<Item> = rows
        .iter()
        .map(|(id, s, h)| {
            let hyp_tokens = tokenize(h);
            Item { id: *id, src: v.src.lookup(&tokenize(s)), hyp: v.tgt.lookup(&hyp_tokens), hyp_tokens, reference: None }
        })
        .collect();
    let scorer = Scorer { params: &ck.params, backward: backward.as_ref().map(|c| &c.params), beam: &a.beam, dtp: &a.dtp, seed: a.seed };
    let scores = scorer.score(a.method, &items)?;
    let out: Vec<ScoreRow> = rows
        .into_iter()
        .zip(scores)
        .map(|((id, source, hypothesis), score)| ScoreRow { id, source, hypothesis, score })
        .collect();
    write_score_tsv(&out, &a.out)?;
    a.data.record(&mut m, &v);
    a.beam.record(&mut m);
    m.config("method", a.method.name())
        .config("dtp_k", a.dtp.dtp_k)
        .config("dtp_rate", format!("{:?}", a.dtp.dtp_rate))
        .seed("dtp", a.seed)
        .input("checkpoint", &a.ckpt)
        .input("hypotheses", &a.hyps)
        .output("scores", &a.out);
    m.finish(&manifest_path_for(&a.out))
}

pub(super) fn degrade(a: &DegradeArgs) -> Result<RunManifest> {
    let mut m = ManifestBuilder::new("degrade");
    let v = a.data.vocabs()?;
    let (corpus, corpus_path) = a.data.corpus(a.corpus.as_ref(), "test.tsv")?;
    let pairs: Vec<(Vec<String>, Vec<String>)> =
        corpus.pairs().iter().map(|p| (p.source.clone(), p.target.clone())).collect();
    let set = DegradedSet::build(&pairs, a.n, &a.ks, v.tgt.content_tokens(), a.seed)?;
    set.save(&a.out)?;
    a.data.record(&mut m, &v);
    m.config("n", a.n)
        .config("ks", a.ks.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
        .seed("degrade", a.seed)
        .input("corpus", &corpus_path)
        .output("degraded", &a.out);
    m.finish(&manifest_path_for(&a.out))
}

pub(super) fn evaluate(a: &EvaluateArgs) -> Result<RunManifest> {
    let mut m = ManifestBuilder::new("evaluate");
    if a.methods.is_empty() {
        return Err(Error::invalid("no methods requested"));
    }
    if a.methods.contains(&Method::Rtt) && a.backward_ckpt.is_none() {
        return Err(Error::invalid("method rtt requires --backward-ckpt"));
    }
    let v = a.data.vocabs()?;
    let ck = load_checked(&a.ckpt, &v.src, &v.tgt)?;
    let backward = load_backward(a.backward_ckpt.as_ref(), &v, &mut m)?;
    let set = DegradedSet::load(&a.set)?;
    if set.is_empty() {
        return Err(Error::Empty("degraded set"));
    }
    let items: Vec<Item> = set
        .items
        .iter()
        .map(|d| {
            let hyp_tokens = d.hyp_tokens();
            Item {
                id: d.id,
                src: v.src.lookup(&d.src_tokens()),
                hyp: v.tgt.lookup(&hyp_tokens),
                hyp_tokens,
                reference: Some(d.ref_tokens()),
            }
        })
        .collect();
    let mut oracle = ScoreSeries::new("oracle");
    for d in &set.items {
        oracle.insert(d.id, d.oracle_norm)?;
    }
    let scorer = Scorer { params: &ck.params, backward: backward.as_ref().map(|c| &c.params), beam: &a.beam, dtp: &a.dtp, seed: a.seed };
    let mut series = Vec::new();
    for &method in &a.methods {
        let mut s = ScoreSeries::new(method.name());
        for (item, score) in items.iter().zip(scorer.score(method, &items)?) {
            s.insert(item.id, score)?;
        }
        series.push(s);
    }
    let report = EvaluationReport::build(&series, &oracle, a.bins, a.drift_draws, a.seed)?;
    report.save(&a.out_json, &a.out_csv)?;
    for r in report.methods.iter().chain(&report.combinations) {
        let fmt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "undefined".into());
        println!("{}\tpearson={}\tspearman={}\tn={}", r.method, fmt(r.pearson), fmt(r.spearman), r.n);
    }
    a.data.record(&mut m, &v);
    a.beam.record(&mut m);
    m.config("methods", a.methods.iter().map(|x| x.name()).collect::<Vec<_>>().join(","))
        .config("bins", a.bins)
        .config("drift_draws", a.drift_draws)
        .config("dtp_k", a.dtp.dtp_k)
        .config("dtp_rate", format!("{:?}", a.dtp.dtp_rate))
        .seed("evaluate", a.seed)
        .input("checkpoint", &a.ckpt)
        .input("set", &a.set)
        .output("report_json", &a.out_json)
        .output("report_csv", &a.out_csv);
    m.finish(&manifest_path_for(&a.out_json))
}

pub(super) fn combine(a: &CombineArgs) -> Result<RunManifest> {
    let mut m = ManifestBuilder::new("combine");
    let ra = read_score_tsv(&a.a)?;
    let rb = read_score_tsv(&a.b)?;
    let series = |name: &str, rows: &[ScoreRow]| -> Result<ScoreSeries> {
        let mut s = ScoreSeries::new(name);
        for r in rows {
            s.insert(r.id, r.score)?;
        }
        Ok(s)
    };
    let combined = znorm_combine(&series("a", &ra)?, &series("b", &rb)?)?;
    let out: Vec<ScoreRow> = ra
        .iter()
        .filter_map(|r| combined.scores.get(&r.id).map(|&score| ScoreRow { score, ..r.clone() }))
        .collect();
    write_score_tsv(&out, &a.out)?;
    m.input("a", &a.a).input("b", &a.b).output("combined", &a.out);
    m.finish(&manifest_path_for(&a.out))
}

pub(super) fn sample_biased(a: &SampleArgs) -> Result<RunManifest> {
    let mut m = ManifestBuilder::new("sample-biased");
    let set = DegradedSet::load(&a.set)?;
    let oracle: Vec<f64> = set.items.iter().map(|d| d.oracle_norm).collect();
    let levels = levels_from_oracle(&oracle);
    let draws = quality_biased_sample(&levels, a.target, a.n, a.seed)?;
    let sample = DegradedSet { items: draws.iter().map(|&i| set.items[i].clone()).collect() };
    sample.save(&a.out)?;
    m.config("target", a.target)
        .config("n", a.n)
        .seed("sample", a.seed)
        .input("set", &a.set)
        .output("sample", &a.out);
    m.finish(&manifest_path_for(&a.out))
}
