use std::path::{Path, PathBuf};

use canmt::cli::{dispatch, RunManifest};
use canmt::eval::EvaluationReport;

const TINY: &[&str] = &[
    "--set", "model_dim=16", "--set", "heads=2", "--set", "ffn_dim=32", "--set", "layers_enc=1", "--set",
    "layers_dec=1", "--set", "layers_est=1",
];

fn run(args: &[&str]) -> i32 {
    dispatch(std::iter::once("canmt").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen_data(dir: &Path) -> PathBuf {
    let out = dir.join("data");
    let status = run(&[
        "gen-data", "--task", "copy", "--n", "300", "--test-n", "60", "--content-tokens", "10", "--min-len", "3",
        "--max-len", "6", "--seed", "3", "--out", p(&out),
    ]);
    assert_eq!(status, 0);
    out
}

fn train_tiny(data: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec!["train", "--data", p(data), "--out", p(out), "--max-steps", "12", "--checkpoint-every", "4"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    assert_eq!(run(&args), 0);
}

fn read_manifest(path: &Path) -> RunManifest {
    RunManifest::load(path).unwrap()
}

#[test]
fn gen_data_writes_corpus_vocab_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    for f in ["train.tsv", "test.tsv", "src.vocab", "tgt.vocab", "task.kv"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let m = read_manifest(&data.join("gen-data.manifest.json"));
    assert_eq!(m.command, "gen-data");
    assert_eq!(m.config["task"], "copy");
    assert_eq!(m.seeds["task"], 3);
    assert_eq!(m.outputs.len(), m.output_sha256.len());
    let train = std::fs::read_to_string(data.join("train.tsv")).unwrap();
    assert_eq!(train.lines().count(), 300);
    assert!(train.lines().all(|l| l.split('\t').count() == 2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["gen-data", "--no-such-flag"]), 2);
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(run(&[]), 2);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(run(&["degrade", "--data", p(&missing), "--out", p(&dir.path().join("x.tsv"))]), 1);
}

#[test]
fn reruns_are_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut hashes = Vec::new();
    for d in &dirs {
        let data = gen_data(d.path());
        let run_dir = d.path().join("run");
        train_tiny(&data, &run_dir, &[]);
        let set = d.path().join("deg.tsv");
        assert_eq!(run(&["degrade", "--data", p(&data), "--n", "30", "--out", p(&set)]), 0);
        let json = d.path().join("r.json");
        let csv = d.path().join("r.csv");
        assert_eq!(
            run(&[
                "evaluate", "--ckpt", p(&run_dir.join("last.ckpt")), "--data", p(&data), "--set", p(&set),
                "--methods", "canmt-q,tp,dtp", "--dtp-k", "3", "--bins", "3", "--drift-draws", "200",
                "--out-json", p(&json), "--out-csv", p(&csv),
            ]),
            0
        );
        hashes.push([
            read_manifest(&data.join("gen-data.manifest.json")).output_sha256,
            read_manifest(&run_dir.join("train.manifest.json")).output_sha256,
            read_manifest(&d.path().join("deg.tsv.manifest.json")).output_sha256,
            read_manifest(&d.path().join("r.json.manifest.json")).output_sha256,
        ]);
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn flags_override_config_file_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    let cfg = dir.path().join("train.kv");
    std::fs::write(&cfg, "# desk overrides\nmax_steps=5\nseed=9\nwarmup_steps=50\n").unwrap();
    let out = dir.path().join("run");
    let mut args = vec!["train", "--data", p(&data), "--out", p(&out), "--config", p(&cfg), "--max-steps", "3"];
    args.extend_from_slice(TINY);
    assert_eq!(run(&args), 0);
    let m = read_manifest(&out.join("train.manifest.json"));
    assert_eq!(m.config["max_steps"], "3");
    assert_eq!(m.config["seed"], "9");
    assert_eq!(m.config["warmup_steps"], "50");
    assert_eq!(m.config["max_tokens"], "1024");
    assert_eq!(m.config["model_dim"], "16");
    let curve = std::fs::read_to_string(out.join("loss.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("step,lr,loss_fwd,loss_rec"));
    assert_eq!(curve.lines().count(), 4);

    std::fs::write(&cfg, "max_step=5\n").unwrap();
    let mut bad = vec!["train", "--data", p(&data), "--out", p(&out), "--config", p(&cfg)];
    bad.extend_from_slice(TINY);
    assert_eq!(run(&bad), 1);
}

#[test]
fn averaging_copies_of_one_checkpoint_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    let out = dir.path().join("run");
    train_tiny(&data, &out, &[]);
    let last = out.join("last.ckpt");
    let avg = dir.path().join("avg.ckpt");
    assert_eq!(run(&["avg-checkpoints", p(&last), p(&last), p(&last), "--out", p(&avg)]), 0);
    assert_eq!(std::fs::read(&last).unwrap(), std::fs::read(&avg).unwrap());
    assert!(avg.with_file_name("avg.ckpt.manifest.json").exists());
}

#[test]
fn rtt_without_backward_checkpoint_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    let out = dir.path().join("run");
    train_tiny(&data, &out, &[]);
    let set = dir.path().join("deg.tsv");
    assert_eq!(run(&["degrade", "--data", p(&data), "--n", "20", "--out", p(&set)]), 0);
    let ckpt = out.join("last.ckpt");
    let status = run(&["evaluate", "--ckpt", p(&ckpt), "--data", p(&data), "--set", p(&set), "--methods", "canmt-q,rtt"]);
    assert_eq!(status, 1);
    let hyps = dir.path().join("h.tsv");
    assert_eq!(run(&["translate", "--ckpt", p(&ckpt), "--data", p(&data), "--out", p(&hyps)]), 0);
    assert_eq!(run(&["score", "--ckpt", p(&ckpt), "--data", p(&data), "--hyps", p(&hyps), "--method", "rtt"]), 1);
}

#[test]
fn vocabulary_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    let out = dir.path().join("run");
    train_tiny(&data, &out, &[]);
    let other = dir.path().join("other");
    let status = run(&[
        "gen-data", "--task", "cipher-reverse", "--n", "20", "--test-n", "20", "--content-tokens", "10", "--out",
        p(&other),
    ]);
    assert_eq!(status, 0);
    let hyps = dir.path().join("h.tsv");
    assert_eq!(run(&["translate", "--ckpt", p(&out.join("last.ckpt")), "--data", p(&other), "--out", p(&hyps)]), 1);
}

#[test]
fn unchanged_references_report_a_constant_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    let out = dir.path().join("run");
    train_tiny(&data, &out, &[]);
    let set = dir.path().join("k0.tsv");
    assert_eq!(run(&["degrade", "--data", p(&data), "--n", "25", "--ks", "0", "--out", p(&set)]), 0);
    let json = dir.path().join("k0.json");
    let status = run(&[
        "evaluate", "--ckpt", p(&out.join("last.ckpt")), "--data", p(&data), "--set", p(&set), "--methods",
        "canmt-q", "--out-json", p(&json), "--out-csv", p(&dir.path().join("k0.csv")),
    ]);
    assert_eq!(status, 0);
    let report = EvaluationReport::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let q = report.method("canmt-q").unwrap();
    assert_eq!(q.pearson, None);
    assert_eq!(q.spearman, None);
    assert_eq!(q.diagnostic.as_deref(), Some("correlation undefined: constant oracle"));
    assert!(report.drift.is_empty());
}

#[test]
fn full_evaluation_on_500_items_matches_the_report_contract() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    let fwd = dir.path().join("fwd");
    let bwd = dir.path().join("bwd");
    train_tiny(&data, &fwd, &[]);
    train_tiny(&data, &bwd, &["--reverse", "--objective", "translation-only", "--seed", "4"]);
    let set = dir.path().join("deg.tsv");
    assert_eq!(run(&["degrade", "--data", p(&data), "--n", "500", "--out", p(&set)]), 0);
    let json = dir.path().join("report.json");
    let csv = dir.path().join("report.csv");
    let status = run(&[
        "evaluate", "--ckpt", p(&fwd.join("last.ckpt")), "--backward-ckpt", p(&bwd.join("last.ckpt")), "--data",
        p(&data), "--set", p(&set), "--methods", "canmt-q,tp,dtp,rtt,sentbleu", "--dtp-k", "5", "--out-json",
        p(&json), "--out-csv", p(&csv),
    ]);
    assert_eq!(status, 0);
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let methods = value["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 5);
    for m in methods {
        assert!(m["method"].is_string());
        assert_eq!(m["n"], 500);
        for key in ["pearson", "spearman"] {
            let r = m[key].as_f64().unwrap();
            assert!((-1.0..=1.0).contains(&r));
        }
        let bins = m["bins"].as_array().unwrap();
        assert_eq!(bins.len(), 5);
        assert_eq!(bins.iter().map(|b| b["count"].as_u64().unwrap()).sum::<u64>(), 500);
        assert!(bins.iter().all(|b| b["mean_pred"].is_f64() && b["mean_oracle"].is_f64()));
    }
    assert_eq!(value["combinations"].as_array().unwrap().len(), 10);
    assert_eq!(value["drift"].as_array().unwrap().len(), 4);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 1 + 15 * 5);
    let sentbleu = value["methods"][4]["pearson"].as_f64().unwrap();
    assert!(sentbleu > 0.5, "sentence BLEU against references should track the oracle: {sentbleu}");
}

#[test]
fn score_combine_and_biased_sampling_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    let out = dir.path().join("run");
    train_tiny(&data, &out, &[]);
    let ckpt = out.join("last.ckpt");
    let hyps = dir.path().join("h.tsv");
    assert_eq!(run(&["translate", "--ckpt", p(&ckpt), "--data", p(&data), "--out", p(&hyps)]), 0);
    let tp = dir.path().join("tp.tsv");
    assert_eq!(run(&["score", "--ckpt", p(&ckpt), "--data", p(&data), "--hyps", p(&hyps), "--method", "tp", "--out", p(&tp)]), 0);
    let comb = dir.path().join("c.tsv");
    assert_eq!(run(&["combine", "--a", p(&hyps), "--b", p(&tp), "--out", p(&comb)]), 0);
    let rows = canmt::inference::read_score_tsv(&comb).unwrap();
    assert_eq!(rows.len(), 60);
    let mean: f64 = rows.iter().map(|r| r.score).sum::<f64>() / 60.0;
    assert!(mean.abs() < 1e-9);

    let set = dir.path().join("deg.tsv");
    assert_eq!(run(&["degrade", "--data", p(&data), "--n", "80", "--out", p(&set)]), 0);
    let biased = dir.path().join("b.tsv");
    assert_eq!(run(&["sample-biased", "--set", p(&set), "--target", "1", "--n", "400", "--out", p(&biased)]), 0);
    let low = canmt::data::DegradedSet::load(&biased).unwrap();
    let high_path = dir.path().join("b4.tsv");
    assert_eq!(run(&["sample-biased", "--set", p(&set), "--target", "4", "--n", "400", "--out", p(&high_path)]), 0);
    let high = canmt::data::DegradedSet::load(&high_path).unwrap();
    let mean_oracle = |s: &canmt::data::DegradedSet| s.items.iter().map(|d| d.oracle_norm).sum::<f64>() / s.len() as f64;
    assert_eq!(low.len(), 400);
    assert!(mean_oracle(&high) > mean_oracle(&low));
    assert_eq!(run(&["sample-biased", "--set", p(&set), "--target", "5"]), 1);
}
