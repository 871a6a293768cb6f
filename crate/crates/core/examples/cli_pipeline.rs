//! The command-line pipeline driven in-process: generate data, train, degrade
//! the test references, evaluate and translate. Uses a tiny model so the whole
//! run takes seconds; drop the `--set` overrides for the desk configuration.

use canmt::cli::dispatch;

fn run(args: &[&str]) {
    println!("$ canmt {}", args.join(" "));
    let status = dispatch(std::iter::once("canmt").chain(args.iter().copied()));
    assert_eq!(status, 0, "command failed");
}

fn main() {
    let dir = std::env::temp_dir().join("canmt-cli-pipeline");
    let path = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let (data, runs) = (path("data"), path("run"));

    run(&["gen-data", "--task", "copy", "--n", "1000", "--test-n", "100", "--content-tokens", "10", "--min-len", "3",
        "--max-len", "6", "--out", &data]);
    run(&["train", "--data", &data, "--out", &runs, "--max-steps", "60", "--checkpoint-every", "20", "--warmup-steps",
        "20", "--set", "model_dim=16", "--set", "heads=2", "--set", "ffn_dim=32", "--set", "layers_enc=1", "--set",
        "layers_dec=1", "--set", "layers_est=1"]);
    let ckpt = format!("{runs}/last.ckpt");
    let set = path("degraded.tsv");
    run(&["degrade", "--data", &data, "--n", "100", "--ks", "0,1,2,3", "--out", &set]);
    run(&["evaluate", "--ckpt", &ckpt, "--data", &data, "--set", &set, "--methods", "canmt-q,tp,sentbleu",
        "--out-json", &path("report.json"), "--out-csv", &path("report.csv")]);
    run(&["translate", "--ckpt", &ckpt, "--data", &data, "--input", &format!("{data}/test.tsv"), "--out",
        &path("translations.tsv")]);

    let translations = std::fs::read_to_string(path("translations.tsv")).unwrap();
    println!("first translations:");
    for line in translations.lines().take(4) {
        println!("  {line}");
    }
    println!("outputs and manifests are in {}", dir.display());
}
