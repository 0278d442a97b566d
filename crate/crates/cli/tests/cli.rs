use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn abx(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abx"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = abx(args, cwd);
    assert!(
        out.status.success(),
        "abx {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path) {
    ok(
        &[
            "synth", "--out", "data", "--languages", "de,en,fr", "--meanings", "12", "--dim", "12",
            "--layers", "0,1", "--checkpoints", "10,20,30",
        ],
        dir,
    );
}

#[test]
fn score_retrieve_report_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let summary = ok(&["ingest", "--corpus", "data/corpus.jsonl", "--out", "index.json"], d);
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["n_meanings"], 12);

    ok(
        &[
            "score", "--store", "data/store/manifest.json", "--corpus-index", "index.json", "--mode", "ld,md",
            "--n-triplets", "500", "--seed", "5", "--exclude-checkpoints", "20", "--out", "scores.csv",
            "--dump-triplets", "dump",
        ],
        d,
    );
    let scores = fs::read_to_string(d.join("scores.csv")).unwrap();
    let mut lines = scores.lines();
    assert_eq!(
        lines.next().unwrap(),
        "mode,lang1,lang2,layer,checkpoint,score,n_triplets,tie_count,seed"
    );
    // 2 modes x 3 pairs x 2 checkpoints x 2 layers
    assert_eq!(lines.clone().count(), 24);
    assert!(lines.all(|l| l.split(',').nth(4) != Some("20")));
    let dumps = fs::read_dir(d.join("dump")).unwrap().count();
    assert_eq!(dumps, 24);

    ok(
        &[
            "retrieve", "--store", "data/store/manifest.json", "--corpus-index", "index.json", "--layer", "last",
            "--pairs", "en-fr", "--out", "ret.csv",
        ],
        d,
    );
    let ret = fs::read_to_string(d.join("ret.csv")).unwrap();
    assert_eq!(ret.lines().count(), 4);
    assert!(ret.lines().nth(1).unwrap().starts_with("en,fr,1,10,"));

    let listed = ok(&["report", "--records", "scores.csv", "--figures", "all", "--out", "figs"], d);
    assert_eq!(listed.lines().count(), 6);
    assert!(d.join("figs/figures_schema.json").exists());
}

#[test]
fn run_is_identical_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    fs::write(
        d.join("run.conf"),
        "store = data/store/manifest.json\ncorpus = data/corpus.jsonl\nn_triplets = 800\nseed = 11\nout = out1\n",
    )
    .unwrap();
    ok(&["run", "--config", "run.conf", "--jobs", "1"], d);
    ok(&["run", "--config", "run.conf", "--jobs", "4", "--set", "out=out4"], d);
    for f in ["scores.csv", "directions.csv", "scores_layer_avg.csv", "global_scores.csv", "retrieval.csv"] {
        assert_eq!(
            fs::read(d.join("out1").join(f)).unwrap(),
            fs::read(d.join("out4").join(f)).unwrap(),
            "{f} differs"
        );
    }
    let errors = fs::read_to_string(d.join("out1/errors.json")).unwrap();
    assert_eq!(errors.trim(), "[]");
}

#[test]
fn dry_run_lists_cells_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let plan = ok(
        &[
            "run", "--dry-run", "--set", "store=data/store/manifest.json", "--set", "corpus=data/corpus.jsonl",
            "--set", "out=never", "--set", "modes=ld,baseline-ld", "--set", "exclude_checkpoints=30",
        ],
        d,
    );
    let v: serde_json::Value = serde_json::from_str(&plan).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 2 * 3 * 2 * 2);
    assert_eq!(v["final_checkpoint"], 20);
    assert!(!d.join("never").exists());
}

#[test]
fn analysis_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    fs::write(
        d.join("run.conf"),
        "store = data/store/manifest.json\ncorpus = data/corpus.jsonl\nn_triplets = 400\nout = out\n",
    )
    .unwrap();
    ok(&["run", "--config", "run.conf"], d);
    let mut acc = String::from("language,checkpoint,accuracy\n");
    let mut transfer = String::from("source,target,accuracy\n");
    for (i, l) in ["de", "en", "fr"].iter().enumerate() {
        for (j, c) in [10, 20, 30].iter().enumerate() {
            acc += &format!("{l},{c},{}\n", 0.5 + 0.1 * i as f64 - 0.02 * j as f64);
        }
        for (j, t) in ["de", "en", "fr"].iter().enumerate() {
            if i != j {
                transfer += &format!("{l},{t},{}\n", 0.4 + 0.1 * i as f64);
            }
        }
    }
    fs::write(d.join("acc.csv"), acc).unwrap();
    fs::write(d.join("transfer.csv"), transfer).unwrap();

    let sel: serde_json::Value = serde_json::from_str(&ok(
        &["select-checkpoint", "--ld", "out/global_scores.csv", "--accuracy", "acc.csv", "--exclude", "30"],
        d,
    ))
    .unwrap();
    assert_eq!(sel["n_languages"], 3);
    for s in sel["selections"].as_array().unwrap() {
        assert_eq!(s["final_checkpoint"], 20);
        assert_ne!(s["abx_checkpoint"], 30);
    }

    let src: serde_json::Value = serde_json::from_str(&ok(
        &[
            "select-source", "--ld", "out/scores_layer_avg.csv", "--transfer", "transfer.csv", "--checkpoint", "30",
            "--top-k", "1,2",
        ],
        d,
    ))
    .unwrap();
    assert_eq!(src["n_targets"], 3);
    assert_eq!(src["top_k_matches"]["2"], 3);

    let mixed = abx(
        &["select-source", "--ld", "out/scores_layer_avg.csv", "--transfer", "transfer.csv"],
        d,
    );
    assert!(!mixed.status.success());
    assert!(String::from_utf8_lossy(&mixed.stderr).contains("checkpoint"));

    let corr: serde_json::Value = serde_json::from_str(&ok(
        &[
            "correlate", "--x", "out/scores_layer_avg.csv:score", "--x-where", "mode=ld", "--y",
            "out/scores_layer_avg.csv:score", "--y-where", "mode=md", "--on", "lang1,lang2,checkpoint",
        ],
        d,
    ))
    .unwrap();
    assert_eq!(corr["all"]["pearson"]["n"], 9);
}

#[test]
fn missing_store_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let out = abx(
        &["score", "--store", "nope.json", "--corpus-index", "nope.jsonl", "--out", "s.csv"],
        tmp.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}
