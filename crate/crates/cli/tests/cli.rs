//! The `simplify` binary end to end on a tiny synthetic corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use simplify_core::eval::{evaluate, load_instances, BleuOptions, EvalReport};
use simplify_core::text::{load_sentences, sentence_ease};
use simplify_core::training::TrainLog;

const TINY: [&str; 3] = ["hidden=8", "attention_dim=8", "cnn_filters=4"];

fn simplify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simplify"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    simplify(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) -> PathBuf {
    let data = dir.join(format!("data-{seed}"));
    let out = simplify(&[
        "synth",
        "--out",
        s(&data),
        "--seed",
        seed,
        "simple_count=200",
        "complex_count=200",
        "parallel_count=30",
        "dev_count=8",
        "test_count=8",
        "heldout_simple_count=8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

fn train(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data", s(data), "--out", s(out), "init_steps=3", "adv_steps=3", "eval_every=2"];
    args.extend(TINY);
    args.extend(extra);
    simplify(&args)
}

#[test]
fn synth_is_seeded_and_separates_registers() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "5");
    let b = synth(&dir.path().join("again"), "5");
    let c = synth(dir.path(), "6");
    for f in ["simple.txt", "complex.txt", "parallel.tsv", "test.src", "synonyms.tsv", "embeddings.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("complex.txt")).unwrap(), fs::read(c.join("complex.txt")).unwrap());
    let mean_fe = |f: &str| {
        let v = load_sentences(&a.join(f)).unwrap();
        v.iter().map(|x| sentence_ease(x).unwrap()).sum::<f64>() / v.len() as f64
    };
    assert!(mean_fe("simple.txt") > mean_fe("complex.txt") + 50.0);
    assert_eq!(code(&["synth", "--out", s(&dir.path().join("x")), "nouns=0"]), 2);
}

#[test]
fn partition_writes_sets_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    fs::write(&input, "The cat sat.\nNotwithstanding considerable institutional opposition, comprehensive regulatory harmonization proceeded.\n\nIt is a mild day in the park.\n").unwrap();
    let out = dir.path().join("part");
    assert_eq!(code(&["partition", "--input", s(&input), "--out", s(&out)]), 0);
    assert_eq!(load_sentences(&out.join("simple.txt")).unwrap().len(), 2);
    assert_eq!(load_sentences(&out.join("complex.txt")).unwrap().len(), 1);
    let stats = fs::read_to_string(out.join("stats.tsv")).unwrap();
    assert_eq!(stats.lines().next().unwrap(), "set\tsentences\tavg_words\tavg_fe\tmin_fe\tmax_fe");
    assert!(stats.lines().nth(1).unwrap().starts_with("simple\t2\t"));
    assert_eq!(code(&["partition", "--input", s(&dir.path().join("missing.txt")), "--out", s(&out)]), 2);
    assert_eq!(code(&["partition", "--input", s(&input), "--out", s(&out), "complex_max=80"]), 2);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "1");
    let out = dir.path().join("run");
    assert_eq!(train(&data, &out, &["variant=UNTS-foo"]).status.code(), Some(2));
    assert_eq!(train(&data, &out, &["mode=annealed"]).status.code(), Some(2));
    assert_eq!(train(&data, &out, &["mode=semisupervised", "parallel=none"]).status.code(), Some(2));
    assert_eq!(train(&data, &out, &["learning_rate=0.1"]).status.code(), Some(2));
    assert_eq!(train(&data, &out, &["batch_size=0"]).status.code(), Some(2));
    assert_eq!(code(&["train", "--data", s(&dir.path().join("nowhere")), "--out", s(&out)]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn train_simplify_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "2");
    let run = dir.path().join("run");
    let out = train(&data, &run, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.txt", "train_log.jsonl", "state.ckpt", "model.ckpt", "selected.txt", "report.dev.txt", "report.test.txt"] {
        assert!(run.join(f).exists(), "{f}");
    }
    // the echoed config reproduces the run
    let again = dir.path().join("again");
    let out = simplify(&["train", "--data", s(&data), "--out", s(&again), "--config", s(&run.join("config.txt"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(run.join("model.ckpt")).unwrap(), fs::read(again.join("model.ckpt")).unwrap());

    let (src, pred, pred2) = (data.join("test.src"), dir.path().join("pred"), dir.path().join("pred2"));
    let model = run.join("model.ckpt");
    assert_eq!(code(&["simplify", "--model", s(&model), "--input", s(&src), "--output", s(&pred)]), 0);
    assert_eq!(code(&["simplify", "--model", s(&model), "--input", s(&src), "--output", s(&pred2)]), 0);
    let lines = |p: &Path| fs::read_to_string(p).unwrap().lines().count();
    assert_eq!(lines(&pred), lines(&src));
    assert_eq!(fs::read(&pred).unwrap(), fs::read(&pred2).unwrap());

    let refs = [data.join("test.ref.0"), data.join("test.ref.1")];
    let report = dir.path().join("report.txt");
    let args = ["evaluate", "--src", s(&src), "--pred", s(&pred), "--ref", s(&refs[0]), "--ref", s(&refs[1]), "--report", s(&report)];
    assert_eq!(code(&args), 0);
    let from_cli = EvalReport::read(&report).unwrap();
    let direct = evaluate(&load_instances(&src, &pred, &refs).unwrap(), BleuOptions::default()).unwrap();
    assert_eq!(from_cli, direct);
    assert_eq!(from_cli, EvalReport::read(&run.join("report.test.txt")).unwrap());

    let identity = dir.path().join("identity.txt");
    let args = ["evaluate", "--src", s(&src), "--pred", s(&src), "--ref", s(&refs[0]), "--report", s(&identity)];
    assert_eq!(code(&args), 0);
    assert_eq!(EvalReport::read(&identity).unwrap().word_diff, 0.0);

    let short = dir.path().join("short.txt");
    fs::write(&short, "one line\n").unwrap();
    let args = ["evaluate", "--src", s(&src), "--pred", s(&short), "--ref", s(&refs[0]), "--report", s(&identity)];
    assert_eq!(code(&args), 2);
}

#[test]
fn interrupted_training_resumes_identically() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "3");
    let (full, part) = (dir.path().join("full"), dir.path().join("part"));
    assert!(train(&data, &full, &["mode=semisupervised"]).status.success());
    let out = train(&data, &part, &["mode=semisupervised", "stop_after=3"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("stopped after step 3"));
    assert!(!part.join("model.ckpt").exists());
    let out = simplify(&["train", "--data", s(&data), "--out", s(&part), "--resume"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = TrainLog::read(&full.join("train_log.jsonl")).unwrap();
    let b = TrainLog::read(&part.join("train_log.jsonl")).unwrap();
    assert_eq!(a.loss_trace(), b.loss_trace());
    assert_eq!(a.word_diff_curve(), b.word_diff_curve());
    assert_eq!(fs::read(full.join("model.ckpt")).unwrap(), fs::read(part.join("model.ckpt")).unwrap());
}

fn updates_with(log: &TrainLog, update: &str, loss: &str) -> usize {
    log.loss_trace().iter().filter(|(_, u, n, _)| *u == update && *n == loss).count()
}

#[test]
fn mode_and_variant_dispatch() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "4");
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        assert!(train(&data, &out, extra).status.success());
        TrainLog::read(&out.join("train_log.jsonl")).unwrap()
    };
    let unsup = run("unsup", &[]);
    assert_eq!(updates_with(&unsup, "cross_simple", "L_cross_Gs"), 0);
    assert_eq!(updates_with(&unsup, "generator", "L_div_Gs"), 3);
    let semi = run("semi", &["mode=semisupervised"]);
    assert_eq!(updates_with(&semi, "cross_simple", "L_cross_Gs"), 3);
    assert_eq!(updates_with(&semi, "cross_complex", "L_cross_Gd"), 3);
    let div = run("div", &["variant=UNTS-div"]);
    assert_eq!(updates_with(&div, "generator", "L_div_Gs"), 0);
    assert_eq!(updates_with(&div, "generator", "L_adv_Gs"), 3);
    assert_eq!(updates_with(&div, "critic", "L_div_C"), 6);
    let adv = run("adv", &["variant=UNTS-adv"]);
    assert_eq!(updates_with(&adv, "generator", "L_adv_Gs"), 0);
    assert_eq!(updates_with(&adv, "critic", "L_adv_D"), 6);
}

#[test]
fn sweep_of_zero_pairs_is_unsupervised_training() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "5");
    let sweep = dir.path().join("sweep");
    let mut args = vec!["sweep", "--data", s(&data), "--out", s(&sweep), "--sizes", "0,10", "--seeds", "1", "init_steps=3", "adv_steps=3", "eval_every=2"];
    args.extend(TINY);
    let out = simplify(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(sweep.join("sweep.tsv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "pairs\truns\tSARI\tBLEU\tFE-diff\tword-diff");
    assert!(rows[1].starts_with("0\t1\t") && rows[2].starts_with("10\t1\t"));

    let plain = dir.path().join("plain");
    assert!(train(&data, &plain, &["seed=1"]).status.success());
    let a = TrainLog::read(&plain.join("train_log.jsonl")).unwrap();
    let b = TrainLog::read(&sweep.join("pairs-0/seed-1/train_log.jsonl")).unwrap();
    assert_eq!(a.loss_trace(), b.loss_trace());
    let c = TrainLog::read(&sweep.join("pairs-10/seed-1/train_log.jsonl")).unwrap();
    assert_eq!(updates_with(&c, "cross_simple", "L_cross_Gs"), 3);

    let mut too_many = args.clone();
    too_many[6] = "0,999";
    assert_eq!(simplify(&too_many).status.code(), Some(2));
}
