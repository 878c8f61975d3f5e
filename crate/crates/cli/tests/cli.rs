use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const WORDS: [&str; 10] = [
    "shalom", "olam", "sefer", "bayit", "yeled", "gadol", "katan", "derech", "mayim", "ir",
];

fn ocrsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocrsynth"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn clean_text(dir: &Path, lines: usize) -> std::path::PathBuf {
    let mut state = 7u64;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 33) as usize
    };
    let body: Vec<String> = (0..lines)
        .map(|_| {
            (0..6)
                .map(|_| WORDS[next() % WORDS.len()])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let path = dir.join("clean.txt");
    fs::write(&path, body.join("\n") + "\n").unwrap();
    path
}

/// Injects noise and returns the output directory holding noisy.txt and gold.txt.
fn synthetic(dir: &Path, lines: usize) -> std::path::PathBuf {
    let clean = clean_text(dir, lines);
    let out = dir.join("syn");
    let r = ocrsynth(&["inject", "--input", p(&clean), "--noise-ratio", "0.2", "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    out
}

#[test]
fn noise_ratio_outside_unit_interval_exits_2() {
    let dir = TempDir::new().unwrap();
    let clean = clean_text(dir.path(), 10);
    for nr in ["1.2", "0", "1"] {
        let r = ocrsynth(&[
            "inject",
            "--input",
            p(&clean),
            "--noise-ratio",
            nr,
            "--out",
            p(&dir.path().join("o")),
        ]);
        assert_eq!(code(&r), 2);
        assert!(stderr(&r).contains("0 < NR < 1"), "{}", stderr(&r));
    }
    assert!(!dir.path().join("o").exists());
}

#[test]
fn missing_input_is_named_and_exits_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.txt");
    let r = ocrsynth(&[
        "inject",
        "--input",
        p(&missing),
        "--noise-ratio",
        "0.1",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("absent.txt"));

    let r = ocrsynth(&[
        "profile",
        "--noisy",
        p(&missing),
        "--gold",
        p(&missing),
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&r), 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&ocrsynth(&["inject"])), 2);
    assert_eq!(code(&ocrsynth(&["no-such-command"])), 2);
}

#[test]
fn inject_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let syn = synthetic(dir.path(), 300);
    let again = dir.path().join("again");
    let clean = dir.path().join("clean.txt");
    let r = ocrsynth(&[
        "inject",
        "--input",
        p(&clean),
        "--noise-ratio",
        "0.2",
        "--out",
        p(&again),
    ]);
    assert_eq!(code(&r), 0);
    assert_eq!(
        fs::read(syn.join("noisy.txt")).unwrap(),
        fs::read(again.join("noisy.txt")).unwrap()
    );
    assert_eq!(fs::read(&clean).unwrap(), fs::read(syn.join("gold.txt")).unwrap());

    let other = dir.path().join("other");
    let r = ocrsynth(&[
        "inject",
        "--seed",
        "5",
        "--input",
        p(&clean),
        "--noise-ratio",
        "0.2",
        "--out",
        p(&other),
    ]);
    assert_eq!(code(&r), 0);
    assert_ne!(
        fs::read(syn.join("noisy.txt")).unwrap(),
        fs::read(other.join("noisy.txt")).unwrap()
    );
}

#[test]
fn profile_writes_tables() {
    let dir = TempDir::new().unwrap();
    let syn = synthetic(dir.path(), 500);
    let out = dir.path().join("prof");
    let r = ocrsynth(&[
        "--no-timestamp",
        "profile",
        "--noisy",
        p(&syn.join("noisy.txt")),
        "--gold",
        p(&syn.join("gold.txt")),
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(String::from_utf8_lossy(&r.stdout).starts_with("Error char"));
    assert!(out.join("profile.tsv").is_file());
    let types = fs::read_to_string(out.join("error_types.tsv")).unwrap();
    assert!(!types.contains("generated"));
}

#[test]
fn evaluate_rejects_length_mismatch() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    fs::write(&a, "one\ntwo\n").unwrap();
    fs::write(&b, "one\n").unwrap();
    let r = ocrsynth(&["evaluate", "--gold", p(&a), "--ocred", p(&a), "--fixed", p(&b)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("mismatch"));
}

#[test]
fn identity_model_reproduces_input_bytes() {
    let dir = TempDir::new().unwrap();
    let syn = synthetic(dir.path(), 200);
    let model = dir.path().join("model");
    let r = ocrsynth(&[
        "train",
        "--noisy",
        p(&syn.join("noisy.txt")),
        "--gold",
        p(&syn.join("gold.txt")),
        "--beam-width",
        "1",
        "--max-edits",
        "0",
        "--out",
        p(&model),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let fixed = dir.path().join("fixed.txt");
    let input = syn.join("noisy.txt");
    let r = ocrsynth(&[
        "correct",
        "--model",
        p(&model),
        "--input",
        p(&input),
        "--out",
        p(&fixed),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(fs::read(&input).unwrap(), fs::read(&fixed).unwrap());
}

#[test]
fn trained_model_improves_on_noisy_text() {
    let dir = TempDir::new().unwrap();
    let syn = synthetic(dir.path(), 1500);
    let model = dir.path().join("model");
    let r = ocrsynth(&[
        "train",
        "--noisy",
        p(&syn.join("noisy.txt")),
        "--gold",
        p(&syn.join("gold.txt")),
        "--out",
        p(&model),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let fixed = dir.path().join("fixed.txt");
    let r = ocrsynth(&[
        "correct",
        "--model",
        p(&model),
        "--input",
        p(&syn.join("noisy.txt")),
        "--out",
        p(&fixed),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let report = dir.path().join("report.tsv");
    let r = ocrsynth(&[
        "evaluate",
        "--gold",
        p(&syn.join("gold.txt")),
        "--ocred",
        p(&syn.join("noisy.txt")),
        "--fixed",
        p(&fixed),
        "--out",
        p(&report),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let tsv = fs::read_to_string(report).unwrap();
    let row = tsv.lines().find(|l| l.starts_with("corrector\t")).unwrap();
    let acc: f64 = row.split('\t').nth(1).unwrap().parse().unwrap();
    assert!(acc > 0.0, "Acc_Char {acc}");
}

#[test]
fn empty_corpus_exits_2() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.tsv");
    fs::write(&empty, "").unwrap();
    let r = ocrsynth(&["train", "--tsv", p(&empty), "--out", p(&dir.path().join("m"))]);
    assert_eq!(code(&r), 2, "{}", stderr(&r));
}

const STUB: &str = r#"import json, sys
c = json.load(sys.stdin)["config"]
best = {"layers": 4, "layer_type": "lstm", "bidirectional": "yes", "dropout": 0.35,
        "units": 1000, "batch_size": 64, "epoch_size": 250000}
s = sum(0.1 for k, v in best.items() if c[k] == v)
print(json.dumps({"status": "ok", "validation_accuracy": s}))
"#;

fn optimize_stub(dir: &Path, script: &str, extra: &[&str]) -> Output {
    let stub = dir.join("stub.py");
    fs::write(&stub, script).unwrap();
    let tsv = dir.join("data.tsv");
    fs::write(&tsv, "a\tb\n").unwrap();
    let evaluator = format!("python3 {}", p(&stub));
    let out = dir.join("opt");
    let mut args = vec![
        "--no-timestamp",
        "optimize",
        "--space",
        "recurrent",
        "--evaluator",
        &evaluator,
        "--train",
        p(&tsv),
        "--valid",
        p(&tsv),
        "--out",
        p(&out),
    ];
    args.extend_from_slice(extra);
    ocrsynth(&args)
}

#[test]
fn optimize_finds_argmax_of_separable_stub() {
    let dir = TempDir::new().unwrap();
    let r = optimize_stub(dir.path(), STUB, &[]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let best = fs::read_to_string(dir.path().join("opt/best.txt")).unwrap();
    for line in [
        "layers = 4",
        "layer_type = lstm",
        "bidirectional = yes",
        "dropout = 0.35",
        "units = 1000",
        "batch_size = 64",
        "epoch_size = 250000",
    ] {
        assert!(best.lines().any(|l| l == line), "{line} missing from\n{best}");
    }
    let log = fs::read_to_string(dir.path().join("opt/trials.jsonl")).unwrap();
    assert!(log.lines().count() <= 22);

    // same run again must produce identical reports
    let first = (best, log);
    let again = TempDir::new().unwrap();
    let r = optimize_stub(again.path(), STUB, &[]);
    assert_eq!(code(&r), 0);
    let second = (
        fs::read_to_string(again.path().join("opt/best.txt")).unwrap(),
        fs::read_to_string(again.path().join("opt/trials.jsonl")).unwrap(),
    );
    assert_eq!(first, second);
}

#[test]
fn optimize_resume_skips_logged_trials() {
    let dir = TempDir::new().unwrap();
    let r = optimize_stub(dir.path(), STUB, &[]);
    assert_eq!(code(&r), 0);
    let before = fs::read_to_string(dir.path().join("opt/trials.jsonl")).unwrap();
    let r = optimize_stub(dir.path(), "raise SystemExit(1)\n", &["--resume"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(before, fs::read_to_string(dir.path().join("opt/trials.jsonl")).unwrap());
}

#[test]
fn garbage_evaluator_output_exits_3() {
    let dir = TempDir::new().unwrap();
    let r = optimize_stub(dir.path(), "import sys\nsys.stdin.read()\nprint('not json')\n", &[]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));
}

#[test]
fn evaluator_reporting_errors_fails_search() {
    let dir = TempDir::new().unwrap();
    let script = "import sys, json\nsys.stdin.read()\nprint(json.dumps({'status': 'error', 'message': 'oom'}))\n";
    let r = optimize_stub(dir.path(), script, &[]);
    assert_eq!(code(&r), 1, "{}", stderr(&r));
    assert!(stderr(&r).contains("oom"));
}

#[test]
fn builtin_evaluator_rejects_foreign_space() {
    let dir = TempDir::new().unwrap();
    let tsv = dir.path().join("d.tsv");
    fs::write(&tsv, "a\tb\n").unwrap();
    let r = ocrsynth(&[
        "optimize",
        "--space",
        "recurrent",
        "--train",
        p(&tsv),
        "--valid",
        p(&tsv),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&r), 2, "{}", stderr(&r));
}

#[test]
fn builtin_search_stays_within_budget() {
    let dir = TempDir::new().unwrap();
    let syn = synthetic(dir.path(), 400);
    let noisy = fs::read_to_string(syn.join("noisy.txt")).unwrap();
    let gold = fs::read_to_string(syn.join("gold.txt")).unwrap();
    let rows: Vec<String> = noisy
        .lines()
        .zip(gold.lines())
        .map(|(n, g)| format!("{n}\t{g}"))
        .collect();
    let (train, valid) = (dir.path().join("train.tsv"), dir.path().join("valid.tsv"));
    fs::write(&train, rows[..300].join("\n")).unwrap();
    fs::write(&valid, rows[300..].join("\n")).unwrap();
    let out = dir.path().join("opt");
    let r = ocrsynth(&["optimize", "--train", p(&train), "--valid", p(&valid), "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let trials = fs::read_to_string(out.join("trials.jsonl")).unwrap().lines().count();
    // 4 + 4 + 2 + 4 + 3 declared values
    assert!((5..=17).contains(&trials), "{trials} trials");
    assert!(String::from_utf8_lossy(&r.stdout).contains("full grid 384 configurations"));
}
