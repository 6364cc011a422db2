use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ldp_cli::manifest::RunManifest;

const FAST: &str = r#"
[corpus]
preset = "tiny"

[train.sft]
epochs = 3
batch_size = 4

[train.dpo]
epochs = 1

[eval]
split = "train"
"#;

fn ldp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldp")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: String,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = root.join("fast.toml");
        fs::write(&config, FAST).unwrap();
        Self { _dir: dir, root, config: config.display().to_string() }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).display().to_string()
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut all = vec!["--config", &self.config];
        all.extend_from_slice(args);
        ldp(&all)
    }

    fn prep(&self, name: &str) -> String {
        let out = self.path(name);
        let o = self.run(&["prep", "--out", &out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        out
    }
}

#[test]
fn prep_train_eval_round_trip_is_deterministic() {
    let f = Fixture::new();
    let corpus = f.prep("corpus");
    let again = f.prep("corpus-again");
    assert_eq!(manifest(Path::new(&corpus)).outputs, manifest(Path::new(&again)).outputs);
    let reseeded = f.path("corpus-seed");
    assert_eq!(code(&f.run(&["--seed", "9", "prep", "--out", &reseeded])), 0);
    assert_ne!(manifest(Path::new(&corpus)).outputs, manifest(Path::new(&reseeded)).outputs);

    let mut digests = Vec::new();
    for name in ["sft-a", "sft-b"] {
        let out = f.path(name);
        let o = f.run(&["train", "--phase", "sft", "--corpus", &corpus, "--out", &out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let m = manifest(Path::new(&out));
        for file in ["model.ckpt", "adapter.ckpt", "loss_trace.tsv"] {
            assert!(m.outputs.contains_key(file), "{file} missing");
        }
        assert!(fs::read_to_string(Path::new(&out).join("loss_trace.tsv")).unwrap().starts_with("# schema: ldp.loss_trace/v1"));
        digests.push(m.outputs);
    }
    assert_eq!(digests[0], digests[1]);

    let ckpt = Path::new(&f.path("sft-a")).join("adapter.ckpt").display().to_string();
    let mut reports = Vec::new();
    for name in ["eval-a", "eval-b"] {
        let out = f.path(name);
        let o = f.run(&["eval", "--checkpoint", &ckpt, "--corpus", &corpus, "--out", &out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).contains("BLEU-1\tBLEU-2"));
        reports.push(fs::read(Path::new(&out).join("report.tsv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let tsv = String::from_utf8(reports[0].clone()).unwrap();
    assert!(tsv.starts_with("# schema: ldp.metric_report/v1\n"));
    assert!(tsv.trim_end().ends_with("\t-"), "PS should be absent: {tsv}");
}

#[test]
fn dpo_needs_a_reference_and_runs_with_one() {
    let f = Fixture::new();
    let corpus = f.prep("corpus");
    let o = f.run(&["train", "--phase", "dpo", "--corpus", &corpus, "--out", &f.path("dpo")]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("reference"));

    let sft = f.path("sft");
    assert_eq!(code(&f.run(&["train", "--phase", "sft", "--corpus", &corpus, "--out", &sft])), 0);
    let reference = Path::new(&sft).join("model.ckpt").display().to_string();
    let out = f.path("dpo");
    let o = f.run(&["train", "--phase", "dpo", "--corpus", &corpus, "--reference", &reference, "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(Path::new(&out));
    assert!((m.metrics["first_loss"].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    assert!(m.outputs.contains_key("prefs.jsonl"));
    assert!(m.inputs.keys().any(|k| k.ends_with("model.ckpt")));
}

#[test]
fn eval_fills_ps_from_sheets_only_when_rows_exist() {
    let f = Fixture::new();
    let corpus = f.prep("corpus");
    let sft = f.path("sft");
    assert_eq!(code(&f.run(&["train", "--phase", "sft", "--corpus", &corpus, "--out", &sft])), 0);
    let ckpt = Path::new(&sft).join("model.ckpt").display().to_string();

    let empty = f.path("empty.tsv");
    fs::write(&empty, "# schema: ldp.scores/v1\nrater\tgroup\tcase\tclinical_accuracy\tfactual_completeness\tterminology\tclinical_usability\n").unwrap();
    let out = f.path("eval-empty");
    let o = f.run(&["eval", "--checkpoint", &ckpt, "--corpus", &corpus, "--sheets", &empty, "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).trim_end().ends_with("\t-"));

    let tab4 = concat!(env!("CARGO_MANIFEST_DIR"), "/../metrics/tests/fixtures/tab4.tsv");
    let out = f.path("eval-ps");
    let o = f.run(&["eval", "--checkpoint", &ckpt, "--corpus", &corpus, "--sheets", tab4, "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).trim_end().ends_with("\t7.2000"), "{}", stdout(&o));
}

#[test]
fn score_reports_table_and_kappa() {
    let tab4 = concat!(env!("CARGO_MANIFEST_DIR"), "/../metrics/tests/fixtures/tab4.tsv");
    let o = ldp(&["score", "--sheets", tab4]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("\t7.2\t7.1667"), "{text}");
    assert!(text.contains("note: Tongren is the average of 3 individual raters"), "{text}");
    assert!(text.contains("kappa (Fleiss)"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tsv");
    let mut lines: Vec<String> = fs::read_to_string(tab4).unwrap().lines().map(String::from).collect();
    let idx = lines.iter().position(|l| !l.starts_with('#') && !l.starts_with("rater")).unwrap() + 2;
    lines[idx] = format!("{}\textra", lines[idx]);
    fs::write(&bad, lines.join("\n")).unwrap();
    let o = ldp(&["score", "--sheets", &bad.display().to_string()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains(&format!("line {}", idx + 1)), "{}", stderr(&o));
}

#[test]
fn efficiency_prints_percent_and_reduction() {
    let o = ldp(&["efficiency", "--base-params", "7e9", "--trainable", "8.4e6"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("0.12%") && text.contains("833.3x"), "{text}");
    assert!(text.contains("micro r=8\t8192\t"), "{text}");
    assert!(text.contains("micro r=16\t16384\t"), "{text}");
    assert_eq!(code(&ldp(&["efficiency", "--base-params", "0", "--trainable", "1"])), 2);
}

#[test]
fn ablation_needs_two_variants_and_emits_rows() {
    let f = Fixture::new();
    let corpus = f.prep("corpus");
    let o = f.run(&["ablate", "--corpus", &corpus, "--out", &f.path("one"), "--ranks", "8"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let out = f.path("phases");
    let o = f.run(&["ablate", "--corpus", &corpus, "--out", &out, "--phases", "sft,sft+dpo,sft+simpo,sft+orpo"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(Path::new(&out).join("ablation.tsv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(2).collect();
    assert_eq!(rows.len(), 4, "{table}");
    for (row, name) in rows.iter().zip(["sft", "sft+dpo", "sft+simpo", "sft+orpo"]) {
        assert!(row.starts_with(&format!("{name}\t8192\t")), "{row}");
    }
    let m = manifest(Path::new(&out));
    assert_eq!(m.metrics.as_array().unwrap().len(), 4);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model]\nwidth = 3\n").unwrap();
    let o = ldp(&["--config", &cfg.display().to_string(), "prep", "--out", &dir.path().join("x").display().to_string()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let frames = dir.path().join("frames.jsonl");
    let spans = dir.path().join("spans.jsonl");
    fs::write(&frames, "# schema: ldp.frames/v1\n").unwrap();
    fs::write(&spans, "# schema: ldp.spans/v1\n").unwrap();
    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "[corpus]\nframes = \"frames.jsonl\"\nspans = \"spans.jsonl\"\n").unwrap();
    let o = ldp(&["--config", &empty.display().to_string(), "prep", "--out", &dir.path().join("y").display().to_string()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    let o = ldp(&["train", "--phase", "sft", "--corpus", &dir.path().join("nowhere").display().to_string(), "--out",
        &dir.path().join("z").display().to_string()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("pairs.jsonl"));

    let junk = dir.path().join("junk.ckpt");
    fs::write(&junk, b"not a checkpoint").unwrap();
    let f = Fixture::new();
    let corpus = f.prep("corpus");
    let o = f.run(&["eval", "--checkpoint", &junk.display().to_string(), "--corpus", &corpus, "--out", &f.path("e")]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    assert_eq!(code(&ldp(&["train", "--phase", "ppo", "--corpus", "c", "--out", "o"])), 2);
}
