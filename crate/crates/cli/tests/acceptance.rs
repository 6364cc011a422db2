//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the summary lines always reach the
//! console. A panic inside a criterion counts as a failure.

#[path = "../../metrics/tests/oracle/mod.rs"]
mod oracle;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ldp_cli::commands::{self, Axis, TrainArgs};
use ldp_cli::data::PreparedCorpus;
use ldp_cli::manifest::{Recorder, RunManifest};
use ldp_cli::session::Session;
use ldp_cli::PipelineConfig;
use ldp_core::alignment::{
    dpo_loss, dpo_loss_on, orpo_loss_on, reference_logprobs, sampled_grad_check, sft_loss_on, simpo_loss_on, Example,
    FeatureCache, Phase, PreferencePair,
};
use ldp_core::lora::{self, trainable_param_count};
use ldp_core::{Fwd, LoraConfig, MicroModel, ModelConfig, Proj, Scope};
use ldp_dataprep::io::SplitManifest;
use ldp_dataprep::{
    run_pipeline, split_indices, Fate, Frame, FrameSequence, PatchGrid, Payload, PolypType, PrepConfig,
    SamplingConfig, SentenceSpan, SplitConfig, VideoReport,
};
use ldp_metrics::clinical::{cohen_kappa, multi_rater_kappa, KappaConfig};
use ldp_metrics::{bleu, cider, lcs_len, meteor_lite, rouge_l, TokenizedCorpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

struct Ctx {
    _dir: tempfile::TempDir,
    root: PathBuf,
    /// Tiny corpus prepared with [`tiny_config`].
    tiny: PathBuf,
}

impl Ctx {
    fn dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

/// Tiny synthetic corpus, trained and scored on all 8 pairs with 200 full-batch steps.
fn tiny_config() -> PipelineConfig {
    PipelineConfig::from_toml(
        r#"
[corpus]
preset = "tiny"

[train]
split = "all"

[train.sft]
lr = 1e-2
batch_size = 8
epochs = 200
clip_norm = 0

[eval]
split = "all"
"#,
    )
    .expect("tiny config")
}

fn default_config() -> PipelineConfig {
    PipelineConfig::from_toml("[corpus]\npreset = \"default\"\n[train.dpo]\nepochs = 3\n").expect("default config")
}

fn tiny_session(ctx: &Ctx) -> std::result::Result<(Session, Vec<Example>, Vec<PreferencePair>), String> {
    let cfg = tiny_config();
    let mut rec = ok(Recorder::new("scratch", &cfg, &ctx.dir("scratch")))?;
    let corpus = ok(PreparedCorpus::load(&ctx.tiny, &mut rec))?;
    let pairs = corpus.select(&corpus.indices(cfg.train.split));
    let tok = ok(ldp_cli::data::build_tokenizer(&pairs, cfg.model.vocab_size))?;
    let s = ok(Session::fresh(&cfg, &cfg.lora_config(), tok))?;
    let ex = ok(s.examples(&cfg, &pairs))?;
    let prefs = ok(s.preference_pairs(&cfg, &ex))?.pairs;
    Ok((s, ex, prefs))
}

fn perturb_lora_b(model: &mut MicroModel, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = model.params().iter().filter(|(_, n, _)| n.ends_with(".lora_b")).map(|(id, _, _)| id).collect();
    for id in ids {
        for v in model.params_mut().get_mut(id).data_mut() {
            *v = rng.random_range(-0.05..0.05);
        }
    }
}

fn a1_gradients(ctx: &Ctx) -> Check {
    let (s, ex, prefs) = tiny_session(ctx)?;
    let reference = s.model.clone();
    let mut m = s.model;
    perturb_lora_b(&mut m, 1);
    let batch: Vec<&Example> = ex.iter().take(2).collect();
    let pb: Vec<&PreferencePair> = prefs.iter().take(2).collect();
    let refs = ok(reference_logprobs(&reference, &pb))?;
    let cache = FeatureCache::default();
    type LossFn<'a> = Box<dyn Fn(&MicroModel, &mut Fwd) -> ldp_core::Result<ldp_core::autodiff::Var> + 'a>;
    let losses: Vec<(&str, LossFn)> = vec![
        ("sft", Box::new(|m: &MicroModel, f: &mut Fwd| sft_loss_on(m, f, &cache, &batch))),
        ("dpo", Box::new(|m: &MicroModel, f: &mut Fwd| dpo_loss_on(m, f, &cache, &pb, &refs, 0.1))),
        ("simpo", Box::new(|m: &MicroModel, f: &mut Fwd| simpo_loss_on(m, f, &cache, &pb, 2.0, 0.5))),
        ("orpo", Box::new(|m: &MicroModel, f: &mut Fwd| orpo_loss_on(m, f, &cache, &pb, 0.25).map(|(l, _)| l))),
    ];
    let mut parts = Vec::new();
    for (name, loss) in &losses {
        let r = ok(sampled_grad_check(&mut m, loss, 50, 1e-5, 7))?;
        ensure!(r.checked >= 50, "{name}: only {} coordinates checked", r.checked);
        ensure!(r.max_rel_error < 1e-4, "{name}: max relative error {:.2e}", r.max_rel_error);
        parts.push(format!("{name} {:.1e}", r.max_rel_error));
    }
    Ok(format!("50 adapter coords each, max rel err: {}", parts.join(", ")))
}

fn a2_lora(ctx: &Ctx) -> Check {
    let cfg = tiny_config();
    let (mut s, ex, prefs) = tiny_session(ctx)?;
    let base = ok(MicroModel::new(cfg.model_config()))?;
    let img = &ex[0].context.patches;
    let toks = [1, 300, 301, 302];
    let same = ok(base.forward(img, &toks))?.bit_eq(&ok(s.model.forward(img, &toks))?);
    ensure!(same, "adapted forward differs from base before training");

    let base_ids = s.model.base_param_ids();
    let frozen: Vec<_> = base_ids.iter().map(|&id| s.model.params().get(id).clone()).collect();
    let short = PipelineConfig {
        train: ldp_cli::config::TrainSection {
            sft: ldp_cli::config::PhaseOverrides { epochs: Some(20), ..cfg.train.sft.clone() },
            dpo: ldp_cli::config::PhaseOverrides { epochs: Some(5), batch_size: Some(4), ..Default::default() },
            ..cfg.train.clone()
        },
        ..cfg.clone()
    };
    ok(s.sft(&short, &ex))?;
    let snapshot = s.model.clone();
    ok(s.align(&short, Phase::Dpo, &prefs, Some(&snapshot)))?;
    for (id, t) in base_ids.iter().zip(&frozen) {
        ensure!(s.model.params().get(*id).bit_eq(t), "base weight {} moved", s.model.params().name(*id));
    }
    let moved = s.model.params().trainable().iter().any(|&id| s.model.params().get(id) != snapshot.params().get(id));
    ensure!(moved, "DPO did not update the adapters");

    let merged = ok(lora::merge_and_unload(&s.model))?;
    let mut gap: f64 = 0.0;
    for e in &ex {
        let mut t = e.context.prompt.clone();
        t.extend(&e.target);
        t.pop();
        let a = ok(s.model.forward(&e.context.patches, &t))?;
        let b = ok(merged.forward(&e.context.patches, &t))?;
        gap = gap.max(ok(a.max_abs_diff(&b))?);
    }
    ensure!(gap < 1e-10, "merged vs adapted logit gap {gap:.2e}");
    Ok(format!("bitwise transparent, base frozen through SFT+DPO, merge gap {gap:.1e}"))
}

fn manifest(dir: &Path) -> std::result::Result<RunManifest, String> {
    let text = ok(fs::read_to_string(dir.join("manifest.json")))?;
    ok(serde_json::from_str(&text))
}

fn a3_sft(ctx: &Ctx) -> Check {
    let cfg = tiny_config();
    let run = |name: &str| -> std::result::Result<(RunManifest, RunManifest), String> {
        let out = ctx.dir(name);
        let args = TrainArgs { phase: Phase::Sft, corpus: &ctx.tiny, init: None, reference: None, out: &out };
        let t = ok(commands::train(&cfg, &args))?;
        let e = ok(commands::eval(&cfg, &out.join("model.ckpt"), &ctx.tiny, None, &ctx.dir(&format!("{name}-eval"))))?;
        Ok((t, e))
    };
    let (t1, e1) = run("a3-sft-1")?;
    let steps = t1.metrics["steps"].as_u64().unwrap_or(0);
    let ce = t1.metrics["final_loss"].as_f64().unwrap_or(f64::NAN);
    let b1 = e1.metrics["report"]["bleu"][0].as_f64().unwrap_or(f64::NAN);
    let n = e1.metrics["report"]["items"].as_u64().unwrap_or(0);
    ensure!(n == 8, "expected 8 pairs, scored {n}");
    ensure!(steps == 200, "ran {steps} steps");
    ensure!(ce < 0.05, "final CE {ce}");
    ensure!(b1 > 0.95, "self-reconstruction BLEU-1 {b1}");
    ensure!(manifest(&ctx.dir("a3-sft-1"))? == t1, "manifest on disk differs from the returned one");
    let (t2, e2) = run("a3-sft-2")?;
    ensure!(t1.outputs == t2.outputs, "training outputs differ between identical runs");
    ensure!(e1.outputs == e2.outputs, "evaluation outputs differ between identical runs");
    Ok(format!("8 pairs, {steps} steps, CE {ce:.4}, BLEU-1 {b1:.4}, re-run digests identical"))
}

fn a4_dpo(ctx: &Ctx) -> Check {
    let cfg = default_config();
    let corpus = ctx.dir("a4-prep");
    let p = ok(commands::prep(&cfg, &corpus))?;
    let (train, test) = (p.metrics["train"].as_u64().unwrap_or(0), p.metrics["test"].as_u64().unwrap_or(0));
    let frac = train as f64 / (train + test) as f64;
    ensure!((frac - 0.8).abs() < 0.02, "train fraction {frac:.3}");
    let sft = ctx.dir("a4-sft");
    let args = TrainArgs { phase: Phase::Sft, corpus: &corpus, init: None, reference: None, out: &sft };
    ok(commands::train(&cfg, &args))?;
    let reference = sft.join("model.ckpt");
    let out = ctx.dir("a4-dpo");
    let args = TrainArgs { phase: Phase::Dpo, corpus: &corpus, init: None, reference: Some(&reference), out: &out };
    let m = ok(commands::train(&cfg, &args))?.metrics;
    let pairs = m["preference_pairs"].as_u64().unwrap_or(0);
    let held = m["held_out_pairs"].as_u64().unwrap_or(0);
    let valid = pairs as f64 / m["train_examples"].as_u64().unwrap_or(1) as f64;
    let before = m["win_rate_before"].as_f64().unwrap_or(f64::NAN);
    let after = m["win_rate_after"].as_f64().unwrap_or(f64::NAN);
    ensure!(pairs + held >= 200, "only {} preference pairs", pairs + held);
    ensure!(valid >= 0.9, "only {:.1}% of contexts gave valid pairs", 100.0 * valid);
    ensure!(before == 0.0, "win rate at policy == reference is {before}");
    ensure!(after >= 0.9, "held-out win rate after DPO {after}");
    Ok(format!("{pairs} train / {held} held-out pairs, win rate {before:.2} -> {after:.3}"))
}

fn a5_ln2(ctx: &Ctx) -> Check {
    let (mut s, _, prefs) = tiny_session(ctx)?;
    perturb_lora_b(&mut s.model, 5);
    let batch: Vec<&PreferencePair> = prefs.iter().collect();
    let mut worst: f64 = 0.0;
    for beta in [0.05, 0.1, 0.5, 2.0] {
        let l = ok(dpo_loss(&s.model, &s.model.clone(), &batch, beta))?;
        worst = worst.max((l - std::f64::consts::LN_2).abs());
    }
    ensure!(worst <= 1e-12, "|loss - ln 2| = {worst:.2e}");
    Ok(format!("{} pairs, 4 betas, |loss - ln 2| <= {worst:.1e}", batch.len()))
}

fn a6_metrics(_: &Ctx) -> Check {
    let tol = 1e-10;
    let mut worst: f64 = 0.0;
    let mut cider_checked = 0;
    for seed in 0..100 {
        let c = oracle::random_corpus(seed);
        let mut pairs = Vec::new();
        for n in 1..=4 {
            pairs.push((format!("BLEU-{n}"), ok(bleu(&c, n))?.score, oracle::bleu(&c, n)));
        }
        pairs.push(("ROUGE-L".into(), ok(rouge_l(&c))?, oracle::rouge_l(&c)));
        pairs.push(("METEOR".into(), ok(meteor_lite(&c))?, oracle::meteor(&c)));
        if c.len() >= 2 {
            pairs.push(("CIDEr".into(), ok(cider(&c))?, oracle::cider(&c, None)));
            cider_checked += 1;
        }
        for it in &c.items {
            for r in &it.references {
                ensure!(lcs_len(&it.hypothesis, r) == oracle::lcs(&it.hypothesis, r), "seed {seed}: LCS mismatch");
            }
        }
        for (name, got, want) in pairs {
            let d = (got - want).abs();
            ensure!(d <= tol, "seed {seed} {name}: {got} vs oracle {want}");
            worst = worst.max(d);
        }
    }
    ensure!(cider_checked >= 50, "only {cider_checked} corpora exercised CIDEr");
    let c = ok(TokenizedCorpus::from_text([("0", "the cat sat", vec!["the cat sat on mat"])]))?;
    let b1 = ok(bleu(&c, 1))?.score;
    ensure!((b1 - 0.51342).abs() < 1e-5, "BLEU-1 fixture {b1}");
    let c = ok(TokenizedCorpus::from_text([("0", "the cat sat", vec!["the cat on the mat"])]))?;
    let rl = ok(rouge_l(&c))?;
    ensure!((rl - 0.5).abs() < 1e-5, "ROUGE-L fixture {rl}");
    Ok(format!("100 corpora ({cider_checked} with CIDEr), max diff {worst:.1e}; BLEU-1 {b1:.5}, ROUGE-L {rl}"))
}

fn a7_efficiency(_: &Ctx) -> Check {
    let rows = ok(commands::efficiency(&PipelineConfig::default(), Some((7.0e9, 8.4e6))))?;
    let text = commands::render_efficiency(&rows);
    let given = rows.iter().find(|r| r.setup == "given").ok_or("no row for the given totals")?;
    ensure!(format!("{:.2}", given.percent) == "0.12", "percent {}", given.percent);
    ensure!(format!("{:.0}", given.reduction) == "833", "reduction {}", given.reduction);
    ensure!(text.contains("0.12%") && text.contains("833.3x"), "rendered table: {text}");
    ensure!(rows[0].trainable == 8192.0, "micro default trainable {}", rows[0].trainable);

    let mut configs = 0;
    for d in [16, 32, 64, 128] {
        let model = ModelConfig { d_model: d, n_heads: 4, ..ModelConfig::default() };
        let variants = [
            LoraConfig::preset("decoder_qkv", 1).map_err(|e| e.to_string())?,
            LoraConfig::default().with_rank(1),
            LoraConfig {
                rank: 1,
                scopes: [Scope::Encoder, Scope::Adapter, Scope::Decoder].into(),
                targets: [Proj::Q, Proj::V].into(),
                ..LoraConfig::default()
            },
            LoraConfig { rank: 1, layers: Some(vec![1]), ..LoraConfig::default() },
        ];
        for base in &variants {
            let mut prev = None;
            for r in [1, 2, 4, 8, 16, 32, 64] {
                let l = base.with_rank(r);
                let count = ok(trainable_param_count(&model, &l))?;
                let matrices = ok(l.n_matrices(&model))?;
                ensure!(count == matrices * 2 * d * r, "d={d} r={r}: {count} != 2dr x {matrices}");
                if let Some(p) = prev {
                    ensure!(count == 2 * p, "d={d} r={r}: doubling r gave {count} from {p}");
                }
                prev = Some(count);
                if r <= 8 {
                    let mut m = ok(MicroModel::new(model.clone()))?;
                    ok(lora::inject(&mut m, &l))?;
                    ensure!(m.params().trainable_count() == count, "d={d} r={r}: injected count differs");
                }
                configs += 1;
            }
        }
    }
    Ok(format!("0.12% and 833.3x for (7.0e9, 8.4e6); micro 8192; 2dr exact on {configs} configs"))
}

fn a8_clinical(_: &Ctx) -> Check {
    let sheet = Path::new(env!("CARGO_MANIFEST_DIR")).join("../metrics/tests/fixtures/tab4.tsv");
    let report = ok(commands::score(&PipelineConfig::default(), &sheet, None))?;
    ensure!(report.table.mean == 7.2, "mean {}", report.table.mean);
    let trimmed = report.table.trimmed.ok_or("no trimmed mean")?;
    ensure!((trimmed - 7.1667).abs() <= 1e-4, "trimmed {trimmed}");

    let perfect: Vec<Vec<f64>> = (0..12).map(|i| vec![1.0 + (i % 10) as f64; 5]).collect();
    let k = ok(multi_rater_kappa(&perfect, &KappaConfig::default()))?;
    ensure!(k.kappa == 1.0, "perfect agreement kappa {}", k.kappa);
    let zero = ok(cohen_kappa(&[0, 1, 0, 1], &[0, 0, 1, 1]))?;
    let half = ok(cohen_kappa(&[0, 0, 1, 1], &[0, 0, 1, 0]))?;
    ensure!(zero == 0.0, "kappa fixture {zero}, want 0");
    ensure!(half == 0.5, "kappa fixture {half}, want 0.5");
    Ok(format!("mean {}, trimmed {trimmed:.4}, perfect kappa 1, fixtures 0 and 0.5", report.table.mean))
}

fn fuzz_video(rng: &mut ChaCha8Rng) -> (FrameSequence, VideoReport, PrepConfig) {
    let payload = Payload::Grid(PatchGrid::new(1, 1, 1, vec![0.0]).expect("grid"));
    let step = rng.random_range(0.1..2.0);
    let frames: Vec<Frame> = (0..1000)
        .map(|i| Frame {
            t: i as f64 * step,
            quality: rng.random_range(0.0..=1.0),
            polyp: rng.random_bool(0.6),
            payload: payload.clone(),
        })
        .collect();
    let duration = 1000.0 * step;
    let sentences = (0..rng.random_range(0..8))
        .map(|_| {
            let a = rng.random_range(0.0..duration);
            SentenceSpan {
                start: a,
                end: (a + rng.random_range(0.0..duration / 4.0)).min(duration),
                text: "polyp seen".into(),
                stratum: PolypType::ALL[rng.random_range(0..4)],
            }
        })
        .collect();
    let cfg = PrepConfig {
        sampling: SamplingConfig { target_frames: rng.random_range(1..1200), ..SamplingConfig::default() },
        min_quality: rng.random_range(0.0..=1.0),
        require_polyp: rng.random_bool(0.5),
    };
    (
        FrameSequence { video_id: "fz".into(), patient_id: None, duration, frames },
        VideoReport { video_id: "fz".into(), sentences },
        cfg,
    )
}

fn a9_dataprep(ctx: &Ctx) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut paired = 0;
    for case in 0..200 {
        let (seq, rep, cfg) = fuzz_video(&mut rng);
        let out = ok(run_pipeline(std::slice::from_ref(&seq), &[rep], &cfg))?;
        ok(out.check_conservation(std::slice::from_ref(&seq))).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(out.ledger.len() == 1000, "case {case}: ledger has {} entries", out.ledger.len());
        let n = out.ledger.iter().filter(|e| matches!(e.fate, Fate::Paired { .. })).count();
        ensure!(n == out.pairs.len(), "case {case}: {n} paired entries for {} pairs", out.pairs.len());
        paired += n;
    }
    let strata = vec![PolypType::Adenomatous; 2314];
    let s = ok(split_indices(&strata, &vec![None; 2314], &SplitConfig::default()))?;
    ensure!((s.train.len(), s.test.len()) == (1851, 463), "2314 split into {}/{}", s.train.len(), s.test.len());

    let cfg = default_config();
    let a = ok(commands::prep(&cfg, &ctx.dir("a9-prep-1")))?;
    let b = ok(commands::prep(&cfg, &ctx.dir("a9-prep-2")))?;
    ensure!(a.outputs == b.outputs, "prep outputs differ between identical runs");
    ensure!(a.outputs.contains_key("pairs.jsonl") && a.outputs.contains_key("ledger.jsonl"), "missing outputs");
    let split: SplitManifest = ok(serde_json::from_str(&ok(fs::read_to_string(ctx.dir("a9-prep-1").join("split.json")))?))?;
    ensure!(split.train + split.test == a.metrics["pairs"].as_u64().unwrap_or(0) as usize, "split does not cover the pairs");
    Ok(format!(
        "200 fuzzed 1000-frame videos conserved ({paired} pairs), 2314 -> 1851/463, {} prep outputs byte-identical",
        a.outputs.len()
    ))
}

fn a10_ranks(ctx: &Ctx) -> Check {
    let cfg = tiny_config();
    let out = ctx.dir("a10-ablate");
    let (rows, _) = ok(commands::ablate(&cfg, &ctx.tiny, &Axis::Ranks(vec![8, 16, 32, 64]), &out))?;
    ensure!(rows.len() == 4, "{} rows", rows.len());
    ensure!(rows.windows(2).all(|w| w[0].params < w[1].params), "params not increasing: {:?}",
        rows.iter().map(|r| r.params).collect::<Vec<_>>());
    let table = ok(fs::read_to_string(out.join("ablation.tsv")))?;
    ensure!(table.contains("variant\tparams\tBLEU-1\tBLEU-4\tMETEOR\tROUGE-L\tCIDEr"), "table header: {table}");
    let summary: Vec<String> = rows.iter().map(|r| format!("{} {} B1 {:.3}", r.variant, r.params, r.bleu1)).collect();
    Ok(summary.join("; "))
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    budget: Option<Duration>,
    run: fn(&Ctx) -> Check,
}

const fn minutes(m: u64) -> Option<Duration> {
    Some(Duration::from_secs(60 * m))
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria = [
        Criterion { id: "A1", title: "gradient checks", budget: minutes(2), run: a1_gradients },
        Criterion { id: "A2", title: "LoRA transparency and merge", budget: minutes(1), run: a2_lora },
        Criterion { id: "A3", title: "SFT learnability", budget: minutes(5), run: a3_sft },
        Criterion { id: "A4", title: "DPO win rate", budget: minutes(10), run: a4_dpo },
        Criterion { id: "A5", title: "DPO ln 2 anchor", budget: None, run: a5_ln2 },
        Criterion { id: "A6", title: "metric oracles", budget: minutes(1), run: a6_metrics },
        Criterion { id: "A7", title: "efficiency arithmetic", budget: None, run: a7_efficiency },
        Criterion { id: "A8", title: "clinical arithmetic", budget: None, run: a8_clinical },
        Criterion { id: "A9", title: "dataprep conservation and split", budget: None, run: a9_dataprep },
        Criterion { id: "A10", title: "rank sweep", budget: minutes(20), run: a10_ranks },
    ];

    let dir = tempfile::tempdir().expect("temp dir");
    let root = dir.path().to_path_buf();
    let tiny = root.join("tiny");
    if let Err(e) = commands::prep(&tiny_config(), &tiny) {
        println!("acceptance setup failed: {e}");
        std::process::exit(1);
    }
    let ctx = Ctx { _dir: dir, root, tiny };

    let mut failed = 0;
    let mut ran = 0;
    for c in &criteria {
        if !filters.is_empty() && !filters.iter().any(|f| c.id.eq_ignore_ascii_case(f)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| (c.run)(&ctx)))
            .unwrap_or_else(|p| Err(format!("panicked: {}", p.downcast_ref::<String>().cloned().unwrap_or_default())));
        let took = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if took > b => Err(format!("took {:.1}s, budget {}s", took.as_secs_f64(), b.as_secs())),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("{:<4} PASS  {:<32} {detail} [{:.1}s]", c.id, c.title, took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("{:<4} FAIL  {:<32} {why} [{:.1}s]", c.id, c.title, took.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
