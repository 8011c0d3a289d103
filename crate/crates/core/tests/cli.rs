use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dagr_vqa::eval::stats::{plcc, srcc};
use serde_json::{json, Value};
use tempfile::TempDir;

fn dagr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dagr"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn assert_schema(report: &Value) {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    let result = compiled.validate(report).map_err(|errs| errs.map(|e| e.to_string()).collect::<Vec<_>>());
    if let Err(msgs) = result {
        panic!("report violates schema: {msgs:?}");
    }
}

fn write_config(dir: &Path, name: &str, v: Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
    p
}

fn tiny_data() -> Value {
    json!({"synthetic": {"num_videos": 6, "frames_per_video": 4, "height": 16, "width": 16}})
}

fn saliency_config(dir: &Path) -> PathBuf {
    write_config(
        dir,
        "sal.json",
        json!({
            "data": tiny_data(),
            "train": {
                "model": {"tokens": 2, "token_dim": 4, "stage_channels": [4, 8], "bottleneck_channels": 8},
                "batch_size": 2,
                "epochs": 2
            }
        }),
    )
}

fn vqa_config(dir: &Path) -> PathBuf {
    write_config(
        dir,
        "vqa.json",
        json!({
            "data": tiny_data(),
            "train": {
                "model": {"spatial": {"stage_channels": [4, 8]}, "temporal": {"layers": 1, "heads": 2, "ffn_dim": 8}},
                "lr": 0.003,
                "batch_size": 4,
                "epochs": 3
            }
        }),
    )
}

/// Every file under `root`, relative path and bytes, sorted.
fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn flops_report_is_valid_and_printed() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let out = dagr(&["flops", "--run-dir", s(&run)]);
    assert_eq!(code(&out), 0);
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    let saved = report(&run);
    assert_eq!(printed, saved);
    assert_schema(&saved);
    assert_eq!(saved["experiment"], "flops");
    for m in ["dagr", "vivit", "fastvqa", "fastvqa_m", "vivit_dagr_ratio"] {
        assert!(saved["metrics"][m].is_number(), "{m}");
    }
    let csv = fs::read_to_string(run.join("flops.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(run.join("config.json").exists());
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&dagr(&[])), 1);
    assert_eq!(code(&dagr(&["no-such-command"])), 1);
    assert_eq!(code(&dagr(&["flops", "--frames", "many"])), 1);

    let run = tmp.path().join("run");
    let out = dagr(&["flops", "--model", "alexnet", "--run-dir", s(&run)]);
    assert_eq!(code(&out), 1);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(!run.exists());

    let bad = write_config(tmp.path(), "bad.json", json!({"not_a_field": 1}));
    assert_eq!(code(&dagr(&["flops", "--config", s(&bad), "--run-dir", s(&run)])), 1);

    fs::create_dir(&run).unwrap();
    assert_eq!(code(&dagr(&["flops", "--run-dir", s(&run)])), 1);

    // fusion without a saliency checkpoint
    let cfg = vqa_config(tmp.path());
    let other = tmp.path().join("other");
    assert_eq!(code(&dagr(&["train-vqa", "--config", s(&cfg), "--run-dir", s(&other)])), 1);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&dagr(&["--help"])), 0);
    assert_eq!(code(&dagr(&["--version"])), 0);
    assert_eq!(code(&dagr(&["train-vqa", "--help"])), 0);
}

#[test]
fn runtime_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nothing-here");
    let out = dagr(&[
        "eval",
        "--vqa-checkpoint",
        s(&missing),
        "--run-dir",
        s(&tmp.path().join("run")),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].is_string());
}

#[test]
fn verification_failures_map_to_three() {
    use dagr_vqa::cli::exit_code;
    use dagr_vqa::Error;
    assert_eq!(exit_code(&Error::Verification("x".into())), 3);
    let wrapped = Error::Ablation {
        config: "tokens=2".into(),
        source: Box::new(Error::Verification("x".into())),
    };
    assert_eq!(exit_code(&wrapped), 3);
    assert_eq!(exit_code(&Error::Config("x".into())), 1);
    assert_eq!(exit_code(&Error::Degenerate("x".into())), 2);
}

#[test]
fn gradcheck_passes_for_one_seed() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let out = dagr(&["gradcheck", "--seeds", "1", "--run-dir", s(&run)]);
    assert_eq!(code(&out), 0);
    let r = report(&run);
    assert_schema(&r);
    assert_eq!(r["metrics"]["failed"], 0);
    assert!(r["metrics"]["worst_relative_error"].as_f64().unwrap() < 1e-4);
}

#[test]
fn synth_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let mk = |name: &str| {
        let run = tmp.path().join(name);
        let out = dagr(&["synth", "--seed", "5", "--num-videos", "5", "--frames", "3", "--run-dir", s(&run)]);
        assert_eq!(code(&out), 0);
        run
    };
    let (a, b) = (mk("a"), mk("b"));
    assert_eq!(tree(&a), tree(&b));
    assert_schema(&report(&a));
    let other = tmp.path().join("c");
    dagr(&["synth", "--seed", "6", "--num-videos", "5", "--frames", "3", "--run-dir", s(&other)]);
    assert_ne!(tree(&a.join("dataset")), tree(&other.join("dataset")));
}

#[test]
fn training_runs_are_byte_identical_and_eval_matches_library() {
    let tmp = TempDir::new().unwrap();
    let sal_cfg = saliency_config(tmp.path());
    let vqa_cfg = vqa_config(tmp.path());

    let sal = |name: &str| {
        let run = tmp.path().join(name);
        let out = dagr(&["train-saliency", "--config", s(&sal_cfg), "--seed", "3", "--run-dir", s(&run)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        run
    };
    let (s1, s2) = (sal("s1"), sal("s2"));
    assert_eq!(tree(&s1), tree(&s2));
    assert_schema(&report(&s1));

    let ck = s1.join("checkpoint");
    let vqa = |name: &str| {
        let run = tmp.path().join(name);
        let out = dagr(&[
            "train-vqa",
            "--config",
            s(&vqa_cfg),
            "--seed",
            "3",
            "--saliency-checkpoint",
            s(&ck),
            "--run-dir",
            s(&run),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        run
    };
    let (v1, v2) = (vqa("v1"), vqa("v2"));
    assert_eq!(tree(&v1), tree(&v2));
    let r = report(&v1);
    assert_schema(&r);
    assert!(r["metrics"]["train_srcc"].is_number());

    let ev = tmp.path().join("eval");
    let eval_cfg = write_config(tmp.path(), "eval.json", json!({"data": tiny_data(), "split": "train"}));
    let out = dagr(&[
        "eval",
        "--config",
        s(&eval_cfg),
        "--vqa-checkpoint",
        s(&v1.join("checkpoint")),
        "--saliency-checkpoint",
        s(&ck),
        "--run-dir",
        s(&ev),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&ev);
    assert_schema(&r);

    let mut rdr = csv::Reader::from_path(ev.join("predictions.csv")).unwrap();
    let (mut mos, mut pred) = (Vec::new(), Vec::new());
    for row in rdr.deserialize::<(String, f64, f64, f64)>() {
        let (_, m, p, _) = row.unwrap();
        mos.push(m);
        pred.push(p);
    }
    assert_eq!(r["metrics"]["n"], mos.len());
    // serde_json's default float parser can be one ulp off
    assert!((r["metrics"]["srcc"].as_f64().unwrap() - srcc(&pred, &mos).unwrap()).abs() < 1e-12);
    assert!((r["metrics"]["plcc"].as_f64().unwrap() - plcc(&pred, &mos).unwrap()).abs() < 1e-12);
    assert_eq!(r["metrics"]["paired_t_p"], 1.0);
    assert_eq!(r["metrics"]["wilcoxon_p"], 1.0);
    for m in ["nss", "cc", "auc_judd"] {
        assert!(r["metrics"][m].is_number(), "{m}");
    }

    let emb = tmp.path().join("emb");
    let out = dagr(&[
        "export-embeddings",
        "--config",
        s(&eval_cfg),
        "--saliency-checkpoint",
        s(&ck),
        "--run-dir",
        s(&emb),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&emb);
    assert_schema(&r);
    let lines = fs::read_to_string(emb.join("embeddings.csv")).unwrap();
    assert_eq!(lines.lines().count(), 1 + r["metrics"]["videos"].as_u64().unwrap() as usize);
    let header = lines.lines().next().unwrap();
    assert_eq!(header, "video_id,e0,e1,e2,e3");
}
