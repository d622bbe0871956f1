mod common;

use std::fs;
use std::process::Command;

use casekg::config::{BackendKind, RunConfig};
use casekg_core::Mode;
use common::*;

fn casekg() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_casekg"));
    c.env("RUST_LOG", "off");
    c
}

#[test]
fn run_exits_zero_when_all_cases_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = casekg()
        .args(["run", "--mode", "corekg", "--corpus"])
        .arg(corpus())
        .arg("--out")
        .arg(&out)
        .arg("--script")
        .arg(script_path())
        .output()
        .unwrap();
    assert!(status.status.success());
    assert_eq!(read(out.join("graphs/case_alpha.corekg.graphml")), golden("case_alpha.corekg.graphml"));
}

#[test]
fn case_failure_exits_one_with_table() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = copy_corpus(dir.path());
    fs::write(corpus.join("case_gamma.txt"), "Opinion\nThe Obsidian Ferry.\n").unwrap();
    let script = dir.path().join("s.jsonl");
    fs::write(&script, read(script_path()) + "{\"contains\":\"Obsidian Ferry\",\"error\":\"transport\"}\n").unwrap();
    let out = casekg()
        .args(["run", "--mode", "baseline", "--corpus"])
        .arg(&corpus)
        .arg("--out")
        .arg(dir.path().join("run"))
        .arg("--script")
        .arg(&script)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("case_gamma") && stderr.contains("extract"), "{stderr}");
}

#[test]
fn missing_corpus_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = casekg()
        .args(["run", "--corpus"])
        .arg(dir.path().join("missing"))
        .arg("--out")
        .arg(dir.path().join("run"))
        .arg("--script")
        .arg(script_path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corpus directory"));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn eval_and_compare_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["baseline", "corekg"] {
        let ok = casekg()
            .args(["run", "--mode", mode, "--corpus"])
            .arg(corpus())
            .arg("--out")
            .arg(dir.path().join(mode))
            .arg("--script")
            .arg(script_path())
            .output()
            .unwrap();
        assert!(ok.status.success());
    }
    let eval = casekg().arg("eval").arg(dir.path().join("baseline")).output().unwrap();
    assert!(eval.status.success());
    assert!(dir.path().join("baseline/eval/metrics.json").is_file());

    let cmp = casekg()
        .arg("compare")
        .arg("--baseline")
        .arg(dir.path().join("baseline"))
        .arg("--corekg")
        .arg(dir.path().join("corekg"))
        .arg("--out")
        .arg(dir.path().join("cmp"))
        .output()
        .unwrap();
    assert!(cmp.status.success());
    let stdout = String::from_utf8_lossy(&cmp.stdout);
    assert!(stdout.contains("node_duplication_rate") && stdout.contains("31.25"), "{stdout}");
}

#[test]
fn record_script_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    run_fixture(&first, Mode::Corekg);
    let script = dir.path().join("recorded.jsonl");
    let rec = casekg()
        .arg("record-script")
        .arg("--audit")
        .arg(first.join("audit.jsonl"))
        .arg("--out")
        .arg(&script)
        .output()
        .unwrap();
    assert!(rec.status.success());
    assert_eq!(line_count(&script), 16);
    let replay = casekg()
        .args(["run", "--corpus"])
        .arg(corpus())
        .arg("--out")
        .arg(dir.path().join("second"))
        .arg("--script")
        .arg(&script)
        .output()
        .unwrap();
    assert!(replay.status.success());
    assert_eq!(read(dir.path().join("second/manifest.json")), golden("corekg.manifest.json"));
}

#[test]
fn templates_export_and_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let tdir = dir.path().join("templates");
    assert!(casekg().arg("templates").arg(&tdir).output().unwrap().status.success());
    assert_eq!(fs::read_dir(&tdir).unwrap().count(), 7);
    let ok = casekg()
        .args(["run", "--corpus"])
        .arg(corpus())
        .arg("--out")
        .arg(dir.path().join("run"))
        .arg("--script")
        .arg(script_path())
        .arg("--template-dir")
        .arg(&tdir)
        .output()
        .unwrap();
    assert!(ok.status.success());
    // Unedited templates give the same prompts, hence the same manifest.
    assert_eq!(read(dir.path().join("run/manifest.json")), golden("corekg.manifest.json"));
}

#[test]
fn config_file_paths_resolve_relative_to_the_file() {
    let dir = tempfile::tempdir().unwrap();
    copy_corpus(dir.path());
    fs::copy(script_path(), dir.path().join("script.jsonl")).unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(
        &cfg_path,
        r#"
corpus_dir = "corpus"
output_dir = "out"
mode = "baseline"

[gateway]
script = "script.jsonl"

[eval]
threshold = 80
"#,
    )
    .unwrap();
    let cfg = RunConfig::load(&cfg_path).unwrap();
    assert_eq!(cfg.corpus_dir, dir.path().join("corpus"));
    assert_eq!(cfg.gateway.backend_kind(), BackendKind::Script);
    assert_eq!(cfg.eval.threshold, 80);
    cfg.validate().unwrap();
    assert!(casekg().arg("run").arg("--config").arg(&cfg_path).output().unwrap().status.success());
    assert_eq!(read(dir.path().join("out/graphs/case_beta.baseline.graphml")), golden("case_beta.baseline.graphml"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let err = RunConfig::from_toml("corpus_dir = \"a\"\noutput_dir = \"b\"\nthreshhold = 3\n", "x.toml".as_ref());
    assert!(err.is_err());
}

#[test]
fn environment_overrides_endpoint_settings() {
    let mut cfg = RunConfig::new("a", "b", Mode::Corekg);
    cfg.apply_env(|k| match k {
        "CASEKG_BASE_URL" => Some("http://gpu-box:8000".into()),
        "CASEKG_MODEL" => Some("other-model".into()),
        "CASEKG_API_KEY" => Some("k".into()),
        _ => None,
    });
    assert_eq!(cfg.gateway.base_url, "http://gpu-box:8000");
    assert_eq!(cfg.gateway.model, "other-model");
    assert_eq!(cfg.gateway.api_key.as_deref(), Some("k"));
    assert_eq!(cfg.gateway.backend_kind(), BackendKind::Http);
}
