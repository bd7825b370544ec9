use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/pipeline")
}

/// Copies the pipeline fixture into a temp dir and rewrites its config.
fn workspace(edit: impl FnOnce(String) -> String) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(fixture()).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
        }
    }
    let config = dir.path().join("config.toml");
    let text = fs::read_to_string(&config).unwrap();
    fs::write(&config, edit(text)).unwrap();
    (dir, config)
}

fn run(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualprobe"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("DUALPROBE_TRANSLATOR_URL")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn injected_translation_failures_exit_partial() {
    let (dir, config) = workspace(|t| {
        t.replace(
            "[translator]\nkind = \"mock\"",
            "[translator]\nkind = \"mock\"\nfail_when_contains = [\"soup\"]",
        )
    });
    let out = run(&config, &["build-dataset"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let quarantine = fs::read_to_string(dir.path().join("out/dataset/quarantine.jsonl")).unwrap();
    let lines: Vec<&str> = quarantine.lines().collect();
    // t02 mentions soup: all 12 of its translated renderings fail
    assert_eq!(lines.len(), 12, "{quarantine}");
    assert!(lines.iter().all(|l| l.contains("\"template_id\":\"t02\"") && l.contains("\"attempts\":3")));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/dataset/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["built"].as_u64().unwrap() + 12, summary["requested"].as_u64().unwrap());
}

#[test]
fn missing_input_is_a_config_error() {
    let (dir, config) = workspace(|t| t);
    fs::remove_file(dir.path().join("templates.jsonl")).unwrap();
    let out = run(&config, &["build-dataset"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("templates"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let (_dir, config) = workspace(|t| t.replace("seed = 7", "seed = 7\nsede = 8"));
    assert_eq!(code(&run(&config, &["build-dataset"])), 1);
}

#[test]
fn missing_config_file() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&dir.path().join("nope.toml"), &["eval"])), 1);
}

#[test]
fn commands_out_of_order_name_the_missing_step() {
    let (_dir, config) = workspace(|t| t);
    let out = run(&config, &["eval"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("build-dataset"));
}

#[test]
fn http_translator_needs_an_endpoint() {
    let (_dir, config) = workspace(|t| t.replace("kind = \"mock\"", "kind = \"http\""));
    let out = run(&config, &["build-dataset"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("DUALPROBE_TRANSLATOR_URL"));
}

#[test]
fn corrupted_trace_is_a_data_error() {
    let (dir, config) = workspace(|t| t);
    for c in ["build-dataset", "gen-traces"] {
        assert_eq!(code(&run(&config, &[c])), 0);
    }
    let trace = dir.path().join("out/traces/gate/t01.CN.en.ntrc");
    let mut bytes = fs::read(&trace).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x40;
    fs::write(&trace, bytes).unwrap();
    let out = run(&config, &["extract-neurons"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let violations = fs::read_to_string(dir.path().join("out/neurons/gate/violations.json")).unwrap();
    assert!(violations.contains("t01.CN.en"), "{violations}");
}

#[test]
fn seed_flag_overrides_config() {
    let (dir, config) = workspace(|t| t);
    let weights = |seed: &str, out: &str| {
        let out_dir = dir.path().join(out);
        let out_s = out_dir.to_str().unwrap();
        for c in ["build-dataset", "gen-traces"] {
            assert_eq!(code(&run(&config, &["--seed", seed, "--out", out_s, c])), 0);
        }
        fs::read(out_dir.join("models/noise.nwts")).unwrap()
    };
    assert_eq!(weights("7", "a"), weights("7", "b"));
    assert_ne!(weights("7", "a"), weights("8", "c"));
}

#[test]
fn zero_jobs_is_rejected() {
    let (_dir, config) = workspace(|t| t);
    assert_eq!(code(&run(&config, &["--jobs", "0", "build-dataset"])), 1);
}
