mod common;

use std::fs;

use common::{monolithic_and_staged, ocgraph, ok, snapshot, write_config, SMALL_CONFIG};

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", SMALL_CONFIG);
    let config = config.to_str().unwrap();
    let out = dir.path().join("out");

    ok(&["run", "--config", config]);
    let first = snapshot(&out);
    fs::remove_dir_all(&out).unwrap();
    ok(&["run", "--config", config, "--jobs", "3"]);
    let second = snapshot(&out);

    assert_eq!(
        first.keys().collect::<Vec<_>>(),
        second.keys().collect::<Vec<_>>()
    );
    assert!(first.keys().any(|p| p.ends_with("predictions.jsonl")));
    assert!(first.contains_key(std::path::Path::new("report.csv")));
    assert!(first == second, "outputs differ between runs");
}

#[test]
fn stage_by_stage_matches_a_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", SMALL_CONFIG);
    let (monolithic, staged) = monolithic_and_staged(&config, &dir.path().join("out"));
    assert_eq!(monolithic.len(), 3 + 4 * 4 + 2);
    for (path, bytes) in &monolithic {
        assert!(
            staged.get(path) == Some(bytes),
            "{} differs",
            path.display()
        );
    }
    assert_eq!(monolithic.len(), staged.len());
}

#[test]
fn the_seed_flag_changes_the_draws() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", SMALL_CONFIG);
    let config = config.to_str().unwrap();
    let labeled = dir.path().join("out/runs/f0-r0/labeled.txt");
    ok(&["run", "--config", config]);
    let a = fs::read(&labeled).unwrap();
    ok(&["run", "--config", config, "--seed", "12345"]);
    assert_ne!(a, fs::read(&labeled).unwrap());
}

#[test]
fn an_invalid_katz_damping_fails_in_the_katz_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.toml",
        &format!("{SMALL_CONFIG}\n[katz]\nalpha = 1.0\n"),
    );
    let out = ocgraph(&["run", "--config", config.to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("katz"), "{stderr}");
    assert!(!dir.path().join("out/runs").exists());
}

#[test]
fn dry_run_validates_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", SMALL_CONFIG);
    let out = ocgraph(&["run", "--config", config.to_str().unwrap(), "--dry-run"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("config ok ("), "{stdout}");
    assert!(stdout.contains("[katz]"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn configuration_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write_config(
        dir.path(),
        "m.toml",
        "[data]\nsource = \"jsonl\"\npath = \"absent.jsonl\"\n",
    );
    let out = ocgraph(&["run", "--config", missing.to_str().unwrap(), "--dry-run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.jsonl"));

    let typo = write_config(dir.path(), "t.toml", "[katz]\nalpah = 0.1\n");
    let out = ocgraph(&["run", "--config", typo.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));

    let out = ocgraph(&["stage", "nonsense", "--config", typo.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn a_stage_without_its_inputs_names_the_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", SMALL_CONFIG);
    let out = ocgraph(&["stage", "lp2", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("lp2") && stderr.contains("embeddings.txt"),
        "{stderr}"
    );
}

#[test]
fn ablation_writes_both_arms() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", SMALL_CONFIG);
    ok(&[
        "ablate",
        "--config",
        config.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    let files = snapshot(&dir.path().join("out/ablation"));
    for name in [
        "one_step.csv",
        "two_step.csv",
        "difference.csv",
        "ablation.json",
    ] {
        assert!(
            files.contains_key(std::path::Path::new(name)),
            "{name} missing"
        );
    }
}

#[test]
fn jsonl_datasets_run_through_the_builtin_embedder() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = String::new();
    for i in 0..40 {
        let (label, text) = if i % 2 == 0 {
            (1, "shocking miracle cure doctors hate secret revealed")
        } else {
            (0, "council approves budget for road maintenance next year")
        };
        lines += &format!("{{\"id\":\"n{i}\",\"text\":\"{text} {i}\",\"label\":{label}}}\n");
    }
    fs::write(dir.path().join("news.jsonl"), lines).unwrap();
    // Unit-norm TF-IDF rows and a 10:4 initial training set: the default
    // step would only learn the class prior within 200 epochs.
    let config = write_config(
        dir.path(),
        "c.toml",
        "output = \"out\"\n[data]\nsource = \"jsonl\"\npath = \"news.jsonl\"\n[embedder]\ndim = 32\n[gat]\nepochs = 500\nlearning_rate = 0.1\n[scenario]\nlabeled_fractions = [0.3]\nrepetitions = 1\n",
    );
    ok(&["run", "--config", config.to_str().unwrap()]);
    let report = fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 4);
}

#[test]
fn the_embedded_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.toml", SMALL_CONFIG);
    ok(&["run", "--config", path.to_str().unwrap(), "--seed", "99"]);
    let first = snapshot(&dir.path().join("out"));

    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/report.json")).unwrap()).unwrap();
    let embedded: ocgraph::cli::PipelineConfig =
        serde_json::from_value(report["config"].clone()).unwrap();
    assert_eq!(embedded.seed, 99);
    let replay = write_config(dir.path(), "replay.toml", &embedded.to_toml());
    fs::remove_dir_all(dir.path().join("out")).unwrap();
    ok(&["run", "--config", replay.to_str().unwrap()]);
    assert!(snapshot(&dir.path().join("out")) == first);
}

#[test]
fn grid_max_reports_the_best_point_per_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL_CONFIG}\n[grid]\nk = [4, 6]\np = [0.5, 0.7]\n");
    let config = write_config(dir.path(), "c.toml", &text);
    ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--grid-max",
        "--jobs",
        "2",
    ]);
    let report = fs::read_to_string(dir.path().join("out/grid/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 2 * (2 + 2));
    assert!(!dir.path().join("out/runs").exists());

    let bad = write_config(
        dir.path(),
        "bad.toml",
        &format!("{SMALL_CONFIG}\n[grid]\np = [0.0]\n"),
    );
    let out = ocgraph(&["run", "--config", bad.to_str().unwrap(), "--grid-max"]);
    assert_eq!(out.status.code(), Some(1));
}
