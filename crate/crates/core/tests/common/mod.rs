#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// A small synthetic configuration that trains in well under a second.
pub const SMALL_CONFIG: &str = r#"
seed = 11
output = "out"

[synthetic]
n_pos = 30
n_neg = 30
dim = 4
separation = 8.0

[gat]
hidden_dim = 4
heads = 2
epochs = 100
learning_rate = 0.05

[scenario]
labeled_fractions = [0.2, 0.4]
repetitions = 2
"#;

pub fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

pub fn ocgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocgraph"))
        .args(args)
        .output()
        .unwrap()
}

pub fn ok(args: &[&str]) {
    let out = ocgraph(args);
    assert!(
        out.status.success(),
        "ocgraph {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Every file under `root`, keyed by its path relative to `root`.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, files: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, files);
            } else {
                files.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut files = BTreeMap::new();
    walk(root, root, &mut files);
    files
}

pub const STAGES: [&str; 6] = ["embed", "graph", "katz", "lp2", "augment", "classify"];

/// Runs the pipeline monolithically, then stage by stage into the same
/// directory, and returns both snapshots.
pub fn monolithic_and_staged(
    config: &Path,
    output: &Path,
) -> (BTreeMap<PathBuf, Vec<u8>>, BTreeMap<PathBuf, Vec<u8>>) {
    let config = config.to_str().unwrap();
    ok(&["run", "--config", config]);
    let monolithic = snapshot(output);
    fs::remove_dir_all(output).unwrap();
    for stage in STAGES {
        ok(&["stage", stage, "--config", config]);
    }
    ok(&["report", "--config", config]);
    (monolithic, snapshot(output))
}
