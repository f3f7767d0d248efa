//! End-to-end runs of the `sparsedom` binary.

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn sparsedom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsedom")).args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn extrapolate_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let o = sparsedom(&["run", "extrapolate", "--p", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let table = std::fs::read_to_string(out.join("extrapolate.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("r,p,b,base_slope,bound"));
    let bound: f64 = table.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((bound - 58.78775382679628).abs() < 1e-9);
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("status = pass"));
    assert!(manifest.contains("config.p = 3"));
}

#[test]
fn unknown_keys_and_commands_are_rejected() {
    let o = sparsedom(&["run", "sparsity", "--trails", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("trails"));
    let o = sparsedom(&["run", "nosuch"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "trials = 5\nwidth = 3\n").unwrap();
    let o = sparsedom(&["run", "sparsity", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("width"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small battery\ntrials = 7\nmax-depth = 3\nseed = 4\n").unwrap();
    let out = dir.path().join("s");
    let o = sparsedom(&["run", "sparsity", "--config", cfg.to_str().unwrap(), "--seed=9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config.trials = 7"));
    assert!(manifest.contains("config.max_depth = 3"));
    assert!(manifest.contains("config.seed = 9"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["run", "riesz", "--paths", "2000", "--y0", "2", "--dt", "0.01", "--bins", "8", "--tol", "1", "--seed", "5"],
        &["run", "sparsity", "--engine", "mc", "--paths", "500", "--seed", "5"],
        &["run", "weakType", "--paths", "500", "--jumps", "true", "--seed", "5"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let mut tables = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{i}-{rep}"));
            let mut full = args.to_vec();
            full.extend(["--out", out.to_str().unwrap()]);
            let o = sparsedom(&full);
            assert!(o.status.code() != Some(2), "{}", text(&o.stderr));
            tables.push(csv_files(&out));
        }
        assert!(!tables[0].is_empty());
        assert_eq!(tables[0], tables[1], "{args:?}");
    }
}

#[test]
fn sparsity_on_a_tree_file() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.txt");
    std::fs::write(&tree, "0 - 1\n1 0 0.3\n1 0 0.7\n2 0 0.5\n2 0 0.5\n2 1 0.2\n2 1 0.8\n").unwrap();
    let out = dir.path().join("t");
    let o = sparsedom(&["run", "sparsity", "--tree-file", tree.to_str().unwrap(), "--trials", "200", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}\n{}", text(&o.stdout), text(&o.stderr));
    assert!(!csv_files(&out).is_empty());
    std::fs::write(&tree, "0 - 1\n1 0 0.3\n1 0 0.6\n").unwrap();
    let o = sparsedom(&["run", "sparsity", "--tree-file", tree.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn keys_lists_the_schema() {
    let o = sparsedom(&["keys", "riesz"]);
    assert!(o.status.success());
    let s = text(&o.stdout);
    for key in ["--geometry", "--y0", "--doubling", "--seed", "--out"] {
        assert!(s.contains(key), "{key} missing from\n{s}");
    }
}

#[test]
fn quick_suite_passes_within_a_minute() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = sparsedom(&["suite", "quick", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    let secs = start.elapsed().as_secs_f64();
    assert!(o.status.success(), "{}\n{}", text(&o.stdout), text(&o.stderr));
    assert!(secs < 60.0, "quick suite took {secs:.1} s");
    let suite = std::fs::read_to_string(dir.path().join("suite.csv")).unwrap();
    assert_eq!(suite.lines().count(), 10);
}
