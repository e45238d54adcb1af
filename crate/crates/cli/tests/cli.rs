use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aura_core::dataset::{write_collection, ClipCollection, ClipRecord, MosPair, MosTriple};

fn aura(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aura")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three clips of dimension 128 scored by two models.
fn three_clips(dir: &Path) -> (PathBuf, PathBuf) {
    let records = (0..3)
        .map(|i| {
            let before = MosTriple::new(3.0, 3.0, 3.0);
            let scores = BTreeMap::from([
                ("alpha".to_owned(), MosPair { before, after: MosTriple::new(3.5, 3.2, 3.4) }),
                ("beta".to_owned(), MosPair { before, after: MosTriple::new(2.9, 3.0, 2.8 + 0.1 * i as f64) }),
            ]);
            ClipRecord {
                clip_id: format!("clip-{i}"),
                embedding: (0..128).map(|d| (d * (i + 1)) as f32 / 128.0).collect(),
                noise_label: Some(["babble", "music", "traffic"][i].to_owned()),
                scores,
            }
        })
        .collect();
    let c = ClipCollection::new(128, records).unwrap();
    let (m, e) = (dir.join("manifest.jsonl"), dir.join("embeddings.bin"));
    write_collection(&c, &m, &e).unwrap();
    (m, e)
}

fn simulated(dir: &Path, n: usize) -> (PathBuf, PathBuf) {
    let data = dir.join("data");
    let n = n.to_string();
    let out = aura(&["simulate", "--seed", "4", "--n-clips", &n, "--out", s(&data)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (data.join("manifest.jsonl"), data.join("embeddings.bin"))
}

#[test]
fn ingest_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (m, e) = three_clips(dir.path());
    let out = aura(&["ingest", "--manifest", s(&m), "--embeddings", s(&e)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("3 clips, dim 128, 2 models"), "{}", stdout(&out));
    assert!(stdout(&out).contains("3/3 clips labeled"));
}

#[test]
fn ingest_normalizes_into_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let (m, e) = three_clips(dir.path());
    let norm = dir.path().join("norm");
    let out = aura(&["ingest", "--manifest", s(&m), "--embeddings", s(&e), "--out", s(&norm)]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read(norm.join("embeddings.bin")).unwrap(), std::fs::read(&e).unwrap());
    assert_eq!(std::fs::read(norm.join("manifest.jsonl")).unwrap(), std::fs::read(&m).unwrap());
}

#[test]
fn corrupt_header_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (m, e) = three_clips(dir.path());
    let mut bytes = std::fs::read(&e).unwrap();
    bytes[..8].copy_from_slice(b"NOTMAGIC");
    std::fs::write(&e, bytes).unwrap();
    let out = aura(&["ingest", "--manifest", s(&m), "--embeddings", s(&e)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad magic"), "{}", stderr(&out));
}

#[test]
fn mismatched_rows_exit_2_with_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (m, e) = three_clips(dir.path());
    let text = std::fs::read_to_string(&m).unwrap();
    let two: Vec<&str> = text.lines().take(2).collect();
    std::fs::write(&m, two.join("\n")).unwrap();
    let out = aura(&["ingest", "--manifest", s(&m), "--embeddings", s(&e)]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("row-count mismatch") && err.contains("2 rows") && err.contains("declares 3"), "{err}");
}

#[test]
fn missing_inputs_and_seed_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = aura(&["ingest", "--manifest", "/no/such/file", "--embeddings", "/no/such/file"]);
    assert_eq!(code(&out), 2);
    let (m, e) = three_clips(dir.path());
    let out = aura(&["cluster", "--manifest", s(&m), "--embeddings", s(&e), "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--seed"));
    let out = aura(&["sample", "--seed", "1", "--bogus"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn budget_above_collection_size_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (m, e) = three_clips(dir.path());
    let run = dir.path().join("run");
    let out = aura(&[
        "pipeline", "--seed", "1", "--manifest", s(&m), "--embeddings", s(&e), "--out", s(&run), "--budget", "4",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("budget 4 exceeds"));
    assert!(!run.exists());
}

#[test]
fn failed_write_removes_earlier_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (m, e) = simulated(dir.path(), 330);
    let run = dir.path().join("run");
    std::fs::create_dir_all(run.join("report.json")).unwrap();
    let out = aura(&[
        "pipeline", "--seed", "1", "--manifest", s(&m), "--embeddings", s(&e), "--out", s(&run), "--budget", "20",
        "--rounds", "5", "--k-grid", "2,3,4",
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let left: Vec<_> = std::fs::read_dir(&run).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec![std::ffi::OsString::from("report.json")]);
}

#[test]
fn step_by_step_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let (m, e) = simulated(dir.path(), 440);
    let work = dir.path().join("work");
    let common = ["--manifest", s(&m), "--embeddings", s(&e), "--seed", "2"];

    let mut args = vec!["cluster", "--out", s(&work), "--k-grid", "2,3,4,5,6,7,8,9,10"];
    args.extend(common);
    let out = aura(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("k = 9"), "{}", stdout(&out));

    let clusters = work.join("clusters.bin");
    let mut args = vec!["sample", "--out", s(&work), "--clusters", s(&clusters), "--budget", "18"];
    args.extend(common);
    let out = aura(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let labels = dir.path().join("labels.txt");
    std::fs::write(&labels, "clean\ncomponent-0\n").unwrap();
    let sample = work.join("sample.jsonl");
    let mut args = vec![
        "report", "--clusters", s(&clusters), "--sample", s(&sample), "--baseline-labels", s(&labels), "--out", s(&work),
    ];
    args.extend(common);
    let out = aura(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("top noise categories"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(work.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["evaluation"]["size"], 18);
    // Two per cluster, and only the clean and component-0 clusters are in distribution.
    assert!((report["evaluation"]["ood"]["fraction"].as_f64().unwrap() - 14.0 / 18.0).abs() < 1e-12);

    let mut args = vec![
        "rank", "--sample", s(&sample), "--clusters", s(&clusters), "--budget", "18", "--rounds", "20",
    ];
    args.extend(common);
    let out = aura(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("SRCC sample vs full"));
    assert!(stdout(&out).contains("bootstrap SRCC over 20 rounds"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let (m, e) = simulated(dir.path(), 330);
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "seed = 3\n[paths]\nmanifest = {:?}\nembeddings = {:?}\noutput_dir = \"run\"\n\
             [clustering]\nk_grid = [8, 9, 10]\n[sampling]\nbudget = 100\nmode = \"diversity\"\n[metrics]\nrounds = 5\n",
            s(&m),
            s(&e)
        ),
    )
    .unwrap();
    let out = aura(&["pipeline", "--config", s(&config), "--budget", "27"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let run = dir.path().join("run");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["sample"]["budget"], 27);
    assert_eq!(report["sample"]["strategy"], "diversity");
    assert_eq!(report["clustering"]["k"], 9);
    let text = std::fs::read_to_string(run.join("report.txt")).unwrap();
    for strategy in ["random", "diversity", "variance", "aura"] {
        assert!(text.contains(strategy));
    }
}
