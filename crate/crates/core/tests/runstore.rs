//! Run store persistence, concurrency and corruption detection.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use natadv::error::Error;
use natadv::runstore::{content_id, RunKind, RunRecord, RunStatus, RunStore};
use serde_json::json;

fn record(id: &str, kind: RunKind) -> RunRecord {
    RunRecord {
        run_id: id.to_string(),
        kind,
        config: json!({"lambda": 0.1, "nested": {"k": [1, 2, 3]}}),
        seed: 3,
        status: RunStatus::Done,
        summary: json!({"naturalness": 0.5}),
        artifacts: BTreeMap::new(),
    }
}

fn attack_artifacts(tag: &str) -> Vec<(&'static str, Vec<u8>)> {
    vec![
        (
            "checkpoints/adversary.json",
            format!("{{\"tag\":\"{tag}\"}}").into_bytes(),
        ),
        ("trajectories.ndjson", b"{}\n".to_vec()),
        ("metrics.csv", b"iter,robot_return\n0,1.5\n".to_vec()),
    ]
}

fn persist(store: &RunStore, rec: &RunRecord, arts: &[(&str, Vec<u8>)]) -> natadv::Result<String> {
    let refs: Vec<(&str, &[u8])> = arts.iter().map(|(n, b)| (*n, b.as_slice())).collect();
    store.persist(rec, &refs)
}

#[test]
fn round_trip_preserves_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let rec = record("run1", RunKind::Attack);
    persist(&store, &rec, &attack_artifacts("a")).unwrap();
    let loaded = store.load("run1").unwrap();
    assert_eq!(loaded.record.config, rec.config);
    assert_eq!(loaded.record.summary, rec.summary);
    assert_eq!(loaded.record.kind, rec.kind);
    assert_eq!(
        loaded.read("metrics.csv").unwrap(),
        b"iter,robot_return\n0,1.5\n"
    );
    for f in [
        "config.json",
        "checkpoints/adversary.json",
        "trajectories.ndjson",
        "metrics.csv",
    ] {
        assert!(store.run_dir("run1").join(f).is_file(), "{f}");
    }
}

#[test]
fn hundred_concurrent_writers_each_appear_once() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(RunStore::open(dir.path()).unwrap());
    let handles: Vec<_> = (0..100)
        .map(|i| {
            let store = Arc::clone(&store);
            std::thread::spawn(move || {
                let rec = record(&format!("w{i:03}"), RunKind::Attack);
                persist(&store, &rec, &attack_artifacts(&i.to_string())).unwrap();
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for r in store.records().unwrap() {
        *counts.entry(r.run_id).or_default() += 1;
    }
    assert_eq!(counts.len(), 100);
    assert!(counts.values().all(|&c| c == 1));
    for i in 0..100 {
        store.load(&format!("w{i:03}")).unwrap();
    }
}

#[test]
fn concurrent_writers_of_one_run_leave_one_entry() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(RunStore::open(dir.path()).unwrap());
    let handles: Vec<_> = (0..16)
        .map(|_| {
            let store = Arc::clone(&store);
            std::thread::spawn(move || {
                persist(
                    &store,
                    &record("same", RunKind::Attack),
                    &attack_artifacts("x"),
                )
                .unwrap();
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let n = store
        .records()
        .unwrap()
        .iter()
        .filter(|r| r.run_id == "same")
        .count();
    assert_eq!(n, 1);
    store.load("same").unwrap();
}

#[test]
fn missing_checkpoint_is_rejected_and_manifest_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    persist(
        &store,
        &record("ok", RunKind::Attack),
        &attack_artifacts("a"),
    )
    .unwrap();
    let before = std::fs::read(store.manifest_path()).unwrap();
    let mut arts = attack_artifacts("b");
    arts.retain(|(n, _)| !n.starts_with("checkpoints/"));
    let err = persist(&store, &record("bad", RunKind::Attack), &arts).unwrap_err();
    assert!(matches!(err, Error::Rejected(_)));
    assert_eq!(std::fs::read(store.manifest_path()).unwrap(), before);
    assert!(!store.run_dir("bad").exists());
}

#[test]
fn unknown_id_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    assert!(matches!(store.load("ghost"), Err(Error::NotFound(_))));
}

#[test]
fn flipped_checkpoint_byte_is_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    persist(
        &store,
        &record("t", RunKind::Attack),
        &attack_artifacts("a"),
    )
    .unwrap();
    let p = store.run_dir("t").join("checkpoints/adversary.json");
    let mut bytes = std::fs::read(&p).unwrap();
    bytes[3] ^= 0x01;
    std::fs::write(&p, bytes).unwrap();
    assert!(matches!(store.load("t"), Err(Error::Corruption { .. })));
}

#[test]
fn edited_manifest_line_is_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    persist(
        &store,
        &record("m", RunKind::Attack),
        &attack_artifacts("a"),
    )
    .unwrap();
    let text = std::fs::read_to_string(store.manifest_path()).unwrap();
    std::fs::write(
        store.manifest_path(),
        text.replace("\"seed\":3", "\"seed\":4"),
    )
    .unwrap();
    assert!(matches!(store.load("m"), Err(Error::Corruption { .. })));
}

#[test]
fn directory_without_manifest_entry_is_invisible() {
    // What a crash between writing the run and appending the manifest
    // leaves behind.
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    std::fs::create_dir_all(store.run_dir("half").join("checkpoints")).unwrap();
    assert!(matches!(store.load("half"), Err(Error::NotFound(_))));
    persist(
        &store,
        &record("half", RunKind::Attack),
        &attack_artifacts("a"),
    )
    .unwrap();
    store.load("half").unwrap();
}

#[test]
fn content_ids_depend_on_every_input() {
    let c = json!({"a": 1});
    let id = content_id(RunKind::Attack, 1, &c);
    assert_eq!(id, content_id(RunKind::Attack, 1, &json!({"a": 1})));
    assert_ne!(id, content_id(RunKind::Attack, 2, &c));
    assert_ne!(id, content_id(RunKind::Scan, 1, &c));
    assert_ne!(id, content_id(RunKind::Attack, 1, &json!({"a": 2})));
}
