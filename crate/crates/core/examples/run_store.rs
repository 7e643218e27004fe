//! Persists a run with checksummed artifacts, reloads it, and shows that a
//! tampered artifact is reported as corruption.
//!
//! cargo run --release --example run_store

use natadv::runstore::{content_id, RunKind, RunRecord, RunStatus, RunStore};
use serde_json::json;

fn main() -> natadv::Result<()> {
    let dir = std::env::temp_dir().join(format!("natadv-store-{}", std::process::id()));
    let store = RunStore::open(&dir)?;
    let config = json!({"lambda": 0.01, "metric": "ls_gan"});
    let id = content_id(RunKind::Attack, 7, &config);
    let record = RunRecord {
        run_id: id.clone(),
        kind: RunKind::Attack,
        config,
        seed: 7,
        status: RunStatus::Done,
        summary: json!({"naturalness": 0.8}),
        artifacts: Default::default(),
    };
    store.persist(
        &record,
        &[
            ("checkpoints/adversary.json", b"{}"),
            ("trajectories.ndjson", b""),
            ("metrics.csv", b"iter,return\n"),
        ],
    )?;
    let run = store.load(&id)?;
    println!(
        "loaded {id}: {:?} with {} artifacts",
        run.record.kind,
        run.record.artifacts.len()
    );
    println!(
        "manifest: {}",
        std::fs::read_to_string(store.manifest_path())?.trim()
    );

    std::fs::write(run.artifact_path("metrics.csv"), "tampered")?;
    match store.load(&id) {
        Err(e) => println!("after tampering: {e}"),
        Ok(_) => println!("tampering went unnoticed"),
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
