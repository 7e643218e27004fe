//! Run directories with checksummed artifacts and an append-only manifest.
//!
//! Layout under the store root:
//! `<id>/config.json`, `<id>/checkpoints/*`, `<id>/trajectories.ndjson`,
//! `<id>/metrics.csv`, plus `manifest.ndjson` with one line per persisted
//! run. A run directory is written under a temporary name and renamed into
//! place before its manifest line is appended, so a manifest entry never
//! points at incomplete artifacts.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.ndjson";
pub const CONFIG_FILE: &str = "config.json";
const LOCK: &str = ".lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Cooptimize,
    TrainRobot,
    Attack,
    Scan,
    RobustFt,
}

impl RunKind {
    /// Artifacts every run of this kind must carry besides `config.json`.
    pub fn required_artifacts(self) -> &'static [&'static str] {
        match self {
            RunKind::Cooptimize => &[
                "checkpoints/human.json",
                "checkpoints/robot.json",
                "trajectories.ndjson",
                "metrics.csv",
            ],
            RunKind::TrainRobot | RunKind::RobustFt => &[
                "checkpoints/robot.json",
                "trajectories.ndjson",
                "metrics.csv",
            ],
            RunKind::Attack => &[
                "checkpoints/adversary.json",
                "trajectories.ndjson",
                "metrics.csv",
            ],
            RunKind::Scan => &["scan.json", "frontier.csv", "frontier.json", "frontier.svg"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Done,
    Failed,
}

impl RunStatus {
    /// Forward-only transitions: running to done or failed.
    pub fn can_become(self, next: RunStatus) -> bool {
        matches!(
            (self, next),
            (RunStatus::Running, RunStatus::Done) | (RunStatus::Running, RunStatus::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub kind: RunKind,
    /// Everything needed to replay the run.
    pub config: serde_json::Value,
    pub seed: u64,
    pub status: RunStatus,
    pub summary: serde_json::Value,
    /// Relative artifact path to SHA-256 hex digest.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ManifestLine {
    checksum: String,
    record: RunRecord,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Content address of a run: the digest of its kind, seed and canonical
/// configuration JSON, shortened to 16 hex digits.
pub fn content_id(kind: RunKind, seed: u64, config: &serde_json::Value) -> String {
    let text = serde_json::to_string(&(kind, seed, config)).expect("config serializes");
    sha256_hex(text.as_bytes())[..16].to_string()
}

/// A persisted run with verified artifacts.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub record: RunRecord,
    pub dir: PathBuf,
}

impl LoadedRun {
    pub fn artifact_path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Reads an artifact and checks it against the recorded digest.
    pub fn read(&self, name: &str) -> Result<Vec<u8>> {
        let want = self.record.artifacts.get(name).ok_or_else(|| {
            Error::NotFound(format!("artifact {name} of run {}", self.record.run_id))
        })?;
        let path = self.artifact_path(name);
        let bytes = read_existing(&path)?;
        let got = sha256_hex(&bytes);
        if &got != want {
            return Err(Error::Corruption {
                path,
                reason: format!("checksum {got} does not match manifest {want}"),
            });
        }
        Ok(bytes)
    }

    pub fn read_string(&self, name: &str) -> Result<String> {
        let path = self.artifact_path(name);
        String::from_utf8(self.read(name)?).map_err(|_| Error::Corruption {
            path,
            reason: "not UTF-8".into(),
        })
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T> {
        let path = self.artifact_path(name);
        serde_json::from_slice(&self.read(name)?).map_err(|e| Error::Corruption {
            path,
            reason: e.to_string(),
        })
    }
}

fn read_existing(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Corruption {
            path: path.to_path_buf(),
            reason: "artifact missing".into(),
        },
        _ => e.into(),
    })
}

fn check_artifact_name(name: &str) -> Result<()> {
    let p = Path::new(name);
    let ok = !name.is_empty()
        && p.components().all(|c| matches!(c, Component::Normal(_)))
        && name != CONFIG_FILE;
    if ok {
        Ok(())
    } else {
        Err(Error::Rejected(format!("invalid artifact name {name:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST)
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join(run_id)
    }

    /// Writes the run directory atomically and appends its manifest line.
    /// The record's artifact digests are filled in here. A run whose id is
    /// already persisted is left as is.
    pub fn persist(&self, record: &RunRecord, artifacts: &[(&str, &[u8])]) -> Result<String> {
        if record.run_id.is_empty()
            || !record
                .run_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(Error::Rejected(format!(
                "invalid run id {:?}",
                record.run_id
            )));
        }
        if record.status == RunStatus::Running {
            return Err(Error::Rejected("only finished runs are persisted".into()));
        }
        let mut names: Vec<&str> = artifacts.iter().map(|(n, _)| *n).collect();
        for n in &names {
            check_artifact_name(n)?;
        }
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Rejected("duplicate artifact name".into()));
        }
        if record.status == RunStatus::Done {
            if let Some(missing) = record
                .kind
                .required_artifacts()
                .iter()
                .find(|r| !names.contains(r))
            {
                return Err(Error::Rejected(format!(
                    "{:?} run {} is missing {missing}",
                    record.kind, record.run_id
                )));
            }
        }
        let final_dir = self.run_dir(&record.run_id);
        if self.contains(&record.run_id)? {
            return Ok(record.run_id.clone());
        }

        let mut rec = record.clone();
        rec.artifacts = artifacts
            .iter()
            .map(|(n, b)| (n.to_string(), sha256_hex(b)))
            .collect();
        let tmp = self.root.join(format!(
            ".tmp-{}-{}-{}",
            rec.run_id,
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let written = (|| -> Result<()> {
            fs::create_dir_all(&tmp)?;
            write_synced(&tmp.join(CONFIG_FILE), &serde_json::to_vec_pretty(&rec)?)?;
            for (name, bytes) in artifacts {
                let p = tmp.join(name);
                if let Some(parent) = p.parent() {
                    fs::create_dir_all(parent)?;
                }
                write_synced(&p, bytes)?;
            }
            Ok(())
        })();
        if let Err(e) = written {
            let _ = fs::remove_dir_all(&tmp);
            return Err(e);
        }
        // Commit under the store lock: check, rename and append happen as
        // one step for every writer, in this process or another.
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(self.root.join(LOCK))?;
        lock.lock()?;
        if self.contains(&rec.run_id)? {
            let _ = fs::remove_dir_all(&tmp);
            return Ok(rec.run_id);
        }
        if final_dir.exists() {
            // Left over from a crash before the manifest append.
            fs::remove_dir_all(&final_dir)?;
        }
        if let Err(e) = fs::rename(&tmp, &final_dir) {
            let _ = fs::remove_dir_all(&tmp);
            return Err(e.into());
        }
        self.append_manifest(&rec)?;
        Ok(rec.run_id)
    }

    fn append_manifest(&self, rec: &RunRecord) -> Result<()> {
        let record_json = serde_json::to_string(rec)?;
        let line = ManifestLine {
            checksum: sha256_hex(record_json.as_bytes()),
            record: rec.clone(),
        };
        let mut text = serde_json::to_string(&line)?;
        text.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.manifest_path())?;
        // One write call per line: O_APPEND keeps concurrent lines whole.
        f.write_all(text.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    /// Manifest records in append order. A torn final line (no newline) is
    /// ignored; any other unreadable line is corruption.
    pub fn records(&self) -> Result<Vec<RunRecord>> {
        let path = self.manifest_path();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let complete = match text.rfind('\n') {
            Some(i) => &text[..=i],
            None => "",
        };
        let mut out = Vec::new();
        for (i, line) in complete.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ManifestLine =
                serde_json::from_str(line).map_err(|e| Error::Corruption {
                    path: path.clone(),
                    reason: format!("line {}: {e}", i + 1),
                })?;
            let got = sha256_hex(serde_json::to_string(&parsed.record)?.as_bytes());
            if got != parsed.checksum {
                return Err(Error::Corruption {
                    path: path.clone(),
                    reason: format!("line {}: record checksum mismatch", i + 1),
                });
            }
            out.push(parsed.record);
        }
        Ok(out)
    }

    pub fn contains(&self, run_id: &str) -> Result<bool> {
        Ok(self.records()?.iter().any(|r| r.run_id == run_id))
    }

    /// Loads a run and verifies every artifact digest.
    pub fn load(&self, run_id: &str) -> Result<LoadedRun> {
        let record = self
            .records()?
            .into_iter()
            .rev()
            .find(|r| r.run_id == run_id)
            .ok_or_else(|| Error::NotFound(run_id.to_string()))?;
        let dir = self.run_dir(run_id);
        let on_disk: RunRecord = serde_json::from_slice(&read_existing(&dir.join(CONFIG_FILE))?)
            .map_err(|e| Error::Corruption {
                path: dir.join(CONFIG_FILE),
                reason: e.to_string(),
            })?;
        if on_disk != record {
            return Err(Error::Corruption {
                path: dir.join(CONFIG_FILE),
                reason: "record differs from manifest".into(),
            });
        }
        let run = LoadedRun { record, dir };
        for name in run.record.artifacts.keys() {
            run.read(name)?;
        }
        Ok(run)
    }

    /// Loads a run and checks its kind.
    pub fn load_kind(&self, run_id: &str, kind: RunKind) -> Result<LoadedRun> {
        let run = self.load(run_id)?;
        if run.record.kind != kind {
            return Err(Error::config(format!(
                "run {run_id} is a {:?} run, expected {kind:?}",
                run.record.kind
            )));
        }
        Ok(run)
    }
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str) -> RunRecord {
        RunRecord {
            run_id: id.into(),
            kind: RunKind::TrainRobot,
            config: serde_json::json!({"x": 1}),
            seed: 7,
            status: RunStatus::Done,
            summary: serde_json::json!({"success": 1.0}),
            artifacts: BTreeMap::new(),
        }
    }

    fn artifacts() -> Vec<(&'static str, &'static [u8])> {
        vec![
            ("checkpoints/robot.json", b"{}"),
            ("trajectories.ndjson", b""),
            ("metrics.csv", b"iter\n"),
        ]
    }

    #[test]
    fn persist_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        store.persist(&record("a1"), &artifacts()).unwrap();
        let run = store.load("a1").unwrap();
        assert_eq!(run.record.summary, record("a1").summary);
        assert_eq!(run.record.artifacts.len(), 3);
        assert_eq!(run.read("metrics.csv").unwrap(), b"iter\n");
    }

    #[test]
    fn missing_checkpoint_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let mut a = artifacts();
        a.remove(0);
        assert!(matches!(
            store.persist(&record("b"), &a),
            Err(Error::Rejected(_))
        ));
        assert!(store.records().unwrap().is_empty());
        assert!(!store.run_dir("b").exists());
    }

    #[test]
    fn unknown_and_tampered() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        assert!(matches!(store.load("nope"), Err(Error::NotFound(_))));
        store.persist(&record("c"), &artifacts()).unwrap();
        let p = store.run_dir("c").join("checkpoints/robot.json");
        let mut b = fs::read(&p).unwrap();
        b[0] ^= 1;
        fs::write(&p, b).unwrap();
        assert!(matches!(store.load("c"), Err(Error::Corruption { .. })));
    }

    #[test]
    fn torn_manifest_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        store.persist(&record("d"), &artifacts()).unwrap();
        let mut f = OpenOptions::new()
            .append(true)
            .open(store.manifest_path())
            .unwrap();
        f.write_all(b"{\"checksum\":\"ab").unwrap();
        assert_eq!(store.records().unwrap().len(), 1);
    }

    #[test]
    fn status_only_moves_forward() {
        assert!(RunStatus::Running.can_become(RunStatus::Done));
        assert!(RunStatus::Running.can_become(RunStatus::Failed));
        assert!(!RunStatus::Done.can_become(RunStatus::Running));
        assert!(!RunStatus::Failed.can_become(RunStatus::Done));
    }
}
