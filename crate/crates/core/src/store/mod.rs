//! File-backed stores for the QUERY, DISPLAY, ORDER, BIBLIO and customer
//! data, plus the STAT directory of precomputed reports.
//!
//! Layout under the store root:
//!
//! ```text
//! manifest.json        committed record counts, batch hashes, snapshots
//! query.jsonl          one record per line, append-only
//! display.jsonl
//! order.jsonl
//! biblio.jsonl
//! customer.jsonl
//! stat/<periodicity>/<start>.json
//! ```
//!
//! Records are appended and fsynced before the manifest is atomically
//! replaced; readers only see the committed prefix of each file, so a torn
//! batch is never observed.

mod enrich;

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use enrich::{
    apply_customers, enrich, read_biblio_jsonl, read_customers_csv, BiblioIndex, BiblioRecord,
    CustomerAttributes, CustomerIndex, EnrichedEvent, JoinStatus, Timestamped, UsageEvent,
};

use crate::error::{Error, Result};
use crate::ingest::{DisplayRecord, OrderRecord, QueryRecord};
use crate::time::{serde_ts, Period, Timestamp};

const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".lock";
const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreKind {
    Query,
    Display,
    Order,
    Biblio,
    Customer,
}

impl StoreKind {
    pub const ALL: [StoreKind; 5] = [Self::Query, Self::Display, Self::Order, Self::Biblio, Self::Customer];

    pub fn name(self) -> &'static str {
        match self {
            Self::Query => "query",
            Self::Display => "display",
            Self::Order => "order",
            Self::Biblio => "biblio",
            Self::Customer => "customer",
        }
    }

    fn file_name(self) -> String {
        format!("{}.jsonl", self.name())
    }
}

/// A record type persisted in one of the JSONL stores.
pub trait StoreRecord: Serialize + DeserializeOwned {
    const KIND: StoreKind;

    /// Unique key, for stores that enforce one.
    fn key(&self) -> Option<&str> {
        None
    }

    fn event_time(&self) -> Option<Timestamp> {
        None
    }
}

impl StoreRecord for QueryRecord {
    const KIND: StoreKind = StoreKind::Query;
    fn event_time(&self) -> Option<Timestamp> {
        Some(self.timestamp)
    }
}

impl StoreRecord for DisplayRecord {
    const KIND: StoreKind = StoreKind::Display;
    fn event_time(&self) -> Option<Timestamp> {
        Some(self.timestamp)
    }
}

impl StoreRecord for OrderRecord {
    const KIND: StoreKind = StoreKind::Order;
    fn event_time(&self) -> Option<Timestamp> {
        Some(self.timestamp)
    }
}

impl StoreRecord for BiblioRecord {
    const KIND: StoreKind = StoreKind::Biblio;
    fn key(&self) -> Option<&str> {
        Some(&self.record_id)
    }
}

impl StoreRecord for CustomerAttributes {
    const KIND: StoreKind = StoreKind::Customer;
    fn key(&self) -> Option<&str> {
        Some(&self.customer_id)
    }
}

/// Earliest and latest event timestamps, both inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSpan {
    #[serde(with = "serde_ts")]
    pub first: Timestamp,
    #[serde(with = "serde_ts")]
    pub last: Timestamp,
}

impl TimeSpan {
    fn merge(a: Option<TimeSpan>, b: Option<TimeSpan>) -> Option<TimeSpan> {
        match (a, b) {
            (Some(a), Some(b)) => Some(TimeSpan {
                first: a.first.min(b.first),
                last: a.last.max(b.last),
            }),
            (a, b) => a.or(b),
        }
    }

    fn of<T: StoreRecord>(records: &[T]) -> Option<TimeSpan> {
        records
            .iter()
            .filter_map(StoreRecord::event_time)
            .fold(None, |span, ts| TimeSpan::merge(span, Some(TimeSpan { first: ts, last: ts })))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreSnapshot {
    pub snapshot_id: u64,
    pub time_range: Option<TimeSpan>,
    pub counts: BTreeMap<StoreKind, u64>,
    /// SHA-256 over the committed content of every store, in [`StoreKind::ALL`] order.
    pub content_hash: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct StoreState {
    records: u64,
    batches: Vec<String>,
    time_range: Option<TimeSpan>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: u32,
    stores: BTreeMap<StoreKind, StoreState>,
    snapshots: Vec<StoreSnapshot>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            format: MANIFEST_FORMAT,
            stores: StoreKind::ALL.into_iter().map(|k| (k, StoreState::default())).collect(),
            snapshots: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImportStatus {
    Appended,
    /// The byte-identical batch was already imported; nothing changed.
    DuplicateBatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportOutcome {
    pub status: ImportStatus,
    pub snapshot: StoreSnapshot,
}

pub struct Datastore {
    root: PathBuf,
    manifest: Manifest,
}

struct WriteLock(PathBuf);

impl WriteLock {
    fn acquire(root: &Path) -> Result<Self> {
        let path = root.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(WriteLock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

impl Drop for WriteLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

impl Datastore {
    /// Opens (creating if needed) a store root and verifies the latest snapshot hash.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let manifest_path = root.join(MANIFEST);
        let manifest = if manifest_path.exists() {
            let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
            let manifest: Manifest = serde_json::from_str(&text)?;
            if manifest.format != MANIFEST_FORMAT {
                return Err(Error::Corrupted(format!("unsupported manifest format {}", manifest.format)));
            }
            manifest
        } else {
            Manifest::default()
        };
        let store = Datastore { root, manifest };
        if let Some(latest) = store.manifest.snapshots.last() {
            let actual = store.content_hash()?;
            if actual != latest.content_hash {
                return Err(Error::Corrupted(format!(
                    "snapshot {} hash mismatch: manifest {}, content {actual}",
                    latest.snapshot_id, latest.content_hash
                )));
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn snapshots(&self) -> &[StoreSnapshot] {
        &self.manifest.snapshots
    }

    pub fn latest_snapshot(&self) -> Option<&StoreSnapshot> {
        self.manifest.snapshots.last()
    }

    pub fn count(&self, kind: StoreKind) -> u64 {
        self.manifest.stores.get(&kind).map_or(0, |s| s.records)
    }

    /// Time span of every committed event across the event stores.
    pub fn time_range(&self) -> Option<TimeSpan> {
        self.manifest
            .stores
            .values()
            .fold(None, |acc, s| TimeSpan::merge(acc, s.time_range))
    }

    fn path(&self, kind: StoreKind) -> PathBuf {
        self.root.join(kind.file_name())
    }

    /// Appends one batch and records a new snapshot.
    pub fn import<T: StoreRecord>(&mut self, records: &[T]) -> Result<ImportOutcome> {
        let _lock = WriteLock::acquire(&self.root)?;
        let kind = T::KIND;
        let lines = records
            .iter()
            .map(serde_json::to_string)
            .collect::<serde_json::Result<Vec<_>>>()?;

        let mut hasher = Sha256::new();
        hasher.update(kind.name().as_bytes());
        for line in &lines {
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        let batch_hash = hex::encode(hasher.finalize());

        let state = self.manifest.stores.entry(kind).or_default();
        if state.batches.contains(&batch_hash) {
            let snapshot = self
                .latest_snapshot()
                .cloned()
                .ok_or_else(|| Error::Corrupted("batch recorded without a snapshot".into()))?;
            return Ok(ImportOutcome {
                status: ImportStatus::DuplicateBatch,
                snapshot,
            });
        }

        if records.iter().any(|r| r.key().is_some()) {
            let mut seen: HashSet<String> = self
                .load::<T>()?
                .iter()
                .filter_map(|r| r.key().map(str::to_owned))
                .collect();
            for key in records.iter().filter_map(StoreRecord::key) {
                if !seen.insert(key.to_owned()) {
                    return Err(Error::DuplicateKey {
                        store: kind.name(),
                        key: key.to_owned(),
                    });
                }
            }
        }

        let path = self.path(kind);
        let committed = self.count(kind);
        self.truncate_to_committed(kind, committed)?;
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut buf = String::new();
        for line in &lines {
            buf.push_str(line);
            buf.push('\n');
        }
        file.write_all(buf.as_bytes()).map_err(|e| Error::io(&path, e))?;
        file.sync_all().map_err(|e| Error::io(&path, e))?;

        let state = self.manifest.stores.entry(kind).or_default();
        state.records += records.len() as u64;
        state.batches.push(batch_hash);
        state.time_range = TimeSpan::merge(state.time_range, TimeSpan::of(records));

        let snapshot = StoreSnapshot {
            snapshot_id: self.manifest.snapshots.len() as u64 + 1,
            time_range: self.time_range(),
            counts: self.manifest.stores.iter().map(|(k, s)| (*k, s.records)).collect(),
            content_hash: self.content_hash()?,
        };
        self.manifest.snapshots.push(snapshot.clone());
        self.write_manifest()?;
        Ok(ImportOutcome {
            status: ImportStatus::Appended,
            snapshot,
        })
    }

    /// Drops any uncommitted tail left by an interrupted batch.
    fn truncate_to_committed(&self, kind: StoreKind, committed: u64) -> Result<()> {
        let path = self.path(kind);
        if !path.exists() {
            return Ok(());
        }
        let lines = self.committed_lines(kind, u64::MAX)?;
        if lines.len() as u64 > committed {
            let mut text = String::new();
            for line in lines.iter().take(committed as usize) {
                text.push_str(line);
                text.push('\n');
            }
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    fn committed_lines(&self, kind: StoreKind, limit: u64) -> Result<Vec<String>> {
        let path = self.path(kind);
        if !path.exists() || limit == 0 {
            return Ok(Vec::new());
        }
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = Vec::new();
        for line in BufReader::new(file).lines() {
            if out.len() as u64 >= limit {
                break;
            }
            out.push(line.map_err(|e| Error::io(&path, e))?);
        }
        Ok(out)
    }

    fn content_hash(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        for kind in StoreKind::ALL {
            hasher.update(kind.name().as_bytes());
            hasher.update(b"\n");
            for line in self.committed_lines(kind, self.count(kind))? {
                hasher.update(line.as_bytes());
                hasher.update(b"\n");
            }
        }
        Ok(hex::encode(hasher.finalize()))
    }

    fn write_manifest(&self) -> Result<()> {
        let path = self.root.join(MANIFEST);
        let tmp = self.root.join(format!("{MANIFEST}.tmp"));
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        let mut file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        file.write_all(text.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
        file.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Every committed record of a store, in insertion order.
    pub fn load<T: StoreRecord>(&self) -> Result<Vec<T>> {
        let kind = T::KIND;
        self.committed_lines(kind, self.count(kind))?
            .iter()
            .enumerate()
            .map(|(idx, line)| {
                serde_json::from_str(line).map_err(|e| {
                    Error::Corrupted(format!("{} line {}: {e}", kind.file_name(), idx + 1))
                })
            })
            .collect()
    }

    pub fn select<T: StoreRecord + Timestamped + Clone>(
        &self,
        period: &Period,
        filter: impl Fn(&T) -> bool,
    ) -> Result<Vec<T>> {
        Ok(select(&self.load::<T>()?, period, filter))
    }

    pub fn biblio_index(&self) -> Result<BiblioIndex> {
        Ok(BiblioIndex::new(self.load::<BiblioRecord>()?))
    }

    pub fn customer_index(&self) -> Result<CustomerIndex> {
        Ok(CustomerIndex::new(self.load::<CustomerAttributes>()?))
    }

    /// Display events joined with BIBLIO.
    pub fn enriched_displays(&self) -> Result<Vec<EnrichedEvent<DisplayRecord>>> {
        Ok(enrich(&self.load::<DisplayRecord>()?, &self.biblio_index()?))
    }

    /// Order events completed from the customer table, then joined with BIBLIO.
    pub fn enriched_orders(&self) -> Result<Vec<EnrichedEvent<OrderRecord>>> {
        let orders = apply_customers(&self.load::<OrderRecord>()?, &self.customer_index()?);
        Ok(enrich(&orders, &self.biblio_index()?))
    }

    pub fn stat_dir(&self) -> PathBuf {
        self.root.join("stat")
    }
}

/// Records with `period.start <= t < period.end` that pass `filter`, sorted by
/// timestamp with ties kept in input order.
pub fn select<T: Timestamped + Clone>(records: &[T], period: &Period, filter: impl Fn(&T) -> bool) -> Vec<T> {
    let mut out: Vec<T> = records
        .iter()
        .filter(|r| period.contains(&r.timestamp()) && filter(r))
        .cloned()
        .collect();
    out.sort_by_key(Timestamped::timestamp);
    out
}
