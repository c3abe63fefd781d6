//! Transactional persistence for a [`Roster`].
//!
//! Each entity is one row in a redb table. A transaction clones the cached
//! roster, applies a closure, diffs the encoded rows and writes only what
//! changed. Every committed transaction bumps a global generation and the
//! version counter of each schedule whose shifts, settings or requests moved.
//!
//! File-backed stores open the database for the duration of a single
//! transaction, so several processes (the service and `rosterctl`) can share a
//! data directory. A process that finds the file locked retries with backoff.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use redb::{Database, ReadableDatabase, ReadableTable, TableDefinition};
use rosterd_core::model::{Roster, ScheduleId, ShiftId};
use serde_json::Value;
use thiserror::Error;

const ROWS: TableDefinition<&str, &[u8]> = TableDefinition::new("rows");
const VERSIONS: TableDefinition<u64, u64> = TableDefinition::new("schedule_versions");
const META: TableDefinition<&str, u64> = TableDefinition::new("meta");

/// Roster fields stored one row per map entry.
const MAP_FIELDS: &[&str] = &[
    "accounts",
    "locations",
    "departments",
    "positions",
    "schedules",
    "shifts",
    "time_off",
    "requests",
    "announcements",
    "external_events",
    "tombstones",
];
const LIST_FIELDS: &[&str] = &["outbox"];

pub const DB_FILE: &str = "rosterd.redb";
const OPEN_ATTEMPTS: u32 = 400;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("stored data is unreadable: {0}")]
    Corrupt(String),
    #[error("database stayed locked by another process")]
    Busy,
}

impl From<redb::Error> for StoreError {
    fn from(e: redb::Error) -> Self {
        StoreError::Storage(e.to_string())
    }
}

macro_rules! storage_from {
    ($($t:ty),*) => {$(
        impl From<$t> for StoreError {
            fn from(e: $t) -> Self {
                StoreError::from(redb::Error::from(e))
            }
        }
    )*};
}
storage_from!(redb::DatabaseError, redb::TransactionError, redb::TableError, redb::StorageError, redb::CommitError);

#[derive(Debug, Error)]
pub enum TxError<E> {
    #[error("schedule {schedule} is at version {actual}, expected {expected}")]
    VersionConflict { schedule: ScheduleId, expected: u64, actual: u64 },
    #[error(transparent)]
    Domain(E),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// A consistent read view.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub roster: Arc<Roster>,
    pub generation: u64,
    pub versions: Arc<BTreeMap<ScheduleId, u64>>,
}

impl Snapshot {
    pub fn version(&self, schedule: ScheduleId) -> u64 {
        self.versions.get(&schedule).copied().unwrap_or(0)
    }
}

#[derive(Debug)]
pub struct Committed<T> {
    pub value: T,
    pub generation: u64,
    /// New version of every schedule the transaction touched.
    pub touched: BTreeMap<ScheduleId, u64>,
}

enum Backend {
    File(PathBuf),
    Memory(Database),
}

struct State {
    roster: Arc<Roster>,
    rows: BTreeMap<String, Vec<u8>>,
    generation: u64,
    versions: Arc<BTreeMap<ScheduleId, u64>>,
}

pub struct Store {
    backend: Backend,
    state: Mutex<State>,
}

enum Db<'a> {
    Owned(Database),
    Shared(&'a Database),
}

impl std::ops::Deref for Db<'_> {
    type Target = Database;
    fn deref(&self) -> &Database {
        match self {
            Db::Owned(d) => d,
            Db::Shared(d) => d,
        }
    }
}

impl Store {
    /// Opens (creating when needed) the store inside `dir`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| StoreError::Storage(format!("{}: {e}", dir.display())))?;
        let store = Store { backend: Backend::File(dir.join(DB_FILE)), state: Mutex::new(State::empty()) };
        store.refresh()?;
        Ok(store)
    }

    /// A store that lives only as long as this value.
    pub fn memory() -> Result<Self, StoreError> {
        let db = Database::builder().create_with_backend(redb::backends::InMemoryBackend::new())?;
        init(&db)?;
        Ok(Store { backend: Backend::Memory(db), state: Mutex::new(State::empty()) })
    }

    pub fn snapshot(&self) -> Result<Snapshot, StoreError> {
        let mut state = self.lock();
        if let Backend::File(_) = self.backend {
            let db = self.db()?;
            sync(&db, &mut state)?;
        }
        Ok(state.snapshot())
    }

    fn refresh(&self) -> Result<(), StoreError> {
        let mut state = self.lock();
        let db = self.db()?;
        sync(&db, &mut state)
    }

    /// Applies `f` atomically. `expect` lists schedule versions the caller read;
    /// any mismatch aborts before `f` runs.
    pub fn transact<T, E>(
        &self,
        expect: &[(ScheduleId, u64)],
        f: impl FnOnce(&mut Roster) -> Result<T, E>,
    ) -> Result<Committed<T>, TxError<E>> {
        let mut state = self.lock();
        let db = self.db()?;
        sync(&db, &mut state)?;
        for &(schedule, expected) in expect {
            let actual = state.versions.get(&schedule).copied().unwrap_or(0);
            if actual != expected {
                return Err(TxError::VersionConflict { schedule, expected, actual });
            }
        }
        let mut next = (*state.roster).clone();
        let value = f(&mut next).map_err(TxError::Domain)?;
        let rows = encode(&next)?;
        let changed: Vec<&String> = rows.iter().filter(|(k, v)| state.rows.get(*k) != Some(v)).map(|(k, _)| k).collect();
        let removed: Vec<&String> = state.rows.keys().filter(|k| !rows.contains_key(*k)).collect();
        if changed.is_empty() && removed.is_empty() {
            return Ok(Committed { value, generation: state.generation, touched: BTreeMap::new() });
        }
        let touched_ids = touched_schedules(&state.roster, &next, changed.iter().chain(removed.iter()).map(|k| k.as_str()));

        let mut versions = (*state.versions).clone();
        let generation = state.generation + 1;
        let txn = db.begin_write().map_err(StoreError::from)?;
        {
            let mut table = txn.open_table(ROWS).map_err(StoreError::from)?;
            for key in &changed {
                table.insert(key.as_str(), rows[*key].as_slice()).map_err(StoreError::from)?;
            }
            for key in &removed {
                table.remove(key.as_str()).map_err(StoreError::from)?;
            }
            let mut vt = txn.open_table(VERSIONS).map_err(StoreError::from)?;
            for id in &touched_ids {
                let v = versions.entry(*id).or_insert(0);
                *v += 1;
                vt.insert(id.0, *v).map_err(StoreError::from)?;
            }
            let mut meta = txn.open_table(META).map_err(StoreError::from)?;
            meta.insert("generation", generation).map_err(StoreError::from)?;
        }
        txn.commit().map_err(StoreError::from)?;
        let touched = touched_ids.iter().map(|id| (*id, versions[id])).collect();
        tracing::debug!(generation, rows = changed.len() + removed.len(), "committed");
        *state = State { roster: Arc::new(next), rows, generation, versions: Arc::new(versions) };
        Ok(Committed { value, generation, touched })
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn db(&self) -> Result<Db<'_>, StoreError> {
        match &self.backend {
            Backend::Memory(db) => Ok(Db::Shared(db)),
            Backend::File(path) => {
                let mut delay = Duration::from_millis(1);
                for _ in 0..OPEN_ATTEMPTS {
                    match Database::create(path) {
                        Ok(db) => {
                            init(&db)?;
                            return Ok(Db::Owned(db));
                        }
                        Err(redb::DatabaseError::DatabaseAlreadyOpen) => {
                            std::thread::sleep(delay);
                            delay = (delay * 2).min(Duration::from_millis(20));
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
                Err(StoreError::Busy)
            }
        }
    }
}

impl State {
    fn empty() -> Self {
        State { roster: Arc::new(Roster::new()), rows: BTreeMap::new(), generation: 0, versions: Arc::new(BTreeMap::new()) }
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot { roster: self.roster.clone(), generation: self.generation, versions: self.versions.clone() }
    }
}

fn init(db: &Database) -> Result<(), StoreError> {
    let txn = db.begin_write()?;
    txn.open_table(ROWS)?;
    txn.open_table(VERSIONS)?;
    txn.open_table(META)?;
    txn.commit()?;
    Ok(())
}

/// Reloads the cache when another process committed since we last looked.
fn sync(db: &Database, state: &mut State) -> Result<(), StoreError> {
    let txn = db.begin_read()?;
    let meta = txn.open_table(META)?;
    let generation = meta.get("generation")?.map(|g| g.value()).unwrap_or(0);
    if generation == state.generation {
        return Ok(());
    }
    let mut rows = BTreeMap::new();
    for item in txn.open_table(ROWS)?.iter()? {
        let (k, v) = item?;
        rows.insert(k.value().to_string(), v.value().to_vec());
    }
    let mut versions = BTreeMap::new();
    for item in txn.open_table(VERSIONS)?.iter()? {
        let (k, v) = item?;
        versions.insert(ScheduleId(k.value()), v.value());
    }
    let roster = decode(&rows)?;
    *state = State { roster: Arc::new(roster), rows, generation, versions: Arc::new(versions) };
    Ok(())
}

fn encode(r: &Roster) -> Result<BTreeMap<String, Vec<u8>>, StoreError> {
    let corrupt = |e: serde_json::Error| StoreError::Corrupt(e.to_string());
    let Value::Object(fields) = serde_json::to_value(r).map_err(corrupt)? else {
        return Err(StoreError::Corrupt("roster is not an object".into()));
    };
    let mut rows = BTreeMap::new();
    for (field, value) in fields {
        match value {
            Value::Object(map) if MAP_FIELDS.contains(&field.as_str()) => {
                for (k, v) in map {
                    rows.insert(format!("{field}/{k}"), serde_json::to_vec(&v).map_err(corrupt)?);
                }
            }
            Value::Array(items) if LIST_FIELDS.contains(&field.as_str()) => {
                for (i, v) in items.into_iter().enumerate() {
                    rows.insert(format!("{field}/{i:010}"), serde_json::to_vec(&v).map_err(corrupt)?);
                }
            }
            other => {
                rows.insert(field, serde_json::to_vec(&other).map_err(corrupt)?);
            }
        }
    }
    Ok(rows)
}

fn decode(rows: &BTreeMap<String, Vec<u8>>) -> Result<Roster, StoreError> {
    let corrupt = |k: &str, e: serde_json::Error| StoreError::Corrupt(format!("{k}: {e}"));
    let mut fields = serde_json::Map::new();
    for f in MAP_FIELDS {
        fields.insert((*f).into(), Value::Object(Default::default()));
    }
    for f in LIST_FIELDS {
        fields.insert((*f).into(), Value::Array(Vec::new()));
    }
    for (key, bytes) in rows {
        let value: Value = serde_json::from_slice(bytes).map_err(|e| corrupt(key, e))?;
        match key.split_once('/') {
            Some((field, id)) if MAP_FIELDS.contains(&field) => {
                if let Some(Value::Object(m)) = fields.get_mut(field) {
                    m.insert(id.into(), value);
                }
            }
            Some((field, _)) if LIST_FIELDS.contains(&field) => {
                if let Some(Value::Array(a)) = fields.get_mut(field) {
                    a.push(value);
                }
            }
            _ => {
                fields.insert(key.clone(), value);
            }
        }
    }
    serde_json::from_value(Value::Object(fields)).map_err(|e| corrupt("roster", e))
}

fn touched_schedules<'a>(old: &Roster, new: &Roster, keys: impl Iterator<Item = &'a str>) -> BTreeSet<ScheduleId> {
    let mut out = BTreeSet::new();
    let shift_schedule = |id: ShiftId| new.shifts.get(&id).or_else(|| old.shifts.get(&id)).map(|s| s.schedule);
    for key in keys {
        let Some((field, id)) = key.split_once('/') else { continue };
        let Ok(id) = id.parse::<u64>() else { continue };
        match field {
            "schedules" => {
                out.insert(ScheduleId(id));
            }
            "shifts" => {
                for r in [old, new] {
                    if let Some(s) = r.shifts.get(&ShiftId(id)) {
                        out.insert(s.schedule);
                    }
                }
            }
            "requests" => {
                let req = new.requests.get(&rosterd_core::model::RequestId(id)).or_else(|| old.requests.get(&rosterd_core::model::RequestId(id)));
                if let Some(s) = req.and_then(|r| shift_schedule(r.shift)) {
                    out.insert(s);
                }
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rosterd_core::testkit::{random_world, Knobs};

    #[test]
    fn rows_round_trip() {
        for seed in 0..20 {
            let w = random_world(seed, &Knobs::default());
            let rows = encode(&w.roster).unwrap();
            assert!(rows.keys().any(|k| k.starts_with("shifts/")));
            assert_eq!(decode(&rows).unwrap(), w.roster);
        }
    }

    #[test]
    fn empty_roster_round_trips() {
        let r = Roster::new();
        assert_eq!(decode(&encode(&r).unwrap()).unwrap(), r);
    }
}
