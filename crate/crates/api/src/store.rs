//! Sessions and their append-only event logs.
//!
//! Each session lives in `<data_dir>/sessions/<id>.jsonl`, one JSON event per
//! line. The in-memory state is the fold of those events, so a restart
//! rebuilds every session by replaying its file.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use uuid::Uuid;

use wavetrade_core::checker::{check_sequence, CheckerConfig};
use wavetrade_core::ledger::{Ledger, LedgerRow, Trade};
use wavetrade_core::margin::CommissionSchedule;
use wavetrade_core::strategy::{Backtest, BacktestSummary};
use wavetrade_core::ComparisonSummary;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    #[serde(default)]
    pub checker: CheckerConfig,
    #[serde(default)]
    pub commission: CommissionSchedule,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.checker.validate().map_err(|e| e.to_string())?;
        self.commission.validate().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        config: SessionConfig,
        at: u64,
    },
    Commit {
        trade: Trade,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        key: Option<String>,
        at: u64,
    },
    Import {
        trades: Vec<Trade>,
        at: u64,
    },
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: Uuid,
    pub config: SessionConfig,
    pub ledger: Ledger,
    /// Idempotency key of each committed row, by row index.
    keys: Vec<Option<String>>,
    pub created: u64,
    pub updated: u64,
    log: Option<PathBuf>,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl Session {
    fn from_events(id: Uuid, events: Vec<Event>, log: Option<PathBuf>) -> io::Result<Self> {
        let mut iter = events.into_iter();
        let Some(Event::Created { config, at }) = iter.next() else {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "log does not start with `created`"));
        };
        let mut s = Session {
            id,
            config,
            ledger: Ledger::new(),
            keys: Vec::new(),
            created: at,
            updated: at,
            log,
        };
        for e in iter {
            s.apply(&e)
                .map_err(|m| io::Error::new(io::ErrorKind::InvalidData, m))?;
        }
        Ok(s)
    }

    fn apply(&mut self, event: &Event) -> Result<(), String> {
        match event {
            Event::Created { .. } => return Err("duplicate `created` event".into()),
            Event::Commit { trade, key, at } => {
                self.ledger.append(*trade).map_err(|e| e.to_string())?;
                self.keys.push(key.clone());
                self.updated = *at;
            }
            Event::Import { trades, at } => {
                self.ledger = Ledger::from_trades(trades.iter().copied()).map_err(|e| e.to_string())?;
                self.keys = vec![None; trades.len()];
                self.updated = *at;
            }
        }
        Ok(())
    }

    /// Persist `event`, then apply it.
    pub fn record(&mut self, event: Event) -> Result<(), String> {
        let mut next = self.clone();
        next.apply(&event)?;
        if let Some(path) = &self.log {
            append_event(path, &event).map_err(|e| format!("cannot write session log: {e}"))?;
        }
        *self = next;
        Ok(())
    }

    pub fn history(&self) -> Vec<Trade> {
        self.ledger.trades().copied().collect()
    }

    /// The row committed earlier under `key`, if any.
    pub fn row_for_key(&self, key: &str) -> Option<&LedgerRow> {
        self.keys
            .iter()
            .position(|k| k.as_deref() == Some(key))
            .map(|i| &self.ledger.rows()[i])
    }

    /// Index of the first trade in `trades` the checker rejects.
    pub fn first_infeasible(&self, trades: &[Trade]) -> Option<(usize, wavetrade_core::Verdict)> {
        check_sequence(trades, &self.config.checker)
            .into_iter()
            .enumerate()
            .find(|(_, v)| !v.ok)
    }
}

fn append_event(path: &Path, event: &Event) -> io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_string(event).map_err(io::Error::other)?;
    line.push('\n');
    f.write_all(line.as_bytes())?;
    f.sync_data()
}

fn read_events(path: &Path) -> io::Result<Vec<Event>> {
    let mut events = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
    }
    Ok(events)
}

/// A finished backtest kept for its table links.
#[derive(Debug)]
pub struct BacktestRecord {
    pub run: Backtest,
    pub summary: BacktestSummary,
    pub comparison: Option<ComparisonSummary>,
}

#[derive(Debug, Default)]
pub struct Store {
    sessions: DashMap<Uuid, Arc<Mutex<Session>>>,
    pub backtests: DashMap<Uuid, Arc<BacktestRecord>>,
    dir: Option<PathBuf>,
}

impl Store {
    /// A store that keeps sessions in memory only.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// A store persisted under `dir`, loading any sessions already there.
    pub fn open(dir: &Path) -> io::Result<Self> {
        let sessions_dir = dir.join("sessions");
        fs::create_dir_all(&sessions_dir)?;
        let store = Self {
            dir: Some(sessions_dir.clone()),
            ..Self::default()
        };
        for entry in fs::read_dir(&sessions_dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| Uuid::parse_str(s).ok())
            else {
                continue;
            };
            let session = Session::from_events(id, read_events(&path)?, Some(path.clone()))
                .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
            store.sessions.insert(id, Arc::new(Mutex::new(session)));
        }
        Ok(store)
    }

    pub fn create(&self, config: SessionConfig) -> io::Result<Uuid> {
        let id = Uuid::new_v4();
        let at = now_ms();
        let log = self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")));
        let event = Event::Created { config: config.clone(), at };
        if let Some(path) = &log {
            append_event(path, &event)?;
        }
        let session = Session::from_events(id, vec![event], log)?;
        self.sessions.insert(id, Arc::new(Mutex::new(session)));
        Ok(id)
    }

    pub fn get(&self, id: &Uuid) -> Option<Arc<Mutex<Session>>> {
        self.sessions.get(id).map(|s| Arc::clone(s.value()))
    }
}
