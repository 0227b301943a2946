use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Usage;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("usage ledger I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("usage ledger {path}: line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("usage ledger totals drifted from per-call records for {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_id: Option<String>,
    pub model_id: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub timestamp: DateTime<Utc>,
}

impl UsageRecord {
    pub fn now(paper_id: Option<&str>, model_id: &str, usage: Usage) -> Self {
        UsageRecord {
            paper_id: paper_id.map(String::from),
            model_id: model_id.to_string(),
            input_tokens: usage.input_tokens,
            output_tokens: usage.output_tokens,
            timestamp: Utc::now(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl UsageTotals {
    pub fn total_tokens(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }

    fn add(&mut self, r: &UsageRecord) {
        self.calls += 1;
        self.input_tokens += r.input_tokens;
        self.output_tokens += r.output_tokens;
    }
}

/// Exact per-model sums.
pub fn usage_totals<'a>(records: impl IntoIterator<Item = &'a UsageRecord>) -> BTreeMap<String, UsageTotals> {
    let mut out: BTreeMap<String, UsageTotals> = BTreeMap::new();
    for r in records {
        out.entry(r.model_id.clone()).or_default().add(r);
    }
    out
}

#[derive(Debug, Default)]
struct Inner {
    records: Vec<UsageRecord>,
    totals: BTreeMap<String, UsageTotals>,
    file: Option<File>,
}

/// Per-call usage, optionally mirrored to a JSONL file.
#[derive(Debug, Default)]
pub struct UsageLedger {
    inner: Mutex<Inner>,
    path: Option<PathBuf>,
}

impl UsageLedger {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a JSONL ledger, loading existing entries.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LedgerError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut inner = Inner::default();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<UsageRecord>(&line) {
                    Ok(r) => {
                        inner.totals.entry(r.model_id.clone()).or_default().add(&r);
                        inner.records.push(r);
                    }
                    // a torn final line from an interrupted run
                    Err(e) if e.is_eof() => {}
                    Err(e) => {
                        return Err(LedgerError::Corrupt {
                            path,
                            line: i + 1,
                            message: e.to_string(),
                        })
                    }
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        // seal a torn tail so the next entry starts on its own line
        let len = file.metadata()?.len();
        if len > 0 && std::fs::read(&path)?.last() != Some(&b'\n') {
            file.write_all(b"\n")?;
        }
        inner.file = Some(file);
        Ok(UsageLedger {
            inner: Mutex::new(inner),
            path: Some(path),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn record(&self, record: UsageRecord) -> Result<(), LedgerError> {
        let mut inner = self.lock();
        if let Some(file) = inner.file.as_mut() {
            let mut line = serde_json::to_string(&record).expect("usage record serializes");
            line.push('\n');
            file.write_all(line.as_bytes())?;
        }
        inner.totals.entry(record.model_id.clone()).or_default().add(&record);
        inner.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> Vec<UsageRecord> {
        self.lock().records.clone()
    }

    pub fn totals(&self) -> BTreeMap<String, UsageTotals> {
        self.lock().totals.clone()
    }

    /// Flushes the file and checks running totals against the records.
    pub fn flush(&self) -> Result<(), LedgerError> {
        let mut inner = self.lock();
        if let Some(file) = inner.file.as_mut() {
            file.flush()?;
            file.sync_data()?;
        }
        let recomputed = usage_totals(&inner.records);
        for (model, t) in &inner.totals {
            if recomputed.get(model) != Some(t) {
                return Err(LedgerError::Inconsistent(model.clone()));
            }
        }
        if recomputed.len() != inner.totals.len() {
            return Err(LedgerError::Inconsistent("model set".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(model: &str, i: u64, o: u64) -> UsageRecord {
        UsageRecord::now(Some("x"), model, Usage {
            input_tokens: i,
            output_tokens: o,
        })
    }

    #[test]
    fn empty_totals() {
        assert!(usage_totals(&[]).is_empty());
        assert!(UsageLedger::in_memory().totals().is_empty());
    }

    #[test]
    fn hand_sum() {
        let l = UsageLedger::in_memory();
        l.record(rec("a", 100, 10)).unwrap();
        l.record(rec("a", 250, 30)).unwrap();
        l.record(rec("b", 7, 3)).unwrap();
        l.flush().unwrap();
        let t = l.totals();
        assert_eq!(t["a"], UsageTotals { calls: 2, input_tokens: 350, output_tokens: 40 });
        assert_eq!(t["b"].total_tokens(), 10);
    }

    #[test]
    fn paper_scale_total() {
        let per_call = rec("m", 25_000, 750);
        let records = vec![per_call; 50_000];
        let t = usage_totals(&records)["m"];
        assert_eq!(t.total_tokens(), 1_287_500_000);
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("usage.jsonl");
        {
            let l = UsageLedger::open(&path).unwrap();
            l.record(rec("a", 1, 2)).unwrap();
            l.flush().unwrap();
        }
        // simulate a torn write
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"model_id\":\"a\",\"inp").unwrap();
        drop(f);
        let l = UsageLedger::open(&path).unwrap();
        l.record(rec("a", 3, 4)).unwrap();
        l.flush().unwrap();
        drop(l);
        let l = UsageLedger::open(&path).unwrap();
        assert_eq!(l.totals()["a"], UsageTotals { calls: 2, input_tokens: 4, output_tokens: 6 });
    }
}
