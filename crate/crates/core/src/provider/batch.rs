use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::task::JoinSet;
use tracing::{info, warn};

use super::{Client, ProviderError, ProviderResponse};
use crate::prompting::PromptBundle;

#[derive(Debug, Clone)]
pub struct Job {
    pub paper_id: String,
    pub bundle: PromptBundle,
}

/// What the sink did with a completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SinkVerdict {
    Accepted,
    /// Unusable response; the job counts as failed.
    Rejected(String),
    /// Unusable response; dispatch the job again.
    Resubmit(String),
}

/// Consumer of completions. Called from one task only.
pub trait BatchSink: Send {
    fn contains(&self, paper_id: &str) -> bool;
    fn accept(
        &mut self,
        paper_id: &str,
        response: &ProviderResponse,
    ) -> Result<SinkVerdict, Box<dyn std::error::Error + Send + Sync>>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub completed: usize,
    pub failed: usize,
    pub skipped: usize,
}

/// One line of the failure list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub id: String,
    pub error_class: String,
    pub attempts: u32,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("sink write failed for {id}: {source}")]
    Sink {
        id: String,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("worker task failed: {0}")]
    Worker(String),
    #[error("failure list: {0}")]
    FailureList(#[from] std::io::Error),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

struct FailureLog {
    file: Option<std::fs::File>,
}

impl FailureLog {
    fn open(path: Option<&Path>) -> std::io::Result<Self> {
        let file = match path {
            Some(p) => {
                if let Some(parent) = p.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                Some(OpenOptions::new().create(true).append(true).open(p)?)
            }
            None => None,
        };
        Ok(FailureLog { file })
    }

    fn write(&mut self, entry: &FailureEntry) -> std::io::Result<()> {
        warn!(id = %entry.id, class = %entry.error_class, "job failed: {}", entry.message);
        if let Some(f) = self.file.as_mut() {
            let mut line = serde_json::to_string(entry).expect("failure entry serializes");
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        Ok(())
    }
}

/// Runs every job not already in the sink, at most `max_concurrency` at a
/// time. Completions reach the sink in completion order. Provider failures
/// go to the failure list; a sink error aborts the batch.
pub async fn run_batch(
    client: Arc<Client>,
    jobs: impl IntoIterator<Item = Job>,
    sink: &mut dyn BatchSink,
    failure_list: Option<&Path>,
) -> Result<BatchSummary, BatchError> {
    let mut summary = BatchSummary::default();
    let mut failures = FailureLog::open(failure_list)?;
    let limit = client.config().max_concurrency.max(1);
    let mut seen = HashSet::new();
    let mut pending = jobs.into_iter();
    let mut running: JoinSet<(Job, Result<ProviderResponse, ProviderError>)> = JoinSet::new();
    let mut retry_queue: Vec<Job> = Vec::new();

    let spawn = |running: &mut JoinSet<_>, job: Job| {
        let client = client.clone();
        running.spawn(async move {
            let r = client
                .submit_one(Some(&job.paper_id), &job.bundle.system_text, &job.bundle.user_text)
                .await;
            (job, r)
        });
    };

    loop {
        while running.len() < limit {
            let next = retry_queue.pop().or_else(|| {
                for job in pending.by_ref() {
                    if sink.contains(&job.paper_id) || !seen.insert(job.paper_id.clone()) {
                        summary.skipped += 1;
                        continue;
                    }
                    return Some(job);
                }
                None
            });
            match next {
                Some(job) => spawn(&mut running, job),
                None => break,
            }
        }
        let Some(joined) = running.join_next().await else {
            break;
        };
        let (job, result) = match joined {
            Ok(pair) => pair,
            Err(e) => {
                running.abort_all();
                return Err(BatchError::Worker(e.to_string()));
            }
        };
        match result {
            Ok(response) => match sink.accept(&job.paper_id, &response) {
                Ok(SinkVerdict::Accepted) => summary.completed += 1,
                Ok(SinkVerdict::Rejected(reason)) => {
                    summary.failed += 1;
                    failures.write(&FailureEntry {
                        id: job.paper_id.clone(),
                        error_class: "malformed_response".into(),
                        attempts: response.attempt_count,
                        message: reason,
                    })?;
                }
                Ok(SinkVerdict::Resubmit(reason)) => {
                    warn!(id = %job.paper_id, %reason, "resubmitting");
                    retry_queue.push(job);
                }
                Err(source) => {
                    running.abort_all();
                    return Err(BatchError::Sink {
                        id: job.paper_id,
                        source,
                    });
                }
            },
            Err(e) => {
                summary.failed += 1;
                failures.write(&FailureEntry {
                    id: job.paper_id.clone(),
                    error_class: e.class().into(),
                    attempts: e.attempts(),
                    message: e.to_string(),
                })?;
            }
        }
    }
    if let Some(ledger) = client.ledger() {
        ledger.flush().map_err(ProviderError::from)?;
    }
    info!(?summary, "batch finished");
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;
    use std::time::Duration;

    use super::*;
    use crate::provider::{MockOutcome, MockProvider, ProviderConfig};

    #[derive(Default)]
    struct MemSink {
        stored: HashMap<String, String>,
        order: Vec<String>,
        fail_on: Option<String>,
    }

    impl BatchSink for MemSink {
        fn contains(&self, id: &str) -> bool {
            self.stored.contains_key(id)
        }
        fn accept(
            &mut self,
            id: &str,
            r: &ProviderResponse,
        ) -> Result<SinkVerdict, Box<dyn std::error::Error + Send + Sync>> {
            if self.fail_on.as_deref() == Some(id) {
                return Err("disk full".into());
            }
            self.stored.insert(id.into(), r.raw_text.clone());
            self.order.push(id.into());
            Ok(SinkVerdict::Accepted)
        }
    }

    fn jobs(n: usize) -> Vec<Job> {
        (0..n)
            .map(|i| Job {
                paper_id: format!("p{i}"),
                bundle: PromptBundle::assemble("sys".into(), "T", "body", 10_000).unwrap(),
            })
            .collect()
    }

    fn cfg(concurrency: usize) -> ProviderConfig {
        ProviderConfig {
            max_concurrency: concurrency,
            requests_per_minute: 1e6,
            backoff_base: Duration::from_millis(1),
            max_attempts: 2,
            ..Default::default()
        }
    }

    #[tokio::test]
    async fn ten_jobs_concurrency_four() {
        let mock = Arc::new(MockProvider::new("m").with_latency(Duration::from_millis(5)));
        let client = Arc::new(Client::new(mock.clone(), cfg(4)).unwrap());
        let mut sink = MemSink::default();
        let s = run_batch(client, jobs(10), &mut sink, None).await.unwrap();
        assert_eq!(s, BatchSummary { completed: 10, failed: 0, skipped: 0 });
        assert!(mock.peak_in_flight() <= 4);
        assert!(mock.peak_in_flight() > 1);
    }

    #[tokio::test]
    async fn pre_existing_ids_skipped() {
        let client = Arc::new(Client::new(Arc::new(MockProvider::new("m")), cfg(3)).unwrap());
        let mut sink = MemSink::default();
        sink.stored.insert("p3".into(), String::new());
        sink.stored.insert("p7".into(), String::new());
        let s = run_batch(client, jobs(10), &mut sink, None).await.unwrap();
        assert_eq!(s, BatchSummary { completed: 8, failed: 0, skipped: 2 });
    }

    #[tokio::test]
    async fn failing_endpoint_is_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let list = dir.path().join("failures.jsonl");
        let mock = MockProvider::scripted(vec![MockOutcome::Status(500); 4]);
        let client = Arc::new(Client::new(Arc::new(mock), cfg(1)).unwrap());
        let mut sink = MemSink::default();
        let s = run_batch(client, jobs(1), &mut sink, Some(&list)).await.unwrap();
        assert_eq!(s, BatchSummary { completed: 0, failed: 1, skipped: 0 });
        let entry: FailureEntry =
            serde_json::from_str(std::fs::read_to_string(&list).unwrap().trim()).unwrap();
        assert_eq!(entry.id, "p0");
        assert_eq!(entry.error_class, "exhausted_retries");
        assert_eq!(entry.attempts, 2);
    }

    #[tokio::test]
    async fn sink_error_aborts() {
        let client = Arc::new(Client::new(Arc::new(MockProvider::new("m")), cfg(1)).unwrap());
        let mut sink = MemSink {
            fail_on: Some("p2".into()),
            ..Default::default()
        };
        let err = run_batch(client, jobs(6), &mut sink, None).await.unwrap_err();
        assert!(matches!(err, BatchError::Sink { ref id, .. } if id == "p2"));
        assert_eq!(sink.order, vec!["p0", "p1"]);
    }
}
