//! Glue between the provider batch runner, the parser and the dataset.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::harvest::{ExtractionStatus, PaperMeta, PaperText};
use crate::prompting::{PromptBundle, PromptError};
use crate::provider::{BatchSink, Decoding, Job, ProviderResponse, SinkVerdict};
use crate::respparse::{normalize_record, parse_response_with, ParseMode, Provenance};
use crate::store::{AppendOutcome, Dataset};
use crate::taxonomy::Taxonomy;

/// What to do with a response the strict parser rejects.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "retries")]
pub enum MalformedPolicy {
    /// Keep whatever parses; problems become record warnings.
    #[default]
    Recover,
    /// Record the paper as failed.
    Drop,
    /// Ask again up to n times, then drop.
    Retry(u32),
}

impl std::str::FromStr for MalformedPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "recover" => Ok(MalformedPolicy::Recover),
            "drop" => Ok(MalformedPolicy::Drop),
            other => other
                .strip_prefix("retry")
                .map(|n| n.trim_start_matches([':', '=']))
                .and_then(|n| if n.is_empty() { Some(2) } else { n.parse().ok() })
                .map(MalformedPolicy::Retry)
                .ok_or_else(|| format!("unknown malformed-response policy {s:?}")),
        }
    }
}

/// Run-level provenance copied into every record.
#[derive(Debug, Clone, Default)]
pub struct RunContext {
    pub model_id: String,
    pub prompt_digest: String,
    pub run_id: String,
    pub decoding: Option<Decoding>,
}

/// Parses completions and appends them to a dataset.
pub struct ClassifySink<'a> {
    dataset: &'a mut Dataset,
    taxonomy: &'a Taxonomy,
    metas: HashMap<String, PaperMeta>,
    context: RunContext,
    policy: MalformedPolicy,
    retries: HashMap<String, u32>,
}

impl<'a> ClassifySink<'a> {
    pub fn new(
        dataset: &'a mut Dataset,
        taxonomy: &'a Taxonomy,
        metas: impl IntoIterator<Item = PaperMeta>,
        context: RunContext,
        policy: MalformedPolicy,
    ) -> Self {
        ClassifySink {
            dataset,
            taxonomy,
            metas: metas.into_iter().map(|m| (m.arxiv_id.clone(), m)).collect(),
            context,
            policy,
            retries: HashMap::new(),
        }
    }

    fn provenance(&self, paper_id: &str) -> Provenance {
        let meta = self.metas.get(paper_id);
        Provenance {
            arxiv_id: paper_id.to_string(),
            published: meta.map(|m| m.published),
            quarter: meta.map(|m| m.quarter),
            model_id: self.context.model_id.clone(),
            prompt_digest: self.context.prompt_digest.clone(),
            run_id: self.context.run_id.clone(),
            run_index: None,
            decoding: self.context.decoding.clone(),
        }
    }
}

impl BatchSink for ClassifySink<'_> {
    fn contains(&self, paper_id: &str) -> bool {
        self.dataset.contains(paper_id)
    }

    fn accept(
        &mut self,
        paper_id: &str,
        response: &ProviderResponse,
    ) -> Result<SinkVerdict, Box<dyn std::error::Error + Send + Sync>> {
        let mode = match self.policy {
            MalformedPolicy::Recover => ParseMode::Recover,
            _ => ParseMode::Strict,
        };
        let draft = match parse_response_with(&response.raw_text, mode) {
            Ok(d) => d,
            Err(e) => {
                let reason = e.to_string();
                if let MalformedPolicy::Retry(max) = self.policy {
                    let used = self.retries.entry(paper_id.to_string()).or_default();
                    if *used < max {
                        *used += 1;
                        return Ok(SinkVerdict::Resubmit(reason));
                    }
                }
                return Ok(SinkVerdict::Rejected(reason));
            }
        };
        let record = normalize_record(draft, self.taxonomy, self.provenance(paper_id));
        match self.dataset.append_record(&record)? {
            AppendOutcome::Appended | AppendOutcome::Duplicate => Ok(SinkVerdict::Accepted),
        }
    }
}

/// Reads `<dir>/<stem>.txt` prepared by the harvest step.
pub fn load_paper_text(text_dir: &Path, arxiv_id: &str) -> Option<PaperText> {
    let path = text_dir.join(format!("{}.txt", crate::harvest::file_stem(arxiv_id)));
    let text = std::fs::read_to_string(path).ok()?;
    let t = PaperText::from_text(arxiv_id, text, crate::harvest::TextSource::PreextractedFile, false);
    (t.extraction_status != ExtractionStatus::Failed).then_some(t)
}

/// Builds the job for one paper.
pub fn make_job(
    system_text: &str,
    meta: &PaperMeta,
    text: &str,
    max_input_tokens: usize,
) -> Result<Job, PromptError> {
    let bundle = PromptBundle::assemble(system_text.to_string(), &meta.title, text, max_input_tokens)?;
    Ok(Job {
        paper_id: meta.arxiv_id.clone(),
        bundle,
    })
}
