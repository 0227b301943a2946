//! System and per-paper prompt assembly.
//!
//! Templates live under `assets/` and are embedded at compile time so the
//! rendered text is byte-stable for a given taxonomy.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::taxonomy::Taxonomy;

pub const SYSTEM_TEMPLATE: &str = include_str!("../assets/system_prompt.txt");
pub const PAPER_TEMPLATE: &str = include_str!("../assets/paper_prompt.txt");

/// Bumped whenever either template file changes.
pub const TEMPLATE_VERSION: &str = "1";

pub const TRUNCATION_MARKER: &str = "[TRUNCATED]";
pub const EMPTY_IFR_MARKER: &str = "(no IFR proposals available)";

const SDG_PLACEHOLDER: &str = "{sdg_text}";
const IFR_PLACEHOLDER: &str = "{ifr_text}";
const TITLE_PLACEHOLDER: &str = "{paper_title}";
const TEXT_PLACEHOLDER: &str = "{paper_text}";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unsubstituted placeholder {0} remains in the rendered prompt")]
    UnsubstitutedPlaceholder(&'static str),
    #[error("paper has neither a title nor any text")]
    EmptyPaper,
    #[error("token budget must be positive")]
    ZeroBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub estimated_input_tokens: usize,
    pub truncated: bool,
}

/// Per-paper prompt with its truncation outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaperPrompt {
    pub text: String,
    pub truncated: bool,
    /// Characters of paper text dropped by truncation.
    pub dropped_chars: usize,
}

/// Heuristic token count: `ceil(chars / 4)`.
///
/// Only an estimate; providers report exact usage after the call and that
/// figure replaces this one in the ledger.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Keeps the head of `text` so that it fits in `budget_tokens`.
///
/// The cut happens at the last whitespace before the budget boundary (or at
/// the boundary itself when the head has no whitespace), then
/// [`TRUNCATION_MARKER`] is appended on its own line.
pub fn truncate_text(text: &str, budget_tokens: usize) -> (String, bool) {
    if estimate_tokens(text) <= budget_tokens {
        return (text.to_string(), false);
    }
    let max_chars = budget_tokens.saturating_mul(4);
    let boundary = text
        .char_indices()
        .nth(max_chars)
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let head = &text[..boundary];
    let cut = head
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace())
        .map(|(i, _)| i)
        .unwrap_or(boundary);
    let kept = head[..cut].trim_end();
    let mut out = String::with_capacity(kept.len() + TRUNCATION_MARKER.len() + 1);
    out.push_str(kept);
    if !kept.is_empty() {
        out.push('\n');
    }
    out.push_str(TRUNCATION_MARKER);
    (out, true)
}

pub fn build_system_prompt(taxonomy: &Taxonomy) -> Result<String, PromptError> {
    let ifr = taxonomy
        .ifr_text()
        .unwrap_or_else(|| EMPTY_IFR_MARKER.to_string());
    // Substitute IFR first so that a literal "{ifr_text}" inside the SDG text
    // is not expanded.
    let rendered = SYSTEM_TEMPLATE
        .replacen(IFR_PLACEHOLDER, &ifr, 1)
        .replacen(SDG_PLACEHOLDER, &taxonomy.sdg_text(), 1);
    check_placeholders(&rendered, &[SDG_PLACEHOLDER, IFR_PLACEHOLDER])?;
    Ok(rendered)
}

fn check_placeholders(rendered: &str, names: &[&'static str]) -> Result<(), PromptError> {
    match names.iter().find(|p| rendered.contains(**p)) {
        Some(p) => Err(PromptError::UnsubstitutedPlaceholder(p)),
        None => Ok(()),
    }
}

fn render_paper(title: &str, text: &str) -> String {
    PAPER_TEMPLATE
        .replacen(TITLE_PLACEHOLDER, title, 1)
        .replacen(TEXT_PLACEHOLDER, text, 1)
}

/// Renders the per-paper prompt so that the whole user message fits in
/// `budget_tokens`; only the paper text is shortened.
pub fn build_paper_prompt(
    title: &str,
    text: &str,
    budget_tokens: usize,
) -> Result<PaperPrompt, PromptError> {
    if budget_tokens == 0 {
        return Err(PromptError::ZeroBudget);
    }
    if title.trim().is_empty() && text.trim().is_empty() {
        return Err(PromptError::EmptyPaper);
    }
    let overhead = estimate_tokens(&render_paper(title, ""));
    let text_budget = budget_tokens.saturating_sub(overhead).max(1);
    let (body, truncated) = truncate_text(text, text_budget);
    let dropped_chars = if truncated {
        text.chars().count()
            - body
                .strip_suffix(TRUNCATION_MARKER)
                .unwrap_or(&body)
                .chars()
                .count()
    } else {
        0
    };
    if truncated {
        tracing::info!(title, dropped_chars, "paper text truncated to fit budget");
    }
    Ok(PaperPrompt {
        text: render_paper(title, &body),
        truncated,
        dropped_chars,
    })
}

impl PromptBundle {
    /// Builds both messages; `max_input_tokens` bounds the user message.
    pub fn assemble(
        system_text: String,
        title: &str,
        text: &str,
        max_input_tokens: usize,
    ) -> Result<Self, PromptError> {
        let paper = build_paper_prompt(title, text, max_input_tokens)?;
        let estimated_input_tokens =
            estimate_tokens(&system_text) + estimate_tokens(&paper.text);
        Ok(PromptBundle {
            system_text,
            user_text: paper.text,
            estimated_input_tokens,
            truncated: paper.truncated,
        })
    }
}

/// Digest identifying the prompt protocol: rendered system prompt plus the
/// per-paper template. Identical for every paper of a run.
pub fn prompt_digest(system_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(TEMPLATE_VERSION.as_bytes());
    hasher.update([0u8]);
    hasher.update(system_text.as_bytes());
    hasher.update([0u8]);
    hasher.update(PAPER_TEMPLATE.as_bytes());
    hex::encode(hasher.finalize())
}
