//! Parser for the numbered (0 to 5) classification response format.
//!
//! [`parse_response`] turns raw model text into a [`ParsedResponse`];
//! [`normalize_record`] validates it against the taxonomy and attaches
//! provenance; [`serialize_record`] writes the canonical text form back out.

mod canonical;
mod lists;
mod normalize;
mod record;
mod sections;
#[cfg(test)]
pub(crate) mod strategies;

use std::fmt;

use thiserror::Error;

pub use canonical::serialize_record;
pub use lists::{parse_sdg_list, parse_target_matrix};
pub use normalize::normalize_record;
pub use record::{
    ClassificationRecord, IfrAlignment, MentionFlags, MentionKind, PaperType, ParsedResponse,
    Provenance, SdgAssignment, SCHEMA_VERSION,
};
pub use sections::parse_mentions;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseSection {
    Section(u8),
    Unknown,
}

impl fmt::Display for ParseSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseSection::Section(n) => write!(f, "section {n}"),
            ParseSection::Unknown => f.write_str("fragment"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("section {0} header not found")]
    MissingSection(u8),
    #[error("{section}: malformed SDG list {fragment:?}")]
    SdgList {
        section: ParseSection,
        fragment: String,
    },
    #[error("{section}: malformed target list {fragment:?}")]
    TargetMatrix {
        section: ParseSection,
        fragment: String,
    },
    #[error("{section}: expected yes/no in {line:?}")]
    Mention { section: ParseSection, line: String },
}

impl ParseError {
    pub fn section(&self) -> ParseSection {
        match self {
            ParseError::MissingSection(n) => ParseSection::Section(*n),
            ParseError::SdgList { section, .. }
            | ParseError::TargetMatrix { section, .. }
            | ParseError::Mention { section, .. } => *section,
        }
    }

    fn in_section(self, id: ParseSection) -> Self {
        match self {
            ParseError::SdgList { fragment, .. } => ParseError::SdgList {
                section: id,
                fragment,
            },
            ParseError::TargetMatrix { fragment, .. } => ParseError::TargetMatrix {
                section: id,
                fragment,
            },
            ParseError::Mention { line, .. } => ParseError::Mention { section: id, line },
            other => other,
        }
    }
}

/// How structural problems in a response are handled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ParseMode {
    /// Any malformed mandatory element is an error.
    #[default]
    Strict,
    /// Never fails; problems become warnings on a partial result.
    Recover,
}

pub fn parse_response(raw: &str) -> Result<ParsedResponse, ParseError> {
    sections::parse(raw, ParseMode::Strict)
}

pub fn parse_response_with(raw: &str, mode: ParseMode) -> Result<ParsedResponse, ParseError> {
    sections::parse(raw, mode)
}

/// Parse with [`ParseMode::Recover`]; infallible.
pub fn parse_response_lenient(raw: &str) -> ParsedResponse {
    sections::parse(raw, ParseMode::Recover).expect("recover mode does not fail")
}

pub(crate) fn strip_bold(s: &str) -> String {
    s.replace("**", "")
}

pub(crate) fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
