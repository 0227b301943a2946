use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::harvest::Quarter;
use crate::provider::Decoding;
use crate::taxonomy::{SdgId, TargetId};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaperType {
    Survey,
    Experimental,
    Theoretical,
    Report,
    Other,
}

impl PaperType {
    pub const ALL: [PaperType; 5] = [
        PaperType::Survey,
        PaperType::Experimental,
        PaperType::Theoretical,
        PaperType::Report,
        PaperType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PaperType::Survey => "survey",
            PaperType::Experimental => "experimental",
            PaperType::Theoretical => "theoretical",
            PaperType::Report => "report",
            PaperType::Other => "other",
        }
    }

    /// Maps a free-form word onto a type; `None` for anything unrecognized.
    pub fn from_word(word: &str) -> Option<Self> {
        let w = word.to_ascii_lowercase();
        if w.starts_with("survey") || w == "review" {
            Some(PaperType::Survey)
        } else if w.starts_with("experiment") {
            Some(PaperType::Experimental)
        } else if w.starts_with("theor") {
            Some(PaperType::Theoretical)
        } else if w.starts_with("report") {
            Some(PaperType::Report)
        } else if w == "other" || w == "others" {
            Some(PaperType::Other)
        } else {
            None
        }
    }
}

impl fmt::Display for PaperType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MentionFlags {
    pub un_sdgs: bool,
    pub sustainability: bool,
    pub ecological: bool,
    pub social: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionKind {
    UnSdgs,
    Sustainability,
    Ecological,
    Social,
}

impl MentionKind {
    pub const ALL: [MentionKind; 4] = [
        MentionKind::UnSdgs,
        MentionKind::Sustainability,
        MentionKind::Ecological,
        MentionKind::Social,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MentionKind::UnSdgs => "un_sdgs",
            MentionKind::Sustainability => "sustainability",
            MentionKind::Ecological => "ecological",
            MentionKind::Social => "social",
        }
    }
}

impl MentionFlags {
    pub fn get(&self, kind: MentionKind) -> bool {
        match kind {
            MentionKind::UnSdgs => self.un_sdgs,
            MentionKind::Sustainability => self.sustainability,
            MentionKind::Ecological => self.ecological,
            MentionKind::Social => self.social,
        }
    }

    pub fn set(&mut self, kind: MentionKind, value: bool) {
        match kind {
            MentionKind::UnSdgs => self.un_sdgs = value,
            MentionKind::Sustainability => self.sustainability = value,
            MentionKind::Ecological => self.ecological = value,
            MentionKind::Social => self.social = value,
        }
    }
}

/// SDGs with parallel target lists and the supporting quotes/justifications.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdgAssignment {
    pub sdgs: Vec<SdgId>,
    pub targets: Vec<Vec<TargetId>>,
    pub evidence: Vec<String>,
}

impl SdgAssignment {
    pub fn contains(&self, sdg: SdgId) -> bool {
        self.sdgs.contains(&sdg)
    }

    pub fn targets_for(&self, sdg: SdgId) -> &[TargetId] {
        self.sdgs
            .iter()
            .position(|s| *s == sdg)
            .and_then(|i| self.targets.get(i))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn all_targets(&self) -> impl Iterator<Item = TargetId> + '_ {
        self.targets.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IfrAlignment {
    pub sdgs: Vec<SdgId>,
    pub use_cases: Vec<String>,
    pub justification: String,
}

/// Output of [`super::parse_response`], before taxonomy validation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedResponse {
    pub paper_type: BTreeSet<PaperType>,
    pub motivated: SdgAssignment,
    pub aligned: SdgAssignment,
    pub mentions: MentionFlags,
    pub ifr: IfrAlignment,
    pub reasoning: String,
    pub warnings: Vec<String>,
}

/// Fields of a record that do not come from the model response.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub arxiv_id: String,
    pub published: Option<NaiveDate>,
    pub quarter: Option<Quarter>,
    pub model_id: String,
    pub prompt_digest: String,
    pub run_id: String,
    pub run_index: Option<u32>,
    pub decoding: Option<Decoding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RecordRow", into = "RecordRow")]
pub struct ClassificationRecord {
    pub arxiv_id: String,
    pub published: Option<NaiveDate>,
    pub quarter: Option<Quarter>,
    pub paper_type: BTreeSet<PaperType>,
    pub motivated: SdgAssignment,
    pub aligned: SdgAssignment,
    pub mentions: MentionFlags,
    pub ifr: IfrAlignment,
    pub reasoning: String,
    pub model_id: String,
    pub prompt_digest: String,
    pub run_id: String,
    pub run_index: Option<u32>,
    pub decoding: Option<Decoding>,
    pub schema_version: String,
    pub warnings: Vec<String>,
}

impl ClassificationRecord {
    pub fn is_motivated(&self) -> bool {
        !self.motivated.sdgs.is_empty()
    }

    pub fn has_no_relevance(&self) -> bool {
        self.aligned.sdgs.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            arxiv_id: self.arxiv_id.clone(),
            published: self.published,
            quarter: self.quarter,
            model_id: self.model_id.clone(),
            prompt_digest: self.prompt_digest.clone(),
            run_id: self.run_id.clone(),
            run_index: self.run_index,
            decoding: self.decoding.clone(),
        }
    }
}

/// Flat JSONL layout of a record.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordRow {
    arxiv_id: String,
    #[serde(default)]
    published: Option<NaiveDate>,
    #[serde(default)]
    quarter: Option<Quarter>,
    paper_type: BTreeSet<PaperType>,
    motivated_sdgs: Vec<SdgId>,
    motivated_targets: Vec<Vec<TargetId>>,
    #[serde(default)]
    motivated_quotes: Vec<String>,
    aligned_sdgs: Vec<SdgId>,
    aligned_targets: Vec<Vec<TargetId>>,
    #[serde(default)]
    aligned_justifications: Vec<String>,
    mentions: MentionFlags,
    #[serde(default)]
    ifr_sdgs: Vec<SdgId>,
    #[serde(default)]
    ifr_use_cases: Vec<String>,
    #[serde(default)]
    ifr_justification: String,
    #[serde(default)]
    reasoning: String,
    model_id: String,
    #[serde(default)]
    prompt_digest: String,
    #[serde(default)]
    run_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    run_index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decoding: Option<Decoding>,
    schema_version: String,
    #[serde(default)]
    warnings: Vec<String>,
}

impl From<RecordRow> for ClassificationRecord {
    fn from(r: RecordRow) -> Self {
        ClassificationRecord {
            arxiv_id: r.arxiv_id,
            published: r.published,
            quarter: r.quarter,
            paper_type: r.paper_type,
            motivated: SdgAssignment {
                sdgs: r.motivated_sdgs,
                targets: r.motivated_targets,
                evidence: r.motivated_quotes,
            },
            aligned: SdgAssignment {
                sdgs: r.aligned_sdgs,
                targets: r.aligned_targets,
                evidence: r.aligned_justifications,
            },
            mentions: r.mentions,
            ifr: IfrAlignment {
                sdgs: r.ifr_sdgs,
                use_cases: r.ifr_use_cases,
                justification: r.ifr_justification,
            },
            reasoning: r.reasoning,
            model_id: r.model_id,
            prompt_digest: r.prompt_digest,
            run_id: r.run_id,
            run_index: r.run_index,
            decoding: r.decoding,
            schema_version: r.schema_version,
            warnings: r.warnings,
        }
    }
}

impl From<ClassificationRecord> for RecordRow {
    fn from(r: ClassificationRecord) -> Self {
        RecordRow {
            arxiv_id: r.arxiv_id,
            published: r.published,
            quarter: r.quarter,
            paper_type: r.paper_type,
            motivated_sdgs: r.motivated.sdgs,
            motivated_targets: r.motivated.targets,
            motivated_quotes: r.motivated.evidence,
            aligned_sdgs: r.aligned.sdgs,
            aligned_targets: r.aligned.targets,
            aligned_justifications: r.aligned.evidence,
            mentions: r.mentions,
            ifr_sdgs: r.ifr.sdgs,
            ifr_use_cases: r.ifr.use_cases,
            ifr_justification: r.ifr.justification,
            reasoning: r.reasoning,
            model_id: r.model_id,
            prompt_digest: r.prompt_digest,
            run_id: r.run_id,
            run_index: r.run_index,
            decoding: r.decoding,
            schema_version: r.schema_version,
            warnings: r.warnings,
        }
    }
}
