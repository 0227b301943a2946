//! arXiv metadata harvesting, PDF download cache and text extraction.

mod arxiv;
mod extract;
mod pdf;

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use arxiv::{parse_atom_feed, ArxivClient, HarvestConfig, ListingPage};
pub use extract::{
    extract_text, EmbeddedPdfExtractor, ExtractionStatus, PaperText, PreextractedDir,
    TextExtractor, TextSource,
};
pub use pdf::{build_test_pdf, extract_pdf_text, PdfText};
pub use arxiv::{skip_list, SKIP_LIST};

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("network failure after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("malformed listing payload: {0}")]
    MalformedListing(String),
    #[error("{id} unavailable (HTTP {status})")]
    Unavailable { id: String, status: u16 },
    #[error("{0}: zero-length download")]
    EmptyDownload(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Calendar quarter, serialized as `"2015Q1"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    pub year: i32,
    pub quarter: u8,
}

impl Quarter {
    pub fn new(year: i32, quarter: u8) -> Option<Self> {
        (1..=4).contains(&quarter).then_some(Quarter { year, quarter })
    }

    pub fn next(self) -> Quarter {
        if self.quarter == 4 {
            Quarter {
                year: self.year + 1,
                quarter: 1,
            }
        } else {
            Quarter {
                year: self.year,
                quarter: self.quarter + 1,
            }
        }
    }

    /// Start of the quarter in fractional years (2015Q2 -> 2015.25).
    pub fn as_years(self) -> f64 {
        self.year as f64 + (self.quarter as f64 - 1.0) / 4.0
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.quarter)
    }
}

impl FromStr for Quarter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, q) = s
            .split_once(['Q', 'q'])
            .ok_or_else(|| format!("invalid quarter {s:?}"))?;
        let year = y.trim().parse().map_err(|_| format!("invalid quarter {s:?}"))?;
        let quarter = q.trim().parse().map_err(|_| format!("invalid quarter {s:?}"))?;
        Quarter::new(year, quarter).ok_or_else(|| format!("invalid quarter {s:?}"))
    }
}

impl Serialize for Quarter {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quarter {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn quarter_of(published: NaiveDate) -> Quarter {
    Quarter {
        year: published.year(),
        quarter: (published.month0() / 3 + 1) as u8,
    }
}

/// First day of the month encoded in a new-style arXiv id (`YYMM.NNNNN`).
pub fn month_from_arxiv_id(id: &str) -> Option<NaiveDate> {
    let core = id.rsplit('/').next()?;
    let prefix = core.split('.').next()?;
    if prefix.len() != 4 || !prefix.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let yy: i32 = prefix[..2].parse().ok()?;
    let mm: u32 = prefix[2..].parse().ok()?;
    // new-style ids start in April 2007
    let year = if yy >= 7 { 2000 + yy } else { return None };
    NaiveDate::from_ymd_opt(year, mm, 1)
}

/// Strips a trailing version suffix: `2411.15159v1` -> `2411.15159`.
pub fn canonical_arxiv_id(id: &str) -> String {
    let id = id.trim();
    let id = id
        .strip_prefix("http://arxiv.org/abs/")
        .or_else(|| id.strip_prefix("https://arxiv.org/abs/"))
        .or_else(|| id.strip_prefix("arXiv:"))
        .unwrap_or(id);
    match id.rfind('v') {
        Some(pos)
            if pos > 0
                && pos + 1 < id.len()
                && id[pos + 1..].bytes().all(|b| b.is_ascii_digit())
                && id.as_bytes()[pos - 1].is_ascii_digit() =>
        {
            id[..pos].to_string()
        }
        _ => id.to_string(),
    }
}

/// File-system safe form of an id (old-style ids contain `/`).
pub fn file_stem(id: &str) -> String {
    id.replace('/', "_")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperMeta {
    pub arxiv_id: String,
    pub title: String,
    pub primary_category: String,
    /// First-version publication date.
    pub published: NaiveDate,
    pub quarter: Quarter,
}

impl PaperMeta {
    pub fn new(arxiv_id: String, title: String, primary_category: String, published: NaiveDate) -> Self {
        PaperMeta {
            arxiv_id,
            title,
            primary_category,
            published,
            quarter: quarter_of(published),
        }
    }
}
