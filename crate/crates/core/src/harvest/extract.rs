use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::file_stem;
use super::pdf::extract_pdf_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStatus {
    Ok,
    Partial,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextSource {
    PdfExtraction,
    PreextractedFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperText {
    pub arxiv_id: String,
    pub text: String,
    pub char_count: usize,
    pub extraction_status: ExtractionStatus,
    pub source: TextSource,
}

impl PaperText {
    pub fn failed(arxiv_id: &str, source: TextSource) -> Self {
        PaperText {
            arxiv_id: arxiv_id.to_string(),
            text: String::new(),
            char_count: 0,
            extraction_status: ExtractionStatus::Failed,
            source,
        }
    }

    pub fn from_text(arxiv_id: &str, text: String, source: TextSource, partial: bool) -> Self {
        if text.trim().is_empty() {
            return Self::failed(arxiv_id, source);
        }
        let char_count = text.chars().count();
        PaperText {
            arxiv_id: arxiv_id.to_string(),
            text,
            char_count,
            extraction_status: if partial {
                ExtractionStatus::Partial
            } else {
                ExtractionStatus::Ok
            },
            source,
        }
    }
}

/// Text source for one paper. Implementations report failure through
/// [`ExtractionStatus`] instead of errors.
pub trait TextExtractor: Send + Sync {
    fn extract(&self, arxiv_id: &str, pdf_path: &Path) -> PaperText;
}

/// Reads the PDF and decodes its content streams.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmbeddedPdfExtractor;

/// Share of replacement characters above which text counts as partial.
const GARBAGE_RATIO: f64 = 0.05;

impl TextExtractor for EmbeddedPdfExtractor {
    fn extract(&self, arxiv_id: &str, pdf_path: &Path) -> PaperText {
        let Ok(bytes) = std::fs::read(pdf_path) else {
            return PaperText::failed(arxiv_id, TextSource::PdfExtraction);
        };
        let pdf = extract_pdf_text(&bytes);
        let total = pdf.text.chars().count().max(1);
        let garbage = pdf.text.chars().filter(|c| *c == '\u{FFFD}').count();
        let partial = pdf.failed_streams > 0 || garbage as f64 / total as f64 > GARBAGE_RATIO;
        PaperText::from_text(arxiv_id, pdf.text, TextSource::PdfExtraction, partial)
    }
}

/// Reads `<dir>/<id>.txt` produced by an external tool.
#[derive(Debug, Clone)]
pub struct PreextractedDir {
    pub dir: PathBuf,
}

impl PreextractedDir {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        PreextractedDir { dir: dir.into() }
    }
}

impl TextExtractor for PreextractedDir {
    fn extract(&self, arxiv_id: &str, _pdf_path: &Path) -> PaperText {
        let path = self.dir.join(format!("{}.txt", file_stem(arxiv_id)));
        match std::fs::read_to_string(path) {
            Ok(text) => PaperText::from_text(arxiv_id, text, TextSource::PreextractedFile, false),
            Err(_) => PaperText::failed(arxiv_id, TextSource::PreextractedFile),
        }
    }
}

fn id_from_path(pdf_path: &Path) -> String {
    let stem = pdf_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    // old-style ids were flattened with '_' by file_stem
    match stem.split_once('_') {
        Some((archive, num)) if num.bytes().all(|b| b.is_ascii_digit()) => format!("{archive}/{num}"),
        _ => stem,
    }
}

/// Uses the `.txt` sidecar next to the PDF when present, otherwise the
/// embedded extractor.
pub fn extract_text(pdf_path: &Path) -> PaperText {
    let id = id_from_path(pdf_path);
    let sidecar = pdf_path.with_extension("txt");
    if sidecar.is_file() {
        return match std::fs::read_to_string(&sidecar) {
            Ok(text) => PaperText::from_text(&id, text, TextSource::PreextractedFile, false),
            Err(_) => PaperText::failed(&id, TextSource::PreextractedFile),
        };
    }
    EmbeddedPdfExtractor.extract(&id, pdf_path)
}
