//! Append-only JSONL dataset of classification records.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;
use tracing::warn;

use crate::harvest::PaperMeta;
use crate::respparse::{ClassificationRecord, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("dataset opened read-only")]
    ReadOnly,
    #[error("import mapping: {0}")]
    Mapping(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A skipped line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    Appended,
    Duplicate,
}

#[derive(Debug)]
pub struct Dataset {
    path: PathBuf,
    index: HashSet<String>,
    schema_version: String,
    record_count: usize,
    writer: Option<File>,
}

impl Dataset {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn schema_version(&self) -> &str {
        &self.schema_version
    }

    pub fn record_count(&self) -> usize {
        self.record_count
    }

    pub fn contains(&self, arxiv_id: &str) -> bool {
        self.index.contains(arxiv_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.index.iter().map(String::as_str)
    }

    /// Opens for appending, creating the file if needed. A torn final line
    /// left by an interrupted writer is cut off before new lines go in.
    pub fn open(path: impl AsRef<Path>) -> Result<(Dataset, Vec<Diagnostic>), StoreError> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        let mut diagnostics = seal_tail(&mut file, path)?;
        let loaded = load_dataset(path)?;
        diagnostics.extend(loaded.diagnostics);
        let mut dataset = loaded.dataset;
        dataset.writer = Some(file);
        Ok((dataset, diagnostics))
    }

    /// Writes one line and flushes it before the id enters the index.
    pub fn append_record(&mut self, record: &ClassificationRecord) -> Result<AppendOutcome, StoreError> {
        if self.index.contains(&record.arxiv_id) {
            warn!(id = %record.arxiv_id, "duplicate record skipped");
            return Ok(AppendOutcome::Duplicate);
        }
        let file = self.writer.as_mut().ok_or(StoreError::ReadOnly)?;
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        file.flush().map_err(io_err(&self.path))?;
        self.index.insert(record.arxiv_id.clone());
        self.record_count += 1;
        Ok(AppendOutcome::Appended)
    }

    pub fn sync(&mut self) -> Result<(), StoreError> {
        if let Some(f) = self.writer.as_mut() {
            f.sync_data().map_err(io_err(&self.path))?;
        }
        Ok(())
    }
}

fn seal_tail(file: &mut File, path: &Path) -> Result<Vec<Diagnostic>, StoreError> {
    let len = file.metadata().map_err(io_err(path))?.len();
    if len == 0 {
        return Ok(Vec::new());
    }
    let mut last = [0u8; 1];
    file.seek(SeekFrom::Start(len - 1)).map_err(io_err(path))?;
    file.read_exact(&mut last).map_err(io_err(path))?;
    if last[0] == b'\n' {
        return Ok(Vec::new());
    }
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let start = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |p| p + 1);
    let tail = &bytes[start..];
    let line_no = bytes[..start].iter().filter(|b| **b == b'\n').count() + 1;
    let complete = std::str::from_utf8(tail)
        .ok()
        .is_some_and(|t| serde_json::from_str::<ClassificationRecord>(t).is_ok());
    if complete {
        file.write_all(b"\n").map_err(io_err(path))?;
        Ok(Vec::new())
    } else {
        file.set_len(start as u64).map_err(io_err(path))?;
        Ok(vec![Diagnostic {
            line: line_no,
            message: format!("torn final line ({} bytes) removed", tail.len()),
        }])
    }
}

/// Records of a file plus the index built from them.
#[derive(Debug)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub records: Vec<ClassificationRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Streaming reader: yields well-formed records, reports the rest.
pub struct RecordReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    seen: HashSet<String>,
    allow_repeats: bool,
}

impl RecordReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let f = File::open(path).map_err(io_err(path))?;
        Ok(Self::new(BufReader::new(f)))
    }
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(reader: R) -> Self {
        RecordReader {
            lines: reader.lines(),
            line_no: 0,
            seen: HashSet::new(),
            allow_repeats: false,
        }
    }

    /// Accepts several records per id (repeat-run files).
    pub fn with_repeated_ids(mut self) -> Self {
        self.allow_repeats = true;
        self
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<ClassificationRecord, Diagnostic>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let diag = |message: String| Some(Err(Diagnostic { line: self.line_no, message }));
            let line = match line {
                Ok(l) => l,
                Err(e) => return diag(format!("unreadable line: {e}")),
            };
            if line.trim().is_empty() {
                continue;
            }
            let record: ClassificationRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => return diag(format!("malformed record: {e}")),
            };
            if record.schema_version != SCHEMA_VERSION {
                return diag(format!("unsupported schema_version {:?}", record.schema_version));
            }
            if !self.allow_repeats && !self.seen.insert(record.arxiv_id.clone()) {
                return diag(format!("duplicate id {}", record.arxiv_id));
            }
            return Some(Ok(record));
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LoadedDataset, StoreError> {
    let path = path.as_ref();
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for item in RecordReader::open(path)? {
        match item {
            Ok(r) => records.push(r),
            Err(d) => {
                warn!(path = %path.display(), line = d.line, "{}", d.message);
                diagnostics.push(d);
            }
        }
    }
    let index: HashSet<String> = records.iter().map(|r| r.arxiv_id.clone()).collect();
    Ok(LoadedDataset {
        dataset: Dataset {
            path: path.to_path_buf(),
            record_count: index.len(),
            index,
            schema_version: SCHEMA_VERSION.to_string(),
            writer: None,
        },
        records,
        diagnostics,
    })
}

/// Ids of `metas` not yet stored, in input order.
pub fn pending_ids(dataset: &Dataset, metas: &[PaperMeta]) -> Vec<String> {
    metas
        .iter()
        .filter(|m| !dataset.contains(&m.arxiv_id))
        .map(|m| m.arxiv_id.clone())
        .collect()
}

/// Field mapping from an external JSONL layout onto the record layout.
///
/// `fields` maps record field names (`arxiv_id`, `aligned_sdgs`,
/// `mentions.social`, ...) to source keys; unmapped fields are read under
/// their own name. `defaults` fills fields missing in the source.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportMapping {
    pub fields: BTreeMap<String, String>,
    pub defaults: Map<String, Value>,
}

const LIST_FIELDS: &[&str] = &[
    "paper_type",
    "motivated_sdgs",
    "motivated_targets",
    "motivated_quotes",
    "aligned_sdgs",
    "aligned_targets",
    "aligned_justifications",
    "ifr_sdgs",
    "ifr_use_cases",
    "warnings",
];

const MENTION_FIELDS: &[&str] = &["un_sdgs", "sustainability", "ecological", "social"];

fn sdg_number(v: &Value) -> Option<Value> {
    match v {
        Value::Number(_) => Some(v.clone()),
        Value::String(s) => {
            let digits: String = s
                .trim()
                .trim_start_matches(|c: char| !c.is_ascii_digit())
                .chars()
                .take_while(char::is_ascii_digit)
                .collect();
            digits.parse::<u64>().ok().map(Value::from)
        }
        _ => None,
    }
}

fn truthy(v: &Value) -> Value {
    Value::Bool(match v {
        Value::Bool(b) => *b,
        Value::Number(n) => n.as_f64().is_some_and(|x| x != 0.0),
        Value::String(s) => matches!(s.trim().to_ascii_lowercase().as_str(), "yes" | "true" | "1" | "y"),
        _ => false,
    })
}

fn coerce(field: &str, v: Value) -> Value {
    let as_list = |v: Value| match v {
        Value::Array(a) => a,
        Value::Null => Vec::new(),
        Value::String(s) if field == "paper_type" => s
            .split([',', ';', '/'])
            .map(|p| Value::from(p.trim().to_ascii_lowercase()))
            .filter(|p| p.as_str() != Some(""))
            .collect(),
        other => vec![other],
    };
    if field.ends_with("_sdgs") {
        return Value::Array(as_list(v).iter().filter_map(sdg_number).collect());
    }
    if field.ends_with("_targets") {
        return Value::Array(
            as_list(v)
                .into_iter()
                .map(|g| match g {
                    Value::Array(inner) => Value::Array(inner),
                    other => Value::Array(vec![other]),
                })
                .collect(),
        );
    }
    if LIST_FIELDS.contains(&field) {
        return Value::Array(as_list(v));
    }
    v
}

impl ImportMapping {
    fn source_key<'a>(&'a self, field: &'a str) -> &'a str {
        self.fields.get(field).map(String::as_str).unwrap_or(field)
    }

    /// Builds a record from one source object.
    pub fn map_object(&self, src: &Map<String, Value>) -> Result<ClassificationRecord, String> {
        let mut out = Map::new();
        let lookup = |field: &str| -> Option<Value> {
            src.get(self.source_key(field))
                .cloned()
                .or_else(|| self.defaults.get(field).cloned())
        };
        for field in [
            "arxiv_id",
            "published",
            "quarter",
            "reasoning",
            "model_id",
            "prompt_digest",
            "run_id",
            "schema_version",
            "ifr_justification",
        ]
        .iter()
        .chain(LIST_FIELDS)
        {
            if let Some(v) = lookup(field) {
                out.insert(field.to_string(), coerce(field, v));
            }
        }
        let mut mentions = match lookup("mentions") {
            Some(Value::Object(m)) => m,
            _ => Map::new(),
        };
        for kind in MENTION_FIELDS {
            let key = format!("mentions.{kind}");
            if let Some(v) = lookup(&key) {
                mentions.insert(kind.to_string(), v);
            }
            let v = mentions.get(*kind).map(truthy).unwrap_or(Value::Bool(false));
            mentions.insert(kind.to_string(), v);
        }
        out.insert("mentions".into(), Value::Object(mentions));
        out.entry("schema_version").or_insert(Value::from(SCHEMA_VERSION));
        out.entry("model_id").or_insert(Value::from("imported"));
        for field in LIST_FIELDS {
            out.entry(*field).or_insert(Value::Array(Vec::new()));
        }
        if out.get("paper_type").and_then(Value::as_array).is_some_and(Vec::is_empty) {
            out.insert("paper_type".into(), Value::Array(vec![Value::from("other")]));
        }
        serde_json::from_value(Value::Object(out)).map_err(|e| e.to_string())
    }
}

/// Reads an external JSONL file through `mapping`.
pub fn import_records(
    path: impl AsRef<Path>,
    mapping: &ImportMapping,
) -> Result<(Vec<ClassificationRecord>, Vec<Diagnostic>), StoreError> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let mapped = serde_json::from_str::<Map<String, Value>>(&line)
            .map_err(|e| e.to_string())
            .and_then(|obj| mapping.map_object(&obj));
        match mapped {
            Ok(r) if !seen.insert(r.arxiv_id.clone()) => diagnostics.push(Diagnostic {
                line: i + 1,
                message: format!("duplicate id {}", r.arxiv_id),
            }),
            Ok(r) => records.push(r),
            Err(message) => diagnostics.push(Diagnostic { line: i + 1, message }),
        }
    }
    Ok((records, diagnostics))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use chrono::NaiveDate;
    use proptest::prelude::*;

    use super::*;
    use crate::respparse::{MentionFlags, PaperType, SdgAssignment};
    use crate::taxonomy::SdgId;

    fn record(id: &str) -> ClassificationRecord {
        ClassificationRecord {
            arxiv_id: id.into(),
            published: NaiveDate::from_ymd_opt(2020, 5, 1),
            quarter: "2020Q2".parse().ok(),
            paper_type: BTreeSet::from([PaperType::Experimental]),
            motivated: SdgAssignment::default(),
            aligned: SdgAssignment {
                sdgs: vec![SdgId::new(9).unwrap()],
                targets: vec![vec!["9.5".parse().unwrap()]],
                evidence: vec!["innovation".into()],
            },
            mentions: MentionFlags::default(),
            ifr: Default::default(),
            reasoning: "r".into(),
            model_id: "m".into(),
            prompt_digest: "d".into(),
            run_id: "run".into(),
            run_index: None,
            decoding: None,
            schema_version: SCHEMA_VERSION.into(),
            warnings: vec![],
        }
    }

    fn meta(id: &str) -> PaperMeta {
        PaperMeta::new(id.into(), "t".into(), "cs.RO".into(), NaiveDate::from_ymd_opt(2020, 1, 1).unwrap())
    }

    #[test]
    fn append_and_dedup() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let (mut ds, diags) = Dataset::open(&path).unwrap();
        assert!(diags.is_empty());
        assert_eq!(ds.append_record(&record("a")).unwrap(), AppendOutcome::Appended);
        let before = std::fs::read(&path).unwrap();
        assert_eq!(ds.append_record(&record("a")).unwrap(), AppendOutcome::Duplicate);
        assert_eq!(std::fs::read(&path).unwrap(), before);
        assert_eq!(ds.record_count(), 1);
    }

    #[test]
    fn corrupt_line_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let good = serde_json::to_string(&record("a")).unwrap();
        let good2 = serde_json::to_string(&record("b")).unwrap();
        std::fs::write(&path, format!("{good}\n{{not json\n{good2}\n")).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded.records.len(), 2);
        assert_eq!(loaded.diagnostics.len(), 1);
        assert_eq!(loaded.diagnostics[0].line, 2);
        assert_eq!(loaded.dataset.record_count(), 2);
    }

    #[test]
    fn empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        std::fs::write(&path, "").unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert!(loaded.records.is_empty());
        assert_eq!(loaded.dataset.record_count(), 0);
        assert!(load_dataset(dir.path().join("missing.jsonl")).is_err());
    }

    #[test]
    fn crash_between_write_and_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        {
            let (mut ds, _) = Dataset::open(&path).unwrap();
            ds.append_record(&record("a")).unwrap();
        }
        // line written but the process died before indexing
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        writeln!(f, "{}", serde_json::to_string(&record("b")).unwrap()).unwrap();
        // and a second write torn half-way
        let torn = serde_json::to_string(&record("c")).unwrap();
        f.write_all(&torn.as_bytes()[..torn.len() / 2]).unwrap();
        drop(f);

        let (mut ds, diags) = Dataset::open(&path).unwrap();
        assert_eq!(diags.len(), 1);
        assert!(ds.contains("a") && ds.contains("b") && !ds.contains("c"));
        assert_eq!(ds.append_record(&record("b")).unwrap(), AppendOutcome::Duplicate);
        ds.append_record(&record("c")).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert!(loaded.diagnostics.is_empty());
        let ids: Vec<_> = loaded.records.iter().map(|r| r.arxiv_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn pending_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let (mut ds, _) = Dataset::open(dir.path().join("d.jsonl")).unwrap();
        let metas: Vec<_> = (0..10).map(|i| meta(&format!("p{i}"))).collect();
        assert_eq!(pending_ids(&ds, &metas).len(), 10);
        for i in [1, 4, 5, 8] {
            ds.append_record(&record(&format!("p{i}"))).unwrap();
        }
        assert_eq!(pending_ids(&ds, &metas), ["p0", "p2", "p3", "p6", "p7", "p9"]);
        for i in [0, 2, 3, 6, 7, 9] {
            ds.append_record(&record(&format!("p{i}"))).unwrap();
        }
        assert!(pending_ids(&ds, &metas).is_empty());
    }

    #[test]
    fn import_adapter_maps_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ext.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"2401.1\",\"type\":\"Survey, Experimental\",\"sdg_aligned\":[\"SDG 9\",\"SDG 11\"],\"social_mention\":\"yes\"}\n{broken\n",
        )
        .unwrap();
        let mapping = ImportMapping {
            fields: BTreeMap::from([
                ("arxiv_id".into(), "id".into()),
                ("paper_type".into(), "type".into()),
                ("aligned_sdgs".into(), "sdg_aligned".into()),
                ("mentions.social".into(), "social_mention".into()),
            ]),
            defaults: Map::new(),
        };
        let (records, diags) = import_records(&path, &mapping).unwrap();
        assert_eq!(diags.len(), 1);
        let r = &records[0];
        assert_eq!(r.arxiv_id, "2401.1");
        assert_eq!(r.paper_type, BTreeSet::from([PaperType::Survey, PaperType::Experimental]));
        assert_eq!(r.aligned.sdgs.len(), 2);
        assert!(r.mentions.social && !r.mentions.un_sdgs);
        assert_eq!(r.model_id, "imported");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn append_then_load_is_lossless(ids in proptest::collection::vec("[a-z]{1,6}", 0..30), k in 1usize..4) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("d.jsonl");
            let (mut ds, _) = Dataset::open(&path).unwrap();
            let mut expected = Vec::new();
            for id in &ids {
                for _ in 0..k {
                    ds.append_record(&record(id)).unwrap();
                }
                if !expected.contains(id) {
                    expected.push(id.clone());
                }
            }
            let loaded = load_dataset(&path).unwrap();
            let got: Vec<_> = loaded.records.iter().map(|r| r.arxiv_id.clone()).collect();
            prop_assert_eq!(got, expected);
            prop_assert!(loaded.diagnostics.is_empty());
            prop_assert_eq!(loaded.dataset.record_count(), ds.record_count());
        }
    }
}
