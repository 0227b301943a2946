//! SDG goal/target corpus and IFR use-case corpus.
//!
//! Both corpora are line-oriented UTF-8 text:
//!
//! ```text
//! SDG 9: Industry, Innovation and Infrastructure
//! 9.5: Enhance scientific research ...
//! 9.b: Support domestic technology development ...
//! ```
//!
//! and for the IFR proposals:
//!
//! ```text
//! SDG 15:
//! - Mobile robots preventing soil erosion.
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. A line that is neither
//! a header nor a target/bullet continues the previous target or use case.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const GOAL_COUNT: u8 = 17;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no goals found")]
    NoGoals,
    #[error("line {line}: malformed header {text:?}")]
    MalformedHeader { line: usize, text: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("expected {GOAL_COUNT} goals, found {0}")]
    GoalCount(usize),
    #[error("invalid SDG id {0}")]
    InvalidSdg(String),
    #[error("invalid target id {0:?}")]
    InvalidTarget(String),
}

/// Goal number, always in `1..=17`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SdgId(u8);

impl SdgId {
    pub fn new(value: u8) -> Result<Self, TaxonomyError> {
        if (1..=GOAL_COUNT).contains(&value) {
            Ok(SdgId(value))
        } else {
            Err(TaxonomyError::InvalidSdg(value.to_string()))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = SdgId> {
        (1..=GOAL_COUNT).map(SdgId)
    }
}

impl fmt::Display for SdgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<u8> for SdgId {
    type Error = TaxonomyError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        SdgId::new(value)
    }
}

impl FromStr for SdgId {
    type Err = TaxonomyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n: u8 = s
            .trim()
            .parse()
            .map_err(|_| TaxonomyError::InvalidSdg(s.to_string()))?;
        SdgId::new(n)
    }
}

impl Serialize for SdgId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for SdgId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let n = u8::deserialize(deserializer)?;
        SdgId::new(n).map_err(serde::de::Error::custom)
    }
}

/// Part after the dot in a target id. Numeric suffixes sort before letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TargetSuffix {
    Number(u8),
    Letter(char),
}

impl fmt::Display for TargetSuffix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSuffix::Number(n) => write!(f, "{n}"),
            TargetSuffix::Letter(c) => write!(f, "{c}"),
        }
    }
}

/// Target identifier such as `9.5` or `8.b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TargetId {
    goal: SdgId,
    suffix: TargetSuffix,
}

impl TargetId {
    pub fn new(goal: SdgId, suffix: TargetSuffix) -> Self {
        TargetId { goal, suffix }
    }

    pub fn goal(&self) -> SdgId {
        self.goal
    }

    pub fn suffix(&self) -> TargetSuffix {
        self.suffix
    }
}

impl fmt::Display for TargetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.goal, self.suffix)
    }
}

fn target_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([0-9]{1,2})\.([0-9]{1,2}|[a-z])$").unwrap())
}

impl FromStr for TargetId {
    type Err = TaxonomyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let caps = target_regex()
            .captures(t)
            .ok_or_else(|| TaxonomyError::InvalidTarget(s.to_string()))?;
        let goal: SdgId = caps[1]
            .parse()
            .map_err(|_| TaxonomyError::InvalidTarget(s.to_string()))?;
        let raw = &caps[2];
        let suffix = match raw.parse::<u8>() {
            Ok(n) => TargetSuffix::Number(n),
            Err(_) => TargetSuffix::Letter(raw.chars().next().unwrap()),
        };
        Ok(TargetId { goal, suffix })
    }
}

impl Serialize for TargetId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TargetId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub title: String,
    pub targets: BTreeMap<TargetId, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetValidity {
    Valid,
    UnknownTarget,
    PrefixMismatch,
}

/// Immutable after load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub goals: BTreeMap<SdgId, Goal>,
    pub ifr_proposals: BTreeMap<SdgId, Vec<String>>,
    /// sha256 per source, keyed by `"sdg"` / `"ifr"`.
    pub source_digests: BTreeMap<String, String>,
}

fn sdg_header_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^SDG\s+([0-9]{1,2})\s*:\s*(.*)$").unwrap())
}

fn target_line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([0-9]{1,2}\.[0-9A-Za-z]{1,2})\s*:\s*(.*)$").unwrap())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_source(path: &Path) -> Result<String, TaxonomyError> {
    std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn is_skippable(line: &str) -> bool {
    line.is_empty() || line.starts_with('#')
}

pub fn load_sdg_corpus(path: impl AsRef<Path>) -> Result<Taxonomy, TaxonomyError> {
    let text = read_source(path.as_ref())?;
    parse_sdg_corpus(&text)
}

pub fn parse_sdg_corpus(text: &str) -> Result<Taxonomy, TaxonomyError> {
    let mut goals: BTreeMap<SdgId, Goal> = BTreeMap::new();
    let mut current: Option<SdgId> = None;
    let mut last_target: Option<TargetId> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if is_skippable(line) {
            continue;
        }
        if line.starts_with("SDG") {
            let caps = sdg_header_regex()
                .captures(line)
                .ok_or_else(|| TaxonomyError::MalformedHeader {
                    line: line_no,
                    text: line.to_string(),
                })?;
            let id: SdgId = caps[1].parse().map_err(|_| TaxonomyError::MalformedHeader {
                line: line_no,
                text: line.to_string(),
            })?;
            if goals.contains_key(&id) {
                return Err(TaxonomyError::Malformed {
                    line: line_no,
                    message: format!("duplicate goal SDG {id}"),
                });
            }
            goals.insert(
                id,
                Goal {
                    title: caps[2].trim().to_string(),
                    targets: BTreeMap::new(),
                },
            );
            current = Some(id);
            last_target = None;
            continue;
        }
        let Some(goal_id) = current else {
            return Err(TaxonomyError::Malformed {
                line: line_no,
                message: "content before the first goal header".into(),
            });
        };
        if let Some(caps) = target_line_regex().captures(line) {
            let target: TargetId = caps[1].parse()?;
            if target.goal() != goal_id {
                return Err(TaxonomyError::Malformed {
                    line: line_no,
                    message: format!("target {target} listed under SDG {goal_id}"),
                });
            }
            let goal = goals.get_mut(&goal_id).expect("current goal exists");
            if goal
                .targets
                .insert(target, caps[2].trim().to_string())
                .is_some()
            {
                return Err(TaxonomyError::Malformed {
                    line: line_no,
                    message: format!("duplicate target {target}"),
                });
            }
            last_target = Some(target);
            continue;
        }
        // continuation of a wrapped target line
        match last_target {
            Some(t) => {
                let text = goals
                    .get_mut(&goal_id)
                    .and_then(|g| g.targets.get_mut(&t))
                    .expect("last target exists");
                text.push(' ');
                text.push_str(line);
            }
            None => {
                let goal = goals.get_mut(&goal_id).expect("current goal exists");
                goal.title.push(' ');
                goal.title.push_str(line);
            }
        }
    }

    if goals.is_empty() {
        return Err(TaxonomyError::NoGoals);
    }
    if goals.len() != GOAL_COUNT as usize {
        return Err(TaxonomyError::GoalCount(goals.len()));
    }
    let mut source_digests = BTreeMap::new();
    source_digests.insert("sdg".to_string(), sha256_hex(text.as_bytes()));
    Ok(Taxonomy {
        goals,
        ifr_proposals: SdgId::all().map(|id| (id, Vec::new())).collect(),
        source_digests,
    })
}

pub fn load_ifr_corpus(
    path: impl AsRef<Path>,
    taxonomy: Taxonomy,
) -> Result<Taxonomy, TaxonomyError> {
    let text = read_source(path.as_ref())?;
    parse_ifr_corpus(&text, taxonomy)
}

pub fn parse_ifr_corpus(text: &str, mut taxonomy: Taxonomy) -> Result<Taxonomy, TaxonomyError> {
    let mut proposals: BTreeMap<SdgId, Vec<String>> =
        SdgId::all().map(|id| (id, Vec::new())).collect();
    let mut current: Option<SdgId> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if is_skippable(line) {
            continue;
        }
        if line.starts_with("SDG") {
            let caps = sdg_header_regex()
                .captures(line)
                .ok_or_else(|| TaxonomyError::MalformedHeader {
                    line: line_no,
                    text: line.to_string(),
                })?;
            current = Some(caps[1].parse()?);
            continue;
        }
        let Some(id) = current else {
            return Err(TaxonomyError::Malformed {
                line: line_no,
                message: "use case before the first SDG header".into(),
            });
        };
        let list = proposals.get_mut(&id).expect("all goals present");
        if let Some(item) = line.strip_prefix('-') {
            list.push(item.trim().to_string());
        } else if let Some(last) = list.last_mut() {
            last.push(' ');
            last.push_str(line);
        } else {
            return Err(TaxonomyError::Malformed {
                line: line_no,
                message: format!("expected '- <use case>' under SDG {id}"),
            });
        }
    }

    taxonomy.ifr_proposals = proposals;
    taxonomy
        .source_digests
        .insert("ifr".to_string(), sha256_hex(text.as_bytes()));
    Ok(taxonomy)
}

impl Taxonomy {
    pub fn goal(&self, id: SdgId) -> Option<&Goal> {
        self.goals.get(&id)
    }

    pub fn contains_target(&self, target: TargetId) -> bool {
        self.goals
            .get(&target.goal())
            .is_some_and(|g| g.targets.contains_key(&target))
    }

    /// Combined digest over all loaded sources.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in &self.source_digests {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }

    /// Goals and targets rendered in the corpus line format.
    pub fn sdg_text(&self) -> String {
        let mut out = String::new();
        for (id, goal) in &self.goals {
            out.push_str(&format!("SDG {id}: {}\n", goal.title));
            for (target, text) in &goal.targets {
                out.push_str(&format!("{target}: {text}\n"));
            }
            out.push('\n');
        }
        out.truncate(out.trim_end().len());
        out
    }

    /// IFR use cases rendered as bullet lists; `None` when every list is empty.
    pub fn ifr_text(&self) -> Option<String> {
        let mut out = String::new();
        for (id, cases) in &self.ifr_proposals {
            if cases.is_empty() {
                continue;
            }
            out.push_str(&format!("SDG {id}:\n"));
            for case in cases {
                out.push_str(&format!("- {case}\n"));
            }
            out.push('\n');
        }
        out.truncate(out.trim_end().len());
        (!out.is_empty()).then_some(out)
    }
}

pub fn validate_target(sdg: SdgId, target: TargetId, taxonomy: &Taxonomy) -> TargetValidity {
    if target.goal() != sdg {
        TargetValidity::PrefixMismatch
    } else if taxonomy.contains_target(target) {
        TargetValidity::Valid
    } else {
        TargetValidity::UnknownTarget
    }
}

pub const BUNDLED_SDG_CORPUS: &str = include_str!("../assets/un_sdgs.txt");
pub const BUNDLED_IFR_CORPUS: &str = include_str!("../assets/ifr_sdg_proposals.txt");

/// Taxonomy built from the corpora shipped with the crate.
pub fn bundled() -> Taxonomy {
    let tax = parse_sdg_corpus(BUNDLED_SDG_CORPUS).expect("bundled SDG corpus is well-formed");
    parse_ifr_corpus(BUNDLED_IFR_CORPUS, tax).expect("bundled IFR corpus is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn sdg(n: u8) -> SdgId {
        SdgId::new(n).unwrap()
    }

    fn t(s: &str) -> TargetId {
        s.parse().unwrap()
    }

    /// 17 goals with two targets each, goal 9 carrying `9.5` and `9.b`.
    fn fixture_corpus() -> String {
        let mut s = String::new();
        for n in 1..=17 {
            s.push_str(&format!("SDG {n}: Goal {n}\n"));
            if n == 9 {
                s.push_str("9.5: Enhance scientific research\n9.b: Support domestic technology\n");
            } else {
                s.push_str(&format!("{n}.1: First target of {n}\n{n}.a: Means of {n}\n"));
            }
        }
        s
    }

    #[test]
    fn target_id_parsing() {
        assert_eq!(t("9.5").to_string(), "9.5");
        assert_eq!(t("8.b").suffix(), TargetSuffix::Letter('b'));
        assert_eq!(t("17.19").suffix(), TargetSuffix::Number(19));
        assert!("18.1".parse::<TargetId>().is_err());
        assert!("9.".parse::<TargetId>().is_err());
        assert!("9.100".parse::<TargetId>().is_err());
        assert!("SDG 9".parse::<TargetId>().is_err());
        assert!(t("9.5") < t("9.10"));
        assert!(t("9.10") < t("9.a"));
    }

    #[test]
    fn sdg_id_bounds() {
        assert!(SdgId::new(0).is_err());
        assert!(SdgId::new(18).is_err());
        assert_eq!(SdgId::all().count(), 17);
    }

    #[test]
    fn loads_well_formed_corpus() {
        let tax = parse_sdg_corpus(&fixture_corpus()).unwrap();
        assert_eq!(tax.goals.len(), 17);
        let g9 = tax.goal(sdg(9)).unwrap();
        assert!(g9.targets.contains_key(&t("9.5")));
        assert!(g9.targets.contains_key(&t("9.b")));
        assert!(tax.source_digests.contains_key("sdg"));
    }

    #[test]
    fn empty_corpus_has_no_goals() {
        let err = parse_sdg_corpus("").unwrap_err();
        assert_eq!(err.to_string(), "no goals found");
    }

    #[test]
    fn wrong_goal_count() {
        let err = parse_sdg_corpus("SDG 1: Only\n1.1: x\n").unwrap_err();
        assert!(matches!(err, TaxonomyError::GoalCount(1)));
    }

    #[test]
    fn malformed_header() {
        let err = parse_sdg_corpus("SDG nine: bad\n").unwrap_err();
        assert!(matches!(err, TaxonomyError::MalformedHeader { line: 1, .. }));
    }

    #[test]
    fn target_under_wrong_goal_rejected() {
        let corpus = fixture_corpus().replace("9.5: Enhance", "8.5: Enhance");
        assert!(matches!(
            parse_sdg_corpus(&corpus),
            Err(TaxonomyError::Malformed { .. })
        ));
    }

    #[test]
    fn wrapped_target_lines_are_joined() {
        let corpus = fixture_corpus().replace(
            "9.5: Enhance scientific research\n",
            "9.5: Enhance scientific\n  research and innovation\n",
        );
        let tax = parse_sdg_corpus(&corpus).unwrap();
        assert_eq!(
            tax.goal(sdg(9)).unwrap().targets[&t("9.5")],
            "Enhance scientific research and innovation"
        );
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_sdg_corpus("/nonexistent/sdgs.txt"),
            Err(TaxonomyError::Io { .. })
        ));
    }

    #[test]
    fn load_is_idempotent() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(fixture_corpus().as_bytes()).unwrap();
        let a = load_sdg_corpus(f.path()).unwrap();
        let b = load_sdg_corpus(f.path()).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a, b);
    }

    #[test]
    fn ifr_entries() {
        let tax = parse_sdg_corpus(&fixture_corpus()).unwrap();
        let tax = parse_ifr_corpus(
            "SDG 15:\n- Mobile robots preventing soil erosion\n\nSDG 2:\n- a\n- b\n- c\n",
            tax,
        )
        .unwrap();
        assert!(!tax.ifr_proposals[&sdg(15)].is_empty());
        assert_eq!(tax.ifr_proposals[&sdg(2)].len(), 3);
        assert!(tax.ifr_proposals[&sdg(1)].is_empty());
        assert_eq!(tax.ifr_proposals.len(), 17);
    }

    #[test]
    fn empty_ifr_corpus() {
        let tax = parse_sdg_corpus(&fixture_corpus()).unwrap();
        let tax = parse_ifr_corpus("", tax).unwrap();
        assert_eq!(tax.ifr_proposals.len(), 17);
        assert!(tax.ifr_proposals.values().all(Vec::is_empty));
        assert!(tax.ifr_text().is_none());
    }

    #[test]
    fn ifr_invalid_sdg() {
        let tax = parse_sdg_corpus(&fixture_corpus()).unwrap();
        assert!(matches!(
            parse_ifr_corpus("SDG 18:\n- nope\n", tax),
            Err(TaxonomyError::InvalidSdg(_))
        ));
    }

    #[test]
    fn validate_target_verdicts() {
        let tax = parse_sdg_corpus(&fixture_corpus()).unwrap();
        assert_eq!(validate_target(sdg(9), t("9.5"), &tax), TargetValidity::Valid);
        assert_eq!(
            validate_target(sdg(13), t("9.5"), &tax),
            TargetValidity::PrefixMismatch
        );
        assert_eq!(
            validate_target(sdg(9), t("9.99"), &tax),
            TargetValidity::UnknownTarget
        );
    }

    #[test]
    fn bundled_corpus_is_complete() {
        let tax = bundled();
        let total: usize = tax.goals.values().map(|g| g.targets.len()).sum();
        assert_eq!(total, 169);
        assert!(tax.contains_target(t("3.d")));
        assert!(tax.ifr_proposals[&sdg(15)]
            .iter()
            .any(|c| c.contains("Mobile robots preventing soil erosion")));
    }

    #[test]
    fn sdg_text_round_trips_through_parser() {
        let tax = bundled();
        let again = parse_sdg_corpus(&tax.sdg_text()).unwrap();
        assert_eq!(again.goals, tax.goals);
    }
}

#[cfg(test)]
mod props {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn valid_targets_belong_to_their_goal(s in 1u8..=17, g in 1u8..=17, n in 1u8..=20) {
            let tax = bundled();
            let target = TargetId::new(SdgId::new(g).unwrap(), TargetSuffix::Number(n));
            if validate_target(SdgId::new(s).unwrap(), target, &tax) == TargetValidity::Valid {
                prop_assert_eq!(target.goal().get(), s);
            }
        }

        #[test]
        fn sdg_ids_outside_range_are_rejected(v in any::<u8>()) {
            prop_assert_eq!(SdgId::new(v).is_ok(), (1..=17).contains(&v));
        }
    }
}
