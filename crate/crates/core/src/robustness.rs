//! Repeat-run consistency and cross-model comparison.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::task::JoinSet;
use tracing::warn;

use crate::analytics::{impact_ratios, sdg_distribution, ImpactRatios, SdgDistribution};
use crate::harvest::{file_stem, PaperMeta, PaperText};
use crate::prompting::{prompt_digest, PromptBundle, PromptError};
use crate::provider::Client;
use crate::respparse::{normalize_record, parse_response_lenient, ClassificationRecord, MentionKind, Provenance};
use crate::store::{load_dataset, RecordReader, StoreError};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Error)]
pub enum RobustnessError {
    #[error("no runs to aggregate")]
    Empty,
    #[error("records mix paper ids {0} and {1}")]
    MixedIds(String, String),
    #[error("run count must be at least 1")]
    ZeroRuns,
    #[error("need at least two datasets, got {0}")]
    TooFewDatasets(usize),
    #[error("datasets share no paper id")]
    EmptyIntersection,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Share of runs selecting each label. Labels never selected are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub paper_id: String,
    pub run_count: usize,
    pub failed_runs: usize,
    pub paper_type: BTreeMap<String, f64>,
    pub motivated_sdgs: BTreeMap<String, f64>,
    pub motivated_targets: BTreeMap<String, f64>,
    pub aligned_sdgs: BTreeMap<String, f64>,
    pub aligned_targets: BTreeMap<String, f64>,
    pub mentions: BTreeMap<String, f64>,
}

fn tally<I, T>(counts: &mut BTreeMap<String, usize>, labels: I)
where
    I: IntoIterator<Item = T>,
    T: ToString,
{
    let unique: BTreeSet<String> = labels.into_iter().map(|l| l.to_string()).collect();
    for l in unique {
        *counts.entry(l).or_default() += 1;
    }
}

fn rates(counts: BTreeMap<String, usize>, n: usize) -> BTreeMap<String, f64> {
    counts.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect()
}

pub fn stability_rates(records: &[ClassificationRecord]) -> Result<StabilityReport, RobustnessError> {
    let first = records.first().ok_or(RobustnessError::Empty)?;
    if let Some(other) = records.iter().find(|r| r.arxiv_id != first.arxiv_id) {
        return Err(RobustnessError::MixedIds(first.arxiv_id.clone(), other.arxiv_id.clone()));
    }
    let mut ty = BTreeMap::new();
    let mut ms = BTreeMap::new();
    let mut mt = BTreeMap::new();
    let mut als = BTreeMap::new();
    let mut alt = BTreeMap::new();
    let mut men = BTreeMap::new();
    for r in records {
        tally(&mut ty, r.paper_type.iter().map(|t| t.as_str()));
        tally(&mut ms, &r.motivated.sdgs);
        tally(&mut mt, r.motivated.all_targets());
        tally(&mut als, &r.aligned.sdgs);
        tally(&mut alt, r.aligned.all_targets());
        tally(
            &mut men,
            MentionKind::ALL.iter().filter(|k| r.mentions.get(**k)).map(|k| k.as_str()),
        );
    }
    let n = records.len();
    Ok(StabilityReport {
        paper_id: first.arxiv_id.clone(),
        run_count: n,
        failed_runs: 0,
        paper_type: rates(ty, n),
        motivated_sdgs: rates(ms, n),
        motivated_targets: rates(mt, n),
        aligned_sdgs: rates(als, n),
        aligned_targets: rates(alt, n),
        mentions: rates(men, n),
    })
}

impl StabilityReport {
    /// `kind,label,rate` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,label,rate\n");
        for (kind, map) in [
            ("paper_type", &self.paper_type),
            ("motivated_sdg", &self.motivated_sdgs),
            ("motivated_target", &self.motivated_targets),
            ("aligned_sdg", &self.aligned_sdgs),
            ("aligned_target", &self.aligned_targets),
            ("mention", &self.mentions),
        ] {
            for (label, rate) in map {
                out.push_str(&format!("{kind},{label},{rate:.6}\n"));
            }
        }
        out
    }
}

pub fn runs_path(dir: &Path, paper_id: &str) -> PathBuf {
    dir.join(format!("{}.runs.jsonl", file_stem(paper_id)))
}

/// Repeats the classification of one paper `n` times with identical
/// prompts. Runs already stored under the same prompt digest and model are
/// reused, so an interrupted protocol resumes where it stopped.
#[allow(clippy::too_many_arguments)]
pub async fn run_consistency(
    client: Arc<Client>,
    taxonomy: &Taxonomy,
    system_text: &str,
    meta: &PaperMeta,
    paper: &PaperText,
    n: u32,
    max_input_tokens: usize,
    out_dir: &Path,
    run_id: &str,
) -> Result<StabilityReport, RobustnessError> {
    if n == 0 {
        return Err(RobustnessError::ZeroRuns);
    }
    let bundle = PromptBundle::assemble(system_text.to_string(), &meta.title, &paper.text, max_input_tokens)?;
    let digest = prompt_digest(system_text);
    let model_id = client.config().model_id.clone();
    let path = runs_path(out_dir, &meta.arxiv_id);
    let io = |source| RobustnessError::Io {
        path: path.clone(),
        source,
    };
    std::fs::create_dir_all(out_dir).map_err(io)?;

    let mut records: Vec<ClassificationRecord> = Vec::new();
    if path.exists() {
        for item in RecordReader::open(&path)?.with_repeated_ids() {
            match item {
                Ok(r) if r.prompt_digest == digest && r.model_id == model_id && r.run_index.is_some_and(|i| i < n) => {
                    records.push(r)
                }
                Ok(_) => {}
                Err(d) => warn!(line = d.line, "{}", d.message),
            }
        }
    }
    let done: HashSet<u32> = records.iter().filter_map(|r| r.run_index).collect();
    let mut todo = (0..n).filter(|i| !done.contains(i));
    let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;

    let limit = client.config().max_concurrency.max(1);
    let mut running = JoinSet::new();
    let mut failed = 0;
    let spawn = |running: &mut JoinSet<_>, index: u32| {
        let client = client.clone();
        let bundle = bundle.clone();
        let id = meta.arxiv_id.clone();
        running.spawn(async move {
            let r = client.submit_one(Some(&id), &bundle.system_text, &bundle.user_text).await;
            (index, r)
        });
    };
    loop {
        while running.len() < limit {
            match todo.next() {
                Some(i) => spawn(&mut running, i),
                None => break,
            }
        }
        let Some(joined) = running.join_next().await else {
            break;
        };
        let (index, result) = joined.map_err(|e| io(std::io::Error::other(e.to_string())))?;
        match result {
            Ok(resp) => {
                let draft = parse_response_lenient(&resp.raw_text);
                let record = normalize_record(
                    draft,
                    taxonomy,
                    Provenance {
                        arxiv_id: meta.arxiv_id.clone(),
                        published: Some(meta.published),
                        quarter: Some(meta.quarter),
                        model_id: model_id.clone(),
                        prompt_digest: digest.clone(),
                        run_id: run_id.to_string(),
                        run_index: Some(index),
                        decoding: Some(client.config().decoding.clone()),
                    },
                );
                let mut line = serde_json::to_string(&record).expect("records serialize");
                line.push('\n');
                file.write_all(line.as_bytes()).map_err(io)?;
                file.flush().map_err(io)?;
                records.push(record);
            }
            Err(e) => {
                warn!(run = index, "consistency run failed: {e}");
                failed += 1;
            }
        }
    }
    records.sort_by_key(|r| r.run_index);
    let mut report = stability_rates(&records)?;
    report.failed_runs = failed;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub label: String,
    pub distribution: SdgDistribution,
    pub impact: ImpactRatios,
    pub motivated_overall_ratio: f64,
}

fn summarize(label: &str, records: &[ClassificationRecord]) -> ModelSummary {
    let motivated = records.iter().filter(|r| r.is_motivated()).count();
    ModelSummary {
        label: label.to_string(),
        distribution: sdg_distribution(records),
        impact: impact_ratios(records),
        motivated_overall_ratio: if records.is_empty() {
            0.0
        } else {
            motivated as f64 / records.len() as f64
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub paper_ids: Vec<String>,
    pub models: Vec<ModelSummary>,
    /// Per model, ids outside the common set that were left out.
    pub excluded: BTreeMap<String, Vec<String>>,
    pub warnings: Vec<String>,
}

impl EnsembleReport {
    /// Per-SDG aligned and motivated ratio differences of each model
    /// against the first: `(model, sdg, d_aligned, d_motivated)`.
    pub fn deltas(&self) -> Vec<(String, u8, f64, f64)> {
        let Some(base) = self.models.first() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for m in &self.models {
            for (sdg, c) in &m.distribution.per_sdg {
                let b = base.distribution.per_sdg.get(sdg).copied().unwrap_or_default();
                out.push((
                    m.label.clone(),
                    sdg.get(),
                    c.aligned_ratio - b.aligned_ratio,
                    c.motivated_ratio - b.motivated_ratio,
                ));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,sdg,aligned_ratio,motivated_ratio,delta_aligned,delta_motivated\n");
        let deltas = self.deltas();
        let mut i = 0;
        for m in &self.models {
            for (sdg, c) in &m.distribution.per_sdg {
                let (_, _, da, dm) = deltas[i];
                i += 1;
                out.push_str(&format!(
                    "{},{sdg},{:.6},{:.6},{da:.6},{dm:.6}\n",
                    m.label, c.aligned_ratio, c.motivated_ratio
                ));
            }
        }
        out
    }
}

/// Compares labelled record sets on the paper ids they all share.
pub fn ensemble_compare(datasets: &[(String, Vec<ClassificationRecord>)]) -> Result<EnsembleReport, RobustnessError> {
    if datasets.len() < 2 {
        return Err(RobustnessError::TooFewDatasets(datasets.len()));
    }
    let id_sets: Vec<BTreeSet<&str>> = datasets
        .iter()
        .map(|(_, rs)| rs.iter().map(|r| r.arxiv_id.as_str()).collect())
        .collect();
    let common: BTreeSet<&str> = id_sets
        .iter()
        .skip(1)
        .fold(id_sets[0].clone(), |acc, s| acc.intersection(s).copied().collect());
    if common.is_empty() {
        return Err(RobustnessError::EmptyIntersection);
    }
    let mut excluded = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut models = Vec::new();
    for ((label, records), ids) in datasets.iter().zip(&id_sets) {
        let extra: Vec<String> = ids.difference(&common).map(|s| s.to_string()).collect();
        if !extra.is_empty() {
            warnings.push(format!(
                "{label}: {} papers outside the common set ignored",
                extra.len()
            ));
            excluded.insert(label.clone(), extra);
        }
        let kept: Vec<ClassificationRecord> = records
            .iter()
            .filter(|r| common.contains(r.arxiv_id.as_str()))
            .cloned()
            .collect();
        models.push(summarize(label, &kept));
    }
    Ok(EnsembleReport {
        paper_ids: common.into_iter().map(String::from).collect(),
        models,
        excluded,
        warnings,
    })
}

/// Loads each dataset and labels it by its model id (file stem if empty).
pub fn ensemble_compare_paths(paths: &[PathBuf]) -> Result<EnsembleReport, RobustnessError> {
    let mut sets = Vec::new();
    for p in paths {
        let loaded = load_dataset(p)?;
        let label = loaded
            .records
            .first()
            .map(|r| r.model_id.clone())
            .filter(|m| !m.is_empty())
            .unwrap_or_else(|| {
                p.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
        let label = if sets.iter().any(|(l, _): &(String, _)| *l == label) {
            format!("{label} ({})", p.display())
        } else {
            label
        };
        sets.push((label, loaded.records));
    }
    ensemble_compare(&sets)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::respparse::{MentionFlags, PaperType, SdgAssignment, SCHEMA_VERSION};
    use crate::taxonomy::{SdgId, TargetId};

    fn rec(id: &str, motivated: &[(u8, &[&str])], aligned: &[u8]) -> ClassificationRecord {
        let assign = |items: Vec<(u8, Vec<&str>)>| SdgAssignment {
            sdgs: items.iter().map(|(s, _)| SdgId::new(*s).unwrap()).collect(),
            targets: items
                .iter()
                .map(|(_, ts)| ts.iter().map(|t| t.parse::<TargetId>().unwrap()).collect())
                .collect(),
            evidence: vec![],
        };
        let m: Vec<(u8, Vec<&str>)> = motivated.iter().map(|(s, t)| (*s, t.to_vec())).collect();
        let mut a = m.clone();
        for s in aligned {
            if !a.iter().any(|(x, _)| x == s) {
                a.push((*s, vec![]));
            }
        }
        ClassificationRecord {
            arxiv_id: id.into(),
            published: None,
            quarter: "2024Q4".parse().ok(),
            paper_type: BTreeSet::from([PaperType::Experimental]),
            motivated: assign(m),
            aligned: assign(a),
            mentions: MentionFlags::default(),
            ifr: Default::default(),
            reasoning: String::new(),
            model_id: "m".into(),
            prompt_digest: String::new(),
            run_id: String::new(),
            run_index: None,
            decoding: None,
            schema_version: SCHEMA_VERSION.into(),
            warnings: vec![],
        }
    }

    #[test]
    fn hand_count() {
        let runs = vec![
            rec("p", &[(13, &["13.1"])], &[9]),
            rec("p", &[(13, &["13.1"])], &[9]),
            rec("p", &[(13, &[])], &[]),
            rec("p", &[], &[9]),
        ];
        let r = stability_rates(&runs).unwrap();
        assert_eq!(r.motivated_sdgs["13"], 0.75);
        assert_eq!(r.motivated_targets["13.1"], 0.5);
        assert_eq!(r.aligned_sdgs["9"], 0.75);
        assert_eq!(r.aligned_sdgs["13"], 0.75);
        assert_eq!(r.paper_type["experimental"], 1.0);
        assert!(!r.motivated_sdgs.contains_key("15"));
    }

    #[test]
    fn identical_runs_all_one() {
        let runs = vec![rec("p", &[(15, &["15.1", "15.5"])], &[9]); 5];
        let r = stability_rates(&runs).unwrap();
        assert!(r.motivated_sdgs.values().chain(r.aligned_targets.values()).all(|v| *v == 1.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(stability_rates(&[]), Err(RobustnessError::Empty)));
        let mixed = vec![rec("a", &[], &[9]), rec("b", &[], &[9])];
        assert!(matches!(stability_rates(&mixed), Err(RobustnessError::MixedIds(..))));
    }

    #[test]
    fn permutation_invariant() {
        let mut runs = vec![
            rec("p", &[(13, &["13.1"])], &[9]),
            rec("p", &[], &[9, 11]),
            rec("p", &[(2, &["2.4"])], &[]),
        ];
        let a = stability_rates(&runs).unwrap();
        runs.rotate_left(1);
        assert_eq!(stability_rates(&runs).unwrap(), a);
    }

    #[test]
    fn self_comparison_has_zero_deltas() {
        let recs = vec![rec("a", &[(13, &[])], &[9]), rec("b", &[], &[9, 11])];
        let report = ensemble_compare(&[("x".into(), recs.clone()), ("y".into(), recs)]).unwrap();
        assert!(report.deltas().iter().all(|(_, _, a, m)| *a == 0.0 && *m == 0.0));
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn intersection_with_warning() {
        let a = vec![rec("a", &[], &[9]), rec("b", &[], &[9])];
        let b = vec![rec("b", &[], &[9]), rec("c", &[], &[9])];
        let report = ensemble_compare(&[("x".into(), a.clone()), ("y".into(), b)]).unwrap();
        assert_eq!(report.paper_ids, ["b"]);
        assert_eq!(report.warnings.len(), 2);
        let c = vec![rec("z", &[], &[9])];
        assert!(matches!(
            ensemble_compare(&[("x".into(), a.clone()), ("y".into(), c)]),
            Err(RobustnessError::EmptyIntersection)
        ));
        assert!(matches!(
            ensemble_compare(&[("x".into(), a)]),
            Err(RobustnessError::TooFewDatasets(1))
        ));
    }

    #[test]
    fn single_model_matches_plain_analytics() {
        let recs = vec![rec("a", &[(13, &[])], &[9]), rec("b", &[], &[9, 11])];
        let report = ensemble_compare(&[("x".into(), recs.clone()), ("y".into(), recs.clone())]).unwrap();
        assert_eq!(report.models[0].distribution, sdg_distribution(&recs));
        assert_eq!(report.models[0].impact, impact_ratios(&recs));
    }
}

#[cfg(test)]
mod props {
    use proptest::prelude::*;

    use super::*;
    use crate::analytics::{impact_ratios, sdg_distribution};
    use crate::respparse::strategies::record;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn stability_rates_ignore_run_order(
            runs in proptest::collection::vec(record(), 1..30),
            rotate in any::<usize>(),
        ) {
            let runs: Vec<_> = runs.into_iter().map(|mut r| { r.arxiv_id = "p".into(); r }).collect();
            let report = stability_rates(&runs).unwrap();
            let mut permuted = runs.clone();
            permuted.reverse();
            let k = rotate % permuted.len();
            permuted.rotate_left(k);
            prop_assert_eq!(stability_rates(&permuted).unwrap(), report.clone());

            let n = runs.len() as f64;
            for (label, rate) in &report.aligned_sdgs {
                let hits = runs.iter().filter(|r| r.aligned.sdgs.iter().any(|s| s.to_string() == *label)).count();
                prop_assert_eq!(*rate, hits as f64 / n);
            }
        }

        #[test]
        fn each_ensemble_member_is_plain_analytics(records in proptest::collection::vec(record(), 1..20)) {
            let records: Vec<_> = records
                .into_iter()
                .enumerate()
                .map(|(i, mut r)| { r.arxiv_id = format!("p{i}"); r })
                .collect();
            let report = ensemble_compare(&[("m".into(), records.clone()), ("n".into(), records.clone())]).unwrap();
            for m in &report.models {
                prop_assert_eq!(&m.distribution, &sdg_distribution(&records));
                prop_assert_eq!(&m.impact, &impact_ratios(&records));
            }
        }
    }
}
