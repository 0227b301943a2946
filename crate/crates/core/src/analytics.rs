//! Corpus-level aggregates: impact-mention ratios, SDG distribution,
//! motivation disparity, quarterly series and growth rate.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harvest::{quarter_of, Quarter};
use crate::respparse::{ClassificationRecord, MentionKind};
use crate::taxonomy::SdgId;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("record {0} has neither a quarter nor a publication date")]
    MissingQuarter(String),
    #[error("growth fit needs at least 2 non-zero points, got {0}")]
    TooFewPoints(usize),
    #[error("report {path}: {message}")]
    Report { path: PathBuf, message: String },
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn record_quarter(r: &ClassificationRecord) -> Result<Quarter, AnalyticsError> {
    r.quarter
        .or_else(|| r.published.map(quarter_of))
        .ok_or_else(|| AnalyticsError::MissingQuarter(r.arxiv_id.clone()))
}

/// The three impact flags; UN-SDG mentions join only on request.
pub fn has_any_impact(r: &ClassificationRecord, include_un_sdgs: bool) -> bool {
    let m = &r.mentions;
    m.social || m.ecological || m.sustainability || (include_un_sdgs && m.un_sdgs)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ImpactCounts {
    pub social: usize,
    pub ecological: usize,
    pub sustainability: usize,
    pub un_sdgs: usize,
    pub any_impact: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactRatios {
    pub denominator: usize,
    pub counts: ImpactCounts,
    pub social: f64,
    pub ecological: f64,
    pub sustainability: f64,
    pub un_sdgs: f64,
    pub any_impact: f64,
    pub any_includes_un_sdgs: bool,
    /// Set when there were no records; all ratios are then 0.
    pub empty: bool,
}

pub fn impact_ratios(records: &[ClassificationRecord]) -> ImpactRatios {
    impact_ratios_with(records, false)
}

pub fn impact_ratios_with(records: &[ClassificationRecord], include_un_sdgs: bool) -> ImpactRatios {
    let mut c = ImpactCounts::default();
    for r in records {
        let m = &r.mentions;
        c.social += m.social as usize;
        c.ecological += m.ecological as usize;
        c.sustainability += m.sustainability as usize;
        c.un_sdgs += m.un_sdgs as usize;
        c.any_impact += has_any_impact(r, include_un_sdgs) as usize;
    }
    let n = records.len();
    ImpactRatios {
        denominator: n,
        counts: c,
        social: ratio(c.social, n),
        ecological: ratio(c.ecological, n),
        sustainability: ratio(c.sustainability, n),
        un_sdgs: ratio(c.un_sdgs, n),
        any_impact: ratio(c.any_impact, n),
        any_includes_un_sdgs: include_un_sdgs,
        empty: n == 0,
    }
}

/// What a quarterly series measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Count,
    /// Share of papers with the given mention flag.
    Mention(MentionKind),
    AnyImpact { include_un_sdgs: bool },
    /// Share of papers with a non-empty motivated set.
    Motivated,
}

impl Selector {
    fn is_ratio(self) -> bool {
        !matches!(self, Selector::Count)
    }

    fn hit(self, r: &ClassificationRecord) -> bool {
        match self {
            Selector::Count => true,
            Selector::Mention(kind) => r.mentions.get(kind),
            Selector::AnyImpact { include_un_sdgs } => has_any_impact(r, include_un_sdgs),
            Selector::Motivated => r.is_motivated(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarterPoint {
    pub quarter: Quarter,
    /// Papers in the quarter.
    pub total: usize,
    /// Papers matching the selector.
    pub hits: usize,
    /// `total` for counts, `hits / total` for ratios.
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuarterSeries {
    pub points: Vec<QuarterPoint>,
}

impl QuarterSeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn mean(&self) -> f64 {
        if self.points.is_empty() {
            0.0
        } else {
            self.points.iter().map(|p| p.value).sum::<f64>() / self.points.len() as f64
        }
    }

    pub fn get(&self, q: Quarter) -> Option<&QuarterPoint> {
        self.points.iter().find(|p| p.quarter == q)
    }
}

/// Buckets by quarter, filling empty quarters inside the range with 0.
pub fn quarterly_series(
    records: &[ClassificationRecord],
    selector: Selector,
) -> Result<QuarterSeries, AnalyticsError> {
    let mut buckets: BTreeMap<Quarter, (usize, usize)> = BTreeMap::new();
    for r in records {
        let b = buckets.entry(record_quarter(r)?).or_default();
        b.0 += 1;
        b.1 += selector.hit(r) as usize;
    }
    let (Some(first), Some(last)) = (buckets.keys().next().copied(), buckets.keys().last().copied()) else {
        return Ok(QuarterSeries::default());
    };
    let mut points = Vec::new();
    let mut q = first;
    loop {
        let (total, hits) = buckets.get(&q).copied().unwrap_or((0, 0));
        let value = if selector.is_ratio() {
            ratio(hits, total)
        } else {
            total as f64
        };
        points.push(QuarterPoint {
            quarter: q,
            total,
            hits,
            value,
        });
        if q == last {
            break;
        }
        q = q.next();
    }
    Ok(QuarterSeries { points })
}

pub fn motivated_overall_series(records: &[ClassificationRecord]) -> Result<QuarterSeries, AnalyticsError> {
    quarterly_series(records, Selector::Motivated)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SdgCounts {
    pub aligned_count: usize,
    pub motivated_count: usize,
    pub aligned_ratio: f64,
    pub motivated_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdgDistribution {
    pub denominator: usize,
    pub per_sdg: BTreeMap<SdgId, SdgCounts>,
    pub no_relevance_count: usize,
    pub no_relevance_ratio: f64,
}

pub fn sdg_distribution(records: &[ClassificationRecord]) -> SdgDistribution {
    let mut per_sdg: BTreeMap<SdgId, SdgCounts> = SdgId::all().map(|s| (s, SdgCounts::default())).collect();
    let mut none = 0;
    for r in records {
        // a paper counts once per SDG
        let mut aligned: Vec<SdgId> = r.aligned.sdgs.clone();
        aligned.sort();
        aligned.dedup();
        let mut motivated: Vec<SdgId> = r.motivated.sdgs.clone();
        motivated.sort();
        motivated.dedup();
        for s in aligned {
            per_sdg.entry(s).or_default().aligned_count += 1;
        }
        for s in motivated {
            per_sdg.entry(s).or_default().motivated_count += 1;
        }
        none += r.has_no_relevance() as usize;
    }
    let n = records.len();
    for c in per_sdg.values_mut() {
        c.aligned_ratio = ratio(c.aligned_count, n);
        c.motivated_ratio = ratio(c.motivated_count, n);
    }
    SdgDistribution {
        denominator: n,
        per_sdg,
        no_relevance_count: none,
        no_relevance_ratio: ratio(none, n),
    }
}

/// SDGs aligned with fewer papers than this are flagged as outliers.
pub const MIN_DISPARITY_SUPPORT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisparityEntry {
    pub aligned_count: usize,
    pub motivated_count: usize,
    /// `None` when no paper is aligned with the SDG.
    pub ratio: Option<f64>,
    pub outlier: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotivationDisparity {
    pub per_sdg: BTreeMap<SdgId, DisparityEntry>,
}

pub fn motivation_disparity(distribution: &SdgDistribution) -> MotivationDisparity {
    let per_sdg = distribution
        .per_sdg
        .iter()
        .map(|(s, c)| {
            let ratio = (c.aligned_count > 0).then(|| c.motivated_count as f64 / c.aligned_count as f64);
            (
                *s,
                DisparityEntry {
                    aligned_count: c.aligned_count,
                    motivated_count: c.motivated_count,
                    ratio,
                    outlier: c.aligned_count > 0 && c.aligned_count < MIN_DISPARITY_SUPPORT,
                },
            )
        })
        .collect();
    MotivationDisparity { per_sdg }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// Slope of log2(count) per year.
    pub slope_per_year: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `1 / slope`; `None` when the series is not growing.
    pub doubling_years: Option<f64>,
    /// From the first and last non-zero points only.
    pub endpoint_doubling_years: Option<f64>,
    pub points_used: usize,
    pub first: Quarter,
    pub last: Quarter,
}

/// Least-squares fit of `log2(count)` against time in years.
pub fn growth_doubling_time(series: &QuarterSeries) -> Result<GrowthFit, AnalyticsError> {
    let pts: Vec<(Quarter, f64)> = series
        .points
        .iter()
        .filter(|p| p.value > 0.0)
        .map(|p| (p.quarter, p.value))
        .collect();
    if pts.len() < 2 {
        return Err(AnalyticsError::TooFewPoints(pts.len()));
    }
    let xs: Vec<f64> = pts.iter().map(|(q, _)| q.as_years()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.log2()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 && sxx > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    let growing = |s: f64| (s > 1e-12).then(|| 1.0 / s);

    let (q0, c0) = pts[0];
    let (q1, c1) = pts[pts.len() - 1];
    let span = q1.as_years() - q0.as_years();
    let endpoint_slope = if span > 0.0 { (c1 / c0).log2() / span } else { 0.0 };
    Ok(GrowthFit {
        slope_per_year: slope,
        intercept,
        r_squared,
        doubling_years: growing(slope),
        endpoint_doubling_years: growing(endpoint_slope),
        points_used: pts.len(),
        first: q0,
        last: q1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsSummary {
    pub denominator: usize,
    pub impact: ImpactRatios,
    pub no_relevance_count: usize,
    pub no_relevance_ratio: f64,
    pub motivated_papers: usize,
    pub motivated_ratio: f64,
    pub motivated_quarterly_mean: f64,
    pub growth: Option<GrowthFit>,
    pub files: Vec<String>,
}

fn f(v: f64) -> String {
    format!("{v:.6}")
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<String, AnalyticsError> {
    let path = dir.join(name);
    let err = |e: &dyn std::fmt::Display| AnalyticsError::Report {
        path: path.clone(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(&path).map_err(|e| err(&e))?;
    w.write_record(header).map_err(|e| err(&e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| err(&e))?;
    }
    w.flush().map_err(|e| err(&e))?;
    Ok(name.to_string())
}

/// Writes the per-figure CSV files and `summary.json` into `dir`.
/// Output depends only on the multiset of records.
pub fn write_reports(
    records: &[ClassificationRecord],
    dir: &Path,
    include_un_sdgs: bool,
) -> Result<AnalyticsSummary, AnalyticsError> {
    std::fs::create_dir_all(dir).map_err(|e| AnalyticsError::Report {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut files = Vec::new();

    let counts = quarterly_series(records, Selector::AnyImpact { include_un_sdgs })?;
    files.push(write_csv(
        dir,
        "fig3_counts.csv",
        &["quarter", "papers", "any_impact_papers"],
        counts
            .points
            .iter()
            .map(|p| vec![p.quarter.to_string(), p.total.to_string(), p.hits.to_string()])
            .collect(),
    )?);

    let per_kind: Vec<QuarterSeries> = MentionKind::ALL
        .iter()
        .map(|k| quarterly_series(records, Selector::Mention(*k)))
        .collect::<Result<_, _>>()?;
    let mut header = vec!["quarter", "papers"];
    header.extend(MentionKind::ALL.iter().map(|k| k.as_str()));
    header.push("any_impact");
    let rows = counts
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row = vec![p.quarter.to_string(), p.total.to_string()];
            row.extend(per_kind.iter().map(|s| f(s.points[i].value)));
            row.push(f(ratio(p.hits, p.total)));
            row
        })
        .collect();
    files.push(write_csv(dir, "fig4_ratios.csv", &header, rows)?);

    let dist = sdg_distribution(records);
    files.push(write_csv(
        dir,
        "fig5_distribution.csv",
        &["sdg", "aligned_count", "aligned_ratio", "motivated_count", "motivated_ratio", "denominator"],
        dist.per_sdg
            .iter()
            .map(|(s, c)| {
                vec![
                    s.to_string(),
                    c.aligned_count.to_string(),
                    f(c.aligned_ratio),
                    c.motivated_count.to_string(),
                    f(c.motivated_ratio),
                    dist.denominator.to_string(),
                ]
            })
            .collect(),
    )?);

    let disparity = motivation_disparity(&dist);
    files.push(write_csv(
        dir,
        "fig6_disparity.csv",
        &["sdg", "aligned_count", "motivated_count", "ratio", "outlier"],
        disparity
            .per_sdg
            .iter()
            .map(|(s, d)| {
                vec![
                    s.to_string(),
                    d.aligned_count.to_string(),
                    d.motivated_count.to_string(),
                    d.ratio.map(f).unwrap_or_default(),
                    d.outlier.to_string(),
                ]
            })
            .collect(),
    )?);

    let motivated = motivated_overall_series(records)?;
    files.push(write_csv(
        dir,
        "fig7_motivated.csv",
        &["quarter", "papers", "motivated_papers", "ratio"],
        motivated
            .points
            .iter()
            .map(|p| vec![p.quarter.to_string(), p.total.to_string(), p.hits.to_string(), f(p.value)])
            .collect(),
    )?);

    let totals = quarterly_series(records, Selector::Count)?;
    let motivated_papers = records.iter().filter(|r| r.is_motivated()).count();
    files.push("summary.json".into());
    let summary = AnalyticsSummary {
        denominator: records.len(),
        impact: impact_ratios_with(records, include_un_sdgs),
        no_relevance_count: dist.no_relevance_count,
        no_relevance_ratio: dist.no_relevance_ratio,
        motivated_papers,
        motivated_ratio: ratio(motivated_papers, records.len()),
        motivated_quarterly_mean: motivated.mean(),
        growth: growth_doubling_time(&totals).ok(),
        files,
    };
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, json + "\n").map_err(|e| AnalyticsError::Report {
        path,
        message: e.to_string(),
    })?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use approx::assert_relative_eq;

    use super::*;
    use crate::respparse::{MentionFlags, PaperType, SdgAssignment, SCHEMA_VERSION};

    fn sdgs(v: &[u8]) -> Vec<SdgId> {
        v.iter().map(|n| SdgId::new(*n).unwrap()).collect()
    }

    fn rec(id: usize, q: &str, aligned: &[u8], motivated: &[u8], m: MentionFlags) -> ClassificationRecord {
        ClassificationRecord {
            arxiv_id: format!("p{id}"),
            published: None,
            quarter: Some(q.parse().unwrap()),
            paper_type: BTreeSet::from([PaperType::Experimental]),
            motivated: SdgAssignment {
                sdgs: sdgs(motivated),
                targets: vec![vec![]; motivated.len()],
                evidence: vec![],
            },
            aligned: SdgAssignment {
                sdgs: sdgs(aligned),
                targets: vec![vec![]; aligned.len()],
                evidence: vec![],
            },
            mentions: m,
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

    fn social(on: bool) -> MentionFlags {
        MentionFlags {
            social: on,
            ..Default::default()
        }
    }

    #[test]
    fn ten_records_three_social() {
        let records: Vec<_> = (0..10).map(|i| rec(i, "2020Q1", &[9], &[], social(i < 3))).collect();
        let r = impact_ratios(&records);
        assert_relative_eq!(r.social, 0.3);
        assert_relative_eq!(r.any_impact, 0.3);
        assert!(!r.empty);
    }

    #[test]
    fn empty_input() {
        let r = impact_ratios(&[]);
        assert!(r.empty);
        assert_eq!(r.social, 0.0);
        assert_eq!(r.any_impact, 0.0);
        assert!(quarterly_series(&[], Selector::Count).unwrap().points.is_empty());
    }

    #[test]
    fn any_impact_excludes_un_by_default() {
        let un = MentionFlags {
            un_sdgs: true,
            ..Default::default()
        };
        let records = vec![rec(0, "2020Q1", &[9], &[], un), rec(1, "2020Q1", &[9], &[], social(false))];
        assert_eq!(impact_ratios(&records).any_impact, 0.0);
        assert_relative_eq!(impact_ratios_with(&records, true).any_impact, 0.5);
    }

    #[test]
    fn gap_filled() {
        let records = vec![
            rec(0, "2015Q1", &[9], &[], social(false)),
            rec(1, "2015Q3", &[9], &[], social(false)),
            rec(2, "2015Q3", &[9], &[], social(false)),
        ];
        let s = quarterly_series(&records, Selector::Count).unwrap();
        let got: Vec<_> = s.points.iter().map(|p| (p.quarter.to_string(), p.value)).collect();
        assert_eq!(
            got,
            vec![("2015Q1".into(), 1.0), ("2015Q2".into(), 0.0), ("2015Q3".into(), 2.0)]
        );
        assert_eq!(s.points.iter().map(|p| p.total).sum::<usize>(), 3);
    }

    #[test]
    fn missing_quarter_is_an_error() {
        let mut r = rec(0, "2015Q1", &[9], &[], social(false));
        r.quarter = None;
        assert!(matches!(
            quarterly_series(&[r.clone()], Selector::Count),
            Err(AnalyticsError::MissingQuarter(_))
        ));
        r.published = chrono::NaiveDate::from_ymd_opt(2016, 8, 2);
        let s = quarterly_series(&[r], Selector::Count).unwrap();
        assert_eq!(s.points[0].quarter.to_string(), "2016Q3");
    }

    #[test]
    fn six_record_flag_ratios() {
        let recs = vec![
            rec(0, "2021Q1", &[9], &[], social(true)),
            rec(1, "2021Q1", &[9], &[], social(false)),
            rec(2, "2021Q1", &[9], &[], social(true)),
            rec(3, "2021Q2", &[9], &[], social(false)),
            rec(4, "2021Q2", &[9], &[], social(false)),
            rec(5, "2021Q2", &[9], &[], social(true)),
        ];
        let s = quarterly_series(&recs, Selector::Mention(MentionKind::Social)).unwrap();
        assert_relative_eq!(s.points[0].value, 2.0 / 3.0);
        assert_relative_eq!(s.points[1].value, 1.0 / 3.0);
    }

    #[test]
    fn motivated_series_hand_count() {
        let mut recs = Vec::new();
        for i in 0..4 {
            let m: &[u8] = if i < 2 { &[13] } else { &[] };
            recs.push(rec(i, "2022Q1", &[9, 13], m, social(false)));
        }
        for i in 4..8 {
            recs.push(rec(i, "2022Q2", &[9], &[], social(false)));
        }
        assert_eq!(motivated_overall_series(&recs).unwrap().values(), vec![0.5, 0.0]);
        let all: Vec<_> = (0..3).map(|i| rec(i, "2022Q1", &[3], &[3], social(false))).collect();
        assert_eq!(motivated_overall_series(&all).unwrap().values(), vec![1.0]);
    }

    #[test]
    fn distribution_and_disparity() {
        let recs = vec![
            rec(0, "2020Q1", &[9, 13], &[13], social(false)),
            rec(1, "2020Q1", &[9, 13, 13], &[], social(false)),
            rec(2, "2020Q1", &[13], &[], social(false)),
            rec(3, "2020Q1", &[13, 1], &[1], social(false)),
            rec(4, "2020Q1", &[], &[], social(false)),
        ];
        let d = sdg_distribution(&recs);
        let s13 = d.per_sdg[&SdgId::new(13).unwrap()];
        assert_eq!((s13.aligned_count, s13.motivated_count), (4, 1));
        assert_relative_eq!(s13.aligned_ratio, 0.8);
        assert_eq!(d.no_relevance_count, 1);
        let disp = motivation_disparity(&d);
        assert_eq!(disp.per_sdg[&SdgId::new(13).unwrap()].ratio, Some(0.25));
        assert!(disp.per_sdg[&SdgId::new(1).unwrap()].outlier);
        assert_eq!(disp.per_sdg[&SdgId::new(17).unwrap()].ratio, None);
    }

    fn series(values: &[(&str, f64)]) -> QuarterSeries {
        QuarterSeries {
            points: values
                .iter()
                .map(|(q, v)| QuarterPoint {
                    quarter: q.parse().unwrap(),
                    total: *v as usize,
                    hits: *v as usize,
                    value: *v,
                })
                .collect(),
        }
    }

    #[test]
    fn exact_doubling_every_eight_quarters() {
        let mut q: Quarter = "2015Q1".parse().unwrap();
        let mut pts = Vec::new();
        for i in 0..24 {
            pts.push(QuarterPoint {
                quarter: q,
                total: 0,
                hits: 0,
                value: 100.0 * 2f64.powf(i as f64 / 8.0),
            });
            q = q.next();
        }
        let fit = growth_doubling_time(&QuarterSeries { points: pts }).unwrap();
        assert_relative_eq!(fit.doubling_years.unwrap(), 2.0, epsilon = 1e-9);
        assert_relative_eq!(fit.endpoint_doubling_years.unwrap(), 2.0, epsilon = 1e-9);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn endpoint_estimate() {
        let fit = growth_doubling_time(&series(&[("2015Q1", 80.0), ("2026Q1", 3100.0)])).unwrap();
        let oracle = 11.0 * std::f64::consts::LN_2 / (3100.0f64 / 80.0).ln();
        assert_relative_eq!(fit.endpoint_doubling_years.unwrap(), oracle, epsilon = 1e-12);
        assert_relative_eq!(oracle, 2.085, epsilon = 1e-3);
    }

    #[test]
    fn constant_and_sparse_series() {
        let fit = growth_doubling_time(&series(&[("2015Q1", 5.0), ("2015Q2", 5.0), ("2015Q3", 5.0)])).unwrap();
        assert_eq!(fit.doubling_years, None);
        assert!(matches!(
            growth_doubling_time(&series(&[("2015Q1", 5.0), ("2015Q2", 0.0)])),
            Err(AnalyticsError::TooFewPoints(1))
        ));
    }

    #[test]
    fn reports_are_order_independent() {
        let mut recs: Vec<_> = (0..20)
            .map(|i| {
                let q = ["2019Q1", "2019Q2", "2019Q4"][i % 3];
                rec(i, q, &[9, (i % 17 + 1) as u8], if i % 4 == 0 { &[3] } else { &[] }, social(i % 5 == 0))
            })
            .collect();
        for r in recs.iter_mut().filter(|r| r.is_motivated()) {
            r.aligned.sdgs.push(SdgId::new(3).unwrap());
        }
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let s1 = write_reports(&recs, a.path(), false).unwrap();
        recs.reverse();
        let s2 = write_reports(&recs, b.path(), false).unwrap();
        assert_eq!(s1, s2);
        for name in &s1.files {
            assert_eq!(
                std::fs::read(a.path().join(name)).unwrap(),
                std::fs::read(b.path().join(name)).unwrap(),
                "{name}"
            );
        }
        let fig3 = std::fs::read_to_string(a.path().join("fig3_counts.csv")).unwrap();
        assert!(fig3.contains("2019Q3,0,0"));
    }
}
