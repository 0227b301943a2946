//! Python bindings: parse and normalize responses, footprint arithmetic,
//! corpus analytics and stability rates.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use sdgmine::analytics;
use sdgmine::footprint::{self as fp, EnergyModel, EquivalenceFactors};
use sdgmine::provider::UsageTotals;
use sdgmine::respparse::{self, ClassificationRecord, MentionKind, Provenance};
use sdgmine::robustness;
use sdgmine::store;
use sdgmine::taxonomy::{self, SdgId, TargetId, TargetValidity};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

/// Converts through JSON so every serde type maps onto plain Python values.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn targets(groups: &[Vec<TargetId>]) -> Vec<Vec<String>> {
    groups.iter().map(|g| g.iter().map(ToString::to_string).collect()).collect()
}

fn numbers(sdgs: &[SdgId]) -> Vec<u32> {
    sdgs.iter().map(|s| u32::from(s.get())).collect()
}

/// SDG taxonomy with target descriptions and IFR use cases.
#[pyclass(name = "Taxonomy", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTaxonomy {
    inner: taxonomy::Taxonomy,
}

#[pymethods]
impl PyTaxonomy {
    /// Bundled UN SDG and IFR corpora.
    #[staticmethod]
    fn bundled() -> Self {
        PyTaxonomy {
            inner: taxonomy::bundled(),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (sdg_corpus, ifr_corpus=None))]
    fn load(sdg_corpus: PathBuf, ifr_corpus: Option<PathBuf>) -> PyResult<Self> {
        let base = taxonomy::load_sdg_corpus(&sdg_corpus).map_err(value_err)?;
        let inner = match ifr_corpus {
            Some(p) => taxonomy::load_ifr_corpus(&p, base).map_err(value_err)?,
            None => base,
        };
        Ok(PyTaxonomy { inner })
    }

    #[getter]
    fn digest(&self) -> String {
        self.inner.digest()
    }

    /// Target ids of one goal.
    fn targets(&self, sdg: u8) -> PyResult<Vec<String>> {
        let id = SdgId::new(sdg).map_err(value_err)?;
        let goal = self.inner.goal(id).ok_or_else(|| value_err(format!("unknown SDG {sdg}")))?;
        Ok(goal.targets.keys().map(ToString::to_string).collect())
    }

    /// `"valid"`, `"unknown_target"` or `"prefix_mismatch"`.
    fn validate_target(&self, sdg: u8, target: &str) -> PyResult<&'static str> {
        let sdg = SdgId::new(sdg).map_err(value_err)?;
        let target: TargetId = target.parse().map_err(value_err)?;
        Ok(match taxonomy::validate_target(sdg, target, &self.inner) {
            TargetValidity::Valid => "valid",
            TargetValidity::UnknownTarget => "unknown_target",
            TargetValidity::PrefixMismatch => "prefix_mismatch",
        })
    }

    fn system_prompt(&self) -> PyResult<String> {
        sdgmine::prompting::build_system_prompt(&self.inner).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.goals.len()
    }
}

/// One normalized classification.
#[pyclass(name = "Record", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRecord {
    inner: ClassificationRecord,
}

#[pymethods]
impl PyRecord {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyRecord {
            inner: serde_json::from_str(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    /// Canonical response text.
    fn serialize(&self) -> String {
        respparse::serialize_record(&self.inner)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    #[getter]
    fn arxiv_id(&self) -> &str {
        &self.inner.arxiv_id
    }

    #[getter]
    fn paper_type(&self) -> Vec<&'static str> {
        self.inner.paper_type.iter().map(|t| t.as_str()).collect()
    }

    #[getter]
    fn motivated_sdgs(&self) -> Vec<u32> {
        numbers(&self.inner.motivated.sdgs)
    }

    #[getter]
    fn motivated_targets(&self) -> Vec<Vec<String>> {
        targets(&self.inner.motivated.targets)
    }

    #[getter]
    fn aligned_sdgs(&self) -> Vec<u32> {
        numbers(&self.inner.aligned.sdgs)
    }

    #[getter]
    fn aligned_targets(&self) -> Vec<Vec<String>> {
        targets(&self.inner.aligned.targets)
    }

    #[getter]
    fn mentions(&self) -> BTreeMap<&'static str, bool> {
        MentionKind::ALL
            .iter()
            .map(|k| (k.as_str(), self.inner.mentions.get(*k)))
            .collect()
    }

    #[getter]
    fn ifr_sdgs(&self) -> Vec<u32> {
        numbers(&self.inner.ifr.sdgs)
    }

    #[getter]
    fn reasoning(&self) -> &str {
        &self.inner.reasoning
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Record(arxiv_id={:?}, motivated={:?}, aligned={:?})",
            self.inner.arxiv_id,
            self.motivated_sdgs(),
            self.aligned_sdgs()
        )
    }
}

fn records(items: &[PyRef<'_, PyRecord>]) -> Vec<ClassificationRecord> {
    items.iter().map(|r| r.inner.clone()).collect()
}

/// Parses a model response and normalizes it against the taxonomy.
/// `lenient=True` never raises and reports problems as warnings.
#[pyfunction]
#[pyo3(signature = (text, arxiv_id="", model_id="", taxonomy=None, lenient=false))]
fn parse_response(
    text: &str,
    arxiv_id: &str,
    model_id: &str,
    taxonomy: Option<PyRef<'_, PyTaxonomy>>,
    lenient: bool,
) -> PyResult<PyRecord> {
    let draft = if lenient {
        respparse::parse_response_lenient(text)
    } else {
        respparse::parse_response(text).map_err(value_err)?
    };
    let provenance = Provenance {
        arxiv_id: arxiv_id.to_string(),
        model_id: model_id.to_string(),
        ..Default::default()
    };
    let inner = match taxonomy {
        Some(t) => respparse::normalize_record(draft, &t.inner, provenance),
        None => respparse::normalize_record(draft, &taxonomy::bundled(), provenance),
    };
    Ok(PyRecord { inner })
}

#[pyfunction]
fn load_dataset(path: PathBuf) -> PyResult<Vec<PyRecord>> {
    let loaded = store::load_dataset(&path).map_err(io_err)?;
    Ok(loaded.records.into_iter().map(|inner| PyRecord { inner }).collect())
}

/// Energy, emissions and equivalents for `{model_id: calls}`.
#[pyfunction]
#[pyo3(signature = (calls, worst_case=Vec::new(), coeff_table=None))]
fn footprint<'py>(
    py: Python<'py>,
    calls: BTreeMap<String, u64>,
    worst_case: Vec<String>,
    coeff_table: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let table = match coeff_table {
        Some(p) => EnergyModel::load(&p).map_err(value_err)?,
        None => EnergyModel::default(),
    };
    let totals: BTreeMap<String, UsageTotals> = calls
        .into_iter()
        .map(|(k, n)| {
            (
                k,
                UsageTotals {
                    calls: n,
                    ..Default::default()
                },
            )
        })
        .collect();
    let report = fp::aggregate_footprint(&totals, &table.with_worst_case(&worst_case)).map_err(value_err)?;
    to_py(py, &report)
}

#[pyfunction]
fn equivalents<'py>(py: Python<'py>, co2e_kg: f64, energy_kwh: f64) -> PyResult<Bound<'py, PyAny>> {
    let e = fp::equivalents(co2e_kg, energy_kwh, &EquivalenceFactors::default()).map_err(value_err)?;
    to_py(py, &e)
}

#[derive(Serialize)]
struct Summary {
    distribution: analytics::SdgDistribution,
    impact: analytics::ImpactRatios,
    disparity: analytics::MotivationDisparity,
}

/// SDG distribution, impact ratios and motivation disparity.
#[pyfunction]
#[pyo3(signature = (records, include_un_sdgs=false))]
fn analyze<'py>(
    py: Python<'py>,
    records: Vec<PyRef<'py, PyRecord>>,
    include_un_sdgs: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let recs = self::records(&records);
    let distribution = analytics::sdg_distribution(&recs);
    let summary = Summary {
        disparity: analytics::motivation_disparity(&distribution),
        impact: analytics::impact_ratios_with(&recs, include_un_sdgs),
        distribution,
    };
    to_py(py, &summary)
}

/// Writes the CSV reports and returns the summary.
#[pyfunction]
#[pyo3(signature = (records, out_dir, include_un_sdgs=false))]
fn write_reports<'py>(
    py: Python<'py>,
    records: Vec<PyRef<'py, PyRecord>>,
    out_dir: PathBuf,
    include_un_sdgs: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let summary = analytics::write_reports(&self::records(&records), &out_dir, include_un_sdgs).map_err(io_err)?;
    to_py(py, &summary)
}

/// Papers per quarter as `[(quarter, total, value)]`; `selector` is
/// `count`, `motivated`, `any_impact` or a mention kind.
#[pyfunction]
#[pyo3(signature = (records, selector="count"))]
fn quarterly_series(records: Vec<PyRef<'_, PyRecord>>, selector: &str) -> PyResult<Vec<(String, usize, f64)>> {
    let sel = match selector {
        "count" => analytics::Selector::Count,
        "motivated" => analytics::Selector::Motivated,
        "any_impact" => analytics::Selector::AnyImpact { include_un_sdgs: false },
        other => analytics::Selector::Mention(
            MentionKind::ALL
                .into_iter()
                .find(|k| k.as_str() == other)
                .ok_or_else(|| value_err(format!("unknown selector {other:?}")))?,
        ),
    };
    let series = analytics::quarterly_series(&self::records(&records), sel).map_err(value_err)?;
    Ok(series
        .points
        .iter()
        .map(|p| (p.quarter.to_string(), p.total, p.value))
        .collect())
}

/// Per-label rates over repeated runs of one paper.
#[pyfunction]
fn stability_rates<'py>(py: Python<'py>, runs: Vec<PyRef<'py, PyRecord>>) -> PyResult<Bound<'py, PyAny>> {
    let report = robustness::stability_rates(&self::records(&runs)).map_err(value_err)?;
    to_py(py, &report)
}

#[pymodule]
fn sdgmine_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTaxonomy>()?;
    m.add_class::<PyRecord>()?;
    m.add_function(wrap_pyfunction!(parse_response, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(footprint, m)?)?;
    m.add_function(wrap_pyfunction!(equivalents, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(write_reports, m)?)?;
    m.add_function(wrap_pyfunction!(quarterly_series, m)?)?;
    m.add_function(wrap_pyfunction!(stability_rates, m)?)?;
    Ok(())
}
