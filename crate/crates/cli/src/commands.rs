use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use chrono::Utc;
use serde::Serialize;
use serde_json::{json, Value};
use tracing::{info, warn};

use sdgmine::analytics::write_reports;
use sdgmine::footprint::{aggregate_footprint, EnergyModel};
use sdgmine::harvest::{
    extract_text, file_stem, month_from_arxiv_id, skip_list, ArxivClient, ExtractionStatus, HarvestConfig,
    HarvestError, PaperMeta, PaperText,
};
use sdgmine::pipeline::{make_job, ClassifySink, MalformedPolicy, RunContext};
use sdgmine::prompting::{build_system_prompt, prompt_digest, PromptBundle};
use sdgmine::provider::{run_batch, BatchSummary, UsageLedger, UsageTotals};
use sdgmine::respparse::{
    normalize_record, parse_response_lenient, parse_response_with, serialize_record, ClassificationRecord,
    ParseMode, Provenance,
};
use sdgmine::robustness::{ensemble_compare_paths, run_consistency};
use sdgmine::store::{import_records, load_dataset, Dataset, ImportMapping};
use sdgmine::taxonomy::Taxonomy;

use crate::args::*;
use crate::config::{FileConfig, ResolvedProvider};
use crate::error::Failure;
use crate::manifest::RunManifest;

pub const METADATA_FILE: &str = "metadata.jsonl";
pub const DEFAULT_CATEGORY: &str = "cs.RO";

pub struct Ctx {
    pub out: PathBuf,
    pub file: FileConfig,
    pub run_id: String,
}

type Outcome = Result<Value, Failure>;

fn io_ctx(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::storage(anyhow::Error::new(e).context(format!("{}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let bytes = serde_json::to_vec_pretty(value).map_err(Failure::internal)?;
    std::fs::write(path, bytes).map_err(io_ctx(path))
}

/// Dataset path -> `<stem>.usage.jsonl` next to it.
pub fn ledger_sidecar(dataset: &Path) -> PathBuf {
    dataset.with_extension("usage.jsonl")
}

fn cache_dir(ctx: &Ctx, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| ctx.file.cache_dir.clone())
        .unwrap_or_else(|| ctx.out.join("cache"))
}

// ---------------------------------------------------------------- harvest

fn read_metadata(dir: &Path) -> Result<Vec<PaperMeta>, Failure> {
    let path = dir.join(METADATA_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let f = std::fs::File::open(&path).map_err(io_ctx(&path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_ctx(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(m) => out.push(m),
            Err(e) => warn!(path = %path.display(), line = i + 1, "skipping metadata line: {e}"),
        }
    }
    Ok(out)
}

fn write_metadata(dir: &Path, metas: &[PaperMeta]) -> Result<(), Failure> {
    let path = dir.join(METADATA_FILE);
    let tmp = dir.join(format!("{METADATA_FILE}.part"));
    let mut buf = Vec::new();
    for m in metas {
        serde_json::to_writer(&mut buf, m).map_err(Failure::internal)?;
        buf.push(b'\n');
    }
    std::fs::write(&tmp, buf).map_err(io_ctx(&tmp))?;
    std::fs::rename(&tmp, &path).map_err(io_ctx(&path))
}

pub async fn harvest(ctx: &Ctx, a: &HarvestArgs, m: &mut RunManifest) -> Outcome {
    let category = a
        .category
        .clone()
        .or_else(|| ctx.file.category.clone())
        .unwrap_or_else(|| DEFAULT_CATEGORY.into());
    let cache = cache_dir(ctx, &a.cache_dir);
    let h = &ctx.file.harvest;
    let mut cfg = HarvestConfig::default();
    if let Some(base) = a.arxiv_base.as_ref().or(h.arxiv_base.as_ref()) {
        let base = base.trim_end_matches('/').to_string();
        cfg.listing_base = base.clone();
        cfg.pdf_base = base;
    }
    if let Some(ms) = a.page_delay_ms.or(h.page_delay_ms) {
        cfg.page_delay = Duration::from_millis(ms);
    }
    if let Some(ms) = a.fetch_delay_ms.or(h.fetch_delay_ms) {
        cfg.fetch_delay = Duration::from_millis(ms);
    }
    let page_size = a.page_size.or(h.page_size).unwrap_or(200);
    m.config = json!({
        "category": category,
        "from": a.from,
        "to": a.to,
        "cache_dir": cache,
        "listing_base": cfg.listing_base,
        "pdf_base": cfg.pdf_base,
        "page_size": page_size,
        "page_delay_ms": cfg.page_delay.as_millis() as u64,
        "fetch_delay_ms": cfg.fetch_delay.as_millis() as u64,
        "limit": a.limit,
        "download": !a.no_download,
    });
    std::fs::create_dir_all(&cache).map_err(io_ctx(&cache))?;

    let client = ArxivClient::new(cfg).map_err(Failure::harvest)?;
    let mut metas = client
        .query_metadata(&category, a.from, a.to, page_size)
        .await
        .map_err(Failure::harvest)?;
    if let Some(limit) = a.limit {
        metas.truncate(limit);
    }
    info!(papers = metas.len(), "listing complete");

    let mut known: BTreeMap<String, PaperMeta> =
        read_metadata(&cache)?.into_iter().map(|m| (m.arxiv_id.clone(), m)).collect();
    for meta in &metas {
        known.insert(meta.arxiv_id.clone(), meta.clone());
    }
    let mut all: Vec<PaperMeta> = known.into_values().collect();
    all.sort_by(|a, b| (a.published, &a.arxiv_id).cmp(&(b.published, &b.arxiv_id)));
    write_metadata(&cache, &all)?;

    let (mut unavailable, mut network_failed, mut skipped) = (0usize, 0usize, 0usize);
    let mut status: BTreeMap<&str, usize> = BTreeMap::new();
    if !a.no_download {
        let skip = skip_list(&cache);
        for meta in &metas {
            if skip.contains(&meta.arxiv_id) {
                skipped += 1;
                continue;
            }
            let pdf = match client.fetch_pdf(meta, &cache).await {
                Ok(p) => p,
                Err(HarvestError::Unavailable { .. } | HarvestError::EmptyDownload(_)) => {
                    unavailable += 1;
                    continue;
                }
                Err(e @ HarvestError::Io(_)) => return Err(Failure::harvest(e)),
                Err(e) => {
                    warn!(id = %meta.arxiv_id, "download failed: {e}");
                    network_failed += 1;
                    continue;
                }
            };
            let txt = pdf.with_extension("txt");
            if txt.exists() {
                *status.entry("cached").or_default() += 1;
                continue;
            }
            let text = extract_text(&pdf);
            let label = match text.extraction_status {
                ExtractionStatus::Ok => "ok",
                ExtractionStatus::Partial => "partial",
                ExtractionStatus::Failed => "failed",
            };
            *status.entry(label).or_default() += 1;
            if text.extraction_status != ExtractionStatus::Failed {
                std::fs::write(&txt, text.text).map_err(io_ctx(&txt))?;
            }
        }
        if network_failed > 0 && network_failed == metas.len() {
            return Err(Failure::network(anyhow!("every download failed")));
        }
    }
    Ok(json!({
        "papers": metas.len(),
        "metadata_file": cache.join(METADATA_FILE),
        "downloads": client.download_count(),
        "unavailable": unavailable,
        "network_failures": network_failed,
        "skip_listed": skipped,
        "extraction": status,
    }))
}

// ---------------------------------------------------------------- corpus

pub struct Paper {
    pub meta: PaperMeta,
    /// Whether `meta.published` is known rather than a placeholder.
    pub dated: bool,
    pub text: PaperText,
}

fn first_line(text: &str) -> String {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or_default();
    line.chars().take(300).collect()
}

/// Papers under `dir`: entries of `metadata.jsonl` plus any stray
/// `<id>.txt`, sorted by publication date.
pub fn load_corpus(dir: &Path, filter: &FilterArgs) -> Result<(Vec<Paper>, Vec<String>), Failure> {
    if !dir.is_dir() {
        return Err(Failure::input(anyhow!("input directory {} not found", dir.display())));
    }
    let metas = read_metadata(dir)?;
    let mut seen = HashSet::new();
    let mut papers = Vec::new();
    let mut missing = Vec::new();
    for meta in metas {
        if !seen.insert(meta.arxiv_id.clone()) {
            continue;
        }
        let text = extract_text(&dir.join(format!("{}.pdf", file_stem(&meta.arxiv_id))));
        if text.extraction_status == ExtractionStatus::Failed {
            missing.push(meta.arxiv_id.clone());
            continue;
        }
        papers.push(Paper {
            meta,
            dated: true,
            text,
        });
    }
    let mut stray: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_ctx(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    stray.sort();
    for path in stray {
        let text = extract_text(&path.with_extension("pdf"));
        if seen.contains(&text.arxiv_id) {
            continue;
        }
        if text.extraction_status == ExtractionStatus::Failed {
            missing.push(text.arxiv_id.clone());
            continue;
        }
        seen.insert(text.arxiv_id.clone());
        let date = month_from_arxiv_id(&text.arxiv_id);
        let meta = PaperMeta::new(
            text.arxiv_id.clone(),
            first_line(&text.text),
            String::new(),
            date.unwrap_or_else(|| Utc::now().date_naive()),
        );
        papers.push(Paper {
            meta,
            dated: date.is_some(),
            text,
        });
    }
    papers.sort_by(|a, b| (a.meta.published, &a.meta.arxiv_id).cmp(&(b.meta.published, &b.meta.arxiv_id)));
    papers.retain(|p| {
        filter.from.is_none_or(|f| p.meta.published >= f) && filter.to.is_none_or(|t| p.meta.published <= t)
    });
    if let Some(n) = filter.limit {
        papers.truncate(n);
    }
    Ok((papers, missing))
}

fn filter_records(records: Vec<ClassificationRecord>, f: &FilterArgs) -> Vec<ClassificationRecord> {
    let mut kept: Vec<ClassificationRecord> = records
        .into_iter()
        .filter(|r| match r.published {
            Some(d) => f.from.is_none_or(|x| d >= x) && f.to.is_none_or(|x| d <= x),
            None => f.from.is_none() && f.to.is_none(),
        })
        .collect();
    if let Some(n) = f.limit {
        kept.sort_by(|a, b| (a.published, &a.arxiv_id).cmp(&(b.published, &b.arxiv_id)));
        kept.truncate(n);
    }
    kept
}

// ---------------------------------------------------------------- classify

struct Prepared {
    taxonomy: Taxonomy,
    system: String,
    digest: String,
}

fn prepare(rp: &ResolvedProvider, m: &mut RunManifest) -> Result<Prepared, Failure> {
    let taxonomy = rp.taxonomy()?;
    let system = build_system_prompt(&taxonomy).map_err(Failure::input)?;
    let digest = prompt_digest(&system);
    m.taxonomy_digest = Some(taxonomy.digest());
    m.prompt_digest = Some(digest.clone());
    Ok(Prepared {
        taxonomy,
        system,
        digest,
    })
}

#[derive(Debug, Serialize)]
struct ClassifyOutcome {
    dataset: PathBuf,
    papers: usize,
    already_present: usize,
    queued: usize,
    unusable_prompt: usize,
    missing_text: Vec<String>,
    batch: BatchSummary,
    record_count: usize,
    load_diagnostics: usize,
}

async fn classify_into(
    rp: &ResolvedProvider,
    prep: &Prepared,
    papers: &[Paper],
    missing_text: Vec<String>,
    dataset_path: &Path,
    run_id: &str,
    failure_list: &Path,
) -> Result<ClassifyOutcome, Failure> {
    if let Some(parent) = dataset_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_ctx(parent))?;
    }
    let (mut dataset, diags) = Dataset::open(dataset_path).map_err(Failure::storage)?;
    for d in &diags {
        warn!(line = d.line, "{}", d.message);
    }
    let ledger = Arc::new(UsageLedger::open(ledger_sidecar(dataset_path)).map_err(Failure::storage)?);
    let client = rp.client(Some(ledger))?;

    let mut jobs = Vec::new();
    let (mut present, mut unusable) = (0, 0);
    for p in papers {
        if dataset.contains(&p.meta.arxiv_id) {
            present += 1;
            continue;
        }
        match make_job(&prep.system, &p.meta, &p.text.text, rp.max_input_tokens) {
            Ok(job) => jobs.push(job),
            Err(e) => {
                warn!(id = %p.meta.arxiv_id, "cannot build prompt: {e}");
                unusable += 1;
            }
        }
    }
    let queued = jobs.len();
    let context = RunContext {
        model_id: rp.config.model_id.clone(),
        prompt_digest: prep.digest.clone(),
        run_id: run_id.to_string(),
        decoding: Some(rp.config.decoding.clone()),
    };
    let metas = papers.iter().filter(|p| p.dated).map(|p| p.meta.clone());
    let batch = {
        let mut sink = ClassifySink::new(&mut dataset, &prep.taxonomy, metas, context, rp.malformed_policy);
        run_batch(client, jobs, &mut sink, Some(failure_list))
            .await
            .map_err(Failure::batch)?
    };
    dataset.sync().map_err(Failure::storage)?;
    Ok(ClassifyOutcome {
        dataset: dataset_path.to_path_buf(),
        papers: papers.len(),
        already_present: present,
        queued,
        unusable_prompt: unusable,
        missing_text,
        batch,
        record_count: dataset.record_count(),
        load_diagnostics: diags.len(),
    })
}

pub async fn classify(ctx: &Ctx, a: &ClassifyArgs, m: &mut RunManifest) -> Outcome {
    let rp = ResolvedProvider::resolve(&ctx.file, &a.provider)?;
    let input = a.input.clone().unwrap_or_else(|| cache_dir(ctx, &a.cache_dir));
    m.config = json!({ "provider": rp, "input": input, "dataset": a.dataset,
        "filter": { "from": a.filter.from, "to": a.filter.to, "limit": a.filter.limit } });
    let prep = prepare(&rp, m)?;
    let (papers, missing) = load_corpus(&input, &a.filter)?;
    std::fs::create_dir_all(&ctx.out).map_err(io_ctx(&ctx.out))?;
    let outcome = classify_into(
        &rp,
        &prep,
        &papers,
        missing,
        &a.dataset,
        &ctx.run_id,
        &ctx.out.join("failures.jsonl"),
    )
    .await?;
    eprintln!(
        "classified {} papers: {} completed, {} failed, {} already present",
        outcome.papers, outcome.batch.completed, outcome.batch.failed, outcome.already_present
    );
    serde_json::to_value(outcome).map_err(Failure::internal)
}

// ---------------------------------------------------------------- assess

pub async fn assess(ctx: &Ctx, a: &AssessArgs, m: &mut RunManifest) -> Outcome {
    let rp = ResolvedProvider::resolve(&ctx.file, &a.provider)?;
    m.config = json!({ "provider": rp, "file": a.file });
    let prep = prepare(&rp, m)?;
    let text = std::fs::read_to_string(&a.file)
        .with_context(|| format!("reading {}", a.file.display()))
        .map_err(Failure::input)?;
    let id = a.id.clone().unwrap_or_else(|| {
        a.file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let title = a.title.clone().unwrap_or_else(|| first_line(&text));
    let bundle =
        PromptBundle::assemble(prep.system.clone(), &title, &text, rp.max_input_tokens).map_err(Failure::input)?;
    std::fs::create_dir_all(&ctx.out).map_err(io_ctx(&ctx.out))?;
    let ledger = Arc::new(UsageLedger::open(ctx.out.join("usage.jsonl")).map_err(Failure::storage)?);
    let client = rp.client(Some(ledger))?;
    let resp = client
        .submit_one(Some(&id), &bundle.system_text, &bundle.user_text)
        .await
        .map_err(Failure::provider)?;
    let draft = match rp.malformed_policy {
        MalformedPolicy::Recover => parse_response_lenient(&resp.raw_text),
        _ => parse_response_with(&resp.raw_text, ParseMode::Strict).map_err(Failure::provider)?,
    };
    let record = normalize_record(
        draft,
        &prep.taxonomy,
        Provenance {
            arxiv_id: id.clone(),
            published: month_from_arxiv_id(&id),
            quarter: month_from_arxiv_id(&id).map(sdgmine::harvest::quarter_of),
            model_id: rp.config.model_id.clone(),
            prompt_digest: prep.digest.clone(),
            run_id: ctx.run_id.clone(),
            run_index: None,
            decoding: Some(rp.config.decoding.clone()),
        },
    );
    let canonical = serialize_record(&record);
    std::fs::write(ctx.out.join("assessment.txt"), &canonical).map_err(io_ctx(&ctx.out))?;
    write_json(&ctx.out.join("assessment.json"), &record)?;
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(canonical.as_bytes());
    if !canonical.ends_with('\n') {
        let _ = stdout.write_all(b"\n");
    }
    Ok(json!({
        "paper_id": id,
        "attempts": resp.attempt_count,
        "truncated": bundle.truncated,
        "warnings": record.warnings,
        "motivated": record.is_motivated(),
    }))
}

// ---------------------------------------------------------------- analyze

pub fn analyze(ctx: &Ctx, a: &AnalyzeArgs, m: &mut RunManifest) -> Outcome {
    m.config = json!({ "dataset": a.dataset, "include_un_sdgs": a.include_un_sdgs, "mapping": a.mapping,
        "filter": { "from": a.filter.from, "to": a.filter.to, "limit": a.filter.limit } });
    if !a.dataset.is_file() {
        return Err(Failure::input(anyhow!("dataset {} not found", a.dataset.display())));
    }
    let (records, diagnostics) = match &a.mapping {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(Failure::input)?;
            let mapping: ImportMapping = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .map_err(Failure::input)?;
            import_records(&a.dataset, &mapping).map_err(Failure::input)?
        }
        None => {
            let loaded = load_dataset(&a.dataset).map_err(Failure::storage)?;
            (loaded.records, loaded.diagnostics)
        }
    };
    let records = filter_records(records, &a.filter);
    let summary = write_reports(&records, &ctx.out, a.include_un_sdgs).map_err(Failure::input)?;
    Ok(json!({
        "records": records.len(),
        "skipped_lines": diagnostics.len(),
        "summary": summary,
    }))
}

// ---------------------------------------------------------------- footprint

fn parse_calls(items: &[String]) -> Result<BTreeMap<String, UsageTotals>, Failure> {
    let mut out: BTreeMap<String, UsageTotals> = BTreeMap::new();
    for item in items {
        let (model, n) = item
            .rsplit_once('=')
            .ok_or_else(|| Failure::usage(anyhow!("--calls expects model=n, got {item:?}")))?;
        let n: u64 = n
            .trim()
            .parse()
            .map_err(|_| Failure::usage(anyhow!("--calls: {n:?} is not a count")))?;
        out.entry(model.trim().to_string()).or_default().calls += n;
    }
    Ok(out)
}

pub fn footprint(ctx: &Ctx, a: &FootprintArgs, m: &mut RunManifest) -> Outcome {
    let mut model = match &a.coeff_table {
        Some(p) => EnergyModel::load(p).map_err(Failure::input)?,
        None => EnergyModel::default(),
    };
    model = model.with_worst_case(&a.worst_case);
    let (mut totals, source) = if !a.calls.is_empty() {
        (parse_calls(&a.calls)?, Value::String("calls".into()))
    } else {
        let path = match (&a.ledger, &a.dataset) {
            (Some(l), _) => l.clone(),
            (None, Some(d)) => ledger_sidecar(d),
            (None, None) => return Err(Failure::usage(anyhow!("give --ledger, --dataset or --calls"))),
        };
        if !path.is_file() {
            return Err(Failure::input(anyhow!("usage ledger {} not found", path.display())));
        }
        let ledger = UsageLedger::open(&path).map_err(Failure::storage)?;
        (ledger.totals(), json!(path))
    };
    if let Some(target) = &a.as_model {
        if model.lookup(target).is_none() {
            return Err(Failure::usage(anyhow!("--as-model {target} is not in the coefficient table")));
        }
        let mut remapped: BTreeMap<String, UsageTotals> = BTreeMap::new();
        for (id, t) in totals {
            let key = if model.lookup(&id).is_some() { id } else { target.clone() };
            let e = remapped.entry(key).or_default();
            e.calls += t.calls;
            e.input_tokens += t.input_tokens;
            e.output_tokens += t.output_tokens;
        }
        totals = remapped;
    }
    m.config = json!({ "source": source, "coefficients": model, "as_model": a.as_model });
    let report = aggregate_footprint(&totals, &model).map_err(Failure::input)?;
    std::fs::create_dir_all(&ctx.out).map_err(io_ctx(&ctx.out))?;
    write_json(&ctx.out.join("footprint.json"), &report)?;
    let text = report.to_text();
    std::fs::write(ctx.out.join("footprint.txt"), &text).map_err(io_ctx(&ctx.out))?;
    print!("{text}");
    Ok(json!({
        "calls": report.calls,
        "energy_kwh": report.total_energy_kwh,
        "co2e_kg": report.total_co2e_kg,
        "tokens": totals.values().map(|t| t.total_tokens()).sum::<u64>(),
    }))
}

// ---------------------------------------------------------------- consistency

pub async fn consistency(ctx: &Ctx, a: &ConsistencyArgs, m: &mut RunManifest) -> Outcome {
    let rp = ResolvedProvider::resolve(&ctx.file, &a.provider)?;
    m.config = json!({ "provider": rp, "runs": a.runs, "file": a.file, "id": a.id, "input": a.input });
    if a.runs == 0 {
        return Err(Failure::usage(anyhow!("--runs must be at least 1")));
    }
    let prep = prepare(&rp, m)?;
    let (meta, text) = match (&a.file, &a.input, &a.id) {
        (Some(file), _, id) => {
            let text = std::fs::read_to_string(file)
                .with_context(|| format!("reading {}", file.display()))
                .map_err(Failure::input)?;
            let id = id.clone().unwrap_or_else(|| {
                file.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            let published = month_from_arxiv_id(&id).unwrap_or_else(|| Utc::now().date_naive());
            let title = a.title.clone().unwrap_or_else(|| first_line(&text));
            let paper = PaperText::from_text(&id, text, sdgmine::harvest::TextSource::PreextractedFile, false);
            (PaperMeta::new(id, title, String::new(), published), paper)
        }
        (None, Some(dir), Some(id)) => {
            let (papers, _) = load_corpus(dir, &FilterArgs::default())?;
            let p = papers
                .into_iter()
                .find(|p| &p.meta.arxiv_id == id)
                .ok_or_else(|| Failure::input(anyhow!("{id} has no text under {}", dir.display())))?;
            (p.meta, p.text)
        }
        _ => return Err(Failure::usage(anyhow!("give --file, or --in together with --id"))),
    };
    if text.extraction_status == ExtractionStatus::Failed {
        return Err(Failure::input(anyhow!("paper text is empty")));
    }
    std::fs::create_dir_all(&ctx.out).map_err(io_ctx(&ctx.out))?;
    let ledger = Arc::new(UsageLedger::open(ctx.out.join("usage.jsonl")).map_err(Failure::storage)?);
    let client = rp.client(Some(ledger))?;
    let report = run_consistency(
        client,
        &prep.taxonomy,
        &prep.system,
        &meta,
        &text,
        a.runs,
        rp.max_input_tokens,
        &ctx.out,
        &ctx.run_id,
    )
    .await
    .map_err(|e| match e {
        sdgmine::robustness::RobustnessError::Empty => Failure::provider(anyhow!("every run failed")),
        sdgmine::robustness::RobustnessError::Io { .. } | sdgmine::robustness::RobustnessError::Store(_) => {
            Failure::storage(e)
        }
        other => Failure::input(other),
    })?;
    write_json(&ctx.out.join("stability.json"), &report)?;
    let csv_path = ctx.out.join("stability.csv");
    std::fs::write(&csv_path, report.to_csv()).map_err(io_ctx(&csv_path))?;
    Ok(json!({
        "paper_id": report.paper_id,
        "runs": report.run_count,
        "failed_runs": report.failed_runs,
        "runs_file": sdgmine::robustness::runs_path(&ctx.out, &meta.arxiv_id),
    }))
}

// ---------------------------------------------------------------- benchmark

fn safe_name(model: &str) -> String {
    model
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

pub async fn benchmark(ctx: &Ctx, a: &BenchmarkArgs, m: &mut RunManifest) -> Outcome {
    std::fs::create_dir_all(&ctx.out).map_err(io_ctx(&ctx.out))?;
    let mut runs = Vec::new();
    let paths: Vec<PathBuf> = if !a.datasets.is_empty() {
        m.config = json!({ "datasets": a.datasets });
        a.datasets.clone()
    } else {
        if a.models.len() < 2 {
            return Err(Failure::usage(anyhow!("give --datasets, or two or more --models with --in")));
        }
        let input = a
            .input
            .clone()
            .ok_or_else(|| Failure::usage(anyhow!("--models needs --in")))?;
        let base = ResolvedProvider::resolve(&ctx.file, &a.provider)?;
        m.config = json!({ "provider": base, "models": a.models, "input": input,
            "filter": { "from": a.filter.from, "to": a.filter.to, "limit": a.filter.limit } });
        let (papers, missing) = load_corpus(&input, &a.filter)?;
        let mut paths = Vec::new();
        for (i, model) in a.models.iter().enumerate() {
            let rp = base.with_model(model, i);
            let prep = prepare(&rp, m)?;
            let path = ctx.out.join(format!("{}.jsonl", safe_name(model)));
            let failures = ctx.out.join(format!("{}.failures.jsonl", safe_name(model)));
            let outcome =
                classify_into(&rp, &prep, &papers, missing.clone(), &path, &ctx.run_id, &failures).await?;
            runs.push(serde_json::to_value(outcome).map_err(Failure::internal)?);
            paths.push(path);
        }
        paths
    };
    let report = ensemble_compare_paths(&paths).map_err(Failure::input)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    write_json(&ctx.out.join("ensemble.json"), &report)?;
    let csv_path = ctx.out.join("ensemble.csv");
    std::fs::write(&csv_path, report.to_csv()).map_err(io_ctx(&csv_path))?;
    let ratios: BTreeMap<&str, f64> = report
        .models
        .iter()
        .map(|s| (s.label.as_str(), s.motivated_overall_ratio))
        .collect();
    Ok(json!({
        "papers": report.paper_ids.len(),
        "motivated_overall": ratios,
        "warnings": report.warnings,
        "runs": runs,
    }))
}
