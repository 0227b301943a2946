use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use chrono::NaiveDate;
use quick_xml::events::Event;
use quick_xml::Reader;
use tokio::sync::Mutex;
use tokio::time::Instant;
use tracing::{debug, warn};
use url::Url;

use super::{canonical_arxiv_id, file_stem, HarvestError, PaperMeta};
use crate::retry::{backoff_delay, is_retryable_status};

#[derive(Debug, Clone)]
pub struct HarvestConfig {
    /// Listing API root, e.g. `http://export.arxiv.org`.
    pub listing_base: String,
    /// PDF host root; PDFs are fetched from `<pdf_base>/pdf/<id>`.
    pub pdf_base: String,
    pub page_delay: Duration,
    pub fetch_delay: Duration,
    pub max_attempts: u32,
    pub backoff_base: Duration,
    pub timeout: Duration,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig {
            listing_base: "http://export.arxiv.org".into(),
            pdf_base: "https://arxiv.org".into(),
            page_delay: Duration::from_secs(3),
            fetch_delay: Duration::from_secs(1),
            max_attempts: 4,
            backoff_base: Duration::from_secs(2),
            timeout: Duration::from_secs(60),
        }
    }
}

impl HarvestConfig {
    /// Both endpoints on one host, no delays. Used against mock servers.
    pub fn for_base(base: &str) -> Self {
        HarvestConfig {
            listing_base: base.trim_end_matches('/').to_string(),
            pdf_base: base.trim_end_matches('/').to_string(),
            page_delay: Duration::ZERO,
            fetch_delay: Duration::ZERO,
            backoff_base: Duration::from_millis(10),
            ..Default::default()
        }
    }
}

/// One page of the Atom listing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListingPage {
    pub total_results: Option<usize>,
    pub entries: Vec<PaperMeta>,
}

pub struct ArxivClient {
    http: reqwest::Client,
    config: HarvestConfig,
    last_fetch: Mutex<Option<Instant>>,
    downloads: AtomicUsize,
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.get(..10)?, "%Y-%m-%d").ok()
}

#[derive(Default)]
struct EntryDraft {
    id: Option<String>,
    title: String,
    published: Option<String>,
    primary_category: Option<String>,
}

/// Parses an arXiv Atom response.
pub fn parse_atom_feed(xml: &str) -> Result<ListingPage, HarvestError> {
    let malformed = |m: String| HarvestError::MalformedListing(m);
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);

    let mut total_results = None;
    let mut entries = Vec::new();
    let mut entry: Option<EntryDraft> = None;
    let mut current_tag: Vec<u8> = Vec::new();
    let mut saw_feed = false;

    loop {
        let event = reader
            .read_event()
            .map_err(|e| malformed(format!("xml error at {}: {e}", reader.buffer_position())))?;
        match event {
            Event::Start(e) => {
                let name = e.name().as_ref().to_vec();
                if name == b"feed" {
                    saw_feed = true;
                }
                if name == b"entry" {
                    entry = Some(EntryDraft::default());
                }
                current_tag = name;
            }
            Event::Empty(e) => {
                if e.name().as_ref() == b"arxiv:primary_category" {
                    if let Some(draft) = entry.as_mut() {
                        for attr in e.attributes().flatten() {
                            if attr.key.as_ref() == b"term" {
                                let v = attr
                                    .unescape_value()
                                    .map_err(|e| malformed(e.to_string()))?;
                                draft.primary_category = Some(v.into_owned());
                            }
                        }
                    }
                }
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| malformed(e.to_string()))?;
                match (entry.as_mut(), current_tag.as_slice()) {
                    (None, b"opensearch:totalResults") => {
                        total_results = Some(
                            text.trim()
                                .parse()
                                .map_err(|_| malformed(format!("bad totalResults {text:?}")))?,
                        );
                    }
                    (Some(d), b"id") => d.id = Some(text.trim().to_string()),
                    (Some(d), b"title") => {
                        if !d.title.is_empty() {
                            d.title.push(' ');
                        }
                        d.title.push_str(text.trim());
                    }
                    (Some(d), b"published") => d.published = Some(text.trim().to_string()),
                    _ => {}
                }
            }
            Event::End(e) => {
                if e.name().as_ref() == b"entry" {
                    let d = entry.take().expect("entry open");
                    let raw_id = d.id.ok_or_else(|| malformed("entry without <id>".into()))?;
                    if raw_id.contains("/api/errors") {
                        return Err(malformed(format!("listing service error: {}", d.title)));
                    }
                    let published = d
                        .published
                        .as_deref()
                        .and_then(parse_date)
                        .ok_or_else(|| malformed(format!("entry {raw_id} without valid <published>")))?;
                    entries.push(PaperMeta::new(
                        canonical_arxiv_id(&raw_id),
                        d.title.split_whitespace().collect::<Vec<_>>().join(" "),
                        d.primary_category.unwrap_or_default(),
                        published,
                    ));
                }
                current_tag.clear();
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !saw_feed {
        return Err(malformed("no <feed> element".into()));
    }
    Ok(ListingPage {
        total_results,
        entries,
    })
}

impl ArxivClient {
    pub fn new(config: HarvestConfig) -> Result<Self, HarvestError> {
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .user_agent(concat!("sdgmine/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| HarvestError::Network {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(ArxivClient {
            http,
            config,
            last_fetch: Mutex::new(None),
            downloads: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &HarvestConfig {
        &self.config
    }

    /// Number of PDF downloads performed so far (cache hits excluded).
    pub fn download_count(&self) -> usize {
        self.downloads.load(Ordering::Relaxed)
    }

    fn listing_url(
        &self,
        category: &str,
        from: NaiveDate,
        to: NaiveDate,
        start: usize,
        page_size: usize,
    ) -> Result<Url, HarvestError> {
        let mut url = Url::parse(&format!("{}/api/query", self.config.listing_base))
            .map_err(|e| HarvestError::InvalidQuery(e.to_string()))?;
        let query = format!(
            "cat:{category} AND submittedDate:[{}0000 TO {}2359]",
            from.format("%Y%m%d"),
            to.format("%Y%m%d")
        );
        url.query_pairs_mut()
            .append_pair("search_query", &query)
            .append_pair("start", &start.to_string())
            .append_pair("max_results", &page_size.to_string())
            .append_pair("sortBy", "submittedDate")
            .append_pair("sortOrder", "ascending");
        Ok(url)
    }

    /// GET with retries on transient failures. Non-retryable statuses are
    /// returned to the caller as `Ok((status, body))`.
    async fn get_with_retry(&self, url: &str) -> Result<(u16, Vec<u8>), HarvestError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            let outcome = match self.http.get(url).send().await {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    match resp.bytes().await {
                        Ok(body) if !is_retryable_status(status) => return Ok((status, body.to_vec())),
                        Ok(_) => format!("HTTP {status}"),
                        Err(e) => e.to_string(),
                    }
                }
                Err(e) => e.to_string(),
            };
            if attempt >= self.config.max_attempts {
                return Err(HarvestError::Network {
                    attempts: attempt,
                    message: outcome,
                });
            }
            let delay = backoff_delay(self.config.backoff_base, attempt);
            warn!(url, attempt, %outcome, ?delay, "transient failure; retrying");
            tokio::time::sleep(delay).await;
        }
    }

    pub async fn fetch_listing_page(
        &self,
        category: &str,
        from: NaiveDate,
        to: NaiveDate,
        start: usize,
        page_size: usize,
    ) -> Result<ListingPage, HarvestError> {
        let url = self.listing_url(category, from, to, start, page_size)?;
        debug!(%url, "listing page");
        let (status, body) = self.get_with_retry(url.as_str()).await?;
        if status != 200 {
            return Err(HarvestError::MalformedListing(format!("HTTP {status}")));
        }
        let xml = std::str::from_utf8(&body)
            .map_err(|e| HarvestError::MalformedListing(e.to_string()))?;
        parse_atom_feed(xml)
    }

    /// Every record in the window, deduplicated by id, in listing order.
    pub async fn query_metadata(
        &self,
        category: &str,
        from: NaiveDate,
        to: NaiveDate,
        page_size: usize,
    ) -> Result<Vec<PaperMeta>, HarvestError> {
        if from > to {
            return Err(HarvestError::InvalidQuery(format!("{from} is after {to}")));
        }
        if !(1..=2000).contains(&page_size) {
            return Err(HarvestError::InvalidQuery(format!(
                "page size {page_size} outside [1, 2000]"
            )));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut start = 0;
        loop {
            if start > 0 && !self.config.page_delay.is_zero() {
                tokio::time::sleep(self.config.page_delay).await;
            }
            let page = self
                .fetch_listing_page(category, from, to, start, page_size)
                .await?;
            let n = page.entries.len();
            for meta in page.entries {
                if seen.insert(meta.arxiv_id.clone()) {
                    out.push(meta);
                } else {
                    debug!(id = %meta.arxiv_id, "duplicate listing entry dropped");
                }
            }
            start += n;
            let exhausted = match page.total_results {
                Some(total) => start >= total,
                None => n < page_size,
            };
            if n == 0 || exhausted {
                break;
            }
        }
        Ok(out)
    }

    async fn polite_wait(&self) {
        let mut last = self.last_fetch.lock().await;
        if let Some(prev) = *last {
            let ready = prev + self.config.fetch_delay;
            if Instant::now() < ready {
                tokio::time::sleep_until(ready).await;
            }
        }
        *last = Some(Instant::now());
    }

    /// Downloads `<cache_dir>/<id>.pdf` unless it is already cached.
    pub async fn fetch_pdf(&self, meta: &PaperMeta, cache_dir: &Path) -> Result<PathBuf, HarvestError> {
        let stem = file_stem(&meta.arxiv_id);
        let target = cache_dir.join(format!("{stem}.pdf"));
        if std::fs::metadata(&target).is_ok_and(|m| m.len() > 0) {
            return Ok(target);
        }
        std::fs::create_dir_all(cache_dir)?;
        self.polite_wait().await;
        let url = format!("{}/pdf/{}", self.config.pdf_base, meta.arxiv_id);
        let (status, body) = self.get_with_retry(&url).await?;
        if status != 200 {
            record_skip(cache_dir, &meta.arxiv_id)?;
            return Err(HarvestError::Unavailable {
                id: meta.arxiv_id.clone(),
                status,
            });
        }
        if body.is_empty() {
            record_skip(cache_dir, &meta.arxiv_id)?;
            return Err(HarvestError::EmptyDownload(meta.arxiv_id.clone()));
        }
        let tmp = cache_dir.join(format!("{stem}.pdf.part"));
        std::fs::write(&tmp, &body)?;
        std::fs::rename(&tmp, &target)?;
        self.downloads.fetch_add(1, Ordering::Relaxed);
        Ok(target)
    }
}

pub const SKIP_LIST: &str = "skip.txt";

fn record_skip(cache_dir: &Path, id: &str) -> std::io::Result<()> {
    if skip_list(cache_dir).contains(id) {
        return Ok(());
    }
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(cache_dir.join(SKIP_LIST))?;
    writeln!(f, "{id}")
}

/// Ids previously recorded as unavailable.
pub fn skip_list(cache_dir: &Path) -> HashSet<String> {
    std::fs::read_to_string(cache_dir.join(SKIP_LIST))
        .map(|s| {
            s.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect()
        })
        .unwrap_or_default()
}
