#![allow(dead_code)]

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::process::{Command, Output};

use axum::extract::{Path as UrlPath, Query};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use sdgmine::harvest::build_test_pdf;

pub const TOPICS: [&str; 10] = [
    "Robots for precision agriculture reduce fertilizer use and support sustainability of farms.",
    "A surgical robot improves patient health outcomes in hospitals.",
    "Autonomous drones monitor climate change effects on glaciers for environmental sustainability.",
    "Underwater vehicles inspect ocean reefs and marine ecosystems.",
    "A legged robot walks over rough terrain using model predictive control.",
    "Warehouse manipulators sort parcels for logistics in smart cities.",
    "Solar panel cleaning robots increase renewable energy output.",
    "A robot tutor supports education of children in classrooms.",
    "Forest monitoring robots track biodiversity and deforestation.",
    "Recycling robots separate waste streams for a circular economy.",
];

pub fn paper_id(i: usize) -> String {
    format!("24{:02}.{:05}", 1 + i % 12, i + 1)
}

fn entry(i: usize) -> String {
    let month = 1 + i % 12;
    format!(
        "<entry><id>http://arxiv.org/abs/{}v1</id><published>2024-{month:02}-15T10:00:00Z</published>\
         <title>Robot study {i}</title>\
         <arxiv:primary_category term=\"cs.RO\" scheme=\"http://arxiv.org/schemas/atom\"/></entry>",
        paper_id(i)
    )
}

/// Listing with `n` papers plus one repeated entry, served in pages.
async fn listing(Query(q): Query<HashMap<String, String>>, n: usize) -> impl IntoResponse {
    let start: usize = q.get("start").and_then(|s| s.parse().ok()).unwrap_or(0);
    let max: usize = q.get("max_results").and_then(|s| s.parse().ok()).unwrap_or(10);
    let mut all: Vec<String> = (0..n).map(entry).collect();
    all.insert(n / 2, entry(0));
    let page: String = all.iter().skip(start).take(max).cloned().collect();
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\
         <feed xmlns=\"http://www.w3.org/2005/Atom\" xmlns:opensearch=\"http://a9.com/-/spec/opensearch/1.1/\" \
         xmlns:arxiv=\"http://arxiv.org/schemas/atom\">\
         <opensearch:totalResults>{}</opensearch:totalResults>{page}</feed>",
        all.len()
    )
}

async fn pdf(UrlPath(id): UrlPath<String>, n: usize) -> axum::response::Response {
    let Some(i) = (0..n).find(|i| paper_id(*i) == id) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let lines = [format!("Robot study {i}"), "Introduction".to_string(), TOPICS[i % TOPICS.len()].to_string()];
    let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
    build_test_pdf(&refs, true).into_response()
}

/// Starts a fake arXiv host on a background runtime; returns its base URL.
pub fn spawn_arxiv(n: usize) -> String {
    let (tx, rx) = std::sync::mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new()
                .route("/api/query", get(move |q| listing(q, n)))
                .route("/pdf/{id}", get(move |p| pdf(p, n)));
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdgmine"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn harvest(base: &str, out: &Path, cache: &Path) -> Output {
    run(&[
        "--out",
        out.to_str().unwrap(),
        "harvest",
        "--category",
        "cs.RO",
        "--from",
        "2024-01-01",
        "--to",
        "2024-12-31",
        "--cache-dir",
        cache.to_str().unwrap(),
        "--arxiv-base",
        base,
        "--page-size",
        "4",
        "--page-delay-ms",
        "0",
        "--fetch-delay-ms",
        "0",
    ])
}

pub fn jsonl_lines(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn sorted_records(path: &Path) -> Vec<serde_json::Value> {
    let mut v = jsonl_lines(path);
    v.sort_by_key(|r| r["arxiv_id"].as_str().unwrap().to_string());
    v
}

pub fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
