use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde_json::{json, Value};

use sdgmine::harvest::{build_test_pdf, skip_list, ArxivClient, HarvestConfig, HarvestError};
use sdgmine::provider::{Client, HttpChatProvider, ProviderConfig, ProviderError, UsageLedger};

async fn serve(app: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

type Seen = Arc<std::sync::Mutex<Vec<(Option<String>, Value)>>>;

#[derive(Clone)]
struct Chat {
    hits: Arc<AtomicUsize>,
    plan: Arc<Vec<u16>>,
    seen: Seen,
}

async fn chat(
    State(s): State<Chat>,
    headers: axum::http::HeaderMap,
    Json(body): Json<Value>,
) -> axum::response::Response {
    let n = s.hits.fetch_add(1, Ordering::SeqCst);
    let auth = headers
        .get("authorization")
        .map(|v| v.to_str().unwrap().to_string());
    s.seen.lock().unwrap().push((auth, body));
    let status = s.plan.get(n).copied().unwrap_or(200);
    if status != 200 {
        return (StatusCode::from_u16(status).unwrap(), "slow down").into_response();
    }
    Json(json!({
        "choices": [{"message": {"role": "assistant", "content": "0. Paper type: other"}}],
        "usage": {"prompt_tokens": 25000, "completion_tokens": 750}
    }))
    .into_response()
}

async fn chat_client(plan: Vec<u16>) -> (Arc<Client>, Chat) {
    let state = Chat {
        hits: Arc::default(),
        plan: Arc::new(plan),
        seen: Arc::default(),
    };
    let base = serve(Router::new().route("/v1/chat", post(chat)).with_state(state.clone())).await;
    let cfg = ProviderConfig {
        name: "http".into(),
        endpoint: format!("{base}/v1/chat"),
        model_id: "DeepSeek-V3".into(),
        backoff_base: Duration::from_millis(5),
        requests_per_minute: 6000.0,
        ..Default::default()
    };
    let provider = HttpChatProvider::new(&cfg.endpoint, Some("sk-test".into()), cfg.timeout).unwrap();
    let client = Client::new(Arc::new(provider), cfg)
        .unwrap()
        .with_ledger(Arc::new(UsageLedger::in_memory()));
    (Arc::new(client), state)
}

#[tokio::test]
async fn rate_limited_then_success() {
    let (client, state) = chat_client(vec![429, 429, 200]).await;
    let r = client.submit_one(Some("2411.15159"), "system", "user").await.unwrap();
    assert_eq!(r.attempt_count, 3);
    assert_eq!(r.usage.input_tokens, 25_000);
    assert_eq!(r.usage.output_tokens, 750);
    assert_eq!(r.raw_text, "0. Paper type: other");
    let seen = state.seen.lock().unwrap();
    assert_eq!(seen[0].0.as_deref(), Some("Bearer sk-test"));
    assert_eq!(seen[0].1["model"], "DeepSeek-V3");
    assert_eq!(seen[0].1["messages"][0]["role"], "system");
    assert_eq!(seen[0].1["messages"][1]["content"], "user");
    let totals = client.ledger().unwrap().totals();
    assert_eq!(totals["DeepSeek-V3"].calls, 1);
}

#[tokio::test]
async fn unauthorized_fails_fast() {
    let (client, state) = chat_client(vec![401]).await;
    let err = client.submit_one(None, "system", "user").await.unwrap_err();
    assert!(matches!(err, ProviderError::Rejected { status: 401, .. }), "{err:?}");
    assert_eq!(state.hits.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn server_errors_exhaust_retries() {
    let (client, state) = chat_client(vec![503; 10]).await;
    let err = client.submit_one(None, "s", "u").await.unwrap_err();
    assert!(matches!(err, ProviderError::ExhaustedRetries { attempts: 5, .. }), "{err:?}");
    assert_eq!(state.hits.load(Ordering::SeqCst), 5);
}

fn entry(id: &str, date: &str) -> String {
    format!(
        "<entry><id>http://arxiv.org/abs/{id}v1</id><published>{date}T09:00:00Z</published>\
         <title>Paper {id}</title><arxiv:primary_category term=\"cs.RO\"/></entry>"
    )
}

#[derive(Clone, Default)]
struct Arxiv {
    pdf_hits: Arc<AtomicUsize>,
}

async fn listing(Query(q): Query<HashMap<String, String>>) -> String {
    let start: usize = q["start"].parse().unwrap();
    let max: usize = q["max_results"].parse().unwrap();
    let all = [
        entry("2401.00001", "2024-01-03"),
        entry("2401.00002", "2024-01-04"),
        entry("2401.00003", "2024-01-05"),
        entry("2401.00002", "2024-01-04"),
        entry("2402.00004", "2024-02-01"),
    ];
    let page: String = all.iter().skip(start).take(max).cloned().collect();
    format!(
        "<feed xmlns=\"http://www.w3.org/2005/Atom\" xmlns:opensearch=\"http://a9.com/-/spec/opensearch/1.1/\" \
         xmlns:arxiv=\"http://arxiv.org/schemas/atom\"><opensearch:totalResults>5</opensearch:totalResults>{page}</feed>"
    )
}

async fn pdf(State(s): State<Arxiv>, Path(id): Path<String>) -> axum::response::Response {
    s.pdf_hits.fetch_add(1, Ordering::SeqCst);
    if id == "2401.00003" {
        return StatusCode::NOT_FOUND.into_response();
    }
    build_test_pdf(&[&format!("Text of {id}")], true).into_response()
}

#[tokio::test]
async fn harvest_dedups_paginates_and_caches() {
    let state = Arxiv::default();
    let base = serve(
        Router::new()
            .route("/api/query", get(listing))
            .route("/pdf/{id}", get(pdf))
            .with_state(state.clone()),
    )
    .await;
    let client = ArxivClient::new(HarvestConfig::for_base(&base)).unwrap();
    let from = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
    let to = NaiveDate::from_ymd_opt(2024, 3, 31).unwrap();
    let metas = client.query_metadata("cs.RO", from, to, 2).await.unwrap();
    let ids: Vec<&str> = metas.iter().map(|m| m.arxiv_id.as_str()).collect();
    assert_eq!(ids, ["2401.00001", "2401.00002", "2401.00003", "2402.00004"]);
    assert_eq!(metas[3].quarter.to_string(), "2024Q1");

    let cache = tempfile::tempdir().unwrap();
    let mut fetched = 0;
    for m in &metas {
        match client.fetch_pdf(m, cache.path()).await {
            Ok(p) => {
                assert!(p.exists());
                fetched += 1;
            }
            Err(HarvestError::Unavailable { id, status }) => {
                assert_eq!((id.as_str(), status), ("2401.00003", 404));
            }
            Err(e) => panic!("{e}"),
        }
    }
    assert_eq!(fetched, 3);
    assert!(skip_list(cache.path()).contains("2401.00003"));
    assert_eq!(client.download_count(), 3);

    let warm = ArxivClient::new(HarvestConfig::for_base(&base)).unwrap();
    let hits_before = state.pdf_hits.load(Ordering::SeqCst);
    for m in metas.iter().filter(|m| m.arxiv_id != "2401.00003") {
        warm.fetch_pdf(m, cache.path()).await.unwrap();
    }
    assert_eq!(warm.download_count(), 0);
    assert_eq!(state.pdf_hits.load(Ordering::SeqCst), hits_before);
}
