use async_trait::async_trait;
use serde::Deserialize;
use serde_json::json;
use tracing::debug;

use super::{CallError, ChatProvider, ChatRequest, Completion, ProviderConfig, ProviderError, Usage};
use crate::retry::is_retryable_status;

/// OpenAI-style `chat/completions` endpoint.
pub struct HttpChatProvider {
    http: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

fn redact(body: &str, limit: usize) -> String {
    if body.len() <= limit {
        return body.to_string();
    }
    let mut cut = limit;
    while !body.is_char_boundary(cut) {
        cut -= 1;
    }
    format!("{}... ({} bytes)", &body[..cut], body.len())
}

impl HttpChatProvider {
    /// Reads the bearer token from the variable named in the config; a
    /// missing variable means no `Authorization` header.
    pub fn from_config(config: &ProviderConfig) -> Result<Self, ProviderError> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::new(&config.endpoint, api_key, config.timeout)
    }

    pub fn new(
        endpoint: &str,
        api_key: Option<String>,
        timeout: std::time::Duration,
    ) -> Result<Self, ProviderError> {
        if endpoint.trim().is_empty() {
            return Err(ProviderError::InvalidConfig("endpoint is empty".into()));
        }
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::InvalidConfig(e.to_string()))?;
        Ok(HttpChatProvider {
            http,
            endpoint: endpoint.to_string(),
            api_key,
        })
    }
}

#[async_trait]
impl ChatProvider for HttpChatProvider {
    async fn complete(&self, request: &ChatRequest) -> Result<Completion, CallError> {
        let mut body = json!({
            "model": request.model_id,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "max_tokens": request.decoding.max_output_tokens,
        });
        if let Some(t) = request.decoding.temperature {
            body["temperature"] = json!(t);
        }
        debug!(endpoint = %self.endpoint, paper_id = ?request.paper_id, body = %redact(&body.to_string(), 400), "chat request");

        let mut req = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| CallError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .await
            .map_err(|e| CallError::Transient(e.to_string()))?;
        debug!(status, body = %redact(&text, 400), "chat response");
        if is_retryable_status(status) {
            return Err(CallError::Transient(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(CallError::Rejected {
                status,
                message: redact(&text, 200),
            });
        }
        let wire: WireResponse = serde_json::from_str(&text)
            .map_err(|e| CallError::Transient(format!("unreadable completion body: {e}")))?;
        let content = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| CallError::Transient("completion without content".into()))?;
        Ok(Completion {
            text: content,
            usage: wire.usage.map(|u| Usage {
                input_tokens: u.prompt_tokens,
                output_tokens: u.completion_tokens,
            }),
        })
    }
}
