use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use sdgmine::pipeline::MalformedPolicy;
use sdgmine::provider::{ChatProvider, Client, HttpChatProvider, MockProvider, ProviderConfig, UsageLedger};
use sdgmine::taxonomy::{bundled, load_ifr_corpus, load_sdg_corpus, Taxonomy};

use crate::args::{ProviderArgs, ProviderKind};
use crate::error::Failure;

pub const DEFAULT_MAX_INPUT_TOKENS: usize = 100_000;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarvestSection {
    pub arxiv_base: Option<String>,
    pub page_size: Option<usize>,
    pub page_delay_ms: Option<u64>,
    pub fetch_delay_ms: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockSection {
    pub latency_ms: Option<u64>,
    pub drop: Option<f64>,
    pub seed: Option<u64>,
}

/// Contents of `--config`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub category: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub provider_kind: Option<ProviderKind>,
    pub max_input_tokens: Option<usize>,
    pub malformed_policy: Option<String>,
    pub sdg_corpus: Option<PathBuf>,
    pub ifr_corpus: Option<PathBuf>,
    pub provider: Option<ProviderConfig>,
    pub harvest: HarvestSection,
    pub mock: MockSection,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(Failure::input)?;
        toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
            .map_err(Failure::usage)
    }
}

/// Provider settings after merging file and flags; recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedProvider {
    pub kind: ProviderKind,
    pub config: ProviderConfig,
    pub max_input_tokens: usize,
    pub malformed_policy: MalformedPolicy,
    pub mock_latency_ms: u64,
    pub mock_drop: Option<f64>,
    pub mock_seed: u64,
    pub sdg_corpus: Option<PathBuf>,
    pub ifr_corpus: Option<PathBuf>,
}

impl ResolvedProvider {
    pub fn resolve(file: &FileConfig, args: &ProviderArgs) -> Result<Self, Failure> {
        let mut config = file.provider.clone().unwrap_or_default();
        let kind = args
            .provider
            .or(file.provider_kind)
            .unwrap_or(if config.endpoint.is_empty() {
                ProviderKind::Mock
            } else {
                ProviderKind::Http
            });
        if let Some(m) = &args.model {
            config.model_id = m.clone();
        }
        if let Some(e) = &args.endpoint {
            config.endpoint = e.clone();
        }
        if let Some(c) = args.concurrency {
            config.max_concurrency = c;
        }
        if let Some(r) = args.rpm {
            config.requests_per_minute = r;
        }
        if let Some(t) = args.temperature {
            config.decoding.temperature = Some(t);
        }
        if let Some(a) = args.max_attempts {
            config.max_attempts = a;
        }
        if kind == ProviderKind::Mock && file.provider.is_none() {
            // nothing to wait for offline
            config.backoff_base = Duration::from_millis(10);
            if args.rpm.is_none() {
                config.requests_per_minute = 60_000.0;
            }
        }
        config.name = match kind {
            ProviderKind::Mock => "mock".into(),
            ProviderKind::Http => {
                if config.name == "mock" {
                    "http".into()
                } else {
                    config.name.clone()
                }
            }
        };
        config.validate().map_err(Failure::usage)?;
        let malformed_policy = match (&args.malformed_policy, &file.malformed_policy) {
            (Some(p), _) => *p,
            (None, Some(s)) => s.parse().map_err(|e: String| Failure::usage(anyhow::anyhow!(e)))?,
            (None, None) => MalformedPolicy::default(),
        };
        let max_input_tokens = args
            .max_input_tokens
            .or(file.max_input_tokens)
            .unwrap_or(DEFAULT_MAX_INPUT_TOKENS);
        if max_input_tokens == 0 {
            return Err(Failure::usage(anyhow::anyhow!("--max-input-tokens must be positive")));
        }
        Ok(ResolvedProvider {
            kind,
            config,
            max_input_tokens,
            malformed_policy,
            mock_latency_ms: args.mock_latency_ms.or(file.mock.latency_ms).unwrap_or(0),
            mock_drop: args.mock_drop.or(file.mock.drop),
            mock_seed: args.mock_seed.or(file.mock.seed).unwrap_or(0),
            sdg_corpus: args.sdg_corpus.clone().or_else(|| file.sdg_corpus.clone()),
            ifr_corpus: args.ifr_corpus.clone().or_else(|| file.ifr_corpus.clone()),
        })
    }

    pub fn with_model(&self, model_id: &str, index: usize) -> Self {
        let mut r = self.clone();
        r.config.model_id = model_id.to_string();
        r.mock_seed = self.mock_seed.wrapping_add(index as u64);
        r
    }

    pub fn taxonomy(&self) -> Result<Taxonomy, Failure> {
        let base = match &self.sdg_corpus {
            Some(p) => load_sdg_corpus(p).map_err(Failure::input)?,
            None => return Ok(bundled()),
        };
        match &self.ifr_corpus {
            Some(p) => load_ifr_corpus(p, base).map_err(Failure::input),
            None => Ok(base),
        }
    }

    pub fn client(&self, ledger: Option<Arc<UsageLedger>>) -> Result<Arc<Client>, Failure> {
        let provider: Arc<dyn ChatProvider> = match self.kind {
            ProviderKind::Mock => {
                let mut m = MockProvider::new(&self.config.model_id)
                    .with_latency(Duration::from_millis(self.mock_latency_ms));
                if let Some(p) = self.mock_drop {
                    m = m.with_variation(self.mock_seed, p);
                }
                Arc::new(m)
            }
            ProviderKind::Http => Arc::new(HttpChatProvider::from_config(&self.config).map_err(Failure::usage)?),
        };
        let mut client = Client::new(provider, self.config.clone()).map_err(Failure::usage)?;
        if let Some(l) = ledger {
            client = client.with_ledger(l);
        }
        Ok(Arc::new(client))
    }
}
