use std::path::Path;

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::Serialize;
use serde_json::Value;

use crate::error::Category;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub subcommand: String,
    pub argv: Vec<String>,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taxonomy_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_digest: Option<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_category: Option<Category>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub outcome: Value,
}

pub fn new_run_id(now: DateTime<Utc>) -> String {
    let suffix: u32 = rand::rng().random();
    format!("{}-{suffix:08x}", now.format("%Y%m%dT%H%M%SZ"))
}

impl RunManifest {
    pub fn start(subcommand: &str, run_id: String) -> Self {
        RunManifest {
            run_id,
            subcommand: subcommand.to_string(),
            argv: std::env::args().collect(),
            config: Value::Null,
            taxonomy_digest: None,
            prompt_digest: None,
            started_at: Utc::now(),
            finished_at: None,
            status: "running".into(),
            error_category: None,
            error: None,
            outcome: Value::Null,
        }
    }

    pub fn write(&self, out: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(out)?;
        let tmp = out.join(format!("{MANIFEST_FILE}.part"));
        std::fs::write(&tmp, serde_json::to_vec_pretty(self).expect("manifest serializes"))?;
        std::fs::rename(tmp, out.join(MANIFEST_FILE))
    }
}
