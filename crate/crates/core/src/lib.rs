//! Sustainability classification of robotics papers with LLMs: harvesting,
//! prompting, response parsing, storage, analytics and footprint accounting.

pub mod harvest;
pub mod prompting;
pub mod provider;
pub mod respparse;
pub mod retry;
pub mod taxonomy;
pub mod analytics;
pub mod footprint;
pub mod pipeline;
pub mod robustness;
pub mod store;
