use std::fmt;

use sdgmine::harvest::HarvestError;
use sdgmine::provider::{BatchError, ProviderError};

/// Exit-status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Internal,
    Usage,
    Input,
    Network,
    Provider,
    Storage,
}

impl Category {
    pub fn exit_code(self) -> u8 {
        match self {
            Category::Internal => 1,
            Category::Usage => 2,
            Category::Input => 3,
            Category::Network => 4,
            Category::Provider => 5,
            Category::Storage => 6,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub category: Category,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

macro_rules! ctor {
    ($name:ident, $cat:ident) => {
        pub fn $name(e: impl Into<anyhow::Error>) -> Self {
            Failure {
                category: Category::$cat,
                error: e.into(),
            }
        }
    };
}

impl Failure {
    ctor!(usage, Usage);
    ctor!(input, Input);
    ctor!(network, Network);
    ctor!(provider, Provider);
    ctor!(storage, Storage);
    ctor!(internal, Internal);

    pub fn harvest(e: HarvestError) -> Self {
        match e {
            HarvestError::InvalidQuery(_) => Failure::usage(e),
            HarvestError::Io(_) => Failure::storage(e),
            _ => Failure::network(e),
        }
    }

    pub fn batch(e: BatchError) -> Self {
        match e {
            BatchError::Provider(ProviderError::InvalidConfig(_)) => Failure::usage(e),
            BatchError::Provider(_) => Failure::provider(e),
            BatchError::Sink { .. } | BatchError::FailureList(_) => Failure::storage(e),
            BatchError::Worker(_) => Failure::internal(e),
        }
    }
}
