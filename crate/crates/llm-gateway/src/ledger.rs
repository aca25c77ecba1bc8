//! Usage accounting shared across all backends of a run.

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct BackendCounters {
    pub requests: u64,
    pub retries: u64,
    pub failures: u64,
    pub prompt_tokens_est: u64,
    pub response_tokens_est: u64,
}

/// Monotone per-backend counters; internally synchronized.
#[derive(Debug, Default)]
pub struct UsageLedger {
    counters: Mutex<BTreeMap<String, BackendCounters>>,
}

impl UsageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn with<R>(&self, backend: &str, f: impl FnOnce(&mut BackendCounters) -> R) -> R {
        let mut map = self.counters.lock().unwrap();
        f(map.entry(backend.to_string()).or_default())
    }

    pub fn record_request(&self, backend: &str, prompt_tokens: u64) {
        self.with(backend, |c| {
            c.requests += 1;
            c.prompt_tokens_est += prompt_tokens;
        });
    }

    pub fn record_response(&self, backend: &str, response_tokens: u64) {
        self.with(backend, |c| c.response_tokens_est += response_tokens);
    }

    pub fn record_retry(&self, backend: &str) {
        self.with(backend, |c| c.retries += 1);
    }

    pub fn record_failure(&self, backend: &str) {
        self.with(backend, |c| c.failures += 1);
    }

    pub fn counters(&self, backend: &str) -> BackendCounters {
        self.with(backend, |c| *c)
    }

    pub fn snapshot(&self) -> BTreeMap<String, BackendCounters> {
        self.counters.lock().unwrap().clone()
    }
}
