//! Retry-wrapping gateway and the actor/annotator handle pair.

use std::sync::Arc;
use std::time::Duration;

use crate::backend::ChatBackend;
use crate::ledger::UsageLedger;
use crate::{estimate_tokens, CompletionRequest, GatewayError};

/// Exponential backoff: `base * factor^(attempt-1)` between attempts, up
/// to `max_attempts` total attempts per call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay_ms: 1000,
            factor: 2,
        }
    }
}

impl RetryPolicy {
    fn delay_before(&self, attempt: u32) -> Duration {
        // attempt is 1-based; the first retry (attempt 2) waits the base
        // delay, doubling from there: 1 s, 2 s, 4 s, 8 s at the defaults.
        let exp = attempt.saturating_sub(2).min(16);
        Duration::from_millis(
            self.base_delay_ms
                .saturating_mul(u64::from(self.factor).saturating_pow(exp)),
        )
    }
}

/// A backend plus retries and usage accounting. Cheap to clone; ledgers
/// are shared.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    retry: RetryPolicy,
    ledger: Arc<UsageLedger>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            backend,
            retry: RetryPolicy::default(),
            ledger: Arc::new(UsageLedger::new()),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_ledger(mut self, ledger: Arc<UsageLedger>) -> Self {
        self.ledger = ledger;
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn ledger(&self) -> &Arc<UsageLedger> {
        &self.ledger
    }

    /// Issue a completion, retrying transient failures with backoff.
    pub fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, GatewayError> {
        request.validate()?;
        let name = self.backend.name().to_string();
        let prompt_tokens = estimate_tokens(&request.flat_text());
        let mut last_error = String::new();
        for attempt in 1..=self.retry.max_attempts {
            if attempt > 1 {
                std::thread::sleep(self.retry.delay_before(attempt));
                self.ledger.record_retry(&name);
            }
            self.ledger.record_request(&name, prompt_tokens);
            match self.backend.complete(request) {
                Ok(replies) => {
                    let response_tokens: u64 =
                        replies.iter().map(|r| estimate_tokens(r)).sum();
                    self.ledger.record_response(&name, response_tokens);
                    return Ok(replies);
                }
                Err(e) if e.is_retryable() => {
                    last_error = e.to_string();
                }
                Err(e) => {
                    self.ledger.record_failure(&name);
                    return Err(e);
                }
            }
        }
        self.ledger.record_failure(&name);
        Err(GatewayError::GatewayExhausted {
            attempts: self.retry.max_attempts,
            last_error,
        })
    }
}

/// The two named handles the pipeline uses: the model that acts in the
/// environment and the model that annotates data. They may share a backend
/// or mix different ones.
#[derive(Clone)]
pub struct GatewaySet {
    pub actor: Gateway,
    pub annotator: Gateway,
}

impl GatewaySet {
    pub fn shared(gateway: Gateway) -> Self {
        Self {
            actor: gateway.clone(),
            annotator: gateway,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::FnBackend;
    use crate::ChatMessage;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn req() -> CompletionRequest {
        CompletionRequest::new("m", vec![ChatMessage::user("hello")])
    }

    #[test]
    fn retryable_errors_back_off_then_succeed() {
        let calls = Arc::new(AtomicU32::new(0));
        let c = calls.clone();
        let backend = FnBackend::new("flaky", move |_| {
            if c.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(GatewayError::Http {
                    status: Some(500),
                    message: "boom".into(),
                    retryable: true,
                })
            } else {
                Ok(vec!["ok".into()])
            }
        });
        let gw = Gateway::new(Arc::new(backend)).with_retry(RetryPolicy {
            max_attempts: 5,
            base_delay_ms: 1,
            factor: 2,
        });
        let out = gw.complete(&req()).unwrap();
        assert_eq!(out, vec!["ok"]);
        let counters = gw.ledger().counters("flaky");
        assert_eq!(counters.retries, 2);
        assert_eq!(counters.requests, 3);
        assert_eq!(counters.failures, 0);
    }

    #[test]
    fn exhaustion_after_budget() {
        let backend = FnBackend::new("dead", |_| {
            Err(GatewayError::Http {
                status: Some(503),
                message: "down".into(),
                retryable: true,
            })
        });
        let gw = Gateway::new(Arc::new(backend)).with_retry(RetryPolicy {
            max_attempts: 3,
            base_delay_ms: 1,
            factor: 2,
        });
        let err = gw.complete(&req()).unwrap_err();
        assert!(matches!(err, GatewayError::GatewayExhausted { attempts: 3, .. }));
        assert_eq!(gw.ledger().counters("dead").failures, 1);
    }

    #[test]
    fn non_retryable_errors_surface_immediately() {
        let backend = FnBackend::new("strict", |_| {
            Err(GatewayError::UnmatchedPrompt { preview: "x".into() })
        });
        let gw = Gateway::new(Arc::new(backend));
        let err = gw.complete(&req()).unwrap_err();
        assert!(matches!(err, GatewayError::UnmatchedPrompt { .. }));
        assert_eq!(gw.ledger().counters("strict").requests, 1);
    }

    #[test]
    fn invalid_requests_are_rejected_before_the_backend() {
        let backend = FnBackend::new("never", |_| panic!("backend must not run"));
        let gw = Gateway::new(Arc::new(backend));
        let bad = req().with_temperature(3.0);
        assert!(matches!(gw.complete(&bad), Err(GatewayError::InvalidRequest(_))));
    }

    #[test]
    fn backoff_delays_are_nondecreasing() {
        let p = RetryPolicy::default();
        let mut prev = Duration::ZERO;
        for attempt in 1..=p.max_attempts {
            let d = p.delay_before(attempt);
            assert!(d >= prev);
            prev = d;
        }
        assert_eq!(p.delay_before(2), Duration::from_millis(1000));
        assert_eq!(p.delay_before(5), Duration::from_millis(8000));
    }
}
