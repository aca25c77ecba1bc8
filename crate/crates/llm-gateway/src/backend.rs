//! The backend trait and the deterministic test backends.

use std::collections::VecDeque;
use std::sync::Mutex;

use crate::{CompletionRequest, GatewayError};

pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, GatewayError>;
}

/// How a scripted rule matches the flattened prompt text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Exact(String),
    Prefix(String),
    Contains(String),
}

impl Pattern {
    fn matches(&self, text: &str) -> bool {
        match self {
            Pattern::Exact(p) => text == p,
            Pattern::Prefix(p) => text.starts_with(p),
            Pattern::Contains(p) => text.contains(p),
        }
    }
}

struct Rule {
    pattern: Pattern,
    replies: Vec<String>,
    cursor: usize,
}

/// Canned-reply backend. Two reply sources, checked in order:
///
/// 1. an ordered transcript: each call pops the next reply list;
/// 2. pattern rules: the first rule matching the flattened prompt serves
///    `n` replies from its rotating reply list.
///
/// A prompt that matches neither is an [`GatewayError::UnmatchedPrompt`] —
/// in tests that is a test failure, which is the point.
pub struct ScriptedBackend {
    name: String,
    state: Mutex<ScriptedState>,
}

struct ScriptedState {
    transcript: VecDeque<Vec<String>>,
    rules: Vec<Rule>,
}

impl ScriptedBackend {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            state: Mutex::new(ScriptedState { transcript: VecDeque::new(), rules: Vec::new() }),
        }
    }

    /// Add a pattern rule with a rotating reply list.
    pub fn rule(self, pattern: Pattern, replies: Vec<String>) -> Self {
        assert!(!replies.is_empty(), "a rule needs at least one reply");
        self.state
            .lock()
            .unwrap()
            .rules
            .push(Rule { pattern, replies, cursor: 0 });
        self
    }

    /// Queue an ordered transcript; each entry answers one call.
    pub fn transcript(self, entries: Vec<Vec<String>>) -> Self {
        self.state.lock().unwrap().transcript.extend(entries);
        self
    }

    /// One single-reply transcript entry per line.
    pub fn transcript_lines(self, lines: Vec<String>) -> Self {
        let entries = lines.into_iter().map(|l| vec![l]).collect();
        self.transcript(entries)
    }
}

impl ChatBackend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, GatewayError> {
        let n = request.n as usize;
        let mut state = self.state.lock().unwrap();
        if let Some(entry) = state.transcript.pop_front() {
            let replies = (0..n).map(|i| entry[i % entry.len()].clone()).collect();
            return Ok(replies);
        }
        let text = request.flat_text();
        for rule in state.rules.iter_mut() {
            if rule.pattern.matches(&text) {
                let len = rule.replies.len();
                let replies = (0..n)
                    .map(|i| rule.replies[(rule.cursor + i) % len].clone())
                    .collect();
                rule.cursor = (rule.cursor + n) % len;
                return Ok(replies);
            }
        }
        let preview: String = text.chars().take(120).collect();
        Err(GatewayError::UnmatchedPrompt { preview })
    }
}

/// Closure-driven backend for tests that need to compute replies from the
/// request (answer keys, solvers, failure injection).
pub struct FnBackend {
    name: String,
    #[allow(clippy::type_complexity)]
    f: Box<dyn Fn(&CompletionRequest) -> Result<Vec<String>, GatewayError> + Send + Sync>,
}

impl FnBackend {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&CompletionRequest) -> Result<Vec<String>, GatewayError> + Send + Sync + 'static,
    {
        Self { name: name.into(), f: Box::new(f) }
    }
}

impl ChatBackend for FnBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, GatewayError> {
        (self.f)(request)
    }
}
