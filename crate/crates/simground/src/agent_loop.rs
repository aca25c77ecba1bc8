//! The LLM-in-the-loop experience sampler: episodes, self-refinement and
//! self-consistency voting.
//!
//! One episode = repeatedly render the observation, assemble a prompt from
//! the system preamble, the memory window and the observation, query the
//! actor, parse its reply into an action, and step the environment. An
//! unparseable reply earns one reprompt carrying the parse error; if that
//! also fails the step becomes a no-op, so episodes are total.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use llm_gateway::{ChatMessage, CompletionRequest, Gateway, GatewayError};

use crate::envbridge::{build_env, EnvSpec, EnvStatus, Environment};
use crate::seeds::derive_seed;
use crate::store::ExperienceStore;
use crate::textio::{render_action, ActionParser, ParsedAction};
use crate::{EnvKind, Fidelity};

#[derive(Debug, Error)]
pub enum LoopError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Env(#[from] crate::envbridge::EnvError),
    #[error("no extractable answer in any of the {samples} samples")]
    NoExtractableAnswer { samples: u32 },
    #[error("store error: {0}")]
    Store(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub model: String,
    pub max_steps: usize,
    pub memory_capacity: usize,
    pub observation_digest_chars: usize,
    pub temperature: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            model: "actor".into(),
            max_steps: 40,
            memory_capacity: 8,
            observation_digest_chars: 240,
            temperature: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    pub input: Value,
    pub output: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub observation: String,
    /// Raw model output (including a reprompted retry when one happened).
    pub thought: String,
    pub action: ParsedAction,
    pub events: Vec<Value>,
    pub tool_calls: Vec<ToolCall>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeOutcome {
    Success,
    Failure,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Assigned by the experience store on append.
    pub id: Option<u64>,
    pub env_kind: EnvKind,
    pub task_id: String,
    pub fidelity: Fidelity,
    pub seed: u64,
    pub env_spec: EnvSpec,
    pub steps: Vec<EpisodeStep>,
    pub outcome: EpisodeOutcome,
    pub refinement_round: u32,
    pub parent_episode: Option<u64>,
    /// Set when the actor gateway gave out mid-episode.
    pub gateway_error: Option<String>,
    pub tag: Option<String>,
    pub surprise: Option<u8>,
}

impl EpisodeRecord {
    /// Content identity: everything except the store-assigned id and the
    /// post-hoc annotations.
    pub fn content_hash(&self) -> String {
        let mut stripped = self.clone();
        stripped.id = None;
        stripped.tag = None;
        stripped.surprise = None;
        let json = serde_json::to_string(&stripped).expect("record serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn actions(&self) -> Vec<ParsedAction> {
        self.steps.iter().map(|s| s.action.clone()).collect()
    }

    /// Short text used in annotation prompts and tag requests.
    pub fn digest(&self, max_steps: usize) -> String {
        let mut out = format!(
            "env={} task={} fidelity={:?} outcome={:?} steps={}\n",
            self.env_kind.name(),
            self.task_id,
            self.fidelity,
            self.outcome,
            self.steps.len()
        );
        for (i, step) in self.steps.iter().enumerate().take(max_steps) {
            let events: Vec<String> = step
                .events
                .iter()
                .map(|e| {
                    e.get("event")
                        .or_else(|| e.get("kind"))
                        .and_then(|v| v.as_str())
                        .unwrap_or("event")
                        .to_string()
                })
                .collect();
            out.push_str(&format!(
                "step {i}: {} -> [{}]\n",
                render_action(&step.action),
                events.join(", ")
            ));
        }
        out
    }
}

/// FIFO window over recent steps, included in every prompt.
#[derive(Debug, Clone, Default)]
pub struct MemoryWindow {
    capacity: usize,
    entries: VecDeque<String>,
}

impl MemoryWindow {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, entries: VecDeque::new() }
    }

    pub fn push(&mut self, entry: String) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn render(&self) -> String {
        if self.entries.is_empty() {
            return "(none yet)".to_string();
        }
        self.entries.iter().cloned().collect::<Vec<_>>().join("\n")
    }
}

fn system_preamble(env: &dyn Environment, critique: Option<&str>) -> String {
    let tool_lines: Vec<String> = env
        .tools()
        .iter()
        .map(|t| format!("- {}(): {}", t.name, t.description))
        .collect();
    let actions = match env.kind() {
        EnvKind::AgentWorld => {
            "move(up|down|left|right), use_shovel(direction), use_wing(), trade(attack|defense|life), inspect_orb()"
        }
        EnvKind::Driving => "lane_left(), lane_right(), faster(), slower(), idle(), lane_change(lane_id)",
    };
    let mut out = format!(
        "[action-request env={}]\nYou control an agent in a simulated environment. Goal: {}.\n\
         Available actions: {actions}.\nInformational tools:\n{}\n\
         Think briefly, then end your reply with exactly one action call.",
        env.kind().name(),
        env.goal_text(),
        tool_lines.join("\n"),
    );
    if let Some(critique) = critique {
        out.push_str("\n\nLessons from a prior failed attempt:\n");
        out.push_str(critique);
    }
    out
}

fn observation_digest(obs: &str, max_chars: usize) -> String {
    if obs.len() <= max_chars {
        return obs.to_string();
    }
    let cut: String = obs.chars().take(max_chars).collect();
    format!("{cut}...")
}

/// Run one episode against a freshly built environment.
pub fn run_episode(
    env: &mut dyn Environment,
    actor: &Gateway,
    cfg: &LoopConfig,
    env_spec: &EnvSpec,
    critique: Option<&str>,
) -> Result<EpisodeRecord, LoopError> {
    let parser = match env.kind() {
        EnvKind::AgentWorld => ActionParser::new(env.kind())
            .with_skills(env.tools().iter().map(|t| t.name.clone())),
        EnvKind::Driving => ActionParser::new(env.kind())
            .with_skill("lane_change")
            .with_skills(env.tools().iter().map(|t| t.name.clone())),
    };
    let system = system_preamble(env, critique);
    let mut memory = MemoryWindow::new(cfg.memory_capacity);
    let mut steps = Vec::new();
    let mut gateway_error = None;
    let tool_names: Vec<String> = env.tools().iter().map(|t| t.name.clone()).collect();

    for _ in 0..cfg.max_steps {
        if env.status() != EnvStatus::Ongoing {
            break;
        }
        let observation = env.observe();
        let prompt = format!(
            "Recent steps:\n{}\n\nCurrent observation:\n{}\n\nReply with your reasoning and one action call.",
            memory.render(),
            observation
        );
        let request = CompletionRequest::new(
            cfg.model.clone(),
            vec![ChatMessage::system(system.clone()), ChatMessage::user(prompt)],
        )
        .with_temperature(cfg.temperature);

        let reply = match actor.complete(&request) {
            Ok(mut replies) => replies.remove(0),
            Err(GatewayError::GatewayExhausted { attempts, last_error }) => {
                gateway_error = Some(format!("exhausted after {attempts} attempts: {last_error}"));
                break;
            }
            Err(e) => return Err(e.into()),
        };

        let (action, thought) = match parser.parse(&reply) {
            Ok(action) => (action, reply),
            Err(parse_err) => {
                // One reprompt carrying the error, then fall back to a no-op.
                let retry_request = CompletionRequest::new(
                    cfg.model.clone(),
                    vec![
                        ChatMessage::system(system.clone()),
                        ChatMessage::user(format!(
                            "{parse_err}. Reply with exactly one action call and nothing else."
                        )),
                    ],
                )
                .with_temperature(cfg.temperature);
                match actor.complete(&retry_request) {
                    Ok(mut replies) => {
                        let second = replies.remove(0);
                        let action = parser.parse(&second).unwrap_or(ParsedAction::NoOp);
                        (action, format!("{reply}\n[reprompt]\n{second}"))
                    }
                    Err(GatewayError::GatewayExhausted { attempts, last_error }) => {
                        gateway_error =
                            Some(format!("exhausted after {attempts} attempts: {last_error}"));
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        };

        let mut tool_calls = Vec::new();
        let events = match &action {
            ParsedAction::Skill { call } if tool_names.contains(&call.name) => {
                let input = serde_json::json!({
                    "args": call.args.iter().map(|a| a.to_string()).collect::<Vec<_>>()
                });
                let output = env
                    .call_tool(&call.name, &input)
                    .unwrap_or_else(|| serde_json::json!({"error": "unknown tool"}));
                tool_calls.push(ToolCall { name: call.name.clone(), input, output });
                Vec::new()
            }
            other => env.apply(other),
        };

        memory.push(format!(
            "- obs: {} | action: {} | events: {}",
            observation_digest(&observation, cfg.observation_digest_chars).replace('\n', " "),
            render_action(&action),
            events.len()
        ));
        steps.push(EpisodeStep {
            observation,
            thought,
            action,
            events,
            tool_calls,
        });
    }

    let outcome = match env.status() {
        EnvStatus::Success => EpisodeOutcome::Success,
        EnvStatus::Failure => EpisodeOutcome::Failure,
        EnvStatus::Ongoing => EpisodeOutcome::Budget,
    };
    Ok(EpisodeRecord {
        id: None,
        env_kind: env.kind(),
        task_id: env_spec.task_id(),
        fidelity: env.fidelity(),
        seed: env_spec.seed(),
        env_spec: env_spec.clone(),
        steps,
        outcome,
        refinement_round: 0,
        parent_episode: None,
        gateway_error,
        tag: None,
        surprise: None,
    })
}

/// Build the critique text shown to a refinement episode.
pub fn critique_of(prior: &EpisodeRecord) -> String {
    let plan: Vec<String> = prior.steps.iter().map(|s| render_action(&s.action)).collect();
    let failures: Vec<String> = prior
        .steps
        .iter()
        .rev()
        .take(3)
        .flat_map(|s| s.events.iter())
        .map(|e| e.to_string())
        .collect();
    format!(
        "[refine round={}]\nPrior plan: {}\nPrior outcome: {:?}\nFinal events: {}\nAvoid repeating the same mistake.",
        prior.refinement_round + 1,
        plan.join(", "),
        prior.outcome,
        failures.join("; ")
    )
}

/// Re-run the prior episode's task with a critique of the failure
/// prepended. The result records its lineage.
pub fn self_refine(
    prior: &EpisodeRecord,
    actor: &Gateway,
    cfg: &LoopConfig,
) -> Result<EpisodeRecord, LoopError> {
    let mut env = build_env(&prior.env_spec)?;
    let critique = critique_of(prior);
    let mut record = run_episode(env.as_mut(), actor, cfg, &prior.env_spec, Some(&critique))?;
    record.refinement_round = prior.refinement_round + 1;
    record.parent_episode = prior.id;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub answer: String,
    pub votes: BTreeMap<String, u32>,
    pub tie: bool,
}

/// Draw `n` samples and take the modal extracted answer; ties break to the
/// lexicographic minimum and are flagged.
pub fn self_consistency(
    messages: Vec<ChatMessage>,
    n: u32,
    gateway: &Gateway,
    model: &str,
    temperature: f64,
    extractor: &dyn Fn(&str) -> Option<String>,
) -> Result<ConsensusResult, LoopError> {
    let request = CompletionRequest::new(model, messages)
        .with_temperature(temperature)
        .with_n(n.max(1));
    let replies = gateway.complete(&request)?;
    let mut votes: BTreeMap<String, u32> = BTreeMap::new();
    for reply in &replies {
        if let Some(answer) = extractor(reply) {
            *votes.entry(answer).or_insert(0) += 1;
        }
    }
    if votes.is_empty() {
        return Err(LoopError::NoExtractableAnswer { samples: n });
    }
    let top = votes.values().max().copied().unwrap_or(0);
    let winners: Vec<&String> = votes.iter().filter(|(_, c)| **c == top).map(|(a, _)| a).collect();
    let tie = winners.len() > 1;
    // BTreeMap iterates in key order, so the first winner is the
    // lexicographic minimum.
    let answer = winners[0].clone();
    Ok(ConsensusResult { answer, votes, tie })
}

/// Round-robin episode collection with a refinement queue. Every episode,
/// including failures, is persisted; failures spawn refinement children up
/// to `refine_depth`.
pub fn sample_experiences(
    env_specs: &[EnvSpec],
    budget: usize,
    actor: &Gateway,
    cfg: &LoopConfig,
    refine_depth: u32,
    base_seed: u64,
    store: &mut ExperienceStore,
) -> Result<Vec<u64>, LoopError> {
    assert!(!env_specs.is_empty(), "need at least one environment spec");
    let mut ids = Vec::new();
    for i in 0..budget {
        let base = &env_specs[i % env_specs.len()];
        let spec = base.with_seed(derive_seed(base_seed, &format!("episode-{i}")));
        let mut env = build_env(&spec)?;
        let mut record = run_episode(env.as_mut(), actor, cfg, &spec, None)?;
        let mut round = 0;
        loop {
            let id = store
                .append(record.clone())
                .map_err(|e| LoopError::Store(e.to_string()))?;
            ids.push(id);
            if record.outcome == EpisodeOutcome::Success || round >= refine_depth {
                break;
            }
            let mut persisted = record.clone();
            persisted.id = Some(id);
            record = self_refine(&persisted, actor, cfg)?;
            round += 1;
        }
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_window_evicts_fifo() {
        let mut w = MemoryWindow::new(2);
        w.push("a".into());
        w.push("b".into());
        w.push("c".into());
        assert_eq!(w.len(), 2);
        assert_eq!(w.render(), "b\nc");
    }

    #[test]
    fn consensus_majority_and_votes() {
        let backend = llm_gateway::ScriptedBackend::new("s").rule(
            llm_gateway::Pattern::Contains("vote".into()),
            vec!["A".into(), "A".into(), "A".into(), "B".into(), "B".into()],
        );
        let gw = Gateway::new(std::sync::Arc::new(backend));
        let result = self_consistency(
            vec![ChatMessage::user("vote")],
            5,
            &gw,
            "m",
            0.7,
            &|s| Some(s.trim().to_string()),
        )
        .unwrap();
        assert_eq!(result.answer, "A");
        assert_eq!(result.votes.get("A"), Some(&3));
        assert_eq!(result.votes.get("B"), Some(&2));
        assert!(!result.tie);
    }

    #[test]
    fn consensus_tie_breaks_lexicographically() {
        let backend = llm_gateway::ScriptedBackend::new("s").rule(
            llm_gateway::Pattern::Contains("vote".into()),
            vec!["B".into(), "A".into(), "B".into(), "A".into()],
        );
        let gw = Gateway::new(std::sync::Arc::new(backend));
        let result = self_consistency(
            vec![ChatMessage::user("vote")],
            4,
            &gw,
            "m",
            0.7,
            &|s| Some(s.trim().to_string()),
        )
        .unwrap();
        assert_eq!(result.answer, "A");
        assert!(result.tie);
    }

    #[test]
    fn consensus_single_sample() {
        let backend = llm_gateway::ScriptedBackend::new("s")
            .rule(llm_gateway::Pattern::Contains("vote".into()), vec!["C".into()]);
        let gw = Gateway::new(std::sync::Arc::new(backend));
        let result = self_consistency(
            vec![ChatMessage::user("vote")],
            1,
            &gw,
            "m",
            0.0,
            &|s| Some(s.trim().to_string()),
        )
        .unwrap();
        assert_eq!(result.answer, "C");
    }

    #[test]
    fn consensus_unextractable_everywhere_errors() {
        let backend = llm_gateway::ScriptedBackend::new("s")
            .rule(llm_gateway::Pattern::Contains("vote".into()), vec!["???".into()]);
        let gw = Gateway::new(std::sync::Arc::new(backend));
        let err = self_consistency(
            vec![ChatMessage::user("vote")],
            3,
            &gw,
            "m",
            0.7,
            &|s| s.chars().find(|c| c.is_ascii_uppercase()).map(String::from),
        )
        .unwrap_err();
        assert!(matches!(err, LoopError::NoExtractableAnswer { samples: 3 }));
    }
}
