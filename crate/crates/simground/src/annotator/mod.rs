//! Grounded instruction-data generation: a seed template pool, bootstrap
//! growth, five question kinds at three temporal scales, simulator-verified
//! answers and novelty filtering.

pub mod bootstrap;
pub mod counterfactual;
pub mod filter;
pub mod plan;
pub mod qa;
pub mod verify;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::EnvKind;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("template slot could not be resolved: {0}")]
    SlotResolution(String),
    #[error("episode replay diverged from the stored record: {0}")]
    ReplayMismatch(String),
    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
    #[error(transparent)]
    Gateway(#[from] llm_gateway::GatewayError),
    #[error(transparent)]
    Env(#[from] crate::envbridge::EnvError),
    #[error("draft could not be parsed: {0:?}")]
    DraftParse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaKind {
    MultipleChoice,
    Rationale,
    Counterfactual,
    EpisodicMemory,
    PlanComparison,
}

impl QaKind {
    pub const ALL: [QaKind; 5] = [
        QaKind::MultipleChoice,
        QaKind::Rationale,
        QaKind::Counterfactual,
        QaKind::EpisodicMemory,
        QaKind::PlanComparison,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            QaKind::MultipleChoice => "multiple_choice",
            QaKind::Rationale => "rationale",
            QaKind::Counterfactual => "counterfactual",
            QaKind::EpisodicMemory => "episodic_memory",
            QaKind::PlanComparison => "plan_comparison",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalScale {
    Step,
    Subgoal,
    Plan,
}

impl TemporalScale {
    pub fn name(&self) -> &'static str {
        match self {
            TemporalScale::Step => "step",
            TemporalScale::Subgoal => "subgoal",
            TemporalScale::Plan => "plan",
        }
    }
}

/// How a template's answers are grounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateGrounding {
    /// The annotator model drafts question, options and answer freely.
    Annotator,
    /// Episodic: last observed position of an entity kind.
    EntityPosition,
    /// Episodic (driving): the lane the ego ended in.
    LastLane,
    /// Engine-computed combat damage with distractor options.
    CombatDamage,
    /// Solver-checked yes/no reachability.
    Reachability,
    /// Engine replay of an untaken action.
    Counterfactual,
    /// Outcome contrast between two retrieved episodes.
    PlanComparison,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    Bootstrapped { round: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTemplate {
    pub id: String,
    pub kind: QaKind,
    pub temporal_scale: TemporalScale,
    pub env_kind: EnvKind,
    pub grounding: TemplateGrounding,
    /// Prompt skeleton with `{slot}` markers resolved against episodes.
    pub skeleton: String,
    #[serde(default = "seed_provenance")]
    pub provenance: Provenance,
}

fn seed_provenance() -> Provenance {
    Provenance::Seed
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemplatePool {
    pub templates: std::collections::BTreeMap<String, SeedTemplate>,
}

impl TemplatePool {
    pub fn insert(&mut self, template: SeedTemplate) -> bool {
        if self.templates.contains_key(&template.id) {
            return false;
        }
        self.templates.insert(template.id.clone(), template);
        true
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn for_env(&self, env: EnvKind) -> Vec<&SeedTemplate> {
        self.templates.values().filter(|t| t.env_kind == env).collect()
    }

    /// The pool shipped with the crate.
    pub fn builtin() -> Self {
        let json = include_str!("../../assets/seed_templates.json");
        Self::from_json(json).expect("builtin seed pool parses")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        let templates: Vec<SeedTemplate> = serde_json::from_str(json)?;
        let mut pool = TemplatePool::default();
        for t in templates {
            pool.insert(t);
        }
        Ok(pool)
    }
}

/// One grounded question-answer sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionSample {
    pub id: String,
    pub env_kind: EnvKind,
    pub kind: QaKind,
    pub temporal_scale: TemporalScale,
    pub question: String,
    /// Labeled options, e.g. "A: ... B: ... C: ...". Absent for free-form.
    pub context: Option<String>,
    /// Choice letter for multiple choice, literal text otherwise.
    pub answer: String,
    pub rationale: Option<String>,
    pub source_episodes: Vec<u64>,
    pub surprise: u8,
    #[serde(default)]
    pub surprise_defaulted: bool,
    pub verified: bool,
    #[serde(default)]
    pub ood: bool,
    /// Extra sampling-weight multiplier applied by filtering (easiness
    /// down-weighting); 1.0 otherwise.
    #[serde(default = "one")]
    pub weight_multiplier: f64,
    pub verification: Option<verify::VerificationSpec>,
    /// Kinematic feature vector of the source scene (driving samples).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinematic: Option<Vec<f32>>,
}

fn one() -> f64 {
    1.0
}

impl InstructionSample {
    /// Deterministic content-derived id.
    pub fn assign_id(&mut self) {
        let body = format!("{}|{}|{}|{}", self.kind.name(), self.question, self.answer, self.env_kind.name());
        let digest = Sha256::digest(body.as_bytes());
        self.id = format!("qa-{}", hex::encode(&digest[..6]));
    }

    /// Option labels parsed out of the context string.
    pub fn option_labels(&self) -> Vec<char> {
        let Some(context) = &self.context else { return Vec::new() };
        let mut labels = Vec::new();
        let bytes: Vec<char> = context.chars().collect();
        for (i, c) in bytes.iter().enumerate() {
            if c.is_ascii_uppercase()
                && bytes.get(i + 1) == Some(&':')
                && (i == 0 || bytes[i - 1].is_whitespace())
            {
                labels.push(*c);
            }
        }
        labels
    }

    /// The option text behind a choice letter, e.g. `option_text('B')`.
    pub fn option_text(&self, label: char) -> Option<String> {
        let context = self.context.as_ref()?;
        let labels = self.option_labels();
        let idx = labels.iter().position(|l| *l == label)?;
        let start_pat = format!("{label}:");
        let start = context.find(&start_pat)? + start_pat.len();
        let end = labels
            .get(idx + 1)
            .and_then(|next| context[start..].find(&format!("{next}:")).map(|p| start + p))
            .unwrap_or(context.len());
        Some(context[start..end].trim().to_string())
    }

    /// The answer as grounded text: option body for multiple choice,
    /// the literal answer otherwise.
    pub fn answer_text(&self) -> String {
        if let Some(label) = self.answer.trim().chars().next() {
            if self.context.is_some() && self.answer.trim().len() == 1 {
                if let Some(text) = self.option_text(label) {
                    return text;
                }
            }
        }
        self.answer.trim().to_string()
    }

    /// Sampling weight: surprise times the verification multiplier
    /// (unverified samples weigh half), times any filter down-weighting.
    pub fn weight(&self) -> f64 {
        let base = f64::from(self.surprise.clamp(1, 10));
        let verification = if self.verified { 1.0 } else { 0.5 };
        base * verification * self.weight_multiplier
    }
}

/// Builder used by the generators.
pub(crate) fn new_sample(
    env_kind: EnvKind,
    kind: QaKind,
    scale: TemporalScale,
    question: String,
    context: Option<String>,
    answer: String,
    source_episodes: Vec<u64>,
) -> InstructionSample {
    let mut sample = InstructionSample {
        id: String::new(),
        env_kind,
        kind,
        temporal_scale: scale,
        question,
        context,
        answer,
        rationale: None,
        source_episodes,
        surprise: 5,
        surprise_defaulted: false,
        verified: false,
        ood: false,
        weight_multiplier: 1.0,
        verification: None,
        kinematic: None,
    };
    sample.assign_id();
    sample
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_pool_has_all_kinds_and_scales() {
        let pool = TemplatePool::builtin();
        assert!(!pool.is_empty());
        for kind in QaKind::ALL {
            assert!(
                pool.templates.values().any(|t| t.kind == kind),
                "missing kind {kind:?}"
            );
        }
        assert!(pool.templates.values().any(|t| t.temporal_scale == TemporalScale::Step));
        assert!(pool.templates.values().any(|t| t.temporal_scale == TemporalScale::Plan));
        assert!(pool.templates.values().any(|t| t.env_kind == EnvKind::Driving));
    }

    #[test]
    fn option_parsing() {
        let mut s = new_sample(
            EnvKind::AgentWorld,
            QaKind::MultipleChoice,
            TemporalScale::Step,
            "q".into(),
            Some("A: Blue Crystal B: Red Crystal C: Health Potion".into()),
            "A".into(),
            vec![],
        );
        assert_eq!(s.option_labels(), vec!['A', 'B', 'C']);
        assert_eq!(s.option_text('B').as_deref(), Some("Red Crystal"));
        assert_eq!(s.answer_text(), "Blue Crystal");
        s.answer = "C".into();
        assert_eq!(s.answer_text(), "Health Potion");
    }

    #[test]
    fn ids_are_content_derived() {
        let a = new_sample(
            EnvKind::AgentWorld,
            QaKind::EpisodicMemory,
            TemporalScale::Step,
            "Where is the altar?".into(),
            None,
            "(0, 4)".into(),
            vec![1],
        );
        let b = new_sample(
            EnvKind::AgentWorld,
            QaKind::EpisodicMemory,
            TemporalScale::Step,
            "Where is the altar?".into(),
            None,
            "(0, 4)".into(),
            vec![2],
        );
        assert_eq!(a.id, b.id);
        let c = new_sample(
            EnvKind::AgentWorld,
            QaKind::EpisodicMemory,
            TemporalScale::Step,
            "Where is the altar?".into(),
            None,
            "(1, 4)".into(),
            vec![1],
        );
        assert_ne!(a.id, c.id);
    }

    #[test]
    fn weights_follow_surprise_and_verification() {
        let mut s = new_sample(
            EnvKind::AgentWorld,
            QaKind::MultipleChoice,
            TemporalScale::Step,
            "q".into(),
            None,
            "a".into(),
            vec![],
        );
        assert_eq!(s.weight(), 2.5); // surprise 5, unverified
        s.verified = true;
        assert_eq!(s.weight(), 5.0);
        s.surprise = 10;
        s.weight_multiplier = 0.5;
        assert_eq!(s.weight(), 5.0);
    }
}
