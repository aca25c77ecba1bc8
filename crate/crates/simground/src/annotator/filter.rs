//! Two-stage novelty filtering plus the driving in-distribution proxy.
//!
//! Stage one is a deterministic embedding near-duplicate check against the
//! kept set. Stage two asks the annotator to judge novelty by majority
//! vote; when the gateway is down the stage is skipped with a flag and
//! stage one alone decides. Driving samples additionally pass a kinematic
//! k-NN distance check: samples too close to already-kept scenes are easy
//! (in-distribution) and get down-weighted rather than dropped.

use serde::{Deserialize, Serialize};

use llm_gateway::{ChatMessage, Gateway, GatewayError};

use crate::agent_loop::{self, LoopError};
use crate::store::embed::{cosine, Embedder, HashingEmbedder};
use crate::EnvKind;

use super::InstructionSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoveltyThresholds {
    /// Drop when max cosine similarity to a kept sample exceeds this.
    pub s_max: f32,
    /// Kinematic distance below which a driving sample counts as easy.
    pub d_min: f32,
    /// Self-consistency votes for the LLM novelty judgment.
    pub vote_n: u32,
    /// Weight multiplier applied to easy driving samples.
    pub easy_downweight: f64,
}

impl Default for NoveltyThresholds {
    fn default() -> Self {
        Self {
            s_max: 0.95,
            d_min: 0.02,
            vote_n: 5,
            easy_downweight: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NearDuplicate,
    LlmJudged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "decision")]
pub enum FilterDecision {
    Keep,
    Drop { reason: DropReason },
}

/// Serial admission gate: all decisions flow through one filter instance,
/// so the kept set never holds a near-duplicate pair.
pub struct NoveltyFilter {
    thresholds: NoveltyThresholds,
    embedder: HashingEmbedder,
    kept_embeddings: Vec<Vec<f32>>,
    kept_digests: Vec<String>,
    kinematic_kept: Vec<Vec<f32>>,
    /// Stage-two skips due to gateway failure.
    pub llm_stage_skipped: u64,
}

impl NoveltyFilter {
    pub fn new(thresholds: NoveltyThresholds) -> Self {
        Self {
            thresholds,
            embedder: HashingEmbedder::default(),
            kept_embeddings: Vec::new(),
            kept_digests: Vec::new(),
            kinematic_kept: Vec::new(),
            llm_stage_skipped: 0,
        }
    }

    fn sample_text(sample: &InstructionSample) -> String {
        format!("{} {}", sample.question, sample.answer_text())
    }

    /// Decide one sample, mutating its weight multiplier when the
    /// in-distribution proxy marks it easy. A kept sample enters the
    /// dedup reference set.
    pub fn decide(
        &mut self,
        sample: &mut InstructionSample,
        annotator: Option<(&Gateway, &str)>,
    ) -> FilterDecision {
        let text = Self::sample_text(sample);
        let embedding = match self.embedder.embed(&text) {
            Ok(v) => v,
            // A sample with no hashable text cannot be deduplicated; treat
            // it as novel and let schema validation judge it later.
            Err(_) => Vec::new(),
        };

        if !embedding.is_empty() {
            let max_sim = self
                .kept_embeddings
                .iter()
                .map(|kept| cosine(&embedding, kept))
                .fold(f32::MIN, f32::max);
            if max_sim > self.thresholds.s_max {
                return FilterDecision::Drop { reason: DropReason::NearDuplicate };
            }
        }

        if let Some((gateway, model)) = annotator {
            match self.llm_vote(sample, gateway, model) {
                Ok(false) => return FilterDecision::Drop { reason: DropReason::LlmJudged },
                Ok(true) => {}
                Err(_) => self.llm_stage_skipped += 1,
            }
        }

        if sample.env_kind == EnvKind::Driving {
            if let Some(kin) = &sample.kinematic {
                let min_dist = self
                    .kinematic_kept
                    .iter()
                    .map(|kept| 1.0 - cosine(kin, kept))
                    .fold(f32::MAX, f32::min);
                if !self.kinematic_kept.is_empty() && min_dist <= self.thresholds.d_min {
                    sample.weight_multiplier *= self.thresholds.easy_downweight;
                }
                self.kinematic_kept.push(kin.clone());
            }
        }

        if !embedding.is_empty() {
            self.kept_embeddings.push(embedding);
            self.kept_digests.push(text.chars().take(100).collect());
        }
        FilterDecision::Keep
    }

    /// Chain-of-thought novelty vote; majority "duplicate" rejects.
    fn llm_vote(
        &self,
        sample: &InstructionSample,
        gateway: &Gateway,
        model: &str,
    ) -> Result<bool, LoopError> {
        let known: Vec<&str> = self.kept_digests.iter().rev().take(8).map(|s| s.as_str()).collect();
        let prompt = format!(
            "[novelty-vote]\nThink step by step: is the following sample novel relative to the known ones?\n\
             New: {}\nKnown:\n{}\nEnd your reply with exactly `novel` or `duplicate`.",
            Self::sample_text(sample),
            known.join("\n"),
        );
        let result = agent_loop::self_consistency(
            vec![ChatMessage::user(prompt)],
            self.thresholds.vote_n,
            gateway,
            model,
            0.7,
            &|reply| {
                let lower = reply.to_lowercase();
                // Last verdict word wins, mirroring chain-of-thought output.
                let novel = lower.rfind("novel");
                let dup = lower.rfind("duplicate");
                match (novel, dup) {
                    (Some(n), Some(d)) => Some(if n > d { "novel" } else { "duplicate" }.into()),
                    (Some(_), None) => Some("novel".into()),
                    (None, Some(_)) => Some("duplicate".into()),
                    (None, None) => None,
                }
            },
        );
        match result {
            Ok(consensus) => Ok(consensus.answer == "novel"),
            Err(LoopError::Gateway(GatewayError::GatewayExhausted { .. })) => {
                Err(LoopError::Gateway(GatewayError::GatewayExhausted {
                    attempts: 0,
                    last_error: "novelty vote skipped".into(),
                }))
            }
            Err(e) => Err(e),
        }
    }

    pub fn kept_count(&self) -> usize {
        self.kept_embeddings.len()
    }
}
