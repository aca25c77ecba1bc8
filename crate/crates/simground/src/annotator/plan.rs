//! Plan-comparison questions grounded by retrieved episode outcomes.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use llm_gateway::{ChatMessage, CompletionRequest, Gateway};

use crate::agent_loop::EpisodeOutcome;
use crate::store::{ExperienceStore, RetrievalFilter};
use crate::EnvKind;

use super::verify::VerificationSpec;
use super::{new_sample, AnnotateError, InstructionSample, SeedTemplate};

/// Retrieve episodes for `query` and compose a two-plan comparison.
///
/// The answer is grounded by outcomes: a success-vs-failure pair makes a
/// verified sample; two successes fall back to annotator judgment and stay
/// unverified. Returns `None` (the no-sample marker) when no contrasting
/// pair exists or `k < 2`.
pub fn generate_plan_comparison(
    query: &str,
    env_kind: EnvKind,
    store: &ExperienceStore,
    template: &SeedTemplate,
    annotator: Option<(&Gateway, &str)>,
    k: usize,
    seed: u64,
) -> Result<Option<InstructionSample>, AnnotateError> {
    if k < 2 {
        return Ok(None);
    }
    let hits = store.retrieve(query, k, &RetrievalFilter::env(env_kind))?;
    let mut successes = Vec::new();
    let mut failures = Vec::new();
    for (id, _) in &hits {
        let record = store.get(*id)?;
        let Some(tag) = record.tag.clone() else { continue };
        match record.outcome {
            EpisodeOutcome::Success => successes.push((*id, tag)),
            _ => failures.push((*id, tag)),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let Some((s_id, s_tag)) = successes.first() {
        if let Some((f_id, f_tag)) = failures.iter().find(|(_, tag)| tag != s_tag) {
            // Seeded option order so the answer letter is not always A.
            let success_first = rng.gen_bool(0.5);
            let (plan_a, plan_b) = if success_first { (s_tag, f_tag) } else { (f_tag, s_tag) };
            let question = template
                .skeleton
                .replace("{plan_a}", plan_a)
                .replace("{plan_b}", plan_b);
            let context = format!("A: {plan_a} B: {plan_b}");
            let answer = if success_first { "A" } else { "B" };
            let mut sample = new_sample(
                env_kind,
                template.kind,
                template.temporal_scale,
                question,
                Some(context),
                answer.to_string(),
                vec![*s_id, *f_id],
            );
            sample.verification = Some(VerificationSpec::PlanOutcome {
                success_episode: *s_id,
                failure_episode: *f_id,
            });
            sample.verified = super::verify::verify_against_sim(&sample, store);
            return Ok(Some(sample));
        }
    }

    // No outcome contrast: two distinct successful plans can still be
    // compared, but only by annotator judgment.
    if successes.len() >= 2 {
        if let Some((b_id, b_tag)) = successes[1..].iter().find(|(_, t)| t != &successes[0].1) {
            let (a_id, a_tag) = &successes[0];
            let Some((gateway, model)) = annotator else { return Ok(None) };
            let question = template
                .skeleton
                .replace("{plan_a}", a_tag)
                .replace("{plan_b}", b_tag);
            let prompt = format!(
                "[plan-compare-request]\n{question}\nContext: A: {a_tag} B: {b_tag}\nReply with one letter."
            );
            let request =
                CompletionRequest::new(model, vec![ChatMessage::user(prompt)]).with_temperature(0.0);
            let replies = gateway.complete(&request)?;
            let answer = replies[0]
                .trim()
                .chars()
                .find(|c| matches!(c, 'A' | 'B'))
                .unwrap_or('A')
                .to_string();
            let mut sample = new_sample(
                env_kind,
                template.kind,
                template.temporal_scale,
                question,
                Some(format!("A: {a_tag} B: {b_tag}")),
                answer,
                vec![*a_id, *b_id],
            );
            sample.verified = false;
            return Ok(Some(sample));
        }
    }
    Ok(None)
}
