//! Counterfactual questions: replay the episode to a decision point, take
//! the road not taken, and let the engine say what happens.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent_loop::EpisodeRecord;
use crate::textio::{render_action, ParsedAction};

use super::verify::{counterfactual_outcome, replay_env, VerificationSpec};
use super::{new_sample, AnnotateError, InstructionSample, SeedTemplate};

/// Pick a decision step with at least two legal actions, propose an
/// untaken one, and phrase the engine-computed divergence. `None` when the
/// episode has no usable decision point.
pub fn generate_counterfactual(
    record: &EpisodeRecord,
    template: &SeedTemplate,
    seed: u64,
) -> Result<Option<InstructionSample>, AnnotateError> {
    if record.steps.is_empty() {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Try a handful of seeded step positions before giving up.
    let mut step_order: Vec<usize> = (0..record.steps.len()).collect();
    for i in (1..step_order.len()).rev() {
        step_order.swap(i, rng.gen_range(0..=i));
    }

    for step_idx in step_order.into_iter().take(8) {
        let env = match replay_env(record, Some(step_idx)) {
            Ok(env) => env,
            Err(AnnotateError::ReplayMismatch(m)) => {
                return Err(AnnotateError::ReplayMismatch(m));
            }
            Err(e) => return Err(e),
        };
        let taken = &record.steps[step_idx].action;
        let legal = env.legal_actions();
        let alternatives: Vec<ParsedAction> =
            legal.into_iter().filter(|a| a != taken).collect();
        if alternatives.is_empty() {
            continue;
        }
        let alternative = alternatives[rng.gen_range(0..alternatives.len())].clone();
        let outcome = counterfactual_outcome(record, step_idx, &alternative)?;

        let question = template
            .skeleton
            .replace("{step}", &step_idx.to_string())
            .replace("{taken}", &render_action(taken))
            .replace("{alternative}", &render_action(&alternative));
        let mut sample = new_sample(
            record.env_kind,
            template.kind,
            template.temporal_scale,
            question,
            None,
            outcome,
            vec![record.id.unwrap_or_default()],
        );
        sample.verification = Some(VerificationSpec::Counterfactual {
            episode: record.id.unwrap_or_default(),
            step: step_idx,
            alternative,
        });
        return Ok(Some(sample));
    }
    Ok(None)
}
