//! Template-pool bootstrapping: sample exemplars, prompt the annotator for
//! new templates, keep the novel survivors.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use llm_gateway::{ChatMessage, CompletionRequest, Gateway, GatewayError};

use super::{AnnotateError, Provenance, SeedTemplate, TemplateGrounding, TemplatePool};

/// Exemplars shown per bootstrap round.
pub const EXEMPLARS_PER_ROUND: usize = 3;

#[derive(Debug, serde::Deserialize)]
struct TemplateDraft {
    kind: super::QaKind,
    temporal_scale: super::TemporalScale,
    env_kind: crate::EnvKind,
    skeleton: String,
}

/// Grow the pool for `rounds` rounds of `per_round` candidates each.
/// Malformed and duplicate candidates are dropped; a gateway exhaustion
/// aborts the round and leaves the pool unchanged for it.
pub fn bootstrap_templates(
    mut pool: TemplatePool,
    annotator: &Gateway,
    model: &str,
    rounds: u32,
    per_round: usize,
    seed: u64,
) -> Result<TemplatePool, AnnotateError> {
    for round in 1..=rounds {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seeds::derive_seed(seed, &format!("bootstrap-{round}")));
        let ids: Vec<String> = pool.templates.keys().cloned().collect();
        if ids.is_empty() {
            break;
        }
        let mut exemplars = Vec::new();
        for _ in 0..EXEMPLARS_PER_ROUND.min(ids.len()) {
            let id = &ids[rng.gen_range(0..ids.len())];
            exemplars.push(pool.templates[id].clone());
        }
        let exemplar_json: Vec<String> = exemplars
            .iter()
            .map(|t| {
                serde_json::json!({
                    "kind": t.kind, "temporal_scale": t.temporal_scale,
                    "env_kind": t.env_kind, "skeleton": t.skeleton,
                })
                .to_string()
            })
            .collect();
        let prompt = format!(
            "[template-request]\nHere are {} existing question templates:\n{}\n\n\
             Produce {per_round} NEW templates as JSON lines with fields kind, temporal_scale, env_kind, skeleton. One JSON object per line.",
            exemplars.len(),
            exemplar_json.join("\n")
        );
        let request =
            CompletionRequest::new(model, vec![ChatMessage::user(prompt)]).with_temperature(0.9);
        let replies = match annotator.complete(&request) {
            Ok(r) => r,
            Err(GatewayError::GatewayExhausted { .. }) => continue,
            Err(e) => return Err(e.into()),
        };

        let mut admitted = 0usize;
        for line in replies[0].lines() {
            let line = line.trim();
            if line.is_empty() || admitted >= per_round {
                continue;
            }
            let Ok(draft) = serde_json::from_str::<TemplateDraft>(line) else {
                continue;
            };
            let normalized = normalize_skeleton(&draft.skeleton);
            let duplicate = pool
                .templates
                .values()
                .any(|t| normalize_skeleton(&t.skeleton) == normalized);
            if duplicate || draft.skeleton.trim().is_empty() {
                continue;
            }
            let id = format!("boot-r{round}-{admitted}");
            let template = SeedTemplate {
                id,
                kind: draft.kind,
                temporal_scale: draft.temporal_scale,
                env_kind: draft.env_kind,
                grounding: TemplateGrounding::Annotator,
                skeleton: draft.skeleton,
                provenance: Provenance::Bootstrapped { round },
            };
            if pool.insert(template) {
                admitted += 1;
            }
        }
    }
    Ok(pool)
}

fn normalize_skeleton(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}
