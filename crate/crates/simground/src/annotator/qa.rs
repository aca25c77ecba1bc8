//! Question generation from stored episodes: mechanical slot-filled kinds
//! with engine-verified answers, plus annotator-drafted kinds.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use std::sync::OnceLock;

use agent_world::{resolve_combat, Tile};
use llm_gateway::{ChatMessage, CompletionRequest, Gateway};

use crate::agent_loop::EpisodeRecord;
use crate::seeds::derive_seed;
use crate::store::embed::kinematic_features;
use crate::store::ExperienceStore;
use crate::EnvKind;

use super::verify::{
    self, entity_visits, replay_scene, replay_world, VerificationSpec,
};
use super::{
    new_sample, AnnotateError, InstructionSample, QaKind, SeedTemplate, TemplateGrounding,
};

/// Generate samples for one template over a batch of episode records.
/// Records that cannot fill the template's slots are skipped; hard errors
/// (store corruption, gateway trouble on drafted kinds) propagate.
pub fn generate_qa(
    records: &[EpisodeRecord],
    template: &SeedTemplate,
    annotator: Option<(&Gateway, &str)>,
    store: &ExperienceStore,
    run_seed: u64,
) -> Result<Vec<InstructionSample>, AnnotateError> {
    let mut out = Vec::new();
    for record in records {
        if record.env_kind != template.env_kind {
            continue;
        }
        let sample = generate_for_record(record, template, annotator, store, run_seed);
        match sample {
            Ok(Some(s)) => out.push(s),
            Ok(None) | Err(AnnotateError::SlotResolution(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn record_seed(run_seed: u64, record: &EpisodeRecord, template: &SeedTemplate) -> u64 {
    derive_seed(
        run_seed,
        &format!("qa-{}-{}", template.id, record.id.unwrap_or(u64::MAX)),
    )
}

pub fn generate_for_record(
    record: &EpisodeRecord,
    template: &SeedTemplate,
    annotator: Option<(&Gateway, &str)>,
    store: &ExperienceStore,
    run_seed: u64,
) -> Result<Option<InstructionSample>, AnnotateError> {
    let seed = record_seed(run_seed, record, template);
    let mut sample = match template.grounding {
        TemplateGrounding::EntityPosition => episodic_entity(record, template, seed)?,
        TemplateGrounding::LastLane => last_lane(record, template)?,
        TemplateGrounding::CombatDamage => combat_damage(record, template, seed)?,
        TemplateGrounding::Reachability => reachability(record, template, seed)?,
        TemplateGrounding::Counterfactual => {
            super::counterfactual::generate_counterfactual(record, template, seed)?
        }
        TemplateGrounding::Annotator => drafted(record, template, annotator)?,
        TemplateGrounding::PlanComparison => {
            // Plan comparisons are store-level, not per-record; see
            // `plan::generate_plan_comparison`.
            return Ok(None);
        }
    };
    if let Some(sample) = sample.as_mut() {
        sample.ood = is_ood(record);
        if record.env_kind == EnvKind::Driving {
            if let Ok(scene) = replay_scene(record) {
                sample.kinematic = Some(kinematic_features(&scene));
            }
        }
        if sample.verification.is_some() {
            sample.verified = verify::verify_against_sim(sample, store);
        }
    }
    Ok(sample)
}

fn is_ood(record: &EpisodeRecord) -> bool {
    match &record.env_spec {
        crate::envbridge::EnvSpec::Driving { spec } => spec.template.is_ood(),
        crate::envbridge::EnvSpec::AgentWorld { .. } => false,
    }
}

// ---------------------------------------------------------------------------
// Mechanical generators
// ---------------------------------------------------------------------------

fn episodic_entity(
    record: &EpisodeRecord,
    template: &SeedTemplate,
    seed: u64,
) -> Result<Option<InstructionSample>, AnnotateError> {
    let visits = entity_visits(record);
    if visits.is_empty() {
        return Ok(None);
    }
    let mut keys: Vec<&str> = visits.iter().map(|v| v.key.as_str()).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = keys[rng.gen_range(0..keys.len())].to_string();
    let last = visits.iter().filter(|v| v.key == key).next_back().expect("key came from visits");
    let question = template.skeleton.replace("{entity}", &last.display);
    let answer = last.position.clone();
    let mut sample = new_sample(
        record.env_kind,
        template.kind,
        template.temporal_scale,
        question,
        None,
        answer,
        vec![record.id.unwrap_or_default()],
    );
    sample.verification = Some(VerificationSpec::EntityPosition {
        episode: record.id.unwrap_or_default(),
        entity: key,
    });
    Ok(Some(sample))
}

fn last_lane(
    record: &EpisodeRecord,
    template: &SeedTemplate,
) -> Result<Option<InstructionSample>, AnnotateError> {
    if record.steps.is_empty() {
        return Ok(None);
    }
    let scene = replay_scene(record)?;
    let Some(ego) = scene.ego() else { return Ok(None) };
    let mut sample = new_sample(
        record.env_kind,
        template.kind,
        template.temporal_scale,
        template.skeleton.clone(),
        None,
        ego.lane_id.to_string(),
        vec![record.id.unwrap_or_default()],
    );
    sample.verification = Some(VerificationSpec::LastLane {
        episode: record.id.unwrap_or_default(),
    });
    Ok(Some(sample))
}

fn combat_damage(
    record: &EpisodeRecord,
    template: &SeedTemplate,
    seed: u64,
) -> Result<Option<InstructionSample>, AnnotateError> {
    let (state, _) = replay_world(record)?;
    let mut candidates: Vec<(u32, u32)> = state
        .monsters_on_floor(state.current_floor)
        .filter_map(|(id, m)| {
            let out = resolve_combat(&state.player_stats, &m.stats, &m.kind, &state.rules.combat);
            out.feasible.then_some((id.0, out.damage_taken))
        })
        .collect();
    if candidates.is_empty() {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.sort_unstable();
    let (monster_id, damage) = candidates[rng.gen_range(0..candidates.len())];

    let (d1, d2) = distractors(damage, &mut rng);
    let mut options = [damage, d1, d2];
    options.shuffle(&mut rng);
    let answer_idx = options.iter().position(|o| *o == damage).expect("damage is present");
    let labels = ['A', 'B', 'C'];
    let context = options
        .iter()
        .zip(labels)
        .map(|(o, l)| format!("{l}: {o}"))
        .collect::<Vec<_>>()
        .join(" ");

    let question = template
        .skeleton
        .replace("{monster}", &format!("M{}", monster_id + 1));
    let mut sample = new_sample(
        record.env_kind,
        template.kind,
        template.temporal_scale,
        question,
        Some(context),
        labels[answer_idx].to_string(),
        vec![record.id.unwrap_or_default()],
    );
    sample.verification = Some(VerificationSpec::CombatDamage {
        episode: record.id.unwrap_or_default(),
        monster: monster_id,
    });
    Ok(Some(sample))
}

/// Two distinct wrong damage values near the true one.
fn distractors(damage: u32, rng: &mut ChaCha8Rng) -> (u32, u32) {
    let bump = rng.gen_range(2..=6);
    let d1 = damage + bump;
    let d2 = if damage > bump + 1 { damage - bump - 1 } else { damage + bump * 2 + 1 };
    (d1, d2)
}

fn reachability(
    record: &EpisodeRecord,
    template: &SeedTemplate,
    seed: u64,
) -> Result<Option<InstructionSample>, AnnotateError> {
    let (state, task) = replay_world(record)?;
    let mut targets: Vec<(agent_world::Pos, String)> = state
        .grid()
        .iter()
        .filter_map(|(pos, tile)| {
            let name = match tile {
                Tile::Key { color } => format!("{} key", color.name().to_lowercase()),
                Tile::HealthPotion { .. } => "health potion".to_string(),
                Tile::Crystal { .. } => "crystal".to_string(),
                Tile::Item { kind } => kind.name().to_lowercase(),
                Tile::Stairs { .. } => "stairs".to_string(),
                _ => return None,
            };
            Some((pos, name))
        })
        .collect();
    if targets.is_empty() {
        return Ok(None);
    }
    targets.sort_by_key(|(pos, _)| (pos.row, pos.col));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pos, name) = targets[rng.gen_range(0..targets.len())].clone();

    let goal_task = agent_world::TaskSpec {
        id: task.id.clone(),
        goal: agent_world::Goal::ReachTile { floor: state.current_floor, pos },
        description: String::new(),
    };
    let reachable = match agent_world::validate_solvable(
        &state,
        &goal_task,
        &agent_world::SolveLimits::default(),
    ) {
        Ok(result) => result.is_some(),
        Err(_) => return Ok(None),
    };

    let question = template
        .skeleton
        .replace("{entity}", &name)
        .replace("{pos}", &pos.to_string());
    let mut sample = new_sample(
        record.env_kind,
        template.kind,
        template.temporal_scale,
        question,
        Some("A: Yes B: No".to_string()),
        if reachable { "A" } else { "B" }.to_string(),
        vec![record.id.unwrap_or_default()],
    );
    sample.verification = Some(VerificationSpec::Reachability {
        episode: record.id.unwrap_or_default(),
        floor: state.current_floor,
        row: pos.row,
        col: pos.col,
    });
    Ok(Some(sample))
}

// ---------------------------------------------------------------------------
// Annotator-drafted generators
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draft {
    pub question: String,
    pub context: Option<String>,
    pub answer: String,
    pub rationale: Option<String>,
}

fn draft_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?s)Question:\s*(?P<q>.+?)\s*(?:Context:\s*(?P<c>.+?)\s*)?Answer:\s*(?P<a>[^\n]+)\s*(?:Rationale:\s*(?P<r>.+?)\s*)?$",
        )
        .expect("valid regex")
    })
}

/// Parse a drafted block of the form
/// `Question: ...\nContext: ...\nAnswer: ...\n[Rationale: ...]`.
pub fn parse_draft(text: &str) -> Option<Draft> {
    let caps = draft_regex().captures(text.trim())?;
    Some(Draft {
        question: caps.name("q")?.as_str().trim().to_string(),
        context: caps.name("c").map(|m| m.as_str().trim().to_string()),
        answer: caps.name("a")?.as_str().trim().to_string(),
        rationale: caps.name("r").map(|m| m.as_str().trim().to_string()),
    })
}

fn drafted(
    record: &EpisodeRecord,
    template: &SeedTemplate,
    annotator: Option<(&Gateway, &str)>,
) -> Result<Option<InstructionSample>, AnnotateError> {
    let Some((gateway, model)) = annotator else {
        return Ok(None);
    };
    let wants_rationale = template.kind == QaKind::Rationale;
    let format_hint = if wants_rationale {
        "Reply exactly as:\nQuestion: ...\nContext: A: ... B: ... C: ...\nAnswer: <letter or literal>\nRationale: ..."
    } else {
        "Reply exactly as:\nQuestion: ...\nContext: A: ... B: ... C: ...\nAnswer: <letter>"
    };
    let prompt = format!(
        "[qa-draft kind={} env={}]\n{}\n\n{format_hint}\n\nEpisode:\n{}",
        template.kind.name(),
        template.env_kind.name(),
        template.skeleton,
        record.digest(12)
    );
    let request = CompletionRequest::new(model, vec![ChatMessage::user(prompt)])
        .with_temperature(0.7);
    let replies = gateway.complete(&request)?;
    let Some(draft) = parse_draft(&replies[0]) else {
        return Err(AnnotateError::DraftParse(replies[0].chars().take(120).collect()));
    };
    if wants_rationale && draft.rationale.is_none() {
        return Err(AnnotateError::DraftParse("rationale kind without a rationale".into()));
    }
    let mut sample = new_sample(
        record.env_kind,
        template.kind,
        template.temporal_scale,
        draft.question,
        draft.context,
        draft.answer,
        vec![record.id.unwrap_or_default()],
    );
    sample.rationale = draft.rationale;
    // Free drafts have no registered checker; they stay unverified and
    // down-weighted.
    Ok(Some(sample))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draft_block_parses_with_and_without_rationale() {
        let d = parse_draft(
            "Question: Which item should you prioritize collecting to increase your defense strength?\nContext: A: Blue Crystal B: Red Crystal C: Health Potion\nAnswer: A",
        )
        .unwrap();
        assert!(d.question.starts_with("Which item"));
        assert_eq!(d.answer, "A");
        assert!(d.rationale.is_none());

        let d = parse_draft(
            "Question: Why yield?\nContext: A: Safety B: Speed\nAnswer: A\nRationale: Yielding avoids the collision.",
        )
        .unwrap();
        assert_eq!(d.rationale.as_deref(), Some("Yielding avoids the collision."));
    }

    #[test]
    fn draft_without_context_parses() {
        let d = parse_draft("Question: What's the last lane you are in? Answer the lane id\nAnswer: 2").unwrap();
        assert_eq!(d.answer, "2");
        assert!(d.context.is_none());
    }

    #[test]
    fn garbage_draft_is_rejected() {
        assert!(parse_draft("I have no idea what to write").is_none());
    }

    #[test]
    fn distractors_are_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for damage in [0u32, 1, 5, 56, 100] {
            let (a, b) = distractors(damage, &mut rng);
            assert_ne!(a, damage);
            assert_ne!(b, damage);
            assert_ne!(a, b);
        }
    }
}
