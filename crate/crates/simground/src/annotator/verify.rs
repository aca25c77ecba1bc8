//! Simulator-backed answer verification.
//!
//! Every registered checker rebuilds the environment from the episode's
//! spec, replays the recorded actions (comparing events step by step, so a
//! corrupted store surfaces as a mismatch) and recomputes the ground truth
//! from the engine. A sample class without a registered checker is
//! unverifiable and never passes.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use agent_world::{resolve_combat, Goal, MonsterId, Pos, SolveLimits, TaskSpec, WorldState};
use urban_driving::TrafficScene;

use crate::agent_loop::{EpisodeOutcome, EpisodeRecord};
use crate::envbridge::EnvSpec;
use crate::store::ExperienceStore;
use crate::textio::ParsedAction;
use crate::EnvKind;

use super::{AnnotateError, InstructionSample};

/// Machine-checkable claim classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum VerificationSpec {
    /// The last recorded position of an entity kind in an episode.
    EntityPosition { episode: u64, entity: String },
    /// The lane the ego occupied when the episode ended.
    LastLane { episode: u64 },
    /// Total combat damage against a monster at the episode's final state.
    CombatDamage { episode: u64, monster: u32 },
    /// Solver-checked reachability of a tile from the final state.
    Reachability { episode: u64, floor: usize, row: usize, col: usize },
    /// Outcome of replaying an untaken action at a decision step.
    Counterfactual { episode: u64, step: usize, alternative: ParsedAction },
    /// Outcome contrast between two stored episodes.
    PlanOutcome { success_episode: u64, failure_episode: u64 },
}

/// Recompute the ground truth for a sample and compare it with the
/// sample's answer. Returns false for unverifiable samples and for any
/// replay problem; never guesses.
pub fn verify_against_sim(sample: &InstructionSample, store: &ExperienceStore) -> bool {
    match recompute_truth(sample, store) {
        Ok(Some(truth)) => normalized(&sample.answer_text()) == normalized(&truth),
        _ => false,
    }
}

fn normalized(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// The engine-recomputed canonical answer, `None` when unverifiable.
pub fn recompute_truth(
    sample: &InstructionSample,
    store: &ExperienceStore,
) -> Result<Option<String>, AnnotateError> {
    let Some(spec) = &sample.verification else {
        return Ok(None);
    };
    let truth = match spec {
        VerificationSpec::EntityPosition { episode, entity } => {
            let record = store.get(*episode)?;
            replay_world(&record)?;
            let visits = entity_visits(&record);
            visits
                .into_iter()
                .filter(|v| v.key == *entity)
                .next_back()
                .map(|v| v.position)
        }
        VerificationSpec::LastLane { episode } => {
            let record = store.get(*episode)?;
            let scene = replay_scene(&record)?;
            scene.ego().map(|e| e.lane_id.to_string())
        }
        VerificationSpec::CombatDamage { episode, monster } => {
            let record = store.get(*episode)?;
            let (state, _) = replay_world(&record)?;
            state.monsters.get(&MonsterId(*monster)).map(|m| {
                let out = resolve_combat(&state.player_stats, &m.stats, &m.kind, &state.rules.combat);
                if out.feasible {
                    out.damage_taken.to_string()
                } else {
                    "infeasible".to_string()
                }
            })
        }
        VerificationSpec::Reachability { episode, floor, row, col } => {
            let record = store.get(*episode)?;
            let (state, task) = replay_world(&record)?;
            let goal_task = TaskSpec {
                id: task.id.clone(),
                goal: Goal::ReachTile { floor: *floor, pos: Pos::new(*row, *col) },
                description: String::new(),
            };
            match agent_world::validate_solvable(&state, &goal_task, &SolveLimits::default()) {
                Ok(Some(_)) => Some("Yes".to_string()),
                Ok(None) => Some("No".to_string()),
                Err(_) => None,
            }
        }
        VerificationSpec::Counterfactual { episode, step, alternative } => {
            let record = store.get(*episode)?;
            Some(counterfactual_outcome(&record, *step, alternative)?)
        }
        VerificationSpec::PlanOutcome { success_episode, failure_episode } => {
            let success = store.get(*success_episode)?;
            let failure = store.get(*failure_episode)?;
            // Replaying both confirms the stored outcomes.
            let s_ok = replayed_outcome(&success)? == EpisodeOutcome::Success;
            let f_bad = replayed_outcome(&failure)? != EpisodeOutcome::Success;
            if s_ok && f_bad {
                success.tag.clone()
            } else {
                None
            }
        }
    };
    Ok(truth)
}

/// Route an action the way the episode loop does: informational tool calls
/// leave the environment untouched.
pub fn apply_routed(
    env: &mut dyn crate::envbridge::Environment,
    action: &ParsedAction,
) -> Vec<Value> {
    if let ParsedAction::Skill { call } = action {
        let tools = env.tools();
        if tools.iter().any(|t| t.name == call.name) {
            return Vec::new();
        }
    }
    env.apply(action)
}

/// Replay all recorded actions through a rebuilt environment, checking the
/// event log step by step.
pub fn replay_env(
    record: &EpisodeRecord,
    upto: Option<usize>,
) -> Result<Box<dyn crate::envbridge::Environment>, AnnotateError> {
    let mut env = crate::envbridge::build_env(&record.env_spec)?;
    let end = upto.unwrap_or(record.steps.len()).min(record.steps.len());
    for (i, step) in record.steps[..end].iter().enumerate() {
        let events = apply_routed(env.as_mut(), &step.action);
        if events != step.events {
            return Err(AnnotateError::ReplayMismatch(format!(
                "step {i}: recorded {} events, replay produced {}",
                step.events.len(),
                events.len()
            )));
        }
    }
    Ok(env)
}

/// Replay an agent-world episode; returns the final state and its task.
pub fn replay_world(record: &EpisodeRecord) -> Result<(WorldState, TaskSpec), AnnotateError> {
    let EnvSpec::AgentWorld { config, seed } = &record.env_spec else {
        return Err(AnnotateError::SlotResolution("not an agent-world episode".into()));
    };
    let (mut state, task) = agent_world::generate_task(config, *seed)
        .map_err(crate::envbridge::EnvError::Generation)?;
    for (i, step) in record.steps.iter().enumerate() {
        let world_action = match &step.action {
            ParsedAction::World { action } => *action,
            _ => {
                if !step.events.is_empty() {
                    return Err(AnnotateError::ReplayMismatch(format!(
                        "step {i}: non-world action recorded events"
                    )));
                }
                continue;
            }
        };
        let (next, events, _) = agent_world::step_with_task(&state, &world_action, &task);
        let events_json: Vec<Value> = events
            .iter()
            .map(|e| serde_json::to_value(e).expect("event serializes"))
            .collect();
        if events_json != step.events {
            return Err(AnnotateError::ReplayMismatch(format!("step {i}: event log differs")));
        }
        state = next;
    }
    Ok((state, task))
}

/// Replay a driving episode; returns the final scene.
pub fn replay_scene(record: &EpisodeRecord) -> Result<TrafficScene, AnnotateError> {
    if record.env_kind != EnvKind::Driving {
        return Err(AnnotateError::SlotResolution("not a driving episode".into()));
    }
    let env = replay_env(record, None)?;
    let digest_before = env.state_digest();
    // Rebuild once more through the concrete type to hand the scene out.
    let EnvSpec::Driving { spec } = &record.env_spec else { unreachable!() };
    let scene = urban_driving::spawn_scenario(spec).map_err(crate::envbridge::EnvError::Spawn)?;
    let mut concrete = crate::envbridge::DrivingEnv::new(scene);
    for step in &record.steps {
        apply_routed(&mut concrete, &step.action);
    }
    debug_assert_eq!(
        crate::envbridge::Environment::state_digest(&concrete),
        digest_before
    );
    Ok(concrete.scene().clone())
}

/// Outcome of replaying the full episode.
pub fn replayed_outcome(record: &EpisodeRecord) -> Result<EpisodeOutcome, AnnotateError> {
    let env = replay_env(record, None)?;
    Ok(match env.status() {
        crate::envbridge::EnvStatus::Success => EpisodeOutcome::Success,
        crate::envbridge::EnvStatus::Failure => EpisodeOutcome::Failure,
        crate::envbridge::EnvStatus::Ongoing => EpisodeOutcome::Budget,
    })
}

/// Deterministic one-line outcome of taking `alternative` at `step` and
/// then following the recorded suffix.
pub fn counterfactual_outcome(
    record: &EpisodeRecord,
    step: usize,
    alternative: &ParsedAction,
) -> Result<String, AnnotateError> {
    let mut env = replay_env(record, Some(step))?;
    let alt_events = apply_routed(env.as_mut(), alternative);
    match record.env_kind {
        EnvKind::AgentWorld => Ok(summarize_world_step(&alt_events, env.status())),
        EnvKind::Driving => {
            // Continue with the recorded suffix after the divergence.
            for later in record.steps.iter().skip(step + 1) {
                if env.status() != crate::envbridge::EnvStatus::Ongoing {
                    break;
                }
                apply_routed(env.as_mut(), &later.action);
            }
            Ok(summarize_driving_end(env.as_ref()))
        }
    }
}

/// Canonical phrasing for the immediate effect of one world action.
pub fn summarize_world_step(events: &[Value], status: crate::envbridge::EnvStatus) -> String {
    use crate::envbridge::EnvStatus;
    let mut parts: Vec<String> = Vec::new();
    for e in events {
        let kind = e.get("event").and_then(|v| v.as_str()).unwrap_or("");
        match kind {
            "moved" => {
                if let Some(to) = e.get("to") {
                    parts.push(format!(
                        "you move to ({}, {})",
                        to.get("row").and_then(Value::as_u64).unwrap_or(0),
                        to.get("col").and_then(Value::as_u64).unwrap_or(0)
                    ));
                }
            }
            "illegal_move" => parts.push("the move is refused".to_string()),
            "collected_key" => parts.push(format!(
                "you collect a {} key",
                e.get("color").and_then(Value::as_str).unwrap_or("?")
            )),
            "collected_potion" => parts.push(format!(
                "you gain {} health",
                e.get("amount").and_then(Value::as_u64).unwrap_or(0)
            )),
            "collected_crystal" => parts.push(format!(
                "your {} rises by {}",
                e.get("stat").and_then(Value::as_str).unwrap_or("?"),
                e.get("amount").and_then(Value::as_u64).unwrap_or(0)
            )),
            "collected_item" => parts.push(format!(
                "you pick up the {}",
                e.get("kind").and_then(Value::as_str).unwrap_or("?")
            )),
            "door_opened" => parts.push("the door opens and consumes a key".to_string()),
            "fought" => {
                let damage = e.get("damage_taken").and_then(Value::as_u64).unwrap_or(0);
                let lethal = e.get("lethal").and_then(Value::as_bool).unwrap_or(false);
                let residual = e.get("residual_life").and_then(Value::as_i64).unwrap_or(0);
                if lethal {
                    parts.push(format!("the fight is lethal ({damage} damage)"));
                } else {
                    parts.push(format!(
                        "you win the fight taking {damage} damage (residual life {residual})"
                    ));
                }
            }
            "combat_infeasible" => parts.push("you cannot pierce that monster's defense".to_string()),
            "used_stairs" => parts.push(format!(
                "you take the stairs to floor {}",
                e.get("to_floor").and_then(Value::as_u64).unwrap_or(0) + 1
            )),
            "reached_exit" => parts.push("you reach the exit stairs".to_string()),
            "wing_flew" => parts.push("the wing carries you across the map".to_string()),
            "wing_blocked" => parts.push("the wing target is blocked".to_string()),
            "wall_broken" => parts.push("the wall crumbles".to_string()),
            "shovel_failed" | "trade_failed" | "no_orb_access" => {
                parts.push("the action is refused".to_string())
            }
            "traded" => parts.push(format!(
                "you buy a {} upgrade",
                e.get("stat").and_then(Value::as_str).unwrap_or("?")
            )),
            "entered_fixture" => parts.push(format!(
                "you step onto the {}",
                e.get("tile").and_then(Value::as_str).unwrap_or("?").to_lowercase()
            )),
            _ => {}
        }
    }
    if parts.is_empty() {
        parts.push("nothing changes".to_string());
    }
    match status {
        EnvStatus::Failure => parts.push("the episode ends in failure".to_string()),
        EnvStatus::Success => parts.push("the goal is reached".to_string()),
        EnvStatus::Ongoing => {}
    }
    parts.join("; ")
}

/// Canonical phrasing for where a driving rollout ended up.
pub fn summarize_driving_end(env: &dyn crate::envbridge::Environment) -> String {
    use crate::envbridge::EnvStatus;
    match env.status() {
        EnvStatus::Success => "the drive completes safely".to_string(),
        EnvStatus::Failure => "the drive ends in failure".to_string(),
        EnvStatus::Ongoing => "the drive continues without incident".to_string(),
    }
}

/// Entity encounters extracted from an episode's event log, in step order.
pub struct EntityVisit {
    /// Stable key, e.g. "altar", "key-yellow", "monster-2".
    pub key: String,
    /// Phrase for question text, e.g. "yellow key".
    pub display: String,
    /// "(row, col)" of the encounter.
    pub position: String,
    pub step: usize,
}

pub fn entity_visits(record: &EpisodeRecord) -> Vec<EntityVisit> {
    let mut visits = Vec::new();
    let pos_of = |e: &Value| -> Option<String> {
        let at = e.get("at")?;
        Some(format!(
            "({}, {})",
            at.get("row").and_then(Value::as_u64)?,
            at.get("col").and_then(Value::as_u64)?
        ))
    };
    for (i, step) in record.steps.iter().enumerate() {
        for e in &step.events {
            let kind = e.get("event").and_then(|v| v.as_str()).unwrap_or("");
            let entry = match kind {
                "entered_fixture" => {
                    let tile = e.get("tile").and_then(Value::as_str).unwrap_or("");
                    let key = tile.to_lowercase();
                    pos_of(e).map(|p| (key.clone(), key, p))
                }
                "collected_key" => {
                    let color = e.get("color").and_then(Value::as_str).unwrap_or("?");
                    pos_of(e).map(|p| (format!("key-{color}"), format!("{color} key"), p))
                }
                "collected_potion" => pos_of(e).map(|p| ("potion".to_string(), "health potion".to_string(), p)),
                "collected_crystal" => {
                    let stat = e.get("stat").and_then(Value::as_str).unwrap_or("?");
                    pos_of(e).map(|p| (format!("crystal-{stat}"), format!("{stat} crystal"), p))
                }
                "collected_item" => {
                    let kind = e.get("kind").and_then(Value::as_str).unwrap_or("?");
                    pos_of(e).map(|p| (format!("item-{kind}"), kind.to_string(), p))
                }
                "door_opened" => {
                    let color = e.get("color").and_then(Value::as_str).unwrap_or("?");
                    pos_of(e).map(|p| (format!("door-{color}"), format!("{color} door"), p))
                }
                "fought" => {
                    let id = e.get("monster").and_then(Value::as_u64).unwrap_or(0);
                    pos_of(e).map(|p| (format!("monster-{id}"), format!("monster M{}", id + 1), p))
                }
                _ => None,
            };
            if let Some((key, display, position)) = entry {
                visits.push(EntityVisit { key, display, position, step: i });
            }
        }
    }
    visits
}
