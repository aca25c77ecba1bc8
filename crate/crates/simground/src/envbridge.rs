//! A single trait over both simulators so the episode loop, the replayer
//! and the counterfactual generator don't care which world they run in.
//!
//! Environments are rebuilt from a serializable [`EnvSpec`], so a stored
//! episode is self-contained: rebuild, replay the recorded actions, and
//! you must land on the same states and events.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use agent_world::{
    generate_task, orb_report, step_with_task, TaskSpec, Terminal as WorldTerminal, WorldConfig,
    WorldState,
};
use urban_driving::{
    check_outcome, spawn_scenario, step_scene, EgoAction, Outcome, ScenarioSpec, TrafficScene,
};

use crate::textio::{render_agent_world, render_driving, ParsedAction, SkillArg};
use crate::{EnvKind, Fidelity};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("world generation failed: {0}")]
    Generation(#[from] agent_world::GenError),
    #[error("scenario spawn failed: {0}")]
    Spawn(#[from] urban_driving::SpawnError),
}

/// Everything needed to rebuild an environment from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum EnvSpec {
    AgentWorld { config: WorldConfig, seed: u64 },
    Driving { spec: ScenarioSpec },
}

impl EnvSpec {
    pub fn kind(&self) -> EnvKind {
        match self {
            EnvSpec::AgentWorld { .. } => EnvKind::AgentWorld,
            EnvSpec::Driving { .. } => EnvKind::Driving,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            EnvSpec::AgentWorld { seed, .. } => *seed,
            EnvSpec::Driving { spec } => spec.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> EnvSpec {
        match self {
            EnvSpec::AgentWorld { config, .. } => {
                EnvSpec::AgentWorld { config: config.clone(), seed }
            }
            EnvSpec::Driving { spec } => {
                let mut spec = spec.clone();
                spec.seed = seed;
                EnvSpec::Driving { spec }
            }
        }
    }

    pub fn task_id(&self) -> String {
        match self {
            EnvSpec::AgentWorld { config, seed } => {
                format!("{:?}-{seed:016x}", config.fidelity).to_lowercase()
            }
            EnvSpec::Driving { spec } => spec.id(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvStatus {
    Ongoing,
    Success,
    Failure,
}

/// An informational tool exposed to the agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub input_schema: Value,
}

pub trait Environment {
    fn kind(&self) -> EnvKind;
    fn fidelity(&self) -> Fidelity;
    fn goal_text(&self) -> String;
    fn observe(&self) -> String;
    fn status(&self) -> EnvStatus;
    /// Apply an action; returns the step's events as JSON values.
    fn apply(&mut self, action: &ParsedAction) -> Vec<Value>;
    /// Actions that would not be refused in the current state.
    fn legal_actions(&self) -> Vec<ParsedAction>;
    fn tools(&self) -> Vec<ToolSpec>;
    /// Run an informational tool; `None` for unknown names.
    fn call_tool(&self, name: &str, input: &Value) -> Option<Value>;
    /// Hash of the current state, for replay checking.
    fn state_digest(&self) -> String;
}

pub fn build_env(spec: &EnvSpec) -> Result<Box<dyn Environment>, EnvError> {
    match spec {
        EnvSpec::AgentWorld { config, seed } => {
            let (state, task) = generate_task(config, *seed)?;
            Ok(Box::new(AgentWorldEnv::new(state, task)))
        }
        EnvSpec::Driving { spec } => {
            let scene = spawn_scenario(spec)?;
            Ok(Box::new(DrivingEnv::new(scene)))
        }
    }
}

// ---------------------------------------------------------------------------
// Puzzle world
// ---------------------------------------------------------------------------

pub struct AgentWorldEnv {
    state: WorldState,
    task: TaskSpec,
    status: EnvStatus,
}

impl AgentWorldEnv {
    pub fn new(state: WorldState, task: TaskSpec) -> Self {
        let status = match agent_world::check_goal(&state, &task) {
            WorldTerminal::Success => EnvStatus::Success,
            WorldTerminal::Failure => EnvStatus::Failure,
            WorldTerminal::Ongoing => EnvStatus::Ongoing,
        };
        Self { state, task, status }
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }
}

impl Environment for AgentWorldEnv {
    fn kind(&self) -> EnvKind {
        EnvKind::AgentWorld
    }

    fn fidelity(&self) -> Fidelity {
        self.state.fidelity.into()
    }

    fn goal_text(&self) -> String {
        self.task.description.clone()
    }

    fn observe(&self) -> String {
        render_agent_world(&self.state, Some(&self.task)).flat()
    }

    fn status(&self) -> EnvStatus {
        self.status
    }

    fn apply(&mut self, action: &ParsedAction) -> Vec<Value> {
        let world_action = match action {
            ParsedAction::World { action } => *action,
            ParsedAction::NoOp | ParsedAction::Ego { .. } | ParsedAction::Skill { .. } => {
                return Vec::new();
            }
        };
        let (next, events, terminal) = step_with_task(&self.state, &world_action, &self.task);
        self.state = next;
        self.status = match terminal {
            WorldTerminal::Success => EnvStatus::Success,
            WorldTerminal::Failure => EnvStatus::Failure,
            WorldTerminal::Ongoing => EnvStatus::Ongoing,
        };
        events
            .iter()
            .map(|e| serde_json::to_value(e).expect("event serializes"))
            .collect()
    }

    fn legal_actions(&self) -> Vec<ParsedAction> {
        let mut out = Vec::new();
        for dir in agent_world::Direction::ALL {
            let action = agent_world::AgentAction::Move { dir };
            let (_, events, _) = agent_world::step(&self.state, &action);
            let refused = events.iter().all(|e| {
                matches!(
                    e,
                    agent_world::WorldEvent::IllegalMove { .. }
                        | agent_world::WorldEvent::CombatInfeasible { .. }
                )
            });
            if !refused {
                out.push(ParsedAction::World { action });
            }
        }
        out
    }

    fn tools(&self) -> Vec<ToolSpec> {
        vec![ToolSpec {
            name: "orb".into(),
            description: "Forecast the damage each monster on this floor would deal; requires standing on the orb tile.".into(),
            input_schema: serde_json::json!({"type": "object", "properties": {}}),
        }]
    }

    fn call_tool(&self, name: &str, _input: &Value) -> Option<Value> {
        match name {
            "orb" => Some(match orb_report(&self.state) {
                Ok(entries) => serde_json::json!({"entries": entries}),
                Err(e) => serde_json::json!({"error": e.to_string()}),
            }),
            _ => None,
        }
    }

    fn state_digest(&self) -> String {
        self.state.state_hash()
    }
}

// ---------------------------------------------------------------------------
// Driving world
// ---------------------------------------------------------------------------

/// Simulator substeps advanced per agent decision (1 s at dt = 0.1 s).
pub const DECISION_SUBSTEPS: usize = 10;

pub struct DrivingEnv {
    scene: TrafficScene,
}

impl DrivingEnv {
    pub fn new(scene: TrafficScene) -> Self {
        Self { scene }
    }

    pub fn scene(&self) -> &TrafficScene {
        &self.scene
    }

    fn lane_change_toward(&self, target: i64) -> EgoAction {
        let Some(ego) = self.scene.ego() else { return EgoAction::Idle };
        let current = ego.lane_id as i64;
        match target.cmp(&current) {
            std::cmp::Ordering::Greater => EgoAction::LaneLeft,
            std::cmp::Ordering::Less => EgoAction::LaneRight,
            std::cmp::Ordering::Equal => EgoAction::Idle,
        }
    }
}

impl Environment for DrivingEnv {
    fn kind(&self) -> EnvKind {
        EnvKind::Driving
    }

    fn fidelity(&self) -> Fidelity {
        self.scene.fidelity.into()
    }

    fn goal_text(&self) -> String {
        format!("{:?}", self.scene.goal)
    }

    fn observe(&self) -> String {
        render_driving(&self.scene).flat()
    }

    fn status(&self) -> EnvStatus {
        match check_outcome(&self.scene) {
            Outcome::Success => EnvStatus::Success,
            Outcome::Failure(_) => EnvStatus::Failure,
            Outcome::Ongoing if self.scene.t >= self.scene.time_limit => EnvStatus::Failure,
            Outcome::Ongoing => EnvStatus::Ongoing,
        }
    }

    fn apply(&mut self, action: &ParsedAction) -> Vec<Value> {
        let ego_action = match action {
            ParsedAction::Ego { action } => *action,
            ParsedAction::Skill { call } if call.name == "lane_change" => match call.args.first() {
                Some(SkillArg::Int(lane)) => self.lane_change_toward(*lane),
                _ => EgoAction::Idle,
            },
            ParsedAction::NoOp => return Vec::new(),
            _ => EgoAction::Idle,
        };
        let mut all_events = Vec::new();
        let dt = self.scene.dt;
        for i in 0..DECISION_SUBSTEPS {
            let action = if i == 0 { ego_action } else { EgoAction::Idle };
            let (next, events) = step_scene(&self.scene, action, dt);
            self.scene = next;
            all_events.extend(
                events
                    .iter()
                    .map(|e| serde_json::to_value(e).expect("event serializes")),
            );
            if !matches!(check_outcome(&self.scene), Outcome::Ongoing) {
                break;
            }
        }
        all_events
    }

    fn legal_actions(&self) -> Vec<ParsedAction> {
        let Some(ego) = self.scene.ego() else { return Vec::new() };
        let lane = self.scene.road.lane(ego.lane_id);
        EgoAction::ALL
            .into_iter()
            .filter(|a| match a {
                EgoAction::LaneLeft => lane.is_some_and(|l| l.left_neighbor.is_some()),
                EgoAction::LaneRight => lane.is_some_and(|l| l.right_neighbor.is_some()),
                _ => true,
            })
            .map(|action| ParsedAction::Ego { action })
            .collect()
    }

    fn tools(&self) -> Vec<ToolSpec> {
        vec![ToolSpec {
            name: "detect_objects".into(),
            description: "List every vehicle, pedestrian and obstacle with lane, position and speed.".into(),
            input_schema: serde_json::json!({"type": "object", "properties": {}}),
        }]
    }

    fn call_tool(&self, name: &str, _input: &Value) -> Option<Value> {
        match name {
            "detect_objects" => {
                let vehicles: Vec<Value> = self
                    .scene
                    .vehicles
                    .values()
                    .map(|v| {
                        serde_json::json!({
                            "id": v.id, "label": v.label, "lane": v.lane_id,
                            "s": v.s, "v": v.v, "role": format!("{:?}", v.role),
                        })
                    })
                    .collect();
                let pedestrians: Vec<Value> = self
                    .scene
                    .pedestrians
                    .values()
                    .filter(|p| p.active_at(self.scene.t))
                    .map(|p| serde_json::json!({"id": p.id, "lane": p.lane_id, "s": p.s}))
                    .collect();
                let obstacles: Vec<Value> = self
                    .scene
                    .obstacles
                    .values()
                    .filter(|o| o.active_at(self.scene.t))
                    .map(|o| serde_json::json!({"id": o.id, "lane": o.lane_id, "s": o.s}))
                    .collect();
                Some(serde_json::json!({
                    "vehicles": vehicles,
                    "pedestrians": pedestrians,
                    "obstacles": obstacles,
                }))
            }
            _ => None,
        }
    }

    fn state_digest(&self) -> String {
        self.scene.state_hash()
    }
}
