//! Text bridge between simulator states and the LLM.
//!
//! Rendering turns a state into a sectioned observation; parsing recovers
//! an action from free-form model output. The canonical action grammar:
//!
//! ```text
//! action     = call | bare-word ;
//! call       = name "(" [ arg { "," arg } ] ")" ;
//! name       = identifier ;
//! arg        = integer | identifier ;
//! identifier = letter { letter | digit | "_" } ;
//! integer    = [ "-" ] digit { digit } ;
//! bare-word  = "up" | "down" | "left" | "right"
//!            | "faster" | "slower" | "idle" | "lane_left" | "lane_right" ;
//! ```
//!
//! Matching is case-insensitive and the *last* well-formed, resolvable
//! call or bare word in the text wins, since chain-of-thought output often
//! rehearses several candidate actions before committing.

mod agent_world_render;
mod driving_render;
mod parse;

pub use agent_world_render::render_agent_world;
pub use driving_render::render_driving;
pub use parse::{parse_action, ActionParser};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use agent_world::{AgentAction, Direction, StatKind};
use urban_driving::EgoAction;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("no parseable action in model output: {raw:?}")]
    UnparseableAction { raw: String },
}

/// A rendered observation: ordered sections plus a canonical flat string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationText {
    pub sections: Vec<(String, String)>,
}

impl ObservationText {
    pub fn flat(&self) -> String {
        let mut out = String::new();
        for (heading, body) in &self.sections {
            out.push_str("## ");
            out.push_str(heading);
            out.push_str("\n\n");
            out.push_str(body);
            if !body.ends_with('\n') {
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// A named call with typed literal arguments, e.g. `lane_change(2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SkillCall {
    pub name: String,
    pub args: Vec<SkillArg>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SkillArg {
    Int(i64),
    Word(String),
}

impl std::fmt::Display for SkillArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SkillArg::Int(i) => write!(f, "{i}"),
            SkillArg::Word(w) => write!(f, "{w}"),
        }
    }
}

/// Any action the loop can record: an environment action of either world,
/// a registered skill/tool call, or the no-op fallback used after an
/// unparseable reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParsedAction {
    World { action: AgentAction },
    Ego { action: EgoAction },
    Skill { call: SkillCall },
    NoOp,
}

/// Canonical call syntax for an action; `parse_action` inverts this.
pub fn render_action(action: &ParsedAction) -> String {
    match action {
        ParsedAction::World { action } => match action {
            AgentAction::Move { dir } => format!("move({})", dir.name()),
            AgentAction::UseShovel { dir } => format!("use_shovel({})", dir.name()),
            AgentAction::UseWing => "use_wing()".into(),
            AgentAction::Trade { stat } => format!("trade({})", stat.name()),
            AgentAction::InspectOrb => "inspect_orb()".into(),
        },
        ParsedAction::Ego { action } => format!("{}()", action.name()),
        ParsedAction::Skill { call } => {
            let args: Vec<String> = call.args.iter().map(|a| a.to_string()).collect();
            format!("{}({})", call.name, args.join(","))
        }
        ParsedAction::NoOp => "noop()".into(),
    }
}

pub(crate) fn direction_from(word: &str) -> Option<Direction> {
    match word {
        "up" => Some(Direction::Up),
        "down" => Some(Direction::Down),
        "left" => Some(Direction::Left),
        "right" => Some(Direction::Right),
        _ => None,
    }
}

pub(crate) fn stat_from(word: &str) -> Option<StatKind> {
    match word {
        "attack" => Some(StatKind::Attack),
        "defense" => Some(StatKind::Defense),
        "life" => Some(StatKind::Life),
        _ => None,
    }
}

pub(crate) fn ego_from(word: &str) -> Option<EgoAction> {
    match word {
        "lane_left" => Some(EgoAction::LaneLeft),
        "lane_right" => Some(EgoAction::LaneRight),
        "faster" => Some(EgoAction::Faster),
        "slower" => Some(EgoAction::Slower),
        "idle" => Some(EgoAction::Idle),
        _ => None,
    }
}
