//! Action parsing: last well-formed call wins.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use agent_world::AgentAction;

use super::{direction_from, ego_from, stat_from, ParsedAction, SkillArg, SkillCall, TextError};
use crate::EnvKind;

fn call_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?m)\b([a-z_][a-z0-9_]*)\s*\(\s*([a-z0-9_,\s-]*?)\s*\)").expect("valid regex")
    })
}

fn bare_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\b(up|down|left|right|faster|slower|idle|lane_left|lane_right)\b")
            .expect("valid regex")
    })
}

/// Parser configured for one environment plus its registered skills.
#[derive(Debug, Clone)]
pub struct ActionParser {
    env_kind: EnvKind,
    skills: BTreeSet<String>,
}

impl ActionParser {
    pub fn new(env_kind: EnvKind) -> Self {
        Self {
            env_kind,
            skills: BTreeSet::new(),
        }
    }

    pub fn with_skill(mut self, name: impl Into<String>) -> Self {
        self.skills.insert(name.into());
        self
    }

    pub fn with_skills<I: IntoIterator<Item = String>>(mut self, names: I) -> Self {
        self.skills.extend(names);
        self
    }

    /// Extract the last resolvable call or bare action word from raw model
    /// output. Unknown names are skipped; prose never changes the result.
    pub fn parse(&self, raw: &str) -> Result<ParsedAction, TextError> {
        let text = raw.to_lowercase();
        let mut best: Option<(usize, ParsedAction)> = None;
        let mut call_spans: Vec<(usize, usize)> = Vec::new();

        for caps in call_regex().captures_iter(&text) {
            let whole = caps.get(0).expect("match");
            call_spans.push((whole.start(), whole.end()));
            let name = caps.get(1).expect("name").as_str();
            let args = parse_args(caps.get(2).map(|m| m.as_str()).unwrap_or(""));
            let Some(args) = args else { continue };
            if let Some(action) = self.resolve_call(name, &args) {
                best = Some((whole.start(), action));
            }
        }
        for m in bare_regex().find_iter(&text) {
            // Words inside a call's argument list belong to that call.
            if call_spans.iter().any(|(s, e)| m.start() >= *s && m.end() <= *e) {
                continue;
            }
            if let Some(action) = self.resolve_bare(m.as_str()) {
                match &best {
                    Some((pos, _)) if *pos > m.start() => {}
                    _ => best = Some((m.start(), action)),
                }
            }
        }

        best.map(|(_, action)| action).ok_or_else(|| TextError::UnparseableAction {
            raw: raw.chars().take(200).collect(),
        })
    }

    fn resolve_bare(&self, word: &str) -> Option<ParsedAction> {
        match self.env_kind {
            EnvKind::AgentWorld => direction_from(word)
                .map(|dir| ParsedAction::World { action: AgentAction::Move { dir } }),
            EnvKind::Driving => ego_from(word).map(|action| ParsedAction::Ego { action }),
        }
    }

    fn resolve_call(&self, name: &str, args: &[SkillArg]) -> Option<ParsedAction> {
        let word_arg = |i: usize| match args.get(i) {
            Some(SkillArg::Word(w)) => Some(w.as_str()),
            _ => None,
        };
        match self.env_kind {
            EnvKind::AgentWorld => match (name, args.len()) {
                ("move", 1) => direction_from(word_arg(0)?)
                    .map(|dir| ParsedAction::World { action: AgentAction::Move { dir } }),
                ("use_shovel", 1) => direction_from(word_arg(0)?)
                    .map(|dir| ParsedAction::World { action: AgentAction::UseShovel { dir } }),
                ("use_wing", 0) => Some(ParsedAction::World { action: AgentAction::UseWing }),
                ("trade", 1) => stat_from(word_arg(0)?)
                    .map(|stat| ParsedAction::World { action: AgentAction::Trade { stat } }),
                ("inspect_orb", 0) => {
                    Some(ParsedAction::World { action: AgentAction::InspectOrb })
                }
                _ => self.resolve_skill(name, args),
            },
            EnvKind::Driving => match (name, args.len()) {
                (_, 0) if ego_from(name).is_some() => {
                    ego_from(name).map(|action| ParsedAction::Ego { action })
                }
                _ => self.resolve_skill(name, args),
            },
        }
    }

    fn resolve_skill(&self, name: &str, args: &[SkillArg]) -> Option<ParsedAction> {
        if self.skills.contains(name) {
            Some(ParsedAction::Skill {
                call: SkillCall { name: name.to_string(), args: args.to_vec() },
            })
        } else {
            None
        }
    }
}

fn parse_args(raw: &str) -> Option<Vec<SkillArg>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Some(Vec::new());
    }
    let mut args = Vec::new();
    for piece in raw.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            return None;
        }
        if let Ok(i) = piece.parse::<i64>() {
            args.push(SkillArg::Int(i));
        } else if piece.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            && piece.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        {
            args.push(SkillArg::Word(piece.to_string()));
        } else {
            return None;
        }
    }
    Some(args)
}

/// One-shot convenience over [`ActionParser`] with the default skill set
/// for the environment (`orb` for the puzzle world; `lane_change` and
/// `detect_objects` for driving).
pub fn parse_action(raw: &str, env_kind: EnvKind) -> Result<ParsedAction, TextError> {
    default_parser(env_kind).parse(raw)
}

pub(crate) fn default_parser(env_kind: EnvKind) -> ActionParser {
    match env_kind {
        EnvKind::AgentWorld => ActionParser::new(env_kind).with_skill("orb"),
        EnvKind::Driving => ActionParser::new(env_kind)
            .with_skill("lane_change")
            .with_skill("detect_objects"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use agent_world::Direction;
    use urban_driving::EgoAction;

    #[test]
    fn prose_wrapped_call_parses() {
        let parsed = parse_action("I will go up. Action: move(up)", EnvKind::AgentWorld).unwrap();
        assert_eq!(
            parsed,
            ParsedAction::World { action: AgentAction::Move { dir: Direction::Up } }
        );
    }

    #[test]
    fn bare_direction_word_parses() {
        let parsed = parse_action("UP", EnvKind::AgentWorld).unwrap();
        assert_eq!(
            parsed,
            ParsedAction::World { action: AgentAction::Move { dir: Direction::Up } }
        );
    }

    #[test]
    fn last_call_wins() {
        let text = "maybe move(left)? no... definitely move(right)";
        let parsed = parse_action(text, EnvKind::AgentWorld).unwrap();
        assert_eq!(
            parsed,
            ParsedAction::World { action: AgentAction::Move { dir: Direction::Right } }
        );
    }

    #[test]
    fn skill_call_with_int_arg() {
        let parsed = parse_action("lane_change(2)", EnvKind::Driving).unwrap();
        assert_eq!(
            parsed,
            ParsedAction::Skill {
                call: SkillCall { name: "lane_change".into(), args: vec![SkillArg::Int(2)] }
            }
        );
    }

    #[test]
    fn driving_bare_words_parse() {
        let parsed = parse_action("I think... slower", EnvKind::Driving).unwrap();
        assert_eq!(parsed, ParsedAction::Ego { action: EgoAction::Slower });
    }

    #[test]
    fn unknown_names_are_skipped() {
        let text = "calculate(42) then move(down)";
        let parsed = parse_action(text, EnvKind::AgentWorld).unwrap();
        assert_eq!(
            parsed,
            ParsedAction::World { action: AgentAction::Move { dir: Direction::Down } }
        );
    }

    #[test]
    fn pure_prose_is_unparseable() {
        let err = parse_action("thinking about the problem...", EnvKind::AgentWorld).unwrap_err();
        assert!(matches!(err, TextError::UnparseableAction { .. }));
    }

    #[test]
    fn case_insensitive() {
        let parsed = parse_action("Move(Up)", EnvKind::AgentWorld).unwrap();
        assert_eq!(
            parsed,
            ParsedAction::World { action: AgentAction::Move { dir: Direction::Up } }
        );
    }
}
