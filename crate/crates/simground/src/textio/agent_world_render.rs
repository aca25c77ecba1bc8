//! Observation rendering for the puzzle world.
//!
//! Layout: a "Status" section with current stats and backpack, a
//! "Map Layout (Category: Description ID)" section with one line per grid
//! row, and a "Description IDs and Thorough Descriptions" section with one
//! entry per distinct description id on the visible floor. The status
//! block shows the warrior's current stats; the player description block
//! shows the spawn stats.

use std::collections::BTreeMap;
use std::fmt::Write;

use agent_world::{ItemKind, KeyColor, Pos, StatKind, TaskSpec, Tile, WorldState};

use super::ObservationText;

/// Stable category/id naming per tile appearance, current floor only.
struct IdTable {
    assigned: BTreeMap<String, String>,
    counters: BTreeMap<&'static str, u32>,
    order: Vec<(String, String, String)>, // (key, category, id)
}

impl IdTable {
    fn new() -> Self {
        Self {
            assigned: BTreeMap::new(),
            counters: BTreeMap::new(),
            order: Vec::new(),
        }
    }

    fn id_for(&mut self, key: String, category: &str, prefix: &'static str) -> String {
        if let Some(id) = self.assigned.get(&key) {
            return id.clone();
        }
        let n = self.counters.entry(prefix).or_insert(0);
        *n += 1;
        let id = format!("{prefix}{n}");
        self.assigned.insert(key.clone(), id.clone());
        self.order.push((key, category.to_string(), id.clone()));
        id
    }
}

fn crystal_name(stat: StatKind) -> &'static str {
    match stat {
        StatKind::Attack => "Red Crystal",
        StatKind::Defense => "Blue Crystal",
        StatKind::Life => "Green Crystal",
    }
}

/// Category label and description-table key for a tile.
fn classify(state: &WorldState, pos: Pos, tile: Tile) -> (String, String, &'static str) {
    if pos == state.player_pos {
        return ("Player".into(), "player".into(), "P");
    }
    match tile {
        Tile::Empty => ("Empty".into(), "empty".into(), "E"),
        Tile::PlayerSpawn => ("Spawn".into(), "spawn".into(), "SP"),
        Tile::Wall => ("Wall".into(), "wall".into(), "W"),
        Tile::Door { color } => (
            format!("{} Door", color.name()),
            format!("door-{}", color.name()),
            "D",
        ),
        Tile::Key { color } => (
            format!("{} Key", color.name()),
            format!("key-{}", color.name()),
            "K",
        ),
        Tile::HealthPotion { amount } => {
            ("Health Potion".into(), format!("potion-{amount}"), "H")
        }
        Tile::Crystal { stat, amount } => (
            crystal_name(stat).to_string(),
            format!("crystal-{}-{amount}", stat.name()),
            "C",
        ),
        Tile::Monster { id } => ("Monster".into(), format!("monster-{}", id.0), "M"),
        Tile::Stairs { target } => ("Stairs".into(), format!("stairs-{target}"), "S"),
        Tile::Store => ("Store".into(), "store".into(), "ST"),
        Tile::Altar => ("Altar".into(), "altar".into(), "A"),
        Tile::Orb => ("Orb".into(), "orb".into(), "O"),
        Tile::Item { kind } => (kind.name().to_string(), format!("item-{}", kind.name()), "I"),
    }
}

/// Monster description ids follow the monster id, not encounter order, so
/// M2 stays M2 after M1 falls.
fn monster_display_id(key: &str) -> Option<String> {
    key.strip_prefix("monster-")
        .and_then(|n| n.parse::<u32>().ok())
        .map(|n| format!("M{}", n + 1))
}

pub fn render_agent_world(state: &WorldState, task: Option<&TaskSpec>) -> ObservationText {
    let grid = state.grid();
    let mut ids = IdTable::new();
    let mut rows = Vec::with_capacity(grid.rows);
    for r in 0..grid.rows {
        let mut cells = Vec::with_capacity(grid.cols);
        for c in 0..grid.cols {
            let pos = Pos::new(r, c);
            let tile = grid.get(pos);
            let (category, key, prefix) = classify(state, pos, tile);
            let id = match monster_display_id(&key) {
                Some(mid) => {
                    ids.id_for(key, &category, "M");
                    mid
                }
                None => ids.id_for(key, &category, prefix),
            };
            cells.push(format!("({category}: {id})"));
        }
        rows.push(format!("Row {}: {}", r + 1, cells.join(", ")));
    }

    // Monster ids assigned via the table counters would restart at M1; fix
    // the table entries to the stable monster numbering.
    for entry in ids.order.iter_mut() {
        if let Some(mid) = monster_display_id(&entry.0) {
            entry.2 = mid;
        }
    }

    let mut status = String::new();
    let goal_text = task
        .map(|t| t.description.clone())
        .unwrap_or_else(|| "explore the tower".to_string());
    let _ = writeln!(
        status,
        "The player starts at position ({}, {}) on the first floor. The goal is to {}.",
        state.spawn_pos.row, state.spawn_pos.col, goal_text
    );
    status.push('\n');
    let _ = writeln!(status, "Health: {}", state.player_stats.life);
    let _ = writeln!(status, "Attack: {}", state.player_stats.attack);
    let _ = writeln!(status, "Defense: {}", state.player_stats.defense);
    let _ = writeln!(status, "Floor: {} of {}", state.current_floor + 1, state.floors.len());
    let _ = writeln!(status, "Turn: {}", state.turn);
    status.push('\n');
    status.push_str("You current backpack:\n");
    let inv = &state.inventory;
    let _ = writeln!(status, "YELLOW KEY: {}", inv.keys(KeyColor::Yellow));
    let _ = writeln!(status, "BLUE KEY: {}", inv.keys(KeyColor::Blue));
    let _ = writeln!(status, "RED KEY: {}", inv.keys(KeyColor::Red));
    let _ = writeln!(status, "GOLD: {}", inv.gold);
    let _ = writeln!(status, "EXPERIENCE: {}", inv.experience);
    let _ = writeln!(status, "SHOVEL: {}", inv.items(ItemKind::Shovel));
    let _ = writeln!(status, "WING: {}", inv.items(ItemKind::Wing));

    let mut descriptions = String::new();
    for (key, category, id) in &ids.order {
        let _ = writeln!(descriptions, "### {category} ({id})");
        describe(&mut descriptions, state, key, category);
        descriptions.push('\n');
    }

    ObservationText {
        sections: vec![
            ("Status".to_string(), status),
            ("Map Layout (Category: Description ID)".to_string(), rows.join("\n\n") + "\n"),
            ("Description IDs and Thorough Descriptions".to_string(), descriptions),
        ],
    }
}

fn positions_of(state: &WorldState, key: &str) -> Vec<Pos> {
    let grid = state.grid();
    grid.iter()
        .filter(|(pos, tile)|

            *pos != state.player_pos && {
                let (_, k, _) = classify(state, *pos, *tile);
                k == key
            })
        .map(|(pos, _)| pos)
        .collect()
}

fn positions_text(positions: &[Pos]) -> String {
    match positions {
        [] => "Various".to_string(),
        [one] => one.to_string(),
        many => many
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(", "),
    }
}

fn describe(out: &mut String, state: &WorldState, key: &str, category: &str) {
    let push = |out: &mut String, label: &str, value: &str| {
        let _ = writeln!(out, "- {label}: {value}");
    };
    match key {
        "player" => {
            push(out, "Position", &state.player_pos.to_string());
            push(
                out,
                "Description",
                "You are the warrior, starting from this position. Reach your goal while managing health, keys and battles.",
            );
            let s = state.spawn_stats;
            push(out, "Health", &s.life.to_string());
            push(out, "Attack", &s.attack.to_string());
            push(out, "Defense", &s.defense.to_string());
        }
        "empty" => {
            push(out, "Position", "Various");
            push(
                out,
                "Description",
                "This is an empty tile with no obstacles or monsters. You can move freely through these tiles.",
            );
        }
        "spawn" => {
            push(out, "Position", &positions_text(&positions_of(state, key)));
            push(out, "Description", "The tile where the warrior first entered this floor.");
        }
        "wall" => {
            push(out, "Position", "Various");
            push(
                out,
                "Description",
                "This is a wall tile that cannot pass, you can destroy the tile with a shovel (if any).",
            );
        }
        "store" => {
            push(out, "Position", &positions_text(&positions_of(state, key)));
            push(
                out,
                "Description",
                "Trade combat experience for upgrades here: trade(attack), trade(defense) or trade(life). Each upgrade costs more than the last.",
            );
        }
        "altar" => {
            push(out, "Position", &positions_text(&positions_of(state, key)));
            push(
                out,
                "Description",
                "Donate gold for upgrades here at the same rising schedule as the store.",
            );
        }
        "orb" => {
            push(out, "Position", &positions_text(&positions_of(state, key)));
            push(
                out,
                "Description",
                "The Orb of the Hero. Standing here, inspect_orb() reports the damage every monster on this floor would deal to you.",
            );
        }
        _ => describe_parametric(out, state, key, category),
    }
}

fn describe_parametric(out: &mut String, state: &WorldState, key: &str, category: &str) {
    let push = |out: &mut String, label: &str, value: &str| {
        let _ = writeln!(out, "- {label}: {value}");
    };
    let positions = positions_text(&positions_of(state, key));
    if let Some(rest) = key.strip_prefix("door-") {
        push(out, "Position", &positions);
        push(
            out,
            "Description",
            &format!("A locked {} door. Moving into it with a {} key opens it and consumes the key.",
                rest.to_lowercase(), rest.to_lowercase()),
        );
    } else if let Some(rest) = key.strip_prefix("key-") {
        push(out, "Position", &positions);
        push(
            out,
            "Description",
            &format!("A {} key used to unlock {} doors, you lose the item once you use it.",
                rest.to_lowercase(), rest.to_lowercase()),
        );
    } else if let Some(amount) = key.strip_prefix("potion-") {
        push(out, "Position", &positions);
        push(
            out,
            "Description",
            &format!("A health potion that restores {amount} health points when collected."),
        );
        push(out, "Effect", &format!("+{amount} Health"));
    } else if let Some(rest) = key.strip_prefix("crystal-") {
        let (stat, amount) = rest.split_once('-').unwrap_or((rest, "0"));
        push(out, "Position", &positions);
        push(out, "Description", &format!("A {category} that permanently raises your {stat}."));
        push(out, "Effect", &format!("+{amount} {stat}"));
    } else if let Some(id) = key.strip_prefix("monster-") {
        let id: u32 = id.parse().unwrap_or(0);
        if let Some(m) = state.monsters.get(&agent_world::MonsterId(id)) {
            push(out, "Position", &m.pos.to_string());
            push(out, "Description", &format!("A {} monster blocking your path.", m.kind.label()));
            push(out, "Health", &m.stats.life.to_string());
            push(out, "Attack", &m.stats.attack.to_string());
            push(out, "Defense", &m.stats.defense.to_string());
            push(out, "Reward", &format!("{} gold, {} experience", m.reward_gold, m.reward_exp));
        }
    } else if let Some(target) = key.strip_prefix("stairs-") {
        push(out, "Position", &positions);
        let target: usize = target.parse().unwrap_or(0);
        if target < state.floors.len() {
            push(
                out,
                "Description",
                &format!("These stairs lead to floor {}. Stepping on them moves you there.", target + 1),
            );
        } else {
            push(
                out,
                "Description",
                "These stairs lead out of the tower. Reaching them completes the climb.",
            );
        }
    } else if let Some(item) = key.strip_prefix("item-") {
        push(out, "Position", &positions);
        let text = match item {
            "Shovel" => "A shovel. use_shovel(direction) breaks one adjacent wall and consumes it.",
            _ => "A wing. use_wing() flies you to the point-reflected cell across the map center and is consumed.",
        };
        push(out, "Description", text);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use agent_world::{generate_task, WorldConfig};

    #[test]
    fn sections_appear_in_order() {
        let (state, task) = generate_task(&WorldConfig::imperfect_default(), 3).unwrap();
        let obs = render_agent_world(&state, Some(&task));
        let flat = obs.flat();
        let status = flat.find("Status").unwrap();
        let map = flat.find("Map Layout (Category: Description ID)").unwrap();
        let desc = flat.find("Description IDs and Thorough Descriptions").unwrap();
        assert!(status < map && map < desc);
        assert!(flat.contains("Row 1:"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let (state, task) = generate_task(&WorldConfig::perfect_default(), 9).unwrap();
        let a = render_agent_world(&state, Some(&task)).flat();
        let b = render_agent_world(&state, Some(&task)).flat();
        assert_eq!(a, b);
    }

    #[test]
    fn one_description_section_per_distinct_id() {
        let (state, task) = generate_task(&WorldConfig::imperfect_default(), 5).unwrap();
        let obs = render_agent_world(&state, Some(&task));
        let (_, desc) = &obs.sections[2];
        let map = &obs.sections[1].1;
        // Every id referenced in the map has exactly one description.
        let re = regex::Regex::new(r"\(([^:]+): ([A-Z]+\d+)\)").unwrap();
        let mut ids: Vec<&str> = re.captures_iter(map).map(|c| c.get(2).unwrap().as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        for id in ids {
            let header = format!("({id})");
            assert_eq!(
                desc.matches(&header).count(),
                1,
                "{id} should have exactly one section"
            );
        }
    }
}
