//! The state machine: actions, events, goal checking and the orb report.
//!
//! `step` is a pure function of `(state, action)`. Misuse never errors:
//! an illegal move, a blocked wing, an unaffordable trade all surface as
//! events on an otherwise unchanged state (the turn counter still
//! advances), so episode logs stay total.

use serde::{Deserialize, Serialize};

use crate::combat::resolve_combat;
use crate::types::{Fidelity, ItemKind, KeyColor, MonsterId, Pos, StatKind, Tile};
use crate::world::{EngineError, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] =
        [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn name(&self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    /// Apply within `rows x cols` bounds; `None` when it would leave the grid.
    pub fn offset(&self, pos: Pos, rows: usize, cols: usize) -> Option<Pos> {
        let (r, c) = (pos.row, pos.col);
        let next = match self {
            Direction::Up => (r.checked_sub(1)?, c),
            Direction::Down => (r + 1, c),
            Direction::Left => (r, c.checked_sub(1)?),
            Direction::Right => (r, c + 1),
        };
        (next.0 < rows && next.1 < cols).then_some(Pos::new(next.0, next.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AgentAction {
    Move { dir: Direction },
    UseShovel { dir: Direction },
    UseWing,
    Trade { stat: StatKind },
    InspectOrb,
}

/// Episode-visible things that happened during one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum WorldEvent {
    Moved { to: Pos },
    IllegalMove { to: Option<Pos>, reason: String },
    CollectedKey { color: KeyColor, at: Pos },
    CollectedPotion { amount: u32, at: Pos },
    CollectedCrystal { stat: StatKind, amount: u32, at: Pos },
    CollectedItem { kind: ItemKind, at: Pos },
    DoorOpened { color: KeyColor, at: Pos },
    Fought {
        monster: MonsterId,
        at: Pos,
        turns: u32,
        damage_taken: u32,
        residual_life: i64,
        lethal: bool,
    },
    CombatInfeasible { monster: MonsterId },
    UsedStairs { to_floor: usize, landed_at: Pos },
    /// Stairs whose target is outside the tower: the exit. No floor switch.
    ReachedExit { at: Pos },
    EnteredFixture { tile: String, at: Pos },
    WingFlew { from: Pos, to: Pos },
    WingBlocked { target: Option<Pos> },
    WallBroken { at: Pos },
    ShovelFailed { reason: String },
    Traded { stat: StatKind, cost: u32, currency: String },
    TradeFailed { reason: String },
    OrbInspected { entries: Vec<OrbEntry> },
    NoOrbAccess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Ongoing,
    Success,
    Failure,
}

/// Goal predicate of one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "goal", rename_all = "snake_case")]
pub enum Goal {
    ReachTile { floor: usize, pos: Pos },
    DefeatMonster { id: MonsterId },
    ReachFloor { floor: usize },
    CollectItem { kind: ItemKind },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub goal: Goal,
    /// Human-readable phrasing used by observation renderers.
    pub description: String,
}

/// One line of the orb's damage forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbEntry {
    pub monster: MonsterId,
    pub verdict: OrbVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum OrbVerdict {
    /// The warrior cannot pierce this monster's defense at all.
    Infeasible,
    /// Predicted total damage; `lethal` when it exceeds current life.
    Damage { amount: u32, lethal: bool },
}

/// Forecast combat damage for every living monster on the current floor,
/// in id order. Requires the warrior to stand on an orb tile.
pub fn orb_report(state: &WorldState) -> Result<Vec<OrbEntry>, EngineError> {
    if state.grid().get(state.player_pos) != Tile::Orb {
        return Err(EngineError::NoOrbAccess(state.player_pos));
    }
    Ok(orb_entries(state))
}

fn orb_entries(state: &WorldState) -> Vec<OrbEntry> {
    state
        .monsters_on_floor(state.current_floor)
        .map(|(id, m)| {
            let out = resolve_combat(&state.player_stats, &m.stats, &m.kind, &state.rules.combat);
            let verdict = if !out.feasible {
                OrbVerdict::Infeasible
            } else {
                OrbVerdict::Damage {
                    amount: out.damage_taken,
                    lethal: out.lethal(),
                }
            };
            OrbEntry { monster: *id, verdict }
        })
        .collect()
}

/// Pure goal predicate. Failure happens only through the warrior's death.
pub fn check_goal(state: &WorldState, task: &TaskSpec) -> Terminal {
    if state.defeated {
        return Terminal::Failure;
    }
    let done = match &task.goal {
        Goal::ReachTile { floor, pos } => {
            state.current_floor == *floor && state.player_pos == *pos
        }
        Goal::DefeatMonster { id } => !state.monsters.contains_key(id),
        Goal::ReachFloor { floor } => state.current_floor == *floor,
        Goal::CollectItem { kind } => state.inventory.items(*kind) >= 1,
    };
    if done {
        Terminal::Success
    } else {
        Terminal::Ongoing
    }
}

/// Advance the world by one action. Returns the next state, the events of
/// the step and `Failure` if the action killed the warrior (`Ongoing`
/// otherwise; `Success` is a property of a task, see [`step_with_task`]).
pub fn step(state: &WorldState, action: &AgentAction) -> (WorldState, Vec<WorldEvent>, Terminal) {
    let mut next = state.clone();
    let mut events = Vec::new();
    next.turn += 1;
    if state.defeated {
        events.push(WorldEvent::IllegalMove {
            to: None,
            reason: "the warrior has fallen".into(),
        });
        return (next, events, Terminal::Failure);
    }

    match action {
        AgentAction::Move { dir } => apply_move(&mut next, *dir, &mut events),
        AgentAction::UseShovel { dir } => apply_shovel(&mut next, *dir, &mut events),
        AgentAction::UseWing => apply_wing(&mut next, &mut events),
        AgentAction::Trade { stat } => apply_trade(&mut next, *stat, &mut events),
        AgentAction::InspectOrb => {
            if next.grid().get(next.player_pos) == Tile::Orb {
                events.push(WorldEvent::OrbInspected { entries: orb_entries(&next) });
            } else {
                events.push(WorldEvent::NoOrbAccess);
            }
        }
    }

    let terminal = if next.defeated { Terminal::Failure } else { Terminal::Ongoing };
    (next, events, terminal)
}

/// `step` plus the task's goal predicate.
pub fn step_with_task(
    state: &WorldState,
    action: &AgentAction,
    task: &TaskSpec,
) -> (WorldState, Vec<WorldEvent>, Terminal) {
    let (next, events, terminal) = step(state, action);
    let terminal = match terminal {
        Terminal::Failure => Terminal::Failure,
        _ => check_goal(&next, task),
    };
    (next, events, terminal)
}

fn apply_move(state: &mut WorldState, dir: Direction, events: &mut Vec<WorldEvent>) {
    let grid = state.grid();
    let Some(target) = dir.offset(state.player_pos, grid.rows, grid.cols) else {
        events.push(WorldEvent::IllegalMove { to: None, reason: "edge of the map".into() });
        return;
    };
    match grid.get(target) {
        Tile::Wall => {
            events.push(WorldEvent::IllegalMove { to: Some(target), reason: "wall".into() });
        }
        Tile::Empty | Tile::PlayerSpawn => {
            state.player_pos = target;
            events.push(WorldEvent::Moved { to: target });
        }
        Tile::Store => {
            state.player_pos = target;
            events.push(WorldEvent::Moved { to: target });
            events.push(WorldEvent::EnteredFixture { tile: "Store".into(), at: target });
        }
        Tile::Altar => {
            state.player_pos = target;
            events.push(WorldEvent::Moved { to: target });
            events.push(WorldEvent::EnteredFixture { tile: "Altar".into(), at: target });
        }
        Tile::Orb => {
            state.player_pos = target;
            events.push(WorldEvent::Moved { to: target });
            events.push(WorldEvent::EnteredFixture { tile: "Orb".into(), at: target });
        }
        Tile::Key { color } => {
            *state.inventory.keys_mut(color) += 1;
            state.floors[state.current_floor].set(target, Tile::Empty);
            state.player_pos = target;
            events.push(WorldEvent::Moved { to: target });
            events.push(WorldEvent::CollectedKey { color, at: target });
        }
        Tile::HealthPotion { amount } => {
            state.player_stats.life += amount;
            state.floors[state.current_floor].set(target, Tile::Empty);
            state.player_pos = target;
            events.push(WorldEvent::Moved { to: target });
            events.push(WorldEvent::CollectedPotion { amount, at: target });
        }
        Tile::Crystal { stat, amount } => {
            match stat {
                StatKind::Attack => state.player_stats.attack += amount,
                StatKind::Defense => state.player_stats.defense += amount,
                StatKind::Life => state.player_stats.life += amount,
            }
            state.floors[state.current_floor].set(target, Tile::Empty);
            state.player_pos = target;
            events.push(WorldEvent::Moved { to: target });
            events.push(WorldEvent::CollectedCrystal { stat, amount, at: target });
        }
        Tile::Item { kind } => {
            *state.inventory.items_mut(kind) += 1;
            state.floors[state.current_floor].set(target, Tile::Empty);
            state.player_pos = target;
            events.push(WorldEvent::Moved { to: target });
            events.push(WorldEvent::CollectedItem { kind, at: target });
        }
        Tile::Door { color } => {
            if state.inventory.keys(color) >= 1 {
                *state.inventory.keys_mut(color) -= 1;
                state.floors[state.current_floor].set(target, Tile::Empty);
                state.player_pos = target;
                events.push(WorldEvent::DoorOpened { color, at: target });
                events.push(WorldEvent::Moved { to: target });
            } else {
                events.push(WorldEvent::IllegalMove {
                    to: Some(target),
                    reason: format!("locked {} door", color.name().to_lowercase()),
                });
            }
        }
        Tile::Monster { id } => apply_combat(state, id, target, events),
        Tile::Stairs { target: floor } => {
            state.player_pos = target;
            events.push(WorldEvent::Moved { to: target });
            if floor < state.floors.len() {
                let landed = stairs_landing(state, floor);
                state.current_floor = floor;
                state.player_pos = landed;
                events.push(WorldEvent::UsedStairs { to_floor: floor, landed_at: landed });
            } else {
                events.push(WorldEvent::ReachedExit { at: target });
            }
        }
    }
}

/// Landing cell on the destination floor: the stairs that point back at the
/// floor we came from, the same coordinates when standable, else the first
/// standable cell in row-major order.
fn stairs_landing(state: &WorldState, to_floor: usize) -> Pos {
    let from = state.current_floor;
    let dest = &state.floors[to_floor];
    for (pos, tile) in dest.iter() {
        if tile == (Tile::Stairs { target: from }) {
            return pos;
        }
    }
    if dest.in_bounds(state.player_pos) && dest.get(state.player_pos).is_standable() {
        return state.player_pos;
    }
    dest.iter()
        .find(|(_, t)| t.is_standable())
        .map(|(p, _)| p)
        .unwrap_or(state.player_pos)
}

fn apply_combat(state: &mut WorldState, id: MonsterId, target: Pos, events: &mut Vec<WorldEvent>) {
    let monster = state.monsters.get(&id).expect("monster tile has an entry").clone();
    let out = resolve_combat(&state.player_stats, &monster.stats, &monster.kind, &state.rules.combat);
    if !out.feasible {
        events.push(WorldEvent::CombatInfeasible { monster: id });
        return;
    }
    let turns = out.turns.unwrap_or(1);
    events.push(WorldEvent::Fought {
        monster: id,
        at: target,
        turns,
        damage_taken: out.damage_taken,
        residual_life: out.residual_life,
        lethal: out.lethal(),
    });
    if out.lethal() {
        state.player_stats.life = 0;
        state.defeated = true;
        return;
    }
    // Committed: the monster falls, the warrior takes its cell and rewards.
    state.player_stats.life = out.residual_life as u32;
    state.inventory.gold += monster.reward_gold;
    state.inventory.experience += monster.reward_exp;
    state.monsters.remove(&id);
    state.floors[state.current_floor].set(target, Tile::Empty);
    state.player_pos = target;
}

fn apply_shovel(state: &mut WorldState, dir: Direction, events: &mut Vec<WorldEvent>) {
    if state.inventory.shovels == 0 {
        events.push(WorldEvent::ShovelFailed { reason: "no shovel held".into() });
        return;
    }
    let grid = state.grid();
    let Some(target) = dir.offset(state.player_pos, grid.rows, grid.cols) else {
        events.push(WorldEvent::ShovelFailed { reason: "edge of the map".into() });
        return;
    };
    if grid.get(target) != Tile::Wall {
        events.push(WorldEvent::ShovelFailed { reason: "no wall there".into() });
        return;
    }
    state.inventory.shovels -= 1;
    state.floors[state.current_floor].set(target, Tile::Empty);
    events.push(WorldEvent::WallBroken { at: target });
}

fn apply_wing(state: &mut WorldState, events: &mut Vec<WorldEvent>) {
    if state.inventory.wings == 0 {
        events.push(WorldEvent::WingBlocked { target: None });
        return;
    }
    let grid = state.grid();
    let target = Pos::new(
        grid.rows - 1 - state.player_pos.row,
        grid.cols - 1 - state.player_pos.col,
    );
    if !grid.get(target).is_standable() {
        events.push(WorldEvent::WingBlocked { target: Some(target) });
        return;
    }
    state.inventory.wings -= 1;
    let from = state.player_pos;
    state.player_pos = target;
    events.push(WorldEvent::WingFlew { from, to: target });
}

fn apply_trade(state: &mut WorldState, stat: StatKind, events: &mut Vec<WorldEvent>) {
    let here = state.grid().get(state.player_pos);
    let currency = match here {
        Tile::Store => "experience",
        Tile::Altar => "gold",
        _ => {
            events.push(WorldEvent::TradeFailed {
                reason: "not standing at a store or altar".into(),
            });
            return;
        }
    };
    if state.fidelity == Fidelity::Imperfect {
        events.push(WorldEvent::TradeFailed {
            reason: "trading is not available in this world".into(),
        });
        return;
    }
    let upgrades = match stat {
        StatKind::Attack => &mut state.upgrades.attack,
        StatKind::Defense => &mut state.upgrades.defense,
        StatKind::Life => &mut state.upgrades.life,
    };
    let cost = state.rules.store.cost(*upgrades + 1);
    let purse = match here {
        Tile::Store => &mut state.inventory.experience,
        _ => &mut state.inventory.gold,
    };
    if *purse < cost {
        events.push(WorldEvent::TradeFailed {
            reason: format!("need {cost} {currency}, have {purse}"),
        });
        return;
    }
    *purse -= cost;
    *upgrades += 1;
    match stat {
        StatKind::Attack => state.player_stats.attack += state.rules.store.attack_gain,
        StatKind::Defense => state.player_stats.defense += state.rules.store.defense_gain,
        StatKind::Life => state.player_stats.life += state.rules.store.life_gain,
    }
    events.push(WorldEvent::Traded { stat, cost, currency: currency.into() });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Inventory, Monster, MonsterKind, Stats};
    use crate::world::{Grid, RuleSet, UpgradeCounts, WorldState};
    use std::collections::BTreeMap;

    fn world_5x5() -> WorldState {
        WorldState {
            floors: vec![Grid::filled(5, 5, Tile::Empty)],
            current_floor: 0,
            player_pos: Pos::new(0, 0),
            player_stats: Stats::new(10, 5, 100),
            spawn_stats: Stats::new(10, 5, 100),
            spawn_pos: Pos::new(0, 0),
            inventory: Inventory::default(),
            upgrades: UpgradeCounts::default(),
            monsters: BTreeMap::new(),
            fidelity: Fidelity::Perfect,
            seed: 0,
            turn: 0,
            defeated: false,
            rules: RuleSet::default(),
        }
    }

    fn with_monster(mut w: WorldState, id: u32, pos: Pos, stats: Stats) -> WorldState {
        let id = MonsterId(id);
        w.floors[0].set(pos, Tile::Monster { id });
        w.monsters.insert(
            id,
            Monster::new(MonsterKind::Normal, stats, 10, 15, pos, 0).unwrap(),
        );
        w
    }

    #[test]
    fn free_move_shifts_position() {
        let w = world_5x5();
        let (next, events, term) = step(&w, &AgentAction::Move { dir: Direction::Right });
        assert_eq!(next.player_pos, Pos::new(0, 1));
        assert_eq!(events, vec![WorldEvent::Moved { to: Pos::new(0, 1) }]);
        assert_eq!(term, Terminal::Ongoing);
        assert_eq!(next.turn, 1);
    }

    #[test]
    fn wall_move_is_a_noop_event() {
        let mut w = world_5x5();
        w.floors[0].set(Pos::new(0, 1), Tile::Wall);
        let (next, events, _) = step(&w, &AgentAction::Move { dir: Direction::Right });
        assert_eq!(next.player_pos, Pos::new(0, 0));
        assert!(matches!(events[0], WorldEvent::IllegalMove { .. }));
        assert_eq!(next.turn, 1);
    }

    #[test]
    fn locked_door_without_key_blocks() {
        let mut w = world_5x5();
        w.floors[0].set(Pos::new(0, 1), Tile::Door { color: KeyColor::Yellow });
        let (next, events, _) = step(&w, &AgentAction::Move { dir: Direction::Right });
        assert_eq!(next.player_pos, Pos::new(0, 0));
        assert!(matches!(events[0], WorldEvent::IllegalMove { .. }));
    }

    #[test]
    fn door_with_key_opens_and_consumes() {
        let mut w = world_5x5();
        w.floors[0].set(Pos::new(0, 1), Tile::Door { color: KeyColor::Yellow });
        w.inventory.yellow_keys = 2;
        let (next, events, _) = step(&w, &AgentAction::Move { dir: Direction::Right });
        assert_eq!(next.player_pos, Pos::new(0, 1));
        assert_eq!(next.inventory.yellow_keys, 1);
        assert_eq!(next.floors[0].get(Pos::new(0, 1)), Tile::Empty);
        assert!(matches!(events[0], WorldEvent::DoorOpened { .. }));
    }

    #[test]
    fn winning_combat_credits_rewards() {
        let w = world_5x5();
        let mut w = with_monster(w, 0, Pos::new(0, 1), Stats::new(15, 5, 50));
        w.player_stats = Stats::new(12, 8, 535);
        let (next, events, term) = step(&w, &AgentAction::Move { dir: Direction::Right });
        assert_eq!(term, Terminal::Ongoing);
        assert_eq!(next.player_stats.life, 479);
        assert_eq!(next.inventory.gold, 10);
        assert_eq!(next.inventory.experience, 15);
        assert!(next.monsters.is_empty());
        assert_eq!(next.player_pos, Pos::new(0, 1));
        assert!(matches!(events[0], WorldEvent::Fought { lethal: false, .. }));
    }

    #[test]
    fn lethal_combat_fails_the_episode() {
        let w = world_5x5();
        let w = with_monster(w, 0, Pos::new(0, 1), Stats::new(20, 8, 70));
        let (next, events, term) = step(&w, &AgentAction::Move { dir: Direction::Right });
        assert_eq!(term, Terminal::Failure);
        assert!(next.defeated);
        assert!(next.monsters.contains_key(&MonsterId(0)));
        assert!(matches!(events[0], WorldEvent::Fought { lethal: true, .. }));
    }

    #[test]
    fn infeasible_combat_is_refused() {
        let w = world_5x5();
        let w = with_monster(w, 0, Pos::new(0, 1), Stats::new(5, 15, 50));
        let (next, events, term) = step(&w, &AgentAction::Move { dir: Direction::Right });
        assert_eq!(term, Terminal::Ongoing);
        assert_eq!(next.player_pos, Pos::new(0, 0));
        assert_eq!(events, vec![WorldEvent::CombatInfeasible { monster: MonsterId(0) }]);
    }

    #[test]
    fn wing_reflects_through_center() {
        let mut w = world_5x5();
        w.player_pos = Pos::new(1, 2);
        w.inventory.wings = 1;
        let (next, events, _) = step(&w, &AgentAction::UseWing);
        assert_eq!(next.player_pos, Pos::new(3, 2));
        assert_eq!(next.inventory.wings, 0);
        assert!(matches!(events[0], WorldEvent::WingFlew { .. }));
    }

    #[test]
    fn wing_blocked_by_wall_changes_nothing_but_turn() {
        let mut w = world_5x5();
        w.player_pos = Pos::new(1, 2);
        w.inventory.wings = 1;
        w.floors[0].set(Pos::new(3, 2), Tile::Wall);
        let (next, events, _) = step(&w, &AgentAction::UseWing);
        assert_eq!(next.player_pos, Pos::new(1, 2));
        assert_eq!(next.inventory.wings, 1);
        assert_eq!(next.turn, 1);
        assert!(matches!(events[0], WorldEvent::WingBlocked { target: Some(_) }));
    }

    #[test]
    fn trade_applies_schedule_and_grows_cost() {
        let mut w = world_5x5();
        w.floors[0].set(Pos::new(0, 0), Tile::Store);
        w.inventory.experience = 100;
        let (w1, ev1, _) = step(&w, &AgentAction::Trade { stat: StatKind::Attack });
        assert_eq!(w1.player_stats.attack, 12);
        assert_eq!(w1.inventory.experience, 80);
        assert!(matches!(ev1[0], WorldEvent::Traded { cost: 20, .. }));
        let (w2, ev2, _) = step(&w1, &AgentAction::Trade { stat: StatKind::Attack });
        assert_eq!(w2.player_stats.attack, 14);
        assert_eq!(w2.inventory.experience, 40);
        assert!(matches!(ev2[0], WorldEvent::Traded { cost: 40, .. }));
        let (w3, ev3, _) = step(&w2, &AgentAction::Trade { stat: StatKind::Attack });
        assert_eq!(w3.player_stats.attack, 14);
        assert!(matches!(ev3[0], WorldEvent::TradeFailed { .. }));
        let _ = w3;
    }

    #[test]
    fn altar_trades_spend_gold() {
        let mut w = world_5x5();
        w.floors[0].set(Pos::new(0, 0), Tile::Altar);
        w.inventory.gold = 25;
        let (w1, ev, _) = step(&w, &AgentAction::Trade { stat: StatKind::Life });
        assert_eq!(w1.player_stats.life, 150);
        assert_eq!(w1.inventory.gold, 5);
        assert!(matches!(ev[0], WorldEvent::Traded { ref currency, .. } if currency == "gold"));
    }

    #[test]
    fn orb_report_needs_orb_tile() {
        let w = world_5x5();
        assert!(orb_report(&w).is_err());
        let mut w = with_monster(w, 0, Pos::new(2, 2), Stats::new(15, 5, 50));
        w.floors[0].set(Pos::new(0, 0), Tile::Orb);
        let report = orb_report(&w).unwrap();
        assert_eq!(report.len(), 1);
        assert_eq!(
            report[0].verdict,
            OrbVerdict::Damage { amount: 100, lethal: false }
        );
    }

    #[test]
    fn orb_marks_infeasible_and_lethal_separately() {
        let w = world_5x5();
        let w = with_monster(w, 0, Pos::new(2, 2), Stats::new(15, 5, 50));
        let mut w = with_monster(w, 1, Pos::new(3, 3), Stats::new(20, 8, 70));
        w.floors[0].set(Pos::new(0, 0), Tile::Orb);
        let report = orb_report(&w).unwrap();
        assert_eq!(report[0].verdict, OrbVerdict::Damage { amount: 100, lethal: false });
        assert_eq!(report[1].verdict, OrbVerdict::Damage { amount: 525, lethal: true });
        let mut w = with_monster(w, 2, Pos::new(4, 2), Stats::new(5, 12, 50));
        w.floors[0].set(Pos::new(0, 0), Tile::Orb);
        let report = orb_report(&w).unwrap();
        assert_eq!(report[2].verdict, OrbVerdict::Infeasible);
    }

    #[test]
    fn stairs_switch_floor_and_land_on_back_stairs() {
        let mut w = world_5x5();
        w.floors.push(Grid::filled(5, 5, Tile::Empty));
        w.floors[0].set(Pos::new(0, 1), Tile::Stairs { target: 1 });
        w.floors[1].set(Pos::new(4, 4), Tile::Stairs { target: 0 });
        let (next, events, _) = step(&w, &AgentAction::Move { dir: Direction::Right });
        assert_eq!(next.current_floor, 1);
        assert_eq!(next.player_pos, Pos::new(4, 4));
        assert!(events
            .iter()
            .any(|e| matches!(e, WorldEvent::UsedStairs { to_floor: 1, .. })));
    }

    #[test]
    fn exit_stairs_do_not_switch_floor() {
        let mut w = world_5x5();
        w.floors[0].set(Pos::new(0, 1), Tile::Stairs { target: 1 });
        let (next, events, _) = step(&w, &AgentAction::Move { dir: Direction::Right });
        assert_eq!(next.current_floor, 0);
        assert_eq!(next.player_pos, Pos::new(0, 1));
        assert!(events.iter().any(|e| matches!(e, WorldEvent::ReachedExit { .. })));
    }

    #[test]
    fn goal_predicates() {
        let w = world_5x5();
        let task = TaskSpec {
            id: "t".into(),
            goal: Goal::ReachTile { floor: 0, pos: Pos::new(0, 0) },
            description: String::new(),
        };
        assert_eq!(check_goal(&w, &task), Terminal::Success);
        let task = TaskSpec {
            id: "t".into(),
            goal: Goal::DefeatMonster { id: MonsterId(9) },
            description: String::new(),
        };
        // Absent from the monster map counts as defeated.
        assert_eq!(check_goal(&w, &task), Terminal::Success);
        let task = TaskSpec {
            id: "t".into(),
            goal: Goal::ReachFloor { floor: 1 },
            description: String::new(),
        };
        assert_eq!(check_goal(&w, &task), Terminal::Ongoing);
        let mut dead = w.clone();
        dead.defeated = true;
        assert_eq!(check_goal(&dead, &task), Terminal::Failure);
    }
}
