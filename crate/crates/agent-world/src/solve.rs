//! Exhaustive solvability search with a replayable witness.
//!
//! Best-first search over engine states, keyed by everything except the
//! warrior's life and the turn counter; a revisit is pruned unless it
//! arrives with strictly more life (more life never hurts). Children are
//! produced by the real `step` function, so a returned witness replays to
//! `Success` by construction.

use std::collections::{BinaryHeap, HashMap};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{check_goal, step, AgentAction, Direction, Terminal, TaskSpec, WorldEvent};
use crate::types::{Inventory, Pos, StatKind, Tile};
use crate::world::{UpgradeCounts, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveLimits {
    /// Total cells across all floors; the search refuses larger worlds.
    pub max_cells: usize,
    /// Expanded-node budget before giving up.
    pub max_nodes: usize,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            max_cells: 400,
            max_nodes: 200_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("grid too large for exhaustive search: {cells} cells > {max}")]
    GridTooLarge { cells: usize, max: usize },
    #[error("search budget exceeded after {nodes} nodes")]
    SearchBudgetExceeded { nodes: usize },
}

/// `Some(actions)` when solvable (empty when the start already satisfies
/// the goal), `None` when the full reachable space holds no solution.
pub type Solution = Option<Vec<AgentAction>>;

#[derive(PartialEq, Eq, Hash)]
struct VisitKey {
    floor: usize,
    pos: Pos,
    attack: u32,
    defense: u32,
    inventory: Inventory,
    upgrades: UpgradeCounts,
    grids: u64,
}

fn visit_key(state: &WorldState) -> VisitKey {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for floor in &state.floors {
        for (_, tile) in floor.iter() {
            tile.hash(&mut h);
        }
    }
    VisitKey {
        floor: state.current_floor,
        pos: state.player_pos,
        attack: state.player_stats.attack,
        defense: state.player_stats.defense,
        inventory: state.inventory,
        upgrades: state.upgrades,
        grids: h.finish(),
    }
}

/// True when every event of the step is a refusal, i.e. the child state can
/// only differ from the parent by its turn counter.
fn step_was_refused(events: &[WorldEvent]) -> bool {
    events.iter().all(|e| {
        matches!(
            e,
            WorldEvent::IllegalMove { .. }
                | WorldEvent::WingBlocked { .. }
                | WorldEvent::ShovelFailed { .. }
                | WorldEvent::TradeFailed { .. }
                | WorldEvent::CombatInfeasible { .. }
                | WorldEvent::NoOrbAccess
        )
    })
}

fn candidate_actions(state: &WorldState) -> Vec<AgentAction> {
    let mut actions = Vec::with_capacity(12);
    for dir in Direction::ALL {
        actions.push(AgentAction::Move { dir });
    }
    if state.inventory.shovels > 0 {
        for dir in Direction::ALL {
            actions.push(AgentAction::UseShovel { dir });
        }
    }
    if state.inventory.wings > 0 {
        actions.push(AgentAction::UseWing);
    }
    if matches!(state.grid().get(state.player_pos), Tile::Store | Tile::Altar) {
        for stat in [StatKind::Attack, StatKind::Defense, StatKind::Life] {
            actions.push(AgentAction::Trade { stat });
        }
    }
    actions
}

struct HeapEntry {
    life: i64,
    order: u64,
    node: usize,
    state: WorldState,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.life == other.life && self.order == other.order
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max life first, then FIFO for determinism.
        self.life
            .cmp(&other.life)
            .then(other.order.cmp(&self.order))
    }
}

/// Search for an action sequence that satisfies the task goal.
pub fn validate_solvable(
    state: &WorldState,
    task: &TaskSpec,
    limits: &SolveLimits,
) -> Result<Solution, SolveError> {
    let cells: usize = state.floors.iter().map(|g| g.rows * g.cols).sum();
    if cells > limits.max_cells {
        return Err(SolveError::GridTooLarge { cells, max: limits.max_cells });
    }
    if check_goal(state, task) == Terminal::Success {
        return Ok(Some(Vec::new()));
    }

    // (parent index, action that produced this node)
    let mut arena: Vec<(usize, Option<AgentAction>)> = vec![(0, None)];
    let mut visited: HashMap<VisitKey, i64> = HashMap::new();
    visited.insert(visit_key(state), state.player_stats.life as i64);

    let mut heap = BinaryHeap::new();
    let mut order = 0u64;
    heap.push(HeapEntry {
        life: state.player_stats.life as i64,
        order,
        node: 0,
        state: state.clone(),
    });

    let mut expanded = 0usize;
    while let Some(entry) = heap.pop() {
        expanded += 1;
        if expanded > limits.max_nodes {
            return Err(SolveError::SearchBudgetExceeded { nodes: expanded });
        }
        for action in candidate_actions(&entry.state) {
            let (child, events, _) = step(&entry.state, &action);
            if child.defeated || step_was_refused(&events) {
                continue;
            }
            let key = visit_key(&child);
            let life = child.player_stats.life as i64;
            match visited.get(&key) {
                Some(&best) if best >= life => continue,
                _ => {}
            }
            visited.insert(key, life);
            arena.push((entry.node, Some(action)));
            let node = arena.len() - 1;
            if check_goal(&child, task) == Terminal::Success {
                return Ok(Some(unwind(&arena, node)));
            }
            order += 1;
            heap.push(HeapEntry { life, order, node, state: child });
        }
    }
    Ok(None)
}

fn unwind(arena: &[(usize, Option<AgentAction>)], mut node: usize) -> Vec<AgentAction> {
    let mut actions = Vec::new();
    while let (parent, Some(action)) = arena[node] {
        actions.push(action);
        node = parent;
    }
    actions.reverse();
    actions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{step_with_task, Goal};
    use crate::types::{Fidelity, Monster, MonsterKind, Stats};
    use crate::world::{Grid, RuleSet, WorldState};
    use std::collections::BTreeMap;

    fn base(rows: usize, cols: usize) -> WorldState {
        WorldState {
            floors: vec![Grid::filled(rows, cols, Tile::Empty)],
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

    fn reach(pos: Pos) -> TaskSpec {
        TaskSpec {
            id: "reach".into(),
            goal: Goal::ReachTile { floor: 0, pos },
            description: String::new(),
        }
    }

    #[test]
    fn start_on_goal_yields_empty_witness() {
        let w = base(5, 5);
        let sol = validate_solvable(&w, &reach(Pos::new(0, 0)), &SolveLimits::default()).unwrap();
        assert_eq!(sol, Some(Vec::new()));
    }

    #[test]
    fn open_grid_is_solvable_and_witness_replays() {
        let w = base(5, 5);
        let task = reach(Pos::new(4, 4));
        let witness = validate_solvable(&w, &task, &SolveLimits::default())
            .unwrap()
            .expect("solvable");
        let mut state = w;
        let mut term = Terminal::Ongoing;
        for action in &witness {
            let (next, _, t) = step_with_task(&state, action, &task);
            state = next;
            term = t;
        }
        assert_eq!(term, Terminal::Success);
    }

    #[test]
    fn infeasible_monster_wall_blocks() {
        // A full row of unbeatable monsters between the spawn and the goal.
        let mut w = base(5, 5);
        for col in 0..5 {
            let id = crate::types::MonsterId(col as u32);
            let pos = Pos::new(2, col);
            w.floors[0].set(pos, Tile::Monster { id });
            w.monsters.insert(
                id,
                Monster::new(MonsterKind::Normal, Stats::new(5, 15, 50), 1, 1, pos, 0).unwrap(),
            );
        }
        let sol = validate_solvable(&w, &reach(Pos::new(4, 4)), &SolveLimits::default()).unwrap();
        assert_eq!(sol, None);
    }

    #[test]
    fn key_door_sequencing_is_found() {
        // Wall row with a yellow door; the key sits in the upper region.
        let mut w = base(5, 5);
        for col in 0..5 {
            w.floors[0].set(Pos::new(2, col), Tile::Wall);
        }
        w.floors[0].set(Pos::new(2, 3), Tile::Door { color: crate::types::KeyColor::Yellow });
        w.floors[0].set(Pos::new(0, 4), Tile::Key { color: crate::types::KeyColor::Yellow });
        let task = reach(Pos::new(4, 0));
        let witness = validate_solvable(&w, &task, &SolveLimits::default())
            .unwrap()
            .expect("solvable via key");
        let mut state = w;
        for action in &witness {
            let (next, _, _) = step_with_task(&state, action, &task);
            state = next;
        }
        assert_eq!(state.player_pos, Pos::new(4, 0));
    }

    #[test]
    fn shovel_only_path_is_found() {
        let mut w = base(5, 5);
        for col in 0..5 {
            w.floors[0].set(Pos::new(2, col), Tile::Wall);
        }
        w.inventory.shovels = 1;
        let sol = validate_solvable(&w, &reach(Pos::new(4, 4)), &SolveLimits::default()).unwrap();
        assert!(sol.is_some());
    }

    #[test]
    fn oversized_grid_is_refused() {
        let w = base(25, 25);
        let err = validate_solvable(&w, &reach(Pos::new(1, 1)), &SolveLimits::default());
        assert!(matches!(err, Err(SolveError::GridTooLarge { .. })));
    }
}
