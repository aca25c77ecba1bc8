//! World snapshot, rule configuration and canonical serialization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::combat::CombatRules;
use crate::types::{Fidelity, Inventory, KeyColor, Monster, MonsterId, Pos, Stats, Tile};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("no orb access at {0}")]
    NoOrbAccess(Pos),
}

/// One floor: a dense row-major tile grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    tiles: Vec<Tile>,
}

impl Grid {
    pub fn filled(rows: usize, cols: usize, tile: Tile) -> Self {
        Self {
            rows,
            cols,
            tiles: vec![tile; rows * cols],
        }
    }

    pub fn in_bounds(&self, pos: Pos) -> bool {
        pos.row < self.rows && pos.col < self.cols
    }

    pub fn get(&self, pos: Pos) -> Tile {
        self.tiles[pos.row * self.cols + pos.col]
    }

    pub fn set(&mut self, pos: Pos, tile: Tile) {
        self.tiles[pos.row * self.cols + pos.col] = tile;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Pos, Tile)> + '_ {
        self.tiles.iter().enumerate().map(move |(i, t)| {
            (
                Pos {
                    row: i / self.cols,
                    col: i % self.cols,
                },
                *t,
            )
        })
    }
}

/// Cost and gain schedule for stat upgrades at stores (experience) and
/// altars (gold). The k-th upgrade of a stat costs
/// `base_cost * growth^(k-1)`, so each upgrade is strictly dearer than
/// the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoreSchedule {
    pub base_cost: u32,
    pub growth: u32,
    pub attack_gain: u32,
    pub defense_gain: u32,
    pub life_gain: u32,
}

impl Default for StoreSchedule {
    fn default() -> Self {
        Self {
            base_cost: 20,
            growth: 2,
            attack_gain: 2,
            defense_gain: 2,
            life_gain: 50,
        }
    }
}

impl StoreSchedule {
    /// Cost of the upgrade number `k` (1-based) of a single stat.
    pub fn cost(&self, k: u32) -> u32 {
        self.base_cost.saturating_mul(self.growth.saturating_pow(k.saturating_sub(1)))
    }
}

/// How many upgrades of each stat have been purchased so far (store and
/// altar purchases share the ladder per stat).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct UpgradeCounts {
    pub attack: u32,
    pub defense: u32,
    pub life: u32,
}

/// The rule knobs that ride inside the state so that `step` stays a pure
/// function of `(state, action)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RuleSet {
    pub combat: CombatRules,
    pub store: StoreSchedule,
}

/// Full world snapshot. Serializes to canonical JSON (struct field order
/// plus `BTreeMap` key order), so [`WorldState::state_hash`] is platform
/// independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub floors: Vec<Grid>,
    pub current_floor: usize,
    pub player_pos: Pos,
    pub player_stats: Stats,
    /// Stats at spawn time, kept for observation rendering.
    pub spawn_stats: Stats,
    pub spawn_pos: Pos,
    pub inventory: Inventory,
    pub upgrades: UpgradeCounts,
    pub monsters: BTreeMap<MonsterId, Monster>,
    pub fidelity: Fidelity,
    pub seed: u64,
    pub turn: u64,
    /// Set when a combat left the warrior with strictly negative life.
    pub defeated: bool,
    pub rules: RuleSet,
}

impl WorldState {
    pub fn grid(&self) -> &Grid {
        &self.floors[self.current_floor]
    }

    pub fn tile_at(&self, floor: usize, pos: Pos) -> Tile {
        self.floors[floor].get(pos)
    }

    /// Monsters still alive on the given floor, in id order.
    pub fn monsters_on_floor(&self, floor: usize) -> impl Iterator<Item = (&MonsterId, &Monster)> {
        self.monsters.iter().filter(move |(_, m)| m.floor == floor)
    }

    /// Canonical JSON rendering with stable key ordering.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("world state serializes")
    }

    /// SHA-256 over the canonical JSON form.
    pub fn state_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Check the structural invariants. Generators call this before
    /// returning a world and tests call it on every mutated state.
    pub fn validate(&self) -> Result<(), EngineError> {
        let err = |m: String| Err(EngineError::InvalidWorld(m));
        if self.floors.is_empty() {
            return err("world has no floors".into());
        }
        if self.current_floor >= self.floors.len() {
            return err(format!("current_floor {} out of range", self.current_floor));
        }
        let grid = self.grid();
        if !grid.in_bounds(self.player_pos) {
            return err(format!("player at {} out of bounds", self.player_pos));
        }
        if grid.get(self.player_pos) == Tile::Wall {
            return err(format!("player standing inside a wall at {}", self.player_pos));
        }

        // Monster <-> tile bijection.
        let mut seen = std::collections::BTreeSet::new();
        for (floor_idx, floor) in self.floors.iter().enumerate() {
            for (pos, tile) in floor.iter() {
                if let Tile::Monster { id } = tile {
                    let m = self
                        .monsters
                        .get(&id)
                        .ok_or_else(|| EngineError::InvalidWorld(format!("{id} tile without entry")))?;
                    if m.pos != pos || m.floor != floor_idx {
                        return err(format!("{id} entry does not match its tile position"));
                    }
                    if !seen.insert(id) {
                        return err(format!("{id} appears on more than one tile"));
                    }
                }
            }
        }
        for id in self.monsters.keys() {
            if !seen.contains(id) {
                return err(format!("{id} entry without a tile"));
            }
        }

        for (id, m) in &self.monsters {
            if !m.kind.allowed_in(self.fidelity) {
                return err(format!("{id} kind {} forbidden in this fidelity", m.kind.label()));
            }
        }

        if self.fidelity == Fidelity::Imperfect {
            if self.floors.len() != 1 {
                return err(format!(
                    "imperfect world must have exactly one floor, has {}",
                    self.floors.len()
                ));
            }
            for (pos, tile) in self.floors[0].iter() {
                match tile {
                    Tile::Store | Tile::Altar | Tile::Item { .. } => {
                        return err(format!("forbidden tile {tile:?} at {pos} in imperfect world"));
                    }
                    Tile::Door { color } | Tile::Key { color } if color != KeyColor::Yellow => {
                        return err(format!("non-yellow {tile:?} at {pos} in imperfect world"));
                    }
                    Tile::Stairs { target } if target < self.floors.len() => {
                        return err(format!("stairs to another floor at {pos} in imperfect world"));
                    }
                    _ => {}
                }
            }
        } else {
            // Orb only on the first floor in either fidelity.
            for (floor_idx, floor) in self.floors.iter().enumerate().skip(1) {
                for (pos, tile) in floor.iter() {
                    if tile == Tile::Orb {
                        return err(format!("orb on floor {floor_idx} at {pos}"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::MonsterKind;

    fn tiny_world() -> WorldState {
        let mut grid = Grid::filled(3, 3, Tile::Empty);
        grid.set(Pos::new(1, 1), Tile::Wall);
        WorldState {
            floors: vec![grid],
            current_floor: 0,
            player_pos: Pos::new(0, 0),
            player_stats: Stats::new(10, 5, 100),
            spawn_stats: Stats::new(10, 5, 100),
            spawn_pos: Pos::new(0, 0),
            inventory: Inventory::default(),
            upgrades: UpgradeCounts::default(),
            monsters: BTreeMap::new(),
            fidelity: Fidelity::Imperfect,
            seed: 1,
            turn: 0,
            defeated: false,
            rules: RuleSet::default(),
        }
    }

    #[test]
    fn canonical_json_is_stable() {
        let w = tiny_world();
        assert_eq!(w.canonical_json(), w.clone().canonical_json());
        assert_eq!(w.state_hash(), w.state_hash());
    }

    #[test]
    fn validate_rejects_player_in_wall() {
        let mut w = tiny_world();
        w.player_pos = Pos::new(1, 1);
        assert!(w.validate().is_err());
    }

    #[test]
    fn validate_rejects_orphan_monster_entry() {
        let mut w = tiny_world();
        w.monsters.insert(
            MonsterId(0),
            Monster::new(MonsterKind::Normal, Stats::new(5, 5, 5), 1, 1, Pos::new(2, 2), 0)
                .unwrap(),
        );
        assert!(w.validate().is_err());
    }

    #[test]
    fn validate_rejects_forbidden_imperfect_tiles() {
        let mut w = tiny_world();
        w.floors[0].set(Pos::new(2, 0), Tile::Store);
        assert!(w.validate().is_err());
        let mut w = tiny_world();
        w.floors[0].set(Pos::new(2, 0), Tile::Key { color: KeyColor::Red });
        assert!(w.validate().is_err());
    }

    #[test]
    fn store_schedule_is_strictly_increasing() {
        let s = StoreSchedule::default();
        for k in 1..10 {
            assert!(s.cost(k + 1) > s.cost(k));
        }
        assert_eq!(s.cost(1), 20);
        assert_eq!(s.cost(3), 80);
    }
}
