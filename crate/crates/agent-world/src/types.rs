//! Core domain types shared by the engine, generator and solver.

use serde::{Deserialize, Serialize};

/// Which variant of the environment a world belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    /// Simplified training proxy: one floor, reduced feature set.
    Imperfect,
    /// Full game: multiple floors, all features.
    Perfect,
}

/// Grid coordinate, 0-based, row-major.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Combat attributes. Life 0 defeats a monster; the warrior survives a
/// combat as long as the residual life is not strictly negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Stats {
    pub attack: u32,
    pub defense: u32,
    pub life: u32,
}

impl Stats {
    pub fn new(attack: u32, defense: u32, life: u32) -> Self {
        Self {
            attack,
            defense,
            life,
        }
    }
}

/// Key and door colors. Yellow is the common color and the only one
/// permitted in imperfect fidelity.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum KeyColor {
    Yellow,
    Blue,
    Red,
}

impl KeyColor {
    pub const ALL: [KeyColor; 3] = [KeyColor::Yellow, KeyColor::Blue, KeyColor::Red];

    pub fn name(&self) -> &'static str {
        match self {
            KeyColor::Yellow => "Yellow",
            KeyColor::Blue => "Blue",
            KeyColor::Red => "Red",
        }
    }
}

/// Which stat a crystal or a trade upgrades.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    Attack,
    Defense,
    Life,
}

impl StatKind {
    pub fn name(&self) -> &'static str {
        match self {
            StatKind::Attack => "attack",
            StatKind::Defense => "defense",
            StatKind::Life => "life",
        }
    }
}

/// Carryable tools. Both are consumed on successful use.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    /// Breaks one adjacent wall.
    Shovel,
    /// Teleports to the point-reflected cell.
    Wing,
}

impl ItemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ItemKind::Shovel => "Shovel",
            ItemKind::Wing => "Wing",
        }
    }
}

/// Stable identifier of a monster within one world.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct MonsterId(pub u32);

impl std::fmt::Display for MonsterId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "M{}", self.0 + 1)
    }
}

/// Monster taxonomy. Construction enforces the stat-shape invariants;
/// see [`Monster::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonsterKind {
    /// Balanced attack and defense.
    Normal,
    /// High attack, low defense (attack > defense enforced).
    Wizard,
    /// High defense, low attack (defense > attack enforced).
    Guardian,
    /// Drains a fixed fraction of the warrior's current life each exchange.
    Vampire { lifesteal_pct: f64 },
    /// Floor or tower boss; combat math is the normal rule.
    Boss,
}

impl MonsterKind {
    pub fn label(&self) -> &'static str {
        match self {
            MonsterKind::Normal => "Normal",
            MonsterKind::Wizard => "Wizard",
            MonsterKind::Guardian => "Guardian",
            MonsterKind::Vampire { .. } => "Vampire",
            MonsterKind::Boss => "Boss",
        }
    }

    /// Kinds allowed in a world of the given fidelity.
    pub fn allowed_in(&self, fidelity: Fidelity) -> bool {
        match fidelity {
            Fidelity::Perfect => true,
            Fidelity::Imperfect => matches!(self, MonsterKind::Normal | MonsterKind::Boss),
        }
    }
}

/// A monster instance: kind, combat stats, rewards and placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monster {
    pub kind: MonsterKind,
    pub stats: Stats,
    pub reward_gold: u32,
    pub reward_exp: u32,
    pub pos: Pos,
    pub floor: usize,
}

impl Monster {
    /// Build a monster, enforcing the kind-specific stat invariants.
    pub fn new(
        kind: MonsterKind,
        stats: Stats,
        reward_gold: u32,
        reward_exp: u32,
        pos: Pos,
        floor: usize,
    ) -> Result<Self, String> {
        match kind {
            MonsterKind::Wizard if stats.attack <= stats.defense => {
                return Err(format!(
                    "wizard requires attack > defense, got {}/{}",
                    stats.attack, stats.defense
                ));
            }
            MonsterKind::Guardian if stats.defense <= stats.attack => {
                return Err(format!(
                    "guardian requires defense > attack, got {}/{}",
                    stats.defense, stats.attack
                ));
            }
            MonsterKind::Vampire { lifesteal_pct }
                if !(lifesteal_pct > 0.0 && lifesteal_pct < 1.0) =>
            {
                return Err(format!("lifesteal_pct must be in (0,1), got {lifesteal_pct}"));
            }
            _ => {}
        }
        Ok(Self {
            kind,
            stats,
            reward_gold,
            reward_exp,
            pos,
            floor,
        })
    }
}

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum Tile {
    Empty,
    Wall,
    Door { color: KeyColor },
    Key { color: KeyColor },
    HealthPotion { amount: u32 },
    Crystal { stat: StatKind, amount: u32 },
    Monster { id: MonsterId },
    /// Stairs to `target` floor; a target at or past the floor count is the
    /// tower exit and does not switch floors.
    Stairs { target: usize },
    /// Trade experience for stat upgrades.
    Store,
    /// Trade gold for stat upgrades at the same schedule.
    Altar,
    /// Fixture reporting predicted combat damage for the current floor.
    Orb,
    Item { kind: ItemKind },
    PlayerSpawn,
}

impl Tile {
    /// Whether the warrior could stand here with no interaction pending.
    pub fn is_standable(&self) -> bool {
        matches!(
            self,
            Tile::Empty
                | Tile::PlayerSpawn
                | Tile::Store
                | Tile::Altar
                | Tile::Orb
                | Tile::Stairs { .. }
        )
    }
}

/// What the warrior carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Inventory {
    pub yellow_keys: u32,
    pub blue_keys: u32,
    pub red_keys: u32,
    pub gold: u32,
    pub experience: u32,
    pub shovels: u32,
    pub wings: u32,
}

impl Inventory {
    pub fn keys(&self, color: KeyColor) -> u32 {
        match color {
            KeyColor::Yellow => self.yellow_keys,
            KeyColor::Blue => self.blue_keys,
            KeyColor::Red => self.red_keys,
        }
    }

    pub fn keys_mut(&mut self, color: KeyColor) -> &mut u32 {
        match color {
            KeyColor::Yellow => &mut self.yellow_keys,
            KeyColor::Blue => &mut self.blue_keys,
            KeyColor::Red => &mut self.red_keys,
        }
    }

    pub fn items(&self, kind: ItemKind) -> u32 {
        match kind {
            ItemKind::Shovel => self.shovels,
            ItemKind::Wing => self.wings,
        }
    }

    pub fn items_mut(&mut self, kind: ItemKind) -> &mut u32 {
        match kind {
            ItemKind::Shovel => &mut self.shovels,
            ItemKind::Wing => &mut self.wings,
        }
    }
}
