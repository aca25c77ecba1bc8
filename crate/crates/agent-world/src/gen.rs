//! Procedural world generation by rejection sampling.
//!
//! Each attempt scatters walls and features from the seeded RNG, then runs
//! the solvability search; the first layout whose task is provably solvable
//! wins. Generation is fully deterministic in `(config, seed)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::combat::CombatRules;
use crate::engine::{Goal, TaskSpec};
use crate::solve::{validate_solvable, SolveLimits};
use crate::types::{
    Fidelity, Inventory, ItemKind, KeyColor, Monster, MonsterId, MonsterKind, Pos, StatKind,
    Stats, Tile,
};
use crate::world::{Grid, RuleSet, StoreSchedule, UpgradeCounts, WorldState};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid world config: {0}")]
    Config(String),
    #[error("generation exhausted after {attempts} attempts")]
    GenerationExhausted { attempts: u32 },
}

/// What kind of task the generated world is built around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    /// Reach the exit stairs on the last floor.
    ReachExit,
    /// Defeat the boss placed on the last floor.
    DefeatBoss,
    /// Stand on the last floor.
    ReachTopFloor,
    /// Pick up a tool item (perfect fidelity only).
    CollectItem(ItemKind),
}

/// Stat ranges used when rolling a monster of a given role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonsterTable {
    pub attack: (u32, u32),
    pub defense: (u32, u32),
    pub life: (u32, u32),
    pub vampire_lifesteal: f64,
}

impl Default for MonsterTable {
    fn default() -> Self {
        Self {
            attack: (6, 16),
            defense: (1, 8),
            life: (10, 60),
            vampire_lifesteal: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub rows: usize,
    pub cols: usize,
    pub floors: usize,
    pub fidelity: Fidelity,
    pub wall_density: f64,
    pub monsters_per_floor: usize,
    pub keys_per_floor: usize,
    pub doors_per_floor: usize,
    pub potions_per_floor: usize,
    pub crystals_per_floor: usize,
    pub include_orb: bool,
    pub include_store: bool,
    pub include_altar: bool,
    pub shovels: usize,
    pub wings: usize,
    pub player_stats: Stats,
    pub monster_table: MonsterTable,
    /// reward_gold = monster life / this divisor; reward_exp = monster attack.
    pub gold_divisor: u32,
    pub goal: GoalKind,
    pub max_attempts: u32,
    pub store: StoreSchedule,
    pub combat: CombatRules,
    pub solve_limits: SolveLimits,
}

impl WorldConfig {
    /// Small single-floor training world: yellow keys only, normal monsters,
    /// no store/altar/tools.
    pub fn imperfect_default() -> Self {
        Self {
            rows: 6,
            cols: 6,
            floors: 1,
            fidelity: Fidelity::Imperfect,
            wall_density: 0.12,
            monsters_per_floor: 3,
            keys_per_floor: 1,
            doors_per_floor: 1,
            potions_per_floor: 2,
            crystals_per_floor: 1,
            include_orb: true,
            include_store: false,
            include_altar: false,
            shovels: 0,
            wings: 0,
            player_stats: Stats::new(10, 5, 100),
            monster_table: MonsterTable::default(),
            gold_divisor: 5,
            goal: GoalKind::ReachExit,
            max_attempts: 1000,
            store: StoreSchedule::default(),
            combat: CombatRules::default(),
            solve_limits: SolveLimits::default(),
        }
    }

    /// Two-floor world with the full feature set.
    pub fn perfect_default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            floors: 2,
            fidelity: Fidelity::Perfect,
            wall_density: 0.16,
            monsters_per_floor: 3,
            keys_per_floor: 2,
            doors_per_floor: 2,
            potions_per_floor: 2,
            crystals_per_floor: 2,
            include_orb: true,
            include_store: true,
            include_altar: true,
            shovels: 1,
            wings: 1,
            player_stats: Stats::new(10, 5, 120),
            monster_table: MonsterTable::default(),
            gold_divisor: 5,
            goal: GoalKind::DefeatBoss,
            max_attempts: 1000,
            store: StoreSchedule::default(),
            combat: CombatRules::default(),
            solve_limits: SolveLimits::default(),
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.rows < 5 || self.cols < 5 {
            return Err(GenError::Config(format!(
                "dimensions must be at least 5x5, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.floors == 0 {
            return Err(GenError::Config("floor count must be positive".into()));
        }
        if self.fidelity == Fidelity::Imperfect {
            if self.floors != 1 {
                return Err(GenError::Config(
                    "imperfect fidelity requires exactly one floor".into(),
                ));
            }
            if self.include_store || self.include_altar || self.shovels > 0 || self.wings > 0 {
                return Err(GenError::Config(
                    "imperfect fidelity forbids stores, altars and tool items".into(),
                ));
            }
            if matches!(self.goal, GoalKind::CollectItem(_)) {
                return Err(GenError::Config(
                    "imperfect fidelity has no items to collect".into(),
                ));
            }
        }
        if !(0.0..0.5).contains(&self.wall_density) {
            return Err(GenError::Config("wall_density must be in [0, 0.5)".into()));
        }
        Ok(())
    }
}

/// Generate a world that provably solves its default task.
pub fn generate_world(config: &WorldConfig, seed: u64) -> Result<WorldState, GenError> {
    generate_task(config, seed).map(|(state, _)| state)
}

/// Generate a `(world, task)` pair; the task is certified by the solver.
pub fn generate_task(config: &WorldConfig, seed: u64) -> Result<(WorldState, TaskSpec), GenError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _attempt in 0..config.max_attempts {
        let Some((state, task)) = roll_world(config, seed, &mut rng) else {
            continue;
        };
        if state.validate().is_err() {
            continue;
        }
        match validate_solvable(&state, &task, &config.solve_limits) {
            Ok(Some(_)) => return Ok((state, task)),
            _ => continue,
        }
    }
    Err(GenError::GenerationExhausted { attempts: config.max_attempts })
}

/// Free cells of one floor in row-major order, used as a deterministic
/// placement pool.
struct CellPool {
    cells: Vec<Pos>,
}

impl CellPool {
    fn new(grid: &Grid) -> Self {
        Self {
            cells: grid.iter().filter(|(_, t)| *t == Tile::Empty).map(|(p, _)| p).collect(),
        }
    }

    fn take(&mut self, rng: &mut ChaCha8Rng) -> Option<Pos> {
        if self.cells.is_empty() {
            return None;
        }
        let i = rng.gen_range(0..self.cells.len());
        Some(self.cells.swap_remove(i))
    }
}

fn roll_world(
    config: &WorldConfig,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Option<(WorldState, TaskSpec)> {
    let mut floors = Vec::with_capacity(config.floors);
    for _ in 0..config.floors {
        let mut grid = Grid::filled(config.rows, config.cols, Tile::Empty);
        for r in 0..config.rows {
            for c in 0..config.cols {
                if rng.gen_bool(config.wall_density) {
                    grid.set(Pos::new(r, c), Tile::Wall);
                }
            }
        }
        floors.push(grid);
    }

    let mut pools: Vec<CellPool> = floors.iter().map(CellPool::new).collect();
    let mut monsters: BTreeMap<MonsterId, Monster> = BTreeMap::new();
    let mut next_monster = 0u32;

    // Spawn on the first floor.
    let spawn = pools[0].take(rng)?;
    floors[0].set(spawn, Tile::PlayerSpawn);

    // Stairs chain up and down between consecutive floors.
    for f in 0..config.floors.saturating_sub(1) {
        let up = pools[f].take(rng)?;
        floors[f].set(up, Tile::Stairs { target: f + 1 });
        let down = pools[f + 1].take(rng)?;
        floors[f + 1].set(down, Tile::Stairs { target: f });
    }

    // Exit stairs on the last floor when the goal calls for them.
    let exit = if matches!(config.goal, GoalKind::ReachExit) {
        let pos = pools[config.floors - 1].take(rng)?;
        floors[config.floors - 1].set(pos, Tile::Stairs { target: config.floors });
        Some(pos)
    } else {
        None
    };

    if config.include_orb {
        let pos = pools[0].take(rng)?;
        floors[0].set(pos, Tile::Orb);
    }
    if config.include_store {
        let f = rng.gen_range(0..config.floors);
        let pos = pools[f].take(rng)?;
        floors[f].set(pos, Tile::Store);
    }
    if config.include_altar {
        let f = rng.gen_range(0..config.floors);
        let pos = pools[f].take(rng)?;
        floors[f].set(pos, Tile::Altar);
    }
    for (count, kind) in [(config.shovels, ItemKind::Shovel), (config.wings, ItemKind::Wing)] {
        for _ in 0..count {
            let f = rng.gen_range(0..config.floors);
            let pos = pools[f].take(rng)?;
            floors[f].set(pos, Tile::Item { kind });
        }
    }

    let colors: &[KeyColor] = match config.fidelity {
        Fidelity::Imperfect => &[KeyColor::Yellow],
        Fidelity::Perfect => &KeyColor::ALL,
    };
    for f in 0..config.floors {
        for _ in 0..config.keys_per_floor {
            let color = colors[rng.gen_range(0..colors.len())];
            let pos = pools[f].take(rng)?;
            floors[f].set(pos, Tile::Key { color });
        }
        for _ in 0..config.doors_per_floor {
            let color = colors[rng.gen_range(0..colors.len())];
            let pos = pools[f].take(rng)?;
            floors[f].set(pos, Tile::Door { color });
        }
        for _ in 0..config.potions_per_floor {
            let amount = 10 * rng.gen_range(2..=5);
            let pos = pools[f].take(rng)?;
            floors[f].set(pos, Tile::HealthPotion { amount });
        }
        for _ in 0..config.crystals_per_floor {
            let stat = if rng.gen_bool(0.5) { StatKind::Attack } else { StatKind::Defense };
            let amount = rng.gen_range(2..=4);
            let pos = pools[f].take(rng)?;
            floors[f].set(pos, Tile::Crystal { stat, amount });
        }
        for _ in 0..config.monsters_per_floor {
            let pos = pools[f].take(rng)?;
            let monster = roll_monster(config, rng, pos, f)?;
            let id = MonsterId(next_monster);
            next_monster += 1;
            floors[f].set(pos, Tile::Monster { id });
            monsters.insert(id, monster);
        }
    }

    // Boss on the last floor.
    let boss_id = if matches!(config.goal, GoalKind::DefeatBoss) {
        let f = config.floors - 1;
        let pos = pools[f].take(rng)?;
        let t = &config.monster_table;
        let stats = Stats::new(
            rng.gen_range(t.attack.0 + 4..=t.attack.1 + 8),
            rng.gen_range(t.defense.0..=t.defense.1 + 2),
            rng.gen_range(t.life.1..=t.life.1 * 2),
        );
        let monster = Monster::new(
            MonsterKind::Boss,
            stats,
            stats.life / config.gold_divisor.max(1),
            stats.attack,
            pos,
            f,
        )
        .ok()?;
        let id = MonsterId(next_monster);
        floors[f].set(pos, Tile::Monster { id });
        monsters.insert(id, monster);
        Some(id)
    } else {
        None
    };

    let state = WorldState {
        floors,
        current_floor: 0,
        player_pos: spawn,
        player_stats: config.player_stats,
        spawn_stats: config.player_stats,
        spawn_pos: spawn,
        inventory: Inventory::default(),
        upgrades: UpgradeCounts::default(),
        monsters,
        fidelity: config.fidelity,
        seed,
        turn: 0,
        defeated: false,
        rules: RuleSet { combat: config.combat, store: config.store },
    };

    let (goal, description) = match config.goal {
        GoalKind::ReachExit => {
            let pos = exit?;
            (
                Goal::ReachTile { floor: config.floors - 1, pos },
                format!("reach the stairs at position {pos}"),
            )
        }
        GoalKind::DefeatBoss => {
            let id = boss_id?;
            (Goal::DefeatMonster { id }, "defeat the boss monster".to_string())
        }
        GoalKind::ReachTopFloor => (
            Goal::ReachFloor { floor: config.floors - 1 },
            format!("enter floor {}", config.floors),
        ),
        GoalKind::CollectItem(kind) => (
            Goal::CollectItem { kind },
            format!("collect the {}", kind.name().to_lowercase()),
        ),
    };
    let task = TaskSpec {
        id: format!("{:?}-{seed:016x}", config.fidelity).to_lowercase(),
        goal,
        description,
    };
    Some((state, task))
}

fn roll_monster(
    config: &WorldConfig,
    rng: &mut ChaCha8Rng,
    pos: Pos,
    floor: usize,
) -> Option<Monster> {
    let t = &config.monster_table;
    let kind = match config.fidelity {
        Fidelity::Imperfect => MonsterKind::Normal,
        Fidelity::Perfect => match rng.gen_range(0..10) {
            0..=5 => MonsterKind::Normal,
            6..=7 => MonsterKind::Wizard,
            8 => MonsterKind::Guardian,
            _ => MonsterKind::Vampire { lifesteal_pct: t.vampire_lifesteal },
        },
    };
    let mut attack = rng.gen_range(t.attack.0..=t.attack.1);
    let mut defense = rng.gen_range(t.defense.0..=t.defense.1);
    let life = rng.gen_range(t.life.0..=t.life.1);
    match kind {
        MonsterKind::Wizard => {
            attack = attack.max(defense + 3);
        }
        MonsterKind::Guardian => {
            defense = defense.max(attack.saturating_sub(2)) + 3;
            attack = attack.min(defense.saturating_sub(1)).max(1);
        }
        _ => {}
    }
    let stats = Stats::new(attack, defense, life);
    Monster::new(
        kind,
        stats,
        life / config.gold_divisor.max(1),
        attack,
        pos,
        floor,
    )
    .ok()
}
