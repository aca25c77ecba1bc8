//! Deterministic engine for a tower-puzzle grid world in two fidelities.
//!
//! The world is a stack of 2D tile grids. A single warrior moves tile by
//! tile, fights monsters with a closed-form combat rule, collects keys,
//! potions, crystals and tools, and (in the perfect fidelity) trades
//! experience and gold for stat upgrades. Everything is a pure function of
//! the state and the action: there is no hidden RNG inside the engine, so
//! replaying an action script from a generated world reproduces the exact
//! same states and event logs.
//!
//! Fidelities:
//! - `Imperfect`: one floor, yellow keys/doors only, normal and boss
//!   monsters only, no store/altar/tool items.
//! - `Perfect`: multiple floors connected by stairs, three key colors,
//!   the full monster taxonomy, stores, altars, shovels and wings.

mod combat;
mod engine;
mod gen;
mod solve;
mod types;
mod world;

pub use combat::{resolve_combat, CombatOutcome, CombatRules, StrikeRule};
pub use engine::{
    check_goal, orb_report, step, step_with_task, AgentAction, Direction, Goal, OrbEntry,
    OrbVerdict, TaskSpec, Terminal, WorldEvent,
};
pub use gen::{generate_task, generate_world, GenError, GoalKind, MonsterTable, WorldConfig};
pub use solve::{validate_solvable, SolveError, SolveLimits, Solution};
pub use types::{
    Fidelity, Inventory, ItemKind, KeyColor, Monster, MonsterId, MonsterKind, Pos, StatKind,
    Stats, Tile,
};
pub use world::{EngineError, Grid, RuleSet, StoreSchedule, UpgradeCounts, WorldState};
