//! Deterministic lane-based traffic simulation.
//!
//! Roads are straight or curved lanes indexed by a longitudinal coordinate
//! `s`; a vehicle occupies the interval `[s, s + length]` of its lane. NPC
//! vehicles follow the Intelligent Driver Model against their same-lane
//! leader; the ego vehicle follows the same law toward an action-adjusted
//! target speed and switches lanes instantaneously on command. Scripted
//! triggers (hard braking, cut-ins, pedestrian entries, encroachment) fire
//! exactly once when their condition first holds, which is what makes the
//! adversarial scenario templates reproducible.
//!
//! Scenes advance with semi-implicit Euler at a fixed `dt`; collisions are
//! 1D interval overlaps on a lane plus conflict-zone co-occupancy inside
//! intersections. Everything is a pure function of `(scene, action, dt)`.

mod road;
mod scenario;
mod scene;
mod vehicle;

pub use road::{
    ConflictZone, Intersection, LaneGeometry, LaneSegment, Road, SignalPhase, SignalSchedule,
};
pub use scenario::{spawn_scenario, ScenarioOverrides, ScenarioSpec, ScenarioTemplate, SpawnError};
pub use scene::{
    check_outcome, step_scene, CollisionPartner, DrivingGoal, EgoAction, Obstacle, Outcome,
    PedestrianScript, SceneEvent, SceneEventKind, TrafficScene,
};
pub use vehicle::{equilibrium_gap, idm_acceleration, DrivingError, IdmParams, Role, Trigger, TriggerCondition, TriggerEffect, VehicleState};

/// Which variant of the environment a scenario belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    /// Straight highways, fixed moderate density, vehicles only.
    Imperfect,
    /// Full feature set: intersections, curves, pedestrians, obstacles.
    Perfect,
}
