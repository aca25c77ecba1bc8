//! Vehicle kinematics: the IDM acceleration law, per-vehicle state and
//! scripted behavior triggers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DrivingError {
    #[error("invalid gap {gap} m with a leader present")]
    InvalidGap { gap: f64 },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

/// Intelligent Driver Model parameters. All positive; `delta >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Desired free-road speed (m/s).
    pub v0: f64,
    /// Time headway (s).
    pub t_headway: f64,
    /// Maximum acceleration (m/s^2).
    pub a_max: f64,
    /// Comfortable deceleration (m/s^2).
    pub b_comfort: f64,
    /// Acceleration exponent.
    pub delta: f64,
    /// Minimum standstill gap (m).
    pub s0: f64,
    /// Hard clamp on braking (m/s^2).
    pub b_emergency: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            v0: 30.0,
            t_headway: 1.5,
            a_max: 1.5,
            b_comfort: 2.0,
            delta: 4.0,
            s0: 2.0,
            b_emergency: 8.0,
        }
    }
}

/// IDM acceleration for a follower at speed `v` with bumper gap `gap` to
/// its leader and closing speed `delta_v = v - v_leader`. Pass
/// `f64::INFINITY` as the gap on a free road. The returned value is clamped
/// to `[-b_emergency, a_max]`.
pub fn idm_acceleration(
    v: f64,
    gap: f64,
    delta_v: f64,
    p: &IdmParams,
) -> Result<f64, DrivingError> {
    if gap <= 0.0 && gap.is_finite() {
        return Err(DrivingError::InvalidGap { gap });
    }
    let free = 1.0 - (v / p.v0).powf(p.delta);
    let interaction = if gap.is_finite() {
        let s_star = p.s0 + v * p.t_headway + v * delta_v / (2.0 * (p.a_max * p.b_comfort).sqrt());
        (s_star / gap).powi(2)
    } else {
        0.0
    };
    let a = p.a_max * (free - interaction);
    Ok(a.clamp(-p.b_emergency, p.a_max))
}

/// Analytic steady-state bumper gap behind a leader at constant speed `v`:
/// the gap at which the IDM acceleration vanishes with zero closing speed.
pub fn equilibrium_gap(v: f64, p: &IdmParams) -> f64 {
    let s_star = p.s0 + v * p.t_headway;
    s_star / (1.0 - (v / p.v0).powf(p.delta)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Ego,
    Npc,
}

/// When a scripted trigger fires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "when", rename_all = "snake_case")]
pub enum TriggerCondition {
    /// First step whose scene time reaches `t`.
    AtTime { t: f64 },
    /// First step where the bumper gap between this vehicle and the ego
    /// drops below `meters` (measured along `s`, any lane).
    EgoGapBelow { meters: f64 },
}

/// What a trigger does to its vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "do", rename_all = "snake_case")]
pub enum TriggerEffect {
    /// Override IDM with a fixed deceleration for `duration` seconds.
    HardBrake { decel: f64, duration: f64 },
    /// Instantaneous scripted lane change.
    LaneChange { target: u32 },
    /// Change the desired speed.
    SetSpeed { v0: f64 },
    /// Drift against the lane boundary for `duration` seconds; a vehicle
    /// longitudinally alongside in the adjacent lane is sideswiped.
    Encroach { duration: f64 },
    /// Uncommanded drift out of the lane into `target`.
    DepartLane { target: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub condition: TriggerCondition,
    pub effect: TriggerEffect,
    #[serde(default)]
    pub fired: bool,
}

impl Trigger {
    pub fn new(condition: TriggerCondition, effect: TriggerEffect) -> Self {
        Self {
            condition,
            effect,
            fired: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    /// Rendering name, e.g. "red vehicle".
    pub label: String,
    pub lane_id: u32,
    /// Rear-bumper coordinate; the body occupies `[s, s + length]`.
    pub s: f64,
    pub v: f64,
    pub length: f64,
    pub role: Role,
    pub idm: IdmParams,
    /// Desired speed actually used; ego actions move this up and down.
    pub target_speed: f64,
    #[serde(default)]
    pub triggers: Vec<Trigger>,
    /// Scripted braking overrides IDM until this scene time.
    #[serde(default)]
    pub forced_decel_until: Option<(f64, f64)>,
    /// Sideswipe window: encroaching on the adjacent lane until this time.
    #[serde(default)]
    pub encroach_until: Option<f64>,
    #[serde(default)]
    pub ignores_signals: bool,
    #[serde(default)]
    pub off_road: bool,
}

impl VehicleState {
    pub fn front(&self) -> f64 {
        self.s + self.length
    }

    pub fn is_ego(&self) -> bool {
        self.role == Role::Ego
    }
}
