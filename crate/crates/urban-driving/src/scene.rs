//! Scene state and the per-step update.
//!
//! Update order within one step: ego command, trigger evaluation, leader
//! resolution on a snapshot of positions, IDM integration (v then s),
//! lane-end handling, then collision / off-road / signal checks. Events
//! carry the scene time at which they were appended and the log is
//! append-only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::road::{Road, SignalPhase};
use crate::vehicle::{idm_acceleration, TriggerCondition, TriggerEffect, VehicleState};
use crate::Fidelity;

/// Discrete ego commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EgoAction {
    LaneLeft,
    LaneRight,
    Faster,
    Slower,
    Idle,
}

impl EgoAction {
    pub const ALL: [EgoAction; 5] = [
        EgoAction::LaneLeft,
        EgoAction::LaneRight,
        EgoAction::Faster,
        EgoAction::Slower,
        EgoAction::Idle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EgoAction::LaneLeft => "lane_left",
            EgoAction::LaneRight => "lane_right",
            EgoAction::Faster => "faster",
            EgoAction::Slower => "slower",
            EgoAction::Idle => "idle",
        }
    }
}

/// A walker scripted to stand on a lane for a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianScript {
    pub id: u32,
    pub lane_id: u32,
    pub s: f64,
    pub enter_t: f64,
    pub duration: f64,
    #[serde(default)]
    pub announced: bool,
}

impl PedestrianScript {
    pub fn active_at(&self, t: f64) -> bool {
        t >= self.enter_t && t < self.enter_t + self.duration
    }
}

/// A static blocker occupying `[s, s + length]` of a lane from
/// `active_from` onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: u32,
    pub label: String,
    pub lane_id: u32,
    pub s: f64,
    pub length: f64,
    pub active_from: f64,
    #[serde(default)]
    pub announced: bool,
}

impl Obstacle {
    pub fn active_at(&self, t: f64) -> bool {
        t >= self.active_from
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "with", rename_all = "snake_case")]
pub enum CollisionPartner {
    Vehicle { id: u32 },
    Pedestrian { id: u32 },
    Obstacle { id: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneEventKind {
    Collision { vehicle: u32, partner: CollisionPartner },
    OffRoad { vehicle: u32, reason: String },
    SignalViolation { vehicle: u32, intersection: u32 },
    GoalReached,
    HardBrakeTriggered { vehicle: u32 },
    CutInTriggered { vehicle: u32, to_lane: u32 },
    SpeedChangeTriggered { vehicle: u32, v0: f64 },
    EncroachTriggered { vehicle: u32 },
    LaneDeparture { vehicle: u32, to_lane: u32 },
    LaneChanged { vehicle: u32, to_lane: u32 },
    IllegalLaneChange { vehicle: u32 },
    PedestrianEntered { pedestrian: u32, lane: u32, s: f64 },
    ObstacleAppeared { obstacle: u32, lane: u32, s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: SceneEventKind,
}

/// Goal of a driving scenario. Safety is implicit: an ego collision or an
/// ego off-road event fails the scenario regardless of progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "goal", rename_all = "snake_case")]
pub enum DrivingGoal {
    ReachLane { lane: u32 },
    ReachPosition { lane: u32, s: f64 },
    SurviveUntil { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Ongoing,
    Success,
    Failure(SceneEvent),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficScene {
    pub road: Road,
    pub vehicles: BTreeMap<u32, VehicleState>,
    pub pedestrians: BTreeMap<u32, PedestrianScript>,
    pub obstacles: BTreeMap<u32, Obstacle>,
    pub t: f64,
    pub step_count: u64,
    pub dt: f64,
    pub goal: DrivingGoal,
    pub time_limit: f64,
    pub fidelity: Fidelity,
    pub ood: bool,
    pub seed: u64,
    pub events: Vec<SceneEvent>,
    #[serde(default)]
    goal_announced: bool,
    /// Collision pairs already reported, to keep the log one-shot per pair.
    #[serde(default)]
    reported_collisions: Vec<(u32, u32)>,
}

/// Speed step for ego Faster/Slower commands (m/s).
pub const EGO_SPEED_STEP: f64 = 2.0;
/// Lateral acceleration bound used for the curve-speed limit (m/s^2).
pub const MAX_LATERAL_ACCEL: f64 = 4.0;

impl TrafficScene {
    pub fn new(
        road: Road,
        goal: DrivingGoal,
        dt: f64,
        time_limit: f64,
        fidelity: Fidelity,
        ood: bool,
        seed: u64,
    ) -> Self {
        Self {
            road,
            vehicles: BTreeMap::new(),
            pedestrians: BTreeMap::new(),
            obstacles: BTreeMap::new(),
            t: 0.0,
            step_count: 0,
            dt,
            goal,
            time_limit,
            fidelity,
            ood,
            seed,
            events: Vec::new(),
            goal_announced: false,
            reported_collisions: Vec::new(),
        }
    }

    pub fn ego(&self) -> Option<&VehicleState> {
        self.vehicles.values().find(|v| v.is_ego())
    }

    fn ego_id(&self) -> Option<u32> {
        self.ego().map(|v| v.id)
    }

    /// SHA-256 over the canonical JSON form of the scene.
    pub fn state_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scene serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// One JSONL trace record: time, vehicle kinematics, events so far.
    pub fn trace_record(&self) -> serde_json::Value {
        serde_json::json!({
            "t": self.t,
            "vehicles": self.vehicles.values().map(|v| serde_json::json!({
                "id": v.id, "lane": v.lane_id, "s": v.s, "v": v.v,
            })).collect::<Vec<_>>(),
            "events": self.events.len(),
        })
    }
}

/// Pure outcome predicate over the scene's log and the ego's position.
pub fn check_outcome(scene: &TrafficScene) -> Outcome {
    let Some(ego) = scene.ego() else {
        return Outcome::Ongoing;
    };
    for event in &scene.events {
        let violating = match &event.kind {
            SceneEventKind::Collision { vehicle, partner } => {
                *vehicle == ego.id || *partner == (CollisionPartner::Vehicle { id: ego.id })
            }
            SceneEventKind::OffRoad { vehicle, .. } => *vehicle == ego.id,
            _ => false,
        };
        if violating {
            return Outcome::Failure(event.clone());
        }
    }
    let reached = match scene.goal {
        DrivingGoal::ReachLane { lane } => ego.lane_id == lane,
        DrivingGoal::ReachPosition { lane, s } => ego.lane_id == lane && ego.s >= s,
        DrivingGoal::SurviveUntil { t } => scene.t >= t,
    };
    if reached {
        Outcome::Success
    } else {
        Outcome::Ongoing
    }
}

/// Advance the scene by one `dt` step under the given ego command.
/// Returns the events appended during this step.
pub fn step_scene(scene: &TrafficScene, ego: EgoAction, dt: f64) -> (TrafficScene, Vec<SceneEvent>) {
    assert!(dt > 0.0 && dt <= 0.5, "dt must be in (0, 0.5]");
    let mut next = scene.clone();
    let before = next.events.len();
    let now = next.t;

    apply_ego_action(&mut next, ego, now);
    fire_triggers(&mut next, now);
    announce_entries(&mut next, now);
    integrate(&mut next, now, dt);

    next.step_count += 1;
    next.t = next.step_count as f64 * dt;

    detect_collisions(&mut next);
    detect_signal_violations(scene, &mut next);
    check_goal_event(&mut next);

    let new_events = next.events[before..].to_vec();
    (next, new_events)
}

fn push_event(scene: &mut TrafficScene, t: f64, kind: SceneEventKind) {
    scene.events.push(SceneEvent { t, kind });
}

fn apply_ego_action(scene: &mut TrafficScene, action: EgoAction, now: f64) {
    let Some(id) = scene.ego_id() else { return };
    match action {
        EgoAction::Idle => {}
        EgoAction::Faster => {
            let ego = scene.vehicles.get_mut(&id).unwrap();
            ego.target_speed = (ego.target_speed + EGO_SPEED_STEP).min(ego.idm.v0 * 1.5);
        }
        EgoAction::Slower => {
            let ego = scene.vehicles.get_mut(&id).unwrap();
            ego.target_speed = (ego.target_speed - EGO_SPEED_STEP).max(0.0);
        }
        EgoAction::LaneLeft | EgoAction::LaneRight => {
            let (lane_id, _) = {
                let ego = &scene.vehicles[&id];
                (ego.lane_id, ego.s)
            };
            let lane = scene.road.lane(lane_id).expect("ego lane exists");
            let target = if action == EgoAction::LaneLeft {
                lane.left_neighbor
            } else {
                lane.right_neighbor
            };
            match target {
                None => push_event(scene, now, SceneEventKind::IllegalLaneChange { vehicle: id }),
                Some(target) => {
                    move_vehicle_to_lane(scene, id, target, now);
                    push_event(scene, now, SceneEventKind::LaneChanged { vehicle: id, to_lane: target });
                }
            }
        }
    }
}

/// Switch lanes instantaneously and report a collision when the vehicle
/// lands on an occupied interval.
fn move_vehicle_to_lane(scene: &mut TrafficScene, id: u32, target: u32, now: f64) {
    let (s, len) = {
        let v = &scene.vehicles[&id];
        (v.s, v.length)
    };
    let overlapping: Vec<u32> = scene
        .vehicles
        .values()
        .filter(|o| o.id != id && o.lane_id == target && intervals_overlap(s, s + len, o.s, o.front()))
        .map(|o| o.id)
        .collect();
    scene.vehicles.get_mut(&id).unwrap().lane_id = target;
    for other in overlapping {
        report_collision(scene, now, id, CollisionPartner::Vehicle { id: other });
    }
}

fn fire_triggers(scene: &mut TrafficScene, now: f64) {
    let ego = scene.ego().cloned();
    let ids: Vec<u32> = scene.vehicles.keys().copied().collect();
    for id in ids {
        let vehicle = scene.vehicles[&id].clone();
        for (trigger_idx, trigger) in vehicle.triggers.iter().enumerate() {
            if trigger.fired {
                continue;
            }
            let holds = match trigger.condition {
                TriggerCondition::AtTime { t } => now >= t,
                TriggerCondition::EgoGapBelow { meters } => match &ego {
                    Some(ego) if ego.id != id => {
                        bumper_gap(&vehicle, ego) < meters
                    }
                    _ => false,
                },
            };
            if !holds {
                continue;
            }
            scene.vehicles.get_mut(&id).unwrap().triggers[trigger_idx].fired = true;
            apply_effect(scene, id, trigger.effect, now);
        }
    }
}

/// Longitudinal separation between the bodies of two vehicles, any lane.
fn bumper_gap(a: &VehicleState, b: &VehicleState) -> f64 {
    if a.s > b.front() {
        a.s - b.front()
    } else if b.s > a.front() {
        b.s - a.front()
    } else {
        0.0
    }
}

fn apply_effect(scene: &mut TrafficScene, id: u32, effect: TriggerEffect, now: f64) {
    match effect {
        TriggerEffect::HardBrake { decel, duration } => {
            let v = scene.vehicles.get_mut(&id).unwrap();
            v.forced_decel_until = Some((decel, now + duration));
            push_event(scene, now, SceneEventKind::HardBrakeTriggered { vehicle: id });
        }
        TriggerEffect::LaneChange { target } => {
            move_vehicle_to_lane(scene, id, target, now);
            push_event(scene, now, SceneEventKind::CutInTriggered { vehicle: id, to_lane: target });
        }
        TriggerEffect::SetSpeed { v0 } => {
            let v = scene.vehicles.get_mut(&id).unwrap();
            v.target_speed = v0;
            push_event(scene, now, SceneEventKind::SpeedChangeTriggered { vehicle: id, v0 });
        }
        TriggerEffect::Encroach { duration } => {
            let v = scene.vehicles.get_mut(&id).unwrap();
            v.encroach_until = Some(now + duration);
            push_event(scene, now, SceneEventKind::EncroachTriggered { vehicle: id });
        }
        TriggerEffect::DepartLane { target } => {
            move_vehicle_to_lane(scene, id, target, now);
            push_event(scene, now, SceneEventKind::LaneDeparture { vehicle: id, to_lane: target });
        }
    }
}

fn announce_entries(scene: &mut TrafficScene, now: f64) {
    let mut events = Vec::new();
    for p in scene.pedestrians.values_mut() {
        if !p.announced && p.active_at(now) {
            p.announced = true;
            events.push(SceneEventKind::PedestrianEntered { pedestrian: p.id, lane: p.lane_id, s: p.s });
        }
    }
    for o in scene.obstacles.values_mut() {
        if !o.announced && o.active_at(now) {
            o.announced = true;
            events.push(SceneEventKind::ObstacleAppeared { obstacle: o.id, lane: o.lane_id, s: o.s });
        }
    }
    for kind in events {
        push_event(scene, now, kind);
    }
}

/// A leading body on a lane: rear coordinate and speed.
struct Leader {
    rear: f64,
    v: f64,
}

fn leader_on_lane(scene: &TrafficScene, lane: u32, front: f64, exclude: u32, now: f64) -> Option<Leader> {
    let mut best: Option<Leader> = None;
    let mut consider = |rear: f64, v: f64| {
        if rear >= front {
            match &best {
                Some(l) if l.rear <= rear => {}
                _ => best = Some(Leader { rear, v }),
            }
        }
    };
    for other in scene.vehicles.values() {
        if other.id != exclude && other.lane_id == lane {
            consider(other.s, other.v);
        }
    }
    for obstacle in scene.obstacles.values() {
        if obstacle.lane_id == lane && obstacle.active_at(now) {
            consider(obstacle.s, 0.0);
        }
    }
    for p in scene.pedestrians.values() {
        if p.lane_id == lane && p.active_at(now) {
            consider(p.s - 0.5, 0.0);
        }
    }
    best
}

/// Red or yellow stop lines act as a stationary leader for compliant
/// vehicles.
fn signal_stop_line(scene: &TrafficScene, vehicle: &VehicleState, now: f64) -> Option<f64> {
    if vehicle.ignores_signals {
        return None;
    }
    for intersection in scene.road.intersections.values() {
        let (Some(stop), Some(signal)) = (
            intersection.stop_lines.get(&vehicle.lane_id),
            intersection.signals.get(&vehicle.lane_id),
        ) else {
            continue;
        };
        if vehicle.front() <= *stop
            && matches!(signal.phase_at(now), SignalPhase::Red | SignalPhase::Yellow)
        {
            return Some(*stop);
        }
    }
    None
}

fn integrate(scene: &mut TrafficScene, now: f64, dt: f64) {
    // Accelerations off a positional snapshot, then synchronous update.
    let snapshot = scene.clone();
    let mut offroad_events = Vec::new();

    let ids: Vec<u32> = scene.vehicles.keys().copied().collect();
    for id in ids {
        let vehicle = snapshot.vehicles[&id].clone();
        if vehicle.off_road {
            continue;
        }
        let lane = snapshot.road.lane(vehicle.lane_id).expect("vehicle lane exists");
        let lane_len = lane.length();

        let accel = if let Some((decel, until)) = vehicle.forced_decel_until {
            if now < until {
                -decel
            } else {
                plan_idm(&snapshot, &vehicle, lane_len, now)
            }
        } else {
            plan_idm(&snapshot, &vehicle, lane_len, now)
        };

        let mut v_new = (vehicle.v + accel * dt).max(0.0);
        let mut s_new = vehicle.s + v_new * dt;
        let mut lane_id = vehicle.lane_id;
        let mut went_offroad = None;

        if s_new + vehicle.length > lane_len {
            if let Some(successor) = lane.successor {
                s_new -= lane_len;
                lane_id = successor;
            } else if lane.merge_target.is_some() {
                // Ran out of the merge ramp without merging.
                went_offroad = Some("ran out of merge lane".to_string());
                s_new = (lane_len - vehicle.length).max(0.0);
            } else {
                // End of the modeled road: park at the boundary.
                s_new = (lane_len - vehicle.length).max(0.0);
                v_new = 0.0;
            }
        }

        // Curve speed bound: exceeding the lateral-acceleration-safe speed
        // inside a curved segment slides the vehicle off the road.
        let curvature = lane.curvature_at(s_new.min(lane_len - 1e-9).max(0.0)).abs();
        if went_offroad.is_none() && curvature > 0.0 {
            let v_safe = (MAX_LATERAL_ACCEL / curvature).sqrt();
            if v_new > v_safe {
                went_offroad = Some(format!("curve taken at {v_new:.1} m/s, safe {v_safe:.1}"));
            }
        }

        let vehicle = scene.vehicles.get_mut(&id).unwrap();
        vehicle.v = v_new;
        vehicle.s = s_new;
        vehicle.lane_id = lane_id;
        if let Some(reason) = went_offroad {
            vehicle.off_road = true;
            vehicle.v = 0.0;
            offroad_events.push(SceneEventKind::OffRoad { vehicle: id, reason });
        }
    }
    for kind in offroad_events {
        push_event(scene, now, kind);
    }
}

fn plan_idm(scene: &TrafficScene, vehicle: &VehicleState, lane_len: f64, now: f64) -> f64 {
    let mut leader = leader_on_lane(scene, vehicle.lane_id, vehicle.front(), vehicle.id, now);
    // Look one lane ahead when this one is clear.
    if leader.is_none() {
        if let Some(successor) = scene.road.lane(vehicle.lane_id).and_then(|l| l.successor) {
            if let Some(l) = leader_on_lane(scene, successor, 0.0, vehicle.id, now) {
                leader = Some(Leader { rear: l.rear + lane_len, v: l.v });
            }
        }
    }
    if let Some(stop) = signal_stop_line(scene, vehicle, now) {
        let stop_leader = Leader { rear: stop, v: 0.0 };
        leader = match leader {
            Some(l) if l.rear < stop_leader.rear => Some(l),
            _ => Some(stop_leader),
        };
    }

    let mut params = vehicle.idm;
    params.v0 = vehicle.target_speed.max(0.1);
    match leader {
        None => idm_acceleration(vehicle.v, f64::INFINITY, 0.0, &params).unwrap_or(0.0),
        Some(l) => {
            let gap = l.rear - vehicle.front();
            if gap <= 0.0 {
                // Interpenetration: emergency braking; the collision scan
                // reports the contact.
                -params.b_emergency
            } else {
                idm_acceleration(vehicle.v, gap, vehicle.v - l.v, &params)
                    .unwrap_or(-params.b_emergency)
            }
        }
    }
}

fn intervals_overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> bool {
    a0 < b1 && b0 < a1
}

fn report_collision(scene: &mut TrafficScene, t: f64, vehicle: u32, partner: CollisionPartner) {
    let pair = match partner {
        CollisionPartner::Vehicle { id } => (vehicle.min(id), vehicle.max(id)),
        CollisionPartner::Pedestrian { id } => (vehicle, u32::MAX - id),
        CollisionPartner::Obstacle { id } => (vehicle, u32::MAX / 2 + id),
    };
    if scene.reported_collisions.contains(&pair) {
        return;
    }
    scene.reported_collisions.push(pair);
    push_event(scene, t, SceneEventKind::Collision { vehicle, partner });
}

fn detect_collisions(scene: &mut TrafficScene) {
    let t = scene.t;
    let vehicles: Vec<VehicleState> = scene.vehicles.values().cloned().collect();
    let mut contacts: Vec<(u32, CollisionPartner)> = Vec::new();

    // Sideswipe: an encroaching vehicle touches bodies alongside in the
    // adjacent lane.
    let encroaching = |x: &VehicleState, y: &VehicleState| {
        x.encroach_until.is_some_and(|until| t <= until)
            && scene.road.lane(x.lane_id).is_some_and(|l| {
                l.left_neighbor == Some(y.lane_id) || l.right_neighbor == Some(y.lane_id)
            })
    };

    for (i, a) in vehicles.iter().enumerate() {
        for b in vehicles.iter().skip(i + 1) {
            let same_lane = a.lane_id == b.lane_id;
            let adjacent_contact = encroaching(a, b) || encroaching(b, a);
            if (same_lane || adjacent_contact)
                && intervals_overlap(a.s, a.front(), b.s, b.front())
            {
                contacts.push((a.id, CollisionPartner::Vehicle { id: b.id }));
            }
        }
        for p in scene.pedestrians.values() {
            if p.lane_id == a.lane_id
                && p.active_at(t)
                && intervals_overlap(a.s, a.front(), p.s - 0.5, p.s + 0.5)
            {
                contacts.push((a.id, CollisionPartner::Pedestrian { id: p.id }));
            }
        }
        for o in scene.obstacles.values() {
            if o.lane_id == a.lane_id
                && o.active_at(t)
                && intervals_overlap(a.s, a.front(), o.s, o.s + o.length)
            {
                contacts.push((a.id, CollisionPartner::Obstacle { id: o.id }));
            }
        }
        // Intersection conflict zones.
        for intersection in scene.road.intersections.values() {
            for zone in &intersection.conflicts {
                let in_zone = |v: &VehicleState, lane: u32, range: (f64, f64)| {
                    v.lane_id == lane && intervals_overlap(v.s, v.front(), range.0, range.1)
                };
                for b in &vehicles {
                    if b.id <= a.id {
                        continue;
                    }
                    let crossing = (in_zone(a, zone.lane_a, zone.range_a)
                        && in_zone(b, zone.lane_b, zone.range_b))
                        || (in_zone(a, zone.lane_b, zone.range_b)
                            && in_zone(b, zone.lane_a, zone.range_a));
                    if crossing {
                        contacts.push((a.id, CollisionPartner::Vehicle { id: b.id }));
                    }
                }
            }
        }
    }
    for (vehicle, partner) in contacts {
        report_collision(scene, t, vehicle, partner);
    }
}

/// Crossing a stop line during a red phase. Evaluated on the position
/// before and after the step.
fn detect_signal_violations(prev: &TrafficScene, next: &mut TrafficScene) {
    let t = next.t;
    let mut violations = Vec::new();
    for intersection in next.road.intersections.values() {
        for (lane, stop) in &intersection.stop_lines {
            let Some(signal) = intersection.signals.get(lane) else { continue };
            if signal.phase_at(t) != SignalPhase::Red {
                continue;
            }
            for vehicle in next.vehicles.values() {
                if vehicle.lane_id != *lane {
                    continue;
                }
                let Some(before) = prev.vehicles.get(&vehicle.id) else { continue };
                if before.lane_id == *lane && before.front() <= *stop && vehicle.front() > *stop {
                    violations.push(SceneEventKind::SignalViolation {
                        vehicle: vehicle.id,
                        intersection: intersection.id,
                    });
                }
            }
        }
    }
    for kind in violations {
        push_event(next, t, kind);
    }
}

fn check_goal_event(scene: &mut TrafficScene) {
    if scene.goal_announced {
        return;
    }
    if check_outcome(scene) == Outcome::Success {
        scene.goal_announced = true;
        push_event(scene, scene.t, SceneEventKind::GoalReached);
    }
}
