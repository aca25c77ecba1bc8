//! The scenario catalog: eight nominal templates and nine safety-critical
//! (out-of-distribution) templates, each instantiating a documented cast
//! deterministically from `(template, seed, overrides)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::road::{ConflictZone, Intersection, LaneGeometry, LaneSegment, Road, SignalSchedule};
use crate::scene::{DrivingGoal, Obstacle, PedestrianScript, TrafficScene};
use crate::vehicle::{IdmParams, Role, Trigger, TriggerCondition, TriggerEffect, VehicleState};
use crate::Fidelity;

#[derive(Debug, Error)]
pub enum SpawnError {
    #[error("unknown scenario template: {0}")]
    UnknownTemplate(String),
    #[error("template {template:?} requires perfect fidelity ({reason})")]
    FidelityViolation {
        template: ScenarioTemplate,
        reason: String,
    },
    #[error("invalid scenario spec: {0}")]
    BadSpec(String),
}

/// Every scenario the simulator can stage. The second group is the
/// out-of-distribution catalog used for generalization evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioTemplate {
    VehicleFollowing,
    Yielding,
    CutIn,
    Intersection,
    MergingLane,
    RoadCurve,
    Occlusion,
    RecklessDriver,
    // Out-of-distribution catalog.
    ErraticMerging,
    OodCutIn,
    Nudging,
    HardBraking,
    LaneDeparture,
    IntersectionEncroachment,
    PedestrianCrossing,
    UnexpectedObstacle,
    AggressiveDriving,
}

impl ScenarioTemplate {
    pub const ALL: [ScenarioTemplate; 17] = [
        ScenarioTemplate::VehicleFollowing,
        ScenarioTemplate::Yielding,
        ScenarioTemplate::CutIn,
        ScenarioTemplate::Intersection,
        ScenarioTemplate::MergingLane,
        ScenarioTemplate::RoadCurve,
        ScenarioTemplate::Occlusion,
        ScenarioTemplate::RecklessDriver,
        ScenarioTemplate::ErraticMerging,
        ScenarioTemplate::OodCutIn,
        ScenarioTemplate::Nudging,
        ScenarioTemplate::HardBraking,
        ScenarioTemplate::LaneDeparture,
        ScenarioTemplate::IntersectionEncroachment,
        ScenarioTemplate::PedestrianCrossing,
        ScenarioTemplate::UnexpectedObstacle,
        ScenarioTemplate::AggressiveDriving,
    ];

    pub fn is_ood(&self) -> bool {
        matches!(
            self,
            ScenarioTemplate::ErraticMerging
                | ScenarioTemplate::OodCutIn
                | ScenarioTemplate::Nudging
                | ScenarioTemplate::HardBraking
                | ScenarioTemplate::LaneDeparture
                | ScenarioTemplate::IntersectionEncroachment
                | ScenarioTemplate::PedestrianCrossing
                | ScenarioTemplate::UnexpectedObstacle
                | ScenarioTemplate::AggressiveDriving
        )
    }

    /// Templates staging only straight multi-lane roads with vehicles, the
    /// feature envelope of the imperfect fidelity.
    pub fn allowed_imperfect(&self) -> bool {
        matches!(
            self,
            ScenarioTemplate::VehicleFollowing
                | ScenarioTemplate::Yielding
                | ScenarioTemplate::CutIn
                | ScenarioTemplate::MergingLane
        )
    }

    pub fn parse(name: &str) -> Result<Self, SpawnError> {
        serde_json::from_value(serde_json::Value::String(name.to_string()))
            .map_err(|_| SpawnError::UnknownTemplate(name.to_string()))
    }

    pub fn name(&self) -> String {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::String(s)) => s,
            _ => unreachable!("template serializes to a string"),
        }
    }
}

/// Optional knobs layered over a template's defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ScenarioOverrides {
    pub desired_speed: Option<f64>,
    pub npc_count: Option<usize>,
    pub trigger_time: Option<f64>,
    pub trigger_decel: Option<f64>,
    pub gap_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub template: ScenarioTemplate,
    pub seed: u64,
    pub fidelity: Fidelity,
    #[serde(default)]
    pub overrides: ScenarioOverrides,
    pub goal: Option<DrivingGoal>,
    pub time_limit: f64,
    pub dt: f64,
}

impl ScenarioSpec {
    pub fn new(template: ScenarioTemplate, seed: u64) -> Self {
        Self {
            template,
            seed,
            fidelity: if template.allowed_imperfect() {
                Fidelity::Imperfect
            } else {
                Fidelity::Perfect
            },
            overrides: ScenarioOverrides::default(),
            goal: None,
            time_limit: 60.0,
            dt: 0.1,
        }
    }

    pub fn perfect(template: ScenarioTemplate, seed: u64) -> Self {
        let mut spec = Self::new(template, seed);
        spec.fidelity = Fidelity::Perfect;
        spec
    }

    pub fn id(&self) -> String {
        format!("{}-{:016x}", self.template.name(), self.seed)
    }
}

const LABELS: [&str; 8] = [
    "red vehicle",
    "blue truck",
    "white SUV",
    "silver sedan",
    "black coupe",
    "green van",
    "yellow taxi",
    "orange pickup",
];

struct Cast {
    rng: ChaCha8Rng,
    next_id: u32,
    label_idx: usize,
}

impl Cast {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 0,
            label_idx: 0,
        }
    }

    fn jitter(&mut self, base: f64, spread: f64) -> f64 {
        base + self.rng.gen_range(-spread..=spread)
    }

    fn vehicle(&mut self, role: Role, lane: u32, s: f64, v: f64) -> VehicleState {
        let id = self.next_id;
        self.next_id += 1;
        let label = if role == Role::Ego {
            "ego".to_string()
        } else {
            let l = LABELS[self.label_idx % LABELS.len()].to_string();
            self.label_idx += 1;
            l
        };
        VehicleState {
            id,
            label,
            lane_id: lane,
            s,
            v: v.max(0.0),
            length: 4.5,
            role,
            idm: IdmParams::default(),
            target_speed: v.max(0.0),
            triggers: Vec::new(),
            forced_decel_until: None,
            encroach_until: None,
            ignores_signals: false,
            off_road: false,
        }
    }
}

/// Instantiate a scene from a spec. Deterministic in
/// `(template, seed, overrides)`.
pub fn spawn_scenario(spec: &ScenarioSpec) -> Result<TrafficScene, SpawnError> {
    if !(spec.dt > 0.0 && spec.dt <= 0.5) {
        return Err(SpawnError::BadSpec(format!("dt {} outside (0, 0.5]", spec.dt)));
    }
    if spec.time_limit <= 0.0 {
        return Err(SpawnError::BadSpec("time limit must be positive".into()));
    }
    if spec.fidelity == Fidelity::Imperfect && !spec.template.allowed_imperfect() {
        return Err(SpawnError::FidelityViolation {
            template: spec.template,
            reason: "needs intersections, curves, pedestrians or obstacles".into(),
        });
    }

    let mut cast = Cast::new(spec.seed);
    let cruise = spec.overrides.desired_speed.unwrap_or(25.0);
    let mut scene = match spec.template {
        ScenarioTemplate::VehicleFollowing => following(spec, &mut cast, cruise),
        ScenarioTemplate::Yielding => cut_in_family(spec, &mut cast, cruise, 15.0, cruise - 2.0),
        ScenarioTemplate::CutIn => cut_in_family(spec, &mut cast, cruise, 12.0, cruise - 3.0),
        ScenarioTemplate::Intersection => intersection(spec, &mut cast, cruise, false),
        ScenarioTemplate::MergingLane => merging(spec, &mut cast, cruise),
        ScenarioTemplate::RoadCurve => road_curve(spec, &mut cast, cruise),
        ScenarioTemplate::Occlusion => occlusion(spec, &mut cast, cruise),
        ScenarioTemplate::RecklessDriver => intersection(spec, &mut cast, cruise, true),
        ScenarioTemplate::ErraticMerging => erratic_merging(spec, &mut cast, cruise),
        ScenarioTemplate::OodCutIn => cut_in_family(spec, &mut cast, cruise, 6.0, cruise - 8.0),
        ScenarioTemplate::Nudging => nudging(spec, &mut cast, cruise),
        ScenarioTemplate::HardBraking => hard_braking(spec, &mut cast, cruise),
        ScenarioTemplate::LaneDeparture => lane_departure(spec, &mut cast, cruise),
        ScenarioTemplate::IntersectionEncroachment => encroachment(spec, &mut cast, cruise),
        ScenarioTemplate::PedestrianCrossing => pedestrian_crossing(spec, &mut cast, cruise),
        ScenarioTemplate::UnexpectedObstacle => unexpected_obstacle(spec, &mut cast, cruise),
        ScenarioTemplate::AggressiveDriving => aggressive(spec, &mut cast, cruise),
    };

    // Perfect fidelity varies traffic density with background vehicles on
    // the outermost lane; imperfect keeps the cast fixed and moderate.
    if spec.fidelity == Fidelity::Perfect {
        let extra = spec
            .overrides
            .npc_count
            .unwrap_or_else(|| cast.rng.gen_range(0..3));
        let lanes: Vec<u32> = scene.road.lanes.keys().copied().collect();
        let lane = *lanes.last().unwrap();
        let lane_ok = !scene.road.lane(lane).map(|l| l.is_curved()).unwrap_or(false)
            && scene.road.lane(lane).and_then(|l| l.merge_target).is_none();
        if lane_ok {
            for i in 0..extra {
                let s = 150.0 + 60.0 * i as f64 + cast.jitter(0.0, 10.0);
                let v = cast.jitter(cruise * 0.8, 2.0);
                let veh = cast.vehicle(Role::Npc, lane, s, v);
                scene.vehicles.insert(veh.id, veh);
            }
        }
    }

    scene.road.validate().map_err(|e| SpawnError::BadSpec(e.to_string()))?;
    Ok(scene)
}

fn base_scene(spec: &ScenarioSpec, road: Road, goal: DrivingGoal) -> TrafficScene {
    TrafficScene::new(
        road,
        spec.goal.unwrap_or(goal),
        spec.dt,
        spec.time_limit,
        spec.fidelity,
        spec.template.is_ood(),
        spec.seed,
    )
}

fn add(scene: &mut TrafficScene, vehicle: VehicleState) -> u32 {
    let id = vehicle.id;
    scene.vehicles.insert(id, vehicle);
    id
}

/// Straight-road length that nobody can out-run within the time limit.
fn straight_length(spec: &ScenarioSpec, cruise: f64) -> f64 {
    (cruise * spec.time_limit * 1.3).max(800.0)
}

/// Ego behind a constant-speed leader in one lane.
fn following(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64) -> TrafficScene {
    let road = Road::parallel(2, straight_length(spec, cruise));
    let mut scene = base_scene(spec, road, DrivingGoal::SurviveUntil { t: spec.time_limit });
    let lead_v = cast.jitter(cruise, 1.0);
    let mut ego = cast.vehicle(Role::Ego, 0, 50.0, lead_v);
    ego.idm.v0 = 30.0;
    ego.target_speed = 30.0;
    add(&mut scene, ego);
    let lead_gap = cast.jitter(40.0, 5.0);
    let mut leader = cast.vehicle(Role::Npc, 0, 50.0 + lead_gap, lead_v);
    leader.idm.v0 = lead_v;
    leader.target_speed = lead_v;
    add(&mut scene, leader);
    scene
}

/// A neighbor-lane NPC dives into the ego lane once the gap closes.
/// `speed_after` tunes how dangerous the maneuver is.
fn cut_in_family(
    spec: &ScenarioSpec,
    cast: &mut Cast,
    cruise: f64,
    gap_threshold: f64,
    speed_after: f64,
) -> TrafficScene {
    let road = Road::parallel(2, straight_length(spec, cruise));
    let mut scene = base_scene(
        spec,
        road,
        DrivingGoal::ReachPosition { lane: 0, s: 600.0 },
    );
    let ego = cast.vehicle(Role::Ego, 0, 50.0, cruise);
    add(&mut scene, ego);
    let threshold = spec.overrides.gap_threshold.unwrap_or(gap_threshold);
    let ahead = cast.jitter(28.0, 4.0);
    let mut cutter = cast.vehicle(Role::Npc, 1, 50.0 + ahead, speed_after);
    cutter.target_speed = speed_after.max(1.0);
    cutter.idm.v0 = speed_after.max(1.0);
    cutter.triggers.push(Trigger::new(
        TriggerCondition::EgoGapBelow { meters: threshold },
        TriggerEffect::LaneChange { target: 0 },
    ));
    add(&mut scene, cutter);
    scene
}

/// Signalized crossing; `reckless` adds a red-light-running NPC on the
/// crossing road.
fn intersection(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64, reckless: bool) -> TrafficScene {
    let mut road = Road::parallel(1, 600.0);
    // Crossing road, modeled as an independent lane with its own chainage.
    road.add_lane(LaneGeometry::straight(10, 600.0));
    let center = 300.0;
    let mut stop_lines = BTreeMap::new();
    stop_lines.insert(0, center - 10.0);
    stop_lines.insert(10, center - 10.0);
    let mut signals = BTreeMap::new();
    // Ego starts on red and gets green at t=18; the crossing road is red
    // until t=30, so a compliant crosser waits while a reckless one runs it.
    signals.insert(0, SignalSchedule { green: 30.0, yellow: 3.0, red: 30.0, offset: 45.0 });
    signals.insert(10, SignalSchedule { green: 30.0, yellow: 3.0, red: 30.0, offset: 33.0 });
    road.intersections.insert(
        0,
        Intersection {
            id: 0,
            stop_lines,
            signals,
            conflicts: vec![ConflictZone {
                lane_a: 0,
                range_a: (center - 8.0, center + 8.0),
                lane_b: 10,
                range_b: (center - 8.0, center + 8.0),
            }],
        },
    );
    road.lanes.get_mut(&0).unwrap().intersection = Some(0);
    road.lanes.get_mut(&10).unwrap().intersection = Some(0);

    let mut scene = base_scene(
        spec,
        road,
        DrivingGoal::ReachPosition { lane: 0, s: 400.0 },
    );
    let ego = cast.vehicle(Role::Ego, 0, 120.0, cruise * 0.8);
    add(&mut scene, ego);
    let crosser_s = cast.jitter(160.0, 15.0);
    let mut crosser = cast.vehicle(Role::Npc, 10, crosser_s, cruise * 0.7);
    if reckless {
        crosser.ignores_signals = true;
    }
    add(&mut scene, crosser);
    scene
}

/// Ego on a terminating ramp that merges into a trafficked lane.
fn merging(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64) -> TrafficScene {
    let mut road = Road::parallel(2, straight_length(spec, cruise));
    {
        let ramp = road.lanes.get_mut(&1).unwrap();
        ramp.segments = vec![LaneSegment { length: 300.0, curvature: 0.0 }];
        ramp.merge_target = Some(0);
    }
    let mut scene = base_scene(spec, road, DrivingGoal::ReachLane { lane: 0 });
    let ego = cast.vehicle(Role::Ego, 1, 40.0, cruise * 0.7);
    add(&mut scene, ego);
    for i in 0..2 {
        let s = 20.0 + 70.0 * i as f64 + cast.jitter(0.0, 8.0);
        let v = cast.jitter(cruise * 0.8, 1.5);
        let veh = cast.vehicle(Role::Npc, 0, s, v);
        add(&mut scene, veh);
    }
    scene
}

/// A sharp curve that punishes entering too fast.
fn road_curve(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64) -> TrafficScene {
    let mut road = Road::default();
    let mut lane = LaneGeometry::straight(0, 0.0);
    lane.segments = vec![
        LaneSegment { length: 250.0, curvature: 0.0 },
        LaneSegment { length: 120.0, curvature: cast.jitter(0.022, 0.004) },
        LaneSegment { length: 230.0, curvature: 0.0 },
    ];
    road.add_lane(lane);
    let mut scene = base_scene(
        spec,
        road,
        DrivingGoal::ReachPosition { lane: 0, s: 500.0 },
    );
    let ego = cast.vehicle(Role::Ego, 0, 30.0, cruise);
    add(&mut scene, ego);
    scene
}

/// A parked vehicle hides a pedestrian stepping into the ego lane.
fn occlusion(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64) -> TrafficScene {
    let road = Road::parallel(2, 700.0);
    let mut scene = base_scene(
        spec,
        road,
        DrivingGoal::ReachPosition { lane: 0, s: 500.0 },
    );
    let ego_v = cruise * 0.8;
    let ego = cast.vehicle(Role::Ego, 0, 40.0, ego_v);
    let ego_front = ego.front();
    add(&mut scene, ego);
    let blocker_s = cast.jitter(210.0, 10.0);
    scene.obstacles.insert(
        0,
        Obstacle {
            id: 0,
            label: "parked vehicle".into(),
            lane_id: 1,
            s: blocker_s,
            length: 5.0,
            active_from: 0.0,
            announced: false,
        },
    );
    // Nominal template: timed so a braking ego can always stop short.
    let ped_s = blocker_s + 8.0;
    let approach_gap = cast.jitter(45.0, 8.0);
    let enter_t = ((ped_s - ego_front - approach_gap) / ego_v).max(0.5);
    scene.pedestrians.insert(
        0,
        PedestrianScript {
            id: 0,
            lane_id: 0,
            s: ped_s,
            enter_t,
            duration: 6.0,
            announced: false,
        },
    );
    scene
}

/// Adjacent NPC merges at an unsafe speed without warning.
fn erratic_merging(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64) -> TrafficScene {
    let road = Road::parallel(3, straight_length(spec, cruise));
    let mut scene = base_scene(
        spec,
        road,
        DrivingGoal::ReachPosition { lane: 0, s: 600.0 },
    );
    let ego = cast.vehicle(Role::Ego, 0, 60.0, cruise);
    add(&mut scene, ego);
    let t = spec.overrides.trigger_time.unwrap_or_else(|| cast.jitter(4.0, 1.0));
    let ahead = cast.jitter(12.0, 3.0);
    let mut merger = cast.vehicle(Role::Npc, 1, 60.0 + ahead, cruise * 0.55);
    merger.idm.v0 = cruise * 0.55;
    merger.target_speed = cruise * 0.55;
    merger.triggers.push(Trigger::new(
        TriggerCondition::AtTime { t },
        TriggerEffect::LaneChange { target: 0 },
    ));
    add(&mut scene, merger);
    scene
}

/// Adjacent NPC drifts against the shared boundary, threatening a
/// sideswipe while the ego is alongside.
fn nudging(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64) -> TrafficScene {
    let road = Road::parallel(2, straight_length(spec, cruise));
    let mut scene = base_scene(
        spec,
        road,
        DrivingGoal::ReachPosition { lane: 0, s: 600.0 },
    );
    let ego = cast.vehicle(Role::Ego, 0, 50.0, cruise);
    add(&mut scene, ego);
    let mut nudger = cast.vehicle(Role::Npc, 1, 49.0, cruise);
    nudger.triggers.push(Trigger::new(
        TriggerCondition::AtTime { t: spec.overrides.trigger_time.unwrap_or(3.0) },
        TriggerEffect::Encroach { duration: 5.0 },
    ));
    add(&mut scene, nudger);
    scene
}

/// Leader slams the brakes at a scripted time.
fn hard_braking(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64) -> TrafficScene {
    let road = Road::parallel(2, straight_length(spec, cruise));
    let mut scene = base_scene(spec, road, DrivingGoal::SurviveUntil { t: spec.time_limit });
    let ego = cast.vehicle(Role::Ego, 0, 50.0, cruise);
    add(&mut scene, ego);
    let ahead = cast.jitter(30.0, 4.0);
    let mut leader = cast.vehicle(Role::Npc, 0, 50.0 + ahead, cruise);
    leader.idm.v0 = cruise;
    leader.target_speed = cruise;
    leader.triggers.push(Trigger::new(
        TriggerCondition::AtTime { t: spec.overrides.trigger_time.unwrap_or(5.0) },
        TriggerEffect::HardBrake {
            decel: spec.overrides.trigger_decel.unwrap_or(6.0),
            duration: 4.0,
        },
    ));
    add(&mut scene, leader);
    scene
}

/// Adjacent NPC drifts out of its lane into the ego's.
fn lane_departure(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64) -> TrafficScene {
    let road = Road::parallel(2, straight_length(spec, cruise));
    let mut scene = base_scene(
        spec,
        road,
        DrivingGoal::ReachPosition { lane: 0, s: 600.0 },
    );
    let ego = cast.vehicle(Role::Ego, 0, 55.0, cruise);
    add(&mut scene, ego);
    let ahead = cast.jitter(10.0, 4.0);
    let mut drifter = cast.vehicle(Role::Npc, 1, 55.0 + ahead, cruise * 0.7);
    drifter.idm.v0 = cruise * 0.7;
    drifter.target_speed = cruise * 0.7;
    drifter.triggers.push(Trigger::new(
        TriggerCondition::AtTime { t: spec.overrides.trigger_time.unwrap_or(4.0) },
        TriggerEffect::DepartLane { target: 0 },
    ));
    add(&mut scene, drifter);
    scene
}

/// Crossing NPC enters the junction against the right of way while the
/// ego approaches on green.
fn encroachment(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64) -> TrafficScene {
    let mut scene = intersection(spec, cast, cruise, true);
    // Ego gets green immediately; the crosser is timed into the conflict.
    if let Some(i) = scene.road.intersections.get_mut(&0) {
        i.signals.insert(0, SignalSchedule { green: 40.0, yellow: 3.0, red: 20.0, offset: 0.0 });
        i.signals.insert(10, SignalSchedule { green: 40.0, yellow: 3.0, red: 20.0, offset: 43.0 });
    }
    // Place the crosser so both reach the conflict zone together.
    let ego_eta = {
        let ego = scene.ego().unwrap();
        (300.0 - ego.s) / ego.v.max(1.0)
    };
    let crosser_id = scene
        .vehicles
        .values()
        .find(|v| !v.is_ego())
        .map(|v| v.id)
        .unwrap();
    let crosser = scene.vehicles.get_mut(&crosser_id).unwrap();
    crosser.s = 300.0 - crosser.v.max(1.0) * ego_eta;
    scene
}

/// One walker scripted onto the ego lane.
fn pedestrian_crossing(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64) -> TrafficScene {
    let road = Road::parallel(2, 700.0);
    let mut scene = base_scene(
        spec,
        road,
        DrivingGoal::ReachPosition { lane: 0, s: 500.0 },
    );
    let ego = cast.vehicle(Role::Ego, 0, 40.0, cruise * 0.8);
    add(&mut scene, ego);
    scene.pedestrians.insert(
        0,
        PedestrianScript {
            id: 0,
            lane_id: 0,
            s: cast.jitter(200.0, 40.0),
            enter_t: cast.jitter(5.5, 1.5),
            duration: 7.0,
            announced: false,
        },
    );
    scene
}

/// A blocker appears mid-road with little warning.
fn unexpected_obstacle(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64) -> TrafficScene {
    let road = Road::parallel(2, 700.0);
    let mut scene = base_scene(
        spec,
        road,
        DrivingGoal::ReachPosition { lane: 0, s: 500.0 },
    );
    let ego = cast.vehicle(Role::Ego, 0, 40.0, cruise);
    add(&mut scene, ego);
    scene.obstacles.insert(
        0,
        Obstacle {
            id: 0,
            label: "fallen cargo".into(),
            lane_id: 0,
            s: cast.jitter(230.0, 20.0),
            length: 3.0,
            active_from: spec.overrides.trigger_time.unwrap_or(4.0),
            announced: false,
        },
    );
    scene
}

/// A tailgating weaver with no patience.
fn aggressive(spec: &ScenarioSpec, cast: &mut Cast, cruise: f64) -> TrafficScene {
    let road = Road::parallel(2, straight_length(spec, cruise));
    let mut scene = base_scene(spec, road, DrivingGoal::SurviveUntil { t: spec.time_limit });
    let ego = cast.vehicle(Role::Ego, 0, 80.0, cruise * 0.8);
    add(&mut scene, ego);
    let behind = cast.jitter(18.0, 3.0);
    let mut tail = cast.vehicle(Role::Npc, 0, 80.0 - behind, cruise);
    tail.idm.t_headway = 0.3;
    tail.idm.s0 = 0.5;
    tail.idm.v0 = cruise * 1.2;
    tail.target_speed = cruise * 1.2;
    tail.triggers.push(Trigger::new(
        TriggerCondition::AtTime { t: 6.0 },
        TriggerEffect::LaneChange { target: 1 },
    ));
    tail.triggers.push(Trigger::new(
        TriggerCondition::AtTime { t: 12.0 },
        TriggerEffect::LaneChange { target: 0 },
    ));
    add(&mut scene, tail);
    scene
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::step_scene;
    use crate::scene::EgoAction;

    #[test]
    fn spawning_is_deterministic() {
        let spec = ScenarioSpec::new(ScenarioTemplate::VehicleFollowing, 3);
        let a = spawn_scenario(&spec).unwrap();
        let b = spawn_scenario(&spec).unwrap();
        assert_eq!(a.state_hash(), b.state_hash());
    }

    #[test]
    fn all_templates_spawn_in_perfect_fidelity() {
        for template in ScenarioTemplate::ALL {
            let spec = ScenarioSpec::perfect(template, 11);
            let scene = spawn_scenario(&spec).unwrap();
            assert!(scene.ego().is_some(), "{template:?} lacks an ego");
            assert_eq!(scene.ood, template.is_ood());
        }
    }

    #[test]
    fn imperfect_fidelity_rejects_rich_templates() {
        let mut spec = ScenarioSpec::new(ScenarioTemplate::Intersection, 1);
        spec.fidelity = Fidelity::Imperfect;
        assert!(matches!(
            spawn_scenario(&spec),
            Err(SpawnError::FidelityViolation { .. })
        ));
    }

    #[test]
    fn imperfect_scenes_have_no_rich_features() {
        for template in ScenarioTemplate::ALL.iter().filter(|t| t.allowed_imperfect()) {
            for seed in 0..5 {
                let spec = ScenarioSpec::new(*template, seed);
                let scene = spawn_scenario(&spec).unwrap();
                assert!(scene.road.intersections.is_empty());
                assert!(scene.pedestrians.is_empty());
                assert!(scene.obstacles.is_empty());
                assert!(scene.road.lanes.values().all(|l| !l.is_curved()));
            }
        }
    }

    #[test]
    fn pedestrian_crossing_script_intersects_ego_lane() {
        for seed in 0..10 {
            let spec = ScenarioSpec::perfect(ScenarioTemplate::PedestrianCrossing, seed);
            let scene = spawn_scenario(&spec).unwrap();
            assert_eq!(scene.pedestrians.len(), 1);
            let ego_lane = scene.ego().unwrap().lane_id;
            let p = scene.pedestrians.values().next().unwrap();
            assert_eq!(p.lane_id, ego_lane);
            let lane_len = scene.road.lane(ego_lane).unwrap().length();
            assert!(p.s > 0.0 && p.s < lane_len);
        }
    }

    #[test]
    fn cut_in_npc_carries_gap_trigger() {
        let spec = ScenarioSpec::new(ScenarioTemplate::CutIn, 9);
        let scene = spawn_scenario(&spec).unwrap();
        let npc = scene.vehicles.values().find(|v| !v.is_ego()).unwrap();
        assert!(npc.triggers.iter().any(|t| matches!(
            (t.condition, t.effect),
            (
                TriggerCondition::EgoGapBelow { .. },
                TriggerEffect::LaneChange { target: 0 }
            )
        )));
    }

    #[test]
    fn unknown_template_name_errors() {
        assert!(matches!(
            ScenarioTemplate::parse("wormhole_jump"),
            Err(SpawnError::UnknownTemplate(_))
        ));
        assert!(ScenarioTemplate::parse("hard_braking").is_ok());
    }

    #[test]
    fn reckless_driver_violates_the_signal() {
        let spec = ScenarioSpec::perfect(ScenarioTemplate::RecklessDriver, 2);
        let mut scene = spawn_scenario(&spec).unwrap();
        for _ in 0..400 {
            let (next, _) = step_scene(&scene, EgoAction::Idle, spec.dt);
            scene = next;
        }
        assert!(scene
            .events
            .iter()
            .any(|e| matches!(e.kind, crate::scene::SceneEventKind::SignalViolation { .. })));
    }
}
