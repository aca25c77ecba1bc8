//! Observation rendering for the driving world: ego status, lane layout,
//! surrounding objects ordered by (lane, position), active signals and
//! recent events.

use std::fmt::Write;

use urban_driving::{DrivingGoal, SignalPhase, TrafficScene};

use super::ObservationText;

fn goal_text(goal: &DrivingGoal) -> String {
    match goal {
        DrivingGoal::ReachLane { lane } => format!("reach lane {lane} safely"),
        DrivingGoal::ReachPosition { lane, s } => {
            format!("reach position {s:.0} m on lane {lane} safely")
        }
        DrivingGoal::SurviveUntil { t } => format!("drive safely until t = {t:.0} s"),
    }
}

pub fn render_driving(scene: &TrafficScene) -> ObservationText {
    let mut sections = Vec::new();

    let mut ego_status = String::new();
    if let Some(ego) = scene.ego() {
        let _ = writeln!(ego_status, "Time: {:.1} s of {:.0} s", scene.t, scene.time_limit);
        let _ = writeln!(ego_status, "Goal: {}", goal_text(&scene.goal));
        let _ = writeln!(ego_status, "Lane: {}", ego.lane_id);
        let _ = writeln!(ego_status, "Position: {:.1} m", ego.s);
        let _ = writeln!(ego_status, "Speed: {:.1} m/s (target {:.1} m/s)", ego.v, ego.target_speed);
    } else {
        ego_status.push_str("No ego vehicle in scene.\n");
    }
    sections.push(("Ego Status".to_string(), ego_status));

    let mut lanes = String::new();
    for lane in scene.road.lanes.values() {
        let mut notes = Vec::new();
        if let Some(l) = lane.left_neighbor {
            notes.push(format!("left neighbor {l}"));
        }
        if let Some(r) = lane.right_neighbor {
            notes.push(format!("right neighbor {r}"));
        }
        if let Some(m) = lane.merge_target {
            notes.push(format!("merges into lane {m}"));
        }
        if lane.is_curved() {
            notes.push("curved".to_string());
        }
        let notes = if notes.is_empty() { String::new() } else { format!(" ({})", notes.join(", ")) };
        let _ = writeln!(lanes, "Lane {}: {:.0} m{}", lane.lane_id, lane.length(), notes);
    }
    for intersection in scene.road.intersections.values() {
        for (lane, stop) in &intersection.stop_lines {
            let phase = intersection
                .signals
                .get(lane)
                .map(|s| match s.phase_at(scene.t) {
                    SignalPhase::Green => "green",
                    SignalPhase::Yellow => "yellow",
                    SignalPhase::Red => "red",
                })
                .unwrap_or("unsignalized");
            let _ = writeln!(
                lanes,
                "Signal on lane {lane}: {phase}, stop line at {stop:.0} m"
            );
        }
    }
    sections.push(("Lane Layout".to_string(), lanes));

    let mut objects = String::new();
    if let Some(ego) = scene.ego() {
        let mut rows: Vec<(u32, f64, String)> = Vec::new();
        for v in scene.vehicles.values() {
            if v.is_ego() {
                continue;
            }
            let rel = v.s - ego.s;
            let where_ = if rel >= 0.0 { "ahead" } else { "behind" };
            let closing = ego.v - v.v;
            rows.push((
                v.lane_id,
                v.s,
                format!(
                    "{} (V{}): lane {}, {:.1} m {}, speed {:.1} m/s, closing {:.1} m/s",
                    v.label,
                    v.id,
                    v.lane_id,
                    rel.abs(),
                    where_,
                    v.v,
                    closing
                ),
            ));
        }
        for p in scene.pedestrians.values() {
            if p.active_at(scene.t) {
                rows.push((
                    p.lane_id,
                    p.s,
                    format!(
                        "pedestrian (P{}): lane {}, at {:.1} m ({:.1} m ahead of you)",
                        p.id,
                        p.lane_id,
                        p.s,
                        p.s - ego.s
                    ),
                ));
            }
        }
        for o in scene.obstacles.values() {
            if o.active_at(scene.t) {
                rows.push((
                    o.lane_id,
                    o.s,
                    format!(
                        "{} (O{}): lane {}, at {:.1} m ({:.1} m ahead of you)",
                        o.label,
                        o.id,
                        o.lane_id,
                        o.s,
                        o.s - ego.s
                    ),
                ));
            }
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal)));
        if rows.is_empty() {
            objects.push_str("No other objects nearby.\n");
        }
        for (_, _, line) in rows {
            objects.push_str(&line);
            objects.push('\n');
        }
    }
    sections.push(("Objects".to_string(), objects));

    let mut events = String::new();
    let recent = scene.events.iter().rev().take(5).collect::<Vec<_>>();
    if recent.is_empty() {
        events.push_str("None yet.\n");
    }
    for e in recent.into_iter().rev() {
        let _ = writeln!(events, "t={:.1}: {}", e.t, serde_json::to_string(&e.kind).unwrap_or_default());
    }
    sections.push(("Recent Events".to_string(), events));

    ObservationText { sections }
}

#[cfg(test)]
mod tests {
    use super::*;
    use urban_driving::{spawn_scenario, step_scene, EgoAction, ScenarioSpec, ScenarioTemplate};

    #[test]
    fn identical_scenes_render_identically() {
        let spec = ScenarioSpec::new(ScenarioTemplate::VehicleFollowing, 12);
        let scene = spawn_scenario(&spec).unwrap();
        assert_eq!(render_driving(&scene).flat(), render_driving(&scene).flat());
    }

    #[test]
    fn lone_ego_lists_no_objects() {
        let spec = ScenarioSpec::perfect(ScenarioTemplate::RoadCurve, 4);
        let scene = spawn_scenario(&spec).unwrap();
        let obs = render_driving(&scene);
        let objects = &obs.sections.iter().find(|(h, _)| h == "Objects").unwrap().1;
        assert!(objects.contains("No other objects nearby."));
    }

    #[test]
    fn cut_in_render_shows_lane_change_event_at_trigger() {
        let spec = ScenarioSpec::new(ScenarioTemplate::CutIn, 13);
        let mut scene = spawn_scenario(&spec).unwrap();
        for _ in 0..600 {
            let (next, events) = step_scene(&scene, EgoAction::Faster, spec.dt);
            scene = next;
            if events
                .iter()
                .any(|e| matches!(e.kind, urban_driving::SceneEventKind::CutInTriggered { .. }))
            {
                break;
            }
        }
        let flat = render_driving(&scene).flat();
        assert!(flat.contains("cut_in_triggered"), "{flat}");
    }
}
