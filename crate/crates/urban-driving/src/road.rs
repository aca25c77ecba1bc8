//! Road topology: lanes, curvature segments, intersections and signals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::vehicle::DrivingError;

/// A constant-curvature stretch of a lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneSegment {
    pub length: f64,
    /// 1/m; zero for straight segments.
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneGeometry {
    pub lane_id: u32,
    pub segments: Vec<LaneSegment>,
    pub left_neighbor: Option<u32>,
    pub right_neighbor: Option<u32>,
    /// Lane continuing past the end of this one.
    pub successor: Option<u32>,
    /// Lane this one merges into at its end (merge ramps).
    pub merge_target: Option<u32>,
    pub intersection: Option<u32>,
}

impl LaneGeometry {
    pub fn straight(lane_id: u32, length: f64) -> Self {
        Self {
            lane_id,
            segments: vec![LaneSegment { length, curvature: 0.0 }],
            left_neighbor: None,
            right_neighbor: None,
            successor: None,
            merge_target: None,
            intersection: None,
        }
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|seg| seg.length).sum()
    }

    /// Curvature at longitudinal position `s`.
    pub fn curvature_at(&self, s: f64) -> f64 {
        let mut offset = 0.0;
        for seg in &self.segments {
            if s < offset + seg.length {
                return seg.curvature;
            }
            offset += seg.length;
        }
        self.segments.last().map(|seg| seg.curvature).unwrap_or(0.0)
    }

    pub fn is_curved(&self) -> bool {
        self.segments.iter().any(|seg| seg.curvature != 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalPhase {
    Green,
    Yellow,
    Red,
}

/// Fixed-cycle signal: green, then yellow, then red, repeating, shifted by
/// `offset` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSchedule {
    pub green: f64,
    pub yellow: f64,
    pub red: f64,
    pub offset: f64,
}

impl Default for SignalSchedule {
    fn default() -> Self {
        Self {
            green: 30.0,
            yellow: 3.0,
            red: 30.0,
            offset: 0.0,
        }
    }
}

impl SignalSchedule {
    pub fn phase_at(&self, t: f64) -> SignalPhase {
        let cycle = self.green + self.yellow + self.red;
        let x = (t + self.offset).rem_euclid(cycle);
        if x < self.green {
            SignalPhase::Green
        } else if x < self.green + self.yellow {
            SignalPhase::Yellow
        } else {
            SignalPhase::Red
        }
    }
}

/// Two lane ranges that cannot be occupied simultaneously.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictZone {
    pub lane_a: u32,
    pub range_a: (f64, f64),
    pub lane_b: u32,
    pub range_b: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: u32,
    /// Per-lane stop line position.
    pub stop_lines: BTreeMap<u32, f64>,
    /// Per-lane signal schedule.
    pub signals: BTreeMap<u32, SignalSchedule>,
    pub conflicts: Vec<ConflictZone>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Road {
    pub lanes: BTreeMap<u32, LaneGeometry>,
    pub intersections: BTreeMap<u32, Intersection>,
}

impl Road {
    pub fn lane(&self, id: u32) -> Option<&LaneGeometry> {
        self.lanes.get(&id)
    }

    pub fn add_lane(&mut self, lane: LaneGeometry) {
        self.lanes.insert(lane.lane_id, lane);
    }

    /// Build `n` parallel straight lanes with symmetric neighbor links.
    /// Lane 0 is the rightmost.
    pub fn parallel(n: usize, length: f64) -> Self {
        let mut road = Road::default();
        for i in 0..n {
            let mut lane = LaneGeometry::straight(i as u32, length);
            if i + 1 < n {
                lane.left_neighbor = Some((i + 1) as u32);
            }
            if i > 0 {
                lane.right_neighbor = Some((i - 1) as u32);
            }
            road.add_lane(lane);
        }
        road
    }

    /// Structural checks: positive lengths, finite curvature, symmetric
    /// neighbor relations.
    pub fn validate(&self) -> Result<(), DrivingError> {
        for (id, lane) in &self.lanes {
            if lane.lane_id != *id {
                return Err(DrivingError::InvalidScene(format!("lane {id} has mismatched id")));
            }
            if lane.length() <= 0.0 {
                return Err(DrivingError::InvalidScene(format!("lane {id} has non-positive length")));
            }
            for seg in &lane.segments {
                if !seg.curvature.is_finite() {
                    return Err(DrivingError::InvalidScene(format!("lane {id} has non-finite curvature")));
                }
            }
            if let Some(left) = lane.left_neighbor {
                let other = self
                    .lane(left)
                    .ok_or_else(|| DrivingError::InvalidScene(format!("lane {id} links to missing lane {left}")))?;
                if other.right_neighbor != Some(*id) {
                    return Err(DrivingError::InvalidScene(format!(
                        "asymmetric neighbors between {id} and {left}"
                    )));
                }
            }
            if let Some(right) = lane.right_neighbor {
                let other = self
                    .lane(right)
                    .ok_or_else(|| DrivingError::InvalidScene(format!("lane {id} links to missing lane {right}")))?;
                if other.left_neighbor != Some(*id) {
                    return Err(DrivingError::InvalidScene(format!(
                        "asymmetric neighbors between {id} and {right}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_lanes_are_symmetric() {
        let road = Road::parallel(3, 500.0);
        road.validate().unwrap();
        assert_eq!(road.lane(0).unwrap().left_neighbor, Some(1));
        assert_eq!(road.lane(1).unwrap().right_neighbor, Some(0));
        assert_eq!(road.lane(2).unwrap().left_neighbor, None);
    }

    #[test]
    fn signal_cycle_phases() {
        let s = SignalSchedule::default();
        assert_eq!(s.phase_at(0.0), SignalPhase::Green);
        assert_eq!(s.phase_at(29.9), SignalPhase::Green);
        assert_eq!(s.phase_at(31.0), SignalPhase::Yellow);
        assert_eq!(s.phase_at(40.0), SignalPhase::Red);
        assert_eq!(s.phase_at(63.5), SignalPhase::Green);
    }

    #[test]
    fn curvature_lookup_by_position() {
        let lane = LaneGeometry {
            lane_id: 0,
            segments: vec![
                LaneSegment { length: 100.0, curvature: 0.0 },
                LaneSegment { length: 50.0, curvature: 0.02 },
            ],
            left_neighbor: None,
            right_neighbor: None,
            successor: None,
            merge_target: None,
            intersection: None,
        };
        assert_eq!(lane.curvature_at(50.0), 0.0);
        assert_eq!(lane.curvature_at(120.0), 0.02);
        assert_eq!(lane.length(), 150.0);
    }
}
