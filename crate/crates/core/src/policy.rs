//! Road-class driven navigation advice.

use serde::{Deserialize, Serialize};

use crate::regions::RegionSet;
use crate::scalar::Scalar;
use crate::types::{Lane, RoadClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneChange {
    Permitted,
    Forbidden,
    /// The road class does not tell whether side lanes carry same-direction
    /// traffic; the planner has to decide.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavigationAdvice {
    /// Subset of the present lanes, in ego/left/right order.
    pub usable_lanes: Vec<Lane>,
    pub lane_change: LaneChange,
    pub rationale: String,
}

/// Multi-lane one-way roads: every detected lane is usable.
pub const RATIONALE_HIGHWAY: &str = "highway_multilane_one_way";
/// Two-way or single-lane roads: stay in the ego lane.
pub const RATIONALE_RESIDENTIAL: &str = "residential_two_way";
pub const RATIONALE_OTHERS: &str = "others_ego_only";
pub const RATIONALE_CITY: &str = "city_street_direction_ambiguous";
pub const RATIONALE_UNKNOWN: &str = "road_class_unknown";

/// Maps a road class and the detected lanes to usable lanes and a lane-change
/// verdict. Lanes that were not detected are never listed.
pub fn advise<T: Scalar>(road_class: RoadClass, regions: &RegionSet<T>) -> NavigationAdvice {
    advise_present(road_class, Lane::ALL.map(|l| regions.has(l)))
}

/// Same as [`advise`] with lane presence given as `[ego, left, right]`.
pub fn advise_present(road_class: RoadClass, present: [bool; 3]) -> NavigationAdvice {
    let (all_lanes, lane_change, rationale) = match road_class {
        RoadClass::Highway => (true, LaneChange::Permitted, RATIONALE_HIGHWAY),
        RoadClass::Residential => (false, LaneChange::Forbidden, RATIONALE_RESIDENTIAL),
        RoadClass::Others => (false, LaneChange::Forbidden, RATIONALE_OTHERS),
        RoadClass::CityStreet => (false, LaneChange::Undetermined, RATIONALE_CITY),
        RoadClass::Unknown => (false, LaneChange::Undetermined, RATIONALE_UNKNOWN),
    };
    let usable_lanes = Lane::ALL
        .into_iter()
        .zip(present)
        .filter(|&(lane, here)| here && (all_lanes || lane == Lane::Ego))
        .map(|(lane, _)| lane)
        .collect();
    NavigationAdvice { usable_lanes, lane_change, rationale: rationale.to_owned() }
}
