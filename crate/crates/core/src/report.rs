//! JSON region document: the per-frame output handed to downstream
//! consumers.
//!
//! Layout (field order fixed):
//! `{frame_id, road_class, regions: [{lane, area, centroid: [x, y],
//! pieces: [[[x, y], ...], ...]}], advice}`. Real numbers carry at most six
//! fractional digits.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::Result;
use crate::policy::{advise, NavigationAdvice};
use crate::regions::{DrivableRegion, RegionSet};
use crate::types::{Lane, RoadClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneLabel {
    Ego,
    Left,
    Right,
    Unassigned,
}

impl From<Option<Lane>> for LaneLabel {
    fn from(l: Option<Lane>) -> Self {
        match l {
            Some(Lane::Ego) => LaneLabel::Ego,
            Some(Lane::Left) => LaneLabel::Left,
            Some(Lane::Right) => LaneLabel::Right,
            None => LaneLabel::Unassigned,
        }
    }
}

impl LaneLabel {
    pub fn lane(self) -> Option<Lane> {
        match self {
            LaneLabel::Ego => Some(Lane::Ego),
            LaneLabel::Left => Some(Lane::Left),
            LaneLabel::Right => Some(Lane::Right),
            LaneLabel::Unassigned => None,
        }
    }
}

/// Rounds to six decimals; also folds `-0` into `0`.
pub fn round6(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn ser_round<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round6(*v))
}

fn ser_point<S: Serializer>(p: &[f64; 2], s: S) -> std::result::Result<S::Ok, S::Error> {
    [round6(p[0]), round6(p[1])].serialize(s)
}

fn ser_pieces<S: Serializer>(pieces: &[Vec<[f64; 2]>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let rounded: Vec<Vec<[f64; 2]>> =
        pieces.iter().map(|ring| ring.iter().map(|p| [round6(p[0]), round6(p[1])]).collect()).collect();
    rounded.serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub lane: LaneLabel,
    #[serde(serialize_with = "ser_round")]
    pub area: f64,
    #[serde(serialize_with = "ser_point")]
    pub centroid: [f64; 2],
    #[serde(serialize_with = "ser_pieces")]
    pub pieces: Vec<Vec<[f64; 2]>>,
}

impl From<&DrivableRegion<f64>> for RegionEntry {
    fn from(r: &DrivableRegion<f64>) -> Self {
        RegionEntry {
            lane: r.lane.into(),
            area: r.area,
            centroid: [r.centroid.x, r.centroid.y],
            pieces: r.pieces.pieces().iter().map(|p| p.vertices().iter().map(|v| [v.x, v.y]).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDocument {
    pub frame_id: u32,
    pub road_class: RoadClass,
    pub regions: Vec<RegionEntry>,
    pub advice: NavigationAdvice,
}

impl RegionDocument {
    pub fn new(frame_id: u32, road_class: RoadClass, set: &RegionSet<f64>) -> Self {
        Self {
            frame_id,
            road_class,
            regions: set.iter().map(RegionEntry::from).collect(),
            advice: advise(road_class, set),
        }
    }

    pub fn region(&self, lane: Lane) -> Option<&RegionEntry> {
        self.regions.iter().find(|r| r.lane.lane() == Some(lane))
    }

    /// Compact single-line JSON.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("region document serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }
}
