//! Mask → lane-attributed drivable regions.
//!
//! Steps: stride-downsample the mask, cluster the ego-lane and other-lane
//! pixels separately (optionally in parallel), take the convex hull of every
//! cluster, scale hulls back to full resolution, remove overlaps between
//! hulls, then split the other-lane regions into left and right of the
//! biggest ego region and keep the biggest region per side.

use serde::{Deserialize, Serialize};

use crate::clustering::{dbscan, ClusterParams};
use crate::error::{invalid_arg, Error, Result};
use crate::geometry::{convex_hull, convex_intersection, convex_subtract, ConvexPolygon, PolygonSet};
use crate::scalar::Scalar;
use crate::types::{downsample, extract_points, ClassId, Lane, Point, SegmentationMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
#[serde(try_from = "RawExtractionConfig<T>", into = "RawExtractionConfig<T>")]
pub struct ExtractionConfig<T: Scalar> {
    downsample_factor: usize,
    cluster: ClusterParams<T>,
    parallel_classes: bool,
    min_region_area: T,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
#[serde(default)]
struct RawExtractionConfig<T: Scalar> {
    downsample_factor: usize,
    cluster: ClusterParams<T>,
    parallel_classes: bool,
    min_region_area: T,
}

impl<T: Scalar> Default for RawExtractionConfig<T> {
    fn default() -> Self {
        ExtractionConfig::default().into()
    }
}

impl<T: Scalar> From<ExtractionConfig<T>> for RawExtractionConfig<T> {
    fn from(c: ExtractionConfig<T>) -> Self {
        Self {
            downsample_factor: c.downsample_factor,
            cluster: c.cluster,
            parallel_classes: c.parallel_classes,
            min_region_area: c.min_region_area,
        }
    }
}

impl<T: Scalar> TryFrom<RawExtractionConfig<T>> for ExtractionConfig<T> {
    type Error = Error;

    fn try_from(r: RawExtractionConfig<T>) -> Result<Self> {
        Self::new(r.downsample_factor, r.cluster, r.parallel_classes, r.min_region_area)
    }
}

impl<T: Scalar> Default for ExtractionConfig<T> {
    fn default() -> Self {
        Self {
            downsample_factor: Self::DEFAULT_DOWNSAMPLE,
            cluster: ClusterParams::default(),
            parallel_classes: true,
            min_region_area: T::of(Self::DEFAULT_MIN_REGION_AREA),
        }
    }
}

impl<T: Scalar> ExtractionConfig<T> {
    pub const DEFAULT_DOWNSAMPLE: usize = 4;
    /// Full-resolution px².
    pub const DEFAULT_MIN_REGION_AREA: f64 = 64.0;

    pub fn new(downsample_factor: usize, cluster: ClusterParams<T>, parallel_classes: bool, min_region_area: T) -> Result<Self> {
        if downsample_factor < 1 {
            return Err(invalid_arg("downsample_factor must be at least 1"));
        }
        if !(min_region_area >= T::zero() && min_region_area.is_finite()) {
            return Err(invalid_arg("min_region_area must be finite and non-negative"));
        }
        Ok(Self { downsample_factor, cluster, parallel_classes, min_region_area })
    }

    pub fn downsample_factor(&self) -> usize {
        self.downsample_factor
    }

    pub fn cluster(&self) -> &ClusterParams<T> {
        &self.cluster
    }

    pub fn parallel_classes(&self) -> bool {
        self.parallel_classes
    }

    pub fn min_region_area(&self) -> T {
        self.min_region_area
    }

    pub fn with_parallel_classes(mut self, parallel: bool) -> Self {
        self.parallel_classes = parallel;
        self
    }
}

/// One lane's drivable area: interior-disjoint convex pieces in
/// full-resolution pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivableRegion<T: Scalar> {
    /// `None` when the region could not be placed left or right of an ego
    /// region.
    pub lane: Option<Lane>,
    pub class: ClassId,
    pub pieces: PolygonSet<T>,
    pub area: T,
    pub centroid: Point<T>,
}

impl<T: Scalar> DrivableRegion<T> {
    /// `None` for an empty piece set.
    pub fn new(lane: Option<Lane>, class: ClassId, pieces: PolygonSet<T>) -> Option<Self> {
        let area = pieces.total_area();
        let centroid = pieces.centroid()?;
        (area > T::zero()).then_some(Self { lane, class, pieces, area, centroid })
    }
}

/// Biggest region per lane plus the other-lane regions left unsided.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionSet<T: Scalar> {
    pub ego: Option<DrivableRegion<T>>,
    pub left: Option<DrivableRegion<T>>,
    pub right: Option<DrivableRegion<T>>,
    pub unassigned: Vec<DrivableRegion<T>>,
}

impl<T: Scalar> RegionSet<T> {
    pub fn lane(&self, lane: Lane) -> Option<&DrivableRegion<T>> {
        match lane {
            Lane::Ego => self.ego.as_ref(),
            Lane::Left => self.left.as_ref(),
            Lane::Right => self.right.as_ref(),
        }
    }

    pub fn has(&self, lane: Lane) -> bool {
        self.lane(lane).is_some()
    }

    /// Ego, left, right (when present) followed by the unassigned regions.
    pub fn iter(&self) -> impl Iterator<Item = &DrivableRegion<T>> {
        self.ego.iter().chain(self.left.iter()).chain(self.right.iter()).chain(self.unassigned.iter())
    }

    pub fn is_empty(&self) -> bool {
        self.iter().next().is_none()
    }
}

/// Convex hull of each surviving cluster of one class, in full-resolution
/// coordinates, in cluster order. Degenerate hulls and hulls smaller than
/// `min_region_area` are dropped.
pub fn class_hulls<T: Scalar>(small: &SegmentationMask, class: ClassId, cfg: &ExtractionConfig<T>) -> Vec<ConvexPolygon<T>> {
    let points: Vec<Point<T>> = extract_points(small, class);
    let labels = dbscan(&points, &cfg.cluster);
    let scale = T::of(cfg.downsample_factor as f64);
    labels
        .members()
        .into_iter()
        .filter_map(|idx| {
            let pts: Vec<Point<T>> = idx.into_iter().map(|i| points[i]).collect();
            convex_hull(&pts)
        })
        .map(|h| h.scaled(scale))
        .filter(|h| h.area() >= cfg.min_region_area)
        .collect()
}

/// Hull candidates for the ego-lane class followed by the other-lane class,
/// before overlap removal.
pub fn candidate_regions<T: Scalar>(mask: &SegmentationMask, cfg: &ExtractionConfig<T>) -> Result<Vec<(ClassId, ConvexPolygon<T>)>> {
    let small = downsample(mask, cfg.downsample_factor)?;
    let (ego, other) = if cfg.parallel_classes {
        rayon::join(
            || class_hulls(&small, ClassId::EgoLane, cfg),
            || class_hulls(&small, ClassId::OtherLanes, cfg),
        )
    } else {
        (class_hulls(&small, ClassId::EgoLane, cfg), class_hulls(&small, ClassId::OtherLanes, cfg))
    };
    Ok(ego
        .into_iter()
        .map(|h| (ClassId::EgoLane, h))
        .chain(other.into_iter().map(|h| (ClassId::OtherLanes, h)))
        .collect())
}

fn find_overlap<T: Scalar>(regions: &[(ClassId, PolygonSet<T>)]) -> Option<(usize, usize, usize, usize)> {
    for i in 0..regions.len() {
        for j in i + 1..regions.len() {
            for (pi, a) in regions[i].1.pieces().iter().enumerate() {
                for (pj, b) in regions[j].1.pieces().iter().enumerate() {
                    if convex_intersection(a, b).is_some() {
                        return Some((i, pi, j, pj));
                    }
                }
            }
        }
    }
    None
}

/// Removes every positive-area overlap between different regions.
///
/// For each overlapping piece pair the shared area is cut from one side: the
/// ego-lane piece when exactly one side is ego lane, otherwise the region
/// with the smaller total area (the later region on ties). Regions that end
/// up empty are kept with an empty piece set so indices stay aligned.
pub fn resolve_overlaps<T: Scalar>(mut regions: Vec<(ClassId, PolygonSet<T>)>) -> Vec<(ClassId, PolygonSet<T>)> {
    // Each pass strictly removes one overlap; the cap only guards against
    // rounding ping-pong.
    let max_passes = 64 * regions.iter().map(|r| r.1.pieces().len()).sum::<usize>().max(1).pow(2);
    for _ in 0..max_passes {
        let Some((i, pi, j, pj)) = find_overlap(&regions) else { break };
        let (ego_i, ego_j) = (regions[i].0 == ClassId::EgoLane, regions[j].0 == ClassId::EgoLane);
        let (loser, lp, winner, wp) = if ego_i != ego_j {
            if ego_i {
                (i, pi, j, pj)
            } else {
                (j, pj, i, pi)
            }
        } else if regions[i].1.total_area() < regions[j].1.total_area() {
            (i, pi, j, pj)
        } else {
            (j, pj, i, pi)
        };
        let piece = regions[loser].1.pieces()[lp].clone();
        let other = &regions[winner].1.pieces()[wp];
        let rest = convex_subtract(&piece, other).into_pieces();
        regions[loser].1.replace_piece(lp, rest);
    }
    regions
}

/// Result of placing other-lane regions relative to the ego region.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SideAssignment<T: Scalar> {
    pub left: Option<DrivableRegion<T>>,
    pub right: Option<DrivableRegion<T>>,
    pub unassigned: Vec<DrivableRegion<T>>,
}

fn keep_bigger<T: Scalar>(slot: &mut Option<DrivableRegion<T>>, r: DrivableRegion<T>) {
    if slot.as_ref().is_none_or(|cur| r.area > cur.area) {
        *slot = Some(r);
    }
}

/// Sides other-lane regions by centroid x against the ego centroid (ties go
/// right) and keeps the biggest per side. Without an ego region nothing can
/// be sided and every region is returned unassigned.
pub fn assign_sides<T: Scalar>(others: Vec<DrivableRegion<T>>, ego: Option<&DrivableRegion<T>>) -> SideAssignment<T> {
    let mut out = SideAssignment { left: None, right: None, unassigned: Vec::new() };
    let Some(ego) = ego else {
        out.unassigned = others.into_iter().map(|r| DrivableRegion { lane: None, ..r }).collect();
        return out;
    };
    for r in others {
        if r.centroid.x < ego.centroid.x {
            keep_bigger(&mut out.left, DrivableRegion { lane: Some(Lane::Left), ..r });
        } else {
            keep_bigger(&mut out.right, DrivableRegion { lane: Some(Lane::Right), ..r });
        }
    }
    out
}

/// Full extraction for one mask. Output depends only on `(mask, cfg)`.
pub fn extract_regions<T: Scalar>(mask: &SegmentationMask, cfg: &ExtractionConfig<T>) -> Result<RegionSet<T>> {
    let candidates = candidate_regions(mask, cfg)?;
    let resolved = resolve_overlaps(
        candidates.into_iter().map(|(c, h)| (c, PolygonSet::from(vec![h]))).collect(),
    );
    let mut ego: Option<DrivableRegion<T>> = None;
    let mut others = Vec::new();
    for (class, set) in resolved {
        match class {
            ClassId::EgoLane => {
                if let Some(r) = DrivableRegion::new(Some(Lane::Ego), class, set) {
                    keep_bigger(&mut ego, r);
                }
            }
            _ => others.extend(DrivableRegion::new(None, class, set)),
        }
    }
    let sides = assign_sides(others, ego.as_ref());
    Ok(RegionSet { ego, left: sides.left, right: sides.right, unassigned: sides.unassigned })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> PolygonSet<f64> {
        PolygonSet::from(vec![ConvexPolygon::rectangle(x0, y0, x1, y1).unwrap()])
    }

    fn region(x0: f64, y0: f64, x1: f64, y1: f64) -> DrivableRegion<f64> {
        DrivableRegion::new(None, ClassId::OtherLanes, rect(x0, y0, x1, y1)).unwrap()
    }

    #[test]
    fn all_background_gives_empty_set() {
        let m = SegmentationMask::filled(64, 48, ClassId::Background).unwrap();
        let set = extract_regions::<f64>(&m, &ExtractionConfig::default()).unwrap();
        assert_eq!(set, RegionSet::default());
    }

    #[test]
    fn disjoint_regions_unchanged() {
        let input = vec![(ClassId::EgoLane, rect(0., 0., 1., 1.)), (ClassId::OtherLanes, rect(3., 0., 4., 1.))];
        assert_eq!(resolve_overlaps(input.clone()), input);
    }

    #[test]
    fn ego_loses_overlap() {
        let out = resolve_overlaps(vec![
            (ClassId::OtherLanes, rect(0.5, 0.5, 1.5, 1.5)),
            (ClassId::EgoLane, rect(0., 0., 1., 1.)),
        ]);
        assert!((out[1].1.total_area() - 0.75).abs() < 1e-12);
        assert_eq!(out[0].1, rect(0.5, 0.5, 1.5, 1.5));
    }

    #[test]
    fn smaller_non_ego_region_loses() {
        let out = resolve_overlaps(vec![
            (ClassId::OtherLanes, rect(0., 0., 3., 3.)),
            (ClassId::OtherLanes, rect(2., 2., 4., 4.)),
        ]);
        assert!((out[0].1.total_area() - 9.0).abs() < 1e-12);
        assert!((out[1].1.total_area() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn equal_area_tie_goes_to_later_region() {
        let out = resolve_overlaps(vec![
            (ClassId::EgoLane, rect(0., 0., 2., 2.)),
            (ClassId::EgoLane, rect(1., 0., 3., 2.)),
        ]);
        assert!((out[0].1.total_area() - 4.0).abs() < 1e-12);
        assert!((out[1].1.total_area() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fully_covered_region_becomes_empty() {
        let out = resolve_overlaps(vec![
            (ClassId::OtherLanes, rect(0., 0., 10., 10.)),
            (ClassId::EgoLane, rect(2., 2., 4., 4.)),
        ]);
        assert!(out[1].1.is_empty());
    }

    #[test]
    fn sides_by_centroid() {
        let ego = DrivableRegion::new(Some(Lane::Ego), ClassId::EgoLane, rect(300., 0., 340., 10.)).unwrap();
        let s = assign_sides(vec![region(90., 0., 110., 10.)], Some(&ego));
        assert_eq!(s.left.unwrap().lane, Some(Lane::Left));
        assert!(s.right.is_none());

        let small = region(400., 0., 450., 10.);
        let big = region(500., 0., 590., 10.);
        let s = assign_sides(vec![small, big.clone()], Some(&ego));
        assert_eq!(s.right.unwrap().area, big.area);
    }

    #[test]
    fn centroid_tie_goes_right() {
        let ego = DrivableRegion::new(Some(Lane::Ego), ClassId::EgoLane, rect(0., 0., 2., 2.)).unwrap();
        let s = assign_sides(vec![region(0., 5., 2., 7.)], Some(&ego));
        assert!(s.right.is_some() && s.left.is_none());
    }

    #[test]
    fn no_ego_leaves_everything_unassigned() {
        let s = assign_sides(vec![region(0., 0., 2., 2.)], None);
        assert!(s.left.is_none() && s.right.is_none());
        assert_eq!(s.unassigned.len(), 1);
        assert_eq!(s.unassigned[0].lane, None);
    }

    #[test]
    fn config_serde_defaults_and_validation() {
        let cfg: ExtractionConfig<f64> = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExtractionConfig::default());
        assert_eq!(cfg.downsample_factor(), 4);
        assert!(serde_json::from_str::<ExtractionConfig<f64>>(r#"{"downsample_factor": 0}"#).is_err());
        let cfg: ExtractionConfig<f64> = serde_json::from_str(r#"{"cluster": {"eps": 2.5}}"#).unwrap();
        assert_eq!(cfg.cluster().eps(), 2.5);
    }

    #[test]
    fn two_blocks_extracted_with_sides() {
        // ego block in the middle, other-lane blocks left and right
        let (w, h) = (96, 40);
        let mut m = SegmentationMask::filled(w, h, ClassId::Background).unwrap();
        for y in 0..h {
            for x in 0..w {
                let c = match x {
                    0..=23 => ClassId::OtherLanes,
                    36..=59 => ClassId::EgoLane,
                    72.. => ClassId::OtherLanes,
                    _ => ClassId::Background,
                };
                m.set(x, y, c);
            }
        }
        let set = extract_regions::<f64>(&m, &ExtractionConfig::default()).unwrap();
        let (ego, left, right) = (set.ego.unwrap(), set.left.unwrap(), set.right.unwrap());
        assert!((ego.area - 20.0 * 36.0).abs() < 1e-9);
        assert!(left.centroid.x < ego.centroid.x && right.centroid.x > ego.centroid.x);
        assert!(set.unassigned.is_empty());
    }
}
