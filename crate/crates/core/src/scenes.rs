//! Seeded synthetic road scenes with exact ground truth.
//!
//! Lanes are trapezoids spanning from a horizon row down to the last image
//! row, which gives perspective-like converging geometry. Obstacles carve
//! background holes out of lane interiors. Pixel `(x, y)` belongs to a lane
//! when the integer point `(x, y)` lies inside its trapezoid.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::geometry::{ConvexPolygon, PolygonSet};
use crate::types::{ClassId, Lane, Point, RoadClass, SegmentationMask};

const SPAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneSpec {
    pub lane: Lane,
    /// `[left, right]` column extent at the last image row.
    pub bottom: [f64; 2],
    /// `[left, right]` column extent at the horizon row.
    pub top: [f64; 2],
    pub horizon: usize,
}

/// Axis-aligned block `[x, x + width) × [y, y + height)` of pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Obstacle {
    fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub lanes: Vec<LaneSpec>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default)]
    pub road_class: RoadClass,
    #[serde(default)]
    pub seed: u64,
}

impl LaneSpec {
    fn bottom_row(height: usize) -> usize {
        height - 1
    }

    /// Continuous `[left, right]` extent at `row`, if the lane covers it.
    pub fn span_at(&self, row: usize, height: usize) -> Option<(f64, f64)> {
        let bottom = Self::bottom_row(height);
        if row < self.horizon || row > bottom {
            return None;
        }
        let t = if bottom == self.horizon { 1.0 } else { (row - self.horizon) as f64 / (bottom - self.horizon) as f64 };
        let l = self.top[0] + t * (self.bottom[0] - self.top[0]);
        let r = self.top[1] + t * (self.bottom[1] - self.top[1]);
        Some((l, r))
    }

    /// Trapezoid outline; may be a triangle when one span has zero width.
    pub fn outline(&self, height: usize) -> Vec<Point<f64>> {
        let (h, b) = (self.horizon as f64, Self::bottom_row(height) as f64);
        vec![
            Point::new(self.top[0], h),
            Point::new(self.top[1], h),
            Point::new(self.bottom[1], b),
            Point::new(self.bottom[0], b),
        ]
    }
}

fn lane_order(l: Lane) -> u8 {
    match l {
        Lane::Left => 0,
        Lane::Ego => 1,
        Lane::Right => 2,
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height < 2 {
            return Err(invalid_arg("scene must be at least 1x2 pixels"));
        }
        if self.width > u16::MAX as usize || self.height > u16::MAX as usize {
            return Err(invalid_arg("scene dimensions exceed 65535"));
        }
        if !(1..=3).contains(&self.lanes.len()) {
            return Err(invalid_arg("a scene has one to three lanes"));
        }
        for lane in Lane::ALL {
            let n = self.lanes.iter().filter(|l| l.lane == lane).count();
            if n > 1 || (lane == Lane::Ego && n != 1) {
                return Err(invalid_arg("a scene needs exactly one ego lane and at most one lane per side"));
            }
        }
        if !(0.0..=0.05).contains(&self.noise_rate) {
            return Err(invalid_arg("noise_rate must lie in [0, 0.05]"));
        }
        let max_x = (self.width - 1) as f64;
        for l in &self.lanes {
            let xs = [l.bottom[0], l.bottom[1], l.top[0], l.top[1]];
            if xs.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > max_x) {
                return Err(invalid_arg("lane extends outside the image"));
            }
            if l.bottom[0] > l.bottom[1] || l.top[0] > l.top[1] {
                return Err(invalid_arg("lane span is reversed"));
            }
            if l.horizon >= self.height - 1 {
                return Err(invalid_arg("lane horizon must lie above the last row"));
            }
            if ConvexPolygon::new(l.outline(self.height)).is_err() {
                return Err(invalid_arg("lane trapezoid is degenerate"));
            }
        }
        let mut sorted: Vec<&LaneSpec> = self.lanes.iter().collect();
        sorted.sort_by_key(|l| lane_order(l.lane));
        for pair in sorted.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let first = a.horizon.max(b.horizon);
            let last = self.height - 1;
            // Spans are linear in the row, so the gap is extremal at the ends.
            for row in [first, last] {
                let (_, ar) = a.span_at(row, self.height).unwrap();
                let (bl, _) = b.span_at(row, self.height).unwrap();
                if bl - ar < 1.0 {
                    return Err(invalid_arg(format!("lanes closer than 1 px at row {row}")));
                }
            }
        }
        for o in &self.obstacles {
            if o.width == 0 || o.height == 0 || o.x + o.width > self.width || o.y + o.height > self.height {
                return Err(invalid_arg("obstacle outside the image or empty"));
            }
        }
        Ok(())
    }

    fn lane_class(lane: Lane) -> ClassId {
        if lane == Lane::Ego {
            ClassId::EgoLane
        } else {
            ClassId::OtherLanes
        }
    }
}

/// Ground truth for one generated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneOracle {
    pub width: usize,
    pub height: usize,
    pub road_class: RoadClass,
    pub lanes: Vec<LaneSpec>,
    pub obstacles: Vec<Obstacle>,
}

impl SceneOracle {
    pub fn lane(&self, lane: Lane) -> Option<&LaneSpec> {
        self.lanes.iter().find(|l| l.lane == lane)
    }

    /// Noise-free pixel membership of one lane (trapezoid minus obstacles).
    pub fn lane_pixels(&self, lane: Lane) -> Option<Vec<bool>> {
        let spec = self.lane(lane)?;
        let mut out = vec![false; self.width * self.height];
        for row in 0..self.height {
            let Some((l, r)) = spec.span_at(row, self.height) else { continue };
            let c0 = (l - SPAN_TOL).ceil().max(0.0) as usize;
            let c1 = ((r + SPAN_TOL).floor() as usize).min(self.width - 1);
            for col in c0..=c1 {
                if !self.obstacles.iter().any(|o| o.contains(col, row)) {
                    out[row * self.width + col] = true;
                }
            }
        }
        Some(out)
    }

    /// Trapezoid outline of a lane, obstacles ignored.
    pub fn lane_polygon(&self, lane: Lane) -> Option<ConvexPolygon<f64>> {
        ConvexPolygon::new(self.lane(lane)?.outline(self.height)).ok()
    }

    /// Lanes present, ordered by ascending centroid x of their trapezoids.
    pub fn lanes_by_centroid_x(&self) -> Vec<Lane> {
        let mut v: Vec<(Lane, f64)> =
            self.lanes.iter().filter_map(|l| Some((l.lane, self.lane_polygon(l.lane)?.centroid().x))).collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1));
        v.into_iter().map(|(l, _)| l).collect()
    }
}

/// Rasterizes the scene and applies seeded class-flip noise.
pub fn generate(spec: &SceneSpec) -> Result<(SegmentationMask, SceneOracle)> {
    spec.validate()?;
    let oracle = SceneOracle {
        width: spec.width,
        height: spec.height,
        road_class: spec.road_class,
        lanes: spec.lanes.clone(),
        obstacles: spec.obstacles.clone(),
    };
    let mut mask = SegmentationMask::filled(spec.width, spec.height, ClassId::Background)?;
    for lane in &spec.lanes {
        let class = SceneSpec::lane_class(lane.lane);
        let pixels = oracle.lane_pixels(lane.lane).expect("lane present");
        for (i, _) in pixels.iter().enumerate().filter(|(_, &p)| p) {
            mask.set(i % spec.width, i / spec.width, class);
        }
    }
    let n = spec.width * spec.height;
    let flips = (spec.noise_rate * n as f64).round() as usize;
    if flips > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for i in sample(&mut rng, n, flips).into_iter() {
            let (x, y) = (i % spec.width, i / spec.width);
            let cur = mask.get(x, y).code();
            let shift: u8 = rng.gen_range(1..=2);
            let flipped = ClassId::try_from((cur + shift) % 3).expect("code in range");
            mask.set(x, y, flipped);
        }
    }
    Ok((mask, oracle))
}

/// Pixel-level intersection over union of two membership rasters.
pub fn raster_iou(a: &[bool], b: &[bool]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Rasterized IoU between a detected region and an oracle lane.
pub fn region_iou(pieces: &PolygonSet<f64>, oracle: &SceneOracle, lane: Lane) -> Option<f64> {
    let truth = oracle.lane_pixels(lane)?;
    Some(raster_iou(&pieces.rasterize(oracle.width, oracle.height), &truth))
}

/// Knobs for [`random_spec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomSceneParams {
    pub width: usize,
    pub height: usize,
    pub max_obstacles: usize,
    pub max_noise_rate: f64,
}

impl Default for RandomSceneParams {
    fn default() -> Self {
        Self { width: 640, height: 480, max_obstacles: 2, max_noise_rate: 0.02 }
    }
}

/// Draws a valid random scene: one to three lanes converging toward a
/// vanishing region, inter-lane gaps of at least 16 px, small obstacles
/// inside lanes and up to `max_noise_rate` flip noise.
pub fn random_spec(seed: u64, params: &RandomSceneParams) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (params.width as f64, params.height);
    let lane_count = rng.gen_range(1..=3);
    let roles: Vec<Lane> = match lane_count {
        1 => vec![Lane::Ego],
        2 if rng.gen_bool(0.5) => vec![Lane::Left, Lane::Ego],
        2 => vec![Lane::Ego, Lane::Right],
        _ => vec![Lane::Left, Lane::Ego, Lane::Right],
    };
    let horizon = (h as f64 * rng.gen_range(0.38..0.5)) as usize;

    // Lane layout at the bottom and top rows, in units of the image width.
    let bottom_w = w * rng.gen_range(0.24..0.29);
    let bottom_gap = w * rng.gen_range(0.025..0.045);
    let top_w = w * rng.gen_range(0.05..0.08);
    let top_gap = w * rng.gen_range(0.025..0.035);
    let bottom_center = w / 2.0 + w * rng.gen_range(-0.03..0.03);
    let top_center = w / 2.0 + w * rng.gen_range(-0.05..0.05);
    let place = |center: f64, width: f64, gap: f64, lane: Lane| {
        let offset = match lane {
            Lane::Left => -(width + gap),
            Lane::Ego => 0.0,
            Lane::Right => width + gap,
        };
        let l = center + offset - width / 2.0;
        [l.clamp(0.0, w - 1.0), (l + width).clamp(0.0, w - 1.0)]
    };
    let lanes: Vec<LaneSpec> = roles
        .iter()
        .map(|&lane| LaneSpec {
            lane,
            bottom: place(bottom_center, bottom_w, bottom_gap, lane),
            top: place(top_center, top_w, top_gap, lane),
            horizon,
        })
        .collect();

    let mut obstacles = Vec::new();
    for _ in 0..rng.gen_range(0..=params.max_obstacles) {
        let lane = lanes[rng.gen_range(0..lanes.len())];
        let ow = rng.gen_range(8..=20usize);
        let oh = rng.gen_range(8..=20usize);
        // lower half of the lane, where it is wide enough to hold the block
        let y = rng.gen_range((horizon + h) / 2..h - 1 - oh);
        let (l, r) = lane.span_at(y, h).expect("row inside lane");
        let (l, r) = (l.ceil() as usize + 2, r.floor() as usize);
        if r < l + ow + 2 {
            continue;
        }
        let x = rng.gen_range(l..r - ow - 1);
        obstacles.push(Obstacle { x, y, width: ow, height: oh });
    }
    let road_class = [RoadClass::Residential, RoadClass::Highway, RoadClass::CityStreet, RoadClass::Others]
        [rng.gen_range(0..4)];
    SceneSpec {
        width: params.width,
        height: params.height,
        lanes,
        obstacles,
        noise_rate: rng.gen_range(0.0..=params.max_noise_rate),
        road_class,
        seed: rng.gen(),
    }
}
