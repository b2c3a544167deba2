//! Mask and pixel data model plus the mask-level primitives.
//!
//! Coordinates follow image convention throughout the crate: `x` is the
//! column, `y` the row, origin at the top-left pixel.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::scalar::Scalar;

/// Per-pixel segmentation class. The numeric codes are part of the mask file
/// and wire formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[repr(u8)]
pub enum ClassId {
    #[default]
    Background = 0,
    EgoLane = 1,
    OtherLanes = 2,
}

impl ClassId {
    pub const ALL: [ClassId; 3] = [ClassId::Background, ClassId::EgoLane, ClassId::OtherLanes];

    #[inline]
    pub fn code(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassId::Background => "background",
            ClassId::EgoLane => "ego_lane",
            ClassId::OtherLanes => "other_lanes",
        }
    }
}

impl TryFrom<u8> for ClassId {
    type Error = u8;

    fn try_from(code: u8) -> Result<Self, u8> {
        match code {
            0 => Ok(ClassId::Background),
            1 => Ok(ClassId::EgoLane),
            2 => Ok(ClassId::OtherLanes),
            other => Err(other),
        }
    }
}

/// Image-level street type. `Unknown` marks a mask that arrived without a
/// classifier output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum RoadClass {
    Residential = 0,
    Highway = 1,
    CityStreet = 2,
    Others = 3,
    #[default]
    Unknown = 255,
}

impl RoadClass {
    pub const ALL: [RoadClass; 5] = [
        RoadClass::Residential,
        RoadClass::Highway,
        RoadClass::CityStreet,
        RoadClass::Others,
        RoadClass::Unknown,
    ];

    #[inline]
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            RoadClass::Residential => "residential",
            RoadClass::Highway => "highway",
            RoadClass::CityStreet => "city_street",
            RoadClass::Others => "others",
            RoadClass::Unknown => "unknown",
        }
    }
}

impl TryFrom<u8> for RoadClass {
    type Error = u8;

    fn try_from(code: u8) -> Result<Self, u8> {
        match code {
            0 => Ok(RoadClass::Residential),
            1 => Ok(RoadClass::Highway),
            2 => Ok(RoadClass::CityStreet),
            3 => Ok(RoadClass::Others),
            255 => Ok(RoadClass::Unknown),
            other => Err(other),
        }
    }
}

impl fmt::Display for RoadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RoadClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RoadClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| invalid_arg(format!("unknown road class {s:?}")))
    }
}

/// Lateral position of a drivable region relative to the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lane {
    Ego,
    Left,
    Right,
}

impl Lane {
    pub const ALL: [Lane; 3] = [Lane::Ego, Lane::Left, Lane::Right];
}

/// 2-D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn scale(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    #[inline]
    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub fn dist2(self, o: Self) -> T {
        let d = self.sub(o);
        d.x * d.x + d.y * d.y
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Dense row-major grid of [`ClassId`] values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    width: usize,
    height: usize,
    data: Vec<ClassId>,
}

impl SegmentationMask {
    pub fn new(width: usize, height: usize, data: Vec<ClassId>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid_arg(format!("mask dimensions must be positive, got {width}x{height}")));
        }
        let expected = width.checked_mul(height).ok_or_else(|| invalid_arg("mask dimensions overflow"))?;
        if data.len() != expected {
            return Err(invalid_arg(format!(
                "mask data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Builds a mask filled with one class.
    pub fn filled(width: usize, height: usize, class: ClassId) -> Result<Self> {
        Self::new(width, height, vec![class; width.saturating_mul(height)])
    }

    /// Decodes raw class codes; any byte outside `0..=2` is rejected.
    pub fn from_codes(width: usize, height: usize, codes: &[u8]) -> Result<Self> {
        let data = codes
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                ClassId::try_from(c)
                    .map_err(|bad| Error::InvalidInput(format!("pixel {i} has invalid class code {bad}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[ClassId] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> ClassId {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, class: ClassId) {
        self.data[y * self.width + x] = class;
    }

    pub fn codes(&self) -> Vec<u8> {
        self.data.iter().map(|c| c.code()).collect()
    }

    /// Pixel count per class, indexed by [`ClassId::index`].
    pub fn histogram(&self) -> [usize; 3] {
        let mut h = [0usize; 3];
        for c in &self.data {
            h[c.index()] += 1;
        }
        h
    }
}

/// Coordinates of every pixel equal to `class`, in row-major order.
pub fn extract_points<T: Scalar>(mask: &SegmentationMask, class: ClassId) -> Vec<Point<T>> {
    let w = mask.width;
    mask.data
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == class)
        .map(|(i, _)| Point::new(T::of((i % w) as f64), T::of((i / w) as f64)))
        .collect()
}

/// Stride (nearest) downsampling: output pixel `(i, j)` is input pixel
/// `(i·factor, j·factor)`.
pub fn downsample(mask: &SegmentationMask, factor: usize) -> Result<SegmentationMask> {
    if factor == 0 {
        return Err(invalid_arg("downsample factor must be at least 1"));
    }
    if factor == 1 {
        return Ok(mask.clone());
    }
    let ow = mask.width.div_ceil(factor);
    let oh = mask.height.div_ceil(factor);
    let mut data = Vec::with_capacity(ow * oh);
    for j in 0..oh {
        let row = &mask.data[j * factor * mask.width..];
        data.extend(row.iter().step_by(factor).take(ow));
    }
    SegmentationMask::new(ow, oh, data)
}
