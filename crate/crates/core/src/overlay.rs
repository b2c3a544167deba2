//! Region overlay rendering. Outside every region the raster is a grayscale
//! rendering of the mask; regions are painted ego blue, left green, right
//! red, unassigned yellow.

use crate::pnm::RgbImage;
use crate::regions::RegionSet;
use crate::types::{ClassId, Lane, SegmentationMask};

pub const EGO_COLOR: [u8; 3] = [0, 0, 255];
pub const LEFT_COLOR: [u8; 3] = [0, 255, 0];
pub const RIGHT_COLOR: [u8; 3] = [255, 0, 0];
pub const UNASSIGNED_COLOR: [u8; 3] = [255, 255, 0];

pub fn class_gray(c: ClassId) -> [u8; 3] {
    let v = match c {
        ClassId::Background => 0,
        ClassId::EgoLane => 170,
        ClassId::OtherLanes => 85,
    };
    [v; 3]
}

pub fn render_overlay(mask: &SegmentationMask, regions: &RegionSet<f64>) -> RgbImage {
    let (w, h) = (mask.width(), mask.height());
    let mut img = RgbImage::new(w, h);
    for (px, &c) in img.pixels.iter_mut().zip(mask.data()) {
        *px = class_gray(c);
    }
    for r in regions.iter() {
        let color = match r.lane {
            Some(Lane::Ego) => EGO_COLOR,
            Some(Lane::Left) => LEFT_COLOR,
            Some(Lane::Right) => RIGHT_COLOR,
            None => UNASSIGNED_COLOR,
        };
        for (px, inside) in img.pixels.iter_mut().zip(r.pieces.rasterize(w, h)) {
            if inside {
                *px = color;
            }
        }
    }
    img
}
