//! Mask sources: PGM directories and the synthetic scene generator.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::pipeline::MaskFrame;
use crate::pnm::read_mask;
use crate::scenes::{generate, random_spec, RandomSceneParams, SceneOracle, SceneSpec};
use crate::types::{RoadClass, SegmentationMask};

/// Sorted `*.pgm` files of `dir`.
pub fn list_masks(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Frames from a directory of PGM masks in file-name order; the frame id is
/// the position in that order. A file that fails to decode yields an error
/// item and keeps its id slot.
pub fn dir_source(dir: &Path) -> Result<impl Iterator<Item = Result<MaskFrame>> + Send> {
    let paths = list_masks(dir)?;
    Ok(paths.into_iter().enumerate().map(|(i, path)| {
        let frame_id = u32::try_from(i).map_err(|_| invalid_arg("too many frames"))?;
        let (mask, rc) = read_mask(&path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        Ok(MaskFrame { frame_id, road_class: rc.unwrap_or_default(), mask })
    }))
}

/// Synthetic sequence description, written `count=N,seed=S,size=WxH`.
/// Omitted keys keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub count: u32,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
}

impl Default for GenSpec {
    fn default() -> Self {
        let p = RandomSceneParams::default();
        Self { count: 100, seed: 0, width: p.width, height: p.height }
    }
}

impl FromStr for GenSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = GenSpec::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| invalid_arg(format!("expected key=value, got {part:?}")))?;
            let num = |v: &str| v.parse::<u64>().map_err(|_| invalid_arg(format!("bad number {v:?} for {key}")));
            match key {
                "count" => spec.count = u32::try_from(num(value)?).map_err(|_| invalid_arg("count too large"))?,
                "seed" => spec.seed = num(value)?,
                "size" => {
                    let (w, h) = value.split_once('x').ok_or_else(|| invalid_arg(format!("size must be WxH, got {value:?}")))?;
                    spec.width = num(w)? as usize;
                    spec.height = num(h)? as usize;
                }
                other => return Err(invalid_arg(format!("unknown generator key {other:?}"))),
            }
        }
        if spec.width < 64 || spec.height < 48 {
            return Err(invalid_arg("generated scenes must be at least 64x48"));
        }
        Ok(spec)
    }
}

impl GenSpec {
    pub fn scene_params(&self) -> RandomSceneParams {
        RandomSceneParams { width: self.width, height: self.height, ..RandomSceneParams::default() }
    }

    /// Scene description of frame `index`.
    pub fn scene_spec(&self, index: u32) -> SceneSpec {
        random_spec(self.seed.wrapping_add(u64::from(index)), &self.scene_params())
    }

    pub fn scene(&self, index: u32) -> Result<(SegmentationMask, SceneOracle, RoadClass)> {
        let spec = self.scene_spec(index);
        let (mask, oracle) = generate(&spec)?;
        Ok((mask, oracle, spec.road_class))
    }
}

/// Frames rendered lazily from [`GenSpec`], so generation overlaps extraction.
pub fn gen_source(spec: GenSpec) -> impl Iterator<Item = Result<MaskFrame>> + Send {
    (0..spec.count).map(move |i| {
        let (mask, _, road_class) = spec.scene(i)?;
        Ok(MaskFrame { frame_id: i, road_class, mask })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pnm::write_mask;
    use crate::types::ClassId;

    #[test]
    fn parses_generator_spec() {
        let g: GenSpec = "count=10,seed=3,size=320x240".parse().unwrap();
        assert_eq!(g, GenSpec { count: 10, seed: 3, width: 320, height: 240 });
        assert_eq!("seed=5".parse::<GenSpec>().unwrap().count, 100);
        assert!("count=x".parse::<GenSpec>().is_err());
        assert!("size=640".parse::<GenSpec>().is_err());
        assert!("colour=red".parse::<GenSpec>().is_err());
    }

    #[test]
    fn gen_source_is_deterministic() {
        let g: GenSpec = "count=3,seed=11,size=160x120".parse().unwrap();
        let a: Vec<_> = gen_source(g).map(|f| f.unwrap()).collect();
        let b: Vec<_> = gen_source(g).map(|f| f.unwrap()).collect();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|f| f.frame_id).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn dir_source_orders_and_reports_bad_files() {
        let tmp = tempfile::tempdir().unwrap();
        let mask = SegmentationMask::filled(4, 3, ClassId::EgoLane).unwrap();
        write_mask(&tmp.path().join("b.pgm"), &mask, Some(RoadClass::Residential)).unwrap();
        write_mask(&tmp.path().join("a.pgm"), &mask, None).unwrap();
        fs::write(tmp.path().join("c.pgm"), b"P5\n4 3\n255\n\x00").unwrap();
        fs::write(tmp.path().join("notes.txt"), b"ignored").unwrap();
        let frames: Vec<_> = dir_source(tmp.path()).unwrap().collect();
        assert_eq!(frames.len(), 3);
        let a = frames[0].as_ref().unwrap();
        assert_eq!((a.frame_id, a.road_class), (0, RoadClass::Unknown));
        let b = frames[1].as_ref().unwrap();
        assert_eq!((b.frame_id, b.road_class), (1, RoadClass::Residential));
        assert!(frames[2].is_err());
    }
}
