//! Binary netpbm I/O: P5 class masks in, P5 masks and P6 overlays out.
//!
//! Mask pixels are raw [`ClassId`] codes. A header comment of the form
//! `# road_class=<name>` attaches the image-level road class.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{RoadClass, SegmentationMask};

const ROAD_CLASS_KEY: &str = "road_class=";

struct Header {
    width: usize,
    height: usize,
    maxval: usize,
    data_offset: usize,
    road_class: Option<RoadClass>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Image(msg.into())
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(bad(format!("expected {} magic", String::from_utf8_lossy(magic))));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    let mut road_class = None;
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
                    let comment = String::from_utf8_lossy(&bytes[pos + 1..end]);
                    if let Some(name) = comment.trim().strip_prefix(ROAD_CLASS_KEY) {
                        road_class = Some(name.trim().parse()?);
                    }
                    pos = end;
                }
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(bad("expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("header field out of range"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(bad("missing whitespace after maxval")),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(bad("zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(bad(format!("unsupported maxval {maxval}")));
    }
    Ok(Header { width, height, maxval, data_offset: pos, road_class })
}

/// Decodes a P5 class mask. Returns the mask and the road class carried in
/// the header comment, if any.
pub fn decode_mask(bytes: &[u8]) -> Result<(SegmentationMask, Option<RoadClass>)> {
    let h = parse_header(bytes, b"P5")?;
    let n = h.width.checked_mul(h.height).ok_or_else(|| bad("image too large"))?;
    let data = &bytes[h.data_offset..];
    if data.len() < n {
        return Err(bad(format!("truncated pixel data: {} of {n} bytes", data.len())));
    }
    if let Some(&v) = data[..n].iter().find(|&&v| usize::from(v) > h.maxval) {
        return Err(bad(format!("sample {v} exceeds maxval {}", h.maxval)));
    }
    let mask = SegmentationMask::from_codes(h.width, h.height, &data[..n]).map_err(|e| bad(e.to_string()))?;
    Ok((mask, h.road_class))
}

/// Encodes a mask as P5 with maxval 255.
pub fn encode_mask(mask: &SegmentationMask, road_class: Option<RoadClass>) -> Vec<u8> {
    let mut out = Vec::with_capacity(mask.width() * mask.height() + 64);
    out.extend_from_slice(b"P5\n");
    if let Some(rc) = road_class {
        out.extend_from_slice(format!("# {ROAD_CLASS_KEY}{rc}\n").as_bytes());
    }
    out.extend_from_slice(format!("{} {}\n255\n", mask.width(), mask.height()).as_bytes());
    out.extend(mask.data().iter().map(|c| c.code()));
    out
}

pub fn read_mask(path: &Path) -> Result<(SegmentationMask, Option<RoadClass>)> {
    decode_mask(&fs::read(path)?)
}

pub fn write_mask(path: &Path, mask: &SegmentationMask, road_class: Option<RoadClass>) -> Result<()> {
    fs::write(path, encode_mask(mask, road_class))?;
    Ok(())
}

/// Interleaved 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![[0; 3]; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn decode_ppm(bytes: &[u8]) -> Result<Self> {
        let h = parse_header(bytes, b"P6")?;
        if h.maxval != 255 {
            return Err(bad("only maxval 255 PPM is supported"));
        }
        let n = h.width * h.height;
        let data = &bytes[h.data_offset..];
        if data.len() < 3 * n {
            return Err(bad("truncated pixel data"));
        }
        let pixels = data[..3 * n].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Self { width: h.width, height: h.height, pixels })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SegmentationMask {
        SegmentationMask::from_codes(3, 2, &[0, 1, 2, 2, 1, 0]).unwrap()
    }

    #[test]
    fn mask_round_trip_with_road_class() {
        let m = sample();
        let bytes = encode_mask(&m, Some(RoadClass::Highway));
        let (back, rc) = decode_mask(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(rc, Some(RoadClass::Highway));
    }

    #[test]
    fn header_comments_and_whitespace() {
        let bytes = b"P5 # hello\n3\t2 # road_class=residential\n255\n\x00\x01\x02\x02\x01\x00";
        let (m, rc) = decode_mask(bytes).unwrap();
        assert_eq!(m, sample());
        assert_eq!(rc, Some(RoadClass::Residential));
    }

    #[test]
    fn rejects_truncated_and_invalid() {
        let bytes = encode_mask(&sample(), None);
        assert!(decode_mask(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_mask(b"P6\n1 1\n255\n\x00").is_err());
        assert!(decode_mask(b"P5\n1 1\n255\n\x03").is_err());
        assert!(decode_mask(b"P5\n1 1\n1\n\x02").is_err());
        assert!(decode_mask(b"P5\n0 1\n255\n").is_err());
        assert!(decode_mask(b"P5\n1").is_err());
    }

    #[test]
    fn ppm_round_trip() {
        let mut img = RgbImage::new(2, 2);
        img.pixels[3] = [1, 2, 3];
        let back = RgbImage::decode_ppm(&img.encode_ppm()).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.get(1, 1), [1, 2, 3]);
    }
}
