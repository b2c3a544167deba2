//! Binary frame codec shared by the pipeline stages when they run as
//! separate processes.
//!
//! All integers are big-endian.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "LDLS"
//! 4       1     version (1)
//! 5       1     msg_type (1 = mask, 2 = regions, 3 = error)
//! 6       4     frame_id (u32)
//! 10      4     payload_len (u32)
//! 14      n     payload
//!
//! mask payload:    width u16 | height u16 | road_class u8 | width·height class bytes
//! regions payload: UTF-8 region document
//! error payload:   code u8 | UTF-8 message
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::types::{RoadClass, SegmentationMask};

pub const MAGIC: [u8; 4] = *b"LDLS";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;
/// Streams refuse payloads above this size instead of allocating them.
pub const MAX_PAYLOAD: u32 = 64 << 20;

pub const TYPE_MASK: u8 = 1;
pub const TYPE_REGIONS: u8 = 2;
pub const TYPE_ERROR: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    BadType(u8),
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("length mismatch: declared {declared} bytes, found {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
}

impl DecodeError {
    /// Code carried in error frames.
    pub fn code(&self) -> u8 {
        match self {
            DecodeError::BadMagic(_) => 1,
            DecodeError::BadVersion(_) => 2,
            DecodeError::BadType(_) => 3,
            DecodeError::Truncated { .. } => 4,
            DecodeError::LengthMismatch { .. } => 5,
            DecodeError::InvalidPayload(_) => 6,
        }
    }
}

/// Mask payload whose byte length is guaranteed to match its dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskPayload {
    width: u16,
    height: u16,
    road_class: RoadClass,
    mask: Vec<u8>,
}

impl MaskPayload {
    pub fn new(width: u16, height: u16, road_class: RoadClass, mask: Vec<u8>) -> Result<Self, DecodeError> {
        if width == 0 || height == 0 {
            return Err(DecodeError::InvalidPayload("zero mask dimension".into()));
        }
        let expected = usize::from(width) * usize::from(height);
        if mask.len() != expected {
            return Err(DecodeError::LengthMismatch { declared: expected, actual: mask.len() });
        }
        if let Some(b) = mask.iter().find(|&&b| b > 2) {
            return Err(DecodeError::InvalidPayload(format!("class code {b}")));
        }
        Ok(Self { width, height, road_class, mask })
    }

    pub fn from_mask(mask: &SegmentationMask, road_class: RoadClass) -> Result<Self, DecodeError> {
        let w = u16::try_from(mask.width()).map_err(|_| DecodeError::InvalidPayload("width exceeds u16".into()))?;
        let h = u16::try_from(mask.height()).map_err(|_| DecodeError::InvalidPayload("height exceeds u16".into()))?;
        Self::new(w, h, road_class, mask.codes())
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn road_class(&self) -> RoadClass {
        self.road_class
    }

    pub fn bytes(&self) -> &[u8] {
        &self.mask
    }

    pub fn to_mask(&self) -> SegmentationMask {
        SegmentationMask::from_codes(self.width.into(), self.height.into(), &self.mask)
            .expect("payload validated on construction")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Mask(MaskPayload),
    /// UTF-8 region document.
    Regions(String),
    Error { code: u8, message: String },
}

impl Payload {
    fn msg_type(&self) -> u8 {
        match self {
            Payload::Mask(_) => TYPE_MASK,
            Payload::Regions(_) => TYPE_REGIONS,
            Payload::Error { .. } => TYPE_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameMessage {
    pub frame_id: u32,
    pub payload: Payload,
}

pub fn encode_frame(msg: &FrameMessage) -> Vec<u8> {
    let mut body = Vec::new();
    match &msg.payload {
        Payload::Mask(m) => {
            body.reserve(5 + m.mask.len());
            body.extend_from_slice(&m.width.to_be_bytes());
            body.extend_from_slice(&m.height.to_be_bytes());
            body.push(m.road_class.code());
            body.extend_from_slice(&m.mask);
        }
        Payload::Regions(doc) => body.extend_from_slice(doc.as_bytes()),
        Payload::Error { code, message } => {
            body.push(*code);
            body.extend_from_slice(message.as_bytes());
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg.payload.msg_type());
    out.extend_from_slice(&msg.frame_id.to_be_bytes());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

struct Header {
    msg_type: u8,
    frame_id: u32,
    payload_len: usize,
}

fn parse_header(h: &[u8; HEADER_LEN]) -> Result<Header, DecodeError> {
    let magic: [u8; 4] = h[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(DecodeError::BadMagic(magic));
    }
    if h[4] != VERSION {
        return Err(DecodeError::BadVersion(h[4]));
    }
    if !(TYPE_MASK..=TYPE_ERROR).contains(&h[5]) {
        return Err(DecodeError::BadType(h[5]));
    }
    Ok(Header {
        msg_type: h[5],
        frame_id: u32::from_be_bytes(h[6..10].try_into().unwrap()),
        payload_len: u32::from_be_bytes(h[10..14].try_into().unwrap()) as usize,
    })
}

fn utf8(bytes: Vec<u8>) -> Result<String, DecodeError> {
    String::from_utf8(bytes).map_err(|_| DecodeError::InvalidPayload("payload is not UTF-8".into()))
}

fn parse_payload(msg_type: u8, body: Vec<u8>) -> Result<Payload, DecodeError> {
    match msg_type {
        TYPE_MASK => {
            if body.len() < 5 {
                return Err(DecodeError::LengthMismatch { declared: 5, actual: body.len() });
            }
            let width = u16::from_be_bytes([body[0], body[1]]);
            let height = u16::from_be_bytes([body[2], body[3]]);
            let road_class = RoadClass::try_from(body[4])
                .map_err(|c| DecodeError::InvalidPayload(format!("road class code {c}")))?;
            let pixels = body[5..].to_vec();
            Ok(Payload::Mask(MaskPayload::new(width, height, road_class, pixels)?))
        }
        TYPE_REGIONS => Ok(Payload::Regions(utf8(body)?)),
        TYPE_ERROR => {
            let Some((&code, rest)) = body.split_first() else {
                return Err(DecodeError::LengthMismatch { declared: 1, actual: 0 });
            };
            Ok(Payload::Error { code, message: utf8(rest.to_vec())? })
        }
        other => Err(DecodeError::BadType(other)),
    }
}

/// Decodes exactly one frame; trailing bytes are a length mismatch.
pub fn decode_frame(bytes: &[u8]) -> Result<FrameMessage, DecodeError> {
    let Some(head) = bytes.first_chunk::<HEADER_LEN>() else {
        return Err(DecodeError::Truncated { needed: HEADER_LEN, available: bytes.len() });
    };
    let h = parse_header(head)?;
    let rest = &bytes[HEADER_LEN..];
    if rest.len() < h.payload_len {
        return Err(DecodeError::Truncated { needed: HEADER_LEN + h.payload_len, available: bytes.len() });
    }
    if rest.len() > h.payload_len {
        return Err(DecodeError::LengthMismatch { declared: h.payload_len, actual: rest.len() });
    }
    Ok(FrameMessage { frame_id: h.frame_id, payload: parse_payload(h.msg_type, rest.to_vec())? })
}

/// Outcome of reading one frame from a byte stream.
#[derive(Debug)]
pub enum ReadOutcome {
    Frame(FrameMessage),
    /// Stream ended cleanly on a frame boundary.
    Eof,
    Malformed(DecodeError),
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

pub fn read_frame(r: &mut impl Read) -> io::Result<ReadOutcome> {
    let mut head = [0u8; HEADER_LEN];
    let got = read_full(r, &mut head)?;
    if got == 0 {
        return Ok(ReadOutcome::Eof);
    }
    if got < HEADER_LEN {
        return Ok(ReadOutcome::Malformed(DecodeError::Truncated { needed: HEADER_LEN, available: got }));
    }
    let h = match parse_header(&head) {
        Ok(h) => h,
        Err(e) => return Ok(ReadOutcome::Malformed(e)),
    };
    if h.payload_len > MAX_PAYLOAD as usize {
        return Ok(ReadOutcome::Malformed(DecodeError::InvalidPayload(format!(
            "payload of {} bytes exceeds limit",
            h.payload_len
        ))));
    }
    let mut body = vec![0u8; h.payload_len];
    let got = read_full(r, &mut body)?;
    if got < h.payload_len {
        return Ok(ReadOutcome::Malformed(DecodeError::Truncated {
            needed: HEADER_LEN + h.payload_len,
            available: HEADER_LEN + got,
        }));
    }
    Ok(match parse_payload(h.msg_type, body) {
        Ok(payload) => ReadOutcome::Frame(FrameMessage { frame_id: h.frame_id, payload }),
        Err(e) => ReadOutcome::Malformed(e),
    })
}

pub fn write_frame(w: &mut impl Write, msg: &FrameMessage) -> io::Result<()> {
    w.write_all(&encode_frame(msg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_frame() -> FrameMessage {
        let payload = MaskPayload::new(2, 2, RoadClass::Highway, vec![0; 4]).unwrap();
        FrameMessage { frame_id: 7, payload: Payload::Mask(payload) }
    }

    #[test]
    fn hand_assembled_mask_frame() {
        let expected = concat!(
            "4c444c53", // LDLS
            "01",       // version
            "01",       // mask
            "00000007", // frame id
            "00000009", // payload length
            "0002", "0002", "01", "00000000"
        );
        let hex: String = encode_frame(&mask_frame()).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, expected);
        assert_eq!(hex.len() / 2, 23);
    }

    #[test]
    fn malformed_classes() {
        let good = encode_frame(&mask_frame());
        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(decode_frame(&b), Err(DecodeError::BadMagic(_))));
        let mut b = good.clone();
        b[4] = 2;
        assert_eq!(decode_frame(&b), Err(DecodeError::BadVersion(2)));
        let mut b = good.clone();
        b[5] = 9;
        assert_eq!(decode_frame(&b), Err(DecodeError::BadType(9)));
        assert!(matches!(decode_frame(&good[..good.len() - 1]), Err(DecodeError::Truncated { .. })));
        assert!(matches!(decode_frame(&good[..10]), Err(DecodeError::Truncated { .. })));
        let mut b = good.clone();
        b.push(0);
        assert!(matches!(decode_frame(&b), Err(DecodeError::LengthMismatch { .. })));
        // payload length agrees with the header but not with width × height
        let mut b = good.clone();
        b[13] = 8;
        b.pop();
        assert!(matches!(decode_frame(&b), Err(DecodeError::LengthMismatch { .. })));
        let mut b = good.clone();
        b[HEADER_LEN + 5] = 7;
        assert!(matches!(decode_frame(&b), Err(DecodeError::InvalidPayload(_))));
    }

    #[test]
    fn payload_len_beyond_buffer_is_truncation() {
        let mut b = encode_frame(&mask_frame());
        b[13] = 200;
        assert!(matches!(decode_frame(&b), Err(DecodeError::Truncated { .. })));
    }

    #[test]
    fn stream_reader() {
        let mut bytes = encode_frame(&mask_frame());
        let regions = FrameMessage { frame_id: 8, payload: Payload::Regions("{}".into()) };
        bytes.extend(encode_frame(&regions));
        bytes.extend_from_slice(&encode_frame(&regions)[..5]);
        let mut cur = io::Cursor::new(bytes);
        assert!(matches!(read_frame(&mut cur).unwrap(), ReadOutcome::Frame(f) if f == mask_frame()));
        assert!(matches!(read_frame(&mut cur).unwrap(), ReadOutcome::Frame(f) if f == regions));
        assert!(matches!(read_frame(&mut cur).unwrap(), ReadOutcome::Malformed(DecodeError::Truncated { .. })));
        assert!(matches!(read_frame(&mut cur).unwrap(), ReadOutcome::Eof));
    }

    fn arb_frame() -> impl Strategy<Value = FrameMessage> {
        let mask = (1u16..24, 1u16..24, 0usize..5, any::<u64>()).prop_map(|(w, h, rc, seed)| {
            let n = usize::from(w) * usize::from(h);
            let bytes = (0..n).map(|i| ((seed >> (i % 61)) % 3) as u8).collect();
            Payload::Mask(MaskPayload::new(w, h, RoadClass::ALL[rc], bytes).unwrap())
        });
        let doc = ".{0,64}".prop_map(Payload::Regions);
        let err = (any::<u8>(), ".{0,16}").prop_map(|(code, message)| Payload::Error { code, message });
        (any::<u32>(), prop_oneof![mask, doc, err]).prop_map(|(frame_id, payload)| FrameMessage { frame_id, payload })
    }

    proptest! {
        #[test]
        fn round_trip(msg in arb_frame()) {
            let bytes = encode_frame(&msg);
            prop_assert_eq!(decode_frame(&bytes).unwrap(), msg.clone());
            let mut cur = io::Cursor::new(bytes);
            prop_assert!(matches!(read_frame(&mut cur).unwrap(), ReadOutcome::Frame(f) if f == msg));
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_frame(&bytes);
        }
    }
}
