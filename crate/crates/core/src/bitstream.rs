//! Bit-level I/O and the container format.
//!
//! Bits are packed most-significant first. Multi-byte integers are little
//! endian. The stream is a fixed-size header followed by byte-aligned,
//! length-prefixed segments, one per (GOP, component).

use thiserror::Error;

use crate::tree::TreeKind;
use crate::wavelet::{DecompositionSpec, FilterId, Normalization};

pub const MAGIC: [u8; 4] = *b"EWSP";
pub const VERSION: u16 = 1;
/// Serialized header size in bytes.
pub const HEADER_LEN: usize = 39;
/// Serialized segment prefix size in bytes (before the payload).
pub const SEGMENT_PREFIX_LEN: usize = 11;

const FLAG_EMPTY: u8 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitstreamError {
    #[error("read past end of stream")]
    EndOfStream,
    #[error("corrupt stream: {0}")]
    CorruptStream(String),
}

#[derive(Debug, Clone, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn put_bit(&mut self, bit: bool) {
        let offset = (self.bit_len & 7) as u32;
        if offset == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> offset;
        }
        self.bit_len += 1;
    }

    /// Writes the low `n` bits of `value`, most significant first.
    pub fn put_bits(&mut self, value: u64, n: u32) {
        assert!(n <= 64);
        for k in (0..n).rev() {
            self.put_bit((value >> k) & 1 == 1);
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: u64,
    limit: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self::with_limit(data, data.len() as u64 * 8)
    }

    /// Reader that stops after `limit` bits even if more bytes are present.
    pub fn with_limit(data: &'a [u8], limit: u64) -> Self {
        BitReader {
            data,
            pos: 0,
            limit: limit.min(data.len() as u64 * 8),
        }
    }

    #[inline]
    pub fn get_bit(&mut self) -> Result<bool, BitstreamError> {
        if self.pos >= self.limit {
            return Err(BitstreamError::EndOfStream);
        }
        let byte = self.data[(self.pos >> 3) as usize];
        let bit = byte & (0x80 >> (self.pos & 7)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn get_bits(&mut self, n: u32) -> Result<u64, BitstreamError> {
        assert!(n <= 64);
        if self.remaining() < n as u64 {
            return Err(BitstreamError::EndOfStream);
        }
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.get_bit()? as u64;
        }
        Ok(v)
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.pos
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChromaFormat {
    Mono,
    Yuv420,
}

impl ChromaFormat {
    pub fn components(self) -> usize {
        match self {
            ChromaFormat::Mono => 1,
            ChromaFormat::Yuv420 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub width: u32,
    pub height: u32,
    pub frames: u32,
    pub chroma: ChromaFormat,
    pub gop_length: u16,
    pub temporal_levels: u8,
    pub spatial_levels: u8,
    pub temporal_filter: FilterId,
    pub spatial_filter: FilterId,
    pub normalization: Normalization,
    pub tree: TreeKind,
    pub weighted: bool,
    pub termination_exponent: i8,
    /// Frames appended to complete the last GOP.
    pub pad_frames: u16,
    pub fps: u16,
    /// Relative share of each GOP's bit budget given to Y, U and V.
    pub rate_split: [u16; 3],
}

impl StreamHeader {
    /// Decomposition of one component plane whose padded size is `width` x `height`.
    pub fn decomposition(&self, width: usize, height: usize) -> DecompositionSpec {
        DecompositionSpec {
            gop_length: self.gop_length as usize,
            width,
            height,
            temporal_levels: self.temporal_levels as u32,
            spatial_levels: self.spatial_levels as u32,
            temporal_filter: self.temporal_filter,
            spatial_filter: self.spatial_filter,
            normalization: self.normalization,
        }
    }

    pub fn gop_count(&self) -> usize {
        (self.frames as usize + self.pad_frames as usize) / self.gop_length.max(1) as usize
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.frames.to_le_bytes());
        out.push(match self.chroma {
            ChromaFormat::Mono => 0,
            ChromaFormat::Yuv420 => 1,
        });
        out.extend_from_slice(&self.gop_length.to_le_bytes());
        out.push(self.temporal_levels);
        out.push(self.spatial_levels);
        out.push(self.temporal_filter.code());
        out.push(self.spatial_filter.code());
        out.push(self.normalization.code());
        out.push(self.tree.code());
        out.push(self.weighted as u8);
        out.push(self.termination_exponent as u8);
        out.extend_from_slice(&self.pad_frames.to_le_bytes());
        out.extend_from_slice(&self.fps.to_le_bytes());
        for share in self.rate_split {
            out.extend_from_slice(&share.to_le_bytes());
        }
        debug_assert_eq!(out.len(), HEADER_LEN);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BitstreamError> {
        if bytes.len() < HEADER_LEN {
            return Err(BitstreamError::CorruptStream(format!(
                "header needs {HEADER_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        if bytes[..4] != MAGIC {
            return Err(BitstreamError::CorruptStream("bad magic".into()));
        }
        let mut cur = Cursor { bytes, pos: 4 };
        let version = cur.u16();
        if version != VERSION {
            return Err(BitstreamError::CorruptStream(format!("unsupported version {version}")));
        }
        let bad = |what: &str| BitstreamError::CorruptStream(format!("unknown {what}"));
        let width = cur.u32();
        let height = cur.u32();
        let frames = cur.u32();
        let chroma = match cur.u8() {
            0 => ChromaFormat::Mono,
            1 => ChromaFormat::Yuv420,
            _ => return Err(bad("chroma format")),
        };
        let gop_length = cur.u16();
        let temporal_levels = cur.u8();
        let spatial_levels = cur.u8();
        let temporal_filter = FilterId::from_code(cur.u8()).ok_or_else(|| bad("temporal filter"))?;
        let spatial_filter = FilterId::from_code(cur.u8()).ok_or_else(|| bad("spatial filter"))?;
        let normalization = Normalization::from_code(cur.u8()).ok_or_else(|| bad("normalization"))?;
        let tree = TreeKind::from_code(cur.u8()).ok_or_else(|| bad("tree"))?;
        let weighted = match cur.u8() {
            0 => false,
            1 => true,
            _ => return Err(bad("weighting flag")),
        };
        let termination_exponent = cur.u8() as i8;
        let pad_frames = cur.u16();
        let fps = cur.u16();
        let rate_split = [cur.u16(), cur.u16(), cur.u16()];
        let header = StreamHeader {
            width,
            height,
            frames,
            chroma,
            gop_length,
            temporal_levels,
            spatial_levels,
            temporal_filter,
            spatial_filter,
            normalization,
            tree,
            weighted,
            termination_exponent,
            pad_frames,
            fps,
            rate_split,
        };
        if width == 0
            || height == 0
            || gop_length == 0
            || (frames as usize + pad_frames as usize) % gop_length as usize != 0
        {
            return Err(BitstreamError::CorruptStream("inconsistent geometry".into()));
        }
        Ok(header)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.bytes[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        out
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
}

/// One component of one GOP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GopSegment {
    pub component: u8,
    pub gop: u32,
    /// Initial threshold exponent; `None` marks an empty GOP.
    pub exponent: Option<i8>,
    pub payload_bits: u64,
    pub payload: Vec<u8>,
}

impl GopSegment {
    pub fn empty(component: u8, gop: u32) -> Self {
        GopSegment {
            component,
            gop,
            exponent: None,
            payload_bits: 0,
            payload: Vec::new(),
        }
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        assert!(self.payload_bits <= u32::MAX as u64);
        out.push(self.component);
        out.extend_from_slice(&self.gop.to_le_bytes());
        out.push(if self.exponent.is_none() { FLAG_EMPTY } else { 0 });
        out.push(self.exponent.unwrap_or(0) as u8);
        out.extend_from_slice(&(self.payload_bits as u32).to_le_bytes());
        let n = self.payload_bits.div_ceil(8) as usize;
        out.extend_from_slice(&self.payload[..n]);
    }
}

/// Result of reading one segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentRead {
    pub segment: GopSegment,
    /// Byte offset just past this segment.
    pub next: usize,
    /// True when the stream ended inside the payload; `payload_bits` then
    /// counts only the bits present.
    pub truncated: bool,
}

/// Reads the segment starting at byte `offset`. Returns `Ok(None)` when the
/// stream ends before a complete segment prefix.
pub fn read_segment(bytes: &[u8], offset: usize) -> Result<Option<SegmentRead>, BitstreamError> {
    if offset + SEGMENT_PREFIX_LEN > bytes.len() {
        return Ok(None);
    }
    let mut cur = Cursor { bytes, pos: offset };
    let component = cur.u8();
    let gop = cur.u32();
    let flags = cur.u8();
    let exponent = cur.u8() as i8;
    let declared = cur.u32() as u64;
    if flags & !FLAG_EMPTY != 0 {
        return Err(BitstreamError::CorruptStream(format!(
            "unknown segment flags {flags:#x}"
        )));
    }
    let empty = flags & FLAG_EMPTY != 0;
    if empty && declared != 0 {
        return Err(BitstreamError::CorruptStream("empty segment with payload".into()));
    }
    let start = cur.pos;
    let want = declared.div_ceil(8) as usize;
    let have = want.min(bytes.len() - start);
    let truncated = have < want;
    let payload_bits = if truncated { have as u64 * 8 } else { declared };
    Ok(Some(SegmentRead {
        segment: GopSegment {
            component,
            gop,
            exponent: (!empty).then_some(exponent),
            payload_bits,
            payload: bytes[start..start + have].to_vec(),
        },
        next: start + have,
        truncated,
    }))
}
