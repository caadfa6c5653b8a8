//! Whole-clip encoding and decoding.
//!
//! Each (GOP, component) pair is coded independently: level shift by 128,
//! edge-replicate to a multiple of `2^(S+1)`, transform, weight, code. The
//! last GOP is completed by repeating the final frame.

use rayon::prelude::*;
use thiserror::Error;

use crate::bitstream::{
    read_segment, BitstreamError, ChromaFormat, GopSegment, StreamHeader, HEADER_LEN, SEGMENT_PREFIX_LEN,
};
use crate::coder::{decode_gop, encode_gop, CoderError, DEFAULT_TERMINATION_EXPONENT};
use crate::tree::{TreeKind, TreeTopology};
use crate::videoio::{to_sample, VideoClip, VideoError};
use crate::wavelet::{forward_gop, inverse_gop, CoeffVolume, DecompositionSpec, FilterId, Normalization, WaveletError};
use crate::weighting::{apply_weights, build_weight_table, remove_weights, WeightError, WeightTable};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Coder(#[from] CoderError),
    #[error(transparent)]
    Bitstream(#[from] BitstreamError),
    #[error(transparent)]
    Video(#[from] VideoError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecParams {
    pub gop_length: usize,
    pub temporal_levels: u32,
    pub spatial_levels: u32,
    pub temporal_filter: FilterId,
    pub spatial_filter: FilterId,
    pub normalization: Normalization,
    pub tree: TreeKind,
    pub weighted: bool,
    pub termination_exponent: i32,
    pub fps: u16,
    /// Target rate in kbit/s; `None` codes every pass down to the termination threshold.
    pub bitrate_kbps: Option<f64>,
    /// Y:U:V shares of each GOP's budget; `None` splits by sample count.
    pub rate_split: Option<[u16; 3]>,
}

impl Default for CodecParams {
    fn default() -> Self {
        CodecParams {
            gop_length: 16,
            temporal_levels: 4,
            spatial_levels: 3,
            temporal_filter: FilterId::LeGall53,
            spatial_filter: FilterId::Cdf97,
            normalization: Normalization::Standard,
            tree: TreeKind::Ewspb,
            weighted: true,
            termination_exponent: DEFAULT_TERMINATION_EXPONENT,
            fps: 30,
            bitrate_kbps: None,
            rate_split: None,
        }
    }
}

/// Smallest multiple of `2^(levels+1)` not below `n`.
pub fn padded_len(n: usize, spatial_levels: u32) -> usize {
    let m = 1usize << (spatial_levels + 1);
    n.div_ceil(m) * m
}

fn auto_split(width: usize, height: usize) -> [u16; 3] {
    let luma = width * height;
    let (cw, ch) = VideoClip::chroma_size(width, height);
    let chroma = cw * ch;
    let g = gcd(luma, chroma);
    let (a, b) = (luma / g, chroma / g);
    if a <= u16::MAX as usize {
        [a as u16, b as u16, b as u16]
    } else {
        let total = (luma + 2 * chroma) as f64;
        let c = (1000.0 * chroma as f64 / total).round() as u16;
        [1000 - 2 * c, c, c]
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Payload bit budget of one component segment of one GOP.
pub fn segment_budget(header: &StreamHeader, bitrate_kbps: f64, component: usize) -> u64 {
    let total = bitrate_kbps.max(0.0) * 1000.0 * header.gop_length as f64 / header.fps.max(1) as f64;
    let components = header.chroma.components();
    let usable = (total - (components * SEGMENT_PREFIX_LEN * 8) as f64).max(0.0);
    let split = &header.rate_split[..components];
    let sum: f64 = split.iter().map(|&s| s as f64).sum();
    if sum == 0.0 {
        return 0;
    }
    (usable * split[component] as f64 / sum).floor() as u64
}

/// Everything needed to (de)code one component plane of any GOP.
#[derive(Debug, Clone)]
pub struct PlaneCoder {
    pub width: usize,
    pub height: usize,
    pub spec: DecompositionSpec,
    pub topology: TreeTopology,
    pub weights: Option<WeightTable>,
}

impl PlaneCoder {
    pub fn new(header: &StreamHeader, width: usize, height: usize) -> Result<Self, CodecError> {
        let s = header.spatial_levels as u32;
        let spec = header.decomposition(padded_len(width, s), padded_len(height, s));
        Self::build(spec, header.tree, header.weighted, width, height)
    }

    /// Plane coder for a `width` x `height` plane under `params`.
    pub fn from_params(params: &CodecParams, width: usize, height: usize) -> Result<Self, CodecError> {
        let s = params.spatial_levels;
        let spec = DecompositionSpec {
            gop_length: params.gop_length,
            width: padded_len(width, s),
            height: padded_len(height, s),
            temporal_levels: params.temporal_levels,
            spatial_levels: s,
            temporal_filter: params.temporal_filter,
            spatial_filter: params.spatial_filter,
            normalization: params.normalization,
        };
        Self::build(spec, params.tree, params.weighted, width, height)
    }

    fn build(
        spec: DecompositionSpec,
        tree: TreeKind,
        weighted: bool,
        width: usize,
        height: usize,
    ) -> Result<Self, CodecError> {
        if width == 0 || height == 0 {
            return Err(CodecError::InvalidParams("empty plane".into()));
        }
        spec.validate()?;
        let topology = TreeTopology::new(tree, spec)?;
        let weights = if weighted {
            Some(build_weight_table(&spec)?)
        } else {
            None
        };
        Ok(PlaneCoder {
            width,
            height,
            spec,
            topology,
            weights,
        })
    }

    /// Level-shifted, padded samples of one GOP of a component.
    pub fn gop_samples(&self, clip: &VideoClip, component: usize, first_frame: usize) -> Vec<f64> {
        let (pw, ph) = (self.spec.width, self.spec.height);
        let mut out = Vec::with_capacity(self.spec.volume_len());
        for k in 0..self.spec.gop_length {
            let f = (first_frame + k).min(clip.frame_count() - 1);
            let plane = clip.plane(f, component);
            for r in 0..ph {
                let row = &plane[r.min(self.height - 1) * self.width..][..self.width];
                out.extend((0..pw).map(|c| row[c.min(self.width - 1)] as f64 - 128.0));
            }
        }
        out
    }

    /// Weighted transform coefficients of one GOP.
    pub fn analyze(&self, samples: &[f64]) -> Result<CoeffVolume, CodecError> {
        let coeffs = forward_gop(samples, &self.spec)?;
        Ok(match &self.weights {
            Some(table) => apply_weights(&coeffs, table)?,
            None => coeffs,
        })
    }

    /// Reconstructed 8-bit planes, one per GOP frame, from weighted coefficients.
    pub fn synthesize(&self, weighted: &CoeffVolume) -> Result<Vec<Vec<u8>>, CodecError> {
        let coeffs = match &self.weights {
            Some(table) => remove_weights(weighted, table)?,
            None => weighted.clone(),
        };
        let samples = inverse_gop(&coeffs)?;
        let pw = self.spec.width;
        Ok(samples
            .chunks_exact(self.spec.frame_len())
            .map(|frame| {
                (0..self.height)
                    .flat_map(|r| frame[r * pw..][..self.width].iter().map(|&x| to_sample(x + 128.0)))
                    .collect()
            })
            .collect())
    }
}

fn header_for(clip: &VideoClip, p: &CodecParams) -> Result<StreamHeader, CodecError> {
    let bad = |m: String| CodecError::InvalidParams(m);
    if clip.frame_count() == 0 {
        return Err(bad("clip has no frames".into()));
    }
    if p.gop_length == 0 || !p.gop_length.is_power_of_two() || p.gop_length > u16::MAX as usize {
        return Err(bad(format!("GOP length {} is not a power of two", p.gop_length)));
    }
    if p.temporal_levels > 16 || p.spatial_levels > 16 {
        return Err(bad("too many decomposition levels".into()));
    }
    if !(i8::MIN as i32..=i8::MAX as i32).contains(&p.termination_exponent) {
        return Err(bad("termination exponent out of range".into()));
    }
    if p.fps == 0 {
        return Err(bad("frame rate must be positive".into()));
    }
    if let Some(rate) = p.bitrate_kbps {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(bad(format!("bitrate {rate}")));
        }
    }
    let frames = clip.frame_count();
    let pad = frames.div_ceil(p.gop_length) * p.gop_length - frames;
    let rate_split = p.rate_split.unwrap_or_else(|| auto_split(clip.width, clip.height));
    if rate_split.iter().all(|&s| s == 0) {
        return Err(bad("rate split is all zero".into()));
    }
    Ok(StreamHeader {
        width: u32::try_from(clip.width).map_err(|_| bad("width".into()))?,
        height: u32::try_from(clip.height).map_err(|_| bad("height".into()))?,
        frames: u32::try_from(frames).map_err(|_| bad("frame count".into()))?,
        chroma: ChromaFormat::Yuv420,
        gop_length: p.gop_length as u16,
        temporal_levels: p.temporal_levels as u8,
        spatial_levels: p.spatial_levels as u8,
        temporal_filter: p.temporal_filter,
        spatial_filter: p.spatial_filter,
        normalization: p.normalization,
        tree: p.tree,
        weighted: p.weighted,
        termination_exponent: p.termination_exponent as i8,
        pad_frames: u16::try_from(pad).map_err(|_| bad("padding".into()))?,
        fps: p.fps,
        rate_split,
    })
}

fn plane_coders(header: &StreamHeader) -> Result<Vec<PlaneCoder>, CodecError> {
    let (w, h) = (header.width as usize, header.height as usize);
    let (cw, ch) = VideoClip::chroma_size(w, h);
    let mut coders = vec![PlaneCoder::new(header, w, h)?];
    if header.chroma == ChromaFormat::Yuv420 {
        let chroma = PlaneCoder::new(header, cw, ch)?;
        coders.push(chroma.clone());
        coders.push(chroma);
    }
    Ok(coders)
}

/// Encodes a clip into a complete stream.
pub fn encode_clip(clip: &VideoClip, params: &CodecParams) -> Result<Vec<u8>, CodecError> {
    let header = header_for(clip, params)?;
    let coders = plane_coders(&header)?;
    let jobs: Vec<(usize, usize)> = (0..header.gop_count())
        .flat_map(|g| (0..coders.len()).map(move |c| (g, c)))
        .collect();
    let segments: Vec<GopSegment> = jobs
        .par_iter()
        .map(|&(g, c)| -> Result<GopSegment, CodecError> {
            let pc = &coders[c];
            let weighted = pc.analyze(&pc.gop_samples(clip, c, g * header.gop_length as usize))?;
            let budget = params.bitrate_kbps.map(|rate| segment_budget(&header, rate, c));
            let enc = encode_gop(&weighted, &pc.topology, budget, header.termination_exponent as i32)?;
            let exponent = enc
                .exponent
                .map(|n| i8::try_from(n).map_err(|_| CodecError::InvalidParams(format!("threshold exponent {n}"))))
                .transpose()?;
            Ok(GopSegment {
                component: c as u8,
                gop: g as u32,
                exponent,
                payload_bits: enc.bit_len,
                payload: enc.payload,
            })
        })
        .collect::<Result<_, _>>()?;
    let mut out = header.to_bytes();
    for s in &segments {
        s.write_to(&mut out);
    }
    Ok(out)
}

pub fn read_header(bytes: &[u8]) -> Result<StreamHeader, CodecError> {
    Ok(StreamHeader::from_bytes(bytes)?)
}

/// Decodes a stream, optionally limiting every segment to the budget of
/// `budget_kbps`. Missing or short segments decode from what is present.
pub fn decode_stream(bytes: &[u8], budget_kbps: Option<f64>) -> Result<VideoClip, CodecError> {
    let header = read_header(bytes)?;
    let coders = plane_coders(&header)?;
    let components = coders.len();
    let mut segments: Vec<Option<GopSegment>> = vec![None; header.gop_count() * components];
    let mut offset = HEADER_LEN;
    while let Some(read) = read_segment(bytes, offset)? {
        let s = read.segment;
        let slot = s.gop as usize * components + s.component as usize;
        if s.component as usize >= components || slot >= segments.len() || segments[slot].is_some() {
            return Err(BitstreamError::CorruptStream(format!("unexpected segment {}/{}", s.gop, s.component)).into());
        }
        segments[slot] = Some(s);
        offset = read.next;
        if read.truncated {
            break;
        }
    }
    let total = header.frames as usize + header.pad_frames as usize;
    let mut padded = VideoClip::filled(header.width as usize, header.height as usize, total, 128);
    let rendered: Vec<(usize, Vec<Vec<u8>>)> = segments
        .par_iter()
        .enumerate()
        .filter_map(|(slot, seg)| seg.as_ref().map(|s| (slot, s)))
        .map(|(slot, s)| -> Result<(usize, Vec<Vec<u8>>), CodecError> {
            let c = slot % components;
            let pc = &coders[c];
            let budget = budget_kbps.map(|rate| segment_budget(&header, rate, c));
            let vol = decode_gop(
                s.exponent.map(i32::from),
                &s.payload,
                s.payload_bits,
                &pc.topology,
                budget,
                header.termination_exponent as i32,
            );
            Ok((slot, pc.synthesize(&vol)?))
        })
        .collect::<Result<_, _>>()?;
    let gop = header.gop_length as usize;
    for (slot, planes) in rendered {
        let (g, c) = (slot / components, slot % components);
        for (k, plane) in planes.into_iter().enumerate() {
            *padded.plane_mut(g * gop + k, c) = plane;
        }
    }
    padded.frames.truncate(header.frames as usize);
    Ok(padded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::videoio::{component_psnr, synthetic_clip, SyntheticParams};

    fn small_params() -> CodecParams {
        CodecParams {
            gop_length: 8,
            temporal_levels: 3,
            spatial_levels: 2,
            ..CodecParams::default()
        }
    }

    #[test]
    fn padding_rule() {
        assert_eq!(padded_len(352, 3), 352);
        assert_eq!(padded_len(176, 3), 176);
        assert_eq!(padded_len(17, 2), 24);
        assert_eq!(auto_split(352, 288), [4, 1, 1]);
    }

    #[test]
    fn unlimited_round_trip_is_near_lossless() {
        let clip = synthetic_clip(&SyntheticParams::new(32, 16, 8, 2));
        let stream = encode_clip(&clip, &small_params()).unwrap();
        let out = decode_stream(&stream, None).unwrap();
        for f in 0..8 {
            for c in 0..3 {
                let (a, b) = (clip.plane(f, c), out.plane(f, c));
                assert!(a.iter().zip(b).all(|(&x, &y)| (x as i32 - y as i32).abs() <= 1));
            }
        }
    }

    #[test]
    fn odd_sizes_and_partial_gops() {
        let clip = synthetic_clip(&SyntheticParams::new(21, 13, 11, 4));
        let stream = encode_clip(&clip, &small_params()).unwrap();
        let header = read_header(&stream).unwrap();
        assert_eq!(header.pad_frames, 5);
        let out = decode_stream(&stream, None).unwrap();
        assert_eq!((out.width, out.height, out.frame_count()), (21, 13, 11));
        assert!(component_psnr(&clip, &out, 0).unwrap() > 45.0);
    }

    #[test]
    fn budget_prefix_decoding_matches_lower_rate_encode() {
        let clip = synthetic_clip(&SyntheticParams::new(32, 32, 8, 3));
        let hi = CodecParams {
            bitrate_kbps: Some(600.0),
            ..small_params()
        };
        let lo = CodecParams {
            bitrate_kbps: Some(150.0),
            ..small_params()
        };
        let a = decode_stream(&encode_clip(&clip, &hi).unwrap(), Some(150.0)).unwrap();
        let b = decode_stream(&encode_clip(&clip, &lo).unwrap(), None).unwrap();
        assert_eq!(a, b);
        let full = decode_stream(&encode_clip(&clip, &hi).unwrap(), None).unwrap();
        assert!(component_psnr(&clip, &full, 0).unwrap() > component_psnr(&clip, &a, 0).unwrap());
    }

    #[test]
    fn zero_budget_gives_neutral_gray() {
        let clip = synthetic_clip(&SyntheticParams::new(16, 16, 8, 5));
        let stream = encode_clip(
            &clip,
            &CodecParams {
                bitrate_kbps: Some(0.0),
                ..small_params()
            },
        )
        .unwrap();
        let out = decode_stream(&stream, None).unwrap();
        assert_eq!(out, VideoClip::filled(16, 16, 8, 128));
    }

    #[test]
    fn encoding_is_deterministic() {
        let clip = synthetic_clip(&SyntheticParams::new(32, 16, 8, 6));
        let p = CodecParams {
            bitrate_kbps: Some(300.0),
            ..small_params()
        };
        assert_eq!(encode_clip(&clip, &p).unwrap(), encode_clip(&clip, &p).unwrap());
    }

    #[test]
    fn truncated_streams_decode() {
        let clip = synthetic_clip(&SyntheticParams::new(16, 16, 16, 7));
        let stream = encode_clip(
            &clip,
            &CodecParams {
                bitrate_kbps: Some(400.0),
                ..small_params()
            },
        )
        .unwrap();
        for cut in [
            HEADER_LEN,
            HEADER_LEN + 3,
            HEADER_LEN + 40,
            stream.len() / 2,
            stream.len() - 1,
        ] {
            let out = decode_stream(&stream[..cut], None).unwrap();
            assert_eq!((out.width, out.height, out.frame_count()), (16, 16, 16));
        }
        assert!(decode_stream(&stream[..HEADER_LEN - 1], None).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        let clip = synthetic_clip(&SyntheticParams::new(16, 16, 4, 1));
        let p = CodecParams {
            gop_length: 6,
            ..small_params()
        };
        assert!(matches!(encode_clip(&clip, &p), Err(CodecError::InvalidParams(_))));
        let p = CodecParams {
            gop_length: 4,
            temporal_levels: 3,
            ..small_params()
        };
        assert!(encode_clip(&clip, &p).is_err());
    }
}
