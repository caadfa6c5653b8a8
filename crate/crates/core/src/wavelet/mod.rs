//! t+2D wavelet decomposition of a group of pictures.
//!
//! The temporal axis is decomposed first (recursively on the low band), then
//! every resulting frame gets a dyadic 2-D decomposition. Coefficients are kept
//! in Mallat layout: temporal bands ordered coarse to fine along the frame
//! axis, and within each frame the coarsest LL band in the top-left corner.

mod lifting;

use std::fmt;

use thiserror::Error;

pub use lifting::{forward_1d, inverse_1d, FilterBank, FilterId, LiftingStep, Normalization, Parity, CDF97_K};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveletError {
    #[error("signal length {0} must be even and at least 2")]
    InvalidLength(usize),
    #[error("low band has {low} samples but high band has {high}")]
    MismatchedBands { low: usize, high: usize },
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
}

/// Geometry and filters of a GOP decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DecompositionSpec {
    pub gop_length: usize,
    pub width: usize,
    pub height: usize,
    pub temporal_levels: u32,
    pub spatial_levels: u32,
    pub temporal_filter: FilterId,
    pub spatial_filter: FilterId,
    pub normalization: Normalization,
}

impl DecompositionSpec {
    /// 4-level 5/3 temporal and 3-level 9/7 spatial decomposition over
    /// 16-frame GOPs.
    pub fn default_for(width: usize, height: usize) -> Self {
        DecompositionSpec {
            gop_length: 16,
            width,
            height,
            temporal_levels: 4,
            spatial_levels: 3,
            temporal_filter: FilterId::LeGall53,
            spatial_filter: FilterId::Cdf97,
            normalization: Normalization::Standard,
        }
    }

    pub fn lazy(gop_length: usize, width: usize, height: usize, temporal_levels: u32, spatial_levels: u32) -> Self {
        DecompositionSpec {
            gop_length,
            width,
            height,
            temporal_levels,
            spatial_levels,
            temporal_filter: FilterId::Lazy,
            spatial_filter: FilterId::Lazy,
            normalization: Normalization::Standard,
        }
    }

    /// Checks the dyadic constraints. The coarsest LL band must have even
    /// sides so that it splits into whole 2x2 groups.
    pub fn validate(&self) -> Result<(), WaveletError> {
        let err = |msg: String| Err(WaveletError::InvalidDimensions(msg));
        if self.gop_length == 0 || !self.gop_length.is_power_of_two() {
            return err(format!("GOP length {} is not a power of two", self.gop_length));
        }
        if self.temporal_levels >= usize::BITS || self.gop_length >> self.temporal_levels == 0 {
            return err(format!(
                "GOP length {} too short for {} temporal levels",
                self.gop_length, self.temporal_levels
            ));
        }
        if self.spatial_levels >= 16 {
            return err(format!("{} spatial levels is unsupported", self.spatial_levels));
        }
        let unit = 1usize << (self.spatial_levels + 1);
        if self.width == 0 || self.height == 0 || self.width % unit != 0 || self.height % unit != 0 {
            return err(format!(
                "frame {}x{} is not a multiple of {unit} for {} spatial levels",
                self.width, self.height, self.spatial_levels
            ));
        }
        Ok(())
    }

    pub fn frame_len(&self) -> usize {
        self.width * self.height
    }

    pub fn volume_len(&self) -> usize {
        self.frame_len() * self.gop_length
    }

    pub fn ll_height(&self) -> usize {
        self.height >> self.spatial_levels
    }

    pub fn ll_width(&self) -> usize {
        self.width >> self.spatial_levels
    }

    /// Number of frames in the temporal low band.
    pub fn low_frames(&self) -> usize {
        self.gop_length >> self.temporal_levels
    }

    /// Frame range occupied by a temporal band.
    pub fn temporal_band_frames(&self, band: TemporalBand) -> std::ops::Range<usize> {
        match band {
            TemporalBand::Low => 0..self.low_frames(),
            TemporalBand::High(level) => (self.gop_length >> level)..(self.gop_length >> (level - 1)),
        }
    }

    /// Temporal band and index within that band of an absolute frame index.
    pub fn temporal_band_of(&self, frame: usize) -> (TemporalBand, usize) {
        let low = self.low_frames();
        if frame < low {
            return (TemporalBand::Low, frame);
        }
        // frame lies in [gop >> level, gop >> (level - 1))
        let mut level = self.temporal_levels;
        while level > 1 && frame >= self.gop_length >> (level - 1) {
            level -= 1;
        }
        (TemporalBand::High(level), frame - (self.gop_length >> level))
    }

    /// Frames of the next-finer temporal scale that descend from `frame`.
    pub fn temporal_child_frames(&self, frame: usize) -> std::ops::Range<usize> {
        match self.temporal_band_of(frame) {
            (TemporalBand::Low, k) => {
                if self.temporal_levels == 0 {
                    0..0
                } else {
                    let start = self.low_frames() + k;
                    start..start + 1
                }
            }
            (TemporalBand::High(1), _) => 0..0,
            (TemporalBand::High(level), k) => {
                let start = (self.gop_length >> (level - 1)) + 2 * k;
                start..start + 2
            }
        }
    }

    /// Spatial band of a (row, col) position in Mallat layout.
    pub fn spatial_band_of(&self, row: usize, col: usize) -> SpatialBand {
        let (hl, wl) = (self.ll_height(), self.ll_width());
        if row < hl && col < wl {
            return SpatialBand::LL;
        }
        let mut level = self.spatial_levels;
        while level > 1 && (row >= self.height >> (level - 1) || col >= self.width >> (level - 1)) {
            level -= 1;
        }
        // `level` is now the first (coarsest) level whose doubled extent contains the point
        let (h, w) = (self.height >> level, self.width >> level);
        match (row >= h, col >= w) {
            (false, true) => SpatialBand::LH(level),
            (true, false) => SpatialBand::HL(level),
            _ => SpatialBand::HH(level),
        }
    }

    /// (row range, col range) of a spatial band.
    pub fn spatial_band_rect(&self, band: SpatialBand) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        match band {
            SpatialBand::LL => (0..self.ll_height(), 0..self.ll_width()),
            SpatialBand::LH(l) => {
                let (h, w) = (self.height >> l, self.width >> l);
                (0..h, w..2 * w)
            }
            SpatialBand::HL(l) => {
                let (h, w) = (self.height >> l, self.width >> l);
                (h..2 * h, 0..w)
            }
            SpatialBand::HH(l) => {
                let (h, w) = (self.height >> l, self.width >> l);
                (h..2 * h, w..2 * w)
            }
        }
    }

    /// Spatial bands in column order LL_S, LH_S, HL_S, HH_S, ..., HH_1.
    pub fn spatial_bands(&self) -> Vec<SpatialBand> {
        let mut out = vec![SpatialBand::LL];
        for l in (1..=self.spatial_levels).rev() {
            out.extend([SpatialBand::LH(l), SpatialBand::HL(l), SpatialBand::HH(l)]);
        }
        out
    }

    /// Position of `band` within [`DecompositionSpec::spatial_bands`].
    pub fn spatial_band_index(&self, band: SpatialBand) -> usize {
        match band {
            SpatialBand::LL => 0,
            SpatialBand::LH(l) => 1 + 3 * (self.spatial_levels - l) as usize,
            SpatialBand::HL(l) => 2 + 3 * (self.spatial_levels - l) as usize,
            SpatialBand::HH(l) => 3 + 3 * (self.spatial_levels - l) as usize,
        }
    }

    /// Every subband of the decomposition, frame-major in Mallat order.
    pub fn subbands(&self) -> Vec<SubbandId> {
        let mut out = Vec::with_capacity(self.gop_length * (1 + 3 * self.spatial_levels as usize));
        for frame in 0..self.gop_length {
            let (temporal, index) = self.temporal_band_of(frame);
            for spatial in self.spatial_bands() {
                out.push(SubbandId {
                    temporal,
                    frame_in_band: index,
                    spatial,
                });
            }
        }
        out
    }

    pub fn frame_of(&self, subband: &SubbandId) -> Option<usize> {
        let range = self.temporal_band_frames(subband.temporal);
        let frame = range.start + subband.frame_in_band;
        range.contains(&frame).then_some(frame)
    }

    /// Row label of a frame, e.g. `LLLL`, `LLLH`, `LLH_2`, `H_8`.
    pub fn temporal_label(&self, frame: usize) -> String {
        let (band, index) = self.temporal_band_of(frame);
        let t = self.temporal_levels as usize;
        let (name, count) = match band {
            TemporalBand::Low if t == 0 => ("A".to_string(), self.low_frames()),
            TemporalBand::Low => ("L".repeat(t), self.low_frames()),
            TemporalBand::High(level) => {
                let level = level as usize;
                (format!("{}H", "L".repeat(level - 1)), self.gop_length >> level)
            }
        };
        if count > 1 {
            format!("{name}_{}", index + 1)
        } else {
            name
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemporalBand {
    Low,
    /// High band at the given temporal level; level 1 is the finest.
    High(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpatialBand {
    LL,
    LH(u32),
    HL(u32),
    HH(u32),
}

impl SpatialBand {
    pub fn is_high(self) -> bool {
        !matches!(self, SpatialBand::LL)
    }
}

impl fmt::Display for SpatialBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpatialBand::LL => write!(f, "LL"),
            SpatialBand::LH(l) => write!(f, "LH{l}"),
            SpatialBand::HL(l) => write!(f, "HL{l}"),
            SpatialBand::HH(l) => write!(f, "HH{l}"),
        }
    }
}

/// One spatio-temporal subband restricted to a single frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubbandId {
    pub temporal: TemporalBand,
    pub frame_in_band: usize,
    pub spatial: SpatialBand,
}

/// A GOP's wavelet coefficients indexed (frame, row, col), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVolume {
    pub samples: Vec<f64>,
    pub spec: DecompositionSpec,
}

impl CoeffVolume {
    pub fn zeros(spec: DecompositionSpec) -> Self {
        CoeffVolume {
            samples: vec![0.0; spec.volume_len()],
            spec,
        }
    }

    pub fn from_samples(samples: Vec<f64>, spec: DecompositionSpec) -> Result<Self, WaveletError> {
        spec.validate()?;
        if samples.len() != spec.volume_len() {
            return Err(WaveletError::InvalidDimensions(format!(
                "{} samples for a {}x{}x{} volume",
                samples.len(),
                spec.gop_length,
                spec.height,
                spec.width
            )));
        }
        Ok(CoeffVolume { samples, spec })
    }

    #[inline]
    pub fn index(&self, frame: usize, row: usize, col: usize) -> usize {
        (frame * self.spec.height + row) * self.spec.width + col
    }

    pub fn get(&self, frame: usize, row: usize, col: usize) -> f64 {
        self.samples[self.index(frame, row, col)]
    }

    pub fn set(&mut self, frame: usize, row: usize, col: usize, value: f64) {
        let i = self.index(frame, row, col);
        self.samples[i] = value;
    }

    pub fn subband_of(&self, frame: usize, row: usize, col: usize) -> SubbandId {
        let (temporal, frame_in_band) = self.spec.temporal_band_of(frame);
        SubbandId {
            temporal,
            frame_in_band,
            spatial: self.spec.spatial_band_of(row, col),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Forward t+2D transform of a GOP given as `gop_length` frames of
/// `height * width` samples, frame-major.
pub fn forward_gop(gop: &[f64], spec: &DecompositionSpec) -> Result<CoeffVolume, WaveletError> {
    spec.validate()?;
    if gop.len() != spec.volume_len() {
        return Err(WaveletError::InvalidDimensions(format!(
            "GOP has {} samples, expected {}",
            gop.len(),
            spec.volume_len()
        )));
    }
    let mut data = gop.to_vec();
    let plane = spec.frame_len();
    let mut scratch = Vec::new();

    let temporal = FilterBank::new(spec.temporal_filter, spec.normalization);
    for level in 0..spec.temporal_levels {
        let count = spec.gop_length >> level;
        temporal.analyze_planes(&mut data[..count * plane], plane, &mut scratch);
    }

    let spatial = FilterBank::new(spec.spatial_filter, spec.normalization);
    let mut line = Vec::new();
    for frame in data.chunks_exact_mut(plane) {
        for level in 0..spec.spatial_levels {
            let (h, w) = (spec.height >> level, spec.width >> level);
            analyze_2d(frame, spec.width, h, w, &spatial, &mut line, &mut scratch);
        }
    }
    Ok(CoeffVolume {
        samples: data,
        spec: *spec,
    })
}

/// Exact inverse of [`forward_gop`]: spatial synthesis of every frame, then
/// temporal synthesis.
pub fn inverse_gop(coeffs: &CoeffVolume) -> Result<Vec<f64>, WaveletError> {
    let spec = coeffs.spec;
    spec.validate()?;
    if coeffs.samples.len() != spec.volume_len() {
        return Err(WaveletError::InvalidDimensions(format!(
            "volume has {} samples, expected {}",
            coeffs.samples.len(),
            spec.volume_len()
        )));
    }
    let mut data = coeffs.samples.clone();
    let plane = spec.frame_len();
    let mut scratch = Vec::new();
    let mut line = Vec::new();

    let spatial = FilterBank::new(spec.spatial_filter, spec.normalization);
    for frame in data.chunks_exact_mut(plane) {
        for level in (0..spec.spatial_levels).rev() {
            let (h, w) = (spec.height >> level, spec.width >> level);
            synthesize_2d(frame, spec.width, h, w, &spatial, &mut line, &mut scratch);
        }
    }

    let temporal = FilterBank::new(spec.temporal_filter, spec.normalization);
    for level in (0..spec.temporal_levels).rev() {
        let count = spec.gop_length >> level;
        temporal.synthesize_planes(&mut data[..count * plane], plane, &mut scratch);
    }
    Ok(data)
}

/// One 2-D analysis level on the top-left `h x w` region: rows, then columns.
fn analyze_2d(
    frame: &mut [f64],
    stride: usize,
    h: usize,
    w: usize,
    filter: &FilterBank,
    line: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) {
    for r in 0..h {
        filter.analyze_in_place(&mut frame[r * stride..r * stride + w], scratch);
    }
    line.resize(h, 0.0);
    for c in 0..w {
        for r in 0..h {
            line[r] = frame[r * stride + c];
        }
        filter.analyze_in_place(line, scratch);
        for r in 0..h {
            frame[r * stride + c] = line[r];
        }
    }
}

fn synthesize_2d(
    frame: &mut [f64],
    stride: usize,
    h: usize,
    w: usize,
    filter: &FilterBank,
    line: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) {
    line.resize(h, 0.0);
    for c in 0..w {
        for r in 0..h {
            line[r] = frame[r * stride + c];
        }
        filter.synthesize_in_place(line, scratch);
        for r in 0..h {
            frame[r * stride + c] = line[r];
        }
    }
    for r in 0..h {
        filter.synthesize_in_place(&mut frame[r * stride..r * stride + w], scratch);
    }
}
