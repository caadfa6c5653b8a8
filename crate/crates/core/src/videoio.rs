//! Raw planar YUV 4:2:0 clips, quality metrics and a synthetic clip generator.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VideoError {
    #[error("invalid file: {0}")]
    InvalidFile(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One frame: full-resolution luma and 2x2-subsampled chroma.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub y: Vec<u8>,
    pub u: Vec<u8>,
    pub v: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoClip {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Frame>,
}

impl VideoClip {
    pub fn chroma_size(width: usize, height: usize) -> (usize, usize) {
        (width.div_ceil(2), height.div_ceil(2))
    }

    /// Size in bytes of one I420 frame.
    pub fn frame_bytes(width: usize, height: usize) -> usize {
        let (cw, ch) = Self::chroma_size(width, height);
        width * height + 2 * cw * ch
    }

    /// Clip with every sample set to `value`.
    pub fn filled(width: usize, height: usize, frames: usize, value: u8) -> Self {
        let (cw, ch) = Self::chroma_size(width, height);
        let frame = Frame {
            y: vec![value; width * height],
            u: vec![value; cw * ch],
            v: vec![value; cw * ch],
        };
        VideoClip {
            width,
            height,
            frames: vec![frame; frames],
        }
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Width and height of component 0 (Y), 1 (U) or 2 (V).
    pub fn plane_size(&self, component: usize) -> (usize, usize) {
        if component == 0 {
            (self.width, self.height)
        } else {
            Self::chroma_size(self.width, self.height)
        }
    }

    pub fn plane(&self, frame: usize, component: usize) -> &[u8] {
        let f = &self.frames[frame];
        match component {
            0 => &f.y,
            1 => &f.u,
            _ => &f.v,
        }
    }

    pub fn plane_mut(&mut self, frame: usize, component: usize) -> &mut Vec<u8> {
        let f = &mut self.frames[frame];
        match component {
            0 => &mut f.y,
            1 => &mut f.u,
            _ => &mut f.v,
        }
    }

    pub fn from_bytes(bytes: &[u8], width: usize, height: usize) -> Result<Self, VideoError> {
        let frame_len = Self::frame_bytes(width, height);
        if width == 0 || height == 0 {
            return Err(VideoError::InvalidFile("zero dimension".into()));
        }
        if bytes.is_empty() || bytes.len() % frame_len != 0 {
            return Err(VideoError::InvalidFile(format!(
                "{} bytes is not a whole number of {width}x{height} I420 frames ({frame_len} bytes each)",
                bytes.len()
            )));
        }
        let luma = width * height;
        let chroma = (frame_len - luma) / 2;
        let frames = bytes
            .chunks_exact(frame_len)
            .map(|chunk| Frame {
                y: chunk[..luma].to_vec(),
                u: chunk[luma..luma + chroma].to_vec(),
                v: chunk[luma + chroma..].to_vec(),
            })
            .collect();
        Ok(VideoClip { width, height, frames })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.frames.len() * Self::frame_bytes(self.width, self.height));
        for f in &self.frames {
            out.extend_from_slice(&f.y);
            out.extend_from_slice(&f.u);
            out.extend_from_slice(&f.v);
        }
        out
    }
}

pub fn read_yuv420(path: impl AsRef<Path>, width: usize, height: usize) -> Result<VideoClip, VideoError> {
    VideoClip::from_bytes(&fs::read(path)?, width, height)
}

pub fn write_yuv420(clip: &VideoClip, path: impl AsRef<Path>) -> Result<(), VideoError> {
    fs::write(path, clip.to_bytes())?;
    Ok(())
}

/// Peak signal-to-noise ratio for 8-bit samples; infinite for identical input.
pub fn psnr(reference: &[u8], test: &[u8]) -> Result<f64, VideoError> {
    if reference.len() != test.len() {
        return Err(VideoError::DimensionMismatch(format!(
            "{} vs {} samples",
            reference.len(),
            test.len()
        )));
    }
    let sse: f64 = reference
        .iter()
        .zip(test)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(psnr_from_mse(sse / reference.len().max(1) as f64))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

/// PSNR of one component over the whole clip (MSE pooled across frames).
pub fn component_psnr(reference: &VideoClip, test: &VideoClip, component: usize) -> Result<f64, VideoError> {
    if reference.width != test.width || reference.height != test.height || reference.frame_count() != test.frame_count()
    {
        return Err(VideoError::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            reference.width,
            reference.height,
            reference.frame_count(),
            test.width,
            test.height,
            test.frame_count()
        )));
    }
    let mut sse = 0.0;
    let mut count = 0usize;
    for f in 0..reference.frame_count() {
        let (a, b) = (reference.plane(f, component), test.plane(f, component));
        sse += a
            .iter()
            .zip(b)
            .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
            .sum::<f64>();
        count += a.len();
    }
    Ok(psnr_from_mse(sse / count.max(1) as f64))
}

/// Rounds half away from zero and clamps to the 8-bit range.
pub fn to_sample(x: f64) -> u8 {
    x.round().clamp(0.0, 255.0) as u8
}

/// Parameters of the synthetic test clip: drifting sinusoidal gradients over
/// a fixed random texture, plus per-frame noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
    /// Amplitude of the sinusoidal pattern.
    pub amplitude: f64,
    /// Horizontal and vertical drift in pixels per frame.
    pub velocity: (f64, f64),
    /// Standard deviation of the static texture.
    pub spatial_noise: f64,
    /// Standard deviation of the noise redrawn every frame.
    pub temporal_noise: f64,
}

impl SyntheticParams {
    pub fn new(width: usize, height: usize, frames: usize, seed: u64) -> Self {
        SyntheticParams {
            width,
            height,
            frames,
            seed,
            amplitude: 60.0,
            velocity: (0.5, 0.25),
            spatial_noise: 12.0,
            temporal_noise: 2.0,
        }
    }
}

fn synth_plane(
    p: &SyntheticParams,
    w: usize,
    h: usize,
    scale: f64,
    texture: &[f64],
    t: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<u8> {
    let tau = std::f64::consts::TAU;
    let noise = Normal::new(0.0, p.temporal_noise.max(0.0)).expect("finite deviation");
    let (dx, dy) = (p.velocity.0 * t as f64 * scale, p.velocity.1 * t as f64 * scale);
    let (lx, ly) = (w as f64 / 2.5, h as f64 / 1.5);
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let x = c as f64 - dx;
            let y = r as f64 - dy;
            let wave = (tau * x / lx).sin() * (tau * y / ly).cos() + 0.5 * (tau * (x + y) / (0.7 * lx)).sin();
            let ramp = 30.0 * (x / w as f64 - 0.5);
            let v = 128.0 + p.amplitude * scale * wave + ramp * scale + texture[r * w + c] + noise.sample(rng);
            out.push(to_sample(v));
        }
    }
    out
}

/// Deterministic synthetic I420 clip.
pub fn synthetic_clip(p: &SyntheticParams) -> VideoClip {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (cw, ch) = VideoClip::chroma_size(p.width, p.height);
    let texture_dist = Normal::new(0.0, p.spatial_noise.max(0.0)).expect("finite deviation");
    let mut texture =
        |n: usize, scale: f64| -> Vec<f64> { (0..n).map(|_| scale * texture_dist.sample(&mut rng)).collect() };
    let ty = texture(p.width * p.height, 1.0);
    let tu = texture(cw * ch, 0.5);
    let tv = texture(cw * ch, 0.5);
    let frames = (0..p.frames)
        .map(|t| Frame {
            y: synth_plane(p, p.width, p.height, 1.0, &ty, t, &mut rng),
            u: synth_plane(p, cw, ch, 0.5, &tu, t, &mut rng),
            v: synth_plane(p, cw, ch, 0.5, &tv, t, &mut rng),
        })
        .collect();
    VideoClip {
        width: p.width,
        height: p.height,
        frames,
    }
}
