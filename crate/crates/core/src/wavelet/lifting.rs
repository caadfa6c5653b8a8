//! One-dimensional lifting filter banks.
//!
//! Every filter is a sequence of symmetric two-tap lifting steps followed by a
//! per-band gain. Signals are extended with whole-sample symmetry at both ends,
//! which keeps the transform perfectly invertible for every even length.

use super::WaveletError;

/// Which half of the interleaved signal a lifting step modifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// Predict step: odd samples updated from their even neighbours.
    Odd,
    /// Update step: even samples updated from their odd neighbours.
    Even,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftingStep {
    pub target: Parity,
    pub coeff: f64,
}

const fn predict(coeff: f64) -> LiftingStep {
    LiftingStep {
        target: Parity::Odd,
        coeff,
    }
}

const fn update(coeff: f64) -> LiftingStep {
    LiftingStep {
        target: Parity::Even,
        coeff,
    }
}

const LEGALL53_STEPS: [LiftingStep; 2] = [predict(-0.5), update(0.25)];

const CDF97_ALPHA: f64 = -1.586_134_342_059_924;
const CDF97_BETA: f64 = -0.052_980_118_572_961;
const CDF97_GAMMA: f64 = 0.882_911_075_530_934;
const CDF97_DELTA: f64 = 0.443_506_852_043_971;
/// Gain of the unscaled 9/7 lifting low band at DC.
pub const CDF97_K: f64 = 1.230_174_104_914_001;

const CDF97_STEPS: [LiftingStep; 4] = [
    predict(CDF97_ALPHA),
    update(CDF97_BETA),
    predict(CDF97_GAMMA),
    update(CDF97_DELTA),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterId {
    /// Even/odd split only.
    Lazy,
    /// 5/3 biorthogonal, synthesis low-pass {1/2, 1, 1/2}.
    LeGall53,
    /// Cohen-Daubechies-Feauveau 9/7.
    Cdf97,
}

impl FilterId {
    pub fn code(self) -> u8 {
        match self {
            FilterId::Lazy => 0,
            FilterId::LeGall53 => 1,
            FilterId::Cdf97 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FilterId::Lazy),
            1 => Some(FilterId::LeGall53),
            2 => Some(FilterId::Cdf97),
            _ => None,
        }
    }
}

/// Output scaling convention of the lifting filters.
///
/// Only the 9/7 filter is affected; 5/3 and lazy filters are identical under
/// both conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Normalization {
    /// Analysis low band has unit DC gain and the high band has Nyquist gain 2
    /// (9/7 low band scaled by 1/K, high band by K).
    #[default]
    Standard,
    /// Raw lifting output without the final 9/7 scaling step.
    Unscaled,
}

impl Normalization {
    pub fn code(self) -> u8 {
        match self {
            Normalization::Standard => 0,
            Normalization::Unscaled => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Normalization::Standard),
            1 => Some(Normalization::Unscaled),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub id: FilterId,
    pub steps: &'static [LiftingStep],
    /// Gains applied to the (low, high) bands after the last lifting step.
    pub scaling: (f64, f64),
}

impl FilterBank {
    pub fn new(id: FilterId, normalization: Normalization) -> Self {
        match id {
            FilterId::Lazy => FilterBank {
                id,
                steps: &[],
                scaling: (1.0, 1.0),
            },
            FilterId::LeGall53 => FilterBank {
                id,
                steps: &LEGALL53_STEPS,
                scaling: (1.0, 1.0),
            },
            FilterId::Cdf97 => FilterBank {
                id,
                steps: &CDF97_STEPS,
                scaling: match normalization {
                    Normalization::Standard => (1.0 / CDF97_K, CDF97_K),
                    Normalization::Unscaled => (1.0, 1.0),
                },
            },
        }
    }

    pub fn lazy() -> Self {
        Self::new(FilterId::Lazy, Normalization::Standard)
    }

    pub fn legall53() -> Self {
        Self::new(FilterId::LeGall53, Normalization::Standard)
    }

    pub fn cdf97(normalization: Normalization) -> Self {
        Self::new(FilterId::Cdf97, normalization)
    }

    /// Analyses `line` in place: on return the first half holds the low band
    /// and the second half the high band. `scratch` is reused between calls.
    pub(crate) fn analyze_in_place(&self, line: &mut [f64], scratch: &mut Vec<f64>) {
        let n = line.len();
        debug_assert!(n >= 2 && n % 2 == 0);
        for step in self.steps {
            lift(line, *step, 1.0);
        }
        scratch.clear();
        scratch.extend_from_slice(line);
        let half = n / 2;
        let (gl, gh) = self.scaling;
        for i in 0..half {
            line[i] = scratch[2 * i] * gl;
            line[half + i] = scratch[2 * i + 1] * gh;
        }
    }

    /// Inverse of [`FilterBank::analyze_in_place`].
    pub(crate) fn synthesize_in_place(&self, line: &mut [f64], scratch: &mut Vec<f64>) {
        let n = line.len();
        debug_assert!(n >= 2 && n % 2 == 0);
        scratch.clear();
        scratch.extend_from_slice(line);
        let half = n / 2;
        let (gl, gh) = self.scaling;
        for i in 0..half {
            line[2 * i] = scratch[i] / gl;
            line[2 * i + 1] = scratch[half + i] / gh;
        }
        for step in self.steps.iter().rev() {
            lift(line, *step, -1.0);
        }
    }

    /// Same lifting steps applied to whole planes: `data` holds `count`
    /// consecutive planes of `plane` samples each and sample `k` of every
    /// plane forms one signal. Used for the temporal axis.
    pub(crate) fn analyze_planes(&self, data: &mut [f64], plane: usize, scratch: &mut Vec<f64>) {
        let count = data.len() / plane;
        debug_assert!(count >= 2 && count % 2 == 0);
        for step in self.steps {
            lift_planes(data, plane, *step, 1.0);
        }
        scratch.clear();
        scratch.extend_from_slice(data);
        let half = count / 2;
        let (gl, gh) = self.scaling;
        for i in 0..half {
            scale_copy(
                &mut data[i * plane..(i + 1) * plane],
                &scratch[2 * i * plane..(2 * i + 1) * plane],
                gl,
            );
            scale_copy(
                &mut data[(half + i) * plane..(half + i + 1) * plane],
                &scratch[(2 * i + 1) * plane..(2 * i + 2) * plane],
                gh,
            );
        }
    }

    pub(crate) fn synthesize_planes(&self, data: &mut [f64], plane: usize, scratch: &mut Vec<f64>) {
        let count = data.len() / plane;
        debug_assert!(count >= 2 && count % 2 == 0);
        scratch.clear();
        scratch.extend_from_slice(data);
        let half = count / 2;
        let (gl, gh) = self.scaling;
        for i in 0..half {
            scale_copy(
                &mut data[2 * i * plane..(2 * i + 1) * plane],
                &scratch[i * plane..(i + 1) * plane],
                1.0 / gl,
            );
            scale_copy(
                &mut data[(2 * i + 1) * plane..(2 * i + 2) * plane],
                &scratch[(half + i) * plane..(half + i + 1) * plane],
                1.0 / gh,
            );
        }
        for step in self.steps.iter().rev() {
            lift_planes(data, plane, *step, -1.0);
        }
    }
}

fn scale_copy(dst: &mut [f64], src: &[f64], gain: f64) {
    if gain == 1.0 {
        dst.copy_from_slice(src);
    } else {
        for (d, s) in dst.iter_mut().zip(src) {
            *d = s * gain;
        }
    }
}

/// One lifting step with whole-sample symmetric extension: x[-1] = x[1] and
/// x[n] = x[n-2].
fn lift(x: &mut [f64], step: LiftingStep, sign: f64) {
    let n = x.len();
    let c = step.coeff * sign;
    let mut i = match step.target {
        Parity::Odd => 1,
        Parity::Even => 0,
    };
    while i < n {
        let left = if i == 0 { x[1] } else { x[i - 1] };
        let right = if i + 1 < n { x[i + 1] } else { x[n - 2] };
        x[i] += c * (left + right);
        i += 2;
    }
}

fn lift_planes(data: &mut [f64], plane: usize, step: LiftingStep, sign: f64) {
    let count = data.len() / plane;
    let c = step.coeff * sign;
    let mut i = match step.target {
        Parity::Odd => 1,
        Parity::Even => 0,
    };
    while i < count {
        let left = if i == 0 { 1 } else { i - 1 };
        let right = if i + 1 < count { i + 1 } else { count - 2 };
        for k in 0..plane {
            let v = c * (data[left * plane + k] + data[right * plane + k]);
            data[i * plane + k] += v;
        }
        i += 2;
    }
}

/// Splits `signal` into (low, high) halves.
pub fn forward_1d(signal: &[f64], filter: &FilterBank) -> Result<(Vec<f64>, Vec<f64>), WaveletError> {
    if signal.len() < 2 || signal.len() % 2 != 0 {
        return Err(WaveletError::InvalidLength(signal.len()));
    }
    let mut line = signal.to_vec();
    let mut scratch = Vec::with_capacity(line.len());
    filter.analyze_in_place(&mut line, &mut scratch);
    let high = line.split_off(signal.len() / 2);
    Ok((line, high))
}

/// Rebuilds a signal of twice the band length from its (low, high) halves.
pub fn inverse_1d(low: &[f64], high: &[f64], filter: &FilterBank) -> Result<Vec<f64>, WaveletError> {
    if low.is_empty() || low.len() != high.len() {
        return Err(WaveletError::MismatchedBands {
            low: low.len(),
            high: high.len(),
        });
    }
    let mut line = Vec::with_capacity(low.len() * 2);
    line.extend_from_slice(low);
    line.extend_from_slice(high);
    let mut scratch = Vec::with_capacity(line.len());
    filter.synthesize_in_place(&mut line, &mut scratch);
    Ok(line)
}
