//! Energy weights of the spatio-temporal subbands.
//!
//! Biorthogonal synthesis bases do not all carry the same energy, so a bit on
//! a given bitplane is worth more in some subbands than in others. Each
//! subband is weighted by the square root of the reconstructed energy of a
//! unit coefficient placed at its centre.

use thiserror::Error;

use crate::wavelet::{
    inverse_gop, CoeffVolume, DecompositionSpec, FilterBank, Normalization, SpatialBand, SubbandId, WaveletError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("subband {0:?} has no interior probe position")]
    SubbandTooSmall(SubbandId),
    #[error("subband {0:?} does not belong to the decomposition")]
    UnknownSubband(SubbandId),
    #[error("weight table was built for a different decomposition")]
    SpecMismatch,
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
}

/// Probe position (frame, row, col) at the centre of a subband.
fn probe_position(subband: &SubbandId, spec: &DecompositionSpec) -> Result<(usize, usize, usize), WeightError> {
    let frame = spec.frame_of(subband).ok_or(WeightError::UnknownSubband(*subband))?;
    if let SpatialBand::LH(l) | SpatialBand::HL(l) | SpatialBand::HH(l) = subband.spatial {
        if l == 0 || l > spec.spatial_levels {
            return Err(WeightError::UnknownSubband(*subband));
        }
    }
    let (rows, cols) = spec.spatial_band_rect(subband.spatial);
    if rows.len() < 2 || cols.len() < 2 {
        return Err(WeightError::SubbandTooSmall(*subband));
    }
    Ok((frame, rows.start + rows.len() / 2, cols.start + cols.len() / 2))
}

/// Energy of the synthesised volume for a single unit coefficient at the
/// centre of `subband`, computed by running the full inverse transform.
pub fn basis_energy(subband: &SubbandId, spec: &DecompositionSpec) -> Result<f64, WeightError> {
    spec.validate()?;
    let (f, r, c) = probe_position(subband, spec)?;
    let mut volume = CoeffVolume::zeros(*spec);
    volume.set(f, r, c, 1.0);
    let rec = inverse_gop(&volume)?;
    Ok(rec.iter().map(|v| v * v).sum())
}

/// Energy of the 1-D multi-level synthesis of a unit impulse at `pos` of a
/// Mallat-ordered signal of length `len` decomposed over `levels` levels.
fn impulse_energy_1d(len: usize, levels: u32, pos: usize, filter: &FilterBank) -> f64 {
    let mut signal = vec![0.0; len];
    signal[pos] = 1.0;
    let mut scratch = Vec::new();
    for level in (0..levels).rev() {
        let n = len >> level;
        filter.synthesize_in_place(&mut signal[..n], &mut scratch);
    }
    signal.iter().map(|v| v * v).sum()
}

/// Same quantity as [`basis_energy`], using separability: the synthesis of an
/// impulse in one subband is the tensor product of three 1-D syntheses.
fn separable_basis_energy(subband: &SubbandId, spec: &DecompositionSpec) -> Result<f64, WeightError> {
    let (f, r, c) = probe_position(subband, spec)?;
    let temporal = FilterBank::new(spec.temporal_filter, spec.normalization);
    let spatial = FilterBank::new(spec.spatial_filter, spec.normalization);
    // Vertical and horizontal decomposition depth of the band.
    let (vert, horiz) = match subband.spatial {
        SpatialBand::LL => (spec.spatial_levels, spec.spatial_levels),
        SpatialBand::LH(l) | SpatialBand::HL(l) | SpatialBand::HH(l) => (l, l),
    };
    // Each 1-D synthesis starts at the level the band lives on; positions in
    // the Mallat layout already encode whether the impulse is low or high.
    let e_t = impulse_energy_1d(spec.gop_length, spec.temporal_levels, f, &temporal);
    // Spatial levels coarser than the band's own never touch it.
    let e_v = impulse_energy_1d(spec.height, vert, r, &spatial);
    let e_h = impulse_energy_1d(spec.width, horiz, c, &spatial);
    Ok(e_t * (e_v * e_h))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    spec: DecompositionSpec,
    /// `rows[frame][spatial band index]`.
    rows: Vec<Vec<f64>>,
}

impl WeightTable {
    /// All weights 1.0; used when weighting is disabled.
    pub fn uniform(spec: DecompositionSpec) -> Self {
        let cols = 1 + 3 * spec.spatial_levels as usize;
        WeightTable {
            spec,
            rows: vec![vec![1.0; cols]; spec.gop_length],
        }
    }

    pub fn spec(&self) -> &DecompositionSpec {
        &self.spec
    }

    /// Normalization the table was computed under.
    pub fn convention(&self) -> Normalization {
        self.spec.normalization
    }

    pub fn weight(&self, subband: &SubbandId) -> Option<f64> {
        let frame = self.spec.frame_of(subband)?;
        self.rows
            .get(frame)?
            .get(self.spec.spatial_band_index(subband.spatial))
            .copied()
    }

    pub fn weight_at(&self, frame: usize, band: SpatialBand) -> f64 {
        self.rows[frame][self.spec.spatial_band_index(band)]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn entries(&self) -> impl Iterator<Item = (SubbandId, f64)> + '_ {
        self.spec.subbands().into_iter().map(move |sb| {
            let w = self.weight(&sb).expect("own subband");
            (sb, w)
        })
    }

    pub fn max_entry(&self) -> (SubbandId, f64) {
        self.entries()
            .fold(None, |best: Option<(SubbandId, f64)>, (sb, w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((sb, w)),
            })
            .expect("non-empty table")
    }

    /// Table rendered as CSV: one row per frame labelled with its temporal
    /// band, one column per spatial band.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("temporal");
        for band in self.spec.spatial_bands() {
            out.push(',');
            out.push_str(&band_column_label(band, self.spec.spatial_levels));
        }
        out.push('\n');
        for (frame, row) in self.rows.iter().enumerate() {
            out.push_str(&self.spec.temporal_label(frame));
            for w in row {
                out.push_str(&format!(",{w:.4}"));
            }
            out.push('\n');
        }
        out
    }

    /// Weight of every sample position in one frame, row-major.
    pub(crate) fn frame_weight_map(&self, frame: usize, band_map: &[u16]) -> Vec<f64> {
        band_map.iter().map(|&b| self.rows[frame][b as usize]).collect()
    }
}

fn band_column_label(band: SpatialBand, levels: u32) -> String {
    match band {
        SpatialBand::LL => format!("LL{levels}"),
        other => other.to_string(),
    }
}

/// Weight of every subband: `sqrt(basis_energy)`.
pub fn build_weight_table(spec: &DecompositionSpec) -> Result<WeightTable, WeightError> {
    spec.validate()?;
    let bands = spec.spatial_bands();
    let mut rows = Vec::with_capacity(spec.gop_length);
    for frame in 0..spec.gop_length {
        let (temporal, frame_in_band) = spec.temporal_band_of(frame);
        let row = bands
            .iter()
            .map(|&spatial| {
                let id = SubbandId {
                    temporal,
                    frame_in_band,
                    spatial,
                };
                separable_basis_energy(&id, spec).map(f64::sqrt)
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(WeightTable { spec: *spec, rows })
}

/// Spatial band index of every (row, col) of a frame.
pub(crate) fn band_index_map(spec: &DecompositionSpec) -> Vec<u16> {
    let mut map = Vec::with_capacity(spec.frame_len());
    for r in 0..spec.height {
        for c in 0..spec.width {
            map.push(spec.spatial_band_index(spec.spatial_band_of(r, c)) as u16);
        }
    }
    map
}

fn scale_volume(coeffs: &CoeffVolume, table: &WeightTable, invert: bool) -> Result<CoeffVolume, WeightError> {
    if coeffs.spec != table.spec {
        return Err(WeightError::SpecMismatch);
    }
    let spec = coeffs.spec;
    let map = band_index_map(&spec);
    let mut out = coeffs.clone();
    for (frame, samples) in out.samples.chunks_exact_mut(spec.frame_len()).enumerate() {
        let weights = table.frame_weight_map(frame, &map);
        for (v, w) in samples.iter_mut().zip(weights) {
            if invert {
                *v /= w;
            } else {
                *v *= w;
            }
        }
    }
    Ok(out)
}

pub fn apply_weights(coeffs: &CoeffVolume, table: &WeightTable) -> Result<CoeffVolume, WeightError> {
    scale_volume(coeffs, table, false)
}

pub fn remove_weights(coeffs: &CoeffVolume, table: &WeightTable) -> Result<CoeffVolume, WeightError> {
    scale_volume(coeffs, table, true)
}
