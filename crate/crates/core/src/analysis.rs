//! Diagnostics: weight tables, spatial vs temporal energy, zerotree ratios and
//! rate-distortion curves.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::codec::{decode_stream, encode_clip, CodecError, CodecParams, PlaneCoder};
use crate::coder::initial_threshold;
use crate::tree::{TreeKind, TreeTopology};
use crate::videoio::{component_psnr, VideoClip};
use crate::wavelet::{CoeffVolume, DecompositionSpec};
use crate::weighting::WeightTable;

/// Mean energies for one frame that has temporal children.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub label: String,
    pub frame: usize,
    /// Mean squared coefficient over the frame's spatial high bands.
    pub spatial: f64,
    /// Mean squared coefficient over its temporal child frames.
    pub temporal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub rows: Vec<EnergyRow>,
}

impl EnergyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("temporal,spatial,temporal_children\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.4},{:.4}", r.label, r.spatial, r.temporal);
        }
        out
    }
}

/// Spatial-high versus temporal-child mean energy for every frame with
/// temporal children.
pub fn subband_energy_report(coeffs: &CoeffVolume) -> EnergyReport {
    let spec = &coeffs.spec;
    let (hl, wl) = (spec.ll_height(), spec.ll_width());
    let frame_len = spec.frame_len();
    let frame = |f: usize| &coeffs.samples[f * frame_len..(f + 1) * frame_len];
    let rows = (0..spec.gop_length)
        .filter(|&f| !spec.temporal_child_frames(f).is_empty())
        .map(|f| {
            let data = frame(f);
            let mut sum = 0.0;
            for r in 0..spec.height {
                for c in 0..spec.width {
                    if r >= hl || c >= wl {
                        sum += data[r * spec.width + c].powi(2);
                    }
                }
            }
            let high_count = frame_len - hl * wl;
            let spatial = if high_count == 0 { 0.0 } else { sum / high_count as f64 };
            let children = spec.temporal_child_frames(f);
            let n = children.len() * frame_len;
            let temporal = children.flat_map(|k| frame(k).iter()).map(|x| x * x).sum::<f64>() / n as f64;
            EnergyRow {
                label: spec.temporal_label(f),
                frame: f,
                spatial,
                temporal,
            }
        })
        .collect();
    EnergyReport { rows }
}

/// Mean square of the temporal high frames divided by the mean square of
/// the spatial high bands of the temporal low frames.
pub fn temporal_spatial_variance_ratio(coeffs: &CoeffVolume) -> f64 {
    let spec = &coeffs.spec;
    let low = spec.low_frames() * spec.frame_len();
    let high = &coeffs.samples[low..];
    let temporal = high.iter().map(|x| x * x).sum::<f64>() / high.len().max(1) as f64;
    let (hl, wl) = (spec.ll_height(), spec.ll_width());
    let mut sum = 0.0;
    let mut count = 0usize;
    for f in 0..spec.low_frames() {
        for r in 0..spec.height {
            for c in 0..spec.width {
                if r >= hl || c >= wl {
                    sum += coeffs.get(f, r, c).powi(2);
                    count += 1;
                }
            }
        }
    }
    if count == 0 || sum == 0.0 {
        return if temporal == 0.0 { 0.0 } else { f64::INFINITY };
    }
    temporal / (sum / count as f64)
}

/// Degree-k zerotree statistics of one volume under one topology.
///
/// A node counts when its descendant set is non-empty. It is a degree-1
/// zerotree at threshold `T` when every descendant is below `T`, and a
/// degree-2 zerotree when every descendant except its offspring is.
pub struct ZerotreeStats {
    exponent: Option<i32>,
    dmax: Vec<f64>,
    lmax: Vec<f64>,
}

impl ZerotreeStats {
    pub fn new(coeffs: &CoeffVolume, topology: &TreeTopology) -> Self {
        let exponent = initial_threshold(coeffs).ok();
        let (d, l) = topology.descendant_maxima(&coeffs.samples);
        let mut dmax = Vec::new();
        let mut lmax = Vec::new();
        for idx in 0..coeffs.samples.len() as u32 {
            if topology.has_children(idx) {
                dmax.push(d[idx as usize]);
                lmax.push(l[idx as usize]);
            }
        }
        ZerotreeStats { exponent, dmax, lmax }
    }

    /// Threshold of scan `scan` (1-based): `2^(n - scan + 1)`.
    pub fn threshold(&self, scan: u32) -> Option<f64> {
        self.exponent.map(|n| 2f64.powi(n - scan as i32 + 1))
    }

    /// Percentage of set nodes that are degree-`degree` zerotrees at scan `scan`.
    pub fn ratio(&self, scan: u32, degree: u32) -> f64 {
        assert!(scan >= 1 && (1..=2).contains(&degree));
        let Some(t) = self.threshold(scan) else {
            return 100.0;
        };
        if self.dmax.is_empty() {
            return 100.0;
        }
        let source = if degree == 1 { &self.dmax } else { &self.lmax };
        let zero = source.iter().filter(|&&m| m < t).count();
        100.0 * zero as f64 / source.len() as f64
    }
}

/// Degree-k zerotree ratio in percent at 1-based scan `scan`.
pub fn zerotree_ratio(coeffs: &CoeffVolume, topology: &TreeTopology, scan: u32, degree: u32) -> f64 {
    ZerotreeStats::new(coeffs, topology).ratio(scan, degree)
}

fn luma_gops(clip: &VideoClip, params: &CodecParams) -> Result<(PlaneCoder, Vec<CoeffVolume>), CodecError> {
    if clip.frame_count() == 0 {
        return Err(CodecError::InvalidParams("clip has no frames".into()));
    }
    let coder = PlaneCoder::from_params(params, clip.width, clip.height)?;
    let gops = clip.frame_count().div_ceil(params.gop_length);
    let volumes = (0..gops)
        .into_par_iter()
        .map(|g| coder.analyze(&coder.gop_samples(clip, 0, g * params.gop_length)))
        .collect::<Result<_, _>>()?;
    Ok((coder, volumes))
}

/// Energy report of the luma plane's unweighted coefficients, averaged
/// over every GOP of the clip.
pub fn clip_energy_report(clip: &VideoClip, params: &CodecParams) -> Result<EnergyReport, CodecError> {
    let params = CodecParams {
        weighted: false,
        ..*params
    };
    let (_, volumes) = luma_gops(clip, &params)?;
    let n = volumes.len() as f64;
    let mut report = subband_energy_report(&volumes[0]);
    for r in &mut report.rows {
        r.spatial = 0.0;
        r.temporal = 0.0;
    }
    for v in &volumes {
        for (acc, row) in report.rows.iter_mut().zip(subband_energy_report(v).rows) {
            acc.spatial += row.spatial / n;
            acc.temporal += row.temporal / n;
        }
    }
    Ok(report)
}

/// Luma zerotree ratios of both trees at one scan, averaged over GOPs.
#[derive(Debug, Clone, PartialEq)]
pub struct ZerotreeRow {
    pub scan: u32,
    /// `[EWSPB, Asymmetric3D]` degree-1 ratios in percent.
    pub degree1: [f64; 2],
    /// `[EWSPB, Asymmetric3D]` degree-2 ratios in percent.
    pub degree2: [f64; 2],
}

/// Degree-1 and degree-2 zerotree ratios at scans `1..=scans` for the
/// coefficients the coder sees (weighted when `params.weighted`).
pub fn clip_zerotree_table(clip: &VideoClip, params: &CodecParams, scans: u32) -> Result<Vec<ZerotreeRow>, CodecError> {
    let (coder, volumes) = luma_gops(clip, params)?;
    let trees = [
        coder.topology.clone(),
        TreeTopology::new(TreeKind::Asymmetric3D, coder.spec)?,
    ];
    let n = volumes.len() as f64;
    let mut rows: Vec<ZerotreeRow> = (1..=scans)
        .map(|scan| ZerotreeRow {
            scan,
            degree1: [0.0; 2],
            degree2: [0.0; 2],
        })
        .collect();
    for v in &volumes {
        for (t, topo) in trees.iter().enumerate() {
            let stats = ZerotreeStats::new(v, topo);
            for row in &mut rows {
                row.degree1[t] += stats.ratio(row.scan, 1) / n;
                row.degree2[t] += stats.ratio(row.scan, 2) / n;
            }
        }
    }
    Ok(rows)
}

pub fn zerotree_csv(rows: &[ZerotreeRow]) -> String {
    let mut out = String::from("scan,ewspb_degree1,asym_degree1,ewspb_degree2,asym_degree2\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.2},{:.2},{:.2},{:.2}",
            r.scan, r.degree1[0], r.degree1[1], r.degree2[0], r.degree2[1]
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdPoint {
    pub kbps: f64,
    /// Y, U and V PSNR in dB.
    pub psnr: [f64; 3],
}

/// PSNR at each bitrate. The clip is encoded once at the highest rate and
/// each point decodes the corresponding prefix of every segment, which is
/// bit-identical to encoding at that rate because the stream is embedded.
pub fn rd_curve(clip: &VideoClip, params: &CodecParams, bitrates: &[f64]) -> Result<Vec<RdPoint>, CodecError> {
    let Some(max) = bitrates.iter().copied().reduce(f64::max) else {
        return Ok(Vec::new());
    };
    let stream = encode_clip(
        clip,
        &CodecParams {
            bitrate_kbps: Some(max),
            ..*params
        },
    )?;
    bitrates
        .par_iter()
        .map(|&kbps| {
            let out = decode_stream(&stream, Some(kbps))?;
            let mut psnr = [0.0; 3];
            for (c, p) in psnr.iter_mut().enumerate() {
                *p = component_psnr(clip, &out, c)?;
            }
            Ok(RdPoint { kbps, psnr })
        })
        .collect()
}

pub fn rd_csv(points: &[RdPoint]) -> String {
    let mut out = String::from("kbps,psnr_y,psnr_u,psnr_v\n");
    for p in points {
        let _ = writeln!(out, "{},{:.4},{:.4},{:.4}", p.kbps, p.psnr[0], p.psnr[1], p.psnr[2]);
    }
    out
}

/// Human-readable weight table, one row per temporal frame.
pub fn weight_table_text(table: &WeightTable) -> String {
    let spec: &DecompositionSpec = table.spec();
    let mut out = format!("{:<8}", "");
    for band in spec.spatial_bands() {
        let _ = write!(out, "{:>8}", band.to_string());
    }
    out.push('\n');
    for (f, row) in table.rows().iter().enumerate() {
        let _ = write!(out, "{:<8}", spec.temporal_label(f));
        for w in row {
            let _ = write!(out, "{w:>8.2}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TreeKind;
    use crate::wavelet::forward_gop;
    use crate::weighting::build_weight_table;

    fn spec() -> DecompositionSpec {
        DecompositionSpec {
            gop_length: 8,
            temporal_levels: 3,
            spatial_levels: 2,
            ..DecompositionSpec::default_for(16, 16)
        }
    }

    #[test]
    fn zero_volume_energy_and_ratio() {
        let v = CoeffVolume::zeros(spec());
        let report = subband_energy_report(&v);
        assert_eq!(report.rows.len(), 4);
        assert!(report.rows.iter().all(|r| r.spatial == 0.0 && r.temporal == 0.0));
        let topo = TreeTopology::new(TreeKind::Ewspb, spec()).unwrap();
        for scan in 1..8 {
            assert_eq!(zerotree_ratio(&v, &topo, scan, 1), 100.0);
        }
    }

    #[test]
    fn static_clip_has_no_temporal_energy() {
        let s = spec();
        let frame: Vec<f64> = (0..s.frame_len()).map(|i| ((i * 7919) % 61) as f64 - 30.0).collect();
        let gop: Vec<f64> = (0..s.gop_length).flat_map(|_| frame.iter().copied()).collect();
        let report = subband_energy_report(&forward_gop(&gop, &s).unwrap());
        let labels: Vec<&str> = report.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["LLL", "LLH", "LH_1", "LH_2"]);
        for r in &report.rows {
            assert!(r.temporal < 1e-20, "{r:?}");
        }
        assert!(report.rows[0].spatial > 1.0);
        assert_eq!(report.to_csv().lines().count(), 5);
        assert_eq!(temporal_spatial_variance_ratio(&forward_gop(&gop, &s).unwrap()), 0.0);
    }

    #[test]
    fn ratio_by_hand() {
        // one spatial root with a significant grandchild, everything else zero
        let s = DecompositionSpec::lazy(2, 8, 8, 1, 2);
        let topo = TreeTopology::new(TreeKind::Ewspb, s).unwrap();
        let mut v = CoeffVolume::zeros(s);
        v.samples[topo.index(0, 0, 0) as usize] = 16.0;
        v.samples[topo.index(0, 0, 4) as usize] = 8.0; // grandchild of (0,1) via (0,2)
        let stats = ZerotreeStats::new(&v, &topo);
        let nodes = (0..s.volume_len() as u32).filter(|&i| topo.has_children(i)).count() as f64;
        assert_eq!(stats.ratio(1, 1), 100.0);
        // at T = 8 the root (0,1) and its child (0,2) are not degree-1 zerotrees
        assert!((stats.ratio(2, 1) - 100.0 * (nodes - 2.0) / nodes).abs() < 1e-12);
        // degree 2 only excludes (0,1)
        assert!((stats.ratio(2, 2) - 100.0 * (nodes - 1.0) / nodes).abs() < 1e-12);
    }

    #[test]
    fn degree_two_dominates_and_ratio_decreases() {
        let s = spec();
        let samples: Vec<f64> = (0..s.volume_len())
            .map(|i| (((i * 2654435761) % 1000) as f64 - 500.0) / 3.0)
            .collect();
        let v = CoeffVolume::from_samples(samples, s).unwrap();
        for kind in [TreeKind::Ewspb, TreeKind::Asymmetric3D] {
            let stats = ZerotreeStats::new(&v, &TreeTopology::new(kind, s).unwrap());
            for scan in 1..8 {
                assert!(stats.ratio(scan, 2) >= stats.ratio(scan, 1));
                assert!(stats.ratio(scan + 1, 1) <= stats.ratio(scan, 1));
            }
        }
    }

    #[test]
    fn clip_tables_have_expected_shape() {
        use crate::videoio::{synthetic_clip, SyntheticParams};
        let clip = synthetic_clip(&SyntheticParams::new(32, 32, 12, 4));
        let params = CodecParams {
            gop_length: 8,
            temporal_levels: 3,
            spatial_levels: 2,
            tree: TreeKind::Asymmetric3D,
            ..CodecParams::default()
        };
        let energy = clip_energy_report(&clip, &params).unwrap();
        assert_eq!(energy.rows.len(), 4);
        assert!(energy.rows.iter().all(|r| r.spatial > 0.0 && r.temporal > 0.0));
        let rows = clip_zerotree_table(&clip, &params, 5).unwrap();
        assert_eq!(rows.len(), 5);
        for (r, next) in rows.iter().zip(&rows[1..]) {
            assert!(r.degree1[0] <= 100.0 && next.degree1[0] <= r.degree1[0] && next.degree1[1] <= r.degree1[1]);
            assert!(r.degree2[0] >= r.degree1[0] && r.degree2[1] >= r.degree1[1]);
        }
        assert_eq!(zerotree_csv(&rows).lines().count(), 6);
        let empty = VideoClip {
            frames: Vec::new(),
            ..clip
        };
        assert!(clip_energy_report(&empty, &params).is_err());
    }

    #[test]
    fn weight_text_has_one_line_per_frame() {
        let table = build_weight_table(&spec()).unwrap();
        let text = weight_table_text(&table);
        assert_eq!(text.lines().count(), 9);
        assert!(text.lines().nth(1).unwrap().starts_with("LLL"));
    }
}
