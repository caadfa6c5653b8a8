//! Shared fixtures for the criterion benchmarks.

use ewsp_core::codec::{CodecParams, PlaneCoder};
use ewsp_core::videoio::{synthetic_clip, SyntheticParams, VideoClip};

/// CIF-sized synthetic clip with the default coder for its luma plane.
pub fn cif_fixture(frames: usize) -> (VideoClip, PlaneCoder) {
    let clip = synthetic_clip(&SyntheticParams::new(352, 288, frames, 1));
    let coder = PlaneCoder::from_params(&CodecParams::default(), 352, 288).expect("default parameters are valid");
    (clip, coder)
}
