//! Scalable 3-D wavelet video coding with energy-weighted subbands and a
//! significance probability balancing tree.

pub mod wavelet;

pub use wavelet::{
    forward_1d, forward_gop, inverse_1d, inverse_gop, CoeffVolume, DecompositionSpec, FilterBank, FilterId,
    Normalization, SpatialBand, SubbandId, TemporalBand, WaveletError,
};
pub mod analysis;
pub mod bitstream;
pub mod codec;
pub mod coder;
pub mod tree;
pub mod videoio;
pub mod weighting;

pub use tree::{NodeKind, NodeRef, TreeKind, TreeTopology};
pub use weighting::{apply_weights, basis_energy, build_weight_table, remove_weights, WeightError, WeightTable};
