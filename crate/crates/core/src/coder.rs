//! Bitplane set-partitioning coder over a [`TreeTopology`].
//!
//! Encoder and decoder run the same state machine. Every binary decision is
//! routed through a [`BitChannel`]: the encoder evaluates the decision on the
//! coefficients and writes it, the decoder reads it back. List updates and
//! reconstruction happen in shared code, so both sides hold identical lists
//! after consuming the same bits.
//!
//! Pass `i` uses threshold `T_i = 2^(n - i)`. A pass is a sorting pass (LIP
//! scan, then LIS scan) followed by refinement of coefficients that became
//! significant in earlier passes. Sign bit 1 means negative.

use thiserror::Error;

use crate::bitstream::{BitReader, BitWriter};
use crate::tree::{Children, TreeTopology};
use crate::wavelet::CoeffVolume;

/// Passes stop once the threshold exponent drops below this value.
pub const DEFAULT_TERMINATION_EXPONENT: i32 = -16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoderError {
    #[error("GOP has no coefficient at or above the termination threshold")]
    EmptyGop,
    #[error("coefficient volume does not match the tree topology")]
    SpecMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LipEntry {
    Coeff(u32),
    /// Temporal child block, addressed by its top-left coefficient.
    Block(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntryType {
    /// Set of all descendants.
    TypeA,
    /// Descendants excluding offspring.
    TypeB,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LspEntry {
    pub index: u32,
    /// Pass in which the coefficient became significant.
    pub pass: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoderState {
    pub lip: Vec<LipEntry>,
    pub lis: Vec<(u32, EntryType)>,
    pub lsp: Vec<LspEntry>,
    /// Initial threshold exponent `n`.
    pub exponent: i32,
    /// Index of the next pass to run.
    pub pass: u32,
}

impl CoderState {
    fn initial(topo: &TreeTopology, exponent: i32) -> Self {
        let roots = topo.root_indices();
        CoderState {
            lip: roots.iter().map(|&r| LipEntry::Coeff(r)).collect(),
            lis: roots
                .iter()
                .filter(|&&r| topo.has_children(r))
                .map(|&r| (r, EntryType::TypeA))
                .collect(),
            lsp: Vec::new(),
            exponent,
            pass: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassOutcome {
    Completed,
    /// The bit budget (or the input) ran out inside the pass.
    Exhausted,
    /// The termination threshold was reached; no pass was run.
    Finished,
}

/// A binary decision of the coder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Query {
    Coeff(u32),
    Sign(u32),
    Block(u32),
    Desc(u32),
    Grand(u32),
    Offspring(u32),
    Refine(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stop;

pub trait BitChannel {
    fn decide(&mut self, query: Query, threshold: f64) -> Result<bool, Stop>;
    fn bits(&self) -> u64;
}

/// Largest power-of-two exponent not above `x`, for finite `x > 0`.
fn floor_log2(x: f64) -> i32 {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    if biased == 0 {
        // subnormal
        let mantissa = bits & ((1u64 << 52) - 1);
        -1074 + 63 - mantissa.leading_zeros() as i32
    } else {
        biased - 1023
    }
}

/// `n = floor(log2(max |c|))` over the volume.
pub fn initial_threshold(coeffs: &CoeffVolume) -> Result<i32, CoderError> {
    let max = coeffs.max_abs();
    if max == 0.0 || !max.is_finite() {
        return Err(CoderError::EmptyGop);
    }
    Ok(floor_log2(max))
}

pub struct EncodeChannel<'a> {
    coeffs: &'a [f64],
    dmax: Vec<f64>,
    lmax: Vec<f64>,
    topo: &'a TreeTopology,
    writer: BitWriter,
    budget: u64,
}

impl BitChannel for EncodeChannel<'_> {
    fn decide(&mut self, query: Query, t: f64) -> Result<bool, Stop> {
        if self.writer.bit_len() >= self.budget {
            return Err(Stop);
        }
        let c = self.coeffs;
        let bit = match query {
            Query::Coeff(i) => c[i as usize].abs() >= t,
            Query::Sign(i) => c[i as usize] < 0.0,
            Query::Block(i) => self.topo.block_members(i).iter().any(|&m| c[m as usize].abs() >= t),
            Query::Desc(i) => self.dmax[i as usize] >= t,
            Query::Grand(i) => self.lmax[i as usize] >= t,
            Query::Offspring(i) => {
                let mut kids = Children::new();
                self.topo.children_of(i, &mut kids);
                kids.iter().any(|&k| c[k as usize].abs() >= t)
            }
            Query::Refine(i) => (c[i as usize].abs() / t).floor() % 2.0 == 1.0,
        };
        self.writer.put_bit(bit);
        Ok(bit)
    }

    fn bits(&self) -> u64 {
        self.writer.bit_len()
    }
}

pub struct DecodeChannel<'a> {
    reader: BitReader<'a>,
}

impl BitChannel for DecodeChannel<'_> {
    fn decide(&mut self, _query: Query, _t: f64) -> Result<bool, Stop> {
        self.reader.get_bit().map_err(|_| Stop)
    }

    fn bits(&self) -> u64 {
        self.reader.position()
    }
}

/// One GOP's coding session. See [`Encoder`] and [`Decoder`].
pub struct Session<'t, C> {
    topo: &'t TreeTopology,
    channel: C,
    state: CoderState,
    recon: Vec<f64>,
    termination: i32,
    done: bool,
    pass_bits: Vec<u64>,
}

pub type Encoder<'a> = Session<'a, EncodeChannel<'a>>;
pub type Decoder<'a> = Session<'a, DecodeChannel<'a>>;

impl<'a> Encoder<'a> {
    /// Prepares to encode a weighted volume. Fails with `EmptyGop` when no
    /// coefficient reaches the termination threshold.
    pub fn new(
        coeffs: &'a CoeffVolume,
        topo: &'a TreeTopology,
        budget_bits: Option<u64>,
        termination: i32,
    ) -> Result<Self, CoderError> {
        if coeffs.spec != topo.spec {
            return Err(CoderError::SpecMismatch);
        }
        let exponent = initial_threshold(coeffs)?;
        if exponent < termination {
            return Err(CoderError::EmptyGop);
        }
        let (dmax, lmax) = topo.descendant_maxima(&coeffs.samples);
        let channel = EncodeChannel {
            coeffs: &coeffs.samples,
            dmax,
            lmax,
            topo,
            writer: BitWriter::new(),
            budget: budget_bits.unwrap_or(u64::MAX),
        };
        Ok(Session::start(topo, channel, exponent, termination))
    }

    /// Consumes the encoder, returning the payload bytes and bit length.
    pub fn finish(self) -> (Vec<u8>, u64) {
        let bits = self.channel.writer.bit_len();
        (self.channel.writer.into_bytes(), bits)
    }
}

impl<'a> Decoder<'a> {
    /// Decodes from the first `bit_len` bits of `payload`.
    pub fn new(topo: &'a TreeTopology, exponent: i32, payload: &'a [u8], bit_len: u64, termination: i32) -> Self {
        let channel = DecodeChannel {
            reader: BitReader::with_limit(payload, bit_len),
        };
        Session::start(topo, channel, exponent, termination)
    }
}

impl<'t, C: BitChannel> Session<'t, C> {
    fn start(topo: &'t TreeTopology, channel: C, exponent: i32, termination: i32) -> Self {
        Session {
            topo,
            channel,
            state: CoderState::initial(topo, exponent),
            recon: vec![0.0; topo.spec.volume_len()],
            termination,
            done: false,
            pass_bits: Vec::new(),
        }
    }

    pub fn state(&self) -> &CoderState {
        &self.state
    }

    /// Current reconstruction of the (weighted) coefficients.
    pub fn reconstruction(&self) -> &[f64] {
        &self.recon
    }

    pub fn into_reconstruction(self) -> CoeffVolume {
        CoeffVolume {
            samples: self.recon,
            spec: self.topo.spec,
        }
    }

    pub fn bits_used(&self) -> u64 {
        self.channel.bits()
    }

    /// Bits spent in each completed pass.
    pub fn pass_bits(&self) -> &[u64] {
        &self.pass_bits
    }

    /// Threshold of the next pass.
    pub fn threshold(&self) -> f64 {
        2f64.powi(self.state.exponent - self.state.pass as i32)
    }

    pub fn step_pass(&mut self) -> PassOutcome {
        if self.done {
            return PassOutcome::Finished;
        }
        if self.state.exponent - (self.state.pass as i32) < self.termination {
            self.done = true;
            return PassOutcome::Finished;
        }
        let t = self.threshold();
        let before = self.channel.bits();
        let result = self.sorting_pass(t).and_then(|()| self.refinement_pass(t));
        match result {
            Ok(()) => {
                self.pass_bits.push(self.channel.bits() - before);
                self.state.pass += 1;
                PassOutcome::Completed
            }
            Err(Stop) => {
                self.done = true;
                PassOutcome::Exhausted
            }
        }
    }

    pub fn run(&mut self) {
        while self.step_pass() == PassOutcome::Completed {}
    }

    /// Significance test of a single coefficient; on success it joins the LSP.
    fn test_coeff(&mut self, i: u32, t: f64) -> Result<bool, Stop> {
        if !self.channel.decide(Query::Coeff(i), t)? {
            return Ok(false);
        }
        let negative = self.channel.decide(Query::Sign(i), t)?;
        self.recon[i as usize] = if negative { -1.5 * t } else { 1.5 * t };
        self.state.lsp.push(LspEntry {
            index: i,
            pass: self.state.pass,
        });
        Ok(true)
    }

    fn sorting_pass(&mut self, t: f64) -> Result<(), Stop> {
        self.scan_lip(t)?;
        self.scan_lis(t)
    }

    fn scan_lip(&mut self, t: f64) -> Result<(), Stop> {
        let old = std::mem::take(&mut self.state.lip);
        let mut kept = Vec::with_capacity(old.len());
        let mut stopped = None;
        for (k, &entry) in old.iter().enumerate() {
            match entry {
                LipEntry::Coeff(i) => match self.test_coeff(i, t) {
                    Ok(true) => {}
                    Ok(false) => kept.push(entry),
                    Err(_) => {
                        stopped = Some(k);
                        break;
                    }
                },
                LipEntry::Block(b) => match self.channel.decide(Query::Block(b), t) {
                    Ok(false) => kept.push(entry),
                    Ok(true) => {
                        // members are resolved individually; unresolved ones
                        // stay behind as coefficients if the budget runs out
                        let members = self.topo.block_members(b);
                        for (j, &m) in members.iter().enumerate() {
                            match self.test_coeff(m, t) {
                                Ok(true) => {}
                                Ok(false) => kept.push(LipEntry::Coeff(m)),
                                Err(_) => {
                                    kept.extend(members[j..].iter().map(|&r| LipEntry::Coeff(r)));
                                    stopped = Some(k + 1);
                                    break;
                                }
                            }
                        }
                        if stopped.is_some() {
                            break;
                        }
                    }
                    Err(_) => {
                        stopped = Some(k);
                        break;
                    }
                },
            }
        }
        match stopped {
            Some(k) => {
                kept.extend_from_slice(&old[k..]);
                self.state.lip = kept;
                Err(Stop)
            }
            None => {
                self.state.lip = kept;
                Ok(())
            }
        }
    }

    fn scan_lis(&mut self, t: f64) -> Result<(), Stop> {
        let mut lis: Vec<Option<(u32, EntryType)>> =
            std::mem::take(&mut self.state.lis).into_iter().map(Some).collect();
        let mut kids = Children::new();
        let mut k = 0;
        let mut result = Ok(());
        while k < lis.len() {
            let (node, kind) = lis[k].expect("scan head is live");
            self.topo.children_of(node, &mut kids);
            let temporal = self.topo.is_temporal_node(node);
            let r = match (kind, temporal) {
                (EntryType::TypeA, false) => self.spatial_type_a(node, &kids, t, &mut lis, k),
                (EntryType::TypeB, false) => self.type_b(node, &kids, t, &mut lis, k),
                (EntryType::TypeA, true) => self.temporal_type_a(node, &kids, t, &mut lis, k),
                (EntryType::TypeB, true) => self.type_b(node, &kids, t, &mut lis, k),
            };
            if r.is_err() {
                result = r;
                break;
            }
            k += 1;
        }
        self.state.lis = lis.into_iter().flatten().collect();
        result
    }

    fn requeue_or_drop(&self, node: u32, lis: &mut Vec<Option<(u32, EntryType)>>, k: usize) {
        lis[k] = None;
        if self.topo.has_grandchildren(node) {
            lis.push(Some((node, EntryType::TypeB)));
        }
    }

    fn spatial_type_a(
        &mut self,
        node: u32,
        kids: &Children,
        t: f64,
        lis: &mut Vec<Option<(u32, EntryType)>>,
        k: usize,
    ) -> Result<(), Stop> {
        if !self.channel.decide(Query::Desc(node), t)? {
            return Ok(());
        }
        self.code_offspring(kids, t)?;
        self.requeue_or_drop(node, lis, k);
        Ok(())
    }

    fn temporal_type_a(
        &mut self,
        node: u32,
        kids: &Children,
        t: f64,
        lis: &mut Vec<Option<(u32, EntryType)>>,
        k: usize,
    ) -> Result<(), Stop> {
        if !self.channel.decide(Query::Desc(node), t)? {
            return Ok(());
        }
        if self.channel.decide(Query::Offspring(node), t)? {
            self.code_offspring(kids, t)?;
        } else {
            self.state
                .lip
                .extend(kids.iter().step_by(4).map(|&b| LipEntry::Block(b)));
        }
        self.requeue_or_drop(node, lis, k);
        Ok(())
    }

    /// Per-coefficient significance of every child; insignificant ones join the LIP.
    fn code_offspring(&mut self, kids: &Children, t: f64) -> Result<(), Stop> {
        for &kid in kids {
            if !self.test_coeff(kid, t)? {
                self.state.lip.push(LipEntry::Coeff(kid));
            }
        }
        Ok(())
    }

    /// TYPE_B entry: if the grandchild set is significant, every child
    /// (spatial offspring, or the four roots each child block splits into)
    /// with descendants becomes a TYPE_A entry.
    fn type_b(
        &mut self,
        node: u32,
        kids: &Children,
        t: f64,
        lis: &mut Vec<Option<(u32, EntryType)>>,
        k: usize,
    ) -> Result<(), Stop> {
        if !self.channel.decide(Query::Grand(node), t)? {
            return Ok(());
        }
        lis[k] = None;
        for &kid in kids {
            if self.topo.has_children(kid) {
                lis.push(Some((kid, EntryType::TypeA)));
            }
        }
        Ok(())
    }

    fn refinement_pass(&mut self, t: f64) -> Result<(), Stop> {
        let pass = self.state.pass;
        for j in 0..self.state.lsp.len() {
            let entry = &self.state.lsp[j];
            if entry.pass >= pass {
                break;
            }
            let i = entry.index;
            let up = self.channel.decide(Query::Refine(i), t)?;
            let r = &mut self.recon[i as usize];
            let step = if up { 0.5 * t } else { -0.5 * t };
            *r += r.signum() * step;
        }
        Ok(())
    }
}

/// Output of [`encode_gop`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedGop {
    /// Initial threshold exponent; `None` for an empty GOP.
    pub exponent: Option<i32>,
    pub payload: Vec<u8>,
    pub bit_len: u64,
}

/// Encodes a weighted volume, stopping at `budget_bits` or after the pass at
/// threshold `2^termination`.
pub fn encode_gop(
    coeffs: &CoeffVolume,
    topo: &TreeTopology,
    budget_bits: Option<u64>,
    termination: i32,
) -> Result<EncodedGop, CoderError> {
    match Encoder::new(coeffs, topo, budget_bits, termination) {
        Ok(mut enc) => {
            enc.run();
            let exponent = Some(enc.state.exponent);
            let (payload, bit_len) = enc.finish();
            Ok(EncodedGop {
                exponent,
                payload,
                bit_len,
            })
        }
        Err(CoderError::EmptyGop) => Ok(EncodedGop {
            exponent: None,
            payload: Vec::new(),
            bit_len: 0,
        }),
        Err(e) => Err(e),
    }
}

/// Decodes the first `min(bit_len, budget_bits)` bits of a payload into a
/// weighted coefficient volume.
pub fn decode_gop(
    exponent: Option<i32>,
    payload: &[u8],
    bit_len: u64,
    topo: &TreeTopology,
    budget_bits: Option<u64>,
    termination: i32,
) -> CoeffVolume {
    let Some(exponent) = exponent else {
        return CoeffVolume::zeros(topo.spec);
    };
    let limit = budget_bits.map_or(bit_len, |b| b.min(bit_len));
    let mut dec = Decoder::new(topo, exponent, payload, limit, termination);
    dec.run();
    dec.into_reconstruction()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TreeKind;
    use crate::wavelet::DecompositionSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn topo(kind: TreeKind, gop: usize, w: usize, h: usize, t: u32, s: u32) -> TreeTopology {
        let spec = DecompositionSpec {
            gop_length: gop,
            width: w,
            height: h,
            temporal_levels: t,
            spatial_levels: s,
            ..DecompositionSpec::default_for(w, h)
        };
        TreeTopology::new(kind, spec).unwrap()
    }

    fn random_volume(topo: &TreeTopology, seed: u64) -> CoeffVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..topo.spec.volume_len())
            .map(|_| {
                let mag: f64 = rng.random_range(0.0..1.0f64).powi(4) * 900.0;
                if rng.random_bool(0.5) {
                    -mag
                } else {
                    mag
                }
            })
            .collect();
        CoeffVolume::from_samples(samples, topo.spec).unwrap()
    }

    #[test]
    fn initial_threshold_examples() {
        let spec = DecompositionSpec::lazy(2, 4, 4, 1, 1);
        let mut v = CoeffVolume::zeros(spec);
        assert_eq!(initial_threshold(&v), Err(CoderError::EmptyGop));
        for (max, n) in [
            (512.0, 9),
            (1000.0, 9),
            (1.0, 0),
            (-0.75, -1),
            (1023.999, 9),
            (1024.0, 10),
        ] {
            v.samples[5] = max;
            assert_eq!(initial_threshold(&v), Ok(n), "{max}");
        }
        assert_eq!(floor_log2(f64::MIN_POSITIVE / 4.0), -1024);
    }

    #[test]
    fn significance_examples() {
        let topo = topo(TreeKind::Ewspb, 2, 4, 4, 1, 1);
        let mut v = CoeffVolume::zeros(topo.spec);
        v.samples[0] = -700.0;
        let (dmax, lmax) = topo.descendant_maxima(&v.samples);
        let mut ch = EncodeChannel {
            coeffs: &v.samples,
            dmax,
            lmax,
            topo: &topo,
            writer: BitWriter::new(),
            budget: u64::MAX,
        };
        assert_eq!(ch.decide(Query::Coeff(0), 512.0), Ok(true));
        assert_eq!(ch.decide(Query::Sign(0), 512.0), Ok(true));
        // block {3, -1, 0, 2} against T = 4
        let mut v = CoeffVolume::zeros(topo.spec);
        let b = topo.index(1, 0, 0);
        for (m, x) in topo.block_members(b).into_iter().zip([3.0, -1.0, 0.0, 2.0]) {
            v.samples[m as usize] = x;
        }
        let (dmax, lmax) = topo.descendant_maxima(&v.samples);
        let mut ch = EncodeChannel {
            coeffs: &v.samples,
            dmax,
            lmax,
            topo: &topo,
            writer: BitWriter::new(),
            budget: u64::MAX,
        };
        assert_eq!(ch.decide(Query::Block(b), 4.0), Ok(false));
        assert_eq!(ch.decide(Query::Block(b), 2.0), Ok(true));
        // D of the zero subtree below the top-left root of frame 0 only holds the block
        assert_eq!(ch.decide(Query::Desc(0), 4.0), Ok(false));
        assert_eq!(ch.decide(Query::Desc(1), 0.5), Ok(false));
    }

    #[test]
    fn refinement_bit_examples() {
        let topo = topo(TreeKind::Ewspb, 2, 4, 4, 1, 1);
        let mut v = CoeffVolume::zeros(topo.spec);
        v.samples[0] = 9.0;
        v.samples[1] = -13.0;
        let mut ch = EncodeChannel {
            coeffs: &v.samples,
            dmax: vec![0.0; 32],
            lmax: vec![0.0; 32],
            topo: &topo,
            writer: BitWriter::new(),
            budget: u64::MAX,
        };
        assert_eq!(ch.decide(Query::Refine(0), 4.0), Ok(false));
        assert_eq!(ch.decide(Query::Refine(1), 4.0), Ok(true));
    }

    #[test]
    fn all_insignificant_first_pass_bits() {
        // one coefficient at 8 in a leaf, everything else zero: at T = 8 the LIP
        // roots emit 0s and every TYPE_A root emits one D bit
        let topo = topo(TreeKind::Ewspb, 2, 8, 8, 1, 1);
        let mut v = CoeffVolume::zeros(topo.spec);
        v.samples[topo.index(1, 7, 7) as usize] = 8.0;
        let mut enc = Encoder::new(&v, &topo, None, 3).unwrap();
        let roots = topo.root_indices().len() as u64;
        let lis = enc.state().lis.len() as u64;
        assert_eq!(enc.state().exponent, 3);
        enc.step_pass();
        assert!(enc.state().lsp.len() == 1);
        // LIP zeros for the roots come first
        let (bytes, _) = enc.finish();
        let mut r = BitReader::new(&bytes);
        for _ in 0..roots {
            assert!(!r.get_bit().unwrap());
        }
        assert!(lis > 0);
    }

    #[test]
    fn single_root_coefficient_goes_to_lsp() {
        let topo = topo(TreeKind::Ewspb, 2, 8, 8, 1, 1);
        let mut v = CoeffVolume::zeros(topo.spec);
        v.samples[1] = -5.0;
        let mut enc = Encoder::new(&v, &topo, None, 2).unwrap();
        enc.step_pass();
        let (bytes, _) = enc.finish();
        let mut r = BitReader::new(&bytes);
        assert!(!r.get_bit().unwrap()); // root 0
        assert!(r.get_bit().unwrap()); // root 1 significant
        assert!(r.get_bit().unwrap()); // negative
    }

    #[test]
    fn zero_volume_is_empty_marker() {
        let topo = topo(TreeKind::Ewspb, 4, 8, 8, 2, 1);
        let v = CoeffVolume::zeros(topo.spec);
        let e = encode_gop(&v, &topo, None, DEFAULT_TERMINATION_EXPONENT).unwrap();
        assert_eq!(e.exponent, None);
        assert_eq!(e.bit_len, 0);
        let d = decode_gop(None, &[], 0, &topo, None, DEFAULT_TERMINATION_EXPONENT);
        assert!(d.samples.iter().all(|&x| x == 0.0));
    }

    fn check_mirror(topo: &TreeTopology, v: &CoeffVolume, budget: Option<u64>) {
        let mut enc = Encoder::new(v, topo, budget, -4).unwrap();
        let mut states = vec![enc.state().clone()];
        let mut recons = vec![enc.reconstruction().to_vec()];
        while enc.step_pass() == PassOutcome::Completed {
            states.push(enc.state().clone());
            recons.push(enc.reconstruction().to_vec());
        }
        states.push(enc.state().clone());
        let pass_bits = enc.pass_bits().to_vec();
        let exponent = enc.state().exponent;
        let (bytes, bits) = enc.finish();
        let mut dec = Decoder::new(topo, exponent, &bytes, bits, -4);
        assert_eq!(dec.state(), &states[0]);
        let mut p = 1;
        while dec.step_pass() == PassOutcome::Completed {
            assert_eq!(dec.state(), &states[p], "pass {p}");
            assert_eq!(dec.reconstruction(), &recons[p][..]);
            let t = 2f64.powi(exponent - p as i32 + 1);
            for (c, r) in v.samples.iter().zip(dec.reconstruction()) {
                assert!((c - r).abs() <= t, "|{c} - {r}| > {t}");
            }
            p += 1;
        }
        assert_eq!(dec.state(), states.last().unwrap());
        assert_eq!(dec.pass_bits(), &pass_bits[..]);
        assert_eq!(dec.bits_used(), bits);
    }

    #[test]
    fn mirror_property_small_volumes() {
        for kind in [TreeKind::Ewspb, TreeKind::Asymmetric3D] {
            for seed in 0..6 {
                let t = topo(kind, 8, 8, 8, 3, 1);
                check_mirror(&t, &random_volume(&t, seed), None);
                let t = topo(kind, 8, 16, 16, 3, 2);
                check_mirror(&t, &random_volume(&t, seed), Some(1500 + seed * 977));
            }
        }
    }

    #[test]
    fn lists_are_disjoint() {
        let t = topo(TreeKind::Ewspb, 8, 16, 16, 3, 2);
        let v = random_volume(&t, 11);
        let mut enc = Encoder::new(&v, &t, None, -2).unwrap();
        while enc.step_pass() == PassOutcome::Completed {
            let s = enc.state();
            let mut seen = vec![0u8; t.spec.volume_len()];
            for e in &s.lip {
                match *e {
                    LipEntry::Coeff(i) => seen[i as usize] += 1,
                    LipEntry::Block(b) => t.block_members(b).iter().for_each(|&m| seen[m as usize] += 1),
                }
            }
            for e in &s.lsp {
                seen[e.index as usize] += 1;
                let n_at = s.exponent - e.pass as i32;
                assert!(v.samples[e.index as usize].abs() >= 2f64.powi(n_at));
            }
            assert!(seen.iter().all(|&c| c <= 1));
        }
    }

    #[test]
    fn unlimited_budget_is_near_lossless_on_integers() {
        let t = topo(TreeKind::Ewspb, 4, 8, 8, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples = (0..t.spec.volume_len())
            .map(|_| rng.random_range(-300i32..300) as f64)
            .collect();
        let v = CoeffVolume::from_samples(samples, t.spec).unwrap();
        let e = encode_gop(&v, &t, None, 0).unwrap();
        let d = decode_gop(e.exponent, &e.payload, e.bit_len, &t, None, 0);
        for (a, b) in v.samples.iter().zip(&d.samples) {
            assert!((a - b).abs() <= 1.0);
        }
    }

    #[test]
    fn longer_prefix_never_hurts_at_pass_boundaries() {
        let t = topo(TreeKind::Ewspb, 8, 16, 16, 3, 2);
        let v = random_volume(&t, 3);
        let mut enc = Encoder::new(&v, &t, None, -3).unwrap();
        let mut ends = vec![0u64];
        while enc.step_pass() == PassOutcome::Completed {
            ends.push(enc.bits_used());
        }
        let n = enc.state().exponent;
        let (bytes, bits) = enc.finish();
        let mse = |limit: u64| {
            let d = decode_gop(Some(n), &bytes, bits, &t, Some(limit), -3);
            v.samples
                .iter()
                .zip(&d.samples)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        };
        let curve: Vec<f64> = ends.iter().map(|&b| mse(b)).collect();
        assert!(curve.windows(2).all(|w| w[1] <= w[0]), "{curve:?}");
    }

    #[test]
    fn budget_is_respected_to_the_bit() {
        let t = topo(TreeKind::Ewspb, 8, 16, 16, 3, 2);
        let v = random_volume(&t, 9);
        for budget in [0, 1, 2, 3, 17, 1000, 4321] {
            let e = encode_gop(&v, &t, Some(budget), DEFAULT_TERMINATION_EXPONENT).unwrap();
            assert_eq!(e.bit_len, budget);
            let full = encode_gop(&v, &t, Some(budget + 500), DEFAULT_TERMINATION_EXPONENT).unwrap();
            // prefix property of the encoder output
            let mut a = BitReader::with_limit(&e.payload, e.bit_len);
            let mut b = BitReader::new(&full.payload);
            while let Ok(bit) = a.get_bit() {
                assert_eq!(Ok(bit), b.get_bit());
            }
            let d = decode_gop(
                e.exponent,
                &e.payload,
                e.bit_len,
                &t,
                None,
                DEFAULT_TERMINATION_EXPONENT,
            );
            assert_eq!(d.samples.len(), v.samples.len());
        }
    }
}
