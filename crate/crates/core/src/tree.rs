//! Parent/child topologies over a coefficient volume.
//!
//! Two trees are provided:
//!
//! * [`TreeKind::Ewspb`], the significance probability balancing tree. Inside
//!   a frame, coefficients follow the SPIHT spatial orientation tree. The
//!   top-left coefficient of every 2x2 group of the coarsest LL band has no
//!   spatial offspring; it instead parents the co-located 2x2 block of the LL
//!   band in each temporal child frame (temporal-domain block tree). The
//!   temporal fan-out comes from the frame count doubling at each finer
//!   temporal scale; blocks keep their spatial position.
//! * [`TreeKind::Asymmetric3D`], the baseline asymmetric orientation tree.
//!   Every coefficient of the coarsest LL band parents its co-located
//!   coefficient in each temporal child frame, in addition to its SPIHT
//!   spatial offspring, so temporal and spatial children share a tree layer.
//!
//! Both cover every coefficient of the volume exactly once.

use arrayvec::ArrayVec;

use crate::wavelet::{DecompositionSpec, WaveletError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    SpatialCoeff,
    /// A 2x2 group of coefficients addressed by its top-left corner.
    TemporalBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreeKind {
    Ewspb,
    Asymmetric3D,
}

impl TreeKind {
    pub fn code(self) -> u8 {
        match self {
            TreeKind::Ewspb => 0,
            TreeKind::Asymmetric3D => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(TreeKind::Ewspb),
            1 => Some(TreeKind::Asymmetric3D),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub frame: usize,
    pub row: usize,
    pub col: usize,
}

impl NodeRef {
    pub fn coeff(frame: usize, row: usize, col: usize) -> Self {
        NodeRef {
            kind: NodeKind::SpatialCoeff,
            frame,
            row,
            col,
        }
    }

    pub fn block(frame: usize, row: usize, col: usize) -> Self {
        debug_assert!(row % 2 == 0 && col % 2 == 0);
        NodeRef {
            kind: NodeKind::TemporalBlock,
            frame,
            row,
            col,
        }
    }
}

/// Coefficient-level children; at most two temporal child blocks.
pub(crate) type Children = ArrayVec<u32, 8>;

#[derive(Debug, Clone)]
pub struct TreeTopology {
    pub kind: TreeKind,
    pub spec: DecompositionSpec,
}

impl TreeTopology {
    pub fn new(kind: TreeKind, spec: DecompositionSpec) -> Result<Self, WaveletError> {
        spec.validate()?;
        if spec.volume_len() > u32::MAX as usize {
            return Err(WaveletError::InvalidDimensions("volume too large".into()));
        }
        Ok(TreeTopology { kind, spec })
    }

    #[inline]
    pub fn index(&self, frame: usize, row: usize, col: usize) -> u32 {
        ((frame * self.spec.height + row) * self.spec.width + col) as u32
    }

    #[inline]
    pub fn position(&self, idx: u32) -> (usize, usize, usize) {
        let idx = idx as usize;
        let (w, h) = (self.spec.width, self.spec.height);
        (idx / (w * h), (idx / w) % h, idx % w)
    }

    pub fn node(&self, idx: u32) -> NodeRef {
        let (f, r, c) = self.position(idx);
        NodeRef::coeff(f, r, c)
    }

    /// Coefficients of the coarsest LL band of the temporal low frames, in
    /// raster order of 2x2 groups, each group as top-left, top-right,
    /// bottom-left, bottom-right.
    pub fn roots(&self) -> Vec<NodeRef> {
        self.root_indices().into_iter().map(|i| self.node(i)).collect()
    }

    pub(crate) fn root_indices(&self) -> Vec<u32> {
        let (hl, wl) = (self.spec.ll_height(), self.spec.ll_width());
        let mut out = Vec::with_capacity(self.spec.low_frames() * hl * wl);
        for f in 0..self.spec.low_frames() {
            for r in (0..hl).step_by(2) {
                for c in (0..wl).step_by(2) {
                    out.extend(self.block_members(self.index(f, r, c)));
                }
            }
        }
        out
    }

    /// The four coefficients of the 2x2 block whose top-left is `idx`.
    #[inline]
    pub(crate) fn block_members(&self, idx: u32) -> [u32; 4] {
        let w = self.spec.width as u32;
        [idx, idx + 1, idx + w, idx + w + 1]
    }

    #[inline]
    fn in_ll(&self, r: usize, c: usize) -> bool {
        r < self.spec.ll_height() && c < self.spec.ll_width()
    }

    /// True for a temporal-domain block tree node of the EWSPB topology: an
    /// LL group's top-left coefficient in a frame that has temporal children.
    #[inline]
    pub(crate) fn is_temporal_node(&self, idx: u32) -> bool {
        if self.kind != TreeKind::Ewspb {
            return false;
        }
        let (f, r, c) = self.position(idx);
        self.in_ll(r, c) && r % 2 == 0 && c % 2 == 0 && !self.spec.temporal_child_frames(f).is_empty()
    }

    fn push_spatial_children(&self, f: usize, r: usize, c: usize, out: &mut Children) {
        let spec = &self.spec;
        if spec.spatial_levels == 0 {
            return;
        }
        let (hl, wl) = (spec.ll_height(), spec.ll_width());
        let (r0, c0);
        if r < hl && c < wl {
            let (dr, dc) = (r & 1, c & 1);
            if dr == 0 && dc == 0 {
                return;
            }
            r0 = (r & !1) + dr * hl;
            c0 = (c & !1) + dc * wl;
        } else {
            if 2 * r >= spec.height || 2 * c >= spec.width {
                return;
            }
            r0 = 2 * r;
            c0 = 2 * c;
        }
        out.extend(self.block_members(self.index(f, r0, c0)));
    }

    /// Coefficient-level children under this topology.
    pub(crate) fn children_of(&self, idx: u32, out: &mut Children) {
        out.clear();
        let (f, r, c) = self.position(idx);
        match self.kind {
            TreeKind::Ewspb => {
                if self.in_ll(r, c) && r % 2 == 0 && c % 2 == 0 {
                    for child in self.spec.temporal_child_frames(f) {
                        out.extend(self.block_members(self.index(child, r, c)));
                    }
                } else {
                    self.push_spatial_children(f, r, c, out);
                }
            }
            TreeKind::Asymmetric3D => {
                self.push_spatial_children(f, r, c, out);
                if self.in_ll(r, c) {
                    for child in self.spec.temporal_child_frames(f) {
                        out.push(self.index(child, r, c));
                    }
                }
            }
        }
    }

    #[inline]
    pub(crate) fn has_children(&self, idx: u32) -> bool {
        let (f, r, c) = self.position(idx);
        let spec = &self.spec;
        let spatial = if spec.spatial_levels == 0 {
            false
        } else if self.in_ll(r, c) {
            r % 2 == 1 || c % 2 == 1
        } else {
            2 * r < spec.height && 2 * c < spec.width
        };
        let temporal = self.in_ll(r, c) && !spec.temporal_child_frames(f).is_empty();
        match self.kind {
            TreeKind::Ewspb if self.in_ll(r, c) && r % 2 == 0 && c % 2 == 0 => temporal,
            TreeKind::Ewspb => spatial,
            TreeKind::Asymmetric3D => spatial || temporal,
        }
    }

    /// True when some child of `idx` has children of its own, i.e. the
    /// descendants-minus-offspring set is non-empty.
    pub(crate) fn has_grandchildren(&self, idx: u32) -> bool {
        let mut kids = Children::new();
        self.children_of(idx, &mut kids);
        kids.iter().any(|&k| self.has_children(k))
    }

    pub fn children(&self, node: NodeRef) -> Vec<NodeRef> {
        let mut kids = Children::new();
        self.children_of(self.index(node.frame, node.row, node.col), &mut kids);
        kids.into_iter().map(|i| self.node(i)).collect()
    }

    /// SPIHT offspring of a coefficient within its own frame.
    pub fn spatial_children(&self, node: NodeRef) -> Vec<NodeRef> {
        let mut kids = Children::new();
        self.push_spatial_children(node.frame, node.row, node.col, &mut kids);
        kids.into_iter().map(|i| self.node(i)).collect()
    }

    /// Child blocks of a temporal-domain block tree node. `node` may be the
    /// root coefficient itself or a block (whose top-left coefficient is the
    /// temporal root after splitting).
    pub fn temporal_child_blocks(&self, node: NodeRef) -> Vec<NodeRef> {
        let (r, c) = (node.row, node.col);
        if !self.in_ll(r, c) || r % 2 == 1 || c % 2 == 1 {
            return Vec::new();
        }
        self.spec
            .temporal_child_frames(node.frame)
            .map(|f| NodeRef::block(f, r, c))
            .collect()
    }

    /// Splits a block into its temporal root (top-left) and three spatial
    /// roots (top-right, bottom-left, bottom-right).
    pub fn split_block(&self, block: NodeRef) -> (NodeRef, [NodeRef; 3]) {
        let (f, r, c) = (block.frame, block.row, block.col);
        (
            NodeRef::coeff(f, r, c),
            [
                NodeRef::coeff(f, r, c + 1),
                NodeRef::coeff(f, r + 1, c),
                NodeRef::coeff(f, r + 1, c + 1),
            ],
        )
    }

    /// Children in the asymmetric 3-D orientation tree: SPIHT offspring,
    /// then co-located coefficients of the temporal child frames for nodes
    /// in the coarsest LL band.
    pub fn asym_children(&self, node: NodeRef) -> Vec<NodeRef> {
        let mut out = self.spatial_children(node);
        if self.in_ll(node.row, node.col) {
            out.extend(
                self.spec
                    .temporal_child_frames(node.frame)
                    .map(|f| NodeRef::coeff(f, node.row, node.col)),
            );
        }
        out
    }

    /// Breadth-first order of every coefficient starting from the roots.
    /// Children always come after their parent.
    pub fn traversal_order(&self) -> Vec<u32> {
        let mut order = self.root_indices();
        order.reserve(self.spec.volume_len() - order.len());
        let mut kids = Children::new();
        let mut head = 0;
        while head < order.len() {
            self.children_of(order[head], &mut kids);
            order.extend_from_slice(&kids);
            head += 1;
        }
        order
    }

    /// For every node, the largest magnitude among its descendants (`D`) and
    /// among its descendants excluding offspring (`L`). Zero for leaves.
    pub fn descendant_maxima(&self, magnitudes: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.descendant_maxima_with_order(magnitudes, &self.traversal_order())
    }

    pub(crate) fn descendant_maxima_with_order(&self, magnitudes: &[f64], order: &[u32]) -> (Vec<f64>, Vec<f64>) {
        let n = self.spec.volume_len();
        let mut dmax = vec![0.0f64; n];
        let mut lmax = vec![0.0f64; n];
        let mut kids = Children::new();
        for &idx in order.iter().rev() {
            self.children_of(idx, &mut kids);
            let (mut d, mut l) = (0.0f64, 0.0f64);
            for &k in &kids {
                let k = k as usize;
                d = d.max(magnitudes[k].abs()).max(dmax[k]);
                l = l.max(dmax[k]);
            }
            dmax[idx as usize] = d;
            lmax[idx as usize] = l;
        }
        (dmax, lmax)
    }
}
