//! Structured random decision trees over segmentation-mask labels.
//!
//! A tree routes a feature vector to a leaf with plain stump splits
//! `x[k] < tau`. What makes it *structured* is the label side: every
//! training label is a small segmentation mask, and node splitting works by
//! mapping masks to binary pair-equality vectors, discretizing those to a
//! handful of proxy classes, and running ordinary information gain on the
//! proxy classes. Each leaf stores one representative mask (the medoid of
//! the leaf's samples) together with its derived binary edge map.

mod discretize;
mod split;
mod train;

pub use discretize::{discretize, kmeans, pca_top_dirs, project, KmeansResult, Pca};
pub use split::{best_split, impurity, info_gain, threshold_candidates, SampleFeatures};
pub use train::{sample_feature_subset, train_forest, train_tree, ColumnMatrix, TrainStats};

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::ChannelParams;
use crate::error::{Error, Result};

/// A `side x side` segmentation mask with ids canonicalized to first-use
/// raster order starting at 0; two masks equal up to an id permutation have
/// identical canonical bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegPatch {
    side: usize,
    ids: Vec<u8>,
}

impl SegPatch {
    /// Build from raw ids (any unsigned values), canonicalizing. Panics if
    /// the patch has more than 256 distinct segments.
    pub fn from_ids<T: Copy + Into<u32>>(side: usize, raw: &[T]) -> Self {
        assert_eq!(raw.len(), side * side, "segmentation patch size mismatch");
        let mut map: HashMap<u32, u8> = HashMap::new();
        let mut ids = Vec::with_capacity(raw.len());
        for &v in raw {
            let v = v.into();
            let next = map.len();
            let id = *map.entry(v).or_insert_with(|| {
                assert!(next < 256, "segmentation patch with more than 256 segments");
                next as u8
            });
            ids.push(id);
        }
        SegPatch { side, ids }
    }

    /// Constant single-segment patch.
    pub fn uniform(side: usize) -> Self {
        SegPatch {
            side,
            ids: vec![0; side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn ids(&self) -> &[u8] {
        &self.ids
    }

    #[inline]
    pub fn id(&self, r: usize, c: usize) -> u8 {
        self.ids[r * self.side + c]
    }

    pub fn n_segments(&self) -> usize {
        self.ids.iter().copied().max().map_or(0, |m| m as usize + 1)
    }
}

/// Binary edge map of a patch, bit-packed row-major (LSB-first within each
/// byte). All-zero iff the source mask has a single segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgePatch {
    side: usize,
    bits: Vec<u8>,
}

impl EdgePatch {
    pub fn empty(side: usize) -> Self {
        EdgePatch {
            side,
            bits: vec![0; (side * side).div_ceil(8)],
        }
    }

    pub fn from_bytes(side: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != (side * side).div_ceil(8) {
            return Err(Error::Format("edge patch bitmask has wrong length".into()));
        }
        Ok(EdgePatch { side, bits })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        let j = r * self.side + c;
        self.bits[j / 8] >> (j % 8) & 1 == 1
    }

    fn set(&mut self, r: usize, c: usize) {
        let j = r * self.side + c;
        self.bits[j / 8] |= 1 << (j % 8);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }
}

/// Edge map of a segmentation mask: a pixel is an edge iff its id differs
/// from its left or upper neighbor (inside the patch), giving 1-pixel-wide
/// edges along segment boundaries.
pub fn derive_edges(y: &SegPatch) -> EdgePatch {
    let side = y.side();
    let mut e = EdgePatch::empty(side);
    for r in 0..side {
        for c in 0..side {
            let id = y.id(r, c);
            if (c > 0 && y.id(r, c - 1) != id) || (r > 0 && y.id(r - 1, c) != id) {
                e.set(r, c);
            }
        }
    }
    e
}

/// The `m` sampled pixel-index pairs of a reduced pair-equality mapping.
#[derive(Debug, Clone)]
pub struct PairSampling {
    side: usize,
    pairs: Vec<(u16, u16)>,
}

impl PairSampling {
    /// Draw `m` distinct unordered pairs `(j1, j2)`, `j1 != j2`, without
    /// replacement from all pairs of patch pixel indices. Asking for at
    /// least the total pair count yields the full mapping.
    pub fn sample(side: usize, m: usize, rng: &mut impl Rng) -> Self {
        let n = side * side;
        let total = n * (n - 1) / 2;
        if m >= total {
            let mut pairs = Vec::with_capacity(total);
            for a in 0..n as u16 {
                for b in a + 1..n as u16 {
                    pairs.push((a, b));
                }
            }
            return PairSampling { side, pairs };
        }
        let mut seen = std::collections::HashSet::with_capacity(m * 2);
        let mut pairs = Vec::with_capacity(m);
        while pairs.len() < m {
            let a = rng.gen_range(0..n) as u16;
            let b = rng.gen_range(0..n) as u16;
            if a == b {
                continue;
            }
            let pair = (a.min(b), a.max(b));
            if seen.insert(pair) {
                pairs.push(pair);
            }
        }
        PairSampling { side, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pairs(&self) -> &[(u16, u16)] {
        &self.pairs
    }
}

/// Bit-packed binary pair-equality vector `z`; bit `t` is set iff the two
/// pixels of pair `t` share a segment. Invariant under any permutation of
/// the mask's segment ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairVector {
    len: usize,
    words: Vec<u64>,
}

impl PairVector {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, t: usize) -> bool {
        debug_assert!(t < self.len);
        self.words[t / 64] >> (t % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Visit the index of every set bit in ascending order.
    pub fn for_each_set(&self, mut f: impl FnMut(usize)) {
        for (wi, &w) in self.words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                f(wi * 64 + b);
                w &= w - 1;
            }
        }
    }
}

/// Apply a pair sampling to a mask: bit `t = [y(j1_t) == y(j2_t)]`.
pub fn apply_mapping(y: &SegPatch, phi: &PairSampling) -> PairVector {
    debug_assert_eq!(y.side(), phi.side());
    let len = phi.pairs.len();
    let mut words = vec![0u64; len.div_ceil(64)];
    for (t, &(a, b)) in phi.pairs.iter().enumerate() {
        if y.ids[a as usize] == y.ids[b as usize] {
            words[t / 64] |= 1 << (t % 64);
        }
    }
    PairVector { len, words }
}

/// Index of the medoid: the element minimizing the summed squared distance
/// to all others, computed in `O(n*m)` via the mean-reduction identity
/// `argmin_k sum_j (z_kj - zbar_j)^2`. Ties go to the lowest index; the
/// score is kept in integers (scaled by `n`) so ties break exactly as in
/// the all-pairs formulation.
pub fn medoid_index(zs: &[PairVector]) -> usize {
    assert!(!zs.is_empty(), "medoid of an empty set");
    if zs.len() == 1 {
        return 0;
    }
    let m = zs[0].len();
    let n = zs.len() as i64;
    let mut col_sums = vec![0i64; m];
    for z in zs {
        z.for_each_set(|j| col_sums[j] += 1);
    }
    let mut best = 0usize;
    let mut best_score = i64::MAX;
    for (i, z) in zs.iter().enumerate() {
        // n * sum_j (z_j - mean_j)^2 = n*popcount - 2*sum_{set j} S_j + const
        let mut dot = 0i64;
        z.for_each_set(|j| dot += col_sums[j]);
        let score = n * z.count_ones() as i64 - 2 * dot;
        if score < best_score {
            best_score = score;
            best = i;
        }
    }
    best
}

/// Split-impurity flavor used for information gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainKind {
    Gini,
    Entropy,
}

/// How node labels are reduced to discrete proxy classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discretizer {
    Pca,
    Kmeans,
}

/// Stump split parameters: route left iff `x[feature] < threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams {
    pub feature: u32,
    pub threshold: f32,
}

/// Forest training/inference parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    /// Trees evaluated per location (`T`); `2T` trees are trained.
    pub n_trees_eval: usize,
    /// Pair-equality dimensions sampled per node.
    pub m_pairs: usize,
    /// Discrete proxy classes per node.
    pub k_classes: usize,
    /// PCA dimensions retained for k-means discretization (at most 5).
    pub pca_dims: usize,
    pub max_depth: usize,
    /// Minimum training samples per leaf.
    pub min_samples: usize,
    /// Fraction of all candidate features assigned to each tree.
    pub frac_features: f32,
    /// Training patches sampled per tree.
    pub n_patches: usize,
    /// Fraction of sampled patches whose label window has >1 segment.
    pub positive_fraction: f32,
    pub gain: GainKind,
    pub discretizer: Discretizer,
    /// Patch-grid stride at detection time.
    pub stride: usize,
    /// Input patch side (feature window).
    pub d_in: usize,
    /// Label patch side (predicted mask window).
    pub d_out: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees_eval: 4,
            m_pairs: 256,
            k_classes: 2,
            pca_dims: 5,
            max_depth: 64,
            min_samples: 8,
            frac_features: 0.25,
            n_patches: 1_000_000,
            positive_fraction: 0.5,
            gain: GainKind::Gini,
            discretizer: Discretizer::Pca,
            stride: 2,
            d_in: 32,
            d_out: 16,
            seed: 1,
        }
    }
}

impl ForestParams {
    pub fn n_trees_trained(&self) -> usize {
        2 * self.n_trees_eval
    }

    /// Reflect padding applied around images before channel computation so
    /// that every original pixel receives full patch-grid coverage (and with
    /// it the full `(d_out/stride)^2 * T` votes).
    pub fn pad(&self) -> usize {
        (self.d_in + self.d_out) / 2
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.into()));
        if self.n_trees_eval == 0 {
            return fail("n_trees_eval must be >= 1");
        }
        if self.m_pairs == 0 {
            return fail("m_pairs must be >= 1");
        }
        if self.k_classes < 2 || self.k_classes > 8 {
            return fail("k_classes must be in 2..=8");
        }
        if self.discretizer == Discretizer::Pca && !self.k_classes.is_power_of_two() {
            return fail("pca discretizer requires k_classes to be a power of two");
        }
        if self.pca_dims == 0 || self.pca_dims > 5 {
            return fail("pca_dims must be in 1..=5");
        }
        if self.min_samples == 0 {
            return fail("min_samples must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.frac_features) || self.frac_features <= 0.0 {
            return fail("frac_features must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.positive_fraction) {
            return fail("positive_fraction must be in [0, 1]");
        }
        if self.stride == 0 {
            return fail("stride must be >= 1");
        }
        if self.d_out == 0 || self.d_out > self.d_in {
            return fail("d_out must be in 1..=d_in");
        }
        if !self.d_in.is_multiple_of(2) || !self.d_out.is_multiple_of(2) {
            return fail("d_in and d_out must be even");
        }
        Ok(())
    }
}

/// Anything a tree can read split features from: a materialized vector or a
/// lazy per-patch view.
pub trait FeatureSource {
    fn feature_len(&self) -> usize;
    fn feature(&self, k: usize) -> f32;
}

impl FeatureSource for [f32] {
    fn feature_len(&self) -> usize {
        self.len()
    }

    fn feature(&self, k: usize) -> f32 {
        self[k]
    }
}

impl FeatureSource for Vec<f32> {
    fn feature_len(&self) -> usize {
        self.len()
    }

    fn feature(&self, k: usize) -> f32 {
        self[k]
    }
}

/// Tree node: either a stump split or a reference into the leaf array.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        params: SplitParams,
        left: u32,
        right: u32,
    },
    Leaf {
        leaf: u32,
    },
}

/// Leaf payload: representative mask, its edge map, and the number of
/// training samples that reached the leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafData {
    pub seg: SegPatch,
    pub edge: EdgePatch,
    pub count: u32,
}

/// One trained structured decision tree. Nodes are stored in preorder; node
/// 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct StructTree {
    pub nodes: Vec<Node>,
    pub leaves: Vec<LeafData>,
}

impl StructTree {
    /// Route `x` to its leaf: `x[k] < tau` goes left.
    pub fn predict<'a, F: FeatureSource + ?Sized>(&'a self, x: &F) -> Result<&'a LeafData> {
        let len = x.feature_len();
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { leaf } => return Ok(&self.leaves[*leaf as usize]),
                Node::Split {
                    params,
                    left,
                    right,
                } => {
                    if params.feature as usize >= len {
                        return Err(Error::Mismatch(format!(
                            "feature vector has {} entries but the tree indexes feature {}",
                            len, params.feature
                        )));
                    }
                    at = if x.feature(params.feature as usize) < params.threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.len() - self.leaves.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Maximum root-to-leaf edge count.
    pub fn depth(&self) -> usize {
        fn walk(tree: &StructTree, at: usize) -> usize {
            match &tree.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(tree, *left as usize).max(walk(tree, *right as usize))
                }
            }
        }
        walk(self, 0)
    }
}

/// A trained forest plus everything needed to reproduce its features.
#[derive(Debug, Clone)]
pub struct Forest {
    pub trees: Vec<StructTree>,
    pub params: ForestParams,
    pub channels: ChannelParams,
    /// Input planes the model was trained on (3 for RGB).
    pub n_input_planes: usize,
    /// Channel count implied by the input planes.
    pub n_channels: usize,
    /// Candidate-feature vector length at training time.
    pub feature_count: usize,
}

/// Cheap deterministic seed derivation (splitmix64 over seed xor salt).
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
