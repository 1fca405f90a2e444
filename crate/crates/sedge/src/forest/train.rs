//! Recursive structured-tree training and the forest-level driver.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::split::{best_split, SampleFeatures};
use super::{
    apply_mapping, derive_edges, discretize, medoid_index, mix_seed, Forest, ForestParams,
    LeafData, Node, PairSampling, PairVector, SegPatch, StructTree,
};
use crate::channels::{self, ChannelParams, ChannelStack};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

const SALT_FEATURES: u64 = 0xFEA7;
const SALT_TREE: u64 = 0x7EE5;
const SALT_PATCHES: u64 = 0x9A7C;
const SALT_LEFT: u64 = 1;
const SALT_RIGHT: u64 = 2;

/// Candidate thresholds tested per feature during split search.
const N_THRESHOLDS: usize = 8;
/// Splits with gain below this are treated as zero gain and stop recursion.
const MIN_GAIN: f64 = 1e-12;

/// Feature-major (column-major) sample matrix; columns carry global feature
/// ids so trained splits index the full candidate-feature space.
#[derive(Debug, Clone)]
pub struct ColumnMatrix {
    n_samples: usize,
    feature_ids: Vec<u32>,
    cols: Vec<f32>,
}

impl ColumnMatrix {
    pub fn zeroed(feature_ids: Vec<u32>, n_samples: usize) -> Self {
        let cols = vec![0.0; feature_ids.len() * n_samples];
        ColumnMatrix {
            n_samples,
            feature_ids,
            cols,
        }
    }

    pub fn from_rows(rows: &[Vec<f32>], feature_ids: Vec<u32>) -> Self {
        let mut m = ColumnMatrix::zeroed(feature_ids, rows.len());
        for (i, row) in rows.iter().enumerate() {
            for (slot, &id) in m.feature_ids.clone().iter().enumerate() {
                m.set(i, slot, row[id as usize]);
            }
        }
        m
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn feature_ids(&self) -> &[u32] {
        &self.feature_ids
    }

    #[inline]
    pub fn set(&mut self, sample: usize, slot: usize, v: f32) {
        self.cols[slot * self.n_samples + sample] = v;
    }

    #[inline]
    pub fn value(&self, sample: usize, slot: usize) -> f32 {
        self.cols[slot * self.n_samples + sample]
    }

    /// Write one sample's feature row (in slot order) into the matrix.
    pub fn fill_row(&mut self, sample: usize, row: &[f32]) {
        assert_eq!(row.len(), self.feature_ids.len());
        for (slot, &v) in row.iter().enumerate() {
            self.set(sample, slot, v);
        }
    }
}

/// Node-local view of a sample subset; `feature` is a column slot.
struct NodeView<'a> {
    matrix: &'a ColumnMatrix,
    idx: &'a [u32],
}

impl SampleFeatures for NodeView<'_> {
    fn n_samples(&self) -> usize {
        self.idx.len()
    }

    fn value(&self, sample: usize, feature: u32) -> f32 {
        self.matrix
            .value(self.idx[sample] as usize, feature as usize)
    }
}

/// The feature subset assigned to one tree: `frac` of `total` candidate
/// features, drawn without replacement from the tree seed and sorted.
pub fn sample_feature_subset(total: usize, frac: f32, tree_seed: u64) -> Vec<u32> {
    let count = ((total as f64 * frac as f64).round() as usize).clamp(1, total);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(tree_seed, SALT_FEATURES));
    let mut ids: Vec<u32> = rand::seq::index::sample(&mut rng, total, count)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    ids.sort_unstable();
    ids
}

/// Train a single structured tree from materialized feature vectors.
///
/// The tree's feature subset (`frac_features` of the vector length) is
/// derived from `tree_seed`; recursion draws a fresh pair sampling per node,
/// discretizes the node's masks to proxy classes, and picks the best
/// randomized stump. Each leaf stores the medoid sample's mask and edges.
pub fn train_tree(
    data: &[(Vec<f32>, SegPatch)],
    params: &ForestParams,
    tree_seed: u64,
) -> StructTree {
    assert!(!data.is_empty(), "training data must be non-empty");
    let total = data[0].0.len();
    let ids = sample_feature_subset(total, params.frac_features, tree_seed);
    let rows: Vec<Vec<f32>> = data.iter().map(|(x, _)| x.clone()).collect();
    let segs: Vec<SegPatch> = data.iter().map(|(_, y)| y.clone()).collect();
    let matrix = ColumnMatrix::from_rows(&rows, ids);
    train_tree_on_columns(&matrix, &segs, params, tree_seed)
}

pub(crate) fn train_tree_on_columns(
    matrix: &ColumnMatrix,
    segs: &[SegPatch],
    params: &ForestParams,
    tree_seed: u64,
) -> StructTree {
    assert_eq!(matrix.n_samples(), segs.len());
    let mut grower = Grower {
        matrix,
        segs,
        params,
        slots: (0..matrix.n_features() as u32).collect(),
        nodes: Vec::new(),
        leaves: Vec::new(),
    };
    let mut idx: Vec<u32> = (0..segs.len() as u32).collect();
    grower.grow(&mut idx, 0, mix_seed(tree_seed, SALT_TREE));
    StructTree {
        nodes: grower.nodes,
        leaves: grower.leaves,
    }
}

struct Grower<'a> {
    matrix: &'a ColumnMatrix,
    segs: &'a [SegPatch],
    params: &'a ForestParams,
    slots: Vec<u32>,
    nodes: Vec<Node>,
    leaves: Vec<LeafData>,
}

impl Grower<'_> {
    fn grow(&mut self, idx: &mut [u32], depth: usize, seed: u64) -> u32 {
        let my = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { leaf: 0 });
        let p = self.params;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        if depth >= p.max_depth || idx.len() < 2 * p.min_samples {
            let leaf = self.make_leaf(idx, None, &mut rng);
            self.nodes[my as usize] = Node::Leaf { leaf };
            return my;
        }

        let phi = PairSampling::sample(p.d_out, p.m_pairs, &mut rng);
        let zs: Vec<PairVector> = idx
            .iter()
            .map(|&i| apply_mapping(&self.segs[i as usize], &phi))
            .collect();
        let labels = discretize(&zs, p.k_classes, p.discretizer, p.pca_dims, rng.gen());
        let first = labels[0];
        if labels.iter().all(|&l| l == first) {
            let leaf = self.make_leaf(idx, Some(&zs), &mut rng);
            self.nodes[my as usize] = Node::Leaf { leaf };
            return my;
        }

        let view = NodeView {
            matrix: self.matrix,
            idx,
        };
        let found = best_split(
            &view,
            &labels,
            p.k_classes,
            &self.slots,
            N_THRESHOLDS,
            p.min_samples,
            p.gain,
            &mut rng,
        );
        let Some((split, gain)) = found else {
            let leaf = self.make_leaf(idx, Some(&zs), &mut rng);
            self.nodes[my as usize] = Node::Leaf { leaf };
            return my;
        };
        if gain < MIN_GAIN {
            let leaf = self.make_leaf(idx, Some(&zs), &mut rng);
            self.nodes[my as usize] = Node::Leaf { leaf };
            return my;
        }

        // stable partition by x[slot] < tau
        let slot = split.feature as usize;
        let mut left: Vec<u32> = Vec::with_capacity(idx.len());
        let mut right: Vec<u32> = Vec::with_capacity(idx.len());
        for &i in idx.iter() {
            if self.matrix.value(i as usize, slot) < split.threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        debug_assert!(left.len() >= p.min_samples && right.len() >= p.min_samples);

        let mut params = split;
        params.feature = self.matrix.feature_ids()[slot];
        let left_id = self.grow(&mut left, depth + 1, mix_seed(seed, SALT_LEFT));
        let right_id = self.grow(&mut right, depth + 1, mix_seed(seed, SALT_RIGHT));
        self.nodes[my as usize] = Node::Split {
            params,
            left: left_id,
            right: right_id,
        };
        my
    }

    fn make_leaf(&mut self, idx: &[u32], zs: Option<&[PairVector]>, rng: &mut ChaCha8Rng) -> u32 {
        let medoid = match zs {
            Some(zs) => medoid_index(zs),
            None => {
                if idx.len() == 1 {
                    0
                } else {
                    let phi = PairSampling::sample(self.params.d_out, self.params.m_pairs, rng);
                    let zs: Vec<PairVector> = idx
                        .iter()
                        .map(|&i| apply_mapping(&self.segs[i as usize], &phi))
                        .collect();
                    medoid_index(&zs)
                }
            }
        };
        let seg = self.segs[idx[medoid] as usize].clone();
        let edge = derive_edges(&seg);
        self.leaves.push(LeafData {
            seg,
            edge,
            count: idx.len() as u32,
        });
        (self.leaves.len() - 1) as u32
    }
}

/// Per-tree training statistics, reported by the train command.
#[derive(Debug, Clone)]
pub struct TrainStats {
    pub per_tree: Vec<TreeStats>,
}

#[derive(Debug, Clone)]
pub struct TreeStats {
    pub depth: usize,
    pub n_leaves: usize,
    pub n_nodes: usize,
    pub n_samples: usize,
}

/// One sampled training patch: image index, center in padded coordinates,
/// and the canonicalized label window.
pub(crate) struct PatchSample {
    img: usize,
    center: (usize, usize),
    seg: SegPatch,
}

/// Sample one tree's training patches.
///
/// Candidate centers sit on the stride grid with the whole label window
/// inside the image; candidates are shuffled per (tree, image) seed, the
/// annotator is drawn uniformly per candidate, and acceptance honors the
/// per-class quotas (positive = label window has more than one segment).
/// Quotas that an image cannot fill are simply left short.
pub(crate) fn sample_tree_patches(
    dataset: &Dataset,
    params: &ForestParams,
    tree_seed: u64,
    pad: usize,
) -> Vec<PatchSample> {
    let n_imgs = dataset.len();
    let base = params.n_patches / n_imgs;
    let extra = params.n_patches % n_imgs;
    let half_out = params.d_out / 2;
    let mut samples = Vec::new();
    for (img_idx, gt) in dataset.gts.iter().enumerate() {
        let quota = base + usize::from(img_idx < extra);
        if quota == 0 {
            continue;
        }
        let (w, h) = (
            dataset.images[img_idx].width(),
            dataset.images[img_idx].height(),
        );
        if w < params.d_out || h < params.d_out {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(tree_seed, SALT_PATCHES ^ img_idx as u64));
        let mut candidates: Vec<(usize, usize)> = Vec::new();
        let mut r = half_out;
        while r + half_out <= h {
            let mut c = half_out;
            while c + half_out <= w {
                candidates.push((r, c));
                c += params.stride;
            }
            r += params.stride;
        }
        candidates.shuffle(&mut rng);

        let pos_target = (quota as f64 * params.positive_fraction as f64).round() as usize;
        let neg_target = quota - pos_target;
        let (mut pos, mut neg) = (0usize, 0usize);
        for (r, c) in candidates {
            if pos >= pos_target && neg >= neg_target {
                break;
            }
            let annotator = rng.gen_range(0..gt.n_annotators());
            let seg = gt.segmentations[annotator].window(r - half_out, c - half_out, params.d_out);
            let positive = seg.n_segments() > 1;
            if positive && pos < pos_target {
                pos += 1;
            } else if !positive && neg < neg_target {
                neg += 1;
            } else {
                continue;
            }
            samples.push(PatchSample {
                img: img_idx,
                center: (r + pad, c + pad),
                seg,
            });
        }
    }
    samples
}

/// Train the full forest (`2T` trees, concurrently) from a dataset.
pub fn train_forest(
    dataset: &Dataset,
    params: &ForestParams,
    channel_params: &ChannelParams,
) -> Result<(Forest, TrainStats)> {
    params.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let n_planes = dataset.images[0].n_planes();
    if dataset.images.iter().any(|img| img.n_planes() != n_planes) {
        return Err(Error::Mismatch(
            "training images disagree in plane count".into(),
        ));
    }
    if !params.d_in.is_multiple_of(channel_params.shrink) {
        return Err(Error::Config("d_in must be divisible by shrink".into()));
    }

    let pad = params.pad();
    let stacks: Vec<ChannelStack> = dataset
        .images
        .par_iter()
        .map(|img| {
            let padded = img.pad_symmetric(pad, pad, pad, pad);
            channels::compute_channels(&padded, channel_params)
        })
        .collect::<Result<_>>()?;
    let n_channels = stacks[0].n_channels();
    let feature_count = channels::feature_len(
        params.d_in,
        channel_params.shrink,
        channel_params.grid_cells,
        n_channels,
    );

    let results: Vec<Result<(StructTree, TreeStats)>> = (0..params.n_trees_trained())
        .into_par_iter()
        .map(|t| {
            let tree_seed = mix_seed(params.seed, SALT_TREE ^ ((t as u64) << 8));
            let ids = sample_feature_subset(feature_count, params.frac_features, tree_seed);
            let patches = sample_tree_patches(dataset, params, tree_seed, pad);
            if patches.is_empty() {
                return Err(Error::Config(
                    "no training patches could be sampled (images smaller than the label window?)"
                        .into(),
                ));
            }
            let mut matrix = ColumnMatrix::zeroed(ids, patches.len());
            let mut row = vec![0.0f32; matrix.n_features()];
            let ids = matrix.feature_ids().to_vec();
            for (i, p) in patches.iter().enumerate() {
                channels::extract_features_subset(
                    &stacks[p.img],
                    p.center,
                    params.d_in,
                    &ids,
                    &mut row,
                )?;
                matrix.fill_row(i, &row);
            }
            let segs: Vec<SegPatch> = patches.into_iter().map(|p| p.seg).collect();
            let tree = train_tree_on_columns(&matrix, &segs, params, tree_seed);
            let stats = TreeStats {
                depth: tree.depth(),
                n_leaves: tree.n_leaves(),
                n_nodes: tree.nodes.len(),
                n_samples: segs.len(),
            };
            Ok((tree, stats))
        })
        .collect();

    let mut trees = Vec::with_capacity(params.n_trees_trained());
    let mut per_tree = Vec::with_capacity(params.n_trees_trained());
    for r in results {
        let (tree, stats) = r?;
        trees.push(tree);
        per_tree.push(stats);
    }
    Ok((
        Forest {
            trees,
            params: params.clone(),
            channels: channel_params.clone(),
            n_input_planes: n_planes,
            n_channels,
            feature_count,
        },
        TrainStats { per_tree },
    ))
}
