//! Binary model files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic          "SEDF" (4 bytes)
//! version        u32 (currently 1)
//! channel block  shrink, n_orients, norm_radius, chn_smooth, sim_smooth,
//!                grid_cells                                   6 x u32
//! input block    n_input_planes, n_channels, feature_count    3 x u32
//! forest block   n_trees_eval, m_pairs, k_classes, pca_dims, max_depth,
//!                min_samples (6 x u32), frac_features f32, n_patches u64,
//!                positive_fraction f32, gain u8, discretizer u8,
//!                stride u32, d_in u32, d_out u32, seed u64
//! tree_count     u32
//! per tree:      node_count u32, node records
//!                  (is_leaf u8, feature u32, threshold f32, left u32,
//!                   right u32; a leaf stores its payload index in `left`),
//!                leaf_count u32, leaf payloads
//!                  (seg: d_out^2 x u8, edge: ceil(d_out^2/8) bytes,
//!                   count u32)
//! crc32          u32 over all preceding bytes (IEEE polynomial)
//! ```
//!
//! Writing is deterministic: save(load(save(m))) is byte-identical.

use std::path::Path;

use crate::channels::ChannelParams;
use crate::error::{Error, Result};
use crate::forest::{
    Discretizer, EdgePatch, Forest, ForestParams, GainKind, LeafData, Node, SegPatch, SplitParams,
    StructTree,
};

pub const MAGIC: &[u8; 4] = b"SEDF";
pub const VERSION: u32 = 1;

pub fn save_model(forest: &Forest, path: &Path) -> Result<()> {
    let bytes = to_bytes(forest);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Forest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn to_bytes(forest: &Forest) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);

    let c = &forest.channels;
    for v in [
        c.shrink,
        c.n_orients,
        c.norm_radius,
        c.chn_smooth,
        c.sim_smooth,
        c.grid_cells,
    ] {
        w.u32(v as u32);
    }
    w.u32(forest.n_input_planes as u32);
    w.u32(forest.n_channels as u32);
    w.u32(forest.feature_count as u32);

    let p = &forest.params;
    for v in [
        p.n_trees_eval,
        p.m_pairs,
        p.k_classes,
        p.pca_dims,
        p.max_depth,
        p.min_samples,
    ] {
        w.u32(v as u32);
    }
    w.f32(p.frac_features);
    w.u64(p.n_patches as u64);
    w.f32(p.positive_fraction);
    w.u8(match p.gain {
        GainKind::Gini => 0,
        GainKind::Entropy => 1,
    });
    w.u8(match p.discretizer {
        Discretizer::Pca => 0,
        Discretizer::Kmeans => 1,
    });
    w.u32(p.stride as u32);
    w.u32(p.d_in as u32);
    w.u32(p.d_out as u32);
    w.u64(p.seed);

    w.u32(forest.trees.len() as u32);
    for tree in &forest.trees {
        w.u32(tree.nodes.len() as u32);
        for node in &tree.nodes {
            match node {
                Node::Leaf { leaf } => {
                    w.u8(1);
                    w.u32(0);
                    w.f32(0.0);
                    w.u32(*leaf);
                    w.u32(0);
                }
                Node::Split {
                    params,
                    left,
                    right,
                } => {
                    w.u8(0);
                    w.u32(params.feature);
                    w.f32(params.threshold);
                    w.u32(*left);
                    w.u32(*right);
                }
            }
        }
        w.u32(tree.leaves.len() as u32);
        for leaf in &tree.leaves {
            w.0.extend_from_slice(leaf.seg.ids());
            w.0.extend_from_slice(leaf.edge.bytes());
            w.u32(leaf.count);
        }
    }

    let crc = crc32(&w.0);
    w.u32(crc);
    w.0
}

pub fn from_bytes(bytes: &[u8]) -> Result<Forest> {
    if bytes.len() < 8 {
        return Err(Error::Format("file too short".into()));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let computed = crc32(body);
    if stored != computed {
        return Err(Error::Format(format!(
            "crc mismatch: stored {stored:#010x}, computed {computed:#010x}"
        )));
    }
    let mut r = Reader { buf: body, at: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::Format("bad magic (not a SEDF model)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported model version {version}"
        )));
    }

    let channels = ChannelParams {
        shrink: r.u32()? as usize,
        n_orients: r.u32()? as usize,
        norm_radius: r.u32()? as usize,
        chn_smooth: r.u32()? as usize,
        sim_smooth: r.u32()? as usize,
        grid_cells: r.u32()? as usize,
    };
    let n_input_planes = r.u32()? as usize;
    let n_channels = r.u32()? as usize;
    let feature_count = r.u32()? as usize;

    let params = ForestParams {
        n_trees_eval: r.u32()? as usize,
        m_pairs: r.u32()? as usize,
        k_classes: r.u32()? as usize,
        pca_dims: r.u32()? as usize,
        max_depth: r.u32()? as usize,
        min_samples: r.u32()? as usize,
        frac_features: r.f32()?,
        n_patches: r.u64()? as usize,
        positive_fraction: r.f32()?,
        gain: match r.u8()? {
            0 => GainKind::Gini,
            1 => GainKind::Entropy,
            other => return Err(Error::Format(format!("unknown gain code {other}"))),
        },
        discretizer: match r.u8()? {
            0 => Discretizer::Pca,
            1 => Discretizer::Kmeans,
            other => return Err(Error::Format(format!("unknown discretizer code {other}"))),
        },
        stride: r.u32()? as usize,
        d_in: r.u32()? as usize,
        d_out: r.u32()? as usize,
        seed: r.u64()?,
    };

    let d_out = params.d_out;
    let seg_len = d_out * d_out;
    let edge_len = seg_len.div_ceil(8);
    let tree_count = r.u32()? as usize;
    let mut trees = Vec::with_capacity(tree_count);
    for _ in 0..tree_count {
        let node_count = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            let is_leaf = r.u8()?;
            let feature = r.u32()?;
            let threshold = r.f32()?;
            let left = r.u32()?;
            let right = r.u32()?;
            nodes.push(if is_leaf == 1 {
                Node::Leaf { leaf: left }
            } else {
                Node::Split {
                    params: SplitParams { feature, threshold },
                    left,
                    right,
                }
            });
        }
        let leaf_count = r.u32()? as usize;
        let mut leaves = Vec::with_capacity(leaf_count);
        for _ in 0..leaf_count {
            let seg_bytes = r.take(seg_len)?;
            let seg = SegPatch::from_ids(d_out, seg_bytes);
            let edge = EdgePatch::from_bytes(d_out, r.take(edge_len)?.to_vec())?;
            let count = r.u32()?;
            leaves.push(LeafData { seg, edge, count });
        }
        let tree = StructTree { nodes, leaves };
        validate_tree(&tree)?;
        trees.push(tree);
    }
    if r.at != r.buf.len() {
        return Err(Error::Format("trailing bytes after tree data".into()));
    }

    Ok(Forest {
        trees,
        params,
        channels,
        n_input_planes,
        n_channels,
        feature_count,
    })
}

fn validate_tree(tree: &StructTree) -> Result<()> {
    let n = tree.nodes.len();
    let mut leaf_refs = 0usize;
    for node in &tree.nodes {
        match node {
            Node::Leaf { leaf } => {
                if *leaf as usize >= tree.leaves.len() {
                    return Err(Error::Format("leaf index out of range".into()));
                }
                leaf_refs += 1;
            }
            Node::Split { left, right, .. } => {
                if *left as usize >= n || *right as usize >= n {
                    return Err(Error::Format("child index out of range".into()));
                }
            }
        }
    }
    if leaf_refs != tree.leaves.len() || tree.leaves.len() != n - tree.leaves.len() + 1 {
        return Err(Error::Format("inconsistent tree structure".into()));
    }
    Ok(())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.buf.len() {
            return Err(Error::Format("unexpected end of file".into()));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// CRC-32 (IEEE 802.3, polynomial 0xEDB88320), table-driven.
pub fn crc32(bytes: &[u8]) -> u32 {
    static TABLE: std::sync::OnceLock<[u32; 256]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [0u32; 256];
        for (i, e) in t.iter_mut().enumerate() {
            let mut v = i as u32;
            for _ in 0..8 {
                v = if v & 1 == 1 {
                    0xEDB8_8320 ^ (v >> 1)
                } else {
                    v >> 1
                };
            }
            *e = v;
        }
        t
    });
    let mut crc = !0u32;
    for &b in bytes {
        crc = table[((crc ^ b as u32) & 0xFF) as usize] ^ (crc >> 8);
    }
    !crc
}
