//! Dense structured edge inference.
//!
//! Detection slides a `d_in x d_in` patch over the padded image with a
//! small stride; at every position an alternating ("checkerboard") half of
//! the trained trees predicts a `d_out x d_out` edge map, and all
//! overlapping predictions are averaged per pixel. Under default settings
//! every pixel collects exactly `(d_out/stride)^2 * T = 64T` votes. Leaf
//! masks can be sharpened against local color before voting, the detector
//! can be run at three scales and averaged, and finished maps are thinned
//! with orientation-aware non-maximal suppression.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{self, triangle_blur, PatchFeatures};
use crate::error::{Error, Result};
use crate::forest::{derive_edges, Forest, SegPatch};
use crate::plane::{FloatPlane, Image};

/// Per-pixel edge probability in `[0, 1]` at input resolution.
pub type EdgeProbMap = FloatPlane;

/// Which trees vote at a grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreePattern {
    /// Alternate disjoint halves of the `2T` trees on grid parity; adjacent
    /// cells share no tree.
    Checkerboard,
    /// Always evaluate the first `T` trees (exposed for experimentation).
    Uniform,
}

/// Runtime detection options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectOptions {
    pub sharpen_steps: usize,
    pub multiscale: bool,
    pub stride: usize,
    /// Trees evaluated per grid position (`T`); the model must hold `2T`.
    pub n_trees_eval: usize,
    pub tree_pattern: TreePattern,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            sharpen_steps: 2,
            multiscale: false,
            stride: 2,
            n_trees_eval: 4,
            tree_pattern: TreePattern::Checkerboard,
        }
    }
}

/// Grid rows per parallel work band. Fixed (not thread-count dependent) so
/// the ordered band reduction gives byte-identical output on any pool size.
const BAND_GRID_ROWS: usize = 8;

/// Whether tree `t` (of the `2T` trained trees) votes at grid cell
/// `(gx, gy)` under the given pattern.
pub fn tree_votes_at(
    pattern: TreePattern,
    gx: usize,
    gy: usize,
    t: usize,
    n_trees_eval: usize,
) -> bool {
    match pattern {
        TreePattern::Checkerboard => (gx + gy + t).is_multiple_of(2),
        TreePattern::Uniform => t < n_trees_eval,
    }
}

struct Band {
    row0: usize,
    rows: usize,
    width: usize,
    acc: Vec<f32>,
    votes: Vec<u32>,
}

impl Band {
    fn add_edges(&mut self, edge: &crate::forest::EdgePatch, label_r: usize, label_c: usize) {
        let side = edge.side();
        for r in 0..side {
            let dst = (label_r + r - self.row0) * self.width + label_c;
            for c in 0..side {
                if edge.get(r, c) {
                    self.acc[dst + c] += 1.0;
                }
            }
        }
    }

    fn add_votes(&mut self, label_r: usize, label_c: usize, side: usize, n: u32) {
        for r in 0..side {
            let dst = (label_r + r - self.row0) * self.width + label_c;
            for v in &mut self.votes[dst..dst + side] {
                *v += n;
            }
        }
    }
}

/// Run single- or multi-scale detection according to `opts.multiscale`.
pub fn run(img: &Image, forest: &Forest, opts: &DetectOptions) -> Result<EdgeProbMap> {
    if opts.multiscale {
        multiscale_detect(img, forest, opts)
    } else {
        detect(img, forest, opts)
    }
}

/// Single-scale structured edge detection.
pub fn detect(img: &Image, forest: &Forest, opts: &DetectOptions) -> Result<EdgeProbMap> {
    Ok(detect_with_votes(img, forest, opts)?.0)
}

/// Detection that also reports the per-pixel vote count (input resolution,
/// row-major).
pub fn detect_with_votes(
    img: &Image,
    forest: &Forest,
    opts: &DetectOptions,
) -> Result<(EdgeProbMap, Vec<u32>)> {
    validate(img, forest, opts)?;
    let p = &forest.params;
    let (w, h) = (img.width(), img.height());
    let pad = p.pad();

    // align padded dims so channel downsampling adds no pad of its own
    let align = if forest.channels.shrink.is_multiple_of(2) {
        forest.channels.shrink
    } else {
        2 * forest.channels.shrink
    };
    let extra_r = (align - (w + 2 * pad) % align) % align;
    let extra_b = (align - (h + 2 * pad) % align) % align;
    let padded = img.pad_symmetric(pad, pad + extra_b, pad, pad + extra_r);
    let (wp, hp) = (padded.width(), padded.height());

    let cs = channels::compute_channels(&padded, &forest.channels)?;
    if cs.n_channels() != forest.n_channels {
        return Err(Error::Mismatch(format!(
            "image yields {} channels but the model was trained with {}",
            cs.n_channels(),
            forest.n_channels
        )));
    }
    let sharpen_planes: Vec<FloatPlane> = if opts.sharpen_steps > 0 {
        let colors = channels::color_planes(&padded)?;
        let keep = colors.len().min(3);
        colors.into_iter().take(keep).collect()
    } else {
        Vec::new()
    };

    let d_in = p.d_in;
    let d_out = p.d_out;
    let label_off = (d_in - d_out) / 2;
    let n_gx = (wp - d_in) / opts.stride + 1;
    let n_gy = (hp - d_in) / opts.stride + 1;
    let n_total = 2 * opts.n_trees_eval;

    let band_starts: Vec<usize> = (0..n_gy).step_by(BAND_GRID_ROWS).collect();
    let bands: Vec<Result<Band>> = band_starts
        .par_iter()
        .map(|&gy0| {
            let gy1 = (gy0 + BAND_GRID_ROWS).min(n_gy);
            let row0 = gy0 * opts.stride + label_off;
            let rows = (gy1 - 1 - gy0) * opts.stride + d_out;
            let mut band = Band {
                row0,
                rows,
                width: wp,
                acc: vec![0.0; rows * wp],
                votes: vec![0; rows * wp],
            };
            for gy in gy0..gy1 {
                for gx in 0..n_gx {
                    let tl = (gy * opts.stride, gx * opts.stride);
                    let center = (tl.0 + d_in / 2, tl.1 + d_in / 2);
                    let view = PatchFeatures::new(&cs, center, d_in)?;
                    let label_r = tl.0 + label_off;
                    let label_c = tl.1 + label_off;
                    let mut n_voting = 0u32;
                    for t in 0..n_total {
                        if !tree_votes_at(opts.tree_pattern, gx, gy, t, opts.n_trees_eval) {
                            continue;
                        }
                        n_voting += 1;
                        let leaf = forest.trees[t].predict(&view)?;
                        if opts.sharpen_steps == 0 {
                            band.add_edges(&leaf.edge, label_r, label_c);
                        } else {
                            let colors =
                                ColorPatch::from_planes(&sharpen_planes, label_r, label_c, d_out);
                            let seg = sharpen(&colors, &leaf.seg, opts.sharpen_steps);
                            band.add_edges(&derive_edges(&seg), label_r, label_c);
                        }
                    }
                    band.add_votes(label_r, label_c, d_out, n_voting);
                }
            }
            Ok(band)
        })
        .collect();

    let mut acc = vec![0.0f32; wp * hp];
    let mut votes = vec![0u32; wp * hp];
    for band in bands {
        let band = band?;
        for r in 0..band.rows {
            let src = r * band.width;
            let dst = (band.row0 + r) * wp;
            for c in 0..wp {
                acc[dst + c] += band.acc[src + c];
                votes[dst + c] += band.votes[src + c];
            }
        }
    }

    let mut out = FloatPlane::new(w, h);
    let mut out_votes = vec![0u32; w * h];
    for r in 0..h {
        for c in 0..w {
            let j = (r + pad) * wp + (c + pad);
            let v = votes[j];
            out_votes[r * w + c] = v;
            if v > 0 {
                out.set(r, c, (acc[j] / v as f32).clamp(0.0, 1.0));
            }
        }
    }
    Ok((out, out_votes))
}

fn validate(img: &Image, forest: &Forest, opts: &DetectOptions) -> Result<()> {
    if img.n_planes() != forest.n_input_planes {
        return Err(Error::Mismatch(format!(
            "model expects {} input planes, image has {}",
            forest.n_input_planes,
            img.n_planes()
        )));
    }
    if 2 * opts.n_trees_eval > forest.trees.len() {
        return Err(Error::Mismatch(format!(
            "options ask for {} evaluation trees but the model holds {} trained trees",
            opts.n_trees_eval,
            forest.trees.len()
        )));
    }
    if opts.stride == 0 {
        return Err(Error::Config("stride must be >= 1".into()));
    }
    Ok(())
}

/// Color values over one `side x side` label window, used by sharpening.
#[derive(Debug, Clone)]
pub struct ColorPatch {
    side: usize,
    planes: Vec<Vec<f32>>,
}

impl ColorPatch {
    pub fn from_planes(planes: &[FloatPlane], r0: usize, c0: usize, side: usize) -> Self {
        let planes = planes
            .iter()
            .map(|p| {
                let mut v = Vec::with_capacity(side * side);
                for r in 0..side {
                    for c in 0..side {
                        v.push(p.get(r0 + r, c0 + c));
                    }
                }
                v
            })
            .collect();
        ColorPatch { side, planes }
    }

    pub fn from_values(side: usize, planes: Vec<Vec<f32>>) -> Self {
        assert!(planes.iter().all(|p| p.len() == side * side));
        ColorPatch { side, planes }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn n_planes(&self) -> usize {
        self.planes.len()
    }

    #[inline]
    pub fn value(&self, plane: usize, r: usize, c: usize) -> f32 {
        self.planes[plane][r * self.side + c]
    }
}

/// Per-segment mean colors of an assignment, flattened as
/// `means[seg * n_planes + plane]`. Segments without pixels get zero means.
pub fn segment_means(colors: &ColorPatch, ids: &[u8]) -> Vec<f64> {
    let side = colors.side();
    let n_planes = colors.n_planes();
    let n_seg = ids.iter().copied().max().unwrap_or(0) as usize + 1;
    let mut sums = vec![0.0f64; n_seg * n_planes];
    let mut counts = vec![0usize; n_seg];
    for r in 0..side {
        for c in 0..side {
            let s = ids[r * side + c] as usize;
            counts[s] += 1;
            for p in 0..n_planes {
                sums[s * n_planes + p] += colors.value(p, r, c) as f64;
            }
        }
    }
    for s in 0..n_seg {
        if counts[s] > 0 {
            for p in 0..n_planes {
                sums[s * n_planes + p] /= counts[s] as f64;
            }
        }
    }
    sums
}

/// One synchronous reassignment pass against fixed per-segment means: every
/// pixel moves to the 4-neighborhood-adjacent segment (including its own)
/// with strictly smaller distance to its color; ties keep the pixel where
/// it is.
pub fn sharpen_pass(colors: &ColorPatch, ids: &[u8], means: &[f64]) -> Vec<u8> {
    let side = colors.side();
    let n_planes = colors.n_planes();
    let dist = |s: usize, r: usize, c: usize| -> f64 {
        let mut d = 0.0;
        for p in 0..n_planes {
            let diff = colors.value(p, r, c) as f64 - means[s * n_planes + p];
            d += diff * diff;
        }
        d
    };
    let mut next = vec![0u8; ids.len()];
    for r in 0..side {
        for c in 0..side {
            let own = ids[r * side + c];
            let mut cands = [own; 5];
            let mut n_cands = 1usize;
            let push = |id: u8, cands: &mut [u8; 5], n: &mut usize| {
                if !cands[..*n].contains(&id) {
                    cands[*n] = id;
                    *n += 1;
                }
            };
            if r > 0 {
                push(ids[(r - 1) * side + c], &mut cands, &mut n_cands);
            }
            if r + 1 < side {
                push(ids[(r + 1) * side + c], &mut cands, &mut n_cands);
            }
            if c > 0 {
                push(ids[r * side + c - 1], &mut cands, &mut n_cands);
            }
            if c + 1 < side {
                push(ids[r * side + c + 1], &mut cands, &mut n_cands);
            }
            cands[..n_cands].sort_unstable();
            let mut best = own;
            let mut best_d = dist(own as usize, r, c);
            for &s in &cands[..n_cands] {
                if s == own {
                    continue;
                }
                let d = dist(s as usize, r, c);
                if d < best_d {
                    best_d = d;
                    best = s;
                }
            }
            next[r * side + c] = best;
        }
    }
    next
}

/// Sharpen a predicted mask against the patch colors.
///
/// Each step recomputes per-segment mean colors from the current assignment
/// and applies one synchronous [`sharpen_pass`]. `steps == 0` is the
/// identity; the result is re-canonicalized.
pub fn sharpen(colors: &ColorPatch, seg: &SegPatch, steps: usize) -> SegPatch {
    debug_assert_eq!(colors.side(), seg.side());
    if steps == 0 {
        return seg.clone();
    }
    let mut ids = seg.ids().to_vec();
    for _ in 0..steps {
        let means = segment_means(colors, &ids);
        ids = sharpen_pass(colors, &ids, &means);
    }
    SegPatch::from_ids(seg.side(), &ids)
}

/// Multiscale detection: average single-scale responses at half, original,
/// and double resolution, each resized back to the input dimensions.
pub fn multiscale_detect(
    img: &Image,
    forest: &Forest,
    opts: &DetectOptions,
) -> Result<EdgeProbMap> {
    let (w, h) = (img.width(), img.height());
    if w < 16 || h < 16 {
        return Err(Error::InvalidInput(
            "multiscale detection needs an image of at least 16x16".into(),
        ));
    }
    let single = DetectOptions {
        multiscale: false,
        ..opts.clone()
    };
    let mut acc = FloatPlane::new(w, h);
    for scale in [0.5f32, 1.0, 2.0] {
        let e = if (scale - 1.0).abs() < f32::EPSILON {
            detect(img, forest, &single)?
        } else {
            let sw = ((w as f32 * scale).round() as usize).max(1);
            let sh = ((h as f32 * scale).round() as usize).max(1);
            detect(&img.resize_bilinear(sw, sh), forest, &single)?.resize_bilinear(w, h)
        };
        for (a, &v) in acc.data_mut().iter_mut().zip(e.data()) {
            *a += v;
        }
    }
    for v in acc.data_mut() {
        *v = (*v / 3.0).clamp(0.0, 1.0);
    }
    Ok(acc)
}

/// Non-maximal suppression parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmsParams {
    /// Triangle-blur radius for the orientation estimate.
    pub blur_radius: usize,
    /// Multiplier applied to surviving values (at most 1; 1 disables).
    pub attenuation: f32,
    /// Zero out this many pixels along each image border (BSDS-style).
    pub border: usize,
}

impl Default for NmsParams {
    fn default() -> Self {
        NmsParams {
            blur_radius: 2,
            attenuation: 1.0,
            border: 0,
        }
    }
}

/// Thin an edge map with default parameters; see [`nms_with`].
pub fn nms(e: &EdgeProbMap) -> EdgeProbMap {
    nms_with(e, &NmsParams::default())
}

/// Orientation-aware non-maximal suppression.
///
/// The local edge normal is estimated from the structure tensor of the
/// gradients of a triangle-blurred copy of the map; a pixel survives iff its
/// value strictly exceeds the bilinearly interpolated value one pixel along
/// the negative normal and is at least the value along the positive normal
/// (the asymmetry deterministically breaks plateau ties, so constant thick
/// bands thin to a single ridge). Surviving values are scaled by
/// `attenuation`; output never exceeds input and zero stays zero.
pub fn nms_with(e: &EdgeProbMap, params: &NmsParams) -> EdgeProbMap {
    let (w, h) = (e.width(), e.height());
    let g = triangle_blur(e, params.blur_radius);
    let mut dx = FloatPlane::new(w, h);
    let mut dy = FloatPlane::new(w, h);
    for r in 0..h {
        for c in 0..w {
            let cl = g.get(r, c.saturating_sub(1));
            let cr = g.get(r, (c + 1).min(w - 1));
            let ru = g.get(r.saturating_sub(1), c);
            let rd = g.get((r + 1).min(h - 1), c);
            dx.set(r, c, 0.5 * (cr - cl));
            dy.set(r, c, 0.5 * (rd - ru));
        }
    }
    let mut jxx = FloatPlane::new(w, h);
    let mut jxy = FloatPlane::new(w, h);
    let mut jyy = FloatPlane::new(w, h);
    for j in 0..w * h {
        let (x, y) = (dx.data()[j], dy.data()[j]);
        jxx.data_mut()[j] = x * x;
        jxy.data_mut()[j] = x * y;
        jyy.data_mut()[j] = y * y;
    }
    let jxx = triangle_blur(&jxx, params.blur_radius);
    let jxy = triangle_blur(&jxy, params.blur_radius);
    let jyy = triangle_blur(&jyy, params.blur_radius);

    let att = params.attenuation.min(1.0);
    let mut out = FloatPlane::new(w, h);
    for r in 0..h {
        for c in 0..w {
            let v = e.get(r, c);
            if v <= 0.0 {
                continue;
            }
            let theta = 0.5 * (2.0 * jxy.get(r, c)).atan2(jxx.get(r, c) - jyy.get(r, c));
            let (nr, nc) = (theta.sin(), theta.cos());
            let back = e.bilinear(r as f32 - nr, c as f32 - nc);
            let fwd = e.bilinear(r as f32 + nr, c as f32 + nc);
            if v > back && v >= fwd {
                out.set(r, c, v * att);
            }
        }
    }
    if params.border > 0 {
        let b = params.border;
        for r in 0..h {
            for c in 0..w {
                if r < b || c < b || r + b >= h || c + b >= w {
                    out.set(r, c, 0.0);
                }
            }
        }
    }
    out
}
