//! Feature channels: the per-image planes from which all split-function
//! inputs are drawn.
//!
//! An RGB input yields 13 channels: 3 CIE-LUV color planes, normalized
//! gradient magnitude at the original and half resolution, and each
//! magnitude split into 4 hard orientation bins. Extra input planes (e.g.
//! depth) are treated like intensity and contribute their own magnitude and
//! orientation channels. All channels are blurred with a small triangle
//! filter and downsampled by `shrink`.
//!
//! Half-resolution gradients are binned into orientation channels at their
//! native scale and the resulting channels are then upsampled back to full
//! resolution (binning first keeps the orientation estimate scale-honest).
//!
//! Candidate features for one patch come in two sections: raw pixel lookups
//! over the downsampled patch window (channel-major, row raster within each
//! channel), followed by pairwise differences of self-similarity grid-cell
//! means (channel-major; cell pairs `(a, b)` with `a < b` in lexicographic
//! order, value = `mean[a] - mean[b]`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::FeatureSource;
use crate::plane::{FloatPlane, Image};

/// Channel-computation parameters. Defaults follow the sweep-optimal
/// settings used throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Channel downsampling factor.
    pub shrink: usize,
    /// Number of hard orientation bins per gradient scale.
    pub n_orients: usize,
    /// Radius of the triangle blur used to normalize gradient magnitude;
    /// 0 disables normalization.
    pub norm_radius: usize,
    /// Triangle-blur radius applied to every channel before downsampling.
    pub chn_smooth: usize,
    /// Triangle-blur radius (at input resolution) for the self-similarity
    /// source planes.
    pub sim_smooth: usize,
    /// Self-similarity grid is `grid_cells x grid_cells` per patch window.
    pub grid_cells: usize,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            shrink: 2,
            n_orients: 4,
            norm_radius: 4,
            chn_smooth: 2,
            sim_smooth: 8,
            grid_cells: 5,
        }
    }
}

/// Per-image feature planes at `1/shrink` resolution plus the extra-blurred
/// self-similarity planes sampled by pairwise-difference features.
#[derive(Debug, Clone)]
pub struct ChannelStack {
    pub width: usize,
    pub height: usize,
    pub shrink: usize,
    pub grid_cells: usize,
    pub channels: Vec<FloatPlane>,
    pub ss: Vec<FloatPlane>,
    pub names: Vec<String>,
}

impl ChannelStack {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }
}

// CIE-LUV conversion constants. Input RGB in [0,1] is taken as linear RGB
// with sRGB/D65 primaries; L,u,v are affinely rescaled into [0,1] with the
// fixed constants below so models are bit-reproducible.
const XYZ_FROM_RGB: [[f32; 3]; 3] = [
    [0.412453, 0.357580, 0.180423],
    [0.212671, 0.715160, 0.072169],
    [0.019334, 0.119193, 0.950227],
];
const UN_PRIME: f32 = 0.197833;
const VN_PRIME: f32 = 0.468331;
/// Rescale: l = L/270, u = (u+88)/270, v = (v+134)/270, clamped to [0,1].
pub const LUV_SCALE: f32 = 1.0 / 270.0;
pub const LUV_U_OFFSET: f32 = 88.0;
pub const LUV_V_OFFSET: f32 = 134.0;

/// Convert a 3-plane RGB image (values in [0,1]) to rescaled CIE-LUV.
pub fn rgb_to_luv(img: &Image) -> Result<Image> {
    if img.n_planes() != 3 {
        return Err(Error::InvalidInput("luv requires rgb".into()));
    }
    let (w, h) = (img.width(), img.height());
    let mut l_p = FloatPlane::new(w, h);
    let mut u_p = FloatPlane::new(w, h);
    let mut v_p = FloatPlane::new(w, h);
    for r in 0..h {
        for c in 0..w {
            let rgb = [
                img.plane(0).get(r, c),
                img.plane(1).get(r, c),
                img.plane(2).get(r, c),
            ];
            let (l, u, v) = luv_pixel(rgb);
            l_p.set(r, c, (l * LUV_SCALE).clamp(0.0, 1.0));
            u_p.set(r, c, ((u + LUV_U_OFFSET) * LUV_SCALE).clamp(0.0, 1.0));
            v_p.set(r, c, ((v + LUV_V_OFFSET) * LUV_SCALE).clamp(0.0, 1.0));
        }
    }
    Image::new(vec![l_p, u_p, v_p])
}

fn luv_pixel(rgb: [f32; 3]) -> (f32, f32, f32) {
    let mut xyz = [0.0f32; 3];
    for (i, row) in XYZ_FROM_RGB.iter().enumerate() {
        xyz[i] = row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2];
    }
    let [x, y, z] = xyz;
    let l = if y > 0.008856 {
        116.0 * y.cbrt() - 16.0
    } else {
        903.2963 * y
    };
    let denom = x + 15.0 * y + 3.0 * z;
    let (u_prime, v_prime) = if denom > 1e-12 {
        (4.0 * x / denom, 9.0 * y / denom)
    } else {
        (UN_PRIME, VN_PRIME)
    };
    let u = 13.0 * l * (u_prime - UN_PRIME);
    let v = 13.0 * l * (v_prime - VN_PRIME);
    (l, u, v)
}

/// Separable triangle blur with a normalized kernel of the given radius and
/// half-sample symmetric (reflect) padding. Radius 0 is the identity.
pub fn triangle_blur(plane: &FloatPlane, radius: usize) -> FloatPlane {
    if radius == 0 {
        return plane.clone();
    }
    let kernel: Vec<f32> = {
        let norm = ((radius + 1) * (radius + 1)) as f32;
        (0..2 * radius + 1)
            .map(|i| (radius as isize + 1 - (i as isize - radius as isize).abs()) as f32 / norm)
            .collect()
    };
    let horiz = convolve_rows(plane, &kernel, radius);
    convolve_cols(&horiz, &kernel, radius)
}

fn convolve_rows(plane: &FloatPlane, kernel: &[f32], radius: usize) -> FloatPlane {
    let (w, h) = (plane.width(), plane.height());
    let mut out = FloatPlane::new(w, h);
    for r in 0..h {
        let row = plane.row(r);
        for c in 0..w {
            let mut acc = 0.0f32;
            for (k, &kv) in kernel.iter().enumerate() {
                let i = c as isize + k as isize - radius as isize;
                acc += kv * row[reflect(i, w)];
            }
            out.set(r, c, acc);
        }
    }
    out
}

fn convolve_cols(plane: &FloatPlane, kernel: &[f32], radius: usize) -> FloatPlane {
    let (w, h) = (plane.width(), plane.height());
    let mut out = FloatPlane::new(w, h);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0f32;
            for (k, &kv) in kernel.iter().enumerate() {
                let i = r as isize + k as isize - radius as isize;
                acc += kv * plane.get(reflect(i, h), c);
            }
            out.set(r, c, acc);
        }
    }
    out
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i % period;
    if m < 0 {
        m += period;
    }
    if m < n {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Gradient magnitude and orientation over a set of planes.
///
/// Central differences with replicated borders per plane; the per-pixel
/// magnitude is the max over planes and the orientation (in `[0, pi)`) is
/// taken from the maximizing plane. When `norm_radius > 0` the magnitude is
/// normalized as `m / (triangle_blur(m, norm_radius) + 0.01)`.
pub fn gradient_mag_orient(planes: &[FloatPlane], norm_radius: usize) -> (FloatPlane, FloatPlane) {
    assert!(!planes.is_empty(), "gradient needs at least one plane");
    let (w, h) = (planes[0].width(), planes[0].height());
    let mut mag = FloatPlane::new(w, h);
    let mut orient = FloatPlane::new(w, h);
    for r in 0..h {
        for c in 0..w {
            let mut best = f32::NEG_INFINITY;
            let mut best_theta = 0.0f32;
            for p in planes {
                let cl = if c > 0 { p.get(r, c - 1) } else { p.get(r, 0) };
                let cr = if c + 1 < w {
                    p.get(r, c + 1)
                } else {
                    p.get(r, w - 1)
                };
                let ru = if r > 0 { p.get(r - 1, c) } else { p.get(0, c) };
                let rd = if r + 1 < h {
                    p.get(r + 1, c)
                } else {
                    p.get(h - 1, c)
                };
                let dx = 0.5 * (cr - cl);
                let dy = 0.5 * (rd - ru);
                let m = (dx * dx + dy * dy).sqrt();
                if m > best {
                    best = m;
                    let mut theta = dy.atan2(dx);
                    if theta < 0.0 {
                        theta += std::f32::consts::PI;
                    }
                    if theta >= std::f32::consts::PI {
                        theta = 0.0;
                    }
                    best_theta = theta;
                }
            }
            mag.set(r, c, best);
            orient.set(r, c, best_theta);
        }
    }
    if norm_radius > 0 {
        let smooth = triangle_blur(&mag, norm_radius);
        for (m, s) in mag.data_mut().iter_mut().zip(smooth.data()) {
            *m /= s + 0.01;
        }
    }
    (mag, orient)
}

/// Hard-assign each magnitude value to the orientation bin containing its
/// orientation; the output planes sum elementwise to the magnitude plane.
pub fn orient_split(mag: &FloatPlane, orient: &FloatPlane, n_orients: usize) -> Vec<FloatPlane> {
    assert!(n_orients >= 1);
    let (w, h) = (mag.width(), mag.height());
    let mut out = vec![FloatPlane::new(w, h); n_orients];
    let scale = n_orients as f32 / std::f32::consts::PI;
    for r in 0..h {
        for c in 0..w {
            let bin = ((orient.get(r, c) * scale) as usize).min(n_orients - 1);
            out[bin].set(r, c, mag.get(r, c));
        }
    }
    out
}

/// Color-like planes of an image: 3-or-more-plane inputs have their first
/// three planes converted to LUV; every remaining plane passes through
/// unchanged as an intensity channel.
pub fn color_planes(img: &Image) -> Result<Vec<FloatPlane>> {
    let mut out = Vec::with_capacity(img.n_planes());
    if img.n_planes() >= 3 {
        let luv = rgb_to_luv(&Image::new(img.planes()[0..3].to_vec())?)?;
        out.extend(luv.planes().iter().cloned());
        out.extend(img.planes()[3..].iter().cloned());
    } else {
        out.extend(img.planes().iter().cloned());
    }
    Ok(out)
}

/// Number of channels produced for an input with `n_planes` planes.
///
/// Each plane group (the first 3 planes jointly if present, every extra
/// plane by itself) contributes its color-like planes plus `2 + 2*n_orients`
/// gradient channels.
pub fn channel_count(n_planes: usize, n_orients: usize) -> usize {
    let groups = plane_groups(n_planes);
    groups.iter().map(|&g| g + 2 + 2 * n_orients).sum()
}

/// Plane-group sizes: `[3, 1, 1, ..]` for >=3 planes, else one group per plane.
fn plane_groups(n_planes: usize) -> Vec<usize> {
    if n_planes >= 3 {
        let mut g = vec![3];
        g.extend(std::iter::repeat_n(1, n_planes - 3));
        g
    } else {
        vec![1; n_planes]
    }
}

/// Compute the full channel stack for an image.
///
/// The image is internally padded (half-sample symmetric) on the right and
/// bottom so its dimensions divide by both 2 (for the half-resolution
/// gradient scale) and `shrink`.
pub fn compute_channels(img: &Image, params: &ChannelParams) -> Result<ChannelStack> {
    let align = lcm(2, params.shrink.max(1));
    let pad_r = (align - img.width() % align) % align;
    let pad_b = (align - img.height() % align) % align;
    let padded;
    let img = if pad_r > 0 || pad_b > 0 {
        padded = img.pad_symmetric(0, pad_b, 0, pad_r);
        &padded
    } else {
        img
    };
    let (w, h) = (img.width(), img.height());

    let colors = color_planes(img)?;
    let groups = plane_groups(img.n_planes());

    let mut full_res: Vec<FloatPlane> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut offset = 0usize;
    for (gi, &gsize) in groups.iter().enumerate() {
        let group = &colors[offset..offset + gsize];
        let prefix = if gi == 0 {
            String::new()
        } else {
            format!("x{gi}_")
        };
        if gi == 0 && gsize == 3 {
            for n in ["luv_l", "luv_u", "luv_v"] {
                names.push(n.to_string());
            }
        } else {
            for k in 0..gsize {
                names.push(format!("{prefix}intensity{k}"));
            }
        }
        full_res.extend(group.iter().cloned());

        let (mag_full, or_full) = gradient_mag_orient(group, params.norm_radius);
        let half_planes: Vec<FloatPlane> = group.iter().map(|p| p.downsample_block(2)).collect();
        let (mag_half, or_half) = gradient_mag_orient(&half_planes, params.norm_radius);

        let orients_full = orient_split(&mag_full, &or_full, params.n_orients);
        let orients_half = orient_split(&mag_half, &or_half, params.n_orients);

        full_res.push(mag_full);
        names.push(format!("{prefix}mag_full"));
        full_res.push(mag_half.resize_bilinear(w, h));
        names.push(format!("{prefix}mag_half"));
        for (i, p) in orients_full.into_iter().enumerate() {
            full_res.push(p);
            names.push(format!("{prefix}orient_full_{i}"));
        }
        for (i, p) in orients_half.into_iter().enumerate() {
            full_res.push(p.resize_bilinear(w, h));
            names.push(format!("{prefix}orient_half_{i}"));
        }
        offset += gsize;
    }

    let channels: Vec<FloatPlane> = full_res
        .iter()
        .map(|p| triangle_blur(p, params.chn_smooth).downsample_block(params.shrink))
        .collect();
    let ss_radius = params.sim_smooth / params.shrink.max(1);
    let ss: Vec<FloatPlane> = channels
        .iter()
        .map(|p| triangle_blur(p, ss_radius))
        .collect();

    Ok(ChannelStack {
        width: w / params.shrink,
        height: h / params.shrink,
        shrink: params.shrink,
        grid_cells: params.grid_cells,
        channels,
        ss,
        names,
    })
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Candidate-feature count for one patch: pixel lookups plus pairwise
/// grid-cell differences, i.e. `(d_in/shrink)^2*K + C(grid^2, 2)*K`.
pub fn feature_len(d_in: usize, shrink: usize, grid_cells: usize, n_channels: usize) -> usize {
    let win = d_in / shrink;
    let cells = grid_cells * grid_cells;
    win * win * n_channels + cells * (cells - 1) / 2 * n_channels
}

/// Lazy feature view over one patch; features are computed on demand, which
/// is what dense tree evaluation uses (a tree touches only a handful of the
/// several thousand candidates).
pub struct PatchFeatures<'a> {
    cs: &'a ChannelStack,
    top: usize,
    left: usize,
    win: usize,
    n_cells: usize,
    pairs_per_chn: usize,
    len: usize,
}

impl<'a> PatchFeatures<'a> {
    /// View of the `d_in x d_in` patch (input resolution) centered at
    /// `(row, col)`; the patch spans `center - d_in/2 .. center + d_in/2`
    /// and must lie fully inside the (padded) image.
    pub fn new(cs: &'a ChannelStack, center: (usize, usize), d_in: usize) -> Result<Self> {
        let half = d_in / 2;
        let full_w = cs.width * cs.shrink;
        let full_h = cs.height * cs.shrink;
        if center.0 < half
            || center.1 < half
            || center.0 + half > full_h
            || center.1 + half > full_w
        {
            return Err(Error::InvalidInput(format!(
                "patch center ({}, {}) out of bounds for {}x{} image",
                center.0, center.1, full_w, full_h
            )));
        }
        let win = d_in / cs.shrink;
        let top = (center.0 - half) / cs.shrink;
        let left = (center.1 - half) / cs.shrink;
        let n_cells = cs.grid_cells * cs.grid_cells;
        Ok(PatchFeatures {
            cs,
            top,
            left,
            win,
            n_cells,
            pairs_per_chn: n_cells * (n_cells - 1) / 2,
            len: feature_len(d_in, cs.shrink, cs.grid_cells, cs.channels.len()),
        })
    }

    pub fn feature_count(&self) -> usize {
        self.len
    }

    /// Mean of the self-similarity plane over grid cell `cell` (raster index
    /// within the `grid x grid` partition of the patch window). Cell `i`
    /// spans rows `i*win/grid .. (i+1)*win/grid`.
    fn cell_mean(&self, chn: usize, cell: usize) -> f32 {
        let g = self.cs.grid_cells;
        let (gr, gc) = (cell / g, cell % g);
        let r0 = gr * self.win / g;
        let r1 = (gr + 1) * self.win / g;
        let c0 = gc * self.win / g;
        let c1 = (gc + 1) * self.win / g;
        let n = (r1 - r0) * (c1 - c0);
        if n == 0 {
            return 0.0;
        }
        let plane = &self.cs.ss[chn];
        let mut s = 0.0f32;
        for r in r0..r1 {
            for c in c0..c1 {
                s += plane.get(self.top + r, self.left + c);
            }
        }
        s / n as f32
    }

    fn pair_for(&self, mut p: usize) -> (usize, usize) {
        let n = self.n_cells;
        let mut a = 0;
        loop {
            let cnt = n - 1 - a;
            if p < cnt {
                return (a, a + 1 + p);
            }
            p -= cnt;
            a += 1;
        }
    }

    #[inline]
    pub fn value(&self, k: usize) -> f32 {
        let per_chn_pix = self.win * self.win;
        let n_pix = per_chn_pix * self.cs.channels.len();
        if k < n_pix {
            let chn = k / per_chn_pix;
            let rem = k % per_chn_pix;
            let (r, c) = (rem / self.win, rem % self.win);
            self.cs.channels[chn].get(self.top + r, self.left + c)
        } else {
            let k = k - n_pix;
            let chn = k / self.pairs_per_chn;
            let (a, b) = self.pair_for(k % self.pairs_per_chn);
            self.cell_mean(chn, a) - self.cell_mean(chn, b)
        }
    }
}

impl FeatureSource for PatchFeatures<'_> {
    fn feature_len(&self) -> usize {
        self.len
    }

    fn feature(&self, k: usize) -> f32 {
        self.value(k)
    }
}

/// Extract the full candidate-feature vector for one patch. Layout is
/// `[pixel lookups | pairwise differences]`, both sections channel-major.
pub fn extract_features(
    cs: &ChannelStack,
    center: (usize, usize),
    d_in: usize,
) -> Result<Vec<f32>> {
    let view = PatchFeatures::new(cs, center, d_in)?;
    let mut out = Vec::with_capacity(view.len);
    for chn in 0..cs.channels.len() {
        let plane = &cs.channels[chn];
        for r in 0..view.win {
            for c in 0..view.win {
                out.push(plane.get(view.top + r, view.left + c));
            }
        }
    }
    let n_cells = view.n_cells;
    let mut means = vec![0.0f32; n_cells];
    for chn in 0..cs.channels.len() {
        for (cell, m) in means.iter_mut().enumerate() {
            *m = view.cell_mean(chn, cell);
        }
        for a in 0..n_cells {
            for b in a + 1..n_cells {
                out.push(means[a] - means[b]);
            }
        }
    }
    Ok(out)
}

/// Extract only the requested (global) feature indices into `out`; used by
/// training, where each tree sees a fixed feature subset.
pub fn extract_features_subset(
    cs: &ChannelStack,
    center: (usize, usize),
    d_in: usize,
    ids: &[u32],
    out: &mut [f32],
) -> Result<()> {
    assert_eq!(ids.len(), out.len());
    let view = PatchFeatures::new(cs, center, d_in)?;
    let mut memo: Vec<Option<Vec<f32>>> = vec![None; cs.channels.len()];
    let per_chn_pix = view.win * view.win;
    let n_pix = per_chn_pix * cs.channels.len();
    for (slot, &id) in ids.iter().enumerate() {
        let k = id as usize;
        out[slot] = if k < n_pix {
            view.value(k)
        } else {
            let rel = k - n_pix;
            let chn = rel / view.pairs_per_chn;
            let (a, b) = view.pair_for(rel % view.pairs_per_chn);
            let means = memo[chn].get_or_insert_with(|| {
                (0..view.n_cells)
                    .map(|cell| view.cell_mean(chn, cell))
                    .collect()
            });
            means[a] - means[b]
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn const_image(w: usize, h: usize, rgb: [f32; 3]) -> Image {
        Image::new(
            rgb.iter()
                .map(|&v| FloatPlane::from_vec(w, h, vec![v; w * h]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn luv_black_has_zero_l() {
        let img = const_image(4, 4, [0.0, 0.0, 0.0]);
        let luv = rgb_to_luv(&img).unwrap();
        assert_eq!(luv.plane(0).get(0, 0), 0.0);
    }

    #[test]
    fn luv_white_sits_at_white_point() {
        let img = const_image(4, 4, [1.0, 1.0, 1.0]);
        let luv = rgb_to_luv(&img).unwrap();
        // u = v = 0 before rescale at the D65 white point
        let u0 = LUV_U_OFFSET * LUV_SCALE;
        let v0 = LUV_V_OFFSET * LUV_SCALE;
        assert!((luv.plane(1).get(2, 2) - u0).abs() < 2e-3);
        assert!((luv.plane(2).get(2, 2) - v0).abs() < 2e-3);
    }

    #[test]
    fn luv_lightness_is_monotone() {
        let a = rgb_to_luv(&const_image(2, 2, [0.5, 0.5, 0.5])).unwrap();
        let b = rgb_to_luv(&const_image(2, 2, [0.25, 0.25, 0.25])).unwrap();
        assert!(a.plane(0).get(0, 0) > b.plane(0).get(0, 0));
    }

    #[test]
    fn luv_rejects_non_rgb() {
        let img = Image::new(vec![FloatPlane::new(3, 3)]).unwrap();
        let err = rgb_to_luv(&img).unwrap_err();
        assert!(err.to_string().contains("luv requires rgb"));
    }

    #[test]
    fn blur_radius_zero_is_identity() {
        let p = FloatPlane::from_fn(7, 5, |r, c| (r * 13 + c) as f32 * 0.1);
        assert_eq!(triangle_blur(&p, 0), p);
    }

    #[test]
    fn blur_keeps_constant_planes() {
        let p = FloatPlane::from_vec(6, 6, vec![0.37; 36]);
        let b = triangle_blur(&p, 3);
        for v in b.data() {
            assert!((v - 0.37).abs() < 1e-6);
        }
    }

    #[test]
    fn blur_impulse_matches_outer_product_kernel() {
        // Direct 2-D convolution oracle for radius 1: outer([1,2,1]/4, .)
        let mut p = FloatPlane::new(5, 5);
        p.set(2, 2, 1.0);
        let b = triangle_blur(&p, 1);
        let k = [1.0 / 4.0, 2.0 / 4.0, 1.0 / 4.0];
        for r in 0..5 {
            for c in 0..5 {
                let want = if (1..=3).contains(&r) && (1..=3).contains(&c) {
                    k[r - 1] * k[c - 1]
                } else {
                    0.0
                };
                assert!((b.get(r, c) - want).abs() < 1e-7, "at ({r},{c})");
            }
        }
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let p = FloatPlane::from_vec(8, 8, vec![0.5; 64]);
        let (mag, _) = gradient_mag_orient(&[p], 4);
        assert!(mag.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step_gradient_is_horizontal() {
        let p = FloatPlane::from_fn(10, 10, |_, c| if c < 5 { 0.0 } else { 1.0 });
        let (mag, orient) = gradient_mag_orient(&[p], 0);
        for r in 0..10 {
            assert!(mag.get(r, 5) > 0.0);
            let o = orient.get(r, 5);
            let dist = o.min(std::f32::consts::PI - o);
            assert!(dist < 1e-5, "orientation {o} not ~0 mod pi");
        }
    }

    #[test]
    fn ramp_gradient_magnitude_is_analytic() {
        let w = 16usize;
        let p = FloatPlane::from_fn(w, 8, |_, c| c as f32 / w as f32);
        let (mag, _) = gradient_mag_orient(&[p], 0);
        for r in 0..8 {
            for c in 1..w - 1 {
                assert!((mag.get(r, c) - 1.0 / w as f32).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn orient_split_single_bin_copies_magnitude() {
        let mag = FloatPlane::from_fn(4, 4, |r, c| (r + c) as f32);
        let orient = FloatPlane::from_fn(4, 4, |r, c| ((r * 4 + c) as f32) * 0.19);
        let planes = orient_split(&mag, &orient, 1);
        assert_eq!(planes.len(), 1);
        assert_eq!(planes[0], mag);
    }

    #[test]
    fn orient_split_all_in_bin_zero() {
        let mag = FloatPlane::from_fn(4, 4, |r, c| (r + c) as f32);
        let orient = FloatPlane::new(4, 4);
        let planes = orient_split(&mag, &orient, 4);
        assert_eq!(planes[0], mag);
        for p in &planes[1..] {
            assert!(p.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn default_rgb_stack_has_13_halved_planes() {
        let img = Image::new(
            (0..3)
                .map(|k| {
                    FloatPlane::from_fn(32, 32, |r, c| {
                        ((r * 31 + c * 7 + k * 11) % 97) as f32 / 96.0
                    })
                })
                .collect(),
        )
        .unwrap();
        let cs = compute_channels(&img, &ChannelParams::default()).unwrap();
        assert_eq!(cs.n_channels(), 13);
        assert_eq!((cs.width, cs.height), (16, 16));
        assert_eq!(cs.names[0], "luv_l");
        assert_eq!(cs.names[3], "mag_full");
        assert_eq!(cs.names[4], "mag_half");
        assert_eq!(cs.names[5], "orient_full_0");
        assert_eq!(cs.names[12], "orient_half_3");
        for (p, name) in cs.channels.iter().zip(&cs.names) {
            assert!(
                p.data().iter().all(|v| v.is_finite()),
                "non-finite value in {name}"
            );
            if !name.starts_with("luv") {
                assert!(
                    p.data().iter().all(|&v| v >= 0.0),
                    "negative value in {name}"
                );
            }
        }
    }

    #[test]
    fn constant_image_has_zero_gradient_channels() {
        let img = const_image(32, 32, [0.2, 0.6, 0.4]);
        let cs = compute_channels(&img, &ChannelParams::default()).unwrap();
        for (p, name) in cs.channels.iter().zip(&cs.names).skip(3) {
            assert!(
                p.data().iter().all(|&v| v.abs() < 1e-6),
                "channel {name} not zero"
            );
        }
    }

    #[test]
    fn extra_plane_adds_eleven_channels() {
        let mut planes: Vec<FloatPlane> = (0..3)
            .map(|k| FloatPlane::from_fn(32, 32, |r, c| ((r + c + k) % 5) as f32 / 4.0))
            .collect();
        planes.push(FloatPlane::from_fn(32, 32, |r, c| {
            ((r * c) % 7) as f32 / 6.0
        }));
        let img = Image::new(planes).unwrap();
        let cs = compute_channels(&img, &ChannelParams::default()).unwrap();
        assert_eq!(cs.n_channels(), 13 + 11);
        assert_eq!(channel_count(4, 4), 24);
    }

    #[test]
    fn feature_vector_has_7228_entries() {
        let img = Image::new(
            (0..3)
                .map(|k| {
                    FloatPlane::from_fn(64, 64, |r, c| ((r * 5 + c * 3 + k) % 13) as f32 / 12.0)
                })
                .collect(),
        )
        .unwrap();
        let cs = compute_channels(&img, &ChannelParams::default()).unwrap();
        let feats = extract_features(&cs, (32, 32), 32).unwrap();
        assert_eq!(feats.len(), 7228);
        assert_eq!(feature_len(32, 2, 5, 13), 7228);
    }

    #[test]
    fn constant_image_has_zero_pairwise_features() {
        let img = const_image(64, 64, [0.3, 0.5, 0.7]);
        let cs = compute_channels(&img, &ChannelParams::default()).unwrap();
        let feats = extract_features(&cs, (32, 32), 32).unwrap();
        for &f in &feats[3328..] {
            assert!(f.abs() < 1e-6);
        }
    }

    #[test]
    fn identical_content_gives_identical_features() {
        // Periodic image: windows one period apart see the same content.
        let img = Image::new(
            (0..3)
                .map(|k| {
                    FloatPlane::from_fn(128, 64, |r, c| {
                        (((r % 16) * 3 + (c % 16) * 5 + k * 2) % 11) as f32 / 10.0
                    })
                })
                .collect(),
        )
        .unwrap();
        let cs = compute_channels(&img, &ChannelParams::default()).unwrap();
        let a = extract_features(&cs, (32, 48), 32).unwrap();
        let b = extract_features(&cs, (32, 48 + 32), 32).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subset_extraction_matches_full() {
        let img = Image::new(
            (0..3)
                .map(|k| {
                    FloatPlane::from_fn(64, 64, |r, c| {
                        ((r * 7 + c * 11 + k * 3) % 23) as f32 / 22.0
                    })
                })
                .collect(),
        )
        .unwrap();
        let cs = compute_channels(&img, &ChannelParams::default()).unwrap();
        let full = extract_features(&cs, (32, 32), 32).unwrap();
        let ids: Vec<u32> = (0..7228u32).step_by(37).collect();
        let mut sub = vec![0.0f32; ids.len()];
        extract_features_subset(&cs, (32, 32), 32, &ids, &mut sub).unwrap();
        for (i, &id) in ids.iter().enumerate() {
            assert_eq!(sub[i], full[id as usize]);
        }
    }

    #[test]
    fn channel_computation_is_deterministic() {
        let img = Image::new(
            (0..3)
                .map(|k| {
                    FloatPlane::from_fn(40, 36, |r, c| {
                        ((r * 11 + c * 13 + k * 5) % 31) as f32 / 30.0
                    })
                })
                .collect(),
        )
        .unwrap();
        let a = compute_channels(&img, &ChannelParams::default()).unwrap();
        let b = compute_channels(&img, &ChannelParams::default()).unwrap();
        for (pa, pb) in a.channels.iter().zip(&b.channels) {
            assert_eq!(pa.data(), pb.data());
        }
        for (pa, pb) in a.ss.iter().zip(&b.ss) {
            assert_eq!(pa.data(), pb.data());
        }
    }

    #[test]
    fn out_of_bounds_center_is_an_error() {
        let img = const_image(32, 32, [0.1, 0.2, 0.3]);
        let cs = compute_channels(&img, &ChannelParams::default()).unwrap();
        assert!(extract_features(&cs, (8, 16), 32).is_err());
    }

    #[test]
    fn feature_count_identity_across_params() {
        for (d_in, shrink, grid, k) in [
            (32, 2, 5, 13),
            (32, 4, 5, 13),
            (16, 2, 3, 11),
            (32, 2, 4, 24),
        ] {
            let win = d_in / shrink;
            let cells = grid * grid;
            assert_eq!(
                feature_len(d_in, shrink, grid, k),
                win * win * k + cells * (cells - 1) / 2 * k
            );
        }
    }

    proptest! {
        #[test]
        fn blur_preserves_mean(vals in proptest::collection::vec(0.0f32..1.0, 64), radius in 0usize..5) {
            let p = FloatPlane::from_vec(8, 8, vals);
            let b = triangle_blur(&p, radius);
            prop_assert!((p.mean() - b.mean()).abs() < 1e-6);
        }

        #[test]
        fn orient_planes_sum_to_magnitude(seed in 0u64..1000) {
            let mag = FloatPlane::from_fn(9, 7, |r, c| (((r * 31 + c * 17 + seed as usize) % 19) as f32) / 19.0);
            let orient = FloatPlane::from_fn(9, 7, |r, c| {
                ((r * 13 + c * 29 + seed as usize * 7) % 100) as f32 / 100.0 * std::f32::consts::PI
            });
            let planes = orient_split(&mag, &orient, 4);
            for r in 0..7 {
                for c in 0..9 {
                    let s: f32 = planes.iter().map(|p| p.get(r, c)).sum();
                    prop_assert!((s - mag.get(r, c)).abs() <= 1e-6);
                }
            }
        }

        #[test]
        fn gradient_ignores_constant_offset(offset in 0.0f32..0.5) {
            let base = FloatPlane::from_fn(12, 12, |r, c| ((r * 3 + c * 5) % 7) as f32 / 14.0);
            let shifted = FloatPlane::from_vec(12, 12, base.data().iter().map(|v| v + offset).collect());
            let (m0, _) = gradient_mag_orient(&[base], 0);
            let (m1, _) = gradient_mag_orient(&[shifted], 0);
            for (a, b) in m0.data().iter().zip(m1.data()) {
                prop_assert!((a - b).abs() < 1e-5);
            }
        }
    }
}
