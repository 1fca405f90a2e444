//! Dense float rasters and multi-plane images.
//!
//! Everything downstream (channels, detection, evaluation) operates on
//! [`FloatPlane`], a row-major `f32` buffer indexed `(row, col)`. An
//! [`Image`] is an ordered stack of planes sharing one size, with values
//! normalized to `[0, 1]`.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major single-channel float raster.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatPlane {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl FloatPlane {
    pub fn new(width: usize, height: usize) -> Self {
        FloatPlane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height, "plane size mismatch");
        FloatPlane {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        FloatPlane {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        debug_assert!(r < self.height && c < self.width);
        self.data[r * self.width + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        debug_assert!(r < self.height && c < self.width);
        self.data[r * self.width + c] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.width..(r + 1) * self.width]
    }

    pub fn fill(&mut self, v: f32) {
        self.data.fill(v);
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    /// Value at a fractional position with bilinear interpolation, clamped
    /// to the plane border (replicate outside).
    pub fn bilinear(&self, r: f32, c: f32) -> f32 {
        let r = r.clamp(0.0, (self.height - 1) as f32);
        let c = c.clamp(0.0, (self.width - 1) as f32);
        let r0 = r.floor() as usize;
        let c0 = c.floor() as usize;
        let r1 = (r0 + 1).min(self.height - 1);
        let c1 = (c0 + 1).min(self.width - 1);
        let fr = r - r0 as f32;
        let fc = c - c0 as f32;
        let top = self.get(r0, c0) * (1.0 - fc) + self.get(r0, c1) * fc;
        let bot = self.get(r1, c0) * (1.0 - fc) + self.get(r1, c1) * fc;
        top * (1.0 - fr) + bot * fr
    }

    /// Pad with half-sample symmetric reflection (edge pixel participates:
    /// `x[-1] = x[0]`, `x[n] = x[n-1]`). The reflection is iterated, so pads
    /// larger than the plane are valid.
    pub fn pad_symmetric(&self, top: usize, bottom: usize, left: usize, right: usize) -> Self {
        let w = self.width + left + right;
        let h = self.height + top + bottom;
        let mut out = FloatPlane::new(w, h);
        for r in 0..h {
            let sr = reflect_index(r as isize - top as isize, self.height);
            for c in 0..w {
                let sc = reflect_index(c as isize - left as isize, self.width);
                out.set(r, c, self.get(sr, sc));
            }
        }
        out
    }

    pub fn crop(&self, r0: usize, c0: usize, height: usize, width: usize) -> Self {
        assert!(r0 + height <= self.height && c0 + width <= self.width);
        FloatPlane::from_fn(width, height, |r, c| self.get(r0 + r, c0 + c))
    }

    /// Block-mean downsample by an integer factor; dimensions must divide.
    pub fn downsample_block(&self, factor: usize) -> Self {
        assert!(factor >= 1);
        assert_eq!(self.width % factor, 0);
        assert_eq!(self.height % factor, 0);
        if factor == 1 {
            return self.clone();
        }
        let norm = 1.0 / (factor * factor) as f32;
        FloatPlane::from_fn(self.width / factor, self.height / factor, |r, c| {
            let mut s = 0.0;
            for dr in 0..factor {
                for dc in 0..factor {
                    s += self.get(r * factor + dr, c * factor + dc);
                }
            }
            s * norm
        })
    }

    /// Bilinear resize with pixel-center alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0);
        let sx = self.width as f32 / width as f32;
        let sy = self.height as f32 / height as f32;
        FloatPlane::from_fn(width, height, |r, c| {
            let src_r = (r as f32 + 0.5) * sy - 0.5;
            let src_c = (c as f32 + 0.5) * sx - 0.5;
            self.bilinear(src_r, src_c)
        })
    }

    pub fn clamp01(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

/// Half-sample symmetric index reflection onto `0..n`.
fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    debug_assert!(n > 0);
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

/// Multi-plane image; all planes share a size and values lie in `[0, 1]`.
/// RGB images carry 3 planes, grayscale 1; extra planes (e.g. depth) are
/// permitted and treated as additional intensity channels downstream.
#[derive(Debug, Clone)]
pub struct Image {
    planes: Vec<FloatPlane>,
}

impl Image {
    pub fn new(planes: Vec<FloatPlane>) -> Result<Self> {
        if planes.is_empty() {
            return Err(Error::InvalidInput("image needs at least one plane".into()));
        }
        let (w, h) = (planes[0].width(), planes[0].height());
        if w == 0 || h == 0 {
            return Err(Error::InvalidInput("zero-sized image".into()));
        }
        for p in &planes {
            if p.width() != w || p.height() != h {
                return Err(Error::InvalidInput("image planes differ in size".into()));
            }
            if p.data()
                .iter()
                .any(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
            {
                return Err(Error::InvalidInput(
                    "image values must be finite and in [0, 1]".into(),
                ));
            }
        }
        Ok(Image { planes })
    }

    pub fn width(&self) -> usize {
        self.planes[0].width()
    }

    pub fn height(&self) -> usize {
        self.planes[0].height()
    }

    pub fn n_planes(&self) -> usize {
        self.planes.len()
    }

    pub fn planes(&self) -> &[FloatPlane] {
        &self.planes
    }

    pub fn plane(&self, i: usize) -> &FloatPlane {
        &self.planes[i]
    }

    pub fn pad_symmetric(&self, top: usize, bottom: usize, left: usize, right: usize) -> Image {
        Image {
            planes: self
                .planes
                .iter()
                .map(|p| p.pad_symmetric(top, bottom, left, right))
                .collect(),
        }
    }

    pub fn resize_bilinear(&self, width: usize, height: usize) -> Image {
        Image {
            planes: self
                .planes
                .iter()
                .map(|p| p.resize_bilinear(width, height))
                .collect(),
        }
    }
}

/// Load a PNG (or any format the `image` crate recognizes) as an [`Image`];
/// 8- and 16-bit gray and RGB(A) inputs map to `[0, 1]` planes.
pub fn load_image(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let planes = match img {
        image::DynamicImage::ImageLuma8(buf) => {
            vec![plane_from_iter(
                w,
                h,
                buf.pixels().map(|p| p.0[0] as f32 / 255.0),
            )]
        }
        image::DynamicImage::ImageLuma16(buf) => {
            vec![plane_from_iter(
                w,
                h,
                buf.pixels().map(|p| p.0[0] as f32 / 65535.0),
            )]
        }
        other => {
            let rgb = other.to_rgb32f();
            (0..3)
                .map(|k| plane_from_iter(w, h, rgb.pixels().map(move |p| p.0[k].clamp(0.0, 1.0))))
                .collect()
        }
    };
    Image::new(planes)
}

fn plane_from_iter(w: usize, h: usize, it: impl Iterator<Item = f32>) -> FloatPlane {
    FloatPlane::from_vec(w, h, it.collect())
}

/// Write a probability plane as a grayscale PNG, 8- or 16-bit.
pub fn save_gray_png(plane: &FloatPlane, path: &Path, deep: bool) -> Result<()> {
    let w = plane.width() as u32;
    let h = plane.height() as u32;
    let res = if deep {
        let buf: Vec<u16> = plane
            .data()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
            .collect();
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(w, h, buf)
            .expect("sized buffer")
            .save(path)
    } else {
        let buf: Vec<u8> = plane
            .data()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        image::ImageBuffer::<image::Luma<u8>, _>::from_raw(w, h, buf)
            .expect("sized buffer")
            .save(path)
    };
    res.map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Raw float-plane file: `width: u32 LE`, `height: u32 LE`, then row-major
/// `f32 LE` values.
pub fn save_raw(plane: &FloatPlane, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + plane.data().len() * 4);
    bytes.extend_from_slice(&(plane.width() as u32).to_le_bytes());
    bytes.extend_from_slice(&(plane.height() as u32).to_le_bytes());
    for v in plane.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_raw(path: &Path) -> Result<FloatPlane> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::Format(format!(
            "{}: raw plane too short",
            path.display()
        )));
    }
    let w = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + w * h * 4 {
        return Err(Error::Format(format!(
            "{}: raw plane payload is {} bytes, expected {}",
            path.display(),
            bytes.len() - 8,
            w * h * 4
        )));
    }
    let data = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(FloatPlane::from_vec(w, h, data))
}
