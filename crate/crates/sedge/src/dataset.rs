//! Dataset ingestion and ground-truth types.
//!
//! On-disk layout:
//!
//! ```text
//! <dataset>/
//!   images/<id>.png                     8/16-bit gray or RGB
//!   groundtruth/<id>/<annotator>.png    16-bit PNG of segment ids
//! ```
//!
//! Ids are directory-driven and sorted lexicographically; every image must
//! have at least one annotator segmentation.

use std::path::Path;

use crate::error::{Error, Result};
use crate::forest::SegPatch;
use crate::plane::{load_image, Image};

/// Full-resolution integer segment-id map (one annotator's segmentation).
#[derive(Debug, Clone, PartialEq)]
pub struct SegMap {
    width: usize,
    height: usize,
    ids: Vec<u32>,
}

impl SegMap {
    pub fn new(width: usize, height: usize, ids: Vec<u32>) -> Self {
        assert_eq!(ids.len(), width * height);
        SegMap { width, height, ids }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn id(&self, r: usize, c: usize) -> u32 {
        self.ids[r * self.width + c]
    }

    /// Canonicalized `side x side` window with top-left `(r0, c0)`.
    pub fn window(&self, r0: usize, c0: usize, side: usize) -> SegPatch {
        assert!(r0 + side <= self.height && c0 + side <= self.width);
        let mut raw = Vec::with_capacity(side * side);
        for r in r0..r0 + side {
            for c in c0..c0 + side {
                raw.push(self.id(r, c));
            }
        }
        SegPatch::from_ids(side, &raw)
    }
}

/// Dense binary raster (thinned predictions, boundary maps).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMap {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMap {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = BinaryMap::new(width, height);
        for r in 0..height {
            for c in 0..width {
                if f(r, c) {
                    m.set(r, c);
                }
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.width + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize) {
        self.bits[r * self.width + c] = true;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Raster-order coordinates of set pixels.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) {
                    out.push((r, c));
                }
            }
        }
        out
    }
}

/// Boundary map of a segmentation: a pixel is a boundary iff its id differs
/// from its left or upper neighbor (the patch edge rule extended to full
/// images).
pub fn boundaries_of(seg: &SegMap) -> BinaryMap {
    BinaryMap::from_fn(seg.width, seg.height, |r, c| {
        let id = seg.id(r, c);
        (c > 0 && seg.id(r, c - 1) != id) || (r > 0 && seg.id(r - 1, c) != id)
    })
}

/// All annotations for one image: segmentations plus their derived boundary
/// maps.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub segmentations: Vec<SegMap>,
    pub boundaries: Vec<BinaryMap>,
}

impl GroundTruth {
    pub fn from_segmentations(segmentations: Vec<SegMap>) -> Self {
        let boundaries = segmentations.iter().map(boundaries_of).collect();
        GroundTruth {
            segmentations,
            boundaries,
        }
    }

    pub fn n_annotators(&self) -> usize {
        self.segmentations.len()
    }
}

/// An in-memory dataset: parallel arrays of id, image, and ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub images: Vec<Image>,
    pub gts: Vec<GroundTruth>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let images_dir = dir.join("images");
    let gt_dir = dir.join("groundtruth");
    let mut ids: Vec<String> = std::fs::read_dir(&images_dir)
        .map_err(|e| Error::io(&images_dir, e))?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            if path.extension().is_some_and(|e| e == "png") {
                path.file_stem().map(|s| s.to_string_lossy().into_owned())
            } else {
                None
            }
        })
        .collect();
    ids.sort();
    if ids.is_empty() {
        return Err(Error::Config(format!(
            "no images found in {}",
            images_dir.display()
        )));
    }

    let mut images = Vec::with_capacity(ids.len());
    let mut gts = Vec::with_capacity(ids.len());
    for id in &ids {
        let img = load_image(&images_dir.join(format!("{id}.png")))?;
        let ann_dir = gt_dir.join(id);
        let mut ann_files: Vec<_> = std::fs::read_dir(&ann_dir)
            .map_err(|e| Error::io(&ann_dir, e))?
            .filter_map(|entry| {
                let path = entry.ok()?.path();
                (path.extension().is_some_and(|e| e == "png")).then_some(path)
            })
            .collect();
        ann_files.sort();
        if ann_files.is_empty() {
            return Err(Error::Config(format!(
                "image {id} has no ground-truth annotations"
            )));
        }
        let mut segs = Vec::with_capacity(ann_files.len());
        for path in &ann_files {
            let seg = load_seg_png(path)?;
            if seg.width() != img.width() || seg.height() != img.height() {
                return Err(Error::Mismatch(format!(
                    "{}: segmentation size {}x{} differs from image {}x{}",
                    path.display(),
                    seg.width(),
                    seg.height(),
                    img.width(),
                    img.height()
                )));
            }
            segs.push(seg);
        }
        images.push(img);
        gts.push(GroundTruth::from_segmentations(segs));
    }
    Ok(Dataset { ids, images, gts })
}

/// Read a segment-id map stored as an 8- or 16-bit grayscale PNG.
pub fn load_seg_png(path: &Path) -> Result<SegMap> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let ids: Vec<u32> = match img {
        image::DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p.0[0] as u32).collect(),
        image::DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| p.0[0] as u32).collect(),
        _ => {
            return Err(Error::Format(format!(
                "{}: segment maps must be single-channel PNG",
                path.display()
            )))
        }
    };
    Ok(SegMap::new(w, h, ids))
}

/// Write a segment-id map as a 16-bit grayscale PNG.
pub fn save_seg_png(seg: &SegMap, path: &Path) -> Result<()> {
    let buf: Vec<u16> = (0..seg.height())
        .flat_map(|r| (0..seg.width()).map(move |c| (r, c)))
        .map(|(r, c)| {
            let id = seg.id(r, c);
            assert!(
                id <= u16::MAX as u32,
                "segment id {id} exceeds 16-bit PNG range"
            );
            id as u16
        })
        .collect();
    image::ImageBuffer::<image::Luma<u16>, _>::from_raw(
        seg.width() as u32,
        seg.height() as u32,
        buf,
    )
    .expect("sized buffer")
    .save(path)
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Write an image as an 8-bit PNG (RGB for 3+ planes, grayscale otherwise).
pub fn save_image_png(img: &Image, path: &Path) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let res = if img.n_planes() >= 3 {
        let mut buf = Vec::with_capacity((w * h * 3) as usize);
        for r in 0..img.height() {
            for c in 0..img.width() {
                for k in 0..3 {
                    buf.push((img.plane(k).get(r, c).clamp(0.0, 1.0) * 255.0).round() as u8);
                }
            }
        }
        image::ImageBuffer::<image::Rgb<u8>, _>::from_raw(w, h, buf)
            .expect("sized buffer")
            .save(path)
    } else {
        let buf: Vec<u8> = img
            .plane(0)
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

/// Write a dataset in the on-disk layout understood by [`load_dataset`].
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    let images_dir = dir.join("images");
    std::fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
    for (id, img) in dataset.ids.iter().zip(&dataset.images) {
        save_image_png(img, &images_dir.join(format!("{id}.png")))?;
    }
    for (id, gt) in dataset.ids.iter().zip(&dataset.gts) {
        let ann_dir = dir.join("groundtruth").join(id);
        std::fs::create_dir_all(&ann_dir).map_err(|e| Error::io(&ann_dir, e))?;
        for (a, seg) in gt.segmentations.iter().enumerate() {
            save_seg_png(seg, &ann_dir.join(format!("{a}.png")))?;
        }
    }
    Ok(())
}
