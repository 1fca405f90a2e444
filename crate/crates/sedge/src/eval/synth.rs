//! Deterministic synthetic corpus: piecewise-constant color images from
//! random Voronoi partitions with noise and smooth illumination gradients;
//! the generating partition is the ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, GroundTruth, SegMap};
use crate::forest::mix_seed;
use crate::plane::{FloatPlane, Image};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n_images: usize,
    pub width: usize,
    pub height: usize,
    pub min_segments: usize,
    pub max_segments: usize,
    /// Gaussian pixel-noise sigma.
    pub noise_sigma: f64,
    /// Peak amplitude of the random linear illumination gradient.
    pub illumination: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_images: 20,
            width: 128,
            height: 128,
            min_segments: 2,
            max_segments: 8,
            noise_sigma: 0.02,
            illumination: 0.08,
            seed: 0,
        }
    }
}

/// Generate a corpus with default parameters at the given square size.
pub fn synth_corpus(seed: u64, n_images: usize, size: usize) -> Vec<(Image, GroundTruth)> {
    synth_corpus_with(&SynthParams {
        seed,
        n_images,
        width: size,
        height: size,
        ..SynthParams::default()
    })
}

pub fn synth_corpus_with(params: &SynthParams) -> Vec<(Image, GroundTruth)> {
    assert!(params.n_images >= 1);
    assert!(params.min_segments >= 1 && params.min_segments <= params.max_segments);
    (0..params.n_images)
        .map(|i| synth_image(params, mix_seed(params.seed, 0x5717 ^ i as u64)))
        .collect()
}

fn synth_image(params: &SynthParams, seed: u64) -> (Image, GroundTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (params.width, params.height);
    let k = rng.gen_range(params.min_segments..=params.max_segments);

    let sites: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.gen_range(0.0..h as f64), rng.gen_range(0.0..w as f64)))
        .collect();
    let colors = segment_colors(k, &mut rng);

    let mut ids = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            for (s, &(sr, sc)) in sites.iter().enumerate() {
                let d = (sr - r as f64).powi(2) + (sc - c as f64).powi(2);
                if d < best_d {
                    best_d = d;
                    best = s as u32;
                }
            }
            ids.push(best);
        }
    }
    let seg = SegMap::new(w, h, ids);

    // shared linear illumination gradient plus per-pixel gaussian noise
    let amp = rng.gen_range(0.0..=params.illumination.max(0.0));
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let diag = ((w * w + h * h) as f64).sqrt();
    let noise = Normal::new(0.0, params.noise_sigma.max(1e-12)).expect("valid sigma");
    let mut planes = vec![FloatPlane::new(w, h); 3];
    for r in 0..h {
        for c in 0..w {
            let s = seg.id(r, c) as usize;
            let illum = amp * ((c as f64 * phase.cos() + r as f64 * phase.sin()) / diag - 0.5);
            for (p, plane) in planes.iter_mut().enumerate() {
                let n = if params.noise_sigma > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                let v = colors[s][p] + illum + n;
                plane.set(r, c, v.clamp(0.0, 1.0) as f32);
            }
        }
    }
    let img = Image::new(planes).expect("valid synthetic image");
    (img, GroundTruth::from_segmentations(vec![seg]))
}

/// Segment colors inside [0.15, 0.85], resampled until pairwise distinct
/// enough for boundaries to be learnable.
fn segment_colors(k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let mut colors: Vec<[f64; 3]> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut tries = 0;
        loop {
            let cand = [
                rng.gen_range(0.15..0.85),
                rng.gen_range(0.15..0.85),
                rng.gen_range(0.15..0.85),
            ];
            let ok = colors.iter().all(|c| {
                let d2: f64 = (0..3).map(|i| (c[i] - cand[i]).powi(2)).sum();
                d2.sqrt() >= 0.3
            });
            tries += 1;
            if ok || tries > 200 {
                colors.push(cand);
                break;
            }
        }
    }
    colors
}

/// Package a corpus as a [`Dataset`] with zero-padded sequential ids.
pub fn corpus_to_dataset(corpus: Vec<(Image, GroundTruth)>) -> Dataset {
    let mut ids = Vec::with_capacity(corpus.len());
    let mut images = Vec::with_capacity(corpus.len());
    let mut gts = Vec::with_capacity(corpus.len());
    for (i, (img, gt)) in corpus.into_iter().enumerate() {
        ids.push(format!("img{i:04}"));
        images.push(img);
        gts.push(gt);
    }
    Dataset { ids, images, gts }
}
