//! Label discretization: PCA over pair-equality vectors and the proxy-class
//! assignment (orthant quantization or k-means) used for node splitting.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Discretizer, PairVector};

// Iteration cap and step tolerance for power iteration. Typical nodes exit
// after a few dozen steps; the high cap keeps closely spaced eigenvalues
// accurate enough for eigendecomposition-level agreement.
const POWER_ITERS: usize = 500;
const POWER_TOL: f64 = 1e-12;

/// Principal directions of a set of pair vectors.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Orthonormal directions by descending eigenvalue; the first nonzero
    /// component of each direction is positive.
    pub dirs: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Set when the inputs are all identical (zero variance); directions
    /// are zero vectors and callers should turn the node into a leaf.
    pub degenerate: bool,
}

/// Top principal directions of the (population) covariance of `zs`, found
/// by power iteration with deflation. Deterministic for a fixed seed.
pub fn pca_top_dirs(zs: &[PairVector], dims: usize, seed: u64) -> Pca {
    assert!(!zs.is_empty());
    let m = zs[0].len();
    let n = zs.len() as f64;
    let dims = dims.min(m).min(zs.len());

    let mut mean = vec![0.0f64; m];
    for z in zs {
        z.for_each_set(|j| mean[j] += 1.0);
    }
    for v in &mut mean {
        *v /= n;
    }
    // binary columns: per-dimension variance is mean*(1-mean)
    let total_var: f64 = mean.iter().map(|&p| p * (1.0 - p)).sum();
    if total_var < 1e-15 {
        return Pca {
            mean,
            dirs: vec![vec![0.0; m]; dims],
            eigenvalues: vec![0.0; dims],
            degenerate: true,
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(dims);
    let mut eigenvalues = Vec::with_capacity(dims);
    let mut scratch = vec![0.0f64; zs.len()];
    for _ in 0..dims {
        let mut v = random_unit(m, &mut rng);
        orthogonalize(&mut v, &dirs);
        let mut lambda = 0.0f64;
        for _ in 0..POWER_ITERS {
            let mut w = cov_apply(zs, &mean, &v, &mut scratch);
            orthogonalize(&mut w, &dirs);
            let norm = l2(&w);
            if norm < 1e-14 {
                // zero (or exhausted) variance in the remaining subspace
                lambda = 0.0;
                break;
            }
            for x in &mut w {
                *x /= norm;
            }
            let delta: f64 = w
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            v = w;
            lambda = norm;
            if delta < POWER_TOL {
                break;
            }
        }
        fix_sign(&mut v);
        dirs.push(v);
        eigenvalues.push(lambda);
    }
    Pca {
        mean,
        dirs,
        eigenvalues,
        degenerate: false,
    }
}

/// Centered projections of every vector onto the PCA directions.
pub fn project(zs: &[PairVector], pca: &Pca) -> Vec<Vec<f64>> {
    let offsets: Vec<f64> = pca
        .dirs
        .iter()
        .map(|d| d.iter().zip(&pca.mean).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    zs.iter()
        .map(|z| {
            pca.dirs
                .iter()
                .zip(&offsets)
                .map(|(d, off)| {
                    let mut dot = 0.0;
                    z.for_each_set(|j| dot += d[j]);
                    dot - off
                })
                .collect()
        })
        .collect()
}

fn cov_apply(zs: &[PairVector], mean: &[f64], v: &[f64], scratch: &mut [f64]) -> Vec<f64> {
    // C v = (1/n) * sum_i (z_i - mean) * ((z_i - mean) . v)
    let n = zs.len() as f64;
    let mean_dot: f64 = mean.iter().zip(v).map(|(a, b)| a * b).sum();
    let mut coeff_sum = 0.0f64;
    for (i, z) in zs.iter().enumerate() {
        let mut dot = 0.0;
        z.for_each_set(|j| dot += v[j]);
        let a = dot - mean_dot;
        scratch[i] = a;
        coeff_sum += a;
    }
    let mut out = vec![0.0f64; v.len()];
    for (i, z) in zs.iter().enumerate() {
        let a = scratch[i];
        z.for_each_set(|j| out[j] += a);
    }
    for (o, &mu) in out.iter_mut().zip(mean) {
        *o = (*o - coeff_sum * mu) / n;
    }
    out
}

fn random_unit(m: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = l2(&v);
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn orthogonalize(v: &mut [f64], dirs: &[Vec<f64>]) {
    for d in dirs {
        let dot: f64 = v.iter().zip(d).map(|(a, b)| a * b).sum();
        for (x, y) in v.iter_mut().zip(d) {
            *x -= dot * y;
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn fix_sign(v: &mut [f64]) {
    for &x in v.iter() {
        if x.abs() > 1e-12 {
            if x < 0.0 {
                for y in v.iter_mut() {
                    *y = -*y;
                }
            }
            return;
        }
    }
}

/// Assign each pair vector a discrete label in `0..k_classes`.
///
/// The `pca` method quantizes by the orthant of the top `log2(k)` centered
/// projections (bit `d` set iff projection `d` is nonnegative); `kmeans`
/// runs seeded Lloyd iterations on `pca_dims`-dimensional projections.
/// Degenerate (zero-variance) inputs all get label 0.
pub fn discretize(
    zs: &[PairVector],
    k_classes: usize,
    method: Discretizer,
    pca_dims: usize,
    seed: u64,
) -> Vec<u32> {
    if zs.len() < 2 {
        return vec![0; zs.len()];
    }
    match method {
        Discretizer::Pca => {
            let dims = (usize::BITS - (k_classes - 1).leading_zeros()) as usize; // ceil(log2 k)
            let pca = pca_top_dirs(zs, dims.max(1), seed);
            if pca.degenerate {
                return vec![0; zs.len()];
            }
            project(zs, &pca)
                .into_iter()
                .map(|p| {
                    let mut label = 0u32;
                    for (d, &x) in p.iter().enumerate() {
                        if x >= 0.0 {
                            label |= 1 << d;
                        }
                    }
                    label.min(k_classes as u32 - 1)
                })
                .collect()
        }
        Discretizer::Kmeans => {
            let pca = pca_top_dirs(zs, pca_dims.max(1), seed);
            if pca.degenerate {
                return vec![0; zs.len()];
            }
            let points = project(zs, &pca);
            kmeans(&points, k_classes, 20, seed ^ 0x6B6D).labels
        }
    }
}

/// Result of a Lloyd k-means run.
#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub labels: Vec<u32>,
    pub centroids: Vec<Vec<f64>>,
    /// Objective (sum of squared distances to assigned centroids) recorded
    /// after every assignment step.
    pub objectives: Vec<f64>,
}

/// Fixed-iteration Lloyd k-means with k-means++-style seeded initialization.
/// Ties in assignment go to the lowest centroid index; emptied clusters keep
/// their previous centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, max_iters: usize, seed: u64) -> KmeansResult {
    assert!(!points.is_empty() && k >= 1);
    let k = k.min(points.len());
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..points.len())
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, centroids.last().unwrap()));
        }
    }

    let mut labels = vec![0u32; points.len()];
    let mut objectives = Vec::new();
    for _ in 0..max_iters {
        // assignment
        let mut objective = 0.0;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = dist2(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c as u32;
                }
            }
            objective += best_d;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        objectives.push(objective);
        if !changed && objectives.len() > 1 {
            break;
        }
        // update
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l as usize] += 1;
            for (s, &x) in sums[l as usize].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (ctr, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *ctr = s / counts[c] as f64;
                }
            }
        }
    }
    KmeansResult {
        labels,
        centroids,
        objectives,
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
