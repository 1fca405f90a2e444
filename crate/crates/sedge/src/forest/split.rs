//! Information-gain machinery: impurity, gain, and randomized stump search.

use rand::Rng;

use super::{GainKind, SplitParams};

/// Random access to split features for a set of samples; implemented by the
/// training column matrix and by plain row slices in tests.
pub trait SampleFeatures {
    fn n_samples(&self) -> usize;
    fn value(&self, sample: usize, feature: u32) -> f32;
}

impl SampleFeatures for Vec<Vec<f32>> {
    fn n_samples(&self) -> usize {
        self.len()
    }

    fn value(&self, sample: usize, feature: u32) -> f32 {
        self[sample][feature as usize]
    }
}

/// Impurity of a label multiset: Shannon entropy in bits, or Gini.
pub fn impurity(labels: &[u32], k_classes: usize, gain: GainKind) -> f64 {
    let mut counts = vec![0usize; k_classes];
    for &l in labels {
        counts[l as usize] += 1;
    }
    impurity_counts(&counts, labels.len(), gain)
}

pub(crate) fn impurity_counts(counts: &[usize], total: usize, gain: GainKind) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    match gain {
        GainKind::Entropy => counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum(),
        GainKind::Gini => {
            1.0 - counts
                .iter()
                .map(|&c| {
                    let p = c as f64 / n;
                    p * p
                })
                .sum::<f64>()
        }
    }
}

/// Information gain of a binary partition: `H(parent) - sum_k w_k H(child_k)`.
/// An empty child contributes zero weight.
pub fn info_gain(
    parent: &[u32],
    left: &[u32],
    right: &[u32],
    k_classes: usize,
    gain: GainKind,
) -> f64 {
    let n = parent.len() as f64;
    if parent.is_empty() {
        return 0.0;
    }
    let h = impurity(parent, k_classes, gain);
    let wl = left.len() as f64 / n;
    let wr = right.len() as f64 / n;
    h - wl * impurity(left, k_classes, gain) - wr * impurity(right, k_classes, gain)
}

/// Draw `n` candidate thresholds uniformly from the open interval
/// `(min, max)` and return them sorted ascending. A draw landing exactly on
/// `min` is discarded later as an empty split.
pub fn threshold_candidates(min: f32, max: f32, n: usize, rng: &mut impl Rng) -> Vec<f32> {
    let mut taus: Vec<f32> = (0..n)
        .map(|_| min + rng.gen::<f32>() * (max - min))
        .collect();
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus
}

/// Best randomized stump over the given candidate features.
///
/// For every feature, `n_thresholds` candidates are drawn uniformly between
/// the feature's min and max over the samples; the max-gain `(feature, tau)`
/// wins, with ties broken by lowest feature (iteration order) then lowest
/// tau. Candidates leaving either child with fewer than `min_child` samples
/// are rejected. Returns `None` when nothing separates the samples.
#[allow(clippy::too_many_arguments)]
pub fn best_split(
    data: &impl SampleFeatures,
    labels: &[u32],
    k_classes: usize,
    features: &[u32],
    n_thresholds: usize,
    min_child: usize,
    gain: GainKind,
    rng: &mut impl Rng,
) -> Option<(SplitParams, f64)> {
    let n = labels.len();
    debug_assert_eq!(n, data.n_samples());
    if n < 2 {
        return None;
    }
    let mut parent_counts = vec![0usize; k_classes];
    for &l in labels {
        parent_counts[l as usize] += 1;
    }
    if parent_counts.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let parent_h = impurity_counts(&parent_counts, n, gain);
    let min_child = min_child.max(1);

    let mut best: Option<(f64, u32, f32)> = None;
    let mut col = vec![0.0f32; n];
    let mut left_counts = vec![0usize; k_classes * n_thresholds];
    for &f in features {
        for (i, v) in col.iter_mut().enumerate() {
            *v = data.value(i, f);
        }
        let (mut mn, mut mx) = (f32::INFINITY, f32::NEG_INFINITY);
        for &v in &col {
            mn = mn.min(v);
            mx = mx.max(v);
        }
        if mx <= mn {
            continue;
        }
        let taus = threshold_candidates(mn, mx, n_thresholds, rng);
        left_counts.fill(0);
        for (i, &v) in col.iter().enumerate() {
            let lbl = labels[i] as usize;
            for (j, &t) in taus.iter().enumerate() {
                if v < t {
                    left_counts[j * k_classes + lbl] += 1;
                }
            }
        }
        for (j, &tau) in taus.iter().enumerate() {
            let lc = &left_counts[j * k_classes..(j + 1) * k_classes];
            let left_n: usize = lc.iter().sum();
            let right_n = n - left_n;
            if left_n < min_child || right_n < min_child {
                continue;
            }
            let rc: Vec<usize> = parent_counts.iter().zip(lc).map(|(&p, &l)| p - l).collect();
            let g = parent_h
                - (left_n as f64 / n as f64) * impurity_counts(lc, left_n, gain)
                - (right_n as f64 / n as f64) * impurity_counts(&rc, right_n, gain);
            if best.is_none_or(|(bg, _, _)| g > bg) {
                best = Some((g, f, tau));
            }
        }
    }
    best.map(|(g, feature, threshold)| (SplitParams { feature, threshold }, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pure_sets_have_zero_impurity() {
        let labels = vec![1u32; 9];
        assert_eq!(impurity(&labels, 2, GainKind::Entropy), 0.0);
        assert_eq!(impurity(&labels, 2, GainKind::Gini), 0.0);
    }

    #[test]
    fn balanced_binary_impurity_is_closed_form() {
        let labels: Vec<u32> = (0..10).map(|i| i % 2).collect();
        assert!((impurity(&labels, 2, GainKind::Entropy) - 1.0).abs() < 1e-12);
        assert!((impurity(&labels, 2, GainKind::Gini) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn three_quarter_split_impurity() {
        let labels = vec![0, 0, 0, 1u32];
        let h = impurity(&labels, 2, GainKind::Entropy);
        assert!((h - 0.8112781244591328).abs() < 1e-9);
        let g = impurity(&labels, 2, GainKind::Gini);
        assert!((g - 0.375).abs() < 1e-12);
    }

    #[test]
    fn perfect_separation_gains_one_bit() {
        let parent: Vec<u32> = (0..16).map(|i| i % 2).collect();
        let left = vec![0u32; 8];
        let right = vec![1u32; 8];
        let g = info_gain(&parent, &left, &right, 2, GainKind::Entropy);
        assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_distributions_gain_nothing() {
        let parent: Vec<u32> = (0..12).map(|i| i % 2).collect();
        let left: Vec<u32> = (0..6).map(|i| i % 2).collect();
        let right = left.clone();
        let g = info_gain(&parent, &left, &right, 2, GainKind::Entropy);
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn lopsided_split_gain_is_closed_form() {
        // parent 8A+8B, left 6A+2B, right 2A+6B
        let parent: Vec<u32> = std::iter::repeat_n(0, 8)
            .chain(std::iter::repeat_n(1, 8))
            .collect();
        let left: Vec<u32> = std::iter::repeat_n(0, 6)
            .chain(std::iter::repeat_n(1, 2))
            .collect();
        let right: Vec<u32> = std::iter::repeat_n(0, 2)
            .chain(std::iter::repeat_n(1, 6))
            .collect();
        let g = info_gain(&parent, &left, &right, 2, GainKind::Entropy);
        assert!((g - (1.0 - 0.8112781244591328)).abs() < 1e-9, "gain {g}");
    }

    #[test]
    fn separable_one_dim_feature_gains_a_bit() {
        let data = vec![vec![0.0f32], vec![1.0f32], vec![0.0], vec![1.0]];
        let labels = vec![0u32, 1, 0, 1];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (sp, g) =
            best_split(&data, &labels, 2, &[0], 8, 1, GainKind::Entropy, &mut rng).unwrap();
        assert_eq!(sp.feature, 0);
        assert!(sp.threshold > 0.0 && sp.threshold < 1.0);
        assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_features_yield_no_split() {
        let data = vec![vec![0.5f32, 0.5], vec![0.5, 0.5], vec![0.5, 0.5]];
        let labels = vec![0u32, 1, 0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(best_split(&data, &labels, 2, &[0, 1], 8, 1, GainKind::Gini, &mut rng).is_none());
    }

    /// Exhaustive scan over the identical candidate set, with an
    /// independently written gain computation.
    #[allow(clippy::too_many_arguments, clippy::ptr_arg)]
    fn brute_force_best(
        data: &Vec<Vec<f32>>,
        labels: &[u32],
        k: usize,
        features: &[u32],
        n_thresholds: usize,
        min_child: usize,
        gain: GainKind,
        seed: u64,
    ) -> Option<(u32, f32, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = labels.len();
        let mut best: Option<(u32, f32, f64)> = None;
        for &f in features {
            let vals: Vec<f32> = (0..n).map(|i| data[i][f as usize]).collect();
            let mn = vals.iter().copied().fold(f32::INFINITY, f32::min);
            let mx = vals.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            if mx <= mn {
                continue;
            }
            // identical candidate generation, independent evaluation
            for tau in threshold_candidates(mn, mx, n_thresholds, &mut rng) {
                let mut left = Vec::new();
                let mut right = Vec::new();
                for i in 0..n {
                    if vals[i] < tau {
                        left.push(labels[i]);
                    } else {
                        right.push(labels[i]);
                    }
                }
                if left.len() < min_child || right.len() < min_child {
                    continue;
                }
                let g = info_gain(labels, &left, &right, k, gain);
                if best.is_none_or(|(_, _, bg)| g > bg) {
                    best = Some((f, tau, g));
                }
            }
        }
        best
    }

    #[test]
    fn best_split_matches_exhaustive_scan() {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
            let n = rng.gen_range(4..24);
            let k = 2 + (seed % 2) as usize;
            let data: Vec<Vec<f32>> = (0..n)
                .map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0f32)).collect())
                .collect();
            let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..k as u32)).collect();
            let gain = if seed % 2 == 0 {
                GainKind::Entropy
            } else {
                GainKind::Gini
            };

            let mut split_rng = ChaCha8Rng::seed_from_u64(seed);
            let got = best_split(&data, &labels, k, &[0, 1, 2], 8, 1, gain, &mut split_rng);
            let want = brute_force_best(&data, &labels, k, &[0, 1, 2], 8, 1, gain, seed);
            match (got, want) {
                (None, None) => {}
                (Some((sp, g)), Some((f, tau, bg))) => {
                    assert_eq!(sp.feature, f, "seed {seed}");
                    assert_eq!(sp.threshold, tau, "seed {seed}");
                    assert!((g - bg).abs() < 1e-12, "seed {seed}: {g} vs {bg}");
                }
                other => panic!("seed {seed}: disagreement {other:?}"),
            }
        }
    }

    proptest! {
        #[test]
        fn entropy_gain_is_nonnegative(
            labels in proptest::collection::vec(0u32..3, 2..40),
            cut in 0usize..40,
        ) {
            let cut = cut.min(labels.len());
            let (l, r) = labels.split_at(cut);
            let g = info_gain(&labels, l, r, 3, GainKind::Entropy);
            prop_assert!(g >= -1e-12, "gain {g}");
        }

        #[test]
        fn gini_gain_is_nonnegative(
            labels in proptest::collection::vec(0u32..4, 2..40),
            cut in 0usize..40,
        ) {
            let cut = cut.min(labels.len());
            let (l, r) = labels.split_at(cut);
            let g = info_gain(&labels, l, r, 4, GainKind::Gini);
            prop_assert!(g >= -1e-12, "gain {g}");
        }
    }
}
