//! Boundary-detection benchmark: correspondence matching of thinned
//! predictions against multi-annotator ground truth, pooled
//! precision/recall curves, and the ODS / OIS / AP / R50 summary measures.
//!
//! Evaluation always thins and binarizes internally (non-maximal
//! suppression, then per-threshold binarization), so callers cannot
//! accidentally submit thick probability maps.

mod synth;

pub use synth::{corpus_to_dataset, synth_corpus, synth_corpus_with, SynthParams};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{BinaryMap, GroundTruth};
use crate::detector::{nms, EdgeProbMap};
use crate::error::{Error, Result};

/// Match slop as a fraction of the image diagonal (BSDS convention).
pub const DEFAULT_TOLERANCE: f64 = 0.0075;
/// Threshold count for full-quality evaluation.
pub const DEFAULT_THRESHOLDS: usize = 99;

/// Outcome of matching one thinned prediction against all annotators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchCounts {
    /// Predicted pixels matched in at least one annotator map.
    pub matched_pred: usize,
    /// Total predicted pixels.
    pub n_pred: usize,
    /// Ground-truth pixels matched, summed over annotators.
    pub matched_gt: usize,
    /// Total ground-truth pixels, summed over annotators.
    pub n_gt: usize,
}

/// Match a thinned binary prediction against a set of annotator boundary
/// maps.
///
/// Matching against each map is one-to-one and greedy in ascending pixel
/// distance (ties broken by prediction then ground-truth raster index);
/// a pair is admissible within `tol * diagonal`. A predicted pixel is a
/// true positive if it matched in at least one map, while each map's pixels
/// are counted matched/unmatched independently.
pub fn match_boundaries(
    pred: &BinaryMap,
    gt_boundaries: &[BinaryMap],
    tol: f64,
) -> Result<MatchCounts> {
    let (w, h) = (pred.width(), pred.height());
    for g in gt_boundaries {
        if g.width() != w || g.height() != h {
            return Err(Error::Mismatch(format!(
                "prediction is {}x{} but ground truth is {}x{}",
                w,
                h,
                g.width(),
                g.height()
            )));
        }
    }
    let radius = tol * ((w * w + h * h) as f64).sqrt();
    let radius2 = radius * radius;
    let reach = radius.floor() as isize;

    let pred_px = pred.positions();
    let mut pred_matched_any = vec![false; pred_px.len()];
    let mut matched_gt = 0usize;
    let mut n_gt = 0usize;

    for g in gt_boundaries {
        let gt_px = g.positions();
        n_gt += gt_px.len();
        if gt_px.is_empty() || pred_px.is_empty() {
            continue;
        }
        // bucket ground-truth pixels for radius queries
        let cell = (reach.max(1)) as usize + 1;
        let (bw, bh) = (w.div_ceil(cell), h.div_ceil(cell));
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); bw * bh];
        for (gi, &(r, c)) in gt_px.iter().enumerate() {
            buckets[(r / cell) * bw + c / cell].push(gi as u32);
        }

        // admissible pairs sorted by (squared distance, pred, gt)
        let mut pairs: Vec<(u64, u32, u32)> = Vec::new();
        for (pi, &(pr, pc)) in pred_px.iter().enumerate() {
            let b_r = (pr / cell) as isize;
            let b_c = (pc / cell) as isize;
            for dbr in -1..=1isize {
                for dbc in -1..=1isize {
                    let (br, bc) = (b_r + dbr, b_c + dbc);
                    if br < 0 || bc < 0 || br as usize >= bh || bc as usize >= bw {
                        continue;
                    }
                    for &gi in &buckets[br as usize * bw + bc as usize] {
                        let (gr, gc) = gt_px[gi as usize];
                        let dr = pr as i64 - gr as i64;
                        let dc = pc as i64 - gc as i64;
                        let d2 = (dr * dr + dc * dc) as u64;
                        if (d2 as f64) <= radius2 {
                            pairs.push((d2, pi as u32, gi));
                        }
                    }
                }
            }
        }
        pairs.sort_unstable();

        let mut p_taken = vec![false; pred_px.len()];
        let mut g_taken = vec![false; gt_px.len()];
        for (_, pi, gi) in pairs {
            let (pi, gi) = (pi as usize, gi as usize);
            if p_taken[pi] || g_taken[gi] {
                continue;
            }
            p_taken[pi] = true;
            g_taken[gi] = true;
            pred_matched_any[pi] = true;
            matched_gt += 1;
        }
    }

    Ok(MatchCounts {
        matched_pred: pred_matched_any.iter().filter(|&&b| b).count(),
        n_pred: pred_px.len(),
        matched_gt,
        n_gt,
    })
}

/// One point of a precision/recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub tp_pred: usize,
    pub fp_pred: usize,
    pub tp_gt: usize,
    pub fn_gt: usize,
    pub precision: f64,
    pub recall: f64,
}

impl PrPoint {
    fn from_counts(threshold: f64, c: MatchCounts) -> Self {
        let precision = if c.n_pred > 0 {
            c.matched_pred as f64 / c.n_pred as f64
        } else {
            0.0
        };
        let recall = if c.n_gt > 0 {
            c.matched_gt as f64 / c.n_gt as f64
        } else {
            0.0
        };
        PrPoint {
            threshold,
            tp_pred: c.matched_pred,
            fp_pred: c.n_pred - c.matched_pred,
            tp_gt: c.matched_gt,
            fn_gt: c.n_gt - c.matched_gt,
            precision,
            recall,
        }
    }

    pub fn f_measure(&self) -> f64 {
        f_measure(self.precision, self.recall)
    }
}

pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Dataset-pooled curve plus the per-image curves OIS needs.
#[derive(Debug, Clone)]
pub struct PrCurves {
    pub pooled: Vec<PrPoint>,
    pub per_image: Vec<Vec<PrPoint>>,
}

/// Evaluate probability maps against ground truth over `n_thresholds`
/// thresholds uniform in (0, 1). Each prediction is thinned once with NMS,
/// binarized per threshold (`value >= t`), matched per image, and pooled.
pub fn pr_curve(
    preds: &[EdgeProbMap],
    gts: &[GroundTruth],
    n_thresholds: usize,
    tol: f64,
) -> Result<PrCurves> {
    if preds.len() != gts.len() {
        return Err(Error::Mismatch(format!(
            "{} predictions for {} ground-truth images",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let thresholds: Vec<f64> = (1..=n_thresholds)
        .map(|i| i as f64 / (n_thresholds + 1) as f64)
        .collect();

    let per_image: Vec<Vec<PrPoint>> = preds
        .par_iter()
        .zip(gts.par_iter())
        .map(|(pred, gt)| {
            let thin = nms(pred);
            thresholds
                .iter()
                .map(|&t| {
                    let binary = BinaryMap::from_fn(thin.width(), thin.height(), |r, c| {
                        thin.get(r, c) as f64 >= t
                    });
                    match_boundaries(&binary, &gt.boundaries, tol)
                        .map(|c| PrPoint::from_counts(t, c))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let pooled = (0..n_thresholds)
        .map(|j| {
            let c = MatchCounts {
                matched_pred: per_image.iter().map(|img| img[j].tp_pred).sum(),
                n_pred: per_image
                    .iter()
                    .map(|img| img[j].tp_pred + img[j].fp_pred)
                    .sum(),
                matched_gt: per_image.iter().map(|img| img[j].tp_gt).sum(),
                n_gt: per_image
                    .iter()
                    .map(|img| img[j].tp_gt + img[j].fn_gt)
                    .sum(),
            };
            PrPoint::from_counts(thresholds[j], c)
        })
        .collect();

    Ok(PrCurves { pooled, per_image })
}

/// Benchmark summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Best F-measure at a single dataset-wide threshold.
    pub ods: f64,
    pub ods_threshold: f64,
    /// F-measure from per-image best-threshold counts, pooled.
    pub ois: f64,
    /// Area under the interpolated precision(recall) curve.
    pub ap: f64,
    /// Maximum recall at precision >= 0.5 (linearly interpolated).
    pub r50: f64,
    pub n_thresholds: usize,
}

/// Summarize a curve into ODS / OIS / AP / R50.
pub fn summarize(curves: &PrCurves) -> EvalReport {
    let pooled = &curves.pooled;
    assert!(!pooled.is_empty(), "empty curve");

    let mut ods = 0.0f64;
    let mut ods_threshold = pooled[0].threshold;
    for p in pooled {
        let f = p.f_measure();
        if f > ods {
            ods = f;
            ods_threshold = p.threshold;
        }
    }

    // OIS: pool each image's counts at its own best-F threshold
    let mut c = MatchCounts {
        matched_pred: 0,
        n_pred: 0,
        matched_gt: 0,
        n_gt: 0,
    };
    for img in &curves.per_image {
        let best = img
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.f_measure()
                    .partial_cmp(&b.f_measure())
                    .unwrap()
                    .then(ib.cmp(ia)) // ties: lowest threshold index
            })
            .map(|(_, p)| p)
            .expect("non-empty per-image curve");
        c.matched_pred += best.tp_pred;
        c.n_pred += best.tp_pred + best.fp_pred;
        c.matched_gt += best.tp_gt;
        c.n_gt += best.tp_gt + best.fn_gt;
    }
    let ois = PrPoint::from_counts(0.0, c).f_measure();

    EvalReport {
        ods,
        ods_threshold,
        ois,
        ap: average_precision(pooled),
        r50: recall_at_precision(pooled, 0.5),
        n_thresholds: pooled.len(),
    }
}

/// Area under precision(recall) over [0, 1]: precision is interpolated as
/// the running max from the high-recall side and uncovered recall counts as
/// zero precision.
fn average_precision(points: &[PrPoint]) -> f64 {
    let mut rp: Vec<(f64, f64)> = points.iter().map(|p| (p.recall, p.precision)).collect();
    rp.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // suffix max of precision in recall order
    let mut interp = vec![0.0f64; rp.len()];
    let mut run = 0.0f64;
    for i in (0..rp.len()).rev() {
        run = run.max(rp[i].1);
        interp[i] = run;
    }
    let mut ap = 0.0f64;
    let mut prev_r = 0.0f64;
    for (i, &(r, _)) in rp.iter().enumerate() {
        if r > prev_r {
            ap += (r - prev_r) * interp[i];
            prev_r = r;
        }
    }
    ap
}

/// Maximum recall at precision >= `target`, linearly interpolating between
/// threshold-adjacent curve points; zero when the curve never reaches the
/// target precision.
fn recall_at_precision(points: &[PrPoint], target: f64) -> f64 {
    let mut best = 0.0f64;
    let mut reach = false;
    for p in points {
        if p.precision >= target {
            reach = true;
            best = best.max(p.recall);
        }
    }
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let crosses = (a.precision < target) != (b.precision < target);
        if crosses && (b.precision - a.precision).abs() > 1e-15 {
            let t = (target - a.precision) / (b.precision - a.precision);
            let r = a.recall + t * (b.recall - a.recall);
            reach = true;
            best = best.max(r);
        }
    }
    if reach {
        best
    } else {
        0.0
    }
}

/// Convenience wrapper: curve plus summary in one call.
pub fn evaluate(
    preds: &[EdgeProbMap],
    gts: &[GroundTruth],
    n_thresholds: usize,
    tol: f64,
) -> Result<(EvalReport, PrCurves)> {
    let curves = pr_curve(preds, gts, n_thresholds, tol)?;
    let report = summarize(&curves);
    Ok((report, curves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::FloatPlane;

    fn line_map(w: usize, h: usize, col: usize) -> BinaryMap {
        BinaryMap::from_fn(w, h, |_, c| c == col)
    }

    #[test]
    fn identical_maps_match_fully() {
        let m = line_map(20, 20, 10);
        let c = match_boundaries(&m, std::slice::from_ref(&m), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(c.matched_pred, 20);
        assert_eq!(c.n_pred, 20);
        assert_eq!(c.matched_gt, 20);
        assert_eq!(c.n_gt, 20);
    }

    #[test]
    fn empty_prediction_matches_nothing() {
        let pred = BinaryMap::new(16, 16);
        let gt = line_map(16, 16, 8);
        let c = match_boundaries(&pred, &[gt], DEFAULT_TOLERANCE).unwrap();
        assert_eq!(c.matched_pred, 0);
        assert_eq!(c.matched_gt, 0);
        assert_eq!(c.n_gt, 16);
    }

    #[test]
    fn one_pixel_shift_matches_fully_within_tolerance() {
        let gt = line_map(40, 40, 20);
        let pred = line_map(40, 40, 21);
        // tol * diag >= 1.5 pixels
        let tol = 1.5 / (40.0f64 * 40.0 * 2.0).sqrt();
        let c = match_boundaries(&pred, &[gt], tol).unwrap();
        assert_eq!(c.matched_pred, 40);
        assert_eq!(c.matched_gt, 40);
    }

    #[test]
    fn matching_is_symmetric_when_pred_equals_gt() {
        let m = BinaryMap::from_fn(24, 24, |r, c| (r * 7 + c * 3) % 11 == 0);
        let c = match_boundaries(&m, std::slice::from_ref(&m), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(c.matched_pred, c.matched_gt);
        assert_eq!(c.n_pred, c.n_gt);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let pred = BinaryMap::new(10, 10);
        let gt = BinaryMap::new(11, 10);
        assert!(match_boundaries(&pred, &[gt], DEFAULT_TOLERANCE).is_err());
    }

    fn single_line_gt(w: usize, h: usize, col: usize) -> GroundTruth {
        let seg =
            crate::dataset::SegMap::new(w, h, (0..w * h).map(|j| (j % w >= col) as u32).collect());
        GroundTruth::from_segmentations(vec![seg])
    }

    #[test]
    fn perfect_predictor_scores_one() {
        let gts: Vec<GroundTruth> = (0..3).map(|i| single_line_gt(32, 32, 10 + 4 * i)).collect();
        let preds: Vec<FloatPlane> = gts
            .iter()
            .map(|gt| {
                FloatPlane::from_fn(
                    32,
                    32,
                    |r, c| if gt.boundaries[0].get(r, c) { 1.0 } else { 0.0 },
                )
            })
            .collect();
        let (report, curves) = evaluate(&preds, &gts, 25, DEFAULT_TOLERANCE).unwrap();
        for p in &curves.pooled {
            assert!(
                (p.precision - 1.0).abs() < 1e-12,
                "precision {}",
                p.precision
            );
            assert!((p.recall - 1.0).abs() < 1e-12, "recall {}", p.recall);
        }
        assert_eq!(report.ods, 1.0);
        assert_eq!(report.ois, 1.0);
        assert!((report.ap - 1.0).abs() < 1e-12);
        assert_eq!(report.r50, 1.0);
    }

    #[test]
    fn all_zero_predictions_score_zero() {
        let gts: Vec<GroundTruth> = (0..2).map(|_| single_line_gt(24, 24, 12)).collect();
        let preds = vec![FloatPlane::new(24, 24), FloatPlane::new(24, 24)];
        let (report, _) = evaluate(&preds, &gts, 9, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(report.ods, 0.0);
        assert_eq!(report.ois, 0.0);
        assert_eq!(report.ap, 0.0);
        assert_eq!(report.r50, 0.0);
    }

    fn point(t: f64, p: f64, r: f64) -> PrPoint {
        // fabricate integer counts that reproduce p and r exactly on nice fractions
        let n_pred = 100usize;
        let tp = (p * 100.0).round() as usize;
        let n_gt = 100usize;
        let tpg = (r * 100.0).round() as usize;
        PrPoint {
            threshold: t,
            tp_pred: tp,
            fp_pred: n_pred - tp,
            tp_gt: tpg,
            fn_gt: n_gt - tpg,
            precision: p,
            recall: r,
        }
    }

    #[test]
    fn two_point_curve_closed_form() {
        let pooled = vec![point(0.25, 1.0, 0.5), point(0.75, 0.5, 1.0)];
        let curves = PrCurves {
            per_image: vec![pooled.clone()],
            pooled,
        };
        let report = summarize(&curves);
        assert!((report.ods - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.r50, 1.0);
        // AP: interpolated precision is 1.0 on [0,0.5], 0.5 on (0.5,1.0]
        assert!((report.ap - 0.75).abs() < 1e-12);
    }

    #[test]
    fn single_perfect_point_scores_one() {
        let pooled = vec![point(0.5, 1.0, 1.0)];
        let curves = PrCurves {
            per_image: vec![pooled.clone()],
            pooled,
        };
        let report = summarize(&curves);
        assert_eq!(report.ods, 1.0);
        assert_eq!(report.ois, 1.0);
    }

    #[test]
    fn r50_is_zero_when_precision_stays_low() {
        let pooled = vec![point(0.2, 0.3, 0.9), point(0.8, 0.4, 0.5)];
        let curves = PrCurves {
            per_image: vec![pooled.clone()],
            pooled,
        };
        assert_eq!(summarize(&curves).r50, 0.0);
    }

    #[test]
    fn r50_interpolates_between_points() {
        // precision crosses 0.5 between the two points
        let pooled = vec![point(0.2, 0.4, 1.0), point(0.8, 0.6, 0.5)];
        let curves = PrCurves {
            per_image: vec![pooled.clone()],
            pooled,
        };
        let r50 = summarize(&curves).r50;
        // linear interpolation: t = (0.5-0.4)/(0.6-0.4) = 0.5 -> r = 0.75
        assert!((r50 - 0.75).abs() < 1e-12, "r50 {r50}");
    }

    #[test]
    fn metrics_ignore_image_order() {
        let gts: Vec<GroundTruth> = (0..4).map(|i| single_line_gt(24, 24, 6 + 3 * i)).collect();
        let preds: Vec<FloatPlane> = gts
            .iter()
            .enumerate()
            .map(|(i, gt)| {
                FloatPlane::from_fn(24, 24, |r, c| {
                    if gt.boundaries[0].get(r, c) && (r + i) % 3 != 0 {
                        0.4 + 0.1 * i as f32
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        let (a, _) = evaluate(&preds, &gts, 15, DEFAULT_TOLERANCE).unwrap();
        let mut rev_p = preds.clone();
        rev_p.reverse();
        let mut rev_g = gts.clone();
        rev_g.reverse();
        let (b, _) = evaluate(&rev_p, &rev_g, 15, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(a, b);
    }
}
