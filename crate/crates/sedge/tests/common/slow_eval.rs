//! Slow, independent reference implementation of the boundary benchmark:
//! all-pairs greedy matching and from-first-principles ODS/OIS/AP/R50.
//! Shares nothing with the library's evaluation path except the thinning
//! operator and the ground-truth types.

use sedge::dataset::{BinaryMap, GroundTruth};
use sedge::detector::nms;
use sedge::eval::f_measure;
use sedge::plane::FloatPlane;

pub struct SlowCounts {
    pub matched_pred: usize,
    pub n_pred: usize,
    pub matched_gt: usize,
    pub n_gt: usize,
}

/// All-pairs greedy matcher (no spatial indexing): pairs sorted by
/// (squared distance, pred raster index, gt raster index).
pub fn slow_match(pred: &BinaryMap, gts: &[BinaryMap], tol: f64) -> SlowCounts {
    let (w, h) = (pred.width(), pred.height());
    let radius2 = (tol * ((w * w + h * h) as f64).sqrt()).powi(2);
    let pred_px = pred.positions();
    let mut matched_any = vec![false; pred_px.len()];
    let mut matched_gt = 0;
    let mut n_gt = 0;
    for g in gts {
        let gt_px = g.positions();
        n_gt += gt_px.len();
        let mut pairs = Vec::new();
        for (pi, &(pr, pc)) in pred_px.iter().enumerate() {
            for (gi, &(gr, gc)) in gt_px.iter().enumerate() {
                let dr = pr as i64 - gr as i64;
                let dc = pc as i64 - gc as i64;
                let d2 = (dr * dr + dc * dc) as u64;
                if (d2 as f64) <= radius2 {
                    pairs.push((d2, pi, gi));
                }
            }
        }
        pairs.sort_unstable();
        let mut p_used = vec![false; pred_px.len()];
        let mut g_used = vec![false; gt_px.len()];
        for (_, pi, gi) in pairs {
            if !p_used[pi] && !g_used[gi] {
                p_used[pi] = true;
                g_used[gi] = true;
                matched_any[pi] = true;
                matched_gt += 1;
            }
        }
    }
    SlowCounts {
        matched_pred: matched_any.iter().filter(|&&b| b).count(),
        n_pred: pred_px.len(),
        matched_gt,
        n_gt,
    }
}

pub struct SlowReport {
    pub ods: f64,
    pub ois: f64,
    pub ap: f64,
    pub r50: f64,
}

pub struct SlowPoint {
    pub tp_pred: usize,
    pub n_pred: usize,
    pub tp_gt: usize,
    pub n_gt: usize,
}

impl SlowPoint {
    pub fn precision(&self) -> f64 {
        if self.n_pred > 0 {
            self.tp_pred as f64 / self.n_pred as f64
        } else {
            0.0
        }
    }

    pub fn recall(&self) -> f64 {
        if self.n_gt > 0 {
            self.tp_gt as f64 / self.n_gt as f64
        } else {
            0.0
        }
    }

    pub fn f(&self) -> f64 {
        f_measure(self.precision(), self.recall())
    }
}

/// Full slow evaluation from probability maps: thin once, then match per
/// threshold, pool, and summarize, all from first principles.
pub fn slow_evaluate(
    preds: &[FloatPlane],
    gts: &[GroundTruth],
    n_thresholds: usize,
    tol: f64,
) -> SlowReport {
    let thresholds: Vec<f64> = (1..=n_thresholds)
        .map(|i| i as f64 / (n_thresholds + 1) as f64)
        .collect();
    let per_image: Vec<Vec<SlowPoint>> = preds
        .iter()
        .zip(gts)
        .map(|(p, gt)| {
            let thin = nms(p);
            thresholds
                .iter()
                .map(|&t| {
                    let b = BinaryMap::from_fn(thin.width(), thin.height(), |r, c| {
                        thin.get(r, c) as f64 >= t
                    });
                    let m = slow_match(&b, &gt.boundaries, tol);
                    SlowPoint {
                        tp_pred: m.matched_pred,
                        n_pred: m.n_pred,
                        tp_gt: m.matched_gt,
                        n_gt: m.n_gt,
                    }
                })
                .collect()
        })
        .collect();

    let pooled: Vec<SlowPoint> = (0..n_thresholds)
        .map(|j| SlowPoint {
            tp_pred: per_image.iter().map(|img| img[j].tp_pred).sum(),
            n_pred: per_image.iter().map(|img| img[j].n_pred).sum(),
            tp_gt: per_image.iter().map(|img| img[j].tp_gt).sum(),
            n_gt: per_image.iter().map(|img| img[j].n_gt).sum(),
        })
        .collect();

    // ODS: best pooled F
    let ods = pooled.iter().map(|p| p.f()).fold(0.0f64, f64::max);

    // OIS: per-image best threshold (ties -> lowest), counts pooled
    let mut agg = SlowPoint {
        tp_pred: 0,
        n_pred: 0,
        tp_gt: 0,
        n_gt: 0,
    };
    for img in &per_image {
        let mut best = 0usize;
        for (j, p) in img.iter().enumerate() {
            if p.f() > img[best].f() {
                best = j;
            }
        }
        agg.tp_pred += img[best].tp_pred;
        agg.n_pred += img[best].n_pred;
        agg.tp_gt += img[best].tp_gt;
        agg.n_gt += img[best].n_gt;
    }
    let ois = agg.f();

    // AP: integrate max-precision-at-recall>=r over recall segments by
    // scanning all points per segment (quadratic on purpose)
    let mut recalls: Vec<f64> = pooled.iter().map(|p| p.recall()).collect();
    recalls.push(0.0);
    recalls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    recalls.dedup();
    let mut ap = 0.0;
    for seg in recalls.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let pmax = pooled
            .iter()
            .filter(|p| p.recall() >= hi)
            .map(|p| p.precision())
            .fold(0.0f64, f64::max);
        ap += (hi - lo) * pmax;
    }

    // R50: max recall at precision >= 0.5, with linear interpolation
    // between threshold-adjacent points
    let mut r50 = f64::NEG_INFINITY;
    for p in &pooled {
        if p.precision() >= 0.5 {
            r50 = r50.max(p.recall());
        }
    }
    for w in pooled.windows(2) {
        let (p1, r1) = (w[0].precision(), w[0].recall());
        let (p2, r2) = (w[1].precision(), w[1].recall());
        if (p1 < 0.5) != (p2 < 0.5) && (p2 - p1).abs() > 1e-15 {
            let t = (0.5 - p1) / (p2 - p1);
            r50 = r50.max(r1 + t * (r2 - r1));
        }
    }
    if r50 == f64::NEG_INFINITY {
        r50 = 0.0;
    }

    SlowReport { ods, ois, ap, r50 }
}
