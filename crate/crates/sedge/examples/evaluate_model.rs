//! Full train/detect/benchmark loop on held-out synthetic data: trains a
//! forest, detects on 8 unseen images, and prints the PR curve and the
//! ODS / OIS / AP / R50 summary for the plain and sharpened detector.
//!
//! ```bash
//! cargo run --release -p sedge --example evaluate_model
//! ```

use sedge::detector::{self, DetectOptions};
use sedge::eval;
use sedge::forest::{train_forest, ForestParams};
use sedge::plane::FloatPlane;
use sedge::prelude::*;

fn main() -> sedge::Result<()> {
    let train_set = eval::corpus_to_dataset(eval::synth_corpus(5, 16, 96));
    let test_set = eval::corpus_to_dataset(eval::synth_corpus(97, 8, 96));
    let params = ForestParams {
        n_patches: 5_000,
        ..ForestParams::default()
    };
    let (forest, _) = train_forest(&train_set, &params, &ChannelParams::default())?;

    for sharpen_steps in [0usize, 2] {
        let opts = DetectOptions {
            sharpen_steps,
            ..DetectOptions::default()
        };
        let preds: Vec<FloatPlane> = test_set
            .images
            .iter()
            .map(|img| detector::detect(img, &forest, &opts))
            .collect::<sedge::Result<_>>()?;
        let (report, curves) = eval::evaluate(&preds, &test_set.gts, 25, eval::DEFAULT_TOLERANCE)?;

        let label = if sharpen_steps == 0 { "SE" } else { "SE+SH" };
        println!("\n{label}: thr / precision / recall / F");
        for p in curves.pooled.iter().step_by(4) {
            println!(
                "  {:.2}  {:.4}  {:.4}  {:.4}",
                p.threshold,
                p.precision,
                p.recall,
                p.f_measure()
            );
        }
        println!(
            "{label}: ODS {:.4} (thr {:.2})  OIS {:.4}  AP {:.4}  R50 {:.4}",
            report.ods, report.ods_threshold, report.ois, report.ap, report.r50
        );
    }
    Ok(())
}
