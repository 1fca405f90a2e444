//! Parameter sweep: retrain and re-score the detector for each value of one
//! parameter, averaged over trials. This sweeps the sharpening step count,
//! which only affects detection, so the effect is purely the mask-to-color
//! alignment.
//!
//! ```bash
//! cargo run --release -p sedge --example sweep_parameter
//! ```

use sedge::detector::{self, DetectOptions};
use sedge::eval;
use sedge::forest::{train_forest, ForestParams};
use sedge::plane::FloatPlane;
use sedge::prelude::*;

fn main() -> sedge::Result<()> {
    let train_set = eval::corpus_to_dataset(eval::synth_corpus(4, 12, 80));
    let test_set = eval::corpus_to_dataset(eval::synth_corpus(5, 5, 80));

    println!("sharpen_steps  ODS (2 trials)");
    let mut last = None;
    for sharpen_steps in [0usize, 1, 2, 4] {
        let mut ods_sum = 0.0;
        for trial in 0..2u64 {
            let params = ForestParams {
                n_trees_eval: 2,
                n_patches: 3_000,
                seed: 7 + trial,
                ..ForestParams::default()
            };
            let (forest, _) = train_forest(&train_set, &params, &ChannelParams::default())?;
            let opts = DetectOptions {
                sharpen_steps,
                n_trees_eval: 2,
                ..DetectOptions::default()
            };
            let preds: Vec<FloatPlane> = test_set
                .images
                .iter()
                .map(|img| detector::detect(img, &forest, &opts))
                .collect::<sedge::Result<_>>()?;
            let (report, _) = eval::evaluate(&preds, &test_set.gts, 25, eval::DEFAULT_TOLERANCE)?;
            ods_sum += report.ods;
        }
        let mean = ods_sum / 2.0;
        let delta = last
            .map(|l: f64| format!("  ({:+.4})", mean - l))
            .unwrap_or_default();
        println!("{sharpen_steps:>13}  {mean:.4}{delta}");
        last = Some(mean);
    }
    println!("\n(the `sedge sweep` subcommand runs the same loop from the CLI)");
    Ok(())
}
