//! Run the detector variants (SE, SE+SH, SE+MS+SH) on an image and write
//! the edge probability maps as PNGs.
//!
//! ```bash
//! cargo run --release -p sedge --example detect_edges
//! ```

use sedge::detector::{self, DetectOptions};
use sedge::eval;
use sedge::forest::{train_forest, ForestParams};
use sedge::plane::save_gray_png;
use sedge::prelude::*;

fn main() -> sedge::Result<()> {
    let train_set = eval::corpus_to_dataset(eval::synth_corpus(3, 12, 96));
    let params = ForestParams {
        n_patches: 4_000,
        ..ForestParams::default()
    };
    let (forest, _) = train_forest(&train_set, &params, &ChannelParams::default())?;

    let img = eval::corpus_to_dataset(eval::synth_corpus(81, 1, 160))
        .images
        .remove(0);
    let out_dir = std::env::temp_dir().join("sedge_example_detect");
    std::fs::create_dir_all(&out_dir).ok();

    for (label, sharpen_steps, multiscale) in
        [("se", 0, false), ("se_sh", 2, false), ("se_ms_sh", 2, true)]
    {
        let opts = DetectOptions {
            sharpen_steps,
            multiscale,
            ..DetectOptions::default()
        };
        let start = std::time::Instant::now();
        let edges = detector::run(&img, &forest, &opts)?;
        let secs = start.elapsed().as_secs_f64();
        let png = out_dir.join(format!("{label}.png"));
        save_gray_png(&edges, &png, false)?;
        let thin = detector::nms(&edges);
        save_gray_png(&thin, &out_dir.join(format!("{label}_thin.png")), false)?;
        println!(
            "{label:<9} {:.3}s ({:.2} MP/s)  max {:.3}  wrote {}",
            secs,
            (img.width() * img.height()) as f64 / 1e6 / secs,
            edges.max(),
            png.display()
        );
    }
    Ok(())
}
