//! Train a structured edge forest on a synthetic corpus and save it as a
//! model file.
//!
//! ```bash
//! cargo run --release -p sedge --example train_model
//! ```

use sedge::eval;
use sedge::forest::{train_forest, ForestParams};
use sedge::model;
use sedge::prelude::*;

fn main() -> sedge::Result<()> {
    let dataset = eval::corpus_to_dataset(eval::synth_corpus(3, 16, 96));
    println!("training corpus: {} images of 96x96", dataset.len());

    // desk-scale settings; bump n_patches for real data
    let params = ForestParams {
        n_patches: 5_000,
        seed: 9,
        ..ForestParams::default()
    };
    let start = std::time::Instant::now();
    let (forest, stats) = train_forest(&dataset, &params, &ChannelParams::default())?;
    println!(
        "trained {} trees in {:.1?} ({} candidate features per patch)",
        forest.trees.len(),
        start.elapsed(),
        forest.feature_count
    );
    for (t, s) in stats.per_tree.iter().enumerate() {
        println!(
            "  tree {t}: depth {:2}, {:4} leaves from {} patches",
            s.depth, s.n_leaves, s.n_samples
        );
    }

    let path = std::env::temp_dir().join("sedge_example_model.sedf");
    model::save_model(&forest, &path)?;
    let size_kb = std::fs::metadata(&path)
        .map(|m| m.len() / 1024)
        .unwrap_or(0);
    println!(
        "saved {} ({size_kb} KiB); reload it with model::load_model",
        path.display()
    );

    let reloaded = model::load_model(&path)?;
    assert_eq!(model::to_bytes(&forest), model::to_bytes(&reloaded));
    println!("roundtrip check: byte-identical");
    Ok(())
}
