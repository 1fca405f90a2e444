//! Generate a synthetic labeled dataset on disk in the layout the train
//! and eval commands read (`images/<id>.png`,
//! `groundtruth/<id>/<annotator>.png`).
//!
//! ```bash
//! cargo run -p sedge --example synth_dataset
//! ```

use sedge::dataset::save_dataset;
use sedge::eval::{corpus_to_dataset, synth_corpus_with, SynthParams};

fn main() -> sedge::Result<()> {
    let params = SynthParams {
        seed: 42,
        n_images: 12,
        width: 128,
        height: 128,
        min_segments: 2,
        max_segments: 8,
        noise_sigma: 0.02,
        ..SynthParams::default()
    };
    let dataset = corpus_to_dataset(synth_corpus_with(&params));

    for (id, gt) in dataset.ids.iter().zip(&dataset.gts).take(4) {
        let boundary_px = gt.boundaries[0].count_ones();
        let density = boundary_px as f64 / (params.width * params.height) as f64;
        println!(
            "{id}: {boundary_px} boundary pixels ({:.2}% of the image)",
            density * 100.0
        );
    }

    let dir = std::env::temp_dir().join("sedge_example_dataset");
    save_dataset(&dataset, &dir)?;
    println!("\nwrote {} images to {}", dataset.len(), dir.display());
    println!("train on it with:");
    println!(
        "  cargo run --release -p sedge -- train --dataset {} --output /tmp/model.sedf --patches 5000",
        dir.display()
    );
    Ok(())
}
