//! Compute the feature channels for an image and look at what the split
//! functions actually see: 13 downsampled channel planes plus the
//! self-similarity planes, and the 7228-entry candidate feature vector of
//! one patch.
//!
//! ```bash
//! cargo run --release -p sedge --example compute_channels
//! ```

use sedge::channels::{compute_channels, extract_features, ChannelParams};
use sedge::eval;

fn main() -> sedge::Result<()> {
    // a synthetic image stands in for a photo; load_image works the same way
    let img = eval::corpus_to_dataset(eval::synth_corpus(7, 1, 128))
        .images
        .remove(0);
    println!(
        "input: {}x{} with {} planes",
        img.width(),
        img.height(),
        img.n_planes()
    );

    let params = ChannelParams::default();
    let cs = compute_channels(&img, &params)?;
    println!(
        "channel stack: {} channels at {}x{} (shrink {})",
        cs.n_channels(),
        cs.width,
        cs.height,
        cs.shrink
    );
    for (plane, name) in cs.channels.iter().zip(&cs.names) {
        let max = plane
            .data()
            .iter()
            .copied()
            .fold(f32::NEG_INFINITY, f32::max);
        println!("  {name:<14} mean {:>8.5}  max {max:>8.5}", plane.mean());
    }

    // candidate features for the 32x32 patch centered mid-image
    let center = (img.height() / 2, img.width() / 2);
    let features = extract_features(&cs, center, 32)?;
    let n_pixel = (32 / params.shrink) * (32 / params.shrink) * cs.n_channels();
    println!(
        "\npatch at {center:?}: {} candidate features ({} pixel lookups + {} pairwise diffs)",
        features.len(),
        n_pixel,
        features.len() - n_pixel
    );
    println!("first pixel lookups: {:?}", &features[..6]);
    println!(
        "first pairwise diffs: {:?}",
        &features[n_pixel..n_pixel + 6]
    );
    Ok(())
}
