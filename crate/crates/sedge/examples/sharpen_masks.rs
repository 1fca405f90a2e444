//! Mask sharpening in isolation: a predicted segmentation mask whose
//! boundary is off by two pixels gets pulled onto the true color edge.
//!
//! ```bash
//! cargo run -p sedge --example sharpen_masks
//! ```

use sedge::detector::{sharpen, ColorPatch};
use sedge::forest::{derive_edges, SegPatch};

fn render(seg: &SegPatch) -> String {
    let e = derive_edges(seg);
    (0..seg.side())
        .map(|r| {
            (0..seg.side())
                .map(|c| if e.get(r, c) { '#' } else { '.' })
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn main() {
    let side = 16;
    // image colors step at column 8
    let planes: Vec<Vec<f32>> = (0..3)
        .map(|p| {
            (0..side * side)
                .map(|j| {
                    if j % side < 8 {
                        0.2 + 0.05 * p as f32
                    } else {
                        0.8 - 0.05 * p as f32
                    }
                })
                .collect()
        })
        .collect();
    let colors = ColorPatch::from_values(side, planes);

    // the predicted mask thinks the boundary is at column 6
    let offset = SegPatch::from_ids(
        side,
        &(0..side * side)
            .map(|j| (j % side >= 6) as u32)
            .collect::<Vec<_>>(),
    );

    println!("predicted mask edge (offset by 2px):\n{}", render(&offset));
    for steps in 1..=2 {
        let sharpened = sharpen(&colors, &offset, steps);
        println!(
            "\nafter {steps} sharpening step(s):\n{}",
            render(&sharpened)
        );
    }
}
