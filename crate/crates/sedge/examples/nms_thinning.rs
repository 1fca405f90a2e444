//! Non-maximal suppression on a diffuse response: a 5-pixel-thick band with
//! a soft profile collapses to a single ridge along the edge normal.
//!
//! ```bash
//! cargo run -p sedge --example nms_thinning
//! ```

use sedge::detector::{nms, nms_with, NmsParams};
use sedge::plane::FloatPlane;

fn render(e: &FloatPlane) -> String {
    let glyphs = [' ', '.', ':', '+', '*', '#'];
    (0..e.height())
        .map(|r| {
            (0..e.width())
                .map(|c| {
                    let v = e.get(r, c).clamp(0.0, 1.0);
                    glyphs[(v * (glyphs.len() - 1) as f32).round() as usize]
                })
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn main() {
    // diffuse diagonal-ish band: strongest in the middle, fading outward
    let e = FloatPlane::from_fn(48, 20, |r, c| {
        let center = 18.0 + r as f32 * 0.6;
        let d = (c as f32 - center).abs();
        (1.0 - d / 3.5).max(0.0)
    });
    println!("diffuse response:\n{}", render(&e));

    let thin = nms(&e);
    println!("\nafter non-maximal suppression:\n{}", render(&thin));
    println!(
        "\nsurviving pixels: {} of {}",
        thin.data().iter().filter(|&&v| v > 0.0).count(),
        e.data().iter().filter(|&&v| v > 0.0).count()
    );

    // BSDS-style border suppression is available as an option
    let bordered = nms_with(
        &e,
        &NmsParams {
            border: 4,
            ..NmsParams::default()
        },
    );
    println!(
        "with a 4px border zeroed: {} survivors",
        bordered.data().iter().filter(|&&v| v > 0.0).count()
    );
}
