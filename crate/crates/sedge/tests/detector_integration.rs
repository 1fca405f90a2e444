//! End-to-end detector behavior on trained synthetic models.

mod common;

use common::fixture;
use sedge::detector::{
    detect, detect_with_votes, multiscale_detect, tree_votes_at, DetectOptions, TreePattern,
};
use sedge::eval;
use sedge::plane::{FloatPlane, Image};

fn se_opts(sharpen: usize) -> DetectOptions {
    DetectOptions {
        sharpen_steps: sharpen,
        ..DetectOptions::default()
    }
}

#[test]
fn every_pixel_gets_the_full_vote_count() {
    let fx = fixture();
    let img = &fx.test_set.images[0];
    let (_, votes) = detect_with_votes(img, &fx.forest, &se_opts(0)).unwrap();
    // stride 2, d_out 16, T 4 -> (16/2)^2 * 4 = 256 votes everywhere
    assert!(votes.iter().all(|&v| v == 256));
}

#[test]
fn detection_stays_in_unit_range() {
    let fx = fixture();
    for opts in [se_opts(0), se_opts(2)] {
        let e = detect(&fx.test_set.images[1], &fx.forest, &opts).unwrap();
        assert!(e
            .data()
            .iter()
            .all(|&v| (0.0..=1.0).contains(&v) && v.is_finite()));
    }
}

#[test]
fn constant_image_yields_a_silent_map() {
    let fx = fixture();
    let img = Image::new(
        (0..3)
            .map(|k| FloatPlane::from_vec(64, 64, vec![0.2 + 0.2 * k as f32; 64 * 64]))
            .collect(),
    )
    .unwrap();
    let e = detect(&img, &fx.forest, &se_opts(0)).unwrap();
    // no gradient features fire; every reached leaf should be (near) edgeless
    assert!(e.mean() < 0.02, "mean response {}", e.mean());
}

#[test]
fn boundary_response_dominates_off_boundary() {
    let fx = fixture();
    // flat two-region image with a straight vertical boundary
    let img = Image::new(
        (0..3)
            .map(|k| {
                FloatPlane::from_fn(96, 96, |_, c| {
                    if c < 48 {
                        0.25 + 0.05 * k as f32
                    } else {
                        0.75 - 0.05 * k as f32
                    }
                })
            })
            .collect(),
    )
    .unwrap();
    let e = detect(&img, &fx.forest, &se_opts(2)).unwrap();
    let mut on_boundary = 0.0f32;
    let mut off: Vec<f32> = Vec::new();
    for r in 0..96 {
        for c in 0..96 {
            let d = (c as i32 - 48).abs();
            if d <= 1 {
                on_boundary = on_boundary.max(e.get(r, c));
            } else if d > 5 {
                off.push(e.get(r, c));
            }
        }
    }
    off.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_off = off[off.len() / 2];
    assert!(on_boundary > 0.2, "boundary response {on_boundary}");
    assert!(
        on_boundary >= 5.0 * median_off,
        "boundary {on_boundary} vs off-median {median_off}"
    );
}

#[test]
fn checkerboard_uses_all_trees_and_separates_neighbors() {
    let n_eval = 4;
    let n_total = 2 * n_eval;
    let mut used = vec![false; n_total];
    for gy in 0..6 {
        for gx in 0..6 {
            let here: Vec<usize> = (0..n_total)
                .filter(|&t| tree_votes_at(TreePattern::Checkerboard, gx, gy, t, n_eval))
                .collect();
            assert_eq!(here.len(), n_eval);
            for &t in &here {
                used[t] = true;
            }
            for (nx, ny) in [(gx + 1, gy), (gx, gy + 1)] {
                for &t in &here {
                    assert!(
                        !tree_votes_at(TreePattern::Checkerboard, nx, ny, t, n_eval),
                        "tree {t} shared between ({gx},{gy}) and ({nx},{ny})"
                    );
                }
            }
        }
    }
    assert!(used.iter().all(|&u| u), "some trees never vote: {used:?}");
}

#[test]
fn detection_is_translation_consistent() {
    let fx = fixture();
    // one scene, two 128x128 windows offset by the stride (2,2)
    let scene = &eval::corpus_to_dataset(eval::synth_corpus(55, 1, 136)).images[0];
    let window = |r0: usize, c0: usize| {
        Image::new(
            (0..3)
                .map(|k| FloatPlane::from_fn(128, 128, |r, c| scene.plane(k).get(r0 + r, c0 + c)))
                .collect(),
        )
        .unwrap()
    };
    let a = detect(&window(0, 0), &fx.forest, &se_opts(0)).unwrap();
    let b = detect(&window(2, 2), &fx.forest, &se_opts(0)).unwrap();
    // interior beyond every blur/patch influence radius must shift exactly
    let margin = 52;
    for r in margin..128 - margin {
        for c in margin..128 - margin {
            let d = (a.get(r + 2, c + 2) - b.get(r, c)).abs();
            assert!(d <= 1e-6, "at ({r},{c}): {d}");
        }
    }
}

#[test]
fn multiscale_is_the_mean_of_three_scales() {
    let fx = fixture();
    let img = &fx.test_set.images[2];
    let opts = se_opts(2);
    let ms = multiscale_detect(img, &fx.forest, &opts).unwrap();

    let (w, h) = (img.width(), img.height());
    let mut manual = FloatPlane::new(w, h);
    for scale in [0.5f32, 1.0, 2.0] {
        let e = if scale == 1.0 {
            detect(img, &fx.forest, &opts).unwrap()
        } else {
            let sw = ((w as f32 * scale).round()) as usize;
            let sh = ((h as f32 * scale).round()) as usize;
            detect(&img.resize_bilinear(sw, sh), &fx.forest, &opts)
                .unwrap()
                .resize_bilinear(w, h)
        };
        for (m, &v) in manual.data_mut().iter_mut().zip(e.data()) {
            *m += v;
        }
    }
    for (m, &v) in manual.data().iter().zip(ms.data()) {
        assert!((m / 3.0 - v).abs() <= 1e-6);
    }
}

#[test]
fn multiscale_does_not_collapse_quality() {
    let fx = fixture();
    let single: Vec<FloatPlane> = fx
        .test_set
        .images
        .iter()
        .map(|img| detect(img, &fx.forest, &se_opts(2)).unwrap())
        .collect();
    let multi: Vec<FloatPlane> = fx
        .test_set
        .images
        .iter()
        .map(|img| multiscale_detect(img, &fx.forest, &se_opts(2)).unwrap())
        .collect();
    let (r_single, _) =
        eval::evaluate(&single, &fx.test_set.gts, 25, eval::DEFAULT_TOLERANCE).unwrap();
    let (r_multi, _) =
        eval::evaluate(&multi, &fx.test_set.gts, 25, eval::DEFAULT_TOLERANCE).unwrap();
    assert!(
        r_multi.ods >= r_single.ods - 0.02,
        "multiscale ODS {} vs single {}",
        r_multi.ods,
        r_single.ods
    );
}

#[test]
fn constant_image_multiscale_is_zeroish() {
    let fx = fixture();
    let img = Image::new(
        (0..3)
            .map(|_| FloatPlane::from_vec(48, 48, vec![0.5; 48 * 48]))
            .collect(),
    )
    .unwrap();
    let e = multiscale_detect(&img, &fx.forest, &se_opts(0)).unwrap();
    assert!(e.mean() < 0.02);
}

#[test]
fn plane_count_mismatch_is_detected() {
    let fx = fixture();
    let gray = Image::new(vec![FloatPlane::from_fn(64, 64, |r, c| {
        ((r + c) % 7) as f32 / 6.0
    })])
    .unwrap();
    let err = detect(&gray, &fx.forest, &se_opts(0)).unwrap_err();
    assert!(matches!(err, sedge::Error::Mismatch(_)), "{err}");
}

#[test]
fn asking_for_too_many_trees_is_detected() {
    let fx = fixture();
    let opts = DetectOptions {
        n_trees_eval: 5, // model holds 8 trees = 2*4
        ..se_opts(0)
    };
    let err = detect(&fx.test_set.images[0], &fx.forest, &opts).unwrap_err();
    assert!(matches!(err, sedge::Error::Mismatch(_)), "{err}");
}

#[test]
fn sharpen_zero_and_two_differ_on_textured_input() {
    let fx = fixture();
    let img = &fx.test_set.images[3];
    let a = detect(img, &fx.forest, &se_opts(0)).unwrap();
    let b = detect(img, &fx.forest, &se_opts(2)).unwrap();
    assert_ne!(a.data(), b.data());
}
