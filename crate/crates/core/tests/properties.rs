use infostyle::features::{color_histogram, hog, lbp, luminance_histogram};
use infostyle::imaging::{normalize_window, PixelGrid, WINDOW_HEIGHT, WINDOW_WIDTH};
use infostyle_testkit::synth;
use proptest::prelude::*;

fn grid(max_w: usize, max_h: usize) -> impl Strategy<Value = PixelGrid> {
    (1..=max_w, 1..=max_h, any::<u64>()).prop_map(|(w, h, seed)| {
        let mut rng = synth::rng(seed);
        if seed % 2 == 0 {
            synth::noise_grid(&mut rng, w, h)
        } else {
            synth::blocks_grid(&mut rng, w, h)
        }
    })
}

fn map_pixels(img: &PixelGrid, f: impl Fn([u8; 3]) -> [u8; 3]) -> PixelGrid {
    PixelGrid::new(
        img.width(),
        img.height(),
        img.pixels().iter().map(|&p| f(p)).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn window_has_fixed_size_and_is_idempotent(img in grid(700, 700)) {
        let once = normalize_window(&img);
        prop_assert_eq!((once.width(), once.height()), (WINDOW_WIDTH, WINDOW_HEIGHT));
        prop_assert_eq!(normalize_window(&once), once);
    }

    #[test]
    fn histograms_sum_to_one(img in grid(60, 60)) {
        let c = color_histogram(&img).values;
        for ch in c.chunks(10) {
            prop_assert!((ch.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let l = luminance_histogram(&img).values;
        prop_assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(c.iter().chain(&l).all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn color_histogram_ignores_pixel_order(img in grid(40, 40), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut px = img.pixels().to_vec();
        px.shuffle(&mut synth::rng(seed));
        let shuffled = PixelGrid::new(img.width(), img.height(), px).unwrap();
        prop_assert_eq!(color_histogram(&img), color_histogram(&shuffled));
        prop_assert_eq!(luminance_histogram(&img), luminance_histogram(&shuffled));
    }

    #[test]
    fn lbp_invariant_under_monotone_gray_remap(img in grid(48, 48), seed in any::<u64>()) {
        use rand::seq::index::sample;
        // gray levels 0..128 sent through a random strictly increasing map
        let gray = map_pixels(&img, |p| [p[0] / 2; 3]);
        let mut levels: Vec<usize> = sample(&mut synth::rng(seed), 256, 128).into_vec();
        levels.sort_unstable();
        let remapped = map_pixels(&gray, |p| [levels[p[0] as usize] as u8; 3]);
        prop_assert_eq!(lbp(&gray), lbp(&remapped));
    }

    #[test]
    fn hog_invariant_to_constant_offset(img in grid(64, 64), offset in 1u8..60) {
        let dark = map_pixels(&img, |p| p.map(|c| c / 2));
        let bright = map_pixels(&dark, |p| p.map(|c| c + offset));
        prop_assume!(img.width() >= 16 && img.height() >= 16);
        prop_assert_eq!(hog(&dark, 16).unwrap(), hog(&bright, 16).unwrap());
    }

    #[test]
    fn hog_values_are_bounded(img in grid(80, 80)) {
        prop_assume!(img.width() >= 32 && img.height() >= 32);
        for cell in [16, 32] {
            let v = hog(&img, cell).unwrap().values;
            prop_assert!(v.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)));
        }
    }
}

#[test]
fn aspect_ratio_rules() {
    // landscape is fit to height and center-cropped
    let wide = PixelGrid::filled(900, 300, [0, 0, 255]).unwrap();
    let out = normalize_window(&wide);
    assert!(out.pixels().iter().all(|&p| p == [0, 0, 255]));
    // tall portrait fits width, extra height cropped
    let tall = PixelGrid::filled(100, 1000, [10, 20, 30]).unwrap();
    assert!(normalize_window(&tall).pixels().iter().all(|&p| p == [10, 20, 30]));
    // short portrait fits width and is padded with white rows
    let short = PixelGrid::filled(400, 420, [0, 0, 0]).unwrap();
    let out = normalize_window(&short);
    assert_eq!(out.get(180, 0), [255, 255, 255]);
    assert_eq!(out.get(180, 225), [0, 0, 0]);
}

#[test]
fn extraction_is_deterministic() {
    let mut rng = synth::rng(3);
    let img = normalize_window(&synth::noise_grid(&mut rng, 123, 321));
    for _ in 0..2 {
        assert_eq!(hog(&img, 16).unwrap(), hog(&img, 16).unwrap());
        assert_eq!(lbp(&img), lbp(&img));
    }
}
