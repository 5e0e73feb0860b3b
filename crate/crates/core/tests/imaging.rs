use afif4::facepatch::{extract_patch_set, FaceDetection};
use afif4::illum::{build_surround, convolve_field, min_radius, ssr_enhance, ssr_response};
use afif4::imagecore::{
    crop_resize, horizontal_flip, mean_intensity, parse_manifest_str, DatasetManifest, Field, Gender, ImageBuffer, LandmarkSet, Rect,
    SampleRecord,
};
use proptest::prelude::*;

fn image_strategy(ch: usize) -> impl Strategy<Value = ImageBuffer<f64>> {
    (1usize..12, 1usize..12).prop_flat_map(move |(w, h)| {
        proptest::collection::vec(0.0f64..=1.0, w * h * ch).prop_map(move |data| ImageBuffer::new(w, h, ch, data).unwrap())
    })
}

fn landmarks(dx: f64, dy: f64) -> LandmarkSet<f64> {
    let pts = [
        (8.0, 12.0), (13.0, 12.0), (10.5, 10.0), (19.0, 12.0), (24.0, 12.0), (21.5, 10.0),
        (16.0, 14.0), (14.0, 19.0), (18.0, 19.0), (12.0, 24.0), (20.0, 24.0), (16.0, 25.5),
        (5.0, 6.0), (6.0, 22.0), (16.0, 30.0), (26.0, 22.0), (27.0, 6.0),
    ];
    LandmarkSet::new(pts.iter().map(|&(x, y)| (x + dx, y + dy)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flip_is_an_involution(img in image_strategy(3)) {
        prop_assert_eq!(horizontal_flip(&horizontal_flip(&img)), img);
    }

    #[test]
    fn identity_crop(img in image_strategy(1)) {
        let out = crop_resize(&img, &Rect::full(img.width(), img.height()), img.width(), img.height()).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn crops_stay_in_range(img in image_strategy(3), x in -5.0f64..10.0, y in -5.0f64..10.0, w in 0.5f64..20.0, h in 0.5f64..20.0) {
        let rect = Rect::new(x, y, w, h);
        if let Ok(out) = crop_resize(&img, &rect, 7, 5) {
            prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn mean_matches_sum(img in image_strategy(3)) {
        let m = mean_intensity(&img);
        let n = (img.width() * img.height()) as f64;
        for c in 0..3 {
            let s: f64 = img.plane(c).iter().sum();
            prop_assert!((m[c] - s / n).abs() < 1e-9);
        }
    }

    #[test]
    fn surround_is_normalized(g in 0.3f64..6.0, extra in 0usize..4) {
        let s = build_surround(g, min_radius(g) + extra).unwrap();
        let sum: f64 = s.weights().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(s.weights().iter().all(|&w| w > 0.0));
        let r = s.radius() as isize;
        for dy in -r..=r {
            for dx in -r..=r {
                prop_assert_eq!(s.weight(dx, dy), s.weight(-dx, -dy));
                prop_assert!((s.weight(dx, dy) - s.weight(dy, dx)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn retinex_ignores_global_gain(
        data in proptest::collection::vec(0.05f64..1.0, 10 * 9),
        k in 0.1f64..8.0,
    ) {
        let field = Field::new(10, 9, 1, data).unwrap();
        let scaled = field.map(|v| v * k);
        let s = build_surround(2.0, 4).unwrap();
        let a = ssr_response(&field, &s, 1e-12).unwrap();
        let b = ssr_response(&scaled, &s, 1e-12).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn enhanced_images_are_valid(img in image_strategy(3)) {
        let s = build_surround(1.5, 3).unwrap();
        let out = ssr_enhance(&img, &s, 1.0 / 255.0).unwrap();
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn convolution_keeps_constants(c in 0.0f64..=1.0, g in 0.5f64..3.0) {
        let f = Field::new(9, 7, 3, vec![c; 9 * 7 * 3]).unwrap();
        let out = convolve_field(&f, &build_surround(g, min_radius(g)).unwrap());
        prop_assert!(out.data().iter().all(|v| (v - c).abs() < 1e-12));
    }

    #[test]
    fn patches_follow_integer_shifts(dx in 0usize..6, dy in 0usize..6) {
        let base = ImageBuffer::from_fn(48, 48, 3, |x, y, c| ((x * 3 + y * 5 + c) % 17) as f64 / 16.0).unwrap();
        let shifted = ImageBuffer::from_fn(48, 48, 3, |x, y, c| {
            if x >= dx && y >= dy { base.get(x - dx, y - dy, c) } else { 0.0 }
        }).unwrap();
        let a = extract_patch_set(&base, &FaceDetection::from_landmarks(landmarks(0.0, 0.0)), 1.5, 16).unwrap();
        let b = extract_patch_set(&shifted, &FaceDetection::from_landmarks(landmarks(dx as f64, dy as f64)), 1.5, 16).unwrap();
        prop_assert_eq!(a.eye_left, b.eye_left);
        prop_assert_eq!(a.nose, b.nose);
        prop_assert_eq!(a.mouth, b.mouth);
    }

    #[test]
    fn manifest_text_round_trips(n in 0usize..6, with_lm in proptest::bool::ANY) {
        let records: Vec<SampleRecord<f64>> = (0..n)
            .map(|i| SampleRecord {
                image_path: format!("img/{i}.png"),
                gender: if i % 3 == 0 { Gender::Female } else { Gender::Male },
                subject_id: format!("s{}", i / 2),
                fold: if i % 2 == 0 { Some(i % 5) } else { None },
                landmarks: with_lm.then(|| landmarks(i as f64 * 0.25, 0.125)),
            })
            .collect();
        let m = DatasetManifest::new("set", "/data", records).unwrap();
        let back = parse_manifest_str::<f64>(&m.to_text(), "set", "/data").unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn manifest_parsing_is_total(text in "[ -~\t\n]{0,200}") {
        // either a manifest or a located error, never a panic
        let _ = parse_manifest_str::<f64>(&text, "fuzz", "/");
    }
}

#[test]
fn landmark_groups_are_disjoint_and_cover_all_points() {
    use afif4::imagecore::FeatureGroup;
    let mut seen = [false; 17];
    for g in FeatureGroup::ALL {
        assert!(!g.indices().is_empty());
        for &i in g.indices() {
            assert!(!seen[i]);
            seen[i] = true;
        }
    }
    assert!(seen.iter().all(|&s| s));
}

mod degradations {
    use super::*;
    use afif4::datagen::{add_noise, augment_10x, augment_landmarks_10x, gaussian_taps, posterize, smooth, AugmentConfig};
    use std::collections::BTreeSet;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn posterize_uses_at_most_l_levels(img in image_strategy(1), levels in 2usize..20) {
            let out = posterize(&img, levels);
            let distinct: BTreeSet<u64> = out.data().iter().map(|v| v.to_bits()).collect();
            prop_assert!(distinct.len() <= levels);
            for (a, b) in out.data().iter().zip(img.data()) {
                prop_assert!((a - b).abs() <= 0.5 / levels as f64 + 1e-12);
            }
        }

        #[test]
        fn augmentation_is_tenfold_and_mirrored(
            (w, h, data) in (6usize..14, 6usize..14).prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(0.0f64..=1.0, w * h * 3))),
            shift in 1usize..6,
        ) {
            let img = ImageBuffer::new(w, h, 3, data).unwrap();
            let out = augment_10x(&img, &AugmentConfig { shift }).unwrap();
            prop_assert_eq!(out.len(), 10);
            prop_assert_eq!(&out[0], &img);
            for i in 0..5 {
                prop_assert_eq!(&out[i + 5], &horizontal_flip(&out[i]));
            }
            prop_assert!(out.iter().all(|o| o.width() == w && o.height() == h && o.data().iter().all(|v| (0.0..=1.0).contains(v))));
        }

        #[test]
        fn landmark_mirroring_is_an_involution(dx in -3.0f64..3.0, dy in -3.0f64..3.0, width in 32usize..64) {
            let lm = landmarks(dx, dy);
            let back = lm.mirrored(width).mirrored(width);
            for (a, b) in back.points().iter().zip(lm.points()) {
                prop_assert!((a.0 - b.0).abs() < 1e-12 && a.1 == b.1);
            }
            let all = augment_landmarks_10x(&lm, width, &AugmentConfig { shift: 3 });
            prop_assert_eq!(all.len(), 10);
            for i in 0..5 {
                prop_assert_eq!(&all[i + 5], &all[i].mirrored(width));
            }
        }

        #[test]
        fn noise_is_seeded(img in image_strategy(3), seed in any::<u64>(), sigma in 0.0f64..0.2) {
            let a = add_noise(&img, sigma, seed);
            prop_assert_eq!(&a, &add_noise(&img, sigma, seed));
            prop_assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn smoothing_keeps_constants(c in 0.0f64..=1.0, sigma in 0.5f64..4.0) {
            let img = ImageBuffer::new(9, 11, 3, vec![c; 9 * 11 * 3]).unwrap();
            prop_assert!(smooth(&img, sigma).data().iter().all(|v| (v - c).abs() < 1e-12));
            let taps = gaussian_taps(sigma);
            prop_assert_eq!(taps.len(), 2 * (3.0 * sigma).ceil() as usize + 1);
            prop_assert!((taps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
