use egoview::geometry::SparseEgoMap;
use egoview::image::{DepthMap, Mask, RgbImage};
use egoview::io::{self, SparseMapPaths};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn depth_round_trip_is_bit_exact(
        (w, h, vals) in (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), prop::collection::vec(0.001f32..100.0, w * h))
        })
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        let d = DepthMap::from_values(w, h, vals.iter().map(|v| *v as f64).collect()).unwrap();
        io::save_depth(&d, &path).unwrap();
        prop_assert_eq!(io::load_depth(&path).unwrap(), d);
    }

    #[test]
    fn rgb_round_trip_within_half_a_level(
        (w, h, vals) in (1usize..10, 1usize..10).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), prop::collection::vec(prop::array::uniform3(0.0f64..=1.0), w * h))
        })
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        let img = RgbImage::from_pixels(w, h, vals).unwrap();
        io::save_rgb(&img, &path).unwrap();
        let back = io::load_rgb(&path).unwrap();
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            for c in 0..3 {
                prop_assert!((a[c] - b[c]).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }
}

#[test]
fn sparse_map_triple_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (5, 4);
    let mut map = SparseEgoMap::empty(w, h);
    for (x, y, d, c) in [(0, 0, 1.5, [1.0, 0.0, 0.0]), (3, 2, 0.25, [0.0, 0.4, 1.0])] {
        map.rgb.set(x, y, c);
        map.validity.set(x, y, true);
        map.depth_buffer.set(x, y, d);
    }
    let paths = SparseMapPaths::in_dir(dir.path(), "m");
    io::save_sparse_map(&map, &paths).unwrap();
    let back = io::load_sparse_map(&paths).unwrap();
    assert_eq!(back.validity, map.validity);
    assert_eq!(back.depth_buffer, map.depth_buffer);
    assert_eq!(back.rgb.get(1, 1), [0.5, 0.5, 0.5].map(|c: f64| (c * 255.0).round() / 255.0));

    // a mask that disagrees with the depth is rejected
    io::save_mask(&Mask::new(w, h, true), &paths.mask).unwrap();
    assert_eq!(io::load_sparse_map(&paths).unwrap_err().kind(), "validation");

    io::save_depth(&DepthMap::invalid(3, 3), &paths.depth).unwrap();
    assert!(io::load_sparse_map(&paths).is_err());
}
