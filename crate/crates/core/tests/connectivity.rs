use proptest::prelude::*;

use shallownet::connectivity::{init_gabor_localized, init_random_full, init_random_localized, GaborIntervals};
use shallownet::datasets::ImageDims;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn localized_rows_stay_inside_their_patch(
        seed in any::<u64>(),
        side in 4usize..=12,
        channels in 1usize..=3,
        p_frac in 0.0f64..1.0,
        gabor in any::<bool>(),
    ) {
        let dims = ImageDims::new(side, side, channels);
        let p = 1 + ((side - 1) as f64 * p_frac) as usize;
        let h = if gabor {
            init_gabor_localized(20, dims, p, &GaborIntervals::default_for_patch(p), 3.0, seed).unwrap()
        } else {
            init_random_localized(20, dims, p, 3.0, seed).unwrap()
        };
        let rf = h.rf.as_ref().unwrap();
        let d = dims.input_dim();
        for (i, list) in rf.index_lists.iter().enumerate() {
            prop_assert!(list.len() <= p * p * channels);
            prop_assert!(list.iter().all(|&j| j < d));
            for j in 0..d {
                if !list.contains(&j) {
                    prop_assert_eq!(h.w[[i, j]], 0.0);
                }
            }
        }
        prop_assert!(h.b.iter().all(|&b| (0.0..=0.1).contains(&b)));
    }
}

#[test]
fn image_sized_patch_is_full_connectivity() {
    let dims = ImageDims::new(9, 9, 1);
    let h = init_random_localized(5, dims, 9, 3.0, 1).unwrap();
    for list in &h.rf.unwrap().index_lists {
        assert_eq!(list, &(0..81).collect::<Vec<_>>());
    }
}

#[test]
fn full_random_layer_is_dense_and_seeded() {
    let a = init_random_full(30, 50, 4).unwrap();
    assert!(a.rf.is_none());
    assert!(a.w.iter().all(|&w| w != 0.0));
    assert_eq!(a, init_random_full(30, 50, 4).unwrap());
    assert_ne!(a.w, init_random_full(30, 50, 5).unwrap().w);
}
