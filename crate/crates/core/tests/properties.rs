use proptest::prelude::*;
use videorf_core::codec::{decode_gof, encode_gof, dct::max_error_bound, QuantizationProfile, Quantizer, Uint8Image};
use videorf_core::mapping::{build_mapping_with, square_image_for, Layout, MappingTable};
use videorf_core::occupancy::{plan_groups, union, OccupancyGrid};
use videorf_core::render::march::compositing_weights;
use videorf_core::volume::GridDims;

fn grid(dims: [usize; 3], bits: &[bool]) -> OccupancyGrid {
    OccupancyGrid::from_fn(GridDims(dims), |c| bits[GridDims(dims).index(c[0], c[1], c[2]) % bits.len()])
}

fn arb_grid() -> impl Strategy<Value = OccupancyGrid> {
    ([1usize..10, 1usize..10, 1usize..10], prop::collection::vec(any::<bool>(), 1..1000))
        .prop_map(|(d, bits)| grid(d, &bits))
}

fn layouts() -> impl Strategy<Value = Layout> {
    prop_oneof![Just(Layout::MORTON_BLOCKS), Just(Layout::ROW_MAJOR)]
}

proptest! {
    #[test]
    fn mapping_is_a_bijection(occ in arb_grid(), layout in layouts()) {
        let (w, h) = square_image_for(occ.count().max(1));
        let map = build_mapping_with(&occ, w, h, layout).unwrap();
        for v in 0..occ.dims().count() {
            let p = map.forward_index(v);
            prop_assert_eq!(p.is_some(), occ.get_index(v));
            if let Some(p) = p {
                prop_assert_eq!(map.inverse_index(p), Some(v));
            }
        }
        prop_assert_eq!(map.mapped().count(), occ.count());
    }

    #[test]
    fn mapping_survives_png_and_vrfm(occ in arb_grid()) {
        let (w, h) = square_image_for(occ.count().max(1));
        let map = build_mapping_with(&occ, w, h, Layout::MORTON_BLOCKS).unwrap();
        let (png, _) = map.to_png().unwrap();
        prop_assert_eq!(&MappingTable::from_png(occ.dims(), &png, &map.validity_mask()).unwrap(), &map);
        prop_assert_eq!(&MappingTable::from_vrfm(&map.to_vrfm().unwrap()).unwrap(), &map);
    }

    #[test]
    fn grouping_is_greedy_maximal_and_within_budget(
        frames in prop::collection::vec(prop::collection::vec(any::<bool>(), 64), 1..12),
        slack in 0usize..40,
    ) {
        let grids: Vec<OccupancyGrid> = frames.iter().map(|b| grid([4, 4, 4], b)).collect();
        let theta = grids.iter().map(|g| g.count()).max().unwrap().max(1) + slack;
        let plan = plan_groups(&grids, theta).unwrap();
        let mut next = 0;
        for (i, g) in plan.groups.iter().enumerate() {
            prop_assert_eq!(g.start, next);
            next = g.end + 1;
            let u = union(&grids[g.start..=g.end].iter().collect::<Vec<_>>()).unwrap();
            prop_assert!(u.count() <= theta);
            prop_assert_eq!(&u, &g.union);
            if i + 1 < plan.groups.len() {
                let grown = union(&grids[g.start..=g.end + 1].iter().collect::<Vec<_>>()).unwrap();
                prop_assert!(grown.count() > theta);
            }
        }
        prop_assert_eq!(next, grids.len());
    }

    #[test]
    fn weights_telescope(samples in prop::collection::vec((0.0f64..100.0, 0.0f64..0.1), 0..300)) {
        let sum: f64 = compositing_weights(samples.iter().copied()).iter().sum();
        let tau: f64 = samples.iter().map(|(s, d)| s * d).sum();
        prop_assert!((sum - (1.0 - (-tau).exp())).abs() <= 1e-9);
    }

    #[test]
    fn codec_round_trips(
        seed_data in prop::collection::vec(any::<u8>(), 3 * 16 * 8 * 2),
        q in 1u16..40,
    ) {
        let frames: Vec<Uint8Image> = seed_data
            .chunks(16 * 8 * 2)
            .map(|c| Uint8Image { width: 16, height: 8, channels: 2, data: c.to_vec() })
            .collect();
        let profile = QuantizationProfile { ranges: vec![[0.0, 1.0]; 2], bits: 8 };
        let lossless = encode_gof(0, 0, &frames, profile.clone(), Quantizer::Lossless).unwrap();
        prop_assert_eq!(&decode_gof(&lossless).unwrap(), &frames);
        let lossy = encode_gof(0, 0, &frames, profile, Quantizer::Lossy(q)).unwrap();
        for (d, f) in decode_gof(&lossy).unwrap().iter().zip(&frames) {
            for (a, b) in d.data.iter().zip(&f.data) {
                prop_assert!((*a as f64 - *b as f64).abs() <= max_error_bound(q));
            }
        }
    }
}
