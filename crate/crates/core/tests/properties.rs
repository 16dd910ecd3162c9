mod common;

use lanelock::alignment::{ecc_refine, warp_mask, EccParams};
use lanelock::features::{ransac_homography, RansacParams};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn matcher_symmetry(seed in any::<u64>()) {
        common::matcher_symmetry(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn warp_composition(seed in any::<u64>()) {
        common::warp_composition(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn ransac_is_deterministic(seed in any::<u64>(), ratio in 0.1f64..0.5) {
        let c = common::correspondences(seed, 80, ratio, 0.3);
        let params = RansacParams { seed, ..RansacParams::default() };
        let a = ransac_homography(&c.src, &c.dst, &params).unwrap();
        let b = ransac_homography(&c.src, &c.dst, &params).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn mask_subset(seed in any::<u64>()) {
        common::mask_subset(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn rho_guard(seed in any::<u64>()) {
        common::rho_guard(seed).map_err(TestCaseError::fail)?;
    }

    /// Pixels that the mask excludes cannot influence the refinement: the
    /// database outside the mask, and the current image away from where the
    /// masked region lands.
    #[test]
    fn ecc_reads_only_masked_content(seed in any::<u64>()) {
        let s = common::ecc_setup(seed);
        let (w, h) = (s.db.width(), s.db.height());
        let mut r = common::rng(seed);
        let start = common::mild_homography(&mut r, w, h, 1.5).after(&s.truth).unwrap();
        let params = EccParams::default();
        let base = ecc_refine(&s.db, &s.current, &start, &s.mask, &params).unwrap();
        prop_assert!(base.iterations > 0 && base.h != start);

        let mut db = s.db.clone();
        for (x, y) in lanelock::alignment::PixelMask::full(w, h).set_points() {
            if !s.mask.get(x, y) {
                db.set(x, y, 0, r.random());
            }
        }
        let reached = warp_mask(&s.mask.dilate_disc(8), &start, w, h).unwrap();
        let mut current = s.current.clone();
        for (x, y) in lanelock::alignment::PixelMask::full(w, h).set_points() {
            if !reached.get(x, y) {
                current.set(x, y, 0, r.random());
            }
        }
        let scrambled = ecc_refine(&db, &current, &start, &s.mask, &params).unwrap();
        prop_assert_eq!(base, scrambled);
    }
}
