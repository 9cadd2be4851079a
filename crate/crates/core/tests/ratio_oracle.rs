mod common;

use common::{computed_ratios, ratio_fixture, ratio_mismatches};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_ratio_matches_its_oracle(seed in any::<u64>()) {
        let fx = ratio_fixture(seed);
        let bad = ratio_mismatches(&fx, 1e-12);
        prop_assert!(bad.is_empty(), "{bad:#?}");
    }

    #[test]
    fn quick_ratio_never_exceeds_current_ratio(seed in any::<u64>()) {
        let r = computed_ratios(&ratio_fixture(seed));
        prop_assert!(r.quick_ratio.unwrap() <= r.current_ratio.unwrap());
    }
}

#[test]
fn fixtures_exercise_every_ratio() {
    // the oracle comparison only means something if values are present
    let r = computed_ratios(&ratio_fixture(11));
    assert!(r.values().iter().all(Option::is_some), "{r:?}");
}
