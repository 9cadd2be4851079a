use chrono::NaiveDate;
use dss_core::dataset::Horizon;
use dss_core::outlook::{market_probability, OutlookError, UniverseMember};
use proptest::prelude::*;

fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 6, 30).unwrap()
}

fn h() -> Horizon {
    Horizon::new(3).unwrap()
}

fn member(i: usize, cap: f64, p: Option<f64>) -> UniverseMember {
    UniverseMember {
        symbol: format!("S{i:05}"),
        market_cap: cap,
        probability: p,
    }
}

fn universe(max: usize) -> impl Strategy<Value = Vec<UniverseMember>> {
    prop::collection::vec((1e-3f64..1e9, prop::option::weighted(0.9, 0.0f64..=1.0)), 1..max)
        .prop_map(|v| v.into_iter().enumerate().map(|(i, (c, p))| member(i, c, p)).collect())
        .prop_filter("needs one prediction", |u: &Vec<UniverseMember>| u.iter().any(|m| m.probability.is_some()))
}

/// Error-free two-sum accumulation: a double-double running total.
fn exact_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for x in xs {
        let s = hi + x;
        let bp = s - hi;
        let err = (hi - (s - bp)) + (x - bp);
        hi = s;
        lo += err;
    }
    hi + lo
}

fn reference(u: &[UniverseMember]) -> f64 {
    let num = exact_sum(u.iter().filter_map(|m| m.probability.map(|p| p * m.market_cap)));
    let den = exact_sum(u.iter().filter(|m| m.probability.is_some()).map(|m| m.market_cap));
    num / den
}

proptest! {
    #[test]
    fn market_probability_is_a_convex_combination(u in universe(200)) {
        let f = market_probability(date(), h(), &u).unwrap();
        let ps: Vec<f64> = u.iter().filter_map(|m| m.probability).collect();
        let lo = ps.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= f.p_market && f.p_market <= hi);
        prop_assert_eq!(f.n_stocks, ps.len());
        prop_assert!(f.coverage > 0.0 && f.coverage <= 1.0 + 1e-15);
    }

    #[test]
    fn scaling_every_cap_changes_nothing(u in universe(200), k in prop::sample::select(vec![1e-6, 0.5, 3.0, 1e6])) {
        let scaled: Vec<UniverseMember> = u.iter().map(|m| member(0, m.market_cap * k, m.probability)).collect();
        let a = market_probability(date(), h(), &u).unwrap().p_market;
        let b = market_probability(date(), h(), &scaled).unwrap().p_market;
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn equal_caps_give_the_plain_mean(ps in prop::collection::vec(0.0f64..=1.0, 1..300), cap in 1.0f64..1e6) {
        let u: Vec<UniverseMember> = ps.iter().enumerate().map(|(i, p)| member(i, cap, Some(*p))).collect();
        let f = market_probability(date(), h(), &u).unwrap();
        let mean = exact_sum(ps.iter().copied()) / ps.len() as f64;
        prop_assert!((f.p_market - mean).abs() <= 1e-12);
    }

    #[test]
    fn matches_compensated_reference(u in universe(200)) {
        let f = market_probability(date(), h(), &u).unwrap();
        prop_assert!((f.p_market - reference(&u)).abs() <= 1e-12);
    }
}

#[test]
fn large_universes_match_the_reference() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for n in [1usize, 10, 1000, 10_000] {
        let u: Vec<UniverseMember> = (0..n)
            .map(|i| {
                let cap = 10f64.powf(rng.random_range(3.0..12.0));
                member(i, cap, Some(rng.random_range(0.0..=1.0)))
            })
            .collect();
        let f = market_probability(date(), h(), &u).unwrap();
        assert!((f.p_market - reference(&u)).abs() <= 1e-12, "n={n}");
    }
}

#[test]
fn coverage_counts_unpredicted_caps() {
    let u = vec![member(0, 30.0, Some(0.9)), member(1, 70.0, None)];
    let f = market_probability(date(), h(), &u).unwrap();
    assert_eq!(f.p_market, 0.9);
    assert!((f.coverage - 0.3).abs() < 1e-15);
    assert!(f.low_confidence);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert_eq!(market_probability(date(), h(), &[]), Err(OutlookError::EmptyUniverse));
    assert!(matches!(
        market_probability(date(), h(), &[member(0, 0.0, Some(0.5))]),
        Err(OutlookError::NonPositiveCap { .. })
    ));
    assert!(matches!(
        market_probability(date(), h(), &[member(0, 1.0, Some(1.5))]),
        Err(OutlookError::InvalidProbability { .. })
    ));
}
