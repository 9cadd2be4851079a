use dss_core::cleaner::{map_to_unified, MappingRegistry};
use dss_core::store::RawReport;
use dss_core::synth::{bayes_accuracy, generate_market, label_probability, signal_score, SynthConfig};

mod common;

fn config(seed: u64, s: f64) -> SynthConfig {
    SynthConfig {
        n_stocks: 20,
        n_quarters: 10,
        rng_seed: seed,
        signal_strength: s,
        ..SynthConfig::default()
    }
}

#[test]
fn generation_is_seed_deterministic() {
    let a = generate_market(&config(3, 0.5)).unwrap();
    let b = generate_market(&config(3, 0.5)).unwrap();
    let c = generate_market(&config(4, 0.5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.ground_truth.rows, c.ground_truth.rows);
}

#[test]
fn prices_are_positive_and_consistent() {
    let bundle = generate_market(&config(5, 0.5)).unwrap();
    for (symbol, history) in &bundle.inputs.prices {
        for b in history.bars() {
            assert!(b.close > 0.0 && b.adj_close > 0.0 && b.open > 0.0, "{symbol} {}", b.date);
            assert!(b.high >= b.low && b.low >= 0.0, "{symbol} {}", b.date);
            assert!(b.high >= b.close && b.close >= b.low, "{symbol} {}", b.date);
            assert!(b.volume >= 0.0);
        }
    }
}

#[test]
fn every_generated_report_maps_cleanly() {
    let bundle = generate_market(&config(6, 0.5)).unwrap();
    let registry = MappingRegistry::builtin();
    for r in &bundle.records {
        let ann = common::announcement_for(r);
        let raw = RawReport {
            announcement_id: ann.announcement_id.clone(),
            tables: r.tables.clone(),
        };
        let out = map_to_unified(&raw, &ann, &registry).unwrap();
        assert!(out.quarantined.is_empty(), "{:?}", out.quarantined);
        assert!(out.unmapped.is_empty(), "{:?}", out.unmapped);
    }
}

#[test]
fn ground_truth_is_self_consistent() {
    for s in [0.0, 0.5, 1.0] {
        let cfg = config(8, s);
        let truth = generate_market(&cfg).unwrap().ground_truth;
        assert_eq!(truth.rows.len(), 20 * 10);
        for r in &truth.rows {
            let score = signal_score(r.gross_profit_margin, r.debt_ratio, r.current_ratio);
            assert!((score - r.score).abs() < 1e-12);
            assert!((label_probability(score, cfg.logistic_slope()) - r.probability).abs() < 1e-12);
            assert_eq!(u8::from(r.planted_return > r.benchmark_return), r.label);
            assert!((r.planted_return - r.benchmark_return).abs() >= 0.02 - 1e-12);
        }
        let bayes = bayes_accuracy(truth.rows.iter().map(|r| (r.score, r.label)));
        assert_eq!(bayes, truth.bayes_accuracy);
        if s == 1.0 {
            assert_eq!(bayes, 1.0);
        }
    }
}
