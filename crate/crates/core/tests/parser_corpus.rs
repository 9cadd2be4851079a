mod common;

use std::collections::BTreeMap;

use common::{check_corpus_case, parser_corpus};
use dss_core::cleaner::{map_to_unified, normalize_number, LineItem, MappingRegistry};
use dss_core::store::{Announcement, RawReport, StatementType};
use dss_core::synth::{render_number, render_table};
use proptest::prelude::*;

#[test]
fn corpus_maps_exactly() {
    let registry = MappingRegistry::builtin();
    let corpus = parser_corpus();
    let versions: std::collections::BTreeSet<u16> = corpus.iter().map(|c| c.format_version).collect();
    assert_eq!(versions.len(), 3);
    let problems: Vec<String> = corpus.iter().flat_map(|c| check_corpus_case(c, &registry)).collect();
    assert!(problems.is_empty(), "{problems:#?}");
}

fn items_for(st: StatementType, v: &[i64]) -> BTreeMap<LineItem, i64> {
    use LineItem::*;
    let mut it = v.iter().copied();
    let mut next = || it.next().unwrap();
    match st {
        StatementType::IncomeStatement => {
            let (rev, cogs) = (next(), next());
            BTreeMap::from([
                (Revenue, rev),
                (Cogs, cogs),
                (GrossProfit, rev - cogs),
                (OperatingProfit, next()),
                (Ebit, next()),
                (InterestExpense, next()),
                (NetIncome, next()),
            ])
        }
        StatementType::BalanceSheet => {
            let (ca, fa, oa) = (next(), next(), next());
            BTreeMap::from([
                (Cash, next()),
                (CashEquivalents, next()),
                (Inventory, next()),
                (CurrentAssets, ca),
                (FixedAssets, fa),
                (OtherAssets, oa),
                (TotalAssets, ca + fa + oa),
                (CurrentLiabilities, next()),
                (LongTermDebt, next()),
                (TotalDebt, next()),
                (TotalEquity, next()),
                (RetainedEarnings, next()),
                (SharesOutstanding, next()),
            ])
        }
        StatementType::CashFlow => BTreeMap::from([(OperatingCashFlow, next())]),
    }
}

proptest! {
    #[test]
    fn rendered_reports_parse_back_exactly(
        version in 1u16..=3,
        st in prop::sample::select(StatementType::ALL.to_vec()),
        values in prop::collection::vec(-999_999_999_999i64..999_999_999_999, 16),
        missing_mask in any::<u16>(),
    ) {
        let registry = MappingRegistry::builtin();
        let items = items_for(st, &values);
        // mandatory items and identity inputs stay stated
        let protected = [LineItem::Revenue, LineItem::Cogs, LineItem::GrossProfit, LineItem::TotalAssets,
            LineItem::CurrentAssets, LineItem::FixedAssets, LineItem::OtherAssets, LineItem::OperatingCashFlow];
        let missing: Vec<LineItem> = items
            .keys()
            .enumerate()
            .filter(|(i, k)| missing_mask & (1 << i) != 0 && !protected.contains(k))
            .map(|(_, k)| *k)
            .collect();
        let table = render_table(&registry, st, version, &items, &missing);
        let ann = Announcement {
            announcement_id: "p".into(),
            symbol: "P".into(),
            statement_type: st,
            period_end: common::d(2021, 6, 30),
            publish_date: common::d(2021, 7, 30),
            format_version: version,
            revision: 0,
        };
        let raw = RawReport { announcement_id: "p".into(), tables: vec![table] };
        let out = map_to_unified(&raw, &ann, &registry).unwrap();
        prop_assert!(out.quarantined.is_empty() && out.unmapped.is_empty());
        for (item, v) in &items {
            if missing.contains(item) {
                prop_assert!(out.report.missing.contains(item));
                prop_assert_eq!(out.report.get(*item), None);
            } else {
                prop_assert_eq!(out.report.get(*item), Some(*v as f64));
            }
        }
    }

    #[test]
    fn normalizing_a_canonical_rendering_is_idempotent(v in -1e12f64..1e12) {
        let once = normalize_number(&v.to_string()).unwrap();
        prop_assert_eq!(once, v);
        prop_assert_eq!(normalize_number(&once.to_string()).unwrap(), once);
    }

    #[test]
    fn every_version_renders_integers_losslessly(v in -(1i64 << 53) + 1..(1i64 << 53), version in 1u16..=3) {
        prop_assert_eq!(normalize_number(&render_number(v, version)).unwrap(), v as f64);
    }
}
