//! Integer quarterly statements built around target ratios, and their
//! rendering into the supported report formats.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::cleaner::{LineItem, MappingRegistry};
use crate::store::{RawRow, RawTable, StatementType};

/// Ratio targets for one stock-quarter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RatioTargets {
    pub gross_profit_margin: f64,
    pub debt_ratio: f64,
    pub current_ratio: f64,
}

/// Stock-level centres the quarterly targets scatter around.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RatioProfile {
    centre: RatioTargets,
}

impl RatioProfile {
    pub fn draw(rng: &mut impl Rng) -> Self {
        let n = |m: f64, s: f64| Normal::new(m, s).expect("positive sd");
        Self {
            centre: RatioTargets {
                gross_profit_margin: n(0.30, 0.062).sample(rng),
                debt_ratio: n(0.45, 0.078).sample(rng),
                current_ratio: n(1.5, 0.31).sample(rng),
            },
        }
    }

    pub fn quarter(&self, rng: &mut impl Rng) -> RatioTargets {
        let mut jitter = |s: f64| Normal::new(0.0, s).expect("positive sd").sample(rng);
        let c = self.centre;
        RatioTargets {
            gross_profit_margin: (c.gross_profit_margin + jitter(0.05)).clamp(0.05, 0.65),
            debt_ratio: (c.debt_ratio + jitter(0.063)).clamp(0.08, 0.85),
            current_ratio: (c.current_ratio + jitter(0.25)).clamp(0.5, 3.2),
        }
    }
}

/// One quarter's three statements as exact integer line items.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct QuarterStatements {
    pub income: BTreeMap<LineItem, i64>,
    pub balance: BTreeMap<LineItem, i64>,
    pub cash_flow: BTreeMap<LineItem, i64>,
}

impl QuarterStatements {
    pub fn items(&self, statement_type: StatementType) -> &BTreeMap<LineItem, i64> {
        match statement_type {
            StatementType::IncomeStatement => &self.income,
            StatementType::BalanceSheet => &self.balance,
            StatementType::CashFlow => &self.cash_flow,
        }
    }

    fn get(&self, map: &BTreeMap<LineItem, i64>, item: LineItem) -> f64 {
        map[&item] as f64
    }

    /// The ratios the signal is planted on, computed exactly as the feature
    /// stage computes them from the cleaned items.
    pub fn realized(&self) -> RatioTargets {
        use LineItem::*;
        RatioTargets {
            gross_profit_margin: self.get(&self.income, GrossProfit) / self.get(&self.income, Revenue),
            debt_ratio: self.get(&self.balance, TotalDebt) / self.get(&self.balance, TotalAssets),
            current_ratio: self.get(&self.balance, CurrentAssets)
                / self.get(&self.balance, CurrentLiabilities),
        }
    }
}

fn share(x: i64, f: f64) -> i64 {
    (x as f64 * f).round() as i64
}

/// Statements hitting `targets` up to integer rounding. Identities
/// (gross profit, total assets) hold exactly.
pub(crate) fn build_statements(
    targets: RatioTargets,
    revenue: i64,
    shares: i64,
    rng: &mut impl Rng,
) -> QuarterStatements {
    use LineItem::*;
    let revenue = revenue.max(1_000);
    let cogs = share(revenue, 1.0 - targets.gross_profit_margin);
    let gross_profit = revenue - cogs;
    let operating_profit = gross_profit - share(revenue, rng.random_range(0.04..0.12));
    let ebit = operating_profit + share(revenue, rng.random_range(0.0..0.03));

    let total_assets = share(revenue, rng.random_range(2.0..3.5));
    let total_debt = share(total_assets, targets.debt_ratio);
    let total_equity = total_assets - total_debt;
    let current_assets = share(total_assets, rng.random_range(0.35..0.6));
    let current_liabilities = ((current_assets as f64 / targets.current_ratio).round() as i64).max(1);
    let fixed_assets = share(total_assets - current_assets, rng.random_range(0.6..0.9));
    let other_assets = total_assets - current_assets - fixed_assets;
    let interest_expense = share(total_debt, rng.random_range(0.03..0.05)).max(1);
    let net_income = share(ebit - interest_expense, 0.75);

    let income = BTreeMap::from([
        (Revenue, revenue),
        (Cogs, cogs),
        (GrossProfit, gross_profit),
        (OperatingProfit, operating_profit),
        (Ebit, ebit),
        (InterestExpense, interest_expense),
        (NetIncome, net_income),
    ]);
    let balance = BTreeMap::from([
        (Cash, share(current_assets, rng.random_range(0.03..0.12))),
        (CashEquivalents, share(current_assets, rng.random_range(0.02..0.10))),
        (Inventory, share(current_assets, rng.random_range(0.15..0.4))),
        (CurrentAssets, current_assets),
        (FixedAssets, fixed_assets),
        (OtherAssets, other_assets),
        (TotalAssets, total_assets),
        (CurrentLiabilities, current_liabilities),
        (LongTermDebt, share(total_debt, rng.random_range(0.2..0.6))),
        (TotalDebt, total_debt),
        (TotalEquity, total_equity),
        (RetainedEarnings, share(total_equity, rng.random_range(0.1..0.5))),
        (SharesOutstanding, shares),
    ]);
    let ocf = share(net_income, rng.random_range(0.7..1.3)) + share(revenue, rng.random_range(0.0..0.05));
    let cash_flow = BTreeMap::from([(OperatingCashFlow, ocf)]);
    QuarterStatements {
        income,
        balance,
        cash_flow,
    }
}

/// A restated balance sheet: liquidity and retained earnings are revised,
/// nothing that enters an identity or the planted ratios changes.
pub(crate) fn revise_balance(
    balance: &BTreeMap<LineItem, i64>,
    rng: &mut impl Rng,
) -> BTreeMap<LineItem, i64> {
    let mut revised = balance.clone();
    for item in [LineItem::CashEquivalents, LineItem::RetainedEarnings] {
        if let Some(v) = revised.get_mut(&item) {
            *v = share(*v, rng.random_range(0.8..1.2));
        }
    }
    revised
}

const PERSIAN_DIGITS: [char; 10] = ['۰', '۱', '۲', '۳', '۴', '۵', '۶', '۷', '۸', '۹'];

fn grouped(v: u64, separator: char) -> String {
    let digits = v.to_string();
    let mut out = String::with_capacity(digits.len() * 4 / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(separator);
        }
        out.push(c);
    }
    out
}

/// Render an integer the way a given format version prints it.
pub fn render_number(v: i64, format_version: u16) -> String {
    let magnitude = v.unsigned_abs();
    match format_version {
        1 if v < 0 => format!("({})", grouped(magnitude, ',')),
        1 => grouped(magnitude, ','),
        3 => {
            let body: String = grouped(magnitude, '٬')
                .chars()
                .map(|c| c.to_digit(10).map_or(c, |d| PERSIAN_DIGITS[d as usize]))
                .collect();
            if v < 0 {
                format!("\u{2212}{body}")
            } else {
                body
            }
        }
        _ => v.to_string(),
    }
}

fn missing_marker(format_version: u16) -> &'static str {
    match format_version {
        1 => "-",
        2 => "\u{2014}",
        _ => "\u{0640}",
    }
}

fn table_name(statement_type: StatementType, format_version: u16) -> &'static str {
    use StatementType::*;
    match (format_version, statement_type) {
        (1, IncomeStatement) => "Income statement",
        (1, BalanceSheet) => "Balance sheet",
        (1, CashFlow) => "Cash flow statement",
        (2, IncomeStatement) => "Statement of profit or loss",
        (2, BalanceSheet) => "Statement of financial position",
        (2, CashFlow) => "Statement of cash flows",
        (_, IncomeStatement) => "صورت سود و زیان",
        (_, BalanceSheet) => "صورت وضعیت مالی",
        (_, CashFlow) => "صورت جریان‌های نقدی",
    }
}

/// Render items into one raw table; items in `missing` get the version's
/// missing-value marker instead of a number.
pub fn render_table(
    registry: &MappingRegistry,
    statement_type: StatementType,
    format_version: u16,
    items: &BTreeMap<LineItem, i64>,
    missing: &[LineItem],
) -> RawTable {
    let labels = registry
        .labels_for(format_version)
        .expect("synthetic formats are built in");
    let rows = items
        .iter()
        .map(|(item, v)| RawRow {
            label: labels[item].clone(),
            value: if missing.contains(item) {
                missing_marker(format_version).to_string()
            } else {
                render_number(*v, format_version)
            },
        })
        .collect();
    RawTable {
        name: table_name(statement_type, format_version).to_string(),
        rows,
    }
}
