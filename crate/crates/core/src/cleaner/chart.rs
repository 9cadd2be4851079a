//! Canonical chart of accounts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::store::StatementType;

macro_rules! line_items {
    ($($variant:ident => $code:literal),+ $(,)?) => {
        /// Canonical line-item codes every report format maps onto.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum LineItem {
            $($variant),+
        }

        impl LineItem {
            pub const ALL: &'static [LineItem] = &[$(LineItem::$variant),+];

            pub fn code(self) -> &'static str {
                match self {
                    $(LineItem::$variant => $code),+
                }
            }
        }

        impl FromStr for LineItem {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($code => Ok(LineItem::$variant),)+
                    other => Err(format!("unknown canonical code {other:?}")),
                }
            }
        }
    };
}

line_items! {
    Revenue => "revenue",
    Cogs => "cogs",
    GrossProfit => "gross_profit",
    OperatingProfit => "operating_profit",
    Ebit => "ebit",
    InterestExpense => "interest_expense",
    NetIncome => "net_income",
    Cash => "cash",
    CashEquivalents => "cash_equivalents",
    Inventory => "inventory",
    CurrentAssets => "current_assets",
    FixedAssets => "fixed_assets",
    OtherAssets => "other_assets",
    TotalAssets => "total_assets",
    CurrentLiabilities => "current_liabilities",
    LongTermDebt => "long_term_debt",
    TotalDebt => "total_debt",
    TotalEquity => "total_equity",
    RetainedEarnings => "retained_earnings",
    OperatingCashFlow => "operating_cash_flow",
    SharesOutstanding => "shares_outstanding",
}

impl fmt::Display for LineItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Items a statement of the given type cannot be cleaned without.
pub fn mandatory_items(statement_type: StatementType) -> &'static [LineItem] {
    match statement_type {
        StatementType::IncomeStatement => &[LineItem::Revenue],
        StatementType::BalanceSheet => &[LineItem::TotalAssets],
        StatementType::CashFlow => &[LineItem::OperatingCashFlow],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for item in LineItem::ALL {
            assert_eq!(item.code().parse::<LineItem>().unwrap(), *item);
        }
        assert!("ebitda".parse::<LineItem>().is_err());
    }
}
