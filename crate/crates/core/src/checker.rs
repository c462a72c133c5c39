//! Portfolio feasibility check: "is my portfolio OK?"
//!
//! A proposed trade is judged against the whole trade history. The verdict
//! lists every rule the trade breaks; an empty list means YES.
//!
//! Rules:
//! * `R1` the first trade is a buy of at least `min_first_shares` shares
//!   costing at least `min_first_cost`;
//! * `R2` never sell below the price of the last trade;
//! * `R3` never buy above the price of the last trade;
//! * `R4` the trade's value is at least `commission_multiple` × commission;
//! * `R5` never sell more shares than are held;
//! * `R6` after a buy, cumulative cost plus cumulative commission must not
//!   exceed the holdings valued at the price of the first trade, i.e. the
//!   position still shows a profit if price merely returns to the entry;
//! * `BAND` (optional) cumulative cost stays within `band` of the first
//!   trade's cost.

use std::fmt;

use rust_decimal::Decimal;
use rust_decimal_macros::dec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{Ledger, LedgerRow, Trade};
use crate::margin::CommissionSchedule;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckerError {
    #[error("checker thresholds must be positive: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckerConfig {
    pub min_first_shares: i64,
    pub min_first_cost: Decimal,
    pub commission_multiple: Decimal,
    /// Allowed drift of cumulative cost away from the first trade's cost.
    pub cum_cost_band: Option<Decimal>,
}

impl Default for CheckerConfig {
    fn default() -> Self {
        Self {
            min_first_shares: 20,
            min_first_cost: dec!(1000.00),
            commission_multiple: dec!(50),
            cum_cost_band: None,
        }
    }
}

impl CheckerConfig {
    pub fn validate(&self) -> Result<(), CheckerError> {
        let mut bad = Vec::new();
        if self.min_first_shares <= 0 {
            bad.push("min_first_shares");
        }
        if self.min_first_cost <= Decimal::ZERO {
            bad.push("min_first_cost");
        }
        if self.commission_multiple <= Decimal::ZERO {
            bad.push("commission_multiple");
        }
        if self.cum_cost_band.is_some_and(|b| b <= Decimal::ZERO) {
            bad.push("cum_cost_band");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CheckerError::InvalidConfig(bad.join(", ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "EMPTY")]
    EmptyTrade,
    #[serde(rename = "PRICE")]
    BadPrice,
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    #[serde(rename = "BAND")]
    Band,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::EmptyTrade => "EMPTY",
            Rule::BadPrice => "PRICE",
            Rule::R1 => "R1",
            Rule::R2 => "R2",
            Rule::R3 => "R3",
            Rule::R4 => "R4",
            Rule::R5 => "R5",
            Rule::R6 => "R6",
            Rule::Band => "BAND",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub ok: bool,
    pub reasons: Vec<Violation>,
}

impl Verdict {
    fn from_reasons(reasons: Vec<Violation>) -> Self {
        Self {
            ok: reasons.is_empty(),
            reasons,
        }
    }

    pub fn violates(&self, rule: Rule) -> bool {
        self.reasons.iter().any(|v| v.rule == rule)
    }

    pub fn answer(&self) -> &'static str {
        if self.ok {
            "YES"
        } else {
            "NO"
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.answer())?;
        for v in &self.reasons {
            write!(f, "\n  {}: {}", v.rule, v.message)?;
        }
        Ok(())
    }
}

/// Running totals of a history, enough to judge the next trade.
#[derive(Debug, Clone, Copy)]
struct Position {
    first_price: Decimal,
    first_cost: Decimal,
    last_price: Decimal,
    last: LedgerRow,
}

fn position(history: &[Trade]) -> Option<Position> {
    let first = history.first()?;
    // replay without validation errors: the history is assumed feasible
    let mut row: Option<LedgerRow> = None;
    for t in history {
        row = Some(LedgerRow::next(row.as_ref(), *t).ok()?);
    }
    let last_trade = history.iter().rev().find(|t| t.shares != 0).unwrap_or(first);
    Some(Position {
        first_price: first.price,
        first_cost: first.cost(),
        last_price: last_trade.price,
        last: row?,
    })
}

fn push(reasons: &mut Vec<Violation>, rule: Rule, message: String) {
    reasons.push(Violation { rule, message });
}

/// Judge `proposed` against `history`.
pub fn check(history: &[Trade], proposed: &Trade, config: &CheckerConfig) -> Verdict {
    let pos = position(history);
    check_against(pos.as_ref(), proposed, config)
}

fn check_against(pos: Option<&Position>, proposed: &Trade, config: &CheckerConfig) -> Verdict {
    let mut reasons = Vec::new();
    let price = proposed.price;
    let shares = proposed.shares;
    if price <= Decimal::ZERO {
        push(&mut reasons, Rule::BadPrice, format!("price must be positive, got {price}"));
        return Verdict::from_reasons(reasons);
    }
    if shares == 0 {
        push(&mut reasons, Rule::EmptyTrade, "empty trade".to_string());
        return Verdict::from_reasons(reasons);
    }
    let cost = proposed.cost();
    let commission = proposed.commission;

    if cost.abs() < config.commission_multiple * commission {
        push(
            &mut reasons,
            Rule::R4,
            format!(
                "trade value {} is less than {} times the commission {}",
                cost.abs(),
                config.commission_multiple,
                commission
            ),
        );
    }

    let Some(pos) = pos else {
        if shares < config.min_first_shares {
            push(
                &mut reasons,
                Rule::R1,
                format!(
                    "first trade must be a buy of at least {} shares, got {shares}",
                    config.min_first_shares
                ),
            );
        }
        if cost < config.min_first_cost {
            push(
                &mut reasons,
                Rule::R1,
                format!(
                    "first trade must cost at least {}, got {cost}",
                    config.min_first_cost
                ),
            );
        }
        return Verdict::from_reasons(reasons);
    };

    let held = pos.last.cum_shares;
    let cum_cost = pos.last.cum_cost + cost;
    if shares < 0 {
        if price < pos.last_price {
            push(
                &mut reasons,
                Rule::R2,
                format!("sell price {price} is below the last trade price {}", pos.last_price),
            );
        }
        if -shares > held {
            push(
                &mut reasons,
                Rule::R5,
                format!("cannot sell {} shares, only {held} held", -shares),
            );
        }
    } else {
        if price > pos.last_price {
            push(
                &mut reasons,
                Rule::R3,
                format!("buy price {price} is above the last trade price {}", pos.last_price),
            );
        }
        let outlay = cum_cost + pos.last.cum_commission + commission;
        let cover = Decimal::from(held + shares) * pos.first_price;
        if outlay > cover {
            push(
                &mut reasons,
                Rule::R6,
                format!(
                    "too many shares: cumulative cost plus commission {outlay} would exceed \
                     {} shares valued at the entry price {} ({cover})",
                    held + shares,
                    pos.first_price
                ),
            );
        }
    }
    if let Some(band) = config.cum_cost_band {
        let lo = pos.first_cost - band;
        let hi = pos.first_cost + band;
        if cum_cost < lo || cum_cost > hi {
            push(
                &mut reasons,
                Rule::Band,
                format!("cumulative cost {cum_cost} would leave the band [{lo}, {hi}]"),
            );
        }
    }
    Verdict::from_reasons(reasons)
}

/// Judge each trade of `trades` against the ones before it.
pub fn check_sequence(trades: &[Trade], config: &CheckerConfig) -> Vec<Verdict> {
    (0..trades.len())
        .map(|i| check(&trades[..i], &trades[i], config))
        .collect()
}

/// The largest feasible order size, or `Unbounded` when no rule caps it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShareLimit {
    Shares(u64),
    Unbounded,
}

impl ShareLimit {
    pub fn shares(self) -> Option<u64> {
        match self {
            ShareLimit::Shares(n) => Some(n),
            ShareLimit::Unbounded => None,
        }
    }
}

fn proposal(price: Decimal, shares: i64, commissions: &CommissionSchedule) -> Trade {
    Trade::new(price, shares, commissions.commission(shares.unsigned_abs()))
}

fn floor_shares(value: Decimal) -> u64 {
    use rust_decimal::prelude::ToPrimitive;
    if value <= Decimal::ZERO {
        0
    } else {
        value.floor().to_u64().unwrap_or(u64::MAX)
    }
}

/// Scan down from `upper` for the first size the checker accepts.
fn scan_down(upper: u64, ok: impl Fn(u64) -> bool) -> u64 {
    (1..=upper).rev().find(|&n| ok(n)).unwrap_or(0)
}

/// Largest `n` such that buying `n` shares at `price` passes [`check`].
///
/// The cap comes from R6 when the price is above the entry price (after
/// commissions), and from the cumulative-cost band when one is configured.
/// Without either, buying more only improves the R6 margin and the result is
/// [`ShareLimit::Unbounded`].
pub fn max_feasible_buy(
    history: &[Trade],
    price: Decimal,
    commissions: &CommissionSchedule,
    config: &CheckerConfig,
) -> ShareLimit {
    let Some(pos) = position(history) else {
        return ShareLimit::Shares(0);
    };
    if price <= Decimal::ZERO || price > pos.last_price {
        return ShareLimit::Shares(0);
    }
    let mut upper: Option<u64> = None;
    let mut cap = |n: u64| upper = Some(upper.map_or(n, |u: u64| u.min(n)));

    // R6: n·(price − P0) + commission(n) ≤ headroom, and commission(n) ≥
    // n·marginal_rate once n exceeds the commission floor.
    let headroom = Decimal::from(pos.last.cum_shares) * pos.first_price
        - pos.last.cum_cost
        - pos.last.cum_commission;
    let slope = price - pos.first_price + commissions.marginal_rate();
    if slope > Decimal::ZERO {
        cap(floor_shares(headroom / slope).max(commissions.floor_shares()));
    }
    if let Some(band) = config.cum_cost_band {
        cap(floor_shares((pos.first_cost + band - pos.last.cum_cost) / price));
    }
    let Some(upper) = upper else {
        return ShareLimit::Unbounded;
    };
    let accepts = |n: u64| {
        check_against(Some(&pos), &proposal(price, n as i64, commissions), config).ok
    };
    ShareLimit::Shares(scan_down(upper, accepts))
}

/// Largest `n` such that selling `n` shares at `price` passes [`check`].
pub fn max_feasible_sell(
    history: &[Trade],
    price: Decimal,
    commissions: &CommissionSchedule,
    config: &CheckerConfig,
) -> u64 {
    let Some(pos) = position(history) else {
        return 0;
    };
    if price <= Decimal::ZERO || price < pos.last_price {
        return 0;
    }
    let mut upper = pos.last.cum_shares.max(0) as u64;
    if let Some(band) = config.cum_cost_band {
        upper = upper.min(floor_shares(
            (pos.last.cum_cost - (pos.first_cost - band)) / price,
        ));
    }
    let accepts = |n: u64| {
        check_against(Some(&pos), &proposal(price, -(n as i64), commissions), config).ok
    };
    scan_down(upper, accepts)
}

/// Ledger rows for a history that passed the checker.
pub fn history_ledger(history: &[Trade]) -> Option<Ledger> {
    Ledger::from_trades(history.iter().copied()).ok()
}
