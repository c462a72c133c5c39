//! Wave trading: a daily-close dip-buy / rise-sell policy.
//!
//! Each day the policy compares the close with two references. A buy fires
//! when the close sits at least `dip_threshold` below the highest close since
//! the last trade (looking back at most `reference_window` days) and no higher
//! than the last trade price. A sell fires when the close is at least
//! `rise_threshold` above the last trade price. Sizes are proportional to the
//! current holding and rounded to whole lots; buys are boosted after a sharp
//! one-day fall and clipped to the account's buying power, sells are clipped
//! to keep a core holding.

use std::collections::VecDeque;

use rust_decimal::Decimal;
use rust_decimal_macros::dec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{Ledger, LedgerError, Trade};
use crate::margin::{
    buying_power, settle_trade, AccountState, CommissionSchedule, MarginError, RateSchedule,
};
use crate::marketdata::{PricePoint, PriceSeries, TradingDate};
use crate::money::{fmt_cents, round_cents, to_f64};

/// A trade must be worth at least this many times its commission.
pub const COMMISSION_MULTIPLE: Decimal = dec!(50);

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("invalid strategy parameter: {0}")]
    InvalidParams(String),
    #[error("empty price series")]
    EmptySeries,
    #[error("no trades to replay")]
    EmptyTrades,
    #[error("trade {0} has no date")]
    UndatedTrade(usize),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Margin(#[from] MarginError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    pub initial_shares: u64,
    pub lot: u64,
    pub dip_threshold: f64,
    pub rise_threshold: f64,
    pub buy_aggression: f64,
    pub sell_aggression: f64,
    pub panic_drop: f64,
    pub panic_multiplier: f64,
    /// Defaults to a third of `initial_shares`.
    pub min_core_holding: Option<u64>,
    pub reference_window: usize,
    /// Buys are clipped so that buying power stays non-negative even if the
    /// price then falls by this fraction. Zero clips at the close itself.
    pub margin_buffer: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            initial_shares: 1500,
            lot: 100,
            dip_threshold: 0.02,
            rise_threshold: 0.02,
            buy_aggression: 1.0,
            sell_aggression: 0.5,
            panic_drop: 0.03,
            panic_multiplier: 2.0,
            min_core_holding: None,
            reference_window: 10,
            margin_buffer: 0.85,
        }
    }
}

impl StrategyParams {
    pub fn core_holding(&self) -> u64 {
        self.min_core_holding.unwrap_or(self.initial_shares / 3)
    }

    /// Parameters under which the policy buys once and holds. A dip can
    /// never reach the threshold; a rise can (it is unbounded), so the core
    /// holding is the whole position and every sell clips to nothing.
    pub fn degenerate(initial_shares: u64) -> Self {
        Self {
            initial_shares,
            dip_threshold: 1.0 - f64::EPSILON,
            rise_threshold: 1.0 - f64::EPSILON,
            min_core_holding: Some(initial_shares),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let bad = |m: &str| Err(StrategyError::InvalidParams(m.to_string()));
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.initial_shares == 0 {
            return bad("initial_shares must be at least 1");
        }
        if self.lot == 0 {
            return bad("lot must be at least 1");
        }
        if !open_unit(self.dip_threshold) || !open_unit(self.rise_threshold) {
            return bad("dip_threshold and rise_threshold must lie in (0, 1)");
        }
        if !open_unit(self.panic_drop) {
            return bad("panic_drop must lie in (0, 1)");
        }
        if !positive(self.buy_aggression)
            || !positive(self.sell_aggression)
            || !positive(self.panic_multiplier)
        {
            return bad("buy_aggression, sell_aggression and panic_multiplier must be positive");
        }
        if self.core_holding() > self.initial_shares {
            return bad("min_core_holding exceeds initial_shares");
        }
        if self.reference_window == 0 {
            return bad("reference_window must be at least 1");
        }
        if !(self.margin_buffer >= 0.0 && self.margin_buffer < 1.0) {
            return bad("margin_buffer must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyState {
    pub last_trade_price: Decimal,
    pub holdings: i64,
    pub previous_day_price: Decimal,
    /// Closes since the last trade, newest last, at most `reference_window`.
    window: VecDeque<Decimal>,
}

impl StrategyState {
    /// State after the opening buy on the first day.
    pub fn after_first_day(first: &Trade) -> Self {
        Self {
            last_trade_price: first.price,
            holdings: first.shares,
            previous_day_price: first.price,
            window: VecDeque::from([first.price]),
        }
    }

    pub fn trailing_max(&self) -> Decimal {
        self.window.iter().copied().max().unwrap_or(self.last_trade_price)
    }

    /// Fold in the day's close and the trade made at it.
    pub fn advance(&mut self, trade: &Trade, window: usize) {
        if trade.shares != 0 {
            self.last_trade_price = trade.price;
            self.window.clear();
        }
        self.window.push_back(trade.price);
        while self.window.len() > window {
            self.window.pop_front();
        }
        self.holdings += trade.shares;
        self.previous_day_price = trade.price;
    }
}

pub fn first_day(price: &PricePoint, params: &StrategyParams, commissions: &CommissionSchedule) -> Trade {
    Trade::dated(
        price.date,
        price.price,
        params.initial_shares as i64,
        commissions.commission(params.initial_shares),
    )
}

/// Round `raw / lot` to the nearest whole number of lots, ties down.
fn round_to_lots(raw: f64, lot: u64) -> u64 {
    let units = raw / lot as f64;
    if units.is_nan() || units <= 0.5 {
        return 0;
    }
    (units - 0.5).ceil() as u64 * lot
}

fn worth_commission(shares: u64, price: Decimal, commissions: &CommissionSchedule) -> bool {
    Decimal::from(shares) * price >= COMMISSION_MULTIPLE * commissions.commission(shares)
}

/// Buying power after buying `n` at `price`, marked at `mark`.
fn buying_power_after(
    account: &AccountState,
    n: u64,
    price: Decimal,
    mark: Decimal,
    commissions: &CommissionSchedule,
) -> Decimal {
    let mut after = *account;
    after.holdings += n as i64;
    after.cash -= Decimal::from(n) * price + commissions.commission(n);
    buying_power(&after, mark)
}

/// The day's decision. `account` should already be marked to `today`.
pub fn decide(
    state: &StrategyState,
    account: &AccountState,
    today: &PricePoint,
    params: &StrategyParams,
    commissions: &CommissionSchedule,
) -> Trade {
    let p = today.price;
    let hold = Trade::hold(today.date, p);
    let holdings = state.holdings.max(0) as u64;
    let tmax = state.trailing_max();
    let last = state.last_trade_price;

    if p <= last && tmax > Decimal::ZERO {
        let dip = to_f64((tmax - p) / tmax);
        if dip >= params.dip_threshold {
            let mut raw = params.buy_aggression * holdings as f64 * dip;
            let prev = state.previous_day_price;
            if prev > Decimal::ZERO && to_f64((prev - p) / prev) >= params.panic_drop {
                raw *= params.panic_multiplier;
            }
            let n = clip_buy(round_to_lots(raw, params.lot), account, p, params, commissions);
            if n >= params.lot && worth_commission(n, p, commissions) {
                return Trade::dated(today.date, p, n as i64, commissions.commission(n));
            }
            return hold;
        }
    }

    if p >= last && last > Decimal::ZERO {
        let rise = to_f64((p - last) / last);
        if rise >= params.rise_threshold {
            let raw = params.sell_aggression * holdings as f64 * rise;
            let spare = holdings.saturating_sub(params.core_holding());
            let n = round_to_lots(raw, params.lot).min(spare / params.lot * params.lot);
            if n >= params.lot && worth_commission(n, p, commissions) {
                return Trade::dated(today.date, p, -(n as i64), commissions.commission(n));
            }
        }
    }
    hold
}

/// Largest multiple of `lot` not above `wanted` that keeps buying power
/// non-negative at the close discounted by `margin_buffer`.
fn clip_buy(
    wanted: u64,
    account: &AccountState,
    price: Decimal,
    params: &StrategyParams,
    commissions: &CommissionSchedule,
) -> u64 {
    let mark = Decimal::from_f64_retain(1.0 - params.margin_buffer)
        .map_or(price, |f| price * f);
    let ok = |n: u64| buying_power_after(account, n, price, mark, commissions) >= Decimal::ZERO;
    if wanted == 0 || ok(wanted) {
        return wanted;
    }
    // buying power falls by L·price − (L−1)·mark per share, plus commission
    let l = account.leverage;
    let slope = l * price - (l - Decimal::ONE) * mark;
    let room = buying_power_after(account, 0, price, mark, commissions);
    let mut n = if slope > Decimal::ZERO && room > Decimal::ZERO {
        let est = to_f64(room / slope).floor() as u64;
        est.min(wanted) / params.lot * params.lot
    } else {
        0
    };
    while n > 0 && !ok(n) {
        n -= params.lot.min(n);
    }
    while n + params.lot <= wanted && ok(n + params.lot) {
        n += params.lot;
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginCall {
    pub date: TradingDate,
    pub buying_power: Decimal,
}

/// Outcome of running a policy over a price series.
#[derive(Debug, Clone, PartialEq)]
pub struct Backtest {
    /// One row per price point; holds are zero-share rows.
    pub ledger: Ledger,
    /// Account at each close, with interest accrued to that day.
    pub trace: Vec<AccountState>,
    pub margin_calls: Vec<MarginCall>,
    /// Cash deposited on the first day: cost plus commission of the opening buy.
    pub deposit: Decimal,
}

impl Backtest {
    pub fn final_account(&self) -> &AccountState {
        self.trace.last().expect("non-empty backtest")
    }

    pub fn final_price(&self) -> Decimal {
        self.ledger.last().expect("non-empty backtest").trade.price
    }

    /// Account balance (market value plus cash) at the last close.
    pub fn final_balance(&self) -> Decimal {
        self.final_account().net_liquidation(self.final_price())
    }

    /// Final balance less the deposit.
    pub fn total_return(&self) -> Decimal {
        self.final_balance() - self.deposit
    }

    /// Balance at each close.
    pub fn balances(&self) -> Vec<(TradingDate, Decimal)> {
        self.trace
            .iter()
            .zip(self.ledger.rows())
            .map(|(a, r)| (a.date, a.net_liquidation(r.trade.price)))
            .collect()
    }
}

/// Headline figures of a run, money rounded to cents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacktestSummary {
    pub start: TradingDate,
    pub end: TradingDate,
    pub days: usize,
    pub trades: usize,
    pub deposit: Decimal,
    /// Ledger profit at the last close, before interest.
    pub final_profit: Decimal,
    pub final_balance: Decimal,
    /// Final balance less the deposit, after interest.
    pub total_return: Decimal,
    pub final_cash: Decimal,
    pub final_holdings: i64,
    pub interest_paid: Decimal,
    pub interest_earned: Decimal,
    pub margin_calls: Vec<MarginCall>,
}

impl Backtest {
    pub fn summary(&self) -> BacktestSummary {
        let account = self.final_account();
        let rows = self.ledger.rows();
        BacktestSummary {
            start: self.trace[0].date,
            end: account.date,
            days: rows.len(),
            trades: rows.iter().filter(|r| r.trade.shares != 0).count(),
            deposit: round_cents(self.deposit),
            final_profit: round_cents(rows.last().expect("non-empty").profit),
            final_balance: round_cents(self.final_balance()),
            total_return: round_cents(self.total_return()),
            final_cash: round_cents(account.cash),
            final_holdings: account.holdings,
            interest_paid: account.cumulative_interest_paid,
            interest_earned: account.cumulative_interest_earned,
            margin_calls: self.margin_calls.clone(),
        }
    }
}

pub const TRACE_HEADER: &str =
    "Date,Price,Shares,Cash,Holdings,MarketValue,Balance,BuyingPower,InterestPaid,InterestEarned";

impl Backtest {
    /// The account at each close as CSV, money to the cent.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for (a, row) in self.trace.iter().zip(self.ledger.rows()) {
            let p = row.trade.price;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                a.date,
                p,
                row.trade.shares,
                fmt_cents(a.cash),
                a.holdings,
                fmt_cents(a.market_value(p)),
                fmt_cents(a.net_liquidation(p)),
                fmt_cents(buying_power(a, p)),
                fmt_cents(a.cumulative_interest_paid),
                fmt_cents(a.cumulative_interest_earned),
            ));
        }
        out
    }
}

/// Run any daily policy: open with the first trade, then one decision per day.
fn run_policy(
    series: &PriceSeries,
    first: Trade,
    rates: &RateSchedule,
    leverage: Decimal,
    mut policy: impl FnMut(&AccountState, &PricePoint) -> Trade,
) -> Result<Backtest, StrategyError> {
    let start = series.first();
    let deposit = first.cost() + first.commission;
    let mut account = AccountState::open(start.date, deposit, leverage)?;
    let mut ledger = Ledger::new();
    let mut trace = Vec::with_capacity(series.len());
    let mut margin_calls = Vec::new();
    let mut first = Some(first);
    for point in series.points() {
        let trade = match first.take() {
            Some(t) => t,
            None => policy(&account.marked(point.date, rates)?, point),
        };
        ledger.append(trade)?;
        if trade.shares != 0 {
            account = settle_trade(&account, &trade, rates)?;
        }
        let marked = account.marked(point.date, rates)?;
        let bp = buying_power(&marked, point.price);
        if bp < Decimal::ZERO {
            margin_calls.push(MarginCall {
                date: point.date,
                buying_power: bp,
            });
        }
        trace.push(marked);
    }
    Ok(Backtest {
        ledger,
        trace,
        margin_calls,
        deposit,
    })
}

/// Run the wave policy over `series`.
pub fn run_backtest(
    series: &PriceSeries,
    params: &StrategyParams,
    rates: &RateSchedule,
    commissions: &CommissionSchedule,
    leverage: Decimal,
) -> Result<Backtest, StrategyError> {
    params.validate()?;
    commissions.validate()?;
    if series.is_empty() {
        return Err(StrategyError::EmptySeries);
    }
    let first = first_day(series.first(), params, commissions);
    let mut state = StrategyState::after_first_day(&first);
    run_policy(series, first, rates, leverage, |account, point| {
        let trade = decide(&state, account, point, params, commissions);
        state.advance(&trade, params.reference_window);
        trade
    })
}

/// Account for an externally given trade list, one row per line. The
/// account opens with the first trade's cost plus commission when it is a
/// buy, and with no cash otherwise.
pub fn replay(
    trades: &[Trade],
    rates: &RateSchedule,
    leverage: Decimal,
) -> Result<Backtest, StrategyError> {
    let first = trades.first().ok_or(StrategyError::EmptyTrades)?;
    if let Some(i) = trades.iter().position(|t| t.date.is_none()) {
        return Err(StrategyError::UndatedTrade(i + 1));
    }
    let deposit = if first.is_buy() {
        first.cost() + first.commission
    } else {
        Decimal::ZERO
    };
    let mut account = AccountState::open(first.date.expect("checked"), deposit, leverage)?;
    let mut ledger = Ledger::new();
    let mut trace = Vec::with_capacity(trades.len());
    let mut margin_calls = Vec::new();
    for trade in trades {
        let date = trade.date.expect("checked");
        ledger.append(*trade)?;
        if trade.shares != 0 {
            account = settle_trade(&account, trade, rates)?;
        }
        let marked = account.marked(date, rates)?;
        let bp = buying_power(&marked, trade.price);
        if bp < Decimal::ZERO {
            margin_calls.push(MarginCall { date, buying_power: bp });
        }
        trace.push(marked);
    }
    Ok(Backtest {
        ledger,
        trace,
        margin_calls,
        deposit,
    })
}

/// Buy `initial_shares` on the first day and hold.
pub fn buy_and_hold(
    series: &PriceSeries,
    initial_shares: u64,
    rates: &RateSchedule,
    commissions: &CommissionSchedule,
    leverage: Decimal,
) -> Result<Backtest, StrategyError> {
    if initial_shares == 0 {
        return Err(StrategyError::InvalidParams("initial_shares must be at least 1".into()));
    }
    if series.is_empty() {
        return Err(StrategyError::EmptySeries);
    }
    let first = Trade::dated(
        series.first().date,
        series.first().price,
        initial_shares as i64,
        commissions.commission(initial_shares),
    );
    run_policy(series, first, rates, leverage, |_, p| Trade::hold(p.date, p.price))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::{check, CheckerConfig, Rule};
    use crate::margin::RatePair;
    use crate::samples;
    use proptest::prelude::*;

    fn ib() -> CommissionSchedule {
        CommissionSchedule::interactive_brokers()
    }

    fn series(prices: &[Decimal]) -> PriceSeries {
        let start = TradingDate::from_ymd(2010, 1, 4).unwrap();
        PriceSeries::new(
            prices
                .iter()
                .enumerate()
                .map(|(i, &price)| PricePoint {
                    date: start.plus_days(i as u64).unwrap(),
                    price,
                })
                .collect(),
        )
        .unwrap()
    }

    fn walk(seed: u64, len: usize) -> PriceSeries {
        let p = crate::gbm::GbmParams::new(100.0, 0.0002, 0.02).unwrap();
        let values = crate::gbm::simulate_values(&p, len, seed);
        series(&values.iter().map(|&v| crate::money::price_from_f64(v).unwrap()).collect::<Vec<_>>())
    }

    fn zero_rates() -> RateSchedule {
        RateSchedule::flat(RatePair::new(Decimal::ZERO, Decimal::ZERO)).unwrap()
    }

    #[test]
    fn opening_buy() {
        let day = samples::spy_1993_prices()[0];
        let t = first_day(&day, &StrategyParams::default(), &ib());
        assert_eq!((t.shares, t.commission), (1500, dec!(7.50)));
        assert_eq!(crate::money::round_cents(t.cost()), dec!(42001.26));
        let half = StrategyParams { initial_shares: 750, ..Default::default() };
        let t = first_day(&day, &half, &ib());
        assert_eq!(crate::money::round_cents(t.cost()), dec!(21000.63));
    }

    #[test]
    fn validation() {
        assert!(StrategyParams::default().validate().is_ok());
        let bad = [
            StrategyParams { initial_shares: 0, ..Default::default() },
            StrategyParams { lot: 0, ..Default::default() },
            StrategyParams { dip_threshold: 0.0, ..Default::default() },
            StrategyParams { rise_threshold: 1.0, ..Default::default() },
            StrategyParams { buy_aggression: -1.0, ..Default::default() },
            StrategyParams { panic_multiplier: 0.0, ..Default::default() },
            StrategyParams { min_core_holding: Some(1501), ..Default::default() },
            StrategyParams { reference_window: 0, ..Default::default() },
            StrategyParams { margin_buffer: 1.0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
        assert_eq!(StrategyParams::default().core_holding(), 500);
    }

    #[test]
    fn lot_rounding_ties_down() {
        assert_eq!(round_to_lots(49.0, 100), 0);
        assert_eq!(round_to_lots(50.0, 100), 0);
        assert_eq!(round_to_lots(50.5, 100), 100);
        assert_eq!(round_to_lots(150.0, 100), 100);
        assert_eq!(round_to_lots(150.1, 100), 200);
        assert_eq!(round_to_lots(7.5, 1), 7);
        assert_eq!(round_to_lots(0.0, 1), 0);
    }

    fn state_at(price: Decimal, holdings: i64) -> StrategyState {
        StrategyState::after_first_day(&Trade::new(price, holdings, Decimal::ZERO))
    }

    fn account(holdings: i64, cash: Decimal) -> AccountState {
        let mut a = AccountState::open(TradingDate::from_ymd(2010, 1, 4).unwrap(), cash, dec!(2)).unwrap();
        a.holdings = holdings;
        a
    }

    fn today(price: Decimal) -> PricePoint {
        PricePoint { date: TradingDate::from_ymd(2010, 1, 5).unwrap(), price }
    }

    #[test]
    fn rise_without_dip_holds() {
        let p = StrategyParams::default();
        let s = state_at(dec!(100), 1500);
        let t = decide(&s, &account(1500, Decimal::ZERO), &today(dec!(101)), &p, &ib());
        assert_eq!(t.shares, 0);
    }

    #[test]
    fn sells_on_rise_and_keeps_core() {
        let p = StrategyParams::default();
        let s = state_at(dec!(100), 1500);
        // 0.5 × 1500 × 0.10 = 75 → one lot
        let t = decide(&s, &account(1500, Decimal::ZERO), &today(dec!(110)), &p, &ib());
        assert_eq!(t.shares, -100);
        let s = state_at(dec!(100), 500);
        let t = decide(&s, &account(500, Decimal::ZERO), &today(dec!(150)), &p, &ib());
        assert_eq!(t.shares, 0);
        let s = state_at(dec!(100), 580);
        let t = decide(&s, &account(580, Decimal::ZERO), &today(dec!(150)), &p, &ib());
        assert_eq!(t.shares, 0, "only 80 spare shares, less than a lot");
    }

    #[test]
    fn buys_on_dip_with_panic_boost() {
        let p = StrategyParams { margin_buffer: 0.0, ..Default::default() };
        let rich = account(1500, dec!(1000000));
        // dip 4% from 100, one-day fall 4% ≥ 3%: 1 × 1500 × 0.04 × 2 = 120 → 100
        let s = state_at(dec!(100), 1500);
        let t = decide(&s, &rich, &today(dec!(96)), &p, &ib());
        assert_eq!(t.shares, 100);
        // dip 4% reached slowly: 60 → 100 without boost as well; 10% dip: 150 → 100, boosted 300
        let mut s = state_at(dec!(100), 1500);
        s.previous_day_price = dec!(91);
        assert_eq!(decide(&s, &rich, &today(dec!(90)), &p, &ib()).shares, 100);
        s.previous_day_price = dec!(100);
        assert_eq!(decide(&s, &rich, &today(dec!(90)), &p, &ib()).shares, 300);
    }

    #[test]
    fn buy_is_clipped_to_buying_power() {
        let p = StrategyParams { margin_buffer: 0.0, ..Default::default() };
        let s = state_at(dec!(100), 1500);
        // at 90, bp = 1500·90 + 2·cash; with cash −130000: 135000 − 260000 < 0
        let broke = account(1500, dec!(-70000));
        // bp = 135000 − 140000 < 0 before any buy
        assert_eq!(decide(&s, &broke, &today(dec!(90)), &p, &ib()).shares, 0);
        // bp = 135000 − 2·50000 = 35000; each share costs 2·90 − 90 = 90 of it
        let some = account(1500, dec!(-50000));
        let t = decide(&s, &some, &today(dec!(90)), &p, &ib());
        assert_eq!(t.shares, 300);
        let mut after = some;
        after.holdings += 300;
        after.cash -= t.cost() + t.commission;
        assert!(buying_power(&after, dec!(90)) >= Decimal::ZERO);
        // a buffer demands more room
        let careful = StrategyParams { margin_buffer: 0.5, ..Default::default() };
        let t = decide(&s, &some, &today(dec!(90)), &careful, &ib());
        assert_eq!(t.shares, 0);
    }

    #[test]
    fn constant_prices_buy_once() {
        let prices = vec![dec!(28.000838); 40];
        let bt = run_backtest(&series(&prices), &StrategyParams::default(), &RateSchedule::default(), &ib(), dec!(2)).unwrap();
        assert_eq!(bt.ledger.len(), 40);
        assert_eq!(bt.ledger.rows().iter().filter(|r| r.trade.shares != 0).count(), 1);
        assert_eq!(bt.final_account().cash, Decimal::ZERO);
        assert_eq!(bt.total_return(), dec!(-7.50));
        assert!(bt.margin_calls.is_empty());
    }

    #[test]
    fn deposit_covers_opening_buy() {
        let s = series(&samples::spy_1993_prices().iter().map(|p| p.price).collect::<Vec<_>>());
        let bt = buy_and_hold(&s, 1500, &RateSchedule::default(), &ib(), dec!(2)).unwrap();
        assert_eq!(crate::money::round_cents(bt.deposit), dec!(42008.76));
        assert!(bt.trace.iter().all(|a| a.cash.is_zero() && a.holdings == 1500));
        assert!(buy_and_hold(&s, 0, &RateSchedule::default(), &ib(), dec!(2)).is_err());
    }

    #[test]
    fn degenerate_params_reproduce_buy_and_hold() {
        for seed in 0..5 {
            let s = walk(seed, 2000);
            let rates = RateSchedule::default();
            let wt = run_backtest(&s, &StrategyParams::degenerate(1500), &rates, &ib(), dec!(2)).unwrap();
            let bh = buy_and_hold(&s, 1500, &rates, &ib(), dec!(2)).unwrap();
            assert_eq!(wt, bh);
            assert_eq!(wt.ledger.emit_table(true), bh.ledger.emit_table(true));
        }
    }

    #[test]
    fn near_one_thresholds_alone_hold_until_the_price_doubles() {
        let only_thresholds = StrategyParams {
            min_core_holding: None,
            ..StrategyParams::degenerate(1500)
        };
        let rates = RateSchedule::default();
        let calm = series(&[dec!(100), dec!(60), dec!(190), dec!(1), dec!(199)]);
        let wt = run_backtest(&calm, &only_thresholds, &rates, &ib(), dec!(2)).unwrap();
        assert_eq!(wt, buy_and_hold(&calm, 1500, &rates, &ib(), dec!(2)).unwrap());
        let doubled = series(&[dec!(100), dec!(200)]);
        let wt = run_backtest(&doubled, &only_thresholds, &rates, &ib(), dec!(2)).unwrap();
        assert_eq!(wt.ledger.rows()[1].trade.shares, -700);
    }

    #[test]
    fn replay_reproduces_cash_trace() {
        let mut trades = samples::wt_excerpt_trades();
        trades.push(Trade::dated("3/2/93".parse().unwrap(), dec!(28.638126), -200, dec!(1.00)));
        let bt = replay(&trades, &RateSchedule::default(), dec!(2)).unwrap();
        let cash: Vec<Decimal> = bt
            .trace
            .iter()
            .zip(bt.ledger.rows())
            .filter(|(_, r)| r.trade.shares != 0)
            .map(|(a, _)| crate::money::round_cents(a.cash))
            .collect();
        assert_eq!(cash, [dec!(0), dec!(-5684.81), dec!(-14000.67), dec!(-5680.51), dec!(35.84)]);
        let csv = bt.trace_csv();
        assert!(csv.starts_with(TRACE_HEADER));
        assert!(csv.contains("02/16/1993,27.702077,300,-14000.67,2000,"));
        assert_eq!(csv.lines().count(), trades.len() + 1);
        let sum = bt.summary();
        assert_eq!((sum.days, sum.trades, sum.final_holdings), (16, 5, 1500));
        assert_eq!(sum.final_cash, dec!(35.84));
        assert_eq!(sum.interest_paid, dec!(20.91));
        assert_eq!(sum.deposit, dec!(42008.76));
        assert_eq!(replay(&[], &RateSchedule::default(), dec!(2)), Err(StrategyError::EmptyTrades));
        let undated = [Trade::new(dec!(1), 1, dec!(0))];
        assert_eq!(replay(&undated, &RateSchedule::default(), dec!(2)), Err(StrategyError::UndatedTrade(1)));
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = walk(1, 10);
        let bad = StrategyParams { lot: 0, ..Default::default() };
        assert!(run_backtest(&s, &bad, &RateSchedule::default(), &ib(), dec!(2)).is_err());
        assert!(run_backtest(&s, &StrategyParams::default(), &RateSchedule::default(), &ib(), dec!(0.5)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn trades_obey_rules_two_and_three(seed in 0u64..10_000) {
            let s = walk(seed, 300);
            let bt = run_backtest(&s, &StrategyParams::default(), &RateSchedule::default(), &ib(), dec!(2)).unwrap();
            let trades: Vec<Trade> = bt.ledger.trades().copied().filter(|t| t.shares != 0).collect();
            for i in 1..trades.len() {
                let v = check(&trades[..i], &trades[i], &CheckerConfig::default());
                prop_assert!(!v.violates(Rule::R2) && !v.violates(Rule::R3), "{v}");
            }
            let core = StrategyParams::default().core_holding() as i64;
            prop_assert!(bt.ledger.rows().iter().all(|r| r.cum_shares >= core));
        }

        #[test]
        fn halving_shares_and_lot_halves_every_trade(seed in 0u64..10_000) {
            let s = walk(seed, 400);
            let proportional = CommissionSchedule::PerShareWithFloor {
                per_share: dec!(0.005),
                floor_shares: 0,
                floor_fee: dec!(1),
            };
            let full = StrategyParams { margin_buffer: 0.0, ..Default::default() };
            let half = StrategyParams { initial_shares: 750, lot: 50, ..full };
            let a = run_backtest(&s, &full, &zero_rates(), &proportional, dec!(2)).unwrap();
            let b = run_backtest(&s, &half, &zero_rates(), &proportional, dec!(2)).unwrap();
            for (x, y) in a.ledger.trades().zip(b.ledger.trades()) {
                prop_assert_eq!(x.shares, 2 * y.shares);
            }
        }

        #[test]
        fn deterministic(seed in 0u64..10_000) {
            let s = walk(seed, 200);
            let p = StrategyParams::default();
            let a = run_backtest(&s, &p, &RateSchedule::default(), &ib(), dec!(2)).unwrap();
            let b = run_backtest(&s, &p, &RateSchedule::default(), &ib(), dec!(2)).unwrap();
            prop_assert_eq!(a.ledger.emit_table(true), b.ledger.emit_table(true));
            prop_assert_eq!(a, b);
        }
    }
}
