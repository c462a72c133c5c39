//! Worked trade lists and price excerpts.
//!
//! These are small, well-known inputs used throughout the test suites and by
//! the CLI's self-check. They are inputs only; expected outputs live with the
//! tests that assert them.

use rust_decimal::Decimal;
use rust_decimal_macros::dec;

use crate::ledger::Trade;
use crate::marketdata::{PricePoint, TradingDate};

fn date(s: &str) -> TradingDate {
    s.parse().expect("sample date")
}

fn dated(rows: &[(&str, Decimal, i64, Decimal)]) -> Vec<Trade> {
    rows.iter()
        .map(|&(d, p, n, c)| Trade::dated(date(d), p, n, c))
        .collect()
}

/// Five SPY trades in January/February 2015.
pub fn five_trades() -> Vec<Trade> {
    dated(&[
        ("1/2/15", dec!(197.05), 300, dec!(1.50)),
        ("1/6/15", dec!(191.66), 50, dec!(1.00)),
        ("1/8/15", dec!(197.50), -36, dec!(1.00)),
        ("1/14/15", dec!(192.66), 36, dec!(1.00)),
        ("2/3/15", dec!(196.48), -28, dec!(1.00)),
    ])
}

/// The same five trades with wider price swings on the middle three.
pub fn five_trades_wide() -> Vec<Trade> {
    dated(&[
        ("1/2/15", dec!(197.05), 300, dec!(1.50)),
        ("1/6/15", dec!(189.66), 50, dec!(1.00)),
        ("1/8/15", dec!(200.50), -36, dec!(1.00)),
        ("1/14/15", dec!(187.66), 36, dec!(1.00)),
        ("2/3/15", dec!(196.48), -28, dec!(1.00)),
    ])
}

/// Undated trades as typed into the checker: buy, sell, oversized buy.
pub fn oversized_buy() -> Vec<Trade> {
    vec![
        Trade::new(dec!(75.49), 1000, dec!(5.00)),
        Trade::new(dec!(86.03), -100, dec!(1.00)),
        Trade::new(dec!(82.97), 200, dec!(1.00)),
    ]
}

/// First two trades of [`oversized_buy`]; the history a new buy is checked against.
pub fn oversized_buy_history() -> Vec<Trade> {
    oversized_buy().into_iter().take(2).collect()
}

/// The feasible alternative: buy 60 on the way down, 40 back at the entry price.
pub fn split_buy() -> Vec<Trade> {
    vec![
        Trade::new(dec!(75.49), 1000, dec!(5.00)),
        Trade::new(dec!(86.03), -100, dec!(1.00)),
        Trade::new(dec!(82.97), 60, dec!(1.00)),
        Trade::new(dec!(75.49), 40, dec!(1.00)),
    ]
}

/// 31 SPY trades from April 1998 to September 2003.
pub fn long_table() -> Vec<Trade> {
    dated(&[
        ("4/6/98", dec!(79.60), 1000, dec!(5.00)),
        ("4/27/98", dec!(77.49), 100, dec!(1.00)),
        ("5/20/98", dec!(80.11), -100, dec!(1.00)),
        ("9/2/98", dec!(71.03), 200, dec!(1.00)),
        ("11/4/98", dec!(80.54), -150, dec!(1.00)),
        ("11/23/98", dec!(85.65), -200, dec!(1.00)),
        ("1/7/99", dec!(91.29), -150, dec!(1.00)),
        ("4/22/99", dec!(98.26), -100, dec!(1.00)),
        ("6/2/99", dec!(93.72), 150, dec!(1.00)),
        ("7/13/99", dec!(100.88), -150, dec!(1.00)),
        ("8/4/99", dec!(94.55), 150, dec!(1.00)),
        ("8/25/99", dec!(100.16), -100, dec!(1.00)),
        ("9/22/99", dec!(94.80), 120, dec!(1.00)),
        ("11/5/99", dec!(100.08), -120, dec!(1.00)),
        ("3/17/00", dec!(107.19), -150, dec!(1.00)),
        ("12/1/00", dec!(96.92), 200, dec!(1.00)),
        ("1/30/01", dec!(101.32), -120, dec!(1.00)),
        ("3/1/01", dec!(91.62), 150, dec!(1.00)),
        ("4/2/01", dec!(84.20), 150, dec!(1.00)),
        ("4/18/01", dec!(91.42), -100, dec!(1.00)),
        ("8/30/01", dec!(83.78), 100, dec!(1.00)),
        ("9/25/01", dec!(75.51), 125, dec!(1.00)),
        ("10/23/01", dec!(80.83), -100, dec!(1.00)),
        ("7/9/02", dec!(71.65), 150, dec!(1.00)),
        ("7/19/02", dec!(63.48), 150, dec!(1.00)),
        ("8/14/02", dec!(69.11), -150, dec!(1.00)),
        ("9/23/02", dec!(62.98), 150, dec!(1.00)),
        ("11/6/02", dec!(70.04), -100, dec!(1.00)),
        ("1/27/03", dec!(64.45), 150, dec!(1.00)),
        ("5/2/03", dec!(70.80), -125, dec!(1.00)),
        ("9/8/03", dec!(79.03), -100, dec!(1.00)),
    ])
}

/// First fifteen SPY closes of 1993.
pub fn spy_1993_prices() -> Vec<PricePoint> {
    [
        ("1/29/93", dec!(28.000838)),
        ("2/1/93", dec!(28.199990)),
        ("2/2/93", dec!(28.259704)),
        ("2/3/93", dec!(28.558465)),
        ("2/4/93", dec!(28.677956)),
        ("2/5/93", dec!(28.658009)),
        ("2/8/93", dec!(28.658009)),
        ("2/9/93", dec!(28.458857)),
        ("2/10/93", dec!(28.498687)),
        ("2/11/93", dec!(28.638126)),
        ("2/12/93", dec!(28.419026)),
        ("2/16/93", dec!(27.702077)),
        ("2/17/93", dec!(27.682194)),
        ("2/18/93", dec!(27.662247)),
        ("2/19/93", dec!(27.761855)),
    ]
    .into_iter()
    .map(|(d, price)| PricePoint { date: date(d), price })
    .collect()
}

/// Share counts traded on each of the fifteen days in [`spy_1993_prices`].
pub const SPY_1993_SHARES: [i64; 15] = [1500, 0, 0, 0, 0, 0, 0, 0, 0, 0, 200, 300, 0, 0, -300];

/// The fifteen 1993 days as a dated trade list with IB-style commissions.
pub fn wt_excerpt_trades() -> Vec<Trade> {
    let commission = |n: i64| match n.unsigned_abs() {
        0 => dec!(0),
        1..=200 => dec!(1.00),
        n => Decimal::from(n) * dec!(0.005),
    };
    spy_1993_prices()
        .into_iter()
        .zip(SPY_1993_SHARES)
        .map(|(p, n)| Trade::dated(p.date, p.price, n, commission(n)))
        .collect()
}

/// Yearly rates of return (percent) 1993..=2016 for the trading account and
/// for buy-and-hold.
pub const YEARLY_RATES_WT: [f64; 24] = [
    10.90, 0.00, 41.46, 25.76, 39.21, 28.85, 21.25, -9.37, -8.59, -20.65, 30.48, 6.47, 10.49,
    13.28, 9.22, -31.96, 22.54, 14.00, 2.55, 15.70, 26.64, 15.22, 3.21, 13.91,
];

pub const YEARLY_RATES_BH: [f64; 24] = [
    8.85, 0.74, 37.91, 22.34, 34.12, 27.46, 19.48, -10.50, -9.16, -19.92, 27.98, 5.60, 8.50,
    12.97, 5.03, -34.31, 24.73, 15.39, 1.50, 17.10, 27.77, 14.50, -0.13, 13.59,
];

/// Start-of-year account balances 1993..=2016 and the final balance, for the
/// trading account and for buy-and-hold.
pub const YEARLY_BALANCES_WT: [Decimal; 25] = [
    dec!(42001.26), dec!(46581.13), dec!(46579.57), dec!(65891.00), dec!(82865.04),
    dec!(115357.15), dec!(148631.93), dec!(180208.93), dec!(163332.35), dec!(149304.64),
    dec!(118471.10), dec!(154575.28), dec!(164572.01), dec!(181831.25), dec!(205976.87),
    dec!(224960.53), dec!(153055.99), dec!(187561.10), dec!(213811.25), dec!(219254.77),
    dec!(253677.39), dec!(321268.19), dec!(370166.93), dec!(382047.91), dec!(435178.33),
];

pub const YEARLY_BALANCES_BH: [Decimal; 25] = [
    dec!(42001.26), dec!(45720.41), dec!(46060.66), dec!(63523.68), dec!(77716.23),
    dec!(104235.36), dec!(132853.32), dec!(158738.00), dec!(142071.17), dec!(129051.09),
    dec!(103341.18), dec!(132254.52), dec!(139664.82), dec!(151541.03), dec!(171203.01),
    dec!(179808.80), dec!(118107.72), dec!(147321.56), dec!(169989.35), dec!(172540.72),
    dec!(202040.18), dec!(258136.88), dec!(295567.78), dec!(295191.04), dec!(335295.00),
];
