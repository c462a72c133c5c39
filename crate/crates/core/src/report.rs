//! Yearly returns, Sharpe ratios, and the wave-trading versus buy-and-hold
//! comparison.

use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marketdata::TradingDate;
use crate::money::{fmt_cents, to_f64};
use crate::strategy::Backtest;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("no balances to report")]
    Empty,
    #[error("the two balance series cover different dates")]
    Misaligned,
    #[error("need at least two rates, got {0}")]
    TooFewRates(usize),
    #[error("rates have zero standard deviation")]
    ZeroDispersion,
}

pub const YEARLY_HEADER: &str = "Year,WTStartBal,WTReturn,WTRateRet,BHStartBal,BHReturn,BHRateRet";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearlyRow {
    pub year: i32,
    pub wt_start_balance: Decimal,
    pub wt_return: Decimal,
    /// Percent.
    pub wt_rate: f64,
    pub bh_start_balance: Decimal,
    pub bh_return: Decimal,
    pub bh_rate: f64,
}

fn rate_percent(ret: Decimal, start: Decimal) -> f64 {
    if start > Decimal::ZERO {
        to_f64(Decimal::ONE_HUNDRED * ret / start)
    } else {
        0.0
    }
}

impl YearlyRow {
    pub fn new(year: i32, wt: (Decimal, Decimal), bh: (Decimal, Decimal)) -> Self {
        let wt_return = wt.1 - wt.0;
        let bh_return = bh.1 - bh.0;
        Self {
            year,
            wt_start_balance: wt.0,
            wt_return,
            wt_rate: rate_percent(wt_return, wt.0),
            bh_start_balance: bh.0,
            bh_return,
            bh_rate: rate_percent(bh_return, bh.0),
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.2},{},{},{:.2}",
            self.year,
            fmt_cents(self.wt_start_balance),
            fmt_cents(self.wt_return),
            self.wt_rate,
            fmt_cents(self.bh_start_balance),
            fmt_cents(self.bh_return),
            self.bh_rate,
        )
    }
}

/// Balance at the first close of each year, plus the final close.
fn year_marks(balances: &[(TradingDate, Decimal)]) -> Vec<(i32, Decimal)> {
    let mut marks: Vec<(i32, Decimal)> = Vec::new();
    for &(date, balance) in balances {
        if marks.last().is_none_or(|&(y, _)| y != date.year()) {
            marks.push((date.year(), balance));
        }
    }
    marks
}

/// One row per calendar year. A year starts at its first close and ends
/// where the next year starts; the last year ends at the last close.
pub fn yearly_rows(
    wt: &[(TradingDate, Decimal)],
    bh: &[(TradingDate, Decimal)],
) -> Result<Vec<YearlyRow>, ReportError> {
    if wt.is_empty() || bh.is_empty() {
        return Err(ReportError::Empty);
    }
    if wt.len() != bh.len() || wt.iter().zip(bh).any(|(a, b)| a.0 != b.0) {
        return Err(ReportError::Misaligned);
    }
    let wt_marks = year_marks(wt);
    let bh_marks = year_marks(bh);
    let wt_final = wt.last().expect("non-empty").1;
    let bh_final = bh.last().expect("non-empty").1;
    Ok((0..wt_marks.len())
        .map(|i| {
            let (year, wt_start) = wt_marks[i];
            let bh_start = bh_marks[i].1;
            let wt_end = wt_marks.get(i + 1).map_or(wt_final, |m| m.1);
            let bh_end = bh_marks.get(i + 1).map_or(bh_final, |m| m.1);
            YearlyRow::new(year, (wt_start, wt_end), (bh_start, bh_end))
        })
        .collect())
}

pub fn yearly_table_csv(rows: &[YearlyRow]) -> String {
    let mut out = String::from(YEARLY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Sample standard deviation (divisor n − 1).
pub fn rate_stddev(rates: &[f64]) -> Result<f64, ReportError> {
    if rates.len() < 2 {
        return Err(ReportError::TooFewRates(rates.len()));
    }
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let ss: f64 = rates.iter().map(|r| (r - mean).powi(2)).sum();
    Ok((ss / (n - 1.0)).sqrt())
}

/// `(mean − risk_free) / stddev`, all in percent.
pub fn sharpe(rates: &[f64], risk_free: f64) -> Result<f64, ReportError> {
    let sd = rate_stddev(rates)?;
    if sd == 0.0 {
        return Err(ReportError::ZeroDispersion);
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    Ok((mean - risk_free) / sd)
}

/// Round to two decimals for display.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub wt_total_return: Decimal,
    pub bh_total_return: Decimal,
    /// Percent; absent when the buy-and-hold return is not positive.
    pub excess_percent: Option<f64>,
    /// Absent when there are fewer than two years or no dispersion.
    pub wt_sharpe: Option<f64>,
    pub bh_sharpe: Option<f64>,
    pub rate_stddev_wt: Option<f64>,
    pub rate_stddev_bh: Option<f64>,
}

impl ComparisonSummary {
    /// Summarise from the yearly table and the two total returns.
    pub fn from_rows(
        rows: &[YearlyRow],
        wt_total_return: Decimal,
        bh_total_return: Decimal,
        risk_free: f64,
    ) -> Self {
        let wt: Vec<f64> = rows.iter().map(|r| r.wt_rate).collect();
        let bh: Vec<f64> = rows.iter().map(|r| r.bh_rate).collect();
        let excess_percent = (bh_total_return > Decimal::ZERO).then(|| {
            to_f64(Decimal::ONE_HUNDRED * (wt_total_return - bh_total_return) / bh_total_return)
        });
        Self {
            wt_total_return,
            bh_total_return,
            excess_percent,
            wt_sharpe: sharpe(&wt, risk_free).ok(),
            bh_sharpe: sharpe(&bh, risk_free).ok(),
            rate_stddev_wt: rate_stddev(&wt).ok(),
            rate_stddev_bh: rate_stddev(&bh).ok(),
        }
    }
}

fn opt2(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

impl fmt::Display for ComparisonSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "WT total return: {}", fmt_cents(self.wt_total_return))?;
        writeln!(f, "BH total return: {}", fmt_cents(self.bh_total_return))?;
        writeln!(f, "Excess: {}%", opt2(self.excess_percent))?;
        writeln!(
            f,
            "Sharpe: WT {}, BH {}",
            opt2(self.wt_sharpe),
            opt2(self.bh_sharpe)
        )?;
        write!(
            f,
            "Rate std dev: WT {}, BH {}",
            opt2(self.rate_stddev_wt),
            opt2(self.rate_stddev_bh)
        )
    }
}

/// Yearly table and summary for a wave-trading run against its baseline.
pub fn compare(
    wt: &Backtest,
    bh: &Backtest,
    risk_free: f64,
) -> Result<(Vec<YearlyRow>, ComparisonSummary), ReportError> {
    let rows = yearly_rows(&wt.balances(), &bh.balances())?;
    let summary = ComparisonSummary::from_rows(&rows, wt.total_return(), bh.total_return(), risk_free);
    Ok((rows, summary))
}
