//! Dated price series: parsing, validation and serialization.
//!
//! Accepted line format is `date<sep>price` where the separator is a comma or
//! whitespace. Dates may be written `M/D/YY`, `MM/DD/YYYY` or ISO `YYYY-MM-DD`.
//! Two-digit years 93..=99 map to the 1900s, everything else to the 2000s.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::PRICE_SCALE;

/// Years 93..=99 are read as 1993..=1999, 00..=92 as 2000..=2092.
const TWO_DIGIT_YEAR_PIVOT: i32 = 93;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MarketDataError {
    #[error("empty series")]
    Empty,
    #[error("line {line}: malformed date `{text}`")]
    BadDate { line: usize, text: String },
    #[error("line {line}: malformed price `{text}`")]
    BadPrice { line: usize, text: String },
    #[error("line {line}: price must be positive, got {price}")]
    NonPositivePrice { line: usize, price: Decimal },
    #[error("line {line}: price {price} has more than {PRICE_SCALE} decimal places")]
    TooPrecise { line: usize, price: Decimal },
    #[error("line {line}: expected `date,price`, got `{text}`")]
    BadLine { line: usize, text: String },
    #[error("line {line}: date {date} does not follow previous date {previous}")]
    NotIncreasing {
        line: usize,
        date: TradingDate,
        previous: TradingDate,
    },
    #[error("date {later} precedes {earlier}")]
    ReversedSpan {
        earlier: TradingDate,
        later: TradingDate,
    },
}

/// A Gregorian calendar date on which a price was observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TradingDate(NaiveDate);

impl TradingDate {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(Self)
    }

    pub fn year(&self) -> i32 {
        self.0.year()
    }

    pub fn naive(&self) -> NaiveDate {
        self.0
    }

    /// The date `days` calendar days later.
    pub fn plus_days(&self, days: u64) -> Option<Self> {
        self.0.checked_add_days(chrono::Days::new(days)).map(Self)
    }

    /// First day of the following calendar year.
    pub fn next_new_year(&self) -> Self {
        Self(NaiveDate::from_ymd_opt(self.year() + 1, 1, 1).expect("valid new year"))
    }
}

impl From<NaiveDate> for TradingDate {
    fn from(d: NaiveDate) -> Self {
        Self(d)
    }
}

impl fmt::Display for TradingDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}/{:02}/{:04}", self.0.month(), self.0.day(), self.0.year())
    }
}

impl FromStr for TradingDate {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((y, rest)) = s.split_once('-') {
            let (m, d) = rest.split_once('-').ok_or(())?;
            if y.len() != 4 {
                return Err(());
            }
            return ymd(y, m, d);
        }
        let mut parts = s.split('/');
        let (m, d, y) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(m), Some(d), Some(y), None) => (m, d, y),
            _ => return Err(()),
        };
        match y.len() {
            2 => {
                let yy: i32 = y.parse().map_err(|_| ())?;
                let year = if yy >= TWO_DIGIT_YEAR_PIVOT { 1900 + yy } else { 2000 + yy };
                ymd(&year.to_string(), m, d)
            }
            4 => ymd(y, m, d),
            _ => Err(()),
        }
    }
}

fn ymd(y: &str, m: &str, d: &str) -> Result<TradingDate, ()> {
    let digits = |s: &str| !s.is_empty() && s.len() <= 4 && s.bytes().all(|b| b.is_ascii_digit());
    if !(digits(y) && digits(m) && digits(d)) || m.len() > 2 || d.len() > 2 {
        return Err(());
    }
    let year = y.parse().map_err(|_| ())?;
    let month = m.parse().map_err(|_| ())?;
    let day = d.parse().map_err(|_| ())?;
    TradingDate::from_ymd(year, month, day).ok_or(())
}

impl TryFrom<String> for TradingDate {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse().map_err(|_| format!("malformed date `{s}`"))
    }
}

impl From<TradingDate> for String {
    fn from(d: TradingDate) -> Self {
        d.to_string()
    }
}

/// Exact calendar-day difference `b - a`.
pub fn days_between(a: TradingDate, b: TradingDate) -> Result<i64, MarketDataError> {
    if a > b {
        return Err(MarketDataError::ReversedSpan {
            earlier: b,
            later: a,
        });
    }
    Ok((b.0 - a.0).num_days())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricePoint {
    pub date: TradingDate,
    pub price: Decimal,
}

/// Strictly date-ordered, non-empty sequence of positive prices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceSeries {
    points: Vec<PricePoint>,
}

impl PriceSeries {
    pub fn new(points: Vec<PricePoint>) -> Result<Self, MarketDataError> {
        if points.is_empty() {
            return Err(MarketDataError::Empty);
        }
        for (i, p) in points.iter().enumerate() {
            validate_price(i + 1, p.price)?;
            if i > 0 && points[i - 1].date >= p.date {
                return Err(MarketDataError::NotIncreasing {
                    line: i + 1,
                    date: p.date,
                    previous: points[i - 1].date,
                });
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> &PricePoint {
        &self.points[0]
    }

    pub fn last(&self) -> &PricePoint {
        &self.points[self.points.len() - 1]
    }

    /// Serialize as `Date,Price` CSV, prices echoed at their stored precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 24 + 11);
        out.push_str("Date,Price\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.date, p.price));
        }
        out
    }
}

fn validate_price(line: usize, price: Decimal) -> Result<(), MarketDataError> {
    if price <= Decimal::ZERO {
        return Err(MarketDataError::NonPositivePrice { line, price });
    }
    if price.scale() > PRICE_SCALE {
        return Err(MarketDataError::TooPrecise { line, price });
    }
    Ok(())
}

/// Split a record into its fields on commas and/or whitespace.
pub(crate) fn split_fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .collect()
}

/// True when the line looks like a column header rather than data.
pub(crate) fn is_header(line: &str) -> bool {
    line.trim_start()
        .get(..4)
        .is_some_and(|p| p.eq_ignore_ascii_case("date"))
}

/// Parse a price CSV into a validated series.
pub fn parse_price_csv(text: &str) -> Result<PriceSeries, MarketDataError> {
    let mut points: Vec<PricePoint> = Vec::new();
    let mut seen_data = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim().trim_start_matches('\u{feff}');
        if line.is_empty() {
            continue;
        }
        if !seen_data && is_header(line) {
            seen_data = true;
            continue;
        }
        seen_data = true;
        let fields = split_fields(line);
        let [date_text, price_text] = fields[..] else {
            return Err(MarketDataError::BadLine {
                line: line_no,
                text: line.to_string(),
            });
        };
        let date: TradingDate = date_text.parse().map_err(|_| MarketDataError::BadDate {
            line: line_no,
            text: date_text.to_string(),
        })?;
        let price = Decimal::from_str(price_text).map_err(|_| MarketDataError::BadPrice {
            line: line_no,
            text: price_text.to_string(),
        })?;
        validate_price(line_no, price)?;
        if let Some(prev) = points.last() {
            if prev.date >= date {
                return Err(MarketDataError::NotIncreasing {
                    line: line_no,
                    date,
                    previous: prev.date,
                });
            }
        }
        points.push(PricePoint { date, price });
    }
    if points.is_empty() {
        return Err(MarketDataError::Empty);
    }
    Ok(PriceSeries { points })
}
