//! Brokerage account model: commissions, margin interest, buying power.
//!
//! Cash is carried at full precision. Interest is simple within the span
//! between two settlements and is booked (rounded to cents) only when a trade
//! settles, so it compounds at trade events and nowhere else. Each calendar
//! day in a span accrues at the rate of its own year, on an actual/365 basis.

use std::collections::BTreeMap;

use rust_decimal::Decimal;
use rust_decimal_macros::dec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::Trade;
use crate::marketdata::{days_between, TradingDate};
use crate::money::round_cents;

const DAYS_PER_YEAR: Decimal = dec!(365);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MarginError {
    #[error("interest span runs backwards: {from} to {to}")]
    ReversedSpan { from: TradingDate, to: TradingDate },
    #[error("trade dated {trade} precedes account date {account}")]
    StaleTrade {
        trade: TradingDate,
        account: TradingDate,
    },
    #[error("trade has no date; account settlement needs one")]
    UndatedTrade,
    #[error("holdings would go negative ({0})")]
    NegativeHoldings(i64),
    #[error("invalid rates for {year}: irmb {irmb}, irma {irma}")]
    InvalidRates {
        year: String,
        irmb: Decimal,
        irma: Decimal,
    },
    #[error("invalid commission schedule: {0}")]
    InvalidCommission(String),
    #[error("leverage must be at least 1, got {0}")]
    InvalidLeverage(Decimal),
}

/// Annual borrow (IRMB) and deposit (IRMA) rates as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatePair {
    pub irmb: Decimal,
    pub irma: Decimal,
}

impl RatePair {
    pub const fn new(irmb: Decimal, irma: Decimal) -> Self {
        Self { irmb, irma }
    }

    /// Deposit rate set to half the borrow rate.
    pub fn half_deposit(irmb: Decimal) -> Self {
        Self {
            irmb,
            irma: irmb / dec!(2),
        }
    }

    fn validate(&self, year: &str) -> Result<(), MarginError> {
        if self.irma < Decimal::ZERO || self.irma > self.irmb || self.irmb >= Decimal::ONE {
            return Err(MarginError::InvalidRates {
                year: year.to_string(),
                irmb: self.irmb,
                irma: self.irma,
            });
        }
        Ok(())
    }
}

/// Year → rates, with a fallback pair for years not listed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateSchedule {
    years: BTreeMap<i32, RatePair>,
    default: RatePair,
}

/// Margin rates 1993–2016 (1.05 × the Fed rate before 2016, IB's 2016 rate after).
const HISTORICAL_RATES: [(i32, Decimal, Decimal); 24] = [
    (1993, dec!(0.060), dec!(0.030)),
    (1994, dec!(0.050), dec!(0.025)),
    (1995, dec!(0.060), dec!(0.030)),
    (1996, dec!(0.065), dec!(0.033)),
    (1997, dec!(0.065), dec!(0.033)),
    (1998, dec!(0.065), dec!(0.033)),
    (1999, dec!(0.065), dec!(0.033)),
    (2000, dec!(0.065), dec!(0.033)),
    (2001, dec!(0.065), dec!(0.033)),
    (2002, dec!(0.070), dec!(0.035)),
    (2003, dec!(0.040), dec!(0.020)),
    (2004, dec!(0.035), dec!(0.018)),
    (2005, dec!(0.050), dec!(0.025)),
    (2006, dec!(0.060), dec!(0.030)),
    (2007, dec!(0.060), dec!(0.030)),
    (2008, dec!(0.050), dec!(0.025)),
    (2009, dec!(0.040), dec!(0.020)),
    (2010, dec!(0.020), dec!(0.010)),
    (2011, dec!(0.020), dec!(0.010)),
    (2012, dec!(0.020), dec!(0.010)),
    (2013, dec!(0.020), dec!(0.010)),
    (2014, dec!(0.020), dec!(0.010)),
    (2015, dec!(0.020), dec!(0.010)),
    (2016, dec!(0.013), dec!(0.006)),
];

impl Default for RateSchedule {
    fn default() -> Self {
        let years = HISTORICAL_RATES
            .iter()
            .map(|&(y, b, a)| (y, RatePair::new(b, a)))
            .collect();
        Self {
            years,
            default: RatePair::new(dec!(0.013), dec!(0.006)),
        }
    }
}

impl RateSchedule {
    pub fn new(years: BTreeMap<i32, RatePair>, default: RatePair) -> Result<Self, MarginError> {
        default.validate("default")?;
        for (y, pair) in &years {
            pair.validate(&y.to_string())?;
        }
        Ok(Self { years, default })
    }

    /// The same pair for every year.
    pub fn flat(pair: RatePair) -> Result<Self, MarginError> {
        Self::new(BTreeMap::new(), pair)
    }

    pub fn rate(&self, year: i32) -> RatePair {
        self.years.get(&year).copied().unwrap_or(self.default)
    }

    pub fn years(&self) -> &BTreeMap<i32, RatePair> {
        &self.years
    }

    pub fn default_pair(&self) -> RatePair {
        self.default
    }
}

/// Broker commission schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommissionSchedule {
    /// `floor_fee` up to `floor_shares`, `per_share` per share beyond.
    PerShareWithFloor {
        per_share: Decimal,
        floor_shares: u64,
        floor_fee: Decimal,
    },
    /// Same fee regardless of size.
    Flat { flat_fee: Decimal },
}

impl Default for CommissionSchedule {
    fn default() -> Self {
        Self::interactive_brokers()
    }
}

impl CommissionSchedule {
    pub fn interactive_brokers() -> Self {
        Self::PerShareWithFloor {
            per_share: dec!(0.005),
            floor_shares: 200,
            floor_fee: dec!(1.00),
        }
    }

    pub fn scottrade() -> Self {
        Self::Flat {
            flat_fee: dec!(7.00),
        }
    }

    pub fn validate(&self) -> Result<(), MarginError> {
        let ok = match *self {
            Self::PerShareWithFloor {
                per_share,
                floor_fee,
                ..
            } => per_share > Decimal::ZERO && floor_fee > Decimal::ZERO,
            Self::Flat { flat_fee } => flat_fee > Decimal::ZERO,
        };
        if ok {
            Ok(())
        } else {
            Err(MarginError::InvalidCommission(format!("{self:?}")))
        }
    }

    /// Fee for trading `shares` shares (either direction).
    pub fn commission(&self, shares: u64) -> Decimal {
        if shares == 0 {
            return Decimal::ZERO;
        }
        match *self {
            Self::PerShareWithFloor {
                per_share,
                floor_shares,
                floor_fee,
            } => {
                if shares <= floor_shares {
                    floor_fee
                } else {
                    Decimal::from(shares) * per_share
                }
            }
            Self::Flat { flat_fee } => flat_fee,
        }
    }

    /// Marginal per-share fee for large orders; commissions satisfy
    /// `commission(n) >= n * marginal_rate()` once `n` exceeds the floor.
    pub fn marginal_rate(&self) -> Decimal {
        match *self {
            Self::PerShareWithFloor { per_share, .. } => per_share,
            Self::Flat { .. } => Decimal::ZERO,
        }
    }

    /// Share count above which `marginal_rate` applies.
    pub fn floor_shares(&self) -> u64 {
        match *self {
            Self::PerShareWithFloor { floor_shares, .. } => floor_shares,
            Self::Flat { .. } => 0,
        }
    }
}

/// Interest on a constant `cash` balance over `[from, to)`, rounded to cents.
/// Negative balances are charged the borrow rate and return a negative amount;
/// positive balances earn the deposit rate.
pub fn accrue_interest(
    cash: Decimal,
    from: TradingDate,
    to: TradingDate,
    rates: &RateSchedule,
) -> Result<Decimal, MarginError> {
    if from > to {
        return Err(MarginError::ReversedSpan { from, to });
    }
    if cash.is_zero() || from == to {
        return Ok(Decimal::ZERO);
    }
    let borrowing = cash < Decimal::ZERO;
    // sum of rate over each day, grouped by calendar year
    let mut rate_days = Decimal::ZERO;
    let mut cursor = from;
    while cursor < to {
        let year_end = cursor.next_new_year().min(to);
        let days = days_between(cursor, year_end).expect("cursor before year end");
        let pair = rates.rate(cursor.year());
        let rate = if borrowing { pair.irmb } else { pair.irma };
        rate_days += Decimal::from(days) * rate;
        cursor = year_end;
    }
    let interest = round_cents(cash.abs() * rate_days / DAYS_PER_YEAR);
    Ok(if borrowing { -interest } else { interest })
}

/// Marked-to-market margin account.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountState {
    pub date: TradingDate,
    pub holdings: i64,
    pub cash: Decimal,
    pub leverage: Decimal,
    pub cumulative_interest_paid: Decimal,
    pub cumulative_interest_earned: Decimal,
}

impl AccountState {
    /// An account holding only `cash` on `date`.
    pub fn open(date: TradingDate, cash: Decimal, leverage: Decimal) -> Result<Self, MarginError> {
        if leverage < Decimal::ONE {
            return Err(MarginError::InvalidLeverage(leverage));
        }
        Ok(Self {
            date,
            holdings: 0,
            cash,
            leverage,
            cumulative_interest_paid: Decimal::ZERO,
            cumulative_interest_earned: Decimal::ZERO,
        })
    }

    pub fn market_value(&self, price: Decimal) -> Decimal {
        Decimal::from(self.holdings) * price
    }

    /// Account balance: market value plus cash.
    pub fn net_liquidation(&self, price: Decimal) -> Decimal {
        self.market_value(price) + self.cash
    }

    /// The state as it would stand on `date` if interest were booked then.
    pub fn marked(&self, date: TradingDate, rates: &RateSchedule) -> Result<Self, MarginError> {
        let interest = accrue_interest(self.cash, self.date, date, rates)?;
        let mut next = *self;
        next.book_interest(interest);
        next.date = date;
        Ok(next)
    }

    fn book_interest(&mut self, interest: Decimal) {
        self.cash += interest;
        if interest < Decimal::ZERO {
            self.cumulative_interest_paid -= interest;
        } else {
            self.cumulative_interest_earned += interest;
        }
    }
}

/// Apply a trade: book interest on the old cash balance up to the trade date,
/// then pay (buy) or receive (sell) the cost, and pay the commission.
pub fn settle_trade(
    state: &AccountState,
    trade: &Trade,
    rates: &RateSchedule,
) -> Result<AccountState, MarginError> {
    let date = trade.date.ok_or(MarginError::UndatedTrade)?;
    if date < state.date {
        return Err(MarginError::StaleTrade {
            trade: date,
            account: state.date,
        });
    }
    let holdings = state.holdings + trade.shares;
    if holdings < 0 {
        return Err(MarginError::NegativeHoldings(holdings));
    }
    let mut next = state.marked(date, rates)?;
    next.cash -= trade.cost() + trade.commission;
    next.holdings = holdings;
    Ok(next)
}

/// `(L − 1)·MV + L·cash`: what may still be spent on shares at leverage `L`.
pub fn buying_power(state: &AccountState, price: Decimal) -> Decimal {
    (state.leverage - Decimal::ONE) * state.market_value(price) + state.leverage * state.cash
}

pub fn detect_margin_call(state: &AccountState, price: Decimal) -> bool {
    buying_power(state, price) < Decimal::ZERO
}
