//! Decimal helpers shared by the accounting modules.
//!
//! Money is carried as [`Decimal`] at full precision. Rounding to cents happens
//! only where a value is displayed or where an amount is booked as a discrete
//! charge (interest at settlement).

use rust_decimal::{Decimal, RoundingStrategy};

/// Number of fractional digits kept for share prices.
pub const PRICE_SCALE: u32 = 6;

/// Round half-up (away from zero on ties) to whole cents.
pub fn round_cents(value: Decimal) -> Decimal {
    value.round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero)
}

/// Cent-rounded rendering with exactly two fractional digits, e.g. `-1.50`.
pub fn fmt_cents(value: Decimal) -> String {
    let mut v = round_cents(value);
    if v.is_zero() {
        // avoid "-0.00"
        v = Decimal::ZERO;
    }
    v.rescale(2);
    v.to_string()
}

/// Convert an `f64` price to a decimal with [`PRICE_SCALE`] fractional digits.
pub fn price_from_f64(value: f64) -> Option<Decimal> {
    let mut d = Decimal::from_f64_retain(value)?;
    d = d.round_dp_with_strategy(PRICE_SCALE, RoundingStrategy::MidpointAwayFromZero);
    d.rescale(PRICE_SCALE);
    Some(d)
}

pub fn to_f64(value: Decimal) -> f64 {
    use rust_decimal::prelude::ToPrimitive;
    value.to_f64().unwrap_or(f64::NAN)
}
