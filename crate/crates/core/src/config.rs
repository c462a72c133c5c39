//! TOML configuration: leverage, commissions, margin rates, strategy and
//! checker parameters.
//!
//! Every section is optional and overrides the built-in defaults:
//!
//! ```toml
//! leverage = "2"
//! risk_free = 4.0
//!
//! [commission]
//! kind = "per_share_with_floor"
//! per_share = "0.005"
//! floor_shares = 200
//! floor_fee = "1.00"
//!
//! [rates]
//! default = { irmb = "0.013", irma = "0.006" }
//! years = { "2017" = { irmb = "0.015", irma = "0.0075" } }
//!
//! [strategy]
//! dip_threshold = 0.03
//!
//! [checker]
//! cum_cost_band = "10000"
//! ```
//!
//! Listed rate years are added to (or replace entries of) the built-in
//! 1993–2016 table; set `inherit = false` under `[rates]` to start empty.

use std::collections::BTreeMap;
use std::path::Path;

use rust_decimal::Decimal;
use rust_decimal_macros::dec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::CheckerConfig;
use crate::margin::{CommissionSchedule, RatePair, RateSchedule};
use crate::strategy::StrategyParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inherit: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<RatePair>,
    #[serde(default)]
    pub years: BTreeMap<String, RatePair>,
}

/// A config file as written: every section optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leverage: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_free: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commission: Option<CommissionSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RatesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checker: Option<CheckerConfig>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub leverage: Decimal,
    /// Percent.
    pub risk_free: f64,
    pub commission: CommissionSchedule,
    pub rates: RateSchedule,
    pub strategy: StrategyParams,
    pub checker: CheckerConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            leverage: dec!(2),
            risk_free: 4.0,
            commission: CommissionSchedule::default(),
            rates: RateSchedule::default(),
            strategy: StrategyParams::default(),
            checker: CheckerConfig::default(),
        }
    }
}

impl Config {
    /// Overlay the sections present in `file`, then validate.
    pub fn apply(&mut self, file: ConfigFile) -> Result<(), ConfigError> {
        if let Some(l) = file.leverage {
            self.leverage = l;
        }
        if let Some(r) = file.risk_free {
            self.risk_free = r;
        }
        if let Some(c) = file.commission {
            self.commission = c;
        }
        if let Some(rates) = file.rates {
            self.rates = resolve_rates(&self.rates, rates)?;
        }
        if let Some(s) = file.strategy {
            self.strategy = s;
        }
        if let Some(c) = file.checker {
            self.checker = c;
        }
        self.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply(ConfigFile::parse(text)?)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        if self.leverage < Decimal::ONE {
            return Err(ConfigError::Invalid(format!(
                "leverage must be at least 1, got {}",
                self.leverage
            )));
        }
        if !self.risk_free.is_finite() {
            return Err(ConfigError::Invalid("risk_free must be finite".into()));
        }
        self.commission.validate().map_err(|e| invalid(&e))?;
        self.strategy.validate().map_err(|e| invalid(&e))?;
        self.checker.validate().map_err(|e| invalid(&e))?;
        Ok(())
    }

    /// The settings as a complete config file.
    pub fn to_file(&self) -> ConfigFile {
        let years = self
            .rates
            .years()
            .iter()
            .map(|(y, p)| (y.to_string(), *p))
            .collect();
        ConfigFile {
            leverage: Some(self.leverage),
            risk_free: Some(self.risk_free),
            commission: Some(self.commission),
            rates: Some(RatesSection {
                inherit: Some(false),
                default: Some(self.rates.default_pair()),
                years,
            }),
            strategy: Some(self.strategy),
            checker: Some(self.checker),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }
}

fn resolve_rates(base: &RateSchedule, section: RatesSection) -> Result<RateSchedule, ConfigError> {
    let mut years = if section.inherit.unwrap_or(true) {
        base.years().clone()
    } else {
        BTreeMap::new()
    };
    for (y, pair) in section.years {
        let year: i32 = y
            .trim()
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("rate year {y:?} is not a year")))?;
        years.insert(year, pair);
    }
    let default = section.default.unwrap_or(base.default_pair());
    RateSchedule::new(years, default).map_err(|e| ConfigError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn sections_override() {
        let c = Config::from_toml(
            r#"
            leverage = "5"
            [commission]
            kind = "flat"
            flat_fee = "7.00"
            [rates]
            years = { "2017" = { irmb = "0.015", irma = "0.0075" } }
            [strategy]
            initial_shares = 750
            buy_aggression = 2.0
            "#,
        )
        .unwrap();
        assert_eq!(c.leverage, dec!(5));
        assert_eq!(c.commission, CommissionSchedule::scottrade());
        assert_eq!(c.rates.rate(2017).irmb, dec!(0.015));
        assert_eq!(c.rates.rate(1993).irmb, dec!(0.060));
        assert_eq!(c.strategy.initial_shares, 750);
        assert_eq!(c.strategy.core_holding(), 250);
        assert_eq!(c.strategy.lot, 100);
    }

    #[test]
    fn numbers_are_accepted_for_money() {
        let c = Config::from_toml("leverage = 2.25\n[rates]\ninherit = false\ndefault = { irmb = 0.05, irma = 0.025 }").unwrap();
        assert_eq!(c.leverage, dec!(2.25));
        assert!(c.rates.years().is_empty());
        assert_eq!(c.rates.rate(1993).irma, dec!(0.025));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "leverage = \"0.5\"",
            "[strategy]\ndip_threshold = -0.1",
            "[strategy]\nbogus = 1",
            "[rates]\nyears = { \"abc\" = { irmb = \"0.1\", irma = \"0.05\" } }",
            "[rates]\ndefault = { irmb = \"0.01\", irma = \"0.05\" }",
            "[commission]\nkind = \"flat\"\nflat_fee = \"-1\"",
            "[checker]\nmin_first_shares = -3",
            "not toml at all [",
        ] {
            assert!(Config::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = Config::default();
        let text = c.to_toml();
        assert_eq!(Config::from_toml(&text).unwrap(), c);
    }
}
