//! Trading-simulation engine: trade ledger, portfolio feasibility checker,
//! margin account accounting, a wave-trading strategy, geometric Brownian
//! motion simulation, and return/Sharpe reporting.

pub mod checker;
pub mod config;
pub mod gbm;
pub mod ledger;
pub mod margin;
pub mod marketdata;
pub mod money;
pub mod report;
pub mod samples;
pub mod strategy;

pub use checker::{check, CheckerConfig, ShareLimit, Verdict};
pub use ledger::{Ledger, LedgerRow, Trade};
pub use margin::{AccountState, CommissionSchedule, RatePair, RateSchedule};
pub use marketdata::{parse_price_csv, PricePoint, PriceSeries, TradingDate};
pub use config::Config;
pub use gbm::{GbmParams, SimulationSpec};
pub use report::{ComparisonSummary, YearlyRow};
pub use strategy::{Backtest, StrategyParams};
