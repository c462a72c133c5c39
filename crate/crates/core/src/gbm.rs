//! Geometric Brownian motion: fit to a price series, simulate, and the
//! closed-form moments.
//!
//! The model is `S_t = s0 · exp(drift·t + sigma·W_t)` with `drift = mu − sigma²/2`
//! and one series row per unit of time. Simulation draws standard normals
//! with the ziggurat sampler of `rand_distr` over a ChaCha8 stream seeded
//! from a 64-bit seed, so a seed fully determines a path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marketdata::{PricePoint, PriceSeries, TradingDate};
use crate::money::{price_from_f64, to_f64};

#[derive(Debug, Error, PartialEq)]
pub enum GbmError {
    #[error("need at least 3 prices to fit, got {0}")]
    TooShort(usize),
    #[error("non-positive price at row {0}")]
    NonPositive(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("simulated price {value} at step {step} is not representable")]
    Unrepresentable { step: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub s0: f64,
    /// Per-step mean of log returns, `mu − sigma²/2`.
    pub drift: f64,
    pub sigma: f64,
    pub mu: f64,
}

impl GbmParams {
    pub fn new(s0: f64, drift: f64, sigma: f64) -> Result<Self, GbmError> {
        if !(s0.is_finite() && s0 > 0.0) {
            return Err(GbmError::InvalidParams(format!("s0 must be positive, got {s0}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(GbmError::InvalidParams(format!("sigma must be >= 0, got {sigma}")));
        }
        if !drift.is_finite() {
            return Err(GbmError::InvalidParams(format!("drift must be finite, got {drift}")));
        }
        Ok(Self {
            s0,
            drift,
            sigma,
            mu: drift + sigma * sigma / 2.0,
        })
    }

    /// Parameters of the SPY fit: last close 223.529999, drift 0.000345,
    /// sigma 0.011772 per trading day.
    pub fn spy_fit() -> Self {
        Self::new(223.529999, 0.000345, 0.011772).expect("valid constants")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub horizon: usize,
    pub seed: u64,
    pub start_date: TradingDate,
}

/// Log returns `ln S_t − ln S_{t−1}` of a series.
pub fn log_returns(series: &PriceSeries) -> Result<Vec<f64>, GbmError> {
    let prices: Vec<f64> = series.points().iter().map(|p| to_f64(p.price)).collect();
    if let Some(i) = prices.iter().position(|&p| p.is_nan() || p <= 0.0) {
        return Err(GbmError::NonPositive(i));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Sample mean and sample standard deviation (divisor n − 1).
pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Fit drift and sigma from log returns; `s0` is the last price so that a
/// simulation continues from the end of the data.
pub fn fit(series: &PriceSeries) -> Result<GbmParams, GbmError> {
    if series.len() < 3 {
        return Err(GbmError::TooShort(series.len()));
    }
    let returns = log_returns(series)?;
    let (drift, sigma) = mean_and_std(&returns);
    GbmParams::new(to_f64(series.last().price), drift, sigma)
}

/// Brownian path `W_0 = 0, W_t = W_{t−1} + Z_t` for `t < horizon`.
pub fn brownian_path(horizon: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = 0.0;
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        if t > 0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            w += z;
        }
        out.push(w);
    }
    out
}

/// Simulated prices as `f64`, one per step.
pub fn simulate_values(params: &GbmParams, horizon: usize, seed: u64) -> Vec<f64> {
    brownian_path(horizon, seed)
        .into_iter()
        .enumerate()
        .map(|(t, w)| params.s0 * (params.drift * t as f64 + params.sigma * w).exp())
        .collect()
}

/// Simulate a dated series on consecutive calendar days from `start_date`.
/// Prices are rounded to six decimals.
pub fn simulate(params: &GbmParams, spec: &SimulationSpec) -> Result<PriceSeries, GbmError> {
    if spec.horizon == 0 {
        return Err(GbmError::EmptyHorizon);
    }
    let mut points = Vec::with_capacity(spec.horizon);
    for (t, value) in simulate_values(params, spec.horizon, spec.seed).into_iter().enumerate() {
        let price = price_from_f64(value)
            .filter(|p| !p.is_zero())
            .ok_or(GbmError::Unrepresentable { step: t, value })?;
        let date = spec
            .start_date
            .plus_days(t as u64)
            .ok_or_else(|| GbmError::InvalidParams("date overflow".into()))?;
        points.push(PricePoint { date, price });
    }
    PriceSeries::new(points).map_err(|e| GbmError::InvalidParams(e.to_string()))
}

/// Mean and variance of `S_t`:
/// `E = s0·e^{mu·t}`, `Var = s0²·e^{2·mu·t}·(e^{sigma²·t} − 1)`.
pub fn moments(params: &GbmParams, t: u64) -> (f64, f64) {
    let t = t as f64;
    let mean = params.s0 * (params.mu * t).exp();
    let variance = params.s0.powi(2) * (2.0 * params.mu * t).exp() * (params.sigma.powi(2) * t).exp_m1();
    (mean, variance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::PricePoint;

    fn start() -> TradingDate {
        TradingDate::from_ymd(2016, 12, 30).unwrap()
    }

    fn series_from(values: &[f64]) -> PriceSeries {
        let pts = values
            .iter()
            .enumerate()
            .map(|(i, &v)| PricePoint {
                date: start().plus_days(i as u64).unwrap(),
                price: price_from_f64(v).unwrap(),
            })
            .collect();
        PriceSeries::new(pts).unwrap()
    }

    #[test]
    fn mu_from_drift() {
        let p = GbmParams::spy_fit();
        assert!((p.mu - 0.000414).abs() < 5e-7);
        assert!(GbmParams::new(0.0, 0.0, 0.1).is_err());
        assert!(GbmParams::new(1.0, 0.0, -0.1).is_err());
    }

    #[test]
    fn fit_constant_and_exponential() {
        let p = fit(&series_from(&[50.0; 10])).unwrap();
        assert_eq!((p.drift, p.sigma, p.s0), (0.0, 0.0, 50.0));
        let c = 0.01;
        let values: Vec<f64> = (0..50).map(|t| (c * t as f64).exp()).collect();
        let p = fit(&series_from(&values)).unwrap();
        // six-decimal price rounding limits agreement
        assert!((p.drift - c).abs() < 1e-6, "{}", p.drift);
        assert!(p.sigma < 1e-5, "{}", p.sigma);
        assert_eq!(fit(&series_from(&[1.0, 2.0])), Err(GbmError::TooShort(2)));
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let (m, s) = mean_and_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_sigma_is_deterministic() {
        let p = GbmParams::new(100.0, 0.001, 0.0).unwrap();
        let v = simulate_values(&p, 100, 7);
        for (t, x) in v.iter().enumerate() {
            assert_eq!(*x, 100.0 * (0.001 * t as f64).exp());
        }
    }

    #[test]
    fn first_point_is_s0_and_seed_reproducible() {
        let p = GbmParams::spy_fit();
        for seed in 0..20 {
            let spec = SimulationSpec { horizon: 50, seed, start_date: start() };
            let a = simulate(&p, &spec).unwrap();
            assert_eq!(a.first().price.to_string(), "223.529999");
            assert_eq!(a.first().date, start());
            assert_eq!(a, simulate(&p, &spec).unwrap());
            assert!(a.points().iter().all(|pt| pt.price > rust_decimal::Decimal::ZERO));
        }
        let a = simulate_values(&p, 100, 1);
        let b = simulate_values(&p, 100, 2);
        assert_ne!(a, b);
        assert!(simulate(&p, &SimulationSpec { horizon: 0, seed: 1, start_date: start() }).is_err());
    }

    #[test]
    fn dates_are_consecutive_days() {
        let spec = SimulationSpec { horizon: 400, seed: 3, start_date: start() };
        let s = simulate(&GbmParams::spy_fit(), &spec).unwrap();
        assert_eq!(s.points()[2].date, TradingDate::from_ymd(2017, 1, 1).unwrap());
        assert_eq!(s.last().date, start().plus_days(399).unwrap());
    }

    #[test]
    fn moments_at_zero() {
        let p = GbmParams::spy_fit();
        assert_eq!(moments(&p, 0), (p.s0, 0.0));
    }

    #[test]
    fn moments_agree_with_monte_carlo_at_small_t() {
        // 10^5 paths, t = 10, 1% relative tolerance on both moments
        let p = GbmParams::new(100.0, 0.0005, 0.02).unwrap();
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|seed| simulate_values(&p, 11, seed)[10]).collect();
        let (mean, sd) = mean_and_std(&samples);
        let (m, v) = moments(&p, 10);
        assert!((mean - m).abs() / m < 0.01, "{mean} vs {m}");
        assert!((sd * sd - v).abs() / v < 0.01, "{} vs {v}", sd * sd);
    }

    #[test]
    fn fit_recovers_simulated_params() {
        let p = GbmParams::spy_fit();
        let spec = SimulationSpec { horizon: 20_000, seed: 11, start_date: start() };
        let s = simulate(&p, &spec).unwrap();
        let q = fit(&s).unwrap();
        let n = 19_999.0;
        let se_drift = p.sigma / f64::sqrt(n);
        let se_sigma = p.sigma / f64::sqrt(2.0 * n);
        assert!((q.drift - p.drift).abs() < 3.0 * se_drift, "{} vs {}", q.drift, p.drift);
        assert!((q.sigma - p.sigma).abs() < 3.0 * se_sigma, "{} vs {}", q.sigma, p.sigma);
    }

    #[test]
    fn log_price_increments_scale_with_t() {
        let p = GbmParams::spy_fit();
        let t = 250usize;
        let ends: Vec<f64> = (0..4000)
            .map(|seed| (simulate_values(&p, t + 1, seed)[t] / p.s0).ln())
            .collect();
        let (mean, sd) = mean_and_std(&ends);
        let want_mean = p.drift * t as f64;
        let want_var = p.sigma.powi(2) * t as f64;
        let se = (want_var / ends.len() as f64).sqrt();
        assert!((mean - want_mean).abs() < 3.0 * se, "{mean} vs {want_mean}");
        assert!((sd * sd - want_var).abs() / want_var < 0.1);
    }
}
