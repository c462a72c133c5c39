//! HTTP service over the trading engine: feasibility-checked trade sessions,
//! replay accounting and strategy backtests.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/sessions` | create a session, optional `{checker, commission}` body |
//! | GET | `/sessions/{id}` | config, rows and timestamps |
//! | POST | `/sessions/{id}/check` | verdict and projected row, no state change |
//! | POST | `/sessions/{id}/commit` | append a trade the checker accepts |
//! | GET | `/sessions/{id}/table?zeros=bool` | the ledger as CSV |
//! | POST | `/sessions/{id}/import` | replace history from a table CSV or triples |
//! | GET | `/sessions/{id}/profit?price=` or `?from=&to=&steps=` | profit at prices |
//! | POST | `/replay` | account for a `date,price,shares[,commission]` list |
//! | POST | `/backtests` | run the strategy on a price CSV or a simulated path |
//! | GET | `/backtests/{id}`, `/backtests/{id}/table`, `/backtests/{id}/trace` | results |

pub mod store;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uuid::Uuid;

use wavetrade_core::checker::{check, Violation};
use wavetrade_core::config::ConfigFile;
use wavetrade_core::gbm::{self, GbmParams, SimulationSpec};
use wavetrade_core::ledger::{parse_replay_csv, parse_table_csv, parse_trade_triples, LedgerError, LedgerRow, Trade};
use wavetrade_core::strategy::{buy_and_hold, replay, run_backtest, Backtest, TRACE_HEADER};
use wavetrade_core::{parse_price_csv, report, Config, Ledger, TradingDate};

pub use store::{BacktestRecord, Event, Session, SessionConfig, Store};

/// Longest simulated path a backtest request may ask for.
pub const MAX_HORIZON: usize = 1_000_000;
/// Most points a profit curve request may ask for.
pub const MAX_PROFIT_STEPS: usize = 10_000;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    reasons: Option<Vec<Violation>>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            reasons: None,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what}"))
    }

    fn conflict(message: impl Into<String>, reasons: Vec<Violation>) -> Self {
        Self {
            reasons: Some(reasons),
            ..Self::new(StatusCode::CONFLICT, message)
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(reasons) = self.reasons {
            body["reasons"] = json!(reasons);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
}

impl AppState {
    pub fn in_memory() -> Self {
        Self {
            store: Arc::new(Store::in_memory()),
        }
    }

    /// State persisted under `dir`, reloading sessions saved there.
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        Ok(Self {
            store: Arc::new(Store::open(dir)?),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/check", post(check_trade))
        .route("/sessions/{id}/commit", post(commit_trade))
        .route("/sessions/{id}/table", get(session_table))
        .route("/sessions/{id}/import", post(import_table))
        .route("/sessions/{id}/profit", get(session_profit))
        .route("/replay", post(replay_trades))
        .route("/backtests", post(create_backtest))
        .route("/backtests/{id}", get(get_backtest))
        .route("/backtests/{id}/table", get(backtest_table))
        .route("/backtests/{id}/trace", get(backtest_trace))
        .with_state(state)
}

/// Bind `addr` and serve until the process is stopped.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn parse_id(raw: &str, what: &str) -> ApiResult<Uuid> {
    Uuid::parse_str(raw).map_err(|_| ApiError::not_found(what))
}

fn session(state: &AppState, raw: &str) -> ApiResult<Arc<tokio::sync::Mutex<Session>>> {
    let id = parse_id(raw, "session")?;
    state.store.get(&id).ok_or_else(|| ApiError::not_found("session"))
}

fn csv(body: String) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response()
}

fn body_text(body: &[u8]) -> ApiResult<&str> {
    std::str::from_utf8(body).map_err(|_| ApiError::bad_request("body is not UTF-8"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TradeBody {
    #[serde(deserialize_with = "money")]
    price: Decimal,
    shares: i64,
    /// Defaults to the session's commission schedule.
    #[serde(default, deserialize_with = "optional_money")]
    commission: Option<Decimal>,
    #[serde(default)]
    date: Option<TradingDate>,
    #[serde(default)]
    idempotency_key: Option<String>,
}

/// A decimal given as a JSON string or number.
fn money<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Decimal, D::Error> {
    let text = match Value::deserialize(d)? {
        Value::String(s) => s,
        Value::Number(n) => n.to_string(),
        other => return Err(serde::de::Error::custom(format!("expected a decimal, got {other}"))),
    };
    text.trim()
        .parse::<Decimal>()
        .or_else(|_| Decimal::from_scientific(text.trim()))
        .map_err(|_| serde::de::Error::custom(format!("`{text}` is not a decimal")))
}

fn optional_money<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Decimal>, D::Error> {
    money(d).map(Some)
}

impl TradeBody {
    fn trade(&self, session: &Session) -> Trade {
        let commission = self
            .commission
            .unwrap_or_else(|| session.config.commission.commission(self.shares.unsigned_abs()));
        Trade {
            date: self.date,
            price: self.price,
            shares: self.shares,
            commission,
        }
    }
}

#[derive(Debug, Serialize)]
struct CheckResponse {
    ok: bool,
    answer: &'static str,
    reasons: Vec<Violation>,
    projected_row: Option<LedgerRow>,
}

#[derive(Debug, Default, Deserialize)]
struct TableQuery {
    zeros: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
struct ProfitQuery {
    price: Option<Decimal>,
    from: Option<Decimal>,
    to: Option<Decimal>,
    steps: Option<usize>,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let config: SessionConfig = if body.iter().all(u8::is_ascii_whitespace) {
        SessionConfig::default()
    } else {
        parse_json(&body)?
    };
    config.validate().map_err(ApiError::bad_request)?;
    let id = state
        .store
        .create(config)
        .map_err(|e| ApiError::internal(format!("cannot create session: {e}")))?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let session = session(&state, &id)?;
    let s = session.lock().await;
    Ok(Json(json!({
        "id": s.id,
        "config": s.config,
        "created": s.created,
        "updated": s.updated,
        "rows": s.ledger.rows(),
    })))
}

async fn check_trade(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<CheckResponse>> {
    let session = session(&state, &id)?;
    let req: TradeBody = parse_json(&body)?;
    let s = session.lock().await;
    let trade = req.trade(&s);
    let verdict = check(&s.history(), &trade, &s.config.checker);
    Ok(Json(CheckResponse {
        ok: verdict.ok,
        answer: verdict.answer(),
        projected_row: s.ledger.preview(trade).ok(),
        reasons: verdict.reasons,
    }))
}

async fn commit_trade(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<LedgerRow>> {
    let session = session(&state, &id)?;
    let req: TradeBody = parse_json(&body)?;
    let mut s = session.lock().await;
    if let Some(row) = req.idempotency_key.as_deref().and_then(|k| s.row_for_key(k)) {
        return Ok(Json(*row));
    }
    let trade = req.trade(&s);
    let verdict = check(&s.history(), &trade, &s.config.checker);
    if !verdict.ok {
        return Err(ApiError::conflict("commit refused: portfolio check says NO", verdict.reasons));
    }
    let row = s.ledger.preview(trade).map_err(|e| ApiError::bad_request(e.to_string()))?;
    s.record(Event::Commit {
        trade,
        key: req.idempotency_key,
        at: store::now_ms(),
    })
    .map_err(ApiError::internal)?;
    Ok(Json(row))
}

async fn session_table(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<TableQuery>,
) -> ApiResult<Response> {
    let session = session(&state, &id)?;
    let s = session.lock().await;
    Ok(csv(s.ledger.emit_table(q.zeros.unwrap_or(true))))
}

/// Trades from an exported table or from `price shares commission` triples.
pub fn parse_history(text: &str) -> Result<Vec<Trade>, LedgerError> {
    let looks_like_table = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .is_some_and(|l| l.starts_with("Dates") || l.split(',').count() > 3);
    if looks_like_table {
        parse_table_csv(text)
    } else {
        parse_trade_triples(text)
    }
}

async fn import_table(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let session = session(&state, &id)?;
    let trades = parse_history(body_text(&body)?).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ledger::from_trades(trades.iter().copied()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mut s = session.lock().await;
    if let Some((i, verdict)) = s.first_infeasible(&trades) {
        return Err(ApiError::conflict(
            format!("import refused: trade {} is not feasible", i + 1),
            verdict.reasons,
        ));
    }
    let n = trades.len();
    s.record(Event::Import {
        trades,
        at: store::now_ms(),
    })
    .map_err(ApiError::internal)?;
    Ok(Json(json!({ "rows": n })))
}

async fn session_profit(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ProfitQuery>,
) -> ApiResult<Json<Value>> {
    let session = session(&state, &id)?;
    let s = session.lock().await;
    let Some(last) = s.ledger.last() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "session has no trades"));
    };
    let point = |p: Decimal| json!({ "price": p, "profit": last.profit_at(p) });
    match (q.price, q.from, q.to) {
        (Some(p), None, None) => Ok(Json(point(p))),
        (None, Some(from), Some(to)) => {
            let steps = q.steps.unwrap_or(50);
            if steps == 0 || steps > MAX_PROFIT_STEPS {
                return Err(ApiError::bad_request(format!("steps must be in 1..={MAX_PROFIT_STEPS}")));
            }
            if from <= Decimal::ZERO || to < from {
                return Err(ApiError::bad_request("need 0 < from <= to"));
            }
            let step = (to - from) / Decimal::from(steps as u64);
            let points: Vec<Value> = (0..=steps as u64)
                .map(|i| point((from + step * Decimal::from(i)).round_dp(6)))
                .collect();
            Ok(Json(json!({ "points": points })))
        }
        _ => Err(ApiError::bad_request("give either price, or from and to")),
    }
}

#[derive(Debug, Default, Deserialize)]
struct ReplayQuery {
    leverage: Option<Decimal>,
}

async fn replay_trades(Query(q): Query<ReplayQuery>, body: Bytes) -> ApiResult<Json<Value>> {
    let mut config = Config::default();
    if let Some(l) = q.leverage {
        config.leverage = l;
    }
    config.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    let trades = parse_replay_csv(body_text(&body)?, |n| config.commission.commission(n))
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    if trades.is_empty() {
        return Ok(Json(json!({
            "table": Ledger::new().emit_table(true),
            "trace": format!("{TRACE_HEADER}\n"),
            "summary": null,
        })));
    }
    let run = replay(&trades, &config.rates, config.leverage).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(json!({
        "table": run.ledger.emit_table(true),
        "trace": run.trace_csv(),
        "summary": run.summary(),
    })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GbmRequest {
    horizon: usize,
    seed: u64,
    #[serde(default)]
    start_date: Option<TradingDate>,
    #[serde(default)]
    s0: Option<f64>,
    #[serde(default)]
    drift: Option<f64>,
    #[serde(default)]
    sigma: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BacktestRequest {
    #[serde(default)]
    prices_csv: Option<String>,
    #[serde(default)]
    gbm: Option<GbmRequest>,
    #[serde(default)]
    config: Option<ConfigFile>,
}

fn backtest_links(id: Uuid) -> Value {
    json!({
        "self": format!("/backtests/{id}"),
        "table": format!("/backtests/{id}/table"),
        "table_no_zeros": format!("/backtests/{id}/table?zeros=false"),
        "trace": format!("/backtests/{id}/trace"),
    })
}

fn backtest_body(id: Uuid, rec: &BacktestRecord) -> Value {
    json!({
        "id": id,
        "summary": rec.summary,
        "comparison": rec.comparison,
        "links": backtest_links(id),
    })
}

fn run_backtest_request(req: BacktestRequest) -> ApiResult<BacktestRecord> {
    let mut config = Config::default();
    if let Some(file) = req.config {
        config.apply(file).map_err(|e| ApiError::bad_request(e.to_string()))?;
    }
    let series = match (req.prices_csv, req.gbm) {
        (Some(text), None) => parse_price_csv(&text).map_err(|e| ApiError::bad_request(e.to_string()))?,
        (None, Some(g)) => {
            if g.horizon > MAX_HORIZON {
                return Err(ApiError::bad_request(format!("horizon must be at most {MAX_HORIZON}")));
            }
            let fit = GbmParams::spy_fit();
            let params = GbmParams::new(
                g.s0.unwrap_or(fit.s0),
                g.drift.unwrap_or(fit.drift),
                g.sigma.unwrap_or(fit.sigma),
            )
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
            let spec = SimulationSpec {
                horizon: g.horizon,
                seed: g.seed,
                start_date: g.start_date.unwrap_or_else(default_start),
            };
            gbm::simulate(&params, &spec).map_err(|e| ApiError::bad_request(e.to_string()))?
        }
        _ => return Err(ApiError::bad_request("give exactly one of prices_csv and gbm")),
    };
    let bad = |e: wavetrade_core::strategy::StrategyError| ApiError::bad_request(e.to_string());
    let run = run_backtest(&series, &config.strategy, &config.rates, &config.commission, config.leverage)
        .map_err(bad)?;
    let baseline = buy_and_hold(
        &series,
        config.strategy.initial_shares,
        &config.rates,
        &config.commission,
        config.leverage,
    )
    .map_err(bad)?;
    Ok(BacktestRecord {
        summary: run.summary(),
        comparison: comparison(&run, &baseline, config.risk_free),
        run,
    })
}

fn comparison(run: &Backtest, baseline: &Backtest, risk_free: f64) -> Option<wavetrade_core::ComparisonSummary> {
    report::compare(run, baseline, risk_free).ok().map(|(_, s)| s)
}

fn default_start() -> TradingDate {
    TradingDate::from_ymd(2017, 1, 3).expect("valid date")
}

async fn create_backtest(State(state): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: BacktestRequest = parse_json(&body)?;
    let rec = tokio::task::spawn_blocking(move || run_backtest_request(req))
        .await
        .map_err(|e| ApiError::internal(format!("backtest task failed: {e}")))??;
    let id = Uuid::new_v4();
    let body = backtest_body(id, &rec);
    state.store.backtests.insert(id, Arc::new(rec));
    Ok((StatusCode::CREATED, Json(body)))
}

fn backtest(state: &AppState, raw: &str) -> ApiResult<(Uuid, Arc<BacktestRecord>)> {
    let id = parse_id(raw, "backtest")?;
    let rec = state
        .store
        .backtests
        .get(&id)
        .map(|r| Arc::clone(r.value()))
        .ok_or_else(|| ApiError::not_found("backtest"))?;
    Ok((id, rec))
}

async fn get_backtest(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let (id, rec) = backtest(&state, &id)?;
    Ok(Json(backtest_body(id, &rec)))
}

async fn backtest_table(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<TableQuery>,
) -> ApiResult<Response> {
    let (_, rec) = backtest(&state, &id)?;
    Ok(csv(rec.run.ledger.emit_table(q.zeros.unwrap_or(true))))
}

async fn backtest_trace(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let (_, rec) = backtest(&state, &id)?;
    Ok(csv(rec.run.trace_csv()))
}
