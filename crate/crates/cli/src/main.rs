//! `wavetrade`: check trade histories, replay trade lists, backtest the wave
//! strategy, simulate GBM prices, compare against buy-and-hold, and serve
//! the HTTP API.
//!
//! Exit status is 0 on success (and for a YES verdict), 1 for a NO verdict,
//! and 2 for bad input.

use std::fs;
use std::io::{self, Read};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rust_decimal::Decimal;
use serde_json::json;

use wavetrade_api::{parse_history, AppState};
use wavetrade_core::checker::{check, check_sequence};
use wavetrade_core::config::ConfigFile;
use wavetrade_core::gbm::{self, GbmParams, SimulationSpec};
use wavetrade_core::ledger::{parse_replay_csv, parse_trade_triples};
use wavetrade_core::report::{self, yearly_table_csv};
use wavetrade_core::strategy::{buy_and_hold, replay, run_backtest, Backtest, TRACE_HEADER};
use wavetrade_core::{parse_price_csv, Config, Ledger, PriceSeries, TradingDate};

#[derive(Parser)]
#[command(name = "wavetrade", version, about = "Portfolio checker and wave-trading backtester")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a trade history, or one proposed trade against it.
    Check {
        /// History as `price shares commission` triples or an exported table (default: stdin).
        #[arg(long)]
        trades: Option<PathBuf>,
        /// Proposed trade as "price shares commission".
        #[arg(long)]
        trade: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the wave strategy over a price series and write its tables.
    Backtest {
        #[command(flatten)]
        input: PriceInput,
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory for resultTable.csv, resultTableNoZeros.csv and summary.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Account for a `date,price,shares[,commission]` trade list.
    Replay {
        /// Trade list (default: stdin).
        #[arg(long)]
        trades: Option<PathBuf>,
        /// Write the daily account trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Also write resultTable.csv, resultTableNoZeros.csv and summary.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Simulate a GBM price series, fitted to --prices or the SPY fit.
    Simulate {
        /// Fit drift and sigma to this `Date,Price` series.
        #[arg(long)]
        prices: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// First simulated date.
        #[arg(long, default_value = "2017-01-03", value_parser = parse_date)]
        start_date: TradingDate,
    },
    /// Yearly returns and Sharpe ratios of the strategy against buy-and-hold.
    Compare {
        #[command(flatten)]
        input: PriceInput,
        #[command(flatten)]
        config: ConfigArgs,
        /// Also write yearly.csv and comparison.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Persist sessions under this directory; in memory when absent.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Print the built-in configuration as TOML.
    Defaults,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config TOML with a [strategy] and/or [checker] section.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Config TOML with a [rates] section.
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Config TOML with a [commission] section.
    #[arg(long)]
    commissions: Option<PathBuf>,
    #[arg(long)]
    leverage: Option<Decimal>,
    /// Annual risk-free rate in percent, for Sharpe ratios.
    #[arg(long)]
    risk_free: Option<f64>,
}

#[derive(Args)]
struct PriceInput {
    /// `Date,Price` series (default: stdin unless --horizon is given).
    #[arg(long, conflicts_with = "horizon")]
    prices: Option<PathBuf>,
    /// Simulate this many days from the SPY fit instead of reading prices.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_date(s: &str) -> Result<TradingDate, String> {
    s.parse().map_err(|_| format!("`{s}` is not a date"))
}

struct Failure {
    code: u8,
    message: String,
}

fn input_error(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

type CliResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Check { trades, trade, config } => cmd_check(trades.as_deref(), trade.as_deref(), &config),
        Command::Backtest { input, config, out_dir } => cmd_backtest(&input, &config, &out_dir),
        Command::Replay {
            trades,
            trace,
            out_dir,
            config,
        } => cmd_replay(trades.as_deref(), trace.as_deref(), out_dir.as_deref(), &config),
        Command::Simulate {
            prices,
            horizon,
            seed,
            start_date,
        } => cmd_simulate(prices.as_deref(), horizon, seed, start_date),
        Command::Compare { input, config, out_dir } => cmd_compare(&input, &config, out_dir.as_deref()),
        Command::Serve { addr, data_dir } => cmd_serve(addr, data_dir.as_deref()),
        Command::Defaults => {
            print!("{}", Config::default().to_toml());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_input(path: Option<&Path>) -> Result<String, Failure> {
    match path {
        Some(p) => fs::read_to_string(p).map_err(|e| input_error(format!("cannot read {}: {e}", p.display()))),
        None => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| input_error(format!("cannot read stdin: {e}")))?;
            Ok(s)
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
}

impl ConfigArgs {
    fn resolve(&self) -> Result<Config, Failure> {
        let mut config = Config::default();
        for path in [&self.params, &self.rates, &self.commissions].into_iter().flatten() {
            let file = ConfigFile::load(path).map_err(input_error)?;
            config.apply(file).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        }
        if let Some(l) = self.leverage {
            config.leverage = l;
        }
        if let Some(r) = self.risk_free {
            config.risk_free = r;
        }
        config.validate().map_err(input_error)?;
        Ok(config)
    }
}

impl PriceInput {
    fn series(&self) -> Result<PriceSeries, Failure> {
        match self.horizon {
            Some(horizon) => {
                let spec = SimulationSpec {
                    horizon,
                    seed: self.seed,
                    start_date: TradingDate::from_ymd(2017, 1, 3).expect("valid date"),
                };
                gbm::simulate(&GbmParams::spy_fit(), &spec).map_err(input_error)
            }
            None => parse_price_csv(&read_input(self.prices.as_deref())?).map_err(input_error),
        }
    }
}

fn cmd_check(trades: Option<&Path>, trade: Option<&str>, config: &ConfigArgs) -> CliResult {
    let config = config.resolve()?;
    let history = parse_history(&read_input(trades)?).map_err(input_error)?;
    let verdict = match trade {
        Some(text) => {
            let proposed = match parse_trade_triples(text).map_err(input_error)?.as_slice() {
                [t] => *t,
                _ => return Err(input_error("--trade takes exactly one `price shares commission` triple")),
            };
            check(&history, &proposed, &config.checker)
        }
        None => {
            if history.is_empty() {
                return Err(input_error("no trades given"));
            }
            let verdicts = check_sequence(&history, &config.checker);
            match verdicts.iter().position(|v| !v.ok) {
                Some(i) => {
                    println!("trade {}:", i + 1);
                    verdicts[i].clone()
                }
                None => verdicts[verdicts.len() - 1].clone(),
            }
        }
    };
    println!("{verdict}");
    Ok(if verdict.ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn write_results(dir: &Path, run: &Backtest, extra: serde_json::Value) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| input_error(format!("cannot create {}: {e}", dir.display())))?;
    write_file(&dir.join("resultTable.csv"), &run.ledger.emit_table(true))?;
    write_file(&dir.join("resultTableNoZeros.csv"), &run.ledger.emit_table(false))?;
    let mut summary = json!({ "summary": run.summary() });
    if let serde_json::Value::Object(map) = extra {
        summary.as_object_mut().expect("object").extend(map);
    }
    write_file(
        &dir.join("summary.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
}

fn print_summary(run: &Backtest) {
    let s = run.summary();
    println!("days: {}", s.days);
    println!("trades: {}", s.trades);
    println!("final profit: {}", s.final_profit);
    println!("final balance: {}", s.final_balance);
    println!("total return: {}", s.total_return);
    println!("interest paid: {}", s.interest_paid);
    println!("interest earned: {}", s.interest_earned);
    println!("margin calls: {}", s.margin_calls.len());
}

fn cmd_backtest(input: &PriceInput, config: &ConfigArgs, out_dir: &Path) -> CliResult {
    let config = config.resolve()?;
    let series = input.series()?;
    let run = run_backtest(&series, &config.strategy, &config.rates, &config.commission, config.leverage)
        .map_err(input_error)?;
    write_results(out_dir, &run, json!({}))?;
    print_summary(&run);
    Ok(ExitCode::SUCCESS)
}

fn cmd_replay(trades: Option<&Path>, trace: Option<&Path>, out_dir: Option<&Path>, config: &ConfigArgs) -> CliResult {
    let config = config.resolve()?;
    let trades = parse_replay_csv(&read_input(trades)?, |n| config.commission.commission(n)).map_err(input_error)?;
    if trades.is_empty() {
        print!("{}", Ledger::new().emit_table(true));
        if let Some(path) = trace {
            write_file(path, &format!("{TRACE_HEADER}\n"))?;
        }
        return Ok(ExitCode::SUCCESS);
    }
    let run = replay(&trades, &config.rates, config.leverage).map_err(input_error)?;
    print!("{}", run.ledger.emit_table(true));
    if let Some(path) = trace {
        write_file(path, &run.trace_csv())?;
    }
    if let Some(dir) = out_dir {
        write_results(dir, &run, json!({}))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(prices: Option<&Path>, horizon: usize, seed: u64, start_date: TradingDate) -> CliResult {
    let params = match prices {
        Some(p) => {
            let series = parse_price_csv(&read_input(Some(p))?).map_err(input_error)?;
            gbm::fit(&series).map_err(input_error)?
        }
        None => GbmParams::spy_fit(),
    };
    let spec = SimulationSpec {
        horizon,
        seed,
        start_date,
    };
    let series = gbm::simulate(&params, &spec).map_err(input_error)?;
    print!("{}", series.to_csv());
    let t = horizon.saturating_sub(1) as u64;
    let (mean, variance) = gbm::moments(&params, t);
    eprintln!(
        "s0 {} drift {} sigma {} mu {}; at t = {t}: mean {mean:.2}, variance {variance:.2}",
        params.s0, params.drift, params.sigma, params.mu
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(input: &PriceInput, config: &ConfigArgs, out_dir: Option<&Path>) -> CliResult {
    let config = config.resolve()?;
    let series = input.series()?;
    let run = run_backtest(&series, &config.strategy, &config.rates, &config.commission, config.leverage)
        .map_err(input_error)?;
    let baseline = buy_and_hold(
        &series,
        config.strategy.initial_shares,
        &config.rates,
        &config.commission,
        config.leverage,
    )
    .map_err(input_error)?;
    let (rows, summary) = report::compare(&run, &baseline, config.risk_free).map_err(input_error)?;
    let table = yearly_table_csv(&rows);
    print!("{table}");
    println!();
    println!("{summary}");
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| input_error(format!("cannot create {}: {e}", dir.display())))?;
        write_file(&dir.join("yearly.csv"), &table)?;
        write_file(
            &dir.join("comparison.json"),
            &serde_json::to_string_pretty(&json!({ "rows": rows, "summary": summary })).expect("serializes"),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(addr: SocketAddr, data_dir: Option<&Path>) -> CliResult {
    let state = match data_dir {
        Some(dir) => AppState::open(dir).map_err(|e| input_error(format!("cannot open {}: {e}", dir.display())))?,
        None => AppState::in_memory(),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| input_error(format!("cannot start runtime: {e}")))?;
    eprintln!("listening on http://{addr}");
    runtime
        .block_on(wavetrade_api::serve(addr, state))
        .map_err(|e| Failure {
            code: 1,
            message: format!("server stopped: {e}"),
        })?;
    Ok(ExitCode::SUCCESS)
}
