//! Command-line front end. `run` is the whole program minus process setup,
//! so it can be driven from tests.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::analytic::{european_price_cev, lognormal_pdf};
use crate::error::Error;
use crate::lattice::{build_lattice, envelope_points};
use crate::mc::{mc_european_price, McConfig};
use crate::params::{CevParams, OptionKind};
use crate::pricing::{price_option, terminal_distribution, PayoffSpec, Style, WeightsMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// `table1` tolerances: tree columns and analytic column.
pub const TABLE1_TREE_TOL: f64 = 1e-3;
pub const TABLE1_ANALYTIC_TOL: f64 = 5e-4;

pub const DEFAULT_FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/table1.csv");

#[derive(Debug, Parser)]
#[command(
    name = "cevtree",
    version,
    about = "Recombining binomial lattice pricer for the CEV model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price one option on the lattice.
    Price(PriceArgs),
    /// Reproduce the European put convergence table and compare with the fixture.
    Table1(Table1Args),
    /// Tree price against the closed form for a list of step counts.
    Converge(ConvergeArgs),
    /// Lattice extremes against the closed-form envelope.
    Envelope(EnvelopeArgs),
    /// Tree-implied terminal distribution.
    Density(DensityArgs),
    /// Monte Carlo European price.
    Mc(McArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Output {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Market {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    s0: f64,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    r: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    q: f64,
    /// Maturity in years.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    t: f64,
}

impl Market {
    fn params(&self) -> Result<CevParams, Error> {
        CevParams::new(self.s0, self.sigma, self.beta, self.r, self.q)
    }
}

#[derive(Debug, Args)]
struct Contract {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    strike: f64,
    #[arg(long, default_value_t = OptionKind::Put)]
    kind: OptionKind,
}

#[derive(Debug, Args)]
struct PriceArgs {
    #[command(flatten)]
    market: Market,
    #[command(flatten)]
    contract: Contract,
    #[arg(long, default_value_t = 365)]
    steps: usize,
    #[arg(long, default_value_t = Style::European)]
    style: Style,
    #[arg(long, default_value_t = WeightsMode::ExactH)]
    mode: WeightsMode,
    /// Also write the lattice as JSON to this path.
    #[arg(long)]
    dump_lattice: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct Table1Args {
    #[arg(long, default_value = DEFAULT_FIXTURE)]
    fixture: PathBuf,
    /// Weights used for the tree columns.
    #[arg(long, default_value_t = WeightsMode::ApproxP)]
    mode: WeightsMode,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    #[command(flatten)]
    market: Market,
    #[command(flatten)]
    contract: Contract,
    /// Comma-separated ascending step counts.
    #[arg(long, value_delimiter = ',', default_value = "365,730,1460")]
    steps: Vec<usize>,
    #[arg(long, default_value_t = WeightsMode::ExactH)]
    mode: WeightsMode,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct EnvelopeArgs {
    #[command(flatten)]
    market: Market,
    #[arg(long, default_value_t = 365)]
    steps: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct DensityArgs {
    #[command(flatten)]
    market: Market,
    #[arg(long, default_value_t = 365)]
    steps: usize,
    #[arg(long, default_value_t = WeightsMode::ExactH)]
    mode: WeightsMode,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct McArgs {
    #[command(flatten)]
    market: Market,
    #[command(flatten)]
    contract: Contract,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    /// Euler steps per path.
    #[arg(long, default_value_t = 365)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    antithetic: bool,
    #[command(flatten)]
    output: Output,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_validation() {
            EXIT_VALIDATION
        } else {
            EXIT_NUMERICAL
        };
        let message = match &e {
            Error::InvalidParameter { name, reason } => {
                let flag = match *name {
                    "maturity" => "t",
                    other => other,
                };
                format!("invalid --{flag}: {reason}")
            }
            other => other.to_string(),
        };
        Failure { code, message }
    }
}

fn validation(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    validation(format!("{}: {e}", path.display()))
}

/// Rows of named cells, written as CSV or as a JSON array of objects.
struct Table {
    headers: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(headers: Vec<&'static str>) -> Self {
        Table {
            headers,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(Vec::new());
                w.write_record(&self.headers).expect("in-memory write");
                for row in &self.rows {
                    w.write_record(row.iter().map(cell_text))
                        .expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
            }
            Format::Json => {
                let objects: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let map: Map<String, Value> = self
                            .headers
                            .iter()
                            .map(|h| h.to_string())
                            .zip(row.iter().cloned())
                            .collect();
                        Value::Object(map)
                    })
                    .collect();
                let mut s = serde_json::to_string_pretty(&objects).expect("json");
                s.push('\n');
                s
            }
        }
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn emit(
    output: &Output,
    default: Format,
    text: impl FnOnce(Format) -> String,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let body = text(output.format.unwrap_or(default));
    match &output.out {
        Some(path) => {
            let mut f = File::create(path).map_err(|e| io_failure(path, e))?;
            f.write_all(body.as_bytes())
                .map_err(|e| io_failure(path, e))
        }
        None => stdout
            .write_all(body.as_bytes())
            .map_err(|e| validation(format!("stdout: {e}"))),
    }
}

fn cmd_price(args: &PriceArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    if args.steps < 1 {
        return Err(validation("invalid --steps: steps must be ≥ 1"));
    }
    let params = args.market.params()?;
    let payoff = PayoffSpec::new(args.contract.kind, args.contract.strike)?;
    let lattice = build_lattice(&params, args.market.t, args.steps)?;
    if let Some(path) = &args.dump_lattice {
        let f = File::create(path).map_err(|e| io_failure(path, e))?;
        serde_json::to_writer(io::BufWriter::new(f), &lattice.dump())
            .map_err(|e| validation(format!("{}: {e}", path.display())))?;
    }
    let result = price_option(&lattice, &payoff, args.style, args.mode)?;
    emit(
        &args.output,
        Format::Json,
        |format| match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&result).expect("json");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut t = Table::new(vec!["price", "style", "mode", "n_steps"]);
                t.push(vec![
                    num(result.price),
                    Value::from(result.style.to_string()),
                    Value::from(result.weights_mode.to_string()),
                    Value::from(result.n_steps),
                ]);
                t.render(Format::Csv)
            }
        },
        stdout,
    )?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct Table1Row {
    pub beta: f64,
    pub s: f64,
    pub e: f64,
    pub t: f64,
    pub analytic: f64,
    pub tree365: f64,
    pub tree730: f64,
}

pub fn read_table1_fixture(path: &Path) -> io::Result<Vec<Table1Row>> {
    let mut reader = csv::Reader::from_path(path).map_err(io::Error::other)?;
    reader
        .deserialize()
        .collect::<Result<Vec<Table1Row>, _>>()
        .map_err(io::Error::other)
}

/// Market settings shared by every cell of the `table1` fixture.
pub const TABLE1_SIGMA: f64 = 0.2;
pub const TABLE1_RATE: f64 = 0.05;

/// Closed-form and tree European put prices for one `table1` fixture row.
pub fn table1_cell(row: &Table1Row, mode: WeightsMode) -> Result<[f64; 3], Error> {
    let params = CevParams::no_dividend(row.s, TABLE1_SIGMA, row.beta, TABLE1_RATE)?;
    let put = PayoffSpec::put(row.e)?;
    let analytic = european_price_cev(&params, row.e, row.t, OptionKind::Put)?;
    let mut tree = [0.0; 2];
    for (slot, n) in tree.iter_mut().zip([365, 730]) {
        let lattice = build_lattice(&params, row.t, n)?;
        *slot = price_option(&lattice, &put, Style::European, mode)?.price;
    }
    Ok([analytic, tree[0], tree[1]])
}

fn cmd_table1(args: &Table1Args, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let fixture = read_table1_fixture(&args.fixture).map_err(|e| io_failure(&args.fixture, e))?;
    if fixture.is_empty() {
        return Err(validation(format!("{}: no rows", args.fixture.display())));
    }
    let mut table = Table::new(vec![
        "beta",
        "s",
        "e",
        "t",
        "analytic",
        "tree365",
        "tree730",
        "fixture_analytic",
        "fixture_tree365",
        "fixture_tree730",
        "delta",
    ]);
    // (excess over tolerance, description) of the worst cell
    let mut worst: Option<(f64, String)> = None;
    for row in &fixture {
        let computed = table1_cell(row, args.mode)?;
        let expected = [row.analytic, row.tree365, row.tree730];
        let tols = [TABLE1_ANALYTIC_TOL, TABLE1_TREE_TOL, TABLE1_TREE_TOL];
        let names = ["analytic", "tree365", "tree730"];
        let mut delta: f64 = 0.0;
        for k in 0..3 {
            let d = (computed[k] - expected[k]).abs();
            delta = delta.max(d);
            let excess = d - tols[k];
            if excess > 0.0 && worst.as_ref().is_none_or(|w| excess > w.0) {
                worst = Some((
                    excess,
                    format!(
                        "{} at beta={}, S={}, T={}: computed {:.6}, fixture {}, |delta| {:.6} > {}",
                        names[k], row.beta, row.s, row.t, computed[k], expected[k], d, tols[k]
                    ),
                ));
            }
        }
        let mut cells: Vec<Value> = [row.beta, row.s, row.e, row.t]
            .into_iter()
            .map(num)
            .collect();
        cells.extend(computed.into_iter().map(num));
        cells.extend(expected.into_iter().map(num));
        cells.push(num(delta));
        table.push(cells);
    }
    emit(&args.output, Format::Csv, |f| table.render(f), stdout)?;
    match worst {
        None => Ok(EXIT_OK),
        Some((_, cell)) => Err(Failure {
            code: EXIT_MISMATCH,
            message: format!("worst mismatch: {cell}"),
        }),
    }
}

fn cmd_converge(args: &ConvergeArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    if args.steps.is_empty() {
        return Err(validation("invalid --steps: need at least one step count"));
    }
    if args.steps.iter().any(|&n| n < 1) {
        return Err(validation("invalid --steps: steps must be ≥ 1"));
    }
    if args.steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(validation("invalid --steps: step counts must be ascending"));
    }
    let params = args.market.params()?;
    params.validate_for_lattice()?;
    let payoff = PayoffSpec::new(args.contract.kind, args.contract.strike)?;
    let analytic = european_price_cev(&params, payoff.strike, args.market.t, payoff.kind)?;
    let mut table = Table::new(vec!["n_steps", "tree_price", "analytic_price", "abs_error"]);
    for &n in &args.steps {
        let lattice = build_lattice(&params, args.market.t, n)?;
        let tree = price_option(&lattice, &payoff, Style::European, args.mode)?.price;
        table.push(vec![
            Value::from(n),
            num(tree),
            num(analytic),
            num((tree - analytic).abs()),
        ]);
    }
    emit(&args.output, Format::Csv, |f| table.render(f), stdout)?;
    Ok(EXIT_OK)
}

fn cmd_envelope(args: &EnvelopeArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    if args.steps < 1 {
        return Err(validation("invalid --steps: steps must be ≥ 1"));
    }
    let params = args.market.params()?;
    let lattice = build_lattice(&params, args.market.t, args.steps)?;
    let mut table = Table::new(vec![
        "tau",
        "tree_upper",
        "tree_lower",
        "ode_upper",
        "ode_lower",
    ]);
    for (n, point) in envelope_points(&lattice).into_iter().enumerate() {
        let (upper, lower) = lattice.extremes(n);
        table.push(vec![
            num(point.tau),
            num(upper),
            num(lower),
            num(point.upper),
            num(point.lower),
        ]);
    }
    emit(&args.output, Format::Csv, |f| table.render(f), stdout)?;
    Ok(EXIT_OK)
}

/// `(price, mass, mass / local bin width)` for a discrete distribution
/// sorted by price. Interior bins span half-way to each neighbour.
pub fn density_from_masses(dist: &[(f64, f64)]) -> Vec<(f64, f64, f64)> {
    let n = dist.len();
    (0..n)
        .map(|k| {
            let (x, m) = dist[k];
            let width = match (k.checked_sub(1), dist.get(k + 1)) {
                (Some(lo), Some(hi)) => 0.5 * (hi.0 - dist[lo].0),
                (None, Some(hi)) => hi.0 - x,
                (Some(lo), None) => x - dist[lo].0,
                (None, None) => f64::NAN,
            };
            (x, m, m / width)
        })
        .collect()
}

fn cmd_density(args: &DensityArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    if args.steps < 1 {
        return Err(validation("invalid --steps: steps must be ≥ 1"));
    }
    let params = args.market.params()?;
    let lattice = build_lattice(&params, args.market.t, args.steps)?;
    let dist = terminal_distribution(&lattice, args.mode)?;
    let with_lognormal = params.is_gbm();
    let mut headers = vec!["price", "tree_mass", "tree_density"];
    if with_lognormal {
        headers.push("lognormal_density");
    }
    let mut table = Table::new(headers);
    for (x, mass, density) in density_from_masses(&dist) {
        let mut row = vec![num(x), num(mass), num(density)];
        if with_lognormal {
            row.push(num(lognormal_pdf(
                x,
                params.s0,
                params.r,
                params.sigma,
                args.market.t,
            )));
        }
        table.push(row);
    }
    emit(&args.output, Format::Csv, |f| table.render(f), stdout)?;
    Ok(EXIT_OK)
}

fn cmd_mc(args: &McArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let params = args.market.params()?;
    let cfg = McConfig {
        n_paths: args.paths,
        n_time_steps: args.steps,
        seed: args.seed,
        antithetic: args.antithetic,
    };
    let est = mc_european_price(
        &params,
        args.contract.strike,
        args.market.t,
        args.contract.kind,
        &cfg,
    )?;
    let analytic = european_price_cev(
        &params,
        args.contract.strike,
        args.market.t,
        args.contract.kind,
    )?;
    let mut table = Table::new(vec![
        "price",
        "std_error",
        "analytic",
        "n_paths",
        "n_time_steps",
        "seed",
    ]);
    table.push(vec![
        num(est.price),
        num(est.std_error),
        num(analytic),
        Value::from(cfg.n_paths),
        Value::from(cfg.n_time_steps),
        Value::from(cfg.seed),
    ]);
    emit(&args.output, Format::Csv, |f| table.render(f), stdout)?;
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Diagnostics go to `stderr`; the return value is the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
        }
    };
    let outcome = match &cli.command {
        Command::Price(a) => cmd_price(a, stdout),
        Command::Table1(a) => cmd_table1(a, stdout),
        Command::Converge(a) => cmd_converge(a, stdout),
        Command::Envelope(a) => cmd_envelope(a, stdout),
        Command::Density(a) => cmd_density(a, stdout),
        Command::Mc(a) => cmd_mc(a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("cevtree").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn density_columns_follow_beta() {
        let (code, out, _) = run_capture(&["density", "--beta", "2", "--steps", "20"]);
        assert_eq!(code, 0);
        assert_eq!(
            out.lines().next().unwrap(),
            "price,tree_mass,tree_density,lognormal_density"
        );
        let (code, out, _) = run_capture(&["density", "--beta", "1", "--steps", "20"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().next().unwrap(), "price,tree_mass,tree_density");
        assert_eq!(out.lines().count(), 22);
    }

    #[test]
    fn converge_rejects_bad_step_lists() {
        assert_eq!(
            run_capture(&["converge", "--steps", "730,365"]).0,
            EXIT_VALIDATION
        );
        assert_eq!(run_capture(&["converge", "--steps", ""]).0, EXIT_VALIDATION);
        let (code, out, _) = run_capture(&["converge", "--steps", "10,20"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 3);
    }

    #[test]
    fn density_widths() {
        let d = density_from_masses(&[(1.0, 0.25), (2.0, 0.5), (4.0, 0.25)]);
        assert_eq!(d[0].2, 0.25);
        assert_eq!(d[1].2, 0.5 / 1.5);
        assert_eq!(d[2].2, 0.125);
    }
}
