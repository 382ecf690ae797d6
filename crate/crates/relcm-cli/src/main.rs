//! `relcm`: evaluate the special functions, run the verification suites and
//! scan the transform regimes over a parameter axis.
//!
//! Exit codes: 0 success, 1 failed verification, 2 configuration error,
//! 3 numerical failure.

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use relcm::attractive::AttractiveEvaluator;
use relcm::hypgamma::{HypGammaEvaluator, ScaleParams};
use relcm::repulsive::RepulsiveEvaluator;
use relcm::special_n::SpecialNEvaluator;
use relcm::transforms::{gram_defect, momentum_basis, position_basis, predict_defect, Basis, KernelSpec, QuadSettings};
use relcm::verify::{run_suite, KernelPoint, SuiteReport, SUITES};
use relcm::{Complex64 as C64, Error};

const BUILD_ID: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("RELCM_BUILD_REV"));

#[derive(Parser, Debug)]
#[command(name = "relcm", version = BUILD_ID, about = "Relativistic Calogero-Moser eigenfunctions and transforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, global = true)]
    a_plus: Option<f64>,
    #[arg(long, global = true)]
    a_minus: Option<f64>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    /// Coupling `b`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Special coupling `b = (N+1)a+`.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Quadrature tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Function {
    Gamma,
    Rren,
    Psi,
    Psin,
    Amplitudes,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum BMode {
    APlus,
    AMinus,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate one function over a grid.
    Eval {
        #[arg(value_enum)]
        function: Function,
        /// Argument of `G` (repeatable); complex values as `1.5`, `0.3i` or `1-0.2i`.
        #[arg(long, allow_hyphen_values = true)]
        z: Vec<String>,
        #[arg(long, allow_hyphen_values = true)]
        x: Vec<String>,
        #[arg(long, allow_hyphen_values = true)]
        y: Vec<String>,
        /// Real range `from,to,steps` appended to the `z` values.
        #[arg(long, allow_hyphen_values = true)]
        z_range: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        x_range: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        y_range: Option<String>,
        /// Coupling fixed to one of the scales.
        #[arg(long, value_enum)]
        b_mode: Option<BMode>,
    },
    /// Run a verification suite.
    Verify {
        suite: String,
        /// Replaces the suite's default parameter points (with `--n`).
        #[arg(long)]
        rho_kappa: Option<f64>,
    },
    /// One row of defects and ranks per value of `ρκ`.
    Scan {
        /// `from,to,steps`, inclusive of both ends.
        #[arg(long, allow_hyphen_values = true)]
        rho_kappa_range: String,
    },
}

enum Failure {
    Config(String),
    Numerical(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::OutOfWindow(_) | Error::UnsupportedN(_) => Failure::Config(e.to_string()),
            e => Failure::Numerical(e),
        }
    }
}

type Out<T> = std::result::Result<T, Failure>;

fn config<T>(msg: impl Into<String>) -> Out<T> {
    Err(Failure::Config(msg.into()))
}

fn parse_complex(s: &str) -> Out<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Failure::Config(format!("cannot parse complex number {s:?}"));
    if let Some(body) = t.strip_suffix('i') {
        // split at the last sign that is not an exponent sign or leading
        let split = body
            .char_indices()
            .filter(|&(i, ch)| (ch == '+' || ch == '-') && i > 0 && !matches!(body.as_bytes()[i - 1], b'e' | b'E'))
            .map(|(i, _)| i)
            .last();
        let (re, im) = match split {
            Some(i) => (&body[..i], &body[i..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => "1",
            "-" => "-1",
            v => v,
        };
        Ok(C64::new(re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?))
    } else {
        Ok(C64::new(t.parse().map_err(|_| bad())?, 0.0))
    }
}

fn parse_range(s: &str) -> Out<Vec<f64>> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b, n] = parts.as_slice() else {
        return config(format!("range {s:?} is not from,to,steps"));
    };
    let (a, b): (f64, f64) = match (a.parse(), b.parse()) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return config(format!("range {s:?} has non-numeric ends")),
    };
    let n: usize = n.parse().map_err(|_| Failure::Config(format!("range {s:?} has a bad step count")))?;
    if n == 0 || !(b > a) || !a.is_finite() || !b.is_finite() {
        return config(format!("empty range {s:?}"));
    }
    Ok(if n == 1 { vec![a] } else { (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect() })
}

const DEFAULT_X: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
const DEFAULT_Y: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

/// Listed values then the range; `default` when both are absent.
fn values(list: &[String], range: &Option<String>, default: &[f64]) -> Out<Vec<C64>> {
    let mut v: Vec<C64> = list.iter().map(|s| parse_complex(s)).collect::<Out<_>>()?;
    if let Some(r) = range {
        v.extend(parse_range(r)?.into_iter().map(|x| C64::new(x, 0.0)));
    }
    if list.is_empty() && range.is_none() {
        v = default.iter().map(|&x| C64::new(x, 0.0)).collect();
    }
    Ok(v)
}

impl Common {
    fn params(&self) -> Out<ScaleParams> {
        match (self.a_plus, self.a_minus, self.rho, self.kappa) {
            (Some(ap), Some(am), None, None) => Ok(ScaleParams::new(ap, am)?),
            (None, None, Some(r), Some(k)) => Ok(ScaleParams::from_rho_kappa(r, k)?),
            (None, None, None, None) => Ok(ScaleParams::new(1.0, 1.0)?),
            _ => config("give exactly one of --a-plus/--a-minus or --rho/--kappa"),
        }
    }

    fn coupling(&self, p: &ScaleParams, mode: Option<BMode>) -> Out<f64> {
        match (self.b, self.n, mode) {
            (Some(b), None, None) => Ok(b),
            (None, Some(n), None) => Ok((n + 1) as f64 * p.a_plus),
            (None, None, Some(BMode::APlus)) => Ok(p.a_plus),
            (None, None, Some(BMode::AMinus)) => Ok(p.a_minus),
            _ => config("give exactly one of --b, --n or --b-mode"),
        }
    }

    fn quad(&self) -> Out<QuadSettings> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return config(format!("tolerance must be positive, got {}", self.tol));
        }
        Ok(QuadSettings { tol: self.tol, ..QuadSettings::default() })
    }
}

/// Provenance embedded in every report.
#[derive(Serialize)]
struct Header<'a> {
    build: &'a str,
    command: &'a str,
    seed: u64,
    quadrature: QuadSettings,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    #[serde(flatten)]
    header: Header<'a>,
    #[serde(flatten)]
    body: T,
}

/// One value of an `eval` table; complex numbers as `[re, im]`.
#[derive(Serialize, Clone)]
struct EvalRow {
    function: Function,
    x: [f64; 2],
    y: [f64; 2],
    quantity: &'static str,
    value: [f64; 2],
}

#[derive(Serialize)]
struct EvalCsv {
    function: Function,
    x_re: f64,
    x_im: f64,
    y_re: f64,
    y_im: f64,
    quantity: &'static str,
    re: f64,
    im: f64,
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn cmd_eval(common: &Common, cmd: &Command) -> Out<(Vec<EvalRow>, Function)> {
    let Command::Eval { function, z, x, y, z_range, x_range, y_range, b_mode } = cmd else { unreachable!() };
    let p = common.params()?;
    let zero = C64::new(0.0, 0.0);
    let grid2 = || -> Out<Vec<(C64, C64)>> {
        let (xs, ys) = (values(x, x_range, &DEFAULT_X)?, values(y, y_range, &DEFAULT_Y)?);
        Ok(xs.iter().flat_map(|&a| ys.iter().map(move |&b| (a, b))).collect())
    };
    let row = |x: C64, y: C64, quantity, v: C64| EvalRow { function: *function, x: pair(x), y: pair(y), quantity, value: pair(v) };
    let rows: Vec<EvalRow> = match function {
        Function::Gamma => {
            let zs = values(z, z_range, &DEFAULT_X)?;
            let g = HypGammaEvaluator::new(p);
            zs.par_iter().map(|&z| Ok(row(z, zero, "value", g.eval(z)?))).collect::<Out<_>>()?
        }
        Function::Rren => {
            let e = RepulsiveEvaluator::new(p, common.coupling(&p, *b_mode)?)?;
            grid2()?.par_iter().map(|&(x, y)| Ok(row(x, y, "value", e.r_ren(x, y)?))).collect::<Out<_>>()?
        }
        Function::Psi => {
            let e = AttractiveEvaluator::new(p, common.coupling(&p, *b_mode)?)?;
            grid2()?.par_iter().map(|&(x, y)| Ok(row(x, y, "value", e.psi_general(x, y)?))).collect::<Out<_>>()?
        }
        Function::Psin => {
            let Some(n) = common.n else { return config("eval psin needs --n") };
            let e = SpecialNEvaluator::new(p, n)?;
            grid2()?.par_iter().map(|&(x, y)| Ok(row(x, y, "value", e.psi_n(x, y)?))).collect::<Out<_>>()?
        }
        Function::Amplitudes => {
            let ys = values(y, y_range, &DEFAULT_Y)?;
            let e = AttractiveEvaluator::new(p, common.coupling(&p, *b_mode)?)?;
            let per: Vec<Vec<EvalRow>> = ys
                .par_iter()
                .map(|&y| {
                    let a = e.amplitudes(y)?;
                    Ok(vec![row(zero, y, "u", a.u), row(zero, y, "t", a.t), row(zero, y, "r", a.r)])
                })
                .collect::<Out<_>>()?;
            per.into_iter().flatten().collect()
        }
    };
    Ok((rows, *function))
}

#[derive(Serialize)]
struct VerifyCsv<'a> {
    suite: &'a str,
    check: &'a str,
    value: f64,
    tol: f64,
    pass: bool,
}

fn cmd_verify(common: &Common, suite: &str, rho_kappa: Option<f64>) -> Out<SuiteReport> {
    if !SUITES.contains(&suite) {
        return config(format!("unknown suite {suite:?}; expected one of {}", SUITES.join(", ")));
    }
    let point = match (rho_kappa, common.n) {
        (Some(rk), n) => Some(KernelPoint { n: n.unwrap_or(0), rho_kappa: rk }),
        (None, None) => None,
        (None, Some(_)) => return config("--n needs --rho-kappa"),
    };
    Ok(run_suite(suite, common.seed, point, &common.quad()?)?)
}

/// Regime of the special kernel at `ρκ`, by window.
fn regime(n: usize, rk: f64) -> &'static str {
    let x = rk / PI;
    let nf = n as f64;
    if x >= nf + 1.0 {
        "unitary"
    } else if x > nf + 0.5 {
        "bound_state"
    } else if n == 0 {
        "breakdown"
    } else {
        "outside_window"
    }
}

#[derive(Serialize, Clone)]
struct ScanRow {
    n: usize,
    rho_kappa: f64,
    regime: &'static str,
    forward_defect: Option<f64>,
    forward_rank: Option<usize>,
    forward_predicted_rank: Option<usize>,
    adjoint_defect: Option<f64>,
    adjoint_rank: Option<usize>,
    adjoint_predicted_rank: Option<usize>,
    bound_energy: Option<f64>,
    status: String,
}

fn scan_row(n: usize, rk: f64, seed: u64, q: &QuadSettings) -> ScanRow {
    let mut row = ScanRow {
        n,
        rho_kappa: rk,
        regime: regime(n, rk),
        forward_defect: None,
        forward_rank: None,
        forward_predicted_rank: None,
        adjoint_defect: None,
        adjoint_rank: None,
        adjoint_predicted_rank: None,
        bound_energy: None,
        status: "ok".into(),
    };
    let mut run = || -> relcm::Result<()> {
        let ker = KernelSpec::special_n(ScaleParams::from_rho_kappa(1.0, rk)?, n)?;
        row.bound_energy = ker.special().and_then(|s| s.bound_state().ok()).map(|b| b.energy);
        for basis in [Basis::Momentum(momentum_basis(6, seed)), Basis::Position(position_basis(6, seed))] {
            let rep = gram_defect(&ker, &basis, q)?;
            let pred = predict_defect(&ker, &basis).ok().map(|p| p.numerical_rank);
            match basis {
                Basis::Momentum(_) => {
                    row.forward_defect = Some(rep.max_abs());
                    row.forward_rank = Some(rep.numerical_rank);
                    row.forward_predicted_rank = pred;
                }
                Basis::Position(_) => {
                    row.adjoint_defect = Some(rep.max_abs());
                    row.adjoint_rank = Some(rep.numerical_rank);
                    row.adjoint_predicted_rank = pred;
                }
            }
        }
        Ok(())
    };
    if let Err(e) = run() {
        row.status = e.to_string();
    }
    row
}

fn cmd_scan(common: &Common, range: &str) -> Out<Vec<ScanRow>> {
    let rks = parse_range(range)?;
    if rks.iter().any(|&r| r <= 0.0) {
        return config("rho*kappa must be positive");
    }
    let q = common.quad()?;
    let n = common.n.unwrap_or(0);
    Ok(rks.par_iter().map(|&rk| scan_row(n, rk, common.seed, &q)).collect())
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Out<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Config(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Failure::Config(e.to_string()))
}

fn json_bytes<T: Serialize>(header: Header, body: T) -> Out<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(&Report { header, body }).map_err(|e| Failure::Config(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

#[derive(Serialize)]
struct Rows<T> {
    rows: Vec<T>,
}

fn run(cli: &Cli) -> Out<(Vec<u8>, bool)> {
    let c = &cli.common;
    let header = |command| -> Out<Header> {
        Ok(Header { build: BUILD_ID, command, seed: c.seed, quadrature: c.quad()? })
    };
    match &cli.command {
        cmd @ Command::Eval { .. } => {
            let (rows, _) = cmd_eval(c, cmd)?;
            let bytes = match c.format {
                Format::Json => json_bytes(header("eval")?, Rows { rows })?,
                Format::Csv => csv_bytes(rows.into_iter().map(|r| EvalCsv {
                    function: r.function,
                    x_re: r.x[0],
                    x_im: r.x[1],
                    y_re: r.y[0],
                    y_im: r.y[1],
                    quantity: r.quantity,
                    re: r.value[0],
                    im: r.value[1],
                }))?,
            };
            Ok((bytes, true))
        }
        Command::Verify { suite, rho_kappa } => {
            let rep = cmd_verify(c, suite, *rho_kappa)?;
            let pass = rep.pass;
            eprintln!(
                "{} {}: {} checks, worst value/tol {:.3e}",
                if pass { "PASS" } else { "FAIL" },
                rep.suite,
                rep.checks.len(),
                rep.worst_ratio()
            );
            let bytes = match c.format {
                Format::Json => json_bytes(header("verify")?, &rep)?,
                Format::Csv => csv_bytes(rep.checks.iter().map(|k| VerifyCsv {
                    suite: &rep.suite,
                    check: &k.name,
                    value: k.value,
                    tol: k.tol,
                    pass: k.pass,
                }))?,
            };
            Ok((bytes, pass))
        }
        Command::Scan { rho_kappa_range } => {
            let rows = cmd_scan(c, rho_kappa_range)?;
            let bytes = match c.format {
                Format::Json => json_bytes(header("scan")?, Rows { rows })?,
                Format::Csv => csv_bytes(rows)?,
            };
            Ok((bytes, true))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = std::env::var("RELCM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok((bytes, pass)) => {
            let written = match &cli.common.out {
                Some(path) => std::fs::write(path, &bytes),
                None => std::io::stdout().write_all(&bytes),
            };
            if let Err(e) = written {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(2);
            }
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(3)
        }
    }
}
