use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rug::Integer;
use serde::Serialize;
use serde_json::{json, Value};

use shintani::cone::{decomposition, z_of};
use shintani::invariants::{
    challenge_product, paper_literal_report, parse_budget, InvariantEstimate, Invariants, Method, Mode, Settings,
};
use shintani::numerics::{HPReal, Precision};
use shintani::quadratic_field::{make_field, LengthOneField, PrincipalConductor};
use shintani::recognition::recognize_minpoly;
use shintani::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "shintani", version, about = "Shintani invariants of real quadratic fields with a length-one minus continued fraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Field data, and g plus the decomposition datum when a conductor is given.
    Field(FieldCmd),
    /// Decomposition datum as JSON.
    Cone(ConeCmd),
    /// Invariant estimates, one record per n.
    Invariant(InvariantCmd),
    /// Convergence table with extrapolation.
    Converge(InvariantCmd),
    /// Evaluates an invariant (or takes --value) and searches for a minimal polynomial.
    Recognize(RecognizeCmd),
    /// The sin^2 + sinh^2 product over an n range.
    Challenge(ChallengeCmd),
    /// Expression 2 in both index conventions against the expression-1 limit.
    LiteralReport(LiteralCmd),
}

#[derive(Args, Debug, Clone)]
struct FieldArgs {
    /// Continued fraction digit a (odd, at least 3).
    #[arg(long, conflicts_with = "d")]
    a: Option<i64>,
    /// Discriminant d = a^2 - 4.
    #[arg(long)]
    d: Option<i64>,
}

#[derive(Args, Debug, Clone)]
struct ConductorArgs {
    /// Rational conductor m.
    #[arg(long, conflicts_with = "ideal")]
    modulus: Option<i64>,
    /// Conductor as an ideal expression such as "4-1*sqrt(5)".
    #[arg(long)]
    ideal: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Write output to FILE instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct NumericArgs {
    /// Target precision in bits.
    #[arg(long, default_value_t = 256)]
    precision: u32,
    /// Cap on product factors per estimate, e.g. 1e8.
    #[arg(long, env = "SHINTANI_FACTOR_BUDGET")]
    budget: Option<String>,
}

#[derive(Args, Debug)]
struct FieldCmd {
    #[command(flatten)]
    field: FieldArgs,
    #[command(flatten)]
    conductor: ConductorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ConeCmd {
    #[command(flatten)]
    field: FieldArgs,
    #[command(flatten)]
    conductor: ConductorArgs,
    /// Also print z_k = x_k eps + y_k to this many bits.
    #[arg(long)]
    precision: Option<u32>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct InvariantCmd {
    #[command(flatten)]
    field: FieldArgs,
    #[command(flatten)]
    conductor: ConductorArgs,
    /// expr1 | expr2 | expr3 | dsine | x1 | x2 | full
    #[arg(long, default_value = "expr1")]
    method: String,
    /// Index n, or an inclusive range lo..hi (j for expr3).
    #[arg(long, default_value = "4")]
    n: String,
    /// derived | paper_literal (expr2 and expr3).
    #[arg(long, default_value = "derived")]
    mode: String,
    #[command(flatten)]
    numeric: NumericArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct RecognizeCmd {
    #[command(flatten)]
    field: FieldArgs,
    #[command(flatten)]
    conductor: ConductorArgs,
    /// Invariant to recognize: x1 | x2 | full, or a geodesic method with --n.
    #[arg(long, default_value = "x1")]
    method: String,
    /// Range for geodesic methods; the extrapolated limit is used.
    #[arg(long)]
    n: Option<String>,
    /// Recognize this decimal instead of computing an invariant.
    #[arg(long)]
    value: Option<String>,
    #[arg(long, default_value_t = 4)]
    max_degree: usize,
    #[arg(long, default_value = "500")]
    max_height: String,
    /// Residual tolerance as a power of two; defaults to 3/4 of the precision (or of the digits given with --value).
    #[arg(long)]
    tol_bits: Option<u32>,
    #[command(flatten)]
    numeric: NumericArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ChallengeCmd {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long)]
    m: i64,
    #[arg(long, default_value_t = 0)]
    k: u64,
    /// Index n or inclusive range lo..hi.
    #[arg(long, default_value = "1..6")]
    n: String,
    #[command(flatten)]
    numeric: NumericArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct LiteralCmd {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long, default_value_t = 4)]
    m: i64,
    /// Range for expression 2.
    #[arg(long, default_value = "0..6")]
    n: String,
    /// Range for the expression-1 reference limit.
    #[arg(long, default_value = "0..14")]
    expr1_n: String,
    #[command(flatten)]
    numeric: NumericArgs,
}

fn config(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn field_of(args: &FieldArgs) -> Result<LengthOneField> {
    match (args.a, args.d) {
        (Some(a), None) => make_field(a),
        (None, Some(d)) => LengthOneField::from_d(d),
        _ => Err(config("give exactly one of --a and --d")),
    }
}

fn conductor_of(field: &LengthOneField, args: &ConductorArgs) -> Result<Option<PrincipalConductor>> {
    match (&args.modulus, &args.ideal) {
        (Some(m), None) => PrincipalConductor::rational(field, *m).map(Some),
        (None, Some(s)) => PrincipalConductor::parse(field, s).map(Some),
        (None, None) => Ok(None),
        _ => Err(config("give at most one of --modulus and --ideal")),
    }
}

fn required_conductor(field: &LengthOneField, args: &ConductorArgs) -> Result<PrincipalConductor> {
    conductor_of(field, args)?.ok_or_else(|| config("a conductor is required (--modulus or --ideal)"))
}

/// `"5"` or the inclusive range `"2..10"`.
fn parse_range(s: &str) -> Result<Vec<u64>> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| config(format!("bad index {t:?} in {s:?}")));
    match s.split_once("..") {
        Some((lo, hi)) => {
            let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
            if lo > hi {
                return Err(config(format!("empty range {s:?}")));
            }
            Ok((lo..=hi).collect())
        }
        None => Ok(vec![num(s)?]),
    }
}

fn settings_of(args: &NumericArgs) -> Result<Settings> {
    let precision = Precision::new(args.precision)?;
    let mut settings = Settings::new(precision);
    if let Some(b) = &args.budget {
        settings = settings.with_budget(parse_budget(b).ok_or_else(|| config(format!("bad budget {b:?}")))?);
    }
    Ok(settings)
}

fn method_of(s: &str) -> Result<Method> {
    Method::parse(s).ok_or_else(|| config(format!("unknown method {s:?}")))
}

fn mode_of(s: &str) -> Result<Mode> {
    Mode::parse(s).ok_or_else(|| config(format!("unknown mode {s:?}")))
}

struct Sink(Box<dyn Write>);

impl Sink {
    fn new(out: &Option<PathBuf>) -> Result<Sink> {
        let w: Box<dyn Write> = match out {
            Some(p) => Box::new(File::create(p).map_err(|e| config(format!("cannot create {}: {e}", p.display())))?),
            None => Box::new(io::stdout().lock()),
        };
        Ok(Sink(w))
    }

    fn line(&mut self, s: impl AsRef<str>) -> Result<()> {
        writeln!(self.0, "{}", s.as_ref()).map_err(|e| config(format!("write failed: {e}")))
    }

    fn json<T: Serialize>(&mut self, v: &T) -> Result<()> {
        let s = serde_json::to_string(v).map_err(|e| config(e.to_string()))?;
        self.line(s)
    }
}

fn cmd_field(c: &FieldCmd) -> Result<()> {
    let field = field_of(&c.field)?;
    let nu = conductor_of(&field, &c.conductor)?;
    let prec = Precision::new(128)?;
    let eps = field.epsilon_hp(prec);
    let datum = nu.as_ref().map(|nu| decomposition(&field, nu)).transpose()?;
    let mut out = Sink::new(&c.output.out)?;
    if c.output.json {
        let mut v = json!({
            "a": field.a(),
            "d": field.d(),
            "epsilon": field.epsilon().to_expr(),
            "epsilon_dec": eps.to_decimal(30),
        });
        if let Some(datum) = &datum {
            v["cone"] = serde_json::to_value(datum.to_json()?).map_err(|e| config(e.to_string()))?;
        }
        return out.json(&v);
    }
    out.line(format!("a = {}", field.a()))?;
    out.line(format!("d = {}", field.d()))?;
    out.line(format!("eps = {} = {}", field.epsilon().to_expr(), eps.to_decimal(30)))?;
    if let Some(datum) = &datum {
        out.line(format!("nu = {}", datum.conductor))?;
        out.line(format!("g = {}", datum.g))?;
        for c in &datum.data {
            out.line(format!("k = {:>3}  (x, y) = ({}, {})", c.k, c.x, c.y))?;
        }
    }
    Ok(())
}

fn cmd_cone(c: &ConeCmd) -> Result<()> {
    let field = field_of(&c.field)?;
    let nu = required_conductor(&field, &c.conductor)?;
    let datum = decomposition(&field, &nu)?;
    let mut out = Sink::new(&c.output.out)?;
    let zs: Option<Vec<String>> = match c.precision {
        Some(bits) => {
            let p = Precision::new(bits)?;
            Some(datum.data.iter().map(|e| z_of(e, &field, p).to_decimal(p.decimal_digits())).collect())
        }
        None => None,
    };
    if c.output.json {
        let mut v = serde_json::to_value(datum.to_json()?).map_err(|e| config(e.to_string()))?;
        if let Some(zs) = zs {
            v["z_dec"] = json!(zs);
        }
        return out.json(&v);
    }
    out.line(format!("g = {}", datum.g))?;
    for (i, e) in datum.data.iter().enumerate() {
        let z = zs.as_ref().map(|z| format!("  z = {}", z[i])).unwrap_or_default();
        out.line(format!("k = {:>3}  x = {:<8} y = {:<8}{z}", e.k, e.x.to_string(), e.y.to_string()))?;
    }
    Ok(())
}

fn print_estimate(out: &mut Sink, json: bool, e: &InvariantEstimate) -> Result<()> {
    if json {
        return out.json(&e.to_record());
    }
    let n = e.n.map(|n| n.to_string()).unwrap_or_else(|| "-".into());
    out.line(format!(
        "{:<6} n = {:<4} value = {}  err_est = {}  factors = {}  {} ms",
        e.method.name(),
        n,
        e.value.to_decimal(e.value.precision().decimal_digits()),
        e.err_est.to_decimal(3),
        e.factors,
        e.wall_ms
    ))
}

fn cmd_invariant(c: &InvariantCmd) -> Result<()> {
    let field = field_of(&c.field)?;
    let nu = required_conductor(&field, &c.conductor)?;
    let method = method_of(&c.method)?;
    let mode = mode_of(&c.mode)?;
    let inv = Invariants::new(&field, &nu, settings_of(&c.numeric)?)?;
    let mut out = Sink::new(&c.output.out)?;
    match method {
        Method::X1Generic => print_estimate(&mut out, c.output.json, &inv.x1_generic()?),
        Method::X2Generic => print_estimate(&mut out, c.output.json, &inv.x2_generic()?),
        Method::Full => {
            for e in inv.full()?.iter() {
                print_estimate(&mut out, c.output.json, e)?;
            }
            Ok(())
        }
        _ => {
            for n in parse_range(&c.n)? {
                print_estimate(&mut out, c.output.json, &inv.estimate_at(method, n, mode)?)?;
            }
            Ok(())
        }
    }
}

fn cmd_converge(c: &InvariantCmd) -> Result<()> {
    let field = field_of(&c.field)?;
    let nu = required_conductor(&field, &c.conductor)?;
    let method = method_of(&c.method)?;
    if !method.is_geodesic() {
        return Err(config(format!("{method} has no n to converge over")));
    }
    let inv = Invariants::new(&field, &nu, settings_of(&c.numeric)?)?;
    let table = inv.converge(method, &parse_range(&c.n)?, mode_of(&c.mode)?)?;
    let mut out = Sink::new(&c.output.out)?;
    if c.output.json {
        return out.json(&table.to_json());
    }
    out.line(format!("{:<4} {:<42} {:<10} {:<42}", "n", "value", "delta", "extrapolated"))?;
    for r in &table.rows {
        let delta = r.delta.as_ref().map(|d| d.to_decimal(3)).unwrap_or_else(|| "-".into());
        out.line(format!("{:<4} {:<42} {:<10} {:<42}", r.n, r.value.to_decimal(36), delta, r.extrapolated.to_decimal(36)))?;
    }
    if let Some(err) = table.err_est() {
        out.line(format!("limit = {}  err_est = {}", table.limit().expect("rows").to_decimal(40), err.to_decimal(3)))?;
    }
    Ok(())
}

fn cmd_recognize(c: &RecognizeCmd) -> Result<()> {
    let settings = settings_of(&c.numeric)?;
    let prec = settings.precision;
    // a typed value is only as good as its digits
    let mut known_bits = prec.bits();
    let x = match &c.value {
        Some(v) => {
            let mantissa = v.split(['e', 'E']).next().unwrap_or("");
            let digits = mantissa.trim_start_matches(['-', '+', '0', '.']).bytes().filter(u8::is_ascii_digit).count();
            known_bits = known_bits.min((digits as f64 * std::f64::consts::LOG2_10) as u32);
            HPReal::parse_decimal(v, prec)?
        }
        None => {
            let field = field_of(&c.field)?;
            let nu = required_conductor(&field, &c.conductor)?;
            let inv = Invariants::new(&field, &nu, settings)?;
            match method_of(&c.method)? {
                Method::X1Generic => inv.x1_generic()?.value,
                Method::X2Generic => inv.x2_generic()?.value,
                Method::Full => inv.full()?[2].value.clone(),
                m => {
                    let ns = parse_range(c.n.as_deref().unwrap_or("0..12"))?;
                    inv.converge(m, &ns, Mode::Derived)?.limit().expect("rows").clone()
                }
            }
        }
    };
    let max_height: Integer = c.max_height.parse().map_err(|_| config(format!("bad --max-height {:?}", c.max_height)))?;
    let tol_bits = c.tol_bits.unwrap_or(known_bits * 3 / 4);
    let tol = HPReal::with_val(prec, rug::Float::i_exp(1, -(tol_bits as i32)));
    let found = recognize_minpoly(&x, c.max_degree, &max_height, &tol)?;
    let mut out = Sink::new(&c.output.out)?;
    let value_dec = x.to_decimal(prec.decimal_digits());
    if c.output.json {
        let v = match &found {
            Some(m) => {
                let mut v = serde_json::to_value(m.relation.to_json()).map_err(|e| config(e.to_string()))?;
                v["polynomial"] = json!(m.relation.poly_string());
                v["irreducible"] = json!(m.irreducible);
                v["value_dec"] = json!(value_dec);
                v
            }
            None => json!({ "candidate": Value::Null, "value_dec": value_dec }),
        };
        return out.json(&v);
    }
    out.line(format!("x = {value_dec}"))?;
    match found {
        Some(m) => {
            out.line(format!("candidate: {}", m.relation.poly_string()))?;
            out.line(format!("residual = {}  height = {}", m.relation.residual.to_decimal(3), m.relation.height))?;
            let irr = match m.irreducible {
                Some(true) => "no small factors found",
                Some(false) => "factors",
                None => "not checked",
            };
            out.line(format!("trial factorization: {irr}"))
        }
        None => out.line(format!("no relation of degree <= {} and height <= {}", c.max_degree, max_height)),
    }
}

fn cmd_challenge(c: &ChallengeCmd) -> Result<()> {
    let field = field_of(&c.field)?;
    let prec = Precision::new(c.numeric.precision)?;
    let mut out = Sink::new(&c.output.out)?;
    for n in parse_range(&c.n)? {
        let v = challenge_product(&field, c.m, c.k, n, prec)?;
        let log_p = if v.log_p.is_finite() { v.log_p.to_decimal(30) } else { "-inf".into() };
        if c.output.json {
            out.json(&json!({
                "a": field.a(),
                "d": field.d(),
                "m": c.m,
                "k": c.k,
                "n": n,
                "p_dec": v.p.to_decimal(30),
                "log_p_dec": log_p,
                "zero_factors": v.zero_factors,
                "log_p_nonzero_dec": v.log_p_nonzero.to_decimal(30),
                "precision_bits": prec.bits(),
            }))?;
        } else {
            out.line(format!(
                "n = {:<3} P = {:<36} log P = {:<36} zero factors = {}  log P (nonzero) = {}",
                n,
                v.p.to_decimal(30),
                log_p,
                v.zero_factors,
                v.log_p_nonzero.to_decimal(30)
            ))?;
        }
    }
    Ok(())
}

fn cmd_literal(c: &LiteralCmd) -> Result<()> {
    let field = field_of(&c.field)?;
    let nu = PrincipalConductor::rational(&field, c.m)?;
    let inv = Invariants::new(&field, &nu, settings_of(&c.numeric)?)?;
    let report = paper_literal_report(&inv, &parse_range(&c.n)?, &parse_range(&c.expr1_n)?)?;
    let s = serde_json::to_string_pretty(&report).map_err(|e| config(e.to_string()))?;
    Sink::new(&None)?.line(s)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Field(c) => cmd_field(c),
        Command::Cone(c) => cmd_cone(c),
        Command::Invariant(c) => cmd_invariant(c),
        Command::Converge(c) => cmd_converge(c),
        Command::Recognize(c) => cmd_recognize(c),
        Command::Challenge(c) => cmd_challenge(c),
        Command::LiteralReport(c) => cmd_literal(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
