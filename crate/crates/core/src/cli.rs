//! Command-line front end. `run` parses arguments, does the work and returns
//! the process exit code: 0 on success, 1 on a failed verification, 2 on a
//! usage or parameter error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::cartan::{CartanAlgebra, Family};
use crate::error::Error;
use crate::ffla::PrimeField;
use crate::theorems::{self, Config, DecompositionReport, Task, TheoremReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "cartan-witt", version, about = "Cartan-type Lie algebras over GF(p) as W(1)-modules")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build an algebra and print its basis.
    Construct(AlgebraArgs),
    /// Split the adjoint module into W(1)-blocks and classify them.
    Decompose {
        #[command(flatten)]
        alg: AlgebraArgs,
        /// Decompose from scratch instead of using the explicit blocks.
        #[arg(long)]
        discover: bool,
    },
    /// Run the decomposition checks.
    Verify(VerifyArgs),
    /// Check the two binomial identities.
    Identities {
        #[arg(long, default_value_t = 6)]
        n_max: u32,
        #[arg(long, default_value_t = 13)]
        p_max: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct AlgebraArgs {
    #[arg(long)]
    pub family: Family,
    /// Number of variables.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: u32,
    /// Write the output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// A family, or `all`.
    #[arg(long, default_value = "all")]
    pub family: String,
    /// Comma-separated primes.
    #[arg(long, value_delimiter = ',', default_value = "5")]
    pub p: Vec<u32>,
    /// Comma-separated variable counts; each family has its own default.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Include wall-clock times.
    #[arg(long)]
    pub timings: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn default_ns(family: Family) -> Vec<usize> {
    match family {
        Family::W | Family::S => vec![2, 3],
        Family::H => vec![2, 4],
        Family::K => vec![3],
    }
}

/// Turns `verify` arguments into tasks, rejecting bad parameters up front.
pub fn verify_config(args: &VerifyArgs) -> Result<Config, Error> {
    let (families, all) = if args.family.eq_ignore_ascii_case("all") {
        (Family::ALL.to_vec(), true)
    } else {
        (vec![args.family.parse::<Family>()?], false)
    };
    if args.p.is_empty() {
        return Err(Error::ArgumentError("no primes given".into()));
    }
    for &p in &args.p {
        PrimeField::new(p)?;
    }
    let mut tasks = Vec::new();
    for &p in &args.p {
        for &family in &families {
            let ns = args.n.clone().unwrap_or_else(|| default_ns(family));
            for n in ns {
                match Task::for_family(family, n, p) {
                    Ok(ts) => tasks.extend(ts),
                    Err(_) if all => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    if all {
        tasks.push(Task::Identities { n_max: 6, p_max: 13 });
    }
    if tasks.is_empty() {
        return Err(Error::ArgumentError("no verification task matches the given parameters".into()));
    }
    Ok(Config { tasks, timings: args.timings })
}

fn with_schema<T: Serialize>(body: &T) -> Value {
    let mut map = Map::new();
    map.insert("schema".into(), json!(SCHEMA_VERSION));
    match serde_json::to_value(body).expect("serializable") {
        Value::Object(m) => map.extend(m),
        other => {
            map.insert("data".into(), other);
        }
    }
    Value::Object(map)
}

fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn construct_text(alg: &CartanAlgebra) -> String {
    let mut s = format!("{}({}) over GF({}), dim {}\n", alg.family(), alg.n(), alg.p(), alg.dim());
    for (k, d) in alg.basis().iter().enumerate() {
        let _ = writeln!(s, "{:>6}  {d}", k + 1);
    }
    s
}

fn decomposition_text(d: &DecompositionReport) -> String {
    let mut s = format!("{}({}) over GF({}), dim {}, {} blocks\n", d.family, d.n, d.p, d.dim, d.blocks.len());
    for b in &d.blocks {
        let _ = writeln!(s, "  {:<28} dim {:<3} {}", b.label, b.dim, b.iso);
    }
    let _ = writeln!(s, "blocks:      {}", d.multiplicities);
    let _ = writeln!(s, "composition: {}", d.composition);
    s
}

fn verdict_str(r: &TheoremReport) -> &'static str {
    if r.passed() {
        "PASS"
    } else {
        "FAIL"
    }
}

fn reports_text(reports: &[TheoremReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let _ = write!(s, "{} {}", verdict_str(r), r.claim);
        if !r.subject().is_empty() {
            let _ = write!(s, " {}", r.subject());
        }
        if let Some(ms) = r.millis {
            let _ = write!(s, " ({ms} ms)");
        }
        s.push('\n');
        if let Some(blocks) = r.computed.get("blocks") {
            let counts: crate::witt_rep::IsoCounts = serde_json::from_value::<std::collections::BTreeMap<String, usize>>(blocks.clone())
                .ok()
                .map(|m| {
                    let mut c = crate::witt_rep::IsoCounts::new();
                    m.into_iter().filter_map(|(k, v)| parse_iso(&k).map(|t| (t, v))).for_each(|(t, v)| c.add(t, v));
                    c
                })
                .unwrap_or_default();
            let _ = writeln!(s, "    {counts}");
        }
        for c in &r.checks {
            if !c.passed {
                let _ = writeln!(s, "    failed: {}: {}", c.name, c.detail);
            }
        }
        for n in &r.notes {
            let _ = writeln!(s, "    note: {n}");
        }
    }
    let passed = reports.iter().filter(|r| r.passed()).count();
    let _ = writeln!(s, "{passed}/{} passed", reports.len());
    s
}

fn parse_iso(s: &str) -> Option<crate::witt_rep::IsoType> {
    let (kind, rest) = s.split_at(1);
    let lambda: u32 = rest.strip_prefix('(')?.strip_suffix(')')?.parse().ok()?;
    match kind {
        "V" => Some(crate::witt_rep::IsoType::verma(lambda)),
        "L" => Some(crate::witt_rep::IsoType::simple(lambda)),
        _ => None,
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string())),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ArgumentError(_) | Error::UnsupportedPrime(_) | Error::ShapeError(_) => 2,
        _ => 1,
    }
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, Error> {
    let text = cli.format == Format::Text;
    match &cli.command {
        Command::Construct(a) => {
            let alg = CartanAlgebra::build(a.family, a.n, a.p)?;
            let s = if text { construct_text(&alg) } else { render_json(&with_schema(&alg)) };
            emit(&a.out, &s, stdout)?;
            Ok(0)
        }
        Command::Decompose { alg: a, discover } => {
            a.family.validate_n(a.n)?;
            PrimeField::new(a.p)?;
            let d = if *discover {
                theorems::discover(a.family, a.n, a.p)?
            } else {
                theorems::decomposition(a.family, a.n, a.p)?
            };
            let s = if text { decomposition_text(&d) } else { render_json(&with_schema(&d)) };
            emit(&a.out, &s, stdout)?;
            Ok(0)
        }
        Command::Verify(v) => {
            let config = verify_config(v)?;
            let reports = theorems::run_all(&config)?;
            let pass = reports.iter().all(TheoremReport::passed);
            let s = if text {
                reports_text(&reports)
            } else {
                render_json(&json!({
                    "schema": SCHEMA_VERSION,
                    "verdict": if pass { "pass" } else { "fail" },
                    "reports": reports,
                }))
            };
            emit(&v.out, &s, stdout)?;
            Ok(if pass { 0 } else { 1 })
        }
        Command::Identities { n_max, p_max, out } => {
            let r = theorems::verify_identities(*n_max, *p_max)?;
            let s = if text { reports_text(std::slice::from_ref(&r)) } else { render_json(&with_schema(&r)) };
            emit(out, &s, stdout)?;
            Ok(if r.passed() { 0 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("cartan-witt").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn verify_w2() {
        let (code, out, _) = call(&["verify", "--family", "W", "--n", "2", "--p", "5"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["reports"].as_array().unwrap().len(), 1);
        assert_eq!(v["reports"][0]["verdict"], "pass");
    }

    #[test]
    fn parity_errors() {
        assert_eq!(call(&["construct", "--family", "H", "--n", "3", "--p", "5"]).0, 2);
        assert_eq!(call(&["verify", "--family", "K", "--n", "2", "--p", "5"]).0, 2);
        assert_eq!(call(&["verify", "--family", "W", "--p", "4"]).0, 2);
        assert_eq!(call(&["verify", "--p", "2"]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["construct", "--family", "Q", "--n", "2", "--p", "5"]).0, 2);
    }

    #[test]
    fn all_skips_parity() {
        let args = VerifyArgs { family: "all".into(), p: vec![5], n: Some(vec![2]), timings: false, out: None };
        let cfg = verify_config(&args).unwrap();
        assert_eq!(
            cfg.tasks,
            vec![
                Task::W { n: 2, p: 5 },
                Task::SBasis { n: 2, p: 5 },
                Task::S { n: 2, p: 5 },
                Task::H { r: 1, p: 5 },
                Task::Identities { n_max: 6, p_max: 13 }
            ]
        );
    }

    #[test]
    fn decompose_text() {
        let (code, out, _) = call(&["--format", "text", "decompose", "--family", "K", "--n", "3", "--p", "3"]);
        assert_eq!(code, 0);
        assert!(out.contains("blocks:      V(0)^2 (+) V(2)^3 (+) L(1)^3 (+) L(2)"), "{out}");
    }

    #[test]
    fn construct_json() {
        let (code, out, _) = call(&["construct", "--family", "S", "--n", "2", "--p", "3"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["dim"], 8);
        assert_eq!(v["basis"].as_array().unwrap().len(), 8);
    }

    #[test]
    fn identities_text() {
        let (code, out, _) = call(&["--format", "text", "identities", "--n-max", "4", "--p-max", "7"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("PASS identities"), "{out}");
        assert_eq!(call(&["identities", "--n-max", "12"]).0, 2);
    }
}
