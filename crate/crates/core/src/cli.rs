//! Command-line front end: `build`, `step-verify` and `sweep`.
//!
//! Exit codes: 0 verified, 1 usage or configuration, 2 mathematical mismatch,
//! 3 precision or search budget exhausted.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::certificate::{certify, Certificate};
use crate::error::Error;
use crate::field::{is_prime, Field};
use crate::frames::{apply_step, predict, step_any_alpha, synthetic_type1, synthetic_type2, Flavor, Predicted, StepOptions, TransformStep};
use crate::monocheck::{sweep, SweepReport};
use crate::tower::{build, TowerConfig, TowerState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MISMATCH: i32 = 2;
pub const EXIT_RESOURCES: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tower", version, about = "Build and certify towers of defect Artin-Schreier extensions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a tower and write its certificate.
    Build(BuildArgs),
    /// Run one transform step on a synthetic arrow and compare with the closed form.
    StepVerify(StepArgs),
    /// Run the monomialization sweep on a fresh or stored tower.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Json,
    Csv,
    Txt,
}

#[derive(Debug, Clone, Args)]
pub struct TowerArgs {
    #[arg(long, env = "TOWER_P", default_value_t = 2)]
    pub p: u32,
    #[arg(long, env = "TOWER_N", default_value_t = 1)]
    pub n: u32,
    #[arg(long, env = "TOWER_E", default_value_t = 1)]
    pub e: u64,
    /// Double steps after the preamble.
    #[arg(long, env = "TOWER_STEPS", default_value_t = 6)]
    pub steps: u32,
    #[arg(long, env = "TOWER_LAMBDA_MAX", default_value_t = 4)]
    pub lambda_max: u32,
    /// Largest working precision any frame may use.
    #[arg(long, env = "TOWER_PREC", default_value_t = 1024)]
    pub prec: u64,
}

impl TowerArgs {
    pub fn config(&self) -> Result<TowerConfig, Failure> {
        if !is_prime(self.p) {
            return Err(Failure::usage(format!("p must be prime, got {}", self.p)));
        }
        if self.n == 0 || self.e == 0 {
            return Err(Failure::usage("n and e must be positive"));
        }
        Ok(TowerConfig { p: self.p, n: self.n, e: self.e, steps: self.steps, lambda_max: self.lambda_max, prec: self.prec })
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub tower: TowerArgs,
    #[arg(long, env = "TOWER_OUT_FORMAT", value_enum, default_value_t = OutFormat::Txt)]
    pub out_format: OutFormat,
    /// Output file; standard output when absent.
    #[arg(long, env = "TOWER_OUT")]
    pub out: Option<PathBuf>,
    /// Levels `0..sweep_levels` are swept for strongly monomial forms.
    #[arg(long, env = "TOWER_SWEEP_LEVELS", default_value_t = 4)]
    pub sweep_levels: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlavorArg {
    /// Starts from a type 1 arrow.
    A,
    /// Starts from a type 2 arrow.
    B,
}

#[derive(Debug, Args)]
pub struct StepArgs {
    #[arg(long, default_value_t = 2)]
    pub p: u32,
    /// `c̄ / (p - 1)` of the synthetic input arrow.
    #[arg(long)]
    pub ratio: u64,
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub q: u64,
    #[arg(long, value_enum)]
    pub flavor: FlavorArg,
    #[arg(long, default_value_t = 512)]
    pub prec: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub tower: TowerArgs,
    /// Rebuild the tower recorded in this certificate instead of using the flags.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub from: i64,
    /// Last swept level, inclusive.
    #[arg(long, default_value_t = 3)]
    pub to: i64,
    /// Also print the positive control row.
    #[arg(long)]
    pub control: bool,
    #[arg(long, value_enum, default_value_t = OutFormat::Txt)]
    pub out_format: OutFormat,
}

/// A failed command: message and exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::PrecisionExhausted { .. } | Error::SearchExhausted(_) | Error::FieldTooSmall { .. } | Error::WeightsTooCoarse { .. } => {
                EXIT_RESOURCES
            }
            Error::InvalidField(_) | Error::InvalidStep(_) | Error::Parse(_) | Error::UnknownVariable(_) => EXIT_USAGE,
            _ => EXIT_MISMATCH,
        };
        Failure { code, message: e.to_string() }
    }
}

/// Output of a successful or mismatched run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub text: String,
}

fn sweep_range(state: &TowerState, from: i64, to_exclusive: i64) -> std::ops::Range<i64> {
    // a level can be swept once the step out of it exists
    from.max(0)..to_exclusive.min(state.level)
}

pub fn run_build(args: &BuildArgs) -> Result<(Certificate, Outcome), Failure> {
    let config = args.tower.config()?;
    let state = build(&config)?;
    let range = sweep_range(&state, 0, args.sweep_levels);
    let report = if range.is_empty() { None } else { Some(sweep(&state, range)?) };
    let cert = certify(&state, report.as_ref())?;
    let text = match args.out_format {
        OutFormat::Json => cert.to_json() + "\n",
        OutFormat::Txt => cert.to_text(),
        OutFormat::Csv => levels_csv(&cert),
    };
    let all_hold = cert.checks.iter().all(|c| c.holds) && report.as_ref().is_none_or(|r| r.passes);
    Ok((cert, Outcome { code: if all_hold { EXIT_OK } else { EXIT_MISMATCH }, text }))
}

pub fn levels_csv(cert: &Certificate) -> String {
    let opt = |v: Option<u64>| v.map_or(String::new(), |x| x.to_string());
    let mut out = String::from("level,m,q,m_upper,q_upper,c,c_prime,A,A_prime,lower_type,upper_type\n");
    for r in &cert.levels {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:?},{:?}\n",
            r.level,
            opt(r.m),
            opt(r.q),
            opt(r.m_upper),
            opt(r.q_upper),
            r.c,
            r.c_prime,
            r.a,
            r.a_prime,
            r.lower_type,
            r.upper_type
        ));
    }
    out
}

pub fn run_step_verify(args: &StepArgs) -> Result<Outcome, Failure> {
    if !is_prime(args.p) {
        return Err(Failure::usage(format!("p must be prime, got {}", args.p)));
    }
    if args.ratio == 0 || args.m == 0 || args.q == 0 {
        return Err(Failure::usage("ratio, m and q must be positive"));
    }
    if num_integer::gcd(args.m, args.q) != 1 {
        return Err(Failure::usage(format!("gcd(m, q) = {} must be 1", num_integer::gcd(args.m, args.q))));
    }
    let field = Field::prime(args.p)?;
    let pm1 = args.p as u64 - 1;
    let c_bar = args.ratio * pm1;
    let (flavor, frame) = match args.flavor {
        FlavorArg::A => (Flavor::TheoremA, synthetic_type1(&field, c_bar, args.prec)?),
        FlavorArg::B => (Flavor::TheoremB, synthetic_type2(&field, c_bar, args.prec).map_err(|e| Failure::usage(e.to_string()))?),
    };
    let predicted = predict(flavor, args.p, c_bar, args.m, args.q)?;
    let prec = args.prec;
    let opts = |s: &TransformStep| {
        let mut o = StepOptions::standard(&frame, s);
        o.prec = o.prec.min(prec);
        o
    };
    let computed = match step_any_alpha(&frame, flavor, args.m, args.q, opts) {
        Ok(o) => o.frame,
        Err(Error::FormulaMismatch(_)) => {
            let step = TransformStep::new(flavor, args.p, args.m, args.q, 1)?;
            apply_step(&frame, &step, &opts(&step))?.0
        }
        Err(e) => return Err(e.into()),
    };
    let (agrees, expected) = match predicted {
        Predicted::Type0 => (computed.ext_type == crate::frames::ExtType::Type0, "type 0".to_string()),
        Predicted::Typed { ext_type, c1 } => (
            computed.ext_type == ext_type && computed.jac_exp == c1,
            format!("{}, c1/(p-1) = {}", type_name(ext_type), fraction(c1, pm1)),
        ),
    };
    let got = match computed.ext_type {
        crate::frames::ExtType::Type0 => "type 0".to_string(),
        t => format!("{}, c1/(p-1) = {}", type_name(t), fraction(computed.jac_exp, pm1)),
    };
    let text = format!(
        "predicted: {expected}\ncomputed:  {got}\n{}\n",
        if agrees { "oracle agrees" } else { "MISMATCH" }
    );
    Ok(Outcome { code: if agrees { EXIT_OK } else { EXIT_MISMATCH }, text })
}

fn type_name(t: crate::frames::ExtType) -> &'static str {
    use crate::frames::ExtType::*;
    match t {
        Type0 => "type 0",
        Type1 => "type 1",
        Type2 => "type 2",
        Unclassified => "unclassified",
    }
}

fn fraction(n: u64, d: u64) -> String {
    crate::valuation::rat_string(&crate::valuation::rat(n as i64, d as i64))
}

pub fn run_sweep(args: &SweepArgs) -> Result<(SweepReport, Outcome), Failure> {
    let config = match &args.certificate {
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            Certificate::from_json(&raw).map_err(|e| Failure::usage(e.to_string()))?.config
        }
        None => args.tower.config()?,
    };
    if args.to < args.from {
        return Err(Failure::usage("--to must not be below --from"));
    }
    let state = build(&config)?;
    let range = sweep_range(&state, args.from, args.to + 1);
    if range.end <= args.to {
        return Err(Failure::usage(format!("the tower only reaches level {}, so level {} cannot be swept", state.level, args.to)));
    }
    let report = sweep(&state, range)?;
    let text = match args.out_format {
        OutFormat::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        _ => {
            let mut t = report.to_text();
            if !args.control {
                t = t.lines().filter(|l| !l.starts_with("control:")).map(|l| format!("{l}\n")).collect();
            }
            t
        }
    };
    let code = if report.passes { EXIT_OK } else { EXIT_MISMATCH };
    Ok((report, Outcome { code, text }))
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::usage(e.to_string())),
    }
}

/// Parses `args` and runs the command, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Build(a) => run_build(a).and_then(|(_, o)| emit(&o.text, a.out.as_ref()).map(|_| o.code)),
        Command::StepVerify(a) => run_step_verify(a).and_then(|o| emit(&o.text, None).map(|_| o.code)),
        Command::Sweep(a) => run_sweep(a).and_then(|(_, o)| emit(&o.text, None).map(|_| o.code)),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
