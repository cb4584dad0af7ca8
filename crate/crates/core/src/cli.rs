//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 when a
//! `simulate` session aborts because Eve was detected.
//!
//! Output schemas (version 1):
//!
//! * `curve`, CSV: `I,c,d,I0,s`
//! * `batch`, CSV: `trial,detected,control_runs,message_runs,bits_ok`
//! * `simulate`, CSV: `run,mode,i,j,bell,bit_index,decoded`
//!
//! The JSON form of each command carries the same rows as an array of
//! objects (`simulate --format json` emits the full transcript).

use crate::adversary::AttackSpec;
use crate::analysis::{self, Priors, SecurityPoint};
use crate::channel::loopback_pair;
use crate::montecarlo::{aggregate, run_trials, BatchConfig};
use crate::protocol::{run_session, run_session_over, Decoded, Mode, ProtocolConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DETECTED: i32 = 3;

pub const CURVE_HEADER: &str = "I,c,d,I0,s";
pub const BATCH_HEADER: &str = "trial,detected,control_runs,message_runs,bits_ok";
pub const SIMULATE_HEADER: &str = "run,mode,i,j,bell,bit_index,decoded";

#[derive(Debug, Parser)]
#[command(
    name = "pingpong",
    version,
    about = "Ping-pong protocol simulator and security calculator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one seeded session and report the transcript.
    Simulate(SimulateArgs),
    /// Run many seeded sessions and emit one row per trial.
    Batch(BatchArgs),
    /// Evaluate closed-form security quantities.
    Analyze(AnalyzeArgs),
    /// Emit survival-probability curves over eavesdropped information.
    Curve(CurveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Transport {
    Memory,
    Tcp,
}

#[derive(Debug, Args)]
struct Common {
    /// Control-run probability.
    #[arg(long = "c", default_value_t = 0.5)]
    c: f64,
    #[arg(long, value_parser = parse_mode, default_value = "direct")]
    mode: Mode,
    /// none | full | angle:<radians>
    #[arg(long, value_parser = parse_attack, default_value = "none")]
    attack: AttackSpec,
    /// Probability of a 0 bit for generated messages and keys.
    #[arg(long, default_value_t = 0.5)]
    p0: f64,
    #[arg(long, env = "PINGPONG_SEED", default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n_bits: Option<usize>,
    /// Plaintext as a string of 0s and 1s (direct mode).
    #[arg(long, value_parser = parse_bits)]
    message: Option<Bits>,
    #[arg(long, value_enum, default_value = "memory")]
    transport: Transport,
    /// Loopback port for `--transport tcp` (0 picks a free port).
    #[arg(long, default_value_t = 0)]
    port: u16,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct BatchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 16)]
    n_bits: usize,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// s(I, c, d): survival while eavesdropping I bits.
    #[arg(long)]
    s_total: bool,
    /// s(c, d): survival per message run.
    #[arg(long)]
    s_message: bool,
    /// I0(d) for the given priors.
    #[arg(long)]
    info: bool,
    /// d(I0) on [0, 1/2].
    #[arg(long)]
    invert: bool,
    /// Eigenvalues of Eve's post-coding state.
    #[arg(long)]
    eigen: bool,
    /// Transmission rate r = 1 - c.
    #[arg(long)]
    rate: bool,
    /// BB84 comparison note.
    #[arg(long)]
    bb84: bool,
    #[arg(long = "I", default_value_t = 1.0)]
    info_bits: f64,
    #[arg(long = "c", default_value_t = 0.5)]
    c: f64,
    #[arg(long = "d", default_value_t = 0.5)]
    d: f64,
    #[arg(long = "I0", default_value_t = 1.0)]
    i0: f64,
    #[arg(long, default_value_t = 0.5)]
    p0: f64,
    /// Decimal places in text output.
    #[arg(long, default_value_t = 4)]
    precision: usize,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[arg(long = "c", default_value_t = 0.5)]
    c: f64,
    /// Comma-separated detection probabilities in (0, 1/2].
    #[arg(long = "d", value_delimiter = ',', default_value = "0.1,0.25,0.5")]
    d: Vec<f64>,
    #[arg(long = "I-max", default_value_t = 20.0)]
    i_max: f64,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_attack(s: &str) -> Result<AttackSpec, String> {
    s.parse()
        .map_err(|e: crate::adversary::AdversaryError| e.to_string())
}

#[derive(Debug, Clone)]
struct Bits(Vec<u8>);

fn parse_bits(s: &str) -> Result<Bits, String> {
    if s.is_empty() {
        return Err("message must not be empty".into());
    }
    s.chars()
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(format!("'{other}' is not a bit")),
        })
        .collect::<Result<_, _>>()
        .map(Bits)
}

/// Failure of a command after argument parsing.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<analysis::AnalysisError> for Failure {
    fn from(e: analysis::AnalysisError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn usage<E: ToString>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime<E: ToString>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{rendered}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, stdout),
        Command::Batch(a) => batch(a, stdout, stderr),
        Command::Analyze(a) => analyze(a, stdout),
        Command::Curve(a) => curve(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

/// Runs `body` against the `--out` file or stdout.
fn with_output<F>(out: &Option<PathBuf>, stdout: &mut dyn Write, body: F) -> Result<(), Failure>
where
    F: FnOnce(&mut dyn Write) -> Result<(), Failure>,
{
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| runtime(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => {
            body(stdout)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn write_csv<S: Serialize>(w: &mut dyn Write, header: &str, rows: &[S]) -> Result<(), Failure> {
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    csv.write_record(header.split(','))?;
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}

fn write_json<S: Serialize + ?Sized>(w: &mut dyn Write, value: &S) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(runtime)?;
    writeln!(w)?;
    Ok(())
}

fn priors(p0: f64) -> Result<Priors, Failure> {
    Priors::from_p0(p0).map_err(usage)
}

fn simulate(a: SimulateArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let common = a.common;
    let mut config = match (a.message, common.mode) {
        (Some(Bits(msg)), Mode::Direct) => {
            if a.n_bits.is_some_and(|n| n != msg.len()) {
                return Err(usage("--n-bits does not match the message length"));
            }
            ProtocolConfig::direct(common.c, msg, common.seed)
        }
        (Some(_), Mode::Key) => return Err(usage("--message is only valid in direct mode")),
        (None, mode) => ProtocolConfig::new(common.c, a.n_bits.unwrap_or(16), mode, common.seed),
    };
    config.priors = priors(common.p0)?;
    config.validate().map_err(usage)?;
    if config.c >= 1.0 {
        return Err(usage("--c must be below 1 for a session to finish"));
    }
    let attack = Some(common.attack);
    let transcript = match a.transport {
        Transport::Memory => run_session(config, attack),
        Transport::Tcp => {
            let (alice, bob) = loopback_pair(a.port)?;
            run_session_over(config, attack, Box::new(alice), Box::new(bob))
        }
    }
    .map_err(runtime)?;

    with_output(&common.out, stdout, |w| match a.format {
        Format::Json => write_json(w, &transcript),
        Format::Csv => {
            writeln!(w, "{SIMULATE_HEADER}")?;
            for e in &transcript.events {
                let opt = |v: Option<u8>| v.map(|b| b.to_string()).unwrap_or_default();
                let decoded = match e.decoded {
                    Some(Decoded::Bit(b)) => b.to_string(),
                    Some(Decoded::Invalid) => "invalid".into(),
                    None => String::new(),
                };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    e.run_index,
                    e.run_mode,
                    opt(e.control_i),
                    opt(e.control_j),
                    e.bell_outcome.map(|b| b.to_string()).unwrap_or_default(),
                    e.bit_index.map(|b| b.to_string()).unwrap_or_default(),
                    decoded,
                )?;
            }
            Ok(())
        }
        Format::Text => {
            let message: String = transcript
                .message_bits
                .iter()
                .map(|b| if *b == 0 { '0' } else { '1' })
                .collect();
            writeln!(w, "mode={}", transcript.mode)?;
            writeln!(w, "c={}", common.c)?;
            writeln!(w, "attack={}", common.attack)?;
            writeln!(w, "seed={}", common.seed)?;
            writeln!(w, "message={message}")?;
            writeln!(w, "decoded={}", transcript.decoded_string())?;
            writeln!(w, "message_runs={}", transcript.message_runs)?;
            writeln!(w, "control_runs={}", transcript.control_runs)?;
            writeln!(w, "invalid_decodes={}", transcript.invalid_decodes)?;
            writeln!(w, "aborted={}", transcript.aborted)?;
            if let Some(run) = transcript.detected_at_run {
                writeln!(w, "detected_at_run={run}")?;
            }
            if !transcript.eve_log.is_empty() {
                writeln!(w, "eve_extractions={}", transcript.eve_log.len())?;
            }
            Ok(())
        }
    })?;
    Ok(if transcript.aborted {
        EXIT_DETECTED
    } else {
        EXIT_OK
    })
}

fn batch(a: BatchArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    let common = a.common;
    let mut base = ProtocolConfig::new(common.c, a.n_bits, common.mode, 0);
    base.priors = priors(common.p0)?;
    base.validate().map_err(usage)?;
    if base.c >= 1.0 {
        return Err(usage("--c must be below 1 for sessions to finish"));
    }
    let config = BatchConfig {
        base,
        attack: common.attack,
        trials: a.trials,
        seed_base: common.seed,
        parallelism: a.parallelism,
    };
    let rows = run_trials(&config).map_err(usage)?;
    let stats = aggregate(&rows);
    with_output(&common.out, stdout, |w| match a.format {
        Format::Json => write_json(w, &rows),
        Format::Csv | Format::Text => write_csv(w, BATCH_HEADER, &rows),
    })?;
    writeln!(
        stderr,
        "trials={} detected_sessions={} empirical_d={:.6} stderr={:.6} decode_error_rate={:.6}",
        stats.trials,
        stats.detected_sessions,
        stats.empirical_d,
        stats.empirical_d_stderr,
        stats.decode_error_rate
    )?;
    Ok(EXIT_OK)
}

fn analyze(a: AnalyzeArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let mut values: Vec<(&str, f64)> = Vec::new();
    let mut notes: Vec<(&str, String)> = Vec::new();
    let pri = priors(a.p0)?;
    if a.s_total {
        values.push(("s_total", analysis::survival_total(a.info_bits, a.c, a.d)?));
    }
    if a.s_message {
        values.push(("s_message", analysis::survival_per_message(a.c, a.d)?));
    }
    if a.info {
        values.push(("I0", analysis::max_info(a.d, pri)?));
    }
    if a.invert {
        values.push(("d", analysis::invert_info(a.i0)?));
    }
    if a.eigen {
        let (l1, l2) = analysis::eigenvalues(a.d, pri)?;
        values.push(("lambda1", l1));
        values.push(("lambda2", l2));
    }
    if a.rate {
        values.push(("r", analysis::transmission_rate(a.c)?));
    }
    if a.bb84 {
        values.push(("bb84_d", analysis::bb84_comparison()));
        notes.push(("bb84_note", analysis::bb84_annotation()));
    }
    if values.is_empty() {
        return Err(usage(
            "select at least one quantity (--s-total, --s-message, --info, --invert, --eigen, --rate, --bb84)",
        ));
    }
    match a.format {
        Format::Json => {
            let mut obj = serde_json::Map::new();
            for (k, v) in &values {
                obj.insert((*k).into(), serde_json::json!(v));
            }
            for (k, v) in &notes {
                obj.insert((*k).into(), serde_json::json!(v));
            }
            write_json(stdout, &obj)?;
        }
        Format::Csv => {
            writeln!(stdout, "quantity,value")?;
            for (k, v) in &values {
                writeln!(stdout, "{k},{v}")?;
            }
        }
        Format::Text => {
            let p = a.precision;
            if values.len() == 1 && notes.is_empty() {
                writeln!(stdout, "{:.p$}", values[0].1)?;
            } else {
                for (k, v) in &values {
                    writeln!(stdout, "{k}={v:.p$}")?;
                }
                for (k, v) in &notes {
                    writeln!(stdout, "{k}={v}")?;
                }
            }
        }
    }
    stdout.flush()?;
    Ok(EXIT_OK)
}

fn curve(a: CurveArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let points: Vec<SecurityPoint> = analysis::success_curve(a.c, &a.d, a.i_max, a.steps)?;
    with_output(&a.out, stdout, |w| match a.format {
        Format::Json => write_json(w, &points),
        Format::Csv | Format::Text => write_csv(w, CURVE_HEADER, &points),
    })?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("pingpong").chain(args.iter().copied());
        let code = run_cli(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn simulate_faithful() {
        let (code, out, _) = run(&[
            "simulate",
            "--c",
            "0",
            "--n-bits",
            "5",
            "--message",
            "10110",
            "--seed",
            "1",
            "--attack",
            "none",
        ]);
        assert_eq!(code, 0);
        assert!(out.contains("decoded=10110"), "{out}");
    }

    #[test]
    fn analyze_character_survival() {
        let (code, out, _) = run(&[
            "analyze",
            "--s-total",
            "--I",
            "8",
            "--c",
            "0.5",
            "--d",
            "0.5",
        ]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "0.0390");
    }

    #[test]
    fn analyze_multiple_and_json() {
        let (code, out, _) = run(&["analyze", "--rate", "--bb84", "--c", "0.25"]);
        assert_eq!(code, 0);
        assert!(out.contains("r=0.7500"));
        assert!(out.contains("bb84_d=0.2500"));
        let (code, out, _) = run(&["analyze", "--invert", "--I0", "1", "--format", "json"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["d"], 0.5);
    }

    #[test]
    fn usage_errors_exit_two() {
        let (code, _, err) = run(&["simulate", "--bogus"]);
        assert_eq!(code, 2);
        assert!(!err.is_empty());
        let (code, _, _) = run(&["analyze"]);
        assert_eq!(code, 2);
        let (code, _, _) = run(&["analyze", "--s-total", "--d", "0"]);
        assert_eq!(code, 2);
        let (code, _, _) = run(&["simulate", "--attack", "angle:2"]);
        assert_eq!(code, 2);
        let (code, _, _) = run(&["simulate", "--message", "1021"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("simulate"));
    }

    #[test]
    fn detected_session_exits_three() {
        // with c = 0.9 and a full-information attack, some seed aborts quickly
        let aborted = (0..20).any(|seed| {
            let s = seed.to_string();
            let (code, out, _) = run(&[
                "simulate", "--c", "0.9", "--n-bits", "32", "--attack", "full", "--seed", &s,
            ]);
            code == 3 && out.contains("aborted=true")
        });
        assert!(aborted);
    }
}
