//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on a usage error, 2 when a computation
//! fails (SVD or multiplier search not converging, I/O).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{
    curve_to_json, parse_snr_points, run_capacity_baseline_with, run_sweep_with, Allocation,
    CsvWriter, CurvePoint, RateCurve, SweepConfig, DEFAULT_TRIALS,
};
use crate::channel::{Model, DEFAULT_BLOCK_LENGTH};
use crate::error::{Error, Result};
use crate::exec::{substream_seed, Execution};
use crate::pairing::{brute_force_best_pairing, optimal_pairing, Choice, PairGain};
use crate::powalloc::allocate_block;
use crate::protocol::{
    audit_alice_privacy_with, audit_bob_secrecy, random_file, run_session, BobBehavior,
    SessionConfig,
};
use crate::rates::{asymptotic_constant, pair_rates, AsymptoticModel};

#[derive(Debug, Parser)]
#[command(
    name = "fading-ot",
    version,
    about = "Oblivious transfer over quasi-static fading channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean OT rate versus SNR.
    Sweep(SweepArgs),
    /// Water-filled CSIT capacity versus SNR over the same blocks.
    Baseline(BaselineArgs),
    /// Best-with-worst pairing of given gains, optionally against the exhaustive search.
    Pairing(PairingArgs),
    /// Optimal power split over given (strong, weak) pairs.
    Alloc(AllocArgs),
    /// One OT session; prints the transcript as JSON.
    Protocol(ProtocolArgs),
    /// Alice-side privacy audit.
    Audit(AuditArgs),
    /// High-SNR limit of the expected OT rate.
    Asymptote(AsymptoteArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelKind {
    Ofdm,
    Mimo,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AllocationArg {
    PerBlock,
    Ergodic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AsymptoteModel {
    Ofdm2,
    Mimo2x2,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "ofdm")]
    model: ModelKind,
    /// Number of OFDM subchannels (2N).
    #[arg(long)]
    subchannels: Option<usize>,
    /// Transmit antennas (2N).
    #[arg(long)]
    na: Option<usize>,
    /// Receive antennas.
    #[arg(long)]
    nb: Option<usize>,
}

impl ModelArgs {
    fn model(&self) -> Result<Model> {
        let m = match self.model {
            ModelKind::Ofdm => {
                if self.na.is_some() || self.nb.is_some() {
                    return Err(Error::InvalidInput(
                        "--na/--nb only apply to --model mimo".into(),
                    ));
                }
                Model::Ofdm {
                    subchannels: self.subchannels.unwrap_or(2),
                }
            }
            ModelKind::Mimo => {
                if self.subchannels.is_some() {
                    return Err(Error::InvalidInput(
                        "--subchannels only applies to --model ofdm".into(),
                    ));
                }
                Model::Mimo {
                    n_a: self.na.unwrap_or(2),
                    n_b: self.nb.unwrap_or(2),
                }
            }
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `start:stop:step` or a comma-separated list, in dB.
    #[arg(long = "snr-db")]
    snr_db: String,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    curve: CurveArgs,
    #[arg(long, value_enum, default_value = "per-block")]
    allocation: AllocationArg,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[command(flatten)]
    curve: CurveArgs,
}

#[derive(Debug, Args)]
struct PairingArgs {
    /// Comma-separated amplitude gains of the 2N subchannels.
    #[arg(long)]
    gains: String,
    #[arg(long = "snr-db", default_value_t = 20.0)]
    snr_db: f64,
    /// Also run the exhaustive pairing/power search.
    #[arg(long)]
    oracle: bool,
    /// Grid step of the exhaustive search, as a fraction of the budget.
    #[arg(long, default_value_t = 0.01)]
    resolution: f64,
}

#[derive(Debug, Args)]
struct AllocArgs {
    /// Pairs as `strong:weak`, comma-separated.
    #[arg(long)]
    pairs: String,
    #[arg(long = "snr-db", default_value_t = 20.0)]
    snr_db: f64,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
}

#[derive(Debug, Args)]
struct ProtocolArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "snr-db", default_value_t = 20.0)]
    snr_db: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    choice: u8,
    #[arg(long = "block-length", default_value_t = DEFAULT_BLOCK_LENGTH)]
    block_length: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "snr-db", default_value_t = 20.0)]
    snr_db: f64,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Audit a Bob who announces gains in γ order (a deliberate leak).
    #[arg(long)]
    planted_leak: bool,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct AsymptoteArgs {
    #[arg(long, value_enum)]
    model: AsymptoteModel,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SvdNoConvergence { .. } | Error::BracketFailure(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Sweep(a) => {
            let allocation = match a.allocation {
                AllocationArg::PerBlock => Allocation::PerBlock,
                AllocationArg::Ergodic => Allocation::Ergodic,
            };
            curve_command(&a.curve, allocation, "ot_rate", out)
        }
        Command::Baseline(a) => curve_command(&a.curve, Allocation::PerBlock, "csit_capacity", out),
        Command::Pairing(a) => pairing_command(&a, out),
        Command::Alloc(a) => alloc_command(&a, out),
        Command::Protocol(a) => protocol_command(&a, out),
        Command::Audit(a) => audit_command(&a, out),
        Command::Asymptote(a) => {
            let m = match a.model {
                AsymptoteModel::Ofdm2 => AsymptoticModel::Ofdm2,
                AsymptoteModel::Mimo2x2 => AsymptoticModel::Mimo2x2,
            };
            writeln!(out, "{:.4}", asymptotic_constant(m))?;
            Ok(())
        }
    }
}

fn curve_command(
    a: &CurveArgs,
    allocation: Allocation,
    kind: &str,
    out: &mut dyn Write,
) -> Result<()> {
    let cfg = SweepConfig {
        model: a.model.model()?,
        snr_db_points: parse_snr_points(&a.snr_db)?,
        trials: a.trials,
        allocation,
        seed: a.seed,
        exec: exec(a.sequential),
    };
    cfg.validate()?;
    let run = |on_point: &mut dyn FnMut(&CurvePoint) -> Result<()>| -> Result<RateCurve> {
        if kind == "csit_capacity" {
            run_capacity_baseline_with(&cfg, on_point)
        } else {
            run_sweep_with(&cfg, on_point)
        }
    };
    match (a.format, &a.out) {
        (Format::Csv, Some(path)) => {
            let mut w = CsvWriter::new(BufWriter::new(File::create(path)?))?;
            run(&mut |p| w.write_point(p))?;
        }
        (Format::Csv, None) => {
            let mut w = CsvWriter::new(&mut *out)?;
            run(&mut |p| w.write_point(p))?;
        }
        (Format::Json, path) => {
            let curve = run(&mut |_| Ok(()))?;
            let text = curve_to_json(&cfg, kind, &curve);
            match path {
                Some(p) => std::fs::write(p, text)?,
                None => out.write_all(text.as_bytes())?,
            }
        }
    }
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("not a number: {x:?}")))
        })
        .collect()
}

fn budget_for(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0) / 2.0
}

fn pairing_command(a: &PairingArgs, out: &mut dyn Write) -> Result<()> {
    let gains = parse_list(&a.gains)?;
    let budget = budget_for(a.snr_db);
    let p = optimal_pairing(&gains)?;
    let pg = p.pair_gains(&gains);
    let alloc = allocate_block(&pg, budget)?;
    let rates = pair_rates(&pg, &alloc, 0.0)?;
    let mut doc = json!({
        "pairing": p,
        "pair_gains": pg,
        "allocation": alloc,
        "rate_bits": rates.total_bits,
    });
    if a.oracle {
        let o = brute_force_best_pairing(&gains, budget, a.resolution, Execution::Parallel)?;
        doc["oracle"] = json!({
            "pairing": o.pairing,
            "per_pair_power": o.per_pair_power,
            "rate_bits": o.rate_bits,
            "grid_rate_bits": o.grid_rate_bits,
            "gap_bits": o.rate_bits - rates.total_bits,
        });
    }
    writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json"))?;
    Ok(())
}

fn alloc_command(a: &AllocArgs, out: &mut dyn Write) -> Result<()> {
    let pairs = a
        .pairs
        .split(',')
        .map(|item| {
            let bad = || Error::InvalidInput(format!("expected strong:weak, got {item:?}"));
            let (s, w) = item.split_once(':').ok_or_else(bad)?;
            let strong = s.trim().parse::<f64>().map_err(|_| bad())?;
            let weak = w.trim().parse::<f64>().map_err(|_| bad())?;
            Ok(PairGain { strong, weak })
        })
        .collect::<Result<Vec<_>>>()?;
    let alloc = allocate_block(&pairs, budget_for(a.snr_db))?;
    let rates = pair_rates(&pairs, &alloc, a.epsilon)?;
    let doc = json!({ "allocation": alloc, "rates": rates });
    writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json"))?;
    Ok(())
}

fn protocol_command(a: &ProtocolArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = SessionConfig {
        model: a.model.model()?,
        snr_db: a.snr_db,
        epsilon: a.epsilon,
        block_length: a.block_length,
        seed: a.seed,
    };
    cfg.validate()?;
    let c = Choice::from_bit(a.choice == 1);
    let need: usize = crate::protocol::announce(&cfg, c, BobBehavior::Compliant)?
        .lengths
        .iter()
        .sum();
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(a.seed, 0xF11E, 0));
    let k0 = random_file(need, &mut rng);
    let k1 = random_file(need, &mut rng);
    let r = run_session(&cfg, &k0, &k1, c)?;
    let wanted = if c == Choice::Zero { &k0 } else { &k1 };
    let doc = json!({
        "config": cfg,
        "choice": a.choice,
        "file_bits": need,
        "decode_success": r.decode_success,
        "decoded_matches_request": r.decoded == wanted[..need],
        "leakage_bits_other_file": audit_bob_secrecy(&r),
        "rate_bits_per_use": r.rate_bits_per_use,
        "transcript": r.transcript,
    });
    let text = serde_json::to_string_pretty(&doc).expect("json") + "\n";
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn audit_command(a: &AuditArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = SessionConfig::new(a.model.model()?, a.snr_db, a.seed);
    let behavior = if a.planted_leak {
        BobBehavior::GainsInGammaOrder
    } else {
        BobBehavior::Compliant
    };
    let rep = audit_alice_privacy_with(&cfg, a.trials, behavior, exec(a.sequential))?;
    writeln!(out, "{}", serde_json::to_string_pretty(&rep).expect("json"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut o = Vec::new();
        let mut e = Vec::new();
        let code = run(
            std::iter::once("fading-ot").chain(args.iter().copied()),
            &mut o,
            &mut e,
        );
        (
            code,
            String::from_utf8(o).unwrap(),
            String::from_utf8(e).unwrap(),
        )
    }

    #[test]
    fn asymptote_prints_constant() {
        let (code, out, _) = call(&["asymptote", "--model", "mimo2x2"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "3.4427");
        let (_, out, _) = call(&["asymptote", "--model", "ofdm2"]);
        assert_eq!(out.trim(), "2.0000");
    }

    #[test]
    fn odd_antenna_count_is_usage_error() {
        let (code, _, err) = call(&[
            "sweep", "--model", "mimo", "--na", "3", "--snr-db", "0", "--trials", "10",
        ]);
        assert_eq!(code, 1);
        assert!(err.contains("even"));
    }

    #[test]
    fn bad_flags_are_usage_errors() {
        assert_eq!(call(&["sweep", "--bogus"]).0, 1);
        assert_eq!(call(&["sweep", "--snr-db", "0:1"]).0, 1);
        assert_eq!(
            call(&["sweep", "--model", "ofdm", "--na", "2", "--snr-db", "0"]).0,
            1
        );
        assert_eq!(call(&["protocol", "--choice", "2"]).0, 1);
        assert_eq!(call(&[]).0, 1);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn sweep_to_stdout() {
        let (code, out, _) = call(&[
            "sweep", "--snr-db", "0:10:5", "--trials", "200", "--seed", "3",
        ]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "snr_db,mean_rate_bits,std_error,trials");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,"));
        assert!(lines[3].ends_with(",200"));
    }

    #[test]
    fn json_sweep() {
        let (code, out, _) = call(&[
            "baseline", "--snr-db", "10,20", "--trials", "100", "--format", "json",
        ]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 2);
        assert_eq!(v["kind"], "csit_capacity");
    }

    #[test]
    fn pairing_and_alloc_commands() {
        let (code, out, _) = call(&[
            "pairing",
            "--gains",
            "0.3,2.0,1.1,0.7",
            "--oracle",
            "--resolution",
            "0.05",
        ]);
        assert_eq!(code, 0, "{out}");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["pairing"]["strong"], json!([1, 2]));
        assert_eq!(v["pairing"]["weak"], json!([0, 3]));
        assert!(v["oracle"]["gap_bits"].as_f64().unwrap() <= 1e-4);

        let (code, out, _) = call(&["alloc", "--pairs", "1:0", "--snr-db", "6.020599913279624"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["allocation"]["per_pair"][0].as_f64().unwrap() - 2.0).abs() < 1e-9);

        assert_eq!(call(&["alloc", "--pairs", "1;0"]).0, 1);
        assert_eq!(call(&["pairing", "--gains", "1,2,3"]).0, 1);
    }

    #[test]
    fn protocol_command_decodes() {
        let (code, out, _) = call(&[
            "protocol", "--model", "mimo", "--na", "4", "--nb", "2", "--choice", "1", "--seed", "5",
        ]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["decode_success"], true);
        assert_eq!(v["decoded_matches_request"], true);
        assert_eq!(v["leakage_bits_other_file"], 0.0);
    }

    #[test]
    fn audit_command_runs() {
        let (code, out, _) = call(&["audit", "--trials", "10000", "--planted-leak"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["violation"], true);
        assert_eq!(call(&["audit", "--trials", "10"]).0, 1);
    }
}
