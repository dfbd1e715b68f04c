//! Monte Carlo rate curves and their CSV/JSON output.
//!
//! Trial `t` at SNR index `i` draws its block from its own ChaCha stream
//! seeded by `(seed, i, t)`, so curves do not depend on scheduling or on the
//! number of workers, and the OT sweep and the capacity baseline see the same
//! blocks at equal SNR indices.

pub mod cli;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sorted_gains, Model};
use crate::error::{Error, Result};
use crate::exec::{mean_and_stderr, substream_seed, Execution};
use crate::pairing::{optimal_pairing, PairGain};
use crate::powalloc::{allocate_block, ergodic_allocation, waterfill_capacity_bits};
use crate::rates::pair_rates;

pub const DEFAULT_TRIALS: usize = 100_000;
pub const CSV_HEADER: &str = "snr_db,mean_rate_bits,std_error,trials";
const CSV_DIGITS: usize = 9;
const MIN_ERGODIC_TRIALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Allocation {
    /// Budget `P/2` spent inside every block.
    #[default]
    PerBlock,
    /// One multiplier across blocks; `P/2` holds on average.
    Ergodic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub model: Model,
    pub snr_db_points: Vec<f64>,
    pub trials: usize,
    pub allocation: Allocation,
    pub seed: u64,
    pub exec: Execution,
}

impl SweepConfig {
    pub fn new(model: Model, snr_db_points: Vec<f64>, trials: usize, seed: u64) -> Self {
        SweepConfig {
            model,
            snr_db_points,
            trials,
            allocation: Allocation::PerBlock,
            seed,
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.allocation == Allocation::Ergodic && self.trials < MIN_ERGODIC_TRIALS {
            return Err(Error::InvalidInput(format!(
                "ergodic allocation needs at least {MIN_ERGODIC_TRIALS} trials"
            )));
        }
        if self.snr_db_points.is_empty() {
            return Err(Error::InvalidInput("no SNR points".into()));
        }
        if self.snr_db_points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("SNR points must be finite".into()));
        }
        if self.snr_db_points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "SNR points must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub snr_db: f64,
    pub mean_rate_bits: f64,
    pub std_error: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub points: Vec<CurvePoint>,
}

impl RateCurve {
    pub fn at(&self, snr_db: f64) -> Option<&CurvePoint> {
        self.points
            .iter()
            .find(|p| (p.snr_db - snr_db).abs() < 1e-9)
    }
}

fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Sorted gains of trial `trial` at SNR index `snr_idx`.
pub fn trial_gains(model: Model, seed: u64, snr_idx: usize, trial: usize) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, snr_idx as u64, trial as u64));
    sorted_gains(model, &mut rng)
}

fn trial_pairs(model: Model, seed: u64, snr_idx: usize, trial: usize) -> Result<Vec<PairGain>> {
    let g = trial_gains(model, seed, snr_idx, trial)?;
    Ok(optimal_pairing(&g)?.pair_gains(&g))
}

/// Per-block OT rate of one block at total power `p`, with ε = 0.
pub fn block_ot_rate(pairs: &[PairGain], p: f64) -> Result<f64> {
    let alloc = allocate_block(pairs, p / 2.0)?;
    Ok(pair_rates(pairs, &alloc, 0.0)?.total_bits)
}

fn first_error<T>(xs: Vec<Result<T>>) -> Result<Vec<T>> {
    xs.into_iter().collect()
}

fn ot_point(cfg: &SweepConfig, idx: usize, snr_db: f64) -> Result<CurvePoint> {
    let p = db_to_power(snr_db);
    let (mean, se) = match cfg.allocation {
        Allocation::PerBlock => {
            let rates = first_error(cfg.exec.map(cfg.trials, |t| {
                block_ot_rate(&trial_pairs(cfg.model, cfg.seed, idx, t)?, p)
            }))?;
            mean_and_stderr(&rates)
        }
        Allocation::Ergodic => {
            let states = first_error(
                cfg.exec
                    .map(cfg.trials, |t| trial_pairs(cfg.model, cfg.seed, idx, t)),
            )?;
            let e = ergodic_allocation(&states, p / 2.0, cfg.exec)?;
            (e.mean_rate_bits, e.rate_std_error)
        }
    };
    Ok(CurvePoint {
        snr_db,
        mean_rate_bits: mean,
        std_error: se,
        trials: cfg.trials,
    })
}

fn baseline_point(cfg: &SweepConfig, idx: usize, snr_db: f64) -> Result<CurvePoint> {
    let p = db_to_power(snr_db);
    let caps = first_error(cfg.exec.map(cfg.trials, |t| {
        Ok(waterfill_capacity_bits(
            &trial_gains(cfg.model, cfg.seed, idx, t)?,
            p,
        ))
    }))?;
    let (mean, se) = mean_and_stderr(&caps);
    Ok(CurvePoint {
        snr_db,
        mean_rate_bits: mean,
        std_error: se,
        trials: cfg.trials,
    })
}

fn run_points(
    cfg: &SweepConfig,
    point: fn(&SweepConfig, usize, f64) -> Result<CurvePoint>,
    mut on_point: impl FnMut(&CurvePoint) -> Result<()>,
) -> Result<RateCurve> {
    cfg.validate()?;
    let mut curve = RateCurve::default();
    for (i, &snr) in cfg.snr_db_points.iter().enumerate() {
        let pt = point(cfg, i, snr)?;
        on_point(&pt)?;
        curve.points.push(pt);
    }
    Ok(curve)
}

/// Mean OT rate per SNR point.
pub fn run_sweep(cfg: &SweepConfig) -> Result<RateCurve> {
    run_points(cfg, ot_point, |_| Ok(()))
}

/// [`run_sweep`] reporting each point as soon as it is done.
pub fn run_sweep_with(
    cfg: &SweepConfig,
    on_point: impl FnMut(&CurvePoint) -> Result<()>,
) -> Result<RateCurve> {
    run_points(cfg, ot_point, on_point)
}

/// Water-filled CSIT capacity without the OT constraint, over the same blocks.
pub fn run_capacity_baseline(cfg: &SweepConfig) -> Result<RateCurve> {
    run_points(cfg, baseline_point, |_| Ok(()))
}

pub fn run_capacity_baseline_with(
    cfg: &SweepConfig,
    on_point: impl FnMut(&CurvePoint) -> Result<()>,
) -> Result<RateCurve> {
    run_points(cfg, baseline_point, on_point)
}

/// Decimal rendering of `v` with `digits` significant digits.
pub fn format_sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding can carry into a new leading digit (9.99… → 10.0…)
    let rounded: f64 = s.parse().unwrap_or(v);
    if decimals > 0 && rounded.abs().log10().floor() as i64 > magnitude {
        return format!("{v:.prec$}", prec = decimals - 1);
    }
    s
}

pub fn csv_row(p: &CurvePoint) -> String {
    format!(
        "{},{},{},{}",
        format_sig(p.snr_db, CSV_DIGITS),
        format_sig(p.mean_rate_bits, CSV_DIGITS),
        format_sig(p.std_error, CSV_DIGITS),
        p.trials
    )
}

/// Streams a curve as CSV, flushing after every row.
pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        out.flush()?;
        Ok(CsvWriter { out })
    }

    pub fn write_point(&mut self, p: &CurvePoint) -> Result<()> {
        writeln!(self.out, "{}", csv_row(p))?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn curve_to_csv(curve: &RateCurve) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for p in &curve.points {
        s.push_str(&csv_row(p));
        s.push('\n');
    }
    s
}

#[derive(Debug, Serialize)]
struct CurveDocument<'a> {
    model: String,
    kind: &'a str,
    allocation: Allocation,
    seed: u64,
    points: Vec<JsonPoint>,
}

#[derive(Debug, Serialize)]
struct JsonPoint {
    snr_db: String,
    mean_rate_bits: String,
    std_error: String,
    trials: usize,
}

/// JSON rendering with the same digits as the CSV.
pub fn curve_to_json(cfg: &SweepConfig, kind: &str, curve: &RateCurve) -> String {
    let doc = CurveDocument {
        model: cfg.model.label(),
        kind,
        allocation: cfg.allocation,
        seed: cfg.seed,
        points: curve
            .points
            .iter()
            .map(|p| JsonPoint {
                snr_db: format_sig(p.snr_db, CSV_DIGITS),
                mean_rate_bits: format_sig(p.mean_rate_bits, CSV_DIGITS),
                std_error: format_sig(p.std_error, CSV_DIGITS),
                trials: p.trials,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("curve serializes");
    s.push('\n');
    s
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_snr_points(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("cannot parse SNR points {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let pts = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !step.is_finite() || step <= 0.0 || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<f64>>>()?
    };
    if pts.is_empty() || pts.iter().any(|x| !x.is_finite()) {
        return Err(bad());
    }
    Ok(pts)
}
