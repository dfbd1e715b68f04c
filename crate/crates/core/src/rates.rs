//! Secrecy-rate arithmetic, high-SNR constants and slope estimation.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::RateCurve;
use crate::pairing::PairGain;
use crate::powalloc::PowerAllocation;

/// `log₂(1+snr_bob) − log₂(1+snr_eve)`, clamped at zero.
pub fn secrecy_capacity(snr_bob: f64, snr_eve: f64) -> f64 {
    if snr_eve >= snr_bob {
        return 0.0;
    }
    ((snr_bob.ln_1p() - snr_eve.ln_1p()) / LN_2).max(0.0)
}

/// Shannon capacity `log₂(1+snr)` of one subchannel.
pub fn capacity(snr: f64) -> f64 {
    snr.max(0.0).ln_1p() / LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    /// `R_l`, after subtracting ε and flooring at zero.
    pub per_pair_bits: Vec<f64>,
    pub total_bits: f64,
    pub epsilon: f64,
    /// Per-pair secrecy capacity before the ε back-off.
    pub secrecy_capacity_bits: Vec<f64>,
}

impl RateReport {
    /// Secret bits carried by pair `l` in a block of `n` uses.
    pub fn secret_lengths(&self, n: usize) -> Vec<usize> {
        self.per_pair_bits
            .iter()
            .map(|&r| (n as f64 * r).floor() as usize)
            .collect()
    }
}

pub fn pair_rates(pairs: &[PairGain], alloc: &PowerAllocation, epsilon: f64) -> Result<RateReport> {
    if alloc.per_pair.len() != pairs.len() {
        return Err(Error::LengthMismatch {
            expected: pairs.len(),
            got: alloc.per_pair.len(),
        });
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidInput(format!(
            "epsilon must be ≥ 0, got {epsilon}"
        )));
    }
    let secrecy: Vec<f64> = pairs
        .iter()
        .zip(&alloc.per_pair)
        .map(|(g, &p)| {
            if p <= 0.0 {
                0.0
            } else {
                secrecy_capacity(p * g.strong * g.strong, p * g.weak * g.weak)
            }
        })
        .collect();
    let per_pair_bits: Vec<f64> = secrecy.iter().map(|&c| (c - epsilon).max(0.0)).collect();
    Ok(RateReport {
        total_bits: per_pair_bits.iter().sum(),
        per_pair_bits,
        epsilon,
        secrecy_capacity_bits: secrecy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AsymptoticModel {
    /// Two i.i.d. Rayleigh subchannels.
    Ofdm2,
    /// 2×2 i.i.d. Gaussian MIMO.
    Mimo2x2,
}

impl std::str::FromStr for AsymptoticModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ofdm2" => Ok(AsymptoticModel::Ofdm2),
            "mimo2x2" => Ok(AsymptoticModel::Mimo2x2),
            other => Err(Error::UnsupportedModel(other.to_string())),
        }
    }
}

const UPPER: f64 = 40.0;
const INNER_TOL: f64 = 1e-11;
const OUTER_TOL: f64 = 1e-9;
const MAX_DEPTH: u32 = 50;

// 15-point Kronrod nodes on [0, 1] (symmetric), with the embedded 7-point
// Gauss weights on the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7K15 panel: (Kronrod estimate, |Kronrod − Gauss|).
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Recursive adaptive Gauss–Kronrod integration to absolute tolerance `tol`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (k, err) = gk15(f, a, b);
        if err <= tol || depth >= MAX_DEPTH {
            return k;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    rec(&mut f, a, b, tol, 0)
}

/// `E[Σ log₂(λ_l²/λ'_l²)]`, the limit of the expected OT rate, by nested
/// quadrature of the ordered-gain densities on `[0, 40]`.
pub fn asymptotic_constant(model: AsymptoticModel) -> f64 {
    match model {
        AsymptoticModel::Ofdm2 => {
            // max S and min T of two Exp(1) draws; only the marginals matter
            // for E[log S − log T].
            let fs = |s: f64| 2.0 * (1.0 - (-s).exp()) * (-s).exp();
            let ft = |t: f64| 2.0 * (-2.0 * t).exp();
            integrate(
                |s| integrate(|t| (s / t).log2() * fs(s) * ft(t), 0.0, UPPER, INNER_TOL),
                0.0,
                UPPER,
                OUTER_TOL,
            )
        }
        AsymptoticModel::Mimo2x2 => integrate(
            |g0| {
                integrate(
                    |g1| {
                        let d = g0 - g1;
                        (g0 / g1).log2() * (-(g0 + g1)).exp() * d * d
                    },
                    0.0,
                    g0,
                    INNER_TOL,
                )
            },
            0.0,
            UPPER,
            OUTER_TOL,
        ),
    }
}

/// High-SNR slope of a rate curve in bits per doubling of P, from a
/// least-squares fit over its top three points taken at ≥ 10 dB spacing.
pub fn multiplexing_gain(curve: &RateCurve) -> Result<f64> {
    let mut picked = Vec::new();
    for p in curve.points.iter().rev() {
        match picked.last() {
            None => picked.push(p),
            Some(last) if last.snr_db - p.snr_db >= 10.0 - 1e-9 => picked.push(p),
            _ => {}
        }
        if picked.len() == 3 {
            break;
        }
    }
    if picked.len() < 3 {
        return Err(Error::InsufficientPoints(format!(
            "need 3 points at ≥ 10 dB spacing, found {}",
            picked.len()
        )));
    }
    let xs: Vec<f64> = picked
        .iter()
        .map(|p| p.snr_db / 10.0 * 10f64.log2())
        .collect();
    let ys: Vec<f64> = picked.iter().map(|p| p.mean_rate_bits).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::mean_and_stderr;
    use crate::harness::CurvePoint;
    use crate::pairing::PairGain;
    use crate::powalloc::allocate_block;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};

    fn alloc(per_pair: Vec<f64>) -> PowerAllocation {
        PowerAllocation {
            budget: per_pair.iter().sum(),
            per_pair,
            eta: None,
            achieved_rate: 0.0,
        }
    }

    #[test]
    fn secrecy_capacity_examples() {
        assert!((secrecy_capacity(3.0, 1.0) - 1.0).abs() < 1e-15);
        for x in [0.0, 0.3, 7.0, 1e6] {
            assert_eq!(secrecy_capacity(x, x), 0.0);
        }
        assert_eq!(secrecy_capacity(1.0, 5.0), 0.0);
        let snr = 1e3 / 2.0 * 1.7;
        assert_eq!(secrecy_capacity(snr, 0.0), (1.0 + snr).log2());
    }

    #[test]
    fn pair_rate_examples() {
        let pg = [PairGain {
            strong: 2.0,
            weak: 1.0,
        }];
        let r = pair_rates(&pg, &alloc(vec![1.0]), 0.0).unwrap();
        assert!((r.total_bits - (5f64.log2() - 1.0)).abs() < 1e-12);
        assert!((r.total_bits - 1.3219).abs() < 1e-4);

        let r = pair_rates(&pg, &alloc(vec![0.0]), 0.0).unwrap();
        assert_eq!(r.total_bits, 0.0);

        assert!(pair_rates(&pg, &alloc(vec![1.0, 1.0]), 0.0).is_err());
    }

    #[test]
    fn epsilon_floors_each_pair() {
        let pg = [
            PairGain {
                strong: 2.0,
                weak: 1.0,
            },
            PairGain {
                strong: 1.0,
                weak: 0.99,
            },
        ];
        let r = pair_rates(&pg, &alloc(vec![1.0, 1.0]), 0.1).unwrap();
        assert_eq!(r.per_pair_bits[1], 0.0);
        assert!((r.per_pair_bits[0] - (r.secrecy_capacity_bits[0] - 0.1)).abs() < 1e-15);
        assert_eq!(r.total_bits, r.per_pair_bits.iter().sum::<f64>());
        assert_eq!(
            r.secret_lengths(100),
            vec![(100.0 * r.per_pair_bits[0]).floor() as usize, 0]
        );
    }

    #[test]
    fn optimal_two_pair_total_matches_grid() {
        let pg = [
            PairGain {
                strong: 2.0,
                weak: 0.5,
            },
            PairGain {
                strong: 1.5,
                weak: 1.0,
            },
        ];
        let a = allocate_block(&pg, 4.0).unwrap();
        let r = pair_rates(&pg, &a, 0.0).unwrap();
        let mut best = f64::NEG_INFINITY;
        for i in 0..=40_000 {
            let p1 = 4.0 * i as f64 / 40_000.0;
            let t = secrecy_capacity(p1 * 4.0, p1 * 0.25)
                + secrecy_capacity((4.0 - p1) * 2.25, 4.0 - p1);
            best = best.max(t);
        }
        assert!((r.total_bits - best).abs() < 1e-6);
    }

    #[test]
    fn pair_rate_high_snr_limit() {
        let pg = [PairGain {
            strong: 2.0,
            weak: 1.0,
        }];
        let r = pair_rates(&pg, &alloc(vec![1e8]), 0.0).unwrap();
        assert!((r.total_bits - 2.0).abs() < 1e-3);
    }

    #[test]
    fn integrator_on_known_integrals() {
        let v = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        // integrable log singularity at the endpoint
        let v = integrate(|x| x.ln(), 0.0, 1.0, 1e-12);
        assert!((v + 1.0).abs() < 1e-9);
    }

    #[test]
    fn asymptotic_constants() {
        let ofdm = asymptotic_constant(AsymptoticModel::Ofdm2);
        assert!((ofdm - 2.0).abs() < 1e-6, "{ofdm}");
        let mimo = asymptotic_constant(AsymptoticModel::Mimo2x2);
        let exact = (1.0 + 2.0 * LN_2) / LN_2;
        assert!((mimo - exact).abs() < 1e-6, "{mimo} vs {exact}");
        assert!((mimo - 3.4427).abs() < 1e-3);
    }

    #[test]
    fn mimo_density_vanishes_on_diagonal() {
        let g: f64 = 1.3;
        let d = g - g;
        assert_eq!((g / g).log2() * (-(2.0 * g)).exp() * d * d, 0.0);
    }

    #[test]
    fn ofdm2_constant_matches_monte_carlo() {
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let a: f64 = Exp1.sample(&mut r);
                let b: f64 = Exp1.sample(&mut r);
                (a.max(b) / a.min(b)).log2()
            })
            .collect();
        let (mean, se) = mean_and_stderr(&samples);
        let q = asymptotic_constant(AsymptoticModel::Ofdm2);
        assert!((mean - q).abs() < 3.0 * se, "{mean} ± {se} vs {q}");
    }

    #[test]
    fn model_tags() {
        assert_eq!(
            "MIMO2x2".parse::<AsymptoticModel>().unwrap(),
            AsymptoticModel::Mimo2x2
        );
        assert!(matches!(
            "mimo3x3".parse::<AsymptoticModel>(),
            Err(Error::UnsupportedModel(_))
        ));
    }

    fn curve(points: &[(f64, f64)]) -> RateCurve {
        RateCurve {
            points: points
                .iter()
                .map(|&(snr_db, mean_rate_bits)| CurvePoint {
                    snr_db,
                    mean_rate_bits,
                    std_error: 0.0,
                    trials: 1,
                })
                .collect(),
        }
    }

    #[test]
    fn slope_of_exact_line() {
        let pts: Vec<(f64, f64)> = (0..=10)
            .map(|i| {
                let db = 5.0 * i as f64;
                (db, 2.0 * (db / 10.0 * 10f64.log2()) + 0.7)
            })
            .collect();
        let s = multiplexing_gain(&curve(&pts)).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn slope_window_uses_top_points() {
        // a kink at low SNR must not affect the estimate
        let pts = [(0.0, 100.0), (30.0, 1.0), (40.0, 1.0), (50.0, 1.0)];
        assert_eq!(multiplexing_gain(&curve(&pts)).unwrap(), 0.0);
    }

    #[test]
    fn slope_needs_enough_span() {
        let pts = [(40.0, 1.0), (45.0, 1.0), (50.0, 1.0)];
        assert!(matches!(
            multiplexing_gain(&curve(&pts)),
            Err(Error::InsufficientPoints(_))
        ));
    }

    proptest! {
        #[test]
        fn secrecy_capacity_monotone(b in 0.0f64..1e4, e in 0.0f64..1e4, d in 0.0f64..10.0) {
            let c = secrecy_capacity(b, e);
            prop_assert!(c >= 0.0);
            prop_assert!(secrecy_capacity(b + d, e) >= c);
            prop_assert!(secrecy_capacity(b, e + d) <= c);
        }
    }
}
