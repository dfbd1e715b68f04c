//! Power allocation across OT pairs.
//!
//! A pair with amplitude gains `λ ≥ λ'` and per-subchannel power `P` carries
//! `log(1+Pλ²) − log(1+Pλ'²)`. Maximizing the sum under `Σ P_l = budget`
//! gives, with `a = λ²`, `b = λ'²` and multiplier `η`,
//!
//! ```text
//! b = 0:  P = (1/η − 1/a)⁺
//! b > 0:  P = (√f − ½(1/a + 1/b))⁺,   f = ¼(1/b − 1/a)·[(1/b − 1/a) + 4/η]
//! ```
//!
//! `η` here is the multiplier of the natural-log objective, i.e. at an
//! interior optimum `d/dP [ln(1+Pa) − ln(1+Pb)] = η`. Rates are reported in
//! bits, so the bit-rate derivative equals `η / ln 2`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{mean_and_stderr, pairwise_sum, Execution};
use crate::pairing::PairGain;

const BISECTION_ITERS: usize = 200;
const ETA_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerAllocation {
    /// Power on each subchannel of pair `l`.
    pub per_pair: Vec<f64>,
    /// Absent when no pair can carry a positive rate.
    pub eta: Option<f64>,
    pub budget: f64,
    pub achieved_rate: f64,
}

/// Secrecy rate of one pair in bits at per-subchannel power `p`.
pub fn pair_rate_bits(g: PairGain, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let a = g.strong * g.strong;
    let b = g.weak * g.weak;
    (((p * a).ln_1p() - (p * b).ln_1p()) / std::f64::consts::LN_2).max(0.0)
}

pub fn total_rate_bits(pairs: &[PairGain], powers: &[f64]) -> f64 {
    pairs
        .iter()
        .zip(powers)
        .map(|(&g, &p)| pair_rate_bits(g, p))
        .sum()
}

/// Multiplier value at which pair `g` switches on: its marginal rate at zero
/// power, `λ² − λ'²`.
pub fn activation_eta(g: PairGain) -> f64 {
    (g.strong * g.strong - g.weak * g.weak).max(0.0)
}

/// Optimal power of a single pair for multiplier `eta`.
pub fn pair_power(g: PairGain, eta: f64) -> f64 {
    let a = g.strong * g.strong;
    let b = g.weak * g.weak;
    if a <= b {
        return 0.0;
    }
    if b == 0.0 {
        return (1.0 / eta - 1.0 / a).max(0.0);
    }
    let d = 1.0 / b - 1.0 / a;
    // √f − h rewritten as (f − h²)/(√f + h) to avoid cancellation
    let num = d / eta - 1.0 / (a * b);
    if num <= 0.0 {
        return 0.0;
    }
    if !num.is_finite() {
        return f64::INFINITY;
    }
    let f = 0.25 * d * d + d / eta;
    num / (0.5 * (1.0 / a + 1.0 / b) + f.sqrt())
}

fn check_pairs(pairs: &[PairGain]) -> Result<()> {
    for g in pairs {
        if !(g.weak >= 0.0 && g.strong >= g.weak && g.strong.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "pair gains must satisfy strong ≥ weak ≥ 0, got ({}, {})",
                g.strong, g.weak
            )));
        }
    }
    Ok(())
}

/// Finds `η` with `total(η) = budget` for a non-increasing `total`, given
/// `hi` where `total(hi) = 0`. Geometric bisection; the bracket is extended
/// downward until it encloses the root.
fn solve_eta(total: impl Fn(f64) -> f64, budget: f64, hi: f64) -> Result<f64> {
    let mut hi = hi;
    let mut lo = hi;
    while total(lo) < budget {
        hi = lo;
        lo *= 1e-3;
        if lo < ETA_FLOOR {
            return Err(Error::BracketFailure(format!(
                "power {budget:.3e} not reached for η ≥ {ETA_FLOOR:e}"
            )));
        }
    }
    for _ in 0..BISECTION_ITERS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // total(hi) ≤ budget ≤ total(lo); pick the closer one that does not overshoot
    let (t_lo, t_hi) = (total(lo), total(hi));
    if t_lo <= budget * (1.0 + 1e-12) && (t_lo - budget).abs() < (budget - t_hi).abs() {
        Ok(lo)
    } else {
        Ok(hi)
    }
}

/// Optimal per-block allocation of `budget` (= P/2) over the pairs.
pub fn allocate_block(pairs: &[PairGain], budget: f64) -> Result<PowerAllocation> {
    if !budget.is_finite() || budget <= 0.0 {
        return Err(Error::NonPositiveBudget(budget));
    }
    check_pairs(pairs)?;
    let hi = pairs.iter().map(|&g| activation_eta(g)).fold(0.0, f64::max);
    if hi == 0.0 {
        return Ok(PowerAllocation {
            per_pair: vec![0.0; pairs.len()],
            eta: None,
            budget,
            achieved_rate: 0.0,
        });
    }
    let total = |eta: f64| pairs.iter().map(|&g| pair_power(g, eta)).sum::<f64>();
    let eta = solve_eta(total, budget, hi)?;
    let per_pair: Vec<f64> = pairs.iter().map(|&g| pair_power(g, eta)).collect();
    let achieved_rate = total_rate_bits(pairs, &per_pair);
    Ok(PowerAllocation {
        per_pair,
        eta: Some(eta),
        budget,
        achieved_rate,
    })
}

/// Classic water-filling of `total` over subchannels with amplitude gains
/// `gains`: `p_i = (μ − 1/λ_i²)⁺`. Used for the non-OT capacity baseline.
pub fn waterfill(gains: &[f64], total: f64) -> Vec<f64> {
    let inv: Vec<f64> = gains
        .iter()
        .map(|&g| {
            if g > 0.0 {
                1.0 / (g * g)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| inv[i].is_finite()).collect();
    order.sort_by(|&a, &b| inv[a].total_cmp(&inv[b]));
    let mut powers = vec![0.0; gains.len()];
    if total <= 0.0 || order.is_empty() {
        return powers;
    }
    let mut active = order.len();
    let mut level;
    loop {
        let sum_inv: f64 = order[..active].iter().map(|&i| inv[i]).sum();
        level = (total + sum_inv) / active as f64;
        if level > inv[order[active - 1]] || active == 1 {
            break;
        }
        active -= 1;
    }
    for &i in &order[..active] {
        powers[i] = (level - inv[i]).max(0.0);
    }
    powers
}

/// Capacity in bits of parallel subchannels with water-filled power.
pub fn waterfill_capacity_bits(gains: &[f64], total: f64) -> f64 {
    let p = waterfill(gains, total);
    gains
        .iter()
        .zip(&p)
        .map(|(&g, &p)| (p * g * g).ln_1p() / std::f64::consts::LN_2)
        .sum()
}

/// Allocation under a long-term average power constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicAllocation {
    pub eta: f64,
    pub mean_rate_bits: f64,
    pub rate_std_error: f64,
    pub mean_power: f64,
    pub trials: usize,
}

/// Global-η allocation over a fixed batch of states (common random numbers:
/// the same batch is reused for every candidate η).
pub fn ergodic_allocation(
    states: &[Vec<PairGain>],
    budget: f64,
    exec: Execution,
) -> Result<ErgodicAllocation> {
    if !budget.is_finite() || budget <= 0.0 {
        return Err(Error::NonPositiveBudget(budget));
    }
    if states.is_empty() {
        return Err(Error::InvalidInput("no states to average over".into()));
    }
    for s in states {
        check_pairs(s)?;
    }
    let hi = states
        .iter()
        .flat_map(|s| s.iter().map(|&g| activation_eta(g)))
        .fold(0.0, f64::max);
    if hi == 0.0 {
        return Err(Error::BracketFailure(
            "no state admits a positive rate".into(),
        ));
    }
    let n = states.len() as f64;
    let mean_power = |eta: f64| {
        let per_state = exec.map_slice(states, |s| {
            s.iter().map(|&g| pair_power(g, eta)).sum::<f64>()
        });
        pairwise_sum(&per_state) / n
    };
    let eta = solve_eta(mean_power, budget, hi)?;
    let rates = exec.map_slice(states, |s| {
        s.iter()
            .map(|&g| pair_rate_bits(g, pair_power(g, eta)))
            .sum::<f64>()
    });
    let (mean_rate_bits, rate_std_error) = mean_and_stderr(&rates);
    Ok(ErgodicAllocation {
        eta,
        mean_rate_bits,
        rate_std_error,
        mean_power: mean_power(eta),
        trials: states.len(),
    })
}

/// Draws `trials` states from `sampler` and solves for the global η.
pub fn allocate_ergodic<R, F>(
    mut sampler: F,
    budget: f64,
    trials: usize,
    rng: &mut R,
    exec: Execution,
) -> Result<ErgodicAllocation>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<Vec<PairGain>>,
{
    if trials < 10_000 {
        return Err(Error::InvalidInput(format!(
            "ergodic allocation needs at least 10^4 trials, got {trials}"
        )));
    }
    let states = (0..trials)
        .map(|_| sampler(rng))
        .collect::<Result<Vec<_>>>()?;
    ergodic_allocation(&states, budget, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sorted_gains;
    use crate::channel::Model;
    use crate::pairing::optimal_pairing;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pg(strong: f64, weak: f64) -> PairGain {
        PairGain { strong, weak }
    }

    fn ofdm2_pairs(r: &mut ChaCha8Rng) -> Result<Vec<PairGain>> {
        let g = sorted_gains(Model::Ofdm { subchannels: 2 }, r)?;
        Ok(optimal_pairing(&g)?.pair_gains(&g))
    }

    #[test]
    fn single_pair_waterfill() {
        let a = allocate_block(&[pg(1.0, 0.0)], 2.0).unwrap();
        assert!((a.per_pair[0] - 2.0).abs() < 1e-12);
        assert!((a.eta.unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn equal_gains_get_nothing() {
        let a = allocate_block(&[pg(2.0, 2.0)], 5.0).unwrap();
        assert_eq!(a.per_pair, vec![0.0]);
        assert_eq!(a.achieved_rate, 0.0);
        assert_eq!(a.eta, None);
        // mixed: the equal pair stays at zero
        let a = allocate_block(&[pg(2.0, 2.0), pg(1.0, 0.2)], 5.0).unwrap();
        assert_eq!(a.per_pair[0], 0.0);
        assert!((a.per_pair[1] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn bad_inputs() {
        assert!(allocate_block(&[pg(1.0, 0.0)], 0.0).is_err());
        assert!(allocate_block(&[pg(1.0, 0.0)], -1.0).is_err());
        assert!(allocate_block(&[pg(0.5, 1.0)], 1.0).is_err());
    }

    #[test]
    fn all_zero_gains() {
        let a = allocate_block(&[pg(0.0, 0.0), pg(0.0, 0.0)], 1.0).unwrap();
        assert_eq!(a.per_pair, vec![0.0, 0.0]);
        assert_eq!(a.eta, None);
    }

    #[test]
    fn two_pairs_match_grid_search() {
        let pairs = [pg(2.0, 0.5), pg(1.5, 1.0)];
        let budget = 4.0;
        let a = allocate_block(&pairs, budget).unwrap();
        let mut best = (f64::NEG_INFINITY, 0.0);
        let steps = 40_000;
        for i in 0..=steps {
            let p1 = budget * i as f64 / steps as f64;
            let r = total_rate_bits(&pairs, &[p1, budget - p1]);
            if r > best.0 {
                best = (r, p1);
            }
        }
        assert!(
            (a.achieved_rate - best.0).abs() < 1e-6,
            "{} vs {}",
            a.achieved_rate,
            best.0
        );
        assert!((a.per_pair[0] - best.1).abs() < 1e-3);
    }

    #[test]
    fn closed_form_root_matches_textbook_form() {
        // stable rewrite agrees with √f − ½(1/a + 1/b)
        let g = pg(1.7, 0.6);
        let (a, b) = (1.7f64.powi(2), 0.6f64.powi(2));
        for &eta in &[0.01, 0.1, 0.5, 1.0] {
            let d = 1.0 / b - 1.0 / a;
            let f = 0.25 * d * (d + 4.0 / eta);
            let naive = (f.sqrt() - 0.5 * (1.0 / a + 1.0 / b)).max(0.0);
            assert!((pair_power(g, eta) - naive).abs() < 1e-10 * (1.0 + naive));
        }
    }

    #[test]
    fn activation_threshold() {
        let g = pg(2.0, 1.0);
        let t = activation_eta(g);
        assert_eq!(t, 3.0);
        assert_eq!(pair_power(g, t), 0.0);
        assert!(pair_power(g, t * 0.999) > 0.0);
    }

    #[test]
    fn high_snr_limits() {
        // 2N = 4, n_B = 3: one pair with a zero weak gain, one without
        let pairs = [pg(2.0, 0.0), pg(1.5, 0.8)];
        let p_total = 1e8;
        let a = allocate_block(&pairs, p_total / 2.0).unwrap();
        let eta = a.eta.unwrap();
        assert!((eta * a.per_pair[0] - 1.0).abs() < 0.01);
        let lim = (1.0 / 0.64 - 1.0 / 2.25f64).sqrt();
        assert!((eta.sqrt() * a.per_pair[1] / lim - 1.0).abs() < 0.01);
        assert!((eta * p_total / 2.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn waterfill_examples() {
        let p = waterfill(&[1.0, 0.0], 2.0);
        assert_eq!(p, vec![2.0, 0.0]);
        // equal gains split evenly
        let p = waterfill(&[1.0, 1.0], 2.0);
        assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        // weak channel shut off at low power: 1/g² = 1 and 100
        let p = waterfill(&[1.0, 0.1], 5.0);
        assert_eq!(p, vec![5.0, 0.0]);
        let p = waterfill(&[2.0, 1.0, 0.5], 10.0);
        assert!((p.iter().sum::<f64>() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn ergodic_degenerate_state() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let e = allocate_ergodic(
            |_r: &mut ChaCha8Rng| Ok(vec![pg(1.0, 0.0)]),
            2.0,
            10_000,
            &mut r,
            Execution::Parallel,
        )
        .unwrap();
        assert!((e.eta - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ergodic_needs_enough_trials() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let out = allocate_ergodic(
            |_r: &mut ChaCha8Rng| Ok(vec![pg(1.0, 0.0)]),
            2.0,
            100,
            &mut r,
            Execution::Sequential,
        );
        assert!(out.is_err());
    }

    #[test]
    fn ergodic_ofdm2_at_60_db() {
        let budget = 1e6 / 2.0;
        let mut r = ChaCha8Rng::seed_from_u64(60);
        let erg =
            allocate_ergodic(ofdm2_pairs, budget, 100_000, &mut r, Execution::Parallel).unwrap();
        assert!((erg.mean_power - budget).abs() <= 1e-9 * budget);
        assert!(
            (erg.mean_rate_bits - 2.0).abs() < 0.1,
            "{}",
            erg.mean_rate_bits
        );

        // same states, per-block allocation
        let mut r = ChaCha8Rng::seed_from_u64(60);
        let per_block: Vec<f64> = (0..100_000)
            .map(|_| {
                allocate_block(&ofdm2_pairs(&mut r).unwrap(), budget)
                    .unwrap()
                    .achieved_rate
            })
            .collect();
        let (mean, se) = mean_and_stderr(&per_block);
        assert!(erg.mean_rate_bits >= mean - 2.0 * se.max(erg.rate_std_error));
    }

    fn pair_list() -> impl Strategy<Value = (Vec<PairGain>, f64)> {
        let pair = (0.05f64..3.0, 0.0f64..1.0, prop::bool::weighted(0.3))
            .prop_map(|(s, frac, zero)| pg(s, if zero { 0.0 } else { s * frac }));
        (proptest::collection::vec(pair, 1..5), 0.1f64..100.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn budget_and_kkt((pairs, budget) in pair_list()) {
            let a = allocate_block(&pairs, budget).unwrap();
            let used: f64 = a.per_pair.iter().sum();
            prop_assert!(a.per_pair.iter().all(|&p| p >= 0.0));
            if let Some(eta) = a.eta {
                prop_assert!((used - budget).abs() <= 1e-9 * budget);
                for (&g, &p) in pairs.iter().zip(&a.per_pair) {
                    let (x, y) = (g.strong * g.strong, g.weak * g.weak);
                    let slope_nats = x / (1.0 + p * x) - y / (1.0 + p * y);
                    if p > 0.0 {
                        prop_assert!((slope_nats - eta).abs() <= 1e-6 * eta.max(1.0));
                    } else {
                        prop_assert!(slope_nats <= eta * (1.0 + 1e-9));
                    }
                }
            } else {
                prop_assert_eq!(used, 0.0);
            }
        }

        #[test]
        fn no_pairwise_transfer_helps((pairs, budget) in pair_list()) {
            let a = allocate_block(&pairs, budget).unwrap();
            let base = total_rate_bits(&pairs, &a.per_pair);
            let delta = 1e-4;
            for i in 0..pairs.len() {
                for j in 0..pairs.len() {
                    if i == j || a.per_pair[i] < delta {
                        continue;
                    }
                    let mut p = a.per_pair.clone();
                    p[i] -= delta;
                    p[j] += delta;
                    prop_assert!(total_rate_bits(&pairs, &p) - base <= 1e-8);
                }
            }
        }

        #[test]
        fn rate_monotone_in_budget((pairs, budget) in pair_list(), factor in 1.0f64..10.0) {
            let lo = allocate_block(&pairs, budget).unwrap().achieved_rate;
            let hi = allocate_block(&pairs, budget * factor).unwrap().achieved_rate;
            prop_assert!(hi >= lo - 1e-12);
        }
    }
}
