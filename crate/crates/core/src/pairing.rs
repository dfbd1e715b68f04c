//! Grouping of 2N subchannels into N (strong, weak) pairs.
//!
//! [`optimal_pairing`] couples the best subchannel with the worst, the second
//! best with the second worst, and so on. [`brute_force_best_pairing`] is an
//! exhaustive search used to check that claim.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::powalloc;

/// Bob's private choice bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    Zero,
    One,
}

impl Choice {
    pub fn index(self) -> usize {
        match self {
            Choice::Zero => 0,
            Choice::One => 1,
        }
    }

    pub fn flip(self) -> Choice {
        match self {
            Choice::Zero => Choice::One,
            Choice::One => Choice::Zero,
        }
    }

    pub fn from_bit(bit: bool) -> Choice {
        if bit {
            Choice::One
        } else {
            Choice::Zero
        }
    }
}

/// Gains of one pair, `strong ≥ weak`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGain {
    pub strong: f64,
    pub weak: f64,
}

/// The two index maps ℓ (strong side) and k (weak side).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Pairing {
    pub strong: Vec<usize>,
    pub weak: Vec<usize>,
}

impl Pairing {
    pub fn len(&self) -> usize {
        self.strong.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strong.is_empty()
    }

    pub fn pair_gains(&self, gains: &[f64]) -> Vec<PairGain> {
        self.strong
            .iter()
            .zip(&self.weak)
            .map(|(&s, &w)| PairGain {
                strong: gains[s],
                weak: gains[w],
            })
            .collect()
    }

    /// Checks injectivity, disjoint cover of `0..2N` and strong ≥ weak.
    pub fn validate(&self, gains: &[f64]) -> Result<()> {
        let n2 = gains.len();
        if self.strong.len() != self.weak.len() || 2 * self.strong.len() != n2 {
            return Err(Error::LengthMismatch {
                expected: n2,
                got: self.strong.len() + self.weak.len(),
            });
        }
        let mut seen = vec![false; n2];
        for &i in self.strong.iter().chain(&self.weak) {
            if i >= n2 || seen[i] {
                return Err(Error::InvalidInput(format!(
                    "index {i} used twice or out of range"
                )));
            }
            seen[i] = true;
        }
        for (&s, &w) in self.strong.iter().zip(&self.weak) {
            if gains[s] < gains[w] {
                return Err(Error::InvalidInput(format!(
                    "pair ({s},{w}) has strong gain below weak gain"
                )));
            }
        }
        Ok(())
    }
}

/// Ordered per-pair subchannel indices announced to Alice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GammaAssignment {
    pub pairs: Vec<[usize; 2]>,
}

impl GammaAssignment {
    /// Swaps the two entries of every pair.
    pub fn transposed(&self) -> GammaAssignment {
        GammaAssignment {
            pairs: self.pairs.iter().map(|&[a, b]| [b, a]).collect(),
        }
    }
}

fn check_even(gains: &[f64]) -> Result<()> {
    if gains.is_empty() || !gains.len().is_multiple_of(2) {
        return Err(Error::OddChannelCount(gains.len()));
    }
    if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::InvalidInput(
            "gains must be finite and non-negative".into(),
        ));
    }
    Ok(())
}

/// Indices sorted by gain, largest first; equal gains keep index order.
pub fn descending_order(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    order
}

/// Best-with-worst pairing: `strong[l] = σ(l)`, `weak[l] = σ(2N−1−l)`.
pub fn optimal_pairing(gains: &[f64]) -> Result<Pairing> {
    check_even(gains)?;
    Ok(pairing_from_order(&descending_order(gains)))
}

/// [`optimal_pairing`] with equal gains ordered by `rank` (ascending)
/// instead of by index. Bob passes private randomness here: with an
/// index-based tie rule, which of two equal (e.g. zero) gains lands on the
/// weak side is predictable and γ's orientation would leak the choice bit.
pub fn optimal_pairing_ranked(gains: &[f64], rank: &[usize]) -> Result<Pairing> {
    check_even(gains)?;
    if rank.len() != gains.len() {
        return Err(Error::LengthMismatch {
            expected: gains.len(),
            got: rank.len(),
        });
    }
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(rank[a].cmp(&rank[b])));
    Ok(pairing_from_order(&order))
}

fn pairing_from_order(order: &[usize]) -> Pairing {
    let n = order.len() / 2;
    Pairing {
        strong: order[..n].to_vec(),
        weak: order[n..].iter().rev().copied().collect(),
    }
}

/// γ for choice `c`: `(ℓ(l), k(l))` when `c = 0`, `(k(l), ℓ(l))` when `c = 1`,
/// so entry `c` of every pair is always the strong subchannel.
pub fn build_gamma(p: &Pairing, c: Choice) -> GammaAssignment {
    let pairs = p
        .strong
        .iter()
        .zip(&p.weak)
        .map(|(&s, &w)| match c {
            Choice::Zero => [s, w],
            Choice::One => [w, s],
        })
        .collect();
    GammaAssignment { pairs }
}

/// Every perfect matching of `0..n`, in lexicographic order.
pub fn all_matchings(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(
        free: &mut Vec<usize>,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let first = free.remove(0);
        for i in 0..free.len() {
            let partner = free.remove(i);
            cur.push((first, partner));
            rec(free, cur, out);
            cur.pop();
            free.insert(i, partner);
        }
        free.insert(0, first);
    }
    let mut out = Vec::new();
    rec(&mut (0..n).collect(), &mut Vec::new(), &mut out);
    out
}

/// Result of the exhaustive pairing/power search.
#[derive(Debug, Clone)]
pub struct OracleOptimum {
    pub pairing: Pairing,
    pub per_pair_power: Vec<f64>,
    pub rate_bits: f64,
    /// Best rate on the grid alone (before refinement) for the winning pairing.
    pub grid_rate_bits: f64,
    /// Best rate reached by grid + local search, without the closed form.
    pub search_rate_bits: f64,
}

fn objective(pairs: &[PairGain], powers: &[f64]) -> f64 {
    pairs
        .iter()
        .zip(powers)
        .map(|(g, &p)| (1.0 + p * g.strong * g.strong).log2() - (1.0 + p * g.weak * g.weak).log2())
        .sum()
}

/// All compositions of `units` into `parts` non-negative integers.
fn compositions(units: usize, parts: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(left: usize, slot: usize, buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if slot + 1 == buf.len() {
            buf[slot] = left;
            f(buf);
            return;
        }
        for u in 0..=left {
            buf[slot] = u;
            rec(left - u, slot + 1, buf, f);
        }
    }
    let mut buf = vec![0; parts];
    rec(units, 0, &mut buf, f);
}

/// Pairwise power-transfer pattern search from `start`.
fn local_search(pairs: &[PairGain], start: Vec<f64>, budget: f64, step0: f64) -> (Vec<f64>, f64) {
    let mut p = start;
    let mut best = objective(pairs, &p);
    let mut step = step0;
    let mut evals = 0usize;
    while step > 1e-13 * budget && evals < 2_000_000 {
        let mut improved = false;
        for a in 0..p.len() {
            for b in 0..p.len() {
                if a == b {
                    continue;
                }
                let d = step.min(p[a]);
                if d <= 0.0 {
                    continue;
                }
                p[a] -= d;
                p[b] += d;
                evals += 1;
                let r = objective(pairs, &p);
                if r > best {
                    best = r;
                    improved = true;
                } else {
                    p[a] += d;
                    p[b] -= d;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (p, best)
}

/// Exhaustive search over every pairing of up to 8 subchannels.
///
/// For each pairing the sum secrecy rate is maximized over a grid on the
/// power simplex `Σ P_l = budget` with `resolution` as the grid step (as a
/// fraction of the budget), then refined by a pattern search and compared
/// with the closed-form allocation. Equal-rate pairings resolve to the
/// lexicographically first.
pub fn brute_force_best_pairing(
    gains: &[f64],
    budget: f64,
    resolution: f64,
    exec: Execution,
) -> Result<OracleOptimum> {
    check_even(gains)?;
    if gains.len() > 8 {
        return Err(Error::OracleTooLarge(gains.len()));
    }
    if !budget.is_finite() || budget <= 0.0 {
        return Err(Error::NonPositiveBudget(budget));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "grid resolution {resolution} outside (0, 1]"
        )));
    }
    let n = gains.len() / 2;
    let units = (1.0 / resolution).round().max(1.0) as usize;
    let matchings = all_matchings(gains.len());

    let evaluate = |m: &Vec<(usize, usize)>| -> Result<(Pairing, Vec<f64>, f64, f64, f64)> {
        let mut strong = Vec::with_capacity(n);
        let mut weak = Vec::with_capacity(n);
        for &(i, j) in m {
            if gains[i] >= gains[j] {
                strong.push(i);
                weak.push(j);
            } else {
                strong.push(j);
                weak.push(i);
            }
        }
        let pairing = Pairing { strong, weak };
        let pg = pairing.pair_gains(gains);

        let mut grid_best = f64::NEG_INFINITY;
        let mut grid_arg = vec![0.0; n];
        compositions(units, n, &mut |c| {
            let p: Vec<f64> = c
                .iter()
                .map(|&u| budget * u as f64 / units as f64)
                .collect();
            let r = objective(&pg, &p);
            if r > grid_best {
                grid_best = r;
                grid_arg = p;
            }
        });
        let (searched, search_rate) = local_search(&pg, grid_arg, budget, budget / units as f64);

        let closed = powalloc::allocate_block(&pg, budget)?;
        let closed_rate = objective(&pg, &closed.per_pair);
        let (powers, rate) = if closed_rate > search_rate {
            (closed.per_pair, closed_rate)
        } else {
            (searched, search_rate)
        };
        Ok((pairing, powers, rate, grid_best, search_rate))
    };

    let results = exec.map_slice(&matchings, evaluate);
    let mut best: Option<(Pairing, Vec<f64>, f64, f64, f64)> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.2 > b.2) {
            best = Some(r);
        }
    }
    let (pairing, per_pair_power, rate_bits, grid_rate_bits, search_rate_bits) =
        best.expect("at least one matching");
    Ok(OracleOptimum {
        pairing,
        per_pair_power,
        rate_bits,
        grid_rate_bits,
        search_rate_bits,
    })
}
